//! Bivariate copulas parameterized by Kendall's tau.
//!
//! Extended Clayton and Gumbel reach negative tau by rotating the first
//! coordinate: `c(u1, u2; tau) = c0(1 - u1, u2; |tau|)` for `tau < 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dists::{std_normal_cdf, std_normal_quantile, student_t_cdf, student_t_quantile};
use crate::error::{domain, Result};
use crate::quad;

/// Pseudo-observations are clipped into `[U_CLIP, 1 - U_CLIP]`.
pub const U_CLIP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Gaussian,
    ExtClayton,
    ExtGumbel,
    SurvivalGumbel,
    StudentT,
    /// Student-t / extended Gumbel mixture.
    Mixture,
    /// Student-t / survival Gumbel mixture.
    SurvivalMixture,
}

impl CopulaFamily {
    pub const ALL: [CopulaFamily; 7] = [
        CopulaFamily::Gaussian,
        CopulaFamily::ExtClayton,
        CopulaFamily::ExtGumbel,
        CopulaFamily::SurvivalGumbel,
        CopulaFamily::StudentT,
        CopulaFamily::Mixture,
        CopulaFamily::SurvivalMixture,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::ExtClayton => "ext_clayton",
            CopulaFamily::ExtGumbel => "ext_gumbel",
            CopulaFamily::SurvivalGumbel => "survival_gumbel",
            CopulaFamily::StudentT => "student_t",
            CopulaFamily::Mixture => "mixture",
            CopulaFamily::SurvivalMixture => "survival_mixture",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .iter()
            .copied()
            .find(|f| f.name() == norm)
            .map_or_else(|| domain(format!("unknown copula family '{s}'")), Ok)
    }

    pub fn uses_nu(&self) -> bool {
        matches!(
            self,
            CopulaFamily::StudentT | CopulaFamily::Mixture | CopulaFamily::SurvivalMixture
        )
    }

    pub fn is_mixture(&self) -> bool {
        matches!(self, CopulaFamily::Mixture | CopulaFamily::SurvivalMixture)
    }
}

/// Dependence parameters shared by all families. `nu` is read only by the
/// Student-t based families, `p` only by the mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaParams {
    pub tau: f64,
    pub nu: f64,
    pub p: f64,
}

impl CopulaParams {
    pub fn tau(tau: f64) -> Self {
        CopulaParams {
            tau,
            nu: f64::NAN,
            p: f64::NAN,
        }
    }

    pub fn student_t(tau: f64, nu: f64) -> Self {
        CopulaParams { tau, nu, p: 1.0 }
    }

    pub fn mixture(tau: f64, nu: f64, p: f64) -> Self {
        CopulaParams { tau, nu, p }
    }

    pub fn validate(&self, family: CopulaFamily) -> Result<()> {
        if !(self.tau.abs() < 1.0) {
            return domain(format!("tau must lie in (-1, 1), got {}", self.tau));
        }
        if family.uses_nu() && !(self.nu > 2.0) {
            return domain(format!("nu must be > 2, got {}", self.nu));
        }
        if family.is_mixture() && !(0.0..=1.0).contains(&self.p) {
            return domain(format!("p must lie in [0, 1], got {}", self.p));
        }
        Ok(())
    }
}

/// Parameters of the Student-t / Gumbel mixture copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub tau: f64,
    pub nu: f64,
    pub p: f64,
}

impl From<MixtureParams> for CopulaParams {
    fn from(m: MixtureParams) -> Self {
        CopulaParams::mixture(m.tau, m.nu, m.p)
    }
}

pub fn fisher_z(x: f64) -> Result<f64> {
    if !(x.abs() < 1.0) {
        return domain(format!("Fisher Z needs |x| < 1, got {x}"));
    }
    Ok(x.atanh())
}

pub fn fisher_z_inv(z: f64) -> f64 {
    z.tanh()
}

pub fn tau_to_rho(tau: f64) -> f64 {
    (FRAC_PI_2 * tau).sin()
}

pub fn gumbel_theta(abs_tau: f64) -> f64 {
    1.0 / (1.0 - abs_tau)
}

pub fn clayton_theta(abs_tau: f64) -> f64 {
    2.0 * abs_tau / (1.0 - abs_tau)
}

/// Native parameter for `family` at `tau`: the correlation for the
/// elliptical families (and the Student-t component of mixtures), the
/// Archimedean parameter of `|tau|` otherwise.
pub fn tau_to_param(family: CopulaFamily, tau: f64) -> Result<f64> {
    if !(tau.abs() < 1.0) {
        return domain(format!("tau must lie in (-1, 1), got {tau}"));
    }
    Ok(match family {
        CopulaFamily::Gaussian | CopulaFamily::StudentT | CopulaFamily::Mixture | CopulaFamily::SurvivalMixture => {
            tau_to_rho(tau)
        }
        CopulaFamily::ExtClayton => clayton_theta(tau.abs()),
        CopulaFamily::ExtGumbel | CopulaFamily::SurvivalGumbel => gumbel_theta(tau.abs()),
    })
}

/// Log of the Student-t copula normalizing constant.
pub fn t_copula_log_const(nu: f64) -> f64 {
    ln_gamma(0.5 * (nu + 2.0)) + ln_gamma(0.5 * nu) - 2.0 * ln_gamma(0.5 * (nu + 1.0))
}

/// An unrotated exchangeable copula.
#[derive(Debug, Clone, Copy)]
enum Base {
    Gauss { rho: f64 },
    T { rho: f64, nu: f64, log_k: f64 },
    Clayton { theta: f64 },
    Gumbel { theta: f64 },
}

/// A base copula with optional reflection of each coordinate.
#[derive(Debug, Clone, Copy)]
struct Oriented {
    base: Base,
    flip1: bool,
    flip2: bool,
}

#[inline]
fn flip(u: f64, f: bool) -> f64 {
    if f {
        1.0 - u
    } else {
        u
    }
}

fn gumbel_oriented(tau: f64, survival: bool) -> Oriented {
    let base = Base::Gumbel {
        theta: gumbel_theta(tau.abs()),
    };
    let neg = tau < 0.0;
    // Survival Gumbel is the Gumbel with both coordinates reflected; its
    // negative-tau extension reflects the first coordinate once more.
    let (flip1, flip2) = match (survival, neg) {
        (false, false) => (false, false),
        (false, true) => (true, false),
        (true, false) => (true, true),
        (true, true) => (false, true),
    };
    Oriented { base, flip1, flip2 }
}

fn t_oriented(tau: f64, nu: f64) -> Oriented {
    Oriented {
        base: Base::T {
            rho: tau_to_rho(tau),
            nu,
            log_k: t_copula_log_const(nu),
        },
        flip1: false,
        flip2: false,
    }
}

/// A resolved copula ready for evaluation.
#[derive(Debug, Clone, Copy)]
struct Resolved {
    first: Oriented,
    // Second component and weight of the first, for mixtures.
    second: Option<(Oriented, f64)>,
}

fn resolve(family: CopulaFamily, params: &CopulaParams) -> Result<Resolved> {
    params.validate(family)?;
    let tau = params.tau;
    let plain = |base| Oriented {
        base,
        flip1: false,
        flip2: false,
    };
    let first = match family {
        CopulaFamily::Gaussian => plain(Base::Gauss { rho: tau_to_rho(tau) }),
        CopulaFamily::StudentT => t_oriented(tau, params.nu),
        CopulaFamily::ExtClayton => Oriented {
            base: Base::Clayton {
                theta: clayton_theta(tau.abs()),
            },
            flip1: tau < 0.0,
            flip2: false,
        },
        CopulaFamily::ExtGumbel => gumbel_oriented(tau, false),
        CopulaFamily::SurvivalGumbel => gumbel_oriented(tau, true),
        CopulaFamily::Mixture | CopulaFamily::SurvivalMixture => {
            let g = gumbel_oriented(tau, family == CopulaFamily::SurvivalMixture);
            return Ok(Resolved {
                first: t_oriented(tau, params.nu),
                second: Some((g, params.p)),
            });
        }
    };
    Ok(Resolved { first, second: None })
}

// ---- base copula kernels ----

fn gauss_logc_scores(x: f64, y: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

/// Student-t copula log density from t scores. `marg` is
/// `(nu + 1)/2 * (ln(1 + x^2/nu) + ln(1 + y^2/nu))`.
#[inline]
pub fn t_logc_scores(x: f64, y: f64, marg: f64, rho: f64, nu: f64, log_k: f64) -> f64 {
    let r2 = 1.0 - rho * rho;
    let zeta = (x * x + y * y - 2.0 * rho * x * y) / (nu * r2);
    log_k - 0.5 * r2.ln() - 0.5 * (nu + 2.0) * zeta.ln_1p() + marg
}

/// The marginal term used by [`t_logc_scores`].
pub fn t_marginal_term(x: f64, y: f64, nu: f64) -> f64 {
    0.5 * (nu + 1.0) * ((x * x / nu).ln_1p() + (y * y / nu).ln_1p())
}

// log of x^-theta + y^-theta - 1 from ln x, ln y, without overflow.
fn clayton_log_sum(lx: f64, ly: f64, theta: f64) -> f64 {
    let a = -theta * lx;
    let b = -theta * ly;
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

fn clayton_logc(u: f64, v: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let (lu, lv) = (u.ln(), v.ln());
    theta.ln_1p() - (theta + 1.0) * (lu + lv) - (2.0 + 1.0 / theta) * clayton_log_sum(lu, lv, theta)
}

fn gumbel_logc(u: f64, v: f64, theta: f64) -> f64 {
    let a = -u.ln();
    let b = -v.ln();
    let (la, lb) = (a.ln(), b.ln());
    // ln(a^theta + b^theta)
    let m = la.max(lb);
    let ln_a_sum = theta * m + ((theta * (la - m)).exp() + (theta * (lb - m)).exp()).ln();
    let s = (ln_a_sum / theta).exp();
    -s + a + b + (theta - 1.0) * (la + lb) + (1.0 / theta - 2.0) * ln_a_sum + (s + theta - 1.0).ln()
}

impl Base {
    fn logc(&self, u: f64, v: f64) -> f64 {
        match *self {
            Base::Gauss { rho } => gauss_logc_scores(std_normal_quantile(u), std_normal_quantile(v), rho),
            Base::T { rho, nu, log_k } => {
                let x = student_t_quantile(u, nu);
                let y = student_t_quantile(v, nu);
                t_logc_scores(x, y, t_marginal_term(x, y, nu), rho, nu, log_k)
            }
            Base::Clayton { theta } => clayton_logc(u, v, theta),
            Base::Gumbel { theta } => gumbel_logc(u, v, theta),
        }
    }

    /// `C(u, v)`.
    fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return v.min(1.0);
        }
        if v >= 1.0 {
            return u;
        }
        match *self {
            Base::Clayton { theta } => {
                if theta == 0.0 {
                    u * v
                } else {
                    (-clayton_log_sum(u.ln(), v.ln(), theta) / theta).exp()
                }
            }
            Base::Gumbel { theta } => {
                let a = -u.ln();
                let b = -v.ln();
                (-(a.powf(theta) + b.powf(theta)).powf(1.0 / theta)).exp()
            }
            Base::Gauss { rho } => {
                let xu = std_normal_quantile(u);
                let yv = std_normal_quantile(v);
                let sd = (1.0 - rho * rho).sqrt();
                if sd == 0.0 {
                    return u.min(v);
                }
                let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                quad::integrate_lower_tail(|x| phi(x) * std_normal_cdf((yv - rho * x) / sd), xu, 1e-12)
            }
            Base::T { rho, nu, .. } => {
                let xu = student_t_quantile(u, nu);
                let yv = student_t_quantile(v, nu);
                let r2 = 1.0 - rho * rho;
                let log_norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
                quad::integrate_lower_tail(
                    |x| {
                        let f = (log_norm - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p()).exp();
                        let scale = ((nu + x * x) * r2 / (nu + 1.0)).sqrt();
                        f * student_t_cdf((yv - rho * x) / scale, nu + 1.0)
                    },
                    xu,
                    1e-12,
                )
            }
        }
    }

    /// `P(U <= u | V = v)`.
    fn h(&self, u: f64, v: f64) -> f64 {
        match *self {
            Base::Gauss { rho } => {
                let x = std_normal_quantile(u);
                let y = std_normal_quantile(v);
                std_normal_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
            }
            Base::T { rho, nu, .. } => {
                let x = student_t_quantile(u, nu);
                let y = student_t_quantile(v, nu);
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                student_t_cdf((x - rho * y) / scale, nu + 1.0)
            }
            Base::Clayton { theta } => {
                if theta == 0.0 {
                    return u;
                }
                let (lu, lv) = (u.ln(), v.ln());
                (-(theta + 1.0) * lv - (1.0 + 1.0 / theta) * clayton_log_sum(lu, lv, theta)).exp()
            }
            Base::Gumbel { theta } => {
                let a = -u.ln();
                let b = -v.ln();
                let (la, lb) = (a.ln(), b.ln());
                let m = la.max(lb);
                let ln_a_sum = theta * m + ((theta * (la - m)).exp() + (theta * (lb - m)).exp()).ln();
                let s = (ln_a_sum / theta).exp();
                (-s + b + (theta - 1.0) * lb + (1.0 / theta - 1.0) * ln_a_sum).exp()
            }
        }
        .clamp(0.0, 1.0)
    }

    /// Solves `h(u | v) = w` for `u`.
    fn h_inv(&self, w: f64, v: f64) -> f64 {
        match *self {
            Base::Gauss { rho } => {
                let y = std_normal_quantile(v);
                std_normal_cdf(rho * y + (1.0 - rho * rho).sqrt() * std_normal_quantile(w))
            }
            Base::T { rho, nu, .. } => {
                let y = student_t_quantile(v, nu);
                let scale = ((nu + y * y) * (1.0 - rho * rho) / (nu + 1.0)).sqrt();
                student_t_cdf(rho * y + scale * student_t_quantile(w, nu + 1.0), nu)
            }
            Base::Clayton { theta } => {
                if theta == 0.0 {
                    return w;
                }
                let lv = v.ln();
                let t1 = (-theta / (theta + 1.0) * (w.ln() + (theta + 1.0) * lv)).exp();
                (t1 + 1.0 - (-theta * lv).exp()).powf(-1.0 / theta)
            }
            Base::Gumbel { .. } => {
                // Safeguarded Newton on u; h is increasing in u with slope c.
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                let mut u = w;
                for _ in 0..200 {
                    let f = self.h(u, v) - w;
                    if f.abs() < 1e-15 {
                        break;
                    }
                    if f < 0.0 {
                        lo = u;
                    } else {
                        hi = u;
                    }
                    let d = self.logc(u, v).exp();
                    let next = u - f / d;
                    u = if d.is_finite() && d > 0.0 && next > lo && next < hi {
                        next
                    } else {
                        0.5 * (lo + hi)
                    };
                    if hi - lo < 1e-16 {
                        break;
                    }
                }
                u
            }
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        match *self {
            Base::Gauss { rho } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let x = z1;
                let y = rho * z1 + (1.0 - rho * rho).sqrt() * z2;
                (std_normal_cdf(x), std_normal_cdf(y))
            }
            Base::T { rho, nu, .. } => {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let w = ChiSquared::new(nu).expect("nu > 0").sample(rng);
                let k = (nu / w).sqrt();
                let x = k * z1;
                let y = k * (rho * z1 + (1.0 - rho * rho).sqrt() * z2);
                (student_t_cdf(x, nu), student_t_cdf(y, nu))
            }
            _ => {
                let v: f64 = rng.random();
                let w: f64 = rng.random();
                (self.h_inv(w, v), v)
            }
        }
    }
}

impl Oriented {
    fn logc(&self, u1: f64, u2: f64) -> f64 {
        self.base.logc(flip(u1, self.flip1), flip(u2, self.flip2))
    }

    fn cdf(&self, u1: f64, u2: f64) -> f64 {
        let c0 = |a, b| self.base.cdf(a, b);
        match (self.flip1, self.flip2) {
            (false, false) => c0(u1, u2),
            (true, false) => u2 - c0(1.0 - u1, u2),
            (false, true) => u1 - c0(u1, 1.0 - u2),
            (true, true) => u1 + u2 - 1.0 + c0(1.0 - u1, 1.0 - u2),
        }
        .clamp(0.0, 1.0)
    }

    /// `P(U1 <= u1 | U2 = u2)`.
    fn h1(&self, u1: f64, u2: f64) -> f64 {
        let h = self.base.h(flip(u1, self.flip1), flip(u2, self.flip2));
        if self.flip1 {
            1.0 - h
        } else {
            h
        }
    }

    /// `P(U2 <= u2 | U1 = u1)`; the base copulas are exchangeable.
    fn h2(&self, u2: f64, u1: f64) -> f64 {
        let h = self.base.h(flip(u2, self.flip2), flip(u1, self.flip1));
        if self.flip2 {
            1.0 - h
        } else {
            h
        }
    }

    fn h1_inv(&self, w: f64, u2: f64) -> f64 {
        let target = if self.flip1 { 1.0 - w } else { w };
        flip(self.base.h_inv(target, flip(u2, self.flip2)), self.flip1)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let (a, b) = self.base.sample(rng);
        (flip(a, self.flip1), flip(b, self.flip2))
    }
}

#[inline]
fn log_mix(p: f64, la: f64, lb: f64) -> f64 {
    if p >= 1.0 {
        return la;
    }
    if p <= 0.0 {
        return lb;
    }
    let x = p.ln() + la;
    let y = (-p).ln_1p() + lb;
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((x - m).exp() + (y - m).exp()).ln()
}

impl Resolved {
    fn logc(&self, u1: f64, u2: f64) -> f64 {
        match self.second {
            None => self.first.logc(u1, u2),
            Some((g, p)) => {
                let lt = if p > 0.0 {
                    self.first.logc(u1, u2)
                } else {
                    f64::NEG_INFINITY
                };
                let lg = if p < 1.0 { g.logc(u1, u2) } else { f64::NEG_INFINITY };
                log_mix(p, lt, lg)
            }
        }
    }

    fn cdf(&self, u1: f64, u2: f64) -> f64 {
        match self.second {
            None => self.first.cdf(u1, u2),
            Some((g, p)) => {
                let ct = if p > 0.0 { self.first.cdf(u1, u2) } else { 0.0 };
                let cg = if p < 1.0 { g.cdf(u1, u2) } else { 0.0 };
                p * ct + (1.0 - p) * cg
            }
        }
    }
}

pub fn clip_unit(u: f64) -> f64 {
    u.clamp(U_CLIP, 1.0 - U_CLIP)
}

fn check_unit(u1: f64, u2: f64) -> Result<()> {
    if !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
        return domain(format!("copula arguments must lie in (0,1)^2, got ({u1}, {u2})"));
    }
    Ok(())
}

/// Log copula density; arguments are clipped into `[1e-10, 1 - 1e-10]`.
pub fn logdensity(family: CopulaFamily, u1: f64, u2: f64, params: &CopulaParams) -> Result<f64> {
    check_unit(u1, u2)?;
    let r = resolve(family, params)?;
    Ok(r.logc(clip_unit(u1), clip_unit(u2)))
}

/// Copula distribution function `C(u1, u2)` on the closed unit square.
pub fn cdf(family: CopulaFamily, u1: f64, u2: f64, params: &CopulaParams) -> Result<f64> {
    if !((0.0..=1.0).contains(&u1) && (0.0..=1.0).contains(&u2)) {
        return domain(format!("copula CDF arguments must lie in [0,1]^2, got ({u1}, {u2})"));
    }
    let r = resolve(family, params)?;
    if u1 == 0.0 || u2 == 0.0 {
        return Ok(0.0);
    }
    if u1 == 1.0 {
        return Ok(u2);
    }
    if u2 == 1.0 {
        return Ok(u1);
    }
    Ok(r.cdf(u1, u2))
}

/// Conditional distribution `P(U1 <= u1 | U2 = u2)`. Not defined for the
/// mixtures.
pub fn h_function(family: CopulaFamily, u1: f64, u2: f64, params: &CopulaParams) -> Result<f64> {
    check_unit(u1, u2)?;
    let r = resolve(family, params)?;
    if r.second.is_some() {
        return domain("h-function is only exposed for single-component families");
    }
    Ok(r.first.h1(clip_unit(u1), clip_unit(u2)))
}

/// Inverse of [`h_function`] in its first argument.
pub fn h_inverse(family: CopulaFamily, w: f64, u2: f64, params: &CopulaParams) -> Result<f64> {
    check_unit(w, u2)?;
    let r = resolve(family, params)?;
    if r.second.is_some() {
        return domain("h-function is only exposed for single-component families");
    }
    Ok(r.first.h1_inv(w, clip_unit(u2)))
}

/// `n` iid pairs. Mixtures pick the Student-t component with probability `p`.
pub fn sample<R: Rng + ?Sized>(
    family: CopulaFamily,
    params: &CopulaParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let r = resolve(family, params)?;
    Ok((0..n).map(|_| sample_resolved(&r, rng)).collect())
}

/// One pair; also reports whether the Student-t component was used (always
/// true for non-mixtures).
pub fn sample_one_tagged<R: Rng + ?Sized>(
    family: CopulaFamily,
    params: &CopulaParams,
    rng: &mut R,
) -> Result<((f64, f64), bool)> {
    let r = resolve(family, params)?;
    Ok(match r.second {
        None => (clip_pair(r.first.sample(rng)), true),
        Some((g, p)) => {
            let pick_t = rng.random::<f64>() < p;
            let uv = if pick_t { r.first.sample(rng) } else { g.sample(rng) };
            (clip_pair(uv), pick_t)
        }
    })
}

fn clip_pair((a, b): (f64, f64)) -> (f64, f64) {
    (clip_unit(a), clip_unit(b))
}

fn sample_resolved<R: Rng + ?Sized>(r: &Resolved, rng: &mut R) -> (f64, f64) {
    match r.second {
        None => clip_pair(r.first.sample(rng)),
        Some((g, p)) => {
            if rng.random::<f64>() < p {
                clip_pair(r.first.sample(rng))
            } else {
                clip_pair(g.sample(rng))
            }
        }
    }
}

const MIX_TAU_NODES: usize = 200;

/// Kendall's tau of the mixture copula.
///
/// `tau_M = (p^2 + q^2) tau + p q (4 I - 2)` with
/// `I = int C^G c^t + C^t c^G`, evaluated through integration by parts as
/// `I = 1 - int (dC^G/du1 dC^t/du2 + dC^t/du1 dC^G/du2)` on a tensor
/// Gauss-Legendre grid.
pub fn mixture_tau(params: &MixtureParams) -> Result<f64> {
    mixture_tau_oriented(params, false)
}

pub fn mixture_tau_oriented(params: &MixtureParams, survival: bool) -> Result<f64> {
    let fam = if survival {
        CopulaFamily::SurvivalMixture
    } else {
        CopulaFamily::Mixture
    };
    let cp: CopulaParams = (*params).into();
    let r = resolve(fam, &cp)?;
    let (t, (g, _)) = (r.first, r.second.expect("mixture"));
    let p = params.p;
    let q = 1.0 - p;
    if p == 0.0 || p == 1.0 {
        return Ok(params.tau);
    }
    let (x, w) = quad::gauss_legendre_on(MIX_TAU_NODES, 0.0, 1.0);
    let mut cross = 0.0;
    for (i, &u) in x.iter().enumerate() {
        for (j, &v) in x.iter().enumerate() {
            // dC/du1 = P(U2 <= v | U1 = u), dC/du2 = P(U1 <= u | U2 = v).
            let term = g.h2(v, u) * t.h1(u, v) + t.h2(v, u) * g.h1(u, v);
            cross += w[i] * w[j] * term;
        }
    }
    let big_i = 1.0 - cross;
    Ok((p * p + q * q) * params.tau + p * q * (4.0 * big_i - 2.0))
}

/// Tail-dependence coefficient of the Student-t copula.
pub fn t_tail_coefficient(tau: f64, nu: f64) -> f64 {
    let rho = tau_to_rho(tau);
    2.0 * student_t_cdf(-((nu + 1.0) * (1.0 - rho) / (1.0 + rho)).sqrt(), nu + 1.0)
}

/// All four corner tail-dependence coefficients of the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailDependence {
    pub lower: f64,
    pub upper: f64,
    pub lower_right: f64,
    pub upper_left: f64,
}

/// Corner coefficients for any tau. The Gumbel component contributes to
/// the upper corner for positive tau and to the upper-left corner for
/// negative tau (lower and lower-right for the survival orientation).
pub fn tail_dependence(params: &MixtureParams, survival: bool) -> Result<TailDependence> {
    CopulaParams::from(*params).validate(CopulaFamily::Mixture)?;
    let MixtureParams { tau, nu, p } = *params;
    let same = p * t_tail_coefficient(tau, nu);
    let opposite = p * t_tail_coefficient(-tau, nu);
    let gumbel = (1.0 - p) * (2.0 - 2f64.powf(1.0 - tau.abs()));
    let mut out = TailDependence {
        lower: same,
        upper: same,
        lower_right: opposite,
        upper_left: opposite,
    };
    match (tau >= 0.0, survival) {
        (true, false) => out.upper += gumbel,
        (true, true) => out.lower += gumbel,
        (false, false) => out.upper_left += gumbel,
        (false, true) => out.lower_right += gumbel,
    }
    Ok(out)
}

/// `(lambda_L, lambda_U)`; requires `tau >= 0`.
pub fn lower_upper_tail(params: &MixtureParams) -> Result<(f64, f64)> {
    if params.tau < 0.0 {
        return domain("lower/upper tail coefficients need tau >= 0");
    }
    let td = tail_dependence(params, false)?;
    Ok((td.lower, td.upper))
}

/// `(lambda_LR, lambda_UL)`; requires `tau <= 0`. Equal to the lower/upper
/// coefficients at `-tau`.
pub fn quarter_tail(params: &MixtureParams) -> Result<(f64, f64)> {
    if params.tau > 0.0 {
        return domain("quarter tail coefficients need tau <= 0");
    }
    lower_upper_tail(&MixtureParams {
        tau: -params.tau,
        ..*params
    })
}

/// Per-observation scores for a fixed copula data set, cached so that
/// repeated likelihood evaluations avoid quantile calls.
#[derive(Debug, Clone)]
pub struct PreparedPairs {
    pub u: Vec<(f64, f64)>,
    // ln u1, ln u2, ln(1-u1), ln(1-u2)
    logs: Vec<[f64; 4]>,
    gauss: Vec<(f64, f64)>,
    t_nu: f64,
    t_scores: Vec<(f64, f64, f64)>,
    t_log_k: f64,
}

impl PreparedPairs {
    pub fn new(data: &[(f64, f64)]) -> Result<Self> {
        for &(a, b) in data {
            check_unit(a, b)?;
        }
        let u: Vec<(f64, f64)> = data.iter().map(|&(a, b)| clip_pair((a, b))).collect();
        let logs = u
            .iter()
            .map(|&(a, b)| [a.ln(), b.ln(), (-a).ln_1p(), (-b).ln_1p()])
            .collect();
        let gauss = u
            .iter()
            .map(|&(a, b)| (std_normal_quantile(a), std_normal_quantile(b)))
            .collect();
        Ok(PreparedPairs {
            u,
            logs,
            gauss,
            t_nu: f64::NAN,
            t_scores: Vec::new(),
            t_log_k: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Recompute the Student-t scores when `nu` changes.
    pub fn set_nu(&mut self, nu: f64) {
        if nu == self.t_nu {
            return;
        }
        self.t_nu = nu;
        self.t_log_k = t_copula_log_const(nu);
        self.t_scores = self
            .u
            .iter()
            .map(|&(a, b)| {
                let x = student_t_quantile(a, nu);
                let y = student_t_quantile(b, nu);
                (x, y, t_marginal_term(x, y, nu))
            })
            .collect();
    }

    pub fn nu(&self) -> f64 {
        self.t_nu
    }

    #[inline]
    fn gumbel_at(&self, i: usize, tau: f64, survival: bool) -> f64 {
        let o = gumbel_oriented(tau, survival);
        let theta = gumbel_theta(tau.abs());
        let l = &self.logs[i];
        // ln of the (possibly reflected) coordinates.
        let la = if o.flip1 { l[2] } else { l[0] };
        let lb = if o.flip2 { l[3] } else { l[1] };
        gumbel_logc_logs(la, lb, theta)
    }

    #[inline]
    fn t_at(&self, i: usize, tau: f64) -> f64 {
        let (x, y, m) = self.t_scores[i];
        t_logc_scores(x, y, m, tau_to_rho(tau), self.t_nu, self.t_log_k)
    }

    /// Log density of observation `i` at `tau`; `nu` and `p` come from
    /// [`PreparedPairs::set_nu`] and the argument respectively.
    #[inline]
    pub fn logc(&self, family: CopulaFamily, i: usize, tau: f64, p: f64) -> f64 {
        match family {
            CopulaFamily::Gaussian => {
                let (x, y) = self.gauss[i];
                gauss_logc_scores(x, y, tau_to_rho(tau))
            }
            CopulaFamily::StudentT => self.t_at(i, tau),
            CopulaFamily::ExtClayton => {
                let theta = clayton_theta(tau.abs());
                if theta == 0.0 {
                    return 0.0;
                }
                let l = &self.logs[i];
                let la = if tau < 0.0 { l[2] } else { l[0] };
                let (lu, lv) = (la, l[1]);
                theta.ln_1p() - (theta + 1.0) * (lu + lv) - (2.0 + 1.0 / theta) * clayton_log_sum(lu, lv, theta)
            }
            CopulaFamily::ExtGumbel => self.gumbel_at(i, tau, false),
            CopulaFamily::SurvivalGumbel => self.gumbel_at(i, tau, true),
            CopulaFamily::Mixture | CopulaFamily::SurvivalMixture => {
                let lt = if p > 0.0 { self.t_at(i, tau) } else { f64::NEG_INFINITY };
                let lg = if p < 1.0 {
                    self.gumbel_at(i, tau, family == CopulaFamily::SurvivalMixture)
                } else {
                    f64::NEG_INFINITY
                };
                log_mix(p, lt, lg)
            }
        }
    }
}

// Gumbel log density from ln u and ln v.
#[inline]
fn gumbel_logc_logs(lu: f64, lv: f64, theta: f64) -> f64 {
    let a = -lu;
    let b = -lv;
    let (la, lb) = (a.ln(), b.ln());
    let m = la.max(lb);
    let ln_a_sum = theta * m + ((theta * (la - m)).exp() + (theta * (lb - m)).exp()).ln();
    let s = (ln_a_sum / theta).exp();
    -s + a + b + (theta - 1.0) * (la + lb) + (1.0 / theta - 2.0) * ln_a_sum + (s + theta - 1.0).ln()
}
