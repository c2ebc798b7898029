//! Scalar distributions used by likelihoods and priors: Student-t, the
//! Azzalini skew Student-t, its standardized (mean 0, variance 1) version,
//! and a lower-truncated normal.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};
use crate::quad;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(u: f64) -> f64 {
    Normal::standard().inverse_cdf(u)
}

/// Log density of the Beta distribution on (0, 1).
pub fn beta_logpdf(x: f64, a: f64, b: f64) -> f64 {
    if !(x > 0.0 && x < 1.0) {
        return f64::NEG_INFINITY;
    }
    (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)
}

/// Log density of Gamma(shape, rate).
pub fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of the standard Student-t distribution.
pub fn student_t_logpdf(x: f64, df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln() - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
}

/// Distribution function of the standard Student-t distribution.
pub fn student_t_cdf(x: f64, df: f64) -> f64 {
    if x.is_nan() || !(df > 0.0) {
        return f64::NAN;
    }
    if x.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x <= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

/// Quantile of the standard Student-t distribution.
pub fn student_t_quantile(u: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("valid degrees of freedom")
        .inverse_cdf(u)
}

/// Log of the lower-tail probability of a standard Student-t, accurate far
/// into the tail.
fn student_t_log_cdf(x: f64, df: f64) -> f64 {
    student_t_cdf(x, df).ln()
}

/// Parameters of the skew Student-t distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewTParams {
    pub xi: f64,
    pub omega: f64,
    pub alpha: f64,
    pub df: f64,
}

impl SkewTParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) {
            return domain(format!("omega must be > 0, got {}", self.omega));
        }
        if !(self.df > 0.0) {
            return domain(format!("df must be > 0, got {}", self.df));
        }
        if !self.xi.is_finite() || !self.alpha.is_finite() {
            return domain("xi and alpha must be finite");
        }
        Ok(())
    }
}

#[inline]
fn skew_t_logpdf_unchecked(x: f64, p: &SkewTParams, log_t_norm: f64) -> f64 {
    let z = (x - p.xi) / p.omega;
    let log_t = log_t_norm - 0.5 * (p.df + 1.0) * (z * z / p.df).ln_1p();
    let arg = if z.is_infinite() {
        p.alpha * z.signum() * (p.df + 1.0).sqrt()
    } else {
        p.alpha * z * ((p.df + 1.0) / (z * z + p.df)).sqrt()
    };
    LN_2 - p.omega.ln() + log_t + student_t_log_cdf(arg, p.df + 1.0)
}

fn t_log_norm(df: f64) -> f64 {
    ln_gamma(0.5 * (df + 1.0)) - ln_gamma(0.5 * df) - 0.5 * (df * PI).ln()
}

/// Log density of the skew Student-t distribution.
pub fn skew_t_logpdf(x: f64, p: &SkewTParams) -> Result<f64> {
    p.validate()?;
    Ok(skew_t_logpdf_unchecked(x, p, t_log_norm(p.df)))
}

/// Parameters of the standardized skew Student-t distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StdSkewTParams {
    pub alpha: f64,
    pub df: f64,
}

/// Location and scale that give the skew-t mean 0 and variance 1.
///
/// Uses `delta = alpha / sqrt(1 + alpha^2)`.
pub fn std_skew_t_constants(p: &StdSkewTParams) -> Result<(f64, f64)> {
    if !(p.df > 2.0) {
        return domain(format!("standardization needs df > 2, got {}", p.df));
    }
    if !p.alpha.is_finite() {
        return domain("alpha must be finite");
    }
    let delta = p.alpha / (1.0 + p.alpha * p.alpha).sqrt();
    let b = (p.df / PI).sqrt() * (ln_gamma(0.5 * (p.df - 1.0)) - ln_gamma(0.5 * p.df)).exp();
    let omega = 1.0 / (p.df / (p.df - 2.0) - b * b * delta * delta).sqrt();
    Ok((-omega * b * delta, omega))
}

const TABLE_PANELS: usize = 512;

/// Standardized skew Student-t with its location/scale constants computed
/// once. Distribution function values are tabulated lazily on first use.
#[derive(Debug)]
pub struct StdSkewT {
    params: StdSkewTParams,
    st: SkewTParams,
    log_t_norm: f64,
    // Cumulative probabilities at theta nodes (y = tan theta).
    table: OnceLock<Vec<f64>>,
}

impl Clone for StdSkewT {
    fn clone(&self) -> Self {
        StdSkewT {
            params: self.params,
            st: self.st,
            log_t_norm: self.log_t_norm,
            table: self.table.clone(),
        }
    }
}

impl StdSkewT {
    pub fn new(alpha: f64, df: f64) -> Result<Self> {
        let params = StdSkewTParams { alpha, df };
        let (xi, omega) = std_skew_t_constants(&params)?;
        Ok(StdSkewT {
            params,
            st: SkewTParams { xi, omega, alpha, df },
            log_t_norm: t_log_norm(df),
            table: OnceLock::new(),
        })
    }

    pub fn params(&self) -> StdSkewTParams {
        self.params
    }

    /// The equivalent unstandardized parameters.
    pub fn skew_t_params(&self) -> SkewTParams {
        self.st
    }

    #[inline]
    pub fn logpdf(&self, x: f64) -> f64 {
        skew_t_logpdf_unchecked(x, &self.st, self.log_t_norm)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.logpdf(x).exp()
    }

    /// Distribution function by adaptive quadrature of the density.
    pub fn cdf_adaptive(&self, x: f64) -> f64 {
        if x <= 0.0 {
            quad::integrate_lower_tail(|y| self.pdf(y), x, 1e-13)
        } else {
            1.0 - quad::integrate_upper_tail(|y| self.pdf(y), x, 1e-13)
        }
    }

    // Integrand in theta with y = tan(theta).
    fn theta_density(&self, th: f64) -> f64 {
        let c = th.cos();
        if c <= 0.0 {
            return 0.0;
        }
        let v = self.pdf(th.tan()) / (c * c);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    }

    fn table(&self) -> &[f64] {
        self.table.get_or_init(|| {
            let h = PI / TABLE_PANELS as f64;
            let mut cum = Vec::with_capacity(TABLE_PANELS + 1);
            cum.push(0.0);
            let mut acc = 0.0;
            for k in 0..TABLE_PANELS {
                let lo = -PI / 2.0 + k as f64 * h;
                acc += quad::integrate(|t| self.theta_density(t), lo, lo + h, 1e-15).0;
                cum.push(acc);
            }
            // Normalize away the last few ulps of quadrature error.
            let total = acc;
            cum.iter_mut().for_each(|c| *c /= total);
            cum
        })
    }

    /// Distribution function: tabulated cumulative mass plus a local
    /// Gauss-Kronrod integral over the final partial panel.
    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        let table = self.table();
        let h = PI / TABLE_PANELS as f64;
        let th = x.atan();
        let k = (((th + PI / 2.0) / h).floor() as usize).min(TABLE_PANELS - 1);
        let lo = -PI / 2.0 + k as f64 * h;
        let hi = lo + h;
        // Integrate from the nearer panel edge.
        if th - lo <= hi - th {
            let part = quad::integrate(|t| self.theta_density(t), lo, th, 1e-15).0;
            (table[k] + part).clamp(0.0, 1.0)
        } else {
            let part = quad::integrate(|t| self.theta_density(t), th, hi, 1e-15).0;
            (table[k + 1] - part).clamp(0.0, 1.0)
        }
    }

    /// Quantile: bracket from the symmetric-t quantile with geometric
    /// expansion, then safeguarded Newton iterations on the distribution
    /// function until it matches `u` to 1e-12.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return domain(format!("quantile level must lie in (0,1), got {u}"));
        }
        let guess = self.st.xi + self.st.omega * student_t_quantile(u, self.params.df);
        let f = |x: f64| self.cdf(x) - u;
        let mut step = 0.5_f64.max(0.1 * guess.abs());
        let (mut lo, mut hi);
        let fg = f(guess);
        if fg == 0.0 {
            return Ok(guess);
        }
        if fg < 0.0 {
            lo = guess;
            hi = guess + step;
            while f(hi) < 0.0 {
                lo = hi;
                step *= 2.0;
                hi += step;
            }
        } else {
            hi = guess;
            lo = guess - step;
            while f(lo) > 0.0 {
                hi = lo;
                step *= 2.0;
                lo -= step;
            }
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let fx = f(x);
            if fx.abs() < 1e-12 {
                break;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.pdf(x);
            let newton = x - fx / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-14 * (1.0 + x.abs()) {
                break;
            }
        }
        Ok(x)
    }
}

/// Free-function form of the standardized skew-t log density.
pub fn std_skew_t_logpdf(x: f64, p: &StdSkewTParams) -> Result<f64> {
    Ok(StdSkewT::new(p.alpha, p.df)?.logpdf(x))
}

pub fn std_skew_t_cdf(x: f64, p: &StdSkewTParams) -> Result<f64> {
    Ok(StdSkewT::new(p.alpha, p.df)?.cdf_adaptive(x))
}

pub fn std_skew_t_quantile(u: f64, p: &StdSkewTParams) -> Result<f64> {
    StdSkewT::new(p.alpha, p.df)?.quantile(u)
}

/// Log density of `N(mean, sd^2)` restricted to `(lower, inf)`.
pub fn trunc_normal_logpdf(x: f64, mean: f64, sd: f64, lower: f64) -> f64 {
    if x <= lower {
        return f64::NEG_INFINITY;
    }
    let log_mass = if lower == f64::NEG_INFINITY {
        0.0
    } else {
        std_normal_cdf((mean - lower) / sd).ln()
    };
    normal_logpdf(x, mean, sd) - log_mass
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_t_logpdf(x: f64, df: f64) -> f64 {
        // Independent route: statrs density.
        use statrs::distribution::Continuous;
        StudentsT::new(0.0, 1.0, df).unwrap().ln_pdf(x)
    }

    #[test]
    fn symmetric_skew_t_is_student_t() {
        let p = SkewTParams {
            xi: 0.0,
            omega: 1.0,
            alpha: 0.0,
            df: 4.5,
        };
        for &x in &[-7.0, -1.3, 0.0, 0.4, 2.2, 30.0] {
            let a = skew_t_logpdf(x, &p).unwrap();
            let b = reference_t_logpdf(x, 4.5);
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn skew_direction() {
        let p = SkewTParams {
            xi: 0.0,
            omega: 1.0,
            alpha: 2.0,
            df: 6.0,
        };
        assert!(skew_t_logpdf(1.0, &p).unwrap() > skew_t_logpdf(-1.0, &p).unwrap());
    }

    #[test]
    fn invalid_params_rejected() {
        let p = SkewTParams {
            xi: 0.0,
            omega: -1.0,
            alpha: 0.0,
            df: 5.0,
        };
        assert!(skew_t_logpdf(0.0, &p).is_err());
        assert!(std_skew_t_constants(&StdSkewTParams { alpha: 0.3, df: 2.0 }).is_err());
        assert!(StdSkewT::new(0.0, 5.0).unwrap().quantile(1.0).is_err());
        assert!(StdSkewT::new(0.0, 5.0).unwrap().quantile(0.0).is_err());
    }

    #[test]
    fn symmetric_constants() {
        let (xi, omega) = std_skew_t_constants(&StdSkewTParams { alpha: 0.0, df: 7.0 }).unwrap();
        assert_eq!(xi, 0.0);
        assert!((omega - (5.0f64 / 7.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn negative_slant_shifts_location_up() {
        let (xi, _) = std_skew_t_constants(&StdSkewTParams { alpha: -0.51, df: 6.84 }).unwrap();
        assert!(xi > 0.0);
        let (xi, _) = std_skew_t_constants(&StdSkewTParams { alpha: 1.33, df: 9.3 }).unwrap();
        assert!(xi < 0.0);
    }

    #[test]
    fn symmetric_cdf_at_zero() {
        let d = StdSkewT::new(0.0, 5.0).unwrap();
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-13);
        assert!((d.cdf_adaptive(0.0) - 0.5).abs() < 1e-13);
    }

    #[test]
    fn tabulated_cdf_matches_adaptive() {
        for &(a, df) in &[(-2.0, 5.0), (0.7, 20.0), (1.33, 9.3), (0.0, 2.5)] {
            let d = StdSkewT::new(a, df).unwrap();
            for &x in &[-12.0, -3.0, -0.7, 0.0, 0.05, 1.0, 4.0, 25.0] {
                let t = d.cdf(x);
                let r = d.cdf_adaptive(x);
                assert!((t - r).abs() < 1e-10, "a={a} df={df} x={x}: {t} vs {r}");
            }
        }
    }

    #[test]
    fn cdf_tails() {
        // Symmetric case: exact tail mass from the Student-t distribution.
        let d = StdSkewT::new(0.0, 5.0).unwrap();
        let w = (3.0f64 / 5.0).sqrt();
        let exact = student_t_cdf(-30.0 / w, 5.0);
        assert!((d.cdf(-30.0) - exact).abs() < 1e-12);
        assert!((1.0 - d.cdf(30.0) - exact).abs() < 1e-12);
        // Positive slant thins the left tail below 1e-8, negative the right.
        assert!(StdSkewT::new(1.5, 5.0).unwrap().cdf(-30.0) < 1e-8);
        assert!(StdSkewT::new(-1.5, 5.0).unwrap().cdf(30.0) > 1.0 - 1e-8);
        let mut prev = 0.0;
        for i in -60..=60 {
            let c = d.cdf(i as f64 * 0.5);
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn quantile_round_trip() {
        for &a in &[-2.0, 0.0, 1.5] {
            for &df in &[5.0, 20.0] {
                let d = StdSkewT::new(a, df).unwrap();
                for &x in &[-3.0, -1.0, 0.0, 1.0, 3.0] {
                    let q = d.quantile(d.cdf(x)).unwrap();
                    assert!((q - x).abs() < 1e-7, "a={a} df={df} x={x} q={q}");
                }
            }
        }
    }

    #[test]
    fn truncated_normal() {
        let x = 0.7;
        assert!((trunc_normal_logpdf(x, 1.0, 2.0, f64::NEG_INFINITY) - normal_logpdf(x, 1.0, 2.0)).abs() < 1e-15);
        assert_eq!(trunc_normal_logpdf(2.0, 5.0, 5.0, 2.0), f64::NEG_INFINITY);
        let mass = quad::integrate_upper_tail(|v| trunc_normal_logpdf(v, 5.0, 5.0, 2.0).exp(), 2.0, 1e-12);
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn t_cdf_agrees_with_statrs() {
        let t = StudentsT::new(0.0, 1.0, 3.7).unwrap();
        for &x in &[-40.0, -2.0, -0.1, 0.0, 0.3, 5.0] {
            assert!((student_t_cdf(x, 3.7) - t.cdf(x)).abs() < 1e-13);
        }
        let q = student_t_quantile(0.975, 10.0);
        assert!((student_t_cdf(q, 10.0) - 0.975).abs() < 1e-12);
    }
}
