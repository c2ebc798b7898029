//! Posterior summaries and sampler efficiency: effective sample size from
//! the spectral density at zero (autoregressive fit), batch means, KDE
//! posterior modes, quantiles, and the AESR / mAESR aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::draws::DrawsStore;
use crate::error::{domain, Result};

/// Minimum chain length accepted by [`effective_sample_size`] and
/// [`posterior_mode`].
pub const MIN_DRAWS: usize = 100;

/// Column names used for the latent-state aggregates.
pub const STATE_MEAN: &str = "s(a)";
pub const STATE_MIN: &str = "s(m)";

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with denominator `n - 1`.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn check_chain(x: &[f64]) -> Result<()> {
    if x.len() < MIN_DRAWS {
        return domain(format!("need at least {MIN_DRAWS} draws, got {}", x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return domain("chain contains non-finite values");
    }
    Ok(())
}

/// Autoregressive spectral estimate at frequency zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum0 {
    pub spec: f64,
    pub order: usize,
    /// Fitted AR coefficients.
    pub coef: Vec<f64>,
    pub var_pred: f64,
}

/// Yule-Walker AR fit with the order chosen by AIC among
/// `0..=min(n - 1, floor(10 log10 n))`, then
/// `spec = var_pred / (1 - sum(coef))^2`.
pub fn spectrum0_ar(x: &[f64]) -> Result<Spectrum0> {
    check_chain(x)?;
    let n = x.len();
    let nf = n as f64;
    let max_order = ((10.0 * nf.log10()).floor() as usize).min(n - 1);
    let m = mean(x);
    let acov: Vec<f64> = (0..=max_order)
        .map(|k| (0..n - k).map(|i| (x[i] - m) * (x[i + k] - m)).sum::<f64>() / nf)
        .collect();
    let r0 = acov[0];
    if r0 <= 0.0 {
        return Ok(Spectrum0 {
            spec: 0.0,
            order: 0,
            coef: Vec::new(),
            var_pred: 0.0,
        });
    }
    // Levinson-Durbin on the autocovariances.
    let floor = r0 * 1e-300_f64.max(f64::EPSILON * f64::EPSILON);
    let mut coefs: Vec<Vec<f64>> = vec![Vec::new()];
    let mut vars = vec![r0];
    let mut a: Vec<f64> = Vec::new();
    let mut v = r0;
    for k in 1..=max_order {
        let num = acov[k] - a.iter().enumerate().map(|(j, aj)| aj * acov[k - 1 - j]).sum::<f64>();
        let pacf = (num / v).clamp(-1.0, 1.0);
        let mut next = vec![0.0; k];
        for j in 0..k - 1 {
            next[j] = a[j] - pacf * a[k - 2 - j];
        }
        next[k - 1] = pacf;
        v = (v * (1.0 - pacf * pacf)).max(floor);
        a = next;
        coefs.push(a.clone());
        vars.push(v);
    }
    let mut best = 0;
    let mut best_aic = f64::INFINITY;
    for (k, &vk) in vars.iter().enumerate() {
        let aic = nf * vk.ln() + 2.0 * k as f64;
        if aic < best_aic {
            best_aic = aic;
            best = k;
        }
    }
    let var_pred = vars[best] * nf / (nf - (best as f64 + 1.0));
    let coef = coefs.swap_remove(best);
    let denom = 1.0 - coef.iter().sum::<f64>();
    Ok(Spectrum0 {
        spec: var_pred / (denom * denom),
        order: best,
        coef,
        var_pred,
    })
}

/// `n * var(x) / spectrum0(x)`. Constant chains return `n`.
pub fn effective_sample_size(x: &[f64]) -> Result<f64> {
    let s = spectrum0_ar(x)?;
    let n = x.len() as f64;
    if s.spec <= 0.0 {
        log::warn!("constant chain of length {}: ESS set to n", x.len());
        return Ok(n);
    }
    Ok(n * sample_variance(x) / s.spec)
}

/// Batch-means ESS with `floor(sqrt(n))` batches.
pub fn batch_means_ess(x: &[f64]) -> Result<f64> {
    check_chain(x)?;
    let n = x.len();
    let b = (n as f64).sqrt().floor() as usize;
    let size = n / b;
    let means: Vec<f64> = (0..b).map(|i| mean(&x[i * size..(i + 1) * size])).collect();
    let var = sample_variance(x);
    let bvar = sample_variance(&means) * size as f64;
    if var <= 0.0 || bvar <= 0.0 {
        return Ok(n as f64);
    }
    Ok(n as f64 * var / bvar)
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) q`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sorted_copy(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn posterior_quantiles(x: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return domain("no draws");
    }
    let s = sorted_copy(x);
    Ok(probs.iter().map(|&q| quantile_sorted(&s, q)).collect())
}

pub const KDE_GRID: usize = 512;

/// Silverman's rule: `0.9 min(sd, IQR / 1.34) n^{-1/5}`, falling back to
/// whichever spread is positive.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let sd = sample_variance(sorted).max(0.0).sqrt();
    let iqr = (quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => return 0.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Argmax of a Gaussian kernel density estimate on a 512-point grid over
/// the draw range. Draws are linearly binned onto the grid before the
/// kernel is applied.
pub fn posterior_mode(x: &[f64]) -> Result<f64> {
    check_chain(x)?;
    let s = sorted_copy(x);
    let (lo, hi) = (s[0], s[s.len() - 1]);
    let bw = silverman_bandwidth(&s);
    if hi <= lo || bw <= 0.0 {
        return Ok(s[s.len() / 2]);
    }
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let mut bins = vec![0.0; KDE_GRID];
    for &v in &s {
        let pos = (v - lo) / step;
        let i = (pos.floor() as usize).min(KDE_GRID - 2);
        let w = pos - i as f64;
        bins[i] += 1.0 - w;
        bins[i + 1] += w;
    }
    // Kernel truncated at 8 bandwidths.
    let reach = ((8.0 * bw / step).ceil() as usize).min(KDE_GRID - 1);
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| {
            let z = d as f64 * step / bw;
            (-0.5 * z * z).exp()
        })
        .collect();
    let mut dens = vec![0.0; KDE_GRID];
    for (i, &b) in bins.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let (a, e) = (i.saturating_sub(reach), (i + reach).min(KDE_GRID - 1));
        for (g, d) in dens[a..=e].iter_mut().enumerate() {
            *d += b * kernel[(a + g).abs_diff(i)];
        }
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (g, &d) in dens.iter().enumerate() {
        if d > best.1 {
            best = (g, d);
        }
    }
    Ok(lo + best.0 as f64 * step)
}

/// Mode, 5% and 95% quantiles and ESS of one chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mode: f64,
    pub q05: f64,
    pub q95: f64,
    pub mean: f64,
    pub ess: f64,
}

pub fn summarize(x: &[f64]) -> Result<ParamSummary> {
    let q = posterior_quantiles(x, &[0.05, 0.95])?;
    Ok(ParamSummary {
        mode: posterior_mode(x)?,
        q05: q[0],
        q95: q[1],
        mean: mean(x),
        ess: effective_sample_size(x)?,
    })
}

/// Kolmogorov-Smirnov statistic of `x` against `cdf`, with the asymptotic
/// p-value (Stephens' small-sample correction).
pub fn ks_test<F: Fn(f64) -> f64>(x: &[f64], cdf: F) -> (f64, f64) {
    let s = sorted_copy(x);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in s.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let sn = n.sqrt();
    (d, kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d))
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Kendall's tau-b in `O(n log n)` (Knight's merge-sort algorithm).
pub fn kendall_tau(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len();
    if n < 2 {
        return 0.0;
    }
    // Adding 0.0 maps -0.0 to +0.0 so ties sort together.
    let mut v: Vec<(f64, f64)> = pairs.iter().map(|&(a, b)| (a + 0.0, b + 0.0)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n * (n - 1) / 2) as f64;
    let ties = |key: &dyn Fn(usize, usize) -> bool| -> f64 {
        let (mut total, mut run) = (0.0, 1usize);
        for i in 1..=n {
            if i < n && key(i - 1, i) {
                run += 1;
            } else {
                total += (run * (run - 1) / 2) as f64;
                run = 1;
            }
        }
        total
    };
    let n1 = ties(&|i, j| v[i].0 == v[j].0);
    let n3 = ties(&|i, j| v[i].0 == v[j].0 && v[i].1 == v[j].1);
    let mut ys: Vec<f64> = v.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf) as f64;
    let mut n2 = 0.0;
    let mut run = 1usize;
    for i in 1..=n {
        if i < n && ys[i - 1] == ys[i] {
            run += 1;
        } else {
            n2 += (run * (run - 1) / 2) as f64;
            run = 1;
        }
    }
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (n0 - n1 - n2 + n3 - 2.0 * swaps) / denom
}

fn merge_count(x: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = x.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (l, r) = x.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        merge_count(l, bl) + merge_count(r, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if x[j] < x[i] {
            buf[k] = x[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = x[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&x[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&x[j..n]);
    x.copy_from_slice(&buf[..n]);
    swaps
}

/// ESS and effective sampling rate (ESS per minute) per parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencySummary {
    pub names: Vec<String>,
    pub ess: Vec<f64>,
    pub esr: Vec<f64>,
    pub runtime_minutes: f64,
    pub n_draws: usize,
}

impl EfficiencySummary {
    /// ESS values above `n_draws` are clamped.
    pub fn new(names: Vec<String>, ess: Vec<f64>, n_draws: usize, runtime_minutes: f64) -> Result<Self> {
        if names.len() != ess.len() {
            return domain("names and ess differ in length");
        }
        if !(runtime_minutes > 0.0) {
            return domain(format!("runtime must be positive, got {runtime_minutes}"));
        }
        let ess: Vec<f64> = ess.into_iter().map(|e| e.clamp(0.0, n_draws as f64)).collect();
        let esr = ess.iter().map(|e| e / runtime_minutes).collect();
        Ok(EfficiencySummary {
            names,
            ess,
            esr,
            runtime_minutes,
            n_draws,
        })
    }

    /// ESS of the named parameter columns and, when the store holds latent
    /// paths, their mean (`s(a)`) and minimum (`s(m)`) over `s_0..s_T`.
    pub fn from_draws(draws: &DrawsStore, params: &[&str]) -> Result<Self> {
        let mut names = Vec::new();
        let mut ess = Vec::new();
        for &p in params {
            let col = draws
                .column(p)
                .ok_or_else(|| crate::Error::Invalid(format!("no column {p}")))?;
            names.push(p.to_string());
            ess.push(effective_sample_size(col)?);
        }
        let mut n_draws = draws.n_draws();
        if draws.has_states() {
            let per_t = (0..draws.state_len())
                .map(|t| effective_sample_size(&draws.state_column(t)))
                .collect::<Result<Vec<_>>>()?;
            let ns = draws.n_state_draws() as f64;
            let clamped: Vec<f64> = per_t.iter().map(|e| e.min(ns)).collect();
            names.push(STATE_MEAN.into());
            ess.push(mean(&clamped));
            names.push(STATE_MIN.into());
            ess.push(clamped.iter().copied().fold(f64::INFINITY, f64::min));
            n_draws = n_draws.max(draws.n_state_draws());
        }
        let minutes = (draws.runtime_secs / 60.0).max(f64::MIN_POSITIVE);
        Self::new(names, ess, n_draws, minutes)
    }

    pub fn ess_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.ess[i])
    }

    pub fn esr_of(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.esr[i])
    }

    pub fn with_runtime(&self, runtime_minutes: f64) -> Result<Self> {
        Self::new(self.names.clone(), self.ess.clone(), self.n_draws, runtime_minutes)
    }
}

/// One sampler run of a grid experiment. `summary` is `None` for a failed
/// replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dgp: String,
    pub group: String,
    pub spec: String,
    pub replicate: usize,
    pub summary: Option<EfficiencySummary>,
    pub error: Option<String>,
}

/// Mean ESR over the replicates of one (DGP, spec) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AesrCell {
    pub dgp: String,
    pub group: String,
    pub spec: String,
    pub param: String,
    pub aesr: f64,
    pub replicates: usize,
    pub complete: bool,
}

/// Minimum AESR over the DGPs of a group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaesrCell {
    pub group: String,
    pub spec: String,
    pub param: String,
    pub maesr: f64,
    pub complete: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AesrTables {
    pub cells: Vec<AesrCell>,
    pub minima: Vec<MaesrCell>,
}

/// Aggregate run records. A cell with fewer than `expected_replicates`
/// successful runs is flagged incomplete, and so is its group minimum.
pub fn aesr_table(records: &[RunRecord], expected_replicates: usize) -> AesrTables {
    type CellKey = (String, String, String, String);
    let mut sums: BTreeMap<CellKey, (f64, usize)> = BTreeMap::new();
    let mut seen: BTreeMap<(String, String, String), usize> = BTreeMap::new();
    for r in records {
        seen.entry((r.group.clone(), r.dgp.clone(), r.spec.clone()))
            .or_insert(0);
        let Some(s) = &r.summary else {
            log::warn!("excluding failed replicate {} of {} {}", r.replicate, r.dgp, r.spec);
            continue;
        };
        *seen.get_mut(&(r.group.clone(), r.dgp.clone(), r.spec.clone())).unwrap() += 1;
        for (name, esr) in s.names.iter().zip(&s.esr) {
            let e = sums
                .entry((r.group.clone(), r.dgp.clone(), r.spec.clone(), name.clone()))
                .or_insert((0.0, 0));
            e.0 += esr;
            e.1 += 1;
        }
    }
    let mut cells = Vec::new();
    for ((group, dgp, spec, param), (sum, k)) in sums {
        let ok = seen[&(group.clone(), dgp.clone(), spec.clone())];
        cells.push(AesrCell {
            dgp,
            group,
            spec,
            param,
            aesr: sum / k as f64,
            replicates: k,
            complete: ok >= expected_replicates && k == ok,
        });
    }
    // Cells whose every replicate failed still poison the group minimum.
    let failed_cells: Vec<(String, String)> = seen
        .iter()
        .filter(|(_, &ok)| ok < expected_replicates)
        .map(|((g, _, s), _)| (g.clone(), s.clone()))
        .collect();
    let mut mins: BTreeMap<(String, String, String), (f64, bool)> = BTreeMap::new();
    for c in &cells {
        let e = mins
            .entry((c.group.clone(), c.spec.clone(), c.param.clone()))
            .or_insert((f64::INFINITY, true));
        e.0 = e.0.min(c.aesr);
        e.1 &= c.complete;
    }
    let minima = mins
        .into_iter()
        .map(|((group, spec, param), (maesr, complete))| {
            let complete = complete && !failed_cells.contains(&(group.clone(), spec.clone()));
            MaesrCell {
                group,
                spec,
                param,
                maesr,
                complete,
            }
        })
        .collect();
    AesrTables { cells, minima }
}

impl AesrTables {
    /// Rows in `params` order, one column per spec in `specs` order, for
    /// each group. Values are mAESR; incomplete entries carry a `*`.
    pub fn maesr_csv(&self, params: &[&str], specs: &[String]) -> String {
        let mut groups: Vec<&str> = self.minima.iter().map(|m| m.group.as_str()).collect();
        groups.dedup();
        let mut out = String::from("group,param");
        for s in specs {
            out.push(',');
            out.push_str(&csv_field(s));
        }
        out.push('\n');
        for g in groups {
            for &p in params {
                out.push_str(&format!("{},{}", csv_field(g), p));
                for s in specs {
                    let cell = self
                        .minima
                        .iter()
                        .find(|m| m.group == g && m.param == p && &m.spec == s);
                    match cell {
                        Some(m) if m.complete => out.push_str(&format!(",{:.3}", m.maesr)),
                        Some(m) => out.push_str(&format!(",{:.3}*", m.maesr)),
                        None => out.push(','),
                    }
                }
                out.push('\n');
            }
        }
        out
    }

    /// Long-format AESR cells.
    pub fn aesr_csv(&self) -> String {
        let mut out = String::from("group,dgp,spec,param,aesr,replicates,complete\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{}\n",
                csv_field(&c.group),
                csv_field(&c.dgp),
                csv_field(&c.spec),
                c.param,
                c.aesr,
                c.replicates,
                c.complete
            ));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1(n: usize, rho: f64, seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::with_capacity(n);
        let mut v: f64 = StandardNormal.sample(&mut r);
        for _ in 0..n {
            let e: f64 = StandardNormal.sample(&mut r);
            v = rho * v + (1.0 - rho * rho).sqrt() * e;
            x.push(v);
        }
        x
    }

    #[test]
    fn iid_ess_near_n() {
        let x = ar1(10_000, 0.0, 1);
        let r = effective_sample_size(&x).unwrap() / 1e4;
        assert!((0.8..=1.2).contains(&r), "{r}");
    }

    #[test]
    fn ar1_ess_matches_integrated_autocorrelation() {
        let x = ar1(100_000, 0.9, 2);
        let want = 0.1 / 1.9;
        let got = effective_sample_size(&x).unwrap() / 1e5;
        assert!((got / want - 1.0).abs() < 0.25, "{got} vs {want}");
        let bm = batch_means_ess(&x).unwrap() / 1e5;
        assert!((bm / want - 1.0).abs() < 0.35, "{bm}");
    }

    #[test]
    fn alternating_chain() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = effective_sample_size(&x).unwrap();
        assert!(e.is_finite() && e > 1000.0);
    }

    #[test]
    fn constant_chain_returns_n() {
        assert_eq!(effective_sample_size(&[2.5; 300]).unwrap(), 300.0);
        assert!(effective_sample_size(&[1.0; 10]).is_err());
    }

    #[test]
    fn quantile_convention() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let q = posterior_quantiles(&x, &[0.05, 0.95]).unwrap();
        assert!((q[0] - 5.95).abs() < 1e-12);
        assert!((q[1] - 95.05).abs() < 1e-12);
    }

    #[test]
    fn mode_of_normal_and_point_mass() {
        let x = ar1(100_000, 0.0, 3);
        let m = posterior_mode(&x).unwrap();
        let med = posterior_quantiles(&x, &[0.5]).unwrap()[0];
        assert!((m - med).abs() < 0.2);
        assert_eq!(posterior_mode(&[0.7; 200]).unwrap(), 0.7);
    }

    #[test]
    fn kendall_matches_quadratic_count() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(f64, f64)> = (0..300)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut r);
                let b: f64 = StandardNormal.sample(&mut r);
                ((a * 4.0).round(), ((a + b) * 3.0).round())
            })
            .collect();
        let (mut c, mut d, mut tx, mut ty) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
        for i in 0..pairs.len() {
            for j in i + 1..pairs.len() {
                let sx = (pairs[i].0 - pairs[j].0).signum() * ((pairs[i].0 != pairs[j].0) as i32 as f64);
                let sy = (pairs[i].1 - pairs[j].1).signum() * ((pairs[i].1 != pairs[j].1) as i32 as f64);
                if sx * sy > 0.0 {
                    c += 1.0;
                } else if sx * sy < 0.0 {
                    d += 1.0;
                } else {
                    if sx == 0.0 && sy != 0.0 {
                        tx += 1.0;
                    }
                    if sy == 0.0 && sx != 0.0 {
                        ty += 1.0;
                    }
                }
            }
        }
        let want = (c - d) / ((c + d + tx) * (c + d + ty)).sqrt();
        assert!((kendall_tau(&pairs) - want).abs() < 1e-12);
    }

    #[test]
    fn ks_uniform() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..2000).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
        let (_, p) = ks_test(&x, |v| v);
        assert!(p > 0.01);
        let (_, p) = ks_test(&x, |v| v * v);
        assert!(p < 1e-6);
    }

    fn summary(esr: &[f64]) -> EfficiencySummary {
        EfficiencySummary::new(vec!["mu".into(), "sigma".into()], esr.to_vec(), 1000, 1.0).unwrap()
    }

    fn rec(dgp: &str, group: &str, rep: usize, s: Option<EfficiencySummary>) -> RunRecord {
        RunRecord {
            dgp: dgp.into(),
            group: group.into(),
            spec: "(5,I)".into(),
            replicate: rep,
            summary: s,
            error: None,
        }
    }

    #[test]
    fn aesr_hand_computed() {
        let recs = vec![
            rec("a", "g", 0, Some(summary(&[10.0, 4.0]))),
            rec("a", "g", 1, Some(summary(&[20.0, 6.0]))),
            rec("b", "g", 0, Some(summary(&[12.0, 1.0]))),
            rec("b", "g", 1, Some(summary(&[8.0, 3.0]))),
        ];
        let t = aesr_table(&recs, 2);
        let cell = |d: &str, p: &str| t.cells.iter().find(|c| c.dgp == d && c.param == p).unwrap().aesr;
        assert_eq!(cell("a", "mu"), 15.0);
        assert_eq!(cell("b", "sigma"), 2.0);
        let m = |p: &str| t.minima.iter().find(|c| c.param == p).unwrap();
        assert_eq!(m("mu").maesr, 10.0);
        assert_eq!(m("sigma").maesr, 2.0);
        assert!(m("mu").complete);

        let single = aesr_table(&recs[..1], 1);
        assert_eq!(single.cells[0].aesr, 10.0);
    }

    #[test]
    fn missing_replicate_flags_group() {
        let recs = vec![
            rec("a", "g", 0, Some(summary(&[10.0, 4.0]))),
            rec("a", "g", 1, None),
            rec("b", "g", 0, Some(summary(&[12.0, 1.0]))),
            rec("b", "g", 1, Some(summary(&[8.0, 3.0]))),
        ];
        let t = aesr_table(&recs, 2);
        assert!(t.minima.iter().all(|m| !m.complete));
        assert!(t.maesr_csv(&["mu", "sigma"], &["(5,I)".into()]).contains('*'));
    }

    #[test]
    fn esr_scales_with_runtime() {
        let s = summary(&[10.0, 4.0]);
        let d = s.with_runtime(2.0).unwrap();
        assert_eq!(d.esr[0], s.esr[0] / 2.0);
        assert_eq!(
            EfficiencySummary::new(vec!["x".into()], vec![5e3], 1000, 1.0)
                .unwrap()
                .ess[0],
            1000.0
        );
    }
}
