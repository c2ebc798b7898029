//! Numerical quadrature: adaptive Gauss-Kronrod (7/15) and Gauss-Legendre
//! rules.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]` to absolute
/// tolerance `tol`. Returns the estimate and the accumulated error bound.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let (est, err) = gk15(&mut f, a, b);
    let mut intervals = vec![(a, b, est, err)];
    let mut total_err = err;
    let mut iterations = 0;
    while total_err > tol && iterations < 2000 {
        // Bisect the interval with the largest error.
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap();
        let (lo, hi, e0, r0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            intervals.push((lo, hi, e0, 0.0));
            total_err -= r0;
            continue;
        }
        let (e1, r1) = gk15(&mut f, lo, mid);
        let (e2, r2) = gk15(&mut f, mid, hi);
        total_err += r1 + r2 - r0;
        intervals.push((lo, mid, e1, r1));
        intervals.push((mid, hi, e2, r2));
        iterations += 1;
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let total = intervals.iter().map(|iv| iv.2).sum();
    let total_err = intervals.iter().map(|iv| iv.3).sum();
    (total, total_err)
}

/// Integral over `(-inf, x]` via `y = tan(theta)`; the integrand must decay
/// faster than `1/y^2`.
pub fn integrate_lower_tail<F: FnMut(f64) -> f64>(mut f: F, x: f64, tol: f64) -> f64 {
    let upper = x.atan();
    integrate(
        |th| {
            let c = th.cos();
            if c <= 0.0 {
                return 0.0;
            }
            let v = f(th.tan()) / (c * c);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        -PI / 2.0,
        upper,
        tol,
    )
    .0
}

/// Integral over `[x, inf)` via `y = tan(theta)`.
pub fn integrate_upper_tail<F: FnMut(f64) -> f64>(mut f: F, x: f64, tol: f64) -> f64 {
    integrate_lower_tail(|y| f(-y), -x, tol)
}

/// Integral over the whole real line.
pub fn integrate_real_line<F: FnMut(f64) -> f64>(mut f: F, tol: f64) -> f64 {
    integrate_lower_tail(&mut f, 0.0, tol / 2.0) + integrate_upper_tail(&mut f, 0.0, tol / 2.0)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (
        x.iter().map(|xi| c + h * xi).collect(),
        w.iter().map(|wi| h * wi).collect(),
    )
}

/// Composite Gauss-Legendre rule: `panels` equal panels of `order` nodes.
pub fn composite_gauss_legendre(order: usize, panels: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x0, w0) = gauss_legendre(order);
    let width = (b - a) / panels as f64;
    let mut xs = Vec::with_capacity(order * panels);
    let mut ws = Vec::with_capacity(order * panels);
    for p in 0..panels {
        let lo = a + p as f64 * width;
        let c = lo + 0.5 * width;
        for (xi, wi) in x0.iter().zip(&w0) {
            xs.push(c + 0.5 * width * xi);
            ws.push(0.5 * width * wi);
        }
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_rule_is_exact_for_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // Degree 19 polynomial: x^18 integrates to 2/19.
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(18)).sum();
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        let (x, w) = gauss_legendre(201);
        let v: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi * xi).sum();
        assert!((v - 2.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_peaks_and_tails() {
        let (v, _) = integrate(|x| (-x * x).exp(), -10.0, 10.0, 1e-13);
        assert!((v - PI.sqrt()).abs() < 1e-12);
        let v = integrate_real_line(|x| 1.0 / (PI * (1.0 + x * x)), 1e-12);
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate_lower_tail(|x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt(), 0.0, 1e-13);
        assert!((v - 0.5).abs() < 1e-12);
        let (v, _) = integrate(|x| x.sqrt(), 0.0, 1.0, 1e-12);
        assert!((v - 2.0 / 3.0).abs() < 1e-10);
    }
}
