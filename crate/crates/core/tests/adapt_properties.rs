use interweave_core::engine::adapt::{BivariateAdapt, ScalarAdapt, BIVARIATE_TARGET, COV_WARMUP, SCALAR_TARGET};
use proptest::prelude::*;

fn batch_moments(x: &[[f64; 2]]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = x.len() as f64;
    let m = [0, 1].map(|i| x.iter().map(|v| v[i]).sum::<f64>() / n);
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = x.iter().map(|v| (v[i] - m[i]) * (v[j] - m[j])).sum::<f64>() / (n - 1.0);
        }
    }
    (m, c)
}

proptest! {
    #[test]
    fn running_moments_match_batch(x in proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..400)) {
        let pts: Vec<[f64; 2]> = x.iter().map(|&(a, b)| [a, b]).collect();
        let mut ad = BivariateAdapt::new(1.0);
        for p in &pts {
            ad.observe(*p);
        }
        let (m, c) = batch_moments(&pts);
        let scale = 1.0 + c[0][0].abs().max(c[1][1].abs());
        for i in 0..2 {
            prop_assert!((ad.emp_mean[i] - m[i]).abs() < 1e-10 * (1.0 + m[i].abs()));
            for j in 0..2 {
                prop_assert!((ad.emp_cov[i][j] - c[i][j]).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn proposal_is_positive_definite(x in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 2..300), r in 1usize..5000) {
        let mut ad = BivariateAdapt::new(1.7);
        for &(a, b) in &x {
            ad.observe([a, 2.0 * a + 1e-9 * b]);
        }
        let c = ad.proposal_cov(r.max(COV_WARMUP));
        prop_assert!(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0);
    }

    #[test]
    fn scale_moves_toward_target(r in 2usize..10_000, a in 0.0..1.0f64, sd in 0.01..10.0f64) {
        let mut s = ScalarAdapt::new(sd);
        let before = s.log_scale;
        s.update(r, a);
        prop_assert_eq!(s.log_scale > before, a > SCALAR_TARGET);
        prop_assert_eq!(s.log_scale < before, a < SCALAR_TARGET);
        let mut b = BivariateAdapt::new(sd);
        let before = b.log_scale;
        b.update_scale(r, a);
        prop_assert_eq!(b.log_scale > before, a > BIVARIATE_TARGET);
    }
}

#[test]
fn target_rate_is_a_fixed_point() {
    let mut s = ScalarAdapt::new(0.3);
    let mut b = BivariateAdapt::new(0.3);
    for r in 1..1000 {
        s.update(r, SCALAR_TARGET);
        b.update_scale(r, BIVARIATE_TARGET);
    }
    assert_eq!(s.log_scale, 0.3f64.ln());
    assert_eq!(b.log_scale, 0.3f64.ln());
}
