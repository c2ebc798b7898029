use interweave_core::ar1::{
    block_conditional, initial_state_conditional, joint_moments, sample_block_recursive, simulate_path,
};
use interweave_core::{rng, Ar1Params, Block};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

/// Conditional law of `s_{a..=b}` given every other state of `s_{0:T}`,
/// by the Schur complement of the dense stationary covariance.
fn dense_conditional(p: &Ar1Params, t_len: usize, a: usize, b: usize, s: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let n = t_len + 1;
    let g0 = p.sigma * p.sigma / (1.0 - p.phi * p.phi);
    let cov = DMatrix::from_fn(n, n, |i, j| g0 * p.phi.powi(i.abs_diff(j) as i32));
    let inb: Vec<usize> = (a..=b).collect();
    let out: Vec<usize> = (0..n).filter(|i| *i < a || *i > b).collect();
    let sel = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| cov[(rows[i], cols[j])]);
    let s_bb = sel(&inb, &inb);
    let s_bo = sel(&inb, &out);
    let s_oo = sel(&out, &out);
    let dev = DVector::from_iterator(out.len(), out.iter().map(|&i| s[i] - p.mu));
    let chol = s_oo.cholesky().expect("SPD");
    let w = chol.solve(&s_bo.transpose());
    let mean = DVector::from_element(inb.len(), p.mu) + w.transpose() * dev;
    let cov = s_bb - s_bo * w;
    (mean, cov)
}

fn params() -> impl Strategy<Value = Ar1Params> {
    (-3.0..3.0f64, -0.995..0.995f64, 0.05..1.0f64).prop_map(|(mu, phi, sigma)| Ar1Params { mu, phi, sigma })
}

fn case() -> impl Strategy<Value = (Ar1Params, usize, usize, usize, u64)> {
    (params(), 1usize..=50)
        .prop_flat_map(|(p, t)| (Just(p), Just(t), 1..=t))
        .prop_flat_map(|(p, t, a)| (Just(p), Just(t), Just(a), a..=t, any::<u64>()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn block_conditional_matches_schur((p, t, a, b, seed) in case()) {
        let mut r = rng::stream(seed, 0);
        let s = simulate_path(&p, t, &mut r);
        let right = if b < t { Some(s[b + 1]) } else { None };
        let got = block_conditional(&p, &Block::new(a, b).unwrap(), s[a - 1], right).unwrap();
        let (mean, cov) = dense_conditional(&p, t, a, b, &s);
        let c = b - a + 1;
        for i in 0..c {
            prop_assert!((got.mean[i] - mean[i]).abs() < 1e-8, "mean {i}: {} vs {}", got.mean[i], mean[i]);
            for j in 0..c {
                prop_assert!((got.cov_at(i, j) - cov[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn joint_covariance_is_spd(phi in -0.999..0.999f64, sigma in 0.01..3.0f64, t in 1usize..200) {
        let p = Ar1Params { mu: 0.0, phi, sigma };
        prop_assert!(joint_moments(&p, t).unwrap().cholesky().is_ok());
    }
}

#[test]
fn joint_covariance_spd_at_length_2000() {
    for phi in [0.999, -0.999] {
        let p = Ar1Params {
            mu: 1.0,
            phi,
            sigma: 0.2,
        };
        assert!(joint_moments(&p, 2000).unwrap().cholesky().is_ok());
    }
}

#[test]
fn recursive_draws_match_conditional_moments() {
    let n = 100_000;
    let cases = [
        (
            Ar1Params {
                mu: 0.3,
                phi: 0.95,
                sigma: 0.2,
            },
            Block::new(4, 10).unwrap(),
            0.5,
            Some(-0.1),
        ),
        (
            Ar1Params {
                mu: -1.0,
                phi: -0.6,
                sigma: 0.7,
            },
            Block::new(1, 5).unwrap(),
            -1.4,
            None,
        ),
        (
            Ar1Params {
                mu: 0.0,
                phi: 0.5,
                sigma: 1.0,
            },
            Block::new(7, 7).unwrap(),
            2.0,
            Some(1.0),
        ),
    ];
    for (k, (p, blk, left, right)) in cases.iter().enumerate() {
        let m = block_conditional(p, blk, *left, *right).unwrap();
        let c = blk.len();
        let mut r = rng::stream(17, k as u64);
        let mut sum = vec![0.0; c];
        let mut cross = vec![0.0; c * c];
        for _ in 0..n {
            let x = sample_block_recursive(p, blk, *left, *right, &mut r).unwrap();
            let d: Vec<f64> = x.iter().zip(&m.mean).map(|(a, b)| a - b).collect();
            for i in 0..c {
                sum[i] += d[i];
                for j in 0..c {
                    cross[i * c + j] += d[i] * d[j];
                }
            }
        }
        let nf = n as f64;
        for i in 0..c {
            let se = (m.cov_at(i, i) / nf).sqrt();
            assert!((sum[i] / nf).abs() < 4.0 * se, "case {k} mean {i}");
            for j in 0..c {
                let want = m.cov_at(i, j);
                let se = ((m.cov_at(i, i) * m.cov_at(j, j) + want * want) / nf).sqrt();
                assert!((cross[i * c + j] / nf - want).abs() < 4.0 * se, "case {k} cov {i},{j}");
            }
        }
    }
}

#[test]
fn deterministic_given_seed() {
    let p = Ar1Params {
        mu: 0.1,
        phi: 0.7,
        sigma: 0.4,
    };
    let a = simulate_path(&p, 50, &mut rng::stream(9, 3));
    let b = simulate_path(&p, 50, &mut rng::stream(9, 3));
    assert_eq!(a, b);
    let blk = Block::new(2, 9).unwrap();
    let x = sample_block_recursive(&p, &blk, 0.0, Some(1.0), &mut rng::stream(9, 4)).unwrap();
    let y = sample_block_recursive(&p, &blk, 0.0, Some(1.0), &mut rng::stream(9, 4)).unwrap();
    assert_eq!(x, y);
}

/// Sample mean and covariance checked entrywise against `(mean, cov)` at
/// `k` standard errors.
fn check_moments(draws: &[Vec<f64>], mean: &[f64], cov: impl Fn(usize, usize) -> f64, k: f64, what: &str) {
    let n = draws.len() as f64;
    let c = mean.len();
    for i in 0..c {
        let m = draws.iter().map(|x| x[i]).sum::<f64>() / n;
        assert!(
            (m - mean[i]).abs() < k * (cov(i, i) / n).sqrt(),
            "{what}: mean {i} {m} vs {}",
            mean[i]
        );
        for j in 0..c {
            let v = draws.iter().map(|x| (x[i] - mean[i]) * (x[j] - mean[j])).sum::<f64>() / n;
            let want = cov(i, j);
            let se = ((cov(i, i) * cov(j, j) + want * want) / n).sqrt();
            assert!((v - want).abs() < k * se, "{what}: cov {i},{j} {v} vs {want}");
        }
    }
}

#[test]
fn joint_moments_match_forward_simulation() {
    let p = Ar1Params {
        mu: 1.0,
        phi: 0.5,
        sigma: 1.0,
    };
    let m = joint_moments(&p, 5).unwrap();
    let mut r = rng::stream(61, 0);
    let draws: Vec<Vec<f64>> = (0..200_000).map(|_| simulate_path(&p, 5, &mut r)).collect();
    check_moments(&draws, &m.mean, |i, j| m.cov_at(i, j), 3.0, "joint");
}

#[test]
fn last_block_matches_forward_simulation() {
    // With no right boundary the block law is the forward recursion from s_left.
    let p = Ar1Params {
        mu: 0.3,
        phi: 0.9,
        sigma: 0.5,
    };
    let blk = Block::new(8, 10).unwrap();
    let left = 1.0;
    let m = block_conditional(&p, &blk, left, None).unwrap();
    let mut r = rng::stream(62, 0);
    let draws: Vec<Vec<f64>> = (0..200_000)
        .map(|_| {
            let mut prev = left;
            (0..blk.len())
                .map(|_| {
                    let e: f64 = StandardNormal.sample(&mut r);
                    prev = p.mu + p.phi * (prev - p.mu) + p.sigma * e;
                    prev
                })
                .collect()
        })
        .collect();
    check_moments(&draws, &m.mean, |i, j| m.cov_at(i, j), 4.0, "last block");
}

#[test]
fn initial_state_is_the_reversed_last_block() {
    // The stationary chain is reversible, so s_0 | s_1 is a last block of
    // length one with left neighbour s_1.
    let (m, v) = initial_state_conditional(
        &Ar1Params {
            mu: 1.0,
            phi: 0.9,
            sigma: 0.1,
        },
        2.0,
    )
    .unwrap();
    assert!((m - 1.9).abs() < 1e-12 && (v - 0.01).abs() < 1e-12);
    for (p, s1) in [
        (
            Ar1Params {
                mu: 1.0,
                phi: 0.9,
                sigma: 0.1,
            },
            2.0,
        ),
        (
            Ar1Params {
                mu: -0.4,
                phi: -0.7,
                sigma: 1.3,
            },
            0.25,
        ),
        (
            Ar1Params {
                mu: 3.0,
                phi: 0.999,
                sigma: 0.02,
            },
            2.9,
        ),
    ] {
        let (m, v) = initial_state_conditional(&p, s1).unwrap();
        let rev = block_conditional(&p, &Block::new(9, 9).unwrap(), s1, None).unwrap();
        assert!((m - rev.mean[0]).abs() < 1e-12, "{m} vs {}", rev.mean[0]);
        assert!(
            (v - rev.cov_at(0, 0)).abs() < 1e-12 * v.max(1.0),
            "{v} vs {}",
            rev.cov_at(0, 0)
        );
    }
}
