//! Fixtures shared by the benchmarks in `benches/`.

use interweave_core::simstudy::{simulate_dgp, Dgp};
use interweave_core::{Ar1Params, CopulaFamily};

pub const LATENT: Ar1Params = Ar1Params {
    mu: 0.0,
    phi: 0.9,
    sigma: 0.1,
};

/// Extended Clayton copula data with a latent AR(1) dependence path.
pub fn copula_data(t_len: usize) -> Vec<(f64, f64)> {
    let dgp = Dgp {
        family: CopulaFamily::ExtClayton,
        t_len,
        mu: LATENT.mu,
        phi: LATENT.phi,
        sigma: LATENT.sigma,
        seed: 1,
    };
    simulate_dgp(&dgp).expect("valid DGP").u
}

/// Unit-square grid used to time density evaluations.
pub fn unit_grid(n: usize) -> Vec<(f64, f64)> {
    let step = 1.0 / (n + 1) as f64;
    (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i as f64 * step, j as f64 * step)))
        .collect()
}
