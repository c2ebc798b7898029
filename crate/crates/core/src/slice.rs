//! Elliptical slice sampling for targets with a zero-mean Gaussian prior.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};

/// Hard cap on bracket shrinkages per transition.
pub const MAX_SHRINK: usize = 1000;

/// Outcome of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssStep {
    /// Log-likelihood at the accepted point.
    pub loglik: f64,
    /// Number of proposals evaluated (1 means first-try acceptance).
    pub proposals: usize,
}

/// One elliptical slice transition, updating `theta` in place.
///
/// `prior_draw` fills its argument with a draw from `N(0, Sigma)`;
/// `loglik` evaluates the log-likelihood. `cur_loglik` must equal
/// `loglik(theta)`. `nu` and `prop` are scratch buffers of the same length
/// as `theta`.
pub fn ess_step<R, P, L>(
    theta: &mut [f64],
    cur_loglik: f64,
    mut prior_draw: P,
    mut loglik: L,
    rng: &mut R,
    nu: &mut [f64],
    prop: &mut [f64],
) -> Result<EssStep>
where
    R: Rng + ?Sized,
    P: FnMut(&mut R, &mut [f64]),
    L: FnMut(&[f64]) -> f64,
{
    if cur_loglik.is_nan() {
        return Err(Error::Numeric("log-likelihood is NaN at the current point".into()));
    }
    prior_draw(rng, nu);
    let log_y = cur_loglik + rng.random::<f64>().ln();
    let mut omega = rng.random::<f64>() * 2.0 * PI;
    let mut lo = omega - 2.0 * PI;
    let mut hi = omega;
    for it in 1..=MAX_SHRINK {
        let (s, c) = omega.sin_cos();
        for ((p, &t), &v) in prop.iter_mut().zip(theta.iter()).zip(nu.iter()) {
            *p = t * c + v * s;
        }
        let ll = loglik(prop);
        if ll.is_nan() {
            return Err(Error::Numeric("log-likelihood returned NaN".into()));
        }
        if ll > log_y {
            theta.copy_from_slice(prop);
            if it > 100 {
                log::warn!("elliptical slice step needed {it} proposals");
            }
            return Ok(EssStep {
                loglik: ll,
                proposals: it,
            });
        }
        if omega < 0.0 {
            lo = omega;
        } else {
            hi = omega;
        }
        omega = lo + rng.random::<f64>() * (hi - lo);
    }
    Err(Error::Numeric(format!(
        "elliptical slice step did not accept within {MAX_SHRINK} proposals"
    )))
}
