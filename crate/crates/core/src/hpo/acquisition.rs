use std::cmp::Ordering;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;

use super::gp::SurrogateState;
use super::space::{Assignment, SearchSpace};
use super::HpoError;
use crate::rng;

pub const DEFAULT_CANDIDATES: usize = 2048;

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E[max(0, f_best - f)]` for `f ~ N(mu, sigma²)` (minimization).
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> Result<f64, HpoError> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(HpoError::NegativeSigma(sigma));
    }
    let gap = f_best - mu;
    if sigma == 0.0 {
        return Ok(gap.max(0.0));
    }
    let z = gap / sigma;
    Ok((gap * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0))
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// `n` Halton points in `[0, 1)^dims`, shifted modulo 1 by a seeded offset.
pub fn candidate_points(dims: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let bases = primes(dims);
    let mut rng = rng::rng(seed);
    let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
    (1..=n as u64)
        .map(|i| {
            bases
                .iter()
                .zip(&shift)
                .map(|(&b, s)| (radical_inverse(i, b) + s).fract())
                .collect()
        })
        .collect()
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// The feasible candidate with the largest EI, candidates snapped to the
/// parameter lattice first. Equal EIs go to the lexicographically smallest
/// snapped point.
pub fn propose_next(state: &SurrogateState, space: &SearchSpace, seed: u64) -> Assignment {
    propose_among(state, space, seed, DEFAULT_CANDIDATES).0
}

/// [`propose_next`] with an explicit candidate count; also returns the EI of the proposal.
pub fn propose_among(state: &SurrogateState, space: &SearchSpace, seed: u64, n_candidates: usize) -> (Assignment, f64) {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for u in candidate_points(space.dims(), n_candidates.max(1), seed) {
        let snapped = space.snap(&u);
        let (mu, sigma) = state.predict(&snapped);
        let ei = expected_improvement(mu, sigma, state.f_best).expect("posterior sigma is non-negative");
        let better = match &best {
            None => true,
            Some((b, p)) => ei > *b || (ei == *b && lex_cmp(&snapped, p).is_lt()),
        };
        if better {
            best = Some((ei, snapped));
        }
    }
    let (ei, point) = best.expect("at least one candidate");
    (space.decode(&point), ei)
}
