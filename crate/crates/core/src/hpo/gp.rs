//! Gaussian-process surrogate over the unit cube.
//!
//! Kernel `k(a, b) = s² exp(-|a - b|² / 2ℓ²) + noise·[a = b]`, isotropic.
//! `(ℓ, s², noise)` is the grid point with the largest log marginal
//! likelihood. Objectives are standardized before fitting and the posterior
//! is reported back in objective units.

use nalgebra::{DMatrix, DVector};

use super::HpoError;

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub length_scales: Vec<f64>,
    pub signal_variances: Vec<f64>,
    pub noise_variances: Vec<f64>,
    /// Diagonal jitter for the first factorization attempt; multiplied by 10
    /// on failure up to `max_jitter`.
    pub jitter: f64,
    pub max_jitter: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        GpConfig {
            length_scales: vec![0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0, 1.5, 2.5, 4.0],
            signal_variances: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            noise_variances: vec![1e-6, 1e-4, 1e-2, 0.1],
            jitter: 1e-8,
            max_jitter: 1e-2,
        }
    }
}

impl GpConfig {
    /// A single kernel, no hyperparameter search.
    pub fn fixed(length_scale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        GpConfig {
            length_scales: vec![length_scale],
            signal_variances: vec![signal_variance],
            noise_variances: vec![noise_variance],
            ..GpConfig::default()
        }
    }
}

/// A fitted posterior.
#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub points: Vec<Vec<f64>>,
    pub objectives: Vec<f64>,
    pub length_scale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
    /// Jitter that made the factorization succeed.
    pub jitter: f64,
    pub log_marginal_likelihood: f64,
    /// Smallest observed objective.
    pub f_best: f64,
    y_mean: f64,
    y_scale: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn rbf(a: &[f64], b: &[f64], length_scale: f64, signal_variance: f64) -> f64 {
    signal_variance * (-sq_dist(a, b) / (2.0 * length_scale * length_scale)).exp()
}

struct Fitted {
    jitter: f64,
    lml: f64,
    l: DMatrix<f64>,
    alpha: DVector<f64>,
}

fn factor(points: &[Vec<f64>], y: &DVector<f64>, ls: f64, s2: f64, noise: f64, cfg: &GpConfig) -> Option<Fitted> {
    let n = points.len();
    let base = DMatrix::from_fn(n, n, |i, j| rbf(&points[i], &points[j], ls, s2));
    let mut jitter = cfg.jitter;
    loop {
        let mut k = base.clone();
        for i in 0..n {
            k[(i, i)] += noise + jitter;
        }
        if let Some(chol) = k.cholesky() {
            let alpha = chol.solve(y);
            let l = chol.unpack();
            let log_det: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
            let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            if lml.is_finite() {
                return Some(Fitted { jitter, lml, l, alpha });
            }
        }
        jitter *= 10.0;
        if jitter > cfg.max_jitter {
            return None;
        }
    }
}

impl SurrogateState {
    /// Fits a posterior to `points` (each in the unit cube) and their objectives.
    pub fn fit(points: Vec<Vec<f64>>, objectives: Vec<f64>, cfg: &GpConfig) -> Result<Self, HpoError> {
        if points.is_empty() {
            return Err(HpoError::NoSuccessfulTrials);
        }
        assert_eq!(points.len(), objectives.len(), "one objective per point");
        let n = objectives.len() as f64;
        let y_mean = objectives.iter().sum::<f64>() / n;
        let var = objectives.iter().map(|y| (y - y_mean) * (y - y_mean)).sum::<f64>() / n;
        let y_scale = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(objectives.len(), objectives.iter().map(|v| (v - y_mean) / y_scale));

        let mut best: Option<(f64, f64, f64, Fitted)> = None;
        for &ls in &cfg.length_scales {
            for &s2 in &cfg.signal_variances {
                for &noise in &cfg.noise_variances {
                    if let Some(f) = factor(&points, &y, ls, s2, noise, cfg) {
                        if best.as_ref().is_none_or(|b| f.lml > b.3.lml) {
                            best = Some((ls, s2, noise, f));
                        }
                    }
                }
            }
        }
        let (length_scale, signal_variance, noise_variance, fitted) = best.ok_or(HpoError::SingularKernel)?;
        let f_best = objectives.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(SurrogateState {
            points,
            objectives,
            length_scale,
            signal_variance,
            noise_variance,
            jitter: fitted.jitter,
            log_marginal_likelihood: fitted.lml,
            f_best,
            y_mean,
            y_scale,
            chol_l: fitted.l,
            alpha: fitted.alpha,
        })
    }

    /// Posterior mean and standard deviation of the latent objective at `u`.
    pub fn predict(&self, u: &[f64]) -> (f64, f64) {
        let k = DVector::from_iterator(
            self.points.len(),
            self.points
                .iter()
                .map(|p| rbf(p, u, self.length_scale, self.signal_variance)),
        );
        let mean = k.dot(&self.alpha);
        let v = self
            .chol_l
            .solve_lower_triangular(&k)
            .expect("cholesky factor has a positive diagonal");
        let var = (self.signal_variance - v.dot(&v)).max(0.0);
        (self.y_mean + mean * self.y_scale, var.sqrt() * self.y_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_observation_is_interpolated() {
        let s = SurrogateState::fit(vec![vec![0.3, 0.7]], vec![4.2], &GpConfig::default()).unwrap();
        let (mu, _) = s.predict(&[0.3, 0.7]);
        assert!((mu - 4.2).abs() < 1e-6);
        assert_eq!(s.f_best, 4.2);
    }

    #[test]
    fn duplicate_points_still_factor() {
        let pts = vec![vec![0.5]; 4];
        let s = SurrogateState::fit(pts, vec![1.0, 1.1, 0.9, 1.0], &GpConfig::fixed(0.3, 1.0, 0.0)).unwrap();
        assert!(s.jitter > 0.0);
        assert!(s.predict(&[0.5]).0.is_finite());
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(matches!(
            SurrogateState::fit(vec![], vec![], &GpConfig::default()),
            Err(HpoError::NoSuccessfulTrials)
        ));
    }
}
