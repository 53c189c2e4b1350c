//! Seeded synthetic demolition dataset.
//!
//! Generative law, per record:
//!
//! * frame and usage drawn from categorical priors,
//! * gfa ~ LogNormal matched to mean 1962.75 / sd 2684.70 m², clipped to [4.80, 10051],
//! * levels drawn from a 1..=7 categorical with mean ≈ 2 and sd ≈ 1.07,
//! * volume = gfa · storey height, height ~ Normal(3.5, 0.4) m truncated at 2 m,
//! * target_k = rate_k(frame) · gfa · (1 + usage_modifier) · ε_k with
//!   ε_k = exp(σ z − σ²/2), z ~ N(0, 1), so E[ε] = 1 and σ = 0 is noise-free.
//!
//! Every quantity is clipped to the descriptive-table min/max. Gross floor area
//! is the dominant driver of all three targets by construction.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    BuildingRecord, DataError, Dataset, FrameType, Provenance, TargetTriple, UsageType,
    NUM_OUTPUTS,
};
use crate::rng;

const GFA_MEAN: f64 = 1962.75;
const GFA_STD: f64 = 2684.70;

/// Recycle, reuse and landfill m³ per m² of floor area, averaged over the dataset.
pub const MEAN_RATES: [f64; NUM_OUTPUTS] = [500.07 / GFA_MEAN, 108.87 / GFA_MEAN, 74.76 / GFA_MEAN];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    /// Concrete, Masonry, Steel, Timber.
    pub frame_probs: [f64; 4],
    pub usage_probs: [f64; 7],
    /// Probability of 1..=7 storeys.
    pub level_probs: [f64; 7],
    /// Per-frame (recycle, reuse, landfill) m³ per m² gfa.
    pub frame_rates: [[f64; NUM_OUTPUTS]; 4],
    /// Multiplicative usage effect, applied as `1 + modifier`.
    pub usage_modifiers: [f64; 7],
    pub gfa_log_mu: f64,
    pub gfa_log_sigma: f64,
    /// Lognormal noise scale on the targets.
    pub noise_sigma: f64,
    pub storey_height_mean: f64,
    pub storey_height_std: f64,
    pub storey_height_min: f64,
    pub gfa_bounds: (f64, f64),
    pub volume_bounds: (f64, f64),
    pub target_bounds: [(f64, f64); NUM_OUTPUTS],
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let cv2 = (GFA_STD / GFA_MEAN).powi(2);
        let log_var = (1.0 + cv2).ln();
        let factors: [[f64; NUM_OUTPUTS]; 4] = [
            [1.10, 0.80, 0.90],
            [0.95, 1.00, 1.20],
            [0.85, 1.60, 0.80],
            [0.80, 1.30, 1.10],
        ];
        GeneratorConfig {
            n: 2280,
            seed: 7,
            frame_probs: [0.45, 0.30, 0.20, 0.05],
            usage_probs: [0.05, 0.10, 0.15, 0.05, 0.20, 0.30, 0.15],
            level_probs: [0.38, 0.38, 0.15, 0.055, 0.025, 0.008, 0.002],
            frame_rates: factors.map(|f| [0, 1, 2].map(|k| MEAN_RATES[k] * f[k])),
            usage_modifiers: [-0.05, 0.06, -0.03, 0.08, -0.02, 0.0, 0.01],
            gfa_log_mu: GFA_MEAN.ln() - log_var / 2.0,
            gfa_log_sigma: log_var.sqrt(),
            noise_sigma: 0.15,
            storey_height_mean: 3.5,
            storey_height_std: 0.4,
            storey_height_min: 2.0,
            gfa_bounds: (4.80, 10051.00),
            volume_bounds: (9.60, 76380.00),
            target_bounds: [(0.98, 4453.63), (0.11, 1936.34), (0.00, 1229.50)],
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: &str| Err(DataError::InvalidConfig(msg.to_string()));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        for (name, probs) in [
            ("frame_probs", &self.frame_probs[..]),
            ("usage_probs", &self.usage_probs[..]),
            ("level_probs", &self.level_probs[..]),
        ] {
            if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
                || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12
            {
                return Err(DataError::InvalidConfig(format!(
                    "{name} must be non-negative and sum to 1"
                )));
            }
        }
        if self.frame_rates.iter().flatten().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return bad("rates must be non-negative");
        }
        if self.usage_modifiers.iter().any(|m| !(m.is_finite() && *m > -1.0)) {
            return bad("usage modifiers must exceed -1");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.gfa_log_sigma.is_finite() && self.gfa_log_sigma >= 0.0) || !self.gfa_log_mu.is_finite() {
            return bad("gfa lognormal parameters must be finite");
        }
        if !(self.storey_height_std >= 0.0 && self.storey_height_min > 0.0) {
            return bad("storey height must be positive");
        }
        let bounds_ok = |(lo, hi): (f64, f64), strictly_positive: bool| {
            lo <= hi && if strictly_positive { lo > 0.0 } else { lo >= 0.0 }
        };
        if !bounds_ok(self.gfa_bounds, true)
            || !bounds_ok(self.volume_bounds, true)
            || !self.target_bounds.iter().all(|b| bounds_ok(*b, false))
        {
            return bad("clip bounds must be ordered and non-negative");
        }
        Ok(())
    }

    /// Noise-free expected targets for one building.
    pub fn expected_targets(&self, gfa: f64, frame: FrameType, usage: UsageType) -> [f64; NUM_OUTPUTS] {
        let scale = gfa * (1.0 + self.usage_modifiers[usage.index()]);
        self.frame_rates[frame.index()].map(|rate| rate * scale)
    }
}

pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Dataset, DataError> {
    config.validate()?;
    let invalid = |e: &dyn std::fmt::Display| DataError::InvalidConfig(e.to_string());
    let frame_dist = WeightedIndex::new(config.frame_probs).map_err(|e| invalid(&e))?;
    let usage_dist = WeightedIndex::new(config.usage_probs).map_err(|e| invalid(&e))?;
    let level_dist = WeightedIndex::new(config.level_probs).map_err(|e| invalid(&e))?;
    let gfa_dist = LogNormal::new(config.gfa_log_mu, config.gfa_log_sigma).map_err(|e| invalid(&e))?;
    let height_dist = Normal::new(config.storey_height_mean, config.storey_height_std)
        .map_err(|e| invalid(&e))?;

    let mut rng = rng::rng(config.seed);
    let sigma = config.noise_sigma;
    let mut records = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let frame = FrameType::ALL[frame_dist.sample(&mut rng)];
        let usage = UsageType::ALL[usage_dist.sample(&mut rng)];
        let levels = level_dist.sample(&mut rng) as u32 + 1;
        let gfa = gfa_dist
            .sample(&mut rng)
            .clamp(config.gfa_bounds.0, config.gfa_bounds.1);
        let height = height_dist.sample(&mut rng).max(config.storey_height_min);
        let volume = (gfa * height).clamp(config.volume_bounds.0, config.volume_bounds.1);

        let expected = config.expected_targets(gfa, frame, usage);
        let mut target = [0.0; NUM_OUTPUTS];
        for k in 0..NUM_OUTPUTS {
            let z: f64 = rng.sample(StandardNormal);
            let noise = if sigma > 0.0 {
                (sigma * z - sigma * sigma / 2.0).exp()
            } else {
                1.0
            };
            let (lo, hi) = config.target_bounds[k];
            target[k] = (expected[k] * noise).clamp(lo, hi);
        }
        let record = BuildingRecord::new(gfa, volume, levels, frame, usage)
            .map_err(DataError::InvalidConfig)?;
        records.push((record, TargetTriple::from_array(target)));
    }
    Ok(Dataset {
        records,
        provenance: Provenance::Synthetic,
        seed: Some(config.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::summarize;

    #[test]
    fn default_rates_average_to_table_ratios() {
        let c = GeneratorConfig::default();
        assert!((MEAN_RATES[0] - 0.2548).abs() < 1e-4);
        assert!((MEAN_RATES[1] - 0.0555).abs() < 1e-4);
        assert!((MEAN_RATES[2] - 0.0381).abs() < 1e-4);
        // frame factors average to roughly one under the frame prior
        for k in 0..NUM_OUTPUTS {
            let avg: f64 = (0..4).map(|f| c.frame_probs[f] * c.frame_rates[f][k]).sum();
            assert!((avg / MEAN_RATES[k] - 1.0).abs() < 0.06, "output {k}: {avg}");
        }
    }

    #[test]
    fn calibrated_moments() {
        let d = generate_synthetic(&GeneratorConfig::default()).unwrap();
        let s = summarize(&d).unwrap();
        assert_eq!(d.len(), 2280);
        assert!((s.gfa.mean / 1962.75 - 1.0).abs() < 0.30, "gfa mean {}", s.gfa.mean);
        assert!((s.recycle.mean / 500.07 - 1.0).abs() < 0.30, "recycle mean {}", s.recycle.mean);
        assert!((s.levels.mean - 2.0).abs() < 0.2);
    }

    #[test]
    fn respects_generator_bounds() {
        let d = generate_synthetic(&GeneratorConfig::default()).unwrap();
        for (r, t) in &d.records {
            assert!((4.80..=10051.0).contains(&r.gfa));
            assert!((9.60..=76380.0).contains(&r.volume));
            assert!((1..=7).contains(&r.levels));
            assert!(t.landfill >= 0.0 && t.recycle >= 0.98 && t.reuse >= 0.11);
        }
    }

    #[test]
    fn noise_free_targets_are_a_function_of_gfa_frame_usage() {
        let c = GeneratorConfig {
            n: 300,
            noise_sigma: 0.0,
            ..GeneratorConfig::default()
        };
        let d = generate_synthetic(&c).unwrap();
        for (r, t) in &d.records {
            let e = c.expected_targets(r.gfa, r.frame_type, r.usage_type);
            for k in 0..NUM_OUTPUTS {
                let (lo, hi) = c.target_bounds[k];
                assert_eq!(t.to_array()[k], e[k].clamp(lo, hi));
            }
        }
    }

    #[test]
    fn single_record_and_determinism() {
        let c = GeneratorConfig {
            n: 1,
            seed: 99,
            ..GeneratorConfig::default()
        };
        let d = generate_synthetic(&c).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.records[0].0.validate().is_ok());
        assert_eq!(d, generate_synthetic(&c).unwrap());
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut c = GeneratorConfig::default();
        c.frame_probs = [0.5, 0.5, 0.5, -0.5];
        assert!(generate_synthetic(&c).is_err());
        let c = GeneratorConfig {
            n: 0,
            ..GeneratorConfig::default()
        };
        assert!(generate_synthetic(&c).is_err());
    }
}
