use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::acquisition::{propose_among, DEFAULT_CANDIDATES};
use super::gp::{GpConfig, SurrogateState};
use super::space::{params_from_assignment, Assignment, SearchSpace};
use super::HpoError;
use crate::data::{split_dataset, Dataset};
use crate::evaluate::{evaluate_model, Scope};
use crate::learners::{train, LearnerKind};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    /// Evaluation order, from 0.
    pub index: usize,
    pub params: Assignment,
    /// NaN for failed trials.
    pub objective: f64,
    pub status: TrialStatus,
}

impl Trial {
    pub fn is_ok(&self) -> bool {
        self.status == TrialStatus::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Plateau,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: Trial,
    pub history: Vec<Trial>,
    pub stop: StopReason,
}

/// How a trial's validation error is measured on the tuning set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    Holdout { train_fraction: f64 },
    KFold { folds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneConfig {
    pub init_design: usize,
    /// Stop after this many consecutive proposals that improve the best
    /// objective by less than `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
    pub n_candidates: usize,
    pub gp: GpConfig,
    pub validation: Validation,
}

impl Default for TuneConfig {
    fn default() -> Self {
        TuneConfig {
            init_design: 8,
            patience: 10,
            min_delta: 1e-4,
            n_candidates: DEFAULT_CANDIDATES,
            gp: GpConfig::default(),
            validation: Validation::Holdout { train_fraction: 0.8 },
        }
    }
}

/// Fits the surrogate to the successful trials of `history`.
pub fn fit_surrogate(space: &SearchSpace, history: &[Trial], cfg: &GpConfig) -> Result<SurrogateState, HpoError> {
    let ok: Vec<&Trial> = history.iter().filter(|t| t.is_ok()).collect();
    if ok.is_empty() {
        return Err(HpoError::NoSuccessfulTrials);
    }
    let points = ok
        .iter()
        .map(|t| space.encode(&t.params))
        .collect::<Result<Vec<_>, _>>()?;
    SurrogateState::fit(points, ok.iter().map(|t| t.objective).collect(), cfg)
}

/// Seeded Latin hypercube: each coordinate hits each of the `n` strata once.
pub fn latin_hypercube(dims: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng::rng(seed);
    let mut points = vec![vec![0.0; dims]; n];
    for d in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(&mut rng);
        for (point, s) in points.iter_mut().zip(strata) {
            point[d] = (s as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    points
}

/// Bayesian minimization of `objective` over `space`. An `Err` or non-finite
/// value from the objective is recorded as a failed trial.
pub fn minimize<F>(
    space: &SearchSpace,
    budget: usize,
    seed: u64,
    cfg: &TuneConfig,
    mut objective: F,
) -> Result<TuneResult, HpoError>
where
    F: FnMut(&Assignment) -> Result<f64, String>,
{
    if cfg.init_design == 0 {
        return Err(HpoError::InvalidConfig("initial design must hold at least one point".into()));
    }
    if budget < cfg.init_design {
        return Err(HpoError::BudgetTooSmall {
            budget,
            init: cfg.init_design,
        });
    }
    let mut history: Vec<Trial> = Vec::with_capacity(budget);
    let mut evaluate = |params: Assignment, history: &mut Vec<Trial>| {
        let (objective, status) = match objective(&params) {
            Ok(v) if v.is_finite() => (v, TrialStatus::Ok),
            Ok(v) => (f64::NAN, TrialStatus::Failed(format!("objective is {v}"))),
            Err(e) => (f64::NAN, TrialStatus::Failed(e)),
        };
        history.push(Trial {
            index: history.len(),
            params,
            objective,
            status,
        });
    };

    for u in latin_hypercube(space.dims(), cfg.init_design, rng::child_seed(seed, 0)) {
        evaluate(space.decode(&u), &mut history);
    }

    let best_of = |h: &[Trial]| h.iter().filter(|t| t.is_ok()).map(|t| t.objective).fold(f64::INFINITY, f64::min);
    let mut stale = 0;
    let mut stop = StopReason::Budget;
    let mut step = 0u64;
    while history.len() < budget {
        if stale >= cfg.patience {
            stop = StopReason::Plateau;
            break;
        }
        step += 1;
        let proposal_seed = rng::child_seed(seed, step);
        let params = match fit_surrogate(space, &history, &cfg.gp) {
            Ok(state) => propose_among(&state, space, proposal_seed, cfg.n_candidates).0,
            Err(_) => {
                let mut r = rng::rng(proposal_seed);
                space.decode(&(0..space.dims()).map(|_| r.random::<f64>()).collect::<Vec<_>>())
            }
        };
        let before = best_of(&history);
        evaluate(params, &mut history);
        let after = best_of(&history);
        let improved = if before.is_finite() {
            before - after >= cfg.min_delta
        } else {
            after.is_finite()
        };
        stale = if improved { 0 } else { stale + 1 };
    }
    let best = history
        .iter()
        .filter(|t| t.is_ok())
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)))
        .cloned()
        .ok_or(HpoError::NoSuccessfulTrials)?;
    Ok(TuneResult { best, history, stop })
}

/// Validation RMSE (aggregate scope) of `kind` trained with `params` on a
/// split of `data`. The split and training seeds derive from `seed` only,
/// so every trial sees the same folds.
pub fn validation_error(
    kind: LearnerKind,
    params: &Assignment,
    data: &Dataset,
    validation: Validation,
    seed: u64,
) -> Result<f64, String> {
    let learner_params = params_from_assignment(kind, params).map_err(|e| e.to_string())?;
    let train_seed = rng::child_seed(seed, 1);
    let score = |fit: &Dataset, held: &Dataset| -> Result<f64, String> {
        let model = train(fit, &learner_params, train_seed).map_err(|e| e.to_string())?;
        Ok(evaluate_model(&model, held, Scope::Aggregate).map_err(|e| e.to_string())?.rmse)
    };
    match validation {
        Validation::Holdout { train_fraction } => {
            let (fit, held) = split_dataset(data, train_fraction, rng::child_seed(seed, 0)).map_err(|e| e.to_string())?;
            if held.is_empty() {
                return Err("validation split is empty".into());
            }
            score(&fit, &held)
        }
        Validation::KFold { folds } => {
            if folds < 2 || folds > data.len() {
                return Err(format!("cannot make {folds} folds from {} rows", data.len()));
            }
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut rng::rng(rng::child_seed(seed, 0)));
            let mut total = 0.0;
            for f in 0..folds {
                let (mut fit, mut held) = (Vec::new(), Vec::new());
                for (pos, &i) in order.iter().enumerate() {
                    if pos % folds == f { held.push(i) } else { fit.push(i) }
                }
                total += score(&data.subset(&fit), &data.subset(&held))?;
            }
            Ok(total / folds as f64)
        }
    }
}

/// Tunes `kind` on `train` with the default configuration.
pub fn tune(
    kind: LearnerKind,
    space: &SearchSpace,
    train: &Dataset,
    budget: usize,
    seed: u64,
) -> Result<TuneResult, HpoError> {
    tune_with(kind, space, train, budget, seed, &TuneConfig::default())
}

pub fn tune_with(
    kind: LearnerKind,
    space: &SearchSpace,
    train: &Dataset,
    budget: usize,
    seed: u64,
    cfg: &TuneConfig,
) -> Result<TuneResult, HpoError> {
    if train.is_empty() {
        return Err(HpoError::InvalidConfig("tuning set is empty".into()));
    }
    let split_seed = rng::child_seed(seed, u64::MAX);
    minimize(space, budget, seed, cfg, |params| {
        validation_error(kind, params, train, cfg.validation, split_seed)
    })
}

/// `trial,<param>...,objective,status`, one row per trial in evaluation order.
pub fn history_csv(space: &SearchSpace, history: &[Trial]) -> String {
    let mut out = String::from("trial");
    for name in space.names() {
        let _ = write!(out, ",{name}");
    }
    out.push_str(",objective,status\n");
    for t in history {
        let _ = write!(out, "{}", t.index);
        for name in space.names() {
            match t.params.get(name) {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        let status = match &t.status {
            TrialStatus::Ok => "ok",
            TrialStatus::Failed(_) => "failed",
        };
        let _ = writeln!(out, ",{},{status}", t.objective);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::ParamSpec;

    fn line_space() -> SearchSpace {
        SearchSpace::new(vec![ParamSpec::continuous("x", 0.0, 1.0)]).unwrap()
    }

    #[test]
    fn lhs_hits_every_stratum() {
        let pts = latin_hypercube(3, 10, 5);
        for d in 0..3 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[d] * 10.0) as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn budget_equal_to_design_returns_design_best() {
        let r = minimize(&line_space(), 8, 1, &TuneConfig::default(), |a| {
            Ok((a.get("x").unwrap().as_f64().unwrap() - 0.3).powi(2))
        })
        .unwrap();
        assert_eq!(r.history.len(), 8);
        assert_eq!(r.stop, StopReason::Budget);
        let min = r.history.iter().map(|t| t.objective).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best.objective, min);
        assert!(matches!(
            minimize(&line_space(), 7, 1, &TuneConfig::default(), |_| Ok(0.0)),
            Err(HpoError::BudgetTooSmall { budget: 7, init: 8 })
        ));
    }

    #[test]
    fn constant_objective_plateaus_after_patience() {
        let r = minimize(&line_space(), 100, 2, &TuneConfig::default(), |_| Ok(1.5)).unwrap();
        assert_eq!(r.stop, StopReason::Plateau);
        assert_eq!(r.history.len(), 8 + 10);
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let r = minimize(&line_space(), 12, 3, &TuneConfig::default(), |a| {
            let x = a.get("x").unwrap().as_f64().unwrap();
            if x < 0.5 { Err("too small".into()) } else { Ok(x) }
        })
        .unwrap();
        assert_eq!(r.history.len(), 12);
        assert!(r.history.iter().any(|t| !t.is_ok()));
        assert!(r.best.is_ok());
        let csv = history_csv(&line_space(), &r.history);
        assert!(csv.starts_with("trial,x,objective,status\n"));
        assert!(csv.contains(",NaN,failed"));
        assert!(matches!(
            minimize(&line_space(), 9, 3, &TuneConfig::default(), |_| Err("no".into())),
            Err(HpoError::NoSuccessfulTrials)
        ));
    }
}
