use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::models::TrainConfig;

/// Ranges sampled by random search. `lambda` and `learning_rate` are drawn
/// log-uniformly, `epochs` uniformly from the inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub lambda: (f64, f64),
    pub learning_rate: (f64, f64),
    pub epochs: (usize, usize),
    pub budget: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace {
            lambda: (1e-7, 1e-3),
            learning_rate: (0.05, 1.0),
            epochs: (5, 20),
            budget: 8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Ok,
    Failed(String),
}

/// One trial log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub config: TrainConfig,
    pub dev_macro_f1: Option<f64>,
    pub status: TrialStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: TrainConfig,
    pub best_score: f64,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
}

fn log_uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.budget == 0 {
            return Err(EvalError::Budget);
        }
        let positive = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !positive(self.lambda) {
            return Err(EvalError::Range("lambda"));
        }
        if !positive(self.learning_rate) {
            return Err(EvalError::Range("learning_rate"));
        }
        if self.epochs.0 == 0 || self.epochs.1 < self.epochs.0 {
            return Err(EvalError::Range("epochs"));
        }
        Ok(())
    }

    /// The `budget` configurations, in trial order. Fields outside the space
    /// are copied from `base`.
    pub fn sample(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.budget)
            .map(|_| TrainConfig {
                lambda: log_uniform(&mut rng, self.lambda),
                learning_rate: log_uniform(&mut rng, self.learning_rate),
                epochs: rng.gen_range(self.epochs.0..=self.epochs.1),
                ..base.clone()
            })
            .collect()
    }
}

/// Seeded random search maximizing `objective` (dev macro-F1).
///
/// Trials run in parallel; the result depends only on trial order. A trial
/// whose objective errors or returns a non-finite score is marked failed.
/// Ties go to the earlier trial.
pub fn search<F>(space: &SearchSpace, base: &TrainConfig, objective: F) -> Result<SearchResult, EvalError>
where
    F: Fn(&TrainConfig) -> Result<f64, String> + Sync,
{
    space.validate()?;
    let configs = space.sample(base);
    let trials: Vec<Trial> = configs
        .into_par_iter()
        .enumerate()
        .map(|(trial, config)| {
            let (dev_macro_f1, status) = match objective(&config) {
                Ok(score) if score.is_finite() => (Some(score), TrialStatus::Ok),
                Ok(score) => (None, TrialStatus::Failed(format!("non-finite score {score}"))),
                Err(e) => (None, TrialStatus::Failed(e)),
            };
            Trial { trial, config, dev_macro_f1, status }
        })
        .collect();
    let mut best: Option<&Trial> = None;
    for t in &trials {
        if let Some(score) = t.dev_macro_f1 {
            if best.is_none_or(|b| score > b.dev_macro_f1.unwrap_or(f64::NEG_INFINITY)) {
                best = Some(t);
            }
        }
    }
    let best = best.ok_or(EvalError::AllTrialsFailed(trials.len()))?;
    Ok(SearchResult {
        best: best.config.clone(),
        best_score: best.dev_macro_f1.unwrap_or_default(),
        best_trial: best.trial,
        trials: trials.clone(),
    })
}

pub fn write_trial_log(path: &Path, trials: &[Trial]) -> Result<(), EvalError> {
    let text: String = trials
        .iter()
        .map(|t| serde_json::to_string(t).expect("trial serializes") + "\n")
        .collect();
    std::fs::write(path, text).map_err(|e| EvalError::Io { path: path.display().to_string(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_one_returns_that_config() {
        let space = SearchSpace { budget: 1, ..Default::default() };
        let r = search(&space, &TrainConfig::default(), |_| Ok(0.3)).unwrap();
        assert_eq!(r.best, space.sample(&TrainConfig::default())[0]);
        assert_eq!(r.trials.len(), 1);
    }

    #[test]
    fn same_seed_same_trials() {
        let space = SearchSpace::default();
        let f = |c: &TrainConfig| Ok(-c.lambda.ln().abs());
        assert_eq!(search(&space, &TrainConfig::default(), f).unwrap(), search(&space, &TrainConfig::default(), f).unwrap());
    }

    #[test]
    fn ties_prefer_earlier_and_failures_are_logged() {
        let space = SearchSpace { budget: 5, ..Default::default() };
        let configs = space.sample(&TrainConfig::default());
        let failing = configs[0].clone();
        let r = search(&space, &TrainConfig::default(), |c| if *c == failing { Err("boom".into()) } else { Ok(0.5) }).unwrap();
        assert_eq!(r.best_trial, 1);
        assert_eq!(r.trials[0].status, TrialStatus::Failed("boom".into()));
        assert!(matches!(
            search(&space, &TrainConfig::default(), |_| Err("x".into())),
            Err(EvalError::AllTrialsFailed(5))
        ));
    }

    #[test]
    fn trial_log_format() {
        let space = SearchSpace { budget: 2, ..Default::default() };
        let r = search(&space, &TrainConfig::default(), |_| Ok(0.25)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trials.jsonl");
        write_trial_log(&p, &r.trials).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["trial"], 0);
        assert_eq!(first["dev_macro_f1"], 0.25);
        assert_eq!(first["status"], "ok");
        assert!(first["config"]["lambda"].is_f64());
    }
}
