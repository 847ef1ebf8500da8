use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::parzen::{selection_score, ParzenEstimator};
use super::space::{Params, SearchSpace};
use crate::{fsutil, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub gamma: f64,
    pub n_startup: usize,
    pub n_candidates: usize,
    pub n_trials: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        TpeConfig {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            n_trials: 50,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_startup < 1 || self.n_candidates < 1 || !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!(
                "tpe: need n_startup >= 1, n_candidates >= 1, gamma in (0,1), got {self:?}"
            )));
        }
        Ok(())
    }
}

/// One evaluated point. Objectives are maximized; a failed evaluation is
/// stored as negative infinity (written as `null` in the study log).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: Params,
    #[serde(serialize_with = "ser_objective", deserialize_with = "de_objective")]
    pub objective: f64,
    pub wall_time_ms: Option<f64>,
}

fn ser_objective<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_objective<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub trials: Vec<Trial>,
    pub best: usize,
}

impl Study {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    pub fn write_log(&self, path: &Path) -> Result<()> {
        fsutil::write_jsonl(path, &self.trials)
    }

    pub fn read_log(path: &Path) -> Result<Vec<Trial>> {
        fsutil::read_jsonl(path)
    }
}

/// Indices of the `ceil(gamma * n)` best trials, ties by earlier index.
fn good_indices(history: &[Trial], gamma: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| history[b].objective.total_cmp(&history[a].objective).then(a.cmp(&b)));
    let n_good = ((gamma * history.len() as f64).ceil() as usize).clamp(1, history.len());
    order.truncate(n_good);
    order
}

/// Proposes the next point. Uniform during startup, then the candidate
/// maximizing l(x)/g(x) with per-dimension Parzen densities.
pub fn suggest<R: Rng + ?Sized>(
    history: &[Trial],
    space: &SearchSpace,
    cfg: &TpeConfig,
    rng: &mut R,
) -> Result<Params> {
    space.validate()?;
    cfg.validate()?;
    if history.len() < cfg.n_startup {
        return Ok(space
            .params
            .iter()
            .map(|p| {
                let (lo, hi) = p.internal_bounds();
                (p.name.clone(), p.to_user(rng.gen_range(lo..=hi)))
            })
            .collect());
    }

    let good = good_indices(history, cfg.gamma);
    let mut is_good = vec![false; history.len()];
    for &i in &good {
        is_good[i] = true;
    }

    let mut densities = Vec::with_capacity(space.params.len());
    for p in &space.params {
        let (lo, hi) = p.internal_bounds();
        let mut obs_good = Vec::new();
        let mut obs_bad = Vec::new();
        for (t, &g) in history.iter().zip(&is_good) {
            let x = *t
                .params
                .get(&p.name)
                .ok_or_else(|| Error::domain(format!("trial {} lacks param {}", t.index, p.name)))?;
            let z = p.to_internal(x);
            if g {
                obs_good.push(z);
            } else {
                obs_bad.push(z);
            }
        }
        densities.push((ParzenEstimator::new(&obs_good, lo, hi), ParzenEstimator::new(&obs_bad, lo, hi)));
    }

    let mut best: Option<(f64, Params)> = None;
    for _ in 0..cfg.n_candidates {
        let mut score = 0.0;
        let mut params = Params::with_capacity(space.params.len());
        for (p, (l, g)) in space.params.iter().zip(&densities) {
            let x = p.to_user(l.sample(rng));
            let z = p.to_internal(x);
            score += selection_score(l, g, z);
            params.insert(p.name.clone(), x);
        }
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, params));
        }
    }
    Ok(best.expect("n_candidates >= 1").1)
}

/// Runs `n_trials` sequential evaluations. `record_timings` controls whether
/// wall time is stored; leave it off for byte-reproducible logs.
pub fn optimize<F, R>(
    mut objective: F,
    space: &SearchSpace,
    n_trials: usize,
    cfg: &TpeConfig,
    rng: &mut R,
    record_timings: bool,
) -> Result<Study>
where
    F: FnMut(&Params) -> f64,
    R: Rng + ?Sized,
{
    if n_trials == 0 {
        return Err(Error::domain("n_trials must be at least 1"));
    }
    let mut trials: Vec<Trial> = Vec::with_capacity(n_trials);
    for index in 0..n_trials {
        let params = suggest(&trials, space, cfg, rng)?;
        let started = Instant::now();
        let mut value = objective(&params);
        let elapsed = started.elapsed().as_secs_f64() * 1e3;
        if value.is_nan() {
            log::warn!("trial {index}: objective is NaN, recorded as -inf");
            value = f64::NEG_INFINITY;
        }
        trials.push(Trial {
            index,
            params,
            objective: value,
            wall_time_ms: record_timings.then_some(elapsed),
        });
    }
    let best = good_indices(&trials, f64::MIN_POSITIVE)[0];
    Ok(Study { trials, best })
}
