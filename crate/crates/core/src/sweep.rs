//! Query-rate sweeps: many independent runs of one base scenario.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;
use crate::scenario::{parse_json, Scenario, ScenarioFile};
use crate::sim::{run, SimOptions};

pub const DEFAULT_SEEDS: u32 = 3;

/// Rates to visit: an inclusive arithmetic grid or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateGrid {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl RateGrid {
    pub fn points(&self) -> Result<Vec<f64>, String> {
        let points = match *self {
            RateGrid::Range { start, stop, step } => {
                if !(start <= stop) {
                    return Err(format!("rate grid needs start <= stop, got {start} > {stop}"));
                }
                if !(step > 0.0) {
                    return Err(format!("rate grid needs step > 0, got {step}"));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                (0..count).map(|k| start + k as f64 * step).collect()
            }
            RateGrid::List(ref v) => v.clone(),
        };
        if points.is_empty() {
            return Err("rate grid is empty".into());
        }
        if let Some(bad) = points.iter().find(|r| !r.is_finite() || **r < 0.0) {
            return Err(format!("rates must be finite and >= 0, got {bad}"));
        }
        Ok(points)
    }
}

/// Base scenario given inline or as a path relative to the sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSource {
    Path(PathBuf),
    Inline(Box<ScenarioFile>),
}

/// On-disk sweep description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub scenario: ScenarioSource,
    pub rates: RateGrid,
    #[serde(default)]
    pub seeds: Option<u32>,
    #[serde(default)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub rates: Vec<f64>,
    pub seeds: u32,
    pub horizon: u64,
}

impl SweepSpec {
    pub fn new(base: Scenario, rates: &RateGrid, seeds: u32, horizon: u64) -> Result<Self, ScenarioError> {
        let rates = rates.points().map_err(ScenarioError::Invariant)?;
        if seeds == 0 {
            return Err(ScenarioError::Invariant("sweep needs at least one seed".into()));
        }
        Ok(SweepSpec {
            base,
            rates,
            seeds,
            horizon,
        })
    }

    /// Reads a sweep file; a relative scenario path is resolved against the
    /// sweep file's directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Schema {
            key: "<file>".into(),
            message: format!("{}: {e}", path.display()),
        })?;
        let file: SweepFile = parse_json(&text)?;
        let base = match file.scenario {
            ScenarioSource::Inline(s) => Scenario::from_file(*s)?,
            ScenarioSource::Path(p) => {
                let p = path.parent().map(|dir| dir.join(&p)).unwrap_or(p);
                let text = std::fs::read_to_string(&p).map_err(|e| ScenarioError::Schema {
                    key: "scenario".into(),
                    message: format!("{}: {e}", p.display()),
                })?;
                crate::scenario::parse_scenario(&text)?
            }
        };
        let horizon = file.horizon.unwrap_or(base.horizon);
        SweepSpec::new(base, &file.rates, file.seeds.unwrap_or(DEFAULT_SEEDS), horizon)
    }

    /// Every `(rate, seed)` run, seeds counting up from the base seed.
    pub fn points(&self) -> Vec<Scenario> {
        self.rates
            .iter()
            .flat_map(|&rate| {
                (0..self.seeds as u64).map(move |k| {
                    self.base
                        .with_rate(rate)
                        .with_horizon(self.horizon)
                        .with_seed(self.base.seed.wrapping_add(k))
                })
            })
            .collect()
    }
}

/// Outcome of one `(rate, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub mean_backlog: f64,
    pub delivered_rate: f64,
    pub slope: f64,
    pub stable: bool,
    pub halted: bool,
    /// Set when the run failed; the numeric fields are then zero.
    pub error: Option<String>,
}

/// Mean over seeds at one rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub runs: u32,
    pub failed: u32,
    pub mean_backlog: f64,
    pub delivered_rate: f64,
    pub slope: f64,
    pub stable_fraction: f64,
}

/// Runs every point, in parallel on the current rayon pool. Failed runs are
/// recorded and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, options: SimOptions) -> (Vec<SweepRow>, Vec<SweepPoint>) {
    let rows: Vec<SweepRow> = spec
        .points()
        .par_iter()
        .map(|s| match run(s, options) {
            Ok(r) => SweepRow {
                lambda: s.arrival.rate(),
                seed: s.seed,
                mean_backlog: r.summary.mean_backlog,
                delivered_rate: r.summary.delivered_rate,
                slope: r.summary.slope,
                stable: r.summary.stable,
                halted: r.summary.halted,
                error: None,
            },
            Err(e) => SweepRow {
                lambda: s.arrival.rate(),
                seed: s.seed,
                mean_backlog: 0.0,
                delivered_rate: 0.0,
                slope: 0.0,
                stable: false,
                halted: false,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let points = aggregate(&spec.rates, &rows);
    (rows, points)
}

pub fn aggregate(rates: &[f64], rows: &[SweepRow]) -> Vec<SweepPoint> {
    rates
        .iter()
        .map(|&lambda| {
            let all: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == lambda).collect();
            let ok: Vec<&SweepRow> = all.iter().copied().filter(|r| r.error.is_none()).collect();
            let n = ok.len().max(1) as f64;
            SweepPoint {
                lambda,
                runs: all.len() as u32,
                failed: (all.len() - ok.len()) as u32,
                mean_backlog: ok.iter().map(|r| r.mean_backlog).sum::<f64>() / n,
                delivered_rate: ok.iter().map(|r| r.delivered_rate).sum::<f64>() / n,
                slope: ok.iter().map(|r| r.slope).sum::<f64>() / n,
                stable_fraction: ok.iter().filter(|r| r.stable).count() as f64 / n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_inclusive() {
        let g = RateGrid::Range {
            start: 4.0,
            stop: 5.0,
            step: 0.25,
        };
        assert_eq!(g.points().unwrap(), vec![4.0, 4.25, 4.5, 4.75, 5.0]);
        let one = RateGrid::Range {
            start: 6.0,
            stop: 6.0,
            step: 1.0,
        };
        assert_eq!(one.points().unwrap(), vec![6.0]);
    }

    #[test]
    fn bad_grids_are_rejected() {
        for g in [
            RateGrid::Range {
                start: 5.0,
                stop: 4.0,
                step: 1.0,
            },
            RateGrid::Range {
                start: 1.0,
                stop: 4.0,
                step: 0.0,
            },
            RateGrid::List(vec![]),
            RateGrid::List(vec![-1.0]),
        ] {
            assert!(g.points().is_err(), "{g:?}");
        }
    }

    #[test]
    fn grid_parses_both_shapes() {
        let r: RateGrid = serde_json::from_str(r#"{"start": 1, "stop": 2, "step": 0.5}"#).unwrap();
        assert_eq!(r.points().unwrap().len(), 3);
        let l: RateGrid = serde_json::from_str("[6, 7, 7.5]").unwrap();
        assert_eq!(l.points().unwrap(), vec![6.0, 7.0, 7.5]);
    }
}
