//! The i.i.d. query arrival process A(t).

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Law of the per-slot query count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    /// Poisson(rate), truncated at `cap` (default `64 * ceil(rate)`).
    Poisson {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<u64>,
    },
    /// `batch` queries with probability `rate / batch`, otherwise none.
    BernoulliBatch { rate: f64, batch: u64 },
    /// `rate` per slot; fractional parts are spread by error diffusion.
    Deterministic { rate: f64 },
}

impl ArrivalSpec {
    pub fn poisson(rate: f64) -> Self {
        ArrivalSpec::Poisson { rate, cap: None }
    }

    pub fn rate(&self) -> f64 {
        match *self {
            ArrivalSpec::Poisson { rate, .. }
            | ArrivalSpec::BernoulliBatch { rate, .. }
            | ArrivalSpec::Deterministic { rate } => rate,
        }
    }

    /// Same law with a different mean.
    pub fn with_rate(&self, rate: f64) -> Self {
        match *self {
            ArrivalSpec::Poisson { cap, .. } => ArrivalSpec::Poisson { rate, cap },
            ArrivalSpec::BernoulliBatch { batch, .. } => ArrivalSpec::BernoulliBatch { rate, batch },
            ArrivalSpec::Deterministic { .. } => ArrivalSpec::Deterministic { rate },
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let rate = self.rate();
        if !rate.is_finite() || rate < 0.0 {
            return Err(format!("arrival rate must be finite and >= 0, got {rate}"));
        }
        match *self {
            ArrivalSpec::BernoulliBatch { batch, .. } => {
                if batch == 0 {
                    return Err("bernoulli_batch needs batch >= 1".into());
                }
                if rate > batch as f64 {
                    return Err(format!("bernoulli_batch needs rate/batch <= 1, got {rate}/{batch}"));
                }
            }
            ArrivalSpec::Poisson { cap: Some(0), rate } if rate > 0.0 => {
                return Err("poisson cap must be positive".into());
            }
            _ => {}
        }
        Ok(())
    }
}

/// Stateful sampler for one run. Only the deterministic law carries state.
#[derive(Debug, Clone)]
pub struct ArrivalProcess {
    spec: ArrivalSpec,
    poisson: Option<(Poisson<f64>, u64)>,
    carry: f64,
}

impl ArrivalProcess {
    pub fn new(spec: ArrivalSpec) -> Self {
        let poisson = match spec {
            ArrivalSpec::Poisson { rate, cap } if rate > 0.0 => {
                let cap = cap.unwrap_or(64 * rate.ceil() as u64);
                Some((Poisson::new(rate).expect("positive finite rate"), cap))
            }
            _ => None,
        };
        ArrivalProcess {
            spec,
            poisson,
            carry: 0.0,
        }
    }

    pub fn spec(&self) -> &ArrivalSpec {
        &self.spec
    }

    /// Draws A(t) for the next slot.
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u64 {
        match self.spec {
            ArrivalSpec::Poisson { .. } => match &self.poisson {
                Some((dist, cap)) => (dist.sample(rng) as u64).min(*cap),
                None => 0,
            },
            ArrivalSpec::BernoulliBatch { rate, batch } => {
                if rate > 0.0 && rng.gen_bool((rate / batch as f64).min(1.0)) {
                    batch
                } else {
                    0
                }
            }
            ArrivalSpec::Deterministic { rate } => {
                self.carry += rate;
                let whole = self.carry.floor();
                self.carry -= whole;
                whole as u64
            }
        }
    }
}
