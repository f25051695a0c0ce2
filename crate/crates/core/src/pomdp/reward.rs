use std::fmt;
use std::sync::Arc;

use super::trajectory::Trajectory;
use crate::error::{ensure, Error, Result};

type RewardFn = dyn Fn(&Trajectory) -> f64 + Send + Sync;

/// A real-valued reward over whole (state, action) sequences with a declared
/// range that every evaluation must respect.
#[derive(Clone)]
pub struct SequenceReward {
    id: String,
    min: f64,
    max: f64,
    eval: Arc<RewardFn>,
}

impl fmt::Debug for SequenceReward {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SequenceReward")
            .field("id", &self.id)
            .field("range", &(self.min, self.max))
            .finish()
    }
}

impl SequenceReward {
    pub fn new(
        id: impl Into<String>,
        min: f64,
        max: f64,
        eval: impl Fn(&Trajectory) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        ensure!(
            min.is_finite() && max.is_finite() && min <= max,
            "reward range [{min}, {max}] is not a finite interval"
        );
        Ok(SequenceReward {
            id: id.into(),
            min,
            max,
            eval: Arc::new(eval),
        })
    }

    pub fn constant(value: f64) -> Self {
        SequenceReward {
            id: format!("constant({value})"),
            min: value,
            max: value,
            eval: Arc::new(move |_| value),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn range(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn evaluate(&self, traj: &Trajectory) -> Result<f64> {
        let v = (self.eval)(traj);
        let slack = 1e-9 * (1.0 + self.min.abs().max(self.max.abs()));
        if !v.is_finite() || v < self.min - slack || v > self.max + slack {
            return Err(Error::RewardOutOfRange {
                id: self.id.clone(),
                value: v,
                min: self.min,
                max: self.max,
            });
        }
        Ok(v)
    }
}
