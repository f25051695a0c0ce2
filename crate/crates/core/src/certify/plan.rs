use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

/// Number of i.i.d. sequences that must all be judged aligned before the
/// simulator distribution can be declared δ-aligned with confidence `1 − ν`:
/// `⌈ln(1/ν)/δ⌉` with the natural logarithm.
///
/// A quotient within 1e-12 (relative) of an integer is taken as that integer,
/// so that e.g. `ν = e^{-1}, δ = 0.5` gives exactly 2 rather than rounding
/// noise pushing it to 3.
pub fn required_samples(delta: f64, nu: f64) -> Result<u64> {
    ensure!(
        delta > 0.0 && delta < 1.0,
        "delta must lie in (0, 1), got {delta}"
    );
    ensure!(nu > 0.0 && nu < 1.0, "nu must lie in (0, 1), got {nu}");
    let x = -nu.ln() / delta;
    let nearest = x.round();
    let m = if (x - nearest).abs() <= 1e-12 * nearest.max(1.0) {
        nearest
    } else {
        x.ceil()
    };
    Ok((m as u64).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificationPlan {
    pub delta: f64,
    pub nu: f64,
    pub m: u64,
    pub seed: u64,
}

impl CertificationPlan {
    pub fn new(delta: f64, nu: f64, seed: u64) -> Result<Self> {
        Ok(CertificationPlan {
            delta,
            nu,
            m: required_samples(delta, nu)?,
            seed,
        })
    }

    /// Re-checks a plan read from disk.
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.delta > 0.0 && self.delta < 1.0 && self.nu > 0.0 && self.nu < 1.0,
            "plan parameters outside (0, 1)"
        );
        ensure!(self.m >= 1, "plan needs m >= 1");
        ensure!(
            self.m as f64 * self.delta >= -self.nu.ln() - 1e-12,
            "plan m = {} is below ln(1/nu)/delta",
            self.m
        );
        Ok(())
    }
}
