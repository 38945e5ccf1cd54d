use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    TauOverX,
    SigmaOverX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GridScale {
    Linear,
    Log,
}

/// Evenly spaced (linearly or logarithmically) sample points of one
/// dimensionless parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepGrid {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub scale: GridScale,
}

impl SweepGrid {
    pub fn new(variable: SweepVariable, start: f64, stop: f64, count: usize, scale: GridScale) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite()) || start >= stop {
            return Err(Error::InvalidGrid(format!(
                "need finite start < stop, got {start}..{stop}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {count}")));
        }
        if scale == GridScale::Log && start <= 0.0 {
            return Err(Error::InvalidGrid(format!("log grid needs start > 0, got {start}")));
        }
        Ok(Self {
            variable,
            start,
            stop,
            count,
            scale,
        })
    }

    /// Grid points; the first and last equal `start` and `stop` exactly.
    pub fn points(&self) -> Vec<f64> {
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i == self.count - 1 {
                    return self.stop;
                }
                let frac = i as f64 / last;
                match self.scale {
                    GridScale::Linear => self.start + (self.stop - self.start) * frac,
                    GridScale::Log => self.start * (self.stop / self.start).powf(frac),
                }
            })
            .collect()
    }
}
