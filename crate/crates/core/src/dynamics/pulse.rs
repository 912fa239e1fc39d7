use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Piecewise-constant control amplitudes; entry `(i, j)` is `uᵢ(jΔt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub amplitudes: Array2<f64>,
    pub u_max: f64,
}

impl PulseSequence {
    pub fn new(amplitudes: Array2<f64>, u_max: f64) -> Result<Self> {
        let p = Self { amplitudes, u_max };
        p.check_bounds()?;
        Ok(p)
    }

    pub fn zeros(channels: usize, slices: usize, u_max: f64) -> Self {
        Self {
            amplitudes: Array2::zeros((channels, slices)),
            u_max,
        }
    }

    /// Uniform amplitudes in `[-fraction·u_max, fraction·u_max]`.
    pub fn random<R: Rng>(
        channels: usize,
        slices: usize,
        u_max: f64,
        fraction: f64,
        rng: &mut R,
    ) -> Self {
        let half = fraction * u_max;
        let amplitudes = Array2::from_shape_fn((channels, slices), |_| rng.random_range(-half..=half));
        Self { amplitudes, u_max }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.amplitudes.dim()
    }

    pub fn channels(&self) -> usize {
        self.amplitudes.nrows()
    }

    pub fn slices(&self) -> usize {
        self.amplitudes.ncols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.amplitudes.column(j).to_vec()
    }

    pub fn check_bounds(&self) -> Result<()> {
        for ((i, j), &v) in self.amplitudes.indexed_iter() {
            if !v.is_finite() || v.abs() > self.u_max {
                return Err(CoreError::BoundViolation {
                    channel: i,
                    slice: j,
                    value: v,
                    bound: self.u_max,
                });
            }
        }
        Ok(())
    }

    pub fn clip(&mut self) {
        let m = self.u_max;
        self.amplitudes.mapv_inplace(|v| v.clamp(-m, m));
    }
}
