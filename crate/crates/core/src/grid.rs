//! Uniform grids and complex samples on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, ExecMode};

/// Minimum number of samples a [`GridFunction`] may hold.
pub const MIN_SAMPLES: usize = 16;

/// `len` equally spaced abscissae starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, step: f64, len: usize) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidParameter {
                name: "dx",
                value: step,
                reason: "grid spacing must be positive",
            });
        }
        if len < MIN_SAMPLES {
            return Err(Error::GridTooCoarse { len, min: MIN_SAMPLES });
        }
        Ok(Self { start, step, len })
    }

    /// `len` points covering `[start, end]` inclusive.
    pub fn spanning(start: f64, end: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(Error::GridTooCoarse { len, min: MIN_SAMPLES });
        }
        Self::new(start, (end - start) / (len - 1) as f64, len)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.x(self.len - 1)
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.x(i))
    }

    /// Same interval, spacing halved.
    pub fn refined(&self) -> Self {
        Self {
            start: self.start,
            step: self.step / 2.0,
            len: 2 * self.len - 1,
        }
    }

    /// Samples `f` at every point, failing on the first error in grid order.
    pub fn sample<F>(&self, mode: ExecMode, f: F) -> Result<GridFunction>
    where
        F: Fn(f64) -> Result<Complex64> + Sync + Send,
    {
        let values = par::map_range(mode, self.len, |i| f(self.x(i)));
        let values = values.into_iter().collect::<Result<Vec<_>>>()?;
        GridFunction::new(self.start, self.step, values)
    }
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    x0: f64,
    dx: f64,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(x0: f64, dx: f64, values: Vec<Complex64>) -> Result<Self> {
        UniformGrid::new(x0, dx, values.len())?;
        Ok(Self { x0, dx, values })
    }

    pub fn from_real(x0: f64, dx: f64, values: &[f64]) -> Result<Self> {
        Self::new(x0, dx, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid {
            start: self.x0,
            step: self.dx,
            len: self.values.len(),
        }
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.x(i), v))
    }

    /// Discrete L2 norm, `sqrt(dx * sum |f_i|^2)`.
    pub fn l2_norm(&self) -> f64 {
        (self.dx * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&mut self, factor: Complex64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self.iter().map(|(x, v)| f(x, v)).collect();
        Self {
            x0: self.x0,
            dx: self.dx,
            values,
        }
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }
}
