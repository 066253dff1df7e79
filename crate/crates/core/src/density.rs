//! Piecewise-constant probability densities on the expansion interval.
//!
//! A density is a strictly increasing breakpoint vector spanning
//! `[0, j_max]` together with one nonnegative value per cell, integrating
//! to 1 against plain Lebesgue measure.

use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the total integral of a valid density.
pub const INTEGRAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseConstantDensity {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstantDensity {
    /// Validates breakpoints (strictly increasing, one more than values),
    /// nonnegativity, and the unit integral.
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(Error::InvalidArgument(
                "need n+1 breakpoints for n cell values".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let d = Self {
            breakpoints,
            values,
        };
        let total = d.integral();
        if (total - 1.0).abs() > INTEGRAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "density integrates to {total}, expected 1"
            )));
        }
        Ok(d)
    }

    /// The uniform density on `[0, hi]`.
    pub fn uniform(hi: f64) -> Self {
        Self {
            breakpoints: vec![0.0, hi],
            values: vec![1.0 / hi],
        }
    }

    /// Builds and rescales so the integral is exactly 1.
    pub fn normalized(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let mut d = Self {
            breakpoints,
            values,
        };
        let total = d.integral();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidArgument(
                "cannot normalize a density with nonpositive mass".into(),
            ));
        }
        for v in &mut d.values {
            *v /= total;
        }
        Self::new(d.breakpoints, d.values)
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support_hi(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .zip(self.breakpoints.windows(2))
            .map(|(v, w)| v * (w[1] - w[0]))
            .sum()
    }

    /// Smallest cell value; a positive result certifies the density is
    /// bounded away from zero.
    pub fn lower_bound(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Cell value at `x` (cells are closed-open, the last one closed).
    pub fn value_at(&self, x: f64) -> f64 {
        if x < self.breakpoints[0] || x > self.support_hi() {
            return 0.0;
        }
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).unwrap())
        {
            Ok(i) => self.values[i.min(self.values.len() - 1)],
            Err(i) => self.values[i - 1],
        }
    }

    /// Measure of `[lo, hi]` under the density.
    pub fn measure(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let mut acc = 0.0;
        for (v, w) in self.values.iter().zip(self.breakpoints.windows(2)) {
            let seg = (hi.min(w[1]) - lo.max(w[0])).max(0.0);
            acc += v * seg;
        }
        acc
    }

    /// Density of the image measure under `x -> support_hi - x`.
    pub fn reflected(&self) -> Self {
        let hi = self.support_hi();
        let mut breakpoints: Vec<f64> = self.breakpoints.iter().rev().map(|b| hi - b).collect();
        // Keep the ends exact.
        breakpoints[0] = 0.0;
        *breakpoints.last_mut().unwrap() = hi;
        let values = self.values.iter().rev().copied().collect();
        Self {
            breakpoints,
            values,
        }
    }

    /// L1 distance, computed on the merged breakpoint grid.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.fold_merged(other, |acc, seg, a, b| acc + seg * (a - b).abs())
    }

    /// Sup distance over cells of the merged grid.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.fold_merged(other, |acc, _seg, a, b| acc.max((a - b).abs()))
    }

    fn fold_merged(&self, other: &Self, f: impl Fn(f64, f64, f64, f64) -> f64) -> f64 {
        let mut cuts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut acc = 0.0;
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            acc = f(acc, w[1] - w[0], self.value_at(mid), other.value_at(mid));
        }
        acc
    }

    /// CSV rows `x_lo,x_hi,value` with header, 15 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_lo,x_hi,value\n");
        for (v, w) in self.values.iter().zip(self.breakpoints.windows(2)) {
            out.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", w[0], w[1], v));
        }
        out
    }
}
