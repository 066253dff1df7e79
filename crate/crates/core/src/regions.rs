//! The switch/equality partition of the expansion interval and the greedy
//! and lazy digit cells.
//!
//! Superimposing the greedy and lazy maps on `J = [0, b/(beta-1)]` (writing
//! `b = floor(beta)`) produces `b` switch regions
//!
//! ```text
//! S_k = [ k/beta , b/(beta(beta-1)) + (k-1)/beta ],   k = 1..b,
//! ```
//!
//! on which both digit `k` (greedy) and `k-1` (lazy) are admissible, and
//! `b+1` equality regions `E_k` in between, on which the digit is forced.
//! Switch regions are closed on both ends; a point shared with a
//! neighbouring equality region belongs to the switch region.
//!
//! The greedy map uses the cells `C(j) = [j/beta, (j+1)/beta)` (the last one
//! closed up to `j_max`); the lazy cells are their images under the
//! reflection `x -> j_max - x`.

use serde::Serialize;

use crate::error::Result;
use crate::interval::Interval;
use crate::params::BetaParams;

/// Membership slack at cell and region boundaries. Endpoints are computed
/// once in floating point, so a point that is mathematically *on* a
/// boundary can land an ulp on either side; within this distance it is
/// assigned to the closed side of the boundary. The greedy orbit of 1
/// passes exactly through such boundaries whenever 1 has a finite greedy
/// expansion, which is why exact comparisons alone are not enough.
pub const BOUNDARY_SNAP: f64 = 1e-12;

/// Label of one member of the switch/equality partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RegionLabel {
    /// `E_k`: the digit `k` is forced.
    Equality(u32),
    /// `S_k`: greedy assigns `k`, lazy assigns `k-1`.
    Switch(u32),
}

impl RegionLabel {
    pub fn is_switch(&self) -> bool {
        matches!(self, RegionLabel::Switch(_))
    }
}

/// The compiled partition for a fixed base: regions ordered left to right
/// as `E_0, S_1, E_1, ..., S_b, E_b`, plus the greedy and lazy digit cells.
#[derive(Debug, Clone)]
pub struct RegionPartition {
    params: BetaParams,
    regions: Vec<(Interval, RegionLabel)>,
    greedy_cells: Vec<(Interval, u32)>,
    lazy_cells: Vec<(Interval, u32)>,
    /// Common right-end offset of the switch regions, `b/(beta(beta-1))`.
    switch_width_anchor: f64,
}

/// Builds the partition for validated parameters.
pub fn build_regions(params: BetaParams) -> RegionPartition {
    RegionPartition::build(params)
}

impl RegionPartition {
    pub fn build(params: BetaParams) -> Self {
        let beta = params.beta();
        let b = params.floor_beta();
        let j_max = params.j_max();
        let bf = f64::from(b);
        // Right end of S_1; every S_k is this point shifted by (k-1)/beta.
        let anchor = bf / (beta * (beta - 1.0));

        let mut regions = Vec::with_capacity(2 * b as usize + 1);
        regions.push((
            Interval::closed_open(0.0, 1.0 / beta),
            RegionLabel::Equality(0),
        ));
        for k in 1..=b {
            let kf = f64::from(k);
            let s = Interval::closed(kf / beta, anchor + (kf - 1.0) / beta);
            regions.push((s, RegionLabel::Switch(k)));
            let e = if k < b {
                Interval::open(anchor + (kf - 1.0) / beta, (kf + 1.0) / beta)
            } else {
                Interval::open_closed(anchor + (kf - 1.0) / beta, j_max)
            };
            regions.push((e, RegionLabel::Equality(k)));
        }

        let mut greedy_cells = Vec::with_capacity(b as usize + 1);
        for j in 0..b {
            let jf = f64::from(j);
            greedy_cells.push((Interval::closed_open(jf / beta, (jf + 1.0) / beta), j));
        }
        greedy_cells.push((Interval::closed(bf / beta, j_max), b));

        // Lazy cells are reflections of the greedy cells with the digit
        // complemented: Delta(d) = reflect(C(b - d)).
        let mut lazy_cells: Vec<(Interval, u32)> = greedy_cells
            .iter()
            .map(|(iv, j)| (iv.reflected(j_max), b - j))
            .collect();
        lazy_cells.reverse();

        Self {
            params,
            regions,
            greedy_cells,
            lazy_cells,
            switch_width_anchor: anchor,
        }
    }

    pub fn params(&self) -> &BetaParams {
        &self.params
    }

    /// Regions in increasing order: `E_0, S_1, E_1, ..., S_b, E_b`.
    pub fn regions(&self) -> &[(Interval, RegionLabel)] {
        &self.regions
    }

    pub fn greedy_cells(&self) -> &[(Interval, u32)] {
        &self.greedy_cells
    }

    pub fn lazy_cells(&self) -> &[(Interval, u32)] {
        &self.lazy_cells
    }

    /// The switch region `S_k`, `k` in `1..=floor_beta`.
    pub fn switch_region(&self, k: u32) -> Interval {
        debug_assert!(k >= 1 && k <= self.params.floor_beta());
        self.regions[(2 * k - 1) as usize].0
    }

    /// The equality region `E_k`, `k` in `0..=floor_beta`.
    pub fn equality_region(&self, k: u32) -> Interval {
        self.regions[(2 * k) as usize].0
    }

    /// Which region contains `x` (after clamping at the extreme ends).
    /// Switch membership is decided first and within [`BOUNDARY_SNAP`], so
    /// shared endpoints land in `S` (both ends of every `S_k` are closed).
    pub fn locate(&self, x: f64) -> Result<RegionLabel> {
        let x = self.params.clamp_into_domain(x)?;
        let beta = self.params.beta();
        for k in 1..=self.params.floor_beta() {
            let kf = f64::from(k);
            if x < kf / beta - BOUNDARY_SNAP {
                break;
            }
            if x <= self.switch_width_anchor + (kf - 1.0) / beta + BOUNDARY_SNAP {
                return Ok(RegionLabel::Switch(k));
            }
        }
        Ok(RegionLabel::Equality(self.greedy_digit_clamped(x)))
    }

    /// Greedy digit of `x` via the cells `C(j)`.
    pub fn greedy_digit(&self, x: f64) -> Result<u32> {
        let x = self.params.clamp_into_domain(x)?;
        Ok(self.greedy_digit_clamped(x))
    }

    fn greedy_digit_clamped(&self, x: f64) -> u32 {
        let beta = self.params.beta();
        let b = self.params.floor_beta();
        // The cells are closed on the left, so a point within snap
        // distance below a boundary j/beta belongs to the upper cell.
        let mut digit = b;
        for j in 1..=b {
            if x < f64::from(j) / beta - BOUNDARY_SNAP {
                digit = j - 1;
                break;
            }
        }
        digit
    }

    /// Lazy digit of `x` via the cells `Delta(d)`.
    pub fn lazy_digit(&self, x: f64) -> Result<u32> {
        let x = self.params.clamp_into_domain(x)?;
        // Mirror of the greedy lookup: the lazy cells are closed on the
        // right, so boundary points belong to the lower cell.
        for (iv, d) in &self.lazy_cells {
            if x <= iv.hi + BOUNDARY_SNAP {
                return Ok(*d);
            }
        }
        Ok(self.params.floor_beta())
    }
}
