//! Ulam discretization of the random transfer operator.
//!
//! The operator pushes densities forward through the mixture
//! `P f = p * P_T f + (1-p) * P_L f` of the greedy and lazy
//! Frobenius-Perron operators, each given on an affine branch by
//! `P_T f(x) = (1/beta) sum_{T(y)=x} f(y)`.
//!
//! The discretization is the classical one: on a uniform grid
//! `I_0, ..., I_{m-1}` of the expansion interval, the matrix entry is
//! `M[i][j] = lambda(I_i intersect T^-1 I_j) / lambda(I_i)`. Every branch of
//! either map is affine with slope `beta`, so these entries are closed-form
//! interval overlaps; no quadrature is involved. Rows are kept sparse: a
//! grid cell meets only a handful of branch images.

use crate::density::PiecewiseConstantDensity;
use crate::error::{Error, Result};
use crate::params::BetaParams;
use crate::regions::RegionPartition;

/// Row-stochastic sparse matrix approximating the combined operator on a
/// uniform grid over `[0, j_max]`.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    params: BetaParams,
    m: usize,
    cell_width: f64,
    rows: Vec<Vec<(u32, f64)>>,
}

/// Scheme for extracting the fixed density from the discretized operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointScheme {
    /// Average of the iterates, mirroring the Cesaro limit that defines the
    /// invariant density. Residual falls like 1/n in general.
    Cesaro,
    /// Plain power iteration; converges geometrically when the discretized
    /// chain is aperiodic.
    Power,
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Which of the two digit maps an Ulam matrix discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapChoice {
    Greedy,
    Lazy,
}

/// Builds the Ulam matrix `p*M_T + (1-p)*M_L` analytically.
pub fn build_ulam(part: &RegionPartition, m: usize) -> Result<UlamOperator> {
    let p = part.params().p();
    build_weighted(part, m, p, 1.0 - p)
}

/// Ulam matrix of one map alone; the combined operator is their mixture.
pub fn build_ulam_map(part: &RegionPartition, m: usize, which: MapChoice) -> Result<UlamOperator> {
    match which {
        MapChoice::Greedy => build_weighted(part, m, 1.0, 0.0),
        MapChoice::Lazy => build_weighted(part, m, 0.0, 1.0),
    }
}

fn build_weighted(part: &RegionPartition, m: usize, w_t: f64, w_l: f64) -> Result<UlamOperator> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "Ulam grid needs at least 2 cells, got {m}"
        )));
    }
    let params = *part.params();
    let beta = params.beta();
    let j_max = params.j_max();
    let h = j_max / m as f64;

    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); m];
    for (cells, weight) in [(part.greedy_cells(), w_t), (part.lazy_cells(), w_l)] {
        if weight == 0.0 {
            continue;
        }
        for (i, row) in rows.iter_mut().enumerate() {
            let lo = i as f64 * h;
            let hi = if i + 1 == m {
                j_max
            } else {
                (i + 1) as f64 * h
            };
            for (branch, d) in cells {
                // Part of this grid cell living on the branch domain.
                let seg_lo = lo.max(branch.lo);
                let seg_hi = hi.min(branch.hi);
                if seg_hi <= seg_lo {
                    continue;
                }
                let img_lo = beta * seg_lo - f64::from(*d);
                let img_hi = beta * seg_hi - f64::from(*d);
                // Spread the image over the grid cells it covers.
                let j_first = ((img_lo / h).floor() as usize).min(m - 1);
                let j_last = ((img_hi / h).floor() as usize).min(m - 1);
                for j in j_first..=j_last {
                    let c_lo = j as f64 * h;
                    let c_hi = if j + 1 == m {
                        j_max
                    } else {
                        (j + 1) as f64 * h
                    };
                    let overlap = (img_hi.min(c_hi) - img_lo.max(c_lo)).max(0.0);
                    if overlap > 0.0 {
                        push_entry(row, j as u32, weight * overlap / (beta * h));
                    }
                }
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|(j, _)| *j);
    }
    Ok(UlamOperator {
        params,
        m,
        cell_width: h,
        rows,
    })
}

fn push_entry(row: &mut Vec<(u32, f64)>, j: u32, w: f64) {
    if let Some(entry) = row.iter_mut().find(|(k, _)| *k == j) {
        entry.1 += w;
    } else {
        row.push((j, w));
    }
}

impl UlamOperator {
    pub fn params(&self) -> &BetaParams {
        &self.params
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    /// Nonzero entries of row `i`, sorted by column.
    pub fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.rows[i]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|(_, w)| w).sum())
            .collect()
    }

    /// One application of the matrix to a row vector of cell masses.
    pub fn apply(&self, mass: &[f64]) -> Vec<f64> {
        debug_assert_eq!(mass.len(), self.m);
        let mut out = vec![0.0; self.m];
        for (i, row) in self.rows.iter().enumerate() {
            let mi = mass[i];
            if mi == 0.0 {
                continue;
            }
            for &(j, w) in row {
                out[j as usize] += mi * w;
            }
        }
        out
    }

    fn grid_breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = (0..self.m).map(|i| i as f64 * self.cell_width).collect();
        b.push(self.params.j_max());
        b
    }
}

/// Iterates the discretized operator from the flat density until the mass
/// vector is self-consistent: `||v M - v||_1 <= tol`. Returns the density,
/// normalized to integrate to 1.
pub fn fixed_density(
    op: &UlamOperator,
    scheme: FixedPointScheme,
    tol: f64,
    max_iter: usize,
) -> Result<PiecewiseConstantDensity> {
    let m = op.grid_size();
    let v0 = vec![1.0 / m as f64; m];
    let mut residual = f64::INFINITY;
    match scheme {
        FixedPointScheme::Power => {
            let mut v = v0;
            for _ in 0..max_iter {
                let w = op.apply(&v);
                residual = l1_diff(&w, &v);
                v = w;
                if residual <= tol {
                    // One more application of a stochastic matrix cannot
                    // grow the L1 residual, so v itself now satisfies it.
                    return density_from_mass(op, v);
                }
            }
        }
        FixedPointScheme::Cesaro => {
            let mut v = v0.clone();
            let mut sum = vec![0.0; m];
            for n in 1..=max_iter {
                for (s, vi) in sum.iter_mut().zip(&v) {
                    *s += vi;
                }
                // sum now holds v_0 + ... + v_{n-1}; telescoping gives
                // avg_n M - avg_n = (v_n - v_0) / n exactly.
                v = op.apply(&v);
                residual = l1_diff(&v, &v0) / n as f64;
                if residual <= tol {
                    let avg: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
                    return density_from_mass(op, avg);
                }
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        residual,
    })
}

fn density_from_mass(op: &UlamOperator, mass: Vec<f64>) -> Result<PiecewiseConstantDensity> {
    let h = op.cell_width();
    let values: Vec<f64> = mass.iter().map(|m| (m / h).max(0.0)).collect();
    PiecewiseConstantDensity::normalized(op.grid_breakpoints(), values)
}

fn l1_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
