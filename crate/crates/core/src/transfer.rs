//! Invariance diagnostics and the explicit greedy-map density.
//!
//! The invariant measure of the random map satisfies
//! `mu(B) = p * mu(T^-1 B) + (1-p) * mu(L^-1 B)` for every Borel set `B`;
//! [`invariance_residual`] probes that relation on random intervals, with
//! preimages computed branch by branch in closed form.
//!
//! [`parry_density`] evaluates the classical greedy-map density
//! `h(x) = (1/F) sum_n beta^-n 1_{[0, T^n 1)}(x)` on `[0, 1)` (zero above 1),
//! which is the `p = 1` endpoint of the family.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::PiecewiseConstantDensity;
use crate::dynamics::greedy_step;
use crate::error::Result;
use crate::interval::Interval;
use crate::regions::RegionPartition;

/// Default number of series terms kept by [`parry_density`].
pub const DEFAULT_PARRY_TERMS: usize = 64;

/// Greedy orbit points below this are treated as an exact hit of zero.
const ORBIT_ZERO_TOL: f64 = 1e-12;

/// Measure of the preimage of `[lo, hi]` under one map, where the map's
/// branches are given as `(domain cell, digit)` pairs.
fn preimage_measure(
    branches: &[(Interval, u32)],
    beta: f64,
    density: &PiecewiseConstantDensity,
    lo: f64,
    hi: f64,
) -> f64 {
    let mut acc = 0.0;
    for (cell, d) in branches {
        let pre_lo = ((lo + f64::from(*d)) / beta).max(cell.lo);
        let pre_hi = ((hi + f64::from(*d)) / beta).min(cell.hi);
        if pre_hi > pre_lo {
            acc += density.measure(pre_lo, pre_hi);
        }
    }
    acc
}

/// Sup over `n_check` seeded random intervals `[a, b]` of
/// `|mu([a,b]) - p*mu(T^-1[a,b]) - (1-p)*mu(L^-1[a,b])|`, with `p` taken
/// from the partition's parameters.
pub fn invariance_residual(
    part: &RegionPartition,
    density: &PiecewiseConstantDensity,
    n_check: usize,
) -> f64 {
    invariance_residual_with_p(part, density, part.params().p(), n_check)
}

/// Same residual with an explicit mixture weight; `p = 1` checks the pure
/// greedy relation (the Parry case).
pub fn invariance_residual_with_p(
    part: &RegionPartition,
    density: &PiecewiseConstantDensity,
    p: f64,
    n_check: usize,
) -> f64 {
    let beta = part.params().beta();
    let j_max = part.params().j_max();
    // Fixed seed: the checked intervals are part of the function contract.
    let mut rng = ChaCha8Rng::seed_from_u64(0x1_BADA55);
    let mut uniform = || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * j_max;
    let mut worst = 0.0_f64;
    for _ in 0..n_check {
        let (u, v) = (uniform(), uniform());
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let direct = density.measure(lo, hi);
        let via_t = preimage_measure(part.greedy_cells(), beta, density, lo, hi);
        let via_l = preimage_measure(part.lazy_cells(), beta, density, lo, hi);
        worst = worst.max((direct - p * via_t - (1.0 - p) * via_l).abs());
    }
    worst
}

/// The truncated greedy-map density plus its truncation error bound.
#[derive(Debug, Clone)]
pub struct ParryDensity {
    pub density: PiecewiseConstantDensity,
    /// `beta^-terms / (1 - 1/beta)`; zero when the orbit of 1 hits 0 first.
    pub truncation_error: f64,
    pub terms_used: usize,
}

/// Evaluates the greedy-map density from the orbit of 1, truncated at
/// `n_terms` indicator terms (stopping early if the orbit reaches 0).
pub fn parry_density(part: &RegionPartition, n_terms: usize) -> Result<ParryDensity> {
    let beta = part.params().beta();
    let j_max = part.params().j_max();
    let n_terms = n_terms.max(1);

    // Orbit of 1 under the greedy map; each point t contributes the
    // indicator of [0, t) with weight beta^-n.
    let mut orbit = Vec::with_capacity(n_terms);
    let mut t = 1.0_f64;
    let mut hit_zero = false;
    for _ in 0..n_terms {
        orbit.push(t);
        let (_, next) = greedy_step(part, t)?;
        t = next;
        if t <= ORBIT_ZERO_TOL {
            hit_zero = true;
            break;
        }
    }
    let terms_used = orbit.len();
    let truncation_error = if hit_zero {
        0.0
    } else {
        beta.powi(-(terms_used as i32)) / (1.0 - 1.0 / beta)
    };

    // Breakpoints: 0, the distinct orbit points in (0, 1], and 1, j_max.
    let mut cuts: Vec<f64> = orbit.iter().copied().filter(|t| *t > 0.0).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    if j_max > 1.0 {
        cuts.push(j_max);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

    let values: Vec<f64> = cuts
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            if mid >= 1.0 {
                0.0
            } else {
                orbit
                    .iter()
                    .enumerate()
                    .filter(|(_, t)| mid < **t)
                    .map(|(n, _)| beta.powi(-(n as i32)))
                    .sum()
            }
        })
        .collect();

    let density = PiecewiseConstantDensity::normalized(cuts, values)?;
    Ok(ParryDensity {
        density,
        truncation_error,
        terms_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::PiecewiseConstantDensity;
    use crate::params::{BetaParams, GOLDEN};
    use crate::regions::build_regions;

    #[test]
    fn uniform_is_invariant_for_three_halves() {
        let part = build_regions(BetaParams::new(1.5, 0.5).unwrap());
        let uniform = PiecewiseConstantDensity::uniform(2.0);
        assert!(invariance_residual(&part, &uniform, 200) < 1e-10);
    }

    #[test]
    fn uniform_is_not_invariant_for_golden() {
        let part = build_regions(BetaParams::new(GOLDEN, 0.5).unwrap());
        let uniform = PiecewiseConstantDensity::uniform(GOLDEN);
        assert!(invariance_residual(&part, &uniform, 200) > 0.01);
    }

    #[test]
    fn golden_parry_density_values() {
        // Orbit of 1 is (1, g, 0): two terms, F = 1 + g^2.
        let part = build_regions(BetaParams::new(GOLDEN, 0.5).unwrap());
        let parry = parry_density(&part, 64).unwrap();
        let g = GOLDEN - 1.0;
        let f_norm = 1.0 + g * g;
        assert!(parry.truncation_error < 1e-9);
        let d = &parry.density;
        assert!((d.value_at(0.3) - (1.0 + 1.0 / GOLDEN) / f_norm).abs() < 1e-9);
        assert!((d.value_at(0.8) - 1.0 / f_norm).abs() < 1e-9);
        assert_eq!(d.value_at(1.2), 0.0);
        // Spot values from the closed form.
        assert!((d.value_at(0.3) - 1.17082).abs() < 1e-5);
        assert!((d.value_at(0.8) - 0.72361).abs() < 1e-5);
    }

    #[test]
    fn parry_density_is_nonincreasing_and_vanishes_past_one() {
        for beta in [1.5, GOLDEN, 2.5, 3.2] {
            let part = build_regions(BetaParams::new(beta, 0.5).unwrap());
            let parry = parry_density(&part, 64).unwrap();
            let d = parry.density;
            let vals = d.values();
            for w in vals.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert_eq!(*vals.last().unwrap(), 0.0);
            assert!((d.integral() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn parry_density_satisfies_pure_greedy_invariance() {
        let part = build_regions(BetaParams::new(GOLDEN, 0.5).unwrap());
        let parry = parry_density(&part, 64).unwrap();
        let res = invariance_residual_with_p(&part, &parry.density, 1.0, 200);
        assert!(res < 1e-10, "greedy invariance residual {res}");
    }

    #[test]
    fn golden_parry_lower_bound_is_zero() {
        let part = build_regions(BetaParams::new(GOLDEN, 0.5).unwrap());
        let parry = parry_density(&part, 64).unwrap();
        assert_eq!(parry.density.lower_bound(), 0.0);
    }
}
