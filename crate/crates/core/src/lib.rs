//! # randbeta
//!
//! Expansions `x = sum d_i beta^-i` in a non-integer base `beta > 1` with
//! digits in `{0, ..., floor(beta)}`, together with the machinery to study
//! the random mixture of the greedy and lazy digit maps:
//!
//! - [`regions`]: the switch/equality partition of the expansion interval
//!   and the greedy/lazy digit cells;
//! - [`dynamics`]: the greedy, lazy, and coin-driven digit maps, expansion
//!   generation, and recovery of the coins behind a given expansion;
//! - [`ulam`] and [`transfer`]: the discretized transfer operator
//!   `P = p P_T + (1-p) P_L`, its fixed density, invariance residuals, and
//!   the explicit greedy-map (Parry) density;
//! - [`markov`]: when 1 has a finite greedy expansion with positive
//!   coefficients, the exact Markov model — refined partition, adjacency
//!   and transition matrices, stationary vector, exact invariant density,
//!   and entropies;
//! - [`sim`]: seeded Monte-Carlo experiments (switch frequencies, block
//!   censuses, maximal-entropy digit streams, singularity diagnostics,
//!   normality tests).
//!
//! Everything is deterministic given its inputs; randomized routines take
//! an explicit [`sim::RngSpec`].

pub mod density;
pub mod dynamics;
pub mod error;
pub mod interval;
pub mod markov;
pub mod params;
pub mod regions;
pub mod sim;
pub mod transfer;
pub mod ulam;

pub use density::PiecewiseConstantDensity;
pub use dynamics::{
    expand_greedy, expand_lazy, expand_random, greedy_step, kbeta_step, lazy_step,
    reconstruct_omega, reconstruction_error_bound, CoinSequence, CoinSource, DigitSequence,
    KbetaStep, MAX_EXPANSION_DIGITS,
};
pub use error::{Error, Result};
pub use interval::Interval;
pub use markov::{
    build_model, entropy_closed_form, greedy_expansion_of_one, GreedyOnePattern, MarkovModel,
    OneExpansion,
};
pub use params::{BetaParams, GOLDEN, SILVER, TRIBONACCI};
pub use regions::{build_regions, RegionLabel, RegionPartition};
pub use sim::{RngSpec, SimulationReport};
pub use transfer::{invariance_residual, parry_density};
pub use ulam::{build_ulam, fixed_density, FixedPointScheme, UlamOperator};
