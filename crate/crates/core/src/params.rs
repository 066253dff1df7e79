//! Base parameters for expansions in a non-integer base `beta > 1`.
//!
//! Expansions live on the interval `[0, floor(beta)/(beta-1)]`. Digits are
//! drawn from `{0, ..., floor(beta)}` and the coin-flip parameter `p` sets
//! the probability of the greedy branch inside switch regions.

use serde::Serialize;

use crate::error::{Error, Result};

/// Bases rejected when closer than this to an integer.
pub const INTEGER_BETA_TOL: f64 = 1e-9;

/// Slack for points at the ends of the expansion interval: anything within
/// this distance of `0` or `j_max` is clamped into range, anything further
/// out is a domain error. Wide enough to absorb the round-off of iterated
/// steps, whose digit lookups snap within `regions::BOUNDARY_SNAP` and can
/// therefore overshoot an endpoint by `beta` times that much.
pub const DOMAIN_EPS: f64 = 1e-9;

/// The golden ratio, root of x^2 = x + 1.
pub const GOLDEN: f64 = 1.618033988749895;
/// The silver ratio 1 + sqrt(2), root of x^2 = 2x + 1.
pub const SILVER: f64 = 2.414213562373095;
/// Real root of x^3 = x^2 + x + 1.
pub const TRIBONACCI: f64 = 1.839286755214161;

/// A validated base/probability pair with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaParams {
    beta: f64,
    p: f64,
    floor_beta: u32,
    j_max: f64,
}

impl BetaParams {
    /// Validates `beta` (non-integer, > 1) and `p` (in (0,1)) and derives
    /// `floor(beta)` and the right endpoint of the expansion interval.
    pub fn new(beta: f64, p: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 1.0 {
            return Err(Error::InvalidBeta { beta });
        }
        if (beta - beta.round()).abs() <= INTEGER_BETA_TOL {
            return Err(Error::InvalidBeta { beta });
        }
        if !p.is_finite() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidProbability { p });
        }
        let floor_beta = beta.floor() as u32;
        let j_max = f64::from(floor_beta) / (beta - 1.0);
        Ok(Self {
            beta,
            p,
            floor_beta,
            j_max,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Largest digit, `floor(beta)`.
    pub fn floor_beta(&self) -> u32 {
        self.floor_beta
    }

    /// Right endpoint of the expansion interval `[0, floor(beta)/(beta-1)]`.
    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    /// Same base with a different coin parameter.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.beta, p)
    }

    /// The reflection `x -> j_max - x` that swaps the greedy and lazy maps.
    pub fn reflect(&self, x: f64) -> f64 {
        self.j_max - x
    }

    /// Clamps `x` into `[0, j_max]`, allowing `DOMAIN_EPS` of slack at the
    /// ends; values further outside are rejected.
    pub fn clamp_into_domain(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x < -DOMAIN_EPS || x > self.j_max + DOMAIN_EPS {
            return Err(Error::OutsideDomain {
                x,
                j_max: self.j_max,
            });
        }
        Ok(x.clamp(0.0, self.j_max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_constants() {
        let params = BetaParams::new(GOLDEN, 0.5).unwrap();
        assert_eq!(params.floor_beta(), 1);
        // For the golden ratio 1/(beta-1) = beta.
        assert!((params.j_max() - GOLDEN).abs() < 1e-15);
    }

    #[test]
    fn rejects_integer_beta() {
        assert!(BetaParams::new(2.0, 0.5).is_err());
        assert!(BetaParams::new(3.0 - 1e-10, 0.5).is_err());
        assert!(BetaParams::new(1.0, 0.5).is_err());
        assert!(BetaParams::new(0.7, 0.5).is_err());
    }

    #[test]
    fn accepts_near_integer_outside_tolerance() {
        assert!(BetaParams::new(2.0 + 1e-6, 0.5).is_ok());
    }

    #[test]
    fn rejects_degenerate_p() {
        assert!(BetaParams::new(1.5, 0.0).is_err());
        assert!(BetaParams::new(1.5, 1.0).is_err());
        assert!(BetaParams::new(1.5, -0.1).is_err());
    }

    #[test]
    fn clamp_behaviour_at_ends() {
        let params = BetaParams::new(1.5, 0.5).unwrap();
        assert_eq!(params.clamp_into_domain(-1e-13).unwrap(), 0.0);
        assert_eq!(params.clamp_into_domain(2.0 + 1e-13).unwrap(), 2.0);
        assert!(params.clamp_into_domain(2.1).is_err());
        assert!(params.clamp_into_domain(-0.1).is_err());
    }

    #[test]
    fn named_bases_satisfy_their_polynomials() {
        assert!((GOLDEN * GOLDEN - GOLDEN - 1.0).abs() < 1e-14);
        assert!((SILVER * SILVER - 2.0 * SILVER - 1.0).abs() < 1e-13);
        let t = TRIBONACCI;
        assert!((t * t * t - t * t - t - 1.0).abs() < 1e-13);
    }
}
