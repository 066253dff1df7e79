//! Closed/half-open intervals used to carry regions and digit cells.

use serde::Serialize;

/// An interval with explicit endpoint membership.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn closed(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: true,
        }
    }

    /// `[lo, hi)`
    pub fn closed_open(lo: f64, hi: f64) -> Self {
        debug_assert!(lo < hi);
        Self {
            lo,
            hi,
            lo_closed: true,
            hi_closed: false,
        }
    }

    /// `(lo, hi]`
    pub fn open_closed(lo: f64, hi: f64) -> Self {
        debug_assert!(lo < hi);
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: true,
        }
    }

    /// `(lo, hi)`
    pub fn open(lo: f64, hi: f64) -> Self {
        debug_assert!(lo < hi);
        Self {
            lo,
            hi,
            lo_closed: false,
            hi_closed: false,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed {
            x >= self.lo
        } else {
            x > self.lo
        };
        let below = if self.hi_closed {
            x <= self.hi
        } else {
            x < self.hi
        };
        above && below
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// Distance from `x` to the closure of the interval (0 inside).
    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }

    /// Length of the overlap of the closures.
    pub fn overlap_length(&self, other: &Interval) -> f64 {
        (self.hi.min(other.hi) - self.lo.max(other.lo)).max(0.0)
    }

    /// Image under the reflection `x -> c - x`; endpoint membership flips.
    pub fn reflected(&self, c: f64) -> Interval {
        Interval {
            lo: c - self.hi,
            hi: c - self.lo,
            lo_closed: self.hi_closed,
            hi_closed: self.lo_closed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_membership() {
        let iv = Interval::closed_open(0.0, 1.0);
        assert!(iv.contains(0.0));
        assert!(!iv.contains(1.0));
        assert!(Interval::open_closed(0.0, 1.0).contains(1.0));
        assert!(!Interval::open(0.0, 1.0).contains(0.0));
    }

    #[test]
    fn reflection_flips_membership() {
        let iv = Interval::closed_open(0.25, 0.5);
        let r = iv.reflected(1.0);
        assert_eq!(r.lo, 0.5);
        assert_eq!(r.hi, 0.75);
        assert!(!r.contains(0.5));
        assert!(r.contains(0.75));
    }

    #[test]
    fn overlap_and_distance() {
        let a = Interval::closed(0.0, 1.0);
        let b = Interval::closed(0.5, 2.0);
        assert!((a.overlap_length(&b) - 0.5).abs() < 1e-15);
        assert_eq!(a.distance_to(1.5), 0.5);
        assert_eq!(a.distance_to(0.5), 0.0);
    }
}
