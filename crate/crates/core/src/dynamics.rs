//! Pointwise dynamics: the greedy map `T`, the lazy map `L`, the random map
//! `K` driven by coin flips, the plain skew product `R`, digit-sequence
//! generation, and recovery of the coins behind a given expansion.
//!
//! All maps act as `x -> beta*x - d`, differing only in how the digit `d`
//! is chosen. On an equality region the digit is forced; on a switch region
//! `S_k` the random map reads one coin: heads takes the greedy digit `k`,
//! tails the lazy digit `k-1`. Coins are consumed only on switch hits.
//!
//! Because orbit errors grow like `beta^n`, a single expansion call is
//! capped at [`MAX_EXPANSION_DIGITS`] digits; the partial sums then satisfy
//! `|x - sum_{i<=n} d_i beta^-i| <= j_max * beta^-n`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::BetaParams;
use crate::regions::{RegionLabel, RegionPartition};

/// Per-call digit cap for expansions.
pub const MAX_EXPANSION_DIGITS: usize = 64;

/// A finite digit string over `{0, ..., floor_beta}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitSequence(pub Vec<u32>);

impl DigitSequence {
    pub fn digits(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Value of the partial sum `sum d_i beta^-i`.
    pub fn value(&self, beta: f64) -> f64 {
        // Horner from the tail keeps the rounding error flat.
        let mut acc = 0.0;
        for &d in self.0.iter().rev() {
            acc = (acc + f64::from(d)) / beta;
        }
        acc
    }
}

/// Source of coin flips for the random map. `None` means the source is
/// exhausted (a finite recorded sequence ran out).
pub trait CoinSource {
    fn next_coin(&mut self) -> Option<bool>;
}

/// A finite recorded coin sequence with a read cursor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CoinSequence {
    bits: Vec<u8>,
    #[serde(skip)]
    cursor: usize,
}

impl CoinSequence {
    pub fn new(bits: Vec<u8>) -> Self {
        debug_assert!(bits.iter().all(|&b| b <= 1));
        Self { bits, cursor: 0 }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// How many bits have been consumed so far.
    pub fn consumed(&self) -> usize {
        self.cursor
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(u8::from(bit));
    }

    /// Fresh cursor over the same bits.
    pub fn rewound(&self) -> Self {
        Self {
            bits: self.bits.clone(),
            cursor: 0,
        }
    }

    /// Bitwise complement (heads and tails swapped).
    pub fn complement(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| 1 - b).collect(),
            cursor: 0,
        }
    }
}

impl CoinSource for CoinSequence {
    fn next_coin(&mut self) -> Option<bool> {
        let bit = self.bits.get(self.cursor)?;
        self.cursor += 1;
        Some(*bit == 1)
    }
}

impl From<Vec<u8>> for CoinSequence {
    fn from(bits: Vec<u8>) -> Self {
        Self::new(bits)
    }
}

/// Outcome of one step of the random map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KbetaStep {
    pub digit: u32,
    pub x: f64,
    /// Whether a coin was read (true exactly on switch hits).
    pub consumed_coin: bool,
}

/// One greedy step: digit from the cells `C(d)`, then `beta*x - d`.
pub fn greedy_step(part: &RegionPartition, x: f64) -> Result<(u32, f64)> {
    let x = part.params().clamp_into_domain(x)?;
    let d = part.greedy_digit(x)?;
    Ok((d, part.params().beta() * x - f64::from(d)))
}

/// One lazy step: digit from the cells `Delta(d)`, then `beta*x - d`.
pub fn lazy_step(part: &RegionPartition, x: f64) -> Result<(u32, f64)> {
    let x = part.params().clamp_into_domain(x)?;
    let d = part.lazy_digit(x)?;
    Ok((d, part.params().beta() * x - f64::from(d)))
}

/// One step of the random map `K`.
pub fn kbeta_step<C: CoinSource>(
    part: &RegionPartition,
    x: f64,
    coins: &mut C,
) -> Result<KbetaStep> {
    kbeta_step_at(part, x, coins, 0)
}

fn kbeta_step_at<C: CoinSource>(
    part: &RegionPartition,
    x: f64,
    coins: &mut C,
    step: usize,
) -> Result<KbetaStep> {
    let x = part.params().clamp_into_domain(x)?;
    match part.locate(x)? {
        RegionLabel::Equality(k) => Ok(KbetaStep {
            digit: k,
            x: part.params().beta() * x - f64::from(k),
            consumed_coin: false,
        }),
        RegionLabel::Switch(k) => {
            let heads = coins.next_coin().ok_or(Error::ExhaustedCoins { step })?;
            let digit = if heads { k } else { k - 1 };
            Ok(KbetaStep {
                digit,
                x: part.params().beta() * x - f64::from(digit),
                consumed_coin: true,
            })
        }
    }
}

/// One step of the skew product `R`: the coin picks the greedy or lazy map
/// everywhere, and is always consumed.
pub fn rbeta_step<C: CoinSource>(part: &RegionPartition, x: f64, coins: &mut C) -> Result<f64> {
    let heads = coins.next_coin().ok_or(Error::ExhaustedCoins { step: 0 })?;
    let (_, next) = if heads {
        greedy_step(part, x)?
    } else {
        lazy_step(part, x)?
    };
    Ok(next)
}

/// `n` greedy digits of `x`.
pub fn expand_greedy(part: &RegionPartition, x: f64, n: usize) -> Result<DigitSequence> {
    expand_with(part, x, n, greedy_step)
}

/// `n` lazy digits of `x`.
pub fn expand_lazy(part: &RegionPartition, x: f64, n: usize) -> Result<DigitSequence> {
    expand_with(part, x, n, lazy_step)
}

fn expand_with(
    part: &RegionPartition,
    x: f64,
    n: usize,
    step: impl Fn(&RegionPartition, f64) -> Result<(u32, f64)>,
) -> Result<DigitSequence> {
    check_cap(n)?;
    let mut cur = part.params().clamp_into_domain(x)?;
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        let (d, next) = step(part, cur)?;
        digits.push(d);
        cur = next;
    }
    Ok(DigitSequence(digits))
}

/// `n` digits of the random expansion of `x` driven by `coins`.
pub fn expand_random<C: CoinSource>(
    part: &RegionPartition,
    x: f64,
    n: usize,
    coins: &mut C,
) -> Result<DigitSequence> {
    check_cap(n)?;
    let mut cur = part.params().clamp_into_domain(x)?;
    let mut digits = Vec::with_capacity(n);
    for i in 0..n {
        let out = kbeta_step_at(part, cur, coins, i)?;
        digits.push(out.digit);
        cur = out.x;
    }
    Ok(DigitSequence(digits))
}

fn check_cap(n: usize) -> Result<()> {
    if n > MAX_EXPANSION_DIGITS {
        return Err(Error::DigitCapExceeded {
            requested: n,
            cap: MAX_EXPANSION_DIGITS,
        });
    }
    Ok(())
}

/// Upper bound on `|x - sum_{i<=n} d_i beta^-i|` for any expansion prefix.
pub fn reconstruction_error_bound(params: &BetaParams, n: usize) -> f64 {
    params.j_max() * params.beta().powi(-(n as i32))
}

/// Recovers the coins behind a given expansion prefix of `x`: replays the
/// orbit and records, at every switch hit, heads when the supplied digit is
/// the greedy one and tails when it is the lazy one. Replaying the random
/// map with the returned coins reproduces `digits` exactly.
pub fn reconstruct_omega(
    part: &RegionPartition,
    x: f64,
    digits: &DigitSequence,
) -> Result<CoinSequence> {
    let mut cur = part.params().clamp_into_domain(x)?;
    let mut coins = CoinSequence::default();
    for (step, &d) in digits.digits().iter().enumerate() {
        if d > part.params().floor_beta() {
            return Err(Error::InvalidExpansion {
                step,
                digit: d,
                reason: "digit exceeds floor(beta)",
            });
        }
        match part.locate(cur)? {
            RegionLabel::Equality(k) => {
                if d != k {
                    return Err(Error::InvalidExpansion {
                        step,
                        digit: d,
                        reason: "digit differs from the forced digit in an equality region",
                    });
                }
            }
            RegionLabel::Switch(k) => {
                if d == k {
                    coins.push(true);
                } else if d + 1 == k {
                    coins.push(false);
                } else {
                    return Err(Error::InvalidExpansion {
                        step,
                        digit: d,
                        reason: "digit admissible in a switch region is k or k-1",
                    });
                }
            }
        }
        let next = part.params().beta() * cur - f64::from(d);
        cur = part
            .params()
            .clamp_into_domain(next)
            .map_err(|_| Error::InvalidExpansion {
                step,
                digit: d,
                reason: "remainder left the expansion interval",
            })?;
    }
    Ok(coins.rewound())
}
