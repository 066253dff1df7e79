//! Seeded Monte-Carlo experiments: Birkhoff frequencies of switch visits,
//! block censuses of random expansions, the maximal-entropy digit process,
//! singularity diagnostics, and block-frequency normality tests.
//!
//! All randomness flows through [`RngSpec`]: a (seed, stream) pair mapped
//! to an independent counter-based generator stream, so every experiment
//! is reproducible bit for bit and workers can be given disjoint streams.

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use serde::Serialize;

use crate::density::PiecewiseConstantDensity;
use crate::dynamics::{greedy_step, kbeta_step, lazy_step, CoinSource, DigitSequence};
use crate::error::{Error, Result};
use crate::markov::MarkovModel;
use crate::params::BetaParams;
use crate::regions::{RegionLabel, RegionPartition};

/// Steps discarded before frequency accumulation starts.
pub const BURN_IN: usize = 1_000;

/// Tail values are truncated at this many digits when classifying them.
pub const TAIL_DIGITS: usize = 64;

/// Samples landing closer than this to a region boundary are discarded
/// (and counted) instead of being classified.
pub const BOUNDARY_DISCARD: f64 = 1e-9;

/// Seed and stream for a reproducible generator. Identical specs give
/// identical draws; distinct stream ids give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RngSpec {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSpec {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// 53-bit uniform draw in `[0, 1)`.
pub fn uniform_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Unbiased uniform draw from `0..n` by rejection.
fn uniform_u64_below(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    debug_assert!(n > 0);
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % n;
        }
    }
}

/// Endless Bernoulli(p) coin source backed by a seeded stream.
pub struct BernoulliCoins {
    rng: ChaCha8Rng,
    p: f64,
}

impl BernoulliCoins {
    pub fn new(p: f64, spec: RngSpec) -> Self {
        Self { rng: spec.rng(), p }
    }
}

impl CoinSource for BernoulliCoins {
    fn next_coin(&mut self) -> Option<bool> {
        Some(uniform_f64(&mut self.rng) < self.p)
    }
}

/// One named estimate with its uncertainty and provenance.
#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub estimate: f64,
    pub target: Option<f64>,
    pub stderr: Option<f64>,
    pub n: u64,
    pub seed: u64,
}

/// A bundle of metrics produced by one experiment.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub metrics: Vec<Metric>,
}

impl SimulationReport {
    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Long-run fraction of iterates of the random map whose point coordinate
/// lies in a switch region, with coins drawn i.i.d. Bernoulli(p).
pub fn switch_frequency(
    part: &RegionPartition,
    x0: f64,
    steps: usize,
    spec: RngSpec,
) -> Result<SimulationReport> {
    let mut coins = BernoulliCoins::new(part.params().p(), spec);
    let mut x = part.params().clamp_into_domain(x0)?;
    for _ in 0..BURN_IN {
        x = kbeta_step(part, x, &mut coins)?.x;
    }
    let mut hits = 0u64;
    for _ in 0..steps {
        if part.locate(x)?.is_switch() {
            hits += 1;
        }
        x = kbeta_step(part, x, &mut coins)?.x;
    }
    let freq = hits as f64 / steps as f64;
    let stderr = (freq * (1.0 - freq) / steps as f64).sqrt();
    Ok(SimulationReport {
        metrics: vec![Metric {
            name: "switch_frequency".into(),
            estimate: freq,
            target: None,
            stderr: Some(stderr),
            n: steps as u64,
            seed: spec.seed,
        }],
    })
}

/// Splits the same experiment across `n_streams` independent generator
/// streams, one thread each, and merges the counts in stream order, so
/// the result does not depend on scheduling and equals the single-thread
/// run with the same spec.
pub fn switch_frequency_parallel(
    part: &RegionPartition,
    x0: f64,
    steps_per_stream: usize,
    seed: u64,
    n_streams: u64,
) -> Result<SimulationReport> {
    let reports: Vec<Result<SimulationReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n_streams)
            .map(|stream_id| {
                scope.spawn(move || {
                    switch_frequency(part, x0, steps_per_stream, RngSpec::new(seed, stream_id))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut hits = 0.0;
    let mut total = 0u64;
    for report in reports {
        let metric = &report?.metrics[0];
        hits += metric.estimate * metric.n as f64;
        total += metric.n;
    }
    let freq = hits / total as f64;
    let stderr = (freq * (1.0 - freq) / total as f64).sqrt();
    Ok(SimulationReport {
        metrics: vec![Metric {
            name: "switch_frequency".into(),
            estimate: freq,
            target: None,
            stderr: Some(stderr),
            n: total,
            seed,
        }],
    })
}

/// Which orbit drives a generated digit stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitMode {
    Greedy,
    Lazy,
    Random,
}

/// Digits of one long expansion of `x0`. Unlike the capped single-call
/// expansion, this iterates the map freely: far beyond 64 digits the
/// stream no longer tracks the exact digits of `x0`, but it samples the
/// stationary digit process, which is what the census measures.
pub fn digit_stream(
    part: &RegionPartition,
    x0: f64,
    n_digits: usize,
    mode: OrbitMode,
    spec: RngSpec,
) -> Result<DigitSequence> {
    let mut digits = Vec::with_capacity(n_digits);
    let mut x = part.params().clamp_into_domain(x0)?;
    match mode {
        OrbitMode::Greedy => {
            for _ in 0..n_digits {
                let (d, next) = greedy_step(part, x)?;
                digits.push(d);
                x = next;
            }
        }
        OrbitMode::Lazy => {
            for _ in 0..n_digits {
                let (d, next) = lazy_step(part, x)?;
                digits.push(d);
                x = next;
            }
        }
        OrbitMode::Random => {
            let mut coins = BernoulliCoins::new(part.params().p(), spec);
            for _ in 0..n_digits {
                let out = kbeta_step(part, x, &mut coins)?;
                digits.push(out.digit);
                x = out.x;
            }
        }
    }
    Ok(DigitSequence(digits))
}

/// Occurrence counts for every block up to a given length.
#[derive(Debug, Clone, Serialize)]
pub struct BlockCensus {
    pub alphabet_size: u32,
    pub max_block_len: usize,
    pub n_digits: usize,
    /// Per length L: number of distinct blocks observed out of
    /// `alphabet_size^L`.
    pub coverage: Vec<BlockCoverage>,
    /// True when every block of every length up to the cap occurred.
    pub universal: bool,
    /// Occurrence counts keyed by the block rendered as digits.
    pub counts: HashMap<String, u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockCoverage {
    pub len: usize,
    pub possible: u64,
    pub observed: u64,
}

/// Sliding-window census of all blocks of length `1..=max_block_len` in
/// one generated expansion of `x0`.
pub fn block_census(
    part: &RegionPartition,
    x0: f64,
    n_digits: usize,
    max_block_len: usize,
    mode: OrbitMode,
    spec: RngSpec,
) -> Result<BlockCensus> {
    let alphabet = part.params().floor_beta() + 1;
    if max_block_len == 0 {
        return Err(Error::InvalidArgument("block length must be >= 1".into()));
    }
    let possible_total: f64 = (1..=max_block_len)
        .map(|l| (f64::from(alphabet)).powi(l as i32))
        .sum();
    if possible_total > 2e6 {
        return Err(Error::InvalidArgument(format!(
            "census of {possible_total:.0} blocks is too large"
        )));
    }
    let digits = digit_stream(part, x0, n_digits, mode, spec)?;
    let ds = digits.digits();

    let mut counts: HashMap<Vec<u32>, u64> = HashMap::new();
    for len in 1..=max_block_len {
        for w in ds.windows(len) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
        }
    }

    let mut coverage = Vec::with_capacity(max_block_len);
    let mut universal = true;
    for len in 1..=max_block_len {
        let possible = (u64::from(alphabet)).pow(len as u32);
        let observed = counts.keys().filter(|k| k.len() == len).count() as u64;
        universal &= observed == possible;
        coverage.push(BlockCoverage {
            len,
            possible,
            observed,
        });
    }

    let counts = counts
        .into_iter()
        .map(|(k, v)| {
            let key: Vec<String> = k.iter().map(|d| d.to_string()).collect();
            (key.join(""), v)
        })
        .collect();

    Ok(BlockCensus {
        alphabet_size: alphabet,
        max_block_len,
        n_digits,
        coverage,
        universal,
        counts,
        seed: spec.seed,
    })
}

/// I.i.d. uniform digits over `{0, ..., floor_beta}` — the digit process of
/// the measure of maximal entropy. The induced values `sum d_i beta^-i`
/// sample the associated Bernoulli convolution.
pub fn max_entropy_digit_stream(
    params: &BetaParams,
    n_digits: usize,
    spec: RngSpec,
) -> DigitSequence {
    let alphabet = u64::from(params.floor_beta()) + 1;
    let mut rng = spec.rng();
    DigitSequence(
        (0..n_digits)
            .map(|_| uniform_u64_below(&mut rng, alphabet) as u32)
            .collect(),
    )
}

/// Compares, at `p = 1/2`, the switch-to-`C_0` mass ratio under the
/// maximal-entropy digit process (estimated from sampled tail values)
/// against the same ratio under the Markov measure (computed exactly from
/// the stationary vector). The two ratios differ for every non-integer
/// base, which is the elementary route to mutual singularity.
pub fn singularity_diagnostic(
    part: &RegionPartition,
    model: &MarkovModel,
    n_samples: usize,
    spec: RngSpec,
) -> Result<SimulationReport> {
    let params = part.params();
    if (params.p() - 0.5).abs() > 1e-12 {
        return Err(Error::HypothesisNotMet(
            "the singularity diagnostic is stated for p = 1/2".into(),
        ));
    }
    let beta = params.beta();
    let b = f64::from(params.floor_beta());
    let alphabet = u64::from(params.floor_beta()) + 1;
    let c0 = model.cells()[0];

    let mut rng = spec.rng();
    let mut in_switch = 0u64;
    let mut in_c0 = 0u64;
    let mut discarded = 0u64;
    let mut tail = vec![0u32; TAIL_DIGITS];
    for _ in 0..n_samples {
        for d in tail.iter_mut() {
            *d = uniform_u64_below(&mut rng, alphabet) as u32;
        }
        let mut value = 0.0f64;
        for &d in tail.iter().rev() {
            value = (value + f64::from(d)) / beta;
        }
        // Discard values too close to the boundaries of S or C_0.
        let near_boundary = part
            .regions()
            .iter()
            .filter(|(_, label)| label.is_switch())
            .any(|(iv, _)| {
                (value - iv.lo).abs() < BOUNDARY_DISCARD || (value - iv.hi).abs() < BOUNDARY_DISCARD
            })
            || (value - c0.hi).abs() < BOUNDARY_DISCARD;
        if near_boundary {
            discarded += 1;
            continue;
        }
        if part.locate(value)?.is_switch() {
            in_switch += 1;
        } else if value <= c0.hi {
            in_c0 += 1;
        }
    }
    if in_c0 == 0 {
        return Err(Error::NumericalFailure(
            "no tail values landed in C_0; cannot form the ratio".into(),
        ));
    }

    let kept = n_samples as u64 - discarded;
    let ps = in_switch as f64 / kept as f64;
    let pc = in_c0 as f64 / kept as f64;
    let ratio = ps / pc;
    // Delta-method standard error for the ratio of two frequencies
    // measured on the same sample; the events are disjoint, so their
    // covariance is -ps*pc/n and the cross term contributes +2.
    let var = (ratio * ratio / kept as f64) * ((1.0 - ps) / ps + (1.0 - pc) / pc + 2.0);
    let stderr = var.sqrt();

    let markov_ratio = model.switch_mass() / model.stationary()[0];
    Ok(SimulationReport {
        metrics: vec![
            Metric {
                name: "max_entropy_ratio".into(),
                estimate: ratio,
                target: Some(2.0 * b / (b + 1.0)),
                stderr: Some(stderr),
                n: kept,
                seed: spec.seed,
            },
            Metric {
                name: "markov_ratio".into(),
                estimate: markov_ratio,
                target: Some(2.0 * (beta - 1.0) / beta),
                stderr: None,
                n: 0,
                seed: spec.seed,
            },
            Metric {
                name: "boundary_discards".into(),
                estimate: discarded as f64,
                target: None,
                stderr: None,
                n: n_samples as u64,
                seed: spec.seed,
            },
        ],
    })
}

/// Chi-square deviation of block frequencies from the uniform law
/// `(floor_beta + 1)^-L`, per block length, on non-overlapping windows.
#[derive(Debug, Clone, Serialize)]
pub struct NormalityReport {
    pub per_length: Vec<LengthDeviation>,
    /// True when any length shows a deviation far beyond chance.
    pub significant: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LengthDeviation {
    pub len: usize,
    pub chi_square: f64,
    pub dof: u64,
    /// `(chi2 - dof) / sqrt(2 dof)`, roughly a z-score.
    pub z_score: f64,
    pub windows: u64,
}

/// Number of sigmas beyond which a chi-square deviation is flagged.
pub const NORMALITY_Z_CUTOFF: f64 = 10.0;

pub fn normality_test(
    digits: &DigitSequence,
    floor_beta: u32,
    max_block_len: usize,
) -> Result<NormalityReport> {
    let alphabet = u64::from(floor_beta) + 1;
    let ds = digits.digits();
    if max_block_len == 0 || ds.len() < max_block_len * 10 {
        return Err(Error::InvalidArgument(
            "digit stream too short for the requested block length".into(),
        ));
    }
    let mut per_length = Vec::with_capacity(max_block_len);
    let mut significant = false;
    for len in 1..=max_block_len {
        let cells = alphabet.pow(len as u32);
        let mut counts = vec![0u64; cells as usize];
        let mut windows = 0u64;
        // Non-overlapping windows keep the chi-square statistic honest.
        for w in ds.chunks_exact(len) {
            let mut idx = 0u64;
            for &d in w {
                idx = idx * alphabet + u64::from(d);
            }
            counts[idx as usize] += 1;
            windows += 1;
        }
        let expected = windows as f64 / cells as f64;
        let chi_square: f64 = counts
            .iter()
            .map(|&c| {
                let diff = c as f64 - expected;
                diff * diff / expected
            })
            .sum();
        let dof = cells - 1;
        let z_score = (chi_square - dof as f64) / (2.0 * dof as f64).sqrt();
        significant |= z_score > NORMALITY_Z_CUTOFF;
        per_length.push(LengthDeviation {
            len,
            chi_square,
            dof,
            z_score,
            windows,
        });
    }
    Ok(NormalityReport {
        per_length,
        significant,
    })
}

/// Entrywise digit complement `d -> floor_beta - d`.
pub fn digit_complement(digits: &DigitSequence, params: &BetaParams) -> DigitSequence {
    let b = params.floor_beta();
    DigitSequence(digits.digits().iter().map(|d| b - d).collect())
}

/// Which map drives [`orbit_histogram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    /// The random map: coins consumed only on switch hits.
    Kbeta,
    /// The skew product: a coin consumed every step.
    Rbeta,
}

/// Histogram (as a density) of the point coordinate along one long orbit.
pub fn orbit_histogram(
    part: &RegionPartition,
    x0: f64,
    steps: usize,
    bins: usize,
    kind: MapKind,
    spec: RngSpec,
) -> Result<PiecewiseConstantDensity> {
    let params = part.params();
    let j_max = params.j_max();
    let mut coins = BernoulliCoins::new(params.p(), spec);
    let mut x = params.clamp_into_domain(x0)?;
    for _ in 0..BURN_IN {
        x = kbeta_step(part, x, &mut coins)?.x;
    }
    let mut counts = vec![0u64; bins];
    for _ in 0..steps {
        let bin = ((x / j_max * bins as f64) as usize).min(bins - 1);
        counts[bin] += 1;
        x = match kind {
            MapKind::Kbeta => kbeta_step(part, x, &mut coins)?.x,
            MapKind::Rbeta => crate::dynamics::rbeta_step(part, x, &mut coins)?,
        };
    }
    let mut breakpoints: Vec<f64> = (0..bins).map(|i| i as f64 * j_max / bins as f64).collect();
    breakpoints.push(j_max);
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    PiecewiseConstantDensity::normalized(breakpoints, values)
}

/// Extracts the first `n_coins` coins behind a digit sequence by walking
/// its tail values: at the `j`-th step the remainder is re-evaluated as
/// `sum_i d_{j+i} beta^-i` (truncated at [`TAIL_DIGITS`]), so errors do
/// not compound. Only steps with a full-width tail are classified, which
/// keeps the truncation error below the boundary-discard margin. Returns
/// `None` when a tail value lands within that margin of a boundary or the
/// digits run out before enough switch hits occur.
pub fn coin_prefix_from_digits(
    part: &RegionPartition,
    digits: &DigitSequence,
    n_coins: usize,
) -> Option<Vec<u8>> {
    let beta = part.params().beta();
    let ds = digits.digits();
    if ds.len() < TAIL_DIGITS {
        return None;
    }
    let mut coins = Vec::with_capacity(n_coins);
    for j in 0..=(ds.len() - TAIL_DIGITS) {
        if coins.len() >= n_coins {
            break;
        }
        let tail = &ds[j..j + TAIL_DIGITS];
        let mut value = 0.0f64;
        for &d in tail.iter().rev() {
            value = (value + f64::from(d)) / beta;
        }
        let near_boundary = part.regions().iter().any(|(iv, _)| {
            (value - iv.lo).abs() < BOUNDARY_DISCARD || (value - iv.hi).abs() < BOUNDARY_DISCARD
        });
        if near_boundary {
            return None;
        }
        match part.locate(value).ok()? {
            RegionLabel::Switch(k) => {
                if ds[j] == k {
                    coins.push(1);
                } else if ds[j] + 1 == k {
                    coins.push(0);
                } else {
                    return None;
                }
            }
            RegionLabel::Equality(_) => {}
        }
    }
    (coins.len() >= n_coins).then_some(coins)
}
