//! Exact Markov machinery for bases where 1 has a finite greedy expansion
//! with positive coefficients.
//!
//! Writing `1 = b_1/beta + ... + b_n/beta^n` with all `b_i >= 1`, the
//! switch/equality partition refined by the greedy orbits of `1` and of the
//! complement point `c = b_1/(beta-1) - 1` is a Markov partition: the image
//! of every equality cell is a union of cells, and every switch cell maps
//! onto `C_0` (greedy branch) or `C_L` (lazy branch). The induced chain has
//! transition probabilities `lambda(C_i ∩ T^-1 C_j)/lambda(C_i)` on
//! equality rows and `(p, 1-p)` to `(C_0, C_L)` on switch rows; its
//! stationary vector gives the invariant density exactly: the density is
//! constant `pi(j)/lambda(C_j)` on `C_j`.
//!
//! When `beta^2 = b_1*beta + 1` the orbit points coincide with partition
//! endpoints and the refinement collapses back to the plain
//! switch/equality partition; endpoint dedupe realizes that case without
//! special handling.

use serde::Serialize;

use crate::density::PiecewiseConstantDensity;
use crate::dynamics::greedy_step;
use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::params::BetaParams;
use crate::regions::{RegionLabel, RegionPartition};

/// Iteration cap for the greedy expansion of 1; binary64 cannot certify
/// finiteness much beyond this depth.
pub const DEFAULT_ONE_EXPANSION_MAX_ITER: usize = 64;
/// Orbit remainder below this counts as an exact hit of zero.
pub const DEFAULT_ONE_EXPANSION_TOL: f64 = 1e-10;
/// Tolerance used when testing `beta^2 = b_1*beta + 1`.
pub const QUADRATIC_TOL: f64 = 1e-9;
/// Orbit points closer than this to an existing endpoint are identified
/// with it when building the refined partition.
pub const ENDPOINT_DEDUPE_TOL: f64 = 1e-12;
/// Tolerance for the geometric checks (orbit landings, Markov property).
pub const GEOMETRY_TOL: f64 = 1e-10;

/// The digits of a numerically finite greedy expansion of 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GreedyOnePattern {
    coefficients: Vec<u32>,
    all_positive: bool,
    quadratic: bool,
}

impl GreedyOnePattern {
    pub fn coefficients(&self) -> &[u32] {
        &self.coefficients
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Whether every coefficient is at least 1 (the Markov hypothesis).
    pub fn all_positive(&self) -> bool {
        self.all_positive
    }

    /// Whether `beta^2 = b_1*beta + 1` within tolerance (the case where the
    /// refined partition collapses to the switch/equality partition).
    pub fn quadratic(&self) -> bool {
        self.quadratic
    }
}

/// Outcome of iterating the greedy map from 1.
#[derive(Debug, Clone, PartialEq)]
pub enum OneExpansion {
    /// The orbit hit 0 within tolerance after `pattern.len()` digits.
    Finite(GreedyOnePattern),
    /// No hit within the iteration budget.
    NotFinite { iterations: usize, remainder: f64 },
}

/// Iterates the greedy map from `x = 1`, collecting digits until the
/// remainder reaches 0 within `tol` or `max_iter` digits have been taken.
pub fn greedy_expansion_of_one(part: &RegionPartition, max_iter: usize, tol: f64) -> OneExpansion {
    let beta = part.params().beta();
    let mut digits = Vec::new();
    let mut x = 1.0_f64;
    for _ in 0..max_iter {
        let (d, next) = greedy_step(part, x).expect("1 lies in the expansion interval");
        digits.push(d);
        x = next;
        if x.abs() <= tol {
            let all_positive = digits.iter().all(|&d| d >= 1);
            let b1 = f64::from(digits[0]);
            let quadratic = (beta * beta - b1 * beta - 1.0).abs() <= QUADRATIC_TOL;
            return OneExpansion::Finite(GreedyOnePattern {
                coefficients: digits,
                all_positive,
                quadratic,
            });
        }
    }
    OneExpansion::NotFinite {
        iterations: max_iter,
        remainder: x,
    }
}

/// The two greedy orbits behind the Markov refinement, validated against
/// the landing claims they must satisfy.
#[derive(Debug, Clone)]
pub struct OrbitPoints {
    /// `T^i 1` for `i = 0..=n`; the last entry is the (near-)zero hit.
    pub one_orbit: Vec<f64>,
    /// `T^i c` for `i = 0..=n` with `c = b_1/(beta-1) - 1`; the last entry
    /// returns to `c`.
    pub complement_orbit: Vec<f64>,
    /// How many interior landings sat exactly on a region boundary
    /// (nonzero precisely in the `beta^2 = b_1*beta + 1` case).
    pub boundary_landings: usize,
}

/// Computes both orbits with the digits prescribed by the pattern and
/// checks every landing claim within [`GEOMETRY_TOL`]:
/// interior points land in (the closure of) the predicted equality
/// regions, step `n-1` lands on the predicted switch-region points, the
/// orbit of 1 ends at 0, and the complement point is `T^n`-fixed. The lazy
/// endpoint claims (`L^n 1 = 1`, `L^n c = j_max`) are the reflections of
/// the last two and are checked through them.
pub fn orbit_points(part: &RegionPartition, pattern: &GreedyOnePattern) -> Result<OrbitPoints> {
    if !pattern.all_positive() {
        return Err(Error::HypothesisNotMet(
            "orbit analysis needs every greedy coefficient of 1 to be positive".into(),
        ));
    }
    let params = part.params();
    let beta = params.beta();
    let b1 = pattern.coefficients()[0];
    debug_assert_eq!(b1, params.floor_beta());
    let n = pattern.len();
    let b = pattern.coefficients();
    let c = params.j_max() - 1.0;
    let anchor = f64::from(b1) / (beta * (beta - 1.0));

    // Orbit of 1 along its own greedy digits, and of c along the
    // complemented digits (with the switch digit bumped at step n-1).
    let mut one_orbit = vec![1.0];
    let mut complement_orbit = vec![c];
    for i in 0..n {
        let d_one = b[i];
        let d_comp = if i + 1 < n {
            b1 - b[i]
        } else {
            b1 - b[n - 1] + 1
        };
        let t = one_orbit[i];
        let u = complement_orbit[i];
        one_orbit.push(beta * t - f64::from(d_one));
        complement_orbit.push(beta * u - f64::from(d_comp));
    }

    let mut boundary_landings = 0usize;
    let check = |ok: bool, what: &str| -> Result<()> {
        if ok {
            Ok(())
        } else {
            Err(Error::NumericalFailure(format!(
                "orbit landing check failed: {what}"
            )))
        }
    };

    // Interior landings: at step i the digit taken is b[i], so the point
    // must sit in (the closure of) the region forcing that digit.
    for i in 0..n - 1 {
        let t = one_orbit[i];
        let region = part.equality_region(b[i]);
        check(
            region.distance_to(t) <= GEOMETRY_TOL,
            &format!("T^{i} 1 = {t} not in E_{}", b[i]),
        )?;
        if (t - region.lo).abs() <= GEOMETRY_TOL || (t - region.hi).abs() <= GEOMETRY_TOL {
            boundary_landings += 1;
        }

        let u = complement_orbit[i];
        let mirror = part.equality_region(b1 - b[i]);
        check(
            mirror.distance_to(u) <= GEOMETRY_TOL,
            &format!("T^{i} c = {u} not in E_{}", b1 - b[i]),
        )?;
        if (u - mirror.lo).abs() <= GEOMETRY_TOL || (u - mirror.hi).abs() <= GEOMETRY_TOL {
            boundary_landings += 1;
        }
    }

    // Step n-1: both orbits land on switch regions at explicit points.
    let bn = b[n - 1];
    let t_pen = one_orbit[n - 1];
    check(
        (t_pen - f64::from(bn) / beta).abs() <= GEOMETRY_TOL,
        &format!("T^{} 1 = {t_pen}, expected b_n/beta", n - 1),
    )?;
    check(
        part.switch_region(bn).distance_to(t_pen) <= GEOMETRY_TOL,
        &format!("T^{} 1 not in S_{bn}", n - 1),
    )?;
    let u_pen = complement_orbit[n - 1];
    let u_expected = anchor + f64::from(b1 - bn) / beta;
    check(
        (u_pen - u_expected).abs() <= GEOMETRY_TOL,
        &format!("T^{} c = {u_pen}, expected {u_expected}", n - 1),
    )?;
    check(
        part.switch_region(b1 - bn + 1).distance_to(u_pen) <= GEOMETRY_TOL,
        &format!("T^{} c not in S_{}", n - 1, b1 - bn + 1),
    )?;

    // Endpoints: the 1-orbit dies at 0, the complement point is fixed.
    check(
        one_orbit[n].abs() <= GEOMETRY_TOL,
        &format!("T^{n} 1 = {}, expected 0", one_orbit[n]),
    )?;
    check(
        (complement_orbit[n] - c).abs() <= GEOMETRY_TOL,
        &format!("T^{n} c = {}, expected {c}", complement_orbit[n]),
    )?;

    Ok(OrbitPoints {
        one_orbit,
        complement_orbit,
        boundary_landings,
    })
}

/// Kind of a refined-partition cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CellKind {
    /// Sub-cell of an equality region, with its forced digit.
    Equality(u32),
    /// A whole switch region `S_k`.
    Switch(u32),
}

/// The refined partition, the chain matrices, and the stationary vector.
#[derive(Debug, Clone)]
pub struct MarkovModel {
    params: BetaParams,
    pattern: GreedyOnePattern,
    cells: Vec<Interval>,
    kinds: Vec<CellKind>,
    equality_sets: Vec<Vec<usize>>,
    switch_states: Vec<usize>,
    adjacency: Vec<Vec<u8>>,
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

/// Builds the full Markov model for a finite pattern with positive
/// coefficients.
pub fn build_model(part: &RegionPartition, pattern: &GreedyOnePattern) -> Result<MarkovModel> {
    if !pattern.all_positive() {
        return Err(Error::HypothesisNotMet(
            "the Markov construction needs every greedy coefficient of 1 to be positive".into(),
        ));
    }
    let params = *part.params();
    let beta = params.beta();
    let b1 = params.floor_beta();
    let j_max = params.j_max();
    let n = pattern.len();
    let orbits = orbit_points(part, pattern)?;

    // Interior orbit points must be pairwise distinct; shared points would
    // make the endpoint conventions ambiguous.
    let interior: Vec<f64> = orbits.one_orbit[..n - 1]
        .iter()
        .chain(orbits.complement_orbit[..n - 1].iter())
        .copied()
        .collect();
    for (i, a) in interior.iter().enumerate() {
        for b in &interior[i + 1..] {
            if (a - b).abs() <= ENDPOINT_DEDUPE_TOL {
                return Err(Error::NumericalFailure(format!(
                    "orbit points coincide at {a}; refinement conventions are ambiguous"
                )));
            }
        }
    }

    // Endpoints: region boundaries plus interior orbit points, deduped.
    let mut endpoints: Vec<f64> = part
        .regions()
        .iter()
        .map(|(iv, _)| iv.lo)
        .chain(std::iter::once(j_max))
        .collect();
    for x in interior {
        if endpoints
            .iter()
            .all(|e| (e - x).abs() > ENDPOINT_DEDUPE_TOL)
        {
            endpoints.push(x);
        }
    }
    endpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let cells: Vec<Interval> = endpoints
        .windows(2)
        .map(|w| Interval::closed(w[0], w[1]))
        .collect();
    let n_cells = cells.len();
    let last = n_cells - 1;

    // Classify cells through their midpoints and collect the index sets.
    let mut kinds = Vec::with_capacity(n_cells);
    let mut equality_sets: Vec<Vec<usize>> = vec![Vec::new(); b1 as usize + 1];
    let mut switch_map: Vec<Option<usize>> = vec![None; b1 as usize + 1];
    for (j, cell) in cells.iter().enumerate() {
        match part.locate(cell.midpoint())? {
            RegionLabel::Switch(k) => {
                let s = part.switch_region(k);
                if (cell.lo - s.lo).abs() > GEOMETRY_TOL || (cell.hi - s.hi).abs() > GEOMETRY_TOL {
                    return Err(Error::NumericalFailure(format!(
                        "switch region S_{k} was split by the refinement"
                    )));
                }
                if switch_map[k as usize].replace(j).is_some() {
                    return Err(Error::NumericalFailure(format!(
                        "switch region S_{k} matched two cells"
                    )));
                }
                kinds.push(CellKind::Switch(k));
            }
            RegionLabel::Equality(d) => {
                equality_sets[d as usize].push(j);
                kinds.push(CellKind::Equality(d));
            }
        }
    }
    let switch_states: Vec<usize> = (1..=b1)
        .map(|k| {
            switch_map[k as usize].ok_or_else(|| {
                Error::NumericalFailure(format!("no cell found for switch region S_{k}"))
            })
        })
        .collect::<Result<_>>()?;

    // Structural sanity: first/last cells and the mirrored index counts.
    let c = j_max - 1.0;
    if (cells[0].hi - c).abs() > GEOMETRY_TOL || (cells[last].lo - 1.0).abs() > GEOMETRY_TOL {
        return Err(Error::NumericalFailure(
            "outer cells are not [0, c] and [1, j_max]".into(),
        ));
    }
    for i in 0..=b1 as usize {
        if equality_sets[i].len() != equality_sets[b1 as usize - i].len() {
            return Err(Error::NumericalFailure(format!(
                "index sets M_{i} and M_{} have different sizes",
                b1 as usize - i
            )));
        }
    }

    // Adjacency and transition rows.
    let mut adjacency = vec![vec![0u8; n_cells]; n_cells];
    let mut transition = vec![vec![0.0f64; n_cells]; n_cells];
    for (i, cell) in cells.iter().enumerate() {
        match kinds[i] {
            CellKind::Switch(_) => {
                // Greedy branch maps the switch cell onto C_0, lazy onto C_L
                // (checked below); the coin weights the two columns.
                adjacency[i][0] = 1;
                adjacency[i][last] = 1;
                transition[i][0] = params.p();
                transition[i][last] = 1.0 - params.p();
            }
            CellKind::Equality(d) => {
                let img_lo = beta * cell.lo - f64::from(d);
                let img_hi = beta * cell.hi - f64::from(d);
                for (j, target) in cells.iter().enumerate() {
                    let overlap = (img_hi.min(target.hi) - img_lo.max(target.lo)).max(0.0);
                    if overlap <= GEOMETRY_TOL {
                        continue;
                    }
                    if (overlap - target.length()).abs() > GEOMETRY_TOL {
                        return Err(Error::NumericalFailure(format!(
                            "image of cell {i} covers cell {j} only partially; \
                             the refinement is not Markov"
                        )));
                    }
                    adjacency[i][j] = 1;
                    transition[i][j] = overlap / (beta * cell.length());
                }
            }
        }
    }

    // p5: switch cells must map exactly onto the outer cells.
    for (k, &s) in switch_states.iter().enumerate() {
        let cell = &cells[s];
        let kd = k as u32 + 1;
        let t_img = (
            beta * cell.lo - f64::from(kd),
            beta * cell.hi - f64::from(kd),
        );
        let l_img = (
            beta * cell.lo - f64::from(kd - 1),
            beta * cell.hi - f64::from(kd - 1),
        );
        if (t_img.0).abs() > GEOMETRY_TOL
            || (t_img.1 - c).abs() > GEOMETRY_TOL
            || (l_img.0 - 1.0).abs() > GEOMETRY_TOL
            || (l_img.1 - j_max).abs() > GEOMETRY_TOL
        {
            return Err(Error::NumericalFailure(format!(
                "switch cell S_{kd} does not map onto the outer cells"
            )));
        }
    }

    let stationary = stationary_distribution(&transition)?;

    Ok(MarkovModel {
        params,
        pattern: pattern.clone(),
        cells,
        kinds,
        equality_sets,
        switch_states,
        adjacency,
        transition,
        stationary,
    })
}

/// Solves `pi P = pi`, `sum pi = 1` by Gaussian elimination with partial
/// pivoting, falling back to power iteration when the solve is unusable.
fn stationary_distribution(p_mat: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(pi) = stationary_by_solve(p_mat) {
        if stationary_residual(p_mat, &pi) <= 1e-12 && pi.iter().all(|x| *x > 0.0) {
            return Ok(pi);
        }
    }
    let pi = stationary_by_power(p_mat, 1_000_000, 1e-15);
    if stationary_residual(p_mat, &pi) <= 1e-12 && pi.iter().all(|x| *x > 0.0) {
        Ok(pi)
    } else {
        Err(Error::NumericalFailure(format!(
            "stationary distribution did not converge (residual {:.3e})",
            stationary_residual(p_mat, &pi)
        )))
    }
}

fn stationary_by_solve(p_mat: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = p_mat.len();
    // (P^T - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = p_mat[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for cell in a[n - 1].iter_mut() {
        *cell = 1.0;
    }

    // Gaussian elimination with partial pivoting on the augmented matrix.
    for col in 0..n {
        let pivot_row =
            (col..n).max_by(|&r, &s| a[r][col].abs().partial_cmp(&a[s][col].abs()).unwrap())?;
        if a[pivot_row][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot_row);
        let (pivot_rows, rest) = a.split_at_mut(col + 1);
        let pivot = &pivot_rows[col];
        for row in rest.iter_mut() {
            let factor = row[col] / pivot[col];
            if factor == 0.0 {
                continue;
            }
            for (rk, pk) in row[col..].iter_mut().zip(&pivot[col..]) {
                *rk -= factor * pk;
            }
        }
    }
    let mut x = vec![0.0f64; n];
    for row in (0..n).rev() {
        let mut acc = a[row][n];
        for k in (row + 1)..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Some(x)
}

fn stationary_by_power(p_mat: &[Vec<f64>], max_iter: usize, tol: f64) -> Vec<f64> {
    let n = p_mat.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..max_iter {
        let mut w = vec![0.0f64; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * p_mat[i][j];
            }
        }
        let total: f64 = w.iter().sum();
        for x in &mut w {
            *x /= total;
        }
        let diff: f64 = v.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if diff <= tol {
            break;
        }
    }
    v
}

fn stationary_residual(p_mat: &[Vec<f64>], pi: &[f64]) -> f64 {
    let n = p_mat.len();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            acc += pi[i] * p_mat[i][j];
        }
        worst = worst.max((acc - pi[j]).abs());
    }
    worst
}

impl MarkovModel {
    pub fn params(&self) -> &BetaParams {
        &self.params
    }

    pub fn pattern(&self) -> &GreedyOnePattern {
        &self.pattern
    }

    /// Cells `C_0..C_L` in increasing order.
    pub fn cells(&self) -> &[Interval] {
        &self.cells
    }

    pub fn kinds(&self) -> &[CellKind] {
        &self.kinds
    }

    /// Index sets `M_0..M_{b_1}` of equality-region cells.
    pub fn equality_sets(&self) -> &[Vec<usize>] {
        &self.equality_sets
    }

    /// State indices of the switch cells `s_1..s_{b_1}`.
    pub fn switch_states(&self) -> &[usize] {
        &self.switch_states
    }

    pub fn adjacency(&self) -> &[Vec<u8>] {
        &self.adjacency
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn num_states(&self) -> usize {
        self.cells.len()
    }

    /// `||pi P - pi||_inf` for the stored stationary vector.
    pub fn stationary_residual(&self) -> f64 {
        stationary_residual(&self.transition, &self.stationary)
    }

    /// Total stationary mass of the switch states.
    pub fn switch_mass(&self) -> f64 {
        self.switch_states.iter().map(|&s| self.stationary[s]).sum()
    }

    /// Whether some boolean power of the adjacency matrix is entrywise
    /// positive (irreducible and aperiodic chain).
    pub fn is_aperiodic(&self) -> bool {
        let n = self.num_states();
        let mut reach: Vec<Vec<u8>> = self.adjacency.clone();
        for _ in 0..n * n {
            if reach.iter().all(|row| row.iter().all(|&x| x == 1)) {
                return true;
            }
            reach = bool_mat_mul(&reach, &self.adjacency);
        }
        reach.iter().all(|row| row.iter().all(|&x| x == 1))
    }

    /// The invariant density: constant `pi(j)/lambda(C_j)` on cell `C_j`.
    pub fn exact_density(&self) -> PiecewiseConstantDensity {
        let mut breakpoints: Vec<f64> = self.cells.iter().map(|c| c.lo).collect();
        breakpoints.push(self.cells.last().unwrap().hi);
        let values: Vec<f64> = self
            .cells
            .iter()
            .zip(&self.stationary)
            .map(|(c, pi)| pi / c.length())
            .collect();
        PiecewiseConstantDensity::normalized(breakpoints, values)
            .expect("stationary vector yields a valid density")
    }

    /// Entropy of the stationary chain, `-sum_i pi_i sum_j p_ij ln p_ij`.
    pub fn chain_entropy(&self) -> f64 {
        let mut acc = 0.0;
        for (pi, row) in self.stationary.iter().zip(&self.transition) {
            for &p in row {
                if p > 0.0 {
                    acc -= pi * p * p.ln();
                }
            }
        }
        acc
    }

    /// `ln beta - mu(S) * (p ln p + (1-p) ln(1-p))` with `mu(S)` the
    /// stationary switch mass; reported for comparison with
    /// [`chain_entropy`], not asserted.
    pub fn conjecture_entropy(&self) -> f64 {
        let p = self.params.p();
        self.params.beta().ln() - self.switch_mass() * (p * p.ln() + (1.0 - p) * (1.0 - p).ln())
    }

    /// Serializable snapshot of the whole model.
    pub fn export(&self) -> MarkovModelExport {
        MarkovModelExport {
            beta: self.params.beta(),
            p: self.params.p(),
            pattern: self.pattern.coefficients().to_vec(),
            quadratic: self.pattern.quadratic(),
            cells: self.cells.iter().map(|c| [c.lo, c.hi]).collect(),
            kinds: self.kinds.clone(),
            equality_sets: self.equality_sets.clone(),
            switch_states: self.switch_states.clone(),
            adjacency: self.adjacency.clone(),
            transition: self.transition.clone(),
            stationary: self.stationary.clone(),
            stationary_residual: self.stationary_residual(),
            aperiodic: self.is_aperiodic(),
            entropy: EntropyExport {
                closed_form: entropy_closed_form(&self.params).ok(),
                chain: self.chain_entropy(),
                conjecture: self.conjecture_entropy(),
            },
        }
    }
}

fn bool_mat_mul(a: &[Vec<u8>], b: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let n = a.len();
    let mut out = vec![vec![0u8; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == 1 {
                for j in 0..n {
                    if b[k][j] == 1 {
                        out[i][j] = 1;
                    }
                }
            }
        }
    }
    out
}

/// Closed-form entropy for bases with `beta^2 = b_1*beta + 1`:
/// `ln beta - b_1/(1+beta^2) * (p ln p + (1-p) ln(1-p))`.
pub fn entropy_closed_form(params: &BetaParams) -> Result<f64> {
    let beta = params.beta();
    let b1 = f64::from(params.floor_beta());
    if (beta * beta - b1 * beta - 1.0).abs() > QUADRATIC_TOL {
        return Err(Error::HypothesisNotMet(format!(
            "closed-form entropy needs beta^2 = b_1*beta + 1; beta = {beta}"
        )));
    }
    let p = params.p();
    Ok(beta.ln() - b1 / (1.0 + beta * beta) * (p * p.ln() + (1.0 - p) * (1.0 - p).ln()))
}

/// Export schema for the CLI.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovModelExport {
    pub beta: f64,
    pub p: f64,
    pub pattern: Vec<u32>,
    pub quadratic: bool,
    pub cells: Vec<[f64; 2]>,
    pub kinds: Vec<CellKind>,
    pub equality_sets: Vec<Vec<usize>>,
    pub switch_states: Vec<usize>,
    pub adjacency: Vec<Vec<u8>>,
    pub transition: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub stationary_residual: f64,
    pub aperiodic: bool,
    pub entropy: EntropyExport,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyExport {
    pub closed_form: Option<f64>,
    pub chain: f64,
    pub conjecture: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{BetaParams, GOLDEN, SILVER, TRIBONACCI};
    use crate::regions::build_regions;

    fn partition(beta: f64, p: f64) -> RegionPartition {
        build_regions(BetaParams::new(beta, p).unwrap())
    }

    fn finite_pattern(part: &RegionPartition) -> GreedyOnePattern {
        match greedy_expansion_of_one(part, DEFAULT_ONE_EXPANSION_MAX_ITER, 1e-10) {
            OneExpansion::Finite(p) => p,
            OneExpansion::NotFinite { .. } => panic!("expected a finite expansion"),
        }
    }

    #[test]
    fn golden_expansion_of_one() {
        let part = partition(GOLDEN, 0.5);
        let pattern = finite_pattern(&part);
        assert_eq!(pattern.coefficients(), &[1, 1]);
        assert!(pattern.all_positive());
        assert!(pattern.quadratic());
    }

    #[test]
    fn three_halves_is_not_finite() {
        let part = partition(1.5, 0.5);
        match greedy_expansion_of_one(&part, 64, 1e-10) {
            OneExpansion::NotFinite { iterations, .. } => assert_eq!(iterations, 64),
            OneExpansion::Finite(p) => panic!("unexpected finite pattern {p:?}"),
        }
    }

    #[test]
    fn tribonacci_expansion_of_one() {
        let part = partition(TRIBONACCI, 0.5);
        let pattern = finite_pattern(&part);
        assert_eq!(pattern.coefficients(), &[1, 1, 1]);
        assert!(pattern.all_positive());
        assert!(!pattern.quadratic());
    }

    #[test]
    fn orbit_points_hold_for_worked_bases() {
        for beta in [GOLDEN, SILVER, TRIBONACCI] {
            let part = partition(beta, 0.5);
            let pattern = finite_pattern(&part);
            let orbits = orbit_points(&part, &pattern).unwrap();
            let n = pattern.len();
            assert!(orbits.one_orbit[n].abs() <= GEOMETRY_TOL);
            let c = part.params().j_max() - 1.0;
            assert!((orbits.complement_orbit[n] - c).abs() <= GEOMETRY_TOL);
        }
    }

    #[test]
    fn tribonacci_orbit_lands_in_interiors() {
        let part = partition(TRIBONACCI, 0.5);
        let pattern = finite_pattern(&part);
        let orbits = orbit_points(&part, &pattern).unwrap();
        assert_eq!(orbits.boundary_landings, 0);
        // T(1) = beta - 1 is in the last equality region.
        assert!((orbits.one_orbit[1] - (TRIBONACCI - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn golden_model_matches_worked_example() {
        let p = 0.3;
        let part = partition(GOLDEN, p);
        let model = build_model(&part, &finite_pattern(&part)).unwrap();
        let g = GOLDEN - 1.0;
        assert_eq!(model.num_states(), 3);
        let expected = [[g, g * g, 0.0], [p, 0.0, 1.0 - p], [0.0, g * g, g]];
        for (i, row) in expected.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert!(
                    (model.transition()[i][j] - want).abs() < 1e-12,
                    "P[{i}][{j}]"
                );
            }
        }
        let expected_a = [[1, 1, 0], [1, 0, 1], [0, 1, 1]];
        for (i, row) in expected_a.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert_eq!(model.adjacency()[i][j], *want, "A[{i}][{j}]");
            }
        }
        // pi(s_1) = 1/(1+beta^2) regardless of p.
        assert!((model.stationary()[1] - 1.0 / (1.0 + GOLDEN * GOLDEN)).abs() < 1e-12);
        assert!(model.stationary_residual() <= 1e-12);
        assert!(model.is_aperiodic());
    }

    #[test]
    fn golden_exact_density_values() {
        let part = partition(GOLDEN, 0.5);
        let model = build_model(&part, &finite_pattern(&part)).unwrap();
        let d = model.exact_density();
        let vals = d.values();
        assert_eq!(vals.len(), 3);
        assert!((vals[0] - 0.585410).abs() < 1e-6);
        assert!((vals[1] - 0.723607).abs() < 1e-6);
        assert!((vals[2] - 0.585410).abs() < 1e-6);
        assert!((d.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn silver_model_structure() {
        let part = partition(SILVER, 0.5);
        let pattern = finite_pattern(&part);
        assert_eq!(pattern.coefficients(), &[2, 1]);
        let model = build_model(&part, &pattern).unwrap();
        // Five cells: E0, S1, E1, S2, E2.
        assert_eq!(model.num_states(), 5);
        assert_eq!(model.switch_states(), &[1, 3]);
        let pi = model.stationary();
        let target = 1.0 / (1.0 + SILVER * SILVER);
        assert!((pi[1] - target).abs() < 1e-12);
        assert!((pi[3] - target).abs() < 1e-12);
    }

    #[test]
    fn tribonacci_model_structure() {
        let part = partition(TRIBONACCI, 0.5);
        let model = build_model(&part, &finite_pattern(&part)).unwrap();
        assert_eq!(model.num_states(), 7);
        assert_eq!(model.equality_sets()[0].len(), 3);
        assert_eq!(model.equality_sets()[1].len(), 3);
        assert_eq!(model.switch_states(), &[3]);
        assert!(model.stationary_residual() <= 1e-12);
        assert!(model.stationary().iter().all(|x| *x > 0.0));
        assert!(model.is_aperiodic());
        // Rows of P are stochastic.
        for row in model.transition() {
            let s: f64 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_closed_form_golden() {
        let params = BetaParams::new(GOLDEN, 0.5).unwrap();
        let h = entropy_closed_form(&params).unwrap();
        let expected = GOLDEN.ln() + (1.0 / (1.0 + GOLDEN * GOLDEN)) * std::f64::consts::LN_2;
        assert!((h - expected).abs() < 1e-15);
        assert!((h - 0.672793).abs() < 1e-6);
    }

    #[test]
    fn entropy_closed_form_silver() {
        let params = BetaParams::new(SILVER, 0.5).unwrap();
        let h = entropy_closed_form(&params).unwrap();
        let expected = SILVER.ln() + (2.0 / (1.0 + SILVER * SILVER)) * std::f64::consts::LN_2;
        assert!((h - expected).abs() < 1e-15);
        // Below the maximal entropy ln(1 + floor(beta)).
        assert!(h < 3.0_f64.ln());
    }

    #[test]
    fn entropy_closed_form_rejects_tribonacci() {
        let params = BetaParams::new(TRIBONACCI, 0.5).unwrap();
        assert!(matches!(
            entropy_closed_form(&params),
            Err(Error::HypothesisNotMet(_))
        ));
    }

    #[test]
    fn chain_entropy_matches_closed_form_on_quadratic_bases() {
        for (beta, p) in [(GOLDEN, 0.5), (GOLDEN, 0.3), (SILVER, 0.5), (SILVER, 0.3)] {
            let part = partition(beta, p);
            let model = build_model(&part, &finite_pattern(&part)).unwrap();
            let closed = entropy_closed_form(part.params()).unwrap();
            assert!(
                (model.chain_entropy() - closed).abs() < 1e-9,
                "beta {beta} p {p}"
            );
            // On quadratic bases the conjectured formula is the closed form.
            assert!((model.conjecture_entropy() - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn conjecture_entropy_algebra_at_half() {
        // At p = 1/2 the conjectured value is ln(beta) + mu(S) ln 2.
        for beta in [GOLDEN, TRIBONACCI] {
            let part = partition(beta, 0.5);
            let model = build_model(&part, &finite_pattern(&part)).unwrap();
            let expected = beta.ln() + model.switch_mass() * std::f64::consts::LN_2;
            assert!((model.conjecture_entropy() - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn tribonacci_reports_both_entropies() {
        // Outside the quadratic case the conjectured formula is an
        // experimental output next to the chain entropy, not an identity
        // we assert.
        let part = partition(TRIBONACCI, 0.5);
        let model = build_model(&part, &finite_pattern(&part)).unwrap();
        let chain = model.chain_entropy();
        let conjecture = model.conjecture_entropy();
        assert!(chain.is_finite() && chain > 0.0);
        assert!(conjecture.is_finite() && conjecture > 0.0);
        assert!(chain < 2.0_f64.ln());
    }

    #[test]
    fn adjacency_agrees_with_transition_support() {
        for beta in [GOLDEN, SILVER, TRIBONACCI] {
            let part = partition(beta, 0.5);
            let model = build_model(&part, &finite_pattern(&part)).unwrap();
            for i in 0..model.num_states() {
                for j in 0..model.num_states() {
                    assert_eq!(
                        model.adjacency()[i][j] == 1,
                        model.transition()[i][j] > 0.0,
                        "beta {beta} at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn deterministic_chain_has_zero_entropy() {
        let part = partition(GOLDEN, 0.5);
        let mut model = build_model(&part, &finite_pattern(&part)).unwrap();
        // Overwrite with a deterministic cycle to pin the convention.
        model.transition = vec![
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0],
        ];
        model.stationary = vec![1.0 / 3.0; 3];
        assert_eq!(model.chain_entropy(), 0.0);
    }

    #[test]
    fn build_model_rejects_zero_coefficients() {
        // beta with 1 = 1/beta + 1/beta^3 has pattern (1, 0, 1).
        let beta = 1.465571231876768; // root of x^3 = x^2 + 1
        let part = partition(beta, 0.5);
        let pattern = finite_pattern(&part);
        assert_eq!(pattern.coefficients(), &[1, 0, 1]);
        assert!(!pattern.all_positive());
        assert!(matches!(
            build_model(&part, &pattern),
            Err(Error::HypothesisNotMet(_))
        ));
    }

    #[test]
    fn reflection_swaps_p_in_exact_density() {
        for beta in [GOLDEN, TRIBONACCI] {
            let part_p = partition(beta, 0.3);
            let part_q = partition(beta, 0.7);
            let d_p = build_model(&part_p, &finite_pattern(&part_p))
                .unwrap()
                .exact_density();
            let d_q = build_model(&part_q, &finite_pattern(&part_q))
                .unwrap()
                .exact_density();
            assert!(d_p.reflected().l1_distance(&d_q) < 1e-12, "beta {beta}");
        }
    }
}
