//! Multi-dimensional optimal auction over discrete (cost, duration) types.
//!
//! A bidder's private type is a pair `(c, d)`: its forwarding cost and the
//! duration bin of its predicted path lifetime. Types are drawn from a finite
//! grid with a joint pmf. The auction selects the bid with the minimum
//! *virtual valuation* `vv = c + (1 - F) / f(c|d)` and pays the winner so
//! that the interim expected payment matches the closed-form optimal rule
//! `p = c*a + sum of allocations at higher costs` (gap-weighted on grids
//! with non-unit cost steps).

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when deciding that two virtual valuations tie.
pub const VV_TIE_REL_TOL: f64 = 1e-12;

/// Absolute tolerance for pmf normalization checks.
const PMF_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error("invalid type space: {0}")]
    InvalidTypeSpace(String),
    #[error("unsupported type: ({cost}, bin {duration_bin}) is not on the grid")]
    UnsupportedType { cost: u32, duration_bin: usize },
    #[error("auction requires at least one bidder")]
    ZeroBidders,
    #[error("empty bid list")]
    EmptyBidList,
    #[error("bid count {got} does not match tables built for {expected} bidders")]
    BidderCountMismatch { expected: usize, got: usize },
    #[error("bidder {bidder} declared a type off the grid")]
    OffGridBid { bidder: usize },
    #[error("zero-measure winner: allocation probability is 0 for the winning type")]
    ZeroMeasureWinner,
    #[error("table dimensions do not match the type space")]
    DimensionMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A bidder's type: forwarding cost in abstract cost units and the index of
/// the duration bin its predicted path duration falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentType {
    pub cost: u32,
    pub duration_bin: usize,
}

impl AgentType {
    pub fn new(cost: u32, duration_bin: usize) -> Self {
        Self { cost, duration_bin }
    }

    /// Partial order on types: `self` dominates `other` when it has a cost
    /// no higher and a duration bin no lower, and the two differ.
    pub fn dominates(&self, other: &AgentType) -> bool {
        (self.cost <= other.cost && self.duration_bin >= other.duration_bin) && self != other
    }
}

/// Discrete grid of (cost, duration-bin) types with a joint pmf.
///
/// Rows of the pmf index the cost grid, columns index duration bins. Every
/// cell must carry strictly positive mass: the hazard rate and virtual
/// valuation are undefined on structural zeros, so such spaces are rejected
/// at construction.
#[derive(Debug, Clone)]
pub struct TypeSpace {
    cost_grid: Vec<u32>,
    duration_bounds: Vec<f64>,
    pmf: Vec<Vec<f64>>,
    independent: bool,
    // Derived quantities, fixed at construction.
    bin_pmf: Vec<f64>,
    cond: Vec<Vec<f64>>,
    lower_tail: Vec<Vec<f64>>,
}

/// On-disk form of a [`TypeSpace`]; see the repository README for the schema.
#[derive(Debug, Serialize, Deserialize)]
struct TypeSpaceDoc {
    cost_grid: Vec<u32>,
    duration_bins: Vec<f64>,
    pmf: Vec<Vec<f64>>,
    independence: bool,
}

impl TypeSpace {
    /// Builds a type space from a cost grid, duration-bin boundaries
    /// (`num_bins + 1` ascending values, seconds) and a joint pmf with one
    /// row per cost and one column per bin.
    pub fn new(
        cost_grid: Vec<u32>,
        duration_bounds: Vec<f64>,
        pmf: Vec<Vec<f64>>,
        independent: bool,
    ) -> Result<Self, MechanismError> {
        let invalid = |msg: String| MechanismError::InvalidTypeSpace(msg);
        if cost_grid.is_empty() {
            return Err(invalid("cost grid is empty".into()));
        }
        if !cost_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("cost grid must be strictly increasing".into()));
        }
        if duration_bounds.len() < 2 {
            return Err(invalid(
                "duration grid needs at least two boundaries (one bin)".into(),
            ));
        }
        if !duration_bounds
            .windows(2)
            .all(|w| w[0].is_finite() && w[1].is_finite() && w[0] < w[1])
        {
            return Err(invalid(
                "duration boundaries must be finite and strictly increasing".into(),
            ));
        }
        let num_bins = duration_bounds.len() - 1;
        if pmf.len() != cost_grid.len() || pmf.iter().any(|row| row.len() != num_bins) {
            return Err(invalid(format!(
                "pmf must be {}x{} (costs x bins)",
                cost_grid.len(),
                num_bins
            )));
        }
        let mut total = 0.0;
        for row in &pmf {
            for &v in row {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(invalid(
                        "every pmf cell must be strictly positive and finite".into(),
                    ));
                }
                total += v;
            }
        }
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(invalid(format!("pmf sums to {total}, expected 1")));
        }

        let bin_pmf: Vec<f64> = (0..num_bins)
            .map(|j| pmf.iter().map(|row| row[j]).sum())
            .collect();

        if independent {
            let cost_pmf: Vec<f64> = pmf.iter().map(|row| row.iter().sum()).collect();
            for (i, row) in pmf.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    if (v - cost_pmf[i] * bin_pmf[j]).abs() > PMF_SUM_TOL {
                        return Err(invalid(
                            "independence flag set but pmf is not the product of its marginals"
                                .into(),
                        ));
                    }
                }
            }
        }

        // Conditional density f(c|d). For independent spaces the conditional
        // is the cost marginal itself, computed once so it is bitwise
        // identical across bins and vv ties across bins are exact.
        let cond: Vec<Vec<f64>> = if independent {
            let cost_pmf: Vec<f64> = pmf.iter().map(|row| row.iter().sum()).collect();
            let norm: f64 = cost_pmf.iter().sum();
            let shared: Vec<f64> = cost_pmf.iter().map(|&v| v / norm).collect();
            shared
                .iter()
                .map(|&v| std::iter::repeat(v).take(num_bins).collect())
                .collect()
        } else {
            pmf.iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .map(|(j, &v)| v / bin_pmf[j])
                        .collect()
                })
                .collect()
        };

        // lower_tail[i][j] = sum_{k <= i} f(c_k | d_j) = 1 - F_{c_i, d_j}.
        let mut lower_tail = vec![vec![0.0; num_bins]; cost_grid.len()];
        for j in 0..num_bins {
            let mut acc = 0.0;
            for i in 0..cost_grid.len() {
                acc += cond[i][j];
                lower_tail[i][j] = acc;
            }
        }

        Ok(Self {
            cost_grid,
            duration_bounds,
            pmf,
            independent,
            bin_pmf,
            cond,
            lower_tail,
        })
    }

    /// Builds an independent-type space from a cost marginal and a duration
    /// marginal; the joint pmf is their outer product.
    pub fn independent(
        cost_grid: Vec<u32>,
        cost_pmf: Vec<f64>,
        duration_bounds: Vec<f64>,
        bin_pmf: Vec<f64>,
    ) -> Result<Self, MechanismError> {
        if cost_pmf.len() != cost_grid.len() {
            return Err(MechanismError::InvalidTypeSpace(
                "cost marginal length does not match cost grid".into(),
            ));
        }
        if bin_pmf.len() + 1 != duration_bounds.len() {
            return Err(MechanismError::InvalidTypeSpace(
                "duration marginal length does not match bin boundaries".into(),
            ));
        }
        let pmf: Vec<Vec<f64>> = cost_pmf
            .iter()
            .map(|&fc| bin_pmf.iter().map(|&fd| fc * fd).collect())
            .collect();
        Self::new(cost_grid, duration_bounds, pmf, true)
    }

    pub fn num_costs(&self) -> usize {
        self.cost_grid.len()
    }

    pub fn num_bins(&self) -> usize {
        self.duration_bounds.len() - 1
    }

    pub fn cost_grid(&self) -> &[u32] {
        &self.cost_grid
    }

    pub fn duration_bounds(&self) -> &[f64] {
        &self.duration_bounds
    }

    pub fn joint_pmf(&self) -> &[Vec<f64>] {
        &self.pmf
    }

    pub fn is_independent(&self) -> bool {
        self.independent
    }

    /// Mass of the duration marginal in bin `j`.
    pub fn bin_mass(&self, j: usize) -> f64 {
        self.bin_pmf[j]
    }

    /// Grid index of a cost value, if present.
    pub fn cost_index(&self, cost: u32) -> Option<usize> {
        self.cost_grid.binary_search(&cost).ok()
    }

    /// Grid coordinates of a type, if it lies on the grid.
    pub fn index_of(&self, t: &AgentType) -> Option<(usize, usize)> {
        let i = self.cost_index(t.cost)?;
        (t.duration_bin < self.num_bins()).then_some((i, t.duration_bin))
    }

    /// The type at grid coordinates (i, j).
    pub fn type_at(&self, i: usize, j: usize) -> AgentType {
        AgentType::new(self.cost_grid[i], j)
    }

    /// Iterates over all grid types in row-major order.
    pub fn types(&self) -> impl Iterator<Item = AgentType> + '_ {
        (0..self.num_costs())
            .flat_map(move |i| (0..self.num_bins()).map(move |j| self.type_at(i, j)))
    }

    /// Duration bin containing `seconds`, snapping out-of-range values to the
    /// boundary bins. `+inf` and anything past the last boundary land in the
    /// top bin.
    pub fn bin_for_duration(&self, seconds: f64) -> usize {
        let n = self.num_bins();
        if seconds <= self.duration_bounds[0] {
            return 0;
        }
        for j in 0..n {
            if seconds < self.duration_bounds[j + 1] {
                return j;
            }
        }
        n - 1
    }

    fn indices(&self, t: &AgentType) -> Result<(usize, usize), MechanismError> {
        self.index_of(t).ok_or(MechanismError::UnsupportedType {
            cost: t.cost,
            duration_bin: t.duration_bin,
        })
    }

    /// Conditional density f(c|d) at grid coordinates.
    pub fn conditional(&self, i: usize, j: usize) -> f64 {
        self.cond[i][j]
    }

    /// Hazard rate f(c|d) / (1 - F_{c,d}), where F is the conditional mass
    /// strictly above c at the same duration bin.
    pub fn hazard_rate(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.indices(t)?;
        Ok(self.cond[i][j] / self.lower_tail[i][j])
    }

    /// Virtual valuation vv = c + (1 - F_{c,d}) / f(c|d).
    pub fn virtual_valuation(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.indices(t)?;
        Ok(self.vv_at(i, j))
    }

    fn vv_at(&self, i: usize, j: usize) -> f64 {
        self.cost_grid[i] as f64 + self.lower_tail[i][j] / self.cond[i][j]
    }

    /// Virtual valuations for the whole grid.
    pub fn virtual_valuation_matrix(&self) -> Vec<Vec<f64>> {
        (0..self.num_costs())
            .map(|i| (0..self.num_bins()).map(|j| self.vv_at(i, j)).collect())
            .collect()
    }

    /// Checks the monotone hazard rate condition: whenever type `x` dominates
    /// type `y` (lower cost, higher duration), `hazard(x) >= hazard(y)`.
    /// Violating pairs are reported rather than treated as an error.
    pub fn check_monotone_hazard(&self) -> HazardCheck {
        let mut violations = Vec::new();
        let all: Vec<AgentType> = self.types().collect();
        for x in &all {
            for y in &all {
                if x.dominates(y) {
                    let hx = self.hazard_rate(x).expect("grid type");
                    let hy = self.hazard_rate(y).expect("grid type");
                    if hx < hy - 1e-12 {
                        violations.push((*x, *y));
                    }
                }
            }
        }
        HazardCheck {
            monotone: violations.is_empty(),
            violations,
        }
    }

    /// Serializes to the documented JSON schema.
    pub fn to_json(&self) -> Result<String, MechanismError> {
        let doc = TypeSpaceDoc {
            cost_grid: self.cost_grid.clone(),
            duration_bins: self.duration_bounds.clone(),
            pmf: self.pmf.clone(),
            independence: self.independent,
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, MechanismError> {
        let doc: TypeSpaceDoc = serde_json::from_str(text)?;
        Self::new(doc.cost_grid, doc.duration_bins, doc.pmf, doc.independence)
    }

    pub fn save(&self, path: &Path) -> Result<(), MechanismError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MechanismError> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_json(&text)
    }
}

/// Result of the monotone hazard rate check.
#[derive(Debug, Clone)]
pub struct HazardCheck {
    pub monotone: bool,
    /// Pairs (x, y) with x dominating y but hazard(x) < hazard(y).
    pub violations: Vec<(AgentType, AgentType)>,
}

/// Two virtual valuations are considered tied when equal up to a relative
/// tolerance; exact equality is the common case on rational pmf inputs.
pub fn vv_tie(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= VV_TIE_REL_TOL * a.abs().max(b.abs()).max(1.0)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (i + 1) as f64;
    }
    out
}

/// Win probability of type `t` against `n - 1` i.i.d. opponents drawn from
/// the joint pmf, with uniform tie-breaking among minimal virtual valuations.
pub fn expected_allocation(ts: &TypeSpace, n: usize, t: &AgentType) -> Result<f64, MechanismError> {
    if n == 0 {
        return Err(MechanismError::ZeroBidders);
    }
    let (i, j) = ts.indices(t)?;
    let vv = ts.virtual_valuation_matrix();
    Ok(allocation_from_vv(ts, &vv, n, i, j))
}

fn allocation_from_vv(ts: &TypeSpace, vv: &[Vec<f64>], n: usize, i: usize, j: usize) -> f64 {
    let own = vv[i][j];
    let mut q_tie = 0.0;
    let mut q_above = 0.0;
    for (r, row) in vv.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            if vv_tie(v, own) {
                q_tie += ts.pmf[r][c];
            } else if v > own {
                q_above += ts.pmf[r][c];
            }
        }
    }
    let opponents = n - 1;
    let mut a = 0.0;
    for ties in 0..=opponents {
        a += binomial(opponents, ties)
            * q_tie.powi(ties as i32)
            * q_above.powi((opponents - ties) as i32)
            / (ties + 1) as f64;
    }
    a
}

/// Closed-form optimal interim payment given the allocation matrix: at fixed
/// duration bin `j`, `p = c_i * a[i][j] + sum_{k > i} (c_k - c_{k-1}) * a[k][j]`.
/// On a consecutive integer grid the weights are all 1.
fn payments_from_allocation(cost_grid: &[u32], alloc: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let m = cost_grid.len();
    let bins = alloc[0].len();
    let mut premium = vec![vec![0.0; bins]; m];
    let mut payment = vec![vec![0.0; bins]; m];
    for j in 0..bins {
        let mut suffix = 0.0;
        for i in (0..m).rev() {
            premium[i][j] = suffix;
            payment[i][j] = cost_grid[i] as f64 * alloc[i][j] + suffix;
            if i > 0 {
                suffix += (cost_grid[i] - cost_grid[i - 1]) as f64 * alloc[i][j];
            }
        }
    }
    (payment, premium)
}

/// Per-(type space, bidder count) tables of virtual valuations, expected
/// allocations and optimal interim payments. Immutable after construction.
#[derive(Debug, Clone)]
pub struct MechanismTables {
    type_space: Arc<TypeSpace>,
    n_bidders: usize,
    virtual_values: Vec<Vec<f64>>,
    allocations: Vec<Vec<f64>>,
    payments: Vec<Vec<f64>>,
    premiums: Vec<Vec<f64>>,
}

impl MechanismTables {
    /// Builds the vv/a/p tables for `n` bidders drawing i.i.d. types from
    /// `ts`. Logs a warning when the hazard rate is not monotone, in which
    /// case the allocation rule is not guaranteed monotonic.
    pub fn build(ts: Arc<TypeSpace>, n: usize) -> Result<Self, MechanismError> {
        if n == 0 {
            return Err(MechanismError::ZeroBidders);
        }
        if !ts.check_monotone_hazard().monotone {
            log::warn!("building tables on a non-monotone-hazard type space");
        }
        let vv = ts.virtual_valuation_matrix();
        let alloc: Vec<Vec<f64>> = (0..ts.num_costs())
            .map(|i| {
                (0..ts.num_bins())
                    .map(|j| allocation_from_vv(&ts, &vv, n, i, j))
                    .collect()
            })
            .collect();
        Self::from_allocation_inner(ts, n, vv, alloc)
    }

    /// Builds tables from an externally supplied allocation matrix, filling
    /// payments with the closed-form rule. Used by the verifier to test
    /// allocation rules that do not come from the min-vv auction.
    pub fn from_allocation(
        ts: Arc<TypeSpace>,
        n: usize,
        alloc: Vec<Vec<f64>>,
    ) -> Result<Self, MechanismError> {
        let vv = ts.virtual_valuation_matrix();
        Self::from_allocation_inner(ts, n, vv, alloc)
    }

    fn from_allocation_inner(
        ts: Arc<TypeSpace>,
        n: usize,
        vv: Vec<Vec<f64>>,
        alloc: Vec<Vec<f64>>,
    ) -> Result<Self, MechanismError> {
        if alloc.len() != ts.num_costs() || alloc.iter().any(|r| r.len() != ts.num_bins()) {
            return Err(MechanismError::DimensionMismatch);
        }
        if alloc
            .iter()
            .any(|r| r.iter().any(|&a| !(0.0..=1.0 + 1e-12).contains(&a)))
        {
            return Err(MechanismError::InvalidTypeSpace(
                "allocation probabilities must lie in [0, 1]".into(),
            ));
        }
        let (payments, premiums) = payments_from_allocation(ts.cost_grid(), &alloc);
        Ok(Self {
            type_space: ts,
            n_bidders: n,
            virtual_values: vv,
            allocations: alloc,
            payments,
            premiums,
        })
    }

    /// Rebuilds tables from previously dumped matrices (e.g. a tables file).
    pub fn from_parts(
        ts: Arc<TypeSpace>,
        n: usize,
        vv: Vec<Vec<f64>>,
        alloc: Vec<Vec<f64>>,
        payments: Vec<Vec<f64>>,
    ) -> Result<Self, MechanismError> {
        let dims_ok = |m: &[Vec<f64>]| {
            m.len() == ts.num_costs() && m.iter().all(|r| r.len() == ts.num_bins())
        };
        if !dims_ok(&vv) || !dims_ok(&alloc) || !dims_ok(&payments) {
            return Err(MechanismError::DimensionMismatch);
        }
        let premiums = payments
            .iter()
            .zip(alloc.iter())
            .enumerate()
            .map(|(i, (prow, arow))| {
                prow.iter()
                    .zip(arow.iter())
                    .map(|(&p, &a)| p - ts.cost_grid()[i] as f64 * a)
                    .collect()
            })
            .collect();
        Ok(Self {
            type_space: ts,
            n_bidders: n,
            virtual_values: vv,
            allocations: alloc,
            payments,
            premiums,
        })
    }

    pub fn type_space(&self) -> &Arc<TypeSpace> {
        &self.type_space
    }

    pub fn n_bidders(&self) -> usize {
        self.n_bidders
    }

    pub fn virtual_values(&self) -> &[Vec<f64>] {
        &self.virtual_values
    }

    pub fn allocations(&self) -> &[Vec<f64>] {
        &self.allocations
    }

    pub fn payments(&self) -> &[Vec<f64>] {
        &self.payments
    }

    pub fn virtual_valuation(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.type_space.indices(t)?;
        Ok(self.virtual_values[i][j])
    }

    pub fn allocation(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.type_space.indices(t)?;
        Ok(self.allocations[i][j])
    }

    /// Optimal interim expected payment to type `t` (Theorem-2 closed form).
    pub fn payment(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.type_space.indices(t)?;
        Ok(self.payments[i][j])
    }

    /// Interim premium `p - c*a` of type `t`.
    pub fn premium(&self, t: &AgentType) -> Result<f64, MechanismError> {
        let (i, j) = self.type_space.indices(t)?;
        Ok(self.premiums[i][j])
    }
}

/// A route's sealed bid: the declared (cost, duration-bin) type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub bidder_id: usize,
    pub declared: AgentType,
}

/// Outcome of one realized auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub winner: Option<usize>,
    /// Winner-only payment: `c + premium / a`, whose expectation over
    /// profiles reproduces the interim payment. Zero when nobody wins.
    pub realized_payment: f64,
    /// Interim expected payment `p` of the winning type.
    pub winner_interim_payment: f64,
    pub tie_broken: bool,
}

/// Runs one auction over realized bids: the minimum virtual valuation wins,
/// ties are broken uniformly with the caller's RNG, and the winner is paid
/// `c + premium / a` so the interim expectation matches the payment table.
pub fn run_auction<R: Rng + ?Sized>(
    bids: &[Bid],
    tables: &MechanismTables,
    rng: &mut R,
) -> Result<AuctionOutcome, MechanismError> {
    if bids.is_empty() {
        return Err(MechanismError::EmptyBidList);
    }
    if bids.len() != tables.n_bidders() {
        return Err(MechanismError::BidderCountMismatch {
            expected: tables.n_bidders(),
            got: bids.len(),
        });
    }
    let mut vvs = Vec::with_capacity(bids.len());
    for bid in bids {
        let vv = tables
            .virtual_valuation(&bid.declared)
            .map_err(|_| MechanismError::OffGridBid {
                bidder: bid.bidder_id,
            })?;
        vvs.push(vv);
    }
    let min_vv = vvs.iter().cloned().fold(f64::INFINITY, f64::min);
    let tied: Vec<usize> = (0..bids.len()).filter(|&k| vv_tie(vvs[k], min_vv)).collect();
    let pick = if tied.len() == 1 {
        tied[0]
    } else {
        tied[rng.random_range(0..tied.len())]
    };
    let winner = &bids[pick];
    let a = tables.allocation(&winner.declared)?;
    if a <= 0.0 {
        return Err(MechanismError::ZeroMeasureWinner);
    }
    let premium = tables.premium(&winner.declared)?;
    Ok(AuctionOutcome {
        winner: Some(winner.bidder_id),
        realized_payment: winner.declared.cost as f64 + premium / a,
        winner_interim_payment: tables.payment(&winner.declared)?,
        tie_broken: tied.len() > 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two costs {1, 2} with a uniform marginal and a single duration bin.
    fn two_cost_space() -> Arc<TypeSpace> {
        Arc::new(
            TypeSpace::independent(vec![1, 2], vec![0.5, 0.5], vec![0.0, 60.0], vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn hazard_rate_uniform_two_costs() {
        let ts = two_cost_space();
        assert_eq!(ts.hazard_rate(&AgentType::new(1, 0)).unwrap(), 1.0);
        assert_eq!(ts.hazard_rate(&AgentType::new(2, 0)).unwrap(), 0.5);
    }

    #[test]
    fn hazard_rate_degenerate_and_cmax() {
        let ts = TypeSpace::independent(vec![7], vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(ts.hazard_rate(&AgentType::new(7, 0)).unwrap(), 1.0);

        // At c_max the upper tail is empty, so hazard = f(c_max | d).
        let ts = TypeSpace::independent(
            vec![1, 2, 3],
            vec![0.2, 0.3, 0.5],
            vec![0.0, 1.0],
            vec![1.0],
        )
        .unwrap();
        assert!((ts.hazard_rate(&AgentType::new(3, 0)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn hazard_rate_rejects_off_grid() {
        let ts = two_cost_space();
        assert!(matches!(
            ts.hazard_rate(&AgentType::new(3, 0)),
            Err(MechanismError::UnsupportedType { .. })
        ));
        assert!(ts.hazard_rate(&AgentType::new(1, 1)).is_err());
    }

    #[test]
    fn monotone_hazard_uniform_and_skewed() {
        assert!(two_cost_space().check_monotone_hazard().monotone);

        // Skewed two-point marginal: hazard(1) = 0.1/0.1 = 1, hazard(2) = 0.9.
        let ts =
            TypeSpace::independent(vec![1, 2], vec![0.1, 0.9], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(ts.check_monotone_hazard().monotone);

        // Single type: vacuously monotone.
        let ts = TypeSpace::independent(vec![3], vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(ts.check_monotone_hazard().monotone);
    }

    #[test]
    fn monotone_hazard_violation_detected() {
        // Mass dips in the middle: hazard(2) = tiny, hazard(3) large.
        let ts = TypeSpace::independent(
            vec![1, 2, 3],
            vec![0.5, 0.01, 0.49],
            vec![0.0, 1.0],
            vec![1.0],
        )
        .unwrap();
        let check = ts.check_monotone_hazard();
        assert!(!check.monotone);
        assert!(check
            .violations
            .contains(&(AgentType::new(2, 0), AgentType::new(3, 0))));
    }

    #[test]
    fn virtual_valuation_examples() {
        let ts = two_cost_space();
        assert_eq!(ts.virtual_valuation(&AgentType::new(1, 0)).unwrap(), 2.0);
        assert_eq!(ts.virtual_valuation(&AgentType::new(2, 0)).unwrap(), 4.0);

        // Single-cost space: vv = c + 1.
        let ts = TypeSpace::independent(vec![5], vec![1.0], vec![0.0, 1.0], vec![1.0]).unwrap();
        assert_eq!(ts.virtual_valuation(&AgentType::new(5, 0)).unwrap(), 6.0);

        // At c_max: vv = c_max + 1 / f(c_max|d).
        let ts = TypeSpace::independent(
            vec![1, 2, 3],
            vec![0.25, 0.25, 0.5],
            vec![0.0, 1.0],
            vec![1.0],
        )
        .unwrap();
        assert!((ts.virtual_valuation(&AgentType::new(3, 0)).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn expected_allocation_two_cost_example() {
        let ts = two_cost_space();
        let a1 = expected_allocation(&ts, 2, &AgentType::new(1, 0)).unwrap();
        let a2 = expected_allocation(&ts, 2, &AgentType::new(2, 0)).unwrap();
        assert!((a1 - 0.75).abs() < 1e-15);
        assert!((a2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn expected_allocation_sole_bidder_and_zero_bidders() {
        let ts = two_cost_space();
        for t in ts.types() {
            assert_eq!(expected_allocation(&ts, 1, &t).unwrap(), 1.0);
        }
        assert!(matches!(
            expected_allocation(&ts, 0, &AgentType::new(1, 0)),
            Err(MechanismError::ZeroBidders)
        ));
    }

    /// Exhaustive profile-enumeration oracle for the win probability of a
    /// fixed bidder against n-1 i.i.d. opponents.
    fn allocation_by_enumeration(ts: &TypeSpace, n: usize, t: &AgentType) -> f64 {
        let cells: Vec<(AgentType, f64)> = ts
            .types()
            .map(|u| {
                let (i, j) = ts.index_of(&u).unwrap();
                (u, ts.joint_pmf()[i][j])
            })
            .collect();
        let own = ts.virtual_valuation(t).unwrap();
        let mut total = 0.0;
        let opp = n - 1;
        let mut idx = vec![0usize; opp];
        loop {
            let mut prob = 1.0;
            let mut ties = 0usize;
            let mut beaten = true;
            for &k in &idx {
                let (u, p) = &cells[k];
                prob *= p;
                let v = ts.virtual_valuation(u).unwrap();
                if vv_tie(v, own) {
                    ties += 1;
                } else if v < own {
                    beaten = false;
                }
            }
            if beaten {
                total += prob / (ties + 1) as f64;
            }
            // Advance the mixed-radix counter.
            let mut pos = 0;
            loop {
                if pos == opp {
                    return total;
                }
                idx[pos] += 1;
                if idx[pos] < cells.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn expected_allocation_matches_enumeration_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = rng.random_range(1..=3usize);
            let b = rng.random_range(1..=2usize);
            let numer: Vec<u32> = (0..m * b).map(|_| rng.random_range(1..=64)).collect();
            let total: u32 = numer.iter().sum();
            let pmf: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    (0..b)
                        .map(|j| numer[i * b + j] as f64 / total as f64)
                        .collect()
                })
                .collect();
            let bounds: Vec<f64> = (0..=b).map(|j| j as f64 * 10.0).collect();
            let grid: Vec<u32> = (1..=m as u32).collect();
            let ts = TypeSpace::new(grid, bounds, pmf, false).unwrap();
            let n = rng.random_range(1..=3usize);
            for t in ts.types() {
                let fast = expected_allocation(&ts, n, &t).unwrap();
                let slow = allocation_by_enumeration(&ts, n, &t);
                assert!(
                    (fast - slow).abs() < 1e-12,
                    "allocation mismatch: {fast} vs {slow}"
                );
            }
        }
    }

    #[test]
    fn build_tables_two_cost_example() {
        let ts = two_cost_space();
        let tables = MechanismTables::build(ts, 2).unwrap();
        assert!((tables.payment(&AgentType::new(1, 0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((tables.payment(&AgentType::new(2, 0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(tables.virtual_values()[0][0], 2.0);
        assert_eq!(tables.virtual_values()[1][0], 4.0);
    }

    #[test]
    fn payment_boundary_cases() {
        // At c_max the suffix is empty: p = c_max * a.
        let ts = two_cost_space();
        let tables = MechanismTables::build(ts.clone(), 3).unwrap();
        let a_max = tables.allocation(&AgentType::new(2, 0)).unwrap();
        assert_eq!(tables.payment(&AgentType::new(2, 0)).unwrap(), 2.0 * a_max);

        // An all-zero allocation row at and above some cost pays zero there.
        let ts3 = Arc::new(
            TypeSpace::independent(
                vec![1, 2, 3],
                vec![0.25, 0.5, 0.25],
                vec![0.0, 1.0],
                vec![1.0],
            )
            .unwrap(),
        );
        let alloc = vec![vec![0.9], vec![0.0], vec![0.0]];
        let t = MechanismTables::from_allocation(ts3, 2, alloc).unwrap();
        assert_eq!(t.payment(&AgentType::new(2, 0)).unwrap(), 0.0);
        assert_eq!(t.payment(&AgentType::new(3, 0)).unwrap(), 0.0);
    }

    #[test]
    fn tables_depend_only_on_space_and_bidders() {
        let ts = two_cost_space();
        let t1 = MechanismTables::build(ts.clone(), 2).unwrap();
        let t2 = MechanismTables::build(ts, 2).unwrap();
        assert_eq!(t1.payments(), t2.payments());
        assert_eq!(t1.allocations(), t2.allocations());

        // Relabeling duration bins (same masses) leaves all tables unchanged.
        let a = TypeSpace::independent(
            vec![1, 2],
            vec![0.5, 0.5],
            vec![0.0, 30.0, 60.0],
            vec![0.25, 0.75],
        )
        .unwrap();
        let b = TypeSpace::independent(
            vec![1, 2],
            vec![0.5, 0.5],
            vec![0.0, 300.0, 600.0],
            vec![0.25, 0.75],
        )
        .unwrap();
        let ta = MechanismTables::build(Arc::new(a), 3).unwrap();
        let tb = MechanismTables::build(Arc::new(b), 3).unwrap();
        assert_eq!(ta.payments(), tb.payments());
        assert_eq!(ta.allocations(), tb.allocations());
        assert_eq!(ta.virtual_values(), tb.virtual_values());
    }

    #[test]
    fn run_auction_two_cost_example() {
        let ts = two_cost_space();
        let tables = MechanismTables::build(ts, 2).unwrap();
        let bids = vec![
            Bid { bidder_id: 0, declared: AgentType::new(1, 0) },
            Bid { bidder_id: 1, declared: AgentType::new(2, 0) },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = run_auction(&bids, &tables, &mut rng).unwrap();
        assert_eq!(out.winner, Some(0));
        assert!(!out.tie_broken);
        assert!((out.realized_payment - 4.0 / 3.0).abs() < 1e-12);
        // Expectation check: realized * a = interim payment.
        assert!((out.realized_payment * 0.75 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn run_auction_tie_split_is_even() {
        let ts = two_cost_space();
        let tables = MechanismTables::build(ts, 2).unwrap();
        let bids = vec![
            Bid { bidder_id: 0, declared: AgentType::new(2, 0) },
            Bid { bidder_id: 1, declared: AgentType::new(2, 0) },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let trials = 10_000;
        let mut wins0 = 0usize;
        for _ in 0..trials {
            let out = run_auction(&bids, &tables, &mut rng).unwrap();
            assert!(out.tie_broken);
            if out.winner == Some(0) {
                wins0 += 1;
            }
        }
        let freq = wins0 as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.02, "tie split {freq}");
    }

    #[test]
    fn run_auction_single_bidder_pays_cmax() {
        let ts = Arc::new(
            TypeSpace::independent(
                vec![1, 2, 3, 4, 5],
                vec![0.2; 5],
                vec![0.0, 1.0],
                vec![1.0],
            )
            .unwrap(),
        );
        let tables = MechanismTables::build(ts, 1).unwrap();
        let bids = vec![Bid { bidder_id: 9, declared: AgentType::new(2, 0) }];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = run_auction(&bids, &tables, &mut rng).unwrap();
        // a = 1 everywhere, so the winner pays c + (c_max - c) = c_max.
        assert_eq!(out.realized_payment, 5.0);
    }

    #[test]
    fn run_auction_error_paths() {
        let ts = two_cost_space();
        let tables = MechanismTables::build(ts, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            run_auction(&[], &tables, &mut rng),
            Err(MechanismError::EmptyBidList)
        ));
        let bids = vec![Bid { bidder_id: 0, declared: AgentType::new(1, 0) }];
        assert!(matches!(
            run_auction(&bids, &tables, &mut rng),
            Err(MechanismError::BidderCountMismatch { .. })
        ));
        let bids = vec![
            Bid { bidder_id: 0, declared: AgentType::new(1, 0) },
            Bid { bidder_id: 1, declared: AgentType::new(9, 0) },
        ];
        assert!(matches!(
            run_auction(&bids, &tables, &mut rng),
            Err(MechanismError::OffGridBid { bidder: 1 })
        ));
    }

    #[test]
    fn type_space_construction_rejects_bad_input() {
        // Structural zero.
        assert!(TypeSpace::new(vec![1, 2], vec![0.0, 1.0], vec![vec![1.0], vec![0.0]], false)
            .is_err());
        // Not normalized.
        assert!(TypeSpace::new(vec![1], vec![0.0, 1.0], vec![vec![0.9]], false).is_err());
        // Non-increasing grid.
        assert!(TypeSpace::new(
            vec![2, 2],
            vec![0.0, 1.0],
            vec![vec![0.5], vec![0.5]],
            false
        )
        .is_err());
        // Independence flag on a correlated pmf.
        assert!(TypeSpace::new(
            vec![1, 2],
            vec![0.0, 1.0, 2.0],
            vec![vec![0.4, 0.1], vec![0.1, 0.4]],
            true
        )
        .is_err());
    }

    #[test]
    fn bin_for_duration_snaps_to_grid() {
        let ts = TypeSpace::independent(
            vec![1],
            vec![1.0],
            vec![0.0, 10.0, 20.0, 30.0],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        assert_eq!(ts.bin_for_duration(0.0), 0);
        assert_eq!(ts.bin_for_duration(9.99), 0);
        assert_eq!(ts.bin_for_duration(10.0), 1);
        assert_eq!(ts.bin_for_duration(29.0), 2);
        assert_eq!(ts.bin_for_duration(30.0), 2);
        assert_eq!(ts.bin_for_duration(1e9), 2);
        assert_eq!(ts.bin_for_duration(f64::INFINITY), 2);
        assert_eq!(ts.bin_for_duration(-1.0), 0);
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let ts = TypeSpace::new(
            vec![1, 3, 4],
            vec![0.0, 12.5, 60.0],
            vec![
                vec![0.1, 0.15],
                vec![0.2, 0.05],
                vec![0.25, 0.25],
            ],
            false,
        )
        .unwrap();
        let text = ts.to_json().unwrap();
        let back = TypeSpace::from_json(&text).unwrap();
        assert_eq!(ts.cost_grid(), back.cost_grid());
        assert_eq!(ts.duration_bounds(), back.duration_bounds());
        assert_eq!(ts.joint_pmf(), back.joint_pmf());
        assert_eq!(ts.is_independent(), back.is_independent());
    }
}
