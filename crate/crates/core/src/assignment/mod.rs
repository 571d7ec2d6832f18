//! Task and power assignments, their validity conditions, and the recovery
//! thresholds they induce.
//!
//! A task assignment partitions the requested products into groups
//! `L_A^q x L_B^q`. A power assignment gives every group a vector of
//! exponents on the root factor `(x - f_q)` for each side; within a group the
//! exponent sums `P^A_i + P^B_j - |L_A^q||L_B^q|` must enumerate
//! `1..=|L_A^q||L_B^q|` so that the group's products land on distinct pole
//! orders.

mod search;

pub use search::{optimize_power, search_space_size, PowerSearch, DEFAULT_SEARCH_BUDGET};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::ComputationGraph;

/// One task group `(L_A^q, L_B^q)`; members are kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskGroup {
    left: Vec<usize>,
    right: Vec<usize>,
}

impl TaskGroup {
    pub fn new(mut left: Vec<usize>, mut right: Vec<usize>) -> Self {
        left.sort_unstable();
        left.dedup();
        right.sort_unstable();
        right.dedup();
        TaskGroup { left, right }
    }

    pub fn left(&self) -> &[usize] {
        &self.left
    }

    pub fn right(&self) -> &[usize] {
        &self.right
    }

    /// `|L_A^q| * |L_B^q|`, the number of pole orders the group occupies.
    pub fn size(&self) -> usize {
        self.left.len() * self.right.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.left
            .iter()
            .flat_map(move |&i| self.right.iter().map(move |&j| (i, j)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.left.binary_search(&i).is_ok() && self.right.binary_search(&j).is_ok()
    }
}

/// Ordered list of task groups, in canonical order (sorted by smallest
/// members) so plans serialize reproducibly.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TaskAssignment {
    groups: Vec<TaskGroup>,
}

impl TaskAssignment {
    pub fn new(mut groups: Vec<TaskGroup>) -> Self {
        groups.sort();
        TaskAssignment { groups }
    }

    pub fn groups(&self) -> &[TaskGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// `sum_q |L_A^q||L_B^q|`.
    pub fn total_size(&self) -> usize {
        self.groups.iter().map(TaskGroup::size).sum()
    }

    /// Index of the group whose product set holds `(i, j)`.
    pub fn group_of(&self, i: usize, j: usize) -> Option<usize> {
        self.groups.iter().position(|g| g.contains(i, j))
    }
}

/// Per-group exponent vectors `P^{A,q}` (length `L_A`) and `P^{B,q}`
/// (length `L_B`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PowerAssignment {
    left: Vec<Vec<u64>>,
    right: Vec<Vec<u64>>,
}

impl PowerAssignment {
    pub fn new(left: Vec<Vec<u64>>, right: Vec<Vec<u64>>) -> Self {
        PowerAssignment { left, right }
    }

    /// Orientation (i) with members ranked in index order: the k-th left
    /// member gets `d - k + 1`, the k-th right member `k * |L_A^q|`.
    pub fn identity(tasks: &TaskAssignment, left_count: usize, right_count: usize) -> Self {
        let mut left = vec![vec![0; left_count]; tasks.len()];
        let mut right = vec![vec![0; right_count]; tasks.len()];
        for (q, g) in tasks.groups().iter().enumerate() {
            let d = g.size() as u64;
            let na = g.left().len() as u64;
            for (k, &i) in g.left().iter().enumerate() {
                left[q][i] = d - k as u64;
            }
            for (k, &j) in g.right().iter().enumerate() {
                right[q][j] = (k as u64 + 1) * na;
            }
        }
        PowerAssignment { left, right }
    }

    pub fn left(&self) -> &[Vec<u64>] {
        &self.left
    }

    pub fn right(&self) -> &[Vec<u64>] {
        &self.right
    }

    /// `sum_q P^{A,q}_i` for every left vertex `i`.
    pub fn left_sums(&self, left_count: usize) -> Vec<u64> {
        column_sums(&self.left, left_count)
    }

    /// `sum_q P^{B,q}_j` for every right vertex `j`.
    pub fn right_sums(&self, right_count: usize) -> Vec<u64> {
        column_sums(&self.right, right_count)
    }

    /// `min_i sum_q P^{A,q}_i + min_j sum_q P^{B,q}_j`, the quantity the
    /// optimizer maximizes.
    pub fn objective(&self, left_count: usize, right_count: usize) -> u64 {
        let a = self.left_sums(left_count).into_iter().min().unwrap_or(0);
        let b = self.right_sums(right_count).into_iter().min().unwrap_or(0);
        a + b
    }
}

fn column_sums(rows: &[Vec<u64>], n: usize) -> Vec<u64> {
    let mut sums = vec![0; n];
    for row in rows {
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    sums
}

/// Which side of a group carries the descending run `d, d-1, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    /// Left powers `d - x + 1`, right powers `y * |L_A^q|`.
    LeftRun,
    /// Right powers `d - x + 1`, left powers `y * |L_B^q|`.
    RightRun,
}

impl Orientation {
    /// The admissible left and right exponent values, ascending.
    pub fn pools(self, left_len: usize, right_len: usize) -> (Vec<u64>, Vec<u64>) {
        let (na, nb) = (left_len as u64, right_len as u64);
        let d = na * nb;
        match self {
            Orientation::LeftRun => ((d - na + 1..=d).collect(), (1..=nb).map(|y| y * na).collect()),
            Orientation::RightRun => ((1..=na).map(|y| y * nb).collect(), (d - nb + 1..=d).collect()),
        }
    }

    /// Orientations that produce distinct value sets for a group of this
    /// shape. When either side is a singleton both collapse to one.
    pub fn distinct_for(left_len: usize, right_len: usize) -> &'static [Orientation] {
        if left_len <= 1 || right_len <= 1 {
            &[Orientation::LeftRun]
        } else {
            &[Orientation::LeftRun, Orientation::RightRun]
        }
    }
}

/// Which side a validation finding refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "A",
            Side::Right => "B",
        })
    }
}

/// First violated condition found by [`validate`]. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyGroup {
        group: usize,
    },
    MemberOutOfRange {
        group: usize,
        side: Side,
        index: usize,
    },
    /// Two groups' product sets share a pair.
    Overlap {
        first: usize,
        second: usize,
        pair: (usize, usize),
    },
    /// A requested product belongs to no group.
    Uncovered {
        pair: (usize, usize),
    },
    WrongShape {
        detail: String,
    },
    /// A nonzero power outside the group's member set.
    PowerOutsideGroup {
        group: usize,
        side: Side,
        index: usize,
    },
    /// Powers of the group match neither admissible form.
    NoAdmissibleForm {
        group: usize,
    },
    /// Two members on one side of a group share a power.
    DuplicatePower {
        group: usize,
        side: Side,
        value: u64,
    },
    /// The shifted pair sums of a group do not enumerate `1..=d`.
    NotPermutation {
        group: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyGroup { group } => write!(f, "group {} is empty", group + 1),
            Violation::MemberOutOfRange { group, side, index } => {
                write!(f, "group {} lists {side}{} which does not exist", group + 1, index + 1)
            }
            Violation::Overlap { first, second, pair } => write!(
                f,
                "groups {} and {} both contain ({}, {})",
                first + 1,
                second + 1,
                pair.0 + 1,
                pair.1 + 1
            ),
            Violation::Uncovered { pair } => {
                write!(f, "edge ({}, {}) is in no task group", pair.0 + 1, pair.1 + 1)
            }
            Violation::WrongShape { detail } => write!(f, "power assignment shape: {detail}"),
            Violation::PowerOutsideGroup { group, side, index } => write!(
                f,
                "group {}: nonzero P^{side}_{} for a non-member",
                group + 1,
                index + 1
            ),
            Violation::NoAdmissibleForm { group } => {
                write!(f, "group {}: powers fit neither admissible form", group + 1)
            }
            Violation::DuplicatePower { group, side, value } => {
                write!(f, "group {}: power {value} repeated on side {side}", group + 1)
            }
            Violation::NotPermutation { group } => {
                write!(f, "group {}: shifted pair sums are not a permutation", group + 1)
            }
        }
    }
}

/// Checks the task assignment against the graph.
pub fn validate_tasks(graph: &ComputationGraph, tasks: &TaskAssignment) -> std::result::Result<(), Violation> {
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (q, g) in tasks.groups().iter().enumerate() {
        if g.left().is_empty() || g.right().is_empty() {
            return Err(Violation::EmptyGroup { group: q });
        }
        if let Some(&i) = g.left().iter().find(|&&i| i >= graph.left_count()) {
            return Err(Violation::MemberOutOfRange {
                group: q,
                side: Side::Left,
                index: i,
            });
        }
        if let Some(&j) = g.right().iter().find(|&&j| j >= graph.right_count()) {
            return Err(Violation::MemberOutOfRange {
                group: q,
                side: Side::Right,
                index: j,
            });
        }
        for pair in g.pairs() {
            if let Some(&first) = owner.get(&pair) {
                return Err(Violation::Overlap { first, second: q, pair });
            }
            owner.insert(pair, q);
        }
    }
    if let Some(&pair) = graph.edges().iter().find(|e| !owner.contains_key(e)) {
        return Err(Violation::Uncovered { pair });
    }
    Ok(())
}

/// Checks a task/power assignment pair: task coverage and disjointness, then
/// the three power conditions (support, admissible form, distinctness), then
/// the permutation property of shifted pair sums.
pub fn validate(
    graph: &ComputationGraph,
    tasks: &TaskAssignment,
    powers: &PowerAssignment,
) -> std::result::Result<(), Violation> {
    validate_tasks(graph, tasks)?;
    let (la, lb) = (graph.left_count(), graph.right_count());
    if powers.left.len() != tasks.len() || powers.right.len() != tasks.len() {
        return Err(Violation::WrongShape {
            detail: format!(
                "{} groups but {} left / {} right power vectors",
                tasks.len(),
                powers.left.len(),
                powers.right.len()
            ),
        });
    }
    if let Some(v) = powers.left.iter().find(|v| v.len() != la) {
        return Err(Violation::WrongShape {
            detail: format!("left power vector of length {} (L_A={la})", v.len()),
        });
    }
    if let Some(v) = powers.right.iter().find(|v| v.len() != lb) {
        return Err(Violation::WrongShape {
            detail: format!("right power vector of length {} (L_B={lb})", v.len()),
        });
    }
    for (q, g) in tasks.groups().iter().enumerate() {
        let (pa, pb) = (&powers.left[q], &powers.right[q]);
        // Condition 1: support.
        if let Some(i) = (0..la).find(|&i| pa[i] != 0 && g.left().binary_search(&i).is_err()) {
            return Err(Violation::PowerOutsideGroup {
                group: q,
                side: Side::Left,
                index: i,
            });
        }
        if let Some(j) = (0..lb).find(|&j| pb[j] != 0 && g.right().binary_search(&j).is_err()) {
            return Err(Violation::PowerOutsideGroup {
                group: q,
                side: Side::Right,
                index: j,
            });
        }
        let va: Vec<u64> = g.left().iter().map(|&i| pa[i]).collect();
        let vb: Vec<u64> = g.right().iter().map(|&j| pb[j]).collect();
        // Condition 2: every member's power lies in one orientation's pools.
        let fits = [Orientation::LeftRun, Orientation::RightRun].iter().any(|&o| {
            let (pool_a, pool_b) = o.pools(va.len(), vb.len());
            va.iter().all(|v| pool_a.contains(v)) && vb.iter().all(|v| pool_b.contains(v))
        });
        if !fits {
            return Err(Violation::NoAdmissibleForm { group: q });
        }
        // Condition 3: distinct nonzero powers per side.
        for (side, vals) in [(Side::Left, &va), (Side::Right, &vb)] {
            let mut seen = BTreeSet::new();
            if let Some(&value) = vals.iter().find(|&&v| v != 0 && !seen.insert(v)) {
                return Err(Violation::DuplicatePower { group: q, side, value });
            }
        }
        // Consequence: shifted sums enumerate 1..=d.
        let d = g.size() as u64;
        let shifted: BTreeSet<u64> = va
            .iter()
            .flat_map(|&a| vb.iter().map(move |&b| (a + b).wrapping_sub(d)))
            .collect();
        if shifted.len() != g.size() || !shifted.iter().copied().eq(1..=d) {
            return Err(Violation::NotPermutation { group: q });
        }
    }
    Ok(())
}

/// Partitioning and bilinear parameters of the flexible scheme. The base
/// scheme is `m = p = n = rho = rank = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FccParams {
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub rho: usize,
    /// Rank of the bilinear tensor used (`R_{m,p,n}` or an upper bound).
    pub rank: usize,
}

impl FccParams {
    pub const BASE: FccParams = FccParams {
        m: 1,
        p: 1,
        n: 1,
        rho: 1,
        rank: 1,
    };

    pub fn check(&self) -> Result<()> {
        if self.m == 0 || self.p == 0 || self.n == 0 || self.rank == 0 {
            return Err(Error::InvalidParams(
                "m, p, n and the tensor rank must be positive".into(),
            ));
        }
        if self.rho == 0 || !self.rank.is_multiple_of(self.rho) {
            return Err(Error::InvalidRho {
                rho: self.rho,
                rank: self.rank,
            });
        }
        Ok(())
    }

    /// Number of concatenated partitions per worker, `rank / rho`.
    pub fn partitions(&self) -> usize {
        self.rank / self.rho
    }
}

impl Default for FccParams {
    fn default() -> Self {
        FccParams::BASE
    }
}

/// Matrix dimensions: `A_i` is `alpha x beta`, `B_j` is `beta x gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
}

/// Recovery threshold of a plan and the bookkeeping behind it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdReport {
    pub threshold: usize,
    pub min_left_power: u64,
    pub min_right_power: u64,
    /// `rank * sum_q d_q` pole terms.
    pub rational_terms: usize,
    /// `threshold - rational_terms` polynomial (interference) terms.
    pub polynomial_terms: usize,
    pub params: FccParams,
    pub group_sizes: Vec<usize>,
}

/// Recovery threshold
/// `(rank + rho) * sum_q d_q - min_i sum_q P^A_i - min_j sum_q P^B_j + 1`.
pub fn recovery_threshold(
    graph: &ComputationGraph,
    tasks: &TaskAssignment,
    powers: &PowerAssignment,
    params: FccParams,
) -> Result<ThresholdReport> {
    params.check()?;
    validate(graph, tasks, powers).map_err(|v| Error::InvalidAssignment(v.to_string()))?;
    let total = tasks.total_size() as i128;
    let min_a = powers.left_sums(graph.left_count()).into_iter().min().unwrap_or(0);
    let min_b = powers.right_sums(graph.right_count()).into_iter().min().unwrap_or(0);
    let r = (params.rank + params.rho) as i128 * total - min_a as i128 - min_b as i128 + 1;
    let rational = params.rank as i128 * total;
    if r < rational {
        return Err(Error::InvalidAssignment(format!(
            "threshold {r} below the {rational} pole terms"
        )));
    }
    Ok(ThresholdReport {
        threshold: r as usize,
        min_left_power: min_a,
        min_right_power: min_b,
        rational_terms: rational as usize,
        polynomial_terms: (r - rational) as usize,
        params,
        group_sizes: tasks.groups().iter().map(TaskGroup::size).collect(),
    })
}

/// Cut-set lower bound `m * n * |S|` on any scheme's recovery threshold at
/// download cost `alpha * gamma / (m n)`.
pub fn lower_bound(graph: &ComputationGraph, m: usize, n: usize) -> usize {
    m * n * graph.edge_count()
}

/// Communication and computation figures of a plan, as formula evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    /// Symbols sent to each worker by source A.
    pub upload_a: usize,
    pub upload_b: usize,
    /// Symbols returned by each worker.
    pub download: usize,
    /// Multiply-adds per worker.
    pub worker_ops: usize,
    pub encode_a_ops: f64,
    pub encode_b_ops: f64,
    pub decode_ops: f64,
}

impl ThresholdReport {
    pub fn costs(&self, dims: Dims, graph: &ComputationGraph, workers: usize) -> CostEstimate {
        let FccParams { m, p, n, rho, rank } = self.params;
        let phi = rank / rho;
        let (a, b, g) = (dims.alpha, dims.beta, dims.gamma);
        let r = self.threshold as f64;
        let k = workers as f64;
        let rk = rank as f64;
        let log2r = r.max(2.0).log2();
        let sq: f64 = self.group_sizes.iter().map(|&d| (d * d) as f64).sum();
        CostEstimate {
            upload_a: phi * a * b / (m * p),
            upload_b: phi * b * g / (p * n),
            download: a * g / (m * n),
            worker_ops: phi * a * b * g / (m * p * n),
            encode_a_ops: (a * b * graph.left_count()) as f64 * rk * (k / (m * p) as f64 + 1.0),
            encode_b_ops: (b * g * graph.right_count()) as f64 * rk * (k / (p * n) as f64 + 1.0),
            decode_ops: (a * g) as f64 * rk * graph.edge_count() as f64
                + (a * g) as f64 / (m * n) as f64 * (r * log2r * log2r + rk * sq),
        }
    }
}

/// A task assignment with its chosen power assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub tasks: TaskAssignment,
    pub powers: PowerAssignment,
}

impl Assignment {
    pub fn threshold(&self, graph: &ComputationGraph, params: FccParams) -> Result<ThresholdReport> {
        recovery_threshold(graph, &self.tasks, &self.powers, params)
    }
}

/// One singleton group per requested product, all powers 1.
pub fn t1_assignment(graph: &ComputationGraph) -> Assignment {
    let tasks = TaskAssignment::new(
        graph
            .edges()
            .iter()
            .map(|&(i, j)| TaskGroup::new(vec![i], vec![j]))
            .collect(),
    );
    let powers = PowerAssignment::identity(&tasks, graph.left_count(), graph.right_count());
    Assignment { tasks, powers }
}

/// Closed form of the T1 threshold:
/// `(rank + rho)|S| - min d^A - min d^B + 1`.
pub fn t1_threshold(graph: &ComputationGraph, params: FccParams) -> usize {
    let min_a = graph.left_degrees().into_iter().filter(|&d| d > 0).min().unwrap_or(0);
    let min_b = graph.right_degrees().into_iter().filter(|&d| d > 0).min().unwrap_or(0);
    (params.rank + params.rho) * graph.edge_count() + 1 - min_a - min_b
}

/// Which side's vertices become the singleton side of T2 groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum T2Side {
    /// One group per left vertex: `({i}, N(i))`.
    Left,
    /// One group per right vertex: `(N(j), {j})`.
    Right,
    /// Both, keeping the smaller threshold (left on ties).
    Best,
}

/// T2 grouping with optimized powers.
pub fn t2_assignment(graph: &ComputationGraph, side: T2Side, budget: u64) -> Assignment {
    let build = |side: T2Side| -> (Assignment, u64) {
        let groups = match side {
            T2Side::Left => (0..graph.left_count())
                .filter_map(|i| {
                    let nb = graph.left_neighbors(i);
                    (!nb.is_empty()).then(|| TaskGroup::new(vec![i], nb))
                })
                .collect(),
            _ => (0..graph.right_count())
                .filter_map(|j| {
                    let nb = graph.right_neighbors(j);
                    (!nb.is_empty()).then(|| TaskGroup::new(nb, vec![j]))
                })
                .collect(),
        };
        let tasks = TaskAssignment::new(groups);
        let found = optimize_power(graph, &tasks, budget);
        (
            Assignment {
                tasks,
                powers: found.powers,
            },
            found.objective,
        )
    };
    match side {
        T2Side::Left | T2Side::Right => build(side).0,
        T2Side::Best => {
            let (left, lo) = build(T2Side::Left);
            let (right, ro) = build(T2Side::Right);
            // The threshold is a constant minus the objective; bigger wins.
            if ro > lo {
                right
            } else {
                left
            }
        }
    }
}

/// Task assignment with a single group covering every vertex.
pub fn single_group_assignment(graph: &ComputationGraph, budget: u64) -> Assignment {
    let tasks = TaskAssignment::new(vec![TaskGroup::new(
        (0..graph.left_count()).collect(),
        (0..graph.right_count()).collect(),
    )]);
    let powers = optimize_power(graph, &tasks, budget).powers;
    Assignment { tasks, powers }
}
