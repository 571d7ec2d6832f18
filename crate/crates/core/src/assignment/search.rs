//! Power-assignment search: maximize `min_i S^A_i + min_j S^B_j` over all
//! valid power assignments for a fixed task assignment.
//!
//! Small instances are searched exhaustively by branch and bound. Larger ones
//! are seeded by a restarted swap local search, after which branch and bound
//! runs under a node budget. Among optimal assignments the one found first
//! in depth-first order wins: groups in order, left members before right
//! members, members by index, values ascending.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Orientation, PowerAssignment, TaskAssignment};
use crate::graph::ComputationGraph;
use crate::seed::stream_rng;

/// Node budget of the exhaustive search.
pub const DEFAULT_SEARCH_BUDGET: u64 = 1_000_000;
const RESTARTS: u64 = 100;
const MAX_PASSES: usize = 1_000;
const LOCAL_SEED: u64 = 0x0005_eed0_0f0c_5a11;

/// Outcome of [`optimize_power`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PowerSearch {
    pub powers: PowerAssignment,
    pub objective: u64,
    /// Upper bound on the objective known before searching.
    pub upper_bound: u64,
    /// Whether `objective` is proven optimal.
    pub exact: bool,
    pub nodes: u64,
}

struct GroupPools {
    left: Vec<usize>,
    right: Vec<usize>,
    d: u64,
    /// Admissible (left, right) value pools, one per distinct orientation.
    pools: Vec<(Vec<u64>, Vec<u64>)>,
}

impl GroupPools {
    fn slots(&self) -> usize {
        self.left.len() + self.right.len()
    }
}

fn group_pools(tasks: &TaskAssignment) -> Vec<GroupPools> {
    tasks
        .groups()
        .iter()
        .map(|g| {
            let (na, nb) = (g.left().len(), g.right().len());
            GroupPools {
                left: g.left().to_vec(),
                right: g.right().to_vec(),
                d: g.size() as u64,
                pools: Orientation::distinct_for(na, nb)
                    .iter()
                    .map(|o| o.pools(na, nb))
                    .collect(),
            }
        })
        .collect()
}

/// Number of valid power assignments, saturating.
pub fn search_space_size(tasks: &TaskAssignment) -> u128 {
    fn fact(n: usize) -> u128 {
        (1..=n as u128).fold(1u128, |a, k| a.saturating_mul(k))
    }
    tasks.groups().iter().fold(1u128, |acc, g| {
        let (na, nb) = (g.left().len(), g.right().len());
        let orient = Orientation::distinct_for(na, nb).len() as u128;
        acc.saturating_mul(orient)
            .saturating_mul(fact(na))
            .saturating_mul(fact(nb))
    })
}

/// Weight of a group's contribution to the averaged bound: the maximum over
/// orientations of `L_B * sum(left pool) + L_A * sum(right pool)`.
fn group_weight(shape: &GroupPools, la: u64, lb: u64) -> u64 {
    shape.pools
        .iter()
        .map(|(pa, pb)| lb * pa.iter().sum::<u64>() + la * pb.iter().sum::<u64>())
        .max()
        .unwrap_or(0)
}

fn root_upper_bound(shapes: &[GroupPools], la: usize, lb: usize) -> u64 {
    let mut cap_a = vec![0u64; la];
    let mut cap_b = vec![0u64; lb];
    for s in shapes {
        s.left.iter().for_each(|&i| cap_a[i] += s.d);
        s.right.iter().for_each(|&j| cap_b[j] += s.d);
    }
    let vertex = cap_a.iter().min().unwrap_or(&0) + cap_b.iter().min().unwrap_or(&0);
    let (wa, wb) = (la as u64, lb as u64);
    let weighted: u64 = shapes.iter().map(|s| group_weight(s, wa, wb)).sum();
    vertex.min(weighted / (wa * wb).max(1))
}

fn objective_of(shapes: &[GroupPools], values: &[Vec<u64>], la: usize, lb: usize) -> u64 {
    to_powers(shapes, values, la, lb).objective(la, lb)
}

fn to_powers(shapes: &[GroupPools], values: &[Vec<u64>], la: usize, lb: usize) -> PowerAssignment {
    let mut left = vec![vec![0; la]; shapes.len()];
    let mut right = vec![vec![0; lb]; shapes.len()];
    for (q, (s, v)) in shapes.iter().zip(values).enumerate() {
        let na = s.left.len();
        for (k, &i) in s.left.iter().enumerate() {
            left[q][i] = v[k];
        }
        for (k, &j) in s.right.iter().enumerate() {
            right[q][j] = v[na + k];
        }
    }
    PowerAssignment::new(left, right)
}

struct BranchAndBound<'a> {
    shapes: &'a [GroupPools],
    la: usize,
    lb: usize,
    sums_a: Vec<u64>,
    sums_b: Vec<u64>,
    /// Optimistic remaining contribution per vertex (`d` per open slot).
    fut_a: Vec<u64>,
    fut_b: Vec<u64>,
    /// Weighted total of assigned values.
    done_w: u64,
    /// Suffix sums of group weights.
    rest_w: Vec<u64>,
    values: Vec<Vec<u64>>,
    floor: u64,
    best: Option<(u64, Vec<Vec<u64>>)>,
    upper: u64,
    nodes: u64,
    limit: Option<u64>,
    stop: bool,
    aborted: bool,
}

impl<'a> BranchAndBound<'a> {
    fn new(shapes: &'a [GroupPools], la: usize, lb: usize, upper: u64, floor: u64, limit: Option<u64>) -> Self {
        let mut fut_a = vec![0u64; la];
        let mut fut_b = vec![0u64; lb];
        for s in shapes {
            s.left.iter().for_each(|&i| fut_a[i] += s.d);
            s.right.iter().for_each(|&j| fut_b[j] += s.d);
        }
        let mut rest_w = vec![0u64; shapes.len() + 1];
        for q in (0..shapes.len()).rev() {
            rest_w[q] = rest_w[q + 1] + group_weight(&shapes[q], la as u64, lb as u64);
        }
        BranchAndBound {
            shapes,
            la,
            lb,
            sums_a: vec![0; la],
            sums_b: vec![0; lb],
            fut_a,
            fut_b,
            done_w: 0,
            rest_w,
            values: shapes.iter().map(|s| vec![0; s.slots()]).collect(),
            floor,
            best: None,
            upper,
            nodes: 0,
            limit,
            stop: false,
            aborted: false,
        }
    }

    fn bound(&self, g: usize, s: usize) -> u64 {
        let va = (0..self.la).map(|i| self.sums_a[i] + self.fut_a[i]).min().unwrap_or(0);
        let vb = (0..self.lb).map(|j| self.sums_b[j] + self.fut_b[j]).min().unwrap_or(0);
        let (la, lb) = (self.la as u64, self.lb as u64);
        let shape = &self.shapes[g];
        let (na, nb) = (shape.left.len(), shape.right.len());
        let open = if s < na {
            lb * shape.d * (na - s) as u64 + la * shape.d * nb as u64
        } else {
            la * shape.d * (na + nb - s) as u64
        };
        let avg = (self.done_w + open + self.rest_w[g + 1]) / (la * lb);
        (va + vb).min(avg)
    }

    fn leaf(&mut self) {
        let va = self.sums_a.iter().min().copied().unwrap_or(0);
        let vb = self.sums_b.iter().min().copied().unwrap_or(0);
        let v = va + vb;
        let accept = match &self.best {
            None => v >= self.floor,
            Some((b, _)) => v > *b,
        };
        if accept {
            self.best = Some((v, self.values.clone()));
            if v >= self.upper {
                self.stop = true;
            }
        }
    }

    fn dfs(&mut self, g: usize, s: usize, mask: u8) {
        if self.stop {
            return;
        }
        self.nodes += 1;
        if self.limit.is_some_and(|l| self.nodes > l) {
            self.aborted = true;
            self.stop = true;
            return;
        }
        if g == self.shapes.len() {
            self.leaf();
            return;
        }
        let shape = self.shapes[g].clone_shape();
        if s == shape.slots {
            let next_mask = self.full_mask(g + 1);
            self.dfs(g + 1, 0, next_mask);
            return;
        }
        let b = self.bound(g, s);
        let prune = match &self.best {
            None => b < self.floor,
            Some((v, _)) => b <= *v,
        };
        if prune {
            return;
        }
        let left_side = s < shape.na;
        let used: &[u64] = if left_side {
            &self.values[g][..s]
        } else {
            &self.values[g][shape.na..s]
        };
        let pools = &self.shapes[g].pools;
        let mut cands: Vec<u64> = (0..pools.len())
            .filter(|t| mask & (1 << t) != 0)
            .flat_map(|t| if left_side { &pools[t].0 } else { &pools[t].1 }.iter().copied())
            .filter(|v| !used.contains(v))
            .collect();
        cands.sort_unstable();
        cands.dedup();
        let (la, lb) = (self.la as u64, self.lb as u64);
        for v in cands {
            let new_mask = (0..pools.len())
                .filter(|&t| mask & (1 << t) != 0 && if left_side { &pools[t].0 } else { &pools[t].1 }.contains(&v))
                .fold(0u8, |m, t| m | (1 << t));
            let (member, weight) = if left_side {
                (self.shapes[g].left[s], lb)
            } else {
                (self.shapes[g].right[s - shape.na], la)
            };
            self.apply(left_side, member, v, shape.d, weight);
            self.values[g][s] = v;
            self.dfs(g, s + 1, new_mask);
            self.values[g][s] = 0;
            self.undo(left_side, member, v, shape.d, weight);
            if self.stop {
                return;
            }
        }
    }

    fn apply(&mut self, left: bool, member: usize, v: u64, d: u64, weight: u64) {
        let (sums, fut) = if left {
            (&mut self.sums_a, &mut self.fut_a)
        } else {
            (&mut self.sums_b, &mut self.fut_b)
        };
        sums[member] += v;
        fut[member] -= d;
        self.done_w += weight * v;
    }

    fn undo(&mut self, left: bool, member: usize, v: u64, d: u64, weight: u64) {
        let (sums, fut) = if left {
            (&mut self.sums_a, &mut self.fut_a)
        } else {
            (&mut self.sums_b, &mut self.fut_b)
        };
        sums[member] -= v;
        fut[member] += d;
        self.done_w -= weight * v;
    }

    fn full_mask(&self, g: usize) -> u8 {
        self.shapes.get(g).map_or(0, |s| ((1u16 << s.pools.len()) - 1) as u8)
    }

    fn run(&mut self) {
        let mask = self.full_mask(0);
        self.dfs(0, 0, mask);
    }
}

#[derive(Clone, Copy)]
struct Shape {
    na: usize,
    slots: usize,
    d: u64,
}

impl GroupPools {
    fn clone_shape(&self) -> Shape {
        Shape {
            na: self.left.len(),
            slots: self.slots(),
            d: self.d,
        }
    }
}

/// Swap-based hill climbing state for one restart.
struct Local<'a> {
    shapes: &'a [GroupPools],
    orient: Vec<usize>,
    values: Vec<Vec<u64>>,
    sums_a: Vec<u64>,
    sums_b: Vec<u64>,
}

type Score = (u64, i64);

impl<'a> Local<'a> {
    fn new(shapes: &'a [GroupPools], la: usize, lb: usize, orient: Vec<usize>, values: Vec<Vec<u64>>) -> Self {
        let mut l = Local {
            shapes,
            orient,
            values,
            sums_a: vec![0; la],
            sums_b: vec![0; lb],
        };
        for (q, s) in shapes.iter().enumerate() {
            for (k, &i) in s.left.iter().enumerate() {
                l.sums_a[i] += l.values[q][k];
            }
            for (k, &j) in s.right.iter().enumerate() {
                l.sums_b[j] += l.values[q][s.left.len() + k];
            }
        }
        l
    }

    /// Objective, then fewer vertices sitting at either minimum.
    fn score(&self) -> Score {
        fn part(v: &[u64]) -> (u64, i64) {
            let m = v.iter().min().copied().unwrap_or(0);
            (m, v.iter().filter(|&&x| x == m).count() as i64)
        }
        let (ma, ca) = part(&self.sums_a);
        let (mb, cb) = part(&self.sums_b);
        (ma + mb, -(ca + cb))
    }

    fn member(&self, q: usize, k: usize) -> (bool, usize) {
        let s = &self.shapes[q];
        if k < s.left.len() {
            (true, s.left[k])
        } else {
            (false, s.right[k - s.left.len()])
        }
    }

    fn set(&mut self, q: usize, k: usize, v: u64) {
        let (left, m) = self.member(q, k);
        let old = self.values[q][k];
        let sums = if left { &mut self.sums_a } else { &mut self.sums_b };
        sums[m] = sums[m] - old + v;
        self.values[q][k] = v;
    }

    fn swap(&mut self, q: usize, x: usize, y: usize) {
        let (vx, vy) = (self.values[q][x], self.values[q][y]);
        self.set(q, x, vy);
        self.set(q, y, vx);
    }

    /// Moves group `q` to orientation `t`, keeping each member's rank.
    fn reorient(&mut self, q: usize, t: usize) {
        let s = &self.shapes[q];
        let na = s.left.len();
        let (from_a, from_b) = &s.pools[self.orient[q]];
        let (to_a, to_b) = &s.pools[t];
        let new: Vec<u64> = (0..s.slots())
            .map(|k| {
                let v = self.values[q][k];
                if k < na {
                    to_a[from_a.iter().position(|&x| x == v).unwrap()]
                } else {
                    to_b[from_b.iter().position(|&x| x == v).unwrap()]
                }
            })
            .collect();
        for (k, v) in new.into_iter().enumerate() {
            self.set(q, k, v);
        }
        self.orient[q] = t;
    }

    fn climb(&mut self) {
        let mut current = self.score();
        for _ in 0..MAX_PASSES {
            let mut improved = false;
            for q in 0..self.shapes.len() {
                let na = self.shapes[q].left.len();
                let slots = self.shapes[q].slots();
                for x in 0..slots {
                    let hi = if x < na { na } else { slots };
                    for y in x + 1..hi {
                        self.swap(q, x, y);
                        let sc = self.score();
                        if sc > current {
                            current = sc;
                            improved = true;
                        } else {
                            self.swap(q, x, y);
                        }
                    }
                }
                for t in 0..self.shapes[q].pools.len() {
                    let was = self.orient[q];
                    if t == was {
                        continue;
                    }
                    self.reorient(q, t);
                    let sc = self.score();
                    if sc > current {
                        current = sc;
                        improved = true;
                    } else {
                        self.reorient(q, was);
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
}

fn identity_values(shapes: &[GroupPools]) -> Vec<Vec<u64>> {
    shapes
        .iter()
        .map(|s| {
            let (pa, pb) = &s.pools[0];
            pa.iter().rev().chain(pb.iter()).copied().collect()
        })
        .collect()
}

fn local_search(shapes: &[GroupPools], la: usize, lb: usize) -> (u64, Vec<Vec<u64>>) {
    let mut best: Option<(u64, Vec<Vec<u64>>)> = None;
    for restart in 0..RESTARTS {
        let (orient, values) = if restart == 0 {
            (vec![0; shapes.len()], identity_values(shapes))
        } else {
            let mut rng = stream_rng(LOCAL_SEED, restart);
            let mut orient = Vec::with_capacity(shapes.len());
            let mut values = Vec::with_capacity(shapes.len());
            for s in shapes {
                let t = rng.gen_range(0..s.pools.len());
                let (mut pa, mut pb) = s.pools[t].clone();
                pa.shuffle(&mut rng);
                pb.shuffle(&mut rng);
                orient.push(t);
                values.push(pa.into_iter().chain(pb).collect());
            }
            (orient, values)
        };
        let mut state = Local::new(shapes, la, lb, orient, values);
        state.climb();
        let obj = state.score().0;
        let better = match &best {
            None => true,
            Some((b, v)) => obj > *b || (obj == *b && state.values < *v),
        };
        if better {
            best = Some((obj, state.values));
        }
    }
    best.unwrap_or((0, Vec::new()))
}

/// Maximizes `min_i sum_q P^A_{q,i} + min_j sum_q P^B_{q,j}` for a fixed
/// task assignment. Spaces no larger than `budget` are searched exhaustively;
/// otherwise the search is heuristic and `exact` reports whether optimality
/// was still proven.
pub fn optimize_power(graph: &ComputationGraph, tasks: &TaskAssignment, budget: u64) -> PowerSearch {
    let (la, lb) = (graph.left_count(), graph.right_count());
    let shapes = group_pools(tasks);
    let upper = root_upper_bound(&shapes, la, lb);
    let space = search_space_size(tasks);

    let (values, exact, nodes) = if space <= budget as u128 {
        let mut bb = BranchAndBound::new(&shapes, la, lb, upper, 0, None);
        bb.run();
        let (_, values) = bb.best.expect("exhaustive search always reaches a leaf");
        (values, true, bb.nodes)
    } else {
        let (heur, heur_values) = local_search(&shapes, la, lb);
        let mut bb = BranchAndBound::new(&shapes, la, lb, upper, heur, Some(budget));
        bb.run();
        match bb.best {
            Some((v, values)) => (values, !bb.aborted || v >= upper, bb.nodes),
            None => (heur_values, !bb.aborted || heur >= upper, bb.nodes),
        }
    };
    let objective = objective_of(&shapes, &values, la, lb);
    PowerSearch {
        powers: to_powers(&shapes, &values, la, lb),
        objective,
        upper_bound: upper,
        exact,
        nodes,
    }
}
