//! Straggler trials and Monte Carlo ensemble sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::assignment::{t1_threshold, t2_assignment, Dims, FccParams, T2Side};
use crate::codec::{
    self, decode, direct_products, encode, make_plan, worker_compute, CodingPlan, PlanConfig, WorkerResult,
};
use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::graph::{sample_bounded_degree, sample_erdos_renyi, Pruned};
use crate::seed::{derive_seed, stream_rng};

/// Largest number of subsets [`verify_all_subsets`] will decode.
pub const SUBSET_BUDGET: u128 = 1_000_000;
/// Codec spot checks run once per this many sweep trials.
pub const CODEC_CHECK_EVERY: u64 = 100;
/// Node budget of the power search inside sweeps.
pub const SWEEP_SEARCH_BUDGET: u64 = 20_000;

/// Which workers fail to respond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StragglerModel {
    /// Exactly `s` workers, chosen uniformly, fail.
    Erasures(usize),
    /// Each worker fails independently with this probability.
    Iid(f64),
}

/// Result of one straggler trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialOutcome {
    Success {
        survivors: usize,
    },
    /// Fewer than `R` workers responded; the decoder was not run.
    Insufficient {
        survivors: usize,
    },
    /// The decoder ran but disagreed with the direct products.
    Mismatch {
        survivors: usize,
    },
}

impl TrialOutcome {
    pub fn is_success(&self) -> bool {
        matches!(self, TrialOutcome::Success { .. })
    }
}

/// Worker outputs and reference products for repeated trials on one input.
#[derive(Debug, Clone)]
pub struct TrialInputs {
    pub results: Vec<WorkerResult>,
    pub expected: BTreeMap<(usize, usize), FieldMatrix>,
}

impl TrialInputs {
    pub fn prepare(plan: &CodingPlan, a: &[FieldMatrix], b: &[FieldMatrix]) -> Result<Self> {
        let results = encode(plan, a, b)?
            .iter()
            .map(|s| worker_compute(plan.field(), s))
            .collect::<Result<Vec<_>>>()?;
        let expected = direct_products(plan.field(), plan.graph(), a, b)?;
        Ok(TrialInputs { results, expected })
    }
}

/// Samples a surviving worker set and, when it is large enough, decodes
/// from it and checks the products.
pub fn run_trial(plan: &CodingPlan, inputs: &TrialInputs, model: StragglerModel, seed: u64) -> Result<TrialOutcome> {
    let k = plan.workers();
    let mut rng = stream_rng(seed, 0);
    let alive: Vec<usize> = match model {
        StragglerModel::Erasures(s) => {
            if s > k {
                return Err(Error::InvalidParams(format!("{s} erasures among {k} workers")));
            }
            let mut idx = sample(&mut rng, k, k - s).into_vec();
            idx.sort_unstable();
            idx
        }
        StragglerModel::Iid(eps) => {
            if !(0.0..1.0).contains(&eps) {
                return Err(Error::InvalidParams(format!(
                    "failure probability {eps} outside [0, 1)"
                )));
            }
            (0..k).filter(|_| !rng.gen_bool(eps)).collect()
        }
    };
    let survivors = alive.len();
    if survivors < plan.threshold() {
        return Ok(TrialOutcome::Insufficient { survivors });
    }
    let received: Vec<WorkerResult> = alive.iter().map(|&w| inputs.results[w].clone()).collect();
    let decoded = decode(plan, &received)?;
    Ok(if decoded == inputs.expected {
        TrialOutcome::Success { survivors }
    } else {
        TrialOutcome::Mismatch { survivors }
    })
}

/// Outcome of decoding from every `R`-subset of workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetReport {
    pub subsets: u64,
    pub failures: u64,
    /// 0-based worker indices of the first subset that failed.
    pub first_failure: Option<Vec<usize>>,
}

impl SubsetReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Decodes from every `R`-subset of the workers' results. A decoder error on
/// a subset counts as a failure.
pub fn verify_all_subsets(plan: &CodingPlan, inputs: &TrialInputs) -> Result<SubsetReport> {
    let (k, r) = (inputs.results.len(), plan.threshold());
    if k < r {
        return Err(Error::TooFewResults { needed: r, got: k });
    }
    let count = binomial(k, r);
    if count > SUBSET_BUDGET {
        return Err(Error::SubsetBudgetExceeded {
            count,
            budget: SUBSET_BUDGET,
        });
    }
    let mut report = SubsetReport {
        subsets: count as u64,
        failures: 0,
        first_failure: None,
    };
    for subset in inputs.results.iter().combinations(r) {
        let chosen: Vec<WorkerResult> = subset.iter().map(|&x| x.clone()).collect();
        if decode(plan, &chosen).map_or(true, |d| d != inputs.expected) {
            report.failures += 1;
            report
                .first_failure
                .get_or_insert_with(|| chosen.iter().map(|x| x.worker).collect());
        }
    }
    Ok(report)
}

/// Decodes from `samples` uniformly drawn `R`-subsets.
pub fn verify_sampled_subsets(
    plan: &CodingPlan,
    inputs: &TrialInputs,
    samples: u64,
    seed: u64,
) -> Result<SubsetReport> {
    let (k, r) = (inputs.results.len(), plan.threshold());
    if k < r {
        return Err(Error::TooFewResults { needed: r, got: k });
    }
    let mut report = SubsetReport {
        subsets: samples,
        failures: 0,
        first_failure: None,
    };
    for t in 0..samples {
        let mut idx = sample(&mut stream_rng(seed, t), k, r).into_vec();
        idx.sort_unstable();
        let chosen: Vec<WorkerResult> = idx.iter().map(|&w| inputs.results[w].clone()).collect();
        if decode(plan, &chosen).map_or(true, |d| d != inputs.expected) {
            report.failures += 1;
            report
                .first_failure
                .get_or_insert_with(|| chosen.iter().map(|x| x.worker).collect());
        }
    }
    Ok(report)
}

/// A random-graph ensemble at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ensemble {
    /// Each edge present independently with probability `lambda`.
    Lambda { left: usize, right: usize, lambda: f64 },
    /// Each left vertex picks a degree uniform in `1..=k`.
    Bounded { left: usize, right: usize, k: usize },
}

impl Ensemble {
    pub fn name(&self) -> &'static str {
        match self {
            Ensemble::Lambda { .. } => "lambda",
            Ensemble::Bounded { .. } => "k",
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match *self {
            Ensemble::Lambda { left, right, .. } | Ensemble::Bounded { left, right, .. } => (left, right),
        }
    }

    pub fn param(&self) -> f64 {
        match *self {
            Ensemble::Lambda { lambda, .. } => lambda,
            Ensemble::Bounded { k, .. } => k as f64,
        }
    }

    /// Analytic `E|S|`, the normalizer of the gap ratios.
    pub fn expected_edges(&self) -> f64 {
        match *self {
            Ensemble::Lambda { left, right, lambda } => (left * right) as f64 * lambda,
            Ensemble::Bounded { left, k, .. } => left as f64 * (1 + k) as f64 / 2.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Pruned> {
        match *self {
            Ensemble::Lambda { left, right, lambda } => sample_erdos_renyi(left, right, lambda, rng),
            Ensemble::Bounded { left, right, k } => sample_bounded_degree(left, right, k, rng),
        }
    }

    /// Stream key so a point's trials do not depend on its grid position.
    fn key(&self) -> u64 {
        let (l, r) = self.dims();
        let kind = matches!(self, Ensemble::Bounded { .. }) as u64;
        derive_seed(
            derive_seed(derive_seed(kind, l as u64), r as u64),
            self.param().to_bits(),
        )
    }
}

impl fmt::Display for Ensemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (l, r) = self.dims();
        write!(f, "{}({l},{r}) {}={}", self.name(), self.name(), self.param())
    }
}

/// Default grid: `V_lambda(5,5)` for lambda in 0.1..=0.6 and `V_k(L_A,5)` for
/// `L_A` in {5,10,15}, k in 1..=5.
pub fn default_grid() -> Vec<Ensemble> {
    let mut grid: Vec<Ensemble> = (1..=6)
        .map(|t| Ensemble::Lambda {
            left: 5,
            right: 5,
            lambda: t as f64 / 10.0,
        })
        .collect();
    for left in [5, 10, 15] {
        for k in 1..=5 {
            grid.push(Ensemble::Bounded { left, right: 5, k });
        }
    }
    grid
}

#[derive(Debug, Clone, Copy)]
pub struct SweepConfig {
    pub trials: u64,
    pub seed: u64,
    pub search_budget: u64,
    /// Run a full encode/decode every [`CODEC_CHECK_EVERY`] trials.
    pub with_codec: bool,
}

impl SweepConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        SweepConfig {
            trials,
            seed,
            search_budget: SWEEP_SEARCH_BUDGET,
            with_codec: false,
        }
    }
}

/// Aggregate of one sweep point. Field order is the CSV column order.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub ensemble: &'static str,
    #[serde(rename = "L_A")]
    pub left: usize,
    #[serde(rename = "L_B")]
    pub right: usize,
    pub param: f64,
    pub trials: u64,
    pub mean_S: f64,
    pub mean_R_T1: f64,
    pub mean_R_T2: f64,
    /// Mean of the batch baseline `2|S| - 1`.
    pub baseline_R: f64,
    pub G_T1: f64,
    pub G_T2: f64,
    pub baseline_ratio: f64,
    pub se_T1: f64,
    pub se_T2: f64,
    #[serde(skip)]
    pub codec_checks: u64,
    #[serde(skip)]
    pub codec_failures: u64,
    /// Trials where `R_T2 <= R_T1 <= 2|S| - 1` failed; always zero.
    #[serde(skip)]
    pub order_violations: u64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Sums {
    n: u64,
    s: u64,
    t1: u64,
    t1_sq: u128,
    t2: u64,
    t2_sq: u128,
    baseline: u64,
    checks: u64,
    failures: u64,
    violations: u64,
}

impl std::ops::Add for Sums {
    type Output = Sums;

    fn add(self, o: Sums) -> Sums {
        Sums {
            n: self.n + o.n,
            s: self.s + o.s,
            t1: self.t1 + o.t1,
            t1_sq: self.t1_sq + o.t1_sq,
            t2: self.t2 + o.t2,
            t2_sq: self.t2_sq + o.t2_sq,
            baseline: self.baseline + o.baseline,
            checks: self.checks + o.checks,
            failures: self.failures + o.failures,
            violations: self.violations + o.violations,
        }
    }
}

fn codec_spot_check(pruned: &Pruned, asg: &crate::assignment::Assignment, r: usize, seed: u64) -> Result<bool> {
    let field = PrimeField::default();
    let dims = Dims {
        alpha: 2,
        beta: 2,
        gamma: 2,
    };
    let plan = make_plan(&pruned.graph, asg, dims, PlanConfig::base(r), field)?;
    let mut rng = stream_rng(seed, 1);
    let (a, b) = codec::random_inputs(&field, &pruned.graph, dims, &mut rng);
    let inputs = TrialInputs::prepare(&plan, &a, &b)?;
    Ok(decode(&plan, &inputs.results)? == inputs.expected)
}

fn trial(point: &Ensemble, config: &SweepConfig, t: u64) -> Result<Sums> {
    let seed = derive_seed(derive_seed(config.seed, point.key()), t);
    let mut rng = stream_rng(seed, 0);
    let pruned = point.sample(&mut rng)?;
    let g = &pruned.graph;
    let s = g.edge_count() as u64;
    let r1 = t1_threshold(g, FccParams::BASE) as u64;
    let asg = t2_assignment(g, T2Side::Best, config.search_budget);
    let r2 = asg.threshold(g, FccParams::BASE)?.threshold as u64;
    let baseline = 2 * s - 1;
    let mut sums = Sums {
        n: 1,
        s,
        t1: r1,
        t1_sq: (r1 as u128) * (r1 as u128),
        t2: r2,
        t2_sq: (r2 as u128) * (r2 as u128),
        baseline,
        violations: u64::from(!(r2 <= r1 && r1 <= baseline)),
        ..Sums::default()
    };
    if config.with_codec && t.is_multiple_of(CODEC_CHECK_EVERY) {
        sums.checks = 1;
        sums.failures = u64::from(!codec_spot_check(&pruned, &asg, r2 as usize, seed)?);
    }
    Ok(sums)
}

fn std_err(sum: u64, sum_sq: u128, n: u64) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let nf = n as f64;
    let mean = sum as f64 / nf;
    let var = ((sum_sq as f64) - nf * mean * mean) / (nf - 1.0);
    var.max(0.0).sqrt() / nf.sqrt()
}

/// Monte Carlo aggregate at one ensemble point. Trials run in parallel and
/// are reduced by integer sums, so the record depends only on the inputs.
pub fn sweep_point(point: &Ensemble, config: &SweepConfig) -> Result<SweepRecord> {
    if config.trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    let sums = (0..config.trials)
        .into_par_iter()
        .map(|t| trial(point, config, t))
        .try_reduce(Sums::default, |a, b| Ok(a + b))?;
    let n = sums.n as f64;
    let es = point.expected_edges();
    let (left, right) = point.dims();
    Ok(SweepRecord {
        ensemble: point.name(),
        left,
        right,
        param: point.param(),
        trials: sums.n,
        mean_S: sums.s as f64 / n,
        mean_R_T1: sums.t1 as f64 / n,
        mean_R_T2: sums.t2 as f64 / n,
        baseline_R: sums.baseline as f64 / n,
        G_T1: sums.t1 as f64 / n / es,
        G_T2: sums.t2 as f64 / n / es,
        baseline_ratio: 2.0 - 1.0 / es,
        se_T1: std_err(sums.t1, sums.t1_sq, sums.n) / es,
        se_T2: std_err(sums.t2, sums.t2_sq, sums.n) / es,
        codec_checks: sums.checks,
        codec_failures: sums.failures,
        order_violations: sums.violations,
    })
}

pub fn sweep(points: &[Ensemble], config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    points.iter().map(|p| sweep_point(p, config)).collect()
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::tests::worked_plan;
    use crate::graph::tests::worked_example;
    use crate::graph::ComputationGraph;

    fn worked(workers: usize) -> (CodingPlan, TrialInputs) {
        let g = worked_example();
        let dims = Dims {
            alpha: 2,
            beta: 2,
            gamma: 2,
        };
        let plan = make_plan(
            &g,
            &worked_plan(),
            dims,
            PlanConfig::base(workers),
            PrimeField::default(),
        )
        .unwrap();
        let mut rng = stream_rng(99, 0);
        let (a, b) = codec::random_inputs(plan.field(), &g, dims, &mut rng);
        let inputs = TrialInputs::prepare(&plan, &a, &b).unwrap();
        (plan, inputs)
    }

    #[test]
    fn erasure_edges() {
        let (plan, inputs) = worked(8);
        for seed in 0..20 {
            let ok = run_trial(&plan, &inputs, StragglerModel::Erasures(3), seed).unwrap();
            assert_eq!(ok, TrialOutcome::Success { survivors: 5 });
            let short = run_trial(&plan, &inputs, StragglerModel::Erasures(4), seed).unwrap();
            assert_eq!(short, TrialOutcome::Insufficient { survivors: 4 });
        }
        assert!(run_trial(&plan, &inputs, StragglerModel::Erasures(9), 0).is_err());
        assert!(run_trial(&plan, &inputs, StragglerModel::Iid(1.0), 0).is_err());
    }

    #[test]
    fn iid_success_rate_matches_binomial_tail() {
        let g = ComputationGraph::from_one_based(1, 1, &[(1, 1)]).unwrap();
        let plan = make_plan(
            &g,
            &crate::assignment::t1_assignment(&g),
            Dims {
                alpha: 1,
                beta: 1,
                gamma: 1,
            },
            PlanConfig::base(3),
            PrimeField::default(),
        )
        .unwrap();
        let mut rng = stream_rng(3, 3);
        let (a, b) = codec::random_inputs(plan.field(), &g, plan.dims(), &mut rng);
        let inputs = TrialInputs::prepare(&plan, &a, &b).unwrap();
        let (k, r, eps) = (3usize, 1usize, 0.6f64);
        // Oracle: P[Bin(k, 1 - eps) >= r].
        let p: f64 = (r..=k)
            .map(|s| binomial(k, s) as f64 * (1.0 - eps).powi(s as i32) * eps.powi((k - s) as i32))
            .sum();
        let n = 10_000;
        let wins = (0..n)
            .filter(|&t| {
                run_trial(&plan, &inputs, StragglerModel::Iid(eps), t)
                    .unwrap()
                    .is_success()
            })
            .count() as f64;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!(
            (wins / n as f64 - p).abs() <= 3.0 * sigma,
            "rate {} vs {p}",
            wins / n as f64
        );
    }

    #[test]
    fn all_subsets_and_fault_injection() {
        let (plan, mut inputs) = worked(7);
        let rep = verify_all_subsets(&plan, &inputs).unwrap();
        assert_eq!(
            rep,
            SubsetReport {
                subsets: 21,
                failures: 0,
                first_failure: None
            }
        );
        let bad = &mut inputs.results[3].c;
        bad.set(0, 0, (bad.get(0, 0) + 1) % plan.field().modulus());
        let rep = verify_all_subsets(&plan, &inputs).unwrap();
        assert!(!rep.passed());
        assert_eq!(rep.failures, 15);
        assert!(rep.first_failure.unwrap().contains(&3));
    }

    #[test]
    fn sampled_subsets() {
        let (plan, mut inputs) = worked(9);
        let rep = verify_sampled_subsets(&plan, &inputs, 30, 4).unwrap();
        assert_eq!((rep.subsets, rep.failures), (30, 0));
        let c = &mut inputs.results[2].c;
        c.set(0, 0, (c.get(0, 0) + 1) % plan.field().modulus());
        let rep = verify_sampled_subsets(&plan, &inputs, 30, 4).unwrap();
        // 5 of 9 workers drawn: about 17 of 30 samples contain worker 2
        assert!(rep.failures > 5 && rep.failures < 30, "{}", rep.failures);
        assert!(rep.first_failure.unwrap().contains(&2));
    }

    #[test]
    fn single_subset_when_k_equals_r() {
        let (plan, inputs) = worked(5);
        assert_eq!(verify_all_subsets(&plan, &inputs).unwrap().subsets, 1);
    }

    #[test]
    fn subset_budget() {
        assert_eq!(binomial(7, 5), 21);
        assert_eq!(binomial(40, 20), 137_846_528_820);
    }

    #[test]
    fn sweep_is_reproducible_and_ordered() {
        let cfg = SweepConfig::new(200, 7);
        let point = Ensemble::Lambda {
            left: 5,
            right: 5,
            lambda: 0.4,
        };
        let a = sweep_point(&point, &cfg).unwrap();
        let b = sweep_point(&point, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.order_violations, 0);
        assert!(a.G_T2 <= a.G_T1);
        assert!(a.mean_R_T2 >= a.mean_S);
        assert_eq!(a.baseline_ratio, 2.0 - 1.0 / 10.0);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| sweep_point(&point, &cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn single_left_vertex_k1_is_exact() {
        // One left vertex with one edge: R_T1 = 1 and |S| = 1 every trial.
        let cfg = SweepConfig::new(50, 1);
        let rec = sweep_point(
            &Ensemble::Bounded {
                left: 1,
                right: 5,
                k: 1,
            },
            &cfg,
        )
        .unwrap();
        assert_eq!((rec.G_T1, rec.G_T2, rec.se_T1), (1.0, 1.0, 0.0));
    }

    #[test]
    fn codec_spot_checks_run() {
        let mut cfg = SweepConfig::new(201, 2);
        cfg.with_codec = true;
        let rec = sweep_point(
            &Ensemble::Bounded {
                left: 4,
                right: 4,
                k: 2,
            },
            &cfg,
        )
        .unwrap();
        assert_eq!((rec.codec_checks, rec.codec_failures), (3, 0));
    }

    #[test]
    fn csv_header() {
        let cfg = SweepConfig::new(5, 0);
        let recs = sweep(
            &[Ensemble::Lambda {
                left: 3,
                right: 3,
                lambda: 0.5,
            }],
            &cfg,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "ensemble,L_A,L_B,param,trials,mean_S,mean_R_T1,mean_R_T2,baseline_R,G_T1,G_T2,baseline_ratio,se_T1,se_T2"
        );
        assert_eq!(text.lines().count(), 2);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 6 + 15);
        assert_eq!(g[0].expected_edges(), 2.5);
        assert_eq!(
            Ensemble::Bounded {
                left: 10,
                right: 5,
                k: 3
            }
            .expected_edges(),
            20.0
        );
    }
}
