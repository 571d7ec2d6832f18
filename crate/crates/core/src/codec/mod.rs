//! Encoding, worker computation, interpolation and decoding.
//!
//! Instance `r` of the bilinear construction gives group `q` the root
//! `f = r |Q| + q + 1`; worker `k` (0-based) evaluates at
//! `x_k = rank |Q| + k + 1`. Instances are split into `rank / rho`
//! partitions of `rho` consecutive instances; partition `h` is encoded on its
//! own roots and the partitions are concatenated along the inner dimension.

mod decode;
mod tensor;

pub use decode::{decode, delta_coefficients, interpolate_rational, Coefficients};
pub use tensor::{induced_graph, BilinearTensor, TensorKind};

use crate::assignment::{recovery_threshold, Assignment, Dims, FccParams, ThresholdReport};
use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::graph::ComputationGraph;

/// Everything the sources, workers and decoder agree on.
#[derive(Debug, Clone)]
pub struct CodingPlan {
    field: PrimeField,
    graph: ComputationGraph,
    assignment: Assignment,
    tensor: BilinearTensor,
    params: FccParams,
    dims: Dims,
    report: ThresholdReport,
    roots: Vec<u64>,
    eval_points: Vec<u64>,
}

/// Inputs to [`make_plan`] other than the instance and assignment.
#[derive(Debug, Clone, Copy)]
pub struct PlanConfig {
    pub workers: usize,
    pub m: usize,
    pub p: usize,
    pub n: usize,
    pub rho: usize,
    pub tensor: TensorKind,
}

impl PlanConfig {
    /// Base scheme with `workers` workers.
    pub fn base(workers: usize) -> Self {
        PlanConfig {
            workers,
            m: 1,
            p: 1,
            n: 1,
            rho: 1,
            tensor: TensorKind::Naive,
        }
    }
}

pub fn make_plan(
    graph: &ComputationGraph,
    assignment: &Assignment,
    dims: Dims,
    config: PlanConfig,
    field: PrimeField,
) -> Result<CodingPlan> {
    let PlanConfig {
        workers,
        m,
        p,
        n,
        rho,
        tensor,
    } = config;
    if m == 0 || p == 0 || n == 0 {
        return Err(Error::InvalidParams("m, p, n must be positive".into()));
    }
    for (dim, part, name) in [
        (dims.alpha, m, "m | alpha"),
        (dims.beta, p, "p | beta"),
        (dims.gamma, n, "n | gamma"),
    ] {
        if dim == 0 || dim % part != 0 {
            return Err(Error::DivisibilityViolation(format!(
                "{name} fails: {part} does not divide {dim}"
            )));
        }
    }
    let tensor = BilinearTensor::build(tensor, m, p, n)?;
    let rank = tensor.rank();
    let params = FccParams { m, p, n, rho, rank };
    let report = recovery_threshold(graph, &assignment.tasks, &assignment.powers, params)?;
    let groups = assignment.tasks.len();
    let required = (rank * groups + workers) as u64;
    if field.modulus() <= required {
        return Err(Error::FieldTooSmall {
            modulus: field.modulus(),
            required,
        });
    }
    if workers < report.threshold {
        return Err(Error::TooFewWorkers {
            workers,
            threshold: report.threshold,
        });
    }
    if dims.beta < (graph.left_count() * dims.alpha).max(graph.right_count() * dims.gamma) {
        log::info!(
            "beta={} is below max(L_A alpha, L_B gamma); the lower bound may not be tight",
            dims.beta
        );
    }
    let roots = (1..=(rank * groups) as u64).collect();
    let base = (rank * groups) as u64;
    let eval_points = (1..=workers as u64).map(|k| base + k).collect();
    Ok(CodingPlan {
        field,
        graph: graph.clone(),
        assignment: assignment.clone(),
        tensor,
        params,
        dims,
        report,
        roots,
        eval_points,
    })
}

impl CodingPlan {
    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn graph(&self) -> &ComputationGraph {
        &self.graph
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn tensor(&self) -> &BilinearTensor {
        &self.tensor
    }

    pub fn params(&self) -> FccParams {
        self.params
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn report(&self) -> &ThresholdReport {
        &self.report
    }

    pub fn threshold(&self) -> usize {
        self.report.threshold
    }

    pub fn workers(&self) -> usize {
        self.eval_points.len()
    }

    pub fn roots(&self) -> &[u64] {
        &self.roots
    }

    pub fn eval_points(&self) -> &[u64] {
        &self.eval_points
    }

    /// Root of group `q` in bilinear instance `r`.
    pub fn root(&self, r: usize, q: usize) -> u64 {
        self.roots[r * self.assignment.tasks.len() + q]
    }

    pub fn partitions(&self) -> usize {
        self.params.partitions()
    }

    /// Shape of each worker result.
    pub fn result_shape(&self) -> (usize, usize) {
        (self.dims.alpha / self.params.m, self.dims.gamma / self.params.n)
    }

    /// `prod_q (x - f_{r,q})^{e_q}` over instance `r`'s roots.
    fn root_product(&self, x: u64, r: usize, exps: impl Iterator<Item = u64>) -> u64 {
        let f = &self.field;
        exps.enumerate()
            .fold(1, |acc, (q, e)| f.mul(acc, f.pow(f.sub(x, self.root(r, q)), e)))
    }
}

/// Matrices sent to one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerShare {
    /// 0-based worker index.
    pub worker: usize,
    pub a: FieldMatrix,
    pub b: FieldMatrix,
}

/// A worker's reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerResult {
    pub worker: usize,
    pub c: FieldMatrix,
}

/// Builds every worker's share from the source matrices.
pub fn encode(plan: &CodingPlan, a: &[FieldMatrix], b: &[FieldMatrix]) -> Result<Vec<WorkerShare>> {
    let g = &plan.graph;
    let Dims { alpha, beta, gamma } = plan.dims;
    if a.len() != g.left_count() || b.len() != g.right_count() {
        return Err(Error::ShapeMismatch(format!(
            "expected {} A and {} B matrices, got {} and {}",
            g.left_count(),
            g.right_count(),
            a.len(),
            b.len()
        )));
    }
    if let Some(x) = a.iter().find(|x| x.shape() != (alpha, beta)) {
        return Err(Error::ShapeMismatch(format!(
            "A matrix is {:?}, expected {alpha}x{beta}",
            x.shape()
        )));
    }
    if let Some(x) = b.iter().find(|x| x.shape() != (beta, gamma)) {
        return Err(Error::ShapeMismatch(format!(
            "B matrix is {:?}, expected {beta}x{gamma}",
            x.shape()
        )));
    }
    let f = &plan.field;
    // slot_a[i][r] = A^r_i
    let slot_a: Vec<Vec<FieldMatrix>> = a.iter().map(|x| plan.tensor.encode_left(f, x)).collect();
    let slot_b: Vec<Vec<FieldMatrix>> = b.iter().map(|x| plan.tensor.encode_right(f, x)).collect();
    let tasks = &plan.assignment.tasks;
    let powers = &plan.assignment.powers;
    let sizes: Vec<u64> = tasks.groups().iter().map(|g| g.size() as u64).collect();
    let rho = plan.params.rho;
    let (ah, aw) = slot_a[0][0].shape();
    let (bh, bw) = slot_b[0][0].shape();

    plan.eval_points
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let mut a_parts = Vec::with_capacity(plan.partitions());
            let mut b_parts = Vec::with_capacity(plan.partitions());
            for h in 0..plan.partitions() {
                let theta = (0..rho).fold(1, |acc, l| {
                    f.mul(acc, plan.root_product(x, h * rho + l, sizes.iter().copied()))
                });
                let mut ax = FieldMatrix::zeros(ah, aw);
                let mut bx = FieldMatrix::zeros(bh, bw);
                for l in 0..rho {
                    let r = h * rho + l;
                    for (i, slots) in slot_a.iter().enumerate() {
                        let denom = plan.root_product(x, r, powers.left().iter().map(|v| v[i]));
                        ax.add_scaled(f, &slots[r], f.div(theta, denom)?)?;
                    }
                    for (j, slots) in slot_b.iter().enumerate() {
                        let denom = plan.root_product(x, r, powers.right().iter().map(|v| v[j]));
                        bx.add_scaled(f, &slots[r], f.inv(denom)?)?;
                    }
                }
                a_parts.push(ax);
                b_parts.push(bx);
            }
            Ok(WorkerShare {
                worker: k,
                a: FieldMatrix::hstack(&a_parts)?,
                b: FieldMatrix::vstack(&b_parts)?,
            })
        })
        .collect()
}

/// The worker's whole job: multiply the two matrices it was sent.
pub fn worker_compute(field: &PrimeField, share: &WorkerShare) -> Result<WorkerResult> {
    Ok(WorkerResult {
        worker: share.worker,
        c: share.a.mul(field, &share.b)?,
    })
}

/// Direct products `A_i B_j` for every requested pair, the reference the
/// decoder is checked against.
pub fn direct_products(
    field: &PrimeField,
    graph: &ComputationGraph,
    a: &[FieldMatrix],
    b: &[FieldMatrix],
) -> Result<std::collections::BTreeMap<(usize, usize), FieldMatrix>> {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| Ok(((i, j), a[i].mul(field, &b[j])?)))
        .collect()
}

/// Uniformly random source matrices for `graph` with the given dimensions.
pub fn random_inputs<R: rand::Rng + ?Sized>(
    field: &PrimeField,
    graph: &ComputationGraph,
    dims: Dims,
    rng: &mut R,
) -> (Vec<FieldMatrix>, Vec<FieldMatrix>) {
    let a = (0..graph.left_count())
        .map(|_| FieldMatrix::random(field, dims.alpha, dims.beta, rng))
        .collect();
    let b = (0..graph.right_count())
        .map(|_| FieldMatrix::random(field, dims.beta, dims.gamma, rng))
        .collect();
    (a, b)
}

#[cfg(test)]
mod tests;
