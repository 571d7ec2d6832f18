//! JSON documents for instances, plans, shares and results. Vertex and
//! worker indices are 1-based on disk.

use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, Dims, PowerAssignment, TaskAssignment, TaskGroup};
use crate::codec::{make_plan, CodingPlan, PlanConfig, TensorKind, WorkerResult, WorkerShare};
use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::graph::ComputationGraph;

type Rows = Vec<Vec<i64>>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub field_modulus: u64,
    pub alpha: usize,
    pub beta: usize,
    pub gamma: usize,
    #[serde(rename = "L_A")]
    pub left: usize,
    #[serde(rename = "L_B")]
    pub right: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(rename = "matrices_A", default, skip_serializing_if = "Option::is_none")]
    pub matrices_a: Option<Vec<Rows>>,
    #[serde(rename = "matrices_B", default, skip_serializing_if = "Option::is_none")]
    pub matrices_b: Option<Vec<Rows>>,
}

/// A parsed and checked instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub field: PrimeField,
    pub graph: ComputationGraph,
    pub dims: Dims,
    pub matrices: Option<(Vec<FieldMatrix>, Vec<FieldMatrix>)>,
}

fn to_rows(m: &FieldMatrix) -> Rows {
    m.to_rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| v as i64).collect())
        .collect()
}

fn parse_matrices(field: &PrimeField, list: &[Rows], rows: usize, cols: usize, side: &str) -> Result<Vec<FieldMatrix>> {
    list.iter()
        .enumerate()
        .map(|(idx, m)| {
            let mat = FieldMatrix::from_rows(field, m)?;
            if mat.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch(format!(
                    "{side}_{} is {:?}, expected {rows}x{cols}",
                    idx + 1,
                    mat.shape()
                )));
            }
            Ok(mat)
        })
        .collect()
}

impl InstanceFile {
    pub fn from_instance(inst: &Instance) -> Self {
        let (a, b) = match &inst.matrices {
            Some((a, b)) => (
                Some(a.iter().map(to_rows).collect()),
                Some(b.iter().map(to_rows).collect()),
            ),
            None => (None, None),
        };
        InstanceFile {
            field_modulus: inst.field.modulus(),
            alpha: inst.dims.alpha,
            beta: inst.dims.beta,
            gamma: inst.dims.gamma,
            left: inst.graph.left_count(),
            right: inst.graph.right_count(),
            edges: inst.graph.edges().iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
            matrices_a: a,
            matrices_b: b,
        }
    }

    /// Checks the document; isolated vertices are rejected.
    pub fn parse(&self) -> Result<Instance> {
        let field = PrimeField::new(self.field_modulus)?;
        if self.alpha == 0 || self.beta == 0 || self.gamma == 0 {
            return Err(Error::InvalidParams("matrix dimensions must be positive".into()));
        }
        let pairs: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = ComputationGraph::from_one_based(self.left, self.right, &pairs)?;
        if graph.edge_count() == 0 {
            return Err(Error::EmptyGraph);
        }
        if graph.has_isolated() {
            return Err(Error::InvalidParams(
                "instance has isolated vertices; prune them first".into(),
            ));
        }
        let dims = Dims {
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
        };
        let matrices = match (&self.matrices_a, &self.matrices_b) {
            (None, None) => None,
            (Some(a), Some(b)) => {
                if a.len() != self.left || b.len() != self.right {
                    return Err(Error::ShapeMismatch(format!(
                        "{} A and {} B matrices for L_A={} and L_B={}",
                        a.len(),
                        b.len(),
                        self.left,
                        self.right
                    )));
                }
                Some((
                    parse_matrices(&field, a, self.alpha, self.beta, "A")?,
                    parse_matrices(&field, b, self.beta, self.gamma, "B")?,
                ))
            }
            _ => return Err(Error::Format("matrices_A and matrices_B must be given together".into())),
        };
        Ok(Instance {
            field,
            graph,
            dims,
            matrices,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupFile {
    #[serde(rename = "A")]
    pub left: Vec<usize>,
    #[serde(rename = "B")]
    pub right: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanFile {
    pub groups: Vec<GroupFile>,
    #[serde(rename = "P_A")]
    pub powers_a: Vec<Vec<u64>>,
    #[serde(rename = "P_B")]
    pub powers_b: Vec<Vec<u64>>,
    #[serde(default)]
    pub roots: Vec<u64>,
    #[serde(default)]
    pub eval_points: Vec<u64>,
    #[serde(default = "one")]
    pub m: usize,
    #[serde(default = "one")]
    pub p: usize,
    #[serde(default = "one")]
    pub n: usize,
    #[serde(default = "one")]
    pub rho: usize,
    #[serde(default = "naive")]
    pub tensor: TensorKind,
    #[serde(rename = "R", default)]
    pub threshold: usize,
}

fn one() -> usize {
    1
}

fn naive() -> TensorKind {
    TensorKind::Naive
}

impl PlanFile {
    pub fn from_plan(plan: &CodingPlan) -> Self {
        let asg = plan.assignment();
        let params = plan.params();
        PlanFile {
            groups: asg
                .tasks
                .groups()
                .iter()
                .map(|g| GroupFile {
                    left: g.left().iter().map(|i| i + 1).collect(),
                    right: g.right().iter().map(|j| j + 1).collect(),
                })
                .collect(),
            powers_a: asg.powers.left().to_vec(),
            powers_b: asg.powers.right().to_vec(),
            roots: plan.roots().to_vec(),
            eval_points: plan.eval_points().to_vec(),
            m: params.m,
            p: params.p,
            n: params.n,
            rho: params.rho,
            tensor: plan.tensor().kind(),
            threshold: plan.threshold(),
        }
    }

    /// The task and power assignment, converted to 0-based indices. Groups
    /// are put in canonical order and powers follow them.
    pub fn assignment(&self) -> Result<Assignment> {
        if self.powers_a.len() != self.groups.len() || self.powers_b.len() != self.groups.len() {
            return Err(Error::Format(format!(
                "{} groups but {} P_A and {} P_B rows",
                self.groups.len(),
                self.powers_a.len(),
                self.powers_b.len()
            )));
        }
        let zero_based = |v: &[usize]| -> Result<Vec<usize>> {
            v.iter()
                .map(|&x| {
                    x.checked_sub(1)
                        .ok_or_else(|| Error::Format("indices are 1-based".into()))
                })
                .collect()
        };
        let mut rows: Vec<(TaskGroup, Vec<u64>, Vec<u64>)> = self
            .groups
            .iter()
            .zip(&self.powers_a)
            .zip(&self.powers_b)
            .map(|((g, pa), pb)| {
                Ok((
                    TaskGroup::new(zero_based(&g.left)?, zero_based(&g.right)?),
                    pa.clone(),
                    pb.clone(),
                ))
            })
            .collect::<Result<_>>()?;
        rows.sort_by(|x, y| x.0.cmp(&y.0));
        let tasks = TaskAssignment::new(rows.iter().map(|r| r.0.clone()).collect());
        let powers = PowerAssignment::new(
            rows.iter().map(|r| r.1.clone()).collect(),
            rows.into_iter().map(|r| r.2).collect(),
        );
        Ok(Assignment { tasks, powers })
    }

    /// Rebuilds the coding plan for `inst`. With `workers` set the worker
    /// count is overridden; otherwise it is read from `eval_points`. Stored
    /// roots, points and threshold must agree with the rebuilt plan.
    pub fn to_plan(&self, inst: &Instance, workers: Option<usize>) -> Result<CodingPlan> {
        let asg = self.assignment()?;
        let k = workers.unwrap_or(self.eval_points.len());
        let config = PlanConfig {
            workers: k,
            m: self.m,
            p: self.p,
            n: self.n,
            rho: self.rho,
            tensor: self.tensor,
        };
        let plan = make_plan(&inst.graph, &asg, inst.dims, config, inst.field)?;
        if self.threshold != 0 && self.threshold != plan.threshold() {
            return Err(Error::Format(format!(
                "plan file states R={} but the assignment gives R={}",
                self.threshold,
                plan.threshold()
            )));
        }
        if !self.roots.is_empty() && self.roots != plan.roots() {
            return Err(Error::Format("plan roots differ from the standard layout".into()));
        }
        if workers.is_none() && self.eval_points != plan.eval_points() {
            return Err(Error::Format(
                "plan evaluation points differ from the standard layout".into(),
            ));
        }
        Ok(plan)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareFile {
    pub worker: usize,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
}

impl ShareFile {
    pub fn from_share(s: &WorkerShare) -> Self {
        ShareFile {
            worker: s.worker + 1,
            a: to_rows(&s.a),
            b: to_rows(&s.b),
        }
    }

    pub fn to_share(&self, field: &PrimeField) -> Result<WorkerShare> {
        Ok(WorkerShare {
            worker: self
                .worker
                .checked_sub(1)
                .ok_or_else(|| Error::Format("workers are 1-based".into()))?,
            a: FieldMatrix::from_rows(field, &self.a)?,
            b: FieldMatrix::from_rows(field, &self.b)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFile {
    pub worker: usize,
    #[serde(rename = "C")]
    pub c: Rows,
}

impl ResultFile {
    pub fn from_result(r: &WorkerResult) -> Self {
        ResultFile {
            worker: r.worker + 1,
            c: to_rows(&r.c),
        }
    }

    pub fn to_result(&self, field: &PrimeField) -> Result<WorkerResult> {
        Ok(WorkerResult {
            worker: self
                .worker
                .checked_sub(1)
                .ok_or_else(|| Error::Format("workers are 1-based".into()))?,
            c: FieldMatrix::from_rows(field, &self.c)?,
        })
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn from_json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}
