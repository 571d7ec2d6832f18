//! Bilinear constructions `C_{u,v} = sum_r c[r][u][v] (sum a[r] . A)(sum b[r] . B)`
//! for block-partitioned products.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldMatrix, PrimeField};
use crate::graph::ComputationGraph;
use crate::seed::stream_rng;

const IDENTITY_CHECKS: u64 = 50;
const CHECK_SEED: u64 = 0x7e45_0c4e_c4ec_0001;

/// Tensor family; block shape comes from the plan's `m, p, n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Naive,
    Strassen,
}

impl fmt::Display for TensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TensorKind::Naive => "naive",
            TensorKind::Strassen => "strassen",
        })
    }
}

impl std::str::FromStr for TensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(TensorKind::Naive),
            "strassen" => Ok(TensorKind::Strassen),
            other => Err(Error::Format(format!("unknown tensor '{other}'"))),
        }
    }
}

/// Coefficient tensors of a bilinear algorithm for `(m x p)(p x n)` block
/// products. Row-major: `a[r][u * p + v]`, `b[r][u * n + v]`,
/// `c[r][u * n + v]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilinearTensor {
    kind: TensorKind,
    m: usize,
    p: usize,
    n: usize,
    a: Vec<Vec<i64>>,
    b: Vec<Vec<i64>>,
    c: Vec<Vec<i64>>,
}

impl BilinearTensor {
    /// Builds and checks a tensor from raw coefficients.
    pub fn from_parts(
        kind: TensorKind,
        (m, p, n): (usize, usize, usize),
        a: Vec<Vec<i64>>,
        b: Vec<Vec<i64>>,
        c: Vec<Vec<i64>>,
    ) -> Result<Self> {
        let rank = a.len();
        if rank == 0
            || b.len() != rank
            || c.len() != rank
            || a.iter().any(|r| r.len() != m * p)
            || b.iter().any(|r| r.len() != p * n)
            || c.iter().any(|r| r.len() != m * n)
        {
            return Err(Error::InvalidTensor);
        }
        let t = BilinearTensor { kind, m, p, n, a, b, c };
        t.check_identity()?;
        Ok(t)
    }

    /// One slot per scalar product `a_{u,l} b_{l,v}`; rank `m p n`.
    pub fn naive(m: usize, p: usize, n: usize) -> Result<Self> {
        if m == 0 || p == 0 || n == 0 {
            return Err(Error::InvalidParams("tensor dimensions must be positive".into()));
        }
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for u in 0..m {
            for l in 0..p {
                for v in 0..n {
                    let mut ra = vec![0; m * p];
                    let mut rb = vec![0; p * n];
                    let mut rc = vec![0; m * n];
                    ra[u * p + l] = 1;
                    rb[l * n + v] = 1;
                    rc[u * n + v] = 1;
                    a.push(ra);
                    b.push(rb);
                    c.push(rc);
                }
            }
        }
        Self::from_parts(TensorKind::Naive, (m, p, n), a, b, c)
    }

    /// Strassen's rank-7 scheme for 2x2 blocks.
    pub fn strassen() -> Result<Self> {
        // Block order: [11, 12, 21, 22].
        let a = vec![
            vec![1, 0, 0, 1],
            vec![0, 0, 1, 1],
            vec![1, 0, 0, 0],
            vec![0, 0, 0, 1],
            vec![1, 1, 0, 0],
            vec![-1, 0, 1, 0],
            vec![0, 1, 0, -1],
        ];
        let b = vec![
            vec![1, 0, 0, 1],
            vec![1, 0, 0, 0],
            vec![0, 1, 0, -1],
            vec![-1, 0, 1, 0],
            vec![0, 0, 0, 1],
            vec![1, 1, 0, 0],
            vec![0, 0, 1, 1],
        ];
        let c = vec![
            vec![1, 0, 0, 1],
            vec![0, 0, 1, -1],
            vec![0, 1, 0, 1],
            vec![1, 0, 1, 0],
            vec![-1, 1, 0, 0],
            vec![0, 0, 0, 1],
            vec![1, 0, 0, 0],
        ];
        Self::from_parts(TensorKind::Strassen, (2, 2, 2), a, b, c)
    }

    pub fn build(kind: TensorKind, m: usize, p: usize, n: usize) -> Result<Self> {
        match kind {
            TensorKind::Naive => Self::naive(m, p, n),
            TensorKind::Strassen if (m, p, n) == (2, 2, 2) => Self::strassen(),
            TensorKind::Strassen => Err(Error::InvalidParams(format!(
                "the strassen tensor needs m=p=n=2, got {m},{p},{n}"
            ))),
        }
    }

    pub fn kind(&self) -> TensorKind {
        self.kind
    }

    pub fn rank(&self) -> usize {
        self.a.len()
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.m, self.p, self.n)
    }

    pub fn a(&self, r: usize) -> &[i64] {
        &self.a[r]
    }

    pub fn b(&self, r: usize) -> &[i64] {
        &self.b[r]
    }

    pub fn c(&self, r: usize) -> &[i64] {
        &self.c[r]
    }

    /// `sum_{u,v} coeffs[u * cols + v] * block(u, v)` of `x` split into
    /// `rows x cols` blocks.
    pub fn combine_blocks(
        field: &PrimeField,
        x: &FieldMatrix,
        rows: usize,
        cols: usize,
        coeffs: &[i64],
    ) -> FieldMatrix {
        let (h, w) = (x.rows() / rows, x.cols() / cols);
        let mut out = FieldMatrix::zeros(h, w);
        for u in 0..rows {
            for v in 0..cols {
                let k = coeffs[u * cols + v];
                if k != 0 {
                    let blk = x.block(u * h, v * w, h, w);
                    out.add_scaled(field, &blk, field.from_i64(k))
                        .expect("blocks share a shape");
                }
            }
        }
        out
    }

    /// Per-slot encodings `A^r = sum a[r] . A` for every slot.
    pub fn encode_left(&self, field: &PrimeField, x: &FieldMatrix) -> Vec<FieldMatrix> {
        self.a
            .iter()
            .map(|row| Self::combine_blocks(field, x, self.m, self.p, row))
            .collect()
    }

    pub fn encode_right(&self, field: &PrimeField, x: &FieldMatrix) -> Vec<FieldMatrix> {
        self.b
            .iter()
            .map(|row| Self::combine_blocks(field, x, self.p, self.n, row))
            .collect()
    }

    /// Reassembles the full product from the slot products.
    pub fn recombine(&self, field: &PrimeField, slots: &[FieldMatrix]) -> FieldMatrix {
        let (h, w) = slots[0].shape();
        let mut out = FieldMatrix::zeros(h * self.m, w * self.n);
        for u in 0..self.m {
            for v in 0..self.n {
                let mut blk = FieldMatrix::zeros(h, w);
                for (r, s) in slots.iter().enumerate() {
                    let k = self.c[r][u * self.n + v];
                    if k != 0 {
                        blk.add_scaled(field, s, field.from_i64(k))
                            .expect("slot products share a shape");
                    }
                }
                out.set_block(u * h, v * w, &blk);
            }
        }
        out
    }

    /// Computes `x y` through the tensor.
    pub fn multiply(&self, field: &PrimeField, x: &FieldMatrix, y: &FieldMatrix) -> Result<FieldMatrix> {
        let xa = self.encode_left(field, x);
        let yb = self.encode_right(field, y);
        let slots = xa
            .iter()
            .zip(&yb)
            .map(|(l, r)| l.mul(field, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.recombine(field, &slots))
    }

    fn check_identity(&self) -> Result<()> {
        let field = PrimeField::default();
        for t in 0..IDENTITY_CHECKS {
            let mut rng = stream_rng(CHECK_SEED, t);
            let x = FieldMatrix::random(&field, self.m, self.p, &mut rng);
            let y = FieldMatrix::random(&field, self.p, self.n, &mut rng);
            if self.multiply(&field, &x, &y)? != x.mul(&field, &y)? {
                return Err(Error::InvalidTensor);
            }
        }
        Ok(())
    }
}

/// The block-diagonal instance seen after bilinear encoding: `rank` disjoint
/// copies of `graph`, copy `r` on vertices `r L_A + i` and `r L_B + j`.
pub fn induced_graph(graph: &ComputationGraph, rank: usize) -> ComputationGraph {
    let (la, lb) = (graph.left_count(), graph.right_count());
    ComputationGraph::new(
        la * rank,
        lb * rank,
        (0..rank).flat_map(|r| graph.edges().iter().map(move |&(i, j)| (r * la + i, r * lb + j))),
    )
    .expect("copies stay in range")
}
