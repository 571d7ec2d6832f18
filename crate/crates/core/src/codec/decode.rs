use std::collections::BTreeMap;

use super::{CodingPlan, WorkerResult};
use crate::error::{Error, Result};
use crate::field::{FieldMatrix, FieldPolynomial};

/// Interpolated expansion of the workers' common rational function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coefficients {
    /// `rational[root][s - 1]` multiplies `1 / (x - f_root)^s`; roots are
    /// indexed `r |Q| + q`.
    pub rational: Vec<Vec<FieldMatrix>>,
    /// `polynomial[t]` multiplies `x^t`.
    pub polynomial: Vec<FieldMatrix>,
}

/// Keeps the `R` results with the smallest distinct worker indices.
fn select(plan: &CodingPlan, results: &[WorkerResult]) -> Result<Vec<WorkerResult>> {
    let needed = plan.threshold();
    let shape = plan.result_shape();
    let mut by_worker: BTreeMap<usize, &WorkerResult> = BTreeMap::new();
    for res in results {
        if res.worker >= plan.workers() {
            return Err(Error::InvalidParams(format!(
                "result from worker {} but the plan has {}",
                res.worker + 1,
                plan.workers()
            )));
        }
        if res.c.shape() != shape {
            return Err(Error::ShapeMismatch(format!(
                "worker {} returned {:?}, expected {:?}",
                res.worker + 1,
                res.c.shape(),
                shape
            )));
        }
        by_worker.entry(res.worker).or_insert(res);
    }
    if by_worker.len() < needed {
        return Err(Error::TooFewResults {
            needed,
            got: by_worker.len(),
        });
    }
    Ok(by_worker.into_values().take(needed).cloned().collect())
}

/// Solves for the pole and polynomial coefficients from `R` results. One
/// `R x R` system is shared by every entry of the result matrices.
pub fn interpolate_rational(plan: &CodingPlan, results: &[WorkerResult]) -> Result<Coefficients> {
    let chosen = select(plan, results)?;
    let f = plan.field();
    let r_total = plan.threshold();
    let sizes: Vec<usize> = plan.report().group_sizes.clone();
    let groups = sizes.len();
    let rank = plan.params().rank;
    let rational: usize = rank * sizes.iter().sum::<usize>();
    assert_eq!(rational, plan.report().rational_terms, "pole term count");
    let poly_terms = r_total - rational;
    assert_eq!(poly_terms, plan.report().polynomial_terms, "polynomial term count");

    let mut system = FieldMatrix::zeros(r_total, r_total);
    for (row, res) in chosen.iter().enumerate() {
        let x = plan.eval_points()[res.worker];
        let mut col = 0;
        for (idx, &root) in plan.roots().iter().enumerate() {
            let inv = f.inv(f.sub(x, root))?;
            let mut v = 1;
            for _ in 0..sizes[idx % groups] {
                v = f.mul(v, inv);
                system.set(row, col, v);
                col += 1;
            }
        }
        let mut v = 1;
        for _ in 0..poly_terms {
            system.set(row, col, v);
            v = f.mul(v, x);
            col += 1;
        }
        assert_eq!(col, r_total, "unknown count");
    }
    let (h, w) = plan.result_shape();
    let mut rhs = FieldMatrix::zeros(r_total, h * w);
    for (row, res) in chosen.iter().enumerate() {
        for (e, &v) in res.c.as_slice().iter().enumerate() {
            rhs.set(row, e, v);
        }
    }
    let sol = system.solve(f, &rhs)?;
    let as_matrix = |row: usize| FieldMatrix::from_vec(f, h, w, sol.row(row).to_vec());
    let mut next = 0;
    let mut rational_out = Vec::with_capacity(plan.roots().len());
    for idx in 0..plan.roots().len() {
        let coeffs = (0..sizes[idx % groups])
            .map(|s| as_matrix(next + s))
            .collect::<Result<Vec<_>>>()?;
        next += coeffs.len();
        rational_out.push(coeffs);
    }
    let polynomial = (0..poly_terms)
        .map(|t| as_matrix(next + t))
        .collect::<Result<Vec<_>>>()?;
    Ok(Coefficients {
        rational: rational_out,
        polynomial,
    })
}

/// Coefficients of `Delta(y)`, the cofactor of pair `(i, j)` of group `q` in
/// instance `r` after shifting its pole to `y = 0`: the product over the
/// other roots of the same partition of `(y + f_{r,q} - f_{r',p})^e`, where
/// `e = d_p - P^A_{p,i} - P^B_{p,j}` within instance `r` and `e = d_p`
/// across instances.
pub fn delta_coefficients(plan: &CodingPlan, r: usize, q: usize, (i, j): (usize, usize)) -> Vec<u64> {
    let f = plan.field();
    let rho = plan.params().rho;
    let h = r / rho;
    let powers = &plan.assignment().powers;
    let sizes = &plan.report().group_sizes;
    let own = plan.root(r, q);
    let mut factors = Vec::new();
    for other in h * rho..(h + 1) * rho {
        for (p, &d) in sizes.iter().enumerate() {
            if other == r && p == q {
                continue;
            }
            let e = if other == r {
                d as u64 - powers.left()[p][i] - powers.right()[p][j]
            } else {
                d as u64
            };
            factors.push((f.sub(plan.root(other, p), own), e as usize));
        }
    }
    let mut coeffs = FieldPolynomial::product_expand(f, &factors).into_coeffs();
    if coeffs.is_empty() {
        coeffs.push(0);
    }
    coeffs
}

/// Recovers `A_i B_j` for every requested pair from at least `R` results.
pub fn decode(plan: &CodingPlan, results: &[WorkerResult]) -> Result<BTreeMap<(usize, usize), FieldMatrix>> {
    let coeffs = interpolate_rational(plan, results)?;
    let f = plan.field();
    let tasks = &plan.assignment().tasks;
    let powers = &plan.assignment().powers;
    let rank = plan.params().rank;
    let (h, w) = plan.result_shape();
    // slots[(i, j)][r] = A^r_i B^r_j
    let mut slots: BTreeMap<(usize, usize), Vec<FieldMatrix>> = plan
        .graph()
        .edges()
        .iter()
        .map(|&e| (e, Vec::with_capacity(rank)))
        .collect();
    for r in 0..rank {
        for (q, group) in tasks.groups().iter().enumerate() {
            let d = group.size();
            // Pairs ordered by shifted power 1..=d.
            let mut order = vec![(usize::MAX, usize::MAX); d];
            for (i, j) in group.pairs() {
                let shifted = (powers.left()[q][i] + powers.right()[q][j]) as usize - d;
                order[shifted - 1] = (i, j);
            }
            let zetas: Vec<Vec<u64>> = order.iter().map(|&pair| delta_coefficients(plan, r, q, pair)).collect();
            let y = &coeffs.rational[r * tasks.len() + q];
            let mut x: Vec<FieldMatrix> = vec![FieldMatrix::zeros(h, w); d];
            for t in (0..d).rev() {
                let mut acc = y[t].clone();
                for u in t + 1..d {
                    let z = zetas[u].get(u - t).copied().unwrap_or(0);
                    if z != 0 {
                        acc.add_scaled(f, &x[u], f.neg(z))?;
                    }
                }
                let lead = zetas[t][0];
                if lead == 0 {
                    return Err(Error::SingularMatrix);
                }
                x[t] = acc.scaled(f, f.inv(lead)?);
            }
            for (t, pair) in order.iter().enumerate() {
                if let Some(v) = slots.get_mut(pair) {
                    v.push(x[t].clone());
                }
            }
        }
    }
    Ok(slots
        .into_iter()
        .map(|(pair, s)| (pair, plan.tensor().recombine(f, &s)))
        .collect())
}
