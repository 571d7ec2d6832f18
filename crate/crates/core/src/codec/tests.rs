use itertools::Itertools;
use rand::Rng;

use super::*;
use crate::assignment::tests::worked_plan;
use crate::assignment::{t2_assignment, PowerAssignment, T2Side, TaskAssignment, TaskGroup, DEFAULT_SEARCH_BUDGET};
use crate::graph::sample_erdos_renyi;
use crate::graph::tests::worked_example;
use crate::seed::stream_rng;

fn scalar_dims() -> Dims {
    Dims {
        alpha: 1,
        beta: 1,
        gamma: 1,
    }
}

fn field() -> PrimeField {
    PrimeField::default()
}

fn run_all(plan: &CodingPlan, a: &[FieldMatrix], b: &[FieldMatrix]) -> Vec<WorkerResult> {
    encode(plan, a, b)
        .unwrap()
        .iter()
        .map(|s| worker_compute(plan.field(), s).unwrap())
        .collect()
}

fn assert_roundtrip(plan: &CodingPlan, seed: u64) {
    let mut rng = stream_rng(seed, 0);
    let (a, b) = random_inputs(plan.field(), plan.graph(), plan.dims(), &mut rng);
    let results = run_all(plan, &a, &b);
    let got = decode(plan, &results[..plan.threshold()]).unwrap();
    assert_eq!(got, direct_products(plan.field(), plan.graph(), &a, &b).unwrap());
}

#[test]
fn worked_plan_layout() {
    let g = worked_example();
    let plan = make_plan(&g, &worked_plan(), scalar_dims(), PlanConfig::base(5), field()).unwrap();
    assert_eq!(plan.roots(), &[1, 2]);
    assert_eq!(plan.eval_points(), &[3, 4, 5, 6, 7]);
    assert_eq!(plan.threshold(), 5);
}

#[test]
fn plan_errors() {
    let g = worked_example();
    let asg = worked_plan();
    let odd = Dims {
        alpha: 3,
        beta: 2,
        gamma: 2,
    };
    let cfg = PlanConfig {
        m: 2,
        n: 2,
        ..PlanConfig::base(40)
    };
    assert!(matches!(
        make_plan(&g, &asg, odd, cfg, field()),
        Err(Error::DivisibilityViolation(_))
    ));
    assert_eq!(
        make_plan(&g, &asg, scalar_dims(), PlanConfig::base(4), field()).unwrap_err(),
        Error::TooFewWorkers {
            workers: 4,
            threshold: 5
        }
    );
    // 2 roots + 5 points need modulus > 7.
    assert_eq!(
        make_plan(
            &g,
            &asg,
            scalar_dims(),
            PlanConfig::base(5),
            PrimeField::new(7).unwrap()
        )
        .unwrap_err(),
        Error::FieldTooSmall {
            modulus: 7,
            required: 7
        }
    );
    assert!(make_plan(
        &g,
        &asg,
        scalar_dims(),
        PlanConfig::base(5),
        PrimeField::new(11).unwrap()
    )
    .is_ok());
    let cfg = PlanConfig {
        rho: 3,
        m: 2,
        p: 2,
        n: 2,
        tensor: TensorKind::Strassen,
        workers: 100,
    };
    let d = Dims {
        alpha: 2,
        beta: 2,
        gamma: 2,
    };
    assert_eq!(
        make_plan(&g, &asg, d, cfg, field()).unwrap_err(),
        Error::InvalidRho { rho: 3, rank: 7 }
    );
}

#[test]
fn single_edge() {
    let g = ComputationGraph::from_one_based(1, 1, &[(1, 1)]).unwrap();
    let asg = crate::assignment::t1_assignment(&g);
    let f = field();
    let dims = Dims {
        alpha: 2,
        beta: 3,
        gamma: 2,
    };
    let plan = make_plan(&g, &asg, dims, PlanConfig::base(1), f).unwrap();
    assert_eq!(plan.threshold(), 1);
    assert_eq!(plan.eval_points().len(), 1);
    let mut rng = stream_rng(1, 1);
    let (a, b) = random_inputs(&f, &g, dims, &mut rng);
    let shares = encode(&plan, &a, &b).unwrap();
    // Theta / a_1 collapses to 1.
    assert_eq!(shares[0].a, a[0]);
    let x = plan.eval_points()[0];
    assert_eq!(shares[0].b, b[0].scaled(&f, f.inv(f.sub(x, 1)).unwrap()));
    let results: Vec<_> = shares.iter().map(|s| worker_compute(&f, s).unwrap()).collect();
    assert_eq!(decode(&plan, &results).unwrap()[&(0, 0)], a[0].mul(&f, &b[0]).unwrap());
}

#[test]
fn worked_encoding_matches_hand_expansion() {
    let g = worked_example();
    let f = field();
    let plan = make_plan(&g, &worked_plan(), scalar_dims(), PlanConfig::base(5), f).unwrap();
    let mut rng = stream_rng(2, 0);
    let (a, b) = random_inputs(&f, &g, scalar_dims(), &mut rng);
    let shares = encode(&plan, &a, &b).unwrap();
    let (a1, a2) = (a[0].get(0, 0), a[1].get(0, 0));
    let (f1, f2) = (1, 2);
    for s in &shares {
        let x = plan.eval_points()[s.worker];
        let sq = |v: u64| f.mul(v, v);
        let want = f.add(f.mul(sq(f.sub(x, f2)), a1), f.mul(sq(f.sub(x, f1)), a2));
        assert_eq!(s.a.get(0, 0), want);
        // B(x) = B1/(x-f1)^2 + B2/((x-f1)(x-f2)) + B3/(x-f2)^2
        let bs: Vec<u64> = b.iter().map(|m| m.get(0, 0)).collect();
        let terms = [
            f.div(bs[0], sq(f.sub(x, f1))).unwrap(),
            f.div(bs[1], f.mul(f.sub(x, f1), f.sub(x, f2))).unwrap(),
            f.div(bs[2], sq(f.sub(x, f2))).unwrap(),
        ];
        assert_eq!(s.b.get(0, 0), terms.iter().fold(0, |acc, &t| f.add(acc, t)));
    }
}

#[test]
fn worker_output_matches_rational_function() {
    // Oracle: sum over all (i, j) of A_i B_j Theta(x) / (a_i(x) b_j(x)),
    // evaluated term by term.
    let f = field();
    let mut rng = stream_rng(4, 0);
    for _ in 0..20 {
        let g = sample_erdos_renyi(4, 4, 0.5, &mut rng).unwrap().graph;
        let asg = t2_assignment(&g, T2Side::Best, DEFAULT_SEARCH_BUDGET);
        let r = asg.threshold(&g, FccParams::BASE).unwrap().threshold;
        let plan = make_plan(&g, &asg, scalar_dims(), PlanConfig::base(r + 1), f).unwrap();
        let (a, b) = random_inputs(&f, &g, scalar_dims(), &mut rng);
        let results = run_all(&plan, &a, &b);
        let groups = asg.tasks.groups();
        for res in &results {
            let x = plan.eval_points()[res.worker];
            let theta = groups.iter().enumerate().fold(1, |acc, (q, gr)| {
                f.mul(acc, f.pow(f.sub(x, q as u64 + 1), gr.size() as u64))
            });
            let mut want = 0;
            for (i, ai) in a.iter().enumerate() {
                for (j, bj) in b.iter().enumerate() {
                    let mut den = 1;
                    for q in 0..groups.len() {
                        let e = asg.powers.left()[q][i] + asg.powers.right()[q][j];
                        den = f.mul(den, f.pow(f.sub(x, q as u64 + 1), e));
                    }
                    let prod = f.mul(ai.get(0, 0), bj.get(0, 0));
                    want = f.add(want, f.mul(prod, f.div(theta, den).unwrap()));
                }
            }
            assert_eq!(res.c.get(0, 0), want);
        }
    }
}

#[test]
fn csa_two_pole_example() {
    // Two singleton groups on a diagonal instance: R = 3, one constant term.
    let g = ComputationGraph::from_one_based(2, 2, &[(1, 1), (2, 2)]).unwrap();
    let asg = crate::assignment::t1_assignment(&g);
    let f = field();
    let plan = make_plan(&g, &asg, scalar_dims(), PlanConfig::base(3), f).unwrap();
    assert_eq!(plan.threshold(), 3);
    assert_eq!(plan.report().polynomial_terms, 1);
    let mut rng = stream_rng(5, 0);
    let (a, b) = random_inputs(&f, &g, scalar_dims(), &mut rng);
    let results = run_all(&plan, &a, &b);
    let co = interpolate_rational(&plan, &results).unwrap();
    let p11 = f.mul(a[0].get(0, 0), b[0].get(0, 0));
    let p22 = f.mul(a[1].get(0, 0), b[1].get(0, 0));
    assert_eq!(co.rational[0][0].get(0, 0), f.mul(f.sub(1, 2), p11));
    assert_eq!(co.rational[1][0].get(0, 0), f.mul(f.sub(2, 1), p22));
    assert_eq!(co.polynomial.len(), 1);
}

#[test]
fn interpolation_recovers_random_coefficients() {
    // Forward oracle: pick coefficients, evaluate the rational function at
    // each point, hand the values to the solver.
    let f = field();
    let mut rng = stream_rng(6, 0);
    for &(rho, kind, m) in &[
        (1, TensorKind::Naive, 1),
        (2, TensorKind::Naive, 2),
        (1, TensorKind::Strassen, 2),
    ] {
        let g = worked_example();
        let dims = Dims {
            alpha: 2 * m,
            beta: 2,
            gamma: 2 * m,
        };
        let cfg = PlanConfig {
            workers: 80,
            m,
            p: if kind == TensorKind::Strassen { 2 } else { 1 },
            n: m,
            rho,
            tensor: kind,
        };
        let plan = make_plan(&g, &worked_plan(), dims, cfg, f).unwrap();
        let (h, w) = plan.result_shape();
        let sizes = &plan.report().group_sizes;
        let rational: Vec<Vec<FieldMatrix>> = (0..plan.roots().len())
            .map(|idx| {
                (0..sizes[idx % sizes.len()])
                    .map(|_| FieldMatrix::random(&f, h, w, &mut rng))
                    .collect()
            })
            .collect();
        let poly: Vec<FieldMatrix> = (0..plan.report().polynomial_terms)
            .map(|_| FieldMatrix::random(&f, h, w, &mut rng))
            .collect();
        let results: Vec<WorkerResult> = plan
            .eval_points()
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let mut c = FieldMatrix::zeros(h, w);
                for (idx, coeffs) in rational.iter().enumerate() {
                    let inv = f.inv(f.sub(x, plan.roots()[idx])).unwrap();
                    for (s, m) in coeffs.iter().enumerate() {
                        c.add_scaled(&f, m, f.pow(inv, s as u64 + 1)).unwrap();
                    }
                }
                for (t, m) in poly.iter().enumerate() {
                    c.add_scaled(&f, m, f.pow(x, t as u64)).unwrap();
                }
                WorkerResult { worker: k, c }
            })
            .collect();
        let co = interpolate_rational(&plan, &results[7..7 + plan.threshold()]).unwrap();
        assert_eq!(co.rational, rational);
        assert_eq!(co.polynomial, poly);
    }
}

#[test]
fn delta_single_group_is_one() {
    let g = ComputationGraph::from_one_based(2, 2, &[(1, 1), (1, 2), (2, 1)]).unwrap();
    let tasks = TaskAssignment::new(vec![TaskGroup::new(vec![0, 1], vec![0, 1])]);
    let powers = PowerAssignment::identity(&tasks, 2, 2);
    let asg = Assignment { tasks, powers };
    let plan = make_plan(&g, &asg, scalar_dims(), PlanConfig::base(10), field()).unwrap();
    assert_eq!(delta_coefficients(&plan, 0, 0, (0, 1)), vec![1]);
}

#[test]
fn delta_on_worked_plan() {
    let g = worked_example();
    let f = field();
    let plan = make_plan(&g, &worked_plan(), scalar_dims(), PlanConfig::base(5), f).unwrap();
    let d12 = f.sub(1, 2);
    // Pair (1,1): B_1 is outside group 2 and A_1 too, so the cofactor is
    // (y + f1 - f2)^2.
    assert_eq!(
        delta_coefficients(&plan, 0, 0, (0, 0)),
        vec![f.mul(d12, d12), f.mul(2, d12), 1]
    );
    // Pair (1,2): B_2 has power 1 in group 2, leaving exponent 1.
    assert_eq!(delta_coefficients(&plan, 0, 0, (0, 1)), vec![d12, 1]);
}

#[test]
fn delta_constant_term_nonzero() {
    let f = field();
    let mut rng = stream_rng(7, 0);
    for _ in 0..100 {
        let la = rng.gen_range(1..=5);
        let lb = rng.gen_range(1..=5);
        let g = sample_erdos_renyi(la, lb, 0.5, &mut rng).unwrap().graph;
        let asg = t2_assignment(&g, T2Side::Best, 10_000);
        let rho = [1, 2][rng.gen_range(0..2)];
        let cfg = PlanConfig {
            workers: 400,
            m: 1,
            p: 2,
            n: 1,
            rho,
            tensor: TensorKind::Naive,
        };
        let plan = make_plan(
            &g,
            &asg,
            Dims {
                alpha: 1,
                beta: 2,
                gamma: 1,
            },
            cfg,
            f,
        )
        .unwrap();
        for r in 0..plan.params().rank {
            for (q, gr) in asg.tasks.groups().iter().enumerate() {
                for pair in gr.pairs() {
                    assert_ne!(delta_coefficients(&plan, r, q, pair)[0], 0);
                }
            }
        }
    }
}

#[test]
fn worked_plan_roundtrip() {
    let g = worked_example();
    for seed in 0..5 {
        let plan = make_plan(&g, &worked_plan(), scalar_dims(), PlanConfig::base(5), field()).unwrap();
        assert_roundtrip(&plan, seed);
    }
}

#[test]
fn strassen_on_worked_example() {
    let g = worked_example();
    let dims = Dims {
        alpha: 4,
        beta: 4,
        gamma: 4,
    };
    let cfg = PlanConfig {
        workers: 29,
        m: 2,
        p: 2,
        n: 2,
        rho: 1,
        tensor: TensorKind::Strassen,
    };
    let plan = make_plan(&g, &worked_plan(), dims, cfg, field()).unwrap();
    // (7 + 1) * 4 - 2 - 2 + 1
    assert_eq!(plan.threshold(), 29);
    assert_roundtrip(&plan, 8);
    let rho7 = PlanConfig {
        rho: 7,
        workers: 56,
        ..cfg
    };
    let plan = make_plan(&g, &worked_plan(), dims, rho7, field()).unwrap();
    assert_eq!(plan.threshold(), 14 * 4 - 3);
    assert_roundtrip(&plan, 9);
}

#[test]
fn naive_tensor_with_rho() {
    let g = worked_example();
    let dims = Dims {
        alpha: 4,
        beta: 3,
        gamma: 2,
    };
    for rho in [1, 2, 4] {
        let cfg = PlanConfig {
            workers: 60,
            m: 2,
            p: 1,
            n: 2,
            rho,
            tensor: TensorKind::Naive,
        };
        let plan = make_plan(&g, &worked_plan(), dims, cfg, field()).unwrap();
        assert_eq!(plan.threshold(), (4 + rho) * 4 - 3);
        assert_roundtrip(&plan, rho as u64);
    }
}

#[test]
fn subsets_decode_identically() {
    let f = field();
    let g = worked_example();
    let plan = make_plan(
        &g,
        &worked_plan(),
        Dims {
            alpha: 2,
            beta: 2,
            gamma: 2,
        },
        PlanConfig::base(7),
        f,
    )
    .unwrap();
    let mut rng = stream_rng(10, 0);
    let (a, b) = random_inputs(&f, &g, plan.dims(), &mut rng);
    let results = run_all(&plan, &a, &b);
    let want = direct_products(&f, &g, &a, &b).unwrap();
    let mut count = 0;
    for subset in results.iter().cloned().combinations(plan.threshold()) {
        assert_eq!(decode(&plan, &subset).unwrap(), want);
        count += 1;
    }
    assert_eq!(count, 21);
    assert_eq!(
        decode(&plan, &results[..4]).unwrap_err(),
        Error::TooFewResults { needed: 5, got: 4 }
    );
}

#[test]
fn share_sizes_match_costs() {
    let g = worked_example();
    let dims = Dims {
        alpha: 4,
        beta: 6,
        gamma: 2,
    };
    for (m, p, n, rho, kind) in [
        (1, 1, 1, 1, TensorKind::Naive),
        (2, 2, 2, 1, TensorKind::Strassen),
        (2, 3, 2, 3, TensorKind::Naive),
    ] {
        let cfg = PlanConfig {
            workers: 120,
            m,
            p,
            n,
            rho,
            tensor: kind,
        };
        let plan = make_plan(&g, &worked_plan(), dims, cfg, field()).unwrap();
        let costs = plan.report().costs(dims, &g, plan.workers());
        let mut rng = stream_rng(12, 0);
        let (a, b) = random_inputs(plan.field(), &g, dims, &mut rng);
        let shares = encode(&plan, &a, &b).unwrap();
        let rank = plan.params().rank;
        assert_eq!(shares[0].a.len(), rank / rho * dims.alpha * dims.beta / (m * p));
        assert_eq!(shares[0].a.len(), costs.upload_a);
        assert_eq!(shares[0].b.len(), costs.upload_b);
        let res = worker_compute(plan.field(), &shares[0]).unwrap();
        assert_eq!(res.c.len(), dims.alpha * dims.gamma / (m * n));
        assert_eq!(res.c.len(), costs.download);
    }
}

#[test]
fn degenerate_fcc_equals_base() {
    let g = worked_example();
    let dims = Dims {
        alpha: 2,
        beta: 2,
        gamma: 2,
    };
    let base = make_plan(&g, &worked_plan(), dims, PlanConfig::base(6), field()).unwrap();
    let explicit = PlanConfig {
        workers: 6,
        m: 1,
        p: 1,
        n: 1,
        rho: 1,
        tensor: TensorKind::Naive,
    };
    let other = make_plan(&g, &worked_plan(), dims, explicit, field()).unwrap();
    let mut rng = stream_rng(13, 0);
    let (a, b) = random_inputs(base.field(), &g, dims, &mut rng);
    assert_eq!(encode(&base, &a, &b).unwrap(), encode(&other, &a, &b).unwrap());
    assert_eq!(base.threshold(), 5);
}
