//! Cross-module invariants: Kronecker algebra identities, vertex agreement
//! of the product relaxation, score identities, sampler feasibility, and
//! reconstruction consistency.

use kronsampler::fp::{self, FactorMatrix, FractionalPoint};
use kronsampler::instances;
use kronsampler::linalg::{self, DenseMatrix, IndexSet};
use kronsampler::recon;
use kronsampler::samplers::{self, Algorithm, Objective, ProblemInstance, Selection};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    instances::gaussian_matrix(rng, rows, cols)
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|v| v.abs()).fold(1e-300, f64::max);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

#[test]
fn kron_mixed_product_property() {
    let mut r = rng(1);
    for _ in 0..20 {
        let a = rand_matrix(&mut r, 3, 2);
        let b = rand_matrix(&mut r, 2, 3);
        let c = rand_matrix(&mut r, 2, 2);
        let d = rand_matrix(&mut r, 3, 2);
        let lhs = linalg::kron(&a, &b)
            .unwrap()
            .matmul(&linalg::kron(&c, &d).unwrap())
            .unwrap();
        let rhs = linalg::kron(&a.matmul(&c).unwrap(), &b.matmul(&d).unwrap()).unwrap();
        assert!(max_rel(lhs.as_slice(), rhs.as_slice()) <= 1e-10);
    }
}

#[test]
fn pinv_kronecker_identity_small() {
    let mut r = rng(2);
    for _ in 0..10 {
        let a = rand_matrix(&mut r, 6, 2);
        let b = rand_matrix(&mut r, 5, 3);
        let big = linalg::kron(&a, &b).unwrap();
        let lhs = linalg::pinv(&big).matrix;
        let rhs = linalg::kron(&linalg::pinv(&a).matrix, &linalg::pinv(&b).matrix).unwrap();
        assert!(max_rel(lhs.as_slice(), rhs.as_slice()) <= 1e-8);
    }
}

#[test]
fn moore_penrose_identities_hold() {
    let mut r = rng(3);
    for _ in 0..10 {
        let m = rand_matrix(&mut r, 7, 3);
        let p = linalg::pinv(&m).matrix;
        let m_p_m = m.matmul(&p).unwrap().matmul(&m).unwrap();
        let p_m_p = p.matmul(&m).unwrap().matmul(&p).unwrap();
        assert!(max_rel(m_p_m.as_slice(), m.as_slice()) <= 1e-8);
        assert!(max_rel(p_m_p.as_slice(), p.as_slice()) <= 1e-8);
        let mp = m.matmul(&p).unwrap();
        let pm = p.matmul(&m).unwrap();
        assert!(max_rel(mp.transpose().as_slice(), mp.as_slice()) <= 1e-8);
        assert!(max_rel(pm.transpose().as_slice(), pm.as_slice()) <= 1e-8);
    }
}

#[test]
fn vertex_agreement_single_mode_enumeration() {
    let mut r = rng(4);
    for _ in 0..4 {
        let n = r.random_range(4..=8usize);
        let factor = FactorMatrix::new(rand_matrix(&mut r, n, 2));
        for mask in 0u32..(1 << n) {
            let indices: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
            let x = FractionalPoint::new(vec![(0..n)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { 0.0 })
                .collect()])
            .unwrap();
            let ext = fp::extension_value(std::slice::from_ref(&factor), &x).unwrap();
            let direct = if indices.is_empty() {
                0.0
            } else {
                fp::frame_potential(&factor, &IndexSet::new(n, indices).unwrap()).unwrap()
            };
            assert!(
                (ext - direct).abs() <= 1e-9 * direct.abs().max(1e-12),
                "vertex mismatch: ext {ext} vs fp {direct}"
            );
        }
    }
}

#[test]
fn vertex_agreement_two_modes() {
    let mut r = rng(5);
    let f1 = FactorMatrix::new(rand_matrix(&mut r, 5, 2));
    let f2 = FactorMatrix::new(rand_matrix(&mut r, 4, 2));
    let modes = [f1, f2];
    for m1 in 0u32..(1 << 5) {
        for m2 in 0u32..(1 << 4) {
            let xs = vec![
                (0..5).map(|i| f64::from(m1 >> i & 1)).collect::<Vec<_>>(),
                (0..4).map(|i| f64::from(m2 >> i & 1)).collect::<Vec<_>>(),
            ];
            let ext =
                fp::extension_value(&modes, &FractionalPoint::new(xs).unwrap()).unwrap();
            let fp1 = subset_fp(&modes[0], m1);
            let fp2 = subset_fp(&modes[1], m2);
            let direct = fp1 * fp2;
            assert!((ext - direct).abs() <= 1e-9 * direct.abs().max(1e-12));
        }
    }
}

fn subset_fp(factor: &FactorMatrix, mask: u32) -> f64 {
    let n = factor.n_rows();
    let indices: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
    if indices.is_empty() {
        return 0.0;
    }
    fp::frame_potential(factor, &IndexSet::new(n, indices).unwrap()).unwrap()
}

#[test]
fn score_identity_three_paths_on_large_input() {
    let mut r = rng(6);
    let factor = FactorMatrix::new(rand_matrix(&mut r, 200, 40));
    let production = fp::ffw_scores(&factor);
    let pairwise = fp::ffw_scores_pairwise(&factor);
    // Literal double-sum over Gram entries.
    let gram = factor.gram();
    let k = factor.n_cols();
    let literal: Vec<f64> = (0..factor.n_rows())
        .map(|n| {
            let u = factor.matrix().row(n);
            let mut acc = 0.0;
            for i in 0..k {
                for j in 0..k {
                    acc += gram.get(i, j) * u[i] * u[j];
                }
            }
            acc
        })
        .collect();
    assert!(max_rel(&production, &pairwise) <= 1e-10);
    assert!(max_rel(&production, &literal) <= 1e-10);
}

#[test]
fn gradient_order_is_epsilon_invariant() {
    let mut r = rng(7);
    let modes = vec![
        FactorMatrix::new(rand_matrix(&mut r, 7, 2)),
        FactorMatrix::new(rand_matrix(&mut r, 6, 3)),
    ];
    let sizes = [7usize, 6];
    let mut orders = Vec::new();
    for eps in [0.1, 0.5, 1.0] {
        let x = FractionalPoint::uniform(&sizes, eps).unwrap();
        let grads = fp::extension_gradient(&modes, &x).unwrap();
        let pooled: Vec<f64> = grads.into_iter().flatten().collect();
        let mut order: Vec<usize> = (0..pooled.len()).collect();
        order.sort_by(|&a, &b| pooled[a].partial_cmp(&pooled[b]).unwrap().then(a.cmp(&b)));
        orders.push(order);
    }
    assert_eq!(orders[0], orders[1]);
    assert_eq!(orders[1], orders[2]);
}

#[test]
fn fp_factorization_at_four_thousand_entries() {
    let mut r = rng(8);
    let a = rand_matrix(&mut r, 64, 3);
    let b = rand_matrix(&mut r, 64, 3);
    let sa = IndexSet::from_unsorted(64, (1..=64).filter(|i| i % 2 == 1).collect()).unwrap();
    let sb = IndexSet::from_unsorted(64, (1..=64).filter(|i| i % 3 != 0).collect()).unwrap();
    let instance = ProblemInstance::new(
        vec![FactorMatrix::new(a.clone()), FactorMatrix::new(b.clone())],
        sa.len() + sb.len(),
    )
    .unwrap();
    let sel = Selection::deterministic(Algorithm::Exhaustive, vec![sa.clone(), sb.clone()]);
    let product = fp::frame_potential_product(&instance, &sel).unwrap();
    let big = FactorMatrix::new(
        linalg::kron(
            &linalg::restrict_rows(&a, &sa).unwrap(),
            &linalg::restrict_rows(&b, &sb).unwrap(),
        )
        .unwrap(),
    );
    assert!((product - big.full_fp()).abs() <= 1e-9 * big.full_fp());
}

#[test]
fn random_allocation_frequencies_match_dp_oracle() {
    // Modes (3,1) and (4,2): two spare slots spread over capacities (2, 2).
    let mut r = rng(9);
    let factors = vec![
        FactorMatrix::new(rand_matrix(&mut r, 3, 1)),
        FactorMatrix::new(rand_matrix(&mut r, 4, 2)),
    ];
    let instance = ProblemInstance::new(factors, 5).unwrap();

    // Exact distribution of extra-slot allocations under sequential uniform
    // choice among non-full modes.
    let caps = [2usize, 2];
    let extras = 2usize;
    let mut dist: std::collections::HashMap<Vec<usize>, f64> = std::collections::HashMap::new();
    dist.insert(vec![0, 0], 1.0);
    for _ in 0..extras {
        let mut next: std::collections::HashMap<Vec<usize>, f64> =
            std::collections::HashMap::new();
        for (state, p) in dist {
            let open: Vec<usize> = (0..2).filter(|&m| state[m] < caps[m]).collect();
            for &m in &open {
                let mut s = state.clone();
                s[m] += 1;
                *next.entry(s).or_insert(0.0) += p / open.len() as f64;
            }
        }
        dist = next;
    }

    let trials = 10_000usize;
    let mut counts: std::collections::HashMap<Vec<usize>, usize> =
        std::collections::HashMap::new();
    for t in 0..trials {
        let sel = samplers::random_selection(&instance, 1000 + t as u64);
        let sizes = sel.mode_sizes();
        let extras_vec = vec![sizes[0] - 1, sizes[1] - 2];
        *counts.entry(extras_vec).or_insert(0) += 1;
    }
    for (state, p) in &dist {
        let observed = *counts.get(state).unwrap_or(&0) as f64;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (observed - mean).abs() <= 5.0 * sigma,
            "allocation {state:?}: observed {observed}, expected {mean} ± {sigma}"
        );
    }
    let total: usize = counts.values().sum();
    assert_eq!(total, trials);
}

#[test]
fn reconstruct_modewise_equals_explicit_big_pinv() {
    let mut r = rng(10);
    let bases = vec![rand_matrix(&mut r, 16, 3), rand_matrix(&mut r, 14, 4)];
    let core: Vec<f64> = (0..12).map(|_| r.random_range(-1.0..1.0)).collect();
    let model = recon::SignalModel::new(bases.clone(), core).unwrap();
    let sel = Selection::deterministic(
        Algorithm::Ffw,
        vec![
            IndexSet::from_unsorted(16, (1..=16).step_by(2).collect()).unwrap(),
            IndexSet::from_unsorted(14, (1..=14).filter(|i| i % 3 != 0).collect()).unwrap(),
        ],
    );
    let m = recon::sample(&model, &sel, 0.3, 77).unwrap();
    let restricted: Vec<DenseMatrix> = bases
        .iter()
        .zip(sel.modes())
        .map(|(b, s)| linalg::restrict_rows(b, s).unwrap())
        .collect();
    let (g_fast, _) = recon::reconstruct(&restricted, &m, &bases).unwrap();

    let big = linalg::kron(&restricted[0], &restricted[1]).unwrap();
    let g_big = linalg::pinv(&big).matrix.matvec(&m.values).unwrap();
    assert!(max_rel(&g_fast, &g_big) <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn samplers_always_return_feasible_selections(seed in 0u64..1000) {
        let mut r = rng(seed);
        let n_modes = r.random_range(1..=3usize);
        let mut factors = Vec::new();
        for _ in 0..n_modes {
            let k = r.random_range(1..=2usize);
            let n = r.random_range(k + 1..=k + 5);
            factors.push(FactorMatrix::new(rand_matrix(&mut r, n, k)));
        }
        let min: usize = factors.iter().map(|f| f.n_cols()).sum();
        let max: usize = factors.iter().map(|f| f.n_rows()).sum();
        let budget = r.random_range(min..=max);
        let instance = ProblemInstance::new(factors.clone(), budget).unwrap();

        let selections = vec![
            samplers::ffw_tensor(&instance).unwrap(),
            samplers::greedy_fp_tensor(&instance).unwrap(),
            samplers::random_selection(&instance, seed),
        ];
        for sel in &selections {
            prop_assert!(instance.validate_selection(sel).is_ok());
        }
        // Determinism: repeat runs agree.
        prop_assert_eq!(&samplers::ffw_tensor(&instance).unwrap(), &selections[0]);
        prop_assert_eq!(&samplers::greedy_fp_tensor(&instance).unwrap(), &selections[1]);
        prop_assert_eq!(&samplers::random_selection(&instance, seed), &selections[2]);
        // Sequential twins agree with the dispatching entry points.
        prop_assert_eq!(&samplers::greedy_fp_tensor_seq(&instance).unwrap(), &selections[1]);
    }

    #[test]
    fn ffw_tensor_single_mode_equals_vector_path(seed in 0u64..500) {
        let mut r = rng(seed);
        let k = r.random_range(1..=3usize);
        let n = r.random_range(k + 1..=k + 7);
        let factor = FactorMatrix::new(rand_matrix(&mut r, n, k));
        let budget = r.random_range(k..=n);
        let instance = ProblemInstance::new(vec![factor.clone()], budget).unwrap();
        let tensor = samplers::ffw_tensor(&instance).unwrap();
        let vector = samplers::ffw_vector(&factor, budget).unwrap();
        prop_assert_eq!(tensor.modes()[0].indices(), vector.modes()[0].indices());
    }

    #[test]
    fn frame_sense_seq_matches_dispatch(seed in 0u64..200) {
        let mut r = rng(seed);
        let n = r.random_range(4..=10usize);
        let factor = FactorMatrix::new(rand_matrix(&mut r, n, 2));
        let budget = r.random_range(2..=n);
        let a = samplers::frame_sense(&factor, budget).unwrap();
        let b = samplers::frame_sense_seq(&factor, budget).unwrap();
        prop_assert_eq!(a.modes()[0].indices(), b.modes()[0].indices());
    }

    #[test]
    fn noiseless_sample_reconstruct_is_identity(seed in 0u64..300) {
        let mut r = rng(seed);
        let n_modes = r.random_range(1..=2usize);
        let mut bases = Vec::new();
        for _ in 0..n_modes {
            let k = r.random_range(1..=3usize);
            let n = r.random_range(k + 2..=k + 6);
            bases.push(rand_matrix(&mut r, n, k));
        }
        let core_len: usize = bases.iter().map(|b| b.cols()).product();
        let core: Vec<f64> = (0..core_len).map(|_| r.random_range(-2.0..2.0)).collect();
        let model = recon::SignalModel::new(bases.clone(), core.clone()).unwrap();
        // Random feasible selection with at least K_r + 1 rows per mode to
        // stay comfortably full rank.
        let modes: Vec<IndexSet> = bases
            .iter()
            .map(|b| {
                let l = r.random_range(b.cols() + 1..=b.rows());
                let picked = rand::seq::index::sample(&mut r, b.rows(), l);
                IndexSet::from_unsorted(b.rows(), picked.iter().map(|i| i + 1).collect()).unwrap()
            })
            .collect();
        let sel = Selection::deterministic(Algorithm::Random, modes);
        let m = recon::sample(&model, &sel, 0.0, 0).unwrap();
        let restricted: Vec<DenseMatrix> = bases
            .iter()
            .zip(sel.modes())
            .map(|(b, s)| linalg::restrict_rows(b, s).unwrap())
            .collect();
        let (g_hat, _) = recon::reconstruct(&restricted, &m, &bases).unwrap();
        prop_assert!(max_rel(&g_hat, &core) <= 1e-8);
    }
}

#[test]
fn exhaustive_optimum_bounds_every_sampler() {
    let mut r = rng(11);
    for _ in 0..5 {
        let factors = vec![
            FactorMatrix::new(rand_matrix(&mut r, 5, 2)),
            FactorMatrix::new(rand_matrix(&mut r, 4, 1)),
        ];
        let instance = ProblemInstance::new(factors, 5).unwrap();
        let opt = samplers::exhaustive_optimum(&instance, Objective::Fp).unwrap();
        let opt_fp = fp::frame_potential_product(&instance, &opt).unwrap();
        for sel in [
            samplers::ffw_tensor(&instance).unwrap(),
            samplers::greedy_fp_tensor(&instance).unwrap(),
            samplers::random_selection(&instance, 1),
        ] {
            let v = fp::frame_potential_product(&instance, &sel).unwrap();
            assert!(v >= opt_fp - 1e-12 * opt_fp.abs());
        }
    }
}

#[test]
fn best_of_random_is_reproducible_and_feasible() {
    let mut r = rng(12);
    let factors = vec![FactorMatrix::new(rand_matrix(&mut r, 10, 2))];
    let instance = ProblemInstance::new(factors, 4).unwrap();
    let a = samplers::best_of_random(&instance, 100, 5, Objective::Fp).unwrap();
    let b = samplers::best_of_random(&instance, 100, 5, Objective::Fp).unwrap();
    assert_eq!(a, b);
    assert!(instance.validate_selection(&a).is_ok());
    assert_eq!(a.algorithm(), Algorithm::Random);
}
