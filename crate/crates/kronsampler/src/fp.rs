//! Frame potential, estimator MSE, and the closed-form product relaxation
//! of the frame potential with its gradient — the quantities every sampler
//! and certificate in this crate is built on.
//!
//! For a mode matrix Ψ (N×K) and a row subset L, the Gram of the kept rows
//! is T(L) = Ψ(L)ᵀΨ(L). The frame potential is FP = ‖T(L)‖²_F and the
//! least-squares MSE under unit-variance noise is tr{T⁻¹(L)}. Across modes
//! both factorize over the Kronecker structure, which is what makes
//! per-mode selection meaningful.

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix, IndexSet};
use crate::samplers::{ProblemInstance, Selection};

/// Largest Π K_r for which the estimator MSE is evaluated by enumerating
/// Kronecker eigenvalue products.
pub const MSE_EIGEN_PRODUCT_CAP: usize = 1_000_000;

#[cfg(feature = "parallel")]
const PAR_SCORE_THRESHOLD: usize = 4096;

/// One mode's factor matrix with its Gram matrix and full frame potential
/// cached at construction.
#[derive(Debug, Clone)]
pub struct FactorMatrix {
    matrix: DenseMatrix,
    gram: DenseMatrix,
    full_fp: f64,
}

impl FactorMatrix {
    pub fn new(matrix: DenseMatrix) -> Self {
        let gram = linalg::gram(&matrix);
        let full_fp = frobenius_norm_sq(&gram);
        Self { matrix, gram, full_fp }
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    /// Cached ΨᵀΨ over all rows.
    pub fn gram(&self) -> &DenseMatrix {
        &self.gram
    }

    /// Frame potential of the full matrix, ‖ΨᵀΨ‖²_F. Zero iff Ψ is zero.
    pub fn full_fp(&self) -> f64 {
        self.full_fp
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    /// True when every row has all entries of one sign (zeros allowed) and,
    /// for K ≥ 2, some pair of columns is non-orthogonal. These are the
    /// hypotheses under which the selection certificates are guaranteed.
    pub fn sign_condition(&self) -> bool {
        for r in 0..self.n_rows() {
            let row = self.matrix.row(r);
            let has_pos = row.iter().any(|&v| v > 0.0);
            let has_neg = row.iter().any(|&v| v < 0.0);
            if has_pos && has_neg {
                return false;
            }
        }
        if self.n_cols() < 2 {
            return self.full_fp > 0.0;
        }
        let k = self.n_cols();
        let scale = (0..k).map(|i| self.gram.get(i, i)).fold(0.0, f64::max);
        let tol = scale * k as f64 * f64::EPSILON;
        (0..k).any(|i| (0..k).any(|j| i != j && self.gram.get(i, j).abs() > tol))
    }
}

fn frobenius_norm_sq(m: &DenseMatrix) -> f64 {
    m.as_slice().iter().map(|v| v * v).sum()
}

/// Frame potential ‖Ψ(sel)ᵀΨ(sel)‖²_F of the selected rows.
pub fn frame_potential(factor: &FactorMatrix, sel: &IndexSet) -> Result<f64> {
    let t = linalg::gram_restricted(factor.matrix(), sel)?;
    Ok(frobenius_norm_sq(&t))
}

/// Product of per-mode frame potentials; equals the frame potential of the
/// Kronecker product of the restricted modes.
pub fn frame_potential_product(instance: &ProblemInstance, sel: &Selection) -> Result<f64> {
    check_selection_shape(instance, sel)?;
    let mut prod = 1.0;
    for (factor, s) in instance.factors().iter().zip(sel.modes()) {
        prod *= frame_potential(factor, s)?;
    }
    Ok(prod)
}

/// Least-squares MSE tr{T⁻¹(L)} of the core estimate, computed from
/// per-mode eigendecompositions by summing reciprocals over all Kronecker
/// eigenvalue products.
///
/// Refuses when Π K_r exceeds [`MSE_EIGEN_PRODUCT_CAP`]; errors when some
/// mode's restriction is rank deficient, naming the mode (1-based).
pub fn mse(instance: &ProblemInstance, sel: &Selection) -> Result<f64> {
    check_selection_shape(instance, sel)?;
    let k_total: usize = instance.factors().iter().map(|f| f.n_cols()).product();
    if k_total > MSE_EIGEN_PRODUCT_CAP {
        return Err(Error::ResourceGuard {
            needed: k_total as u128,
            cap: MSE_EIGEN_PRODUCT_CAP as u128,
            hint: "Kronecker eigenvalue product enumeration".into(),
        });
    }
    let mut per_mode: Vec<Vec<f64>> = Vec::with_capacity(instance.n_modes());
    for (mode0, (factor, s)) in instance.factors().iter().zip(sel.modes()).enumerate() {
        per_mode.push(mode_eigenvalues(factor, s, mode0)?);
    }
    // Sum of 1/Π λ over the cross product of the per-mode eigenvalue lists.
    let mut sums = vec![0.0f64];
    for eigs in per_mode.iter().rev() {
        let mut next = Vec::with_capacity(sums.len() * eigs.len());
        if sums.len() == 1 && sums[0] == 0.0 {
            next.extend(eigs.iter().map(|l| 1.0 / l));
        } else {
            for &l in eigs {
                next.extend(sums.iter().map(|s| s / l));
            }
        }
        sums = next;
    }
    Ok(sums.iter().sum())
}

/// Eigenvalues of one mode's restricted Gram, with a rank check.
pub(crate) fn mode_eigenvalues(
    factor: &FactorMatrix,
    sel: &IndexSet,
    mode0: usize,
) -> Result<Vec<f64>> {
    let t = linalg::gram_restricted(factor.matrix(), sel)?;
    let eigs = linalg::symmetric_eigenvalues(&t);
    let lmax = eigs.iter().cloned().fold(0.0, f64::max);
    let tol = lmax * factor.n_cols() as f64 * f64::EPSILON;
    let rank = eigs.iter().filter(|&&l| l > tol).count();
    if rank < factor.n_cols() {
        return Err(Error::SingularMode { mode: mode0 + 1, rank, cols: factor.n_cols() });
    }
    Ok(eigs)
}

fn check_selection_shape(instance: &ProblemInstance, sel: &Selection) -> Result<()> {
    if sel.modes().len() != instance.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} modes", instance.n_modes()),
            got: format!("{}", sel.modes().len()),
        });
    }
    for (r, (factor, s)) in instance.factors().iter().zip(sel.modes()).enumerate() {
        if s.universe() != factor.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: format!("universe {} in mode {}", factor.n_rows(), r + 1),
                got: format!("{}", s.universe()),
            });
        }
    }
    Ok(())
}

/// A fractional membership point: one vector per mode, each component in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct FractionalPoint {
    coords: Vec<Vec<f64>>,
}

impl FractionalPoint {
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self> {
        for xs in &coords {
            if let Some(v) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!(
                    "fractional component {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { coords })
    }

    /// The indicator point of a selection.
    pub fn indicator(sel: &Selection) -> Self {
        let coords = sel
            .modes()
            .iter()
            .map(|s| {
                let mut xs = vec![0.0; s.universe()];
                for i in s.zero_based() {
                    xs[i] = 1.0;
                }
                xs
            })
            .collect();
        Self { coords }
    }

    /// ε·1 in every mode.
    pub fn uniform(mode_sizes: &[usize], eps: f64) -> Result<Self> {
        Self::new(mode_sizes.iter().map(|&n| vec![eps; n]).collect())
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }
}

/// Closed-form relaxation of the product frame potential:
/// Π_r Σ_{ij} [Σ_n x_n^r p_{ni} p_{nj}]². Agrees with
/// [`frame_potential_product`] at every 0/1 vertex.
pub fn extension_value(modes: &[FactorMatrix], x: &FractionalPoint) -> Result<f64> {
    check_point_shape(modes, x)?;
    let mut prod = 1.0;
    for (factor, xs) in modes.iter().zip(x.coords()) {
        prod *= mode_extension_value(factor, xs);
    }
    Ok(prod)
}

fn mode_extension_value(factor: &FactorMatrix, xs: &[f64]) -> f64 {
    frobenius_norm_sq(&weighted_gram(factor.matrix(), xs))
}

/// Σ_n x_n·uₙᵀuₙ.
fn weighted_gram(m: &DenseMatrix, xs: &[f64]) -> DenseMatrix {
    let k = m.cols();
    let mut w = vec![0.0; k * k];
    for (n, &x) in xs.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let u = m.row(n);
        for i in 0..k {
            let xi = x * u[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..k {
                w[i * k + j] += xi * u[j];
            }
        }
    }
    DenseMatrix::new(k, k, w).expect("weighted gram is well formed")
}

/// Gradient of [`extension_value`], one vector per mode:
/// ∂F̃/∂x_t^r = [Π_{a≠r} F̃_a(x^a)] · 2 Σ_{ij} W^r_{ij} p_{ti} p_{tj}
/// with W^r the x-weighted Gram of mode r.
pub fn extension_gradient(modes: &[FactorMatrix], x: &FractionalPoint) -> Result<Vec<Vec<f64>>> {
    check_point_shape(modes, x)?;
    let weighted: Vec<DenseMatrix> = modes
        .iter()
        .zip(x.coords())
        .map(|(f, xs)| weighted_gram(f.matrix(), xs))
        .collect();
    let values: Vec<f64> = weighted.iter().map(frobenius_norm_sq).collect();
    let mut grads = Vec::with_capacity(modes.len());
    for (r, factor) in modes.iter().enumerate() {
        let others: f64 = values
            .iter()
            .enumerate()
            .filter(|(a, _)| *a != r)
            .map(|(_, v)| v)
            .product();
        let w = &weighted[r];
        let grad = (0..factor.n_rows())
            .map(|t| 2.0 * others * quadratic_form(w, factor.matrix().row(t)))
            .collect();
        grads.push(grad);
    }
    Ok(grads)
}

fn check_point_shape(modes: &[FactorMatrix], x: &FractionalPoint) -> Result<()> {
    if modes.len() != x.coords().len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} modes", modes.len()),
            got: format!("{}", x.coords().len()),
        });
    }
    for (factor, xs) in modes.iter().zip(x.coords()) {
        if factor.n_rows() != xs.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} components", factor.n_rows()),
                got: format!("{}", xs.len()),
            });
        }
    }
    Ok(())
}

/// u M uᵀ for a symmetric K×K matrix and a length-K row.
pub(crate) fn quadratic_form(m: &DenseMatrix, u: &[f64]) -> f64 {
    let k = u.len();
    let mut acc = 0.0;
    for i in 0..k {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        acc += ui * linalg::dot(m.row(i), u);
    }
    acc
}

/// Selection scores d_n = uₙ (ΨᵀΨ) uₙᵀ — the row ranking used by the fast
/// vector sampler. Cost O(NK²) using the cached Gram. Dispatches to the
/// parallel kernel for large inputs when the `parallel` feature is on.
pub fn ffw_scores(factor: &FactorMatrix) -> Vec<f64> {
    #[cfg(feature = "parallel")]
    if factor.n_rows() * factor.n_cols() * factor.n_cols() >= PAR_SCORE_THRESHOLD {
        return ffw_scores_par(factor);
    }
    ffw_scores_seq(factor)
}

/// Sequential score kernel.
pub fn ffw_scores_seq(factor: &FactorMatrix) -> Vec<f64> {
    (0..factor.n_rows())
        .map(|n| quadratic_form(factor.gram(), factor.matrix().row(n)))
        .collect()
}

/// Parallel score kernel.
#[cfg(feature = "parallel")]
pub fn ffw_scores_par(factor: &FactorMatrix) -> Vec<f64> {
    use rayon::prelude::*;
    (0..factor.n_rows())
        .into_par_iter()
        .map(|n| quadratic_form(factor.gram(), factor.matrix().row(n)))
        .collect()
}

/// Reference O(N²K) evaluation of the same scores through the pairwise
/// identity d_n = Σ_s ⟨uₙ, u_s⟩². Kept for validation; do not use in hot
/// paths.
pub fn ffw_scores_pairwise(factor: &FactorMatrix) -> Vec<f64> {
    let m = factor.matrix();
    (0..m.rows())
        .map(|n| {
            (0..m.rows())
                .map(|s| {
                    let ip = linalg::dot(m.row(n), m.row(s));
                    ip * ip
                })
                .sum()
        })
        .collect()
}

/// Scores divided by the full frame potential, making them comparable
/// across modes. Errors on an all-zero factor.
pub fn ffw_scores_normalized(factor: &FactorMatrix) -> Result<Vec<f64>> {
    if factor.full_fp() == 0.0 {
        return Err(Error::DegenerateInput(
            "cannot normalize scores of an all-zero factor".into(),
        ));
    }
    let f = factor.full_fp();
    Ok(ffw_scores(factor).into_iter().map(|d| d / f).collect())
}
