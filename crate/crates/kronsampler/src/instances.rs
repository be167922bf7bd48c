//! Experimental ensembles and image-derived instances: seeded Gaussian and
//! same-sign factor generators, plus the truncated-SVD factorization that
//! turns a grayscale image into a two-mode sampling instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::FactorMatrix;
use crate::linalg::DenseMatrix;

/// Which distribution the ensemble's factor matrices are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    #[serde(rename = "gaussian")]
    Gaussian,
    /// Absolute Gaussian entries with one random sign per row; every
    /// output satisfies the certificate hypotheses.
    #[serde(rename = "signed", alias = "sign-condition")]
    SignCondition,
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(EnsembleKind::Gaussian),
            "signed" | "sign-condition" => Ok(EnsembleKind::SignCondition),
            other => Err(Error::InvalidInput(format!("unknown ensemble kind '{other}'"))),
        }
    }
}

/// A reproducible ensemble description: kind, per-mode (N_r, K_r) shapes,
/// base seed, and number of independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub mode_shapes: Vec<(usize, usize)>,
    pub seed: u64,
    pub trials: usize,
}

impl EnsembleSpec {
    pub fn new(
        kind: EnsembleKind,
        mode_shapes: Vec<(usize, usize)>,
        seed: u64,
        trials: usize,
    ) -> Result<Self> {
        if mode_shapes.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one mode".into()));
        }
        for &(n, k) in &mode_shapes {
            if k < 1 || n <= k {
                return Err(Error::InvalidInput(format!(
                    "mode shape {n}x{k} must satisfy N > K >= 1"
                )));
            }
        }
        if trials < 1 {
            return Err(Error::InvalidInput("need at least one trial".into()));
        }
        Ok(Self { kind, mode_shapes, seed, trials })
    }

    /// Deterministic per-trial seed.
    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// Generates one trial's factor matrices.
pub fn generate_trial(spec: &EnsembleSpec, trial: usize) -> Result<Vec<FactorMatrix>> {
    if trial >= spec.trials {
        return Err(Error::InvalidInput(format!(
            "trial {trial} out of range for {} trials",
            spec.trials
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.trial_seed(trial));
    spec.mode_shapes
        .iter()
        .map(|&(n, k)| match spec.kind {
            EnsembleKind::Gaussian => Ok(FactorMatrix::new(gaussian_matrix(&mut rng, n, k))),
            EnsembleKind::SignCondition => sign_condition_factor(&mut rng, n, k),
        })
        .collect()
}

/// I.i.d. standard normal entries.
pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::new(rows, cols, data).expect("gaussian draws are finite")
}

/// Unit-norm rows of |standard normal| entries with one random sign per
/// row, regenerated until the certificate hypotheses hold (same-sign rows
/// by construction; non-orthogonal columns, which absolute-value entries
/// give almost surely). Equal row norms keep the frame-potential ranking
/// about row alignment rather than row energy, which is what the selection
/// comparisons measure.
pub fn sign_condition_factor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<FactorMatrix> {
    for _ in 0..64 {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let row: Vec<f64> = (0..cols)
                .map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    v.abs()
                })
                .collect();
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                data.extend(std::iter::repeat(0.0).take(cols));
                continue;
            }
            data.extend(row.into_iter().map(|v| sign * v / norm));
        }
        let factor =
            FactorMatrix::new(DenseMatrix::new(rows, cols, data).expect("finite draws"));
        if factor.sign_condition() {
            return Ok(factor);
        }
    }
    Err(Error::DegenerateInput(
        "could not draw a non-orthogonal same-sign factor in 64 attempts".into(),
    ))
}

/// A grayscale image factored through a truncated singular decomposition
/// into two non-orthogonal sampling modes.
///
/// With pixels ≈ A·diag(σ)·Bᵀ, the modes are U₁ = A₍:,1..k1₎·diag(√σ) and
/// U₂ = B₍:,1..k2₎·diag(√σ), and the core is the rectangular identity, so
/// U₁·G·U₂ᵀ is exactly the rank-min(k1,k2) truncation of the image.
#[derive(Debug, Clone)]
pub struct ImageInstance {
    pub pixels: DenseMatrix,
    /// Effective ranks actually used; requested values above the image's
    /// numerical rank are reduced to it.
    pub k1: usize,
    pub k2: usize,
    pub u1: DenseMatrix,
    pub u2: DenseMatrix,
    pub core: DenseMatrix,
    pub numerical_rank: usize,
}

impl ImageInstance {
    /// The rank-truncated image U₁·G·U₂ᵀ this instance can represent.
    pub fn truncated_image(&self) -> DenseMatrix {
        let g_u2t = self.core.matmul(&self.u2.transpose()).expect("validated shapes");
        self.u1.matmul(&g_u2t).expect("validated shapes")
    }
}

/// Factors an image into a two-mode instance at ranks (k1, k2). Requested
/// ranks above the numerical rank are silently reduced and reported
/// through the returned fields.
pub fn image_to_instance(pixels: &DenseMatrix, k1: usize, k2: usize) -> Result<ImageInstance> {
    let (h, w) = (pixels.rows(), pixels.cols());
    let max_rank = h.min(w);
    if k1 < 1 || k2 < 1 || k1 > max_rank || k2 > max_rank {
        return Err(Error::InvalidInput(format!(
            "ranks ({k1}, {k2}) must lie in [1, {max_rank}] for a {h}x{w} image"
        )));
    }
    let svd = pixels.to_na().svd(true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .expect("singular values are finite")
    });
    let smax = svd.singular_values[order[0]];
    let cutoff = h.max(w) as f64 * f64::EPSILON * smax;
    let numerical_rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > cutoff)
        .count();
    let k1 = k1.min(numerical_rank.max(1));
    let k2 = k2.min(numerical_rank.max(1));

    let mut u1_data = vec![0.0; h * k1];
    let mut u2_data = vec![0.0; w * k2];
    for (col, &src) in order.iter().take(k1).enumerate() {
        let scale = svd.singular_values[src].max(0.0).sqrt();
        for r in 0..h {
            u1_data[r * k1 + col] = u[(r, src)] * scale;
        }
    }
    for (col, &src) in order.iter().take(k2).enumerate() {
        let scale = svd.singular_values[src].max(0.0).sqrt();
        for r in 0..w {
            u2_data[r * k2 + col] = vt[(src, r)] * scale;
        }
    }
    let u1 = DenseMatrix::new(h, k1, u1_data)?;
    let u2 = DenseMatrix::new(w, k2, u2_data)?;

    let mut core_data = vec![0.0; k1 * k2];
    for i in 0..k1.min(k2) {
        core_data[i * k2 + i] = 1.0;
    }
    let core = DenseMatrix::new(k1, k2, core_data)?;

    Ok(ImageInstance {
        pixels: pixels.clone(),
        k1,
        k2,
        u1,
        u2,
        core,
        numerical_rank,
    })
}

/// Deterministic structured grayscale test image in [0, 255]: a smooth
/// illumination gradient from a bright top-left corner into a dark
/// bottom-right region, thin dim line features confined to the dark bands
/// (scratch- or scan-defect-like detail that uninformed sampling easily
/// misses), and a faint seeded texture so the spectrum decays smoothly.
pub fn synthetic_image(height: usize, width: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![0.0f64; height * width];
    for r in 0..height {
        let y = r as f64 / height as f64;
        for c in 0..width {
            let x = c as f64 / width as f64;
            data[r * width + c] = 230.0 * (1.0 - 0.85 * y) * (1.0 - 0.85 * x) + 10.0;
        }
    }
    // Dim thin lines in the dark bands: horizontal lines in the bottom
    // third (confined to rows), vertical lines in the right third
    // (confined to columns). Skipped for tiny images.
    if height >= 48 && width >= 48 {
        let n_lines = 20 * height.min(width) / 512;
        let amp = 25.0;
        for i in 0..n_lines.max(4) {
            if i % 2 == 0 {
                let row = rng.random_range(height * 2 / 3..height - 4);
                let lo = rng.random_range(0..width / 3);
                let hi = rng.random_range(2 * width / 3..width);
                for c in lo..hi {
                    data[row * width + c] += amp;
                }
            } else {
                let col = rng.random_range(width * 2 / 3..width - 4);
                let lo = rng.random_range(0..height / 3);
                let hi = rng.random_range(2 * height / 3..height);
                for r in lo..hi {
                    data[r * width + col] += amp;
                }
            }
        }
    }
    for v in &mut data {
        let t: f64 = rng.sample(StandardNormal);
        *v = (*v + 0.4 * t).clamp(0.0, 255.0);
    }
    DenseMatrix::new(height, width, data).expect("synthetic pixels are finite")
}
