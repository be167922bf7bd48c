//! Selection algorithms: score-ranking samplers for vectors and tensors,
//! greedy worst-out removal baselines, seeded random selection, and an
//! exhaustive oracle for small instances.
//!
//! All samplers are deterministic given their inputs (and seed, where one
//! applies); ties are always broken toward the smallest row index, and for
//! cross-mode candidates toward the smallest (mode, index) pair.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::{self, FactorMatrix};
use crate::linalg::{self, DenseMatrix, IndexSet};

/// Feasible-selection cap for the exhaustive oracle.
pub const EXHAUSTIVE_GUARD: u128 = 10_000_000;

#[cfg(feature = "parallel")]
const PAR_DOWNDATE_THRESHOLD: usize = 1024;

/// Identifies which sampler produced a selection. The serialized names
/// double as CLI flag values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Ffw,
    FrameSense,
    GreedyFp,
    Random,
    Exhaustive,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Ffw => "ffw",
            Algorithm::FrameSense => "framesense",
            Algorithm::GreedyFp => "greedyfp",
            Algorithm::Random => "random",
            Algorithm::Exhaustive => "exhaustive",
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ffw" => Ok(Algorithm::Ffw),
            "framesense" => Ok(Algorithm::FrameSense),
            "greedyfp" => Ok(Algorithm::GreedyFp),
            "random" => Ok(Algorithm::Random),
            "exhaustive" => Ok(Algorithm::Exhaustive),
            other => Err(Error::InvalidInput(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Objective minimized by the exhaustive oracle and best-of-random search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Fp,
    Mse,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fp" => Ok(Objective::Fp),
            "mse" => Ok(Objective::Mse),
            other => Err(Error::InvalidInput(format!("unknown objective '{other}'"))),
        }
    }
}

/// An ordered list of per-mode factor matrices plus the sensor budget L.
///
/// Mode r has shape N_r × K_r with N_r ≥ K_r ≥ 1; the budget must satisfy
/// Σ K_r ≤ L ≤ Σ N_r.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    factors: Vec<FactorMatrix>,
    budget: usize,
}

impl ProblemInstance {
    pub fn new(factors: Vec<FactorMatrix>, budget: usize) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidInput("instance needs at least one mode".into()));
        }
        for (r, f) in factors.iter().enumerate() {
            if f.n_cols() < 1 || f.n_rows() < f.n_cols() {
                return Err(Error::InvalidInput(format!(
                    "mode {} must be at least as tall as it is wide, got {}x{}",
                    r + 1,
                    f.n_rows(),
                    f.n_cols()
                )));
            }
        }
        let min: usize = factors.iter().map(|f| f.n_cols()).sum();
        let max: usize = factors.iter().map(|f| f.n_rows()).sum();
        if budget < min || budget > max {
            return Err(Error::InfeasibleBudget { budget, min, max });
        }
        Ok(Self { factors, budget })
    }

    pub fn factors(&self) -> &[FactorMatrix] {
        &self.factors
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn n_modes(&self) -> usize {
        self.factors.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.n_rows()).collect()
    }

    pub fn floors(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.n_cols()).collect()
    }

    /// Checks a selection against this instance: mode count, universes,
    /// per-mode floors, and total budget.
    pub fn validate_selection(&self, sel: &Selection) -> Result<()> {
        if sel.modes().len() != self.n_modes() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} modes", self.n_modes()),
                got: format!("{}", sel.modes().len()),
            });
        }
        for (r, (f, s)) in self.factors.iter().zip(sel.modes()).enumerate() {
            if s.universe() != f.n_rows() {
                return Err(Error::DimensionMismatch {
                    expected: format!("universe {} in mode {}", f.n_rows(), r + 1),
                    got: format!("{}", s.universe()),
                });
            }
            if s.len() < f.n_cols() {
                return Err(Error::InvalidInput(format!(
                    "mode {} keeps {} rows, below its floor of {}",
                    r + 1,
                    s.len(),
                    f.n_cols()
                )));
            }
        }
        if sel.budget() != self.budget {
            return Err(Error::InfeasibleBudget {
                budget: sel.budget(),
                min: self.budget,
                max: self.budget,
            });
        }
        Ok(())
    }
}

/// Per-mode sorted index sets with the algorithm that produced them and,
/// for randomized algorithms, the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SelectionRepr", into = "SelectionRepr")]
pub struct Selection {
    algorithm: Algorithm,
    seed: Option<u64>,
    modes: Vec<IndexSet>,
}

impl Selection {
    pub fn deterministic(algorithm: Algorithm, modes: Vec<IndexSet>) -> Self {
        Self { algorithm, seed: None, modes }
    }

    pub fn seeded(algorithm: Algorithm, seed: u64, modes: Vec<IndexSet>) -> Self {
        Self { algorithm, seed: Some(seed), modes }
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn modes(&self) -> &[IndexSet] {
        &self.modes
    }

    /// Total number of selected rows across modes.
    pub fn budget(&self) -> usize {
        self.modes.iter().map(|m| m.len()).sum()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.modes.iter().map(|m| m.len()).collect()
    }

    /// Concatenated per-mode indices, used for lexicographic tie-breaks.
    fn lex_key(&self) -> Vec<usize> {
        self.modes.iter().flat_map(|m| m.indices().iter().copied()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ModeRepr {
    n: usize,
    indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SelectionRepr {
    algorithm: Algorithm,
    seed: Option<u64>,
    budget: usize,
    modes: Vec<ModeRepr>,
}

impl From<Selection> for SelectionRepr {
    fn from(sel: Selection) -> Self {
        SelectionRepr {
            algorithm: sel.algorithm,
            seed: sel.seed,
            budget: sel.budget(),
            modes: sel
                .modes
                .iter()
                .map(|m| ModeRepr { n: m.universe(), indices: m.indices().to_vec() })
                .collect(),
        }
    }
}

impl TryFrom<SelectionRepr> for Selection {
    type Error = String;

    fn try_from(repr: SelectionRepr) -> std::result::Result<Self, String> {
        let modes: Vec<IndexSet> = repr
            .modes
            .into_iter()
            .map(|m| IndexSet::new(m.n, m.indices).map_err(|e| e.to_string()))
            .collect::<std::result::Result<_, _>>()?;
        let sel = Selection { algorithm: repr.algorithm, seed: repr.seed, modes };
        if sel.budget() != repr.budget {
            return Err(format!(
                "budget field {} does not match {} selected indices",
                repr.budget,
                sel.budget()
            ));
        }
        Ok(sel)
    }
}

fn check_vector_budget(factor: &FactorMatrix, budget: usize) -> Result<()> {
    let (n, k) = (factor.n_rows(), factor.n_cols());
    if budget < k || budget > n {
        return Err(Error::InfeasibleBudget { budget, min: k, max: n });
    }
    Ok(())
}

/// Ranks the rows by (score, index) ascending and returns the permutation.
fn rank_by_score(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[a].partial_cmp(&scores[b]).expect("scores are finite").then(a.cmp(&b))
    });
    order
}

/// Fast score-ranking sampler for a single mode: keeps the `budget` rows
/// with the smallest scores d_n = uₙ(ΨᵀΨ)uₙᵀ.
pub fn ffw_vector(factor: &FactorMatrix, budget: usize) -> Result<Selection> {
    check_vector_budget(factor, budget)?;
    let scores = fp::ffw_scores(factor);
    let picked: Vec<usize> = rank_by_score(&scores)[..budget].iter().map(|i| i + 1).collect();
    let modes = vec![IndexSet::from_unsorted(factor.n_rows(), picked)?];
    Ok(Selection::deterministic(Algorithm::Ffw, modes))
}

/// Fast score-ranking sampler across modes. Scores are normalized by each
/// mode's full frame potential so they are comparable across modes; the
/// K_r lowest-scored rows of every mode are kept first (floor
/// satisfaction), then the remaining budget is filled from the pooled
/// leftovers in ascending score order.
pub fn ffw_tensor(instance: &ProblemInstance) -> Result<Selection> {
    let mut per_mode_order = Vec::with_capacity(instance.n_modes());
    let mut pooled: Vec<(f64, usize, usize)> = Vec::new();
    for (r, factor) in instance.factors().iter().enumerate() {
        let scores = fp::ffw_scores_normalized(factor)?;
        let order = rank_by_score(&scores);
        for &row in &order[factor.n_cols()..] {
            pooled.push((scores[row], r, row));
        }
        per_mode_order.push(order);
    }
    pooled.sort_by(|a, b| {
        a.0.partial_cmp(&b.0).expect("scores are finite").then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
    });

    let mut picked: Vec<Vec<usize>> = instance
        .factors()
        .iter()
        .zip(&per_mode_order)
        .map(|(f, order)| order[..f.n_cols()].iter().map(|i| i + 1).collect())
        .collect();
    let extras = instance.budget() - instance.floors().iter().sum::<usize>();
    for &(_, r, row) in pooled.iter().take(extras) {
        picked[r].push(row + 1);
    }

    let modes = picked
        .into_iter()
        .zip(instance.mode_sizes())
        .map(|(idx, n)| IndexSet::from_unsorted(n, idx))
        .collect::<Result<Vec<_>>>()?;
    Ok(Selection::deterministic(Algorithm::Ffw, modes))
}

/// Greedy worst-out removal for a single mode: starting from all rows,
/// repeatedly removes the row whose removal leaves the smallest frame
/// potential until `budget` rows remain.
pub fn frame_sense(factor: &FactorMatrix, budget: usize) -> Result<Selection> {
    frame_sense_with(factor, budget, cfg!(feature = "parallel"))
}

/// Sequential variant of [`frame_sense`].
pub fn frame_sense_seq(factor: &FactorMatrix, budget: usize) -> Result<Selection> {
    frame_sense_with(factor, budget, false)
}

/// Parallel variant of [`frame_sense`].
#[cfg(feature = "parallel")]
pub fn frame_sense_par(factor: &FactorMatrix, budget: usize) -> Result<Selection> {
    frame_sense_with(factor, budget, true)
}

fn frame_sense_with(factor: &FactorMatrix, budget: usize, parallel: bool) -> Result<Selection> {
    check_vector_budget(factor, budget)?;
    let mut state = RemovalState::new(factor);
    while state.active.len() > budget {
        let pos = state.best_removal().expect("non-empty active set");
        state.remove(pos, parallel);
    }
    let modes = vec![state.into_index_set()];
    Ok(Selection::deterministic(Algorithm::FrameSense, modes))
}

/// Greedy worst-out removal across modes: repeatedly removes, from any
/// mode still above its floor, the single row minimizing the product of
/// per-mode frame potentials.
///
/// The cross-mode interleaving of removals is this crate's completion of
/// the baseline (per-mode floors are enforced during, not before, the
/// greedy pass); report metadata labels it `interleaved`.
pub fn greedy_fp_tensor(instance: &ProblemInstance) -> Result<Selection> {
    greedy_fp_tensor_with(instance, cfg!(feature = "parallel"))
}

/// Sequential variant of [`greedy_fp_tensor`].
pub fn greedy_fp_tensor_seq(instance: &ProblemInstance) -> Result<Selection> {
    greedy_fp_tensor_with(instance, false)
}

/// Parallel variant of [`greedy_fp_tensor`].
#[cfg(feature = "parallel")]
pub fn greedy_fp_tensor_par(instance: &ProblemInstance) -> Result<Selection> {
    greedy_fp_tensor_with(instance, true)
}

fn greedy_fp_tensor_with(instance: &ProblemInstance, parallel: bool) -> Result<Selection> {
    let mut states: Vec<RemovalState> = instance.factors().iter().map(RemovalState::new).collect();
    let floors = instance.floors();
    let mut remaining: usize = instance.mode_sizes().iter().sum();

    while remaining > instance.budget() {
        // Best candidate per removable mode, then the global minimum of the
        // resulting frame-potential product, ties toward small (mode, row).
        let mut best: Option<(f64, usize, usize, usize)> = None; // (product, mode, row, pos)
        for (r, state) in states.iter().enumerate() {
            if state.active.len() <= floors[r] {
                continue;
            }
            let pos = state.best_removal().expect("active above floor");
            let new_fp = state.fp_after_removal(pos);
            let others: f64 = states
                .iter()
                .enumerate()
                .filter(|(a, _)| *a != r)
                .map(|(_, s)| s.fp)
                .product();
            let product = new_fp * others;
            let row = state.active[pos];
            let candidate = (product, r, row, pos);
            best = Some(match best {
                None => candidate,
                Some(cur) => {
                    if (product, r, row) < (cur.0, cur.1, cur.2) {
                        candidate
                    } else {
                        cur
                    }
                }
            });
        }
        let (_, r, _, pos) = best.expect("budget below total rows leaves a removable mode");
        states[r].remove(pos, parallel);
        remaining -= 1;
    }

    let modes = states.into_iter().map(RemovalState::into_index_set).collect();
    Ok(Selection::deterministic(Algorithm::GreedyFp, modes))
}

/// Incremental state for greedy worst-out removal on one mode.
///
/// Scores are maintained under row removal: deleting pivot row s maps
/// dₙ ← dₙ − ⟨uₙ, u_s⟩², and the frame potential drops by 2d_s − ‖u_s‖⁴.
struct RemovalState<'a> {
    matrix: &'a DenseMatrix,
    active: Vec<usize>,
    scores: Vec<f64>,
    norm4: Vec<f64>,
    fp: f64,
}

impl<'a> RemovalState<'a> {
    fn new(factor: &'a FactorMatrix) -> Self {
        let matrix = factor.matrix();
        let scores = fp::ffw_scores(factor);
        let norm4 = (0..matrix.rows())
            .map(|r| {
                let n2 = linalg::dot(matrix.row(r), matrix.row(r));
                n2 * n2
            })
            .collect();
        Self {
            matrix,
            active: (0..matrix.rows()).collect(),
            scores,
            norm4,
            fp: factor.full_fp(),
        }
    }

    /// Position of the row whose removal minimizes the remaining frame
    /// potential; ties go to the smallest row index.
    fn best_removal(&self) -> Option<usize> {
        let mut best: Option<(f64, usize, usize)> = None; // (-gain ordering via max, row, pos)
        for (pos, (&row, (&d, &n4))) in self
            .active
            .iter()
            .zip(self.scores.iter().zip(&self.norm4))
            .enumerate()
        {
            let gain = 2.0 * d - n4;
            let better = match best {
                None => true,
                Some((bg, brow, _)) => gain > bg || (gain == bg && row < brow),
            };
            if better {
                best = Some((gain, row, pos));
            }
        }
        best.map(|(_, _, pos)| pos)
    }

    fn fp_after_removal(&self, pos: usize) -> f64 {
        self.fp - (2.0 * self.scores[pos] - self.norm4[pos])
    }

    fn remove(&mut self, pos: usize, parallel: bool) {
        self.fp = self.fp_after_removal(pos);
        let pivot_row = self.active[pos];
        self.active.swap_remove(pos);
        self.scores.swap_remove(pos);
        self.norm4.swap_remove(pos);

        let matrix = self.matrix;
        let pivot = matrix.row(pivot_row);
        let active = &self.active;
        let apply = |(d, &row): (&mut f64, &usize)| {
            let ip = linalg::dot(matrix.row(row), pivot);
            *d -= ip * ip;
        };

        #[cfg(feature = "parallel")]
        if parallel && self.active.len() >= PAR_DOWNDATE_THRESHOLD {
            use rayon::prelude::*;
            self.scores
                .par_iter_mut()
                .zip_eq(active.par_iter())
                .for_each(|(d, row)| apply((d, row)));
            return;
        }
        let _ = parallel;
        self.scores.iter_mut().zip(active.iter()).for_each(apply);
    }

    fn into_index_set(self) -> IndexSet {
        let universe = self.matrix.rows();
        let picked: Vec<usize> = self.active.iter().map(|r| r + 1).collect();
        IndexSet::from_unsorted(universe, picked).expect("active rows are valid indices")
    }
}

/// Uniformly random feasible selection: floors first, the remaining budget
/// spread one slot at a time over modes with spare capacity, then a uniform
/// subset of the allocated size per mode. Reproducible from the seed.
pub fn random_selection(instance: &ProblemInstance, seed: u64) -> Selection {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);

    let sizes_max = instance.mode_sizes();
    let mut sizes = instance.floors();
    let extras = instance.budget() - sizes.iter().sum::<usize>();
    for _ in 0..extras {
        let open: Vec<usize> =
            (0..sizes.len()).filter(|&r| sizes[r] < sizes_max[r]).collect();
        let pick = open[rng.random_range(0..open.len())];
        sizes[pick] += 1;
    }

    let modes = sizes
        .iter()
        .zip(&sizes_max)
        .map(|(&l, &n)| {
            let chosen = rand::seq::index::sample(&mut rng, n, l);
            let idx: Vec<usize> = chosen.iter().map(|i| i + 1).collect();
            IndexSet::from_unsorted(n, idx).expect("sampled indices are valid")
        })
        .collect();
    Selection::seeded(Algorithm::Random, seed, modes)
}

/// Best of `draws` random selections under the given objective, with seeds
/// `seed`, `seed+1`, …. Selections whose objective is undefined (singular
/// modes under the MSE objective) are skipped.
pub fn best_of_random(
    instance: &ProblemInstance,
    draws: usize,
    seed: u64,
    objective: Objective,
) -> Result<Selection> {
    if draws == 0 {
        return Err(Error::InvalidInput("need at least one random draw".into()));
    }
    let evaluate = |sel: &Selection| -> Option<f64> {
        match objective {
            Objective::Fp => fp::frame_potential_product(instance, sel).ok(),
            Objective::Mse => fp::mse(instance, sel).ok(),
        }
    };
    let mut best: Option<(f64, Vec<usize>, Selection)> = None;
    for i in 0..draws {
        let sel = random_selection(instance, seed.wrapping_add(i as u64));
        let Some(value) = evaluate(&sel) else { continue };
        let key = sel.lex_key();
        let better = match &best {
            None => true,
            Some((bv, bk, _)) => value < *bv || (value == *bv && key < *bk),
        };
        if better {
            best = Some((value, key, sel));
        }
    }
    best.map(|(_, _, sel)| sel).ok_or_else(|| {
        Error::DegenerateInput("every random draw had an undefined objective".into())
    })
}

/// Exact global minimizer of the chosen objective over all feasible
/// selections; ties broken lexicographically on the concatenated per-mode
/// indices. Refuses when the number of feasible selections exceeds
/// [`EXHAUSTIVE_GUARD`].
pub fn exhaustive_optimum(instance: &ProblemInstance, objective: Objective) -> Result<Selection> {
    exhaustive_with(instance, objective, cfg!(feature = "parallel"))
}

/// Sequential variant of [`exhaustive_optimum`].
pub fn exhaustive_optimum_seq(
    instance: &ProblemInstance,
    objective: Objective,
) -> Result<Selection> {
    exhaustive_with(instance, objective, false)
}

/// Parallel variant of [`exhaustive_optimum`].
#[cfg(feature = "parallel")]
pub fn exhaustive_optimum_par(
    instance: &ProblemInstance,
    objective: Objective,
) -> Result<Selection> {
    exhaustive_with(instance, objective, true)
}

fn exhaustive_with(
    instance: &ProblemInstance,
    objective: Objective,
    parallel: bool,
) -> Result<Selection> {
    let count = feasible_selection_count(instance);
    if count > EXHAUSTIVE_GUARD {
        return Err(Error::ResourceGuard {
            needed: count,
            cap: EXHAUSTIVE_GUARD,
            hint: "use best_of_random as a surrogate optimum".into(),
        });
    }

    let floors = instance.floors();
    let sizes_max = instance.mode_sizes();

    // Per-mode minima per allocated size; minimizing per mode minimizes the
    // product because every objective value is non-negative.
    let mut per_mode: Vec<Vec<Option<(f64, Vec<usize>)>>> = Vec::new();
    for (r, factor) in instance.factors().iter().enumerate() {
        let mut by_size: Vec<Option<(f64, Vec<usize>)>> = vec![None; sizes_max[r] + 1];
        for (size, slot) in by_size.iter_mut().enumerate().skip(floors[r]) {
            *slot = best_subset_of_size(factor, size, objective, parallel);
        }
        per_mode.push(by_size);
    }

    let mut best: Option<(f64, Vec<usize>, Vec<Vec<usize>>)> = None;
    let mut alloc = floors.clone();
    enumerate_allocations(&floors, &sizes_max, instance.budget(), 0, &mut alloc, &mut |sizes| {
        let mut value = 1.0;
        let mut subsets = Vec::with_capacity(sizes.len());
        for (r, &s) in sizes.iter().enumerate() {
            match &per_mode[r][s] {
                Some((v, subset)) => {
                    value *= v;
                    subsets.push(subset.clone());
                }
                None => return,
            }
        }
        let key: Vec<usize> = subsets.iter().flatten().copied().collect();
        let better = match &best {
            None => true,
            Some((bv, bk, _)) => value < *bv || (value == *bv && key < *bk),
        };
        if better {
            best = Some((value, key, subsets));
        }
    });

    let (_, _, subsets) = best.ok_or_else(|| {
        Error::DegenerateInput("no feasible selection has a defined objective".into())
    })?;
    let modes = subsets
        .into_iter()
        .zip(&sizes_max)
        .map(|(idx, &n)| IndexSet::new(n, idx).expect("enumerated indices are sorted"))
        .collect();
    Ok(Selection::deterministic(Algorithm::Exhaustive, modes))
}

/// Number of feasible selections Σ_allocations Π_r C(N_r, L_r), saturating.
pub fn feasible_selection_count(instance: &ProblemInstance) -> u128 {
    let floors = instance.floors();
    let sizes_max = instance.mode_sizes();
    let mut total: u128 = 0;
    let mut alloc = floors.clone();
    enumerate_allocations(&floors, &sizes_max, instance.budget(), 0, &mut alloc, &mut |sizes| {
        let mut prod: u128 = 1;
        for (r, &s) in sizes.iter().enumerate() {
            prod = prod.saturating_mul(binomial(sizes_max[r], s));
        }
        total = total.saturating_add(prod);
    });
    total
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Visits every per-mode size vector with floors ≤ sizes ≤ capacities and
/// Σ sizes = budget, in lexicographic order.
fn enumerate_allocations(
    floors: &[usize],
    caps: &[usize],
    budget: usize,
    mode: usize,
    alloc: &mut Vec<usize>,
    visit: &mut dyn FnMut(&[usize]),
) {
    let spent: usize = alloc[..mode].iter().sum();
    if mode == floors.len() {
        if spent == budget {
            visit(alloc);
        }
        return;
    }
    let rest_min: usize = floors[mode + 1..].iter().sum();
    let rest_max: usize = caps[mode + 1..].iter().sum();
    let remaining = budget - spent;
    let lo = floors[mode].max(remaining.saturating_sub(rest_max));
    let hi = caps[mode].min(remaining.saturating_sub(rest_min));
    for s in lo..=hi {
        alloc[mode] = s;
        enumerate_allocations(floors, caps, budget, mode + 1, alloc, visit);
    }
    alloc[mode] = floors[mode];
}

/// Minimum objective value over all size-`size` subsets of one mode,
/// streamed in lexicographic order so the first optimum found is the
/// lexicographically smallest. Returns `None` when no subset of this size
/// has a defined objective (MSE with every subset singular).
fn best_subset_of_size(
    factor: &FactorMatrix,
    size: usize,
    objective: Objective,
    parallel: bool,
) -> Option<(f64, Vec<usize>)> {
    let n = factor.n_rows();
    if size > n {
        return None;
    }
    let run = |first: usize| -> Option<(f64, Vec<usize>)> {
        let mut search = SubsetSearch::new(factor, size, objective);
        search.descend(first);
        search.best
    };

    #[cfg(feature = "parallel")]
    if parallel && binomial(n, size) > 4096 {
        use rayon::prelude::*;
        return (0..=n - size)
            .into_par_iter()
            .filter_map(run)
            .reduce_with(|a, b| {
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            });
    }
    let _ = parallel;
    let mut best: Option<(f64, Vec<usize>)> = None;
    for first in 0..=n - size {
        if let Some(cand) = run(first) {
            let better = match &best {
                None => true,
                Some((bv, bk)) => cand.0 < *bv || (cand.0 == *bv && cand.1 < *bk),
            };
            if better {
                best = Some(cand);
            }
        }
    }
    best
}

/// Depth-first enumeration of fixed-size subsets with an incrementally
/// maintained Gram matrix (one K×K copy per depth).
struct SubsetSearch<'a> {
    factor: &'a FactorMatrix,
    size: usize,
    objective: Objective,
    grams: Vec<Vec<f64>>,
    fps: Vec<f64>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

impl<'a> SubsetSearch<'a> {
    fn new(factor: &'a FactorMatrix, size: usize, objective: Objective) -> Self {
        let k = factor.n_cols();
        Self {
            factor,
            size,
            objective,
            grams: vec![vec![0.0; k * k]],
            fps: vec![0.0],
            chosen: Vec::with_capacity(size),
            best: None,
        }
    }

    fn descend(&mut self, row: usize) {
        let k = self.factor.n_cols();
        let u = self.factor.matrix().row(row);
        let depth = self.chosen.len();
        // gram' = gram + uᵀu; fp' = fp + 2uMuᵀ + ‖u‖⁴ with the old gram M.
        let (quad, norm2) = {
            let gram = &self.grams[depth];
            let mut quad = 0.0;
            let mut norm2 = 0.0;
            for i in 0..k {
                let ui = u[i];
                norm2 += ui * ui;
                if ui != 0.0 {
                    quad += ui * linalg::dot(&gram[i * k..(i + 1) * k], u);
                }
            }
            (quad, norm2)
        };
        let new_fp = self.fps[depth] + 2.0 * quad + norm2 * norm2;

        // Frame potential only grows as rows are added, so a partial set
        // already at or above the incumbent cannot improve it.
        if self.objective == Objective::Fp {
            if let Some((bv, _)) = &self.best {
                if new_fp >= *bv {
                    return;
                }
            }
        }

        if self.grams.len() == depth + 1 {
            self.grams.push(vec![0.0; k * k]);
            self.fps.push(0.0);
        }
        let (lower, upper) = self.grams.split_at_mut(depth + 1);
        let src = &lower[depth];
        let dst = &mut upper[0];
        dst.copy_from_slice(src);
        for i in 0..k {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            for j in 0..k {
                dst[i * k + j] += ui * u[j];
            }
        }
        self.fps[depth + 1] = new_fp;
        self.chosen.push(row);

        if self.chosen.len() == self.size {
            self.evaluate_leaf();
        } else {
            let needed = self.size - self.chosen.len();
            for next in row + 1..=self.factor.n_rows() - needed {
                self.descend(next);
            }
        }
        self.chosen.pop();
    }

    fn evaluate_leaf(&mut self) {
        let depth = self.chosen.len();
        let value = match self.objective {
            Objective::Fp => Some(self.fps[depth]),
            Objective::Mse => {
                let k = self.factor.n_cols();
                let gram = DenseMatrix::new(k, k, self.grams[depth].clone())
                    .expect("gram is well formed");
                trace_of_inverse(&gram)
            }
        };
        if let Some(v) = value {
            let better = match &self.best {
                None => true,
                Some((bv, _)) => v < *bv,
            };
            if better {
                let subset: Vec<usize> = self.chosen.iter().map(|r| r + 1).collect();
                self.best = Some((v, subset));
            }
        }
    }
}

/// tr(M⁻¹) of a symmetric PSD matrix, or None when numerically singular.
fn trace_of_inverse(gram: &DenseMatrix) -> Option<f64> {
    let eigs = linalg::symmetric_eigenvalues(gram);
    let lmax = eigs.iter().cloned().fold(0.0, f64::max);
    let tol = lmax * gram.cols() as f64 * f64::EPSILON;
    if eigs.iter().any(|&l| l <= tol) {
        return None;
    }
    Some(eigs.iter().map(|l| 1.0 / l).sum())
}
