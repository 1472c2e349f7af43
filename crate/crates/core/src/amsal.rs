//! Coordinate ascent over `(U, V, π)`.
//!
//! The shared objective is `Σ_i x_iᵀ U_k V_kᵀ z_{π(i)}`. With `π` fixed the
//! maximizing `(U_k, V_k)` are the top-`k` singular vectors of `Ω_π`
//! (M-step); with `(U_k, V_k)` fixed the maximizing `π` solves the bounded
//! assignment over the projected scores (A-step). Equivalently, with `E` the
//! one-hot matrix of `π`, the objective is `tr(U_kᵀ Xᵀ E Z V_k)`.
//!
//! Each iteration runs one M-step then one A-step and records the objective
//! after the A-step, so the recorded sequence never decreases within a seed.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::assignment::{score_matrix, solve_assignment, Assignment, GuardedRecords};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, cross_covariance, svd, Matrix, SvdResult};
use crate::rng::{self, streams, Rng};

/// How many singular directions the A-step scores with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreK {
    /// All `min(d, d')` directions.
    #[default]
    Full,
    Top(usize),
}

impl ScoreK {
    pub fn resolve(self, rank: usize) -> Result<usize> {
        match self {
            ScoreK::Full => Ok(rank),
            ScoreK::Top(k) if (1..=rank).contains(&k) => Ok(k),
            ScoreK::Top(k) => Err(Error::invalid(format!("score k={k} outside [1, {rank}]"))),
        }
    }
}

/// Model selection across seeds and iterations.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Selection {
    /// Largest objective.
    #[default]
    Unsupervised,
    /// Highest accuracy on a seed set of known `(input, record)` pairs.
    Partial(Vec<(usize, usize)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmsalConfig {
    pub max_iterations: usize,
    pub num_seeds: usize,
    /// Fraction above/below the prior counts allowed per record.
    pub slack: f64,
    pub score_k: ScoreK,
    pub selection: Selection,
    pub rng_seed: u64,
}

impl Default for AmsalConfig {
    fn default() -> Self {
        AmsalConfig {
            max_iterations: 100,
            num_seeds: 3,
            slack: 0.2,
            score_k: ScoreK::Full,
            selection: Selection::Unsupervised,
            rng_seed: 0,
        }
    }
}

impl AmsalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if self.num_seeds == 0 {
            return Err(Error::invalid("num_seeds must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.slack) {
            return Err(Error::invalid(format!("slack {} outside [0, 1)", self.slack)));
        }
        if let Selection::Partial(labels) = &self.selection {
            if labels.is_empty() {
                return Err(Error::invalid("partial selection needs at least one labeled pair"));
            }
        }
        Ok(())
    }

    /// Records whose count windows come from `priors` and this config's slack.
    pub fn records_for(&self, z: Matrix, priors: &[f64], n: usize) -> Result<GuardedRecords> {
        GuardedRecords::from_priors(z, priors, n, self.slack)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub seed: usize,
    pub iteration: usize,
    pub objective: f64,
    pub digest: u64,
    /// Agreement with the planted alignment, when one was supplied.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmsalTrace {
    pub rows: Vec<TraceRow>,
}

impl AmsalTrace {
    pub fn for_seed(&self, seed: usize) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(move |r| r.seed == seed)
    }

    /// Objective non-decreasing within every seed, up to `rel_tol · |previous|`.
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.rows.windows(2).all(|w| {
            w[0].seed != w[1].seed || w[1].objective >= w[0].objective - rel_tol * w[0].objective.abs()
        })
    }
}

/// One `(seed, iteration)` assignment eligible for selection.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub seed: usize,
    pub iteration: usize,
    pub assignment: Assignment,
    pub objective: f64,
}

/// Everything one seed produced.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub candidates: Vec<Candidate>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmsalResult {
    pub assignment: Assignment,
    /// SVD of `Ω` under `assignment`, on centered inputs.
    pub projection: SvdResult,
    pub trace: AmsalTrace,
    pub seed: usize,
    pub iteration: usize,
    pub objective: f64,
    /// Column means removed from the inputs before alignment.
    pub input_means: Vec<f64>,
}

/// One M-step followed by one A-step on centered inputs.
///
/// Returns the new map, the projection it was scored under, and the
/// objective of the new map under that projection.
pub fn am_iterate(
    x: &Matrix,
    records: &GuardedRecords,
    pi: &Assignment,
    cfg: &AmsalConfig,
) -> Result<(Assignment, SvdResult, f64)> {
    let omega = cross_covariance(x, records.z(), pi)?;
    let proj = svd(&omega)?;
    let k = cfg.score_k.resolve(proj.rank())?;
    let scores = score_matrix(x, records, &proj, k)?;
    let next = solve_assignment(&scores, records)?;
    let objective = scores.objective(&next);
    Ok((next, proj, objective))
}

/// Random map meeting the count windows: lower bounds first, the rest drawn
/// by prior weight among records with room, then shuffled onto the inputs.
pub fn random_feasible_assignment(n: usize, records: &GuardedRecords, rng: &mut Rng) -> Result<Assignment> {
    records.check_feasible(n)?;
    let m = records.len();
    let upper: Vec<usize> = records.upper().iter().map(|&u| u.min(n)).collect();
    let mut counts = records.lower().to_vec();
    let mut bag: Vec<usize> = Vec::with_capacity(n);
    for (j, &c) in counts.iter().enumerate() {
        bag.extend(core::iter::repeat_n(j, c));
    }
    while bag.len() < n {
        let open: Vec<usize> = (0..m).filter(|&j| counts[j] < upper[j]).collect();
        let weights: Vec<f64> = open.iter().map(|&j| records.priors()[j].max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = *open.last().expect("feasible bounds leave room");
            for (&j, &w) in open.iter().zip(&weights) {
                if target < w {
                    chosen = j;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            open[rng.random_range(0..open.len())]
        };
        counts[pick] += 1;
        bag.push(pick);
    }
    bag.shuffle(rng);
    Ok(Assignment::new(bag))
}

/// Runs one seed from a random feasible start on centered inputs.
pub fn run_seed(
    x: &Matrix,
    records: &GuardedRecords,
    cfg: &AmsalConfig,
    seed: usize,
    truth: Option<&Assignment>,
) -> Result<SeedRun> {
    let mut rng = rng::stream(cfg.rng_seed, streams::AMSAL_SEED + seed as u64);
    let mut pi = random_feasible_assignment(x.rows(), records, &mut rng)?;
    let mut candidates = Vec::new();
    let mut trace = Vec::new();
    for iteration in 0..cfg.max_iterations {
        let (next, _, objective) = am_iterate(x, records, &pi, cfg)?;
        trace.push(TraceRow {
            seed,
            iteration,
            objective,
            digest: next.digest(),
            accuracy: truth.map(|t| next.accuracy(t)),
        });
        let converged = next == pi;
        candidates.push(Candidate { seed, iteration, assignment: next.clone(), objective });
        if converged {
            break;
        }
        pi = next;
    }
    Ok(SeedRun { candidates, trace })
}

/// Index of the selected candidate. Candidates are expected in
/// `(seed, iteration)` order; earlier entries win exact ties.
pub fn select_model(candidates: &[Candidate], selection: &Selection) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let mut best = 0;
    match selection {
        Selection::Unsupervised => {
            for (i, c) in candidates.iter().enumerate().skip(1) {
                if c.objective > candidates[best].objective {
                    best = i;
                }
            }
        }
        Selection::Partial(labels) => {
            if labels.is_empty() {
                return Err(Error::invalid("partial selection needs labeled pairs"));
            }
            let acc: Vec<f64> = candidates.iter().map(|c| c.assignment.accuracy_on(labels)).collect();
            for (i, c) in candidates.iter().enumerate().skip(1) {
                let better = acc[i] > acc[best]
                    || (acc[i] == acc[best] && c.objective > candidates[best].objective);
                if better {
                    best = i;
                }
            }
        }
    }
    Ok(best)
}

/// Selects over all seed runs and packages the result. `x` must be the
/// centered inputs and `seed_runs` ordered by seed index.
pub fn assemble_result(
    x: &Matrix,
    input_means: Vec<f64>,
    records: &GuardedRecords,
    cfg: &AmsalConfig,
    seed_runs: Vec<SeedRun>,
) -> Result<AmsalResult> {
    let mut candidates = Vec::new();
    let mut trace = AmsalTrace::default();
    for run in seed_runs {
        candidates.extend(run.candidates);
        trace.rows.extend(run.trace);
    }
    let chosen = candidates.swap_remove(select_model(&candidates, &cfg.selection)?);
    let projection = svd(&cross_covariance(x, records.z(), &chosen.assignment)?)?;
    Ok(AmsalResult {
        assignment: chosen.assignment,
        projection,
        trace,
        seed: chosen.seed,
        iteration: chosen.iteration,
        objective: chosen.objective,
        input_means,
    })
}

/// Full driver: centers `x`, runs every seed sequentially, selects a model.
pub fn run_amsal(x: &Matrix, records: &GuardedRecords, cfg: &AmsalConfig) -> Result<AmsalResult> {
    run_amsal_traced(x, records, cfg, None)
}

/// As [`run_amsal`], also recording per-iteration accuracy against `truth`.
pub fn run_amsal_traced(
    x: &Matrix,
    records: &GuardedRecords,
    cfg: &AmsalConfig,
    truth: Option<&Assignment>,
) -> Result<AmsalResult> {
    let (xc, means) = prepare(x, records, cfg, truth)?;
    let runs = (0..cfg.num_seeds)
        .map(|seed| run_seed(&xc, records, cfg, seed, truth))
        .collect::<Result<Vec<_>>>()?;
    assemble_result(&xc, means, records, cfg, runs)
}

/// Validation and centering shared by sequential and threaded drivers.
pub fn prepare(
    x: &Matrix,
    records: &GuardedRecords,
    cfg: &AmsalConfig,
    truth: Option<&Assignment>,
) -> Result<(Matrix, Vec<f64>)> {
    cfg.validate()?;
    records.check_feasible(x.rows())?;
    if let Some(t) = truth {
        if t.len() != x.rows() {
            return Err(Error::invalid(format!("truth covers {} of {} inputs", t.len(), x.rows())));
        }
    }
    if let Selection::Partial(labels) = &cfg.selection {
        if let Some(&(i, j)) = labels.iter().find(|&&(i, j)| i >= x.rows() || j >= records.len()) {
            return Err(Error::invalid(format!("labeled pair ({i}, {j}) out of range")));
        }
    }
    Ok(center_columns(x))
}

/// Matrix form of the objective, `tr(U_kᵀ Xᵀ E Z V_k)` with `E` the one-hot
/// `n × m` matrix of `π`.
pub fn trace_objective(x: &Matrix, records: &GuardedRecords, pi: &Assignment, proj: &SvdResult, k: usize) -> Result<f64> {
    let m = records.len();
    let mut e = Matrix::zeros(x.rows(), m);
    for (i, &j) in pi.as_slice().iter().enumerate() {
        e[(i, j)] = 1.0;
    }
    let xtez = x.t_matmul(&e.matmul(records.z())?)?;
    let inner = proj.u.leading_columns(k)?.t_matmul(&xtez)?.matmul(&proj.v.leading_columns(k)?)?;
    Ok((0..k).map(|l| inner[(l, l)]).sum())
}

/// Number of inputs mapped to each record under the truth, as priors.
pub fn empirical_priors(map: &Assignment, m: usize) -> Vec<f64> {
    let n = map.len().max(1) as f64;
    map.counts(m).into_iter().map(|c| c as f64 / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::ScoreMatrix;
    use alloc::vec;
    use crate::linalg::singular_value_sum;
    use rand::SeedableRng;

    fn antipodal() -> (Matrix, GuardedRecords) {
        let x = Matrix::from_rows(&[&[1.0, 0.5], &[-1.0, -0.5]]).unwrap();
        let z = Matrix::from_rows(&[&[1.0], &[-1.0]]).unwrap();
        (x, GuardedRecords::new(z, vec![1, 1], vec![1, 1]).unwrap())
    }

    fn sigma_sum(x: &Matrix, r: &GuardedRecords, map: &[usize]) -> f64 {
        singular_value_sum(&cross_covariance(x, r.z(), &Assignment::new(map.to_vec())).unwrap())
    }

    #[test]
    fn two_inputs_converge_from_adversarial_start() {
        let x = Matrix::from_rows(&[&[3.0], &[1.0]]).unwrap();
        let z = Matrix::from_rows(&[&[2.0], &[1.0]]).unwrap();
        let r = GuardedRecords::new(z, vec![1, 1], vec![1, 1]).unwrap();
        // enumerate both permutations: identity is the unique maximizer
        assert_eq!(sigma_sum(&x, &r, &[0, 1]), 7.0);
        assert_eq!(sigma_sum(&x, &r, &[1, 0]), 5.0);
        let (next, _, obj) = am_iterate(&x, &r, &Assignment::new(vec![1, 0]), &AmsalConfig::default()).unwrap();
        assert_eq!(next.as_slice(), &[0, 1]);
        assert!((obj - 7.0).abs() < 1e-12);
    }

    #[test]
    fn centered_pair_is_a_tie() {
        // Ω of the swap is the negation of Ω of the identity, so both are fixed points.
        let (x, r) = antipodal();
        assert!((sigma_sum(&x, &r, &[0, 1]) - sigma_sum(&x, &r, &[1, 0])).abs() < 1e-12);
        let cfg = AmsalConfig::default();
        for start in [[0, 1], [1, 0]] {
            let pi = Assignment::new(start.to_vec());
            let (next, _, obj) = am_iterate(&x, &r, &pi, &cfg).unwrap();
            assert_eq!(next, pi);
            assert!((obj - sigma_sum(&x, &r, &start)).abs() < 1e-12);
        }
    }

    #[test]
    fn single_record_degenerates() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[-1.0, 0.0], &[0.0, -2.0]]).unwrap();
        let r = GuardedRecords::new(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap(), vec![0], vec![3]).unwrap();
        let res = run_amsal(&x, &r, &AmsalConfig::default()).unwrap();
        assert_eq!(res.assignment.as_slice(), &[0, 0, 0]);
        let omega = cross_covariance(&center_columns(&x).0, r.z(), &res.assignment).unwrap();
        assert!((res.objective - singular_value_sum(&omega)).abs() < 1e-12);
    }

    #[test]
    fn init_respects_bounds() {
        let z = Matrix::from_rows(&[&[0.0], &[1.0], &[2.0]]).unwrap();
        let r = GuardedRecords::from_priors(z, &[0.6, 0.3, 0.1], 50, 0.2).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a = random_feasible_assignment(50, &r, &mut rng).unwrap();
            assert!(a.is_feasible_for(&r));
        }
    }

    #[test]
    fn selection_rules() {
        let c = |seed, objective, map: &[usize]| Candidate {
            seed,
            iteration: 0,
            assignment: Assignment::new(map.to_vec()),
            objective,
        };
        let one = [c(0, 5.0, &[0, 1])];
        assert_eq!(select_model(&one, &Selection::Unsupervised).unwrap(), 0);
        let two = [c(0, 5.0, &[0, 1]), c(1, 7.0, &[1, 0])];
        assert_eq!(select_model(&two, &Selection::Unsupervised).unwrap(), 1);
        // partial: the lower-objective candidate matches the labeled pair
        assert_eq!(select_model(&two, &Selection::Partial(vec![(0, 0)])).unwrap(), 0);
        assert!(select_model(&two, &Selection::Partial(vec![])).is_err());
        assert_eq!(select_model(&[], &Selection::Unsupervised), Err(Error::NoCandidates));
        // exact ties keep the earliest seed
        let tied = [c(0, 7.0, &[0, 1]), c(1, 7.0, &[1, 0])];
        assert_eq!(select_model(&tied, &Selection::Unsupervised).unwrap(), 0);
    }

    #[test]
    fn partial_without_labels_fails_validation() {
        let (x, r) = antipodal();
        let cfg = AmsalConfig { selection: Selection::Partial(vec![]), ..Default::default() };
        assert!(matches!(run_amsal(&x, &r, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn trace_objective_matches_score_sum() {
        let mut rng = Rng::seed_from_u64(9);
        let x = Matrix::new(12, 3, (0..36).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let z = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[-1.0, -1.0]]).unwrap();
        let r = GuardedRecords::new(z, vec![0, 0, 0], vec![12, 12, 12]).unwrap();
        let pi = random_feasible_assignment(12, &r, &mut rng).unwrap();
        let proj = svd(&cross_covariance(&x, r.z(), &pi).unwrap()).unwrap();
        for k in 1..=2 {
            let s: ScoreMatrix = score_matrix(&x, &r, &proj, k).unwrap();
            let direct = s.objective(&pi);
            let via_trace = trace_objective(&x, &r, &pi, &proj, k).unwrap();
            assert!((direct - via_trace).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }
}
