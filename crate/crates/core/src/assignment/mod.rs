//! The assignment step: scoring inputs against guarded records in the
//! projected space and solving the bounded many-to-one matching exactly.
//!
//! The matching is an integer program whose constraint matrix (one row sum per
//! input, a count window per record) is totally unimodular, so it is solved as
//! a min-cost flow on the transportation graph rather than with a general ILP
//! solver. Scores are integerized before solving (see [`ScoreMatrix::integer_weights`])
//! and the solver returns the lexicographically smallest optimal map.

mod flow;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SvdResult};

/// Integerized scores span `[-2^32, 2^32]`.
pub const SCORE_SCALE: f64 = 4_294_967_296.0;

/// Largest search space the exhaustive oracle will walk.
pub const BRUTE_FORCE_LIMIT: u128 = 10_000_000;

/// Many-to-one map from inputs `[n]` to records `[m]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    map: Vec<usize>,
}

impl Assignment {
    pub fn new(map: Vec<usize>) -> Self {
        Assignment { map }
    }

    pub fn identity(n: usize) -> Self {
        Assignment { map: (0..n).collect() }
    }

    pub fn constant(n: usize, j: usize) -> Self {
        Assignment { map: vec![j; n] }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.map
    }

    pub fn get(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Number of inputs mapped to each of the `m` records.
    pub fn counts(&self, m: usize) -> Vec<usize> {
        let mut c = vec![0; m];
        for &j in &self.map {
            if j < m {
                c[j] += 1;
            }
        }
        c
    }

    /// Fraction of positions where `self` and `truth` agree.
    pub fn accuracy(&self, truth: &Assignment) -> f64 {
        if self.map.is_empty() {
            return 0.0;
        }
        let hits = self.map.iter().zip(&truth.map).filter(|(a, b)| a == b).count();
        hits as f64 / self.map.len() as f64
    }

    /// Accuracy on the listed `(input, record)` pairs.
    pub fn accuracy_on(&self, labels: &[(usize, usize)]) -> f64 {
        if labels.is_empty() {
            return 0.0;
        }
        let hits = labels.iter().filter(|&&(i, j)| self.map.get(i) == Some(&j)).count();
        hits as f64 / labels.len() as f64
    }

    /// Inputs mapped to themselves (meaningful when the map is a permutation).
    pub fn fixed_points(&self) -> Vec<usize> {
        self.map.iter().enumerate().filter(|(i, &j)| *i == j).map(|(i, _)| i).collect()
    }

    /// Total and within the record count window.
    pub fn is_feasible_for(&self, records: &GuardedRecords) -> bool {
        let m = records.len();
        if self.map.iter().any(|&j| j >= m) {
            return false;
        }
        self.counts(m)
            .iter()
            .enumerate()
            .all(|(j, &c)| records.lower[j] <= c && c <= records.upper[j])
    }

    /// 64-bit FNV-1a digest of the map, used for trace snapshots.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for &j in &self.map {
            for b in (j as u64).to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }
}

/// Which feasibility condition of the record count window failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BoundViolation {
    NoRecords,
    LowerAboveUpper { record: usize, lower: usize, upper: usize },
    LowerSumExceedsInputs { sum: usize, n: usize },
    UpperSumBelowInputs { sum: usize, n: usize },
}

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundViolation::NoRecords => write!(f, "no guarded records"),
            BoundViolation::LowerAboveUpper { record, lower, upper } => {
                write!(f, "record {record} has lower bound {lower} above upper bound {upper}")
            }
            BoundViolation::LowerSumExceedsInputs { sum, n } => {
                write!(f, "lower bounds sum to {sum}, more than the {n} inputs")
            }
            BoundViolation::UpperSumBelowInputs { sum, n } => {
                write!(f, "upper bounds sum to {sum}, fewer than the {n} inputs")
            }
        }
    }
}

/// The `m` unique guarded records with per-record count windows `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardedRecords {
    z: Matrix,
    lower: Vec<usize>,
    upper: Vec<usize>,
    priors: Vec<f64>,
}

impl GuardedRecords {
    /// Explicit bounds; priors are taken proportional to the window midpoints.
    pub fn new(z: Matrix, lower: Vec<usize>, upper: Vec<usize>) -> Result<Self> {
        let mid: Vec<f64> = lower.iter().zip(&upper).map(|(&a, &b)| (a + b) as f64 / 2.0).collect();
        let total: f64 = mid.iter().sum();
        let m = z.rows();
        let priors = if total > 0.0 {
            mid.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / m as f64; m]
        };
        GuardedRecords::with_parts(z, lower, upper, priors)
    }

    /// Bounds derived from attribute priors for `n` inputs, see [`bounds_from_priors`].
    pub fn from_priors(z: Matrix, priors: &[f64], n: usize, slack: f64) -> Result<Self> {
        if priors.len() != z.rows() {
            return Err(Error::invalid(format!(
                "{} priors for {} records",
                priors.len(),
                z.rows()
            )));
        }
        let (lower, upper) = bounds_from_priors(priors, n, slack)?;
        GuardedRecords::with_parts(z, lower, upper, priors.to_vec())
    }

    /// Deduplicates a bag of guarded samples into unique records (first
    /// occurrence order) with empirical priors, bounded for `n` inputs.
    /// Also returns the record index of every sample.
    pub fn from_samples(samples: &Matrix, n: usize, slack: f64) -> Result<(Self, Vec<usize>)> {
        let mut index: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
        let mut rows: Vec<usize> = Vec::new();
        let mut of_sample = Vec::with_capacity(samples.rows());
        for (i, r) in samples.iter_rows().enumerate() {
            // -0.0 and 0.0 name the same record
            let key: Vec<u64> = r.iter().map(|v| (v + 0.0).to_bits()).collect();
            let next = rows.len();
            let id = *index.entry(key).or_insert(next);
            if id == next {
                rows.push(i);
            }
            of_sample.push(id);
        }
        let z = samples.select_rows(&rows)?;
        let mut counts = vec![0usize; rows.len()];
        for &id in &of_sample {
            counts[id] += 1;
        }
        let total = samples.rows() as f64;
        let priors: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
        Ok((GuardedRecords::from_priors(z, &priors, n, slack)?, of_sample))
    }

    fn with_parts(z: Matrix, lower: Vec<usize>, upper: Vec<usize>, priors: Vec<f64>) -> Result<Self> {
        let m = z.rows();
        if lower.len() != m || upper.len() != m {
            return Err(Error::invalid(format!(
                "{} records but {} lower and {} upper bounds",
                m,
                lower.len(),
                upper.len()
            )));
        }
        for (j, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if a > b {
                return Err(Error::InfeasibleBounds(BoundViolation::LowerAboveUpper {
                    record: j,
                    lower: a,
                    upper: b,
                }));
            }
        }
        for a in 0..m {
            for b in a + 1..m {
                if z.row(a) == z.row(b) {
                    return Err(Error::invalid(format!("records {a} and {b} are identical")));
                }
            }
        }
        Ok(GuardedRecords { z, lower, upper, priors })
    }

    pub fn len(&self) -> usize {
        self.z.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.z.rows() == 0
    }

    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn dim(&self) -> usize {
        self.z.cols()
    }

    pub fn lower(&self) -> &[usize] {
        &self.lower
    }

    pub fn upper(&self) -> &[usize] {
        &self.upper
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Checks `Σ lower ≤ n ≤ Σ upper`.
    pub fn check_feasible(&self, n: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::InfeasibleBounds(BoundViolation::NoRecords));
        }
        let lo: usize = self.lower.iter().sum();
        if lo > n {
            return Err(Error::InfeasibleBounds(BoundViolation::LowerSumExceedsInputs { sum: lo, n }));
        }
        let hi: usize = self.upper.iter().map(|&u| u.min(n)).sum();
        if hi < n {
            return Err(Error::InfeasibleBounds(BoundViolation::UpperSumBelowInputs { sum: hi, n }));
        }
        Ok(())
    }
}

/// Count windows from attribute priors: `floor(n·p·(1−slack))` to
/// `ceil(n·p·(1+slack))`, upper bounds capped at `n`, then repaired until
/// `Σ lower ≤ n ≤ Σ upper` (upper bounds raised largest-prior first, lower
/// bounds clipped largest-prior first).
pub fn bounds_from_priors(priors: &[f64], n: usize, slack: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    if priors.is_empty() {
        return Err(Error::invalid("no priors"));
    }
    if priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::invalid("priors must be finite and non-negative"));
    }
    let total: f64 = priors.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("priors sum to {total}, expected 1")));
    }
    if !(0.0..1.0).contains(&slack) {
        return Err(Error::invalid(format!("slack {slack} outside [0, 1)")));
    }
    // absorb representation error in n·p·(1±slack) before rounding
    const NUDGE: f64 = 1e-9;
    let nf = n as f64;
    let mut lower: Vec<usize> = priors
        .iter()
        .map(|p| libm::floor(nf * p * (1.0 - slack) + NUDGE).max(0.0) as usize)
        .collect();
    let mut upper: Vec<usize> = priors
        .iter()
        .map(|p| (libm::ceil(nf * p * (1.0 + slack) - NUDGE).max(0.0) as usize).min(n))
        .collect();

    let mut by_prior: Vec<usize> = (0..priors.len()).collect();
    by_prior.sort_by(|&a, &b| priors[b].partial_cmp(&priors[a]).unwrap_or(core::cmp::Ordering::Equal));

    let mut hi: usize = upper.iter().sum();
    for &j in &by_prior {
        if hi >= n {
            break;
        }
        let raise = (n - hi).min(n - upper[j]);
        upper[j] += raise;
        hi += raise;
    }
    let mut lo: usize = lower.iter().sum();
    for &j in &by_prior {
        if lo <= n {
            break;
        }
        let cut = (lo - n).min(lower[j]);
        lower[j] -= cut;
        lo -= cut;
    }
    Ok((lower, upper))
}

/// `s_ij = ⟨U_kᵀ x_i, V_kᵀ z_j⟩`, an `n × m` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix(Matrix);

impl ScoreMatrix {
    pub fn new(s: Matrix) -> Self {
        ScoreMatrix(s)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn inputs(&self) -> usize {
        self.0.rows()
    }

    pub fn records(&self) -> usize {
        self.0.cols()
    }

    /// `Σ_i s_{i, π(i)}`.
    pub fn objective(&self, pi: &Assignment) -> f64 {
        pi.as_slice().iter().enumerate().map(|(i, &j)| self.0[(i, j)]).sum()
    }

    /// Scores scaled so the largest magnitude maps to `2^32`, then rounded.
    /// Both the flow solver and the brute-force oracle compare in this domain,
    /// so ties created by rounding resolve identically in each.
    pub fn integer_weights(&self) -> Vec<i64> {
        let top = self.0.max_abs();
        if top == 0.0 {
            return vec![0; self.0.as_slice().len()];
        }
        let scale = SCORE_SCALE / top;
        self.0.as_slice().iter().map(|&v| libm::round(v * scale) as i64).collect()
    }

    /// Integer objective of a map under [`Self::integer_weights`].
    pub fn integer_objective(&self, pi: &Assignment) -> i64 {
        let w = self.integer_weights();
        let m = self.records();
        pi.as_slice().iter().enumerate().map(|(i, &j)| w[i * m + j]).sum()
    }
}

/// Scores of every input against every record using the top `k` singular directions.
pub fn score_matrix(x: &Matrix, records: &GuardedRecords, proj: &SvdResult, k: usize) -> Result<ScoreMatrix> {
    let r = proj.rank();
    if k == 0 || k > r {
        return Err(Error::invalid(format!("score rank k={k} outside [1, {r}]")));
    }
    if x.cols() != proj.u.rows() || records.dim() != proj.v.rows() {
        return Err(Error::invalid(format!(
            "projection is {}x{} but data dims are {} and {}",
            proj.u.rows(),
            proj.v.rows(),
            x.cols(),
            records.dim()
        )));
    }
    let xu = x.matmul(&proj.u.leading_columns(k)?)?;
    let zv = records.z().matmul(&proj.v.leading_columns(k)?)?;
    Ok(ScoreMatrix(xu.matmul(&zv.transpose())?))
}

/// Exact maximizer of `Σ_i s_{i,π(i)}` subject to the record count windows.
///
/// Ties (in the integerized domain) resolve to the lexicographically smallest map.
pub fn solve_assignment(s: &ScoreMatrix, records: &GuardedRecords) -> Result<Assignment> {
    let (n, m) = (s.inputs(), s.records());
    if m != records.len() {
        return Err(Error::invalid(format!("{m} score columns for {} records", records.len())));
    }
    records.check_feasible(n)?;
    if m == 1 {
        return Ok(Assignment::constant(n, 0));
    }
    let weights = s.integer_weights();
    let upper: Vec<usize> = records.upper().iter().map(|&u| u.min(n)).collect();
    let map = flow::solve_transport(n, m, &weights, records.lower(), &upper)
        .ok_or_else(|| Error::invalid("flow solver could not saturate lower bounds"))?;
    Ok(Assignment::new(map))
}

/// Maximizes `Σ_i w[i·m + π(i)]` over maps `[n] → [m]` within the count
/// windows, on raw integer weights. `None` when the windows are infeasible.
pub(crate) fn solve_integer(n: usize, m: usize, w: &[i64], lower: &[usize], upper: &[usize]) -> Option<Vec<usize>> {
    if m == 1 {
        return (lower[0] <= n && n <= upper[0]).then(|| vec![0; n]);
    }
    flow::solve_transport(n, m, w, lower, upper)
}

/// Exhaustive search over all `m^n` maps; same tie rule as [`solve_assignment`].
pub fn brute_force_assignment(s: &ScoreMatrix, records: &GuardedRecords) -> Result<Assignment> {
    let (n, m) = (s.inputs(), s.records());
    if m != records.len() {
        return Err(Error::invalid(format!("{m} score columns for {} records", records.len())));
    }
    records.check_feasible(n)?;
    let size = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::TooLarge { size, limit: BRUTE_FORCE_LIMIT });
    }
    let w = s.integer_weights();
    let mut map = vec![0usize; n];
    let mut best: Option<(i64, Vec<usize>)> = None;
    let mut counts = vec![0usize; m];
    loop {
        counts.iter_mut().for_each(|c| *c = 0);
        for &j in &map {
            counts[j] += 1;
        }
        let feasible = (0..m).all(|j| records.lower()[j] <= counts[j] && counts[j] <= records.upper()[j]);
        if feasible {
            let obj: i64 = map.iter().enumerate().map(|(i, &j)| w[i * m + j]).sum();
            if best.as_ref().is_none_or(|(b, _)| obj > *b) {
                best = Some((obj, map.clone()));
            }
        }
        // odometer with index 0 as the most significant digit
        let mut pos = n;
        loop {
            if pos == 0 {
                return best
                    .map(|(_, m)| Assignment::new(m))
                    .ok_or(Error::InfeasibleBounds(BoundViolation::NoRecords));
            }
            pos -= 1;
            map[pos] += 1;
            if map[pos] < m {
                break;
            }
            map[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    fn records(m: usize, lower: &[usize], upper: &[usize]) -> GuardedRecords {
        let z = Matrix::new(m, 1, (0..m).map(|j| j as f64).collect()).unwrap();
        GuardedRecords::new(z, lower.to_vec(), upper.to_vec()).unwrap()
    }

    fn scores(rows: &[&[f64]]) -> ScoreMatrix {
        ScoreMatrix::new(Matrix::from_rows(rows).unwrap())
    }

    #[test]
    fn prior_bounds() {
        assert_eq!(bounds_from_priors(&[0.5, 0.5], 100, 0.2).unwrap(), (vec![40, 40], vec![60, 60]));
        assert_eq!(bounds_from_priors(&[0.25, 0.75], 8, 0.0).unwrap(), (vec![2, 6], vec![2, 6]));
        let (lo, hi) = bounds_from_priors(&[0.9, 0.1], 10, 0.3).unwrap();
        assert_eq!((lo.clone(), hi.clone()), (vec![6, 0], vec![10, 2]));
        assert!(lo.iter().sum::<usize>() <= 10 && hi.iter().sum::<usize>() >= 10);
        assert!(bounds_from_priors(&[0.5, 0.6], 10, 0.2).is_err());
        assert!(bounds_from_priors(&[1.0], 10, 1.0).is_err());
    }

    #[test]
    fn forced_matching_is_identity() {
        let s = scores(&[&[5.0, 1.0, 0.0], &[0.0, 4.0, 1.0], &[1.0, 0.0, 6.0]]);
        let r = records(3, &[1, 1, 1], &[1, 1, 1]);
        assert_eq!(solve_assignment(&s, &r).unwrap().as_slice(), &[0, 1, 2]);
    }

    #[test]
    fn binding_bounds_split_evenly() {
        let s = scores(&[&[3.0, 1.0], &[3.0, 1.0], &[3.0, 1.0], &[3.0, 1.0]]);
        let r = records(2, &[2, 2], &[2, 2]);
        let pi = solve_assignment(&s, &r).unwrap();
        assert_eq!(pi.counts(2), [2, 2]);
        // all splits tie: lexicographically smallest wins
        assert_eq!(pi.as_slice(), &[0, 0, 1, 1]);
        assert_eq!(brute_force_assignment(&s, &r).unwrap(), pi);
    }

    #[test]
    fn infeasible_bounds_are_reported() {
        let s = scores(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let r = records(2, &[2, 2], &[3, 3]);
        assert!(matches!(
            solve_assignment(&s, &r),
            Err(Error::InfeasibleBounds(BoundViolation::LowerSumExceedsInputs { sum: 4, n: 3 }))
        ));
        let r = records(2, &[0, 0], &[1, 1]);
        assert!(matches!(
            solve_assignment(&s, &r),
            Err(Error::InfeasibleBounds(BoundViolation::UpperSumBelowInputs { sum: 2, n: 3 }))
        ));
    }

    #[test]
    fn brute_force_refuses_huge_spaces() {
        let s = ScoreMatrix::new(Matrix::zeros(30, 3));
        let r = records(3, &[0, 0, 0], &[30, 30, 30]);
        assert!(matches!(brute_force_assignment(&s, &r), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn score_matrix_one_dimensional() {
        let x = Matrix::from_rows(&[&[2.0], &[-1.0]]).unwrap();
        let r = GuardedRecords::new(Matrix::from_rows(&[&[3.0], &[0.5]]).unwrap(), vec![0, 0], vec![2, 2]).unwrap();
        let proj = svd(&Matrix::identity(1)).unwrap();
        let s = score_matrix(&x, &r, &proj, 1).unwrap();
        assert_eq!(s.matrix().as_slice(), &[6.0, 1.0, -3.0, -0.5]);
        assert!(score_matrix(&x, &r, &proj, 2).is_err());
        assert!(score_matrix(&x, &r, &proj, 0).is_err());
    }

    #[test]
    fn score_matrix_matches_double_loop() {
        let x = Matrix::from_rows(&[&[1.0, 2.0, -1.0], &[0.5, -0.3, 2.0], &[-1.5, 0.2, 0.7]]).unwrap();
        let z = Matrix::from_rows(&[&[1.0, -2.0], &[0.3, 0.8]]).unwrap();
        let r = GuardedRecords::new(z.clone(), vec![0, 0], vec![3, 3]).unwrap();
        let omega = Matrix::from_rows(&[&[1.0, 0.5], &[-0.2, 2.0], &[0.7, 0.1]]).unwrap();
        let proj = svd(&omega).unwrap();
        let s = score_matrix(&x, &r, &proj, 2).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                let mut want = 0.0;
                for l in 0..2 {
                    let mut ux = 0.0;
                    for a in 0..3 {
                        ux += proj.u[(a, l)] * x[(i, a)];
                    }
                    let mut vz = 0.0;
                    for b in 0..2 {
                        vz += proj.v[(b, l)] * z[(j, b)];
                    }
                    want += ux * vz;
                }
                assert!((s.matrix()[(i, j)] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn orthogonal_input_scores_zero() {
        let x = Matrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let r = GuardedRecords::new(Matrix::from_rows(&[&[1.0], &[-1.0]]).unwrap(), vec![0, 0], vec![2, 2]).unwrap();
        let proj = svd(&Matrix::from_rows(&[&[1.0], &[0.0]]).unwrap()).unwrap();
        let s = score_matrix(&x, &r, &proj, 1).unwrap();
        assert_eq!(s.matrix().row(0), &[0.0, 0.0]);
    }

    #[test]
    fn from_samples_dedups_in_first_seen_order() {
        let z = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 0.0]]).unwrap();
        let (r, ids) = GuardedRecords::from_samples(&z, 4, 0.0).unwrap();
        assert_eq!(r.len(), 2);
        assert_eq!(ids, [0, 1, 0, 0]);
        assert_eq!(r.priors(), &[0.75, 0.25]);
        assert_eq!(r.lower(), &[3, 1]);
    }

    #[test]
    fn duplicate_records_rejected() {
        let z = Matrix::from_rows(&[&[1.0], &[1.0]]).unwrap();
        assert!(GuardedRecords::new(z, vec![0, 0], vec![1, 1]).is_err());
    }

    #[test]
    fn single_record_is_constant() {
        let s = scores(&[&[1.0], &[-4.0]]);
        let r = records(1, &[0], &[5]);
        assert_eq!(solve_assignment(&s, &r).unwrap().as_slice(), &[0, 0]);
    }
}
