//! k-means baseline: Lloyd clustering of the inputs stands in for the
//! alternating steps, and clusters are then matched one-to-one to records.
//!
//! Without labels the only signal linking clusters to records is mass, so the
//! largest cluster goes to the record with the largest prior, and so on down.
//! Labeled pairs (Partial selection) outweigh that ordering. The mapped result
//! is finally repaired into the record count windows.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::amsal::{prepare, select_model, AmsalConfig, Candidate, ScoreK, Selection};
use crate::assignment::{solve_integer, Assignment, GuardedRecords};
use crate::error::{Error, Result};
use crate::linalg::{cross_covariance, svd, Matrix};
use crate::rng::{self, streams, Rng};

pub const MAX_SWEEPS: usize = 100;

struct Clustering {
    labels: Vec<usize>,
    centers: Vec<Vec<f64>>,
    sweeps: usize,
}

/// Assignment from `cfg.num_seeds` k-means restarts with `k = m`, selected by
/// the same rule as the alternating driver.
pub fn kmeans_assign(x: &Matrix, records: &GuardedRecords, cfg: &AmsalConfig) -> Result<Assignment> {
    let (xc, _) = prepare(x, records, cfg, None)?;
    let (n, m) = (xc.rows(), records.len());
    if m == 1 {
        return Ok(Assignment::constant(n, 0));
    }
    let labels = match &cfg.selection {
        Selection::Partial(l) => l.as_slice(),
        Selection::Unsupervised => &[],
    };
    let mut candidates = Vec::with_capacity(cfg.num_seeds);
    for seed in 0..cfg.num_seeds {
        let mut rng = rng::stream(cfg.rng_seed, streams::KMEANS_SEED + seed as u64);
        let clustering = lloyd(&xc, m, &mut rng);
        let to_record = match_clusters(&clustering, records, labels)?;
        let pi = repair(&xc, &clustering, &to_record, records);
        let proj = svd(&cross_covariance(&xc, records.z(), &pi)?)?;
        let k = match cfg.score_k {
            ScoreK::Full => proj.sigma.len(),
            ScoreK::Top(k) => k,
        };
        let objective = proj.sigma.iter().take(k).sum();
        candidates.push(Candidate { seed, iteration: clustering.sweeps, assignment: pi, objective });
    }
    let best = select_model(&candidates, &cfg.selection)?;
    Ok(candidates.swap_remove(best).assignment)
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn nearest(point: &[f64], centers: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, center) in centers.iter().enumerate() {
        let d = dist2(point, center);
        if d < best_d {
            best = c;
            best_d = d;
        }
    }
    best
}

/// Random first center, then repeatedly the point farthest from all chosen ones.
fn init_centers(x: &Matrix, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut centers = vec![x.row(rng.random_range(0..n)).to_vec()];
    let mut closest: Vec<f64> = x.iter_rows().map(|r| dist2(r, &centers[0])).collect();
    while centers.len() < k {
        let far = argmax(&closest);
        centers.push(x.row(far).to_vec());
        let c = centers.last().expect("just pushed");
        for (i, d) in closest.iter_mut().enumerate() {
            *d = d.min(dist2(x.row(i), c));
        }
    }
    centers
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in v.iter().enumerate() {
        if d > v[best] {
            best = i;
        }
    }
    best
}

fn lloyd(x: &Matrix, k: usize, rng: &mut Rng) -> Clustering {
    let (n, d) = x.shape();
    let mut centers = init_centers(x, k, rng);
    let mut labels: Vec<usize> = x.iter_rows().map(|r| nearest(r, &centers)).collect();
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS {
        sweeps += 1;
        let mut sums = vec![vec![0.0; d]; k];
        let mut sizes = vec![0usize; k];
        for (row, &c) in x.iter_rows().zip(&labels) {
            sizes[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(row) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            } else {
                // empty cluster: re-seed at the worst-served point
                let spread: Vec<f64> = (0..n).map(|i| dist2(x.row(i), &centers[labels[i]])).collect();
                centers[c] = x.row(argmax(&spread)).to_vec();
            }
        }
        let next: Vec<usize> = x.iter_rows().map(|r| nearest(r, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Clustering { labels, centers, sweeps }
}

/// Descending-order rank of each entry; ties keep index order.
fn descending_rank<T: PartialOrd + Copy>(v: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(core::cmp::Ordering::Equal));
    let mut rank = vec![0; v.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    rank
}

/// One-to-one cluster → record map. Label votes dominate; among equal votes
/// cluster-size rank is matched to prior rank.
fn match_clusters(cl: &Clustering, records: &GuardedRecords, labels: &[(usize, usize)]) -> Result<Vec<usize>> {
    let m = records.len();
    let mut sizes = vec![0usize; m];
    for &c in &cl.labels {
        sizes[c] += 1;
    }
    let size_rank = descending_rank(&sizes);
    let prior_rank = descending_rank(records.priors());
    let mut votes = vec![0i64; m * m];
    for &(i, j) in labels {
        votes[cl.labels[i] * m + j] += 1;
    }
    let scale = (m * m + 1) as i64;
    let w: Vec<i64> = (0..m * m)
        .map(|idx| {
            let (c, j) = (idx / m, idx % m);
            votes[idx] * scale - size_rank[c].abs_diff(prior_rank[j]) as i64
        })
        .collect();
    let ones = vec![1; m];
    solve_integer(m, m, &w, &ones, &ones).ok_or_else(|| Error::invalid("cluster matching failed"))
}

/// Moves single inputs, cheapest increase in squared distance first, until
/// every record's count lies in its window.
fn repair(x: &Matrix, cl: &Clustering, to_record: &[usize], records: &GuardedRecords) -> Assignment {
    let m = records.len();
    let mut center_of = vec![0; m];
    for (c, &j) in to_record.iter().enumerate() {
        center_of[j] = c;
    }
    let cost = |i: usize, j: usize| dist2(x.row(i), &cl.centers[center_of[j]]);
    let mut map: Vec<usize> = cl.labels.iter().map(|&c| to_record[c]).collect();
    let mut counts = vec![0usize; m];
    for &j in &map {
        counts[j] += 1;
    }
    let (lower, upper) = (records.lower(), records.upper());
    loop {
        let over = (0..m).find(|&j| counts[j] > upper[j]);
        let under = (0..m).find(|&j| counts[j] < lower[j]);
        let (sources, targets): (Vec<usize>, Vec<usize>) = match (over, under) {
            (Some(j), _) => (vec![j], (0..m).filter(|&t| counts[t] < upper[t]).collect()),
            (None, Some(j)) => ((0..m).filter(|&s| counts[s] > lower[s]).collect(), vec![j]),
            (None, None) => break,
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, &from) in map.iter().enumerate() {
            if !sources.contains(&from) {
                continue;
            }
            for &t in &targets {
                if t == from {
                    continue;
                }
                let delta = cost(i, t) - cost(i, from);
                if best.is_none_or(|(b, _, _)| delta < b) {
                    best = Some((delta, i, t));
                }
            }
        }
        let Some((_, i, t)) = best else { break };
        counts[map[i]] -= 1;
        counts[t] += 1;
        map[i] = t;
    }
    Assignment::new(map)
}
