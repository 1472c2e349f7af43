//! Planted latent-variable data and empirical checks of why maximizing the
//! singular-value sum recovers the true alignment.
//!
//! Samples follow `p(X, Z, H) = p(H) p(X | H) p(Z | H)`: a discrete state `h`
//! picks a mean for `x` and a mean for `z`, and independent Gaussian noise is
//! added to each, clipped to `[-B, B]`. State means are `separation` times
//! orthonormal random directions, shifted so their prior-weighted average is
//! zero; the per-state means are therefore not zero, only the overall mean is.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::assignment::{Assignment, GuardedRecords};
use crate::error::{Error, Result};
use crate::linalg::{center_columns, cross_covariance, dot, norm2, singular_value_sum, spectral_norm, svd, Matrix};
use crate::rng::{self, streams, Rng};

/// Clipping radius in noise standard deviations beyond the state means.
pub const CLIP_STDS: f64 = 6.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSpec {
    pub n: usize,
    pub d: usize,
    pub d_prime: usize,
    pub num_states: usize,
    pub state_priors: Vec<f64>,
    pub x_noise: f64,
    pub z_noise: f64,
    /// Norm of each state's mean direction before centering.
    pub separation: f64,
    /// Every coordinate of `x` and `z` is clipped to `[-bound_b, bound_b]`.
    pub bound_b: f64,
    pub rng_seed: u64,
}

impl LatentSpec {
    /// Two equiprobable states in `d = 8`, `d' = 2`, separation 3, unit noise.
    pub fn reference(n: usize, rng_seed: u64) -> Self {
        LatentSpec::new(n, 8, 2, vec![0.5, 0.5], 3.0, 1.0, 1.0, rng_seed)
    }

    /// Spec with the default clipping bound.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n: usize,
        d: usize,
        d_prime: usize,
        state_priors: Vec<f64>,
        separation: f64,
        x_noise: f64,
        z_noise: f64,
        rng_seed: u64,
    ) -> Self {
        LatentSpec {
            n,
            d,
            d_prime,
            num_states: state_priors.len(),
            state_priors,
            x_noise,
            z_noise,
            separation,
            bound_b: default_bound(separation, x_noise, z_noise),
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.d_prime == 0 || self.num_states == 0 {
            return Err(Error::invalid("sizes must be positive"));
        }
        if self.state_priors.len() != self.num_states {
            return Err(Error::invalid(format!(
                "{} priors for {} states",
                self.state_priors.len(),
                self.num_states
            )));
        }
        check_priors(&self.state_priors)?;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.x_noise) || !nonneg(self.z_noise) || !nonneg(self.separation) {
            return Err(Error::invalid("noise and separation must be finite and non-negative"));
        }
        if !(self.bound_b.is_finite() && self.bound_b > 0.0) {
            return Err(Error::invalid("bound_b must be positive"));
        }
        Ok(())
    }
}

pub fn default_bound(separation: f64, x_noise: f64, z_noise: f64) -> f64 {
    let b = separation + CLIP_STDS * x_noise.max(z_noise);
    if b > 0.0 {
        b
    } else {
        1.0
    }
}

fn check_priors(p: &[f64]) -> Result<()> {
    if p.iter().any(|&v| !(v.is_finite() && v >= 0.0)) || libm::fabs(p.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(Error::invalid("priors must be non-negative and sum to 1"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDataset {
    /// `n × d` inputs.
    pub x: Matrix,
    /// `n × d'` guarded values, aligned with `x` row by row.
    pub z: Matrix,
    /// Latent state of each sample.
    pub h: Vec<usize>,
    /// `num_states × d` state means of `x`.
    pub state_x: Matrix,
    /// `num_states × d'` state means of `z`.
    pub state_z: Matrix,
    pub priors: Vec<f64>,
    pub bound_b: f64,
}

impl PlantedDataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// The alignment `ι` between `x` and the per-sample `z`.
    pub fn identity(&self) -> Assignment {
        Assignment::identity(self.n())
    }

    /// Alignment of each input to its state's record in [`Self::records`].
    pub fn truth(&self) -> Assignment {
        Assignment::new(self.h.clone())
    }

    /// State means of `z` as guarded records, bounded from the state priors.
    pub fn records(&self, slack: f64) -> Result<GuardedRecords> {
        GuardedRecords::from_priors(self.state_z.clone(), &self.priors, self.n(), slack)
    }

    /// `E[x zᵀ]` for one sample, ignoring clipping: `Σ_h p_h μx(h) μz(h)ᵀ`.
    pub fn expected_cross_moment(&self) -> Matrix {
        let (d, dp) = (self.state_x.cols(), self.state_z.cols());
        let mut out = Matrix::zeros(d, dp);
        for (h, &p) in self.priors.iter().enumerate() {
            for a in 0..d {
                for b in 0..dp {
                    out[(a, b)] += p * self.state_x[(h, a)] * self.state_z[(h, b)];
                }
            }
        }
        out
    }
}

/// Orthonormal random directions. Past `dim` of them the next `dim` are the
/// negations of the first ones, and any further ones are random vectors of
/// length in `[0.25, 1)`, so that no two coincide almost surely.
fn random_directions(count: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        if (dim..2 * dim).contains(&out.len()) {
            let flipped = out[out.len() - dim].iter().map(|v| -v).collect();
            out.push(flipped);
            continue;
        }
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        if out.len() < dim {
            for _ in 0..2 {
                for q in &out {
                    let c = dot(&v, q);
                    v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
                }
            }
        }
        let nv = norm2(&v);
        if nv > 1e-8 {
            let length = if out.len() < dim { 1.0 } else { rng.random_range(0.25..1.0) };
            v.iter_mut().for_each(|vi| *vi *= length / nv);
            out.push(v);
        }
    }
    out
}

/// `separation · direction_h`, shifted to zero prior-weighted mean.
fn state_means(dirs: &[Vec<f64>], separation: f64, priors: &[f64]) -> Matrix {
    let (k, dim) = (dirs.len(), dirs[0].len());
    let mut center = vec![0.0; dim];
    for (dir, &p) in dirs.iter().zip(priors) {
        center.iter_mut().zip(dir).for_each(|(c, v)| *c += p * separation * v);
    }
    let data = dirs.iter().flat_map(|dir| dir.iter().zip(&center).map(|(v, c)| separation * v - c)).collect();
    Matrix::from_raw(k, dim, data)
}

fn sample_state(priors: &[f64], rng: &mut Rng) -> usize {
    let mut u: f64 = rng.random();
    for (h, &p) in priors.iter().enumerate() {
        if u < p {
            return h;
        }
        u -= p;
    }
    priors.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn noisy_rows(means: &Matrix, h: &[usize], noise: f64, bound: f64, rng: &mut Rng) -> Matrix {
    let dim = means.cols();
    let mut data = Vec::with_capacity(h.len() * dim);
    for &s in h {
        for &mu in means.row(s) {
            let e: f64 = StandardNormal.sample(rng);
            data.push((mu + noise * e).clamp(-bound, bound));
        }
    }
    Matrix::from_raw(h.len(), dim, data)
}

/// Draws a dataset; identical specs give identical data.
pub fn generate_latent(spec: &LatentSpec) -> Result<PlantedDataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.rng_seed, streams::SYNTHETIC);
    let state_x = state_means(&random_directions(spec.num_states, spec.d, &mut rng), spec.separation, &spec.state_priors);
    let state_z = state_means(
        &random_directions(spec.num_states, spec.d_prime, &mut rng),
        spec.separation,
        &spec.state_priors,
    );
    let h: Vec<usize> = (0..spec.n).map(|_| sample_state(&spec.state_priors, &mut rng)).collect();
    let x = noisy_rows(&state_x, &h, spec.x_noise, spec.bound_b, &mut rng);
    let z = noisy_rows(&state_z, &h, spec.z_noise, spec.bound_b, &mut rng);
    Ok(PlantedDataset { x, z, h, state_x, state_z, priors: spec.state_priors.clone(), bound_b: spec.bound_b })
}

/// Two independent binary factors: a task label `y` and a guarded label `z`,
/// both leaving a mean shift in `x` along mutually orthogonal directions.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFactorSpec {
    pub n: usize,
    pub d: usize,
    /// `P(y = 1)`.
    pub y_prior: f64,
    /// `P(z = 1)`.
    pub z_prior: f64,
    pub y_separation: f64,
    pub z_separation: f64,
    pub noise: f64,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoFactorDataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
    pub z_prior: f64,
}

impl TwoFactorDataset {
    /// One-hot guarded records `[1, 0]` (z = 0) and `[0, 1]` (z = 1).
    pub fn records(&self, slack: f64) -> Result<GuardedRecords> {
        GuardedRecords::from_priors(Matrix::identity(2), &[1.0 - self.z_prior, self.z_prior], self.x.rows(), slack)
    }

    pub fn select(&self, rows: &[usize]) -> Result<TwoFactorDataset> {
        Ok(TwoFactorDataset {
            x: self.x.select_rows(rows)?,
            y: rows.iter().map(|&i| self.y[i]).collect(),
            z: rows.iter().map(|&i| self.z[i]).collect(),
            z_prior: self.z_prior,
        })
    }
}

pub fn generate_two_factor(spec: &TwoFactorSpec) -> Result<TwoFactorDataset> {
    if spec.n == 0 || spec.d < 4 {
        return Err(Error::invalid("two-factor data needs n ≥ 1 and d ≥ 4"));
    }
    for p in [spec.y_prior, spec.z_prior] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!("prior {p} outside [0, 1]")));
        }
    }
    let mut rng = rng::stream(spec.rng_seed, streams::SYNTHETIC);
    let dirs = random_directions(4, spec.d, &mut rng);
    let y_means = state_means(&dirs[..2], spec.y_separation, &[1.0 - spec.y_prior, spec.y_prior]);
    let z_means = state_means(&dirs[2..], spec.z_separation, &[1.0 - spec.z_prior, spec.z_prior]);
    let mut y = Vec::with_capacity(spec.n);
    let mut z = Vec::with_capacity(spec.n);
    let mut data = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let yi = usize::from(rng.random::<f64>() < spec.y_prior);
        let zi = usize::from(rng.random::<f64>() < spec.z_prior);
        for a in 0..spec.d {
            let e: f64 = StandardNormal.sample(&mut rng);
            data.push(y_means[(yi, a)] + z_means[(zi, a)] + spec.noise * e);
        }
        y.push(yi);
        z.push(zi);
    }
    Ok(TwoFactorDataset { x: Matrix::new(spec.n, spec.d, data)?, y, z, z_prior: spec.z_prior })
}

/// Uniformly random permutation of `[n]`.
pub fn uniform_permutation(n: usize, rng: &mut Rng) -> Assignment {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Assignment::new(map)
}

/// Uniform among permutations with exactly `fixed_points` fixed points: a
/// uniform subset is fixed and the rest is a uniform derangement. With one
/// element left over no derangement exists and the identity is returned.
pub fn random_permutation_assignment(n: usize, fixed_points: usize, rng: &mut Rng) -> Assignment {
    let k = fixed_points.min(n);
    if n - k <= 1 {
        return Assignment::identity(n);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let mut movers = idx[k..].to_vec();
    movers.sort_unstable();
    let mut map: Vec<usize> = (0..n).collect();
    let mut image = movers.clone();
    loop {
        image.shuffle(rng);
        if movers.iter().zip(&image).all(|(a, b)| a != b) {
            break;
        }
    }
    for (&i, &j) in movers.iter().zip(&image) {
        map[i] = j;
    }
    Assignment::new(map)
}

fn sigma_plus(x: &Matrix, z: &Matrix, pi: &Assignment) -> Result<f64> {
    Ok(singular_value_sum(&cross_covariance(x, z, pi)?))
}

/// Fraction of random non-identity permutations `π` with
/// `σ⁺(Ω_π) < σ⁺(Ω_ι)`, inputs centered.
pub fn alignment_win_rate(data: &PlantedDataset, trials: usize, rng: &mut Rng) -> Result<f64> {
    let n = data.n();
    if trials == 0 || n < 2 {
        return Err(Error::invalid("need at least one trial and two samples"));
    }
    let (xc, _) = center_columns(&data.x);
    let reference = sigma_plus(&xc, &data.z, &data.identity())?;
    let mut below = 0;
    for _ in 0..trials {
        let pi = loop {
            let p = uniform_permutation(n, rng);
            if p.fixed_points().len() < n {
                break p;
            }
        };
        if sigma_plus(&xc, &data.z, &pi)? < reference {
            below += 1;
        }
    }
    Ok(below as f64 / trials as f64)
}

/// As [`alignment_win_rate`] with one permutation per freshly drawn dataset,
/// the data seeds following on from `spec.rng_seed`.
pub fn null_win_rate(spec: &LatentSpec, trials: usize) -> Result<f64> {
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let mut rng = rng::stream(spec.rng_seed, streams::SPLIT);
    let mut hits = 0.0;
    for t in 0..trials {
        let data = generate_latent(&LatentSpec { rng_seed: spec.rng_seed.wrapping_add(t as u64), ..spec.clone() })?;
        hits += alignment_win_rate(&data, 1, &mut rng)?;
    }
    Ok(hits / trials as f64)
}

/// `Σ_{i ∈ subset} x_i z_{π(i)}ᵀ`; the zero matrix for an empty subset.
pub fn omega_restricted(x: &Matrix, z: &Matrix, pi: &Assignment, subset: &[usize]) -> Result<Matrix> {
    if pi.len() != x.rows() {
        return Err(Error::invalid(format!("map covers {} of {} inputs", pi.len(), x.rows())));
    }
    let mut out = Matrix::zeros(x.cols(), z.cols());
    for &i in subset {
        let (xi, zj) = (x.row(i), z.row(pi.get(i)));
        for (a, &xa) in xi.iter().enumerate() {
            for (b, &zb) in zj.iter().enumerate() {
                out[(a, b)] += xa * zb;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// `|I(π)|`.
    pub fixed: usize,
    /// Largest entry of `|Ω_{π|I(π)} − |I(π)|·E[x zᵀ]|`.
    pub empirical_dev: f64,
    /// `4dd' exp(−(n−k)(σ⁺)² / (dd'B²)²)` with `k = n − |I(π)|`, `σ⁺` the
    /// singular-value sum of `E[x zᵀ]` and `B²` bounding coordinate products.
    pub bound_prob: f64,
}

pub fn concentration_diagnostic(data: &PlantedDataset, pi: &Assignment) -> Result<ConcentrationReport> {
    let fixed = pi.fixed_points();
    let omega = omega_restricted(&data.x, &data.z, pi, &fixed)?;
    let expected = data.expected_cross_moment().scale(fixed.len() as f64);
    let empirical_dev = omega.sub(&expected)?.max_abs();
    let (d, dp) = (data.x.cols() as f64, data.z.cols() as f64);
    let n = data.n();
    let k = n - fixed.len();
    let s = singular_value_sum(&data.expected_cross_moment());
    let scale = d * dp * data.bound_b * data.bound_b;
    let bound_prob = 4.0 * d * dp * libm::exp(-((n - k) as f64) * s * s / (scale * scale));
    Ok(ConcentrationReport { fixed: fixed.len(), empirical_dev, bound_prob })
}

/// Largest `|σ_i(A) − σ_i(A + E)| − ‖E‖₂` over random Gaussian pairs.
pub fn weyl_check(trials: usize, rows: usize, cols: usize, rng: &mut Rng) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let a = gaussian(rows, cols, rng)?;
        let scale: f64 = rng.random_range(1e-3..2.0);
        let e = gaussian(rows, cols, rng)?.scale(scale);
        worst = worst.max(weyl_violation(&a, &e)?);
    }
    Ok(worst)
}

/// `max_i |σ_i(A) − σ_i(A + E)| − ‖E‖₂` for one pair.
pub fn weyl_violation(a: &Matrix, e: &Matrix) -> Result<f64> {
    let s0 = svd(a)?.sigma;
    let s1 = svd(&a.add(e)?)?.sigma;
    let norm_e = spectral_norm(e);
    Ok(s0.iter().zip(&s1).map(|(p, q)| libm::fabs(p - q) - norm_e).fold(f64::NEG_INFINITY, f64::max))
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    Matrix::new(rows, cols, (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(x_i, y_i)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::invalid("need at least two paired points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("abscissae are all equal"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// `σ⁺(Ω_ι)` on centered inputs for the spec redrawn at each size in `sizes`,
/// with a line fitted through the points.
pub fn sigma_growth(spec: &LatentSpec, sizes: &[usize]) -> Result<(Vec<f64>, LinearFit)> {
    let mut values = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let data = generate_latent(&LatentSpec { n, ..spec.clone() })?;
        let (xc, _) = center_columns(&data.x);
        values.push(sigma_plus(&xc, &data.z, &data.identity())?);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let fit = linear_fit(&xs, &values)?;
    Ok((values, fit))
}
