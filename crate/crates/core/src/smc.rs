//! Sequential Monte Carlo over vectorized states: particle clouds, Bayes
//! updates, Liu–West resampling and posterior summaries.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::likelihood::{Datum, LikelihoodModel};
use crate::priors::PriorDistribution;
use crate::qobj::{dot, CMatrix, OperatorBasis, VectorizedOperator};
use crate::randq::RngStream;
use crate::tracking;

pub const WEIGHT_TOL: f64 = 1e-10;
/// Covariance eigenvalues below this fraction of the largest are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;
const PAR_CHUNK: usize = 256;

/// What the particle coordinates represent, and hence how to project them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    Density,
    /// Choi states `J/D` of channels on `C^dim`.
    Choi { dim: usize },
}

/// The hypothesis space of a cloud: a basis, a state kind and the
/// coordinates allowed to move under diffusion.
#[derive(Debug, Clone)]
pub struct StateSpace {
    basis: Arc<OperatorBasis>,
    kind: StateKind,
    free: Vec<usize>,
}

impl StateSpace {
    pub fn density(basis: Arc<OperatorBasis>) -> Self {
        let free = (1..basis.len()).collect();
        Self {
            basis,
            kind: StateKind::Density,
            free,
        }
    }

    pub fn choi(basis: Arc<OperatorBasis>, dim: usize) -> Result<Self> {
        if basis.dim() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: basis.dim(),
            });
        }
        let free = (1..basis.len()).collect();
        Ok(Self {
            basis,
            kind: StateKind::Choi { dim },
            free,
        })
    }

    pub fn for_prior(prior: &dyn PriorDistribution) -> Result<Self> {
        match prior.channel_dim() {
            Some(d) => Self::choi(Arc::clone(prior.basis()), d),
            None => Ok(Self::density(Arc::clone(prior.basis()))),
        }
    }

    /// Restricts diffusion to the given traceless coordinates.
    pub fn with_free_coords(mut self, free: Vec<usize>) -> Result<Self> {
        if free.iter().any(|&i| i == 0 || i >= self.basis.len()) {
            return Err(Error::InvalidParameter(format!(
                "free coordinates must lie in 1..{}",
                self.basis.len()
            )));
        }
        self.free = free;
        Ok(self)
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn free_coords(&self) -> &[usize] {
        &self.free
    }

    /// Maps a coordinate vector to the nearest valid hypothesis under
    /// eigenvalue truncation (plus a trace-preservation fix for Choi states).
    pub fn project(&self, coords: &[f64]) -> Result<Vec<f64>> {
        if self.basis.dim() == 2 && self.kind == StateKind::Density {
            return Ok(tracking::project_qubit_coords(coords));
        }
        let m = self.basis.operator_of(coords);
        let projected = match self.kind {
            StateKind::Density => tracking::truncate_to_state(&m)?.into_matrix(),
            StateKind::Choi { dim } => tracking::project_to_channel(&m, dim)?.into_matrix(),
        };
        Ok(self.basis.coords_of(&projected))
    }
}

/// Weighted particle approximation of a distribution over coordinate vectors.
#[derive(Debug, Clone)]
pub struct ParticleCloud {
    locations: Vec<f64>,
    weights: Vec<f64>,
    basis: Arc<OperatorBasis>,
}

impl ParticleCloud {
    pub fn new(locations: Vec<Vec<f64>>, weights: Vec<f64>, basis: Arc<OperatorBasis>) -> Result<Self> {
        let d = basis.len();
        if locations.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: locations.len(),
                found: weights.len(),
            });
        }
        if locations.is_empty() {
            return Err(Error::InvalidParameter("a cloud needs at least one particle".into()));
        }
        if let Some(bad) = locations.iter().find(|l| l.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidParameter(format!("weights sum to {total}, not 1")));
        }
        Ok(Self {
            locations: locations.into_iter().flatten().collect(),
            weights,
            basis,
        })
    }

    pub fn uniform(locations: Vec<Vec<f64>>, basis: Arc<OperatorBasis>) -> Result<Self> {
        let n = locations.len();
        Self::new(locations, vec![1.0 / n as f64; n], basis)
    }

    pub fn n_particles(&self) -> usize {
        self.weights.len()
    }

    /// Coordinate dimension `d`.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn location(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.locations[i * d..(i + 1) * d]
    }

    pub(crate) fn location_mut(&mut self, i: usize) -> &mut [f64] {
        let d = self.dim();
        &mut self.locations[i * d..(i + 1) * d]
    }

    pub fn locations(&self) -> impl Iterator<Item = &[f64]> {
        self.locations.chunks_exact(self.dim())
    }
}

pub fn init_cloud(prior: &dyn PriorDistribution, n: usize, rng: &mut RngStream) -> Result<ParticleCloud> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 particles, got {n}")));
    }
    let locations = (0..n).map(|_| prior.sample_coords(rng)).collect();
    ParticleCloud::uniform(locations, Arc::clone(prior.basis()))
}

/// Reweights the cloud by the likelihood of `datum` and returns `log Σ_k w_k L_k`.
///
/// Weights are combined in the log domain so that long records of sharp
/// likelihoods do not underflow. If every particle has zero likelihood the
/// cloud is left untouched and [`Error::DegenerateUpdate`] is returned.
pub fn bayes_update(cloud: &mut ParticleCloud, datum: &Datum, model: &dyn LikelihoodModel) -> Result<f64> {
    let d = cloud.dim();
    if datum.design().effect().coords().len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: datum.design().effect().coords().len(),
        });
    }
    let log_lik: Vec<f64> = cloud
        .locations
        .par_chunks_exact(d)
        .with_min_len(PAR_CHUNK)
        .map(|x| model.log_likelihood(x, datum))
        .collect();
    let log_post: Vec<f64> = cloud
        .weights
        .iter()
        .zip(&log_lik)
        .map(|(&w, &l)| if w > 0.0 { w.ln() + l } else { f64::NEG_INFINITY })
        .collect();
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::DegenerateUpdate);
    }
    let scaled: Vec<f64> = log_post.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = scaled.iter().sum();
    for (w, s) in cloud.weights.iter_mut().zip(&scaled) {
        *w = s / total;
    }
    Ok(max + total.ln())
}

/// `1 / Σ w²`.
pub fn effective_sample_size(cloud: &ParticleCloud) -> f64 {
    1.0 / cloud.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Liu–West resampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiuWest {
    /// Shrinkage toward the mean; `a = 1` is plain multinomial resampling.
    pub a: f64,
    /// Resample when `ess < threshold · n`.
    pub threshold: f64,
}

impl Default for LiuWest {
    fn default() -> Self {
        Self { a: 0.98, threshold: 0.5 }
    }
}

impl LiuWest {
    pub fn new(a: f64, threshold: f64) -> Result<Self> {
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::InvalidParameter(format!("Liu–West a must lie in (0, 1], got {a}")));
        }
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidParameter(format!(
                "resample threshold must lie in [0, 1], got {threshold}"
            )));
        }
        Ok(Self { a, threshold })
    }

    pub fn should_resample(&self, cloud: &ParticleCloud) -> bool {
        effective_sample_size(cloud) < self.threshold * cloud.n_particles() as f64
    }
}

/// Draws `n` parents in proportion to the weights, moves each child to
/// `a·parent + (1−a)·mean + N(0, (1−a²)Σ)`, projects it onto the state
/// space and resets weights to uniform. Returns the parent index of each child.
pub fn resample(cloud: &mut ParticleCloud, a: f64, space: &StateSpace, rng: &mut RngStream) -> Result<Vec<usize>> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::InvalidParameter(format!("Liu–West a must lie in (0, 1], got {a}")));
    }
    let n = cloud.n_particles();
    let d = cloud.dim();
    let index = WeightedIndex::new(&cloud.weights)
        .map_err(|e| Error::InvalidParameter(format!("resampling weights: {e}")))?;
    let parents: Vec<usize> = (0..n).map(|_| index.sample(rng)).collect();

    let mut next = Vec::with_capacity(n * d);
    if a == 1.0 {
        for &p in &parents {
            next.extend_from_slice(cloud.location(p));
        }
    } else {
        let mean = mean_coords(cloud);
        let noise = noise_factor(&covariance_matrix(cloud, &mean), 1.0 - a * a);
        let mut z = vec![0.0; noise.ncols()];
        for &p in &parents {
            let parent = cloud.location(p);
            let mut child: Vec<f64> = parent.iter().zip(&mean).map(|(x, m)| a * x + (1.0 - a) * m).collect();
            if noise.ncols() > 0 {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for (i, c) in child.iter_mut().enumerate() {
                    *c += (0..z.len()).map(|k| noise[(i, k)] * z[k]).sum::<f64>();
                }
            }
            // A child that projects to nothing keeps its parent's location.
            let child = space.project(&child).unwrap_or_else(|_| parent.to_vec());
            next.extend_from_slice(&child);
        }
    }
    cloud.locations = next;
    cloud.weights = vec![1.0 / n as f64; n];
    Ok(parents)
}

/// `L` with `LLᵀ = scale·Σ`, keeping only the support of `Σ`.
fn noise_factor(cov: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| lmax > 0.0 && eig.eigenvalues[k] > RANK_CUTOFF * lmax)
        .collect();
    DMatrix::from_fn(cov.nrows(), keep.len(), |i, c| {
        let k = keep[c];
        eig.eigenvectors[(i, k)] * (scale * eig.eigenvalues[k]).sqrt()
    })
}

fn mean_coords(cloud: &ParticleCloud) -> Vec<f64> {
    let mut mean = vec![0.0; cloud.dim()];
    for (x, &w) in cloud.locations().zip(&cloud.weights) {
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    mean
}

fn covariance_matrix(cloud: &ParticleCloud, mean: &[f64]) -> DMatrix<f64> {
    let d = cloud.dim();
    let mut cov = DMatrix::zeros(d, d);
    let mut diff = vec![0.0; d];
    for (x, &w) in cloud.locations().zip(&cloud.weights) {
        if w == 0.0 {
            continue;
        }
        for ((di, xi), mi) in diff.iter_mut().zip(x).zip(mean) {
            *di = xi - mi;
        }
        for i in 0..d {
            let wi = w * diff[i];
            for j in i..d {
                cov[(i, j)] += wi * diff[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    cov
}

/// Bayesian mean estimate `Σ_p w_p x_p`.
pub fn posterior_mean(cloud: &ParticleCloud) -> VectorizedOperator {
    VectorizedOperator::from_coords(mean_coords(cloud), Arc::clone(&cloud.basis)).expect("cloud dimension matches basis")
}

/// `Σ_p w_p (x_p − x̄)(x_p − x̄)ᵀ`. The trace coordinate is fixed for
/// normalized hypotheses, so its row and column are set to zero.
pub fn posterior_covariance(cloud: &ParticleCloud) -> DMatrix<f64> {
    let mut cov = covariance_matrix(cloud, &mean_coords(cloud));
    cov.row_mut(0).fill(0.0);
    cov.column_mut(0).fill(0.0);
    cov
}

/// `Tr Σ` without forming the full covariance.
pub fn covariance_trace(cloud: &ParticleCloud) -> f64 {
    let mean = mean_coords(cloud);
    cloud
        .locations()
        .zip(&cloud.weights)
        .map(|(x, w)| w * x[1..].iter().zip(&mean[1..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum()
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub mean: VectorizedOperator,
    pub covariance: DMatrix<f64>,
    pub ess: f64,
    pub total_log_norm: f64,
}

impl PosteriorSummary {
    pub fn of(cloud: &ParticleCloud, total_log_norm: f64) -> Self {
        Self {
            mean: posterior_mean(cloud),
            covariance: posterior_covariance(cloud),
            ess: effective_sample_size(cloud),
            total_log_norm,
        }
    }
}

/// Region `(x−c)ᵀ Σ⁺ (x−c) ≤ z²` restricted to the support of `Σ`.
#[derive(Debug, Clone)]
pub struct CredibleEllipsoid {
    pub center: VectorizedOperator,
    pub covariance: DMatrix<f64>,
    pub z_scale: f64,
    pinv: DMatrix<f64>,
    support: DMatrix<f64>,
}

impl CredibleEllipsoid {
    pub fn new(center: VectorizedOperator, covariance: DMatrix<f64>, z_scale: f64) -> Result<Self> {
        if !(z_scale > 0.0) {
            return Err(Error::InvalidParameter(format!("z must be positive, got {z_scale}")));
        }
        let d = center.coords().len();
        if covariance.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: covariance.nrows(),
            });
        }
        let eig = SymmetricEigen::new(covariance.clone());
        let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        let mut pinv = DMatrix::zeros(d, d);
        let mut support = DMatrix::zeros(d, d);
        for k in 0..d {
            let l = eig.eigenvalues[k];
            if lmax > 0.0 && l > RANK_CUTOFF * lmax {
                let v = eig.eigenvectors.column(k);
                let outer = v * v.transpose();
                pinv += &outer / l;
                support += outer;
            }
        }
        Ok(Self {
            center,
            covariance,
            z_scale,
            pinv,
            support,
        })
    }

    pub fn of_cloud(cloud: &ParticleCloud, z_scale: f64) -> Result<Self> {
        Self::new(posterior_mean(cloud), posterior_covariance(cloud), z_scale)
    }

    /// Squared Mahalanobis distance on the support; `∞` off the support.
    pub fn distance_squared(&self, x: &[f64]) -> f64 {
        let diff = nalgebra::DVector::from_iterator(
            x.len(),
            x.iter().zip(self.center.coords()).map(|(a, b)| a - b),
        );
        let off = &diff - &self.support * &diff;
        if off.norm() > 1e-9 * (1.0 + diff.norm()) {
            return f64::INFINITY;
        }
        diff.dot(&(&self.pinv * &diff))
    }

    pub fn contains(&self, x: &VectorizedOperator) -> Result<bool> {
        crate::qobj::check_same_basis(x.basis(), self.center.basis())?;
        Ok(self.distance_squared(x.coords()) <= self.z_scale * self.z_scale)
    }

    /// Rank of the support subspace.
    pub fn rank(&self) -> usize {
        self.support.trace().round() as usize
    }
}

/// Law-of-total-variance split of the outcome variance of an observable `X`
/// measured on a state drawn from the posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveVariance {
    /// `V_ρ[⟨X⟩_ρ] = xᵀΣx`, the spread of the expectation across the posterior.
    pub between: f64,
    /// `E_ρ[⟨X²⟩_ρ − ⟨X⟩_ρ²]`, the mean shot-noise variance.
    pub within: f64,
}

impl PredictiveVariance {
    /// Equals `Tr(X²ρ̂) − Tr(Xρ̂)²`.
    pub fn total(&self) -> f64 {
        self.between + self.within
    }
}

pub fn predictive_variance(cloud: &ParticleCloud, observable: &VectorizedOperator) -> Result<PredictiveVariance> {
    crate::qobj::check_same_basis(cloud.basis(), observable.basis())?;
    let x = observable.coords();
    let xm: CMatrix = observable.devectorize();
    let x2 = cloud.basis().coords_of(&(&xm * &xm));
    let xv = nalgebra::DVector::from_column_slice(x);
    let between = xv.dot(&(posterior_covariance(cloud) * &xv));
    let within = cloud
        .locations()
        .zip(cloud.weights())
        .map(|(r, w)| {
            let first = dot(x, r);
            w * (dot(&x2, r) - first * first)
        })
        .sum();
    Ok(PredictiveVariance { between, within })
}

/// Top-`k` eigenpairs of the posterior covariance, eigenvalues descending.
pub fn principal_components(summary: &PosteriorSummary, k: usize) -> Result<Vec<(f64, VectorizedOperator)>> {
    let d = summary.covariance.nrows();
    if k > d {
        return Err(Error::InvalidParameter(format!("asked for {k} components of a {d}-dimensional covariance")));
    }
    let eig = SymmetricEigen::new(summary.covariance.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(k)
        .map(|i| {
            let v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            VectorizedOperator::from_coords(v, Arc::clone(summary.mean.basis())).map(|op| (eig.eigenvalues[i], op))
        })
        .collect()
}

/// Result of one [`SmcUpdater::update`] call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateOutcome {
    pub log_norm: f64,
    pub resampled: bool,
}

/// A cloud bundled with its model, resampler and accumulated evidence.
#[derive(Debug)]
pub struct SmcUpdater<M: LikelihoodModel> {
    cloud: ParticleCloud,
    space: StateSpace,
    model: M,
    resampler: LiuWest,
    rng: RngStream,
    total_log_norm: f64,
    n_resamples: usize,
}

impl<M: LikelihoodModel> SmcUpdater<M> {
    pub fn new(cloud: ParticleCloud, space: StateSpace, model: M, resampler: LiuWest, rng: RngStream) -> Self {
        Self {
            cloud,
            space,
            model,
            resampler,
            rng,
            total_log_norm: 0.0,
            n_resamples: 0,
        }
    }

    pub fn update(&mut self, datum: &Datum) -> Result<UpdateOutcome> {
        let log_norm = bayes_update(&mut self.cloud, datum, &self.model)?;
        self.total_log_norm += log_norm;
        let resampled = self.resampler.should_resample(&self.cloud);
        if resampled {
            resample(&mut self.cloud, self.resampler.a, &self.space, &mut self.rng)?;
            self.n_resamples += 1;
        }
        Ok(UpdateOutcome { log_norm, resampled })
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn total_log_norm(&self) -> f64 {
        self.total_log_norm
    }

    pub fn n_resamples(&self) -> usize {
        self.n_resamples
    }

    pub fn summary(&self) -> PosteriorSummary {
        PosteriorSummary::of(&self.cloud, self.total_log_norm)
    }
}
