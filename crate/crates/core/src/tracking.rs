//! Condensation-style tracking of drifting states: projection onto the state
//! set, per-particle diffusion with a co-evolving rate, and the sampling
//! bandwidth of a tracked coin.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::likelihood::{Datum, LikelihoodModel};
use crate::qobj::{
    hermitian_deviation, hermitian_eigen, identity, kron, partial_trace, trace, ChoiState, CMatrix, DensityOperator,
    Keep,
};
use crate::randq::RngStream;
use crate::smc::{bayes_update, effective_sample_size, resample, LiuWest, ParticleCloud, StateSpace};

/// Smallest eigenvalue of the reduced input operator accepted by the
/// trace-preservation correction.
pub const TP_FLOOR: f64 = 1e-12;

/// Zeroes the negative eigenvalues of a Hermitian matrix and rescales to unit trace.
pub fn truncate_to_state(matrix: &CMatrix) -> Result<DensityOperator> {
    if !matrix.is_square() {
        return Err(Error::InvalidState("matrix is not square".into()));
    }
    let herm = (matrix + matrix.adjoint()).unscale(2.0);
    let (values, vectors) = hermitian_eigen(&herm);
    if values[0] >= 0.0 {
        let t = trace(&herm).re;
        if t <= 0.0 {
            return Err(Error::DegenerateProjection);
        }
        return Ok(DensityOperator::new_unchecked(herm.unscale(t)));
    }
    let total: f64 = values.iter().filter(|&&v| v > 0.0).sum();
    if total <= 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v.max(0.0) / total);
    }
    let rho = &scaled * vectors.adjoint();
    Ok(DensityOperator::new_unchecked((&rho + rho.adjoint()).unscale(2.0)))
}

pub fn coin_truncate(p: f64) -> f64 {
    p.clamp(0.0, 1.0)
}

/// Qubit projection in Bloch form: coordinates `(1/√2, r/√2)` with `|r| > 1`
/// are pulled back to the unit sphere. Identical to eigenvalue truncation.
pub fn project_qubit_coords(coords: &[f64]) -> Vec<f64> {
    let norm = coords[1..].iter().map(|x| x * x).sum::<f64>().sqrt() / FRAC_1_SQRT_2;
    let shrink = if norm > 1.0 { 1.0 / norm } else { 1.0 };
    let mut out = Vec::with_capacity(coords.len());
    out.push(FRAC_1_SQRT_2);
    out.extend(coords[1..].iter().map(|x| x * shrink));
    out
}

/// Eigenvalue truncation followed by `J ↦ (Y^{-1/2} ⊗ 𝟙) J (Y^{-1/2} ⊗ 𝟙)` with
/// `Y = Tr_out J`, which restores trace preservation while keeping positivity.
pub fn project_to_channel(matrix: &CMatrix, dim: usize) -> Result<ChoiState> {
    if matrix.nrows() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            found: matrix.nrows(),
        });
    }
    let j = truncate_to_state(matrix)?.into_matrix().scale(dim as f64);
    let y = partial_trace(&j, (dim, dim), Keep::First)?;
    let (values, vectors) = hermitian_eigen(&y);
    if values[0] < TP_FLOOR {
        return Err(Error::DegenerateProjection);
    }
    let mut scaled = vectors.clone();
    for (c, &v) in values.iter().enumerate() {
        scaled.column_mut(c).scale_mut(v.powf(-0.5));
    }
    let lift = kron(&(scaled * vectors.adjoint()), &identity(dim));
    let out = &lift * j * &lift;
    let out = (&out + out.adjoint()).unscale(2.0 * dim as f64);
    debug_assert!(hermitian_deviation(&out) < 1e-12);
    Ok(ChoiState::new_unchecked(out, dim))
}

/// Elapsed time between updates and the deterministic drift, which is
/// required to vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionStep {
    dt: f64,
    drift: Option<Vec<f64>>,
}

impl DiffusionStep {
    pub fn new(dt: f64) -> Result<Self> {
        Self::with_drift(dt, None)
    }

    pub fn with_drift(dt: f64, drift: Option<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        if let Some(d) = &drift {
            if d.iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidParameter("drift is not supported; it must be zero".into()));
            }
        }
        Ok(Self { dt, drift })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn drift(&self) -> Option<&[f64]> {
        self.drift.as_deref()
    }
}

/// Log-normal prior over the diffusion rate η, parametrized by its mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaPrior {
    pub mean: f64,
    pub log_std: f64,
}

impl EtaPrior {
    pub fn new(mean: f64, log_std: f64) -> Result<Self> {
        if !(mean >= 0.0 && mean.is_finite()) || !(log_std >= 0.0 && log_std.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta prior needs mean >= 0 and log_std >= 0, got ({mean}, {log_std})"
            )));
        }
        Ok(Self { mean, log_std })
    }

    /// No diffusion at all.
    pub fn zero() -> Self {
        Self { mean: 0.0, log_std: 0.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.mean == 0.0 {
            return 0.0;
        }
        let mu = self.mean.ln() - 0.5 * self.log_std * self.log_std;
        let z: f64 = rng.sample(StandardNormal);
        (mu + self.log_std * z).exp()
    }
}

/// A particle cloud whose particles each carry a diffusion rate η.
#[derive(Debug, Clone)]
pub struct TrackedCloud {
    cloud: ParticleCloud,
    eta: Vec<f64>,
}

impl TrackedCloud {
    pub fn new(cloud: ParticleCloud, eta: Vec<f64>) -> Result<Self> {
        if eta.len() != cloud.n_particles() {
            return Err(Error::DimensionMismatch {
                expected: cloud.n_particles(),
                found: eta.len(),
            });
        }
        if eta.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidParameter("eta must be finite and nonnegative".into()));
        }
        Ok(Self { cloud, eta })
    }

    pub fn with_prior(cloud: ParticleCloud, prior: &EtaPrior, rng: &mut RngStream) -> Self {
        let eta = (0..cloud.n_particles()).map(|_| prior.sample(rng)).collect();
        Self { cloud, eta }
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.cloud
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Posterior mean of η.
    pub fn eta_mean(&self) -> f64 {
        self.cloud.weights().iter().zip(&self.eta).map(|(w, e)| w * e).sum()
    }
}

/// Adds `N(0, dt·η_i²)` to each free coordinate of particle `i`, then projects.
/// Particles with `η_i = 0` are left exactly where they are.
pub fn diffuse_cloud(
    tracked: &mut TrackedCloud,
    step: &DiffusionStep,
    space: &StateSpace,
    rng: &mut RngStream,
) -> Result<()> {
    let root_dt = step.dt.sqrt();
    for i in 0..tracked.cloud.n_particles() {
        let sigma = root_dt * tracked.eta[i];
        if sigma == 0.0 {
            continue;
        }
        let loc = tracked.cloud.location_mut(i);
        let mut moved = loc.to_vec();
        for &k in space.free_coords() {
            let z: f64 = rng.sample(StandardNormal);
            moved[k] += sigma * z;
        }
        if let Ok(p) = space.project(&moved) {
            loc.copy_from_slice(&p);
        }
    }
    Ok(())
}

/// Samples per estimate and the largest trackable frequency for a coin
/// sampled every `dt`: `N = ⌈z²/(4 tol²)⌉`, `f_max = 1/(2 dt N)`.
pub fn tracking_bandwidth(tol: f64, z: f64, dt: f64) -> Result<(u64, f64)> {
    if !(tol > 0.0 && tol < 0.5) || !(z > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth needs 0 < tol < 1/2, z > 0, dt > 0; got ({tol}, {z}, {dt})"
        )));
    }
    let n = (z * z / (4.0 * tol * tol)).ceil() as u64;
    Ok((n, 1.0 / (2.0 * dt * n as f64)))
}

/// SMC filter that diffuses before each timed update and carries η through
/// resampling. On resampling each child inherits its parent's η, jittered in
/// log space by the same Liu–West kernel used for the locations.
#[derive(Debug)]
pub struct TrackingFilter<M: LikelihoodModel> {
    tracked: TrackedCloud,
    space: StateSpace,
    model: M,
    resampler: LiuWest,
    rng: RngStream,
    last_time: Option<f64>,
    total_log_norm: f64,
    n_resamples: usize,
}

impl<M: LikelihoodModel> TrackingFilter<M> {
    pub fn new(tracked: TrackedCloud, space: StateSpace, model: M, resampler: LiuWest, rng: RngStream) -> Self {
        Self {
            tracked,
            space,
            model,
            resampler,
            rng,
            last_time: None,
            total_log_norm: 0.0,
            n_resamples: 0,
        }
    }

    /// Diffuses by the time elapsed since the previous datum, then updates.
    pub fn update(&mut self, datum: &Datum) -> Result<f64> {
        let t = datum.design().time();
        if let Some(prev) = self.last_time {
            if t > prev {
                diffuse_cloud(&mut self.tracked, &DiffusionStep::new(t - prev)?, &self.space, &mut self.rng)?;
            }
        }
        self.last_time = Some(t);
        let log_norm = bayes_update(&mut self.tracked.cloud, datum, &self.model)?;
        self.total_log_norm += log_norm;
        if self.resampler.should_resample(&self.tracked.cloud) {
            self.resample()?;
        }
        Ok(log_norm)
    }

    fn resample(&mut self) -> Result<()> {
        let a = self.resampler.a;
        let weights = self.tracked.cloud.weights().to_vec();
        let parents = resample(&mut self.tracked.cloud, a, &self.space, &mut self.rng)?;
        let old = std::mem::take(&mut self.tracked.eta);
        let positive = old.iter().all(|&e| e > 0.0);
        self.tracked.eta = if positive && a < 1.0 {
            let logs: Vec<f64> = old.iter().map(|e| e.ln()).collect();
            let mean: f64 = weights.iter().zip(&logs).map(|(w, l)| w * l).sum();
            let var: f64 = weights.iter().zip(&logs).map(|(w, l)| w * (l - mean).powi(2)).sum();
            let sd = ((1.0 - a * a) * var).sqrt();
            parents
                .iter()
                .map(|&p| {
                    let z: f64 = self.rng.sample(StandardNormal);
                    (a * logs[p] + (1.0 - a) * mean + sd * z).exp()
                })
                .collect()
        } else {
            parents.iter().map(|&p| old[p]).collect()
        };
        self.n_resamples += 1;
        Ok(())
    }

    pub fn tracked(&self) -> &TrackedCloud {
        &self.tracked
    }

    pub fn cloud(&self) -> &ParticleCloud {
        &self.tracked.cloud
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

    pub fn ess(&self) -> f64 {
        effective_sample_size(&self.tracked.cloud)
    }
}
