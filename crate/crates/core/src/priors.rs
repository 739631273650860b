//! Priors over states and channels.
//!
//! Fiducial priors are the default ensembles from [`crate::randq`]; their mean
//! is the maximally mixed state. An insightful prior with a prescribed mean
//! `ρ_μ` is obtained by pushing fiducial samples through a generalized
//! amplitude damping channel `Φ(ρ|ε, ρ*) = (1−ε)ρ + ερ*` with
//! `ε ~ Beta(α, β)`. Choosing `α = 1` and `β = Dλ_min/(1 − Dλ_min)` makes the
//! channel act as little as possible while keeping the fixed point
//! `ρ* = ((α+β)/α)(ρ_μ − (β/(α+β))𝟙/D)` positive semidefinite.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qobj::{
    hermitian_eigenvalues, identity, tp_deviation, validate_density, CMatrix, DensityOperator,
    OperatorBasis, VectorizedOperator,
};
use crate::randq::{bcsz_channel, bures_state, GinibreSpec, RngStream};

/// Means whose smallest eigenvalue is at or below this floor are rejected.
pub const LAMBDA_FLOOR: f64 = 1e-6;
/// Trace-preservation tolerance for the channel fixed point.
const CHANNEL_FIXED_POINT_TP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Fiducial,
    Insightful,
}

/// A distribution over states (or Choi states) that can be sampled.
pub trait PriorDistribution: Send + Sync + fmt::Debug {
    /// Basis in which samples are vectorized.
    fn basis(&self) -> &Arc<OperatorBasis>;

    fn kind(&self) -> PriorKind;

    fn description(&self) -> String;

    /// `Some(D)` when hypotheses are Choi states of channels on `C^D`.
    fn channel_dim(&self) -> Option<usize> {
        None
    }

    fn sample_matrix(&self, rng: &mut RngStream) -> CMatrix;

    fn sample_coords(&self, rng: &mut RngStream) -> Vec<f64> {
        self.basis().coords_of(&self.sample_matrix(rng))
    }

    fn sample(&self, rng: &mut RngStream) -> VectorizedOperator {
        VectorizedOperator::from_coords(self.sample_coords(rng), Arc::clone(self.basis()))
            .expect("basis length matches sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "ensemble", rename_all = "snake_case", deny_unknown_fields)]
pub enum FiducialEnsemble {
    Ginibre { dim: usize, rank: usize },
    RebitGinibre { rank: usize },
    Bures { dim: usize },
    Bcsz { dim: usize, rank: usize },
}

/// One of the default ensembles, vectorized in the Pauli or Gell-Mann basis.
#[derive(Debug, Clone)]
pub struct FiducialPrior {
    ensemble: FiducialEnsemble,
    basis: Arc<OperatorBasis>,
}

impl FiducialPrior {
    pub fn new(ensemble: FiducialEnsemble) -> Result<Self> {
        let space_dim = match ensemble {
            FiducialEnsemble::Ginibre { dim, rank } => {
                GinibreSpec::new(dim, rank, false)?;
                dim
            }
            FiducialEnsemble::RebitGinibre { rank } => {
                GinibreSpec::new(2, rank, true)?;
                2
            }
            FiducialEnsemble::Bures { dim } => {
                if dim == 0 {
                    return Err(Error::InvalidParameter("Bures dimension must be positive".into()));
                }
                dim
            }
            FiducialEnsemble::Bcsz { dim, rank } => {
                if dim == 0 || rank == 0 || rank > dim * dim {
                    return Err(Error::InvalidParameter(format!(
                        "BCSZ Kraus rank must satisfy 1 <= rank <= D², got rank {rank}, D {dim}"
                    )));
                }
                dim * dim
            }
        };
        Ok(Self {
            ensemble,
            basis: OperatorBasis::for_dim(space_dim)?,
        })
    }

    pub fn ensemble(&self) -> FiducialEnsemble {
        self.ensemble
    }
}

impl PriorDistribution for FiducialPrior {
    fn basis(&self) -> &Arc<OperatorBasis> {
        &self.basis
    }

    fn kind(&self) -> PriorKind {
        PriorKind::Fiducial
    }

    fn description(&self) -> String {
        match self.ensemble {
            FiducialEnsemble::Ginibre { dim, rank } => format!("Ginibre(D={dim}, K={rank})"),
            FiducialEnsemble::RebitGinibre { rank } => format!("real Ginibre rebit(K={rank})"),
            FiducialEnsemble::Bures { dim } => format!("Bures(D={dim})"),
            FiducialEnsemble::Bcsz { dim, rank } => format!("BCSZ(D={dim}, K={rank})"),
        }
    }

    fn channel_dim(&self) -> Option<usize> {
        match self.ensemble {
            FiducialEnsemble::Bcsz { dim, .. } => Some(dim),
            _ => None,
        }
    }

    fn sample_matrix(&self, rng: &mut RngStream) -> CMatrix {
        match self.ensemble {
            FiducialEnsemble::Ginibre { dim, rank } => GinibreSpec { dim, rank, real_valued: false }
                .sample(rng)
                .into_matrix(),
            FiducialEnsemble::RebitGinibre { rank } => GinibreSpec { dim: 2, rank, real_valued: true }
                .sample(rng)
                .into_matrix(),
            FiducialEnsemble::Bures { dim } => bures_state(dim, rng).into_matrix(),
            FiducialEnsemble::Bcsz { dim, rank } => bcsz_channel(dim, rank, rng)
                // Singular partial traces have probability zero; a hundred in a
                // row means the generator itself is broken.
                .expect("BCSZ sampling failed repeatedly")
                .into_matrix(),
        }
    }
}

/// Beta parameters and fixed point of the damping channel for a given mean.
#[derive(Debug, Clone)]
pub struct GadParams {
    pub alpha: f64,
    /// `+∞` when the mean is maximally mixed; the channel is then the identity.
    pub beta: f64,
    pub rho_star: CMatrix,
    pub lambda_min: f64,
}

impl GadParams {
    pub fn is_passthrough(&self) -> bool {
        self.beta.is_infinite()
    }
}

/// Damping parameters for mean `ρ_μ` on an `n`-dimensional space (`n = D²` for
/// Choi states).
pub fn gad_params(rho_mu: &DensityOperator) -> Result<GadParams> {
    let n = rho_mu.dim();
    let nf = n as f64;
    let lambda_min = rho_mu.eigenvalues()[0];
    if lambda_min <= LAMBDA_FLOOR {
        return Err(Error::BoundaryMean {
            lambda_min,
            floor: LAMBDA_FLOOR,
        });
    }
    let maximally_mixed = identity(n).unscale(nf);
    if nf * lambda_min >= 1.0 - 1e-12 {
        return Ok(GadParams {
            alpha: 1.0,
            beta: f64::INFINITY,
            rho_star: maximally_mixed,
            lambda_min,
        });
    }
    let alpha = 1.0;
    let beta = nf * lambda_min / (1.0 - nf * lambda_min);
    let rho_star = (rho_mu.matrix() - maximally_mixed.scale(beta / (alpha + beta))).scale((alpha + beta) / alpha);
    Ok(GadParams {
        alpha,
        beta,
        rho_star,
        lambda_min,
    })
}

/// Draws `ε ~ Beta(1, β)` by inverting the CDF `1 − (1−ε)^β`.
pub fn sample_damping<R: Rng + ?Sized>(beta: f64, rng: &mut R) -> f64 {
    if beta.is_infinite() {
        return 0.0;
    }
    let u: f64 = rng.random();
    1.0 - u.powf(1.0 / beta)
}

/// Insightful prior: a fiducial prior pushed through a damping channel whose
/// Beta-distributed strength is fixed by the prescribed mean.
#[derive(Debug, Clone)]
pub struct GadPrior {
    fiducial: Arc<dyn PriorDistribution>,
    rho_mu: CMatrix,
    params: GadParams,
    star_coords: Vec<f64>,
}

impl GadPrior {
    /// `mean` must be a valid state on the fiducial prior's space; for channel
    /// priors it must also be a trace-preserving Choi state.
    pub fn new(fiducial: Arc<dyn PriorDistribution>, mean: &CMatrix) -> Result<Self> {
        let basis = fiducial.basis();
        if mean.nrows() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: mean.nrows(),
            });
        }
        let rho_mu = DensityOperator::new(mean.clone())?;
        let mut params = gad_params(&rho_mu)?;
        if let Some(d) = fiducial.channel_dim() {
            let dev = tp_deviation(mean, d);
            if dev > CHANNEL_FIXED_POINT_TP_TOL {
                return Err(Error::NotTracePreserving(dev));
            }
            // The affine combination of two trace-preserving Choi states stays
            // trace preserving; renormalize the trace against rounding.
            let tr = crate::qobj::trace(&params.rho_star).re;
            params.rho_star = params.rho_star.unscale(tr);
            let dev = tp_deviation(&params.rho_star, d);
            if dev > CHANNEL_FIXED_POINT_TP_TOL {
                return Err(Error::NotTracePreserving(dev));
            }
        }
        let herm = (&params.rho_star + params.rho_star.adjoint()).unscale(2.0);
        params.rho_star = herm;
        if let Err(e) = validate_density(&params.rho_star) {
            return Err(Error::InvalidState(format!("damping fixed point is not a state: {e}")));
        }
        let star_coords = basis.coords_of(&params.rho_star);
        Ok(Self {
            fiducial,
            rho_mu: mean.clone(),
            params,
            star_coords,
        })
    }

    pub fn params(&self) -> &GadParams {
        &self.params
    }

    pub fn alpha(&self) -> f64 {
        self.params.alpha
    }

    pub fn beta(&self) -> f64 {
        self.params.beta
    }

    pub fn rho_star(&self) -> &CMatrix {
        &self.params.rho_star
    }

    pub fn rho_mu(&self) -> &CMatrix {
        &self.rho_mu
    }

    pub fn fiducial(&self) -> &Arc<dyn PriorDistribution> {
        &self.fiducial
    }
}

impl PriorDistribution for GadPrior {
    fn basis(&self) -> &Arc<OperatorBasis> {
        self.fiducial.basis()
    }

    fn kind(&self) -> PriorKind {
        if self.params.is_passthrough() {
            self.fiducial.kind()
        } else {
            PriorKind::Insightful
        }
    }

    fn description(&self) -> String {
        format!(
            "GAD over {} (alpha = {}, beta = {:.6})",
            self.fiducial.description(),
            self.params.alpha,
            self.params.beta
        )
    }

    fn channel_dim(&self) -> Option<usize> {
        self.fiducial.channel_dim()
    }

    fn sample_matrix(&self, rng: &mut RngStream) -> CMatrix {
        let base = self.fiducial.sample_matrix(rng);
        let eps = sample_damping(self.params.beta, rng);
        if eps == 0.0 {
            return base;
        }
        base.scale(1.0 - eps) + self.params.rho_star.scale(eps)
    }

    fn sample_coords(&self, rng: &mut RngStream) -> Vec<f64> {
        let base = self.fiducial.sample_coords(rng);
        let eps = sample_damping(self.params.beta, rng);
        if eps == 0.0 {
            return base;
        }
        base.iter()
            .zip(&self.star_coords)
            .map(|(f, s)| (1.0 - eps) * f + eps * s)
            .collect()
    }
}

/// `(α, β, p*)` for a coin prior with mean bias `p_μ` over a uniform fiducial.
pub fn coin_gad_params(p_mu: f64) -> Result<(f64, f64, f64)> {
    if !(p_mu > 0.0 && p_mu < 1.0) {
        return Err(Error::InvalidParameter(format!("coin mean must lie in (0, 1), got {p_mu}")));
    }
    let lambda_min = p_mu.min(1.0 - p_mu);
    if 2.0 * lambda_min >= 1.0 - 1e-12 {
        return Ok((1.0, f64::INFINITY, 0.5));
    }
    let alpha = 1.0;
    let beta = 2.0 * lambda_min / (1.0 - 2.0 * lambda_min);
    let p_star = (alpha + beta) / alpha * (p_mu - beta / (2.0 * (alpha + beta)));
    Ok((alpha, beta, p_star))
}

/// Damped-uniform prior over a coin's bias.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoinPrior {
    pub p_mu: f64,
    pub p_star: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl CoinPrior {
    pub fn new(p_mu: f64) -> Result<Self> {
        let (alpha, beta, p_star) = coin_gad_params(p_mu)?;
        Ok(Self {
            p_mu,
            p_star,
            alpha,
            beta,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let p: f64 = rng.random();
        let eps = sample_damping(self.beta, rng);
        ((1.0 - eps) * p + eps * self.p_star).clamp(0.0, 1.0)
    }
}

/// Mean of `n` prior samples, devectorized.
pub fn monte_carlo_mean(prior: &dyn PriorDistribution, n: usize, rng: &mut RngStream) -> CMatrix {
    let basis = prior.basis();
    let mut acc = vec![0.0; basis.len()];
    for _ in 0..n {
        for (a, x) in acc.iter_mut().zip(prior.sample_coords(rng)) {
            *a += x;
        }
    }
    for a in &mut acc {
        *a /= n as f64;
    }
    basis.operator_of(&acc)
}

/// Trace distance `½‖A − B‖₁` between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    0.5 * hermitian_eigenvalues(&(a - b)).iter().map(|l| l.abs()).sum::<f64>()
}
