//! Likelihood models: Born rule, i.i.d. sequences, binomial batches and
//! process tomography through Choi states.
//!
//! Every experiment is a two-outcome measurement `{E, 𝟙 − E}` repeated
//! `n_meas` times; a K-outcome POVM is expressed as K such designs.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::qobj::{
    check_same_basis, dot, process_effect, DensityOperator, Effect, OperatorBasis, VectorizedOperator,
};

/// A measured effect, its repetition count and the time it was taken.
#[derive(Debug, Clone)]
pub struct ExperimentDesign {
    effect: VectorizedOperator,
    n_meas: u32,
    time: f64,
}

impl ExperimentDesign {
    pub fn new(effect: &Effect, basis: &Arc<OperatorBasis>, n_meas: u32) -> Result<Self> {
        if n_meas == 0 {
            return Err(Error::InvalidParameter("n_meas must be at least 1".into()));
        }
        Ok(Self {
            effect: effect.vectorize(basis)?,
            n_meas,
            time: 0.0,
        })
    }

    pub fn with_time(mut self, time: f64) -> Result<Self> {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(Error::InvalidParameter(format!("design time must be >= 0, got {time}")));
        }
        self.time = time;
        Ok(self)
    }

    pub fn effect(&self) -> &VectorizedOperator {
        &self.effect
    }

    pub fn n_meas(&self) -> u32 {
        self.n_meas
    }

    pub fn time(&self) -> f64 {
        self.time
    }
}

/// Number of `E` outcomes observed in a design's `n_meas` repetitions.
#[derive(Debug, Clone)]
pub struct Datum {
    n_success: u32,
    design: ExperimentDesign,
    log_binom: f64,
}

impl Datum {
    pub fn new(design: ExperimentDesign, n_success: u32) -> Result<Self> {
        if n_success > design.n_meas {
            return Err(Error::InvalidParameter(format!(
                "{n_success} successes out of {} repetitions",
                design.n_meas
            )));
        }
        let log_binom = log_binomial_coefficient(design.n_meas, n_success);
        Ok(Self {
            n_success,
            design,
            log_binom,
        })
    }

    pub fn n_success(&self) -> u32 {
        self.n_success
    }

    pub fn design(&self) -> &ExperimentDesign {
        &self.design
    }

    pub fn log_binomial_coefficient(&self) -> f64 {
        self.log_binom
    }
}

/// `ln C(n, k)`.
pub fn log_binomial_coefficient(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

/// `Tr(Eρ)` as a coordinate dot product, clamped to `[0, 1]`.
pub fn born_probability_coords(state: &[f64], effect: &[f64]) -> f64 {
    dot(state, effect).clamp(0.0, 1.0)
}

pub fn born_probability(state: &VectorizedOperator, effect: &VectorizedOperator) -> Result<f64> {
    check_same_basis(state.basis(), effect.basis())?;
    Ok(born_probability_coords(state.coords(), effect.coords()))
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// `Σ_k n_k log Tr(E_k ρ)`; `−∞` when an observed effect has zero probability.
pub fn sequence_log_likelihood(
    state: &VectorizedOperator,
    effects: &[VectorizedOperator],
    counts: &[u32],
) -> Result<f64> {
    if effects.len() != counts.len() {
        return Err(Error::DimensionMismatch {
            expected: effects.len(),
            found: counts.len(),
        });
    }
    let mut total = 0.0;
    for (e, &n) in effects.iter().zip(counts) {
        total += xlogy(n as f64, born_probability(state, e)?);
    }
    Ok(total)
}

/// Binomial log-pmf of `k` successes in `n` trials at success probability `p`.
pub fn binomial_log_pmf(p: f64, n: u32, k: u32) -> f64 {
    log_binomial_coefficient(n, k) + xlogy(k as f64, p) + xlogy((n - k) as f64, 1.0 - p)
}

pub fn binomial_likelihood(state: &VectorizedOperator, design: &ExperimentDesign, n_success: u32) -> Result<f64> {
    if n_success > design.n_meas {
        return Err(Error::InvalidParameter(format!(
            "{n_success} successes out of {} repetitions",
            design.n_meas
        )));
    }
    let p = born_probability(state, &design.effect)?;
    Ok(binomial_log_pmf(p, design.n_meas, n_success).exp())
}

/// Draws `n_success ~ Binomial(n_meas, Tr(Eρ))`.
pub fn simulate_experiment<R: Rng + ?Sized>(
    true_state: &VectorizedOperator,
    design: &ExperimentDesign,
    rng: &mut R,
) -> Result<Datum> {
    let p = born_probability(true_state, &design.effect)?;
    simulate_with_probability(p, design.clone(), rng)
}

pub(crate) fn simulate_with_probability<R: Rng + ?Sized>(
    p: f64,
    design: ExperimentDesign,
    rng: &mut R,
) -> Result<Datum> {
    let k = Binomial::new(design.n_meas as u64, p)
        .map_err(|e| Error::InvalidParameter(format!("binomial: {e}")))?
        .sample(rng) as u32;
    Datum::new(design, k)
}

/// Binomial likelihood of a process-tomography datum: the state-tomography
/// likelihood of `J(Λ)/D` under the composite effect `Dρᵀ ⊗ E`.
pub fn process_likelihood(
    choi: &VectorizedOperator,
    prep: &DensityOperator,
    meas: &Effect,
    n_meas: u32,
    n_success: u32,
) -> Result<f64> {
    let composite = process_effect(prep, meas)?;
    let design = ExperimentDesign::new(&composite, choi.basis(), n_meas)?;
    binomial_likelihood(choi, &design, n_success)
}

/// Log-likelihood of a datum at a particle location.
pub trait LikelihoodModel: Sync {
    fn log_likelihood(&self, location: &[f64], datum: &Datum) -> f64;
}

/// Repeated two-outcome Born-rule measurements.
#[derive(Debug, Clone, Copy, Default)]
pub struct BinomialModel;

impl LikelihoodModel for BinomialModel {
    fn log_likelihood(&self, location: &[f64], datum: &Datum) -> f64 {
        let p = born_probability_coords(location, datum.design.effect.coords());
        let n = datum.design.n_meas;
        let k = datum.n_success;
        datum.log_binom + xlogy(k as f64, p) + xlogy((n - k) as f64, 1.0 - p)
    }
}
