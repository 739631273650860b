//! Experiment-design heuristics.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::ExperimentDesign;
use crate::qobj::{identity, pauli_string, process_effect, DensityOperator, Effect, OperatorBasis};
use crate::smc::{StateKind, StateSpace};

/// Uniformly random non-identity Pauli string on `n_qubits`, as single-qubit
/// indices in `0..4` (0 = I, 1 = X, 2 = Y, 3 = Z).
pub fn random_pauli_string<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Vec<usize> {
    let total = 4usize.pow(n_qubits as u32);
    let mut code = rng.random_range(1..total);
    let mut out = vec![0; n_qubits];
    for slot in out.iter_mut().rev() {
        *slot = code % 4;
        code /= 4;
    }
    out
}

/// `(𝟙 + P)/2` for a Pauli string `P`.
pub fn pauli_projector(indices: &[usize]) -> Effect {
    let p = pauli_string(indices);
    let dim = p.nrows();
    Effect::new((identity(dim) + p).unscale(2.0)).expect("Pauli projector is a valid effect")
}

pub fn random_pauli_design<R: Rng + ?Sized>(
    basis: &Arc<OperatorBasis>,
    n_meas: u32,
    rng: &mut R,
) -> Result<ExperimentDesign> {
    let n_qubits = qubit_count(basis.dim())?;
    ExperimentDesign::new(&pauli_projector(&random_pauli_string(n_qubits, rng)), basis, n_meas)
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim < 2 || !dim.is_power_of_two() {
        return Err(Error::InvalidParameter(format!("Pauli designs need a qubit register, got dimension {dim}")));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// The 12 single-qutrit stabilizer states: the computational basis and the
/// eigenbases of `X`, `XZ` and `XZ²`, i.e. `ω^{a k² + j k}/√3` for `a ∈ {0,1,2}`.
pub fn qutrit_stabilizer_states() -> Vec<Vec<Complex64>> {
    let mut states = Vec::with_capacity(12);
    for k in 0..3 {
        let mut ket = vec![Complex64::new(0.0, 0.0); 3];
        ket[k] = Complex64::new(1.0, 0.0);
        states.push(ket);
    }
    let norm = 1.0 / 3f64.sqrt();
    for a in 0..3 {
        for j in 0..3 {
            states.push(
                (0..3)
                    .map(|k| Complex64::from_polar(norm, 2.0 * PI * ((a * k * k + j * k) % 3) as f64 / 3.0))
                    .collect(),
            );
        }
    }
    states
}

pub fn random_stabilizer_qutrit_design<R: Rng + ?Sized>(
    basis: &Arc<OperatorBasis>,
    n_meas: u32,
    rng: &mut R,
) -> Result<ExperimentDesign> {
    if basis.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: basis.dim(),
        });
    }
    let states = qutrit_stabilizer_states();
    let s = &states[rng.random_range(0..states.len())];
    ExperimentDesign::new(&Effect::projector(s), basis, n_meas)
}

/// The six single-qubit Pauli eigenstates `|0⟩, |1⟩, |+⟩, |−⟩, |+i⟩, |−i⟩`.
pub fn pauli_eigenstates() -> Vec<[Complex64; 2]> {
    let r = |x: f64| Complex64::new(x, 0.0);
    let i = |x: f64| Complex64::new(0.0, x);
    let h = FRAC_1_SQRT_2;
    vec![
        [r(1.0), r(0.0)],
        [r(0.0), r(1.0)],
        [r(h), r(h)],
        [r(h), r(-h)],
        [r(h), i(h)],
        [r(h), i(-h)],
    ]
}

/// A process-tomography experiment: prepare Pauli eigenstate `prep`, apply the
/// channel, project onto Pauli eigenstate `meas`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessProposal {
    pub prep: usize,
    pub meas: usize,
}

impl ProcessProposal {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            prep: rng.random_range(0..6),
            meas: rng.random_range(0..6),
        }
    }

    /// Composite effect `2·ρ_prepᵀ ⊗ |m⟩⟨m|` on the Choi space.
    pub fn effect(&self) -> Result<Effect> {
        let states = pauli_eigenstates();
        let (p, m) = (
            states.get(self.prep).ok_or_else(|| Error::InvalidParameter(format!("no preparation {}", self.prep)))?,
            states.get(self.meas).ok_or_else(|| Error::InvalidParameter(format!("no measurement {}", self.meas)))?,
        );
        process_effect(&DensityOperator::pure(p), &Effect::projector(m))
    }

    pub fn design(&self, basis: &Arc<OperatorBasis>, n_meas: u32) -> Result<ExperimentDesign> {
        ExperimentDesign::new(&self.effect()?, basis, n_meas)
    }
}

/// `xᵀΣx` for the vectorized design effect.
pub fn overlap_score(design: &ExperimentDesign, covariance: &DMatrix<f64>) -> f64 {
    let x = DVector::from_column_slice(design.effect().coords());
    x.dot(&(covariance * &x))
}

/// Index of the proposal with the largest `xᵀΣx`; the first wins ties.
pub fn adaptive_design(proposals: &[ExperimentDesign], covariance: &DMatrix<f64>) -> Result<usize> {
    if proposals.is_empty() {
        return Err(Error::InvalidParameter("adaptive design needs at least one proposal".into()));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, p) in proposals.iter().enumerate() {
        let s = overlap_score(p, covariance);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(best)
}

/// Picks index `i` with probability `fractions[i]`.
pub fn scheduled_mix<R: Rng + ?Sized>(fractions: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|f| !(*f >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("mix fractions must be nonnegative and sum to 1, got {fractions:?}")));
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, f) in fractions.iter().enumerate() {
        acc += f;
        if u < acc {
            return Ok(i);
        }
    }
    Ok(fractions.iter().rposition(|&f| f > 0.0).unwrap_or(0))
}

/// Design heuristic selected by the run configuration.
///
/// "Random Pauli" means a random Pauli projector for state tomography and a
/// random Pauli-eigenstate preparation/measurement pair for process tomography.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignHeuristic {
    RandomPauli {
        n_meas: u32,
    },
    RandomStabilizerQutrit {
        n_meas: u32,
    },
    AdaptiveOverlap {
        n_meas: u32,
        n_proposals: usize,
    },
    ScheduledMix {
        n_meas: u32,
        n_proposals: usize,
        adaptive_fraction: f64,
    },
}

impl DesignHeuristic {
    pub fn validate(&self) -> Result<()> {
        let (n_meas, n_proposals, fraction) = match *self {
            Self::RandomPauli { n_meas } | Self::RandomStabilizerQutrit { n_meas } => (n_meas, 1, 0.0),
            Self::AdaptiveOverlap { n_meas, n_proposals } => (n_meas, n_proposals, 1.0),
            Self::ScheduledMix {
                n_meas,
                n_proposals,
                adaptive_fraction,
            } => (n_meas, n_proposals, adaptive_fraction),
        };
        if n_meas == 0 || n_proposals == 0 || !(0.0..=1.0).contains(&fraction) {
            return Err(Error::Config(format!("invalid heuristic {self:?}")));
        }
        Ok(())
    }

    pub fn n_meas(&self) -> u32 {
        match *self {
            Self::RandomPauli { n_meas }
            | Self::RandomStabilizerQutrit { n_meas }
            | Self::AdaptiveOverlap { n_meas, .. }
            | Self::ScheduledMix { n_meas, .. } => n_meas,
        }
    }

    /// Whether designs depend on the current posterior covariance.
    pub fn is_adaptive(&self) -> bool {
        matches!(self, Self::AdaptiveOverlap { .. } | Self::ScheduledMix { .. })
    }

    /// Emits the next design. `covariance` is required by adaptive heuristics.
    pub fn next<R: Rng + ?Sized>(
        &self,
        space: &StateSpace,
        covariance: Option<&DMatrix<f64>>,
        rng: &mut R,
    ) -> Result<ExperimentDesign> {
        match *self {
            Self::RandomPauli { n_meas } => random_family(space, n_meas, rng),
            Self::RandomStabilizerQutrit { n_meas } => match space.kind() {
                StateKind::Density => random_stabilizer_qutrit_design(space.basis(), n_meas, rng),
                StateKind::Choi { .. } => Err(Error::Config("stabilizer designs apply to qutrit states only".into())),
            },
            Self::AdaptiveOverlap { n_meas, n_proposals } => adaptive_family(space, n_meas, n_proposals, covariance, rng),
            Self::ScheduledMix {
                n_meas,
                n_proposals,
                adaptive_fraction,
            } => {
                if scheduled_mix(&[1.0 - adaptive_fraction, adaptive_fraction], rng)? == 1 {
                    adaptive_family(space, n_meas, n_proposals, covariance, rng)
                } else {
                    random_family(space, n_meas, rng)
                }
            }
        }
    }
}

fn random_family<R: Rng + ?Sized>(space: &StateSpace, n_meas: u32, rng: &mut R) -> Result<ExperimentDesign> {
    match space.kind() {
        StateKind::Density => random_pauli_design(space.basis(), n_meas, rng),
        StateKind::Choi { dim: 2 } => ProcessProposal::random(rng).design(space.basis(), n_meas),
        StateKind::Choi { dim } => Err(Error::Config(format!(
            "process designs are implemented for single-qubit channels, got D = {dim}"
        ))),
    }
}

fn adaptive_family<R: Rng + ?Sized>(
    space: &StateSpace,
    n_meas: u32,
    n_proposals: usize,
    covariance: Option<&DMatrix<f64>>,
    rng: &mut R,
) -> Result<ExperimentDesign> {
    let cov = covariance.ok_or_else(|| Error::Config("adaptive design needs a posterior covariance".into()))?;
    let proposals = (0..n_proposals)
        .map(|_| random_family(space, n_meas, rng))
        .collect::<Result<Vec<_>>>()?;
    let best = adaptive_design(&proposals, cov)?;
    Ok(proposals.into_iter().nth(best).expect("index in range"))
}
