//! Config-driven simulated experiments: single estimation runs, process
//! tomography, risk curves over repeated trials, tracking and prior sampling.
//!
//! A run is fully determined by its [`RunConfig`] and seed. Each trial draws
//! from its own family of random streams (truth, designs, data, particles,
//! filter), so comparisons between priors or heuristics see identical truths
//! and, for non-adaptive designs, identical data.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::DesignHeuristic;
use crate::error::{Error, Result};
use crate::likelihood::{simulate_experiment, BinomialModel, ExperimentDesign};
use crate::priors::{CoinPrior, FiducialEnsemble, FiducialPrior, GadPrior, PriorDistribution};
use crate::qobj::{
    check_same_basis, choi_of_channel, hadamard, identity, pauli, pauli_basis, tp_deviation, validate_density,
    CMatrix, Effect, OperatorBasis, VectorizedOperator, TP_TOL,
};
use crate::randq::RngStream;
use crate::smc::{
    covariance_trace, effective_sample_size, init_cloud, posterior_covariance, posterior_mean, principal_components,
    CredibleEllipsoid, LiuWest, ParticleCloud, PosteriorSummary, SmcUpdater, StateKind, StateSpace,
};
use crate::tracking::{EtaPrior, TrackedCloud, TrackingFilter};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Estimate,
    Qpt,
    Track,
    Risk,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    Identity,
    X,
    Y,
    Z,
    Hadamard,
}

impl Gate {
    pub fn matrix(&self) -> CMatrix {
        match self {
            Gate::Identity => identity(2),
            Gate::X => pauli(1),
            Gate::Y => pauli(2),
            Gate::Z => pauli(3),
            Gate::Hadamard => hadamard(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitaryTerm {
    pub weight: f64,
    pub gate: Gate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureTerm {
    pub weight: f64,
    pub operator: OperatorSpec,
}

/// An explicit operator, resolved against the hypothesis basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    MaximallyMixed,
    Diag {
        values: Vec<f64>,
    },
    /// `½(𝟙 + r·σ)` for a qubit.
    Bloch {
        r: [f64; 3],
    },
    /// Coordinates in the hypothesis basis.
    Coords {
        values: Vec<f64>,
    },
    Dense {
        re: Vec<Vec<f64>>,
        #[serde(default)]
        im: Option<Vec<Vec<f64>>>,
    },
    /// Choi state `J/2` of the qubit channel `ρ ↦ Σ w_i U_i ρ U_i†`.
    UnitaryMixture {
        terms: Vec<UnitaryTerm>,
    },
    Mixture {
        terms: Vec<MixtureTerm>,
    },
}

impl OperatorSpec {
    pub fn build(&self, basis: &Arc<OperatorBasis>) -> Result<CMatrix> {
        let dim = basis.dim();
        let m = match self {
            Self::MaximallyMixed => identity(dim).unscale(dim as f64),
            Self::Diag { values } => CMatrix::from_fn(values.len(), values.len(), |i, j| {
                Complex64::new(if i == j { values[i] } else { 0.0 }, 0.0)
            }),
            Self::Bloch { r } => {
                let mut m = identity(2);
                for (k, &rk) in r.iter().enumerate() {
                    m += pauli(k + 1).scale(rk);
                }
                m.unscale(2.0)
            }
            Self::Coords { values } => {
                if values.len() != basis.len() {
                    return Err(Error::Config(format!(
                        "operator has {} coordinates, basis has {}",
                        values.len(),
                        basis.len()
                    )));
                }
                basis.operator_of(values)
            }
            Self::Dense { re, im } => {
                let n = re.len();
                if re.iter().any(|r| r.len() != n) {
                    return Err(Error::Config("dense operator must be square".into()));
                }
                if let Some(im) = im {
                    if im.len() != n || im.iter().any(|r| r.len() != n) {
                        return Err(Error::Config("imaginary part has the wrong shape".into()));
                    }
                }
                CMatrix::from_fn(n, n, |i, j| {
                    Complex64::new(re[i][j], im.as_ref().map_or(0.0, |im| im[i][j]))
                })
            }
            Self::UnitaryMixture { terms } => {
                if terms.is_empty() || terms.iter().any(|t| !(t.weight >= 0.0)) {
                    return Err(Error::Config("unitary mixture needs nonnegative weights".into()));
                }
                let kraus: Vec<CMatrix> = terms.iter().map(|t| t.gate.matrix().scale(t.weight.sqrt())).collect();
                choi_of_channel(&kraus)?.into_matrix()
            }
            Self::Mixture { terms } => {
                if terms.is_empty() {
                    return Err(Error::Config("empty mixture".into()));
                }
                let mut acc = CMatrix::zeros(dim, dim);
                for t in terms {
                    acc += t.operator.build(basis)?.scale(t.weight);
                }
                acc
            }
        };
        if m.nrows() != dim {
            return Err(Error::Config(format!(
                "operator is {}×{}, hypotheses are {dim}×{dim}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(m)
    }
}

/// A fiducial ensemble, optionally damped towards a prescribed mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSpec {
    pub fiducial: FiducialEnsemble,
    #[serde(default)]
    pub mean: Option<OperatorSpec>,
}

impl PriorSpec {
    pub fn fiducial(ensemble: FiducialEnsemble) -> Self {
        Self {
            fiducial: ensemble,
            mean: None,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn PriorDistribution>> {
        let fid: Arc<dyn PriorDistribution> = Arc::new(FiducialPrior::new(self.fiducial)?);
        match &self.mean {
            None => Ok(fid),
            Some(mean) => {
                let m = mean.build(fid.basis())?;
                Ok(Arc::new(GadPrior::new(fid, &m)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPrior {
    pub name: String,
    pub prior: PriorSpec,
}

/// Where the simulated true state comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthSpec {
    Fixed { operator: OperatorSpec },
    Prior { prior: PriorSpec },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResamplerSpec {
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

impl Default for ResamplerSpec {
    fn default() -> Self {
        Self {
            a: default_a(),
            threshold: default_threshold(),
        }
    }
}

fn default_a() -> f64 {
    0.98
}

fn default_threshold() -> f64 {
    0.5
}

/// How the true state moves over time in tracking runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Trajectory {
    /// Coin with `p(t) = ¼[2 + cos(2πf₁t) + cos(2πf₂t)]`.
    TwoToneCoin { f1: f64, f2: f64 },
    /// Coin with `p(t) = ½ + ½cos(2πft)`.
    SingleToneCoin { f: f64 },
    /// Each traceless coordinate takes an `N(0, σ²)` step per time step, then
    /// the state is truncated back onto the state set.
    DiffusingState { sigma: f64 },
    Static,
}

impl Trajectory {
    pub fn is_coin(&self) -> bool {
        matches!(self, Self::TwoToneCoin { .. } | Self::SingleToneCoin { .. })
    }

    fn coin_bias(&self, t: f64) -> f64 {
        match *self {
            Self::TwoToneCoin { f1, f2 } => 0.25 * (2.0 + (2.0 * PI * f1 * t).cos() + (2.0 * PI * f2 * t).cos()),
            Self::SingleToneCoin { f } => 0.5 + 0.5 * (2.0 * PI * f * t).cos(),
            _ => unreachable!("not a coin trajectory"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackingSpec {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub eta_mean: f64,
    #[serde(default = "default_log_std")]
    pub eta_log_std: f64,
    pub trajectory: Trajectory,
    /// Also run a filter with `η = 0` on the same data.
    #[serde(default = "default_true")]
    pub baseline: bool,
    /// Prior mean bias for coin trajectories; ½ gives the uniform prior.
    #[serde(default = "default_half")]
    pub coin_prior_mean: f64,
}

fn default_dt() -> f64 {
    1.0
}

fn default_log_std() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_half() -> f64 {
    0.5
}

fn default_particles() -> usize {
    2000
}

fn default_trials() -> usize {
    1
}

fn default_z() -> f64 {
    3.0
}

fn default_samples() -> usize {
    1000
}

/// A complete description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(default)]
    pub name: Option<String>,
    pub prior: PriorSpec,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    #[serde(default)]
    pub heuristic: Option<DesignHeuristic>,
    #[serde(default = "default_particles")]
    pub n_particles: usize,
    #[serde(default)]
    pub n_experiments: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub resampler: ResamplerSpec,
    #[serde(default)]
    pub tracking: Option<TrackingSpec>,
    /// Risk mode: priors evaluated against the same truths and data.
    #[serde(default)]
    pub compare_priors: Vec<NamedPrior>,
    #[serde(default = "default_z")]
    pub credible_z: f64,
    /// Sample mode: number of draws.
    #[serde(default = "default_samples")]
    pub n_samples: usize,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.mode == Mode::Sample {
            return if self.n_samples == 0 { fail("n_samples must be positive".into()) } else { Ok(()) };
        }
        if self.n_particles < 2 {
            return fail(format!("n_particles must be at least 2, got {}", self.n_particles));
        }
        LiuWest::new(self.resampler.a, self.resampler.threshold).map_err(|e| Error::Config(e.to_string()))?;
        if !(self.credible_z > 0.0) {
            return fail("credible_z must be positive".into());
        }
        let heuristic = match &self.heuristic {
            Some(h) => h,
            None => return fail(format!("{:?} mode needs a heuristic", self.mode)),
        };
        heuristic.validate()?;
        match self.mode {
            Mode::Track => {
                let t = match &self.tracking {
                    Some(t) => t,
                    None => return fail("track mode needs a tracking section".into()),
                };
                if !(t.dt > 0.0) || !(t.eta_mean >= 0.0) || !(t.eta_log_std >= 0.0) {
                    return fail("tracking needs dt > 0, eta_mean >= 0, eta_log_std >= 0".into());
                }
                if !t.trajectory.is_coin() && self.truth.is_none() {
                    return fail("state tracking needs a truth".into());
                }
                if let Trajectory::DiffusingState { sigma } = t.trajectory {
                    if !(sigma >= 0.0) {
                        return fail("trajectory sigma must be >= 0".into());
                    }
                }
            }
            Mode::Risk => {
                if self.n_trials == 0 {
                    return fail("n_trials must be at least 1".into());
                }
                if self.truth.is_none() {
                    return fail("risk mode needs a truth".into());
                }
            }
            Mode::Estimate | Mode::Qpt => {
                if self.truth.is_none() {
                    return fail(format!("{:?} mode needs a truth", self.mode));
                }
            }
            Mode::Sample => unreachable!(),
        }
        if self.mode == Mode::Qpt && !matches!(self.prior.fiducial, FiducialEnsemble::Bcsz { .. }) {
            return fail("qpt mode needs a channel (bcsz) prior".into());
        }
        Ok(())
    }

    fn liu_west(&self) -> LiuWest {
        LiuWest {
            a: self.resampler.a,
            threshold: self.resampler.threshold,
        }
    }

    fn heuristic(&self) -> &DesignHeuristic {
        self.heuristic.as_ref().expect("validated")
    }

    fn truth_spec(&self) -> &TruthSpec {
        self.truth.as_ref().expect("validated")
    }
}

/// `(x̂ − x)ᵀ Q (x̂ − x)`, with `Q = 𝟙` when omitted.
pub fn quadratic_loss(est: &VectorizedOperator, truth: &VectorizedOperator, q: Option<&DMatrix<f64>>) -> Result<f64> {
    check_same_basis(est.basis(), truth.basis())?;
    let diff = nalgebra::DVector::from_iterator(
        est.coords().len(),
        est.coords().iter().zip(truth.coords()).map(|(a, b)| a - b),
    );
    Ok(match q {
        None => diff.norm_squared(),
        Some(q) => {
            if q.shape() != (diff.len(), diff.len()) {
                return Err(Error::DimensionMismatch {
                    expected: diff.len(),
                    found: q.nrows(),
                });
            }
            diff.dot(&(q * &diff))
        }
    })
}

/// Norm of the coordinate difference, the per-trial loss reported in risk curves.
pub fn loss_norm(est: &[f64], truth: &[f64]) -> f64 {
    est.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

/// Independent random streams for one trial.
struct Streams {
    truth: RngStream,
    design: RngStream,
    data: RngStream,
    particles: RngStream,
    filter: RngStream,
}

impl Streams {
    fn new(seed: u64, trial: u64) -> Self {
        let base = RngStream::new(seed, trial);
        Self {
            truth: base.fork(1),
            design: base.fork(2),
            data: base.fork(3),
            particles: base.fork(4),
            filter: base.fork(5),
        }
    }
}

fn draw_truth(spec: &TruthSpec, basis: &Arc<OperatorBasis>, space: &StateSpace, rng: &mut RngStream) -> Result<VectorizedOperator> {
    let m = match spec {
        TruthSpec::Fixed { operator } => operator.build(basis)?,
        TruthSpec::Prior { prior } => {
            let p = prior.build()?;
            check_same_basis(p.basis(), basis).map_err(|_| Error::Config("truth prior lives in a different space".into()))?;
            p.sample_matrix(rng)
        }
    };
    validate_density(&m).map_err(|e| Error::Config(format!("true state: {e}")))?;
    if let StateKind::Choi { dim } = space.kind() {
        let dev = tp_deviation(&m, dim);
        if dev > TP_TOL {
            return Err(Error::Config(format!("true channel is not trace preserving (deviation {dev:.2e})")));
        }
    }
    VectorizedOperator::from_coords(basis.coords_of(&m), Arc::clone(basis))
}

/// One row of an estimation record; step 0 is the prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub n_meas: u32,
    pub n_success: u32,
    pub effect: Vec<f64>,
    pub estimate: Vec<f64>,
    pub cov_trace: f64,
    pub ess: f64,
    pub log_norm: f64,
    pub resampled: bool,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub ess: f64,
    pub total_log_norm: f64,
}

impl SummaryRecord {
    fn of(s: &PosteriorSummary) -> Self {
        Self {
            mean: s.mean.coords().to_vec(),
            covariance: s.covariance.row_iter().map(|r| r.iter().copied().collect()).collect(),
            ess: s.ess,
            total_log_norm: s.total_log_norm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub eigenvalue: f64,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleRecord {
    pub z: f64,
    pub truth_distance_squared: Option<f64>,
    pub truth_inside: bool,
}

/// Output of estimate and qpt runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub prior: String,
    pub basis_labels: Vec<String>,
    pub truth: Vec<f64>,
    pub rows: Vec<StepRow>,
    pub final_summary: SummaryRecord,
    pub credible: CredibleRecord,
    pub principal_components: Vec<ComponentRecord>,
    pub n_resamples: usize,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn initial_loss(&self) -> f64 {
        self.rows[0].loss
    }

    pub fn final_loss(&self) -> f64 {
        self.rows.last().expect("row 0 always present").loss
    }
}

struct Trial {
    rows: Vec<StepRow>,
    cloud: ParticleCloud,
    total_log_norm: f64,
    n_resamples: usize,
    failure: Option<String>,
}

fn estimate_row(step: usize, design: Option<(&ExperimentDesign, u32)>, cloud: &ParticleCloud, truth: &[f64], log_norm: f64, resampled: bool) -> StepRow {
    let estimate = posterior_mean(cloud).into_coords();
    let (n_meas, n_success, effect) = match design {
        Some((d, k)) => (d.n_meas(), k, d.effect().coords().to_vec()),
        None => (0, 0, Vec::new()),
    };
    StepRow {
        step,
        n_meas,
        n_success,
        effect,
        loss: loss_norm(&estimate, truth),
        estimate,
        cov_trace: covariance_trace(cloud),
        ess: effective_sample_size(cloud),
        log_norm,
        resampled,
    }
}

fn run_trial(
    prior: &dyn PriorDistribution,
    truth: &VectorizedOperator,
    heuristic: &DesignHeuristic,
    n_experiments: usize,
    n_particles: usize,
    resampler: LiuWest,
    streams: &mut Streams,
) -> Result<Trial> {
    let space = StateSpace::for_prior(prior)?;
    let cloud = init_cloud(prior, n_particles, &mut streams.particles)?;
    let mut updater = SmcUpdater::new(cloud, space, BinomialModel, resampler, streams.filter.clone());
    let mut rows = vec![estimate_row(0, None, updater.cloud(), truth.coords(), 0.0, false)];
    let mut failure = None;
    for step in 1..=n_experiments {
        let cov = heuristic.is_adaptive().then(|| posterior_covariance(updater.cloud()));
        let design = heuristic.next(updater.space(), cov.as_ref(), &mut streams.design)?;
        let datum = simulate_experiment(truth, &design, &mut streams.data)?;
        match updater.update(&datum) {
            Ok(outcome) => rows.push(estimate_row(
                step,
                Some((&design, datum.n_success())),
                updater.cloud(),
                truth.coords(),
                outcome.log_norm,
                outcome.resampled,
            )),
            Err(Error::DegenerateUpdate) => {
                failure = Some(format!("degenerate update at step {step}: every particle has zero likelihood"));
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Trial {
        rows,
        total_log_norm: updater.total_log_norm(),
        n_resamples: updater.n_resamples(),
        cloud: updater.cloud().clone(),
        failure,
    })
}

/// Simulated tomography of a single true state or channel.
pub fn run_estimation(config: &RunConfig, seed: u64) -> Result<RunRecord> {
    config.validate()?;
    let prior = config.prior.build()?;
    let space = StateSpace::for_prior(prior.as_ref())?;
    let mut streams = Streams::new(seed, 0);
    let truth = draw_truth(config.truth_spec(), prior.basis(), &space, &mut streams.truth)?;
    let trial = run_trial(
        prior.as_ref(),
        &truth,
        config.heuristic(),
        config.n_experiments,
        config.n_particles,
        config.liu_west(),
        &mut streams,
    )?;
    let summary = PosteriorSummary::of(&trial.cloud, trial.total_log_norm);
    let ellipsoid = CredibleEllipsoid::new(summary.mean.clone(), summary.covariance.clone(), config.credible_z)?;
    let d2 = ellipsoid.distance_squared(truth.coords());
    let n_components = if config.mode == Mode::Qpt { 3 } else { 1 };
    let components = principal_components(&summary, n_components.min(summary.covariance.nrows()))?
        .into_iter()
        .map(|(eigenvalue, v)| ComponentRecord {
            eigenvalue,
            coords: v.into_coords(),
        })
        .collect();
    Ok(RunRecord {
        schema_version: SCHEMA_VERSION,
        seed,
        config: config.clone(),
        prior: prior.description(),
        basis_labels: prior.basis().labels().to_vec(),
        truth: truth.into_coords(),
        rows: trial.rows,
        final_summary: SummaryRecord::of(&summary),
        credible: CredibleRecord {
            z: config.credible_z,
            truth_distance_squared: d2.is_finite().then_some(d2),
            truth_inside: d2 <= config.credible_z * config.credible_z,
        },
        principal_components: components,
        n_resamples: trial.n_resamples,
        failure: trial.failure,
    })
}

/// Process tomography on `J(Λ)/D`: estimation over a channel prior with
/// composite preparation/measurement effects.
pub fn run_qpt(config: &RunConfig, seed: u64) -> Result<RunRecord> {
    if config.mode != Mode::Qpt {
        return Err(Error::Config("run_qpt needs mode = qpt".into()));
    }
    run_estimation(config, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskCurve {
    pub name: String,
    pub prior: String,
    /// Mean loss norm over successful trials at steps `0..=n_experiments`.
    pub mean_loss: Vec<f64>,
    pub trial_losses: Vec<Vec<f64>>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub curves: Vec<RiskCurve>,
}

impl RiskRecord {
    pub fn curve(&self, name: &str) -> Option<&RiskCurve> {
        self.curves.iter().find(|c| c.name == name)
    }
}

/// Expected loss against experiment count, averaged over trials whose truth
/// is drawn afresh each time. All compared priors share each trial's truth,
/// design stream and data stream.
pub fn run_risk(config: &RunConfig, seed: u64) -> Result<RiskRecord> {
    config.validate()?;
    let named: Vec<NamedPrior> = if config.compare_priors.is_empty() {
        vec![NamedPrior {
            name: "prior".into(),
            prior: config.prior.clone(),
        }]
    } else {
        config.compare_priors.clone()
    };
    let priors = named.iter().map(|p| p.prior.build()).collect::<Result<Vec<_>>>()?;
    let reference = config.prior.build()?;
    let space = StateSpace::for_prior(reference.as_ref())?;
    for p in &priors {
        check_same_basis(p.basis(), reference.basis())
            .map_err(|_| Error::Config("compared priors must share the hypothesis space".into()))?;
    }
    let per_trial: Vec<Vec<Option<Vec<f64>>>> = (0..config.n_trials as u64)
        .into_par_iter()
        .map(|t| -> Result<Vec<Option<Vec<f64>>>> {
            let truth = draw_truth(config.truth_spec(), reference.basis(), &space, &mut Streams::new(seed, t).truth)?;
            priors
                .iter()
                .map(|prior| {
                    let mut streams = Streams::new(seed, t);
                    let trial = run_trial(
                        prior.as_ref(),
                        &truth,
                        config.heuristic(),
                        config.n_experiments,
                        config.n_particles,
                        config.liu_west(),
                        &mut streams,
                    )?;
                    Ok(trial.failure.is_none().then(|| trial.rows.iter().map(|r| r.loss).collect()))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let curves = named
        .iter()
        .zip(&priors)
        .enumerate()
        .map(|(k, (np, prior))| {
            let trial_losses: Vec<Vec<f64>> = per_trial.iter().filter_map(|t| t[k].clone()).collect();
            let failures = config.n_trials - trial_losses.len();
            let mean_loss = (0..=config.n_experiments)
                .map(|s| trial_losses.iter().map(|l| l[s]).sum::<f64>() / trial_losses.len().max(1) as f64)
                .collect();
            RiskCurve {
                name: np.name.clone(),
                prior: prior.description(),
                mean_loss,
                trial_losses,
                failures,
            }
        })
        .collect();
    Ok(RiskRecord {
        schema_version: SCHEMA_VERSION,
        seed,
        config: config.clone(),
        curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub step: usize,
    pub time: f64,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub cov_trace: f64,
    pub eta_mean: f64,
    pub ess: f64,
    pub sq_error: f64,
    pub baseline_estimate: Option<Vec<f64>>,
    pub baseline_sq_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub config: RunConfig,
    pub basis_labels: Vec<String>,
    pub rows: Vec<TrackRow>,
    /// Mean over steps of `‖x̂ − x‖²`.
    pub mse: f64,
    pub baseline_mse: Option<f64>,
    /// Coin runs: series of true and estimated heads probabilities.
    pub coin: Option<CoinSeries>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoinSeries {
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    pub baseline: Option<Vec<f64>>,
    /// Pearson correlation of estimate and truth.
    pub correlation: f64,
    /// Mean of `(p̂ − ½)²` over time.
    pub variance_about_half: f64,
    pub mse: f64,
    pub baseline_mse: Option<f64>,
}

fn coin_coords(p: f64) -> Vec<f64> {
    vec![FRAC_1_SQRT_2, 0.0, 0.0, (2.0 * p - 1.0) * FRAC_1_SQRT_2]
}

fn coin_bias(coords: &[f64]) -> f64 {
    0.5 + coords[3] * FRAC_1_SQRT_2
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Tracks a moving truth with a diffusing particle filter, optionally
/// alongside an `η = 0` filter started from the same particles.
pub fn run_tracking(config: &RunConfig, seed: u64) -> Result<TrackRecord> {
    config.validate()?;
    if config.mode != Mode::Track {
        return Err(Error::Config("run_tracking needs mode = track".into()));
    }
    let spec = config.tracking.as_ref().expect("validated");
    let mut streams = Streams::new(seed, 0);
    let eta_stream = streams.particles.fork(7);
    let is_coin = spec.trajectory.is_coin();

    let (space, cloud, mut truth) = if is_coin {
        let basis = pauli_basis(1)?;
        let space = StateSpace::density(Arc::clone(&basis)).with_free_coords(vec![3])?;
        let coin_prior = CoinPrior::new(spec.coin_prior_mean).map_err(|e| Error::Config(e.to_string()))?;
        let locs = (0..config.n_particles).map(|_| coin_coords(coin_prior.sample(&mut streams.particles))).collect();
        let cloud = ParticleCloud::uniform(locs, Arc::clone(&basis))?;
        let truth = VectorizedOperator::from_coords(coin_coords(spec.trajectory.coin_bias(0.0)), basis)?;
        (space, cloud, truth)
    } else {
        let prior = config.prior.build()?;
        let space = StateSpace::for_prior(prior.as_ref())?;
        let truth = draw_truth(config.truth_spec(), prior.basis(), &space, &mut streams.truth)?;
        let cloud = init_cloud(prior.as_ref(), config.n_particles, &mut streams.particles)?;
        (space, cloud, truth)
    };
    let basis = Arc::clone(space.basis());
    let eta_prior = EtaPrior::new(spec.eta_mean, spec.eta_log_std).map_err(|e| Error::Config(e.to_string()))?;
    let mut eta_rng = eta_stream;
    let tracked = TrackedCloud::with_prior(cloud.clone(), &eta_prior, &mut eta_rng);
    let mut filter = TrackingFilter::new(tracked, space.clone(), BinomialModel, config.liu_west(), streams.filter.clone());
    let mut baseline = spec.baseline.then(|| {
        let zero = TrackedCloud::new(cloud.clone(), vec![0.0; cloud.n_particles()]).expect("valid");
        TrackingFilter::new(zero, space.clone(), BinomialModel, config.liu_west(), streams.filter.clone())
    });

    let heads = Effect::new((identity(2) + pauli(3)).unscale(2.0))?;
    let mut rows = Vec::with_capacity(config.n_experiments);
    let mut failure = None;
    for step in 0..config.n_experiments {
        let time = step as f64 * spec.dt;
        match spec.trajectory {
            Trajectory::TwoToneCoin { .. } | Trajectory::SingleToneCoin { .. } => {
                truth = VectorizedOperator::from_coords(coin_coords(spec.trajectory.coin_bias(time)), Arc::clone(&basis))?;
            }
            Trajectory::DiffusingState { sigma } if step > 0 && sigma > 0.0 => {
                let mut moved = truth.coords().to_vec();
                for x in moved.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(&mut streams.truth);
                    *x += sigma * z;
                }
                truth = VectorizedOperator::from_coords(space.project(&moved)?, Arc::clone(&basis))?;
            }
            _ => {}
        }
        let design = if is_coin {
            ExperimentDesign::new(&heads, &basis, config.heuristic().n_meas())?
        } else {
            config.heuristic().next(&space, None, &mut streams.design)?
        }
        .with_time(time)?;
        let datum = simulate_experiment(&truth, &design, &mut streams.data)?;
        let result = filter.update(&datum).and_then(|_| match baseline.as_mut() {
            Some(b) => b.update(&datum).map(|_| ()),
            None => Ok(()),
        });
        match result {
            Ok(()) => {}
            Err(Error::DegenerateUpdate) => {
                failure = Some(format!("degenerate update at step {step}"));
                break;
            }
            Err(e) => return Err(e),
        }
        let estimate = posterior_mean(filter.cloud()).into_coords();
        let sq = |e: &[f64]| loss_norm(e, truth.coords()).powi(2);
        let base_est = baseline.as_ref().map(|b| posterior_mean(b.cloud()).into_coords());
        rows.push(TrackRow {
            step,
            time,
            truth: truth.coords().to_vec(),
            sq_error: sq(&estimate),
            baseline_sq_error: base_est.as_deref().map(sq),
            estimate,
            baseline_estimate: base_est,
            cov_trace: covariance_trace(filter.cloud()),
            eta_mean: filter.tracked().eta_mean(),
            ess: filter.ess(),
        });
    }
    let n = rows.len().max(1) as f64;
    let mse = rows.iter().map(|r| r.sq_error).sum::<f64>() / n;
    let baseline_mse = spec.baseline.then(|| rows.iter().filter_map(|r| r.baseline_sq_error).sum::<f64>() / n);
    let coin = is_coin.then(|| {
        let truth: Vec<f64> = rows.iter().map(|r| coin_bias(&r.truth)).collect();
        let estimate: Vec<f64> = rows.iter().map(|r| coin_bias(&r.estimate)).collect();
        let baseline: Option<Vec<f64>> = spec
            .baseline
            .then(|| rows.iter().map(|r| coin_bias(r.baseline_estimate.as_ref().expect("baseline on"))).collect());
        let sq_mean = |e: &[f64]| e.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
        CoinSeries {
            correlation: pearson(&estimate, &truth),
            variance_about_half: estimate.iter().map(|p| (p - 0.5).powi(2)).sum::<f64>() / n,
            mse: sq_mean(&estimate),
            baseline_mse: baseline.as_deref().map(sq_mean),
            truth,
            estimate,
            baseline,
        }
    });
    Ok(TrackRecord {
        schema_version: SCHEMA_VERSION,
        seed,
        config: config.clone(),
        basis_labels: basis.labels().to_vec(),
        rows,
        mse,
        baseline_mse,
        coin,
        failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub schema_version: u32,
    pub seed: u64,
    pub prior: String,
    pub basis_labels: Vec<String>,
    pub samples: Vec<Vec<f64>>,
}

/// `n` coordinate vectors drawn from a prior.
pub fn sample_prior(spec: &PriorSpec, n: usize, seed: u64) -> Result<SampleRecord> {
    let prior = spec.build()?;
    let mut rng = RngStream::new(seed, 0);
    Ok(SampleRecord {
        schema_version: SCHEMA_VERSION,
        seed,
        prior: prior.description(),
        basis_labels: prior.basis().labels().to_vec(),
        samples: (0..n).map(|_| prior.sample_coords(&mut rng)).collect(),
    })
}

/// Maps a command-line ensemble name to a fiducial ensemble.
pub fn ensemble_from_name(name: &str, dim: usize, rank: Option<usize>) -> Result<FiducialEnsemble> {
    let rank_or = |default| rank.unwrap_or(default);
    Ok(match name {
        "ginibre" => FiducialEnsemble::Ginibre { dim, rank: rank_or(dim) },
        "rebit" | "rebit_ginibre" => FiducialEnsemble::RebitGinibre { rank: rank_or(2) },
        "bures" => FiducialEnsemble::Bures { dim },
        "bcsz" => FiducialEnsemble::Bcsz {
            dim,
            rank: rank_or(dim * dim),
        },
        other => {
            return Err(Error::Config(format!(
                "unknown prior '{other}' (expected ginibre, rebit, bures or bcsz)"
            )))
        }
    })
}

/// Caps the global rayon pool at `TOMOLAB_THREADS` when set. Returns the cap.
pub fn init_threads_from_env() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var("TOMOLAB_THREADS") else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("TOMOLAB_THREADS must be a positive integer, got '{raw}'")))?;
    // A second call finds the pool already built; the first cap stands.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(Some(n))
}

/// Result of any run mode.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutput {
    Run(RunRecord),
    Risk(RiskRecord),
    Track(TrackRecord),
    Sample(SampleRecord),
}

pub fn run(config: &RunConfig, seed: u64) -> Result<RunOutput> {
    config.validate()?;
    Ok(match config.mode {
        Mode::Estimate => RunOutput::Run(run_estimation(config, seed)?),
        Mode::Qpt => RunOutput::Run(run_qpt(config, seed)?),
        Mode::Risk => RunOutput::Risk(run_risk(config, seed)?),
        Mode::Track => RunOutput::Track(run_tracking(config, seed)?),
        Mode::Sample => RunOutput::Sample(sample_prior(&config.prior, config.n_samples, seed)?),
    })
}

impl RunOutput {
    /// The heralded inference failure, if any.
    pub fn failure(&self) -> Option<String> {
        match self {
            Self::Run(r) => r.failure.clone(),
            Self::Track(t) => t.failure.clone(),
            Self::Risk(r) => {
                let failed: usize = r.curves.iter().map(|c| c.failures).sum();
                (failed > 0).then(|| format!("{failed} risk trials ended in a degenerate update"))
            }
            Self::Sample(_) => None,
        }
    }

    /// Writes the JSON record and CSV tables into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let mut put = |name: &str, text: String| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, text)?;
            files.push(path);
            Ok(())
        };
        match self {
            Self::Run(r) => {
                put("record.json", to_json(r)?)?;
                put("steps.csv", steps_csv(r))?;
                put("covariance.csv", matrix_csv(&r.final_summary.covariance))?;
                if !r.principal_components.is_empty() {
                    put("principal_components.csv", components_csv(r))?;
                }
            }
            Self::Risk(r) => {
                put("risk.json", to_json(r)?)?;
                put("risk.csv", risk_csv(r))?;
            }
            Self::Track(t) => {
                put("track.json", to_json(t)?)?;
                put("track.csv", track_csv(t))?;
            }
            Self::Sample(s) => {
                let mut csv = s.basis_labels.join(",");
                csv.push('\n');
                for x in &s.samples {
                    csv.push_str(&join(x));
                    csv.push('\n');
                }
                put("samples.csv", csv)?;
                let meta = serde_json::json!({
                    "schema_version": s.schema_version,
                    "seed": s.seed,
                    "prior": s.prior,
                    "n_samples": s.samples.len(),
                    "basis_labels": s.basis_labels,
                });
                put("samples.json", serde_json::to_string_pretty(&meta)? + "\n")?;
            }
        }
        Ok(files)
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").expect("writing to a String");
    }
    s
}

fn steps_csv(r: &RunRecord) -> String {
    let mut out = String::from("step,n_meas,n_success,loss,cov_trace,ess,log_norm,resampled");
    for l in &r.basis_labels {
        write!(out, ",est_{l}").expect("writing to a String");
    }
    out.push('\n');
    for row in &r.rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.step,
            row.n_meas,
            row.n_success,
            row.loss,
            row.cov_trace,
            row.ess,
            row.log_norm,
            row.resampled,
            join(&row.estimate)
        )
        .expect("writing to a String");
    }
    out
}

fn matrix_csv(m: &[Vec<f64>]) -> String {
    m.iter().map(|r| join(r) + "\n").collect()
}

fn components_csv(r: &RunRecord) -> String {
    let mut out = String::from("eigenvalue");
    for l in &r.basis_labels {
        write!(out, ",{l}").expect("writing to a String");
    }
    out.push('\n');
    for c in &r.principal_components {
        writeln!(out, "{},{}", c.eigenvalue, join(&c.coords)).expect("writing to a String");
    }
    out
}

fn risk_csv(r: &RiskRecord) -> String {
    let mut out = String::from("step");
    for c in &r.curves {
        write!(out, ",{}", c.name).expect("writing to a String");
    }
    out.push('\n');
    let steps = r.curves.first().map_or(0, |c| c.mean_loss.len());
    for s in 0..steps {
        let row: Vec<f64> = r.curves.iter().map(|c| c.mean_loss[s]).collect();
        writeln!(out, "{s},{}", join(&row)).expect("writing to a String");
    }
    out
}

fn track_csv(t: &TrackRecord) -> String {
    let mut out = String::from("step,time,sq_error,baseline_sq_error,cov_trace,eta_mean,ess");
    if t.coin.is_some() {
        out.push_str(",true_p,est_p,baseline_p");
    }
    for l in &t.basis_labels {
        write!(out, ",true_{l}").expect("writing to a String");
    }
    for l in &t.basis_labels {
        write!(out, ",est_{l}").expect("writing to a String");
    }
    out.push('\n');
    for (i, row) in t.rows.iter().enumerate() {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            row.step,
            row.time,
            row.sq_error,
            row.baseline_sq_error.map_or(String::new(), |v| v.to_string()),
            row.cov_trace,
            row.eta_mean,
            row.ess
        )
        .expect("writing to a String");
        if let Some(c) = &t.coin {
            let b = c.baseline.as_ref().map_or(String::new(), |b| b[i].to_string());
            write!(out, ",{},{},{}", c.truth[i], c.estimate[i], b).expect("writing to a String");
        }
        writeln!(out, ",{},{}", join(&row.truth), join(&row.estimate)).expect("writing to a String");
    }
    out
}
