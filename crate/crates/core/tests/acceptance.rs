//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p tomolab --test acceptance`. Pass criterion ids
//! (`c1` .. `c10`) as arguments to run a subset.

use std::f64::consts::FRAC_1_SQRT_2;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;

use tomolab::design::{pauli_projector, random_pauli_string};
use tomolab::harness::{run_estimation, run_qpt, run_risk, run_tracking, RunConfig, Trajectory};
use tomolab::likelihood::{BinomialModel, Datum, ExperimentDesign};
use tomolab::priors::{
    coin_gad_params, gad_params, monte_carlo_mean, trace_distance, FiducialEnsemble, FiducialPrior, GadPrior,
    PriorDistribution,
};
use tomolab::qobj::{
    gell_mann_basis, hermitian_eigenvalues, identity, ket_projector, pauli, pauli_basis, process_effect, tp_deviation,
    trace, vectorize, CMatrix, DensityOperator, Effect,
};
use tomolab::randq::{bcsz_channel, ginibre_state, haar_unitary, RngStream};
use tomolab::smc::{
    bayes_update, effective_sample_size, init_cloud, posterior_covariance, posterior_mean, predictive_variance,
    resample, ParticleCloud, StateSpace,
};
use tomolab::tracking::tracking_bandwidth;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::from_path(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_fn(values.len(), values.len(), |i, j| c(if i == j { values[i] } else { 0.0 }))
}

fn c1_fiducial_means() -> Outcome {
    let draws = 100_000;
    let mut cases: Vec<(String, Arc<dyn PriorDistribution>, CMatrix)> = Vec::new();
    for d in [2, 3] {
        let mm = identity(d).unscale(d as f64);
        let ginibre: Arc<dyn PriorDistribution> =
            Arc::new(FiducialPrior::new(FiducialEnsemble::Ginibre { dim: d, rank: d }).unwrap());
        cases.push((format!("Ginibre({d},{d})"), Arc::clone(&ginibre), mm.clone()));
        cases.push((
            format!("Bures({d})"),
            Arc::new(FiducialPrior::new(FiducialEnsemble::Bures { dim: d }).unwrap()),
            mm.clone(),
        ));
        let mean = if d == 2 { diag(&[0.9, 0.1]) } else { diag(&[0.9, 0.05, 0.05]) };
        cases.push((
            format!("GAD over Ginibre({d},{d})"),
            Arc::new(GadPrior::new(ginibre, &mean).unwrap()),
            mean,
        ));
    }
    for rank in [1, 2] {
        cases.push((
            format!("rebit Ginibre(rank {rank})"),
            Arc::new(FiducialPrior::new(FiducialEnsemble::RebitGinibre { rank }).unwrap()),
            identity(2).unscale(2.0),
        ));
    }
    let results: Vec<(String, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(k, (name, prior, target))| {
            let mut rng = RngStream::new(101, k as u64);
            (name.clone(), trace_distance(&monte_carlo_mean(prior.as_ref(), draws, &mut rng), target))
        })
        .collect();
    let worst = results.iter().cloned().fold((String::new(), 0.0), |a, b| if b.1 > a.1 { b } else { a });
    Outcome::new(
        results.iter().all(|(_, t)| *t < 0.01),
        format!(
            "{} ensembles at 1e5 draws, worst trace distance {:.4} ({}) < 0.01",
            results.len(),
            worst.1,
            worst.0
        ),
    )
}

fn c2_bcsz() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for rank in [1, 2, 4] {
        let (min_eig, max_tp) = (0..10_000u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = RngStream::new(202, i).fork(rank as u64);
                let j = bcsz_channel(2, rank, &mut rng).unwrap().into_matrix();
                (hermitian_eigenvalues(&j)[0], tp_deviation(&j, 2))
            })
            .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)));
        let cptp = min_eig >= -1e-8 && max_tp <= 1e-8;
        let mut rng = RngStream::new(203, rank as u64);
        let mut mean = CMatrix::zeros(4, 4);
        for _ in 0..100_000 {
            mean += bcsz_channel(2, rank, &mut rng).unwrap().matrix();
        }
        let td = trace_distance(&mean.unscale(1e5), &identity(4).unscale(4.0));
        pass &= cptp && td < 0.01;
        parts.push(format!("K={rank}: min eig {min_eig:.1e}, TP dev {max_tp:.1e}, mean dist {td:.4}"));
    }
    Outcome::new(pass, parts.join("; "))
}

fn c3_gad_closed_forms() -> Outcome {
    let p = gad_params(&DensityOperator::new(diag(&[0.9, 0.05, 0.05])).unwrap()).unwrap();
    let star_err = (&p.rho_star - diag(&[1.0, 0.0, 0.0])).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let beta_err = (p.beta - 3.0 / 17.0).abs();
    let (_, b1, _) = coin_gad_params(1.0 / 3.0).unwrap();
    let (_, b2, _) = coin_gad_params(15.0 / 16.0).unwrap();
    let coin_err = (b1 - 2.0).abs().max((b2 - 1.0 / 7.0).abs());
    Outcome::new(
        beta_err <= 1e-12 && star_err <= 1e-12 && coin_err <= 1e-12,
        format!(
            "beta = {:.15} (3/17), rho* error {star_err:.1e}, coin beta(1/3) = {b1}, beta(15/16) = {b2:.15}",
            p.beta
        ),
    )
}

/// `Λ(ρ)` from Kraus operators read off the Choi eigendecomposition.
fn apply_via_kraus(choi: &CMatrix, d: usize, rho: &CMatrix) -> CMatrix {
    let eig = choi.clone().symmetric_eigen();
    let mut out = CMatrix::zeros(d, d);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let kraus = CMatrix::from_fn(d, d, |r, col| v[r + d * col] * c((d as f64 * lambda).sqrt()));
        out += &kraus * rho * kraus.adjoint();
    }
    out
}

fn c4_choi_equivalence() -> Outcome {
    let basis = pauli_basis(2).unwrap();
    let worst = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(404, i);
            let rank = rng.random_range(1..=4);
            let choi = bcsz_channel(2, rank, &mut rng).unwrap();
            let rho = ginibre_state(2, rng.random_range(1..=2), &mut rng).unwrap();
            let u = haar_unitary(2, &mut rng);
            let ket: Vec<Complex64> = u.column(0).iter().copied().collect();
            let e = Effect::new(ket_projector(&ket)).unwrap();
            let direct = trace(&(e.matrix() * apply_via_kraus(choi.matrix(), 2, rho.matrix()))).re;
            let via = process_effect(&rho, &e).unwrap().vectorize(&basis).unwrap();
            let sip = via.dot(&choi.vectorize(&basis).unwrap()).unwrap();
            (direct - sip).abs()
        })
        .reduce(|| 0.0, f64::max);
    Outcome::new(worst <= 1e-10, format!("1000 triples, worst |difference| {worst:.2e} <= 1e-10"))
}

fn coin_coords(p: f64) -> Vec<f64> {
    vec![FRAC_1_SQRT_2, 0.0, 0.0, (2.0 * p - 1.0) * FRAC_1_SQRT_2]
}

fn c5_grid_oracle() -> Outcome {
    let basis = pauli_basis(1).unwrap();
    let heads = Effect::new((identity(2) + pauli(3)).unscale(2.0)).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
    let mut worst: f64 = 0.0;
    for record in 0..20u64 {
        let mut rng = RngStream::new(505, record);
        let p_true: f64 = rng.random();
        let data: Vec<(u32, u32)> = (0..50)
            .map(|_| {
                let n = rng.random_range(1..=10u32);
                (n, (0..n).filter(|_| rng.random::<f64>() < p_true).count() as u32)
            })
            .collect();
        let mut cloud =
            ParticleCloud::uniform(grid.iter().map(|&p| coin_coords(p)).collect(), Arc::clone(&basis)).unwrap();
        for &(n, k) in &data {
            let design = ExperimentDesign::new(&heads, &basis, n).unwrap();
            bayes_update(&mut cloud, &Datum::new(design, k).unwrap(), &BinomialModel).unwrap();
        }
        // Exhaustive Bayes over the grid in the log domain.
        let logs: Vec<f64> = grid
            .iter()
            .map(|&p| {
                data.iter()
                    .map(|&(n, k)| {
                        let lk = if k == 0 { 0.0 } else { k as f64 * p.ln() };
                        let lf = if k == n { 0.0 } else { (n - k) as f64 * (1.0 - p).ln() };
                        lk + lf
                    })
                    .sum()
            })
            .collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let un: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let z: f64 = un.iter().sum();
        let mean: f64 = grid.iter().zip(&un).map(|(p, u)| p * u).sum::<f64>() / z;
        let var: f64 = grid.iter().zip(&un).map(|(p, u)| (p - mean).powi(2) * u).sum::<f64>() / z;
        let smc_mean = 0.5 + posterior_mean(&cloud).coords()[3] * FRAC_1_SQRT_2;
        let smc_var = posterior_covariance(&cloud)[(3, 3)] / 2.0;
        worst = worst.max((smc_mean - mean).abs()).max((smc_var - var).abs());
    }
    Outcome::new(
        worst <= 1e-12,
        format!("101-point grid, 20 records of 50 data, worst mean/variance error {worst:.1e} <= 1e-12"),
    )
}

fn c6_wrong_prior() -> Outcome {
    let cfg = config("wrong_prior.json");
    let results: Vec<(bool, bool)> = (1..=100u64)
        .into_par_iter()
        .map(|seed| {
            let rec = run_estimation(&cfg, seed).unwrap();
            (rec.failure.is_none() && rec.final_loss() < rec.initial_loss(), rec.credible.truth_inside)
        })
        .collect();
    let decreased = results.iter().filter(|r| r.0).count();
    let inside = results.iter().filter(|r| r.1).count();
    Outcome::new(
        decreased >= 95 && inside >= 90,
        format!("loss decreased in {decreased}/100 (need 95), truth inside z=3 ellipsoid in {inside}/100 (need 90)"),
    )
}

fn c7_qutrit_risk() -> Outcome {
    let rec = run_risk(&config("qutrit_risk.json"), 7).unwrap();
    let curve = |name: &str| &rec.curve(name).expect("curve present").mean_loss;
    let (default, matched, orthogonal) = (curve("default"), curve("insightful"), curve("orthogonal"));
    let below = matched.iter().zip(default).filter(|(m, d)| m <= d).count();
    let early = 10.min(matched.len() - 1);
    let ortho_early = (0..=early).all(|s| orthogonal[s] > default[s] && orthogonal[s] > matched[s]);
    let decreasing = rec.curves.iter().all(|c| c.mean_loss.last() < c.mean_loss.first());
    let failures: usize = rec.curves.iter().map(|c| c.failures).sum();
    Outcome::new(
        below == matched.len() && ortho_early && decreasing,
        format!(
            "100 trials: matched <= default at {below}/{} steps; orthogonal above both over steps 0..={early}: {ortho_early}; \
             all curves decrease: {decreasing}; final risks default {:.3} matched {:.3} orthogonal {:.3}; {failures} failed trials",
            matched.len(),
            default.last().unwrap(),
            matched.last().unwrap(),
            orthogonal.last().unwrap()
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c8_qpt_adaptive() -> Outcome {
    let adaptive = config("qpt_adaptive.json");
    let random = config("qpt_random.json");
    let pairs: Vec<(f64, f64)> = (1..=20u64)
        .into_par_iter()
        .map(|seed| {
            (
                run_qpt(&adaptive, seed).unwrap().final_loss(),
                run_qpt(&random, seed).unwrap().final_loss(),
            )
        })
        .collect();
    let wins = pairs.iter().filter(|(a, r)| a <= r).count();
    let (ma, mr) = (median(pairs.iter().map(|p| p.0).collect()), median(pairs.iter().map(|p| p.1).collect()));
    Outcome::new(
        ma <= mr,
        format!("20 seed pairs: median final loss adaptive {ma:.3e} <= random {mr:.3e} (adaptive wins {wins}/20)"),
    )
}

fn c9_tracking() -> Outcome {
    let two_tone = config("coin_two_tone.json");
    let wins = (1..=10u64)
        .into_par_iter()
        .filter(|&seed| {
            let rec = run_tracking(&two_tone, seed).unwrap();
            rec.failure.is_none() && rec.mse < rec.baseline_mse.unwrap()
        })
        .count();

    let slow = config("coin_single_tone.json");
    let mut fast = slow.clone();
    fast.tracking.as_mut().unwrap().trajectory = Trajectory::SingleToneCoin { f: 0.5 };
    let coin = |cfg: &RunConfig, seed| run_tracking(cfg, seed).unwrap().coin.unwrap();
    let correlations: Vec<f64> = (1..=10u64).into_par_iter().map(|s| coin(&slow, s).correlation).collect();
    let variances: Vec<f64> = (1..=10u64).into_par_iter().map(|s| coin(&fast, s).variance_about_half).collect();
    let min_corr = correlations.iter().copied().fold(f64::INFINITY, f64::min);
    let max_var = variances.iter().copied().fold(0.0, f64::max);

    let (n, f) = tracking_bandwidth(0.05, 1.9599, 1.0).unwrap();
    let bandwidth = n == 385 && f == 1.0 / 770.0;
    Outcome::new(
        wins >= 9 && min_corr > 0.5 && max_var < 0.01 && bandwidth,
        format!(
            "(a) two-tone beats eta=0 baseline in {wins}/10; (b) f=1/10 min correlation {min_corr:.3} > 0.5, \
             f=1/2 max variance about 1/2 {max_var:.2e} < 0.01 (10 seeds each); (c) bandwidth = ({n}, 1/{})",
            1.0 / f
        ),
    )
}

fn random_qutrit_cloud(rng: &mut RngStream, n: usize) -> ParticleCloud {
    let basis = gell_mann_basis(3).unwrap();
    let locs: Vec<Vec<f64>> = (0..n)
        .map(|_| ginibre_state(3, 3, rng).unwrap().vectorize(&basis).unwrap().into_coords())
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    ParticleCloud::new(locs, raw.iter().map(|w| w / s).collect(), basis).unwrap()
}

fn random_data(rng: &mut RngStream, k: usize) -> Vec<Datum> {
    let basis = pauli_basis(1).unwrap();
    (0..k)
        .map(|_| {
            let e = pauli_projector(&random_pauli_string(1, rng));
            let n = rng.random_range(1..=20u32);
            let design = ExperimentDesign::new(&e, &basis, n).unwrap();
            Datum::new(design, rng.random_range(0..=n)).unwrap()
        })
        .collect()
}

fn c10_invariants() -> Outcome {
    // A runner counts cases cumulatively, so each group gets its own.
    let runner = |cases| {
        TestRunner::new(PropConfig {
            cases,
            failure_persistence: None,
            ..PropConfig::default()
        })
    };
    let mut failures = Vec::new();
    let mut check = |name: &str, result: Result<(), proptest::test_runner::TestError<u64>>| {
        if let Err(e) = result {
            failures.push(format!("{name}: {e}"));
        }
    };

    check(
        "weights, ess, covariance",
        runner(64).run(&any::<u64>(), |seed| {
            let mut rng = RngStream::new(seed, 0);
            let prior = FiducialPrior::new(FiducialEnsemble::Ginibre { dim: 2, rank: 2 }).unwrap();
            let n = 200;
            let mut cloud = init_cloud(&prior, n, &mut rng).unwrap();
            let space = StateSpace::for_prior(&prior).unwrap();
            for datum in random_data(&mut rng, 8) {
                if bayes_update(&mut cloud, &datum, &BinomialModel).is_err() {
                    continue;
                }
                let ess = effective_sample_size(&cloud);
                prop_assert!((cloud.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                prop_assert!(ess >= 1.0 - 1e-9 && ess <= n as f64 + 1e-9);
                let eig = SymmetricEigen::new(posterior_covariance(&cloud)).eigenvalues;
                prop_assert!(eig.iter().all(|&l| l >= -1e-12));
                if ess < n as f64 / 2.0 {
                    resample(&mut cloud, 0.98, &space, &mut rng).unwrap();
                    prop_assert!((cloud.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                    prop_assert!((effective_sample_size(&cloud) - n as f64).abs() <= 1e-6);
                }
            }
            Ok(())
        }),
    );

    check(
        "projection idempotence",
        runner(64).run(&any::<u64>(), |seed| {
            let mut rng = RngStream::new(seed, 1);
            let qutrit = StateSpace::density(gell_mann_basis(3).unwrap());
            let x: Vec<f64> = (0..9).map(|i| if i == 0 { 1.0 / 3f64.sqrt() } else { rng.random_range(-0.8..0.8) }).collect();
            let once = qutrit.project(&x).unwrap();
            let twice = qutrit.project(&once).unwrap();
            prop_assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() <= 1e-10));

            let channel = StateSpace::choi(pauli_basis(2).unwrap(), 2).unwrap();
            let j = bcsz_channel(2, 2, &mut rng).unwrap().vectorize(channel.basis()).unwrap().into_coords();
            let jittered: Vec<f64> =
                j.iter().enumerate().map(|(i, v)| if i == 0 { *v } else { v + rng.random_range(-0.2..0.2) }).collect();
            let once = channel.project(&jittered).unwrap();
            let twice = channel.project(&once).unwrap();
            prop_assert!(once.iter().zip(&twice).all(|(a, b)| (a - b).abs() <= 1e-8));
            Ok(())
        }),
    );

    check(
        "sequential consistency",
        runner(64).run(&any::<u64>(), |seed| {
            let mut rng = RngStream::new(seed, 2);
            let prior = FiducialPrior::new(FiducialEnsemble::Ginibre { dim: 2, rank: 2 }).unwrap();
            let cloud = init_cloud(&prior, 100, &mut rng).unwrap();
            let data = random_data(&mut rng, 6);
            let (mut forward, mut backward) = (cloud.clone(), cloud);
            let mut log_f = 0.0;
            let mut log_b = 0.0;
            for d in &data {
                log_f += bayes_update(&mut forward, d, &BinomialModel).unwrap();
            }
            for d in data.iter().rev() {
                log_b += bayes_update(&mut backward, d, &BinomialModel).unwrap();
            }
            prop_assert!(forward.weights().iter().zip(backward.weights()).all(|(a, b)| (a - b).abs() <= 1e-10));
            prop_assert!((log_f - log_b).abs() <= 1e-9);
            Ok(())
        }),
    );

    check(
        "predictive variance",
        runner(16).run(&(0u64..16), |seed| {
            let mut rng = RngStream::new(seed, 3);
            let cloud = random_qutrit_cloud(&mut rng, 30);
            let basis = gell_mann_basis(3).unwrap();
            let obs_m = diag(&[1.0, 0.0, -1.0]);
            let obs = vectorize(&obs_m, &basis).unwrap();
            let formula = predictive_variance(&cloud, &obs).unwrap().total();
            let index = WeightedIndex::new(cloud.weights()).unwrap();
            let draws = 40_000;
            let outcomes: Vec<f64> = (0..draws)
                .map(|_| {
                    let rho = basis.operator_of(cloud.location(index.sample(&mut rng)));
                    let probs = [rho[(0, 0)].re, rho[(1, 1)].re, rho[(2, 2)].re];
                    let u: f64 = rng.random();
                    if u < probs[0] {
                        1.0
                    } else if u < probs[0] + probs[1] {
                        0.0
                    } else {
                        -1.0
                    }
                })
                .collect();
            let m = outcomes.iter().sum::<f64>() / draws as f64;
            let v = outcomes.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (draws - 1) as f64;
            let m4 = outcomes.iter().map(|x| (x - m).powi(4)).sum::<f64>() / draws as f64;
            let se = ((m4 - v * v) / draws as f64).sqrt();
            prop_assert!((v - formula).abs() <= 5.0 * se + 1e-12, "mc {v} formula {formula} se {se}");
            Ok(())
        }),
    );

    let n_props = 4;
    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{n_props} property groups, 64 cases each (16 for predictive variance), all hold")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria = [
        Criterion { id: "c1", title: "fiducial means", budget: Duration::from_secs(8 * 60), run: c1_fiducial_means },
        Criterion { id: "c2", title: "BCSZ channels", budget: Duration::from_secs(120), run: c2_bcsz },
        Criterion { id: "c3", title: "GAD closed forms", budget: Duration::from_secs(1), run: c3_gad_closed_forms },
        Criterion { id: "c4", title: "Choi equivalence", budget: Duration::from_secs(30), run: c4_choi_equivalence },
        Criterion { id: "c5", title: "exact-Bayes grid oracle", budget: Duration::from_secs(10), run: c5_grid_oracle },
        Criterion { id: "c6", title: "wrong-prior robustness", budget: Duration::from_secs(120), run: c6_wrong_prior },
        Criterion { id: "c7", title: "qutrit risk ordering", budget: Duration::from_secs(600), run: c7_qutrit_risk },
        Criterion { id: "c8", title: "adaptive process tomography", budget: Duration::from_secs(600), run: c8_qpt_adaptive },
        Criterion { id: "c9", title: "tracking", budget: Duration::from_secs(300), run: c9_tracking },
        Criterion { id: "c10", title: "engine invariants", budget: Duration::from_secs(120), run: c10_invariants },
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for crit in &criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == crit.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = (crit.run)();
        let elapsed = start.elapsed();
        let in_time = elapsed <= crit.budget;
        let pass = outcome.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} criterion {:>2} {}: {} [{:.1} s, budget {} s{}]",
            if pass { "PASS" } else { "FAIL" },
            &crit.id[1..],
            crit.title,
            outcome.detail,
            elapsed.as_secs_f64(),
            crit.budget.as_secs(),
            if in_time { "" } else { ", over budget" }
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
