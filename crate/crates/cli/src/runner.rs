//! Experiment execution: one [`Table`] per run.

use std::time::Instant;

use y00_core::analysis::{
    default_bins, estimate_key_leakage, estimate_mutual_information, gamma_scaling_experiment, information_rate,
    key_dependence, posterior_leakage, row_spread, sample_key_channel, transition_matrix, uniformity_certificate,
};
use y00_core::attacks::{
    attack_parallel_bank, exhaustive_likelihood_attack, fca_bit_flip, intercept, random_keystream_baseline,
    running_key_posteriors, AttackResult,
};
use y00_core::constellation::gamma;
use y00_core::dsr::DensityMethod;
use y00_core::endpoints::measure_ber_seeded;
use y00_core::gf2::BitVector;
use y00_core::keystream::{BankLane, EncSpec, PolynomialTable};
use y00_core::rng::{derive_seed, label};
use y00_core::{ConstellationSpec, DsrPolicy, NoiseModel};

use crate::config::{scenario_kind, scenario_of, AttackKind, Estimator, Experiment, RunConfig};
use crate::error::{CliError, CliResult};
use crate::table::Table;

/// Run the configured experiment.
pub fn execute(cfg: &RunConfig) -> CliResult<Table> {
    cfg.validate()?;
    match &cfg.experiment {
        Experiment::Simulate { qumodes, trials } => simulate(cfg, *qumodes, *trials),
        Experiment::Attack { attack: AttackKind::Bank, .. } => bank(cfg),
        Experiment::Attack { .. } => single_register(cfg),
        Experiment::Leakage { .. } => leakage(cfg),
        Experiment::Scaling {
            gamma,
            photons,
            qumodes,
            policy,
        } => scaling(cfg, *gamma, photons, *qumodes, policy),
    }
}

/// Run `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Failed(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn ms(t: Instant) -> String {
    format!("{:.3}", t.elapsed().as_secs_f64() * 1e3)
}

fn label_of(m: &NoiseModel) -> String {
    use y00_core::PhaseNoise;
    m.label()
}

fn policy_label(p: DsrPolicy) -> String {
    match p {
        DsrPolicy::DiscreteWedges(w) => format!("discrete({w})"),
        other => other.kind().to_string(),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn simulate(cfg: &RunConfig, n: u64, trials: u32) -> CliResult<Table> {
    let mut t = Table::new(&[
        "run_id", "M", "S", "gamma", "enc_kind", "dsr_kind", "channel", "n", "errors", "ber", "wall_ms",
    ]);
    for trial in 0..trials as u64 {
        let t0 = Instant::now();
        let (session, _) = cfg.session_for_trial(trial)?;
        let r = measure_ber_seeded(&session, n, false)?;
        t.push(vec![
            trial.to_string(),
            session.spec.bases().to_string(),
            session.spec.photons().to_string(),
            gamma(&session.spec).to_string(),
            session.enc.kind().to_string(),
            policy_label(session.policy),
            label_of(&session.model),
            r.n.to_string(),
            r.errors.to_string(),
            r.ber.to_string(),
            ms(t0),
        ]);
    }
    Ok(t)
}

fn attack_setup(cfg: &RunConfig) -> (&Vec<usize>, u32, &str) {
    match &cfg.experiment {
        Experiment::Attack {
            qumodes,
            trials,
            scenario,
            ..
        } => (qumodes, *trials, scenario.as_str()),
        _ => unreachable!("validated as an attack"),
    }
}

fn single_register(cfg: &RunConfig) -> CliResult<Table> {
    let Experiment::Attack { attack, .. } = &cfg.experiment else {
        unreachable!("validated as an attack")
    };
    let (lengths, trials, scenario) = attack_setup(cfg);
    let kpa = scenario_kind(scenario)?;
    let spec = cfg.spec()?;
    let eve = cfg.eve_model(&spec)?;
    let mut t = Table::new(&[
        "run_id", "attack", "scenario", "M", "S", "dsr_kind", "eve_channel", "degree", "taps", "N", "success", "rank",
        "converged", "score", "states", "parity_checks", "rounds", "wall_ms",
    ]);
    let longest = *lengths.iter().max().expect("validated non-empty");
    for trial in 0..trials as u64 {
        let (session, lfsr) = cfg.session_for_trial(trial)?;
        let lfsr = lfsr.expect("validated single-register ENC");
        let icp = intercept(&session, &eve, longest)?;
        let soft = running_key_posteriors(&icp.observations, &icp.scenario(kpa), &spec, &eve, session.policy)?;
        for &n in lengths {
            let t0 = Instant::now();
            let params = cfg.attack_params(n, derive_seed(cfg.session.master_seed, &[label::TRIAL, trial, n as u64]))?;
            let window = soft.window(0..n);
            let mut r: AttackResult = match attack {
                AttackKind::Exhaustive => exhaustive_likelihood_attack(&window, &lfsr, &params)?,
                AttackKind::Fca => fca_bit_flip(&window, &lfsr, &params)?,
                AttackKind::Bank => unreachable!("handled by bank"),
            };
            let ok = r.judge(lfsr.seed());
            t.push(vec![
                trial.to_string(),
                format!("{attack:?}").to_lowercase(),
                scenario.to_string(),
                spec.bases().to_string(),
                spec.photons().to_string(),
                policy_label(session.policy),
                label_of(&eve),
                lfsr.degree().to_string(),
                lfsr.taps().to_string(),
                n.to_string(),
                ok.to_string(),
                opt(r.rank),
                r.converged.to_string(),
                opt(r.best().map(|c| c.score)),
                r.work.states.to_string(),
                r.work.parity_checks.to_string(),
                r.work.rounds.to_string(),
                ms(t0),
            ]);
        }
    }
    Ok(t)
}

fn bank(cfg: &RunConfig) -> CliResult<Table> {
    let Experiment::Attack { hypotheses, .. } = &cfg.experiment else {
        unreachable!("validated as an attack")
    };
    let (lengths, trials, scenario) = attack_setup(cfg);
    let kpa = scenario_kind(scenario)?;
    let spec = cfg.spec()?;
    let eve = cfg.eve_model(&spec)?;
    let mut t = Table::new(&[
        "run_id", "N", "lane", "linear", "samples", "mean", "baseline_mean", "ks_statistic", "p_value", "token_states",
        "wall_ms",
    ]);
    let longest = *lengths.iter().max().expect("validated non-empty");
    for trial in 0..trials as u64 {
        let (session, _) = cfg.session_for_trial(trial)?;
        let EncSpec::ParallelBank(spec_bank) = &session.enc else {
            unreachable!("validated bank ENC")
        };
        let mut hyps: Vec<BitVector> = hypotheses
            .iter()
            .map(|h| BitVector::from_hex(h.degree, &h.feedback))
            .collect::<Result<_, _>>()?;
        if hyps.is_empty() {
            hyps = spec_bank
                .lanes()
                .iter()
                .filter_map(|l| match l {
                    BankLane::Lfsr(s) => Some(s.feedback().clone()),
                    _ => None,
                })
                .collect();
        }
        if hyps.is_empty() {
            hyps.push(PolynomialTable::builtin().entries(16)[0].clone());
        }
        let icp = intercept(&session, &eve, longest)?;
        let soft = running_key_posteriors(&icp.observations, &icp.scenario(kpa), &spec, &eve, session.policy)?;
        let base_seed = derive_seed(cfg.session.master_seed, &[label::BASELINE, trial]);
        let baseline = random_keystream_baseline(&spec, &eve, session.policy, kpa, longest, base_seed)?;
        for &n in lengths {
            let t0 = Instant::now();
            let params = cfg.attack_params(n, 0)?;
            let r = attack_parallel_bank(&soft.window(0..n), &baseline.window(0..n), spec_bank, &hyps, &params)?;
            for l in &r.lanes {
                t.push(vec![
                    trial.to_string(),
                    n.to_string(),
                    l.lane.to_string(),
                    l.linear.to_string(),
                    l.samples.to_string(),
                    l.mean.to_string(),
                    l.baseline_mean.to_string(),
                    l.ks.statistic.to_string(),
                    l.ks.p_value.to_string(),
                    r.token_states.to_string(),
                    ms(t0),
                ]);
            }
        }
    }
    Ok(t)
}

/// Rows of the transition matrix are formed only up to this many bases.
const SPREAD_MAX_BASES: u32 = 64;

fn leakage(cfg: &RunConfig) -> CliResult<Table> {
    let Experiment::Leakage {
        estimators,
        samples,
        bins,
        sectors,
        scenario,
        threshold,
        grid,
    } = &cfg.experiment
    else {
        unreachable!("validated as leakage")
    };
    let kpa = scenario_kind(scenario)?;
    let spec: ConstellationSpec = cfg.spec()?;
    let policy = cfg.policy(&spec)?;
    let eve = cfg.eve_model(&spec)?;
    let mc_seed = derive_seed(cfg.session.master_seed, &[label::SHARD]);
    let bins = bins.unwrap_or_else(|| default_bins(spec.bases()));
    let sectors = sectors.unwrap_or(8 * spec.bases());
    let mut t = Table::new(&[
        "run_id", "estimator", "quantity", "M", "S", "dsr_kind", "eve_channel", "scenario", "bins", "samples", "value",
        "std_error", "p_value", "row_spread", "pass", "undersampled", "wall_ms",
    ]);
    let base = |est: &str, quantity: &str| {
        vec![
            est.to_string(),
            quantity.to_string(),
            spec.bases().to_string(),
            spec.photons().to_string(),
            policy_label(policy),
            label_of(&eve),
            scenario.clone(),
        ]
    };
    let mut mc_samples = None;
    for (i, est) in estimators.iter().enumerate() {
        let t0 = Instant::now();
        let mut row = vec![i.to_string()];
        match est {
            Estimator::Exact => {
                let v = information_rate(&spec, &eve, policy, &scenario_of(kpa), sectors)?;
                let spread = if spec.bases() <= SPREAD_MAX_BASES {
                    let known = kpa.then_some(false);
                    Some(row_spread(&transition_matrix(&spec, &eve, policy, known, sectors)?))
                } else {
                    None
                };
                row.extend(base("exact", "uniform_input_rate"));
                row.extend([
                    sectors.to_string(),
                    "0".into(),
                    v.to_string(),
                    String::new(),
                    String::new(),
                    opt(spread),
                    (v < *threshold).to_string(),
                    "false".into(),
                ]);
            }
            Estimator::Joint | Estimator::Covariant => {
                let s = mc_samples.get_or_insert_with(|| sample_key_channel(&spec, &eve, policy, *samples, mc_seed));
                let e = if *est == Estimator::Joint {
                    estimate_mutual_information(s, spec.bases(), bins)?
                } else {
                    estimate_key_leakage(s, &spec, bins)?
                };
                if e.undersampled {
                    eprintln!("warning: {} estimator has cells expecting fewer than 5 samples", e.method);
                }
                row.extend(base(e.method, "uniform_input_rate_estimate"));
                row.extend([
                    e.bins.to_string(),
                    e.samples.to_string(),
                    e.mi.to_string(),
                    e.std_error.to_string(),
                    e.p_value.to_string(),
                    String::new(),
                    (e.mi < *threshold).to_string(),
                    e.undersampled.to_string(),
                ]);
            }
            Estimator::Posterior => {
                let n = (*samples).min(200_000);
                let (session, _) = cfg.session_for_trial(0)?;
                let icp = intercept(&session, &eve, n)?;
                let soft = running_key_posteriors(&icp.observations, &icp.scenario(kpa), &spec, &eve, policy)?;
                let v = posterior_leakage(&soft);
                row.extend(base("posterior", "posterior_leakage"));
                row.extend([
                    String::new(),
                    n.to_string(),
                    v.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    (v < *threshold).to_string(),
                    "false".into(),
                ]);
            }
            Estimator::Certificate => {
                let per_key = (*samples / spec.bases() as usize).max(1);
                let r = uniformity_certificate(policy, &eve, &spec, per_key, mc_seed)?;
                let p = r.per_key.iter().chain([&r.pooled]).map(|t| t.p_value).fold(1.0, f64::min);
                row.extend(base("certificate", "total_variation"));
                row.extend([
                    r.bins.to_string(),
                    (per_key * spec.bases() as usize).to_string(),
                    r.total_variation.to_string(),
                    String::new(),
                    p.to_string(),
                    String::new(),
                    r.pass.to_string(),
                    "false".into(),
                ]);
            }
            Estimator::Spread => {
                let v = key_dependence(&spec, &eve, policy, *grid, DensityMethod::Quadrature)?;
                row.extend(base("spread", "density_spread"));
                row.extend([
                    String::new(),
                    grid.to_string(),
                    v.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    (v < 1e-6).to_string(),
                    "false".into(),
                ]);
            }
        }
        row.push(ms(t0));
        t.push(row);
    }
    Ok(t)
}

fn scaling(cfg: &RunConfig, gamma_target: f64, photons: &[f64], n: u64, policy: &str) -> CliResult<Table> {
    let mut ladder = photons.to_vec();
    ladder.sort_by(f64::total_cmp);
    let mut t = Table::new(&[
        "run_id", "S", "M", "gamma_target", "gamma", "dsr_kind", "n", "errors", "ber", "mi", "mi_std_error", "mi_p_value",
        "leakage_zero", "wall_ms",
    ]);
    for (i, s) in ladder.iter().enumerate() {
        let t0 = Instant::now();
        let seed = derive_seed(cfg.session.master_seed, &[label::TRIAL, i as u64]);
        let row = gamma_scaling_experiment(gamma_target, &[*s], policy, n, seed)?.remove(0);
        t.push(vec![
            i.to_string(),
            row.photons.to_string(),
            row.bases.to_string(),
            row.gamma_target.to_string(),
            row.gamma.to_string(),
            policy_label(row.policy),
            row.qumodes.to_string(),
            row.errors.to_string(),
            row.ber.to_string(),
            row.leakage.mi.to_string(),
            row.leakage.std_error.to_string(),
            row.leakage.p_value.to_string(),
            row.leakage.consistent_with_zero(1e-3).to_string(),
            ms(t0),
        ]);
    }
    Ok(t)
}
