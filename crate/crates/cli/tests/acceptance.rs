//! Acceptance run: one PASS/FAIL line per criterion. Experiments 1 to 7
//! go through the batch runner so their manifests can be replayed at the end.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use y00_cli::{replay, run, RunConfig, Table};
use y00_core::analysis::estimate_mutual_information;
use y00_core::channel::{mass_by_quadrature, sample_observation};
use y00_core::dsr::output_mass_at_offset;
use y00_core::keystream::{maximal_period, PolynomialTable};
use y00_core::rng::{label, stream};
use y00_core::stats::{binary_entropy, binomial_upper_tail, chi_square_gof};
use y00_core::{DsrPolicy, NoiseModel, PhaseAngle, PhaseNoise};

struct Outcome {
    pass: bool,
    detail: String,
}

struct Lab {
    dir: PathBuf,
    manifests: Vec<PathBuf>,
}

impl Lab {
    fn run(&mut self, name: &str, body: &str) -> Table {
        let text = format!("{body}\n[output]\ndir = {:?}\nname = {name:?}\n", self.dir.display().to_string());
        let cfg = RunConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let a = run(&cfg, None).unwrap_or_else(|e| panic!("{name}: {e}"));
        self.manifests.push(a.manifest);
        a.table
    }
}

fn num(t: &Table, col: &str) -> Vec<f64> {
    t.values(col).iter().map(|v| v.parse().unwrap_or(f64::NAN)).collect()
}

fn flags(t: &Table, col: &str) -> Vec<bool> {
    t.values(col).iter().map(|v| *v == "true").collect()
}

fn cell<'t>(t: &'t Table, row: usize, col: &str) -> &'t str {
    &t.rows[row][t.column(col).unwrap()]
}

/// Success counts per N for a single-register attack table.
fn successes(t: &Table) -> Vec<(usize, usize, usize)> {
    let mut ns: Vec<usize> = t.values("N").iter().map(|v| v.parse().unwrap()).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter()
        .map(|n| {
            let rows: Vec<usize> = (0..t.rows.len()).filter(|&r| cell(t, r, "N") == n.to_string()).collect();
            let ok = rows.iter().filter(|&&r| cell(t, r, "success") == "true").count();
            (n, ok, rows.len())
        })
        .collect()
}

fn within(limit: Duration, t0: Instant) -> (bool, String) {
    let e = t0.elapsed();
    (e <= limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn leakage_zero(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let t = lab.run(
        "c1_zero_leakage",
        r#"
[session]
bases = 16
photons = 100.0
master_seed = 101
enc = { kind = "lfsr", degree = 16 }
dsr = { kind = "continuous" }

[eve]
kind = "noiseless"

[experiment]
kind = "leakage"
estimators = ["exact", "joint"]
samples = 1000000
"#,
    );
    let spread: f64 = cell(&t, 0, "row_spread").parse().unwrap();
    let rate = num(&t, "value");
    let (fast, time) = within(Duration::from_secs(60), t0);
    Outcome {
        pass: spread <= 1e-12 && rate[0].abs() <= 1e-12 && rate[1] < 1e-3 && fast,
        detail: format!("row spread {spread:.2e}, exact {:.2e}, 1e6-sample estimate {:.2e}, {time}", rate[0], rate[1]),
    }
}

fn channel_agnostic(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let mut worst: f64 = 0.0;
    let mut all = true;
    for (name, eve) in [
        ("wedge", r#"kind = "wedge""#),
        ("gaussian", "kind = \"gaussian\"\nsigma = 0.2"),
        ("heterodyne", "kind = \"heterodyne\"\nphotons = 25.0"),
    ] {
        for m in [2, 4, 8, 16] {
            let t = lab.run(
                &format!("c2_{name}_{m}"),
                &format!(
                    r#"
[session]
bases = {m}
photons = 100.0
master_seed = 202
enc = {{ kind = "lfsr", degree = 16 }}
dsr = {{ kind = "continuous" }}

[eve]
{eve}

[experiment]
kind = "leakage"
estimators = ["spread"]
"#
                ),
            );
            let v = num(&t, "value")[0];
            worst = worst.max(v);
            all &= v < 1e-6;
        }
    }
    let (fast, time) = within(Duration::from_secs(300), t0);
    Outcome { pass: all && fast, detail: format!("max density spread {worst:.2e} over 3 models, M = 2..16, {time}") }
}

fn bare_exposure(lab: &mut Lab) -> Outcome {
    let t = lab.run(
        "c3_bare_exposure",
        r#"
[session]
bases = 2
photons = 100.0
master_seed = 303
enc = { kind = "lfsr", degree = 16 }
dsr = { kind = "off" }

[eve]
kind = "noiseless"

[experiment]
kind = "leakage"
estimators = ["exact", "posterior", "joint"]
samples = 100000
"#,
    );
    let v = num(&t, "value");
    let se = num(&t, "std_error")[2];
    Outcome {
        pass: (v[0] - 1.0).abs() < 1e-12 && v[1] == 1.0 && (v[2] - 1.0).abs() <= 3.0 * se,
        detail: format!("exact {}, posterior {}, estimate {} (SE {se:.1e})", v[0], v[1], v[2]),
    }
}

fn exhaustive_regime(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let t = lab.run(
        "c4_exhaustive",
        r#"
[session]
bases = 1024
photons = 10000.0
master_seed = 404
enc = { kind = "lfsr", degree = 16, feedback = "0x100b" }
dsr = { kind = "off" }

[eve]
kind = "wedge"

[experiment]
kind = "attack"
attack = "exhaustive"
scenario = "cta"
qumodes = [2, 5, 10, 20, 50, 1500]
trials = 20
"#,
    );
    let s = successes(&t);
    let at = s.iter().find(|r| r.0 == 1500).unwrap();
    let minimal = s.iter().find(|r| r.1 * 100 >= 95 * r.2).map(|r| r.0);
    let (fast, time) = within(Duration::from_secs(600), t0);
    Outcome {
        pass: at.1 * 100 >= 95 * at.2 && fast,
        detail: format!("rank 1 in {}/{} at N = 1500, minimal N reaching 95%: {minimal:?}, per N {s:?}, {time}", at.1, at.2),
    }
}

fn fca_trinomial(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let t = lab.run(
        "c5_fca",
        r#"
[session]
bases = 1024
photons = 15000.0
master_seed = 505
enc = { kind = "lfsr", degree = 31, feedback = "0x9" }
dsr = { kind = "off" }

[eve]
kind = "wedge"

[experiment]
kind = "attack"
attack = "fca"
scenario = "cta"
qumodes = [5, 10, 50, 200, 1500]
trials = 10
"#,
    );
    let s = successes(&t);
    let Some(&(n, ok, total)) = s.iter().find(|r| r.1 * 100 >= 80 * r.2) else {
        return Outcome { pass: false, detail: format!("no N reached 80%: {s:?}") };
    };
    let mut null = Vec::new();
    for attack in ["fca", "exhaustive"] {
        let t = lab.run(
            &format!("c5_null_{attack}"),
            &format!(
                r#"
[session]
bases = 1024
photons = 15000.0
master_seed = 506
enc = {{ kind = "lfsr", degree = 11, feedback = "0x5" }}
dsr = {{ kind = "continuous" }}

[eve]
kind = "wedge"

[experiment]
kind = "attack"
attack = "{attack}"
scenario = "cta"
qumodes = [{n}]
trials = 50
"#
            ),
        );
        let hits = flags(&t, "success").iter().filter(|&&b| b).count() as u64;
        null.push((attack, hits, binomial_upper_tail(hits, 50, 1.0 / 2047.0)));
    }
    let chance = null.iter().all(|r| r.2 > 1e-3);
    let (fast, time) = within(Duration::from_secs(1800), t0);
    Outcome {
        pass: chance && fast,
        detail: format!("{ok}/{total} at N = {n}, per N {s:?}; continuous-DSR null (successes, p) {null:?}, {time}"),
    }
}

fn bank_resistance(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let t = lab.run(
        "c6_bank",
        r#"
[session]
bases = 1024
photons = 15000.0
master_seed = 606
enc = { kind = "parallel_bank", lfsr_lanes = [{ lane = 3, degree = 16, feedback = "0x100b", seed = "0xace1" }] }
dsr = { kind = "off" }

[eve]
kind = "wedge"

[experiment]
kind = "attack"
attack = "bank"
qumodes = [1500]
"#,
    );
    let p = num(&t, "p_value");
    let linear = flags(&t, "linear");
    let cipher_min = p.iter().zip(&linear).filter(|(_, l)| !**l).map(|(p, _)| *p).fold(1.0, f64::min);
    let control = p.iter().zip(&linear).filter(|(_, l)| **l).map(|(p, _)| *p).fold(0.0, f64::max);
    let (fast, time) = within(Duration::from_secs(600), t0);
    Outcome {
        pass: linear.iter().filter(|&&l| l).count() == 1 && cipher_min > 1e-3 && control < 1e-3 && fast,
        detail: format!("min cipher-lane KS p {cipher_min:.3}, LFSR-lane p {control:.1e}, {time}"),
    }
}

fn gamma_scaling(lab: &mut Lab) -> Outcome {
    let t0 = Instant::now();
    let t = lab.run(
        "c7_scaling",
        r#"
[session]
bases = 1024
photons = 10000.0
master_seed = 707
enc = { kind = "lfsr", degree = 31, feedback = "0x9" }

[experiment]
kind = "scaling"
gamma = 2.66
photons = [100.0, 1000.0, 10000.0, 100000.0]
qumodes = 1000000
policy = "discrete"
"#,
    );
    let ber = num(&t, "ber");
    let zero = flags(&t, "leakage_zero");
    let decreasing = ber.windows(2).all(|w| w[1] < w[0]);
    let (fast, time) = within(Duration::from_secs(900), t0);
    Outcome {
        pass: decreasing && zero.iter().all(|&z| z) && fast,
        detail: format!("M {:?}, gamma {:?}, BER {ber:?}, leakage zero {zero:?}, {time}", t.values("M"), t.values("gamma")),
    }
}

fn synthetic(n: usize, keys: u32, bins: u32, seed: u64, f: impl Fn(u32, &mut dyn rand::RngCore) -> u32) -> Vec<(u32, PhaseAngle)> {
    let mut rng = stream(seed, &[label::TRIAL]);
    (0..n)
        .map(|_| {
            let k = rng.random_range(0..keys);
            let b = f(k, &mut rng);
            (k, PhaseAngle::new(b as f64 * TAU / bins as f64))
        })
        .collect()
}

fn numerical_foundations() -> Outcome {
    let t0 = Instant::now();
    let models = [
        NoiseModel::wedge(0.3).unwrap(),
        NoiseModel::gaussian(0.2).unwrap(),
        NoiseModel::heterodyne(50.0).unwrap(),
        NoiseModel::heterodyne(1e4).unwrap(),
    ];
    let mut norm: f64 = 0.0;
    for m in &models {
        norm = norm.max((mass_by_quadrature(m, -PI, PI) - 1.0).abs());
        for p in [DsrPolicy::Off, DsrPolicy::ContinuousHalfCircle, DsrPolicy::DiscreteWedges(5)] {
            norm = norm.max((output_mass_at_offset(-PI, PI, p, m) - 1.0).abs());
        }
    }

    let mut chi_min: f64 = 1.0;
    for (idx, m) in models.iter().enumerate() {
        let bins = 64;
        let mut rng = stream(808, &[idx as u64]);
        let th = PhaseAngle::new(1.1);
        let half = (6.0 * m.phase_std()).min(PI);
        let width = 2.0 * half / bins as f64;
        let mut counts = vec![0u64; bins + 1];
        for _ in 0..200_000 {
            let d = sample_observation(th, m, &mut rng).theta.diff(th);
            let b = ((d + half) / width).floor();
            counts[if (0.0..bins as f64).contains(&b) { b as usize } else { bins }] += 1;
        }
        let mut probs: Vec<f64> =
            (0..bins).map(|b| m.interval_mass(-half + b as f64 * width, -half + (b + 1) as f64 * width)).collect();
        probs.push((1.0 - probs.iter().sum::<f64>()).max(0.0));
        chi_min = chi_min.min(chi_square_gof(&counts, &probs).p_value);
    }

    let table = PolynomialTable::builtin();
    let entries: Vec<_> = table.iter().filter(|(d, _)| *d <= 20).collect();
    let periods = entries.iter().all(|(d, mask)| maximal_period(*d, mask).unwrap());

    let indep = estimate_mutual_information(&synthetic(200_000, 8, 32, 1, |_, r| r.random_range(0..32)), 8, 32).unwrap();
    let det = estimate_mutual_information(&synthetic(100_000, 16, 64, 2, |k, _| 4 * k), 16, 64).unwrap();
    let bsc = estimate_mutual_information(&synthetic(100_000, 2, 4, 3, |k, r| k ^ (r.random::<f64>() < 0.1) as u32), 2, 4)
        .unwrap();
    let oracles = [(indep.mi, 0.0, indep.std_error), (det.mi, 4.0, det.std_error), (bsc.mi, 1.0 - binary_entropy(0.1), bsc.std_error)];
    let estimators = oracles.iter().all(|(mi, truth, se)| (mi - truth).abs() <= 3.0 * se);

    let (fast, time) = within(Duration::from_secs(600), t0);
    Outcome {
        pass: norm <= 1e-6 && chi_min > 1e-3 && periods && estimators && fast,
        detail: format!(
            "max normalization error {norm:.1e}, min sampler chi-square p {chi_min:.3}, {} maximal periods ok = {periods}, \
             estimator oracles (estimate, truth, SE) {oracles:.4?}, {time}",
            entries.len()
        ),
    }
}

fn reproducible(manifests: &[PathBuf]) -> Outcome {
    let threads = std::thread::available_parallelism().map_or(4, |n| n.get().max(4));
    let mut failures = Vec::new();
    for m in manifests {
        let csv = std::fs::read_to_string(m.with_file_name(Path::new(&name_of(m)).with_extension("csv"))).unwrap();
        let expected = Table::from_csv(&csv).unwrap().deterministic().to_csv();
        for t in [1, threads] {
            match replay(m, Some(t)) {
                Ok(actual) if actual.deterministic().to_csv() == expected => {}
                Ok(_) => failures.push(format!("{} at {t} threads: bytes differ", name_of(m))),
                Err(e) => failures.push(format!("{} at {t} threads: {e}", name_of(m))),
            }
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{} manifests at 1 and {threads} threads, mismatches {failures:?}", manifests.len()),
    }
}

fn name_of(m: &Path) -> String {
    m.file_name().unwrap().to_string_lossy().trim_end_matches(".manifest.toml").to_string()
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let mut lab = Lab { dir: dir.path().to_path_buf(), manifests: Vec::new() };
    let mut results = vec![
        ("1 zero leakage under continuous randomization", leakage_zero(&mut lab)),
        ("2 channel-agnostic key independence", channel_agnostic(&mut lab)),
        ("3 bare key exposure", bare_exposure(&mut lab)),
        ("4 exhaustive attack at the operating regime", exhaustive_regime(&mut lab)),
        ("5 fast correlation attack on a trinomial register", fca_trinomial(&mut lab)),
        ("6 parallel bank resistance", bank_resistance(&mut lab)),
        ("7 fixed-gamma scaling", gamma_scaling(&mut lab)),
        ("8 numerical foundations", numerical_foundations()),
    ];
    results.push(("9 replay reproducibility", reproducible(&lab.manifests)));
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += !o.pass as usize;
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
