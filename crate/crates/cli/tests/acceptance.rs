//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Checks listed in `KNOWN` are reported as FAIL but do not fail the process;
//! every other failure exits non-zero.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use mixsel_core::pipeline::{replicate, ReplicateReport, ReplicateSpec};
use mixsel_core::sampler::RunConfig;
use mixsel_core::simulate::{CensorSpec, ScenarioId, ScenarioSpec};

const REPS: usize = 20;
const BASE_SEED: u64 = 1;

const ARI_MIN: f64 = 0.95;
const WEIGHT_HIGH: f64 = 0.95;
const WEIGHT_LOW: f64 = 0.20;
const SIM2_X5_MAX: f64 = 0.30;
const SIM3_ARI: (f64, f64) = (0.60, 0.90);
const SIM3_NOISE_MAX: f64 = 0.10;
const GEWEKE_ROUNDS: usize = 5_000;
const GEWEKE_Z: f64 = 3.0;
const ARI_ORACLE_TOL: f64 = 1e-12;

/// Checks expected to fail with the generating laws as given (see README).
const KNOWN: &[&str] = &["sim3 weight x6"];

struct Check {
    name: String,
    pass: bool,
    detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

struct Criterion {
    number: usize,
    title: &'static str,
    checks: Vec<Check>,
}

fn run(scenario: ScenarioId, censor: Option<(&[&str], f64)>, naive: bool) -> ReplicateReport {
    let spec = ReplicateSpec {
        scenario: ScenarioSpec::new(scenario),
        reps: REPS,
        base_seed: BASE_SEED,
        censor: censor.map(|(vars, p)| CensorSpec {
            variables: vars.iter().map(|s| s.to_string()).collect(),
            proportion: p,
        }),
        naive,
        config: RunConfig::default(),
        workers: 0,
    };
    let t = Instant::now();
    let report = replicate(&spec).expect("replicate run failed");
    let label = match censor {
        Some((vars, p)) => format!("{scenario} censor {}@{p}{}", vars.join(","), if naive { " naive" } else { "" }),
        None => scenario.to_string(),
    };
    eprintln!("  [{label}: {REPS} reps in {:.1}s]", t.elapsed().as_secs_f64());
    report
}

fn weight(r: &ReplicateReport, name: &str) -> f64 {
    r.median_weight(name).unwrap_or_else(|| panic!("no variable {name}"))
}

fn at_least(tag: &str, r: &ReplicateReport, names: &[&str], min: f64) -> Vec<Check> {
    names
        .iter()
        .map(|n| {
            let w = weight(r, n);
            Check::new(format!("{tag} weight {n}"), w >= min, format!("{tag} {n}={w:.3} (>= {min})"))
        })
        .collect()
}

fn at_most(tag: &str, r: &ReplicateReport, names: &[&str], max: f64) -> Vec<Check> {
    names
        .iter()
        .map(|n| {
            let w = weight(r, n);
            Check::new(format!("{tag} weight {n}"), w <= max, format!("{tag} {n}={w:.3} (<= {max})"))
        })
        .collect()
}

fn ari_check(tag: &str, r: &ReplicateReport, min: f64) -> Check {
    let a = r.median_ari();
    Check::new(format!("{tag} ari"), a >= min, format!("{tag} ARI={a:.3} (>= {min})"))
}

fn simulation_criteria() -> Vec<Criterion> {
    let sim1a = run(ScenarioId::Sim1a, None, false);
    let sim2 = run(ScenarioId::Sim2, None, false);
    let sim3 = run(ScenarioId::Sim3, None, false);

    let x34: &[&str] = &["x3", "x4"];
    let all: &[&str] = &["x1", "x2", "x3", "x4"];
    let censored = [
        ("x3,x4@0.2", run(ScenarioId::Sim1a, Some((x34, 0.2)), false)),
        ("x3,x4@0.5", run(ScenarioId::Sim1a, Some((x34, 0.5)), false)),
        ("x1-x4@0.2", run(ScenarioId::Sim1a, Some((all, 0.2)), false)),
        ("x1-x4@0.5", run(ScenarioId::Sim1a, Some((all, 0.5)), false)),
    ];
    let naive = run(ScenarioId::Sim1a, Some((all, 0.5)), true);

    let informative = ["x1", "x2", "x3", "x5"];

    let mut c2 = at_least("sim1a", &sim1a, &informative, WEIGHT_HIGH);
    c2.extend(at_most("sim1a", &sim1a, &["x4"], WEIGHT_LOW));

    let x5 = weight(&sim2, "x5");
    let c3 = vec![
        Check::new("sim2 weight x5", x5 <= SIM2_X5_MAX, format!("x5={x5:.3} (<= {SIM2_X5_MAX})")),
        ari_check("sim2", &sim2, ARI_MIN),
    ];

    let a3 = sim3.median_ari();
    let mut c4 = vec![Check::new(
        "sim3 ari",
        (SIM3_ARI.0..=SIM3_ARI.1).contains(&a3),
        format!("ARI={a3:.3} (in [{}, {}])", SIM3_ARI.0, SIM3_ARI.1),
    )];
    c4.extend(at_least("sim3", &sim3, &["x6", "x7"], WEIGHT_HIGH));
    c4.extend(at_most("sim3", &sim3, &["x1", "x2", "x3", "x4"], SIM3_NOISE_MAX));

    let embedded_50 = censored[1].1.median_ari();
    let naive_ari = naive.median_ari();
    let c5 = vec![
        ari_check("x3,x4@0.2", &censored[0].1, ARI_MIN),
        Check::new(
            "naive below embedded",
            naive_ari < embedded_50,
            format!("naive x1-x4@0.5 ARI={naive_ari:.3} < embedded x3,x4@0.5 ARI={embedded_50:.3}"),
        ),
    ];

    let mut c6 = Vec::new();
    for (tag, r) in &censored {
        c6.extend(at_least(tag, r, &informative, WEIGHT_HIGH));
        c6.extend(at_most(tag, r, &["x4"], WEIGHT_LOW));
    }

    vec![
        Criterion { number: 1, title: "sim1a clustering", checks: vec![ari_check("sim1a", &sim1a, ARI_MIN)] },
        Criterion { number: 2, title: "sim1a weights", checks: c2 },
        Criterion { number: 3, title: "sim2 weights and clustering", checks: c3 },
        Criterion { number: 4, title: "sim3 clustering and weights", checks: c4 },
        Criterion { number: 5, title: "censoring clustering", checks: c5 },
        Criterion { number: 6, title: "censoring weights", checks: c6 },
    ]
}

fn conjugacy() -> Criterion {
    let checks = oracles::conjugacy_checks(20_240_611)
        .into_iter()
        .map(|(name, d)| {
            let pass = d < oracles::KS_LIMIT;
            Check::new(name.clone(), pass, format!("{name} {d:.4}"))
        })
        .collect();
    Criterion { number: 7, title: "conditional updates vs direct formulas (KS < 0.02)", checks }
}

fn geweke() -> Criterion {
    let checks = oracles::geweke(GEWEKE_ROUNDS, 77)
        .into_iter()
        .map(|r| {
            let z = r.z();
            Check::new(r.name, z.abs() < GEWEKE_Z, format!("{} z={z:+.2}", r.name))
        })
        .collect();
    Criterion { number: 8, title: "joint-distribution test (|z| < 3)", checks }
}

fn relabeling() -> Criterion {
    let mut checks = Vec::new();
    for (clusters, seed) in [(2, 11), (3, 12), (4, 13), (7, 14)] {
        let r = oracles::permutation_recovery(200, 40, clusters, seed);
        checks.push(Check::new(
            format!("recovery G={clusters}"),
            r.aligned && r.monotone,
            format!("G={clusters} aligned={} monotone={} sweeps={}", r.aligned, r.monotone, r.sweeps),
        ));
    }
    let mismatches = oracles::assignment_mismatches(4, 1000, 5);
    checks.push(Check::new(
        "4x4 solver",
        mismatches == 0,
        format!("4x4 brute-force mismatches {mismatches}/1000"),
    ));
    Criterion { number: 9, title: "relabeling", checks }
}

fn ari_oracle() -> Criterion {
    let r = oracles::ari_checks(50, 1000, 8);
    let checks = vec![
        Check::new(
            "oracle gap",
            r.worst_oracle_gap < ARI_ORACLE_TOL,
            format!("worst gap {:.1e} over 50 pairs", r.worst_oracle_gap),
        ),
        Check::new("symmetry", r.asymmetric == 0, format!("asymmetric {}/1000", r.asymmetric)),
        Check::new("label invariance", r.label_variant == 0, format!("label-variant {}/1000", r.label_variant)),
    ];
    Criterion { number: 10, title: "adjusted Rand index", checks }
}

fn replicate_cli(out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_mixsel"))
        .args(["replicate", "--scenario", "sim1b", "--reps", "3", "--base-seed", "5"])
        .args(["--iters", "300", "--burnin", "100", "--censor", "x3", "--prop", "0.2"])
        .arg("--out")
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("cannot run mixsel");
    assert!(status.success(), "mixsel replicate failed: {status}");
    std::fs::read(out.join("summary.csv")).expect("summary.csv missing")
}

fn determinism() -> Criterion {
    let dir = tempfile::tempdir().unwrap();
    let a = replicate_cli(&dir.path().join("a"));
    let b = replicate_cli(&dir.path().join("b"));
    let checks = vec![Check::new(
        "summary bytes",
        a == b && !a.is_empty(),
        format!("summary.csv {} vs {} bytes, identical={}", a.len(), b.len(), a == b),
    )];
    Criterion { number: 11, title: "replicate determinism", checks }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut criteria = simulation_criteria();
    criteria.push(conjugacy());
    criteria.push(geweke());
    criteria.push(relabeling());
    criteria.push(ari_oracle());
    criteria.push(determinism());

    let mut unexpected = 0;
    println!();
    for c in &criteria {
        let failed: Vec<&Check> = c.checks.iter().filter(|k| !k.pass).collect();
        let known = !failed.is_empty() && failed.iter().all(|k| KNOWN.contains(&k.name.as_str()));
        if !failed.is_empty() && !known {
            unexpected += 1;
        }
        let verdict = match (failed.is_empty(), known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        let detail: Vec<&str> = c.checks.iter().map(|k| k.detail.as_str()).collect();
        println!("criterion {:2} {verdict:12} {}: {}", c.number, c.title, detail.join("; "));
    }
    println!(
        "\n{} criteria, {unexpected} unexpected failure(s), {:.0}s",
        criteria.len(),
        start.elapsed().as_secs_f64()
    );
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
