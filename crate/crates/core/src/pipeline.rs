//! Whole-procedure runs: fit one dataset, or replicate a scenario many times.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::relabel::{apply_relabeling, run_relabel, RelabelOutcome};
use crate::sampler::{run_chain, ChainOutput, Hyperparameters, McmcConfig, RunConfig};
use crate::simulate::{apply_censoring, generate, naive_fill, CensorSpec, ScenarioSpec};
use crate::summary::{adjusted_rand_index, summarize_chain, PosteriorSummary};

#[derive(Clone, Debug)]
pub struct FitOutput {
    /// Relabeled retained draws.
    pub draws: ChainOutput,
    pub relabel: RelabelOutcome,
    pub summary: PosteriorSummary,
}

/// Sample, relabel and summarize.
pub fn fit(ds: &Dataset, hp: &Hyperparameters, mcmc: &McmcConfig) -> Result<FitOutput> {
    let raw = run_chain(ds, hp, mcmc)?;
    let relabel = run_relabel(&raw.membership)?;
    let draws = apply_relabeling(&raw, &relabel.table)?;
    drop(raw);
    let summary = summarize_chain(&draws)?;
    Ok(FitOutput { draws, relabel, summary })
}

#[derive(Clone, Debug)]
pub struct ReplicateSpec {
    pub scenario: ScenarioSpec,
    pub reps: usize,
    pub base_seed: u64,
    pub censor: Option<CensorSpec>,
    /// Fill censored cells with half their limit instead of imputing them.
    pub naive: bool,
    pub config: RunConfig,
    /// Worker threads; 0 uses the rayon default.
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub ari: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateReport {
    pub variables: Vec<String>,
    pub results: Vec<ReplicateResult>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// (median, 2.5th percentile, 97.5th percentile).
pub fn interval(values: &[f64]) -> (f64, f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    (quantile(&sorted, 0.5), quantile(&sorted, 0.025), quantile(&sorted, 0.975))
}

impl ReplicateReport {
    pub fn ari(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.ari).collect()
    }

    pub fn weights_of(&self, m: usize) -> Vec<f64> {
        self.results.iter().map(|r| r.weights[m]).collect()
    }

    pub fn median_ari(&self) -> f64 {
        interval(&self.ari()).0
    }

    pub fn median_weight(&self, name: &str) -> Option<f64> {
        let m = self.variables.iter().position(|v| v == name)?;
        Some(interval(&self.weights_of(m)).0)
    }

    /// `metric,median,p2.5,p97.5` rows for the ARI and every variable weight.
    pub fn table(&self) -> String {
        let mut s = String::from("metric,median,p2.5,p97.5\n");
        let mut row = |name: &str, values: &[f64]| {
            let (med, lo, hi) = interval(values);
            let _ = writeln!(s, "{name},{med:.6},{lo:.6},{hi:.6}");
        };
        row("ARI", &self.ari());
        for (m, v) in self.variables.iter().enumerate() {
            row(&format!("weight:{v}"), &self.weights_of(m));
        }
        s
    }

    /// One row per replicate.
    pub fn detail(&self) -> String {
        let mut s = String::from("replicate,seed,ari");
        for v in &self.variables {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
        for r in &self.results {
            let _ = write!(s, "{},{},{}", r.index + 1, r.seed, r.ari);
            for w in &r.weights {
                let _ = write!(s, ",{w}");
            }
            s.push('\n');
        }
        s
    }
}

/// Generate, optionally censor, fit and score one replicate.
pub fn run_replicate(spec: &ReplicateSpec, index: usize) -> Result<ReplicateResult> {
    let seed = spec.base_seed.wrapping_add(index as u64);
    let (mut ds, truth) = generate(&spec.scenario, seed)?;
    if let Some(cs) = &spec.censor {
        ds = apply_censoring(&ds, cs)?;
    }
    if spec.naive {
        ds = naive_fill(&ds)?;
    }
    let hp = spec.config.hyperparameters(&ds)?;
    let mcmc = McmcConfig {
        seed,
        ..spec.config.mcmc.clone()
    };
    let out = fit(&ds, &hp, &mcmc)?;
    let ari = adjusted_rand_index(&out.summary.assignments, &truth.labels)?;
    Ok(ReplicateResult {
        index,
        seed,
        ari,
        weights: out.summary.weights,
    })
}

/// Run every replicate on a worker pool. Results come back in replicate order.
pub fn replicate(spec: &ReplicateSpec) -> Result<ReplicateReport> {
    if spec.reps == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| {
        (0..spec.reps)
            .into_par_iter()
            .map(|r| {
                run_replicate(spec, r).map_err(|e| Error::Replicate {
                    replicate: r + 1,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ReplicateReport {
        variables: spec.scenario.variables.iter().map(|(n, _)| n.clone()).collect(),
        results,
    })
}
