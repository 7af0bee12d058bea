//! Posterior summaries of relabeled draws and the adjusted Rand index.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::relabel::{mean_membership, PermutationTable};
use crate::sampler::ChainOutput;

/// Posterior means of the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimates {
    pub tau: Vec<f64>,
    pub sigma2_delta0: f64,
    /// One entry per continuous variable.
    pub a1: Vec<f64>,
    /// Per continuous variable, G mean differences (the first is 0).
    pub mu: Vec<Vec<f64>>,
    pub gamma: Vec<f64>,
    pub p1: Vec<f64>,
    /// Per categorical variable, G × L level probabilities.
    pub theta: Vec<Vec<Vec<f64>>>,
    pub p2: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSummary {
    /// 0-based cluster of each subject (row argmax of `membership`).
    pub assignments: Vec<usize>,
    /// Mean membership probabilities p̄ (n × G).
    pub membership: Matrix,
    /// p(Δₘ = 1), continuous variables first.
    pub weights: Vec<f64>,
    pub estimates: Estimates,
}

/// Weight of each variable from indicator draws (R × M × G).
///
/// A draw counts as important when any cluster's indicator is set; for the
/// first `continuous` variables the reference cluster is skipped.
pub fn variable_weights(delta_draws: &[Vec<Vec<bool>>], continuous: usize) -> Vec<f64> {
    let Some(first) = delta_draws.first() else {
        return Vec::new();
    };
    let mut hits = vec![0usize; first.len()];
    for draw in delta_draws {
        for (m, d) in draw.iter().enumerate() {
            let start = usize::from(m < continuous);
            if d[start..].iter().any(|&x| x) {
                hits[m] += 1;
            }
        }
    }
    let r = delta_draws.len() as f64;
    hits.into_iter().map(|h| h as f64 / r).collect()
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (g, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = g;
        }
    }
    best
}

/// Running mean; exact when every term is equal.
fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    xs.enumerate().fold(0.0, |m, (t, x)| m + (x - m) / (t + 1) as f64)
}

pub fn summarize_chain(relabeled: &ChainOutput) -> Result<PosteriorSummary> {
    let Some(first) = relabeled.params.first() else {
        return Err(Error::invalid("no retained draws to summarize"));
    };
    if relabeled.membership.len() != relabeled.retained() {
        return Err(Error::invalid("membership and parameter draws differ in length"));
    }
    let draws = &relabeled.params;
    let g_count = first.clusters();

    let identity = PermutationTable::identity(relabeled.retained(), g_count);
    let membership = mean_membership(&relabeled.membership, &identity);
    let assignments = (0..membership.rows()).map(|i| argmax(membership.row(i))).collect();

    let q = first.continuous.len();
    let estimates = Estimates {
        tau: (0..g_count).map(|g| mean_of(draws.iter().map(|p| p.tau[g]))).collect(),
        sigma2_delta0: mean_of(draws.iter().map(|p| p.sigma2_delta0)),
        a1: (0..q).map(|j| mean_of(draws.iter().map(|p| p.continuous[j].a1))).collect(),
        mu: (0..q)
            .map(|j| (0..g_count).map(|g| mean_of(draws.iter().map(|p| p.continuous[j].mu[g]))).collect())
            .collect(),
        gamma: (0..q).map(|j| mean_of(draws.iter().map(|p| p.continuous[j].gamma))).collect(),
        p1: (0..q).map(|j| mean_of(draws.iter().map(|p| p.continuous[j].p1))).collect(),
        theta: first
            .categorical
            .iter()
            .enumerate()
            .map(|(k, c)| {
                (0..g_count)
                    .map(|g| {
                        (0..c.theta[g].len())
                            .map(|l| mean_of(draws.iter().map(|p| p.categorical[k].theta[g][l])))
                            .collect()
                    })
                    .collect()
            })
            .collect(),
        p2: (0..first.categorical.len())
            .map(|k| mean_of(draws.iter().map(|p| p.categorical[k].p2)))
            .collect(),
    };

    Ok(PosteriorSummary {
        assignments,
        membership,
        weights: variable_weights(&relabeled.delta_draws(), q),
        estimates,
    })
}

fn choose2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same subjects.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::invalid("the adjusted Rand index needs at least two subjects"));
    }
    let mut table: BTreeMap<(&A, &B), usize> = BTreeMap::new();
    let mut rows: BTreeMap<&A, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&B, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(a.len());
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // Both partitions are all-singletons or both a single cluster.
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

/// `subject_id,cluster,p_1..p_G` with 1-based ids and clusters.
pub fn assignments_csv(summary: &PosteriorSummary) -> String {
    let g_count = summary.membership.cols();
    let mut s = String::from("subject_id,cluster");
    for g in 1..=g_count {
        let _ = write!(s, ",p_{g}");
    }
    s.push('\n');
    for (i, &a) in summary.assignments.iter().enumerate() {
        let _ = write!(s, "{},{}", i + 1, a + 1);
        for &p in summary.membership.row(i) {
            let _ = write!(s, ",{p}");
        }
        s.push('\n');
    }
    s
}

pub fn weights_csv(summary: &PosteriorSummary, ds: &Dataset) -> String {
    let mut s = String::from("variable,weight\n");
    for (col, w) in ds.columns().iter().zip(&summary.weights) {
        let _ = writeln!(s, "{},{w}", col.name);
    }
    s
}

/// `parameter,cluster,value`; the cluster field is empty for cluster-free parameters.
pub fn estimates_csv(summary: &PosteriorSummary, ds: &Dataset) -> String {
    let e = &summary.estimates;
    let mut s = String::from("parameter,cluster,value\n");
    for (g, t) in e.tau.iter().enumerate() {
        let _ = writeln!(s, "tau,{},{t}", g + 1);
    }
    let _ = writeln!(s, "sigma2_delta0,,{}", e.sigma2_delta0);
    for j in 0..e.a1.len() {
        let name = &ds.continuous_schema(j).name;
        let _ = writeln!(s, "A1:{name},,{}", e.a1[j]);
        for (g, m) in e.mu[j].iter().enumerate() {
            let _ = writeln!(s, "mu:{name},{},{m}", g + 1);
        }
        let _ = writeln!(s, "gamma:{name},,{}", e.gamma[j]);
        let _ = writeln!(s, "p1:{name},,{}", e.p1[j]);
    }
    for (k, theta) in e.theta.iter().enumerate() {
        let col = ds.categorical_schema(k);
        for (g, row) in theta.iter().enumerate() {
            for (level, p) in col.levels.iter().zip(row) {
                let _ = writeln!(s, "theta:{}={level},{},{p}", col.name, g + 1);
            }
        }
        let _ = writeln!(s, "p2:{},,{}", col.name, e.p2[k]);
    }
    s
}
