//! Full-conditional updates.
//!
//! The `draw_*` functions sample a single parameter block from its full
//! conditional and return the draw without touching the state; the
//! `update_*` sweeps apply them across variables in the fixed order used by
//! [`super::gibbs_step`].

use rayon::prelude::*;

use super::{CategoricalParams, ChainState, ContinuousParams, Hyperparameters, Parameters, Streams};
use crate::data::{CensorFlag, Dataset};
use crate::distributions::{
    clamp_simplex, log_dirichlet_unchecked, normal_log_pdf_unchecked, sample_bernoulli_logit, sample_beta,
    sample_categorical, sample_dirichlet, sample_gamma, sample_inverse_gamma, sample_normal,
    sample_truncated_normal, softmax_into, Rng,
};
use crate::error::{Error, Result};

/// Per-cluster counts and sums of one continuous column.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterStats {
    pub counts: Vec<usize>,
    pub sums: Vec<f64>,
}

impl ClusterStats {
    pub fn new(values: &[f64], z: &[usize], clusters: usize) -> Self {
        let mut counts = vec![0; clusters];
        let mut sums = vec![0.0; clusters];
        for (&x, &g) in values.iter().zip(z) {
            counts[g] += 1;
            sums[g] += x;
        }
        ClusterStats { counts, sums }
    }

    pub fn n(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Apply `f` to each per-variable item, optionally on the rayon pool.
fn for_each_block<T, F>(items: Vec<T>, parallel: bool, f: F) -> Result<()>
where
    T: Send,
    F: Fn(usize, T) -> Result<()> + Sync + Send,
{
    if parallel {
        items.into_par_iter().enumerate().try_for_each(|(j, it)| f(j, it))
    } else {
        items.into_iter().enumerate().try_for_each(|(j, it)| f(j, it))
    }
}

/// Redraw the censored cells of continuous column `j` from the truncated
/// normal of each subject's current cluster.
pub fn impute_column(
    j: usize,
    params: &ContinuousParams,
    values: &mut [f64],
    ds: &Dataset,
    z: &[usize],
    rng: &mut Rng,
) -> Result<()> {
    let col = ds.continuous_schema(j);
    let sd = params.sd();
    for (i, &flag) in ds.censor_flags(j).iter().enumerate() {
        let bounds = match flag {
            CensorFlag::Observed => continue,
            CensorFlag::BelowLower => crate::distributions::TruncationBounds::below(
                col.lower_limit.expect("flag implies a lower limit"),
            ),
            CensorFlag::AboveUpper => crate::distributions::TruncationBounds::above(
                col.upper_limit.expect("flag implies an upper limit"),
            ),
        };
        values[i] = sample_truncated_normal(rng, params.mean(z[i]), sd, bounds)
            .map_err(|e| e.in_context(format!("censored cell (subject {}, variable `{}`)", i + 1, col.name)))?;
    }
    Ok(())
}

pub fn impute_censored(state: &mut ChainState, ds: &Dataset, streams: &mut Streams, parallel: bool) -> Result<()> {
    if !ds.has_censoring() {
        return Ok(());
    }
    let z = &state.z;
    let items: Vec<_> = state
        .params
        .continuous
        .iter()
        .zip(state.values.iter_mut())
        .zip(streams.continuous.iter_mut())
        .collect();
    for_each_block(items, parallel, |j, ((params, values), rng)| {
        impute_column(j, params, values, ds, z, rng)
    })
}

/// A1 given everything else.
pub fn draw_a1(
    params: &ContinuousParams,
    stats: &ClusterStats,
    hp: &Hyperparameters,
    rng: &mut Rng,
) -> Result<f64> {
    let n = stats.n() as f64;
    let sum_x: f64 = stats.sums.iter().sum();
    let sum_mu: f64 = stats.counts.iter().zip(&params.mu).map(|(&c, &m)| c as f64 * m).sum();
    let inv_gamma = 1.0 / params.gamma;
    let denom = n * hp.sigma2_a + inv_gamma;
    let mean = (hp.sigma2_a * (sum_x - sum_mu) + hp.mu_a * inv_gamma) / denom;
    let var = hp.sigma2_a * inv_gamma / denom;
    sample_normal(rng, mean, var.sqrt())
}

/// Mean difference of cluster `g` (g ≥ 1) under its current spike or slab prior.
pub fn draw_mu(
    params: &ContinuousParams,
    g: usize,
    stats: &ClusterStats,
    sigma2_delta0: f64,
    hp: &Hyperparameters,
    rng: &mut Rng,
) -> Result<f64> {
    let prior_var = if params.delta[g] { hp.sigma2_delta1 } else { sigma2_delta0 };
    let n_g = stats.counts[g] as f64;
    let inv_gamma = 1.0 / params.gamma;
    let denom = prior_var * n_g + inv_gamma;
    let mean = prior_var * (stats.sums[g] - n_g * params.a1) / denom;
    let var = prior_var * inv_gamma / denom;
    sample_normal(rng, mean, var.sqrt())
}

/// Precision γ = 1/σ² given the cluster means.
pub fn draw_gamma(
    params: &ContinuousParams,
    values: &[f64],
    z: &[usize],
    hp: &Hyperparameters,
    rng: &mut Rng,
) -> Result<f64> {
    let ss: f64 = values
        .iter()
        .zip(z)
        .map(|(&x, &g)| {
            let r = x - params.mean(g);
            r * r
        })
        .sum();
    sample_gamma(rng, hp.a_tilde + 0.5 * values.len() as f64, hp.b_tilde + 0.5 * ss)
}

fn update_continuous_variable(
    params: &mut ContinuousParams,
    values: &[f64],
    z: &[usize],
    sigma2_delta0: f64,
    hp: &Hyperparameters,
    rng: &mut Rng,
) -> Result<()> {
    let stats = ClusterStats::new(values, z, params.mu.len());
    params.a1 = draw_a1(params, &stats, hp, rng)?;
    for g in 1..params.mu.len() {
        params.mu[g] = draw_mu(params, g, &stats, sigma2_delta0, hp, rng)?;
    }
    params.gamma = draw_gamma(params, values, z, hp, rng)?;
    Ok(())
}

/// A1, μ and γ for every continuous variable, in that order within a variable.
pub fn update_continuous(
    state: &mut ChainState,
    hp: &Hyperparameters,
    streams: &mut Streams,
    parallel: bool,
) -> Result<()> {
    let z = &state.z;
    let sigma2_delta0 = state.params.sigma2_delta0;
    let items: Vec<_> = state
        .params
        .continuous
        .iter_mut()
        .zip(state.values.iter())
        .zip(streams.continuous.iter_mut())
        .collect();
    for_each_block(items, parallel, |_, ((params, values), rng)| {
        update_continuous_variable(params, values, z, sigma2_delta0, hp, rng)
    })
}

/// θ for one cluster: Dirichlet(prior + level counts).
pub fn draw_theta(prior: &[f64], level_counts: &[usize], rng: &mut Rng) -> Result<Vec<f64>> {
    let alphas: Vec<f64> = prior.iter().zip(level_counts).map(|(&a, &c)| a + c as f64).collect();
    sample_dirichlet(rng, &alphas)
}

fn level_counts(column: &[usize], z: &[usize], clusters: usize, levels: usize) -> Vec<Vec<usize>> {
    let mut counts = vec![vec![0; levels]; clusters];
    for (&l, &g) in column.iter().zip(z) {
        counts[g][l] += 1;
    }
    counts
}

pub fn update_categorical(
    state: &mut ChainState,
    ds: &Dataset,
    hp: &Hyperparameters,
    streams: &mut Streams,
    parallel: bool,
) -> Result<()> {
    let z = &state.z;
    let items: Vec<_> = state
        .params
        .categorical
        .iter_mut()
        .zip(streams.categorical.iter_mut())
        .collect();
    for_each_block(items, parallel, |k, (params, rng)| {
        let levels = ds.n_levels(k);
        let counts = level_counts(ds.categorical_column(k), z, params.theta.len(), levels);
        let slab = hp.slab_alphas(levels);
        for (g, theta) in params.theta.iter_mut().enumerate() {
            let prior = if params.delta[g] { &slab } else { &hp.alpha_spike[k] };
            *theta = draw_theta(prior, &counts[g], rng)?;
        }
        Ok(())
    })
}

/// Spike-or-slab indicator for μ[g] of a continuous variable.
pub fn draw_delta_continuous(
    params: &ContinuousParams,
    g: usize,
    sigma2_delta0: f64,
    hp: &Hyperparameters,
    rng: &mut Rng,
) -> Result<bool> {
    let mu = params.mu[g];
    let log_odds = params.p1.ln() - (-params.p1).ln_1p() + normal_log_pdf_unchecked(mu, 0.0, hp.sigma2_delta1.sqrt())
        - normal_log_pdf_unchecked(mu, 0.0, sigma2_delta0.sqrt());
    sample_bernoulli_logit(rng, log_odds)
}

/// Spike-or-slab indicator for θ of one cluster of a categorical variable.
pub fn draw_delta_categorical(
    theta: &[f64],
    p2: f64,
    slab: &[f64],
    spike: &[f64],
    rng: &mut Rng,
) -> Result<bool> {
    let mut t = theta.to_vec();
    clamp_simplex(&mut t);
    let log_odds = p2.ln() - (-p2).ln_1p() + log_dirichlet_unchecked(&t, slab) - log_dirichlet_unchecked(&t, spike);
    sample_bernoulli_logit(rng, log_odds)
}

/// p1 from the indicators of clusters 2..G.
pub fn draw_p1(delta: &[bool], hp: &Hyperparameters, rng: &mut Rng) -> Result<f64> {
    let on = delta[1..].iter().filter(|&&d| d).count() as f64;
    let off = (delta.len() - 1) as f64 - on;
    sample_beta(rng, hp.a_p1 + on, hp.b_p1 + off)
}

/// p2 from the indicators of all G clusters.
pub fn draw_p2(delta: &[bool], hp: &Hyperparameters, rng: &mut Rng) -> Result<f64> {
    let on = delta.iter().filter(|&&d| d).count() as f64;
    let off = delta.len() as f64 - on;
    sample_beta(rng, hp.a_p2 + on, hp.b_p2 + off)
}

/// Δ for every variable, then its p1 or p2.
pub fn update_importance(
    state: &mut ChainState,
    hp: &Hyperparameters,
    streams: &mut Streams,
    parallel: bool,
) -> Result<()> {
    let sigma2_delta0 = state.params.sigma2_delta0;
    let items: Vec<_> = state
        .params
        .continuous
        .iter_mut()
        .zip(streams.continuous.iter_mut())
        .collect();
    for_each_block(items, parallel, |_, (params, rng)| {
        for g in 1..params.mu.len() {
            params.delta[g] = draw_delta_continuous(params, g, sigma2_delta0, hp, rng)?;
        }
        params.p1 = draw_p1(&params.delta, hp, rng)?;
        Ok(())
    })?;

    let items: Vec<_> = state
        .params
        .categorical
        .iter_mut()
        .zip(streams.categorical.iter_mut())
        .collect();
    for_each_block(items, parallel, |k, (params, rng): (&mut CategoricalParams, &mut Rng)| {
        let spike = &hp.alpha_spike[k];
        let slab = hp.slab_alphas(spike.len());
        for g in 0..params.theta.len() {
            params.delta[g] = draw_delta_categorical(&params.theta[g], params.p2, &slab, spike, rng)?;
        }
        params.p2 = draw_p2(&params.delta, hp, rng)?;
        Ok(())
    })
}

/// Spike variance from the continuous mean differences currently in the spike.
pub fn draw_sigma2_delta0(params: &Parameters, hp: &Hyperparameters, rng: &mut Rng) -> Result<f64> {
    let mut off = 0.0;
    let mut ss = 0.0;
    for c in &params.continuous {
        for g in 1..c.mu.len() {
            if !c.delta[g] {
                off += 1.0;
                ss += c.mu[g] * c.mu[g];
            }
        }
    }
    sample_inverse_gamma(rng, hp.a_delta0 + 0.5 * off, hp.b_delta0 + 0.5 * ss)
}

pub fn update_sigma_delta0(state: &mut ChainState, hp: &Hyperparameters, rng: &mut Rng) -> Result<()> {
    state.params.sigma2_delta0 = draw_sigma2_delta0(&state.params, hp, rng)?;
    Ok(())
}

/// Mixing proportions given cluster counts.
pub fn draw_tau(counts: &[usize], hp: &Hyperparameters, rng: &mut Rng) -> Result<Vec<f64>> {
    let alphas: Vec<f64> = hp.delta.iter().zip(counts).map(|(&d, &c)| d + c as f64).collect();
    sample_dirichlet(rng, &alphas)
}

/// Per-cluster terms of the membership log-weights, cached for one sweep.
struct MembershipKernel {
    log_tau: Vec<f64>,
    /// [j][g] means and [j] sds of continuous variables.
    means: Vec<Vec<f64>>,
    sds: Vec<f64>,
    /// [k][g][l] log level probabilities.
    log_theta: Vec<Vec<Vec<f64>>>,
}

impl MembershipKernel {
    fn new(params: &Parameters) -> Self {
        let g_count = params.clusters();
        MembershipKernel {
            log_tau: params.tau.iter().map(|t| t.ln()).collect(),
            means: params
                .continuous
                .iter()
                .map(|c| (0..g_count).map(|g| c.mean(g)).collect())
                .collect(),
            sds: params.continuous.iter().map(ContinuousParams::sd).collect(),
            log_theta: params
                .categorical
                .iter()
                .map(|c| c.theta.iter().map(|t| t.iter().map(|p| p.ln()).collect()).collect())
                .collect(),
        }
    }

    fn term(&self, values: &[Vec<f64>], ds: &Dataset, i: usize, g: usize, var: usize) -> f64 {
        let q = self.sds.len();
        if var < q {
            normal_log_pdf_unchecked(values[var][i], self.means[var][g], self.sds[var])
        } else {
            let k = var - q;
            self.log_theta[k][g][ds.categorical_column(k)[i]]
        }
    }

    fn fill(&self, values: &[Vec<f64>], ds: &Dataset, i: usize, out: &mut [f64]) -> Result<()> {
        let n_vars = self.sds.len() + self.log_theta.len();
        for (g, w) in out.iter_mut().enumerate() {
            let mut acc = self.log_tau[g];
            for var in 0..n_vars {
                acc += self.term(values, ds, i, g, var);
            }
            *w = acc;
        }
        if out.iter().all(|w| w.is_finite()) {
            return Ok(());
        }
        let bad_var = (0..n_vars)
            .find(|&var| (0..out.len()).any(|g| !self.term(values, ds, i, g, var).is_finite()));
        Err(Error::Numerical {
            subject: i + 1,
            variable: bad_var.map_or_else(|| "tau".to_string(), |v| ds.columns()[v].name.clone()),
        })
    }
}

/// Unnormalized log membership weights log τ_g + Σₘ log f(x_im | g) of subject `i`.
pub fn log_membership_weights(state: &ChainState, ds: &Dataset, i: usize) -> Result<Vec<f64>> {
    let kernel = MembershipKernel::new(&state.params);
    let mut out = vec![0.0; state.clusters()];
    kernel.fill(&state.values, ds, i, &mut out)?;
    Ok(out)
}

/// Redraw every subject's cluster, then τ. The normalized membership
/// probabilities are kept in `state.membership`.
pub fn update_assignments(state: &mut ChainState, ds: &Dataset, hp: &Hyperparameters, rng: &mut Rng) -> Result<()> {
    let kernel = MembershipKernel::new(&state.params);
    let mut lw = vec![0.0; state.clusters()];
    for i in 0..ds.n() {
        kernel.fill(&state.values, ds, i, &mut lw)?;
        let row = state.membership.row_mut(i);
        softmax_into(&lw, row);
        state.z[i] = sample_categorical(rng, row)?;
    }
    state.params.tau = draw_tau(&state.counts(), hp, rng)?;
    Ok(())
}
