//! Gibbs sampler for the spike-and-slab mixture model.
//!
//! Continuous variable `m` in cluster `g` is Normal(A1[m] + mu[m][g], 1/gamma[m])
//! with `mu[m][0] = 0`; categorical variable `m` in cluster `g` is
//! Multinomial(theta[m][g]). Spike-and-slab indicators `delta` decide, per
//! variable and cluster, whether the cluster differs from the reference
//! (continuous) or from the marginal level distribution (categorical).
//!
//! Cluster indices are 0-based throughout the library; files use 1-based labels.

mod config;
mod updates;

pub use config::RunConfig;
pub use updates::{
    draw_a1, draw_delta_categorical, draw_delta_continuous, draw_gamma, draw_mu, draw_p1, draw_p2,
    draw_sigma2_delta0, draw_tau, draw_theta, impute_censored, impute_column, log_membership_weights,
    update_assignments, update_categorical, update_continuous, update_importance, update_sigma_delta0,
    ClusterStats,
};

use crate::data::Dataset;
use crate::distributions::{clamp_simplex, Rng};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Fixed prior constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyperparameters {
    /// Dirichlet prior on the mixing proportions, one entry per cluster.
    pub delta: Vec<f64>,
    pub mu_a: f64,
    pub sigma2_a: f64,
    pub a_delta0: f64,
    pub b_delta0: f64,
    /// Slab variance for the cluster mean differences.
    pub sigma2_delta1: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    /// Slab Dirichlet concentration, replicated over every level.
    pub alpha_slab: f64,
    /// Spike Dirichlet concentrations, one vector per categorical variable.
    pub alpha_spike: Vec<Vec<f64>>,
    pub a_p1: f64,
    pub b_p1: f64,
    pub a_p2: f64,
    pub b_p2: f64,
}

impl Hyperparameters {
    /// The simulation-study defaults for `clusters` clusters and the levels of `ds`.
    pub fn defaults(clusters: usize, ds: &Dataset) -> Self {
        Hyperparameters {
            delta: vec![1.0 / clusters as f64; clusters],
            mu_a: 0.0,
            sigma2_a: 100.0,
            a_delta0: 2.0,
            b_delta0: 1e-4,
            sigma2_delta1: 1000.0,
            a_tilde: 2.0,
            b_tilde: 1.0,
            alpha_slab: 1.0,
            alpha_spike: (0..ds.m() - ds.q()).map(|k| vec![10.0; ds.n_levels(k)]).collect(),
            a_p1: 1.0,
            b_p1: 2.0,
            a_p2: 1.0,
            b_p2: 2.0,
        }
    }

    pub fn clusters(&self) -> usize {
        self.delta.len()
    }

    /// Slab concentration vector for a variable with `levels` levels.
    pub fn slab_alphas(&self, levels: usize) -> Vec<f64> {
        vec![self.alpha_slab; levels]
    }

    /// Check shapes and signs against `ds`. Returns soft warnings.
    pub fn validate(&self, ds: &Dataset) -> Result<Vec<String>> {
        let positive = [
            ("sigma2_a", self.sigma2_a),
            ("a_delta0", self.a_delta0),
            ("b_delta0", self.b_delta0),
            ("sigma2_delta1", self.sigma2_delta1),
            ("a_tilde", self.a_tilde),
            ("b_tilde", self.b_tilde),
            ("alpha_slab", self.alpha_slab),
            ("a_p1", self.a_p1),
            ("b_p1", self.b_p1),
            ("a_p2", self.a_p2),
            ("b_p2", self.b_p2),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.mu_a.is_finite() {
            return Err(Error::Config("mu_a must be finite".into()));
        }
        if self.delta.len() < 2 || self.delta.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Config(format!("delta must hold >= 2 positive entries, got {:?}", self.delta)));
        }
        let n_cat = ds.m() - ds.q();
        if self.alpha_spike.len() != n_cat {
            return Err(Error::Config(format!(
                "alpha_spike has {} entries for {n_cat} categorical variables",
                self.alpha_spike.len()
            )));
        }
        for (k, a) in self.alpha_spike.iter().enumerate() {
            let col = ds.categorical_schema(k);
            if a.len() != col.levels.len() {
                return Err(Error::Config(format!(
                    "alpha_spike for `{}` has {} entries but the variable has {} levels",
                    col.name,
                    a.len(),
                    col.levels.len()
                )));
            }
            if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Config(format!("alpha_spike for `{}` must be positive", col.name)));
            }
        }
        let mut warnings = Vec::new();
        if self.a_delta0 > 1.0 {
            let spike_mean = self.b_delta0 / (self.a_delta0 - 1.0);
            if self.sigma2_delta1 < 100.0 * spike_mean {
                warnings.push(format!(
                    "sigma2_delta1 = {} is less than 100x the prior mean spike variance {spike_mean}",
                    self.sigma2_delta1
                ));
            }
        } else {
            warnings.push("a_delta0 <= 1: the spike variance prior has no mean".to_string());
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub clusters: usize,
    /// Run per-variable updates on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 4000,
            burn_in: 2000,
            thin: 1,
            seed: 1,
            clusters: 3,
            parallel: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be below the iteration count ({})",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.clusters < 2 {
            return Err(Error::Config("at least two clusters are required".into()));
        }
        Ok(())
    }

    /// Number of retained draws, ⌈(T − B) / k⌉.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Parameters of one continuous variable.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousParams {
    /// Reference-cluster mean A1.
    pub a1: f64,
    /// Mean differences from the reference cluster; `mu[0]` is always 0.
    pub mu: Vec<f64>,
    /// Precision 1/σ².
    pub gamma: f64,
    /// Slab indicators; `delta[0]` is structurally false.
    pub delta: Vec<bool>,
    pub p1: f64,
}

impl ContinuousParams {
    pub fn mean(&self, g: usize) -> f64 {
        self.a1 + self.mu[g]
    }

    pub fn sd(&self) -> f64 {
        self.gamma.recip().sqrt()
    }
}

/// Parameters of one categorical variable.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalParams {
    /// Level probabilities per cluster (G × L).
    pub theta: Vec<Vec<f64>>,
    pub delta: Vec<bool>,
    pub p2: f64,
}

/// Every model parameter except the latent memberships.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameters {
    pub tau: Vec<f64>,
    pub sigma2_delta0: f64,
    pub continuous: Vec<ContinuousParams>,
    pub categorical: Vec<CategoricalParams>,
}

impl Parameters {
    pub fn clusters(&self) -> usize {
        self.tau.len()
    }

    /// Indicator matrix, continuous variables first (M × G).
    pub fn delta_matrix(&self) -> Vec<Vec<bool>> {
        self.continuous
            .iter()
            .map(|c| c.delta.clone())
            .chain(self.categorical.iter().map(|c| c.delta.clone()))
            .collect()
    }

    /// Mixture log-likelihood Σᵢ log Σ_g τ_g f(xᵢ | g) of fully observed data.
    pub fn mixture_log_likelihood(&self, ds: &Dataset) -> f64 {
        let g_count = self.clusters();
        let mut lw = vec![0.0; g_count];
        let mut total = 0.0;
        for i in 0..ds.n() {
            for (g, w) in lw.iter_mut().enumerate() {
                *w = self.tau[g].ln();
                for (j, c) in self.continuous.iter().enumerate() {
                    *w += crate::distributions::normal_log_pdf_unchecked(ds.continuous_column(j)[i], c.mean(g), c.sd());
                }
                for (k, c) in self.categorical.iter().enumerate() {
                    *w += c.theta[g][ds.categorical_column(k)[i]].ln();
                }
            }
            total += lw.iter().copied().fold(f64::NEG_INFINITY, crate::distributions::log_add_exp);
        }
        total
    }
}

/// Full Gibbs state for one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub params: Parameters,
    /// Cluster of each subject (the one-hot row of Z).
    pub z: Vec<usize>,
    /// Working copy of the continuous columns; censored cells hold their current imputations.
    pub values: Vec<Vec<f64>>,
    /// Membership probabilities from the latest assignment update.
    pub membership: Matrix,
}

impl ChainState {
    pub fn clusters(&self) -> usize {
        self.params.clusters()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.clusters()];
        for &g in &self.z {
            counts[g] += 1;
        }
        counts
    }

    /// Z as an n × G one-hot matrix.
    pub fn z_one_hot(&self) -> Vec<Vec<u8>> {
        self.z
            .iter()
            .map(|&g| (0..self.clusters()).map(|h| u8::from(h == g)).collect())
            .collect()
    }

    /// Reset the working columns to the values stored in `ds` (censored cells at their limits).
    pub fn load_values(&mut self, ds: &Dataset) {
        self.values = (0..ds.q()).map(|j| ds.continuous_column(j).to_vec()).collect();
    }
}

/// Per-variable random streams. A variable's updates always consume its own
/// stream, so sequential and parallel schedules give identical chains.
#[derive(Clone, Debug)]
pub struct Streams {
    pub global: Rng,
    pub continuous: Vec<Rng>,
    pub categorical: Vec<Rng>,
}

impl Streams {
    pub fn new(seed: u64, continuous: usize, categorical: usize) -> Self {
        Streams {
            global: Rng::with_stream(seed, 0),
            continuous: (0..continuous).map(|j| Rng::with_stream(seed, 1 + j as u64)).collect(),
            categorical: (0..categorical)
                .map(|k| Rng::with_stream(seed, 1 + (continuous + k) as u64))
                .collect(),
        }
    }
}

/// Retained post-burn-in draws.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutput {
    /// Membership probabilities P⁽ᵗ⁾ recorded at each retained iteration (n × G).
    pub membership: Vec<Matrix>,
    pub params: Vec<Parameters>,
}

impl ChainOutput {
    pub fn retained(&self) -> usize {
        self.params.len()
    }

    pub fn clusters(&self) -> usize {
        self.params.first().map_or(0, Parameters::clusters)
    }

    /// Δ draws, R × M × G.
    pub fn delta_draws(&self) -> Vec<Vec<Vec<bool>>> {
        self.params.iter().map(Parameters::delta_matrix).collect()
    }
}

/// Starting state: random memberships, uniform proportions, observed moments.
pub fn init_state(ds: &Dataset, hp: &Hyperparameters, cfg: &McmcConfig, rng: &mut Rng) -> Result<ChainState> {
    let g_count = cfg.clusters;
    if hp.clusters() != g_count {
        return Err(Error::Config(format!(
            "delta has {} entries but {} clusters were requested",
            hp.clusters(),
            g_count
        )));
    }
    if ds.n() == 0 {
        return Err(Error::Initialization("dataset has no rows".into()));
    }
    let z: Vec<usize> = (0..ds.n())
        .map(|_| ((rng.uniform() * g_count as f64) as usize).min(g_count - 1))
        .collect();

    let mut continuous = Vec::with_capacity(ds.q());
    let mut values = Vec::with_capacity(ds.q());
    for j in 0..ds.q() {
        let col = ds.continuous_schema(j);
        let flags = ds.censor_flags(j);
        let data = ds.continuous_column(j);
        let observed: Vec<f64> = data
            .iter()
            .zip(flags)
            .filter(|(_, f)| !f.is_censored())
            .map(|(&x, _)| x)
            .collect();
        if observed.is_empty() {
            return Err(Error::Initialization(format!("column `{}` has no observed values", col.name)));
        }
        let (mean, var) = crate::data::observed_moments(&observed);
        if var == 0.0 {
            return Err(Error::Initialization(format!("column `{}` has zero variance", col.name)));
        }
        let var = var.max(1e-6);
        let sd = var.sqrt();
        let working = data
            .iter()
            .zip(flags)
            .map(|(&x, f)| match f {
                crate::data::CensorFlag::Observed => x,
                crate::data::CensorFlag::BelowLower => x - 0.5 * sd,
                crate::data::CensorFlag::AboveUpper => x + 0.5 * sd,
            })
            .collect();
        values.push(working);
        let mut delta = vec![true; g_count];
        delta[0] = false;
        continuous.push(ContinuousParams {
            a1: mean,
            mu: vec![0.0; g_count],
            gamma: 1.0 / var,
            delta,
            p1: 0.5,
        });
    }

    let categorical = (0..ds.m() - ds.q())
        .map(|k| {
            let mut freq = vec![0.0; ds.n_levels(k)];
            for &l in ds.categorical_column(k) {
                freq[l] += 1.0;
            }
            let n = ds.n() as f64;
            freq.iter_mut().for_each(|f| *f /= n);
            clamp_simplex(&mut freq);
            CategoricalParams {
                theta: vec![freq; g_count],
                delta: vec![true; g_count],
                p2: 0.5,
            }
        })
        .collect();

    Ok(ChainState {
        params: Parameters {
            tau: vec![1.0 / g_count as f64; g_count],
            sigma2_delta0: hp.b_delta0 / (hp.a_delta0 + 1.0),
            continuous,
            categorical,
        },
        z,
        values,
        membership: Matrix::filled(ds.n(), g_count, 1.0 / g_count as f64),
    })
}

/// One full Gibbs sweep in the fixed update order.
pub fn gibbs_step(
    state: &mut ChainState,
    ds: &Dataset,
    hp: &Hyperparameters,
    streams: &mut Streams,
    parallel: bool,
) -> Result<()> {
    impute_censored(state, ds, streams, parallel)?;
    update_continuous(state, hp, streams, parallel)?;
    update_categorical(state, ds, hp, streams, parallel)?;
    update_importance(state, hp, streams, parallel)?;
    update_sigma_delta0(state, hp, &mut streams.global)?;
    update_assignments(state, ds, hp, &mut streams.global)
}

/// Run a full chain and keep every `thin`-th post-burn-in draw.
pub fn run_chain(ds: &Dataset, hp: &Hyperparameters, cfg: &McmcConfig) -> Result<ChainOutput> {
    cfg.validate()?;
    hp.validate(ds)?;
    let mut streams = Streams::new(cfg.seed, ds.q(), ds.m() - ds.q());
    let mut state = init_state(ds, hp, cfg, &mut streams.global)?;
    let retained = cfg.retained();
    let mut out = ChainOutput {
        membership: Vec::with_capacity(retained),
        params: Vec::with_capacity(retained),
    };
    for t in 0..cfg.iterations {
        gibbs_step(&mut state, ds, hp, &mut streams, cfg.parallel).map_err(|e| Error::Iteration {
            iteration: t + 1,
            source: Box::new(e),
        })?;
        if t >= cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            out.membership.push(state.membership.clone());
            out.params.push(state.params.clone());
        }
    }
    Ok(out)
}
