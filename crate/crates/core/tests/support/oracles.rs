//! Independent reference computations shared by integration and acceptance tests.
//!
//! Full conditionals are rebuilt here from textbook conjugate algebra
//! (precision-weighted normals, Gamma/Beta CDFs from `statrs`) rather than
//! from the library's own parameterization.

#![allow(dead_code)]

use mixsel_core::data::{CensorFlag, ColumnSchema, Dataset};
use mixsel_core::distributions::Rng;
use mixsel_core::matrix::Matrix;
use mixsel_core::sampler::{
    draw_a1, draw_delta_categorical, draw_delta_continuous, draw_gamma, draw_mu, draw_p1, draw_p2,
    draw_sigma2_delta0, draw_tau, draw_theta, gibbs_step, impute_column, update_assignments, CategoricalParams,
    ChainState, ClusterStats, ContinuousParams, Hyperparameters, Parameters, Streams,
};
use rand_distr::{Beta, Distribution, Gamma, Normal};
use statrs::distribution::{Beta as BetaDist, ContinuousCDF, Gamma as GammaDist, InverseGamma, Normal as NormalDist};
use statrs::function::gamma::ln_gamma;

pub const KS_DRAWS: usize = 10_000;
pub const KS_LIMIT: f64 = 0.02;

/// One-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Largest CDF gap between observed category frequencies and `probs`.
pub fn discrete_distance(draws: &[usize], probs: &[f64]) -> f64 {
    let n = draws.len() as f64;
    let mut emp = 0.0;
    let mut exact = 0.0;
    let mut worst: f64 = 0.0;
    for (l, p) in probs.iter().enumerate() {
        emp += draws.iter().filter(|&&d| d == l).count() as f64 / n;
        exact += p;
        worst = worst.max((emp - exact).abs());
    }
    worst
}

fn draws<T>(n: usize, mut f: impl FnMut() -> T) -> Vec<T> {
    (0..n).map(|_| f()).collect()
}

fn normal_cdf(mean: f64, sd: f64) -> impl Fn(f64) -> f64 {
    let d = NormalDist::new(mean, sd).unwrap();
    move |x| d.cdf(x)
}

fn beta_cdf(a: f64, b: f64) -> impl Fn(f64) -> f64 {
    let d = BetaDist::new(a, b).unwrap();
    move |x| d.cdf(x)
}

fn ln_dirichlet(x: &[f64], a: &[f64]) -> f64 {
    let total: f64 = a.iter().sum();
    ln_gamma(total) - a.iter().map(|&v| ln_gamma(v)).sum::<f64>()
        + x.iter().zip(a).map(|(&xi, &ai)| (ai - 1.0) * xi.ln()).sum::<f64>()
}

fn ln_normal(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// Frozen state used by the conditional checks: 2 continuous clusters worth
/// of data, G = 3 so that spike and slab entries coexist.
struct Frozen {
    hp: Hyperparameters,
    params: ContinuousParams,
    values: Vec<f64>,
    z: Vec<usize>,
}

fn frozen() -> Frozen {
    let z = vec![0, 0, 0, 1, 1, 2, 2, 2, 2, 1];
    let values = vec![0.3, -0.4, 1.1, 2.2, 2.9, -1.5, -0.7, -1.1, -2.0, 2.5];
    let hp = Hyperparameters {
        delta: vec![0.5, 0.7, 1.2],
        mu_a: 0.4,
        sigma2_a: 3.0,
        a_delta0: 2.0,
        b_delta0: 0.05,
        sigma2_delta1: 10.0,
        a_tilde: 2.0,
        b_tilde: 1.5,
        alpha_slab: 1.0,
        alpha_spike: vec![vec![4.0, 2.0, 6.0]],
        a_p1: 1.0,
        b_p1: 2.0,
        a_p2: 1.5,
        b_p2: 2.0,
    };
    let params = ContinuousParams {
        a1: 0.2,
        mu: vec![0.0, 2.3, -1.4],
        gamma: 1.7,
        delta: vec![false, true, false],
        p1: 0.35,
    };
    Frozen { hp, params, values, z }
}

/// KS (or CDF-gap) statistic of every conjugate update against its oracle.
pub fn conjugacy_checks(seed: u64) -> Vec<(String, f64)> {
    let f = frozen();
    let mut rng = Rng::new(seed);
    let mut out = Vec::new();
    let stats = ClusterStats::new(&f.values, &f.z, 3);
    let gamma = f.params.gamma;

    // A1: prior N(mu_a, sigma2_a), likelihood from residuals x - mu_z.
    let n = f.values.len() as f64;
    let resid: f64 = f.values.iter().zip(&f.z).map(|(&x, &g)| x - f.params.mu[g]).sum();
    let prec = n * gamma + 1.0 / f.hp.sigma2_a;
    let mean = (gamma * resid + f.hp.mu_a / f.hp.sigma2_a) / prec;
    let xs = draws(KS_DRAWS, || draw_a1(&f.params, &stats, &f.hp, &mut rng).unwrap());
    out.push(("A1".into(), ks_distance(xs, normal_cdf(mean, prec.recip().sqrt()))));

    // mu_g for a slab (g = 1) and a spike (g = 2) cluster.
    let s0: f64 = 0.08;
    for (g, prior_var) in [(1, f.hp.sigma2_delta1), (2, s0)] {
        let members: Vec<f64> = f.values.iter().zip(&f.z).filter(|(_, &c)| c == g).map(|(&x, _)| x - f.params.a1).collect();
        let prec = members.len() as f64 * gamma + 1.0 / prior_var;
        let mean = gamma * members.iter().sum::<f64>() / prec;
        let xs = draws(KS_DRAWS, || draw_mu(&f.params, g, &stats, s0, &f.hp, &mut rng).unwrap());
        out.push((format!("mu[{g}]"), ks_distance(xs, normal_cdf(mean, prec.recip().sqrt()))));
    }

    // gamma: Gamma(a + n/2, b + SS/2) in shape/rate form.
    let ss: f64 = f.values.iter().zip(&f.z).map(|(&x, &g)| (x - f.params.a1 - f.params.mu[g]).powi(2)).sum();
    let d = GammaDist::new(f.hp.a_tilde + n / 2.0, f.hp.b_tilde + ss / 2.0).unwrap();
    let xs = draws(KS_DRAWS, || draw_gamma(&f.params, &f.values, &f.z, &f.hp, &mut rng).unwrap());
    out.push(("gamma".into(), ks_distance(xs, |x| d.cdf(x))));

    // sigma2_delta0 over the spike entries of two continuous variables.
    let second = ContinuousParams {
        mu: vec![0.0, -0.03, 0.02],
        delta: vec![false, false, false],
        ..f.params.clone()
    };
    let params = Parameters {
        tau: vec![0.3, 0.3, 0.4],
        sigma2_delta0: s0,
        continuous: vec![f.params.clone(), second],
        categorical: vec![],
    };
    let spike_ss = 1.4f64.powi(2) + 0.03f64.powi(2) + 0.02f64.powi(2);
    let d = InverseGamma::new(f.hp.a_delta0 + 3.0 / 2.0, f.hp.b_delta0 + spike_ss / 2.0).unwrap();
    let xs = draws(KS_DRAWS, || draw_sigma2_delta0(&params, &f.hp, &mut rng).unwrap());
    out.push(("sigma2_delta0".into(), ks_distance(xs, |x| d.cdf(x))));

    // theta: each Dirichlet coordinate has a Beta marginal.
    let prior = [4.0, 2.0, 6.0];
    let counts = [3usize, 0, 5];
    let post: Vec<f64> = prior.iter().zip(&counts).map(|(&a, &c)| a + c as f64).collect();
    let total: f64 = post.iter().sum();
    let thetas = draws(KS_DRAWS, || draw_theta(&prior, &counts, &mut rng).unwrap());
    for (l, &a) in post.iter().enumerate() {
        let xs = thetas.iter().map(|t| t[l]).collect();
        out.push((format!("theta[{l}]"), ks_distance(xs, beta_cdf(a, total - a))));
    }

    // tau: Dirichlet(delta + counts) marginals.
    let counts = [4usize, 0, 7];
    let taus = draws(KS_DRAWS, || draw_tau(&counts, &f.hp, &mut rng).unwrap());
    let post: Vec<f64> = f.hp.delta.iter().zip(&counts).map(|(&a, &c)| a + c as f64).collect();
    let total: f64 = post.iter().sum();
    for (g, &a) in post.iter().enumerate() {
        let xs = taus.iter().map(|t| t[g]).collect();
        out.push((format!("tau[{g}]"), ks_distance(xs, beta_cdf(a, total - a))));
    }

    // p1 counts clusters 2..G only; p2 counts all clusters.
    let delta = [true, true, false];
    let xs = draws(KS_DRAWS, || draw_p1(&delta, &f.hp, &mut rng).unwrap());
    out.push(("p1".into(), ks_distance(xs, beta_cdf(f.hp.a_p1 + 1.0, f.hp.b_p1 + 1.0))));
    let xs = draws(KS_DRAWS, || draw_p2(&delta, &f.hp, &mut rng).unwrap());
    out.push(("p2".into(), ks_distance(xs, beta_cdf(f.hp.a_p2 + 2.0, f.hp.b_p2 + 1.0))));

    // Continuous indicator: slab vs spike normal densities at mu.
    let mut p = f.params.clone();
    p.mu[1] = 0.35;
    let s0: f64 = 0.1;
    let slab = p.p1 * ln_normal(0.35, f.hp.sigma2_delta1.sqrt()).exp();
    let spike = (1.0 - p.p1) * ln_normal(0.35, s0.sqrt()).exp();
    let prob = slab / (slab + spike);
    let xs = draws(KS_DRAWS, || usize::from(draw_delta_continuous(&p, 1, s0, &f.hp, &mut rng).unwrap()));
    out.push(("Delta (continuous)".into(), discrete_distance(&xs, &[1.0 - prob, prob])));

    // Categorical indicator: slab vs spike Dirichlet densities at theta.
    let theta = [0.3, 0.15, 0.55];
    let slab_a = [1.0, 1.0, 1.0];
    let spike_a = [4.0, 2.0, 6.0];
    let p2 = 0.4;
    let slab = p2 * ln_dirichlet(&theta, &slab_a).exp();
    let spike = (1.0 - p2) * ln_dirichlet(&theta, &spike_a).exp();
    let prob = slab / (slab + spike);
    let xs = draws(KS_DRAWS, || {
        usize::from(draw_delta_categorical(&theta, p2, &slab_a, &spike_a, &mut rng).unwrap())
    });
    out.push(("Delta (categorical)".into(), discrete_distance(&xs, &[1.0 - prob, prob])));

    // Cluster membership of one subject with a continuous and a categorical value.
    let ds = Dataset::new(
        vec![ColumnSchema::continuous("x"), ColumnSchema::categorical("c", ["a", "b"])],
        vec![vec![1.0, -1.0]],
        vec![vec![CensorFlag::Observed; 2]],
        vec![vec![1, 0]],
    )
    .unwrap();
    let theta = vec![vec![0.7, 0.3], vec![0.2, 0.8], vec![0.5, 0.5]];
    let state = ChainState {
        params: Parameters {
            tau: vec![0.2, 0.5, 0.3],
            sigma2_delta0: s0,
            continuous: vec![ContinuousParams {
                a1: 0.5,
                mu: vec![0.0, 1.0, -1.5],
                gamma: 2.0,
                delta: vec![false, true, true],
                p1: 0.5,
            }],
            categorical: vec![CategoricalParams {
                theta: theta.clone(),
                delta: vec![true; 3],
                p2: 0.5,
            }],
        },
        z: vec![0, 0],
        values: vec![vec![1.0, -1.0]],
        membership: Matrix::filled(2, 3, 1.0 / 3.0),
    };
    let sd = 2.0f64.sqrt().recip();
    let weights: Vec<f64> = (0..3)
        .map(|g| {
            let mean = 0.5 + [0.0, 1.0, -1.5][g];
            state.params.tau[g] * ln_normal(1.0 - mean, sd).exp() * theta[g][1]
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let hp = Hyperparameters {
        delta: vec![1.0; 3],
        alpha_spike: vec![vec![1.0, 1.0]],
        ..f.hp.clone()
    };
    let xs = draws(KS_DRAWS, || {
        let mut s = state.clone();
        update_assignments(&mut s, &ds, &hp, &mut rng).unwrap();
        s.z[0]
    });
    out.push(("Z".into(), discrete_distance(&xs, &probs)));

    // Imputation: normal truncated above at the lower limit.
    let limit = -0.6;
    let ds = Dataset::new(
        vec![ColumnSchema::continuous("x").with_limits(Some(limit), None)],
        vec![vec![limit, 1.0, 2.0]],
        vec![vec![CensorFlag::BelowLower, CensorFlag::Observed, CensorFlag::Observed]],
        vec![],
    )
    .unwrap();
    let params = ContinuousParams {
        a1: 0.1,
        mu: vec![0.0, 0.8],
        gamma: 1.5,
        delta: vec![false, true],
        p1: 0.5,
    };
    let z = [1, 0, 0];
    let (mean, sd) = (0.9, 1.5f64.sqrt().recip());
    let d = NormalDist::new(mean, sd).unwrap();
    let mass = d.cdf(limit);
    let xs = draws(KS_DRAWS, || {
        let mut values = vec![limit, 1.0, 2.0];
        impute_column(0, &params, &mut values, &ds, &z, &mut rng).unwrap();
        values[0]
    });
    out.push(("imputation".into(), ks_distance(xs, |x| (d.cdf(x) / mass).min(1.0))));
    out
}

/// Monte Carlo mean and standard error of one statistic.
#[derive(Clone, Copy, Debug)]
pub struct Moment {
    pub mean: f64,
    pub se: f64,
}

fn iid_moment(xs: &[f64]) -> Moment {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Moment { mean, se: (var / n).sqrt() }
}

/// Batch-means standard error for an autocorrelated chain.
fn batch_moment(xs: &[f64], batches: usize) -> Moment {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let overall = xs.iter().sum::<f64>() / xs.len() as f64;
    let spread = iid_moment(&means);
    Moment { mean: overall, se: spread.se }
}

pub struct GewekeRow {
    pub name: &'static str,
    pub forward: Moment,
    pub chain: Moment,
}

impl GewekeRow {
    /// Difference in units of the combined standard error.
    pub fn z(&self) -> f64 {
        (self.forward.mean - self.chain.mean) / (self.forward.se.powi(2) + self.chain.se.powi(2)).sqrt()
    }
}

pub const GEWEKE_N: usize = 20;
pub const GEWEKE_LEVELS: usize = 3;

pub fn geweke_hyperparameters() -> Hyperparameters {
    Hyperparameters {
        delta: vec![1.0, 1.0],
        mu_a: 0.0,
        sigma2_a: 1.0,
        a_delta0: 3.0,
        b_delta0: 0.2,
        sigma2_delta1: 1.0,
        a_tilde: 3.0,
        b_tilde: 2.0,
        alpha_slab: 1.0,
        alpha_spike: vec![vec![3.0, 2.0, 4.0]],
        a_p1: 1.0,
        b_p1: 1.0,
        a_p2: 1.0,
        b_p2: 1.0,
    }
}

fn schema() -> Vec<ColumnSchema> {
    vec![ColumnSchema::continuous("x"), ColumnSchema::categorical("c", ["a", "b", "c"])]
}

fn sample_dirichlet(rng: &mut Rng, a: &[f64]) -> Vec<f64> {
    let g: Vec<f64> = a.iter().map(|&ai| Gamma::new(ai, 1.0).unwrap().sample(rng)).collect();
    let total: f64 = g.iter().sum();
    g.iter().map(|x| x / total).collect()
}

fn sample_index(rng: &mut Rng, probs: &[f64]) -> usize {
    let u: f64 = rand_distr::Uniform::new(0.0, 1.0).unwrap().sample(rng);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Parameters and memberships drawn from the prior.
fn prior_draw(hp: &Hyperparameters, rng: &mut Rng) -> (Parameters, Vec<usize>) {
    let g_count = hp.delta.len();
    let tau = sample_dirichlet(rng, &hp.delta);
    let sigma2_delta0 = 1.0 / Gamma::new(hp.a_delta0, 1.0 / hp.b_delta0).unwrap().sample(rng);
    let p1 = Beta::new(hp.a_p1, hp.b_p1).unwrap().sample(rng);
    let p2 = Beta::new(hp.a_p2, hp.b_p2).unwrap().sample(rng);
    let mut delta = vec![false; g_count];
    let mut mu = vec![0.0; g_count];
    for g in 1..g_count {
        delta[g] = rand_distr::Bernoulli::new(p1).unwrap().sample(rng);
        let var = if delta[g] { hp.sigma2_delta1 } else { sigma2_delta0 };
        mu[g] = Normal::new(0.0, var.sqrt()).unwrap().sample(rng);
    }
    let continuous = ContinuousParams {
        a1: Normal::new(hp.mu_a, hp.sigma2_a.sqrt()).unwrap().sample(rng),
        mu,
        gamma: Gamma::new(hp.a_tilde, 1.0 / hp.b_tilde).unwrap().sample(rng),
        delta,
        p1,
    };
    let cat_delta: Vec<bool> = (0..g_count).map(|_| rand_distr::Bernoulli::new(p2).unwrap().sample(rng)).collect();
    let theta = cat_delta
        .iter()
        .map(|&d| {
            if d {
                sample_dirichlet(rng, &vec![hp.alpha_slab; GEWEKE_LEVELS])
            } else {
                sample_dirichlet(rng, &hp.alpha_spike[0])
            }
        })
        .collect();
    let z = (0..GEWEKE_N).map(|_| sample_index(rng, &tau)).collect();
    let params = Parameters {
        tau,
        sigma2_delta0,
        continuous: vec![continuous],
        categorical: vec![CategoricalParams {
            theta,
            delta: cat_delta,
            p2,
        }],
    };
    (params, z)
}

/// Data given parameters and memberships.
fn simulate_data(params: &Parameters, z: &[usize], rng: &mut Rng) -> Dataset {
    let c = &params.continuous[0];
    let x = z
        .iter()
        .map(|&g| Normal::new(c.a1 + c.mu[g], c.gamma.recip().sqrt()).unwrap().sample(rng))
        .collect();
    let cat = z.iter().map(|&g| sample_index(rng, &params.categorical[0].theta[g])).collect();
    Dataset::new(schema(), vec![x], vec![vec![CensorFlag::Observed; z.len()]], vec![cat]).unwrap()
}

fn statistics(p: &Parameters) -> [f64; 6] {
    let a1 = p.continuous[0].a1;
    let g = p.continuous[0].gamma;
    let t = p.tau[0];
    [a1, a1 * a1, g, g * g, t, t * t]
}

pub const GEWEKE_NAMES: [&str; 6] = ["A1", "A1^2", "gamma", "gamma^2", "tau1", "tau1^2"];

/// Marginal-conditional (forward) vs successive-conditional simulation.
pub fn geweke(rounds: usize, seed: u64) -> Vec<GewekeRow> {
    let hp = geweke_hyperparameters();
    let mut rng = Rng::with_stream(seed, 1000);

    let mut forward = vec![Vec::with_capacity(rounds); 6];
    for _ in 0..rounds {
        let (params, _) = prior_draw(&hp, &mut rng);
        for (acc, s) in forward.iter_mut().zip(statistics(&params)) {
            acc.push(s);
        }
    }

    let (params, z) = prior_draw(&hp, &mut rng);
    let mut ds = simulate_data(&params, &z, &mut rng);
    let mut state = ChainState {
        params,
        z,
        values: vec![ds.continuous_column(0).to_vec()],
        membership: Matrix::filled(GEWEKE_N, 2, 0.5),
    };
    let mut streams = Streams::new(seed, 1, 1);
    let mut chain = vec![Vec::with_capacity(rounds); 6];
    for _ in 0..rounds {
        gibbs_step(&mut state, &ds, &hp, &mut streams, false).unwrap();
        ds = simulate_data(&state.params, &state.z, &mut rng);
        state.load_values(&ds);
        for (acc, s) in chain.iter_mut().zip(statistics(&state.params)) {
            acc.push(s);
        }
    }

    GEWEKE_NAMES
        .iter()
        .zip(forward.iter().zip(&chain))
        .map(|(&name, (f, c))| GewekeRow {
            name,
            forward: iid_moment(f),
            chain: batch_moment(c, 50),
        })
        .collect()
}

fn random_permutation(rng: &mut Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = sample_index(rng, &vec![1.0 / (i + 1) as f64; i + 1]);
        p.swap(i, j);
    }
    p
}

/// Every permutation of 0..n in lexicographic order, by recursion.
fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for rest in all_permutations(n - 1) {
            let mut p = vec![first];
            p.extend(rest.into_iter().map(|x| if x >= first { x + 1 } else { x }));
            out.push(p);
        }
    }
    out
}

/// Number of random n × n cost matrices where the solver's total cost
/// differs from the brute-force minimum (or its choice is not the first optimum).
pub fn assignment_mismatches(n: usize, count: usize, seed: u64) -> usize {
    let mut rng = Rng::with_stream(seed, 2000);
    let perms = all_permutations(n);
    let mut bad = 0;
    for _ in 0..count {
        let cost: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rand_distr::Uniform::new(0.0, 10.0).unwrap().sample(&mut rng)).collect())
            .collect();
        let total = |p: &[usize]| p.iter().enumerate().map(|(g, &j)| cost[g][j]).sum::<f64>();
        let mut best = &perms[0];
        for p in &perms {
            if total(p) < total(best) {
                best = p;
            }
        }
        let got = mixsel_core::relabel::solve_assignment(&cost);
        if &got != best || (total(&got) - total(best)).abs() > 1e-12 {
            bad += 1;
        }
    }
    bad
}

pub struct RecoveryReport {
    /// Relabeled draws agree with the truth under one common permutation.
    pub aligned: bool,
    pub monotone: bool,
    pub sweeps: usize,
    pub objective: Vec<f64>,
}

/// Scramble well-separated membership draws with random label permutations
/// and check that relabeling undoes them.
pub fn permutation_recovery(draws: usize, subjects: usize, clusters: usize, seed: u64) -> RecoveryReport {
    let mut rng = Rng::with_stream(seed, 3000);
    let truth: Vec<usize> = (0..subjects).map(|i| i % clusters).collect();
    let mut scrambled = Vec::with_capacity(draws);
    let mut injected = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut p = Matrix::zeros(subjects, clusters);
        for (i, &c) in truth.iter().enumerate() {
            let noise: Vec<f64> = (0..clusters).map(|_| rand_distr::Uniform::new(0.0, 0.1).unwrap().sample(&mut rng)).collect();
            let total: f64 = noise.iter().sum::<f64>() + 0.9;
            for g in 0..clusters {
                p[(i, g)] = (noise[g] + if g == c { 0.9 } else { 0.0 }) / total;
            }
        }
        let perm = random_permutation(&mut rng, clusters);
        scrambled.push(p.permute_columns(&perm));
        injected.push(perm);
    }
    let outcome = mixsel_core::relabel::run_relabel(&scrambled).unwrap();
    // Final label g at draw t is true cluster injected[t][U_t[g]]; it must not depend on t.
    let global: Vec<usize> = (0..clusters).map(|g| injected[0][outcome.table.rows()[0][g]]).collect();
    let aligned = outcome
        .table
        .rows()
        .iter()
        .zip(&injected)
        .all(|(u, pi)| (0..clusters).all(|g| pi[u[g]] == global[g]));
    let monotone = outcome.objective.windows(2).all(|w| w[1] <= w[0] + 1e-9 * w[0].abs().max(1.0));
    RecoveryReport {
        aligned,
        monotone,
        sweeps: outcome.sweeps,
        objective: outcome.objective,
    }
}

/// Random small partition pair with labels in 0..k.
pub fn random_partitions(rng: &mut Rng, max_n: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    let n = 2 + sample_index(rng, &vec![1.0 / (max_n - 1) as f64; max_n - 1]);
    let w = vec![1.0 / k as f64; k];
    let a = (0..n).map(|_| sample_index(rng, &w)).collect();
    let b = (0..n).map(|_| sample_index(rng, &w)).collect();
    (a, b)
}

fn choose2(x: usize) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// ARI straight from the contingency-table definition with explicit loops.
pub fn ari_contingency(a: &[usize], b: &[usize]) -> f64 {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let index: f64 = table.iter().flatten().map(|&c| choose2(c)).sum();
    let rows: f64 = table.iter().map(|r| choose2(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let expected = rows * cols / choose2(a.len());
    let max = 0.5 * (rows + cols);
    if max == expected {
        1.0
    } else {
        (index - expected) / (max - expected)
    }
}

/// ARI from brute-force pair classification.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut both, mut only_a, mut only_b, mut neither) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => both += 1.0,
                (true, false) => only_a += 1.0,
                (false, true) => only_b += 1.0,
                (false, false) => neither += 1.0,
            }
        }
    }
    let denom = (both + only_a) * (only_a + neither) + (both + only_b) * (only_b + neither);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (both * neither - only_a * only_b) / denom
    }
}

pub struct AriReport {
    pub worst_oracle_gap: f64,
    pub asymmetric: usize,
    pub label_variant: usize,
}

/// `oracle_cases` pairs against both oracles, then `property_cases` pairs
/// for symmetry and label invariance.
pub fn ari_checks(oracle_cases: usize, property_cases: usize, seed: u64) -> AriReport {
    use mixsel_core::adjusted_rand_index as ari;
    let mut rng = Rng::with_stream(seed, 4000);
    let mut worst: f64 = 0.0;
    for _ in 0..oracle_cases {
        let (a, b) = random_partitions(&mut rng, 10, 4);
        let v = ari(&a, &b).unwrap();
        worst = worst.max((v - ari_contingency(&a, &b)).abs()).max((v - ari_pairs(&a, &b)).abs());
    }
    let (mut asymmetric, mut label_variant) = (0, 0);
    for _ in 0..property_cases {
        let (a, b) = random_partitions(&mut rng, 30, 5);
        let v = ari(&a, &b).unwrap();
        if v != ari(&b, &a).unwrap() {
            asymmetric += 1;
        }
        let rename = random_permutation(&mut rng, 5);
        let a2: Vec<usize> = a.iter().map(|&x| rename[x] + 10).collect();
        let b2: Vec<usize> = b.iter().map(|&x| rename[x] * 3).collect();
        if (ari(&a2, &b).unwrap() - v).abs() > 1e-12 || (ari(&a, &b2).unwrap() - v).abs() > 1e-12 {
            label_variant += 1;
        }
    }
    AriReport {
        worst_oracle_gap: worst,
        asymmetric,
        label_variant,
    }
}
