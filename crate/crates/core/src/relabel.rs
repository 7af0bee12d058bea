//! Stephens' relabeling of retained MCMC draws.
//!
//! Each retained iteration's membership matrix is permuted so that all of them
//! agree with their running mean, minimizing the total Kullback–Leibler
//! divergence Σₜ Σᵢ Σ_g p⁽ᵗ⁾ᵢg log(p⁽ᵗ⁾ᵢg / p̄ᵢg).

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sampler::{ChainOutput, Parameters};

/// Floor applied to p̄ inside logarithms.
const PBAR_FLOOR: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;
/// Problems up to this size are solved by enumerating every permutation.
const EXHAUSTIVE_LIMIT: usize = 6;

/// Row `t` maps final labels to sampled labels: final cluster `g` at retained
/// iteration `t` is the sampler's cluster `rows[t][g]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationTable {
    rows: Vec<Vec<usize>>,
}

impl PermutationTable {
    pub fn identity(draws: usize, clusters: usize) -> Self {
        PermutationTable {
            rows: vec![(0..clusters).collect(); draws],
        }
    }

    pub fn from_rows(rows: Vec<Vec<usize>>) -> Result<Self> {
        let g = rows.first().map_or(0, Vec::len);
        for (t, r) in rows.iter().enumerate() {
            if r.len() != g || !is_permutation(r) {
                return Err(Error::invalid(format!("row {t} ({r:?}) is not a permutation of 0..{g}")));
            }
        }
        Ok(PermutationTable { rows })
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn inverse(&self) -> Self {
        PermutationTable {
            rows: self.rows.iter().map(|r| invert(r)).collect(),
        }
    }
}

pub fn is_permutation(p: &[usize]) -> bool {
    let mut seen = vec![false; p.len()];
    p.iter().all(|&x| x < p.len() && !std::mem::replace(&mut seen[x], true))
}

pub fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

/// p̄ᵢg = (1/R) Σₜ p⁽ᵗ⁾ᵢ,U_t(g).
pub fn mean_membership(p_draws: &[Matrix], u: &PermutationTable) -> Matrix {
    let first = &p_draws[0];
    let mut acc = Matrix::zeros(first.rows(), first.cols());
    // Running mean, so that averaging identical draws is exact.
    for (t, (p, perm)) in p_draws.iter().zip(u.rows()).enumerate() {
        let w = 1.0 / (t + 1) as f64;
        for i in 0..p.rows() {
            let src = p.row(i);
            for (dst, &s) in acc.row_mut(i).iter_mut().zip(perm) {
                *dst += (src[s] - *dst) * w;
            }
        }
    }
    acc
}

/// cost[g][j] = Σᵢ p⁽ᵗ⁾ᵢg log(p⁽ᵗ⁾ᵢg / p̄ᵢj), the KL contribution of sending
/// sampled label `g` to final label `j`.
pub fn relabel_cost(pt: &Matrix, pbar: &Matrix) -> Vec<Vec<f64>> {
    let log_pbar: Vec<f64> = pbar.as_slice().iter().map(|&x| x.max(PBAR_FLOOR).ln()).collect();
    cost_with_log_pbar(pt, &log_pbar)
}

fn cost_with_log_pbar(pt: &Matrix, log_pbar: &[f64]) -> Vec<Vec<f64>> {
    let g_count = pt.cols();
    let mut cost = vec![vec![0.0; g_count]; g_count];
    for i in 0..pt.rows() {
        let lp = &log_pbar[i * g_count..(i + 1) * g_count];
        for (g, &p) in pt.row(i).iter().enumerate() {
            if p > 0.0 {
                let lpg = p.ln();
                for (c, &l) in cost[g].iter_mut().zip(lp) {
                    *c += p * (lpg - l);
                }
            }
        }
    }
    cost
}

fn assignment_cost(cost: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(g, &j)| cost[g][j]).sum()
}

/// Permutation σ minimizing Σ_g cost[g][σ(g)]; ties go to the
/// lexicographically smallest σ.
pub fn solve_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    if cost.len() <= EXHAUSTIVE_LIMIT {
        exhaustive_assignment(cost)
    } else {
        lexicographic_hungarian(cost)
    }
}

/// Rearrange `p` into the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).expect("pivot has a successor");
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

pub fn exhaustive_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..cost.len()).collect();
    let mut best = perm.clone();
    let mut best_cost = assignment_cost(cost, &perm);
    while next_permutation(&mut perm) {
        let c = assignment_cost(cost, &perm);
        if c < best_cost {
            best_cost = c;
            best.copy_from_slice(&perm);
        }
    }
    best
}

/// Hungarian algorithm (shortest augmenting paths with potentials), O(n³).
/// Returns the row-to-column assignment of some optimal solution.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[owner[j] - 1] = j - 1;
    }
    assignment
}

/// Hungarian optimum, then fix rows one by one to the smallest column that
/// still admits an optimal completion.
fn lexicographic_hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let optimum = assignment_cost(cost, &hungarian(cost));
    let tol = 1e-9 * (1.0 + optimum.abs());
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut fixed_cost = 0.0;
    for g in 0..n {
        let mut chosen = None;
        for j in (0..n).filter(|j| !fixed.contains(j)) {
            let rows: Vec<usize> = (g + 1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|c| *c != j && !fixed.contains(c)).collect();
            let sub: Vec<Vec<f64>> = rows.iter().map(|&r| cols.iter().map(|&c| cost[r][c]).collect()).collect();
            let rest = assignment_cost(&sub, &hungarian(&sub));
            if fixed_cost + cost[g][j] + rest <= optimum + tol {
                chosen = Some(j);
                break;
            }
        }
        let j = chosen.expect("some column completes an optimal assignment");
        fixed_cost += cost[g][j];
        fixed.push(j);
    }
    fixed
}

/// Σₜ Σᵢ Σ_g p⁽ᵗ⁾ᵢ,U_t(g) log(p⁽ᵗ⁾ᵢ,U_t(g) / p̄ᵢg) with p̄ the mean under `u`.
pub fn total_kl(p_draws: &[Matrix], u: &PermutationTable) -> f64 {
    let pbar = mean_membership(p_draws, u);
    let log_pbar: Vec<f64> = pbar.as_slice().iter().map(|&x| x.max(PBAR_FLOOR).ln()).collect();
    p_draws
        .par_iter()
        .zip(u.rows().par_iter())
        .map(|(p, perm)| {
            let cost = cost_with_log_pbar(p, &log_pbar);
            // Sampled label perm[g] is sent to final label g.
            perm.iter().enumerate().map(|(g, &s)| cost[s][g]).sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct RelabelOutcome {
    pub table: PermutationTable,
    pub sweeps: usize,
    pub converged: bool,
    /// Total KL after each sweep (entry 0 is the identity labeling).
    pub objective: Vec<f64>,
}

/// Alternate mean-membership and per-draw assignment steps until the table
/// stops changing, or [`MAX_SWEEPS`] sweeps.
pub fn run_relabel(p_draws: &[Matrix]) -> Result<RelabelOutcome> {
    let Some(first) = p_draws.first() else {
        return Err(Error::invalid("relabeling needs at least one draw"));
    };
    let g_count = first.cols();
    if p_draws.iter().any(|p| p.rows() != first.rows() || p.cols() != g_count) {
        return Err(Error::invalid("membership draws have inconsistent shapes"));
    }
    let mut table = PermutationTable::identity(p_draws.len(), g_count);
    let mut objective = vec![total_kl(p_draws, &table)];
    if p_draws.len() == 1 {
        return Ok(RelabelOutcome {
            table,
            sweeps: 0,
            converged: true,
            objective,
        });
    }
    for sweep in 1..=MAX_SWEEPS {
        let pbar = mean_membership(p_draws, &table);
        let log_pbar: Vec<f64> = pbar.as_slice().iter().map(|&x| x.max(PBAR_FLOOR).ln()).collect();
        let rows: Vec<Vec<usize>> = p_draws
            .par_iter()
            .map(|p| invert(&solve_assignment(&cost_with_log_pbar(p, &log_pbar))))
            .collect();
        let next = PermutationTable { rows };
        let unchanged = next == table;
        table = next;
        objective.push(total_kl(p_draws, &table));
        if unchanged {
            return Ok(RelabelOutcome {
                table,
                sweeps: sweep,
                converged: true,
                objective,
            });
        }
    }
    log::warn!("relabeling did not converge within {MAX_SWEEPS} sweeps");
    Ok(RelabelOutcome {
        table,
        sweeps: MAX_SWEEPS,
        converged: false,
        objective,
    })
}

/// Permute one parameter draw so that final cluster `g` is sampled cluster `perm[g]`.
///
/// Continuous means are re-anchored on the new reference cluster: A1 absorbs
/// its old mean difference, so every cluster mean A1 + μ_g is unchanged. The
/// indicator that belonged to the new reference moves to the slot of the old
/// reference, keeping the multiset of non-reference indicators intact.
pub fn permute_parameters(params: &Parameters, perm: &[usize]) -> Parameters {
    let reference = perm[0];
    let old_ref_slot = perm.iter().position(|&s| s == 0).expect("valid permutation");
    let continuous = params
        .continuous
        .iter()
        .map(|c| {
            let shift = c.mu[reference];
            let mut out = c.clone();
            out.a1 = c.a1 + shift;
            out.mu = perm.iter().map(|&s| c.mu[s] - shift).collect();
            out.mu[0] = 0.0;
            let mut delta: Vec<bool> = perm.iter().map(|&s| c.delta[s]).collect();
            delta.swap(0, old_ref_slot);
            delta[0] = false;
            out.delta = delta;
            out
        })
        .collect();
    let categorical = params
        .categorical
        .iter()
        .map(|c| {
            let mut out = c.clone();
            out.theta = perm.iter().map(|&s| c.theta[s].clone()).collect();
            out.delta = perm.iter().map(|&s| c.delta[s]).collect();
            out
        })
        .collect();
    Parameters {
        tau: perm.iter().map(|&s| params.tau[s]).collect(),
        sigma2_delta0: params.sigma2_delta0,
        continuous,
        categorical,
    }
}

/// Apply a permutation table to every cluster-indexed quantity of a chain.
pub fn apply_relabeling(draws: &ChainOutput, u: &PermutationTable) -> Result<ChainOutput> {
    if u.len() != draws.retained() || u.len() != draws.membership.len() {
        return Err(Error::invalid(format!(
            "permutation table has {} rows for {} draws",
            u.len(),
            draws.retained()
        )));
    }
    let g_count = draws.clusters();
    if u.rows().iter().any(|r| r.len() != g_count) {
        return Err(Error::invalid("permutation width does not match the cluster count"));
    }
    Ok(ChainOutput {
        membership: draws
            .membership
            .iter()
            .zip(u.rows())
            .map(|(p, perm)| p.permute_columns(perm))
            .collect(),
        params: draws
            .params
            .iter()
            .zip(u.rows())
            .map(|(p, perm)| permute_parameters(p, perm))
            .collect(),
    })
}
