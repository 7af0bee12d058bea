//! Synthetic scenarios with known cluster structure, and censoring transforms.

use std::fmt;
use std::str::FromStr;

use crate::data::{CensorFlag, ColumnSchema, Dataset, TrueLabels};
use crate::distributions::{sample_categorical, sample_normal, Rng};
use crate::error::{Error, Result};

/// Random stream used for data generation, disjoint from the sampler's streams.
const GENERATE_STREAM: u64 = u64::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioId {
    Sim1a,
    Sim1b,
    Sim2,
    Sim3,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 4] = [ScenarioId::Sim1a, ScenarioId::Sim1b, ScenarioId::Sim2, ScenarioId::Sim3];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::Sim1a => "sim1a",
            ScenarioId::Sim1b => "sim1b",
            ScenarioId::Sim2 => "sim2",
            ScenarioId::Sim3 => "sim3",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown scenario `{s}` (expected sim1a, sim1b, sim2 or sim3)")))
    }
}

/// How the second parameter of a normal law is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormalParam {
    #[default]
    Sd,
    Var,
}

impl FromStr for NormalParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sd" => Ok(NormalParam::Sd),
            "var" => Ok(NormalParam::Var),
            _ => Err(Error::invalid(format!("normal_param must be `sd` or `var`, got `{s}`"))),
        }
    }
}

/// Per-cluster generating law of one variable.
#[derive(Clone, Debug, PartialEq)]
pub enum VariableLaw {
    /// (mean, spread) per cluster.
    Normal(Vec<(f64, f64)>),
    /// Level probabilities per cluster.
    Multinomial(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub cluster_sizes: Vec<usize>,
    pub variables: Vec<(String, VariableLaw)>,
    pub normal_param: NormalParam,
}

fn normal(laws: &[(f64, f64)]) -> VariableLaw {
    VariableLaw::Normal(laws.to_vec())
}

fn shared_normal(mean: f64, spread: f64) -> VariableLaw {
    VariableLaw::Normal(vec![(mean, spread); 3])
}

fn multinomial(probs: [[f64; 3]; 3]) -> VariableLaw {
    VariableLaw::Multinomial(probs.iter().map(|p| p.to_vec()).collect())
}

pub const LEVELS: [&str; 3] = ["a", "b", "c"];

impl ScenarioSpec {
    pub fn new(id: ScenarioId) -> Self {
        let informative_cat = multinomial([[0.05, 0.05, 0.9], [0.05, 0.9, 0.05], [0.9, 0.05, 0.05]]);
        let weak_cat = multinomial([[0.3, 0.3, 0.4], [0.4, 0.3, 0.3], [0.3, 0.4, 0.3]]);
        let mirrored_cat = multinomial([[0.9, 0.05, 0.05], [0.05, 0.9, 0.05], [0.05, 0.05, 0.9]]);
        let sim1a_continuous = vec![
            normal(&[(-2.0, 2.0), (2.0, 2.0), (6.0, 2.0)]),
            normal(&[(20.0, 1.0), (25.0, 1.0), (18.0, 1.0)]),
            normal(&[(0.0, 1.0), (-7.0, 1.0), (4.0, 1.0)]),
            shared_normal(0.0, 1.0),
        ];
        let laws: Vec<VariableLaw> = match id {
            ScenarioId::Sim1a => {
                let mut v = sim1a_continuous;
                v.push(multinomial([[0.1, 0.1, 0.8], [0.1, 0.8, 0.1], [0.8, 0.1, 0.1]]));
                v
            }
            ScenarioId::Sim1b => vec![
                normal(&[(-2.0, 2.0), (-1.0, 2.0), (0.0, 2.0)]),
                normal(&[(20.0, 1.0), (24.0, 1.0), (21.0, 1.0)]),
                normal(&[(5.0, 1.0), (8.0, 1.0), (7.0, 1.0)]),
                shared_normal(0.0, 1.0),
                normal(&[(-1.0, 1.0), (1.0, 1.0), (-2.0, 1.0)]),
                normal(&[(0.0, 1.0), (-1.0, 1.0), (2.0, 1.0)]),
                normal(&[(2.0, 1.0), (1.0, 1.0), (0.0, 1.0)]),
                informative_cat,
                weak_cat,
                mirrored_cat,
            ],
            ScenarioId::Sim2 => {
                let mut v = sim1a_continuous;
                v.push(multinomial([[0.3, 0.3, 0.4], [0.3, 0.3, 0.4], [0.4, 0.3, 0.3]]));
                v
            }
            ScenarioId::Sim3 => vec![
                shared_normal(0.0, 0.5),
                shared_normal(-3.0, 1.0),
                shared_normal(4.0, 2.0),
                shared_normal(0.0, 1.0),
                informative_cat,
                weak_cat,
                mirrored_cat,
            ],
        };
        ScenarioSpec {
            id,
            cluster_sizes: vec![100; 3],
            variables: laws.into_iter().enumerate().map(|(m, law)| (format!("x{}", m + 1), law)).collect(),
            normal_param: NormalParam::Sd,
        }
    }

    pub fn with_normal_param(mut self, p: NormalParam) -> Self {
        self.normal_param = p;
        self
    }

    pub fn n(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let g_count = self.cluster_sizes.len();
        if g_count == 0 || self.cluster_sizes.contains(&0) {
            return Err(Error::invalid("every cluster needs at least one subject"));
        }
        let mut seen_categorical = false;
        for (name, law) in &self.variables {
            let ok = match law {
                VariableLaw::Normal(p) => {
                    !seen_categorical
                        && p.len() == g_count
                        && p.iter().all(|&(m, s)| m.is_finite() && s > 0.0 && s.is_finite())
                }
                VariableLaw::Multinomial(p) => {
                    seen_categorical = true;
                    p.len() == g_count
                        && p.iter().all(|row| {
                            row.len() == LEVELS.len()
                                && row.iter().all(|&x| x >= 0.0)
                                && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
                        })
                }
            };
            if !ok {
                return Err(Error::invalid(format!("bad generating law for `{name}`")));
            }
        }
        Ok(())
    }
}

/// Draw one dataset; subjects are ordered by true cluster.
pub fn generate(spec: &ScenarioSpec, seed: u64) -> Result<(Dataset, TrueLabels)> {
    spec.validate()?;
    let mut rng = Rng::with_stream(seed, GENERATE_STREAM);
    let labels: Vec<usize> = spec
        .cluster_sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &size)| std::iter::repeat_n(g, size))
        .collect();
    let mut columns = Vec::new();
    let mut continuous = Vec::new();
    let mut categorical = Vec::new();
    for (name, law) in &spec.variables {
        match law {
            VariableLaw::Normal(params) => {
                columns.push(ColumnSchema::continuous(name.as_str()));
                let col = labels
                    .iter()
                    .map(|&g| {
                        let (mean, spread) = params[g];
                        let sd = match spec.normal_param {
                            NormalParam::Sd => spread,
                            NormalParam::Var => spread.sqrt(),
                        };
                        sample_normal(&mut rng, mean, sd)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                continuous.push(col);
            }
            VariableLaw::Multinomial(probs) => {
                columns.push(ColumnSchema::categorical(name.as_str(), LEVELS));
                let col = labels
                    .iter()
                    .map(|&g| sample_categorical(&mut rng, &probs[g]))
                    .collect::<Result<Vec<usize>>>()?;
                categorical.push(col);
            }
        }
    }
    let flags = vec![vec![CensorFlag::Observed; labels.len()]; continuous.len()];
    let ds = Dataset::new(columns, continuous, flags, categorical)?;
    Ok((
        ds,
        TrueLabels {
            labels: labels.iter().map(|g| g + 1).collect(),
        },
    ))
}

/// Lower-side censoring of selected continuous columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CensorSpec {
    pub variables: Vec<String>,
    /// Fraction of each column to censor, in [0, 1).
    pub proportion: f64,
}

/// Censor the smallest ⌊proportion·n⌋ values of each targeted column.
///
/// The limit sits halfway between the largest censored and the smallest
/// retained order statistic, so for proportion 0.5 it is the median.
pub fn apply_censoring(ds: &Dataset, cs: &CensorSpec) -> Result<Dataset> {
    if !(0.0..1.0).contains(&cs.proportion) {
        return Err(Error::invalid(format!("censoring proportion {} is outside [0, 1)", cs.proportion)));
    }
    let mut out = ds.clone();
    let k = (cs.proportion * ds.n() as f64).floor() as usize;
    for name in &cs.variables {
        let j = ds
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("no column `{name}` to censor")))?;
        if j >= ds.q() {
            return Err(Error::invalid(format!("`{name}` is categorical and cannot be censored")));
        }
        if k == 0 {
            continue;
        }
        if out.censored_count(j) > 0 {
            return Err(Error::invalid(format!("`{name}` is already censored")));
        }
        let values = out.continuous_column(j).to_vec();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted[k - 1] == sorted[k] {
            return Err(Error::invalid(format!(
                "`{name}` has tied values at the censoring cut; cannot censor exactly {k} cells"
            )));
        }
        let limit = 0.5 * (sorted[k - 1] + sorted[k]);
        let flags = values
            .iter()
            .map(|&x| if x < limit { CensorFlag::BelowLower } else { CensorFlag::Observed })
            .collect();
        let upper = out.continuous_schema(j).upper_limit;
        out = out.with_continuous_column(j, values, flags, Some(limit), upper)?;
    }
    Ok(out)
}

/// Replace every below-limit cell by half its limit and treat it as observed.
pub fn naive_fill(ds: &Dataset) -> Result<Dataset> {
    let mut out = ds.clone();
    for j in 0..ds.q() {
        let flags = ds.censor_flags(j);
        if !flags.contains(&CensorFlag::BelowLower) {
            continue;
        }
        let col = ds.continuous_schema(j);
        let limit = col.lower_limit.expect("below-limit cells imply a lower limit");
        if limit == 0.0 {
            log::warn!("`{}` has a lower limit of 0; half-limit filling puts every censored cell at 0", col.name);
        }
        let values = ds
            .continuous_column(j)
            .iter()
            .zip(flags)
            .map(|(&x, &f)| if f == CensorFlag::BelowLower { 0.5 * limit } else { x })
            .collect();
        let new_flags = flags
            .iter()
            .map(|&f| if f == CensorFlag::BelowLower { CensorFlag::Observed } else { f })
            .collect();
        out = out.with_continuous_column(j, values, new_flags, None, col.upper_limit)?;
    }
    Ok(out)
}
