//! Mixed-type datasets with detection-limit metadata, and their CSV + schema
//! file formats.
//!
//! Continuous columns always come first. A censored cell stores its limit as a
//! placeholder value; the sampler keeps its own working copy for imputation.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::distributions::TruncationBounds;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnKind::Continuous => "continuous",
            ColumnKind::Categorical => "categorical",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    /// Ordered level labels; empty for continuous columns.
    pub levels: Vec<String>,
    pub lower_limit: Option<f64>,
    pub upper_limit: Option<f64>,
}

impl ColumnSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Continuous,
            levels: Vec::new(),
            lower_limit: None,
            upper_limit: None,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, levels: impl IntoIterator<Item = S>) -> Self {
        ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            levels: levels.into_iter().map(Into::into).collect(),
            lower_limit: None,
            upper_limit: None,
        }
    }

    pub fn with_limits(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.lower_limit = lower;
        self.upper_limit = upper;
        self
    }

    pub fn is_continuous(&self) -> bool {
        self.kind == ColumnKind::Continuous
    }

    pub fn has_limits(&self) -> bool {
        self.lower_limit.is_some() || self.upper_limit.is_some()
    }

    pub fn bounds(&self) -> TruncationBounds {
        TruncationBounds {
            lower: self.lower_limit,
            upper: self.upper_limit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Schema("empty column name".into()));
        }
        match self.kind {
            ColumnKind::Categorical => {
                if self.levels.len() < 2 {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` needs at least two levels",
                        self.name
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for l in &self.levels {
                    if !seen.insert(l.as_str()) {
                        return Err(Error::Schema(format!(
                            "column `{}` repeats level `{l}`",
                            self.name
                        )));
                    }
                }
                if self.has_limits() {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` cannot carry detection limits",
                        self.name
                    )));
                }
            }
            ColumnKind::Continuous => {
                if !self.levels.is_empty() {
                    return Err(Error::Schema(format!(
                        "continuous column `{}` cannot declare levels",
                        self.name
                    )));
                }
                for lim in [self.lower_limit, self.upper_limit].into_iter().flatten() {
                    if !lim.is_finite() {
                        return Err(Error::Schema(format!("column `{}` has a non-finite limit", self.name)));
                    }
                }
                if let (Some(lo), Some(hi)) = (self.lower_limit, self.upper_limit) {
                    if lo >= hi {
                        return Err(Error::Schema(format!(
                            "column `{}`: lower limit {lo} is not below upper limit {hi}",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Parse one schema line: `name,kind[,levels=a|b|c][,lower=<real>][,upper=<real>]`.
    pub fn parse_line(line: &str) -> Result<Self> {
        let mut parts = line.split(',').map(str::trim);
        let name = parts.next().filter(|s| !s.is_empty()).ok_or_else(|| Error::Schema(format!("bad line `{line}`")))?;
        let kind = match parts.next() {
            Some("continuous") => ColumnKind::Continuous,
            Some("categorical") => ColumnKind::Categorical,
            other => {
                return Err(Error::Schema(format!(
                    "column `{name}`: unknown kind {:?}",
                    other.unwrap_or("")
                )))
            }
        };
        let mut col = ColumnSchema {
            name: name.to_string(),
            kind,
            levels: Vec::new(),
            lower_limit: None,
            upper_limit: None,
        };
        for attr in parts {
            let (key, value) = attr
                .split_once('=')
                .ok_or_else(|| Error::Schema(format!("column `{name}`: malformed attribute `{attr}`")))?;
            let parse_limit = |v: &str| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Schema(format!("column `{name}`: bad limit `{v}`")))
            };
            match key.trim() {
                "levels" => col.levels = value.split('|').map(|s| s.trim().to_string()).collect(),
                "lower" => col.lower_limit = Some(parse_limit(value)?),
                "upper" => col.upper_limit = Some(parse_limit(value)?),
                other => return Err(Error::Schema(format!("column `{name}`: unknown attribute `{other}`"))),
            }
        }
        col.validate()?;
        Ok(col)
    }

    pub fn to_line(&self) -> String {
        let mut s = format!("{},{}", self.name, self.kind);
        if !self.levels.is_empty() {
            s.push_str(",levels=");
            s.push_str(&self.levels.join("|"));
        }
        if let Some(lo) = self.lower_limit {
            s.push_str(&format!(",lower={lo}"));
        }
        if let Some(hi) = self.upper_limit {
            s.push_str(&format!(",upper={hi}"));
        }
        s
    }
}

/// Per-cell censoring status; the numeric code is the `<name>_cens` CSV value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CensorFlag {
    #[default]
    Observed,
    BelowLower,
    AboveUpper,
}

impl CensorFlag {
    pub fn code(self) -> u8 {
        match self {
            CensorFlag::Observed => 0,
            CensorFlag::BelowLower => 1,
            CensorFlag::AboveUpper => 2,
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code.trim() {
            "0" => Some(CensorFlag::Observed),
            "1" => Some(CensorFlag::BelowLower),
            "2" => Some(CensorFlag::AboveUpper),
            _ => None,
        }
    }

    pub fn is_censored(self) -> bool {
        self != CensorFlag::Observed
    }
}

/// An n × M mixed-type data matrix, continuous columns first.
///
/// Continuous and categorical values are stored column-major so each
/// variable's block can be processed independently.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<ColumnSchema>,
    n: usize,
    q: usize,
    continuous: Vec<Vec<f64>>,
    censor: Vec<Vec<CensorFlag>>,
    categorical: Vec<Vec<usize>>,
}

impl Dataset {
    /// Build a dataset from column-major blocks.
    ///
    /// `columns` must list every continuous column before any categorical one.
    /// Censored cells are overwritten with their limit.
    pub fn new(
        columns: Vec<ColumnSchema>,
        mut continuous: Vec<Vec<f64>>,
        censor: Vec<Vec<CensorFlag>>,
        categorical: Vec<Vec<usize>>,
    ) -> Result<Self> {
        for c in &columns {
            c.validate()?;
        }
        let q = columns.iter().take_while(|c| c.is_continuous()).count();
        if columns[q..].iter().any(|c| c.is_continuous()) {
            return Err(Error::Schema("continuous columns must precede categorical columns".into()));
        }
        let mut names = std::collections::HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
        }
        if continuous.len() != q || censor.len() != q || categorical.len() != columns.len() - q {
            return Err(Error::invalid("column blocks do not match the schema"));
        }
        let n = continuous
            .first()
            .map(Vec::len)
            .or_else(|| categorical.first().map(Vec::len))
            .unwrap_or(0);
        for (j, col) in columns[..q].iter().enumerate() {
            if continuous[j].len() != n || censor[j].len() != n {
                return Err(Error::invalid(format!("column `{}` has the wrong length", col.name)));
            }
            for (i, (&flag, x)) in censor[j].iter().zip(continuous[j].iter_mut()).enumerate() {
                let limit = match flag {
                    CensorFlag::Observed => None,
                    CensorFlag::BelowLower => Some(col.lower_limit),
                    CensorFlag::AboveUpper => Some(col.upper_limit),
                };
                match limit {
                    None if !x.is_finite() => {
                        return Err(Error::Ingestion {
                            row: i + 1,
                            column: col.name.clone(),
                            message: format!("non-finite value {x}"),
                        })
                    }
                    None => {}
                    Some(None) => {
                        return Err(Error::Ingestion {
                            row: i + 1,
                            column: col.name.clone(),
                            message: format!("censor flag {} without a matching limit", flag.code()),
                        })
                    }
                    Some(Some(lim)) => *x = lim,
                }
            }
        }
        for (k, col) in columns[q..].iter().enumerate() {
            if categorical[k].len() != n {
                return Err(Error::invalid(format!("column `{}` has the wrong length", col.name)));
            }
            if let Some(i) = categorical[k].iter().position(|&l| l >= col.levels.len()) {
                return Err(Error::Ingestion {
                    row: i + 1,
                    column: col.name.clone(),
                    message: format!("level index {} out of range", categorical[k][i]),
                });
            }
        }
        Ok(Dataset {
            columns,
            n,
            q,
            continuous,
            censor,
            categorical,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of continuous columns.
    pub fn q(&self) -> usize {
        self.q
    }

    /// Total number of columns.
    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn continuous_schema(&self, j: usize) -> &ColumnSchema {
        &self.columns[j]
    }

    pub fn categorical_schema(&self, k: usize) -> &ColumnSchema {
        &self.columns[self.q + k]
    }

    pub fn continuous_column(&self, j: usize) -> &[f64] {
        &self.continuous[j]
    }

    pub fn censor_flags(&self, j: usize) -> &[CensorFlag] {
        &self.censor[j]
    }

    pub fn categorical_column(&self, k: usize) -> &[usize] {
        &self.categorical[k]
    }

    pub fn n_levels(&self, k: usize) -> usize {
        self.categorical_schema(k).levels.len()
    }

    /// Indicator x_iml: 1 when subject `i` takes level `l` of categorical column `k`.
    pub fn one_hot(&self, i: usize, k: usize, l: usize) -> u8 {
        u8::from(self.categorical[k][i] == l)
    }

    pub fn censored_count(&self, j: usize) -> usize {
        self.censor[j].iter().filter(|f| f.is_censored()).count()
    }

    pub fn has_censoring(&self) -> bool {
        (0..self.q).any(|j| self.censored_count(j) > 0)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Copy with a continuous column's values, flags and limits replaced.
    pub fn with_continuous_column(
        &self,
        j: usize,
        values: Vec<f64>,
        flags: Vec<CensorFlag>,
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> Result<Self> {
        let mut columns = self.columns.clone();
        columns[j].lower_limit = lower;
        columns[j].upper_limit = upper;
        let mut continuous = self.continuous.clone();
        let mut censor = self.censor.clone();
        continuous[j] = values;
        censor[j] = flags;
        Dataset::new(columns, continuous, censor, self.categorical.clone())
    }
}

/// Ground-truth cluster labels (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrueLabels {
    pub labels: Vec<usize>,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn parse_schema(text: &str) -> Result<Vec<ColumnSchema>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(ColumnSchema::parse_line)
        .collect()
}

pub fn read_schema(path: &Path) -> Result<Vec<ColumnSchema>> {
    parse_schema(&read_to_string(path)?)
}

/// Load a data CSV using the column descriptions in `schema_path`.
pub fn load_dataset(csv_path: &Path, schema_path: &Path) -> Result<Dataset> {
    let schema = read_schema(schema_path)?;
    let text = read_to_string(csv_path)?;
    parse_dataset(&text, schema)
}

/// Parse CSV text against a schema; columns are reordered continuous-first.
pub fn parse_dataset(csv_text: &str, schema: Vec<ColumnSchema>) -> Result<Dataset> {
    if schema.is_empty() {
        return Err(Error::Schema("schema lists no columns".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(csv_text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("unreadable header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();

    let (continuous_cols, categorical_cols): (Vec<_>, Vec<_>) =
        schema.into_iter().partition(ColumnSchema::is_continuous);
    let columns: Vec<ColumnSchema> = continuous_cols.into_iter().chain(categorical_cols).collect();

    let mut value_idx = Vec::with_capacity(columns.len());
    let mut flag_idx = Vec::new();
    for col in &columns {
        let idx = *position
            .get(col.name.as_str())
            .ok_or_else(|| Error::Schema(format!("column `{}` missing from CSV header", col.name)))?;
        value_idx.push(idx);
        if col.is_continuous() {
            let flag = position.get(format!("{}_cens", col.name).as_str()).copied();
            if flag.is_some() && !col.has_limits() {
                return Err(Error::Schema(format!(
                    "flag column `{}_cens` present but `{}` declares no detection limit",
                    col.name, col.name
                )));
            }
            flag_idx.push(flag);
        }
    }
    let q = flag_idx.len();

    let mut continuous = vec![Vec::new(); q];
    let mut censor = vec![Vec::new(); q];
    let mut categorical = vec![Vec::new(); columns.len() - q];
    let level_maps: Vec<HashMap<&str, usize>> = columns[q..]
        .iter()
        .map(|c| c.levels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect())
        .collect();

    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| Error::Ingestion {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |idx: usize| record.get(idx).unwrap_or("");
        for j in 0..q {
            let col = &columns[j];
            let flag = match flag_idx[j] {
                None => CensorFlag::Observed,
                Some(fi) => CensorFlag::from_code(cell(fi)).ok_or_else(|| Error::Ingestion {
                    row,
                    column: format!("{}_cens", col.name),
                    message: format!("censor flag `{}` is not 0, 1 or 2", cell(fi)),
                })?,
            };
            let raw = cell(value_idx[j]);
            let value = match flag {
                CensorFlag::Observed => {
                    if raw.is_empty() {
                        return Err(Error::Ingestion {
                            row,
                            column: col.name.clone(),
                            message: "missing value (missing data is not supported)".into(),
                        });
                    }
                    raw.parse::<f64>().map_err(|_| Error::Ingestion {
                        row,
                        column: col.name.clone(),
                        message: format!("`{raw}` is not a number"),
                    })?
                }
                CensorFlag::BelowLower => col.lower_limit.ok_or_else(|| Error::Ingestion {
                    row,
                    column: col.name.clone(),
                    message: "flagged below the lower limit but the schema has no lower limit".into(),
                })?,
                CensorFlag::AboveUpper => col.upper_limit.ok_or_else(|| Error::Ingestion {
                    row,
                    column: col.name.clone(),
                    message: "flagged above the upper limit but the schema has no upper limit".into(),
                })?,
            };
            continuous[j].push(value);
            censor[j].push(flag);
        }
        for (k, col) in columns[q..].iter().enumerate() {
            let raw = cell(value_idx[q + k]);
            if raw.is_empty() {
                return Err(Error::Ingestion {
                    row,
                    column: col.name.clone(),
                    message: "missing value (missing data is not supported)".into(),
                });
            }
            let level = *level_maps[k].get(raw).ok_or_else(|| Error::Ingestion {
                row,
                column: col.name.clone(),
                message: format!("unknown level `{raw}` (expected one of {})", col.levels.join("|")),
            })?;
            categorical[k].push(level);
        }
    }
    Dataset::new(columns, continuous, censor, categorical)
}

pub fn schema_text(columns: &[ColumnSchema]) -> String {
    let mut s = String::new();
    for c in columns {
        s.push_str(&c.to_line());
        s.push('\n');
    }
    s
}

/// CSV text for a dataset; censored columns get an adjacent `<name>_cens` flag column.
pub fn dataset_csv(ds: &Dataset) -> String {
    let mut header = Vec::new();
    for (j, col) in ds.columns.iter().enumerate() {
        header.push(col.name.clone());
        if j < ds.q && col.has_limits() {
            header.push(format!("{}_cens", col.name));
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    let mut fields = Vec::with_capacity(header.len());
    for i in 0..ds.n {
        fields.clear();
        for j in 0..ds.q {
            fields.push(format!("{}", ds.continuous[j][i]));
            if ds.columns[j].has_limits() {
                fields.push(ds.censor[j][i].code().to_string());
            }
        }
        for k in 0..ds.categorical.len() {
            fields.push(ds.categorical_schema(k).levels[ds.categorical[k][i]].clone());
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| Error::io(path, e))
}

pub fn write_dataset(ds: &Dataset, csv_path: &Path, schema_path: &Path) -> Result<()> {
    write_file(csv_path, &dataset_csv(ds))?;
    write_file(schema_path, &schema_text(&ds.columns))
}

pub fn write_labels(labels: &TrueLabels, path: &Path) -> Result<()> {
    let mut s = String::with_capacity(labels.labels.len() * 2);
    for l in &labels.labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    write_file(path, &s)
}

/// Read a single-column integer labels file (an optional non-numeric header is skipped).
pub fn read_labels(path: &Path) -> Result<TrueLabels> {
    let text = read_to_string(path)?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match line.parse::<usize>() {
            Ok(v) => labels.push(v),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Error::Ingestion {
                    row: i + 1,
                    column: "label".into(),
                    message: format!("`{line}` is not a positive integer"),
                })
            }
        }
    }
    Ok(TrueLabels { labels })
}

/// Observed-only summary of one continuous column.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSummary {
    pub name: String,
    pub observed: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub warning: Option<String>,
}

/// Per-column observed mean and sd for diagnostics. Nothing is rescaled.
pub fn standardization_report(ds: &Dataset) -> Vec<ColumnSummary> {
    (0..ds.q)
        .map(|j| {
            let observed: Vec<f64> = ds.continuous[j]
                .iter()
                .zip(&ds.censor[j])
                .filter(|(_, f)| !f.is_censored())
                .map(|(&x, _)| x)
                .collect();
            let name = ds.columns[j].name.clone();
            if observed.is_empty() {
                return ColumnSummary {
                    name,
                    observed: 0,
                    mean: None,
                    sd: None,
                    warning: Some("no observed values".into()),
                };
            }
            let (mean, var) = observed_moments(&observed);
            let sd = var.sqrt();
            let warning = (sd == 0.0).then(|| "zero variance".to_string());
            if let Some(w) = &warning {
                log::warn!("column `{name}`: {w}");
            }
            ColumnSummary {
                name,
                observed: observed.len(),
                mean: Some(mean),
                sd: Some(sd),
                warning,
            }
        })
        .collect()
}

/// Mean and sample variance (n - 1 denominator; 0 for a single value).
pub(crate) fn observed_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

impl fmt::Display for ColumnSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.mean, self.sd) {
            (Some(m), Some(s)) => write!(f, "{}\tn={}\tmean={m:.6}\tsd={s:.6}", self.name, self.observed)?,
            _ => write!(f, "{}\tn=0", self.name)?,
        }
        if let Some(w) = &self.warning {
            write!(f, "\t[{w}]")?;
        }
        Ok(())
    }
}
