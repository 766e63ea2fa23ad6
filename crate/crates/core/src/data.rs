//! Dataset model, CSV ingestion, preprocessing and min-max standardization.
//!
//! A raw [`Dataset`] keeps every CSV column (including excluded ones and the
//! effort column) and may contain missing cells. [`preprocess`] drops the
//! excluded columns and every incomplete row, and [`standardize`] turns the
//! result into a [`StandardizedDataset`], the compact form the estimators
//! work on: input features only, numeric values scaled into `[0, 1]`,
//! categorical values kept as interned labels, effort left in raw units.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of input features; a feature mask must fit in one `u64`.
pub const MAX_INPUT_FEATURES: usize = 63;

/// Smallest dataset the pipeline accepts.
pub const MIN_PROJECTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric,
    Categorical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureRole {
    Input,
    Effort,
    Excluded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub role: FeatureRole,
}

impl FeatureSpec {
    pub fn new(name: impl Into<String>, kind: FeatureKind, role: FeatureRole) -> Self {
        Self {
            name: name.into(),
            kind,
            role,
        }
    }

    pub fn numeric_input(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Numeric, FeatureRole::Input)
    }

    pub fn categorical_input(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Categorical, FeatureRole::Input)
    }

    pub fn effort(name: impl Into<String>) -> Self {
        Self::new(name, FeatureKind::Numeric, FeatureRole::Effort)
    }
}

/// One raw CSV cell. Categories are indices into the column's label table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Numeric(f64),
    Category(u32),
    Missing,
}

/// A raw project row, aligned with [`Dataset::specs`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawProject {
    pub cells: Vec<Cell>,
}

/// How the columns of a CSV file are interpreted.
#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    /// Every header column is declared explicitly. Non-numeric cells in a
    /// numeric column are parse errors.
    Declared(Vec<FeatureSpec>),
    /// Roles come from header names; columns not listed are numeric inputs
    /// unless a non-numeric cell shows up, in which case the column is read
    /// as categorical.
    Inferred(ColumnRoles),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnRoles {
    pub effort_column: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    #[serde(default)]
    pub excluded_columns: Vec<String>,
}

/// An immutable collection of projects with typed features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    specs: Vec<FeatureSpec>,
    labels: Vec<Vec<String>>,
    projects: Vec<RawProject>,
    effort_col: usize,
}

impl Dataset {
    /// Builds a dataset and checks its invariants.
    ///
    /// `labels[j]` is the label table of column `j` (empty for numeric
    /// columns).
    pub fn new(
        name: impl Into<String>,
        specs: Vec<FeatureSpec>,
        labels: Vec<Vec<String>>,
        projects: Vec<RawProject>,
    ) -> Result<Self> {
        let mut seen = HashSet::new();
        for spec in &specs {
            if !seen.insert(spec.name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{}'", spec.name)));
            }
        }
        let effort: Vec<usize> = specs
            .iter()
            .enumerate()
            .filter(|(_, s)| s.role == FeatureRole::Effort)
            .map(|(j, _)| j)
            .collect();
        let effort_col = match effort.as_slice() {
            [j] => *j,
            [] => return Err(Error::Schema("no effort column".into())),
            _ => return Err(Error::Schema("more than one effort column".into())),
        };
        if specs[effort_col].kind != FeatureKind::Numeric {
            return Err(Error::Schema(format!(
                "effort column '{}' must be numeric",
                specs[effort_col].name
            )));
        }
        let m = specs.iter().filter(|s| s.role == FeatureRole::Input).count();
        if m == 0 || m > MAX_INPUT_FEATURES {
            return Err(Error::Schema(format!(
                "need between 1 and {MAX_INPUT_FEATURES} input features, found {m}"
            )));
        }
        if labels.len() != specs.len() {
            return Err(Error::Schema("label table count does not match columns".into()));
        }
        if projects.len() < MIN_PROJECTS {
            return Err(Error::InsufficientData(format!(
                "{} projects, at least {MIN_PROJECTS} required",
                projects.len()
            )));
        }
        for (row, p) in projects.iter().enumerate() {
            if p.cells.len() != specs.len() {
                return Err(Error::Schema(format!(
                    "row {} has {} values, expected {}",
                    row + 1,
                    p.cells.len(),
                    specs.len()
                )));
            }
            for (j, cell) in p.cells.iter().enumerate() {
                let ok = match (cell, specs[j].kind) {
                    (Cell::Missing, _) => true,
                    (Cell::Numeric(x), FeatureKind::Numeric) => x.is_finite(),
                    (Cell::Category(c), FeatureKind::Categorical) => (*c as usize) < labels[j].len(),
                    _ => false,
                };
                if !ok {
                    return Err(Error::Schema(format!(
                        "row {}, column '{}': value does not match the declared kind",
                        row + 1,
                        specs[j].name
                    )));
                }
            }
            if let Cell::Numeric(e) = p.cells[effort_col] {
                if e <= 0.0 {
                    return Err(Error::Schema(format!(
                        "row {}: effort must be positive, found {e}",
                        row + 1
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            specs,
            labels,
            projects,
            effort_col,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn projects(&self) -> &[RawProject] {
        &self.projects
    }

    pub fn labels(&self, column: usize) -> &[String] {
        &self.labels[column]
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    /// Number of input features.
    pub fn input_count(&self) -> usize {
        self.specs.iter().filter(|s| s.role == FeatureRole::Input).count()
    }

    /// Effort of project `i`, or `None` if that cell is missing.
    pub fn effort(&self, i: usize) -> Option<f64> {
        match self.projects[i].cells[self.effort_col] {
            Cell::Numeric(e) => Some(e),
            _ => None,
        }
    }
}

fn is_missing(raw: &str) -> bool {
    raw.is_empty() || raw == "?"
}

/// Reads a comma-separated file with a header line.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_dataset(&name, &text, schema)
}

/// Parses CSV text; see [`load_dataset`].
pub fn parse_dataset(name: &str, text: &str, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::Schema(format!("duplicate header name '{h}'")));
        }
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Schema(format!("row {}: {e}", i + 1)))?;
        if record.len() == 1 && record.get(0) == Some("") {
            continue;
        }
        if record.len() != header.len() {
            return Err(Error::Schema(format!(
                "row {} has {} values, expected {}",
                i + 1,
                record.len(),
                header.len()
            )));
        }
        rows.push(record.iter().map(str::to_owned).collect());
    }

    let specs = resolve_specs(&header, &rows, schema)?;

    let mut labels: Vec<Vec<String>> = vec![Vec::new(); specs.len()];
    let mut interners: Vec<HashMap<String, u32>> = vec![HashMap::new(); specs.len()];
    let mut projects = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let mut cells = Vec::with_capacity(specs.len());
        for (j, raw) in row.iter().enumerate() {
            let cell = if is_missing(raw) {
                Cell::Missing
            } else {
                match specs[j].kind {
                    FeatureKind::Numeric => match raw.parse::<f64>() {
                        Ok(x) if x.is_finite() => Cell::Numeric(x),
                        _ => {
                            return Err(Error::Parse {
                                row: i + 1,
                                column: specs[j].name.clone(),
                                value: raw.clone(),
                            })
                        }
                    },
                    FeatureKind::Categorical => {
                        let next = labels[j].len() as u32;
                        let id = *interners[j].entry(raw.clone()).or_insert_with(|| {
                            labels[j].push(raw.clone());
                            next
                        });
                        Cell::Category(id)
                    }
                }
            };
            cells.push(cell);
        }
        projects.push(RawProject { cells });
    }
    Dataset::new(name, specs, labels, projects)
}

fn resolve_specs(header: &[String], rows: &[Vec<String>], schema: &Schema) -> Result<Vec<FeatureSpec>> {
    match schema {
        Schema::Declared(declared) => {
            let by_name: HashMap<&str, &FeatureSpec> =
                declared.iter().map(|s| (s.name.as_str(), s)).collect();
            if by_name.len() != declared.len() {
                return Err(Error::Schema("duplicate names in declared schema".into()));
            }
            for s in declared {
                if !header.contains(&s.name) {
                    return Err(Error::Schema(format!("declared column '{}' not in header", s.name)));
                }
            }
            header
                .iter()
                .map(|h| {
                    by_name
                        .get(h.as_str())
                        .map(|s| (*s).clone())
                        .ok_or_else(|| Error::Schema(format!("column '{h}' is not declared")))
                })
                .collect()
        }
        Schema::Inferred(roles) => {
            if !header.contains(&roles.effort_column) {
                return Err(Error::Schema(format!(
                    "effort column '{}' not found in header",
                    roles.effort_column
                )));
            }
            for c in roles.categorical_columns.iter().chain(&roles.excluded_columns) {
                if !header.contains(c) {
                    return Err(Error::Schema(format!("column '{c}' not found in header")));
                }
            }
            Ok(header
                .iter()
                .enumerate()
                .map(|(j, h)| {
                    if *h == roles.effort_column {
                        FeatureSpec::effort(h.clone())
                    } else {
                        let declared_cat = roles.categorical_columns.contains(h);
                        let non_numeric = rows
                            .iter()
                            .any(|r| !is_missing(&r[j]) && r[j].parse::<f64>().is_err());
                        let kind = if declared_cat || non_numeric {
                            FeatureKind::Categorical
                        } else {
                            FeatureKind::Numeric
                        };
                        let role = if roles.excluded_columns.contains(h) {
                            FeatureRole::Excluded
                        } else {
                            FeatureRole::Input
                        };
                        FeatureSpec::new(h.clone(), kind, role)
                    }
                })
                .collect())
        }
    }
}

/// Drops excluded columns, then every row with a missing cell.
pub fn preprocess(ds: &Dataset) -> Result<Dataset> {
    let keep: Vec<usize> = ds
        .specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.role != FeatureRole::Excluded)
        .map(|(j, _)| j)
        .collect();
    let specs: Vec<FeatureSpec> = keep.iter().map(|&j| ds.specs[j].clone()).collect();
    let labels: Vec<Vec<String>> = keep.iter().map(|&j| ds.labels[j].clone()).collect();
    let projects: Vec<RawProject> = ds
        .projects
        .iter()
        .filter(|p| keep.iter().all(|&j| p.cells[j] != Cell::Missing))
        .map(|p| RawProject {
            cells: keep.iter().map(|&j| p.cells[j]).collect(),
        })
        .collect();
    if projects.len() < MIN_PROJECTS {
        return Err(Error::InsufficientData(format!(
            "dataset '{}' has {} complete projects, at least {MIN_PROJECTS} required",
            ds.name,
            projects.len()
        )));
    }
    Dataset::new(ds.name.clone(), specs, labels, projects)
}

/// A standardized input feature value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Numeric(f64),
    Category(u32),
}

/// A project as seen by the estimators: input features plus raw effort.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub values: Vec<FeatureValue>,
    pub effort: f64,
}

impl Project {
    /// Convenience constructor for all-numeric projects.
    pub fn numeric(values: &[f64], effort: f64) -> Self {
        Self {
            values: values.iter().map(|&x| FeatureValue::Numeric(x)).collect(),
            effort,
        }
    }
}

/// Recorded min-max pair of a numeric input feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedDataset {
    name: String,
    features: Vec<FeatureSpec>,
    labels: Vec<Vec<String>>,
    scaling: Vec<Option<Scaling>>,
    projects: Vec<Project>,
}

impl StandardizedDataset {
    /// Wraps already-scaled projects. `features` lists the input features;
    /// every project must have one value of the matching kind per feature
    /// and a positive effort.
    pub fn new(name: impl Into<String>, features: Vec<FeatureSpec>, projects: Vec<Project>) -> Result<Self> {
        let m = features.len();
        if m == 0 || m > MAX_INPUT_FEATURES {
            return Err(Error::Schema(format!(
                "need between 1 and {MAX_INPUT_FEATURES} input features, found {m}"
            )));
        }
        if projects.is_empty() {
            return Err(Error::InsufficientData("no projects".into()));
        }
        let mut max_label = vec![0u32; m];
        for (i, p) in projects.iter().enumerate() {
            if p.values.len() != m {
                return Err(Error::Schema(format!("project {i} has {} values, expected {m}", p.values.len())));
            }
            if !(p.effort > 0.0 && p.effort.is_finite()) {
                return Err(Error::Schema(format!("project {i}: effort must be positive")));
            }
            for (j, v) in p.values.iter().enumerate() {
                match (v, features[j].kind) {
                    (FeatureValue::Numeric(x), FeatureKind::Numeric) if x.is_finite() => {}
                    (FeatureValue::Category(c), FeatureKind::Categorical) => {
                        max_label[j] = max_label[j].max(c + 1);
                    }
                    _ => {
                        return Err(Error::Schema(format!(
                            "project {i}, feature '{}': value does not match kind",
                            features[j].name
                        )))
                    }
                }
            }
        }
        let labels = max_label
            .iter()
            .map(|&n| (0..n).map(|c| c.to_string()).collect())
            .collect();
        Ok(Self {
            name: name.into(),
            scaling: vec![None; m],
            features,
            labels,
            projects,
        })
    }

    /// All-numeric dataset from rows of feature values (taken as already
    /// standardized) and efforts.
    pub fn from_numeric(name: impl Into<String>, rows: &[Vec<f64>], efforts: &[f64]) -> Result<Self> {
        if rows.len() != efforts.len() {
            return Err(Error::InvalidArgument("rows and efforts differ in length".into()));
        }
        let m = rows.first().map_or(0, Vec::len);
        let features = (0..m).map(|j| FeatureSpec::numeric_input(format!("f{}", j + 1))).collect();
        let projects = rows
            .iter()
            .zip(efforts)
            .map(|(r, &e)| Project::numeric(r, e))
            .collect();
        Self::new(name, features, projects)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn projects(&self) -> &[Project] {
        &self.projects
    }

    pub fn project(&self, i: usize) -> &Project {
        &self.projects[i]
    }

    /// Recorded (min, max) per input feature; `None` for categorical ones.
    pub fn scaling(&self) -> &[Option<Scaling>] {
        &self.scaling
    }

    pub fn labels(&self, feature: usize) -> &[String] {
        &self.labels[feature]
    }

    pub fn len(&self) -> usize {
        self.projects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projects.is_empty()
    }

    /// Number of input features `m`.
    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn efforts(&self) -> Vec<f64> {
        self.projects.iter().map(|p| p.effort).collect()
    }

    /// The same dataset with project `i` held out.
    pub fn without(&self, i: usize) -> Self {
        let mut projects = self.projects.clone();
        projects.remove(i);
        Self {
            name: self.name.clone(),
            features: self.features.clone(),
            labels: self.labels.clone(),
            scaling: self.scaling.clone(),
            projects,
        }
    }
}

/// Min-max scales every numeric input feature into `[0, 1]`.
///
/// Constant columns map to 0. Categorical features and effort are left
/// unchanged. The dataset must be complete (see [`preprocess`]).
pub fn standardize(ds: &Dataset) -> Result<StandardizedDataset> {
    let inputs: Vec<usize> = ds
        .specs
        .iter()
        .enumerate()
        .filter(|(_, s)| s.role == FeatureRole::Input)
        .map(|(j, _)| j)
        .collect();

    let mut scaling = Vec::with_capacity(inputs.len());
    for &j in &inputs {
        if ds.specs[j].kind == FeatureKind::Categorical {
            scaling.push(None);
            continue;
        }
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for p in &ds.projects {
            if let Cell::Numeric(x) = p.cells[j] {
                min = min.min(x);
                max = max.max(x);
            }
        }
        scaling.push(Some(Scaling { min, max }));
    }

    let mut projects = Vec::with_capacity(ds.len());
    for (i, p) in ds.projects.iter().enumerate() {
        let effort = ds.effort(i).ok_or_else(|| {
            Error::InvalidArgument(format!("project {} has a missing effort; preprocess first", i + 1))
        })?;
        let mut values = Vec::with_capacity(inputs.len());
        for (&j, sc) in inputs.iter().zip(&scaling) {
            let v = match (p.cells[j], sc) {
                (Cell::Numeric(x), Some(s)) => {
                    let range = s.max - s.min;
                    FeatureValue::Numeric(if range > 0.0 { (x - s.min) / range } else { 0.0 })
                }
                (Cell::Category(c), None) => FeatureValue::Category(c),
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "project {}, column '{}' is missing; preprocess first",
                        i + 1,
                        ds.specs[j].name
                    )))
                }
            };
            values.push(v);
        }
        projects.push(Project { values, effort });
    }

    Ok(StandardizedDataset {
        name: ds.name.clone(),
        features: inputs.iter().map(|&j| ds.specs[j].clone()).collect(),
        labels: inputs.iter().map(|&j| ds.labels[j].clone()).collect(),
        scaling,
        projects,
    })
}

/// `load_dataset` followed by `preprocess` and `standardize`.
pub fn load_standardized(path: impl AsRef<Path>, schema: &Schema) -> Result<StandardizedDataset> {
    let raw = load_dataset(path, schema)?;
    standardize(&preprocess(&raw)?)
}
