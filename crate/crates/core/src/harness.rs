//! Experiment orchestration: configuration, the method registry, the
//! leave-one-out driver, statistics over methods and report emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{self, ColumnRoles, Schema, StandardizedDataset};
use crate::error::{Error, Result};
use crate::metrics::{self, BaselineMode, MetricSuite, PredictionRecord, RandomGuessBaseline};
use crate::mopso::MopsoConfig;
use crate::stats::{self, ComparisonResult, Measure, RankSummary, Tally};
use crate::tuning::{self, SolutionVector, TuningMode, VariantConfig};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ABE0")]
    Abe0,
    #[serde(rename = "LT")]
    Lt,
    #[serde(rename = "GT")]
    Gt,
    #[serde(rename = "LT*")]
    LtStar,
    #[serde(rename = "GT*")]
    GtStar,
    #[serde(rename = "LT+")]
    LtPlus,
    #[serde(rename = "GT+")]
    GtPlus,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Abe0,
        Method::Lt,
        Method::Gt,
        Method::LtStar,
        Method::GtStar,
        Method::LtPlus,
        Method::GtPlus,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Abe0 => "ABE0",
            Method::Lt => "LT",
            Method::Gt => "GT",
            Method::LtStar => "LT*",
            Method::GtStar => "GT*",
            Method::LtPlus => "LT+",
            Method::GtPlus => "GT+",
        }
    }

    pub fn is_local(self) -> bool {
        matches!(self, Method::Lt | Method::LtStar | Method::LtPlus)
    }

    /// The full-variable method an ablation is measured against.
    pub fn parent(self) -> Option<Method> {
        match self {
            Method::LtStar | Method::LtPlus => Some(Method::Lt),
            Method::GtStar | Method::GtPlus => Some(Method::Gt),
            _ => None,
        }
    }

    /// Tuning variant, or `None` for ABE0.
    pub fn variant(self, local: LocalMode) -> Option<VariantConfig> {
        let mode = if self.is_local() {
            local.tuning_mode()
        } else {
            TuningMode::Global
        };
        match self {
            Method::Abe0 => None,
            Method::Lt | Method::Gt => Some(VariantConfig::full(mode)),
            Method::LtStar | Method::GtStar => Some(VariantConfig::all_features(mode)),
            Method::LtPlus | Method::GtPlus => Some(VariantConfig::unit_weights(mode)),
        }
    }

    fn code(self) -> u64 {
        Method::ALL.iter().position(|m| *m == self).expect("listed") as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name().eq_ignore_ascii_case(t) || (t.ends_with('⁺') && m.name() == t.replace('⁺', "+")))
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalMode {
    #[default]
    Oracle,
    Honest,
}

impl LocalMode {
    pub fn tuning_mode(self) -> TuningMode {
        match self {
            LocalMode::Oracle => TuningMode::LocalOracle,
            LocalMode::Honest => TuningMode::LocalHonest,
        }
    }
}

impl FromStr for LocalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "oracle" => Ok(LocalMode::Oracle),
            "honest" => Ok(LocalMode::Honest),
            _ => Err(Error::Config(format!("unknown local mode '{s}' (expected oracle or honest)"))),
        }
    }
}

/// `"exact"` or `{"sampled": runs}` in the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSetting {
    #[default]
    Exact,
    Sampled(usize),
}

impl BaselineSetting {
    fn mode(self, seed: u64) -> BaselineMode {
        match self {
            BaselineSetting::Exact => BaselineMode::Exact,
            BaselineSetting::Sampled(runs) => BaselineMode::Sampled { runs, seed },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// CSV path, relative to the config file.
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub effort_column: String,
    #[serde(default)]
    pub categorical_columns: Vec<String>,
    #[serde(default)]
    pub excluded_columns: Vec<String>,
}

impl DatasetConfig {
    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    pub fn schema(&self) -> Schema {
        Schema::Inferred(ColumnRoles {
            effort_column: self.effort_column.clone(),
            categorical_columns: self.categorical_columns.clone(),
            excluded_columns: self.excluded_columns.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetConfig>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub mopso: MopsoConfig,
    pub seed: u64,
    #[serde(default)]
    pub baseline: BaselineSetting,
    #[serde(default)]
    pub local_mode: LocalMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; dataset paths are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, PathBuf)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets configured".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        let mut seen = Vec::new();
        for m in &self.methods {
            if seen.contains(m) {
                return Err(Error::Config(format!("method {m} listed twice")));
            }
            seen.push(*m);
        }
        let mut names = Vec::new();
        for d in &self.datasets {
            let n = d.display_name();
            if names.contains(&n) {
                return Err(Error::Config(format!("dataset name '{n}' used twice")));
            }
            names.push(n);
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        if let BaselineSetting::Sampled(0) = self.baseline {
            return Err(Error::Config("sampled baseline needs at least one run".into()));
        }
        self.mopso.validate()
    }
}

/// Seed for one (dataset, method) cell; independent of scheduling.
pub fn derive_seed(base: u64, dataset: usize, method: Method) -> u64 {
    let mut z = base
        ^ (dataset as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ method.code().wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Settings shared by every method run on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub mopso: MopsoConfig,
    pub baseline: BaselineMode,
    pub local_mode: LocalMode,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            mopso: MopsoConfig::default(),
            baseline: BaselineMode::Exact,
            local_mode: LocalMode::Oracle,
        }
    }
}

/// Solution summary: k, mask and the weight rows actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub k: usize,
    pub mask: String,
    pub mask_value: u64,
    pub weights: Vec<Vec<f64>>,
}

impl From<&SolutionVector> for SolutionSummary {
    fn from(sol: &SolutionVector) -> Self {
        Self {
            k: sol.k,
            mask: sol.mask.to_vec().iter().map(|b| if *b == 1 { '1' } else { '0' }).collect(),
            mask_value: sol.mask.value(),
            weights: (0..sol.k).map(|r| sol.weights.row(r).to_vec()).collect(),
        }
    }
}

/// Predictions of one method under leave-one-out.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub records: Vec<PredictionRecord>,
    pub solutions: Vec<SolutionSummary>,
    pub best_k: Option<usize>,
    pub mode: Option<TuningMode>,
}

/// Predicts every project of `ds` from the others with `method`.
pub fn run_loocv(ds: &StandardizedDataset, method: Method, settings: &RunSettings) -> Result<MethodRun> {
    let records = |preds: &[f64]| -> Vec<PredictionRecord> {
        ds.projects()
            .iter()
            .zip(preds)
            .map(|(p, &e)| PredictionRecord::new(p.effort, e))
            .collect()
    };
    match method.variant(settings.local_mode) {
        None => {
            let best = tuning::best_k_abe0(ds)?;
            Ok(MethodRun {
                records: records(&best.predictions),
                solutions: Vec::new(),
                best_k: Some(best.k),
                mode: None,
            })
        }
        Some(variant) => {
            let out = if variant.mode.is_local() {
                tuning::run_lt(ds, variant, &settings.mopso, settings.baseline)?
            } else {
                tuning::run_gt(ds, variant, &settings.mopso, settings.baseline)?
            };
            Ok(MethodRun {
                records: records(&out.predictions),
                solutions: out.solutions.iter().map(SolutionSummary::from).collect(),
                best_k: None,
                mode: Some(variant.mode),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mode: Option<TuningMode>,
    pub metrics: MetricSuite,
    /// `|MAE - MAE_parent| / SD(AE_parent)` for ablation variants.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect_size_vs_parent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub best_k: Option<usize>,
    pub solutions: Vec<SolutionSummary>,
    pub predictions: Vec<PredictionRecord>,
}

impl MethodReport {
    pub fn absolute_errors(&self) -> Vec<f64> {
        self.predictions.iter().map(metrics::ae).collect()
    }

    /// Count of each chosen k, ascending by k.
    pub fn k_histogram(&self) -> Vec<(usize, usize)> {
        let mut h = BTreeMap::new();
        for s in &self.solutions {
            *h.entry(s.k).or_insert(0) += 1;
        }
        h.into_iter().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub method: Method,
    pub measure: Measure,
    pub tally: Tally,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub baseline: RandomGuessBaseline,
    pub methods: Vec<MethodReport>,
    pub comparisons: Vec<ComparisonResult>,
    pub win_tie_loss: Vec<TallyEntry>,
}

impl DatasetReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub engine_version: String,
    pub config: ExperimentConfig,
    pub notes: Vec<String>,
    pub datasets: Vec<DatasetReport>,
    /// Per method and measure, summed over datasets.
    pub win_tie_loss_totals: Vec<TallyEntry>,
    /// Per method, summed over datasets and measures.
    pub win_tie_loss_overall: Vec<(Method, Tally)>,
    pub rank_summaries: Vec<RankSummary>,
}

impl EvaluationReport {
    pub fn dataset(&self, name: &str) -> Option<&DatasetReport> {
        self.datasets.iter().find(|d| d.name == name)
    }
}

fn measure_value(s: &MetricSuite, m: Measure) -> Option<f64> {
    match m {
        Measure::Mae => Some(s.mae),
        Measure::Sa => s.sa,
        Measure::Mbre => Some(s.mbre),
        Measure::Mibre => Some(s.mibre),
        Measure::Lsd => Some(s.lsd),
    }
}

fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Builds the per-dataset report from finished method runs.
pub fn assemble_dataset_report(
    ds: &StandardizedDataset,
    baseline: RandomGuessBaseline,
    runs: Vec<(Method, MethodRun)>,
) -> Result<DatasetReport> {
    let mut methods = Vec::with_capacity(runs.len());
    for (method, run) in runs {
        let metrics = metrics::evaluate(&run.records, &baseline)?;
        methods.push(MethodReport {
            method,
            mode: run.mode,
            metrics,
            effect_size_vs_parent: None,
            best_k: run.best_k,
            solutions: run.solutions,
            predictions: run.records,
        });
    }
    let parents: Vec<(usize, f64, f64)> = methods
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            let parent = methods.iter().find(|p| Some(p.method) == r.method.parent())?;
            Some((i, parent.metrics.mae, sample_sd(&parent.absolute_errors())))
        })
        .collect();
    for (i, parent_mae, parent_sd) in parents {
        methods[i].effect_size_vs_parent = metrics::effect_size(methods[i].metrics.mae, parent_mae, parent_sd).ok();
    }

    let errors: Vec<Vec<f64>> = methods.iter().map(MethodReport::absolute_errors).collect();
    let mut comparisons = Vec::new();
    for i in 0..methods.len() {
        for j in (i + 1)..methods.len() {
            let p = stats::wilcoxon_rank_sum(&errors[i], &errors[j])?;
            let outcomes = Measure::ALL
                .iter()
                .map(|&m| {
                    let a = measure_value(&methods[i].metrics, m).unwrap_or(f64::NAN);
                    let b = measure_value(&methods[j].metrics, m).unwrap_or(f64::NAN);
                    (m, stats::outcome(p, a, b, m))
                })
                .collect();
            comparisons.push(ComparisonResult {
                method_a: methods[i].method.name().to_string(),
                method_b: methods[j].method.name().to_string(),
                p_value: p,
                outcomes,
            });
        }
    }

    let mut win_tie_loss = Vec::new();
    if methods.len() >= 2 {
        for measure in Measure::ALL {
            let values: Vec<f64> = methods
                .iter()
                .map(|r| measure_value(&r.metrics, measure).unwrap_or(f64::NAN))
                .collect();
            let tallies = stats::win_tie_loss(&errors, &values, measure)?;
            for (r, tally) in methods.iter().zip(tallies) {
                win_tie_loss.push(TallyEntry {
                    method: r.method,
                    measure,
                    tally,
                });
            }
        }
    }

    Ok(DatasetReport {
        name: ds.name().to_string(),
        n: ds.len(),
        m: ds.feature_count(),
        baseline,
        methods,
        comparisons,
        win_tie_loss,
    })
}

/// Re-derives every metric suite from the stored prediction pairs.
pub fn recompute_check(report: &EvaluationReport) -> Result<()> {
    for d in &report.datasets {
        for m in &d.methods {
            let again = metrics::evaluate(&m.predictions, &d.baseline)?;
            if again != m.metrics {
                return Err(Error::InvalidArgument(format!(
                    "dataset '{}', method {}: stored metrics do not match the predictions",
                    d.name, m.method
                )));
            }
        }
    }
    Ok(())
}

fn report_notes(cfg: &ExperimentConfig) -> Vec<String> {
    let local = match cfg.local_mode {
        LocalMode::Oracle => "local tuning (LT variants) scores each candidate on the held-out project's own error (local_oracle)",
        LocalMode::Honest => "local tuning (LT variants) scores each candidate by leave-one-out inside the fold's training set (local_honest)",
    };
    vec![
        local.to_string(),
        "global tuning (GT variants) runs once per dataset with fitness from leave-one-out over all projects, so the shared solution sees every project during tuning".to_string(),
        "ABE0 uses the k with the lowest leave-one-out MAE over k = 1..n-1".to_string(),
        "win-tie-loss is tallied per measure; overall totals sum the tallies of all five measures".to_string(),
        "effect_size_vs_parent compares LT*/LT+ with LT and GT*/GT+ with GT, scaled by the parent's absolute-error SD".to_string(),
    ]
}

/// Loads one configured dataset and runs the pipeline up to standardization.
pub fn load_configured(d: &DatasetConfig, base_dir: &Path) -> Result<StandardizedDataset> {
    let path = base_dir.join(&d.path);
    let raw = data::load_dataset(&path, &d.schema())?.renamed(d.display_name());
    data::standardize(&data::preprocess(&raw)?)
}

/// Runs every configured method on every configured dataset.
///
/// Dataset paths are resolved against `base_dir`. The result depends only
/// on the config, not on the thread count.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path) -> Result<EvaluationReport> {
    cfg.validate()?;
    let datasets: Vec<StandardizedDataset> = cfg
        .datasets
        .iter()
        .map(|d| {
            load_configured(d, base_dir).map_err(|e| Error::Context {
                dataset: d.display_name(),
                method: "load".into(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, Method)> = (0..datasets.len())
        .flat_map(|d| cfg.methods.iter().map(move |&m| (d, m)))
        .collect();
    let runs: Vec<MethodRun> = cells
        .par_iter()
        .map(|&(d, method)| {
            let seed = derive_seed(cfg.seed, d, method);
            let settings = RunSettings {
                mopso: MopsoConfig { seed, ..cfg.mopso.clone() },
                baseline: cfg.baseline.mode(seed),
                local_mode: cfg.local_mode,
            };
            run_loocv(&datasets[d], method, &settings).map_err(|e| Error::Context {
                dataset: datasets[d].name().to_string(),
                method: method.to_string(),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut runs = runs.into_iter();
    let mut reports = Vec::with_capacity(datasets.len());
    for (d, ds) in datasets.iter().enumerate() {
        let baseline_seed = derive_seed(cfg.seed, d, Method::Abe0) ^ 0xBA5E;
        let baseline = metrics::random_guess_baseline(&ds.efforts(), cfg.baseline.mode(baseline_seed))?;
        let cell_runs: Vec<(Method, MethodRun)> = cfg
            .methods
            .iter()
            .map(|&m| (m, runs.next().expect("one run per cell")))
            .collect();
        reports.push(assemble_dataset_report(ds, baseline, cell_runs).map_err(|e| Error::Context {
            dataset: ds.name().to_string(),
            method: "report".into(),
            source: Box::new(e),
        })?);
    }

    let mut totals: Vec<TallyEntry> = Vec::new();
    let mut overall: Vec<(Method, Tally)> = cfg.methods.iter().map(|&m| (m, Tally::default())).collect();
    for &method in &cfg.methods {
        for measure in Measure::ALL {
            let mut t = Tally::default();
            for d in &reports {
                for e in d.win_tie_loss.iter().filter(|e| e.method == method && e.measure == measure) {
                    t.add(&e.tally);
                }
            }
            if let Some((_, o)) = overall.iter_mut().find(|(m, _)| *m == method) {
                o.add(&t);
            }
            totals.push(TallyEntry { method, measure, tally: t });
        }
    }

    let names: Vec<String> = cfg.methods.iter().map(|m| m.to_string()).collect();
    let mut rank_summaries = Vec::new();
    for measure in Measure::ALL {
        let table: Vec<Vec<Option<f64>>> = reports
            .iter()
            .map(|d| d.methods.iter().map(|r| measure_value(&r.metrics, measure)).collect())
            .collect();
        // a degenerate dataset can leave SA undefined; ranks are then omitted for that measure
        if let Ok(r) = stats::rank_methods(&table, &names, measure) {
            rank_summaries.extend(r);
        }
    }

    let report = EvaluationReport {
        engine_version: ENGINE_VERSION.to_string(),
        config: cfg.clone(),
        notes: report_notes(cfg),
        datasets: reports,
        win_tie_loss_totals: totals,
        win_tie_loss_overall: overall,
        rank_summaries,
    };
    recompute_check(&report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_text<F>(fill: F) -> Result<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> std::result::Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).map_err(|e| Error::InvalidArgument(format!("csv encoding failed: {e}")))?;
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv encoding failed: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn full(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Formats with four significant digits.
pub fn sig4(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    if mag >= 3 {
        let step = 10f64.powi(mag - 3);
        format!("{:.0}", (x / step).round() * step)
    } else {
        format!("{:.*}", (3 - mag) as usize, x)
    }
}

fn methods_in(report: &EvaluationReport) -> Vec<Method> {
    report.config.methods.clone()
}

pub fn metrics_csv(report: &EvaluationReport) -> Result<String> {
    let methods = methods_in(report);
    csv_text(|w| {
        let mut header = vec!["dataset".to_string()];
        for m in &methods {
            for measure in Measure::ALL {
                header.push(format!("{m}_{measure}"));
            }
        }
        w.write_record(&header)?;
        for d in &report.datasets {
            let mut row = vec![d.name.clone()];
            for m in &methods {
                for measure in Measure::ALL {
                    row.push(full(d.method(*m).and_then(|r| measure_value(&r.metrics, measure))));
                }
            }
            w.write_record(&row)?;
        }
        Ok(())
    })
}

pub fn comparisons_csv(report: &EvaluationReport) -> Result<String> {
    csv_text(|w| {
        let mut header = vec!["dataset", "method_a", "method_b", "p_value"];
        header.extend(Measure::ALL.iter().map(|m| m.name()));
        w.write_record(&header)?;
        for d in &report.datasets {
            for c in &d.comparisons {
                let mut row = vec![d.name.clone(), c.method_a.clone(), c.method_b.clone(), c.p_value.to_string()];
                row.extend(c.outcomes.iter().map(|(_, o)| {
                    match o {
                        stats::Outcome::Win => "win",
                        stats::Outcome::Tie => "tie",
                        stats::Outcome::Loss => "loss",
                    }
                    .to_string()
                }));
                w.write_record(&row)?;
            }
        }
        Ok(())
    })
}

pub fn win_tie_loss_csv(report: &EvaluationReport) -> Result<String> {
    csv_text(|w| {
        w.write_record(["dataset", "measure", "method", "win", "tie", "loss"])?;
        let rows = report
            .datasets
            .iter()
            .flat_map(|d| d.win_tie_loss.iter().map(move |e| (d.name.as_str(), e)))
            .chain(report.win_tie_loss_totals.iter().map(|e| ("ALL", e)));
        for (name, e) in rows {
            w.write_record([
                name.to_string(),
                e.measure.to_string(),
                e.method.to_string(),
                e.tally.win.to_string(),
                e.tally.tie.to_string(),
                e.tally.loss.to_string(),
            ])?;
        }
        for (m, t) in &report.win_tie_loss_overall {
            w.write_record([
                "ALL".to_string(),
                "ALL".to_string(),
                m.to_string(),
                t.win.to_string(),
                t.tie.to_string(),
                t.loss.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn predictions_csv(report: &EvaluationReport) -> Result<String> {
    csv_text(|w| {
        w.write_record(["dataset", "method", "project", "actual", "predicted"])?;
        for d in &report.datasets {
            for m in &d.methods {
                for (i, r) in m.predictions.iter().enumerate() {
                    w.write_record([
                        d.name.clone(),
                        m.method.to_string(),
                        (i + 1).to_string(),
                        r.actual.to_string(),
                        r.predicted.to_string(),
                    ])?;
                }
            }
        }
        Ok(())
    })
}

pub fn markdown(report: &EvaluationReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "# Evaluation report\n\nengine {}, seed {}\n", report.engine_version, report.config.seed);
    for note in &report.notes {
        let _ = writeln!(s, "- {note}");
    }
    for d in &report.datasets {
        let _ = writeln!(
            s,
            "\n## {} (n = {}, m = {})\n\nrandom guessing: MAE_p0 = {}, SP0 = {}\n",
            d.name,
            d.n,
            d.m,
            sig4(d.baseline.mae_p0),
            sig4(d.baseline.sp0)
        );
        let _ = writeln!(s, "| method | MAE | SA % | effect size | MBRE | MIBRE | LSD | vs parent | k |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
        for m in &d.methods {
            let opt = |x: Option<f64>| x.map(sig4).unwrap_or_else(|| "-".into());
            let k = match (m.best_k, m.solutions.len()) {
                (Some(k), _) => k.to_string(),
                (None, 1) => m.solutions[0].k.to_string(),
                (None, 0) => "-".into(),
                (None, _) => "per project".into(),
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |",
                m.method,
                sig4(m.metrics.mae),
                opt(m.metrics.sa.map(|v| 100.0 * v)),
                opt(m.metrics.effect_size),
                sig4(m.metrics.mbre),
                sig4(m.metrics.mibre),
                sig4(m.metrics.lsd),
                opt(m.effect_size_vs_parent),
                k
            );
        }
        if !d.comparisons.is_empty() {
            let _ = writeln!(s, "\n| A | B | p | {} |", Measure::ALL.map(|m| m.name()).join(" | "));
            let _ = writeln!(s, "|---|---|---|{}", "---|".repeat(Measure::ALL.len()));
            for c in &d.comparisons {
                let outs: Vec<&str> = c
                    .outcomes
                    .iter()
                    .map(|(_, o)| match o {
                        stats::Outcome::Win => "win",
                        stats::Outcome::Tie => "tie",
                        stats::Outcome::Loss => "loss",
                    })
                    .collect();
                let _ = writeln!(s, "| {} | {} | {} | {} |", c.method_a, c.method_b, sig4(c.p_value), outs.join(" | "));
            }
        }
    }
    if !report.win_tie_loss_overall.is_empty() && report.config.methods.len() > 1 {
        let _ = writeln!(s, "\n## Win-tie-loss over all datasets and measures\n\n| method | win | tie | loss |\n|---|---|---|---|");
        for (m, t) in &report.win_tie_loss_overall {
            let _ = writeln!(s, "| {m} | {} | {} | {} |", t.win, t.tie, t.loss);
        }
    }
    if !report.rank_summaries.is_empty() {
        let _ = writeln!(s, "\n## Ranks\n\n| measure | method | mean rank | SD |\n|---|---|---|---|");
        for r in &report.rank_summaries {
            let _ = writeln!(s, "| {} | {} | {} | {} |", r.measure, r.method, sig4(r.mean_rank), sig4(r.rank_sd));
        }
    }
    s
}

pub fn to_json(report: &EvaluationReport) -> Result<String> {
    Ok(serde_json::to_string_pretty(report)? + "\n")
}

pub fn from_json(text: &str) -> Result<EvaluationReport> {
    Ok(serde_json::from_str(text)?)
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| match c {
            '*' => 's',
            '+' => 'p',
            c if c.is_ascii_alphanumeric() || c == '-' || c == '_' => c,
            _ => '_',
        })
        .collect()
}

/// Writes the requested formats into `dir` and returns the created paths.
///
/// CSV output also includes gnuplot-ready k-histograms for methods with a
/// solution per project.
pub fn emit_report(report: &EvaluationReport, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &text)?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            ReportFormat::Json => put("report.json", to_json(report)?)?,
            ReportFormat::Markdown => put("report.md", markdown(report))?,
            ReportFormat::Csv => {
                put("metrics.csv", metrics_csv(report)?)?;
                put("comparisons.csv", comparisons_csv(report)?)?;
                put("win_tie_loss.csv", win_tie_loss_csv(report)?)?;
                put("predictions.csv", predictions_csv(report)?)?;
                for d in &report.datasets {
                    for m in d.methods.iter().filter(|m| m.solutions.len() > 1) {
                        let mut text = format!("# k count ({} {})\n", d.name, m.method);
                        for (k, c) in m.k_histogram() {
                            text.push_str(&format!("{k} {c}\n"));
                        }
                        put(&format!("khist_{}_{}.dat", file_safe(&d.name), file_safe(m.method.name())), text)?;
                    }
                }
            }
        }
    }
    Ok(written)
}

/// Prediction rows read back from a predictions CSV.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct PredictionRow {
    pub dataset: String,
    pub method: String,
    pub project: usize,
    pub actual: f64,
    pub predicted: f64,
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| Error::Schema(format!("{}: row {}: {e}", path.display(), i + 1))))
        .collect()
}

/// Comparison of stored predictions: metrics against an exact baseline over
/// the actuals, pairwise tests and tallies, one block per dataset.
pub fn compare_predictions(rows: &[PredictionRow]) -> Result<Vec<DatasetReport>> {
    let mut by_dataset: BTreeMap<&str, BTreeMap<Method, Vec<&PredictionRow>>> = BTreeMap::new();
    for r in rows {
        let method: Method = r.method.parse()?;
        by_dataset.entry(&r.dataset).or_default().entry(method).or_default().push(r);
    }
    let mut out = Vec::new();
    for (name, methods) in by_dataset {
        let mut runs = Vec::new();
        let mut actuals: Option<Vec<f64>> = None;
        for (method, mut rs) in methods {
            rs.sort_by_key(|r| r.project);
            let a: Vec<f64> = rs.iter().map(|r| r.actual).collect();
            match &actuals {
                Some(prev) if *prev != a => {
                    return Err(Error::Schema(format!("dataset '{name}': methods disagree on the actual efforts")))
                }
                _ => actuals = Some(a),
            }
            runs.push((
                method,
                MethodRun {
                    records: rs.iter().map(|r| PredictionRecord::new(r.actual, r.predicted)).collect(),
                    solutions: Vec::new(),
                    best_k: None,
                    mode: None,
                },
            ));
        }
        let actuals = actuals.unwrap_or_default();
        let features = vec![data::FeatureSpec::numeric_input("x")];
        let projects = actuals.iter().map(|&e| data::Project::numeric(&[0.0], e)).collect();
        let ds = StandardizedDataset::new(name, features, projects)?;
        let baseline = metrics::random_guess_baseline(&actuals, BaselineMode::Exact)?;
        out.push(assemble_dataset_report(&ds, baseline, runs)?);
    }
    Ok(out)
}
