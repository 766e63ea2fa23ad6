//! Solution encoding, local and global tuning objectives, and selection of
//! one solution from a Pareto front.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::abe::{predict_abe0_ranked, predict_adapted, predict_adapted_ranked, FeatureMask, LooNeighbors};
use crate::data::{Project, StandardizedDataset};
use crate::error::{Error, Result};
use crate::metrics::{self, BaselineMode, PredictionRecord, RandomGuessBaseline};
use crate::mopso::{self, Bounds, MopsoConfig, Problem};

/// Row-major `rows x cols` matrix of adaptation weights; row `i` is used by
/// the rank-`i + 1` analogy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    /// Every row `1/cols`.
    pub fn uniform(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0 / cols as f64)
    }

    /// Every weight exactly 1.
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("weight rows differ in length".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// The tuned decision triple: analogy count, feature mask and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVector {
    pub k: usize,
    pub mask: FeatureMask,
    pub weights: WeightMatrix,
}

impl SolutionVector {
    /// Checks the solution against a training set of `n_train` projects
    /// with `m` input features.
    pub fn check(&self, n_train: usize, m: usize) -> Result<()> {
        if self.k == 0 || self.k > n_train {
            return Err(Error::KOutOfRange { k: self.k, max: n_train });
        }
        if self.mask.len() != m || self.weights.cols() != m {
            return Err(Error::InvalidArgument(format!(
                "solution has mask length {} and {} weight columns, dataset has {m} features",
                self.mask.len(),
                self.weights.cols()
            )));
        }
        if self.weights.rows() < self.k {
            return Err(Error::InvalidArgument(format!(
                "solution has {} weight rows, needs at least k = {}",
                self.weights.rows(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Expands an integer `v` into an `m`-bit mask, first feature leftmost.
pub fn decode_mask(v: u64, m: usize) -> Result<FeatureMask> {
    FeatureMask::from_integer(v, m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningMode {
    /// One solution per project, scored on the held-out project's own error.
    LocalOracle,
    /// One solution per project, scored by LOOCV inside the fold's training set.
    LocalHonest,
    /// One shared solution for the dataset.
    Global,
}

impl TuningMode {
    pub fn is_local(self) -> bool {
        !matches!(self, TuningMode::Global)
    }
}

/// Which decision variables are searched; fixed ones use `fixed_k`, the
/// all-ones mask or unit weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantConfig {
    pub optimize_k: bool,
    pub optimize_features: bool,
    pub optimize_weights: bool,
    pub mode: TuningMode,
    pub fixed_k: Option<usize>,
}

impl VariantConfig {
    pub fn full(mode: TuningMode) -> Self {
        Self {
            optimize_k: true,
            optimize_features: true,
            optimize_weights: true,
            mode,
            fixed_k: None,
        }
    }

    /// Feature mask fixed to all ones.
    pub fn all_features(mode: TuningMode) -> Self {
        Self {
            optimize_features: false,
            ..Self::full(mode)
        }
    }

    /// Weights fixed to exactly 1.
    pub fn unit_weights(mode: TuningMode) -> Self {
        Self {
            optimize_weights: false,
            ..Self::full(mode)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.optimize_k || self.optimize_features || self.optimize_weights) {
            return Err(Error::Config("a variant must optimize at least one variable".into()));
        }
        if !self.optimize_k && self.fixed_k.is_none() {
            return Err(Error::Config("fixed_k is required when k is not optimized".into()));
        }
        Ok(())
    }
}

/// Maps between continuous swarm positions and solution vectors.
///
/// Layout: `[k] [v] [w_00 .. w_(n_train-1)(m-1)]`, omitting fixed variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoding {
    n_train: usize,
    m: usize,
    variant: VariantConfig,
}

impl Encoding {
    pub fn new(n_train: usize, m: usize, variant: VariantConfig) -> Result<Self> {
        variant.validate()?;
        if n_train == 0 {
            return Err(Error::InsufficientData("empty training set".into()));
        }
        if m == 0 || m > crate::data::MAX_INPUT_FEATURES {
            return Err(Error::InvalidArgument(format!("feature count {m} out of range")));
        }
        if let Some(k) = variant.fixed_k.filter(|_| !variant.optimize_k) {
            if k == 0 || k > n_train {
                return Err(Error::KOutOfRange { k, max: n_train });
            }
        }
        Ok(Self { n_train, m, variant })
    }

    pub fn dim(&self) -> usize {
        usize::from(self.variant.optimize_k)
            + usize::from(self.variant.optimize_features)
            + if self.variant.optimize_weights { self.n_train * self.m } else { 0 }
    }

    fn max_mask(&self) -> u64 {
        (1u64 << self.m) - 1
    }

    /// Integer variables get half-unit margins so every value has an equal
    /// share of the range under round-half-up.
    pub fn bounds(&self) -> Bounds {
        let mut lower = Vec::with_capacity(self.dim());
        let mut upper = Vec::with_capacity(self.dim());
        if self.variant.optimize_k {
            lower.push(0.5);
            upper.push(self.n_train as f64 + 0.5);
        }
        if self.variant.optimize_features {
            lower.push(0.5);
            upper.push(self.max_mask() as f64 + 0.5);
        }
        if self.variant.optimize_weights {
            lower.resize(self.dim(), 0.0);
            upper.resize(self.dim(), 1.0);
        }
        Bounds::new(lower, upper).expect("encoding bounds are well formed")
    }

    pub fn decode(&self, x: &[f64]) -> SolutionVector {
        self.decode_rows(x, self.n_train)
    }

    /// Like [`Encoding::decode`] but materializes only the weight rows the
    /// decoded `k` uses.
    pub fn decode_used(&self, x: &[f64]) -> SolutionVector {
        self.decode_rows(x, 0)
    }

    fn decode_rows(&self, x: &[f64], min_rows: usize) -> SolutionVector {
        debug_assert_eq!(x.len(), self.dim());
        let mut at = 0;
        let k = if self.variant.optimize_k {
            at += 1;
            round_half_up(x[0]).clamp(1, self.n_train as u64) as usize
        } else {
            self.variant.fixed_k.expect("validated")
        };
        let mask = if self.variant.optimize_features {
            let v = round_half_up(x[at]).clamp(1, self.max_mask());
            at += 1;
            FeatureMask::from_integer(v, self.m).expect("clamped into range")
        } else {
            FeatureMask::all(self.m)
        };
        let rows = min_rows.max(k);
        let weights = if self.variant.optimize_weights {
            let rows: Vec<Vec<f64>> = x[at..].chunks(self.m).take(rows).map(normalize_row).collect();
            WeightMatrix::from_rows(&rows).expect("equal row lengths")
        } else {
            WeightMatrix::ones(rows, self.m)
        };
        SolutionVector { k, mask, weights }
    }

    pub fn encode(&self, sol: &SolutionVector) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        if self.variant.optimize_k {
            x.push(sol.k as f64);
        }
        if self.variant.optimize_features {
            x.push(sol.mask.value() as f64);
        }
        if self.variant.optimize_weights {
            x.extend_from_slice(sol.weights.as_slice());
        }
        x
    }
}

fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

/// Clamps into `[0, 1]` and rescales to sum 1; an all-zero row becomes uniform.
pub fn normalize_row(row: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = row.iter().map(|w| w.clamp(0.0, 1.0)).collect();
    let sum: f64 = clamped.iter().sum();
    if sum > 0.0 {
        clamped.iter().map(|w| w / sum).collect()
    } else {
        vec![1.0 / row.len() as f64; row.len()]
    }
}

/// `(AE, BRE, IBRE)` of one adapted prediction against the known actual.
pub fn lt_objectives(train: &StandardizedDataset, target: &Project, target_actual: f64, sol: &SolutionVector) -> Result<Vec<f64>> {
    let predicted = predict_adapted(train, target, sol)?;
    Ok(point_objectives(target_actual, predicted))
}

fn point_objectives(actual: f64, predicted: f64) -> Vec<f64> {
    let r = PredictionRecord::new(actual, predicted);
    vec![metrics::ae(&r), metrics::bre(&r), metrics::ibre(&r)]
}

/// `(-SA, MBRE, MIBRE)` of `sol` under leave-one-out over `ds`.
pub fn gt_objectives(ds: &StandardizedDataset, sol: &SolutionVector, baseline: &RandomGuessBaseline) -> Result<Vec<f64>> {
    if ds.len() < 2 {
        return Err(Error::InsufficientData("leave-one-out needs at least 2 projects".into()));
    }
    sol.check(ds.len() - 1, ds.feature_count())?;
    let loo = LooNeighbors::new(ds);
    let members: Vec<usize> = (0..ds.len()).collect();
    let orders: Vec<Vec<usize>> = members.iter().map(|&i| loo.order(i).to_vec()).collect();
    Ok(loocv_objectives(ds.projects(), &members, &orders, sol, baseline))
}

fn loocv_objectives(
    projects: &[Project],
    members: &[usize],
    orders: &[Vec<usize>],
    sol: &SolutionVector,
    baseline: &RandomGuessBaseline,
) -> Vec<f64> {
    let records: Vec<PredictionRecord> = members
        .iter()
        .zip(orders)
        .map(|(&i, order)| {
            let target = &projects[i];
            PredictionRecord::new(target.effort, predict_adapted_ranked(projects, target, order, sol))
        })
        .collect();
    let means = metrics::aggregate(&records).expect("non-empty fold");
    // a zero-spread baseline has no SA; mae - 1 keeps the ordering and equals -1 when perfect
    let neg_sa = metrics::sa(means.mae, baseline).map_or(means.mae - 1.0, |s| -s);
    vec![neg_sa, means.mbre, means.mibre]
}

/// Index of the front member with the smallest average per-objective rank.
///
/// Ranks are 1 = smallest with average ranks for ties. Remaining ties go to
/// the smaller first objective, then to the earlier entry.
pub fn select_from_front(front: &[Vec<f64>]) -> Result<usize> {
    if front.is_empty() {
        return Err(Error::InvalidArgument("cannot select from an empty front".into()));
    }
    let n = front.len();
    let objectives = front[0].len();
    let mut avg = vec![0.0; n];
    for obj in 0..objectives {
        let column: Vec<f64> = front.iter().map(|f| f[obj]).collect();
        for (a, r) in avg.iter_mut().zip(average_ranks(&column)) {
            *a += r;
        }
    }
    let best = (0..n)
        .min_by(|&a, &b| {
            avg[a]
                .total_cmp(&avg[b])
                .then(front[a][0].total_cmp(&front[b][0]))
                .then(a.cmp(&b))
        })
        .expect("non-empty");
    Ok(best)
}

/// 1-based ranks of `values` ascending, ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]].total_cmp(&values[order[i]]) == Ordering::Equal {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

struct LocalOracleProblem<'a> {
    projects: &'a [Project],
    target: usize,
    order: &'a [usize],
    encoding: Encoding,
    bounds: Bounds,
}

impl Problem for LocalOracleProblem<'_> {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let sol = self.encoding.decode_used(x);
        let target = &self.projects[self.target];
        point_objectives(target.effort, predict_adapted_ranked(self.projects, target, self.order, &sol))
    }
}

/// Leave-one-out objectives over a subset of the projects.
struct LoocvProblem<'a> {
    projects: &'a [Project],
    members: Vec<usize>,
    orders: Vec<Vec<usize>>,
    baseline: RandomGuessBaseline,
    encoding: Encoding,
    bounds: Bounds,
}

impl<'a> LoocvProblem<'a> {
    fn new(
        projects: &'a [Project],
        loo: &LooNeighbors,
        holdout: Option<usize>,
        m: usize,
        variant: VariantConfig,
        baseline_mode: BaselineMode,
    ) -> Result<Self> {
        let members: Vec<usize> = (0..projects.len()).filter(|&i| Some(i) != holdout).collect();
        if members.len() < 2 {
            return Err(Error::InsufficientData("leave-one-out needs at least 2 projects".into()));
        }
        let orders: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| match holdout {
                Some(h) => loo.order_excluding(i, h),
                None => loo.order(i).to_vec(),
            })
            .collect();
        let efforts: Vec<f64> = members.iter().map(|&i| projects[i].effort).collect();
        let baseline = metrics::random_guess_baseline(&efforts, baseline_mode)?;
        let encoding = Encoding::new(members.len() - 1, m, variant)?;
        let bounds = encoding.bounds();
        Ok(Self {
            projects,
            members,
            orders,
            baseline,
            encoding,
            bounds,
        })
    }
}

impl Problem for LoocvProblem<'_> {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let sol = self.encoding.decode_used(x);
        loocv_objectives(self.projects, &self.members, &self.orders, &sol, &self.baseline)
    }
}

/// Predictions of a tuned method plus the solutions behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    /// One prediction per project, in dataset order.
    pub predictions: Vec<f64>,
    /// One solution per project for local tuning, a single shared one for
    /// global tuning.
    pub solutions: Vec<SolutionVector>,
    /// Size of the final archive behind each solution.
    pub front_sizes: Vec<usize>,
}

fn choose(archive: &mopso::Archive, encoding: &Encoding) -> Result<SolutionVector> {
    let fits: Vec<Vec<f64>> = archive.entries().iter().map(|e| e.fitness.clone()).collect();
    let best = select_from_front(&fits)?;
    Ok(encoding.decode(&archive.entries()[best].position))
}

/// Local tuning: one optimizer run per held-out project.
///
/// Fold `i` runs with seed `cfg.seed ^ i`; folds run in parallel.
pub fn run_lt(
    ds: &StandardizedDataset,
    variant: VariantConfig,
    cfg: &MopsoConfig,
    baseline_mode: BaselineMode,
) -> Result<TuningOutcome> {
    if !variant.mode.is_local() {
        return Err(Error::InvalidArgument("run_lt needs a local tuning mode".into()));
    }
    variant.validate()?;
    let n = ds.len();
    let m = ds.feature_count();
    let loo = LooNeighbors::new(ds);
    let projects = ds.projects();

    let folds: Vec<(f64, SolutionVector, usize)> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<(f64, SolutionVector, usize)> {
            let fold_cfg = MopsoConfig {
                seed: cfg.seed ^ i as u64,
                ..cfg.clone()
            };
            let order = loo.order(i);
            let (sol, front) = match variant.mode {
                TuningMode::LocalOracle => {
                    let encoding = Encoding::new(n - 1, m, variant)?;
                    let problem = LocalOracleProblem {
                        projects,
                        target: i,
                        order,
                        bounds: encoding.bounds(),
                        encoding,
                    };
                    let archive = mopso::run(&problem, &fold_cfg)?;
                    (choose(&archive, &problem.encoding)?, archive.len())
                }
                _ => {
                    let problem = LoocvProblem::new(projects, &loo, Some(i), m, variant, baseline_mode)?;
                    let archive = mopso::run(&problem, &fold_cfg)?;
                    (choose(&archive, &problem.encoding)?, archive.len())
                }
            };
            let predicted = predict_adapted_ranked(projects, &projects[i], order, &sol);
            Ok((predicted, sol, front))
        })
        .enumerate()
        .map(|(fold, r)| r.map_err(|e| Error::Fold { fold, source: Box::new(e) }))
        .collect::<Result<_>>()?;

    let mut out = TuningOutcome {
        predictions: Vec::with_capacity(n),
        solutions: Vec::with_capacity(n),
        front_sizes: Vec::with_capacity(n),
    };
    for (p, s, f) in folds {
        out.predictions.push(p);
        out.solutions.push(s);
        out.front_sizes.push(f);
    }
    Ok(out)
}

/// Global tuning: one optimizer run scored by leave-one-out over the whole
/// dataset, then the shared solution predicts every project.
pub fn run_gt(
    ds: &StandardizedDataset,
    variant: VariantConfig,
    cfg: &MopsoConfig,
    baseline_mode: BaselineMode,
) -> Result<TuningOutcome> {
    if variant.mode != TuningMode::Global {
        return Err(Error::InvalidArgument("run_gt needs the global tuning mode".into()));
    }
    let loo = LooNeighbors::new(ds);
    let problem = LoocvProblem::new(ds.projects(), &loo, None, ds.feature_count(), variant, baseline_mode)?;
    let archive = mopso::run(&problem, cfg)?;
    let sol = choose(&archive, &problem.encoding)?;
    let projects = ds.projects();
    let predictions = (0..ds.len())
        .map(|i| predict_adapted_ranked(projects, &projects[i], loo.order(i), &sol))
        .collect();
    Ok(TuningOutcome {
        predictions,
        solutions: vec![sol],
        front_sizes: vec![archive.len()],
    })
}

/// Result of the ABE0 analogy-count scan.
#[derive(Debug, Clone, PartialEq)]
pub struct BestK {
    pub k: usize,
    pub predictions: Vec<f64>,
    /// Leave-one-out MAE for k = 1, 2, ...
    pub mae_by_k: Vec<f64>,
}

/// Scans k over every training-set size under leave-one-out and keeps the
/// k with the lowest MAE, the smallest on ties.
pub fn best_k_abe0(ds: &StandardizedDataset) -> Result<BestK> {
    let n = ds.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("k scan needs at least 3 projects, got {n}")));
    }
    let loo = LooNeighbors::new(ds);
    let projects = ds.projects();
    let predict = |k: usize| -> Vec<f64> { (0..n).map(|i| predict_abe0_ranked(projects, loo.order(i), k)).collect() };
    let mut best: Option<(usize, f64)> = None;
    let mut mae_by_k = Vec::with_capacity(n - 1);
    for k in 1..n {
        let preds = predict(k);
        let mae = preds.iter().zip(projects).map(|(p, q)| (p - q.effort).abs()).sum::<f64>() / n as f64;
        mae_by_k.push(mae);
        if best.is_none_or(|(_, b)| mae < b) {
            best = Some((k, mae));
        }
    }
    let k = best.expect("n >= 3").0;
    Ok(BestK {
        k,
        predictions: predict(k),
        mae_by_k,
    })
}
