//! Accuracy measures: AE, BRE, IBRE and their means, standardized accuracy
//! against a random-guess baseline, effect size and LSD.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower clamp applied to predictions before ratio measures and logs.
pub const EPSILON_EFFORT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub actual: f64,
    pub predicted: f64,
}

impl PredictionRecord {
    pub fn new(actual: f64, predicted: f64) -> Self {
        Self { actual, predicted }
    }

    fn clamped(&self) -> f64 {
        self.predicted.max(EPSILON_EFFORT)
    }
}

pub fn ae(r: &PredictionRecord) -> f64 {
    (r.actual - r.predicted).abs()
}

/// `AE / min(actual, predicted)` on the clamped prediction.
pub fn bre(r: &PredictionRecord) -> f64 {
    let p = r.clamped();
    (r.actual - p).abs() / r.actual.min(p)
}

/// `AE / max(actual, predicted)` on the clamped prediction.
pub fn ibre(r: &PredictionRecord) -> f64 {
    let p = r.clamped();
    (r.actual - p).abs() / r.actual.max(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMeans {
    pub mae: f64,
    pub mbre: f64,
    pub mibre: f64,
}

pub fn aggregate(records: &[PredictionRecord]) -> Result<ErrorMeans> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no prediction records".into()));
    }
    let n = records.len() as f64;
    let mean = |f: fn(&PredictionRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
    Ok(ErrorMeans {
        mae: mean(ae),
        mbre: mean(bre),
        mibre: mean(ibre),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    Exact,
    Sampled { runs: usize, seed: u64 },
}

/// Expected MAE of guessing each project's effort as that of another
/// project drawn uniformly at random, and the SD of the guess errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomGuessBaseline {
    pub mae_p0: f64,
    pub sp0: f64,
    pub mode: BaselineMode,
}

pub fn random_guess_baseline(efforts: &[f64], mode: BaselineMode) -> Result<RandomGuessBaseline> {
    let n = efforts.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "random-guess baseline needs at least 2 efforts, got {n}"
        )));
    }
    let (mae_p0, sp0) = match mode {
        BaselineMode::Exact => {
            let mut per_project = 0.0;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for (i, ei) in efforts.iter().enumerate() {
                let mut row = 0.0;
                for (r, er) in efforts.iter().enumerate() {
                    if r != i {
                        let d = (ei - er).abs();
                        row += d;
                        sum += d;
                        sum_sq += d * d;
                    }
                }
                per_project += row / (n - 1) as f64;
            }
            let count = (n * (n - 1)) as f64;
            (per_project / n as f64, sample_sd(sum, sum_sq, count))
        }
        BaselineMode::Sampled { runs, seed } => {
            if runs == 0 {
                return Err(Error::InvalidArgument("sampled baseline needs at least one run".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut run_maes = 0.0;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..runs {
                let mut run = 0.0;
                for (i, ei) in efforts.iter().enumerate() {
                    let mut r = rng.gen_range(0..n - 1);
                    if r >= i {
                        r += 1;
                    }
                    let d = (ei - efforts[r]).abs();
                    run += d;
                    sum += d;
                    sum_sq += d * d;
                }
                run_maes += run / n as f64;
            }
            (run_maes / runs as f64, sample_sd(sum, sum_sq, (runs * n) as f64))
        }
    };
    Ok(RandomGuessBaseline { mae_p0, sp0, mode })
}

fn sample_sd(sum: f64, sum_sq: f64, count: f64) -> f64 {
    if count < 2.0 {
        return 0.0;
    }
    let mean = sum / count;
    ((sum_sq - count * mean * mean).max(0.0) / (count - 1.0)).sqrt()
}

/// Standardized accuracy `1 - mae / mae_p0`.
pub fn sa(mae: f64, baseline: &RandomGuessBaseline) -> Result<f64> {
    if baseline.mae_p0 <= 0.0 {
        return Err(Error::UndefinedBaseline);
    }
    Ok(1.0 - mae / baseline.mae_p0)
}

/// `(mae - baseline_mae) / baseline_sd`; negative when `mae` beats the baseline.
pub fn effect_size_signed(mae: f64, baseline_mae: f64, baseline_sd: f64) -> Result<f64> {
    if baseline_sd <= 0.0 {
        return Err(Error::InvalidArgument("effect size needs a positive baseline SD".into()));
    }
    Ok((mae - baseline_mae) / baseline_sd)
}

/// Magnitude of [`effect_size_signed`].
pub fn effect_size(mae: f64, baseline_mae: f64, baseline_sd: f64) -> Result<f64> {
    effect_size_signed(mae, baseline_mae, baseline_sd).map(f64::abs)
}

/// LSD of the log residuals `ln(actual) - ln(predicted)`.
pub fn lsd(records: &[PredictionRecord]) -> Result<f64> {
    let lambdas: Vec<f64> = records.iter().map(|r| r.actual.ln() - r.clamped().ln()).collect();
    lsd_from_log_residuals(&lambdas)
}

/// `sqrt(sum (l_i + s^2/2)^2 / (n - 1))` with `s^2` the sample variance of `l`.
pub fn lsd_from_log_residuals(lambdas: &[f64]) -> Result<f64> {
    let n = lambdas.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("LSD needs at least 2 records, got {n}")));
    }
    let df = (n - 1) as f64;
    let mean = lambdas.iter().sum::<f64>() / n as f64;
    let s2 = lambdas.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / df;
    Ok((lambdas.iter().map(|l| (l + s2 / 2.0).powi(2)).sum::<f64>() / df).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSuite {
    pub mae: f64,
    /// `None` when the baseline is degenerate and the model is not perfect.
    pub sa: Option<f64>,
    pub mbre: f64,
    pub mibre: f64,
    pub lsd: f64,
    /// Effect size against random guessing; `None` when `sp0 = 0`.
    pub effect_size: Option<f64>,
    pub effect_size_signed: Option<f64>,
    pub n: usize,
}

/// Computes every measure for a set of predictions.
///
/// A perfect predictor scores SA = 1 even on a zero-spread baseline.
pub fn evaluate(records: &[PredictionRecord], baseline: &RandomGuessBaseline) -> Result<MetricSuite> {
    let means = aggregate(records)?;
    let sa = match sa(means.mae, baseline) {
        Ok(v) => Some(v),
        Err(_) if means.mae == 0.0 => Some(1.0),
        Err(_) => None,
    };
    let signed = effect_size_signed(means.mae, baseline.mae_p0, baseline.sp0).ok();
    Ok(MetricSuite {
        mae: means.mae,
        sa,
        mbre: means.mbre,
        mibre: means.mibre,
        lsd: lsd(records)?,
        effect_size: signed.map(f64::abs),
        effect_size_signed: signed,
        n: records.len(),
    })
}
