//! Wilcoxon rank-sum test, win-tie-loss tallies and rank summaries.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::tuning::average_ranks;

/// Two-sided significance level for every comparison.
pub const ALPHA: f64 = 0.05;

/// Pooled sample size up to which the exact null distribution is used.
pub const EXACT_LIMIT: usize = 16;

/// Two-sided p-value of the Wilcoxon rank-sum test.
///
/// Uses midranks for ties. Exact when `|a| + |b| <= 16`, otherwise the
/// normal approximation with tie-corrected variance and continuity
/// correction.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() + b.len() <= EXACT_LIMIT {
        rank_sum_exact(a, b)
    } else {
        rank_sum_normal(a, b)
    }
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("rank-sum test needs two non-empty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("rank-sum test got a NaN".into()));
    }
    Ok(a.iter().chain(b).copied().collect())
}

/// Exact two-sided p-value by enumerating the null distribution of the
/// rank sum. Cost grows with `|a| * (|a| + |b|)^2`.
pub fn rank_sum_exact(a: &[f64], b: &[f64]) -> Result<f64> {
    let pooled = check_samples(a, b)?;
    Ok(exact_p(&average_ranks(&pooled), a.len()))
}

/// Normal-approximation two-sided p-value with tie and continuity correction.
pub fn rank_sum_normal(a: &[f64], b: &[f64]) -> Result<f64> {
    let pooled = check_samples(a, b)?;
    let ranks = average_ranks(&pooled);
    Ok(normal_p(&pooled, &ranks, a.len()))
}

/// Exact p by counting every `n_a`-subset of the pooled ranks. Midranks
/// are multiples of 1/2, so sums are tracked doubled as integers.
fn exact_p(ranks: &[f64], n_a: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[j][s]: subsets of size j with doubled rank sum s
    let mut ways = vec![vec![0f64; max_sum + 1]; n_a + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for j in (1..=n_a).rev() {
            for s in (r..=max_sum).rev() {
                let add = ways[j - 1][s - r];
                if add != 0.0 {
                    ways[j][s] += add;
                }
            }
        }
    }
    let observed: usize = doubled[..n_a].iter().sum();
    let total: f64 = ways[n_a].iter().sum();
    let expected2 = n_a as f64 * (ranks.len() as f64 + 1.0);
    let obs_dev = (observed as f64 - expected2).abs();
    let extreme: f64 = ways[n_a]
        .iter()
        .enumerate()
        .filter(|(s, _)| (*s as f64 - expected2).abs() >= obs_dev)
        .map(|(_, c)| c)
        .sum();
    (extreme / total).min(1.0)
}

fn normal_p(pooled: &[f64], ranks: &[f64], n_a: usize) -> f64 {
    let n = pooled.len() as f64;
    let na = n_a as f64;
    let nb = n - na;
    let w: f64 = ranks[..n_a].iter().sum();
    let mean = na * (n + 1.0) / 2.0;

    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("valid parameters");
    (2.0 * std_normal.sf(z)).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "SA")]
    Sa,
    #[serde(rename = "MBRE")]
    Mbre,
    #[serde(rename = "MIBRE")]
    Mibre,
    #[serde(rename = "LSD")]
    Lsd,
}

impl Measure {
    pub const ALL: [Measure; 5] = [Measure::Mae, Measure::Sa, Measure::Mbre, Measure::Mibre, Measure::Lsd];

    pub fn higher_is_better(self) -> bool {
        matches!(self, Measure::Sa)
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::Mae => "MAE",
            Measure::Sa => "SA",
            Measure::Mbre => "MBRE",
            Measure::Mibre => "MIBRE",
            Measure::Lsd => "LSD",
        }
    }

    /// True if `a` is strictly better than `b`; NaN is never better.
    pub fn better(self, a: f64, b: f64) -> bool {
        if self.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Win,
    Tie,
    Loss,
}

/// Outcome for method A: a tie unless the test rejects at [`ALPHA`], then
/// decided by the measure values.
pub fn outcome(p_value: f64, value_a: f64, value_b: f64, measure: Measure) -> Outcome {
    if p_value >= ALPHA {
        Outcome::Tie
    } else if measure.better(value_a, value_b) {
        Outcome::Win
    } else if measure.better(value_b, value_a) {
        Outcome::Loss
    } else {
        Outcome::Tie
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    pub method_a: String,
    pub method_b: String,
    pub p_value: f64,
    /// Outcome for `method_a` per measure.
    pub outcomes: Vec<(Measure, Outcome)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
}

impl Tally {
    fn record(&mut self, o: Outcome) {
        match o {
            Outcome::Win => self.win += 1,
            Outcome::Tie => self.tie += 1,
            Outcome::Loss => self.loss += 1,
        }
    }

    pub fn add(&mut self, other: &Tally) {
        self.win += other.win;
        self.tie += other.tie;
        self.loss += other.loss;
    }
}

/// Win-tie-loss tournament over every pair of methods for one measure.
///
/// `errors[i]` are the absolute errors of method `i` and `values[i]` its
/// aggregate score for `measure`. Returns one tally per method.
pub fn win_tie_loss(errors: &[Vec<f64>], values: &[f64], measure: Measure) -> Result<Vec<Tally>> {
    if errors.len() < 2 {
        return Err(Error::InvalidArgument("win-tie-loss needs at least 2 methods".into()));
    }
    if values.len() != errors.len() {
        return Err(Error::InvalidArgument("one measure value per method is required".into()));
    }
    let n = errors[0].len();
    if errors.iter().any(|e| e.len() != n) {
        return Err(Error::InvalidArgument("absolute-error sequences differ in length".into()));
    }
    let mut tallies = vec![Tally::default(); errors.len()];
    for i in 0..errors.len() {
        for j in (i + 1)..errors.len() {
            let p = wilcoxon_rank_sum(&errors[i], &errors[j])?;
            let o = outcome(p, values[i], values[j], measure);
            tallies[i].record(o);
            tallies[j].record(match o {
                Outcome::Win => Outcome::Loss,
                Outcome::Loss => Outcome::Win,
                Outcome::Tie => Outcome::Tie,
            });
        }
    }
    Ok(tallies)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub method: String,
    pub measure: Measure,
    pub mean_rank: f64,
    pub rank_sd: f64,
}

/// Ranks methods per dataset (1 = best, ties averaged) and summarizes each
/// method's ranks across datasets by mean and sample SD.
///
/// `table[d][i]` is the value of method `i` on dataset `d`.
pub fn rank_methods(table: &[Vec<Option<f64>>], methods: &[String], measure: Measure) -> Result<Vec<RankSummary>> {
    if table.is_empty() || methods.is_empty() {
        return Err(Error::InvalidArgument("rank table is empty".into()));
    }
    let mut ranks: Vec<Vec<f64>> = vec![Vec::with_capacity(table.len()); methods.len()];
    for (d, row) in table.iter().enumerate() {
        if row.len() != methods.len() {
            return Err(Error::InvalidArgument(format!("rank table row {d} has the wrong width")));
        }
        let values: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(i, v)| {
                v.filter(|x| !x.is_nan())
                    .map(|x| if measure.higher_is_better() { -x } else { x })
                    .ok_or_else(|| Error::InvalidArgument(format!("rank table has no value for dataset {d}, method {}", methods[i])))
            })
            .collect::<Result<_>>()?;
        for (i, r) in average_ranks(&values).into_iter().enumerate() {
            ranks[i].push(r);
        }
    }
    Ok(methods
        .iter()
        .zip(ranks)
        .map(|(m, r)| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let sd = if r.len() > 1 {
                (r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            RankSummary {
                method: m.clone(),
                measure,
                mean_rank: mean,
                rank_sd: sd,
            }
        })
        .collect())
}
