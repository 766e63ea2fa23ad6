//! Analogy retrieval, effort adaptation and rank aggregation.

use std::cmp::Ordering;

use crate::data::{FeatureValue, Project, StandardizedDataset, MAX_INPUT_FEATURES};
use crate::error::{Error, Result};
use crate::metrics::EPSILON_EFFORT;
use crate::tuning::SolutionVector;

/// A retrieved training project. `rank` is 1 for the nearest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub rank: usize,
}

/// Which input features take part in adaptation.
///
/// Stored as the integer `v` whose `m`-bit big-endian expansion is the mask:
/// feature 0 is the most significant bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureMask {
    value: u64,
    len: usize,
}

impl FeatureMask {
    pub fn from_integer(value: u64, len: usize) -> Result<Self> {
        if len == 0 || len > MAX_INPUT_FEATURES {
            return Err(Error::InvalidArgument(format!("mask length {len} out of range")));
        }
        let max = (1u64 << len) - 1;
        if value == 0 || value > max {
            return Err(Error::InvalidArgument(format!(
                "mask value {value} out of range 1..={max}"
            )));
        }
        Ok(Self { value, len })
    }

    pub fn all(len: usize) -> Self {
        assert!((1..=MAX_INPUT_FEATURES).contains(&len), "mask length {len} out of range");
        Self {
            value: (1u64 << len) - 1,
            len,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let value = bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b));
        Self::from_integer(value, bits.len())
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_set(&self, feature: usize) -> bool {
        debug_assert!(feature < self.len);
        (self.value >> (self.len - 1 - feature)) & 1 == 1
    }

    pub fn is_all(&self) -> bool {
        self.value == (1u64 << self.len) - 1
    }

    pub fn to_vec(&self) -> Vec<u8> {
        (0..self.len).map(|j| u8::from(self.is_set(j))).collect()
    }
}

/// Euclidean distance over input features; categorical features add 0 on a
/// label match and 1 otherwise.
pub fn distance(a: &Project, b: &Project) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|pair| match pair {
            (FeatureValue::Numeric(x), FeatureValue::Numeric(y)) => (x - y) * (x - y),
            (FeatureValue::Category(x), FeatureValue::Category(y)) => f64::from(u8::from(x != y)),
            _ => 1.0,
        })
        .sum::<f64>()
        .sqrt()
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// The `k` nearest projects of `train`, ties broken by lower index.
pub fn retrieve(train: &StandardizedDataset, target: &Project, k: usize) -> Result<Vec<Neighbor>> {
    let n = train.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, max: n });
    }
    let mut scored: Vec<(f64, usize)> = train
        .projects()
        .iter()
        .enumerate()
        .map(|(i, p)| (distance(target, p), i))
        .collect();
    scored.sort_by(by_distance_then_index);
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, (distance, index))| Neighbor {
            index,
            distance,
            rank: r + 1,
        })
        .collect())
}

pub fn mean_aggregate(efforts: &[f64]) -> f64 {
    assert!(!efforts.is_empty(), "mean of an empty sequence");
    efforts.iter().sum::<f64>() / efforts.len() as f64
}

/// Inverse ranked weighted mean; `efforts` are ordered nearest first.
pub fn irwm_aggregate(efforts: &[f64]) -> f64 {
    assert!(!efforts.is_empty(), "IRWM of an empty sequence");
    let k = efforts.len();
    let num: f64 = efforts
        .iter()
        .enumerate()
        .map(|(i, e)| (k - i) as f64 * e)
        .sum();
    num / (k * (k + 1) / 2) as f64
}

/// OWM weights for ranks 1..=k: `2^(k-i) / (2^k - 1)`.
///
/// Evaluated as `2^-i / (1 - 2^-k)` so that large `k` does not overflow.
pub fn owm_weights(k: usize) -> Vec<f64> {
    assert!(k >= 1, "OWM needs at least one analogy");
    let denom = 1.0 - 0.5f64.powi(k.min(2000) as i32);
    (1..=k).map(|i| 0.5f64.powi(i.min(2000) as i32) / denom).collect()
}

/// Ordered weighted mean; `efforts` are ordered nearest first.
pub fn owm_aggregate(efforts: &[f64]) -> f64 {
    owm_weights(efforts.len())
        .iter()
        .zip(efforts)
        .map(|(w, e)| w * e)
        .sum()
}

/// Adjusts an analogy's effort toward the target:
/// `e + (1/m) * sum_j w_j * v_j * (f_tj - f_ij)` over numeric features.
///
/// Categorical features never contribute. `m` counts every input feature,
/// masked or not.
pub fn adapt_effort(
    target: &Project,
    analogy: &Project,
    analogy_effort: f64,
    weights_row: &[f64],
    mask: &FeatureMask,
) -> f64 {
    let m = target.values.len();
    debug_assert_eq!(weights_row.len(), m);
    debug_assert_eq!(mask.len(), m);
    let mut sum = 0.0;
    for (j, w) in weights_row.iter().enumerate() {
        if !mask.is_set(j) {
            continue;
        }
        if let (FeatureValue::Numeric(ft), FeatureValue::Numeric(fi)) = (target.values[j], analogy.values[j]) {
            sum += w * (ft - fi);
        }
    }
    analogy_effort + sum / m as f64
}

/// Mean effort of the `k` nearest analogies.
pub fn predict_abe0(train: &StandardizedDataset, target: &Project, k: usize) -> Result<f64> {
    let efforts: Vec<f64> = retrieve(train, target, k)?
        .iter()
        .map(|nb| train.project(nb.index).effort)
        .collect();
    Ok(mean_aggregate(&efforts))
}

/// Retrieves `sol.k` analogies, adapts each with its rank's weight row and
/// OWM-aggregates, clamping the result to at least `EPSILON_EFFORT`.
pub fn predict_adapted(train: &StandardizedDataset, target: &Project, sol: &SolutionVector) -> Result<f64> {
    sol.check(train.len(), train.feature_count())?;
    let order: Vec<usize> = retrieve(train, target, sol.k)?.iter().map(|nb| nb.index).collect();
    Ok(predict_adapted_ranked(train.projects(), target, &order, sol))
}

/// [`predict_adapted`] with a precomputed neighbour order (nearest first,
/// at least `sol.k` long). The solution is not validated.
pub fn predict_adapted_ranked(projects: &[Project], target: &Project, order: &[usize], sol: &SolutionVector) -> f64 {
    let k = sol.k;
    let denom = 1.0 - 0.5f64.powi(k.min(2000) as i32);
    let mut weight = 0.5 / denom;
    let mut total = 0.0;
    for (rank, &idx) in order[..k].iter().enumerate() {
        let analogy = &projects[idx];
        let adapted = adapt_effort(target, analogy, analogy.effort, sol.weights.row(rank), &sol.mask);
        total += weight * adapted;
        weight *= 0.5;
    }
    total.max(EPSILON_EFFORT)
}

/// Mean effort of the first `k` projects of a precomputed order.
pub fn predict_abe0_ranked(projects: &[Project], order: &[usize], k: usize) -> f64 {
    order[..k].iter().map(|&i| projects[i].effort).sum::<f64>() / k as f64
}

/// Neighbour orders for leave-one-out evaluation.
///
/// Row `i` lists every other project of the dataset, nearest first, ties
/// broken by index. Since removing project `i` keeps the relative order of
/// the remaining indices, this equals `retrieve(ds.without(i), ..)` mapped
/// back to original indices.
#[derive(Debug, Clone)]
pub struct LooNeighbors {
    orders: Vec<Vec<usize>>,
}

impl LooNeighbors {
    pub fn new(ds: &StandardizedDataset) -> Self {
        let projects = ds.projects();
        let n = projects.len();
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = distance(&projects[i], &projects[j]);
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        let orders = (0..n)
            .map(|i| {
                let mut row: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (dist[i * n + j], j)).collect();
                row.sort_by(by_distance_then_index);
                row.into_iter().map(|(_, j)| j).collect()
            })
            .collect();
        Self { orders }
    }

    /// Order for `target` among all projects except those in `skip`, built
    /// from a row of this table.
    pub fn order_excluding(&self, target: usize, skip: usize) -> Vec<usize> {
        self.orders[target].iter().copied().filter(|&j| j != skip).collect()
    }

    pub fn order(&self, i: usize) -> &[usize] {
        &self.orders[i]
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }
}
