//! Randomized invariant checks shared by the property tests and the
//! acceptance suite. Each check runs `cases` generated inputs and returns
//! the first counterexample as text.

#![allow(dead_code)]

pub mod examples;

use std::path::PathBuf;

use abe_mopso::abe::{irwm_aggregate, owm_aggregate};
use abe_mopso::data::{load_standardized, ColumnRoles, Schema, StandardizedDataset};
use abe_mopso::metrics::{evaluate, random_guess_baseline, BaselineMode, PredictionRecord};
use abe_mopso::mopso::{
    dominates, run, run_observed, update_position, update_velocity, Archive, Bounds, MopsoConfig, Particle, Problem,
};
use abe_mopso::stats::{rank_sum_exact, rank_sum_normal, wilcoxon_rank_sum, win_tie_loss, Measure};
use abe_mopso::tuning::{
    decode_mask, gt_objectives, lt_objectives, run_gt, run_lt, Encoding, SolutionVector, TuningMode, VariantConfig,
    WeightMatrix,
};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

fn report<T: std::fmt::Debug>(r: Result<(), proptest::test_runner::TestError<T>>) -> Result<(), String> {
    r.map_err(|e| e.to_string())
}

/// Small integer coordinates so that equal and comparable pairs are common.
fn objective(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    vec((0i32..4).prop_map(f64::from), dim)
}

pub fn dominance_laws(cases: u32) -> Result<(), String> {
    let strat = (1usize..5).prop_flat_map(|d| (objective(d), objective(d), objective(d)));
    report(runner(cases).run(&strat, |(a, b, c)| {
        let dom = |x: &[f64], y: &[f64]| dominates(x, y).expect("equal lengths");
        prop_assert!(!dom(&a, &a), "reflexive at {a:?}");
        prop_assert!(!(dom(&a, &b) && dom(&b, &a)), "symmetric pair {a:?} {b:?}");
        if dom(&a, &b) && dom(&b, &c) {
            prop_assert!(dom(&a, &c), "not transitive {a:?} {b:?} {c:?}");
        }
        Ok(())
    }))
}

pub fn archive_nondominance(cases: u32) -> Result<(), String> {
    let strat = (1usize..8, 2usize..4).prop_flat_map(|(cap, d)| {
        (Just(cap), vec(vec((0i32..10).prop_map(f64::from), d), 1..40), 1usize..4)
    });
    report(runner(cases).run(&strat, |(cap, fits, batches)| {
        let mut archive = Archive::new(cap);
        let chunk = fits.len().div_ceil(batches);
        for part in fits.chunks(chunk) {
            let positions: Vec<Vec<f64>> = part.iter().map(|f| vec![f[0]]).collect();
            archive.update(positions.iter().zip(part).map(|(p, f)| (p.as_slice(), f.as_slice())));
            prop_assert!(archive.len() <= cap, "archive grew to {} over capacity {cap}", archive.len());
            prop_assert!(!archive.is_empty());
            let e = archive.entries();
            for i in 0..e.len() {
                for j in 0..e.len() {
                    if i != j {
                        prop_assert!(
                            !dominates(&e[i].fitness, &e[j].fitness).unwrap(),
                            "{:?} dominates {:?} inside the archive",
                            e[i].fitness,
                            e[j].fitness
                        );
                    }
                }
            }
        }
        Ok(())
    }))
}

pub fn weight_row_sums(cases: u32) -> Result<(), String> {
    let strat = (2usize..10, 1usize..6).prop_flat_map(|(n, m)| {
        let enc = Encoding::new(n, m, VariantConfig::full(TuningMode::Global)).expect("valid encoding");
        let b = enc.bounds();
        let coords: Vec<_> = (0..enc.dim()).map(|d| b.lower()[d]..=b.upper()[d]).collect();
        (Just(enc), coords)
    });
    report(runner(cases).run(&strat, |(enc, x)| {
        let sol = enc.decode(&x);
        for r in 0..sol.weights.rows() {
            let row = sol.weights.row(r);
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-9, "row {r} sums to {sum}");
            prop_assert!(row.iter().all(|w| (0.0..=1.0).contains(w)));
        }
        Ok(())
    }))
}

pub fn position_in_bounds(cases: u32) -> Result<(), String> {
    let strat = (1usize..6)
        .prop_flat_map(|d| {
            (
                vec(-10.0f64..10.0, d),
                vec(0.1f64..5.0, d),
                vec(0.0f64..=1.0, d),
                vec(0.0f64..=1.0, d),
                vec(0.0f64..=1.0, d),
                vec(-1.0f64..=1.0, d),
                any::<u64>(),
            )
        })
        .prop_map(|(lo, width, at, pb, gb, vel, seed)| {
            let hi: Vec<f64> = lo.iter().zip(&width).map(|(l, w)| l + w).collect();
            let place = |f: &[f64]| -> Vec<f64> { f.iter().zip(&lo).zip(&width).map(|((f, l), w)| l + f * w).collect() };
            let bounds = Bounds::new(lo.clone(), hi).expect("lower below upper");
            let v: Vec<f64> = vel.iter().zip(bounds.v_max()).map(|(s, c)| s * c).collect();
            let p = Particle {
                position: place(&at),
                velocity: v,
                fitness: vec![0.0],
                pbest_position: place(&pb),
                pbest_fitness: vec![0.0],
            };
            (bounds, p, place(&gb), seed)
        });
    let cfg = MopsoConfig::default();
    report(runner(cases).run(&strat, |(bounds, mut p, gbest, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in 0..5 {
            p.velocity = update_velocity(&p, &gbest, cfg.inertia_at(t), &cfg, &bounds, &mut rng);
            for (v, cap) in p.velocity.iter().zip(bounds.v_max()) {
                prop_assert!(v.abs() <= *cap, "velocity {v} over cap {cap}");
            }
            update_position(&mut p.position, &mut p.velocity, &bounds);
            prop_assert!(bounds.contains(&p.position), "{:?} left the box", p.position);
        }
        Ok(())
    }))
}

pub fn aggregate_fixed_points(cases: u32) -> Result<(), String> {
    let strat = (1e-3f64..1e6, 1usize..40);
    report(runner(cases).run(&strat, |(c, k)| {
        let efforts = vec![c; k];
        let owm = owm_aggregate(&efforts);
        let irwm = irwm_aggregate(&efforts);
        prop_assert!((owm - c).abs() <= 1e-9 * c.max(1.0), "OWM {owm} != {c}");
        prop_assert!((irwm - c).abs() <= 1e-9 * c.max(1.0), "IRWM {irwm} != {c}");
        Ok(())
    }))
}

pub fn sa_scale_invariance(cases: u32) -> Result<(), String> {
    let strat = (2usize..20)
        .prop_flat_map(|n| (vec(1.0f64..1000.0, n), vec(1.0f64..1000.0, n), 0.01f64..100.0));
    report(runner(cases).run(&strat, |(actual, predicted, c)| {
        let suite = |scale: f64| -> Result<Option<f64>, TestCaseError> {
            let efforts: Vec<f64> = actual.iter().map(|a| a * scale).collect();
            let records: Vec<PredictionRecord> =
                actual.iter().zip(&predicted).map(|(a, p)| PredictionRecord::new(a * scale, p * scale)).collect();
            let base = random_guess_baseline(&efforts, BaselineMode::Exact).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let s = evaluate(&records, &base).map_err(|e| TestCaseError::fail(e.to_string()))?;
            Ok(s.sa)
        };
        match (suite(1.0)?, suite(c)?) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "SA {a} vs scaled {b}"),
            (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
        }
        Ok(())
    }))
}

pub fn wilcoxon_symmetry(cases: u32) -> Result<(), String> {
    let strat = (vec((0i32..20).prop_map(f64::from), 1..15), vec((0i32..20).prop_map(f64::from), 1..15));
    report(runner(cases).run(&strat, |(a, b)| {
        let ab = wilcoxon_rank_sum(&a, &b).unwrap();
        let ba = wilcoxon_rank_sum(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() <= 1e-12, "p(a, b) = {ab} but p(b, a) = {ba}");
        prop_assert!((0.0..=1.0).contains(&ab));
        Ok(())
    }))
}

/// Distinct reals split into groups of 4..=12 at the exact-path limit of 16.
pub fn wilcoxon_exact_vs_normal(cases: u32) -> Result<(), String> {
    let strat = (vec(-1e3f64..1e3, 16), 4usize..=12).prop_filter("tie-free", |(xs, _)| {
        let mut s = xs.clone();
        s.sort_by(f64::total_cmp);
        s.windows(2).all(|w| w[0] != w[1])
    });
    report(runner(cases).run(&strat, |(xs, n_a)| {
        let (a, b) = xs.split_at(n_a);
        let exact = rank_sum_exact(a, b).unwrap();
        let normal = rank_sum_normal(a, b).unwrap();
        prop_assert!((exact - normal).abs() <= 0.02, "exact {exact} vs normal {normal} for n_a = {n_a}");
        Ok(())
    }))
}

pub type PropertyCheck = fn(u32) -> Result<(), String>;

pub const ALL: [(&str, PropertyCheck); 8] = [
    ("dominance partial order", dominance_laws),
    ("archive non-dominance and capacity", archive_nondominance),
    ("weight row sums", weight_row_sums),
    ("position in bounds", position_in_bounds),
    ("OWM/IRWM constant input", aggregate_fixed_points),
    ("SA scale invariance", sa_scale_invariance),
    ("Wilcoxon symmetry", wilcoxon_symmetry),
    ("Wilcoxon exact vs normal", wilcoxon_exact_vs_normal),
];

pub fn small8x4() -> StandardizedDataset {
    let schema = Schema::Inferred(ColumnRoles {
        effort_column: "effort".into(),
        ..ColumnRoles::default()
    });
    load_standardized(repo_root().join("data/synthetic/small8x4.csv"), &schema).expect("bundled synthetic data loads")
}

fn dominated_by_any(f: &[f64], pool: &[Vec<f64>]) -> bool {
    pool.iter().any(|g| dominates(g, f).expect("equal lengths"))
}

/// The vector every other vector equals or is dominated by, if one exists.
fn unique_dominator(pool: &[Vec<f64>]) -> Option<&Vec<f64>> {
    pool.iter()
        .find(|c| pool.iter().all(|g| g == *c || dominates(c, g).expect("equal lengths")))
}

/// Unit-weight local tuning on the 8-project synthetic set against every
/// (k, v) combination, project by project. Returns how many projects had a
/// single enumerated vector dominating all others.
pub fn lt_plus_bruteforce(cfg: &MopsoConfig) -> Result<usize, String> {
    let ds = small8x4();
    let (n, m) = (ds.len(), ds.feature_count());
    let out = run_lt(&ds, VariantConfig::unit_weights(TuningMode::LocalOracle), cfg, BaselineMode::Exact)
        .map_err(|e| e.to_string())?;
    let mut unique = 0;
    for i in 0..n {
        let train = ds.without(i);
        let target = ds.project(i);
        let objectives = |s: &SolutionVector| lt_objectives(&train, target, target.effort, s).expect("valid solution");
        let mut pool = Vec::new();
        for k in 1..n {
            for v in 1..(1u64 << m) {
                let s = SolutionVector {
                    k,
                    mask: decode_mask(v, m).expect("v in range"),
                    weights: WeightMatrix::ones(n - 1, m),
                };
                pool.push(objectives(&s));
            }
        }
        let chosen = objectives(&out.solutions[i]);
        if dominated_by_any(&chosen, &pool) {
            return Err(format!("project {}: selected {chosen:?} is dominated by an enumerated solution", i + 1));
        }
        if let Some(best) = unique_dominator(&pool) {
            unique += 1;
            if (chosen[0] - best[0]).abs() > 1e-9 {
                return Err(format!("project {}: selected AE {} but the optimum is {}", i + 1, chosen[0], best[0]));
            }
        }
    }
    Ok(unique)
}

/// Unit-weight global tuning on the twins set, where k = 1 predicts every
/// project exactly under any mask and nothing else does.
pub fn gt_plus_unanimous() -> Result<(), String> {
    let ds = examples::twins();
    let (n, m) = (ds.len(), ds.feature_count());
    let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(|e| e.to_string())?;
    let mut pool = Vec::new();
    for k in 1..n {
        for v in 1..(1u64 << m) {
            let s = SolutionVector {
                k,
                mask: decode_mask(v, m).expect("v in range"),
                weights: WeightMatrix::ones(n - 1, m),
            };
            pool.push(gt_objectives(&ds, &s, &base).map_err(|e| e.to_string())?);
        }
    }
    let best = unique_dominator(&pool).ok_or("the contrived dataset has no unanimous optimum")?.clone();
    let cfg = MopsoConfig {
        pop_size: 30,
        max_iter: 30,
        seed: 5,
        ..MopsoConfig::default()
    };
    let out = run_gt(&ds, VariantConfig::unit_weights(TuningMode::Global), &cfg, BaselineMode::Exact)
        .map_err(|e| e.to_string())?;
    let chosen = gt_objectives(&ds, &out.solutions[0], &base).map_err(|e| e.to_string())?;
    if chosen != best || out.solutions[0].k != 1 {
        return Err(format!("selected k = {} with {chosen:?}, enumeration optimum {best:?}", out.solutions[0].k));
    }
    Ok(())
}

pub struct Bowl {
    pub bounds: Bounds,
}

impl Problem for Bowl {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0]]
    }
}

pub struct TwoBowls {
    pub bounds: Bounds,
}

impl Problem for TwoBowls {
    fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] * x[0], (x[0] - 2.0) * (x[0] - 2.0)]
    }
}

fn line() -> Bounds {
    Bounds::uniform(1, -5.0, 5.0).expect("valid bounds")
}

pub fn closed_form_cfg(seed: u64) -> MopsoConfig {
    MopsoConfig {
        pop_size: 50,
        max_iter: 100,
        seed,
        ..MopsoConfig::default()
    }
}

pub fn bowl_collapses(seed: u64) -> Result<(), String> {
    let archive = run(&Bowl { bounds: line() }, &closed_form_cfg(seed)).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = archive.entries().iter().map(|e| e.position[0]).collect();
    if xs.len() == 1 && xs[0].abs() < 0.05 {
        Ok(())
    } else {
        Err(format!("archive positions {xs:?}"))
    }
}

/// Exhaustive non-dominance, coverage of [0, 2] in 0.1 bins and both
/// extreme objective vectors.
pub fn two_bowls_front(cfg: &MopsoConfig) -> Result<(), String> {
    let archive = run(&TwoBowls { bounds: line() }, cfg).map_err(|e| e.to_string())?;
    let e = archive.entries();
    for a in e {
        for b in e {
            if dominates(&a.fitness, &b.fitness).expect("equal lengths") {
                return Err(format!("{:?} dominates {:?}", a.fitness, b.fitness));
            }
        }
    }
    let mut bins = [false; 20];
    for a in e {
        let x = a.position[0];
        if (0.0..=2.0).contains(&x) {
            bins[((x / 0.1) as usize).min(19)] = true;
        }
    }
    let covered = bins.iter().filter(|b| **b).count();
    if covered < 18 {
        return Err(format!("front covers {covered} of 20 bins"));
    }
    let nearest = |target: [f64; 2]| {
        e.iter()
            .map(|a| ((a.fitness[0] - target[0]).powi(2) + (a.fitness[1] - target[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
    };
    let (left, right) = (nearest([0.0, 4.0]), nearest([4.0, 0.0]));
    if left > 0.1 || right > 0.1 {
        return Err(format!("endpoints are {left} and {right} away"));
    }
    Ok(())
}

/// With one iteration the archive holds exactly the non-dominated objective
/// vectors among everything evaluated.
pub fn single_iteration_archive(seed: u64) -> Result<(), String> {
    let cfg = MopsoConfig {
        pop_size: 20,
        max_iter: 1,
        seed,
        ..MopsoConfig::default()
    };
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let archive = run_observed(&TwoBowls { bounds: line() }, &cfg, |s| {
        seen.extend(s.particles.iter().map(|p| p.fitness.clone()));
    })
    .map_err(|e| e.to_string())?;
    let mut want: Vec<Vec<f64>> = seen.iter().filter(|f| !dominated_by_any(f, &seen)).cloned().collect();
    want.sort_by(|a, b| a[0].total_cmp(&b[0]));
    want.dedup();
    let mut got: Vec<Vec<f64>> = archive.entries().iter().map(|e| e.fitness.clone()).collect();
    got.sort_by(|a, b| a[0].total_cmp(&b[0]));
    if got == want {
        Ok(())
    } else {
        Err(format!("archive {got:?}, non-dominated evaluations {want:?}"))
    }
}

/// Random 4-method tournament over every measure: wins and losses balance.
pub fn tournament_balances(seed: u64) -> Result<(), String> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let errors: Vec<Vec<f64>> = (0..4)
        .map(|j| (0..20).map(|_| rng.gen_range(0.0..100.0) * (1.0 + j as f64)).collect())
        .collect();
    for measure in Measure::ALL {
        let values: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t = win_tie_loss(&errors, &values, measure).map_err(|e| e.to_string())?;
        let wins: usize = t.iter().map(|x| x.win).sum();
        let losses: usize = t.iter().map(|x| x.loss).sum();
        if wins != losses {
            return Err(format!("{measure}: {wins} wins vs {losses} losses"));
        }
        if t.iter().any(|x| x.win + x.tie + x.loss != 3) {
            return Err(format!("{measure}: a method did not play 3 comparisons"));
        }
    }
    Ok(())
}
