//! Worked examples for the metric, retrieval/adaptation and tuning layers,
//! checked through the public API. Each entry is (label, outcome).

use abe_mopso::abe::{
    adapt_effort, distance, irwm_aggregate, mean_aggregate, owm_aggregate, predict_abe0, predict_adapted, retrieve,
    FeatureMask,
};
use abe_mopso::data::{Project, StandardizedDataset};
use abe_mopso::metrics::{
    ae, aggregate, bre, effect_size, evaluate, ibre, lsd, lsd_from_log_residuals, random_guess_baseline, sa,
    BaselineMode, PredictionRecord, RandomGuessBaseline,
};
use abe_mopso::mopso::{dominates, MopsoConfig};
use abe_mopso::tuning::{
    best_k_abe0, decode_mask, gt_objectives, lt_objectives, normalize_row, run_gt, run_lt, select_from_front,
    Encoding, SolutionVector, TuningMode, VariantConfig, WeightMatrix,
};

pub type Check = Result<(), String>;

pub const TOL: f64 = 1e-9;

pub fn close(label: &str, got: f64, want: f64, tol: f64) -> Check {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{label}: got {got}, want {want} (tol {tol})"))
    }
}

pub fn ensure(label: &str, cond: bool) -> Check {
    if cond {
        Ok(())
    } else {
        Err(format!("{label}: does not hold"))
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rec(a: f64, p: f64) -> PredictionRecord {
    PredictionRecord::new(a, p)
}

fn numeric(rows: &[Vec<f64>], efforts: &[f64]) -> Result<StandardizedDataset, String> {
    StandardizedDataset::from_numeric("example", rows, efforts).map_err(err)
}

fn sol(k: usize, mask: FeatureMask, weights: WeightMatrix) -> SolutionVector {
    SolutionVector { k, mask, weights }
}

fn quick(seed: u64) -> MopsoConfig {
    MopsoConfig {
        pop_size: 20,
        max_iter: 20,
        seed,
        ..MopsoConfig::default()
    }
}

/// Two copies of each of three projects: k = 1 always finds an exact twin.
pub fn twins() -> StandardizedDataset {
    StandardizedDataset::from_numeric(
        "twins",
        &[vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 0.5], vec![1.0, 0.5], vec![0.3, 1.0], vec![0.3, 1.0]],
        &[10.0, 10.0, 40.0, 40.0, 25.0, 25.0],
    )
    .expect("valid dataset")
}

pub fn metrics_examples() -> Vec<(&'static str, Check)> {
    let base100 = RandomGuessBaseline {
        mae_p0: 100.0,
        sp0: 1.0,
        mode: BaselineMode::Exact,
    };
    vec![
        ("AE of an exact prediction is 0", close("ae", ae(&rec(100.0, 100.0)), 0.0, TOL)),
        ("AE (100, 80) is 20", close("ae", ae(&rec(100.0, 80.0)), 20.0, TOL)),
        ("AE (80, 100) is 20", close("ae", ae(&rec(80.0, 100.0)), 20.0, TOL)),
        ("BRE/IBRE (10, 5)", {
            let r = rec(10.0, 5.0);
            close("bre", bre(&r), 1.0, TOL).and(close("ibre", ibre(&r), 0.5, TOL))
        }),
        ("BRE/IBRE (5, 10)", {
            let r = rec(5.0, 10.0);
            close("bre", bre(&r), 1.0, TOL).and(close("ibre", ibre(&r), 0.5, TOL))
        }),
        ("BRE/IBRE (10, 10)", {
            let r = rec(10.0, 10.0);
            close("bre", bre(&r), 0.0, TOL).and(close("ibre", ibre(&r), 0.0, TOL))
        }),
        ("means of one record", (|| {
            let m = aggregate(&[rec(10.0, 5.0)]).map_err(err)?;
            close("mbre", m.mbre, 1.0, TOL)?;
            close("mibre", m.mibre, 0.5, TOL)?;
            close("mae", m.mae, 5.0, TOL)
        })()),
        ("MBRE of BREs {1, 0}", (|| {
            let m = aggregate(&[rec(10.0, 5.0), rec(3.0, 3.0)]).map_err(err)?;
            close("mbre", m.mbre, 0.5, TOL)
        })()),
        ("means of exact records", (|| {
            let m = aggregate(&[rec(1.0, 1.0), rec(2.0, 2.0)]).map_err(err)?;
            ensure("all zero", m.mae == 0.0 && m.mbre == 0.0 && m.mibre == 0.0)
        })()),
        ("exact baseline on [1, 2, 3]", (|| {
            let b = random_guess_baseline(&[1.0, 2.0, 3.0], BaselineMode::Exact).map_err(err)?;
            close("mae_p0", b.mae_p0, 4.0 / 3.0, TOL)
        })()),
        ("baseline of equal efforts", (|| {
            let b = random_guess_baseline(&[5.0; 4], BaselineMode::Exact).map_err(err)?;
            ensure("zero spread", b.mae_p0 == 0.0 && b.sp0 == 0.0)
        })()),
        ("sampled baseline near exact", (|| {
            let b = random_guess_baseline(&[1.0, 2.0, 3.0], BaselineMode::Sampled { runs: 100_000, seed: 11 })
                .map_err(err)?;
            close("mae_p0", b.mae_p0, 4.0 / 3.0, 0.02 * 4.0 / 3.0)
        })()),
        ("SA of a perfect predictor", sa(0.0, &base100).map_err(err).and_then(|v| close("sa", v, 1.0, TOL))),
        ("SA at the baseline", sa(100.0, &base100).map_err(err).and_then(|v| close("sa", v, 0.0, TOL))),
        ("SA 30 vs 100", sa(30.0, &base100).map_err(err).and_then(|v| close("sa", v, 0.7, TOL))),
        ("effect size at the baseline", effect_size(100.0, 100.0, 10.0).map_err(err).and_then(|v| close("delta", v, 0.0, TOL))),
        ("LSD of exact predictions", lsd(&[rec(3.0, 3.0), rec(7.0, 7.0)]).map_err(err).and_then(|v| close("lsd", v, 0.0, TOL))),
        ("LSD of residuals [0.1, -0.1]", lsd_from_log_residuals(&[0.1, -0.1]).map_err(err).and_then(|v| close("lsd", v, 0.14213, 1e-5))),
        ("LSD of constant residuals", lsd_from_log_residuals(&[0.37, 0.37]).map_err(err).and_then(|v| close("lsd", v, 0.37 * 2f64.sqrt(), 1e-6))),
    ]
}

pub fn abe_examples() -> Vec<(&'static str, Check)> {
    vec![
        ("distance 3-4-5 scaled", close(
            "d",
            distance(&Project::numeric(&[0.0, 0.0], 1.0), &Project::numeric(&[0.6, 0.8], 1.0)),
            1.0,
            TOL,
        )),
        ("distance to itself", close("d", distance(&Project::numeric(&[0.3, 0.9], 1.0), &Project::numeric(&[0.3, 0.9], 2.0)), 0.0, TOL)),
        ("retrieve every project", (|| {
            let train = numeric(&[vec![0.5], vec![0.2], vec![0.9]], &[1.0, 2.0, 3.0])?;
            let nb = retrieve(&train, &Project::numeric(&[0.0], 0.0), 3).map_err(err)?;
            ensure("sorted", nb.iter().map(|n| n.index).collect::<Vec<_>>() == vec![1, 0, 2])
        })()),
        ("retrieve a twin first", (|| {
            let train = numeric(&[vec![0.5], vec![0.2], vec![0.9]], &[1.0, 2.0, 3.0])?;
            let nb = retrieve(&train, &Project::numeric(&[0.9], 0.0), 1).map_err(err)?;
            ensure("twin at rank 1", nb[0].index == 2 && nb[0].distance == 0.0 && nb[0].rank == 1)
        })()),
        ("retrieve two of distances {0.5, 0.2, 0.9}", (|| {
            let train = numeric(&[vec![0.5], vec![0.2], vec![0.9]], &[1.0, 2.0, 3.0])?;
            let nb = retrieve(&train, &Project::numeric(&[0.0], 0.0), 2).map_err(err)?;
            ensure("order", nb.iter().map(|n| n.index).collect::<Vec<_>>() == vec![1, 0])?;
            close("d1", nb[0].distance, 0.2, TOL)?;
            close("d2", nb[1].distance, 0.5, TOL)
        })()),
        ("mean [10]", close("mean", mean_aggregate(&[10.0]), 10.0, TOL)),
        ("mean [10, 20, 30]", close("mean", mean_aggregate(&[10.0, 20.0, 30.0]), 20.0, TOL)),
        ("mean [7, 8]", close("mean", mean_aggregate(&[7.0, 8.0]), 7.5, TOL)),
        ("IRWM [10]", close("irwm", irwm_aggregate(&[10.0]), 10.0, TOL)),
        ("IRWM [10, 20]", close("irwm", irwm_aggregate(&[10.0, 20.0]), 40.0 / 3.0, TOL)),
        ("IRWM constant", close("irwm", irwm_aggregate(&[6.5; 3]), 6.5, TOL)),
        ("adapt toward an identical analogy", close(
            "adapt",
            adapt_effort(&Project::numeric(&[0.4, 0.2], 0.0), &Project::numeric(&[0.4, 0.2], 9.0), 9.0, &[1.0, 1.0], &FeatureMask::all(2)),
            9.0,
            TOL,
        )),
        ("adapt with both features", close(
            "adapt",
            adapt_effort(&Project::numeric(&[0.5, 0.5], 0.0), &Project::numeric(&[0.3, 0.1], 10.0), 10.0, &[1.0, 1.0], &FeatureMask::all(2)),
            10.3,
            TOL,
        )),
        ("adapt with the first feature only", (|| {
            let mask = FeatureMask::from_bits(&[true, false]).map_err(err)?;
            close(
                "adapt",
                adapt_effort(&Project::numeric(&[0.4, 0.9], 0.0), &Project::numeric(&[0.2, 0.1], 5.0), 5.0, &[1.0, 1.0], &mask),
                5.1,
                TOL,
            )
        })()),
        ("OWM [100]", close("owm", owm_aggregate(&[100.0]), 100.0, TOL)),
        ("OWM [7, 14, 21]", close("owm", owm_aggregate(&[7.0, 14.0, 21.0]), 11.0, TOL)),
        ("ABE0 with k = 1", (|| {
            let train = numeric(&[vec![0.0], vec![0.4], vec![0.6], vec![1.0]], &[10.0, 20.0, 30.0, 40.0])?;
            close("abe0", predict_abe0(&train, &Project::numeric(&[0.45], 0.0), 1).map_err(err)?, 20.0, TOL)
        })()),
        ("ABE0 with every project", (|| {
            let train = numeric(&[vec![0.0], vec![0.4], vec![0.6], vec![1.0]], &[10.0, 20.0, 30.0, 40.0])?;
            close("abe0", predict_abe0(&train, &Project::numeric(&[0.45], 0.0), 4).map_err(err)?, 25.0, TOL)
        })()),
        ("ABE0 over two equidistant analogies", (|| {
            let train = numeric(&[vec![0.4], vec![0.6], vec![0.0]], &[10.0, 30.0, 99.0])?;
            close("abe0", predict_abe0(&train, &Project::numeric(&[0.5], 0.0), 2).map_err(err)?, 20.0, TOL)
        })()),
        ("adapted k = 1 on a twin", (|| {
            let train = numeric(&[vec![0.1, 0.9], vec![0.7, 0.3]], &[12.0, 50.0])?;
            let s = sol(1, FeatureMask::all(2), WeightMatrix::ones(2, 2));
            close("pred", predict_adapted(&train, &Project::numeric(&[0.7, 0.3], 0.0), &s).map_err(err)?, 50.0, TOL)
        })()),
        ("adapted prediction against a step-by-step oracle", (|| {
            let train = numeric(
                &[vec![0.0, 0.0], vec![0.4, 0.6], vec![1.0, 1.0], vec![0.6, 0.2]],
                &[10.0, 20.0, 30.0, 40.0],
            )?;
            let w = WeightMatrix::from_rows(&[vec![0.8, 0.2], vec![0.3, 0.7], vec![0.5, 0.5], vec![0.5, 0.5]]).map_err(err)?;
            let s = sol(3, FeatureMask::all(2), w);
            // ranked analogies 1, 3, 0 adapt to 20.03, 40.09, 10.25
            let want = (4.0 * 20.03 + 2.0 * 40.09 + 10.25) / 7.0;
            close("pred", predict_adapted(&train, &Project::numeric(&[0.5, 0.5], 0.0), &s).map_err(err)?, want, TOL)
        })()),
    ]
}

pub fn tuning_examples() -> Vec<(&'static str, Check)> {
    vec![
        ("full mask", (|| ensure("ones", decode_mask(15, 4).map_err(err)?.to_vec() == vec![1; 4]))()),
        ("mask v = 1, m = 3", (|| ensure("[0,0,1]", decode_mask(1, 3).map_err(err)?.to_vec() == vec![0, 0, 1]))()),
        ("k rounds half up", (|| {
            let enc = Encoding::new(10, 1, VariantConfig::full(TuningMode::Global)).map_err(err)?;
            let mut x = vec![0.5; enc.dim()];
            x[0] = 3.4;
            let low = enc.decode(&x).k;
            x[0] = 3.5;
            ensure("3.4 -> 3, 3.5 -> 4", low == 3 && enc.decode(&x).k == 4)
        })()),
        ("normalized row is a fixed point", ensure("unchanged", normalize_row(&[0.2, 0.2, 0.6]) == vec![0.2, 0.2, 0.6])),
        ("row clamps then normalizes", ensure("(1,0,0)", normalize_row(&[2.0, 0.0, 0.0]) == vec![1.0, 0.0, 0.0])),
        ("local objectives of an exact prediction", (|| {
            let train = numeric(&[vec![0.0], vec![1.0]], &[5.0, 9.0])?;
            let f = lt_objectives(&train, &Project::numeric(&[0.0], 0.0), 5.0, &sol(1, FeatureMask::all(1), WeightMatrix::ones(2, 1)))
                .map_err(err)?;
            ensure("(0,0,0)", f == vec![0.0, 0.0, 0.0])
        })()),
        ("local objectives of (10, 5)", (|| {
            let train = numeric(&[vec![0.0], vec![1.0]], &[5.0, 9.0])?;
            let f = lt_objectives(&train, &Project::numeric(&[0.0], 0.0), 10.0, &sol(1, FeatureMask::all(1), WeightMatrix::ones(2, 1)))
                .map_err(err)?;
            close("ae", f[0], 5.0, TOL)?;
            close("bre", f[1], 1.0, TOL)?;
            close("ibre", f[2], 0.5, TOL)?;
            ensure("smaller vector dominates", dominates(&[4.0, 0.9, 0.4], &f).map_err(err)?)
        })()),
        ("global objectives of a perfect solution", (|| {
            let ds = twins();
            let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(err)?;
            let f = gt_objectives(&ds, &sol(1, FeatureMask::all(2), WeightMatrix::uniform(5, 2)), &base).map_err(err)?;
            ensure("(-1,0,0)", f == vec![-1.0, 0.0, 0.0])
        })()),
        ("global objectives against a step-by-step oracle", (|| {
            let ds = numeric(
                &[vec![0.0, 0.2], vec![0.5, 0.9], vec![1.0, 0.0], vec![0.2, 1.0], vec![0.7, 0.4]],
                &[12.0, 30.0, 55.0, 20.0, 41.0],
            )?;
            let n = ds.len();
            let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(err)?;
            let s = sol(n - 1, FeatureMask::all(2), WeightMatrix::uniform(n - 1, 2));
            let mut recs = Vec::new();
            for i in 0..n {
                let p = predict_adapted(&ds.without(i), ds.project(i), &s).map_err(err)?;
                recs.push(rec(ds.project(i).effort, p));
            }
            let means = aggregate(&recs).map_err(err)?;
            let got = gt_objectives(&ds, &s, &base).map_err(err)?;
            close("-SA", got[0], -sa(means.mae, &base).map_err(err)?, TOL)?;
            close("MBRE", got[1], means.mbre, TOL)?;
            close("MIBRE", got[2], means.mibre, TOL)
        })()),
        ("weight rows beyond k are inert", (|| {
            let ds = twins();
            let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(err)?;
            let a = sol(2, FeatureMask::all(2), WeightMatrix::uniform(5, 2));
            let mut b = a.clone();
            b.weights.row_mut(4).copy_from_slice(&[0.9, 0.1]);
            ensure("equal", gt_objectives(&ds, &a, &base).map_err(err)? == gt_objectives(&ds, &b, &base).map_err(err)?)
        })()),
        ("single-solution front", ensure("itself", select_from_front(&[vec![3.0, 4.0]]).ok() == Some(0))),
        ("front {(1,9), (9,1), (4,4)}", ensure(
            "(1,9)",
            select_from_front(&[vec![1.0, 9.0], vec![9.0, 1.0], vec![4.0, 4.0]]).ok() == Some(0),
        )),
        ("unanimous winner", ensure(
            "rank 1 everywhere",
            select_from_front(&[vec![2.0, 2.0, 2.0], vec![1.0, 1.0, 1.0], vec![3.0, 0.5, 3.0]]).ok() == Some(1),
        )),
        ("local tuning on identical projects", (|| {
            let ds = numeric(&vec![vec![0.5, 0.5]; 3], &[8.0; 3])?;
            let out = run_lt(&ds, VariantConfig::full(TuningMode::LocalOracle), &quick(1), BaselineMode::Exact).map_err(err)?;
            let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(err)?;
            let recs: Vec<_> = out.predictions.iter().map(|&p| rec(8.0, p)).collect();
            ensure("exact", out.predictions == vec![8.0; 3])?;
            ensure("SA = 1", evaluate(&recs, &base).map_err(err)?.sa == Some(1.0))
        })()),
        ("local tuning with unit weights matches enumeration", super::lt_plus_bruteforce(&MopsoConfig::default()).map(|_| ())),
        ("global tuning finds a unanimous optimum", super::gt_plus_unanimous()),
        ("global tuning on identical projects", (|| {
            let ds = numeric(&vec![vec![0.1, 0.7]; 4], &[3.0; 4])?;
            let out = run_gt(&ds, VariantConfig::full(TuningMode::Global), &quick(2), BaselineMode::Exact).map_err(err)?;
            let base = random_guess_baseline(&ds.efforts(), BaselineMode::Exact).map_err(err)?;
            let recs: Vec<_> = out.predictions.iter().map(|&p| rec(3.0, p)).collect();
            ensure("SA = 1", evaluate(&recs, &base).map_err(err)?.sa == Some(1.0))
        })()),
        ("global solution applied per project", (|| {
            let ds = twins();
            let out = run_gt(&ds, VariantConfig::full(TuningMode::Global), &quick(4), BaselineMode::Exact).map_err(err)?;
            for i in 0..ds.len() {
                let p = predict_adapted(&ds.without(i), ds.project(i), &out.solutions[0]).map_err(err)?;
                ensure("same prediction", p == out.predictions[i])?;
            }
            Ok(())
        })()),
        ("k scan with constant effort", (|| {
            let ds = numeric(&[vec![0.0], vec![0.5], vec![1.0], vec![0.2]], &[7.0; 4])?;
            ensure("k = 1", best_k_abe0(&ds).map_err(err)?.k == 1)
        })()),
        ("k scan hand trace", (|| {
            let ds = numeric(&[vec![0.0], vec![0.1], vec![0.5], vec![1.0]], &[10.0, 12.0, 30.0, 50.0])?;
            let b = best_k_abe0(&ds).map_err(err)?;
            for (g, w) in b.mae_by_k.iter().zip([10.5, 16.75, 58.0 / 3.0]) {
                close("mae", *g, w, TOL)?;
            }
            ensure("k = 1", b.k == 1)
        })()),
        ("k scan on three projects", (|| {
            let ds = numeric(&[vec![0.0], vec![0.5], vec![1.0]], &[1.0, 2.0, 3.0])?;
            ensure("k in {1, 2}", best_k_abe0(&ds).map_err(err)?.mae_by_k.len() == 2)
        })()),
    ]
}
