//! Monte Carlo harnesses.
//!
//! Replicate `r` of a run with master seed `m` draws from the seed
//! `replicate_seed(m, r)`, and results are collected in replicate order, so
//! output does not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::joint::{simulate_joint, JointModelSpec, JointSample, BIOMARKER};
use super::metrics::{mc_metrics, MetricsReport};
use super::scenario::{simulate_scenario, true_crmstd, ScenarioSpec, TruthEstimate};
use crate::basis::{BasisLayout, SplineSpec};
use crate::error::{Error, Result};
use crate::gee::{fit_super_model, sandwich_cov, CovarianceMode, DynamicModelFit, Link};
use crate::landmark::{build_super_dataset, regular_grid, CovariateSpec, LongitudinalData, SuperDataset};
use crate::predict::{evaluate, Evaluation};
use crate::surv::{crmstd_test, SubjectId, TailPolicy};

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `rep` under master seed `master`.
pub fn replicate_seed(master: u64, rep: u64) -> u64 {
    splitmix64(master ^ splitmix64(rep.wrapping_add(0x5EED)))
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn count_failures<T>(results: &[Result<T>]) -> BTreeMap<String, usize> {
    let mut failures = BTreeMap::new();
    for r in results {
        if let Err(e) = r {
            *failures.entry(e.kind().to_string()).or_insert(0) += 1;
        }
    }
    failures
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

// ── Two-arm scenarios ──

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMcConfig {
    pub scenario: u8,
    pub n_per_arm: usize,
    /// Target censoring fraction per arm.
    pub censoring: f64,
    pub s: f64,
    pub w: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    /// Population size for the true difference.
    pub truth_draws: usize,
    pub tail: TailPolicy,
}

impl ScenarioMcConfig {
    pub fn spec(&self) -> Result<ScenarioSpec> {
        ScenarioSpec::standard(self.scenario, self.n_per_arm)?.with_censoring_rate(self.censoring)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMcResult {
    pub config: ScenarioMcConfig,
    pub truth: TruthEstimate,
    pub metrics: Option<MetricsReport>,
    pub n_failed: usize,
    pub failures: BTreeMap<String, usize>,
}

pub fn run_scenario_mc(cfg: &ScenarioMcConfig) -> Result<ScenarioMcResult> {
    let spec = cfg.spec()?;
    for arm in 0..2 {
        if let Some(a) = spec.censor_bound(arm).filter(|&a| a < cfg.s + cfg.w) {
            log::warn!(
                "scenario {} arm {arm}: censoring bound {a} is below s + w = {}; restart curves cannot reach the horizon",
                cfg.scenario,
                cfg.s + cfg.w
            );
        }
    }
    let truth = true_crmstd(&spec, cfg.s, cfg.w, cfg.truth_draws, replicate_seed(cfg.seed, u64::MAX))?;
    let results: Vec<Result<(f64, f64, bool)>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let [a, b] = simulate_scenario(&spec, replicate_seed(cfg.seed, r as u64))?;
            let t = crmstd_test(&a, &b, cfg.s, cfg.w, cfg.alpha, cfg.tail)?;
            Ok((t.delta, t.se * t.se, t.p_value < cfg.alpha))
        })
        .collect();
    let failures = count_failures(&results);
    let ok: Vec<(f64, f64, bool)> = results.into_iter().filter_map(|r| r.ok()).collect();
    if !failures.is_empty() {
        log::warn!(
            "scenario {} (n={}, s={}, w={}): {} replicate(s) failed: {failures:?}",
            cfg.scenario,
            cfg.n_per_arm,
            cfg.s,
            cfg.w,
            cfg.reps - ok.len()
        );
    }
    let metrics = if ok.is_empty() {
        None
    } else {
        let est: Vec<f64> = ok.iter().map(|x| x.0).collect();
        let var: Vec<f64> = ok.iter().map(|x| x.1).collect();
        let rej: Vec<bool> = ok.iter().map(|x| x.2).collect();
        Some(mc_metrics(&est, &var, truth.monte_carlo, cfg.alpha, Some(&rej))?)
    };
    Ok(ScenarioMcResult {
        config: cfg.clone(),
        truth,
        metrics,
        n_failed: cfg.reps - ok.len(),
        failures,
    })
}

pub const SCENARIO_CSV_HEADER: &str =
    "scenario,n,censoring,s,w,reps,n_failed,truth,mean_estimate,bias,rel_bias,rmse,empirical_se,model_se,rel_se,cp,rejection_rate";

pub fn scenario_csv_row(r: &ScenarioMcResult) -> String {
    let c = &r.config;
    let m = r.metrics.as_ref();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        c.scenario,
        c.n_per_arm,
        c.censoring,
        c.s,
        c.w,
        c.reps,
        r.n_failed,
        r.truth.monte_carlo,
        fmt_opt(m.map(|m| m.mean_estimate)),
        fmt_opt(m.map(|m| m.bias)),
        fmt_opt(m.and_then(|m| m.rel_bias)),
        fmt_opt(m.map(|m| m.rmse)),
        fmt_opt(m.map(|m| m.empirical_se)),
        fmt_opt(m.map(|m| m.model_se)),
        fmt_opt(m.map(|m| m.rel_se)),
        fmt_opt(m.map(|m| m.cp)),
        fmt_opt(m.and_then(|m| m.rejection_rate)),
    )
}

// ── Joint-model designs ──

/// Landmark grid, window, basis and covariates of a joint-model experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDesign {
    pub spec: JointModelSpec,
    pub grid: Vec<f64>,
    pub w: f64,
    pub covariates: CovariateSpec,
    pub layout: BasisLayout,
    pub tail: TailPolicy,
}

impl JointDesign {
    /// Grid 0, 0.5, ..., 10; window 5; `X1`, `X2` and the current biomarker,
    /// each with a main effect and a natural spline in `s / 10` (knots 2, 4, 6, 8).
    pub fn standard(spec: JointModelSpec) -> Result<Self> {
        let grid = regular_grid(0.0, 10.0, 0.5)?;
        let covariates = CovariateSpec::new(&["X1", "X2"], &[BIOMARKER]);
        let spline = SplineSpec::new(vec![2.0, 4.0, 6.0, 8.0], [0.0, 10.0], 10.0)?;
        let layout = BasisLayout::time_varying(&covariates.names(), spline);
        Ok(Self {
            spec,
            grid,
            w: 5.0,
            covariates,
            layout,
            tail: TailPolicy::Strict,
        })
    }

    pub fn super_dataset(&self, sample: &JointSample) -> Result<SuperDataset> {
        let table = sample.table();
        let long = LongitudinalData::new(&sample.longitudinal())?;
        build_super_dataset(&table, &long, &self.covariates, &self.grid, self.w, self.tail)
    }

    pub fn fit(&self, sample: &JointSample, mode: CovarianceMode) -> Result<DynamicModelFit> {
        fit_super_model(&self.super_dataset(sample)?, &self.layout, Link::Identity, mode)
    }
}

/// Coefficients of the model fitted to a large simulated population.
pub fn population_coefficients(design: &JointDesign, n: usize, seed: u64) -> Result<DynamicModelFit> {
    let sample = simulate_joint(&design.spec, n, seed)?;
    design.fit(&sample, CovarianceMode::Clustered)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMcConfig {
    pub design: JointDesign,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMcResult {
    pub labels: Vec<String>,
    pub truth: Vec<f64>,
    pub clustered: Vec<MetricsReport>,
    pub naive: Vec<MetricsReport>,
    pub n_failed: usize,
    pub failures: BTreeMap<String, usize>,
    pub mean_censoring: f64,
}

struct CoefficientDraw {
    beta: Vec<f64>,
    var_clustered: Vec<f64>,
    var_naive: Vec<f64>,
    censoring: f64,
}

pub fn run_coefficient_mc(cfg: &CoefficientMcConfig, truth: &[f64]) -> Result<CoefficientMcResult> {
    let design = &cfg.design;
    let q = design.layout.q();
    if truth.len() != q {
        return Err(Error::invalid(format!("truth has {} coefficient(s), layout {q}", truth.len())));
    }
    let results: Vec<Result<CoefficientDraw>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let sample = simulate_joint(&design.spec, cfg.n, replicate_seed(cfg.seed, r as u64))?;
            let data = design.super_dataset(&sample)?;
            let fit = fit_super_model(&data, &design.layout, Link::Identity, CovarianceMode::Clustered)?;
            let naive = sandwich_cov(&data, &design.layout, Link::Identity, &fit.beta, CovarianceMode::NaiveRowwise)?;
            let clustered = fit.covariance_matrix();
            Ok(CoefficientDraw {
                var_clustered: (0..q).map(|k| clustered[(k, k)]).collect(),
                var_naive: (0..q).map(|k| naive[(k, k)]).collect(),
                beta: fit.beta,
                censoring: sample.censoring_fraction(),
            })
        })
        .collect();
    let failures = count_failures(&results);
    let ok: Vec<CoefficientDraw> = results.into_iter().filter_map(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::Undefined(format!("every replicate failed: {failures:?}")));
    }
    if !failures.is_empty() {
        log::warn!("{} replicate(s) failed: {failures:?}", cfg.reps - ok.len());
    }
    let mut clustered = Vec::with_capacity(q);
    let mut naive = Vec::with_capacity(q);
    for k in 0..q {
        let est: Vec<f64> = ok.iter().map(|d| d.beta[k]).collect();
        let vc: Vec<f64> = ok.iter().map(|d| d.var_clustered[k]).collect();
        let vn: Vec<f64> = ok.iter().map(|d| d.var_naive[k]).collect();
        clustered.push(mc_metrics(&est, &vc, truth[k], cfg.alpha, None)?);
        naive.push(mc_metrics(&est, &vn, truth[k], cfg.alpha, None)?);
    }
    Ok(CoefficientMcResult {
        labels: design.layout.labels(),
        truth: truth.to_vec(),
        clustered,
        naive,
        n_failed: cfg.reps - ok.len(),
        failures,
        mean_censoring: ok.iter().map(|d| d.censoring).sum::<f64>() / ok.len() as f64,
    })
}

pub fn coefficient_csv(r: &CoefficientMcResult) -> String {
    let mut out = String::from("coefficient,mode,truth,mean_estimate,bias,rel_bias,rmse,empirical_se,model_se,rel_se,cp,n_reps\n");
    for (mode, metrics) in [("clustered", &r.clustered), ("naive_rowwise", &r.naive)] {
        for (label, m) in r.labels.iter().zip(metrics.iter()) {
            let _ = writeln!(
                out,
                "\"{label}\",{mode},{},{},{},{},{},{},{},{},{},{}",
                m.truth,
                m.mean_estimate,
                m.bias,
                fmt_opt(m.rel_bias),
                m.rmse,
                m.empirical_se,
                m.model_se,
                m.rel_se,
                m.cp,
                m.n_reps
            );
        }
    }
    out
}

// ── Predictive performance ──

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMcConfig {
    pub design: JointDesign,
    pub n_train: usize,
    pub n_valid: usize,
    pub reps: usize,
    pub seed: u64,
}

/// Per-landmark averages over replicates (`None` where no replicate produced a value).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMcResult {
    pub landmarks: Vec<f64>,
    pub c_index_dynamic: Vec<Option<f64>>,
    pub c_index_static: Vec<Option<f64>>,
    pub pe_dynamic: Vec<Option<f64>>,
    pub pe_static: Vec<Option<f64>>,
    pub n_failed: usize,
    pub failures: BTreeMap<String, usize>,
}

type PredictionDraw = [Vec<Option<f64>>; 4];

fn column_means(draws: &[PredictionDraw], col: usize, len: usize) -> Vec<Option<f64>> {
    (0..len)
        .map(|j| {
            let vals: Vec<f64> = draws.iter().filter_map(|d| d[col][j]).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        })
        .collect()
}

pub fn run_prediction_mc(cfg: &PredictionMcConfig) -> Result<PredictionMcResult> {
    let design = &cfg.design;
    let results: Vec<Result<PredictionDraw>> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let seed = replicate_seed(cfg.seed, r as u64);
            let train = simulate_joint(&design.spec, cfg.n_train, seed)?;
            let valid = simulate_joint(&design.spec, cfg.n_valid, splitmix64(seed ^ 0xA11D))?;
            let train_table = train.table();
            let train_long = LongitudinalData::new(&train.longitudinal())?;
            let valid_table = valid.table();
            let valid_long = LongitudinalData::new(&valid.longitudinal())?;
            let input = Evaluation {
                train: (&train_table, &train_long),
                validation: (&valid_table, &valid_long),
                spec: &design.covariates,
                layout: &design.layout,
                grid: &design.grid,
                w: design.w,
                link: Link::Identity,
                tail: design.tail,
            };
            let w = design.w;
            let truth = |id: SubjectId, s: f64| valid.true_crmst(id, s, w);
            let (dynamic, fixed) = evaluate(&input, Some(&truth))?;
            Ok([dynamic.c_index, fixed.c_index, dynamic.prediction_error, fixed.prediction_error])
        })
        .collect();
    let failures = count_failures(&results);
    let ok: Vec<PredictionDraw> = results.into_iter().filter_map(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::Undefined(format!("every replicate failed: {failures:?}")));
    }
    if !failures.is_empty() {
        log::warn!("{} replicate(s) failed: {failures:?}", cfg.reps - ok.len());
    }
    let len = design.grid.len();
    Ok(PredictionMcResult {
        landmarks: design.grid.clone(),
        c_index_dynamic: column_means(&ok, 0, len),
        c_index_static: column_means(&ok, 1, len),
        pe_dynamic: column_means(&ok, 2, len),
        pe_static: column_means(&ok, 3, len),
        n_failed: cfg.reps - ok.len(),
        failures,
    })
}

pub const EVAL_CSV_HEADER: &str = "landmark,c_index_dynamic,c_index_static,pe_dynamic,pe_static";

pub fn prediction_csv(r: &PredictionMcResult) -> String {
    let mut out = format!("{EVAL_CSV_HEADER}\n");
    for j in 0..r.landmarks.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.landmarks[j],
            fmt_opt(r.c_index_dynamic[j]),
            fmt_opt(r.c_index_static[j]),
            fmt_opt(r.pe_dynamic[j]),
            fmt_opt(r.pe_static[j])
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replicate_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|r| replicate_seed(1, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(replicate_seed(1, 0), replicate_seed(2, 0));
    }

    #[test]
    fn scenario_mc_is_thread_count_invariant() {
        let cfg = ScenarioMcConfig {
            scenario: 2,
            n_per_arm: 60,
            censoring: 0.15,
            s: 2.0,
            w: 5.0,
            alpha: 0.05,
            reps: 40,
            seed: 3,
            truth_draws: 10_000,
            tail: TailPolicy::Strict,
        };
        let one = with_threads(Some(1), || run_scenario_mc(&cfg)).unwrap().unwrap();
        let three = with_threads(Some(3), || run_scenario_mc(&cfg)).unwrap().unwrap();
        assert_eq!(scenario_csv_row(&one), scenario_csv_row(&three));
        assert_eq!(one.n_failed, 0);
    }
}
