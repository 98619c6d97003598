//! Individual dynamic predictions and model evaluation.
//!
//! Predictions use `g^{-1}(x^T beta)` with `x = H(s)^T Z*(s)` and a
//! delta-method standard error; intervals use a t quantile with the fit's
//! degrees of freedom. Evaluation compares the dynamic model with a static
//! baseline RMST model on a validation set, landmark by landmark.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::basis::{BasisLayout, LayoutEvaluator};
use crate::error::{Error, Result};
use crate::gee::{fit_landmark_model, fit_super_model, CovarianceMode, DynamicModelFit, LandmarkModelFit, Link};
use crate::landmark::{build_landmark_dataset, build_super_dataset, CovariateSpec, LongitudinalData};
use crate::surv::{SubjectId, SurvivalRecord, SurvivalTable, TailPolicy};

/// Slack when checking that `s` lies on the fitted landmark range.
const RANGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub s: f64,
    pub value: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub df: f64,
    pub alpha: f64,
}

/// A fit prepared for repeated prediction.
pub struct Predictor<'a> {
    fit: &'a DynamicModelFit,
    evaluator: LayoutEvaluator,
    covariance: DMatrix<f64>,
}

impl<'a> Predictor<'a> {
    pub fn new(fit: &'a DynamicModelFit) -> Result<Self> {
        if fit.beta.len() != fit.layout.q() || fit.covariance.len() != fit.q() * fit.q() {
            return Err(Error::invalid("model coefficients do not match its layout"));
        }
        Ok(Self {
            fit,
            evaluator: fit.layout.evaluator()?,
            covariance: fit.covariance_matrix(),
        })
    }

    fn check(&self, z: &[f64], s: f64) -> Result<()> {
        let p = self.fit.layout.n_covariates();
        if z.len() != p {
            return Err(Error::invalid(format!("expected {p} covariate value(s), got {}", z.len())));
        }
        let (lower, upper) = self.fit.s_range();
        if !(s >= lower - RANGE_EPS && s <= upper + RANGE_EPS) {
            return Err(Error::OutOfRange { s, lower, upper });
        }
        Ok(())
    }

    fn linear_predictor(&self, z: &[f64], s: f64) -> (Vec<f64>, f64) {
        let x = self.evaluator.design_row(z, s);
        let eta = x.iter().zip(&self.fit.beta).map(|(a, b)| a * b).sum();
        (x, eta)
    }

    /// Point prediction only.
    pub fn value(&self, z: &[f64], s: f64) -> Result<f64> {
        self.check(z, s)?;
        Ok(self.fit.link.inverse(self.linear_predictor(z, s).1))
    }

    pub fn predict(&self, z: &[f64], s: f64, alpha: f64) -> Result<PredictionResult> {
        self.check(z, s)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let df = self.fit.df;
        if !(df >= 1.0) {
            return Err(Error::Undefined(format!(
                "t interval needs positive degrees of freedom, model has {df}"
            )));
        }
        let (x, eta) = self.linear_predictor(z, s);
        let link = self.fit.link;
        let value = link.inverse(eta);
        let grad = DVector::from_vec(x) * link.inverse_deriv(eta);
        let var = grad.dot(&(&self.covariance * &grad));
        let se = var.max(0.0).sqrt();
        let t = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| Error::invalid(e.to_string()))?
            .inverse_cdf(1.0 - alpha / 2.0);
        Ok(PredictionResult {
            s,
            value,
            se,
            ci_lower: value - t * se,
            ci_upper: value + t * se,
            df,
            alpha,
        })
    }
}

/// Predicted `mu(s, w)` for covariates `z` (without the leading 1).
pub fn predict(fit: &DynamicModelFit, z: &[f64], s: f64, alpha: f64) -> Result<PredictionResult> {
    Predictor::new(fit)?.predict(z, s, alpha)
}

/// Concordance between predicted cRMST and observed outcomes among subjects
/// at risk at `s`, with follow-up truncated at `s + w`.
///
/// `predictions[k]` belongs to `records[k]`; records not at risk are ignored.
/// A pair is usable when the shorter truncated time is an event; it is
/// concordant when the longer survivor has the larger prediction.
pub fn c_index(predictions: &[f64], records: &[SurvivalRecord], s: f64, w: f64) -> Result<f64> {
    if predictions.len() != records.len() {
        return Err(Error::invalid(format!(
            "{} prediction(s) for {} record(s)",
            predictions.len(),
            records.len()
        )));
    }
    let horizon = s + w;
    let mut subjects: Vec<(f64, bool, f64)> = records
        .iter()
        .zip(predictions)
        .filter(|(r, _)| r.time > s)
        .map(|(r, &p)| (r.time.min(horizon), r.event && r.time <= horizon, p))
        .collect();
    if subjects.len() < 2 {
        return Err(Error::EmptyRiskSet {
            s,
            n_at_risk: subjects.len(),
            required: 2,
        });
    }
    subjects.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut concordant = 0.0;
    let mut usable = 0u64;
    for (i, &(ti, di, pi)) in subjects.iter().enumerate() {
        if !di {
            continue;
        }
        for &(tj, _, pj) in &subjects[i + 1..] {
            if tj > ti {
                usable += 1;
                if pj > pi {
                    concordant += 1.0;
                } else if pj == pi {
                    concordant += 0.5;
                }
            }
        }
    }
    if usable == 0 {
        return Err(Error::Undefined(format!("no usable pairs for the C-index at s = {s}")));
    }
    Ok(concordant / usable as f64)
}

/// What prediction errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Per-subject true cRMST supplied by a simulator.
    TrueValue,
    /// Validation-set pseudo-observations.
    PseudoValue,
}

/// Mean absolute difference between predictions and references.
pub fn prediction_error(predictions: &[f64], references: &[f64]) -> Result<f64> {
    if predictions.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} prediction(s) for {} reference value(s)",
            predictions.len(),
            references.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Undefined("prediction error of an empty set".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(references)
        .map(|(p, r)| (p - r).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

/// Pseudo-observation RMST regression at time 0 with horizon `tau` on the
/// covariates of `spec` resolved at baseline.
pub fn static_rmst_model(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    spec: &CovariateSpec,
    tau: f64,
    link: Link,
    tail: TailPolicy,
) -> Result<LandmarkModelFit> {
    let rows = build_landmark_dataset(table, longitudinal, spec, 0.0, tau, tail)?;
    fit_landmark_model(&rows, &spec.names(), tau, link)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `dynamic` or `static`.
    pub model: String,
    pub reference: ReferenceKind,
    pub landmarks: Vec<f64>,
    pub n_at_risk: Vec<usize>,
    pub c_index: Vec<Option<f64>>,
    pub prediction_error: Vec<Option<f64>>,
}

/// Everything needed to train on one dataset and validate on another.
pub struct Evaluation<'a> {
    pub train: (&'a SurvivalTable, &'a LongitudinalData),
    pub validation: (&'a SurvivalTable, &'a LongitudinalData),
    pub spec: &'a CovariateSpec,
    pub layout: &'a BasisLayout,
    pub grid: &'a [f64],
    pub w: f64,
    pub link: Link,
    pub tail: TailPolicy,
}

/// Per-subject true cRMST at a landmark, when known.
pub type TruthFn<'a> = &'a (dyn Fn(SubjectId, f64) -> f64 + Sync);

fn soft<T>(res: Result<T>) -> Result<Option<T>> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(Error::EmptyRiskSet { .. } | Error::Undefined(_) | Error::TailUndefined { .. }) => Ok(None),
        Err(Error::Landmark { source, .. }) => soft(Err(*source)),
        Err(e) => Err(e),
    }
}

/// Fits the dynamic model and the static comparators, then scores both on
/// the validation set at every landmark of the grid.
///
/// Landmarks where a metric cannot be computed (too few subjects at risk, no
/// usable pairs, undefined tail) are reported as missing.
pub fn evaluate(input: &Evaluation, truth: Option<TruthFn>) -> Result<(EvalReport, EvalReport)> {
    let (train, train_long) = input.train;
    let (valid, valid_long) = input.validation;
    let data = build_super_dataset(train, train_long, input.spec, input.grid, input.w, input.tail)?;
    let fit = fit_super_model(&data, input.layout, input.link, CovarianceMode::Clustered)?;
    let predictor = Predictor::new(&fit)?;

    let baseline_rows = build_landmark_dataset(valid, valid_long, input.spec, 0.0, input.w, TailPolicy::ExtendLast)?;
    let baseline: HashMap<SubjectId, Vec<f64>> =
        baseline_rows.into_iter().map(|r| (r.id, r.covariates)).collect();
    let by_id: HashMap<SubjectId, &SurvivalRecord> = valid.records.iter().map(|r| (r.id, r)).collect();

    let reference = if truth.is_some() {
        ReferenceKind::TrueValue
    } else {
        ReferenceKind::PseudoValue
    };
    let mut dynamic = EvalReport {
        model: "dynamic".into(),
        reference,
        landmarks: input.grid.to_vec(),
        n_at_risk: Vec::new(),
        c_index: Vec::new(),
        prediction_error: Vec::new(),
    };
    let mut fixed = EvalReport {
        model: "static".into(),
        ..dynamic.clone()
    };

    for &s in input.grid {
        let tau = s + input.w;
        let static_fit = static_rmst_model(train, train_long, input.spec, tau, input.link, input.tail)?;
        let rows = soft(build_landmark_dataset(valid, valid_long, input.spec, s, input.w, input.tail))?;
        let Some(rows) = rows else {
            let n = valid.records.iter().filter(|r| r.time > s).count();
            for report in [&mut dynamic, &mut fixed] {
                report.n_at_risk.push(n);
                report.c_index.push(None);
                report.prediction_error.push(None);
            }
            continue;
        };
        let records: Vec<SurvivalRecord> = rows.iter().map(|r| by_id[&r.id].clone()).collect();
        let dyn_pred = rows
            .iter()
            .map(|r| predictor.value(&r.covariates, s))
            .collect::<Result<Vec<f64>>>()?;
        let static_pred: Vec<f64> = rows
            .iter()
            .map(|r| static_fit.predict_value(&baseline[&r.id]) - s)
            .collect();
        let references: Vec<f64> = match truth {
            Some(f) => rows.iter().map(|r| f(r.id, s)).collect(),
            None => rows.iter().map(|r| r.pseudo_value).collect(),
        };
        for (report, pred) in [(&mut dynamic, &dyn_pred), (&mut fixed, &static_pred)] {
            report.n_at_risk.push(rows.len());
            report.c_index.push(soft(c_index(pred, &records, s, input.w))?);
            report.prediction_error.push(soft(prediction_error(pred, &references))?);
        }
    }
    Ok((dynamic, fixed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SplineSpec;
    use crate::gee::Convergence;
    use crate::gee::MODEL_FORMAT_VERSION;

    fn events(times: &[f64]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| SurvivalRecord::new(i as u64, t, true))
            .collect()
    }

    fn toy_fit(link: Link, layout: BasisLayout, beta: Vec<f64>, cov: Vec<f64>) -> DynamicModelFit {
        DynamicModelFit {
            format_version: MODEL_FORMAT_VERSION,
            link,
            layout,
            grid: vec![0.0, 5.0, 10.0],
            w: 5.0,
            beta,
            covariance: cov,
            covariance_mode: CovarianceMode::Clustered,
            n_subjects: 100,
            n_rows: 250,
            df: 97.0,
            convergence: Convergence {
                iterations: 1,
                score_norm: 0.0,
            },
        }
    }

    #[test]
    fn c_index_hand_cases() {
        let recs = events(&[1.0, 2.0, 3.0]);
        assert_eq!(c_index(&[0.5, 1.5, 2.5], &recs, 0.0, 10.0).unwrap(), 1.0);
        assert_eq!(c_index(&[2.5, 1.5, 0.5], &recs, 0.0, 10.0).unwrap(), 0.0);
        assert_eq!(c_index(&[1.0, 1.0, 1.0], &recs, 0.0, 10.0).unwrap(), 0.5);
    }

    #[test]
    fn c_index_without_usable_pairs_is_undefined() {
        let recs = vec![SurvivalRecord::new(0, 1.0, false), SurvivalRecord::new(1, 2.0, false)];
        assert!(matches!(c_index(&[1.0, 2.0], &recs, 0.0, 5.0), Err(Error::Undefined(_))));
    }

    #[test]
    fn c_index_truncates_at_horizon() {
        // Events at 4 and 6 both lie beyond s + w = 3: no usable pairs.
        let recs = events(&[4.0, 6.0]);
        assert!(c_index(&[1.0, 2.0], &recs, 0.0, 3.0).is_err());
    }

    #[test]
    fn prediction_error_arithmetic() {
        assert_eq!(prediction_error(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 1.5);
        assert_eq!(prediction_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(prediction_error(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn identity_prediction_is_linear_form() {
        let names = vec!["a".to_string(), "b".to_string()];
        let cov = vec![0.04, 0.01, 0.0, 0.01, 0.09, 0.02, 0.0, 0.02, 0.16];
        let fit = toy_fit(Link::Identity, BasisLayout::constant(&names), vec![1.0, 2.0, -0.5], cov.clone());
        let z = [0.3, 2.0];
        let res = predict(&fit, &z, 5.0, 0.05).unwrap();
        assert!((res.value - (1.0 + 0.6 - 1.0)).abs() < 1e-15);
        let x = DVector::from_vec(vec![1.0, 0.3, 2.0]);
        let sigma = DMatrix::from_row_slice(3, 3, &cov);
        assert!((res.se - x.dot(&(&sigma * &x)).sqrt()).abs() < 1e-15);
        assert!(res.ci_lower < res.value && res.value < res.ci_upper);
    }

    #[test]
    fn smaller_alpha_gives_wider_interval() {
        let names = vec!["a".to_string()];
        let fit = toy_fit(Link::Identity, BasisLayout::constant(&names), vec![1.0, 2.0], vec![0.1, 0.0, 0.0, 0.1]);
        let a = predict(&fit, &[1.0], 3.0, 0.10).unwrap();
        let b = predict(&fit, &[1.0], 3.0, 0.01).unwrap();
        assert!(b.ci_upper - b.ci_lower > a.ci_upper - a.ci_lower);
    }

    #[test]
    fn out_of_range_rejected() {
        let names = vec!["a".to_string()];
        let fit = toy_fit(Link::Identity, BasisLayout::constant(&names), vec![1.0, 2.0], vec![0.1, 0.0, 0.0, 0.1]);
        assert!(matches!(predict(&fit, &[1.0], 10.5, 0.05), Err(Error::OutOfRange { .. })));
        assert!(matches!(predict(&fit, &[1.0], -0.1, 0.05), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn log_link_se_matches_finite_differences() {
        let names = vec!["a".to_string()];
        let spline = SplineSpec::new(vec![5.0], [0.0, 10.0], 10.0).unwrap();
        let layout = BasisLayout::time_varying(&names, spline);
        let q = layout.q();
        let beta: Vec<f64> = (0..q).map(|k| 0.1 * (k as f64 + 1.0).sin()).collect();
        let mut sigma = DMatrix::<f64>::identity(q, q) * 0.01;
        sigma[(0, 1)] = 0.002;
        sigma[(1, 0)] = 0.002;
        let cov: Vec<f64> = (0..q * q).map(|k| sigma[(k / q, k % q)]).collect();
        let fit = toy_fit(Link::Log, layout.clone(), beta.clone(), cov);
        let z = [0.7];
        let s = 6.3;
        let res = predict(&fit, &z, s, 0.05).unwrap();

        let ev = layout.evaluator().unwrap();
        let x = ev.design_row(&z, s);
        let f = |b: &[f64]| x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>().exp();
        let h = 1e-6;
        let grad = DVector::from_iterator(
            q,
            (0..q).map(|k| {
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[k] += h;
                dn[k] -= h;
                (f(&up) - f(&dn)) / (2.0 * h)
            }),
        );
        let fd_se = grad.dot(&(&sigma * &grad)).sqrt();
        assert!(((res.se - fd_se) / fd_se).abs() < 1e-4);
        assert!((res.value - f(&beta)).abs() < 1e-14);
    }
}
