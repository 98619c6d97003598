//! Monte Carlo performance metrics.

use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

use crate::error::{Error, Result};
use crate::surv::standard_normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    /// `None` when the truth is too close to 0 for a relative bias to mean anything.
    pub rel_bias: Option<f64>,
    pub rmse: f64,
    pub empirical_se: f64,
    /// `sqrt(mean variance)`.
    pub model_se: f64,
    pub rel_se: f64,
    /// Coverage of the normal `1 - alpha` interval.
    pub cp: f64,
    pub rejection_rate: Option<f64>,
    pub n_reps: usize,
}

/// Metrics over replicates. `rejections` holds per-replicate test decisions
/// when the quantity is also tested.
pub fn mc_metrics(
    estimates: &[f64],
    variances: &[f64],
    truth: f64,
    alpha: f64,
    rejections: Option<&[bool]>,
) -> Result<MetricsReport> {
    let n = estimates.len();
    if n == 0 || variances.len() != n || rejections.is_some_and(|r| r.len() != n) {
        return Err(Error::invalid("metric inputs must be non-empty and aligned"));
    }
    let nf = n as f64;
    let mean = estimates.iter().sum::<f64>() / nf;
    let bias = mean - truth;
    let rmse = (estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / nf).sqrt();
    let empirical_se = if n > 1 {
        (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt()
    } else {
        0.0
    };
    let model_se = (variances.iter().sum::<f64>() / nf).sqrt();
    let rel_se = if model_se > 0.0 { empirical_se / model_se } else { f64::NAN };
    let z = standard_normal().inverse_cdf(1.0 - alpha / 2.0);
    let covered = estimates
        .iter()
        .zip(variances)
        .filter(|(e, v)| (*e - truth).abs() <= z * v.max(0.0).sqrt())
        .count();
    let rel_bias = (truth.abs() > 0.1 * empirical_se && truth != 0.0).then(|| bias / truth);
    Ok(MetricsReport {
        truth,
        mean_estimate: mean,
        bias,
        rel_bias,
        rmse,
        empirical_se,
        model_se,
        rel_se,
        cp: covered as f64 / nf,
        rejection_rate: rejections.map(|r| r.iter().filter(|&&x| x).count() as f64 / nf),
        n_reps: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_estimates() {
        let m = mc_metrics(&[2.0, 2.0, 2.0], &[0.0, 0.0, 0.0], 2.0, 0.05, None).unwrap();
        assert_eq!(m.bias, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.cp, 1.0);
    }

    #[test]
    fn hand_values() {
        let m = mc_metrics(&[1.0, 3.0], &[1.0, 1.0], 2.0, 0.05, Some(&[true, false])).unwrap();
        assert_eq!(m.bias, 0.0);
        assert!((m.rmse - 1.0).abs() < 1e-15);
        assert!((m.rel_se - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(m.cp, 1.0);
        assert_eq!(m.rejection_rate, Some(0.5));
        assert!(m.rmse >= m.bias.abs());
    }

    #[test]
    fn null_truth_flags_relative_bias() {
        let m = mc_metrics(&[0.1, -0.2, 0.3], &[0.01; 3], 0.0, 0.05, None).unwrap();
        assert_eq!(m.rel_bias, None);
        let m = mc_metrics(&[1.1, 0.9, 1.05], &[0.01; 3], 1.0, 0.05, None).unwrap();
        assert!((m.rel_bias.unwrap() - m.bias).abs() < 1e-15);
    }

    #[test]
    fn misaligned_inputs_rejected() {
        assert!(mc_metrics(&[1.0], &[1.0, 2.0], 0.0, 0.05, None).is_err());
        assert!(mc_metrics(&[], &[], 0.0, 0.05, None).is_err());
    }
}
