//! Kaplan–Meier estimation, conditional restricted mean survival time (cRMST)
//! and jackknife pseudo-observations.
//!
//! All estimators work on the risk set `{i : Y_i > s}` (strict inequality), so
//! events or censorings exactly at the prediction time `s` are excluded. Tied
//! event and censoring times are handled with the usual convention: events are
//! processed first, censored subjects stay in the risk set at their own time.
//!
//! Pseudo-observations are computed with an `O(N log N)` leave-one-out update
//! rather than by refitting the curve `N` times.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Subject identifier, unique within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub u64);

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One subject's right-censored outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub id: SubjectId,
    /// Observed time `Y = min(T, C)`.
    pub time: f64,
    /// `true` when the observed time is an event (`T < C`).
    pub event: bool,
    pub group: Option<String>,
    /// Time-fixed covariates, aligned with the owning table's column names.
    pub covariates: Vec<f64>,
}

impl SurvivalRecord {
    pub fn new(id: u64, time: f64, event: bool) -> Self {
        Self {
            id: SubjectId(id),
            time,
            event,
            group: None,
            covariates: Vec::new(),
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn with_covariates(mut self, covariates: Vec<f64>) -> Self {
        self.covariates = covariates;
        self
    }
}

/// Survival records together with the names of their covariate columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurvivalTable {
    pub covariate_names: Vec<String>,
    pub records: Vec<SurvivalRecord>,
}

impl SurvivalTable {
    /// Validates times, covariate widths and id uniqueness.
    pub fn new(covariate_names: Vec<String>, records: Vec<SurvivalRecord>) -> Result<Self> {
        validate_records(&records)?;
        let width = covariate_names.len();
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for r in &records {
            if r.covariates.len() != width {
                return Err(Error::invalid(format!(
                    "subject {}: expected {width} covariate value(s), got {}",
                    r.id,
                    r.covariates.len()
                )));
            }
            if !seen.insert(r.id) {
                return Err(Error::invalid(format!("duplicate subject id {}", r.id)));
            }
        }
        Ok(Self {
            covariate_names,
            records,
        })
    }

    pub fn covariate_index(&self, name: &str) -> Option<usize> {
        self.covariate_names.iter().position(|n| n == name)
    }

    /// Splits a two-arm table by group label; labels are ordered lexically,
    /// so the lexically smaller label is arm 0.
    pub fn split_two_groups(&self) -> Result<[(String, Vec<SurvivalRecord>); 2]> {
        let mut groups: std::collections::BTreeMap<String, Vec<SurvivalRecord>> =
            std::collections::BTreeMap::new();
        for r in &self.records {
            let label = r
                .group
                .clone()
                .ok_or_else(|| Error::invalid(format!("subject {} has no group label", r.id)))?;
            groups.entry(label).or_default().push(r.clone());
        }
        if groups.len() != 2 {
            return Err(Error::invalid(format!(
                "expected exactly two groups, found {}",
                groups.len()
            )));
        }
        let mut it = groups.into_iter();
        let a = it.next().expect("two groups");
        let b = it.next().expect("two groups");
        Ok([a, b])
    }
}

/// What to do when the restart curve ends in a censored observation before
/// the end of the integration window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailPolicy {
    /// Refuse to integrate past the last observed time.
    #[default]
    Strict,
    /// Carry the last survival value forward.
    ExtendLast,
}

/// Right-continuous product-limit curve started at `start` with `S(start) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvivalCurve {
    pub start: f64,
    /// Distinct event times `t_1 < ... < t_D`, all greater than `start`.
    pub event_times: Vec<f64>,
    /// `S(t_k)`.
    pub survival: Vec<f64>,
    /// Number at risk `Y_k` just before `t_k`.
    pub at_risk: Vec<usize>,
    /// Number of events `d_k` at `t_k`.
    pub events: Vec<usize>,
    /// Subjects in the risk set at `start`.
    pub n_at_risk: usize,
    /// Largest observed time (event or censoring) in the risk set.
    pub last_time: f64,
}

impl StepSurvivalCurve {
    pub fn value_at(&self, t: f64) -> f64 {
        let k = self.event_times.partition_point(|&e| e <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Survival value after the last event time.
    pub fn final_value(&self) -> f64 {
        self.survival.last().copied().unwrap_or(1.0)
    }

    fn check_tail(&self, horizon: f64, tail: TailPolicy) -> Result<()> {
        if tail == TailPolicy::Strict && self.last_time < horizon && self.final_value() > 0.0 {
            return Err(Error::TailUndefined {
                last_time: self.last_time,
                horizon,
            });
        }
        Ok(())
    }

    /// Area under the curve on `[from, to]`, with `start <= from <= to`.
    pub fn integrate(&self, from: f64, to: f64, tail: TailPolicy) -> Result<f64> {
        if !(from >= self.start && to >= from) {
            return Err(Error::invalid(format!(
                "integration bounds [{from}, {to}] invalid for a curve starting at {}",
                self.start
            )));
        }
        self.check_tail(to, tail)?;
        let mut area = 0.0;
        let mut left = from;
        let mut level = self.value_at(from);
        let first = self.event_times.partition_point(|&e| e <= from);
        for (k, &t) in self.event_times.iter().enumerate().skip(first) {
            if t >= to {
                break;
            }
            area += level * (t - left);
            left = t;
            level = self.survival[k];
        }
        area += level * (to - left);
        Ok(area)
    }
}

/// Point estimate (and optionally variance) of `mu(s, w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CRmstEstimate {
    pub s: f64,
    pub w: f64,
    pub value: f64,
    pub variance: Option<f64>,
    pub n_at_risk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoObservationSet {
    pub s: f64,
    pub w: f64,
    /// `(id, pseudo-value)` in ascending id order.
    pub entries: Vec<(SubjectId, f64)>,
}

impl PseudoObservationSet {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CRmstdTestResult {
    pub s: f64,
    pub w: f64,
    /// `mu_1(s, w) - mu_0(s, w)`.
    pub delta: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub alpha: f64,
    pub group0: CRmstEstimate,
    pub group1: CRmstEstimate,
}

fn validate_records(records: &[SurvivalRecord]) -> Result<()> {
    for r in records {
        if !r.time.is_finite() || r.time < 0.0 {
            return Err(Error::invalid(format!(
                "subject {}: time must be finite and non-negative, got {}",
                r.id, r.time
            )));
        }
    }
    Ok(())
}

fn validate_window(s: f64, w: f64) -> Result<()> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::invalid(format!("prediction time must be >= 0, got {s}")));
    }
    if !w.is_finite() || w <= 0.0 {
        return Err(Error::invalid(format!("window must be > 0, got {w}")));
    }
    Ok(())
}

/// `(time, event)` pairs of the risk set at `start`, sorted by time.
fn risk_set(records: &[SurvivalRecord], start: f64) -> Vec<(f64, bool)> {
    let mut at_risk: Vec<(f64, bool)> = records
        .iter()
        .filter(|r| r.time > start)
        .map(|r| (r.time, r.event))
        .collect();
    at_risk.sort_by(|a, b| a.0.total_cmp(&b.0));
    at_risk
}

/// Product-limit estimate restarted at `start` on `{i : Y_i > start}`.
pub fn km_fit(records: &[SurvivalRecord], start: f64) -> Result<StepSurvivalCurve> {
    validate_records(records)?;
    if !start.is_finite() {
        return Err(Error::invalid("curve origin must be finite"));
    }
    let sorted = risk_set(records, start);
    if sorted.is_empty() {
        return Err(Error::EmptyRiskSet {
            s: start,
            n_at_risk: 0,
            required: 1,
        });
    }

    let n = sorted.len();
    let mut curve = StepSurvivalCurve {
        start,
        event_times: Vec::new(),
        survival: Vec::new(),
        at_risk: Vec::new(),
        events: Vec::new(),
        n_at_risk: n,
        last_time: sorted[n - 1].0,
    };
    let mut surv = 1.0;
    let mut remaining = n;
    let mut i = 0;
    while i < n {
        let t = sorted[i].0;
        let mut j = i;
        let mut d = 0;
        while j < n && sorted[j].0 == t {
            d += usize::from(sorted[j].1);
            j += 1;
        }
        if d > 0 {
            surv *= 1.0 - d as f64 / remaining as f64;
            curve.event_times.push(t);
            curve.survival.push(surv);
            curve.at_risk.push(remaining);
            curve.events.push(d);
        }
        remaining -= j - i;
        i = j;
    }
    Ok(curve)
}

fn require_two_at_risk(n: usize, s: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::EmptyRiskSet {
            s,
            n_at_risk: n,
            required: 2,
        });
    }
    Ok(())
}

/// `mu_KM(s, w)`: area over `[s, s + w]` under the curve restarted at `s`.
pub fn crmst_km(
    records: &[SurvivalRecord],
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<CRmstEstimate> {
    validate_window(s, w)?;
    let curve = km_fit(records, s)?;
    require_two_at_risk(curve.n_at_risk, s)?;
    let value = curve.integrate(s, s + w, tail)?;
    Ok(CRmstEstimate {
        s,
        w,
        value,
        variance: None,
        n_at_risk: curve.n_at_risk,
    })
}

/// `mu_KM(s, w)` through the full-sample curve: `int_s^{s+w} S(t) dt / S(s)`.
///
/// Algebraically identical to [`crmst_km`]; kept as an independent route.
pub fn crmst_ratio(
    records: &[SurvivalRecord],
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<CRmstEstimate> {
    validate_window(s, w)?;
    let n_at_risk = records.iter().filter(|r| r.time > s).count();
    require_two_at_risk(n_at_risk, s)?;
    let origin = records
        .iter()
        .map(|r| r.time)
        .fold(f64::INFINITY, f64::min)
        .min(s);
    // Restart just below the earliest time so every subject is in the risk set.
    let full = km_fit(records, origin - 1.0)?;
    let at_s = full.value_at(s);
    let value = full.integrate(s, s + w, tail)? / at_s;
    Ok(CRmstEstimate {
        s,
        w,
        value,
        variance: None,
        n_at_risk,
    })
}

/// Event-time summary of the risk set at `s`, truncated at `s + w`.
struct WindowSummary {
    n: usize,
    /// Event times in `(s, s + w]`.
    times: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<usize>,
    /// Segment lengths: `len[0] = t_1 - s`, ..., `len[D] = s + w - t_D`.
    len: Vec<f64>,
}

impl WindowSummary {
    fn new(sorted: &[(f64, bool)], s: f64, horizon: f64) -> Self {
        let n = sorted.len();
        let mut times = Vec::new();
        let mut at_risk = Vec::new();
        let mut events = Vec::new();
        let mut remaining = n;
        let mut i = 0;
        while i < n && sorted[i].0 <= horizon {
            let t = sorted[i].0;
            let mut j = i;
            let mut d = 0;
            while j < n && sorted[j].0 == t {
                d += usize::from(sorted[j].1);
                j += 1;
            }
            if d > 0 {
                times.push(t);
                at_risk.push(remaining);
                events.push(d);
            }
            remaining -= j - i;
            i = j;
        }
        let mut len = Vec::with_capacity(times.len() + 1);
        let mut left = s;
        for &t in &times {
            len.push(t - left);
            left = t;
        }
        len.push(horizon - left);
        Self {
            n,
            times,
            at_risk,
            events,
            len,
        }
    }
}

/// Jackknife pseudo-values of `mu(s, w)` for every subject at risk at `s`:
/// `N_s * mu_KM - (N_s - 1) * mu_KM^{(-i)}`.
///
/// Leave-one-out curves carry their last value forward when the removed
/// subject was the last one observed; the tail policy applies to the
/// full-sample curve only.
pub fn pseudo_observations(
    records: &[SurvivalRecord],
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<PseudoObservationSet> {
    validate_window(s, w)?;
    validate_records(records)?;
    let mut members: Vec<&SurvivalRecord> = records.iter().filter(|r| r.time > s).collect();
    require_two_at_risk(members.len(), s)?;
    members.sort_by_key(|r| r.id);
    if let Some(pair) = members.windows(2).find(|p| p[0].id == p[1].id) {
        return Err(Error::invalid(format!("duplicate subject id {}", pair[0].id)));
    }

    let horizon = s + w;
    let mut sorted: Vec<(f64, bool)> = members.iter().map(|r| (r.time, r.event)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let last_time = sorted[sorted.len() - 1].0;
    let summary = WindowSummary::new(&sorted, s, horizon);
    let d_count = summary.times.len();

    // f[j]: full-sample factor at event j; g[j]: factor with one fewer at risk.
    let mut full_factor = vec![1.0; d_count + 1];
    let mut reduced_factor = vec![f64::NAN; d_count + 1];
    for j in 0..d_count {
        let y = summary.at_risk[j] as f64;
        let d = summary.events[j] as f64;
        full_factor[j + 1] = 1.0 - d / y;
        if summary.at_risk[j] >= 2 {
            reduced_factor[j + 1] = 1.0 - d / (y - 1.0);
        }
    }
    let final_surv: f64 = full_factor.iter().product();
    if tail == TailPolicy::Strict && last_time < horizon && final_surv > 0.0 {
        return Err(Error::TailUndefined {
            last_time,
            horizon,
        });
    }

    // reduced_prefix[m] = prod_{j <= m} g[j]; reduced_area[m] = sum_{k <= m} reduced_prefix[k] len[k].
    let mut reduced_prefix = vec![1.0; d_count + 1];
    let mut reduced_area = vec![summary.len[0]; d_count + 1];
    for m in 1..=d_count {
        reduced_prefix[m] = reduced_prefix[m - 1] * reduced_factor[m];
        reduced_area[m] = reduced_area[m - 1] + reduced_prefix[m] * summary.len[m];
    }
    // tail_area[m] = area from t_m to the horizon of the full curve restarted at t_m.
    let mut tail_area = vec![0.0; d_count + 1];
    tail_area[d_count] = summary.len[d_count];
    for m in (0..d_count).rev() {
        tail_area[m] = summary.len[m] + full_factor[m + 1] * tail_area[m + 1];
    }
    let full_mu = tail_area[0];

    let n = summary.n as f64;
    let entries = members
        .iter()
        .map(|r| {
            let before = summary.times.partition_point(|&t| t < r.time);
            let loo = if before == d_count {
                reduced_area[d_count]
            } else {
                let j = before + 1;
                let factor = if summary.times[before] == r.time {
                    let y = summary.at_risk[before] as f64;
                    let d = summary.events[before] as f64;
                    if r.event {
                        if summary.at_risk[before] == 1 {
                            1.0
                        } else {
                            1.0 - (d - 1.0) / (y - 1.0)
                        }
                    } else {
                        1.0 - d / (y - 1.0)
                    }
                } else {
                    full_factor[j]
                };
                reduced_area[before] + reduced_prefix[before] * factor * tail_area[j]
            };
            (r.id, n * full_mu - (n - 1.0) * loo)
        })
        .collect();

    Ok(PseudoObservationSet { s, w, entries })
}

/// Pseudo-observation estimator of `mu(s, w)` with its jackknife variance.
pub fn crmst_pseudo(
    records: &[SurvivalRecord],
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<CRmstEstimate> {
    let pseudo = pseudo_observations(records, s, w, tail)?;
    Ok(estimate_from_pseudo(&pseudo))
}

pub(crate) fn estimate_from_pseudo(pseudo: &PseudoObservationSet) -> CRmstEstimate {
    let n = pseudo.len() as f64;
    let mean = pseudo.values().sum::<f64>() / n;
    let ss: f64 = pseudo.values().map(|v| (v - mean) * (v - mean)).sum();
    CRmstEstimate {
        s: pseudo.s,
        w: pseudo.w,
        value: mean,
        variance: Some(ss / (n * (n - 1.0))),
        n_at_risk: pseudo.len(),
    }
}

pub(crate) fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Two-sample Wald test of `mu_1(s, w) - mu_0(s, w) = 0`.
pub fn crmstd_test(
    group0: &[SurvivalRecord],
    group1: &[SurvivalRecord],
    s: f64,
    w: f64,
    alpha: f64,
    tail: TailPolicy,
) -> Result<CRmstdTestResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let est0 = crmst_pseudo(group0, s, w, tail)?;
    let est1 = crmst_pseudo(group1, s, w, tail)?;
    let var0 = est0.variance.unwrap_or(0.0);
    let var1 = est1.variance.unwrap_or(0.0);
    let delta = est1.value - est0.value;
    let se = (var0 + var1).sqrt();
    let z = if se > 0.0 {
        delta / se
    } else if delta == 0.0 {
        0.0
    } else {
        delta.signum() * f64::INFINITY
    };
    let normal = standard_normal();
    let p_value = (2.0 * normal.sf(z.abs())).clamp(0.0, 1.0);
    let half = normal.inverse_cdf(1.0 - alpha / 2.0) * se;
    Ok(CRmstdTestResult {
        s,
        w,
        delta,
        se,
        z,
        p_value,
        ci_lower: delta - half,
        ci_upper: delta + half,
        alpha,
        group0: est0,
        group1: est1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn events(times: &[f64]) -> Vec<SurvivalRecord> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| SurvivalRecord::new(i as u64, t, true))
            .collect()
    }

    fn mixed(data: &[(f64, bool)]) -> Vec<SurvivalRecord> {
        data.iter()
            .enumerate()
            .map(|(i, &(t, e))| SurvivalRecord::new(i as u64, t, e))
            .collect()
    }

    /// Independent leave-one-out reference: refit the curve without subject i.
    fn brute_force_pseudo(records: &[SurvivalRecord], s: f64, w: f64) -> Vec<f64> {
        let at_risk: Vec<SurvivalRecord> =
            records.iter().filter(|r| r.time > s).cloned().collect();
        let n = at_risk.len() as f64;
        let area = |rs: &[SurvivalRecord]| {
            km_fit(rs, s)
                .unwrap()
                .integrate(s, s + w, TailPolicy::ExtendLast)
                .unwrap()
        };
        let full = area(&at_risk);
        (0..at_risk.len())
            .map(|i| {
                let mut rest = at_risk.clone();
                rest.remove(i);
                n * full - (n - 1.0) * area(&rest)
            })
            .collect()
    }

    #[test]
    fn km_all_events() {
        let curve = km_fit(&events(&[1.0, 2.0, 3.0]), 0.0).unwrap();
        assert_eq!(curve.event_times, vec![1.0, 2.0, 3.0]);
        assert!((curve.value_at(1.5) - 2.0 / 3.0).abs() < 1e-15);
        assert!((curve.value_at(2.5) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(curve.value_at(3.0), 0.0);
        assert_eq!(curve.value_at(0.5), 1.0);
        assert_eq!(curve.at_risk, vec![3, 2, 1]);
    }

    #[test]
    fn km_all_censored_is_flat() {
        let data = mixed(&[(1.0, false), (2.0, false), (4.0, false)]);
        let curve = km_fit(&data, 0.0).unwrap();
        assert!(curve.event_times.is_empty());
        for t in [0.0, 1.0, 3.0, 10.0] {
            assert_eq!(curve.value_at(t), 1.0);
        }
    }

    #[test]
    fn km_with_censoring() {
        let data = mixed(&[(1.0, true), (2.0, false), (3.0, true)]);
        let curve = km_fit(&data, 0.0).unwrap();
        assert!((curve.value_at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((curve.value_at(2.9) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(curve.value_at(3.0), 0.0);
    }

    #[test]
    fn km_errors() {
        assert!(matches!(
            km_fit(&events(&[1.0, 2.0]), 5.0),
            Err(Error::EmptyRiskSet { .. })
        ));
        assert!(matches!(
            km_fit(&events(&[1.0, -2.0]), 0.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tied_event_and_censoring_processes_event_first() {
        // At t = 2 one event and one censoring: both count in the risk set.
        let data = mixed(&[(1.0, true), (2.0, true), (2.0, false), (5.0, true)]);
        let curve = km_fit(&data, 0.0).unwrap();
        assert_eq!(curve.at_risk, vec![4, 3, 1]);
        assert!((curve.value_at(2.0) - 0.75 * (2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn crmst_hand_values() {
        let data = events(&[1.0, 2.0, 3.0]);
        let est = crmst_km(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        assert!((est.value - 2.0).abs() < 1e-14);
        let est = crmst_km(&data, 1.0, 2.0, TailPolicy::Strict).unwrap();
        assert!((est.value - 1.5).abs() < 1e-14);
        let ratio = crmst_ratio(&data, 1.0, 2.0, TailPolicy::Strict).unwrap();
        assert!((ratio.value - 1.5).abs() < 1e-14);
    }

    #[test]
    fn crmst_flat_curve_gives_window() {
        let data = events(&[10.0, 11.0, 12.0]);
        let est = crmst_km(&data, 2.0, 5.0, TailPolicy::Strict).unwrap();
        assert_eq!(est.value, 5.0);
    }

    #[test]
    fn tail_policy() {
        let data = mixed(&[(1.0, true), (2.0, true), (3.0, false)]);
        assert!(matches!(
            crmst_km(&data, 0.0, 5.0, TailPolicy::Strict),
            Err(Error::TailUndefined { .. })
        ));
        let est = crmst_km(&data, 0.0, 5.0, TailPolicy::ExtendLast).unwrap();
        assert!((est.value - (1.0 + 2.0 / 3.0 + 3.0 * (1.0 / 3.0))).abs() < 1e-14);
        // A terminal event closes the curve; no tail needed.
        let closed = events(&[1.0, 2.0]);
        assert!(crmst_km(&closed, 0.0, 5.0, TailPolicy::Strict).is_ok());
    }

    #[test]
    fn risk_set_is_strict() {
        let data = events(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            crmst_km(&data, 2.0, 1.0, TailPolicy::Strict),
            Err(Error::EmptyRiskSet { n_at_risk: 1, .. })
        ));
    }

    #[test]
    fn pseudo_uncensored_equals_truncated_times() {
        let data = events(&[1.0, 2.0, 3.0]);
        let pseudo = pseudo_observations(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        let values: Vec<f64> = pseudo.values().collect();
        for (v, want) in values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((v - want).abs() < 1e-12, "{values:?}");
        }
    }

    #[test]
    fn pseudo_constant_times() {
        let data = events(&[5.0, 5.0, 5.0]);
        let pseudo = pseudo_observations(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        assert!(pseudo.values().all(|v| (v - 3.0).abs() < 1e-12));
        let est = crmst_pseudo(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        assert!(est.variance.unwrap().abs() < 1e-20);
    }

    #[test]
    fn pseudo_matches_brute_force_with_censoring() {
        let data = mixed(&[(1.0, true), (2.0, false), (3.0, true)]);
        let pseudo = pseudo_observations(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        let oracle = brute_force_pseudo(&data, 0.0, 3.0);
        for (p, o) in pseudo.values().zip(oracle) {
            assert!((p - o).abs() < 1e-12);
        }
        // Hand values: mu = 7/3; leave-one-out areas 3, 2, 2 (the last one extended).
        let values: Vec<f64> = pseudo.values().collect();
        let want = [1.0, 3.0, 3.0];
        for (v, w) in values.iter().zip(want) {
            assert!((v - w).abs() < 1e-12, "{values:?}");
        }
    }

    #[test]
    fn pseudo_matches_brute_force_with_ties_and_late_start() {
        let data = mixed(&[
            (0.5, true),
            (1.0, true),
            (1.5, false),
            (2.0, true),
            (2.0, true),
            (2.0, false),
            (2.5, true),
            (3.0, false),
            (4.0, true),
            (4.0, false),
            (6.0, true),
            (7.5, false),
        ]);
        for (s, w) in [(0.0, 3.0), (1.0, 2.0), (1.5, 4.0), (2.0, 3.5), (0.7, 10.0)] {
            let pseudo = pseudo_observations(&data, s, w, TailPolicy::ExtendLast).unwrap();
            let oracle = brute_force_pseudo(&data, s, w);
            for (p, o) in pseudo.values().zip(oracle) {
                assert!((p - o).abs() < 1e-10, "s={s} w={w}: {p} vs {o}");
            }
        }
    }

    #[test]
    fn crmst_pseudo_hand_variance() {
        let data = events(&[1.0, 2.0, 3.0]);
        let est = crmst_pseudo(&data, 0.0, 3.0, TailPolicy::Strict).unwrap();
        assert!((est.value - 2.0).abs() < 1e-12);
        assert!((est.variance.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_arms_give_null_test() {
        let data = mixed(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true)]);
        let res = crmstd_test(&data, &data, 0.0, 3.0, 0.05, TailPolicy::Strict).unwrap();
        assert_eq!(res.delta, 0.0);
        assert_eq!(res.z, 0.0);
        assert_eq!(res.p_value, 1.0);
        assert!(res.ci_lower <= 0.0 && res.ci_upper >= 0.0);
    }

    #[test]
    fn swapped_arms_negate() {
        let a = mixed(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true), (6.0, true)]);
        let b = mixed(&[(2.0, true), (3.5, true), (5.0, false), (7.0, true), (9.0, true)]);
        let ab = crmstd_test(&a, &b, 1.0, 3.0, 0.05, TailPolicy::Strict).unwrap();
        let ba = crmstd_test(&b, &a, 1.0, 3.0, 0.05, TailPolicy::Strict).unwrap();
        assert_eq!(ab.delta, -ba.delta);
        assert_eq!(ab.z, -ba.z);
        assert_eq!(ab.p_value, ba.p_value);
        assert!((ab.z * ab.se - ab.delta).abs() < 1e-12);
        assert!(ab.ci_lower <= ab.delta && ab.delta <= ab.ci_upper);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut data = events(&[1.0, 2.0, 3.0]);
        data[2].id = SubjectId(0);
        assert!(matches!(
            pseudo_observations(&data, 0.0, 3.0, TailPolicy::Strict),
            Err(Error::InvalidInput(_))
        ));
    }
}
