//! Joint longitudinal and survival generator.
//!
//! Each subject has a biomarker trajectory `m(t)` (linear or quadratic mixed
//! model), noisy measurements of it at random visits, and a Weibull-type
//! hazard `lambda t^(lambda-1) exp(eta + g1 X1 + g2 X2 + alpha m(t))`. Event
//! times solve `H(T) = E` with `E ~ Exp(1)` by quadrature and bracketed root
//! finding.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{adaptive_simpson, gauss_legendre, illinois};
use crate::error::{Error, Result};
use crate::landmark::LongitudinalRecord;
use crate::surv::{SubjectId, SurvivalRecord, SurvivalTable};

const QUAD_TOL: f64 = 1e-10;
const PANEL: f64 = 1.0;
const ROOT_FTOL: f64 = 1e-12;
const GL_NODES: usize = 10;
const GL_PANEL: f64 = 0.5;

pub const BIOMARKER: &str = "Y";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModelSpec {
    pub trajectory: Trajectory,
    /// Fixed intercept of the trajectory.
    pub beta0: f64,
    /// Fixed slope in time.
    pub beta_t: f64,
    /// Fixed quadratic time coefficient (quadratic trajectories only).
    pub beta_t2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Random-effects covariance, row-major, 2x2 or 3x3.
    pub random_effects_cov: Vec<f64>,
    pub error_sd: f64,
    pub weibull_shape: f64,
    pub weibull_log_scale: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub x1_prob: f64,
    pub x2_mean: f64,
    pub x2_sd: f64,
    pub max_visits: usize,
    pub max_followup: f64,
    /// Random censoring `C ~ U(0, a)`; `None` leaves only administrative censoring.
    pub censor_a: Option<f64>,
}

impl JointModelSpec {
    /// Linear-trajectory design. Random-effect correlation 0.5 (b0, b1);
    /// measurement error standard deviation 0.5.
    pub fn linear_design() -> Self {
        Self {
            trajectory: Trajectory::Linear,
            beta0: 3.0,
            beta_t: -0.2,
            beta_t2: 0.0,
            beta1: 1.0,
            beta2: -1.0,
            random_effects_cov: covariance_from_correlations(&[1.0, 0.04], &[0.5]),
            error_sd: 0.5,
            weibull_shape: 3.0,
            weibull_log_scale: -6.0,
            gamma1: 1.0,
            gamma2: -1.0,
            alpha: 1.0,
            x1_prob: 0.5,
            x2_mean: 1.0,
            x2_sd: 1.0,
            max_visits: 10,
            max_followup: 20.0,
            censor_a: None,
        }
    }

    /// Quadratic-trajectory design. Random-effect correlations are 0.1.
    pub fn quadratic_design() -> Self {
        Self {
            trajectory: Trajectory::Quadratic,
            beta0: 0.5,
            beta_t2: 0.1,
            random_effects_cov: covariance_from_correlations(&[1.0, 0.36, 0.0025], &[0.1, 0.1, 0.1]),
            ..Self::linear_design()
        }
    }

    fn n_random(&self) -> usize {
        match self.trajectory {
            Trajectory::Linear => 2,
            Trajectory::Quadratic => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_random();
        if self.random_effects_cov.len() != k * k {
            return Err(Error::invalid(format!(
                "random-effects covariance must be {k}x{k} for this trajectory"
            )));
        }
        self.cholesky()?;
        if !(self.error_sd > 0.0) {
            return Err(Error::invalid("measurement error sd must be positive"));
        }
        if !(self.weibull_shape > 0.0) {
            return Err(Error::invalid("Weibull shape must be positive"));
        }
        if !(self.x1_prob >= 0.0 && self.x1_prob <= 1.0) || !(self.x2_sd >= 0.0) {
            return Err(Error::invalid("invalid covariate distribution"));
        }
        if self.max_visits == 0 || !(self.max_followup > 0.0) {
            return Err(Error::invalid("visit schedule needs at least one visit and positive follow-up"));
        }
        if let Some(a) = self.censor_a {
            if !(a > 0.0) {
                return Err(Error::invalid("censoring bound must be positive"));
            }
        }
        Ok(())
    }

    fn cholesky(&self) -> Result<DMatrix<f64>> {
        let k = self.n_random();
        let d = DMatrix::from_row_slice(k, k, &self.random_effects_cov);
        if (&d - d.transpose()).abs().max() > 1e-12 {
            return Err(Error::invalid("random-effects covariance must be symmetric"));
        }
        d.cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::invalid("random-effects covariance must be positive definite"))
    }
}

/// Covariance with the given variances and pairwise correlations (upper
/// triangle, row-major order).
pub fn covariance_from_correlations(variances: &[f64], correlations: &[f64]) -> Vec<f64> {
    let k = variances.len();
    let mut out = vec![0.0; k * k];
    let mut c = correlations.iter();
    for i in 0..k {
        out[i * k + i] = variances[i];
        for j in (i + 1)..k {
            let v = c.next().copied().unwrap_or(0.0) * (variances[i] * variances[j]).sqrt();
            out[i * k + j] = v;
            out[j * k + i] = v;
        }
    }
    out
}

/// One subject's hazard `shape t^(shape-1) exp(k0 + k1 t + k2 t^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectHazard {
    pub shape: f64,
    pub k: [f64; 3],
}

impl SubjectHazard {
    fn exponent(&self, t: f64) -> f64 {
        self.k[0] + t * (self.k[1] + t * self.k[2])
    }

    pub fn hazard(&self, t: f64) -> f64 {
        if t <= 0.0 && self.shape != 1.0 {
            return if self.shape > 1.0 { 0.0 } else { f64::INFINITY };
        }
        self.shape * t.powf(self.shape - 1.0) * self.exponent(t).exp()
    }

    /// `int_a^b h`, one adaptive Simpson call.
    fn segment(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if self.shape < 1.0 {
            // u = t^shape removes the singularity at 0.
            let inv = 1.0 / self.shape;
            let f = |u: f64| self.exponent(u.powf(inv)).exp();
            adaptive_simpson(&f, a.powf(self.shape), b.powf(self.shape), QUAD_TOL)
        } else {
            adaptive_simpson(&|t| self.hazard(t), a, b, QUAD_TOL)
        }
    }

    /// `H(t)` accumulated over unit panels from 0.
    pub fn cumulative(&self, t: f64) -> f64 {
        let mut total = 0.0;
        let mut left = 0.0;
        while left + PANEL <= t {
            total += self.segment(left, left + PANEL);
            left += PANEL;
        }
        total + self.segment(left, t)
    }

    /// `T` with `H(T) = e`, or `None` when `H(t_max) < e`.
    pub fn invert(&self, e: f64, t_max: f64) -> std::result::Result<Option<f64>, ()> {
        let mut left = 0.0;
        let mut h_left = 0.0;
        while left < t_max {
            let right = (left + PANEL).min(t_max);
            let h_right = h_left + self.segment(left, right);
            if h_right >= e {
                let g = |t: f64| h_left + self.segment(left, t) - e;
                return illinois(g, left, right, h_left - e, h_right - e, ROOT_FTOL, 1e-15 * right.max(1.0))
                    .map(Some)
                    .ok_or(());
            }
            left = right;
            h_left = h_right;
        }
        Ok(None)
    }

    /// True `mu(s, w) = int_s^{s+w} exp(-(H(t) - H(s))) dt` by composite
    /// Gauss–Legendre with increments of `H` accumulated between nodes.
    pub fn crmst(&self, s: f64, w: f64) -> f64 {
        let (nodes, weights) = gl_rule();
        let panels = (w / GL_PANEL).ceil().max(1.0) as usize;
        let width = w / panels as f64;
        let mut total = 0.0;
        let mut h = 0.0;
        let mut prev = s;
        for p in 0..panels {
            let a = s + p as f64 * width;
            for (x, wt) in nodes.iter().zip(weights) {
                let t = a + 0.5 * width * (x + 1.0);
                h += self.segment(prev, t);
                prev = t;
                total += 0.5 * width * wt * (-h).exp();
            }
        }
        total
    }
}

fn gl_rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_NODES))
}

/// Everything drawn for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSubject {
    pub id: SubjectId,
    pub x1: f64,
    pub x2: f64,
    pub hazard: SubjectHazard,
    /// The `Exp(1)` draw defining the event time.
    pub e: f64,
    /// The `U(0, 1)` draw scaled by the censoring bound.
    pub censor_draw: f64,
    /// Event time, `None` if beyond the maximum follow-up.
    pub event_time: Option<f64>,
    pub observed: f64,
    pub event: bool,
    pub visits: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct JointSample {
    pub subjects: Vec<JointSubject>,
}

impl JointSample {
    /// Survival table with covariate columns `X1` and `X2`.
    pub fn table(&self) -> SurvivalTable {
        SurvivalTable {
            covariate_names: vec!["X1".into(), "X2".into()],
            records: self
                .subjects
                .iter()
                .map(|s| SurvivalRecord {
                    id: s.id,
                    time: s.observed,
                    event: s.event,
                    group: None,
                    covariates: vec![s.x1, s.x2],
                })
                .collect(),
        }
    }

    pub fn longitudinal(&self) -> Vec<LongitudinalRecord> {
        self.subjects
            .iter()
            .flat_map(|s| {
                s.visits.iter().map(move |&(t, v)| LongitudinalRecord {
                    id: s.id,
                    obs_time: t,
                    name: BIOMARKER.into(),
                    value: v,
                })
            })
            .collect()
    }

    pub fn censoring_fraction(&self) -> f64 {
        self.subjects.iter().filter(|s| !s.event).count() as f64 / self.subjects.len() as f64
    }

    /// True cRMST for a subject id of this sample (ids are `0..n`).
    pub fn true_crmst(&self, id: SubjectId, s: f64, w: f64) -> f64 {
        self.subjects[id.0 as usize].hazard.crmst(s, w)
    }
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fixed-part trajectory coefficients `(m0, m1, m2)` for one subject.
fn trajectory(spec: &JointModelSpec, x1: f64, x2: f64, b: &[f64]) -> [f64; 3] {
    let m0 = spec.beta0 + b[0] + spec.beta1 * x1 + spec.beta2 * x2;
    let m1 = spec.beta_t + b[1];
    let m2 = match spec.trajectory {
        Trajectory::Linear => 0.0,
        Trajectory::Quadratic => spec.beta_t2 + b[2],
    };
    [m0, m1, m2]
}

fn draw_subject(spec: &JointModelSpec, chol: &DMatrix<f64>, seed: u64, i: usize) -> Result<JointSubject> {
    let mut rng = subject_rng(seed, i as u64);
    let x1 = if rng.random::<f64>() < spec.x1_prob { 1.0 } else { 0.0 };
    let x2 = spec.x2_mean + spec.x2_sd * rng.sample::<f64, _>(StandardNormal);
    let k = chol.nrows();
    let z: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let b: Vec<f64> = (0..k).map(|r| (0..=r).map(|c| chol[(r, c)] * z[c]).sum()).collect();
    let e: f64 = Exp1.sample(&mut rng);
    let u_censor: f64 = rng.random();
    let visit_draws: Vec<f64> = (1..spec.max_visits)
        .map(|_| rng.random::<f64>() * spec.max_followup)
        .collect();
    let noise: Vec<f64> = (0..spec.max_visits)
        .map(|_| spec.error_sd * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let m = trajectory(spec, x1, x2, &b);
    let hazard = SubjectHazard {
        shape: spec.weibull_shape,
        k: [
            spec.weibull_log_scale + spec.gamma1 * x1 + spec.gamma2 * x2 + spec.alpha * m[0],
            spec.alpha * m[1],
            spec.alpha * m[2],
        ],
    };
    let id = SubjectId(i as u64);
    let event_time = hazard
        .invert(e, spec.max_followup)
        .map_err(|_| Error::RootFinding {
            subject: id,
            seed,
            stream: i as u64,
        })?;
    let c = spec.censor_a.map_or(f64::INFINITY, |a| a * u_censor);
    let t = event_time.unwrap_or(spec.max_followup);
    let observed = t.min(c);
    let event = event_time.is_some() && t < c;

    let mut times = vec![0.0];
    let mut later = visit_draws;
    later.sort_by(f64::total_cmp);
    times.extend(later);
    let visits = times
        .into_iter()
        .zip(noise)
        .filter(|&(t, _)| t <= observed)
        .map(|(t, eps)| (t, m[0] + t * (m[1] + t * m[2]) + eps))
        .collect();

    Ok(JointSubject {
        id,
        x1,
        x2,
        hazard,
        e,
        censor_draw: u_censor,
        event_time,
        observed,
        event,
        visits,
    })
}

/// Draws `n` subjects; subject `i` uses its own random stream, so the
/// sample does not depend on the number of worker threads.
pub fn simulate_joint(spec: &JointModelSpec, n: usize, seed: u64) -> Result<JointSample> {
    spec.validate()?;
    let chol = spec.cholesky()?;
    let subjects = (0..n)
        .into_par_iter()
        .map(|i| draw_subject(spec, &chol, seed, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(JointSample { subjects })
}

/// Censoring bound `a` giving the target censoring fraction (administrative
/// censoring included) on a pilot sample of `pilot_n` subjects.
pub fn tune_censoring(spec: &JointModelSpec, target: f64, pilot_n: usize, seed: u64) -> Result<Option<f64>> {
    if target == 0.0 {
        return Ok(None);
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::invalid(format!("censoring target must lie in [0, 1), got {target}")));
    }
    let mut base = spec.clone();
    base.censor_a = None;
    let pilot = simulate_joint(&base, pilot_n, seed)?;
    // Each subject keeps its uniform censoring draw as `a` varies.
    let draws: Vec<(Option<f64>, f64)> = pilot
        .subjects
        .iter()
        .map(|s| (s.event_time, s.censor_draw))
        .collect();
    let rate = |a: f64| {
        draws
            .iter()
            .filter(|&&(t, u)| match t {
                Some(t) => a * u <= t,
                None => true,
            })
            .count() as f64
            / draws.len() as f64
    };
    let floor = rate(f64::INFINITY);
    if target < floor {
        return Err(Error::invalid(format!(
            "target censoring {target} is below the administrative censoring fraction {floor:.3}"
        )));
    }
    let mut lo = 1e-6;
    let mut hi = spec.max_followup;
    while rate(hi) > target {
        hi *= 2.0;
        if hi > 1e9 {
            break;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_covariances_are_positive_definite() {
        JointModelSpec::linear_design().validate().unwrap();
        JointModelSpec::quadratic_design().validate().unwrap();
        let d = JointModelSpec::linear_design().random_effects_cov;
        assert!((d[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn literal_linear_matrix_is_rejected() {
        let mut spec = JointModelSpec::linear_design();
        spec.random_effects_cov = vec![1.0, 0.5, 0.5, 0.04];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn weibull_closed_form_inversion() {
        let h = SubjectHazard { shape: 3.0, k: [-4.0, 0.0, 0.0] };
        for e in [1e-4, 0.05, 0.7, 2.0, 5.0] {
            let t = h.invert(e, 50.0).unwrap().unwrap();
            let exact = (e * 4.0f64.exp()).powf(1.0 / 3.0);
            assert!((t - exact).abs() < 1e-8, "{t} vs {exact}");
            assert!((h.cumulative(t) - e).abs() < 1e-8);
        }
    }

    #[test]
    fn shape_below_one_uses_substitution() {
        let h = SubjectHazard { shape: 0.5, k: [0.0, 0.0, 0.0] };
        assert!((h.cumulative(4.0) - 2.0).abs() < 1e-9);
        let t = h.invert(1.0, 20.0).unwrap().unwrap();
        assert!((t - 1.0).abs() < 1e-8);
    }

    #[test]
    fn crmst_of_exponential() {
        let r: f64 = 0.3;
        let h = SubjectHazard { shape: 1.0, k: [r.ln(), 0.0, 0.0] };
        let want = (1.0 - (-r * 5.0).exp()) / r;
        assert!((h.crmst(2.0, 5.0) - want).abs() < 1e-10);
    }

    #[test]
    fn quadrature_step_halving_is_stable() {
        let h = SubjectHazard { shape: 3.0, k: [-3.0, -0.2, 0.05] };
        for t in [0.7, 2.3, 4.9] {
            let whole = h.segment(0.0, t);
            let halves = h.segment(0.0, 0.5 * t) + h.segment(0.5 * t, t);
            assert!((whole - halves).abs() <= 1e-9);
        }
    }

    #[test]
    fn standard_draws_satisfy_inversion_residual() {
        let spec = JointModelSpec::linear_design();
        let sample = simulate_joint(&spec, 300, 5).unwrap();
        for s in &sample.subjects {
            if let Some(t) = s.event_time {
                assert!((s.hazard.cumulative(t) - s.e).abs() <= 1e-8);
            } else {
                assert!(s.hazard.cumulative(spec.max_followup) < s.e);
            }
            assert_eq!(s.visits[0].0, 0.0);
            assert!(s.visits.len() <= 10);
            assert!(s.visits.iter().all(|v| v.0 <= s.observed));
        }
    }

    #[test]
    fn censoring_semantics() {
        let mut spec = JointModelSpec::linear_design();
        spec.censor_a = Some(6.0);
        let sample = simulate_joint(&spec, 500, 9).unwrap();
        for s in &sample.subjects {
            match s.event_time {
                Some(t) if s.event => assert_eq!(s.observed, t),
                _ => assert!(!s.event),
            }
        }
    }

    #[test]
    fn tuning_hits_target() {
        let spec = JointModelSpec::linear_design();
        let a = tune_censoring(&spec, 0.3, 20_000, 77).unwrap().unwrap();
        let mut tuned = spec.clone();
        tuned.censor_a = Some(a);
        let frac = simulate_joint(&tuned, 20_000, 78).unwrap().censoring_fraction();
        assert!((frac - 0.3).abs() < 0.02, "{frac}");
    }
}
