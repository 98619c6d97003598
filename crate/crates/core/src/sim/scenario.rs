//! Two-arm piecewise-exponential scenarios with uniform censoring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surv::{SubjectId, SurvivalRecord};

/// Hazard ratio `hr` from `start` until the next piece begins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrPiece {
    pub start: f64,
    pub hr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Median of the exponential control arm.
    pub control_median: f64,
    /// Treatment-to-control hazard ratio; the first piece starts at 0.
    pub hr_pieces: Vec<HrPiece>,
    /// Control-arm censoring `C ~ U(0, a)`; `None` means no censoring.
    pub censor_a: Option<f64>,
    /// Treatment-arm censoring `C ~ U(0, b)`.
    pub censor_b: Option<f64>,
    pub n_per_arm: usize,
}

impl ScenarioSpec {
    /// The four designs: 1 null, 2 proportional hazards, 3 early and 4 late difference.
    pub fn standard(scenario: u8, n_per_arm: usize) -> Result<Self> {
        let pieces: &[(f64, f64)] = match scenario {
            1 => &[(0.0, 1.0)],
            2 => &[(0.0, 0.67)],
            3 => &[(0.0, 0.1), (5.0, 0.67), (15.0, 1.0)],
            4 => &[(0.0, 1.0), (10.0, 0.33)],
            other => return Err(Error::invalid(format!("unknown scenario {other} (1-4)"))),
        };
        Ok(Self {
            control_median: 10.0,
            hr_pieces: pieces.iter().map(|&(start, hr)| HrPiece { start, hr }).collect(),
            censor_a: None,
            censor_b: None,
            n_per_arm,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.control_median > 0.0 && self.control_median.is_finite()) {
            return Err(Error::invalid("control median must be positive"));
        }
        if self.hr_pieces.first().map(|p| p.start) != Some(0.0) {
            return Err(Error::invalid("hazard-ratio pieces must start at 0"));
        }
        if self.hr_pieces.windows(2).any(|p| !(p[1].start > p[0].start)) {
            return Err(Error::invalid("hazard-ratio pieces must have increasing starts"));
        }
        if self.hr_pieces.iter().any(|p| !(p.hr > 0.0 && p.hr.is_finite())) {
            return Err(Error::invalid("hazard ratios must be positive"));
        }
        for c in [self.censor_a, self.censor_b].into_iter().flatten() {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid("censoring bounds must be positive"));
            }
        }
        if self.n_per_arm == 0 {
            return Err(Error::invalid("sample size per arm must be positive"));
        }
        Ok(())
    }

    /// Sets both censoring bounds so each arm has the target censoring fraction.
    pub fn with_censoring_rate(mut self, rate: f64) -> Result<Self> {
        self.censor_a = self.arm(0).censoring_bound_for_rate(rate)?;
        self.censor_b = self.arm(1).censoring_bound_for_rate(rate)?;
        Ok(self)
    }

    pub fn control_rate(&self) -> f64 {
        std::f64::consts::LN_2 / self.control_median
    }

    /// Event-time distribution of arm 0 (control) or 1 (treatment).
    pub fn arm(&self, arm: usize) -> PiecewiseExponential {
        let r = self.control_rate();
        if arm == 0 {
            PiecewiseExponential::new(vec![0.0], vec![r])
        } else {
            PiecewiseExponential::new(
                self.hr_pieces.iter().map(|p| p.start).collect(),
                self.hr_pieces.iter().map(|p| p.hr * r).collect(),
            )
        }
    }

    pub fn censor_bound(&self, arm: usize) -> Option<f64> {
        if arm == 0 {
            self.censor_a
        } else {
            self.censor_b
        }
    }
}

/// Piecewise-constant hazard `rates[k]` on `[starts[k], starts[k + 1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExponential {
    starts: Vec<f64>,
    rates: Vec<f64>,
    /// Cumulative hazard at each piece start.
    cum: Vec<f64>,
}

impl PiecewiseExponential {
    pub fn new(starts: Vec<f64>, rates: Vec<f64>) -> Self {
        let mut cum = vec![0.0; starts.len()];
        for k in 1..starts.len() {
            cum[k] = cum[k - 1] + rates[k - 1] * (starts[k] - starts[k - 1]);
        }
        Self { starts, rates, cum }
    }

    fn piece(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    pub fn cumulative_hazard(&self, t: f64) -> f64 {
        let k = self.piece(t);
        self.cum[k] + self.rates[k] * (t - self.starts[k])
    }

    pub fn survival(&self, t: f64) -> f64 {
        (-self.cumulative_hazard(t)).exp()
    }

    /// Solves `H(t) = e`.
    pub fn invert(&self, e: f64) -> f64 {
        let k = self.cum.partition_point(|&c| c <= e).saturating_sub(1);
        self.starts[k] + (e - self.cum[k]) / self.rates[k]
    }

    /// `int_a^b S(t) dt`.
    pub fn integrate_survival(&self, a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        let mut left = a;
        while left < b {
            let k = self.piece(left);
            let right = self.starts.get(k + 1).copied().unwrap_or(f64::INFINITY).min(b);
            let s_left = self.survival(left);
            let r = self.rates[k];
            let len = right - left;
            total += if r > 0.0 {
                s_left * (1.0 - (-r * len).exp()) / r
            } else {
                s_left * len
            };
            left = right;
        }
        total
    }

    /// `mu(s, w) = int_s^{s+w} S(t) dt / S(s)`.
    pub fn crmst(&self, s: f64, w: f64) -> f64 {
        self.integrate_survival(s, s + w) / self.survival(s)
    }

    /// Censoring fraction under `C ~ U(0, a)`: `P(C < T) = int_0^a S / a`.
    pub fn censoring_rate(&self, a: f64) -> f64 {
        self.integrate_survival(0.0, a) / a
    }

    /// Upper bound `a` giving censoring fraction `rate`, by bisection.
    pub fn censoring_bound_for_rate(&self, rate: f64) -> Result<Option<f64>> {
        if rate == 0.0 {
            return Ok(None);
        }
        if !(rate > 0.0 && rate < 1.0) {
            return Err(Error::invalid(format!("censoring rate must lie in [0, 1), got {rate}")));
        }
        let mut lo = 1e-9;
        let mut hi = 1.0;
        while self.censoring_rate(hi) > rate {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::invalid(format!("censoring rate {rate} unattainable")));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.censoring_rate(mid) > rate {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(Some(0.5 * (lo + hi)))
    }
}

/// Random-number stream for subject `i` of `arm`.
pub fn arm_stream(arm: usize, i: usize) -> u64 {
    ((arm as u64) << 32) + i as u64
}

fn subject_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws both arms. Control subjects get ids `0..n`, treatment `n..2n`.
pub fn simulate_scenario(spec: &ScenarioSpec, seed: u64) -> Result<[Vec<SurvivalRecord>; 2]> {
    spec.validate()?;
    let n = spec.n_per_arm;
    let draw_arm = |arm: usize| {
        let dist = spec.arm(arm);
        let bound = spec.censor_bound(arm);
        let label = if arm == 0 { "control" } else { "treatment" };
        (0..n)
            .map(|i| {
                let mut rng = subject_rng(seed, arm_stream(arm, i));
                let e: f64 = Exp1.sample(&mut rng);
                let t = dist.invert(e);
                let c = bound.map_or(f64::INFINITY, |a| a * rng.random::<f64>());
                SurvivalRecord {
                    id: SubjectId((arm * n + i) as u64),
                    time: t.min(c),
                    event: t < c,
                    group: Some(label.to_string()),
                    covariates: Vec::new(),
                }
            })
            .collect::<Vec<_>>()
    };
    Ok([draw_arm(0), draw_arm(1)])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthEstimate {
    /// Large-population average, treatment minus control.
    pub monte_carlo: f64,
    pub monte_carlo_se: f64,
    /// Exact piecewise-exponential integral.
    pub closed_form: f64,
}

/// Average of `min(T - s, w)` over `n_draws` population draws surviving past `s`,
/// with its Monte Carlo standard error.
fn population_crmst(dist: &PiecewiseExponential, s: f64, w: f64, n_draws: usize, seed: u64, arm: usize) -> (f64, f64, usize) {
    let mut rng = subject_rng(seed, arm_stream(arm, 0) | (1u64 << 40));
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for _ in 0..n_draws {
        let e: f64 = Exp1.sample(&mut rng);
        let t = dist.invert(e);
        if t > s {
            let x = (t - s).min(w);
            sum += x;
            sum_sq += x * x;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = (sum_sq / count as f64 - mean * mean).max(0.0);
    (mean, (var / count as f64).sqrt(), count)
}

/// Population truth of the cRMST difference, treatment minus control.
pub fn true_crmstd(spec: &ScenarioSpec, s: f64, w: f64, n_draws: usize, seed: u64) -> Result<TruthEstimate> {
    spec.validate()?;
    let (m0, se0, c0) = population_crmst(&spec.arm(0), s, w, n_draws, seed, 0);
    let (m1, se1, c1) = population_crmst(&spec.arm(1), s, w, n_draws, seed, 1);
    if c0 == 0 || c1 == 0 {
        return Err(Error::EmptyRiskSet {
            s,
            n_at_risk: c0.min(c1),
            required: 1,
        });
    }
    Ok(TruthEstimate {
        monte_carlo: m1 - m0,
        monte_carlo_se: (se0 * se0 + se1 * se1).sqrt(),
        closed_form: spec.arm(1).crmst(s, w) - spec.arm(0).crmst(s, w),
    })
}
