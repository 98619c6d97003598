//! Natural cubic spline bases for time-varying coefficients and the `H(s)`
//! matrix mapping the flat coefficient vector to `beta(s)`.
//!
//! The spline basis follows the usual natural-spline reparameterisation of a
//! cubic B-spline basis: the columns are projected onto the null space of the
//! second-derivative constraints at the two boundary knots. Beyond the
//! boundaries the basis is continued linearly.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSpec {
    /// Interior knots on the original time scale.
    pub interior_knots: Vec<f64>,
    /// `[low, high]` on the original time scale.
    pub boundary_knots: [f64; 2],
    /// Times (and knots) are divided by this before evaluation.
    pub scale: f64,
    /// Keep the first B-spline column (adds one dimension).
    #[serde(default)]
    pub include_intercept: bool,
}

impl SplineSpec {
    pub fn new(interior_knots: Vec<f64>, boundary_knots: [f64; 2], scale: f64) -> Result<Self> {
        let spec = Self {
            interior_knots,
            boundary_knots,
            scale,
            include_intercept: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Knots at interior quantiles of `times` so that the basis has `df`
    /// columns (`df - 1` interior knots).
    pub fn with_df(df: usize, times: &[f64], boundary_knots: [f64; 2], scale: f64) -> Result<Self> {
        if df == 0 {
            return Err(Error::invalid("spline degrees of freedom must be at least 1"));
        }
        if times.is_empty() {
            return Err(Error::invalid("no times supplied for spline knot placement"));
        }
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let knots = (1..df)
            .map(|j| quantile_type7(&sorted, j as f64 / df as f64))
            .collect();
        Self::new(knots, boundary_knots, scale)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.boundary_knots;
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("spline scale must be positive, got {}", self.scale)));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!("invalid boundary knots [{lo}, {hi}]")));
        }
        let mut prev = lo;
        for &k in &self.interior_knots {
            if !(k > prev) {
                return Err(Error::invalid(format!(
                    "interior knots must increase strictly inside ({lo}, {hi})"
                )));
            }
            prev = k;
        }
        if !(prev < hi) && !self.interior_knots.is_empty() {
            return Err(Error::invalid(format!(
                "interior knots must increase strictly inside ({lo}, {hi})"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.interior_knots.len() + 1 + usize::from(self.include_intercept)
    }
}

fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// A natural spline ready for repeated evaluation.
#[derive(Debug, Clone)]
pub struct NaturalSpline {
    knots: Vec<f64>,
    bounds: [f64; 2],
    scale: f64,
    drop_first: bool,
    /// Columns of the constraint null space, `n_bspline x dim`.
    projection: DMatrix<f64>,
}

const ORDER: usize = 4;

impl NaturalSpline {
    pub fn new(spec: &SplineSpec) -> Result<Self> {
        spec.validate()?;
        let lo = spec.boundary_knots[0] / spec.scale;
        let hi = spec.boundary_knots[1] / spec.scale;
        let mut knots = vec![lo; ORDER];
        knots.extend(spec.interior_knots.iter().map(|k| k / spec.scale));
        knots.extend(std::iter::repeat(hi).take(ORDER));
        let mut spline = Self {
            knots,
            bounds: [lo, hi],
            scale: spec.scale,
            drop_first: !spec.include_intercept,
            projection: DMatrix::zeros(0, 0),
        };
        let c_lo = spline.raw(lo, 2);
        let c_hi = spline.raw(hi, 2);
        let m = c_lo.len();
        let mut ct = DMatrix::zeros(m, 2);
        for i in 0..m {
            ct[(i, 0)] = c_lo[i];
            ct[(i, 1)] = c_hi[i];
        }
        let q = householder_full_q(ct);
        spline.projection = q.columns(2, m - 2).into_owned();
        Ok(spline)
    }

    pub fn dim(&self) -> usize {
        self.projection.ncols()
    }

    /// Basis values at time `t` (original scale).
    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.eval_standardized(t / self.scale, 0)
    }

    /// `deriv`-th derivative with respect to standardized time.
    pub fn eval_standardized(&self, x: f64, deriv: usize) -> Vec<f64> {
        let [lo, hi] = self.bounds;
        let raw = if x < lo || x > hi {
            let b = if x < lo { lo } else { hi };
            match deriv {
                0 => {
                    let v = self.raw(b, 0);
                    let d = self.raw(b, 1);
                    v.iter().zip(&d).map(|(v, d)| v + (x - b) * d).collect()
                }
                1 => self.raw(b, 1),
                _ => vec![0.0; self.raw_len()],
            }
        } else {
            self.raw(x, deriv)
        };
        let mut out = vec![0.0; self.dim()];
        for (j, o) in out.iter_mut().enumerate() {
            *o = raw
                .iter()
                .enumerate()
                .map(|(i, r)| r * self.projection[(i, j)])
                .sum();
        }
        out
    }

    fn raw_len(&self) -> usize {
        self.knots.len() - ORDER - usize::from(self.drop_first)
    }

    /// B-spline values (or derivatives) inside the boundary, first column dropped as configured.
    fn raw(&self, x: f64, deriv: usize) -> Vec<f64> {
        let all = bspline_values(&self.knots, x, deriv);
        if self.drop_first {
            all[1..].to_vec()
        } else {
            all
        }
    }
}

/// All cubic B-spline basis functions (or a derivative) at `x`.
fn bspline_values(knots: &[f64], x: f64, deriv: usize) -> Vec<f64> {
    let n_intervals = knots.len() - 1;
    // Interval index with knots[j] <= x < knots[j + 1]; the right boundary
    // belongs to the last non-empty interval.
    let last = (0..n_intervals)
        .rev()
        .find(|&j| knots[j] < knots[j + 1])
        .expect("non-degenerate knot vector");
    let j = (0..=last)
        .rev()
        .find(|&j| knots[j] <= x && knots[j] < knots[j + 1])
        .unwrap_or(0);

    // levels[k - 1] holds order-k functions.
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(ORDER);
    let mut first = vec![0.0; n_intervals];
    first[j] = 1.0;
    levels.push(first);
    for k in 2..=ORDER {
        let prev = &levels[k - 2];
        let count = knots.len() - k;
        let mut cur = vec![0.0; count];
        for (i, c) in cur.iter_mut().enumerate() {
            let d1 = knots[i + k - 1] - knots[i];
            let d2 = knots[i + k] - knots[i + 1];
            let a = if d1 > 0.0 { (x - knots[i]) / d1 * prev[i] } else { 0.0 };
            let b = if d2 > 0.0 { (knots[i + k] - x) / d2 * prev[i + 1] } else { 0.0 };
            *c = a + b;
        }
        levels.push(cur);
    }
    derivative(knots, &levels, ORDER, deriv)
}

fn derivative(knots: &[f64], levels: &[Vec<f64>], order: usize, deriv: usize) -> Vec<f64> {
    if deriv == 0 {
        return levels[order - 1].clone();
    }
    if order == 1 {
        return vec![0.0; knots.len() - 1];
    }
    let lower = derivative(knots, levels, order - 1, deriv - 1);
    let k = order as f64 - 1.0;
    (0..knots.len() - order)
        .map(|i| {
            let d1 = knots[i + order - 1] - knots[i];
            let d2 = knots[i + order] - knots[i + 1];
            let a = if d1 > 0.0 { lower[i] / d1 } else { 0.0 };
            let b = if d2 > 0.0 { lower[i + 1] / d2 } else { 0.0 };
            k * (a - b)
        })
        .collect()
}

/// Full orthogonal factor of the QR decomposition of an `m x n` matrix (`m >= n`).
fn householder_full_q(mut a: DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    let mut reflectors: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
    for k in 0..n.min(m) {
        let norm: f64 = (k..m).map(|i| a[(i, k)] * a[(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k, k)] >= 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);
        for c in k..n {
            let dot: f64 = (k..m).map(|i| v[i - k] * a[(i, c)]).sum();
            for i in k..m {
                a[(i, c)] -= 2.0 * v[i - k] * dot;
            }
        }
        reflectors.push((k, v));
    }
    let mut q = DMatrix::identity(m, m);
    for (k, v) in reflectors.iter().rev() {
        for c in 0..m {
            let dot: f64 = (*k..m).map(|i| v[i - k] * q[(i, c)]).sum();
            for i in *k..m {
                q[(i, c)] -= 2.0 * v[i - k] * dot;
            }
        }
    }
    q
}

/// Natural spline basis of `spec` at time `s`.
pub fn ncs_eval(spec: &SplineSpec, s: f64) -> Result<Vec<f64>> {
    Ok(NaturalSpline::new(spec)?.eval(s))
}

/// One component of a covariate's coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisTerm {
    Constant,
    Spline(SplineSpec),
}

impl BasisTerm {
    pub fn dim(&self) -> usize {
        match self {
            BasisTerm::Constant => 1,
            BasisTerm::Spline(s) => s.dim(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateBasis {
    pub name: String,
    pub terms: Vec<BasisTerm>,
}

impl CovariateBasis {
    pub fn dim(&self) -> usize {
        self.terms.iter().map(BasisTerm::dim).sum()
    }
}

/// Basis assignment for the intercept (entry 0) and each covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisLayout {
    pub covariates: Vec<CovariateBasis>,
}

pub const INTERCEPT: &str = "(Int)";

impl BasisLayout {
    /// Time-constant coefficients for the intercept and every covariate.
    pub fn constant(names: &[String]) -> Self {
        Self::with_terms(names, vec![BasisTerm::Constant])
    }

    /// Main effect plus natural-spline interaction for the intercept and every covariate.
    pub fn time_varying(names: &[String], spline: SplineSpec) -> Self {
        Self::with_terms(names, vec![BasisTerm::Constant, BasisTerm::Spline(spline)])
    }

    fn with_terms(names: &[String], terms: Vec<BasisTerm>) -> Self {
        let covariates = std::iter::once(INTERCEPT.to_string())
            .chain(names.iter().cloned())
            .map(|name| CovariateBasis {
                name,
                terms: terms.clone(),
            })
            .collect();
        Self { covariates }
    }

    /// Number of covariates `P`, excluding the intercept.
    pub fn n_covariates(&self) -> usize {
        self.covariates.len().saturating_sub(1)
    }

    pub fn q(&self) -> usize {
        self.covariates.iter().map(CovariateBasis::dim).sum()
    }

    /// First flat coefficient index of covariate `p` (0 = intercept).
    pub fn offset(&self, p: usize) -> usize {
        self.covariates[..p].iter().map(CovariateBasis::dim).sum()
    }

    /// Flat coefficient index of basis column `col` of covariate `p`.
    pub fn index(&self, p: usize, col: usize) -> Option<usize> {
        (p < self.covariates.len() && col < self.covariates[p].dim()).then(|| self.offset(p) + col)
    }

    pub fn validate(&self) -> Result<()> {
        if self.covariates.is_empty() {
            return Err(Error::invalid("basis layout has no rows"));
        }
        for c in &self.covariates {
            if c.terms.is_empty() {
                return Err(Error::invalid(format!("covariate `{}` has no basis terms", c.name)));
            }
            for t in &c.terms {
                if let BasisTerm::Spline(s) = t {
                    s.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Coefficient labels, e.g. `X1` and `X1: s3`.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.q());
        for (p, c) in self.covariates.iter().enumerate() {
            for t in &c.terms {
                match t {
                    BasisTerm::Constant => out.push(c.name.clone()),
                    BasisTerm::Spline(s) => {
                        for k in 1..=s.dim() {
                            if p == 0 {
                                out.push(format!("s{k}"));
                            } else {
                                out.push(format!("{}: s{k}", c.name));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn evaluator(&self) -> Result<LayoutEvaluator> {
        self.validate()?;
        let terms = self
            .covariates
            .iter()
            .map(|c| {
                c.terms
                    .iter()
                    .map(|t| match t {
                        BasisTerm::Constant => Ok(None),
                        BasisTerm::Spline(s) => NaturalSpline::new(s).map(Some),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayoutEvaluator {
            terms,
            q: self.q(),
        })
    }
}

/// Prepared evaluator for a [`BasisLayout`].
#[derive(Debug, Clone)]
pub struct LayoutEvaluator {
    terms: Vec<Vec<Option<NaturalSpline>>>,
    q: usize,
}

impl LayoutEvaluator {
    pub fn q(&self) -> usize {
        self.q
    }

    /// `h_p(s)` for every row `p`, concatenated in flat coefficient order.
    pub fn basis_values(&self, s: f64) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .map(|terms| {
                let mut h = Vec::new();
                for t in terms {
                    match t {
                        None => h.push(1.0),
                        Some(spline) => h.extend(spline.eval(s)),
                    }
                }
                h
            })
            .collect()
    }

    pub fn h_matrix(&self, s: f64) -> DMatrix<f64> {
        let values = self.basis_values(s);
        let mut h = DMatrix::zeros(values.len(), self.q);
        let mut col = 0;
        for (p, row) in values.iter().enumerate() {
            for &v in row {
                h[(p, col)] = v;
                col += 1;
            }
        }
        h
    }

    /// `x = H(s)^T Z*` with `Z* = (1, z)`.
    pub fn design_row(&self, z: &[f64], s: f64) -> Vec<f64> {
        let values = self.basis_values(s);
        let mut x = vec![0.0; self.q];
        fill_design_row(&values, z, &mut x);
        x
    }
}

/// Writes `H(s)^T (1, z)` given precomputed basis values.
pub(crate) fn fill_design_row(values: &[Vec<f64>], z: &[f64], out: &mut [f64]) {
    let mut col = 0;
    for (p, row) in values.iter().enumerate() {
        let zp = if p == 0 { 1.0 } else { z[p - 1] };
        for &h in row {
            out[col] = zp * h;
            col += 1;
        }
    }
}

/// `H(s)`, a `(P + 1) x q` matrix.
pub fn h_matrix(layout: &BasisLayout, s: f64) -> Result<DMatrix<f64>> {
    Ok(layout.evaluator()?.h_matrix(s))
}

/// Flat design row `H(s)^T (1, z)`.
pub fn design_row(layout: &BasisLayout, z: &[f64], s: f64) -> Result<Vec<f64>> {
    if z.len() != layout.n_covariates() {
        return Err(Error::invalid(format!(
            "expected {} covariate value(s), got {}",
            layout.n_covariates(),
            z.len()
        )));
    }
    Ok(layout.evaluator()?.design_row(z, s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn standard_spec() -> SplineSpec {
        SplineSpec::new(vec![2.0, 4.0, 6.0, 8.0], [0.0, 10.0], 10.0).unwrap()
    }

    /// Residual sum of squares of projecting `y` on the columns of `x`.
    fn projection_residual(x: &DMatrix<f64>, y: &[f64]) -> f64 {
        let svd = x.clone().svd(true, true);
        let yv = nalgebra::DVector::from_column_slice(y);
        let beta = svd.solve(&yv, 1e-12).unwrap();
        (x * beta - yv).norm()
    }

    /// Textbook natural cubic spline basis with truncated power functions.
    fn truncated_power(knots: &[f64], x: f64) -> Vec<f64> {
        let k = knots.len();
        let d = |j: usize| {
            let p = |a: f64| (x - a).max(0.0).powi(3);
            (p(knots[j]) - p(knots[k - 1])) / (knots[k - 1] - knots[j])
        };
        let mut out = vec![1.0, x];
        for j in 0..k - 2 {
            out.push(d(j) - d(k - 2));
        }
        out
    }

    #[test]
    fn dimension_matches_interior_knots() {
        let spline = NaturalSpline::new(&standard_spec()).unwrap();
        assert_eq!(spline.dim(), 5);
        let mut with_int = standard_spec();
        with_int.include_intercept = true;
        assert_eq!(NaturalSpline::new(&with_int).unwrap().dim(), 6);
    }

    #[test]
    fn spans_truncated_power_space() {
        let spec = standard_spec();
        let spline = NaturalSpline::new(&spec).unwrap();
        let knots = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
        let xs: Vec<f64> = (0..50).map(|i| -0.2 + 1.4 * i as f64 / 49.0).collect();
        let ours: Vec<Vec<f64>> = xs.iter().map(|&x| spline.eval(x * 10.0)).collect();
        let tp: Vec<Vec<f64>> = xs.iter().map(|&x| truncated_power(&knots, x)).collect();

        let tp_mat = DMatrix::from_fn(xs.len(), 6, |i, j| tp[i][j]);
        for j in 0..5 {
            let y: Vec<f64> = ours.iter().map(|r| r[j]).collect();
            assert!(projection_residual(&tp_mat, &y) < 1e-9);
        }
        let ours_mat = DMatrix::from_fn(xs.len(), 6, |i, j| if j == 0 { 1.0 } else { ours[i][j - 1] });
        for j in 0..6 {
            let y: Vec<f64> = tp.iter().map(|r| r[j]).collect();
            assert!(projection_residual(&ours_mat, &y) < 1e-9);
        }
    }

    #[test]
    fn second_derivative_vanishes_at_and_beyond_boundaries() {
        let spline = NaturalSpline::new(&standard_spec()).unwrap();
        let h = 1e-4;
        for x in [0.0, 1.0] {
            for v in spline.eval_standardized(x, 2) {
                assert!(v.abs() < 1e-10, "x={x} d2={v}");
            }
        }
        for x in [-0.3, 1.4] {
            let f = |t: f64| spline.eval_standardized(t, 0);
            let (a, b, c) = (f(x - h), f(x), f(x + h));
            for j in 0..5 {
                let d2 = (a[j] - 2.0 * b[j] + c[j]) / (h * h);
                assert!(d2.abs() < 1e-6, "x={x} col={j} d2={d2}");
            }
        }
    }

    /// Reference values from an independent B-spline evaluation projected with
    /// a LINPACK-convention Householder QR of the constraint matrix.
    #[test]
    fn matches_reference_projection() {
        let expected = [
            (1.0, [0.0208333333, 0.0, -0.1162087096, 0.3486261301, -0.2324174201]),
            (3.5, [0.6119791667, 0.0703125, -0.0798934881, 0.2396804644, -0.1597869763]),
            (5.0, [0.4791666667, 0.4791666667, 0.014063024, 0.020310928, -0.0135406187]),
        ];
        for (s, want) in expected {
            let got = ncs_eval(&standard_spec(), s).unwrap();
            for (g, w) in got.iter().zip(want) {
                assert!((g - w).abs() < 1e-9, "s={s}: {got:?}");
            }
        }
    }

    #[test]
    fn constant_layout_gives_identity() {
        let names = vec!["a".to_string(), "b".to_string()];
        let layout = BasisLayout::constant(&names);
        let h = h_matrix(&layout, 3.7).unwrap();
        assert_eq!(h, DMatrix::identity(3, 3));
    }

    #[test]
    fn standard_layout_dimension() {
        let names: Vec<String> = ["X1", "X2", "Y(s)"].iter().map(|s| s.to_string()).collect();
        let layout = BasisLayout::time_varying(&names, standard_spec());
        assert_eq!(layout.q(), 24);
        let labels = layout.labels();
        assert_eq!(labels[0], "(Int)");
        assert_eq!(labels[1], "s1");
        assert_eq!(labels[6], "X1");
        assert_eq!(labels[11], "X1: s5");
        let idx: Vec<usize> = (0..4)
            .flat_map(|p| (0..6).map(move |c| (p, c)))
            .map(|(p, c)| layout.index(p, c).unwrap())
            .collect();
        assert_eq!(idx, (0..24).collect::<Vec<_>>());
        assert_eq!(layout.index(4, 0), None);
    }

    #[test]
    fn df_constructor_places_quantile_knots() {
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5).collect();
        let spec = SplineSpec::with_df(5, &times, [0.0, 10.0], 10.0).unwrap();
        assert_eq!(spec.interior_knots, vec![2.0, 4.0, 6.0, 8.0]);
        assert_eq!(spec.dim(), 5);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(SplineSpec::new(vec![2.0, 2.0], [0.0, 10.0], 10.0).is_err());
        assert!(SplineSpec::new(vec![12.0], [0.0, 10.0], 10.0).is_err());
        assert!(SplineSpec::new(vec![5.0], [0.0, 10.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn h_times_beta_matches_direct(
            s in 0.0f64..10.0,
            beta in proptest::collection::vec(-3.0f64..3.0, 24),
        ) {
            let names: Vec<String> = ["X1", "X2", "Y(s)"].iter().map(|s| s.to_string()).collect();
            let layout = BasisLayout::time_varying(&names, standard_spec());
            let ev = layout.evaluator().unwrap();
            let h = ev.h_matrix(s);
            let b = nalgebra::DVector::from_vec(beta.clone());
            let via_h = &h * &b;
            let spline = NaturalSpline::new(&standard_spec()).unwrap().eval(s);
            for p in 0..4 {
                let off = 6 * p;
                let direct = beta[off] + (0..5).map(|k| beta[off + 1 + k] * spline[k]).sum::<f64>();
                prop_assert!((via_h[p] - direct).abs() < 1e-12);
            }
        }

        #[test]
        fn standardization_equals_rescaled_knots(s in -2.0f64..14.0, sigma in 0.5f64..20.0) {
            let scaled = SplineSpec::new(vec![2.0, 4.0, 6.0, 8.0], [0.0, 10.0], sigma).unwrap();
            let unit = SplineSpec::new(
                vec![2.0 / sigma, 4.0 / sigma, 6.0 / sigma, 8.0 / sigma],
                [0.0, 10.0 / sigma],
                1.0,
            ).unwrap();
            let a = ncs_eval(&scaled, s).unwrap();
            let b = ncs_eval(&unit, s / sigma).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn design_row_is_linear_in_covariates(
            s in 0.0f64..10.0,
            z1 in proptest::collection::vec(-5.0f64..5.0, 3),
            z2 in proptest::collection::vec(-5.0f64..5.0, 3),
            a in 0.0f64..1.0,
        ) {
            let names: Vec<String> = ["X1", "X2", "Y(s)"].iter().map(|s| s.to_string()).collect();
            let layout = BasisLayout::time_varying(&names, standard_spec());
            let mix: Vec<f64> = z1.iter().zip(&z2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
            let r1 = design_row(&layout, &z1, s).unwrap();
            let r2 = design_row(&layout, &z2, s).unwrap();
            let rm = design_row(&layout, &mix, s).unwrap();
            for k in 0..24 {
                prop_assert!((rm[k] - (a * r1[k] + (1.0 - a) * r2[k])).abs() < 1e-12);
            }
        }
    }
}
