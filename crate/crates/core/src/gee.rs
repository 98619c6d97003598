//! Pseudo-observation estimating equations with an independent working
//! covariance, for a single landmark and for the stacked super dataset.
//!
//! The reported covariance is the sandwich `A^{-1} B A^{-1}` where
//! `A = sum_r d_r d_r^T`, `d_r = g^{-1}'(eta_r) x_r`, and `B` sums outer
//! products of score contributions. In clustered mode the contributions of all
//! rows of a subject are added before the outer product; in row-wise mode each
//! row is its own cluster.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{fill_design_row, BasisLayout};
use crate::error::{Error, Result};
use crate::landmark::{LandmarkRow, SuperDataset};
use crate::linalg::{spd_inverse, symmetrize, StreamingLeastSquares};
use crate::surv::SubjectId;

pub const MODEL_FORMAT_VERSION: u32 = 1;

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 100;
const MAX_HALVINGS: usize = 10;
/// Relative step below which further iterations only move roundoff.
const STEP_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    #[default]
    Identity,
    Log,
}

impl Link {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Link::Identity => mu,
            Link::Log => mu.ln(),
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            Link::Identity => eta,
            Link::Log => eta.exp(),
        }
    }

    /// `d g^{-1}(eta) / d eta`.
    pub fn inverse_deriv(self, eta: f64) -> f64 {
        match self {
            Link::Identity => 1.0,
            Link::Log => eta.exp(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Link::Identity),
            "log" => Ok(Link::Log),
            other => Err(Error::invalid(format!("unknown link `{other}` (identity|log)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Scores summed within subject before the outer product.
    #[default]
    Clustered,
    /// Every row treated as its own cluster.
    NaiveRowwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub iterations: usize,
    /// `max_k |U_k(beta)|` at the returned estimate.
    pub score_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicModelFit {
    pub format_version: u32,
    pub link: Link,
    pub layout: BasisLayout,
    pub grid: Vec<f64>,
    pub w: f64,
    pub beta: Vec<f64>,
    /// Row-major `q x q`.
    pub covariance: Vec<f64>,
    pub covariance_mode: CovarianceMode,
    pub n_subjects: usize,
    pub n_rows: usize,
    /// Degrees of freedom for t intervals, `N - q`.
    pub df: f64,
    pub convergence: Convergence,
}

impl DynamicModelFit {
    pub fn q(&self) -> usize {
        self.beta.len()
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.q(), self.q(), &self.covariance)
    }

    pub fn standard_errors(&self) -> Vec<f64> {
        let q = self.q();
        (0..q).map(|k| self.covariance[k * q + k].max(0.0).sqrt()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.layout.labels()
    }

    pub fn covariate_names(&self) -> Vec<String> {
        self.layout.covariates[1..].iter().map(|c| c.name.clone()).collect()
    }

    pub fn s_range(&self) -> (f64, f64) {
        (
            self.grid.first().copied().unwrap_or(0.0),
            self.grid.last().copied().unwrap_or(0.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkModelFit {
    pub link: Link,
    /// `(Int)` followed by the covariate names.
    pub names: Vec<String>,
    pub s: f64,
    pub w: f64,
    pub beta: Vec<f64>,
    pub covariance: Vec<f64>,
    pub n_subjects: usize,
    pub df: f64,
    pub convergence: Convergence,
}

impl LandmarkModelFit {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let q = self.beta.len();
        DMatrix::from_row_slice(q, q, &self.covariance)
    }

    /// `g^{-1}(beta^T (1, z))`.
    pub fn predict_value(&self, z: &[f64]) -> f64 {
        let eta = self.beta[0]
            + self.beta[1..]
                .iter()
                .zip(z)
                .map(|(b, x)| b * x)
                .sum::<f64>();
        self.link.inverse(eta)
    }
}

/// Rows paired with their spline-expanded design.
struct Design<'a> {
    rows: &'a [LandmarkRow],
    /// Basis values per distinct landmark.
    values: Vec<Vec<Vec<f64>>>,
    landmark_of_row: Vec<usize>,
    q: usize,
}

impl<'a> Design<'a> {
    fn new(rows: &'a [LandmarkRow], layout: &BasisLayout) -> Result<Self> {
        let evaluator = layout.evaluator()?;
        let p = layout.n_covariates();
        for r in rows {
            if r.covariates.len() != p {
                return Err(Error::invalid(format!(
                    "subject {} at landmark {}: {} covariate(s), layout expects {p}",
                    r.id,
                    r.landmark,
                    r.covariates.len()
                )));
            }
            if !r.pseudo_value.is_finite() || r.covariates.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "subject {} at landmark {}: non-finite value",
                    r.id, r.landmark
                )));
            }
        }
        let mut landmarks: Vec<f64> = rows.iter().map(|r| r.landmark).collect();
        landmarks.sort_by(f64::total_cmp);
        landmarks.dedup();
        let values = landmarks.iter().map(|&s| evaluator.basis_values(s)).collect();
        let landmark_of_row = rows
            .iter()
            .map(|r| {
                landmarks
                    .binary_search_by(|s| s.total_cmp(&r.landmark))
                    .expect("landmark present")
            })
            .collect();
        Ok(Self {
            rows,
            values,
            landmark_of_row,
            q: evaluator.q(),
        })
    }

    fn fill(&self, r: usize, out: &mut [f64]) {
        fill_design_row(
            &self.values[self.landmark_of_row[r]],
            &self.rows[r].covariates,
            out,
        );
    }

    fn eta(&self, x: &[f64], beta: &[f64]) -> f64 {
        x.iter().zip(beta).map(|(a, b)| a * b).sum()
    }

    fn least_squares(&self, response: impl Fn(usize, &[f64]) -> f64) -> Result<Vec<f64>> {
        let mut ls = StreamingLeastSquares::new(self.q);
        let mut x = vec![0.0; self.q];
        for r in 0..self.rows.len() {
            self.fill(r, &mut x);
            let y = response(r, &x);
            ls.push(&x, y);
        }
        Ok(ls.finish()?.beta)
    }

    /// Weighted least squares of working residuals on `d_r`, i.e. `A^{-1} U`.
    fn fisher_step(&self, link: Link, beta: &[f64]) -> Result<Vec<f64>> {
        let mut ls = StreamingLeastSquares::new(self.q);
        let mut x = vec![0.0; self.q];
        for r in 0..self.rows.len() {
            self.fill(r, &mut x);
            let eta = self.eta(&x, beta);
            let mu = link.inverse(eta);
            let d = link.inverse_deriv(eta);
            x.iter_mut().for_each(|v| *v *= d);
            ls.push(&x, self.rows[r].pseudo_value - mu);
        }
        Ok(ls.finish()?.beta)
    }

    fn score(&self, link: Link, beta: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.q];
        let mut x = vec![0.0; self.q];
        for r in 0..self.rows.len() {
            self.fill(r, &mut x);
            let eta = self.eta(&x, beta);
            let resid = self.rows[r].pseudo_value - link.inverse(eta);
            let d = link.inverse_deriv(eta);
            for (uk, xk) in u.iter_mut().zip(&x) {
                *uk += d * xk * resid;
            }
        }
        u
    }

    fn n_subjects(&self) -> usize {
        let mut ids: Vec<SubjectId> = self.rows.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn solve(design: &Design, link: Link, w: f64) -> Result<(Vec<f64>, Convergence)> {
    if design.rows.len() <= design.q {
        return Err(Error::invalid(format!(
            "{} row(s) cannot identify {} coefficient(s)",
            design.rows.len(),
            design.q
        )));
    }
    match link {
        Link::Identity => {
            let mut beta = design.least_squares(|r, _| design.rows[r].pseudo_value)?;
            let mut iterations = 1;
            let mut score_norm = inf_norm(&design.score(link, &beta));
            if score_norm > SCORE_TOL {
                let delta = design.fisher_step(link, &beta)?;
                beta.iter_mut().zip(&delta).for_each(|(b, d)| *b += d);
                score_norm = inf_norm(&design.score(link, &beta));
                iterations += 1;
            }
            Ok((beta, Convergence { iterations, score_norm }))
        }
        Link::Log => {
            let floor = 1e-6 * w;
            let mut beta = design.least_squares(|r, _| design.rows[r].pseudo_value.max(floor).ln())?;
            let mut score_norm = inf_norm(&design.score(link, &beta));
            for iteration in 1..=MAX_ITER {
                if score_norm <= SCORE_TOL {
                    return Ok((beta, Convergence { iterations: iteration - 1, score_norm }));
                }
                let delta = design.fisher_step(link, &beta)?;
                let mut step = 1.0;
                let mut candidate: Vec<f64>;
                let mut candidate_norm;
                let mut halvings = 0;
                loop {
                    candidate = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect();
                    candidate_norm = inf_norm(&design.score(link, &candidate));
                    if (candidate_norm.is_finite() && candidate_norm <= score_norm)
                        || halvings == MAX_HALVINGS
                    {
                        break;
                    }
                    step *= 0.5;
                    halvings += 1;
                }
                if !candidate_norm.is_finite() {
                    break;
                }
                let rel_step = inf_norm(&delta) * step / (1.0 + inf_norm(&beta));
                beta = candidate;
                score_norm = candidate_norm;
                if score_norm <= SCORE_TOL || rel_step < STEP_FLOOR {
                    return Ok((beta, Convergence { iterations: iteration, score_norm }));
                }
            }
            Err(Error::NoConvergence {
                iterations: MAX_ITER,
                score_norm,
            })
        }
    }
}

fn sandwich(design: &Design, link: Link, beta: &[f64], mode: CovarianceMode) -> Result<DMatrix<f64>> {
    let q = design.q;
    if beta.len() != q {
        return Err(Error::invalid(format!(
            "coefficient vector has length {}, layout needs {q}",
            beta.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(q, q);
    let mut b = DMatrix::<f64>::zeros(q, q);
    let mut clusters: BTreeMap<SubjectId, Vec<f64>> = BTreeMap::new();
    let mut x = vec![0.0; q];
    for r in 0..design.rows.len() {
        design.fill(r, &mut x);
        let eta = design.eta(&x, beta);
        let d = link.inverse_deriv(eta);
        let resid = design.rows[r].pseudo_value - link.inverse(eta);
        let dx = DVector::from_iterator(q, x.iter().map(|v| v * d));
        a.syger(1.0, &dx, &dx, 1.0);
        match mode {
            CovarianceMode::NaiveRowwise => {
                let u = &dx * resid;
                b.syger(1.0, &u, &u, 1.0);
            }
            CovarianceMode::Clustered => {
                let sum = clusters
                    .entry(design.rows[r].id)
                    .or_insert_with(|| vec![0.0; q]);
                for (s, v) in sum.iter_mut().zip(dx.iter()) {
                    *s += v * resid;
                }
            }
        }
    }
    for u in clusters.values() {
        let u = DVector::from_column_slice(u);
        b.syger(1.0, &u, &u, 1.0);
    }
    // `syger` fills the lower triangle only.
    for i in 0..q {
        for j in (i + 1)..q {
            a[(i, j)] = a[(j, i)];
            b[(i, j)] = b[(j, i)];
        }
    }
    let a_inv = spd_inverse(&a).ok_or(Error::SingularInformation)?;
    let mut cov = &a_inv * b * &a_inv;
    symmetrize(&mut cov);
    Ok(cov)
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Sandwich covariance of `beta` on the super dataset.
pub fn sandwich_cov(
    data: &SuperDataset,
    layout: &BasisLayout,
    link: Link,
    beta: &[f64],
    mode: CovarianceMode,
) -> Result<DMatrix<f64>> {
    let design = Design::new(&data.rows, layout)?;
    sandwich(&design, link, beta, mode)
}

/// Fits the landmark super model `g(mu_i(s, w)) = beta(s)^T Z*_i(s)`.
pub fn fit_super_model(
    data: &SuperDataset,
    layout: &BasisLayout,
    link: Link,
    mode: CovarianceMode,
) -> Result<DynamicModelFit> {
    let design = Design::new(&data.rows, layout)?;
    let (beta, convergence) = solve(&design, link, data.w)?;
    let cov = sandwich(&design, link, &beta, mode)?;
    let n_subjects = data.n_subjects();
    Ok(DynamicModelFit {
        format_version: MODEL_FORMAT_VERSION,
        link,
        layout: layout.clone(),
        grid: data.landmark_grid.clone(),
        w: data.w,
        df: n_subjects as f64 - beta.len() as f64,
        beta,
        covariance: row_major(&cov),
        covariance_mode: mode,
        n_subjects,
        n_rows: data.n_rows(),
        convergence,
    })
}

/// Fits the model of a single landmark dataset with constant coefficients.
pub fn fit_landmark_model(
    rows: &[LandmarkRow],
    covariate_names: &[String],
    w: f64,
    link: Link,
) -> Result<LandmarkModelFit> {
    let s = rows
        .first()
        .map(|r| r.landmark)
        .ok_or_else(|| Error::invalid("landmark dataset is empty"))?;
    if rows.iter().any(|r| r.landmark != s) {
        return Err(Error::invalid("rows of a landmark dataset must share one landmark"));
    }
    let layout = BasisLayout::constant(covariate_names);
    let design = Design::new(rows, &layout)?;
    let (beta, convergence) = solve(&design, link, w)?;
    let cov = sandwich(&design, link, &beta, CovarianceMode::Clustered)?;
    let n_subjects = design.n_subjects();
    Ok(LandmarkModelFit {
        link,
        names: layout.covariates.iter().map(|c| c.name.clone()).collect(),
        s,
        w,
        df: n_subjects as f64 - beta.len() as f64,
        beta,
        covariance: row_major(&cov),
        n_subjects,
        convergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::SplineSpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_super(seed: u64, n: usize, landmarks: &[f64]) -> SuperDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..n {
            let x1: f64 = rng.random_range(0.0..1.0);
            let x2: f64 = rng.random_range(-1.0..1.0);
            let stay = rng.random_range(1..=landmarks.len());
            for &s in &landmarks[..stay] {
                let y = 2.0 + x1 - 0.5 * x2 + 0.1 * s + rng.random_range(-1.0..1.0);
                rows.push(LandmarkRow {
                    id: SubjectId(i as u64),
                    landmark: s,
                    pseudo_value: y,
                    covariates: vec![x1, x2],
                });
            }
        }
        SuperDataset::from_rows(rows, landmarks.to_vec(), 5.0, vec!["x1".into(), "x2".into()])
    }

    fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    fn spline_layout() -> BasisLayout {
        BasisLayout::time_varying(&names(), SplineSpec::new(vec![1.0, 2.0], [0.0, 3.0], 3.0).unwrap())
    }

    /// Normal-equations oracle on an explicitly materialized design.
    fn ols_oracle(data: &SuperDataset, layout: &BasisLayout) -> Vec<f64> {
        let ev = layout.evaluator().unwrap();
        let q = layout.q();
        let mut xtx = DMatrix::<f64>::zeros(q, q);
        let mut xty = DVector::<f64>::zeros(q);
        for r in &data.rows {
            let x = DVector::from_vec(ev.design_row(&r.covariates, r.landmark));
            xtx += &x * x.transpose();
            xty += &x * r.pseudo_value;
        }
        xtx.lu().solve(&xty).unwrap().iter().copied().collect()
    }

    #[test]
    fn identity_link_matches_ols() {
        let grid = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
        let data = random_super(3, 200, &grid);
        let layout = spline_layout();
        let fit = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let oracle = ols_oracle(&data, &layout);
        for (a, b) in fit.beta.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(fit.convergence.score_norm <= 1e-8);
        assert_eq!(fit.df, 200.0 - layout.q() as f64);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let rows: Vec<LandmarkRow> = [1.0, 2.0, 4.5, 0.5]
            .iter()
            .enumerate()
            .map(|(i, &y)| LandmarkRow {
                id: SubjectId(i as u64),
                landmark: 0.0,
                pseudo_value: y,
                covariates: vec![],
            })
            .collect();
        let fit = fit_landmark_model(&rows, &[], 5.0, Link::Identity).unwrap();
        assert!((fit.beta[0] - 2.0).abs() < 1e-14);
        // Sandwich of the mean: sum (y - ybar)^2 / N^2.
        let want = (1.0 + 0.0 + 6.25 + 2.25) / 16.0;
        assert!((fit.covariance[0] - want).abs() < 1e-14);
    }

    #[test]
    fn single_landmark_super_model_matches_landmark_model() {
        let data = random_super(5, 60, &[0.0]);
        let layout = BasisLayout::constant(&names());
        let sup = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let lm = fit_landmark_model(&data.rows, &names(), 5.0, Link::Identity).unwrap();
        for (a, b) in sup.beta.iter().zip(&lm.beta) {
            assert!((a - b).abs() < 1e-10);
        }
        for (a, b) in sup.covariance.iter().zip(&lm.covariance) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn clustered_equals_brute_force() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        let data = random_super(7, 80, &grid);
        let layout = spline_layout();
        let fit = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let ev = layout.evaluator().unwrap();
        let q = layout.q();
        let beta = DVector::from_vec(fit.beta.clone());
        let mut a = DMatrix::<f64>::zeros(q, q);
        let mut b = DMatrix::<f64>::zeros(q, q);
        for &(id, _) in &data.cluster_sizes {
            let mut u = DVector::<f64>::zeros(q);
            for r in data.rows.iter().filter(|r| r.id == id) {
                let x = DVector::from_vec(ev.design_row(&r.covariates, r.landmark));
                a += &x * x.transpose();
                u += &x * (r.pseudo_value - x.dot(&beta));
            }
            b += &u * u.transpose();
        }
        let ai = a.try_inverse().unwrap();
        let oracle = &ai * b * &ai;
        let cov = fit.covariance_matrix();
        let scale = oracle.abs().max();
        assert!((cov - oracle).abs().max() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn modes_agree_with_one_row_per_cluster() {
        let data = random_super(11, 50, &[0.0]);
        let layout = BasisLayout::constant(&names());
        let fit = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let c = sandwich_cov(&data, &layout, Link::Identity, &fit.beta, CovarianceMode::Clustered).unwrap();
        let n = sandwich_cov(&data, &layout, Link::Identity, &fit.beta, CovarianceMode::NaiveRowwise).unwrap();
        assert_eq!(c, n);
    }

    #[test]
    fn covariance_is_symmetric_psd() {
        let data = random_super(13, 120, &[0.0, 1.0, 2.0, 3.0]);
        let fit = fit_super_model(&data, &spline_layout(), Link::Identity, CovarianceMode::Clustered).unwrap();
        let cov = fit.covariance_matrix();
        assert_eq!(cov, cov.transpose());
        let eig = cov.symmetric_eigenvalues();
        assert!(eig.min() >= -1e-10);
    }

    #[test]
    fn scaling_responses_scales_fit() {
        let data = random_super(17, 90, &[0.0, 1.0, 2.0]);
        let mut scaled = data.clone();
        scaled.rows.iter_mut().for_each(|r| r.pseudo_value *= 3.0);
        let layout = BasisLayout::constant(&names());
        let a = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let b = fit_super_model(&scaled, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((3.0 * x - y).abs() < 1e-10);
        }
        for (x, y) in a.covariance.iter().zip(&b.covariance) {
            assert!((9.0 * x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn permuting_ids_leaves_fit_unchanged() {
        let data = random_super(19, 70, &[0.0, 1.0, 2.0]);
        let n = data.n_subjects() as u64;
        let rows = data
            .rows
            .iter()
            .map(|r| LandmarkRow {
                id: SubjectId((r.id.0 * 37 + 11) % n + 1000),
                ..r.clone()
            })
            .collect();
        let permuted = SuperDataset::from_rows(rows, data.landmark_grid.clone(), 5.0, names());
        let layout = BasisLayout::constant(&names());
        let a = fit_super_model(&data, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        let b = fit_super_model(&permuted, &layout, Link::Identity, CovarianceMode::Clustered).unwrap();
        for (x, y) in a.beta.iter().zip(&b.beta) {
            assert!((x - y).abs() < 1e-10);
        }
        for (x, y) in a.covariance.iter().zip(&b.covariance) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn log_link_converges_to_score_root() {
        let data = random_super(23, 150, &[0.0, 1.0, 2.0]);
        let layout = BasisLayout::constant(&names());
        let fit = fit_super_model(&data, &layout, Link::Log, CovarianceMode::Clustered).unwrap();
        assert!(fit.convergence.score_norm <= 1e-8, "{:?}", fit.convergence);
        let design = Design::new(&data.rows, &layout).unwrap();
        assert!(inf_norm(&design.score(Link::Log, &fit.beta)) <= 1e-8);
    }

    #[test]
    fn rank_deficient_design_rejected() {
        let rows: Vec<LandmarkRow> = (0..10)
            .map(|i| LandmarkRow {
                id: SubjectId(i),
                landmark: 0.0,
                pseudo_value: i as f64,
                covariates: vec![2.0],
            })
            .collect();
        let err = fit_landmark_model(&rows, &["x".to_string()], 5.0, Link::Identity).unwrap_err();
        assert!(matches!(err, Error::SingularDesign { .. }));
    }

    #[test]
    fn link_roundtrip() {
        for link in [Link::Identity, Link::Log] {
            for x in [0.1, 1.0, 3.5, 12.0] {
                assert!((link.link(link.inverse(link.link(x))) - link.link(x)).abs() < 1e-12);
            }
        }
    }
}
