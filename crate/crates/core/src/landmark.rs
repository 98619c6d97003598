//! Landmark datasets and the stacked super prediction dataset.
//!
//! At each landmark `s` the risk set `{Y > s}` is selected, time-dependent
//! covariates are frozen at their last value observed at or before `s`, and
//! every member receives its pseudo-value of `mu(s, w)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::surv::{pseudo_observations, SubjectId, SurvivalRecord, SurvivalTable, TailPolicy};

/// A single biomarker measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongitudinalRecord {
    pub id: SubjectId,
    pub obs_time: f64,
    pub name: String,
    pub value: f64,
}

impl LongitudinalRecord {
    pub fn new(id: u64, obs_time: f64, name: impl Into<String>, value: f64) -> Self {
        Self {
            id: SubjectId(id),
            obs_time,
            name: name.into(),
            value,
        }
    }
}

/// Measurements indexed by subject and biomarker, each series sorted by time.
#[derive(Debug, Clone, Default)]
pub struct LongitudinalData {
    names: Vec<String>,
    series: BTreeMap<(SubjectId, usize), Vec<(f64, f64)>>,
    reordered: usize,
}

impl LongitudinalData {
    /// Builds the index. Series supplied out of time order are sorted (stably,
    /// so equal times keep their input order); see [`Self::reordered_series`].
    pub fn new(records: &[LongitudinalRecord]) -> Result<Self> {
        let mut data = Self::default();
        for r in records {
            if !r.obs_time.is_finite() || r.obs_time < 0.0 {
                return Err(Error::invalid(format!(
                    "subject {}: measurement time must be finite and non-negative, got {}",
                    r.id, r.obs_time
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::invalid(format!(
                    "subject {}: non-finite value for `{}` at time {}",
                    r.id, r.name, r.obs_time
                )));
            }
            let k = data.name_index_or_insert(&r.name);
            data.series
                .entry((r.id, k))
                .or_default()
                .push((r.obs_time, r.value));
        }
        for s in data.series.values_mut() {
            if s.windows(2).any(|p| p[1].0 < p[0].0) {
                s.sort_by(|a, b| a.0.total_cmp(&b.0));
                data.reordered += 1;
            }
        }
        Ok(data)
    }

    fn name_index_or_insert(&mut self, name: &str) -> usize {
        match self.names.iter().position(|n| n == name) {
            Some(k) => k,
            None => {
                self.names.push(name.to_string());
                self.names.len() - 1
            }
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of (subject, biomarker) series that had to be sorted.
    pub fn reordered_series(&self) -> usize {
        self.reordered
    }

    fn name_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Last value of `name` observed at or before `t`.
    pub fn value_at(&self, id: SubjectId, name: &str, t: f64) -> Option<f64> {
        self.name_index(name).and_then(|k| self.locf(id, k, t))
    }

    fn locf(&self, id: SubjectId, k: usize, t: f64) -> Option<f64> {
        let s = self.series.get(&(id, k))?;
        let n = s.partition_point(|&(time, _)| time <= t);
        (n > 0).then(|| s[n - 1].1)
    }

    /// All measurements in `(id, name, time)` order.
    pub fn records(&self) -> Vec<LongitudinalRecord> {
        self.series
            .iter()
            .flat_map(|(&(id, k), s)| {
                s.iter().map(move |&(obs_time, value)| LongitudinalRecord {
                    id,
                    obs_time,
                    name: self.names[k].clone(),
                    value,
                })
            })
            .collect()
    }
}

/// Which covariates enter the model: columns of the survival table (`fixed`)
/// followed by biomarkers resolved at each landmark (`time_dependent`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub fixed: Vec<String>,
    pub time_dependent: Vec<String>,
}

impl CovariateSpec {
    pub fn new(fixed: &[&str], time_dependent: &[&str]) -> Self {
        Self {
            fixed: fixed.iter().map(|s| s.to_string()).collect(),
            time_dependent: time_dependent.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Column names in row order.
    pub fn names(&self) -> Vec<String> {
        self.fixed
            .iter()
            .chain(self.time_dependent.iter())
            .cloned()
            .collect()
    }

    pub fn len(&self) -> usize {
        self.fixed.len() + self.time_dependent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRow {
    pub id: SubjectId,
    pub landmark: f64,
    pub pseudo_value: f64,
    /// `Z(s)`, ordered as [`CovariateSpec::names`].
    pub covariates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperDataset {
    /// Ordered by `(id, landmark)`.
    pub rows: Vec<LandmarkRow>,
    pub landmark_grid: Vec<f64>,
    pub w: f64,
    pub covariate_names: Vec<String>,
    /// `(id, n_i)` in ascending id order.
    pub cluster_sizes: Vec<(SubjectId, usize)>,
}

impl SuperDataset {
    pub fn n_subjects(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Assembles a dataset from rows in any order.
    pub fn from_rows(
        mut rows: Vec<LandmarkRow>,
        landmark_grid: Vec<f64>,
        w: f64,
        covariate_names: Vec<String>,
    ) -> Self {
        rows.sort_by(|a, b| a.id.cmp(&b.id).then(a.landmark.total_cmp(&b.landmark)));
        let mut cluster_sizes: Vec<(SubjectId, usize)> = Vec::new();
        for r in &rows {
            match cluster_sizes.last_mut() {
                Some((id, n)) if *id == r.id => *n += 1,
                _ => cluster_sizes.push((r.id, 1)),
            }
        }
        Self {
            rows,
            landmark_grid,
            w,
            covariate_names,
            cluster_sizes,
        }
    }
}

struct ResolvedSpec {
    fixed: Vec<usize>,
    dynamic: Vec<(String, Option<usize>)>,
}

fn resolve_spec(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    spec: &CovariateSpec,
) -> Result<ResolvedSpec> {
    let fixed = spec
        .fixed
        .iter()
        .map(|name| {
            table.covariate_index(name).ok_or_else(|| {
                Error::invalid(format!("covariate `{name}` is not a column of the survival data"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dynamic = spec
        .time_dependent
        .iter()
        .map(|name| (name.clone(), longitudinal.name_index(name)))
        .collect();
    Ok(ResolvedSpec { fixed, dynamic })
}

impl ResolvedSpec {
    fn row(&self, r: &SurvivalRecord, longitudinal: &LongitudinalData, s: f64) -> Result<Vec<f64>> {
        let mut z: Vec<f64> = self.fixed.iter().map(|&k| r.covariates[k]).collect();
        for (name, k) in &self.dynamic {
            let v = k
                .and_then(|k| longitudinal.locf(r.id, k, s))
                .ok_or_else(|| Error::MissingCovariate {
                    id: r.id,
                    name: name.clone(),
                    landmark: s,
                })?;
            z.push(v);
        }
        Ok(z)
    }
}

/// `Z(s)` for every subject of the table, at risk or not (ascending id).
pub fn covariates_at(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    spec: &CovariateSpec,
    s: f64,
) -> Result<Vec<(SubjectId, Vec<f64>)>> {
    let resolved = resolve_spec(table, longitudinal, spec)?;
    let mut out = table
        .records
        .iter()
        .map(|r| Ok((r.id, resolved.row(r, longitudinal, s)?)))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|e| e.0);
    Ok(out)
}

fn landmark_rows(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    resolved: &ResolvedSpec,
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<Vec<LandmarkRow>> {
    let at_risk: Vec<&SurvivalRecord> = table.records.iter().filter(|r| r.time > s).collect();
    let mut covariates = BTreeMap::new();
    for r in &at_risk {
        covariates.insert(r.id, resolved.row(r, longitudinal, s)?);
    }
    let pseudo = pseudo_observations(&table.records, s, w, tail)?;
    Ok(pseudo
        .entries
        .into_iter()
        .map(|(id, pseudo_value)| LandmarkRow {
            id,
            landmark: s,
            pseudo_value,
            covariates: covariates.remove(&id).expect("pseudo-values cover the risk set"),
        })
        .collect())
}

/// One row per subject at risk at `s` (ascending id).
pub fn build_landmark_dataset(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    spec: &CovariateSpec,
    s: f64,
    w: f64,
    tail: TailPolicy,
) -> Result<Vec<LandmarkRow>> {
    let resolved = resolve_spec(table, longitudinal, spec)?;
    landmark_rows(table, longitudinal, &resolved, s, w, tail)
}

/// Stacks the landmark datasets of a strictly increasing grid.
pub fn build_super_dataset(
    table: &SurvivalTable,
    longitudinal: &LongitudinalData,
    spec: &CovariateSpec,
    grid: &[f64],
    w: f64,
    tail: TailPolicy,
) -> Result<SuperDataset> {
    if grid.is_empty() {
        return Err(Error::invalid("landmark grid is empty"));
    }
    if grid.windows(2).any(|p| !(p[1] > p[0])) || grid.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("landmark grid must be finite and strictly increasing"));
    }
    let resolved = resolve_spec(table, longitudinal, spec)?;
    let per_landmark = grid
        .par_iter()
        .map(|&s| {
            landmark_rows(table, longitudinal, &resolved, s, w, tail).map_err(|e| {
                Error::Landmark {
                    landmark: s,
                    source: Box::new(e),
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = per_landmark.into_iter().flatten().collect();
    Ok(SuperDataset::from_rows(rows, grid.to_vec(), w, spec.names()))
}

/// Evenly spaced grid `from, from + step, ..., to` (inclusive, rounded to the step).
pub fn regular_grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(to >= from) || !from.is_finite() || !to.is_finite() {
        return Err(Error::invalid(format!(
            "invalid grid specification from {from} to {to} by {step}"
        )));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| from + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(times: &[(f64, bool)], x: &[f64]) -> SurvivalTable {
        let records = times
            .iter()
            .zip(x)
            .enumerate()
            .map(|(i, (&(t, e), &v))| SurvivalRecord::new(i as u64, t, e).with_covariates(vec![v]))
            .collect();
        SurvivalTable::new(vec!["x".into()], records).unwrap()
    }

    #[test]
    fn locf_resolution() {
        let long = LongitudinalData::new(&[
            LongitudinalRecord::new(1, 0.0, "v", 3.0),
            LongitudinalRecord::new(1, 2.0, "v", 5.0),
        ])
        .unwrap();
        assert_eq!(long.value_at(SubjectId(1), "v", 1.0), Some(3.0));
        assert_eq!(long.value_at(SubjectId(1), "v", 2.0), Some(5.0));
        assert_eq!(long.value_at(SubjectId(1), "v", 3.0), Some(5.0));
        assert_eq!(long.value_at(SubjectId(2), "v", 3.0), None);
        assert_eq!(long.value_at(SubjectId(1), "u", 3.0), None);
    }

    #[test]
    fn unsorted_series_are_sorted() {
        let long = LongitudinalData::new(&[
            LongitudinalRecord::new(1, 2.0, "v", 5.0),
            LongitudinalRecord::new(1, 0.0, "v", 3.0),
        ])
        .unwrap();
        assert_eq!(long.reordered_series(), 1);
        assert_eq!(long.value_at(SubjectId(1), "v", 1.0), Some(3.0));
    }

    #[test]
    fn baseline_landmark_includes_everyone() {
        let t = table(&[(1.0, true), (2.0, false), (3.0, true)], &[0.1, 0.2, 0.3]);
        let spec = CovariateSpec::new(&["x"], &[]);
        let rows =
            build_landmark_dataset(&t, &LongitudinalData::default(), &spec, 0.0, 3.0, TailPolicy::Strict)
                .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].covariates, vec![0.2]);
    }

    #[test]
    fn subject_leaves_after_its_time() {
        let t = table(&[(4.0, true), (6.0, true), (7.0, true)], &[0.0; 3]);
        let spec = CovariateSpec::new(&[], &[]);
        let rows =
            build_landmark_dataset(&t, &LongitudinalData::default(), &spec, 5.0, 1.0, TailPolicy::Strict)
                .unwrap();
        assert!(rows.iter().all(|r| r.id != SubjectId(0)));
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn cluster_sizes_follow_risk_sets() {
        let t = table(&[(1.2, true), (5.0, true), (6.0, true)], &[0.0; 3]);
        let spec = CovariateSpec::new(&["x"], &[]);
        let grid = [0.0, 0.5, 1.0, 1.5];
        let data =
            build_super_dataset(&t, &LongitudinalData::default(), &spec, &grid, 1.0, TailPolicy::Strict)
                .unwrap();
        assert_eq!(data.cluster_sizes[0], (SubjectId(0), 3));
        assert_eq!(data.cluster_sizes[1], (SubjectId(1), 4));
        assert_eq!(data.n_rows(), 11);
        let landmarks: Vec<f64> = data.rows.iter().take(3).map(|r| r.landmark).collect();
        assert_eq!(landmarks, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn missing_history_is_an_error() {
        let t = table(&[(3.0, true), (5.0, true), (6.0, true)], &[0.0; 3]);
        let long = LongitudinalData::new(&[
            LongitudinalRecord::new(0, 0.0, "v", 1.0),
            LongitudinalRecord::new(1, 0.0, "v", 1.0),
            LongitudinalRecord::new(2, 1.5, "v", 1.0),
        ])
        .unwrap();
        let spec = CovariateSpec::new(&[], &["v"]);
        let err =
            build_super_dataset(&t, &long, &spec, &[0.0, 2.0], 1.0, TailPolicy::Strict).unwrap_err();
        match err {
            Error::Landmark { landmark, source } => {
                assert_eq!(landmark, 0.0);
                assert!(matches!(*source, Error::MissingCovariate { id: SubjectId(2), .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_landmark_is_identified() {
        let t = table(&[(1.0, true), (2.0, true), (3.0, true)], &[0.0; 3]);
        let spec = CovariateSpec::new(&[], &[]);
        let err = build_super_dataset(
            &t,
            &LongitudinalData::default(),
            &spec,
            &[0.0, 2.5],
            0.5,
            TailPolicy::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Landmark { landmark, .. } if landmark == 2.5));
        assert_eq!(err.kind(), "EmptyRiskSet");
    }

    #[test]
    fn regular_grid_matches_design() {
        let g = regular_grid(0.0, 10.0, 0.5).unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[20], 10.0);
    }
}
