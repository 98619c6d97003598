//! CSV ingestion and export, and model files.
//!
//! Survival CSV: `id,time,status[,group][,covariate...]`.
//! Longitudinal CSV: `id,obs_time,name,value`.
//! Lines starting with `#` are ignored. Floats are written in the shortest
//! form that parses back to the same value.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gee::DynamicModelFit;
use crate::landmark::{LongitudinalRecord, SuperDataset};
use crate::surv::{SubjectId, SurvivalRecord, SurvivalTable};

pub const FORMAT_VERSION: u32 = 1;

fn csv_error(path: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_f64(field: &str, column: &str, path: &str, line: u64) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| csv_error(path, line, format!("column `{column}`: `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(csv_error(path, line, format!("column `{column}`: value must be finite")));
    }
    Ok(v)
}

fn parse_id(field: &str, path: &str, line: u64) -> Result<SubjectId> {
    field
        .parse::<u64>()
        .map(SubjectId)
        .map_err(|_| csv_error(path, line, format!("column `id`: `{field}` is not a non-negative integer")))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn map_csv(path: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    csv_error(path, line, e.to_string())
}

/// Parses a survival table from any reader; `path` labels diagnostics.
pub fn parse_survival<R: Read>(input: R, path: &str) -> Result<SurvivalTable> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| map_csv(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "id" || cols[1] != "time" || cols[2] != "status" {
        return Err(csv_error(path, 1, "header must start with `id,time,status`"));
    }
    let has_group = cols.get(3) == Some(&"group");
    let first_cov = if has_group { 4 } else { 3 };
    let names: Vec<String> = cols[first_cov..].iter().map(|s| s.to_string()).collect();
    let mut records = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| map_csv(path, e))?;
        let line = record_line(&rec);
        if rec.len() != cols.len() {
            return Err(csv_error(path, line, format!("expected {} field(s), found {}", cols.len(), rec.len())));
        }
        let id = parse_id(&rec[0], path, line)?;
        let time = parse_f64(&rec[1], "time", path, line)?;
        if time < 0.0 {
            return Err(csv_error(path, line, format!("column `time`: negative value {time}")));
        }
        let event = match &rec[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(csv_error(path, line, format!("column `status`: `{other}` is not 0 or 1")));
            }
        };
        if let Some(prev) = seen.insert(id, line) {
            return Err(csv_error(path, line, format!("duplicate id {id} (first on line {prev})")));
        }
        let group = has_group.then(|| rec[3].to_string());
        let covariates = (first_cov..cols.len())
            .map(|k| parse_f64(&rec[k], cols[k], path, line))
            .collect::<Result<Vec<_>>>()?;
        records.push(SurvivalRecord {
            id,
            time,
            event,
            group,
            covariates,
        });
    }
    SurvivalTable::new(names, records)
}

pub fn read_survival(path: impl AsRef<Path>) -> Result<SurvivalTable> {
    let p = path.as_ref();
    let file = File::open(p)?;
    parse_survival(BufReader::new(file), &p.display().to_string())
}

pub fn parse_longitudinal<R: Read>(input: R, path: &str) -> Result<Vec<LongitudinalRecord>> {
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(|e| map_csv(path, e))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols != ["id", "obs_time", "name", "value"] {
        return Err(csv_error(path, 1, "header must be `id,obs_time,name,value`"));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| map_csv(path, e))?;
        let line = record_line(&rec);
        if rec.len() != 4 {
            return Err(csv_error(path, line, format!("expected 4 fields, found {}", rec.len())));
        }
        let obs_time = parse_f64(&rec[1], "obs_time", path, line)?;
        if obs_time < 0.0 {
            return Err(csv_error(path, line, format!("column `obs_time`: negative value {obs_time}")));
        }
        out.push(LongitudinalRecord {
            id: parse_id(&rec[0], path, line)?,
            obs_time,
            name: rec[2].to_string(),
            value: parse_f64(&rec[3], "value", path, line)?,
        });
    }
    Ok(out)
}

pub fn read_longitudinal(path: impl AsRef<Path>) -> Result<Vec<LongitudinalRecord>> {
    let p = path.as_ref();
    let file = File::open(p)?;
    parse_longitudinal(BufReader::new(file), &p.display().to_string())
}

/// Writes survival records sorted by id.
pub fn write_survival<W: Write>(out: W, table: &SurvivalTable) -> Result<()> {
    let has_group = table.records.iter().any(|r| r.group.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "time".into(), "status".into()];
    if has_group {
        header.push("group".into());
    }
    header.extend(table.covariate_names.iter().cloned());
    w.write_record(&header).map_err(|e| map_csv("<output>", e))?;
    let mut records: Vec<&SurvivalRecord> = table.records.iter().collect();
    records.sort_by_key(|r| r.id);
    for r in records {
        let mut row = vec![r.id.to_string(), r.time.to_string(), u8::from(r.event).to_string()];
        if has_group {
            row.push(r.group.clone().unwrap_or_default());
        }
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| map_csv("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes measurements sorted by `(id, name, obs_time)`.
pub fn write_longitudinal<W: Write>(out: W, records: &[LongitudinalRecord]) -> Result<()> {
    let mut sorted: Vec<&LongitudinalRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then_with(|| a.name.cmp(&b.name))
            .then(a.obs_time.total_cmp(&b.obs_time))
    });
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "obs_time", "name", "value"])
        .map_err(|e| map_csv("<output>", e))?;
    for r in sorted {
        w.write_record([r.id.to_string(), r.obs_time.to_string(), r.name.clone(), r.value.to_string()])
            .map_err(|e| map_csv("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_super_dataset<W: Write>(out: W, data: &SuperDataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "landmark".into(), "pseudo_value".into()];
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header).map_err(|e| map_csv("<output>", e))?;
    for r in &data.rows {
        let mut row = vec![r.id.to_string(), r.landmark.to_string(), r.pseudo_value.to_string()];
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| map_csv("<output>", e))?;
    }
    w.flush()?;
    Ok(())
}

/// A fitted model together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub model: DynamicModelFit,
}

pub fn save_model(path: impl AsRef<Path>, model: &DynamicModelFit, config: serde_json::Value) -> Result<()> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        config,
        model: model.clone(),
    };
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, &file)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    let file: ModelFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::invalid(format!(
            "unsupported model format version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_well_formed_file() {
        let text = "id,time,status,group,age\n# comment\n1,2.5,1,a,60\n2,3,0,b,55.5\n3,1,1,a,70\n";
        let t = parse_survival(text.as_bytes(), "x.csv").unwrap();
        assert_eq!(t.records.len(), 3);
        assert_eq!(t.covariate_names, vec!["age"]);
        assert_eq!(t.records[1].group.as_deref(), Some("b"));
        assert!(!t.records[1].event);
    }

    #[test]
    fn bad_status_names_line() {
        let text = "id,time,status\n1,1,1\n2,1,0\n3,1,1\n4,1,1\n5,1,0\n6,1,2\n";
        match parse_survival(text.as_bytes(), "x.csv").unwrap_err() {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 7);
                assert!(message.contains("status"));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn duplicate_and_negative_rejected() {
        let dup = "id,time,status\n1,1,1\n1,2,0\n";
        assert!(matches!(parse_survival(dup.as_bytes(), "x").unwrap_err(), Error::Csv { line: 3, .. }));
        let neg = "id,time,status\n1,-1,1\n";
        assert!(matches!(parse_survival(neg.as_bytes(), "x").unwrap_err(), Error::Csv { line: 2, .. }));
    }

    #[test]
    fn survival_roundtrip_is_exact() {
        let text = "id,time,status,x\n2,0.1,0,3.3333333333333335\n1,2.5,1,-1e-300\n";
        let t = parse_survival(text.as_bytes(), "x").unwrap();
        let mut buf = Vec::new();
        write_survival(&mut buf, &t).unwrap();
        let back = parse_survival(buf.as_slice(), "y").unwrap();
        let mut sorted = t.records.clone();
        sorted.sort_by_key(|r| r.id);
        assert_eq!(back.records, sorted);
    }

    #[test]
    fn longitudinal_roundtrip() {
        let text = "id,obs_time,name,value\n1,2,v,5\n1,0,v,3\n";
        let recs = parse_longitudinal(text.as_bytes(), "l").unwrap();
        let mut buf = Vec::new();
        write_longitudinal(&mut buf, &recs).unwrap();
        let out = String::from_utf8(buf).unwrap();
        assert_eq!(out, "id,obs_time,name,value\n1,0,v,3\n1,2,v,5\n");
    }
}
