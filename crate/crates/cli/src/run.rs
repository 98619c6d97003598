//! Subcommand implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use dynrmst::io::{
    load_model, read_longitudinal, read_survival, save_model, write_longitudinal, write_super_dataset,
    write_survival,
};
use dynrmst::landmark::{build_super_dataset, covariates_at};
use dynrmst::predict::{evaluate, Evaluation, Predictor};
use dynrmst::sim::joint::{simulate_joint, tune_censoring, JointModelSpec};
use dynrmst::sim::mc::{
    coefficient_csv, population_coefficients, prediction_csv, replicate_seed, run_coefficient_mc,
    run_prediction_mc, run_scenario_mc, scenario_csv_row, with_threads, CoefficientMcConfig,
    JointDesign, PredictionMcConfig, ScenarioMcConfig, EVAL_CSV_HEADER, SCENARIO_CSV_HEADER,
};
use dynrmst::sim::scenario::{simulate_scenario, ScenarioSpec};
use dynrmst::surv::{crmst_pseudo, crmstd_test, km_fit, pseudo_observations};
use dynrmst::{CovariateSpec, LongitudinalData, SurvivalRecord, SurvivalTable};

use crate::config::{
    load_file, parse_covariance, parse_format, parse_grid, parse_link, parse_tail, required, resolve, CliError,
    CliResult, CrmstArgs, EvaluateArgs, FitArgs, Format, KmArgs, McArgs, PredictArgs, SimulateArgs,
    TestArgs,
};
use crate::{Cli, Command};

const DEFAULT_SEED: u64 = 20_240_501;
/// Pilot sample used to tune joint-model censoring.
const PILOT_N: usize = 100_000;

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let file = cli.config.as_deref();
    let command = cli.command;
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match load_file(file)?.get("threads") {
            None => None,
            Some(v) => Some(
                v.as_u64()
                    .ok_or_else(|| CliError::Config(format!("`threads` must be a positive integer, got {v}")))?
                    as usize,
            ),
        },
    };
    let run = move || -> CliResult<()> {
        match command {
            Command::Km(a) => km(resolve(&a, file)?),
            Command::Crmst(a) => crmst(resolve(&a, file)?),
            Command::Test(a) => test(resolve(&a, file)?),
            Command::Fit(a) => fit(resolve(&a, file)?),
            Command::Predict(a) => predict(resolve(&a, file)?),
            Command::Evaluate(a) => evaluate_cmd(resolve(&a, file)?),
            Command::Simulate(a) => simulate(resolve(&a, file)?),
            Command::Mc(a) => mc(resolve(&a, file)?),
        }
    };
    with_threads(threads, run)?
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// One JSON object per line: the resolved configuration, then the records.
fn emit_records<T: Serialize>(out: Option<&Path>, config: &T, records: &[Value]) -> CliResult<()> {
    let mut text = serde_json::to_string(&json!({ "config": config }))? + "\n";
    for r in records {
        text += &serde_json::to_string(r)?;
        text.push('\n');
    }
    emit(out, &text)
}

/// First line of every CSV artifact.
fn config_comment<T: Serialize>(config: &T) -> CliResult<String> {
    Ok(format!("# config: {}\n", serde_json::to_string(config)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn load_longitudinal(path: Option<&PathBuf>) -> CliResult<LongitudinalData> {
    let records = match path {
        Some(p) => read_longitudinal(p)?,
        None => Vec::new(),
    };
    let data = LongitudinalData::new(&records)?;
    if data.reordered_series() > 0 {
        log::warn!(
            "{} series in {} were not sorted by observation time and have been reordered",
            data.reordered_series(),
            path.map_or_else(String::new, |p| p.display().to_string())
        );
    }
    Ok(data)
}

/// Records split by group label, or a single unlabeled group.
fn groups(table: &SurvivalTable) -> Vec<(Option<String>, Vec<SurvivalRecord>)> {
    let mut map: std::collections::BTreeMap<Option<String>, Vec<SurvivalRecord>> = Default::default();
    for r in &table.records {
        map.entry(r.group.clone()).or_default().push(r.clone());
    }
    map.into_iter().collect()
}

fn km(mut a: KmArgs) -> CliResult<()> {
    let table = read_survival(required(&a.surv, "surv")?)?;
    let start = *a.start.get_or_insert(0.0);
    let format = parse_format(&a.format)?;
    let mut curves = Vec::new();
    let mut csv = config_comment(&a)? + "group,time,survival,at_risk,events\n";
    for (group, records) in groups(&table) {
        let curve = km_fit(&records, start)?;
        for k in 0..curve.event_times.len() {
            let _ = writeln!(
                csv,
                "{},{},{},{},{}",
                group.as_deref().unwrap_or(""),
                curve.event_times[k],
                curve.survival[k],
                curve.at_risk[k],
                curve.events[k]
            );
        }
        curves.push(json!({ "group": group, "start": start, "curve": curve }));
    }
    match format {
        Format::Json => emit_records(a.out.as_deref(), &a, &curves),
        Format::Csv => emit(a.out.as_deref(), &csv),
    }
}

fn crmst(a: CrmstArgs) -> CliResult<()> {
    let table = read_survival(required(&a.surv, "surv")?)?;
    let times = required(&a.s, "s")?;
    let w = required(&a.w, "w")?;
    let tail = parse_tail(&a.tail)?;
    let format = parse_format(&a.format)?;
    let mut estimates = Vec::new();
    let mut csv = config_comment(&a)? + "group,s,w,estimate,se,n_at_risk\n";
    let mut pseudo_csv = config_comment(&a)? + "id,group,s,pseudo_value\n";
    for (group, records) in groups(&table) {
        let label = group.as_deref().unwrap_or("");
        for &s in &times {
            let est = crmst_pseudo(&records, s, w, tail)?;
            let se = est.variance.map(f64::sqrt);
            let _ = writeln!(csv, "{label},{s},{w},{},{},{}", est.value, fmt_opt(se), est.n_at_risk);
            if a.pseudo_out.is_some() {
                for (id, v) in pseudo_observations(&records, s, w, tail)?.entries {
                    let _ = writeln!(pseudo_csv, "{id},{label},{s},{v}");
                }
            }
            estimates.push(json!({
                "group": group,
                "s": s,
                "w": w,
                "estimate": est.value,
                "se": se,
                "n_at_risk": est.n_at_risk,
            }));
        }
    }
    if let Some(p) = &a.pseudo_out {
        emit(Some(p), &pseudo_csv)?;
    }
    match format {
        Format::Json => emit_records(a.out.as_deref(), &a, &estimates),
        Format::Csv => emit(a.out.as_deref(), &csv),
    }
}

fn test(mut a: TestArgs) -> CliResult<()> {
    let table = read_survival(required(&a.surv, "surv")?)?;
    let times = required(&a.s, "s")?;
    let w = required(&a.w, "w")?;
    let alpha = *a.alpha.get_or_insert(0.05);
    let tail = parse_tail(&a.tail)?;
    let format = parse_format(&a.format)?;
    let [(label0, g0), (label1, g1)] = table.split_two_groups()?;
    let mut results = Vec::new();
    let mut csv = config_comment(&a)? + "s,w,delta,se,z,p_value,ci_lower,ci_upper\n";
    for &s in &times {
        let t = crmstd_test(&g0, &g1, s, w, alpha, tail)?;
        let _ = writeln!(
            csv,
            "{s},{w},{},{},{},{},{},{}",
            t.delta, t.se, t.z, t.p_value, t.ci_lower, t.ci_upper
        );
        results.push(json!({
            "groups": [&label0, &label1],
            "s": s,
            "w": w,
            "delta": t.delta,
            "se": t.se,
            "z": t.z,
            "p_value": t.p_value,
            "ci": [t.ci_lower, t.ci_upper],
            "alpha": t.alpha,
            "crmst": [t.group0.value, t.group1.value],
            "n_at_risk": [t.group0.n_at_risk, t.group1.n_at_risk],
        }));
    }
    match format {
        Format::Json => emit_records(a.out.as_deref(), &a, &results),
        Format::Csv => emit(a.out.as_deref(), &csv),
    }
}

fn fit(a: FitArgs) -> CliResult<()> {
    let out = required(&a.out, "out")?;
    let table = read_survival(required(&a.surv, "surv")?)?;
    let long = load_longitudinal(a.long.as_ref())?;
    let grid = a.model.grid()?;
    let w = required(&a.model.w, "w")?;
    let layout = a.model.layout(&grid)?;
    let link = parse_link(&a.model.link)?;
    let mode = parse_covariance(&a.covariance)?;
    let tail = parse_tail(&a.model.tail)?;
    let data = build_super_dataset(&table, &long, &a.model.covariates(), &grid, w, tail)?;
    if let Some(p) = &a.super_out {
        write_super_dataset(std::fs::File::create(p)?, &data)?;
    }
    let model = dynrmst::gee::fit_super_model(&data, &layout, link, mode)?;
    save_model(&out, &model, serde_json::to_value(&a)?)?;

    if let Some(p) = &a.effects_out {
        let evaluator = model.layout.evaluator()?;
        let cov = model.covariance_matrix();
        let mut csv = config_comment(&a)? + "covariate,s,estimate,se\n";
        for &s in &grid {
            let values = evaluator.basis_values(s);
            for (p_idx, h) in values.iter().enumerate() {
                let off = model.layout.offset(p_idx);
                let est: f64 = h.iter().enumerate().map(|(j, v)| v * model.beta[off + j]).sum();
                let mut var = 0.0;
                for (j, hj) in h.iter().enumerate() {
                    for (k, hk) in h.iter().enumerate() {
                        var += hj * cov[(off + j, off + k)] * hk;
                    }
                }
                let name = &model.layout.covariates[p_idx].name;
                let _ = writeln!(csv, "\"{name}\",{s},{est},{}", var.max(0.0).sqrt());
            }
        }
        emit(Some(p), &csv)?;
    }

    let se = model.standard_errors();
    let coefficients: Vec<Value> = model
        .labels()
        .iter()
        .zip(model.beta.iter().zip(&se))
        .map(|(l, (b, s))| json!({ "label": l, "estimate": b, "se": s }))
        .collect();
    emit(
        None,
        &(serde_json::to_string(&json!({
            "model": out,
            "n_subjects": model.n_subjects,
            "n_rows": model.n_rows,
            "df": model.df,
            "convergence": model.convergence,
            "coefficients": coefficients,
        }))? + "\n"),
    )
}

fn predict(mut a: PredictArgs) -> CliResult<()> {
    let file = load_model(required(&a.model, "model")?)?;
    let spec = CovariateSpec {
        fixed: string_list(&file.config, "fixed"),
        time_dependent: string_list(&file.config, "time_dependent"),
    };
    if spec.names() != file.model.covariate_names() {
        return Err(CliError::Config(
            "model file does not record its covariates in the order of its layout".into(),
        ));
    }
    let table = read_survival(required(&a.surv, "surv")?)?;
    let long = load_longitudinal(a.long.as_ref())?;
    let alpha = *a.alpha.get_or_insert(0.05);
    let times = a.s.get_or_insert_with(|| file.model.grid.clone()).clone();
    let predictor = Predictor::new(&file.model)?;
    let observed: std::collections::HashMap<_, _> = table.records.iter().map(|r| (r.id, r.time)).collect();
    let mut predictions = Vec::new();
    for &s in &times {
        for (id, z) in covariates_at(&table, &long, &spec, s)? {
            let at_risk = observed[&id] > s;
            if a.at_risk_only && !at_risk {
                continue;
            }
            let p = predictor.predict(&z, s, alpha)?;
            predictions.push(json!({
                "id": id,
                "s": s,
                "at_risk": at_risk,
                "value": p.value,
                "se": p.se,
                "ci_lower": p.ci_lower,
                "ci_upper": p.ci_upper,
                "df": p.df,
                "alpha": p.alpha,
            }));
        }
    }
    emit_records(a.out.as_deref(), &a, &predictions)
}

fn string_list(config: &Value, key: &str) -> Vec<String> {
    config
        .get(key)
        .and_then(Value::as_array)
        .map(|v| v.iter().filter_map(|s| s.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

fn evaluate_cmd(a: EvaluateArgs) -> CliResult<()> {
    let train = read_survival(required(&a.surv, "surv")?)?;
    let train_long = load_longitudinal(a.long.as_ref())?;
    let valid = read_survival(required(&a.valid_surv, "valid_surv")?)?;
    let valid_long = load_longitudinal(a.valid_long.as_ref())?;
    let grid = a.model.grid()?;
    let layout = a.model.layout(&grid)?;
    let spec = a.model.covariates();
    let input = Evaluation {
        train: (&train, &train_long),
        validation: (&valid, &valid_long),
        spec: &spec,
        layout: &layout,
        grid: &grid,
        w: required(&a.model.w, "w")?,
        link: parse_link(&a.model.link)?,
        tail: parse_tail(&a.model.tail)?,
    };
    let (dynamic, fixed) = evaluate(&input, None)?;
    let mut csv = config_comment(&a)? + EVAL_CSV_HEADER + "\n";
    for j in 0..dynamic.landmarks.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            dynamic.landmarks[j],
            fmt_opt(dynamic.c_index[j]),
            fmt_opt(fixed.c_index[j]),
            fmt_opt(dynamic.prediction_error[j]),
            fmt_opt(fixed.prediction_error[j]),
        );
    }
    emit(a.out.as_deref(), &csv)
}

fn joint_spec(name: &str) -> CliResult<JointModelSpec> {
    match name {
        "linear" => Ok(JointModelSpec::linear_design()),
        "quadratic" => Ok(JointModelSpec::quadratic_design()),
        other => Err(CliError::Config(format!("unknown trajectory `{other}` (linear|quadratic)"))),
    }
}

/// Sets the random-censoring bound so the cohort reaches `target`.
fn with_censoring(mut spec: JointModelSpec, target: f64, seed: u64) -> CliResult<JointModelSpec> {
    spec.censor_a = tune_censoring(&spec, target, PILOT_N, replicate_seed(seed, u64::MAX - 1))?;
    Ok(spec)
}

fn simulate(mut a: SimulateArgs) -> CliResult<()> {
    let seed = *a.seed.get_or_insert(DEFAULT_SEED);
    let censoring = *a.censoring.get_or_insert(0.0);
    let n = required(&a.n, "n")?;
    let design = a.design.get_or_insert_with(|| "scenario".into()).clone();
    let surv_out = required(&a.surv_out, "surv_out")?;
    let header = config_comment(&a)?;
    if design == "scenario" {
        let k = required(&a.scenario, "scenario")?;
        let spec = ScenarioSpec::standard(k, n)?.with_censoring_rate(censoring)?;
        let [control, treatment] = simulate_scenario(&spec, seed)?;
        let table = SurvivalTable::new(Vec::new(), control.into_iter().chain(treatment).collect())?;
        let mut buf = header.into_bytes();
        write_survival(&mut buf, &table)?;
        return emit(Some(&surv_out), std::str::from_utf8(&buf).expect("csv output is utf-8"));
    }
    let spec = with_censoring(joint_spec(&design)?, censoring, seed)?;
    let sample = simulate_joint(&spec, n, seed)?;
    log::info!("censoring fraction {:.3}", sample.censoring_fraction());
    let mut buf = header.clone().into_bytes();
    write_survival(&mut buf, &sample.table())?;
    std::fs::write(&surv_out, buf)?;
    if let Some(p) = &a.long_out {
        let mut buf = header.clone().into_bytes();
        write_longitudinal(&mut buf, &sample.longitudinal())?;
        std::fs::write(p, buf)?;
    }
    if let Some(p) = &a.truth_out {
        let grid = parse_grid(&required(&a.grid, "grid")?)?;
        let w = required(&a.w, "w")?;
        let mut csv = header + "id,s,true_crmst\n";
        for &s in &grid {
            for subj in sample.subjects.iter().filter(|x| x.observed > s) {
                let _ = writeln!(csv, "{},{s},{}", subj.id, subj.hazard.crmst(s, w));
            }
        }
        emit(Some(p), &csv)?;
    }
    Ok(())
}

fn mc(mut a: McArgs) -> CliResult<()> {
    let seed = *a.seed.get_or_insert(DEFAULT_SEED);
    let reps = *a.reps.get_or_insert(1000);
    let alpha = *a.alpha.get_or_insert(0.05);
    let experiment = a.experiment.get_or_insert_with(|| "scenario".into()).clone();
    let out = a.out.clone();
    let body = match experiment.as_str() {
        "scenario" => {
            let truth_draws = *a.truth_draws.get_or_insert(1_000_000);
            let tail = parse_tail(&a.tail)?;
            let censoring = a.censoring.get_or_insert_with(|| vec![0.0]).clone();
            let mut csv = String::from(SCENARIO_CSV_HEADER) + "\n";
            for &scenario in &required(&a.scenario, "scenario")? {
                for &n_per_arm in &required(&a.n, "n")? {
                    for &c in &censoring {
                        for &s in &required(&a.s, "s")? {
                            for &w in &required(&a.w, "w")? {
                                let cfg = ScenarioMcConfig {
                                    scenario,
                                    n_per_arm,
                                    censoring: c,
                                    s,
                                    w,
                                    alpha,
                                    reps,
                                    seed,
                                    truth_draws,
                                    tail,
                                };
                                csv += &scenario_csv_row(&run_scenario_mc(&cfg)?);
                                csv.push('\n');
                            }
                        }
                    }
                }
            }
            csv
        }
        "coefficients" | "prediction" => {
            let trajectory = a.trajectory.get_or_insert_with(|| "linear".into()).clone();
            let censoring = *a.censoring.get_or_insert_with(|| vec![0.0]).first().unwrap_or(&0.0);
            let n = *required(&a.n, "n")?
                .first()
                .ok_or_else(|| CliError::Config("`n` is empty".into()))?;
            let base = joint_spec(&trajectory)?;
            let design = JointDesign::standard(with_censoring(base.clone(), censoring, seed)?)?;
            if experiment == "coefficients" {
                let truth_n = *a.truth_n.get_or_insert(100_000);
                let truth_design = JointDesign::standard(base)?;
                let truth = population_coefficients(&truth_design, truth_n, replicate_seed(seed, u64::MAX))?;
                let cfg = CoefficientMcConfig {
                    design,
                    n,
                    reps,
                    seed,
                    alpha,
                };
                coefficient_csv(&run_coefficient_mc(&cfg, &truth.beta)?)
            } else {
                let n_valid = *a.n_valid.get_or_insert(n);
                let cfg = PredictionMcConfig {
                    design,
                    n_train: n,
                    n_valid,
                    reps,
                    seed,
                };
                prediction_csv(&run_prediction_mc(&cfg)?)
            }
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown experiment `{other}` (scenario|coefficients|prediction)"
            )))
        }
    };
    emit(out.as_deref(), &(config_comment(&a)? + &body))
}
