//! Stage implementations. Each stage reads the artifacts of the previous
//! one from the output directory and reports how many row-level issues it
//! recorded.

use std::io::Write;
use std::path::Path;

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use serde::Serialize;
use serde_json::json;
use triage_core::analysis::{correlation_matrix, pca, standardize_columns};
use triage_core::dataset::{read_flat, Dataset, FeatureSchema, Split, N_CLASSES};
use triage_core::gbdt::{argmax_severe, fit_classifier, GbdtModel, Validation};
use triage_core::impute::impute_admissions;
use triage_core::metrics::{confusion, report};
use triage_core::pipeline::io::{read_masked_frames, read_scored_frames, write_masked_frames, write_scored_frames};
use triage_core::pipeline::record::{format_charttime, read_records, read_records_lenient, write_records, INPUT_HEADER};
use triage_core::pipeline::{build_admissions, finalize, preprocess, series_to_records, RawRecord, ScoredFrame};
use triage_core::scoring::{
    age_band, alarm_runs_at, classify_population, tag_vector_with, AlarmRun, ScoringMatrix, VitalKind,
};
use triage_core::synth;

use crate::artifacts::{open_path, Workspace};
use crate::config::RunConfig;
use crate::error::{CliError, StageExt};

pub const RAW: &str = "raw.csv";
pub const CLEANED: &str = "cleaned.csv";
pub const IMPUTED: &str = "imputed.csv";
pub const FRAME: &str = "frame.csv";
pub const MODEL: &str = "model.json";
pub const REPORT: &str = "report.json";

/// Everything a stage needs.
pub struct Context {
    pub config: RunConfig,
    pub ws: Workspace,
    pub matrix: ScoringMatrix,
}

/// Number of row-level problems a stage recorded; nonzero makes the
/// process exit with 3 once all requested stages have run.
pub type Issues = usize;

pub fn load_matrix(config: &RunConfig) -> Result<ScoringMatrix, CliError> {
    match &config.matrix {
        None => Ok(ScoringMatrix::embedded().clone()),
        Some(files) => {
            let read = |p: &Path| {
                std::fs::read_to_string(p).map_err(|e| CliError::input("matrix", format!("{}: {e}", p.display())))
            };
            ScoringMatrix::from_csv(&read(&files.tags)?, &read(&files.labels)?).stage("matrix")
        }
    }
}

fn io_err(stage: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::input(stage, e.to_string())
}

fn line_errors_to_cli(stage: &str, errors: &[triage_core::pipeline::record::LineError]) -> CliError {
    const SHOWN: usize = 20;
    let mut msg = format!("{} malformed line(s)", errors.len());
    for e in errors.iter().take(SHOWN) {
        msg.push_str(&format!("\n  line {}: {}", e.line, e.message));
    }
    if errors.len() > SHOWN {
        msg.push_str(&format!("\n  ... {} more", errors.len() - SHOWN));
    }
    CliError::input(stage, msg)
}

fn read_raw(stage: &str, path: &Path) -> Result<Vec<RawRecord>, CliError> {
    let (records, errors) = read_records_lenient(open_path(stage, path)?).stage(stage)?;
    if !errors.is_empty() {
        return Err(line_errors_to_cli(stage, &errors));
    }
    Ok(records)
}

pub fn synth(ctx: &Context) -> Result<Issues, CliError> {
    let records = synth::generate(&ctx.config.synth, ctx.config.seed).stage("synth")?;
    let w = ctx.ws.create("synth", RAW)?;
    write_records(w, &records).stage("synth")?;
    Ok(0)
}

#[derive(Serialize)]
struct RowFailure {
    line: u64,
    hadm_id: String,
    message: String,
}

#[derive(Serialize)]
struct AdmissionAlarm {
    hadm_id: String,
    vital: &'static str,
    start: String,
    duration_minutes: u32,
    score: u8,
}

fn alarm_rows(hadm_id: &str, minutes: &[i64], tags: &[[u8; 6]]) -> Vec<AdmissionAlarm> {
    let mut out = Vec::new();
    for kind in VitalKind::ALL {
        let series: Vec<u8> = tags.iter().map(|t| t[kind.index()]).collect();
        out.extend(alarm_runs_at(minutes, &series, kind).into_iter().map(|r: AlarmRun| AdmissionAlarm {
            hadm_id: hadm_id.to_string(),
            vital: r.vital.as_str(),
            start: format_charttime(r.start_minute),
            duration_minutes: r.duration_minutes,
            score: r.score,
        }));
    }
    out
}

fn score_record(matrix: &ScoringMatrix, r: &RawRecord) -> triage_core::Result<([u8; 6], u8)> {
    let age = r.age.ok_or_else(|| triage_core::Error::MissingInput("age is missing".into()))?;
    let group = classify_population(age, r.copd.unwrap_or(false))?;
    let tags = tag_vector_with(matrix, &r.vitals, age_band(age)?)?;
    let spo2 = r.vitals.get(VitalKind::SpO2).expect("checked by tag_vector_with");
    Ok((tags, matrix.severity_label(spo2, group)?))
}

/// Scores raw rows as they are: TAG columns and severity label appended,
/// alarm runs per admission. Rows that cannot be scored are left out and
/// listed in `alarms.json`.
pub fn score(ctx: &Context, input: &Path) -> Result<Issues, CliError> {
    let records = read_raw("score", input)?;
    let mut wtr = csv::Writer::from_writer(ctx.ws.create("score", "scored.csv")?);
    let mut header: Vec<&str> = INPUT_HEADER.to_vec();
    header.extend(VitalKind::ALL.iter().map(|k| k.tag_column()));
    header.push("label");
    wtr.write_record(&header).map_err(|e| CliError::input("score", e.to_string()))?;

    let mut failures = Vec::new();
    let mut alarms = Vec::new();
    let mut scored = 0usize;
    let mut start = 0;
    while start < records.len() {
        let hadm = &records[start].hadm_id;
        let end = start + records[start..].iter().take_while(|r| &r.hadm_id == hadm).count();
        let mut minutes = Vec::new();
        let mut tags = Vec::new();
        for (i, r) in records.iter().enumerate().take(end).skip(start) {
            match score_record(&ctx.matrix, r) {
                Ok((t, label)) => {
                    let mut rec = r.to_fields();
                    rec.extend(t.iter().map(|v| v.to_string()));
                    rec.push(label.to_string());
                    wtr.write_record(&rec).map_err(|e| CliError::input("score", e.to_string()))?;
                    minutes.push(r.charttime);
                    tags.push(t);
                    scored += 1;
                }
                Err(e) => failures.push(RowFailure {
                    line: i as u64 + 2,
                    hadm_id: r.hadm_id.clone(),
                    message: e.to_string(),
                }),
            }
        }
        alarms.extend(alarm_rows(hadm, &minutes, &tags));
        start = end;
    }
    wtr.flush().map_err(io_err("score"))?;
    for f in &failures {
        eprintln!("warning [score]: line {}: {}", f.line, f.message);
    }
    ctx.ws.write_json(
        "score",
        "alarms.json",
        &json!({ "rows_scored": scored, "rows_failed": failures, "alarms": alarms }),
    )?;
    Ok(failures.len())
}

pub fn run_preprocess(ctx: &Context, input: &Path) -> Result<Issues, CliError> {
    let records = read_raw("preprocess", input)?;
    let (kept, report) = preprocess(&records, &ctx.config.preprocess).stage("preprocess")?;
    if kept.is_empty() {
        return Err(CliError::numerical("preprocess", "no admission passed the inclusion filters"));
    }
    write_records(ctx.ws.create("preprocess", CLEANED)?, &series_to_records(&kept)).stage("preprocess")?;
    ctx.ws.write_json("preprocess", "preprocess_report.json", &report)?;
    Ok(report.issues.len())
}

pub fn run_impute(ctx: &Context) -> Result<Issues, CliError> {
    let records = read_records(ctx.ws.open("impute", CLEANED)?).stage("impute")?;
    let set = build_admissions(&records).stage("impute")?;
    let (frames, audit, issues) =
        impute_admissions(&set, &ctx.config.impute, &ctx.config.preprocess.ranges).stage("impute")?;
    write_masked_frames(ctx.ws.create("impute", IMPUTED)?, &frames).stage("impute")?;
    ctx.ws.write_json("impute", "impute_audit.json", &json!({ "audit": audit, "issues": issues }))?;
    Ok(issues.len())
}

fn write_split_csv(
    ctx: &Context,
    name: &str,
    f: impl Fn(&mut dyn Write) -> triage_core::Result<()>,
) -> Result<(), CliError> {
    let mut w = ctx.ws.create("dataset", name)?;
    f(&mut w).stage("dataset")?;
    w.flush().map_err(io_err("dataset"))
}

pub fn run_dataset(ctx: &Context) -> Result<Issues, CliError> {
    let frames = read_masked_frames(ctx.ws.open("dataset", IMPUTED)?).stage("dataset")?;
    let (scored, report) = finalize(&frames, &ctx.matrix, &ctx.config.preprocess.ranges);
    if scored.is_empty() {
        return Err(CliError::numerical("dataset", "no admission could be interpolated and scored"));
    }
    write_scored_frames(ctx.ws.create("dataset", FRAME)?, &scored).stage("dataset")?;
    ctx.ws.write_json("dataset", "frame_report.json", &report)?;
    let alarms: Vec<AdmissionAlarm> = scored
        .iter()
        .flat_map(|s| alarm_rows(&s.frame.hadm_id, &s.frame.minutes, &s.tags))
        .collect();
    ctx.ws.write_json("dataset", "alarms.json", &json!({ "alarms": alarms }))?;

    let ds = Dataset::build(&scored, ctx.config.dataset, ctx.config.seed).stage("dataset")?;
    ctx.ws.write_json("dataset", "split_manifest.json", &ds.split)?;
    ctx.ws.write_json("dataset", "standardization.json", &ds.standardizer)?;
    ctx.ws.write_json("dataset", "class_weights.json", &json!({ "weights": ds.class_weights }))?;
    let mut summary = serde_json::Map::new();
    for split in Split::ALL {
        let s = split.as_str();
        write_split_csv(ctx, &format!("gbm_{s}.csv"), |w| ds.write_flat(split, w))?;
        write_split_csv(ctx, &format!("sequences_{s}.csv"), |w| ds.write_sequences(split, w))?;
        write_split_csv(ctx, &format!("windows_{s}.csv"), |w| ds.write_windows(split, w))?;
        summary.insert(s.to_string(), serde_json::to_value(ds.summary(split)).expect("summary"));
    }
    ctx.ws.write_json("dataset", "dataset_summary.json", &summary)?;
    Ok(report.issues.len())
}

fn class_weights(ctx: &Context) -> Result<[f64; N_CLASSES], CliError> {
    let v: serde_json::Value = ctx.ws.read_json("train", "class_weights.json")?;
    serde_json::from_value(v["weights"].clone())
        .map_err(|e| CliError::input("train", format!("class_weights.json: {e}")))
}

pub fn run_train(ctx: &Context) -> Result<Issues, CliError> {
    let schema = FeatureSchema::default();
    let (x, y) = read_flat(ctx.ws.open("train", "gbm_train.csv")?, &schema).stage("train")?;
    let (vx, vy) = read_flat(ctx.ws.open("train", "gbm_valid.csv")?, &schema).stage("train")?;
    let settings = &ctx.config.train;
    let weights = if settings.class_weighting { Some(class_weights(ctx)?) } else { None };
    let sample = |labels: &[u8]| weights.map(|w| labels.iter().map(|&c| w[c as usize]).collect::<Vec<f64>>());
    let (tw, vw) = (sample(&y), sample(&vy));
    let valid = (!vy.is_empty()).then(|| Validation { x: vx.view(), y: &vy, weights: vw.as_deref() });
    let model = fit_classifier(x.view(), &y, tw.as_deref(), &settings.gbdt, valid).stage("train")?;
    let mut model = model.with_feature_names(schema.names()).stage("train")?;
    model.metadata.insert("config_hash".into(), ctx.ws.config_hash.clone());
    model.metadata.insert("seed".into(), ctx.ws.seed.to_string());
    model.save(ctx.ws.create("train", MODEL)?).stage("train")?;
    model.write_training_log(ctx.ws.create("train", "training_log.csv")?).stage("train")?;
    Ok(0)
}

pub fn run_evaluate(ctx: &Context) -> Result<Issues, CliError> {
    let model = GbdtModel::load(ctx.ws.open("evaluate", MODEL)?).stage("evaluate")?;
    let schema = FeatureSchema::default();
    let (x, y) = read_flat(ctx.ws.open("evaluate", "gbm_test.csv")?, &schema).stage("evaluate")?;
    if y.is_empty() {
        return Err(CliError::numerical("evaluate", "test split has no rows"));
    }
    let probs = model.predict_proba_batch(x.view()).stage("evaluate")?;
    let pred: Vec<u8> = probs.iter().map(|p| argmax_severe(p)).collect();
    let c = confusion(&y, &pred, N_CLASSES).stage("evaluate")?;
    let rep = report(&c, Some(&probs), &y).stage("evaluate")?;
    ctx.ws.write_json("evaluate", REPORT, &rep.rounded())?;
    let mut w = ctx.ws.create("evaluate", "report.csv")?;
    rep.write_csv("gbdt", &mut w).stage("evaluate")?;
    w.flush().map_err(io_err("evaluate"))?;
    let importance = model.feature_importance();
    let top = importance.top_k(ctx.config.analysis.importance_top_k);
    ctx.ws.write_json("evaluate", "feature_importance.json", &json!({ "importance": top }))?;
    Ok(0)
}

fn select_columns(x: ArrayView2<f64>, all: &[String], wanted: &[String]) -> Result<Array2<f64>, CliError> {
    let idx: Vec<usize> = wanted
        .iter()
        .map(|w| {
            all.iter()
                .position(|n| n == w)
                .ok_or_else(|| CliError::input("analyze", format!("unknown feature `{w}`")))
        })
        .collect::<Result<_, _>>()?;
    Ok(x.select(Axis(1), &idx))
}

pub fn run_analyze(ctx: &Context) -> Result<Issues, CliError> {
    let scored: Vec<ScoredFrame> = read_scored_frames(ctx.ws.open("analyze", FRAME)?).stage("analyze")?;
    let schema = FeatureSchema::default();
    let blocks: Vec<Array2<f64>> = scored.iter().map(|s| schema.assemble(s)).collect::<Result<_, _>>().stage("analyze")?;
    let views: Vec<ArrayView2<f64>> = blocks.iter().map(|b| b.view()).collect();
    let x = concatenate(Axis(0), &views).map_err(|e| CliError::input("analyze", e.to_string()))?;
    let names = &ctx.config.analysis.features;
    let sel = select_columns(x.view(), &schema.names(), names)?;

    let corr = correlation_matrix(sel.view(), names).stage("analyze")?;
    ctx.ws.write_json("analyze", "correlation.json", &corr)?;
    let mut w = ctx.ws.create("analyze", "correlation.csv")?;
    corr.write_csv(&mut w).stage("analyze")?;
    w.flush().map_err(io_err("analyze"))?;

    let p = pca(standardize_columns(sel.view()).view(), names).stage("analyze")?;
    ctx.ws.write_json("analyze", "pca.json", &p)?;
    let mut w = ctx.ws.create("analyze", "pca.csv")?;
    p.write_csv(&mut w).stage("analyze")?;
    w.flush().map_err(io_err("analyze"))?;
    Ok(0)
}
