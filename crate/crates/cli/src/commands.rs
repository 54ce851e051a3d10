use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use lifetest_core::data_io::{generate_synthetic, ingest as ingest_raw, load_dataset, split, write_dataset, AdapterConfig, SynthConfig};
use lifetest_core::forest::Tuning;
use lifetest_core::lpalt::{
    acceleration_report, evaluate_lpalt, predict_lpalt, train_lpalt, LpAltConfig, LpAltModelBundle, LpAltPrediction,
};
use lifetest_core::pcdp::{
    evaluate_pcdp, predict_pcdp, probe_impedances, samples, train_pcdp, PcdpConfig, PcdpModelBundle, PcdpPrediction,
    ProbeVector,
};
use lifetest_core::{ForestParams, LifeTest, StageSpec, StageTime};

use crate::error::{Classify, CliError, CliResult};
use crate::output::{metrics_doc, Run, METRICS_SCHEMA};
use crate::{ApplyArgs, EvalArgs, IngestArgs, LpTrainArgs, ReportArgs, SplitSel, SynthArgs, SynthPreset, TrainArgs};

fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).data_ctx(format!("reading {}", path.display()))?;
    serde_json::from_str(&text).data_ctx(format!("parsing {}", path.display()))
}

fn select(manifest: &Path, which: SplitSel) -> CliResult<Vec<LifeTest>> {
    let ds = load_dataset(manifest).data()?;
    let devices = match which {
        SplitSel::All => ds.devices,
        _ => {
            let (train, test) = split(&ds.devices, &ds.split).data()?;
            if which == SplitSel::Train {
                train
            } else {
                test
            }
        }
    };
    if devices.is_empty() {
        return Err(anyhow::anyhow!("the {} split of {} is empty", which.name(), manifest.display())).data();
    }
    Ok(devices)
}

fn fixed_tuning() -> Tuning {
    Tuning::Fixed { params: ForestParams::default() }
}

pub fn synth(a: &SynthArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    let mut cfg = match (&a.config, a.preset) {
        (Some(p), _) => {
            run.input("config", p);
            read_json::<SynthConfig>(p)?
        }
        (None, SynthPreset::Pcdp) => SynthConfig::default(),
        (None, SynthPreset::LifePrediction) => SynthConfig::life_prediction(0),
    };
    cfg.seed = a.seed;
    run.seed(a.seed);
    run.config(&cfg);
    let ds = run.timed("generate", || generate_synthetic(&cfg).data())?;
    run.timed("write", || write_dataset(&ds, &a.out).data())?;
    run.output("manifest.json");
    run.finish()
}

pub fn ingest(a: &IngestArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    let cfg: AdapterConfig = read_json(&a.config)?;
    run.input("config", &a.config);
    run.config(&cfg);
    let base = a.base.clone().unwrap_or_else(|| a.config.parent().unwrap_or(Path::new(".")).to_path_buf());
    run.input("base", &base);
    let ds = run.timed("ingest", || ingest_raw(&cfg, &base).data())?;
    run.timed("write", || write_dataset(&ds, &a.out).data())?;
    run.output("manifest.json");
    run.finish()
}

pub fn pcdp_train(a: &TrainArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    let mut cfg: PcdpConfig = match &a.config {
        Some(p) => {
            run.input("config", p);
            read_json(p)?
        }
        None => PcdpConfig::default(),
    };
    cfg.seed = a.seed;
    if a.no_grid {
        cfg.tuning = fixed_tuning();
    }
    run.seed(a.seed);
    run.config(&cfg);
    run.input("manifest", &a.manifest);
    let devices = run.timed("load", || select(&a.manifest, a.split))?;
    let bundle = run.timed("train", || train_pcdp(&samples(&devices), &cfg).model())?;
    bundle.save(&a.out).model()?;
    run.output("manifest.json");
    run.json("summary.json", &bundle.summary())?;
    run.finish()
}

#[derive(Serialize)]
struct PcdpRecord {
    device_id: String,
    stage_id: String,
    probe: ProbeVector,
    prediction: PcdpPrediction,
}

#[derive(Serialize)]
struct Skipped {
    device_id: String,
    stage_id: String,
    reason: String,
}

pub fn pcdp_predict(a: &ApplyArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    run.input("bundle", &a.bundle);
    run.input("manifest", &a.manifest);
    let bundle = PcdpModelBundle::load(&a.bundle).model()?;
    let devices = select(&a.manifest, a.split)?;
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut indicator_rows = Vec::new();
    for s in samples(&devices) {
        let skip = |reason: String| Skipped { device_id: s.device_id.into(), stage_id: s.checkup.stage_id.clone(), reason };
        let Some(eis) = &s.checkup.eis else {
            skipped.push(skip("no EIS".into()));
            continue;
        };
        let probe = match probe_impedances(eis, &bundle.preset) {
            Ok(p) => p,
            Err(e) => {
                skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let prediction = predict_pcdp(&bundle, &probe).model()?;
        for (ind, v) in prediction.indicators.iter() {
            indicator_rows.push(IndicatorRow {
                device_id: s.device_id.into(),
                stage_id: s.checkup.stage_id.clone(),
                indicator: ind.name(),
                unit: ind.unit(),
                predicted: v,
            });
        }
        records.push(PcdpRecord { device_id: s.device_id.into(), stage_id: s.checkup.stage_id.clone(), probe, prediction });
    }
    run.json("predictions.json", &json!({ "predictions": records, "skipped": skipped }))?;
    run.csv("plots/pcdp_indicators.csv", &indicator_rows)?;
    run.finish()
}

#[derive(Serialize)]
struct IndicatorRow {
    device_id: String,
    stage_id: String,
    indicator: &'static str,
    unit: &'static str,
    predicted: f64,
}

pub fn pcdp_evaluate(a: &EvalArgs, threads: usize) -> CliResult<()> {
    let a = &a.apply;
    let mut run = Run::new(&a.out, threads)?;
    run.input("bundle", &a.bundle);
    run.input("manifest", &a.manifest);
    let bundle = PcdpModelBundle::load(&a.bundle).model()?;
    let devices = select(&a.manifest, a.split)?;
    let ev = run.timed("evaluate", || evaluate_pcdp(&bundle, &samples(&devices)).model())?;
    let doc = metrics_doc(
        "pcdp",
        json!({
            "split": a.split.name(),
            "seed": bundle.meta.config.seed,
            "preset_frequencies_hz": { "medium": bundle.preset.f_medium, "high": bundle.preset.f_high },
            "rows": ev.rows,
        }),
    );
    run.json("metrics.json", &doc)?;
    run.csv("plots/pcdp_scatter.csv", &ev.scatter)?;
    run.finish()
}

pub fn lpalt_train(a: &LpTrainArgs, threads: usize) -> CliResult<()> {
    let c = &a.common;
    if let Some(s) = a.stages.as_ref().filter(|s| s.len() != 3) {
        return Err(CliError::usage(format!("--stages takes three times T1,T2,T3, got {}", s.len())));
    }
    let mut run = Run::new(&c.out, threads)?;
    let mut cfg: LpAltConfig = match &c.config {
        Some(p) => {
            run.input("config", p);
            read_json(p)?
        }
        None => LpAltConfig::default(),
    };
    cfg.seed = c.seed;
    if c.no_grid {
        cfg.tuning = fixed_tuning();
    }
    if let Some(s) = &a.stages {
        cfg.stages = StageSpec::by_time(s[0], s[1], s[2]);
    }
    run.seed(c.seed);
    run.config(&cfg);
    run.input("manifest", &c.manifest);
    let devices = run.timed("load", || select(&c.manifest, c.split))?;
    // indicators no device carries are dropped rather than failing the run
    let bundle = run.timed("train", || train_lpalt(&devices, &cfg).model())?;
    bundle.save(&c.out).model()?;
    run.output("manifest.json");
    run.json("summary.json", &bundle.summary())?;
    run.finish()
}

#[derive(Serialize)]
struct LpRow {
    device_id: String,
    indicator: &'static str,
    unit: &'static str,
    t1: f64,
    delta: f64,
    t3_estimate: f64,
}

pub fn lpalt_predict(a: &ApplyArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    run.input("bundle", &a.bundle);
    run.input("manifest", &a.manifest);
    let bundle = LpAltModelBundle::load(&a.bundle).model()?;
    let devices = select(&a.manifest, a.split)?;
    let mut preds: Vec<LpAltPrediction> = Vec::new();
    let mut skipped = Vec::new();
    for d in &devices {
        match predict_lpalt(&bundle, d) {
            Ok(p) => preds.push(p),
            Err(e) => skipped.push(json!({ "device_id": d.device_id, "reason": e.to_string() })),
        }
    }
    if preds.is_empty() {
        return Err(anyhow::anyhow!("no device could be predicted ({} skipped)", skipped.len())).data();
    }
    let rows: Vec<LpRow> = preds
        .iter()
        .flat_map(|p| {
            p.indicators.values().map(|i| LpRow {
                device_id: p.device_id.clone(),
                indicator: i.indicator.name(),
                unit: i.indicator.unit(),
                t1: i.t1_value,
                delta: i.delta,
                t3_estimate: i.t3_estimate,
            })
        })
        .collect();
    run.json("predictions.json", &json!({ "predictions": preds, "skipped": skipped }))?;
    run.csv("plots/lpalt_predictions.csv", &rows)?;
    run.finish()
}

/// Stage times of the first device on which all three stages resolve.
fn stage_times(bundle: &LpAltModelBundle, devices: &[LifeTest]) -> Option<[StageTime; 3]> {
    devices.iter().find_map(|d| {
        let s = bundle.stages.resolve(d).ok()?;
        Some([s.t1.stage_time, s.t2.stage_time, s.t3.stage_time])
    })
}

#[derive(Serialize)]
struct LpPoint {
    device_id: String,
    indicator: &'static str,
    t1: f64,
    t3_true: f64,
    t3_predicted: f64,
    delta_true: f64,
    delta_predicted: f64,
}

pub fn lpalt_evaluate(e: &EvalArgs, threads: usize) -> CliResult<()> {
    let a = &e.apply;
    let mut run = Run::new(&a.out, threads)?;
    run.input("bundle", &a.bundle);
    run.input("manifest", &a.manifest);
    let bundle = LpAltModelBundle::load(&a.bundle).model()?;
    let devices = select(&a.manifest, a.split)?;
    let ev = run.timed("evaluate", || evaluate_lpalt(&bundle, &devices).model())?;
    let acceleration = match stage_times(&bundle, &devices) {
        Some(stages) => {
            let horizon = StageTime::new(e.horizon.unwrap_or(stages[2].value), stages[2].unit);
            Some(acceleration_report(stages, horizon, e.seconds_per_cycle, Vec::new()).model()?)
        }
        None => None,
    };
    let skipped: Vec<Value> = ev
        .skipped
        .iter()
        .map(|(d, i, r)| json!({ "device_id": d, "indicator": i, "reason": r }))
        .collect();
    let doc = metrics_doc(
        "lpalt",
        json!({
            "split": a.split.name(),
            "seed": bundle.meta.config.seed,
            "stages": bundle.stages,
            "rows": ev.rows,
            "acceleration": acceleration,
            "skipped": skipped,
        }),
    );
    run.json("metrics.json", &doc)?;
    let points: Vec<LpPoint> = ev
        .points
        .iter()
        .map(|p| LpPoint {
            device_id: p.device_id.clone(),
            indicator: p.indicator.name(),
            t1: p.t1,
            t3_true: p.t3_true,
            t3_predicted: p.t3_predicted,
            delta_true: p.delta_true,
            delta_predicted: p.delta_predicted,
        })
        .collect();
    run.csv("plots/lpalt_t3.csv", &points)?;
    run.finish()
}

#[derive(Serialize)]
struct TableRow {
    run: usize,
    pipeline: String,
    output: String,
    source: String,
    n: Option<u64>,
    mae: Option<f64>,
    rmse: Option<f64>,
    mape_percent: Option<f64>,
    r2: Option<f64>,
    unit: Option<String>,
}

fn table_row(run: usize, pipeline: &str, output: &str, source: &str, m: &Value) -> TableRow {
    TableRow {
        run,
        pipeline: pipeline.into(),
        output: output.into(),
        source: source.into(),
        n: m["n"].as_u64(),
        mae: m["mae"].as_f64(),
        rmse: m["rmse"].as_f64(),
        mape_percent: m["mape_percent"].as_f64(),
        r2: m["r2"].as_f64(),
        unit: m["unit"].as_str().map(String::from),
    }
}

pub fn report(a: &ReportArgs, threads: usize) -> CliResult<()> {
    let mut run = Run::new(&a.out, threads)?;
    let mut runs = Vec::new();
    let mut table = Vec::new();
    for (k, path) in a.inputs.iter().enumerate() {
        run.input(&format!("metrics.{k}"), path);
        let doc: Value = read_json(path)?;
        if doc["schema"] != METRICS_SCHEMA {
            return Err(anyhow::anyhow!("{} is not a {METRICS_SCHEMA} document", path.display())).data();
        }
        let pipeline = doc["pipeline"].as_str().unwrap_or_default().to_string();
        for row in doc["rows"].as_array().into_iter().flatten() {
            if let Some(output) = row["output"].as_str() {
                let source = row["source"].as_str().unwrap_or_default();
                table.push(table_row(k, &pipeline, output, source, &row["metrics"]));
            } else if let Some(ind) = row["indicator"].as_str() {
                table.push(table_row(k, &pipeline, ind, "t3", &row["t3"]));
                table.push(table_row(k, &pipeline, ind, "delta", &row["delta"]));
            }
        }
        runs.push(json!({ "input": path.display().to_string(), "metrics": doc }));
    }
    run.json("report.json", &json!({ "schema": "lifetest-report", "schema_version": 1, "runs": runs }))?;
    run.csv("metrics_table.csv", &table)?;
    run.finish()
}
