use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use diffmon::diffusion::{prepare_windows, DiffusionModel};
use diffmon::eval::{
    calibrate_class, class_seed, class_windows, losocv_experiment_with, ot_kinds,
    selected_splits, split_data, write_reduction_csv, CalibrationRow, ExperimentConfig,
};
use diffmon::monitor::{
    sample_monitored, train_monitored, write_windows_csv, DenoiseMonitorConfig, ProbeScorer,
    TrainingMonitor, TrainingMonitorConfig, TrainingPlan,
};
use diffmon::signal::{label_set, load_csv_dir, synth_recordings, write_csv_dir, Dataset};
use diffmon::similarity::MetricKind;
use diffmon::{derive_seed, Error};
use serde::Serialize;

use crate::config::{parse_pair, RunConfig};
use crate::GlobalArgs;

pub fn resolve_config(args: &GlobalArgs) -> Result<RunConfig> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            crate::config::parse_pairs(&text)
                .with_context(|| format!("config {}", path.display()))?
        }
        None => Vec::new(),
    };
    for o in &args.overrides {
        pairs.push(parse_pair(o).context("--set")?);
    }
    RunConfig::from_pairs(&pairs)
}

fn core(e: Error) -> anyhow::Error {
    anyhow!(e)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)
        .with_context(|| format!("writing {}", path.display()))
}

fn class_tag(pid: u32, class: usize) -> String {
    format!("P{pid}_c{class}")
}

pub fn synth_data(cfg: &RunConfig) -> Result<()> {
    cfg.synth.validate().map_err(|e| match e {
        Error::AboveNyquist { .. } => anyhow!("invalid value for `synth.classes`: {e}"),
        e => core(e),
    })?;
    let recordings = synth_recordings(&cfg.synth).map_err(core)?;
    write_csv_dir(&cfg.data_dir, &recordings)
        .map_err(core)
        .with_context(|| format!("writing corpus to {}", cfg.data_dir.display()))?;
    cfg.save_into(&cfg.data_dir)?;
    println!(
        "wrote {} participant files to {}",
        recordings.len(),
        cfg.data_dir.display()
    );
    Ok(())
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset<f64>> {
    let labels = label_set(&cfg.synth.class_names()).map_err(core)?;
    load_csv_dir(&cfg.data_dir, &labels, &cfg.synth.window)
        .map_err(core)
        .with_context(|| format!("loading corpus from {}", cfg.data_dir.display()))
}

fn calibration_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("calibration")
}

pub fn calibrate(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let exp = &cfg.experiment;
    let dir = calibration_dir(cfg);
    cfg.save_into(&dir)?;
    let mut fallbacks = 0;
    for split in selected_splits(&ds, exp).map_err(core)? {
        let pid = split.test.0;
        let sd = split_data(&ds, &split, exp).map_err(core)?;
        for class in 0..ds.labels().len() {
            let row = calibrate_class(&sd.two_sample, &sd.validation, exp, pid, class)
                .map_err(core)
                .with_context(|| format!("participant {pid}, class {class}"))?;
            let tag = class_tag(pid, class);
            write_json(&dir.join(format!("{tag}.json")), &row)?;
            let mut w = csv::Writer::from_writer(create(&dir.join(format!("{tag}_grid.csv")))?);
            w.write_record(["sigma", "mean", "std"])?;
            for p in &row.calibration.grid {
                w.write_record([p.sigma.to_string(), p.mean.to_string(), p.std.to_string()])?;
            }
            w.flush()?;
            if row.calibration.fallback {
                fallbacks += 1;
            }
            println!(
                "{tag}: sigma {:.6} mean {:.4} std {:.4}{} median-heuristic {:.6}",
                row.calibration.sigma,
                row.calibration.mean_score,
                row.calibration.std_score,
                if row.calibration.fallback { " (fallback)" } else { "" },
                row.median_sigma
            );
        }
    }
    if fallbacks > 0 {
        eprintln!("note: {fallbacks} calibration(s) used the fallback sigma");
    }
    Ok(())
}

fn load_calibration(cfg: &RunConfig, pid: u32, class: usize) -> Result<CalibrationRow> {
    let path = calibration_dir(cfg).join(format!("{}.json", class_tag(pid, class)));
    let file = File::open(&path).with_context(|| {
        format!("missing calibration {} (run `diffmon calibrate`)", path.display())
    })?;
    serde_json::from_reader(std::io::BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
}

fn models_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("models")
}

#[derive(Serialize)]
struct TrainSummary {
    metric: Option<MetricKind>,
    epochs_trained: usize,
    stopped_at: Option<usize>,
    checkpoint_epoch: Option<usize>,
    final_loss: Option<f64>,
}

fn monitor_config(exp: &ExperimentConfig, cal: Option<&CalibrationRow>) -> TrainingMonitorConfig {
    let mut m = TrainingMonitorConfig {
        max_epochs: exp.max_epochs,
        ..exp.training_monitor.clone()
    };
    if let Some(c) = cal {
        m = m.with_calibration(&c.calibration);
    }
    m
}

pub fn train(cfg: &RunConfig, no_monitor: bool) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let exp = &cfg.experiment;
    let metric = exp.training_monitor.metric;
    let root = models_dir(cfg);
    cfg.save_into(&root)?;
    for split in selected_splits(&ds, exp).map_err(core)? {
        let pid = split.test.0;
        let sd = split_data(&ds, &split, exp).map_err(core)?;
        for class in 0..ds.labels().len() {
            let tag = class_tag(pid, class);
            let ctx = || format!("participant {pid}, class {class}");
            let real = class_windows(&sd.two_sample, class);
            let seed = class_seed(exp, pid, class);
            let data = prepare_windows(&real, &exp.diffusion.stft).map_err(core).with_context(ctx)?;
            let model = DiffusionModel::new(&data, &exp.diffusion, derive_seed(seed, &[1]))
                .map_err(core)
                .with_context(ctx)?;
            let monitors = if no_monitor {
                Vec::new()
            } else {
                let cal = if metric == MetricKind::COptGak {
                    Some(load_calibration(cfg, pid, class)?)
                } else {
                    None
                };
                let scorer = ProbeScorer::new(
                    metric,
                    &real,
                    cal.as_ref().map(|c| &c.calibration),
                    exp.aggregation,
                )
                .map_err(core)?;
                vec![TrainingMonitor::new(monitor_config(exp, cal.as_ref()), scorer).map_err(core)?]
            };
            let plan = TrainingPlan {
                max_epochs: exp.max_epochs,
                continue_to_cap: false,
                seed: derive_seed(seed, &[2]),
            };
            let trained = train_monitored(model, data.tensors.view(), &exp.diffusion, monitors, plan)
                .map_err(core)
                .with_context(ctx)?;
            let dir = root.join(&tag);
            trained.final_model.save(&dir, "final").map_err(core)?;
            let mut w = csv::Writer::from_writer(create(&dir.join("losses.csv"))?);
            w.write_record(["epoch", "loss"])?;
            for (i, l) in trained.losses.iter().enumerate() {
                w.write_record([(i + 1).to_string(), l.to_string()])?;
            }
            w.flush()?;
            let mut summary = TrainSummary {
                metric: None,
                epochs_trained: trained.epochs_trained,
                stopped_at: None,
                checkpoint_epoch: None,
                final_loss: trained.losses.last().copied(),
            };
            for res in &trained.monitors {
                res.model.save(&dir, "monitored").map_err(core)?;
                res.trace
                    .write_csv(create(&dir.join(format!("trace_{}.csv", res.metric)))?)
                    .map_err(core)?;
                summary.metric = Some(res.metric);
                summary.stopped_at = Some(res.stopped_at);
                summary.checkpoint_epoch = Some(res.checkpoint_epoch);
            }
            write_json(&dir.join("summary.json"), &summary)?;
            match (summary.stopped_at, summary.checkpoint_epoch) {
                (Some(s), Some(c)) => println!("{tag}: stopped at epoch {s}, checkpoint epoch {c}"),
                _ => println!("{tag}: trained {} epochs", trained.epochs_trained),
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleMeta {
    model: String,
    batch: usize,
    total_steps: usize,
    steps_used: usize,
    snapshot_step: Option<usize>,
}

pub fn sample(cfg: &RunConfig, which: &str) -> Result<()> {
    if which != "final" && which != "monitored" {
        bail!("invalid value for `--model`: expected `final` or `monitored`");
    }
    let ds = load_dataset(cfg)?;
    let exp = &cfg.experiment;
    let metric = exp.training_monitor.metric;
    let out = cfg.out_dir.join("samples");
    cfg.save_into(&out)?;
    for split in selected_splits(&ds, exp).map_err(core)? {
        let pid = split.test.0;
        let sd = split_data(&ds, &split, exp).map_err(core)?;
        for class in 0..ds.labels().len() {
            let tag = class_tag(pid, class);
            let dir = models_dir(cfg).join(&tag);
            if !dir.join(format!("{which}.json")).exists() {
                bail!("missing checkpoint {}", dir.join(format!("{which}.json")).display());
            }
            let model = DiffusionModel::load(&dir, which)
                .map_err(core)
                .with_context(|| format!("loading {}", dir.display()))?;
            let seed = class_seed(exp, pid, class);
            let chain_seed = if which == "final" {
                derive_seed(seed, &[3])
            } else {
                derive_seed(seed, &[4, metric as u64])
            };
            let cal = if cfg.sample_monitor && metric == MetricKind::COptGak {
                Some(load_calibration(cfg, pid, class)?)
            } else {
                None
            };
            let scorer = if cfg.sample_monitor {
                let real = class_windows(&sd.two_sample, class);
                Some(
                    ProbeScorer::new(metric, &real, cal.as_ref().map(|c| &c.calibration), exp.aggregation)
                        .map_err(core)?,
                )
            } else {
                None
            };
            let dcfg = DenoiseMonitorConfig {
                metric,
                ..exp.denoise_monitor.clone()
            };
            let res = sample_monitored(
                &model,
                cfg.sample_batch,
                chain_seed,
                scorer.as_ref().map(|s| (s, &dcfg)),
                false,
            )
            .map_err(core)
            .with_context(|| format!("participant {pid}, class {class}"))?;
            let total = model.schedule.steps();
            let mut meta = SampleMeta {
                model: which.to_string(),
                batch: cfg.sample_batch,
                total_steps: total,
                steps_used: total,
                snapshot_step: None,
            };
            if let Some(w) = &res.final_windows {
                write_windows_csv(w, create(&out.join(format!("{tag}_{which}.csv")))?).map_err(core)?;
            }
            if let Some(m) = &res.monitored {
                meta.steps_used = m.steps_used;
                meta.snapshot_step = Some(m.snapshot_step);
                let (_, otd) = ot_kinds(metric);
                write_windows_csv(&m.windows, create(&out.join(format!("{tag}_{which}_{}.csv", otd.key())))?)
                    .map_err(core)?;
                m.trace
                    .write_csv(create(&out.join(format!("{tag}_{which}_denoise_trace.csv")))?)
                    .map_err(core)?;
            }
            write_json(&out.join(format!("{tag}_{which}_meta.json")), &meta)?;
            println!("{tag}: {} windows, {} of {total} steps", cfg.sample_batch, meta.steps_used);
        }
    }
    Ok(())
}

pub fn experiment(cfg: &RunConfig) -> Result<()> {
    let ds = load_dataset(cfg)?;
    let out = cfg.out_dir.join("experiment");
    let traces = out.join("traces");
    std::fs::create_dir_all(&traces).with_context(|| format!("creating {}", traces.display()))?;
    cfg.save_into(&out)?;
    let mut io_error = None;
    let report = losocv_experiment_with(&ds, &cfg.experiment, |run| {
        let tag = class_tag(run.participant, run.class);
        let result = (|| -> Result<()> {
            for t in &run.traces {
                t.write_csv(create(&traces.join(format!("{tag}_train_{}.csv", t.metric)))?)
                    .map_err(core)?;
            }
            for t in &run.denoise_traces {
                t.write_csv(create(&traces.join(format!("{tag}_denoise_{}.csv", t.metric)))?)
                    .map_err(core)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            io_error.get_or_insert(e);
        }
        eprintln!(
            "{tag}: probe score {:.3} at noise, {:.3} after sampling",
            run.quality.noise_score, run.quality.final_score
        );
    })
    .map_err(core)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    write_json(&out.join("report.json"), &report)?;
    report.write_csv(create(&out.join("report.csv"))?).map_err(core)?;
    report.write_usage_csv(create(&out.join("usage.csv"))?).map_err(core)?;
    if !report.reduction.is_empty() {
        write_reduction_csv(&report.reduction, create(&out.join("reduction.csv"))?).map_err(core)?;
    }
    for s in &report.sets {
        match s.mean {
            Some(f) => println!("{:18} macro F1 {f:.4}", s.set.name()),
            None => println!("{:18} macro F1 n/a", s.set.name()),
        }
    }
    for r in &report.reduction {
        println!(
            "{:12} mean stop epoch {:.1}, reduction {:.2}%, saved {} epochs",
            r.metric.name(),
            r.mean_epochs,
            r.reduction_pct,
            r.saved_epochs
        );
    }
    for f in &report.failures {
        eprintln!("note: failed {f}");
    }
    println!("wrote {}", out.display());
    Ok(())
}
