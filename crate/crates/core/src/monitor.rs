//! Similarity-monitored early stopping for DDPM training and denoising.
//!
//! Both protocols share the same probe: synthetic windows are scored against
//! the real training windows, each synthetic window keeping its best (or
//! mean) score over the references. The decisions are pure functions of the
//! trace so they can be tested on hand-written traces.

use std::io::Write;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::diffusion::{
    begin_sampling, denoise_step, spectro_to_windows, train_epoch, DiffusionConfig,
    DiffusionModel, SamplingRun,
};
use crate::error::{Error, Result, ResultExt};
use crate::gak::{gak_kernel, mean_std, normalize_log, GakCalibration, GakParams, Item};
use crate::nn::{DenseNet, OptimizerState};
use crate::signal::TimeWindow;
use crate::similarity::{axis_score, Domain, MetricKind, ScoreParams};
use crate::spectral::{psd_axes, WelchConfig};
use crate::{derive_seed, gak};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Stop,
    StopAndRollback,
}

impl Decision {
    pub fn is_stop(self) -> bool {
        self != Decision::Continue
    }

    pub fn name(self) -> &'static str {
        match self {
            Decision::Continue => "continue",
            Decision::Stop => "stop",
            Decision::StopAndRollback => "stop_and_rollback",
        }
    }
}

/// How a synthetic window's scores against all references are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMonitorConfig {
    pub metric: MetricKind,
    pub interval_epochs: usize,
    pub probe_batch: usize,
    pub patience_probes: usize,
    pub gak_fraction_required: f64,
    pub max_epochs: usize,
    pub gak_target_range: Option<(f64, f64)>,
    /// Require the in-range fraction (C-Opt GAK only) on top of patience.
    pub gak_requires_both: bool,
}

impl TrainingMonitorConfig {
    pub fn paper(metric: MetricKind) -> Self {
        Self {
            metric,
            interval_epochs: 50,
            probe_batch: 128,
            patience_probes: 2,
            gak_fraction_required: 0.25,
            max_epochs: 4500,
            gak_target_range: None,
            gak_requires_both: true,
        }
    }

    pub fn desk(metric: MetricKind) -> Self {
        Self {
            interval_epochs: 10,
            probe_batch: 8,
            max_epochs: 600,
            ..Self::paper(metric)
        }
    }

    pub fn with_calibration(mut self, cal: &GakCalibration<f64>) -> Self {
        self.gak_target_range = Some(cal.target_range());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_epochs == 0 {
            return Err(Error::config("monitor.interval_epochs", "must be >= 1"));
        }
        if self.probe_batch == 0 {
            return Err(Error::config("monitor.probe_batch", "must be >= 1"));
        }
        if !(self.gak_fraction_required > 0.0 && self.gak_fraction_required <= 1.0) {
            return Err(Error::config("monitor.gak_fraction_required", "must be in (0, 1]"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("monitor.max_epochs", "must be >= 1"));
        }
        if self.metric == MetricKind::COptGak && self.gak_target_range.is_none() {
            return Err(Error::config(
                "monitor.gak_target_range",
                "C-Opt GAK monitoring needs a calibrated target range",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoiseMonitorConfig {
    pub metric: MetricKind,
    pub interval_steps: usize,
    pub consecutive_drops_to_stop: usize,
}

impl DenoiseMonitorConfig {
    pub fn new(metric: MetricKind) -> Self {
        Self {
            metric,
            interval_steps: 30,
            consecutive_drops_to_stop: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.interval_steps == 0 {
            return Err(Error::config("monitor.interval_steps", "must be >= 1"));
        }
        if self.consecutive_drops_to_stop == 0 {
            return Err(Error::config("monitor.consecutive_drops", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRecord {
    /// Epoch (training) or applied denoising steps (sampling).
    pub position: usize,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub in_range_fraction: Option<f64>,
    /// Synthetic windows dropped because no score was defined for them.
    pub excluded: usize,
    pub decision: Decision,
}

impl MonitorRecord {
    pub fn from_scores(
        position: usize,
        scores: Vec<f64>,
        excluded: usize,
        range: Option<(f64, f64)>,
    ) -> Self {
        let (mean, std) = mean_std(&scores);
        let in_range_fraction = range.map(|(lo, hi)| {
            scores.iter().filter(|s| **s >= lo && **s <= hi).count() as f64 / scores.len() as f64
        });
        Self {
            position,
            scores,
            mean,
            std,
            in_range_fraction,
            excluded,
            decision: Decision::Continue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorTrace {
    pub metric: MetricKind,
    pub records: Vec<MonitorRecord>,
    pub best_index: Option<usize>,
    pub best_position: Option<usize>,
    pub best_mean: Option<f64>,
    pub stopped_at: Option<usize>,
}

impl MonitorTrace {
    pub fn new(metric: MetricKind) -> Self {
        Self {
            metric,
            records: Vec::new(),
            best_index: None,
            best_position: None,
            best_mean: None,
            stopped_at: None,
        }
    }

    /// Builds a trace from bare means; handy for walking the rules by hand.
    pub fn from_means(metric: MetricKind, positions: &[usize], means: &[f64]) -> Self {
        let mut trace = Self::new(metric);
        for (&p, &m) in positions.iter().zip(means) {
            trace.push(MonitorRecord::from_scores(p, vec![m], 0, None));
        }
        trace
    }

    fn improves(&self, mean: f64) -> bool {
        match self.best_mean {
            None => true,
            Some(b) if self.metric.higher_is_better() => mean > b,
            Some(b) => mean < b,
        }
    }

    /// Appends a record; returns whether it is the new best.
    pub fn push(&mut self, record: MonitorRecord) -> bool {
        let better = record.mean.is_finite() && self.improves(record.mean);
        if better {
            self.best_index = Some(self.records.len());
            self.best_position = Some(record.position);
            self.best_mean = Some(record.mean);
        }
        self.records.push(record);
        better
    }

    pub fn set_last_decision(&mut self, decision: Decision) {
        if let Some(r) = self.records.last_mut() {
            r.decision = decision;
            if decision.is_stop() && self.stopped_at.is_none() {
                self.stopped_at = Some(r.position);
            }
        }
    }

    pub fn best(&self) -> Option<&MonitorRecord> {
        self.best_index.map(|i| &self.records[i])
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["position", "mean", "std", "in_range_fraction", "decision"])
            .map_err(csv_err)?;
        for r in &self.records {
            w.write_record([
                r.position.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.in_range_fraction.map_or(String::new(), |f| f.to_string()),
                r.decision.name().to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Patience and (for C-Opt GAK) range rule for training probes.
pub fn training_should_stop(trace: &MonitorTrace, cfg: &TrainingMonitorConfig) -> Decision {
    let Some(last) = trace.records.last() else {
        return Decision::Continue;
    };
    let n = trace.records.len();
    let patience_met = trace
        .best_index
        .is_some_and(|b| b + cfg.patience_probes < n);
    let range_met = cfg.metric != MetricKind::COptGak
        || !cfg.gak_requires_both
        || trace
            .best()
            .and_then(|r| r.in_range_fraction)
            .is_some_and(|f| f >= cfg.gak_fraction_required);
    if patience_met && range_met {
        Decision::StopAndRollback
    } else if last.position >= cfg.max_epochs {
        Decision::Stop
    } else {
        Decision::Continue
    }
}

/// Stops once the last `k` probes each dropped below their predecessor.
pub fn denoising_should_stop(trace: &MonitorTrace, cfg: &DenoiseMonitorConfig) -> Decision {
    let k = cfg.consecutive_drops_to_stop;
    let n = trace.records.len();
    if n < k + 1 {
        return Decision::Continue;
    }
    let better = |a: f64, b: f64| {
        if trace.metric.higher_is_better() {
            a > b
        } else {
            a < b
        }
    };
    let dropping = (n - k..n).all(|i| better(trace.records[i - 1].mean, trace.records[i].mean));
    if dropping {
        Decision::StopAndRollback
    } else {
        Decision::Continue
    }
}

/// Real reference windows prepared for one metric.
#[derive(Debug, Clone)]
pub struct ProbeScorer {
    metric: MetricKind,
    params: ScoreParams<f64>,
    aggregation: Aggregation,
    welch: WelchConfig,
    reference: Vec<Item<f64>>,
    reference_self: Vec<Vec<f64>>,
    target_range: Option<(f64, f64)>,
}

impl ProbeScorer {
    pub fn new(
        metric: MetricKind,
        reference: &[TimeWindow<f64>],
        calibration: Option<&GakCalibration<f64>>,
        aggregation: Aggregation,
    ) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let params = match (metric, calibration) {
            (MetricKind::COptGak, None) => {
                return Err(Error::config("gak.sigma", "C-Opt GAK needs a calibration"))
            }
            (_, c) => ScoreParams {
                gak: c.map(|c| c.params()),
            },
        };
        let welch = WelchConfig::default();
        let mut scorer = Self {
            metric,
            params,
            aggregation,
            welch,
            reference: Vec::new(),
            reference_self: Vec::new(),
            target_range: calibration.map(|c| c.target_range()),
        };
        scorer.reference = reference
            .iter()
            .map(|w| scorer.features(w))
            .collect::<Result<_>>()?;
        if let Some(p) = &scorer.params.gak {
            scorer.reference_self = self_logs(&scorer.reference, p)?;
        }
        Ok(scorer)
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn target_range(&self) -> Option<(f64, f64)> {
        self.target_range
    }

    /// Per-axis feature vectors in the metric's domain.
    pub fn features(&self, w: &TimeWindow<f64>) -> Result<Item<f64>> {
        match self.metric.domain() {
            Domain::Time => Ok(w.axes()),
            Domain::Psd => psd_axes(w, &self.welch),
        }
    }

    fn pair(&self, x: &Item<f64>, x_self: Option<&[f64]>, r: usize) -> Result<f64> {
        let y = &self.reference[r];
        if x.len() != y.len() {
            return Err(Error::AxisMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        let mut total = 0.0;
        for a in 0..x.len() {
            total += match (self.params.gak, x_self) {
                (Some(p), Some(xs)) if self.metric == MetricKind::COptGak => {
                    let lxy = gak_kernel(&x[a], &y[a], &p)?;
                    normalize_log(lxy, xs[a], self.reference_self[r][a])
                }
                _ => axis_score(&x[a], &y[a], self.metric, &self.params)?,
            };
        }
        Ok(total / x.len() as f64)
    }

    /// Score of one synthetic window against the reference set.
    pub fn score_window(&self, w: &TimeWindow<f64>) -> Result<f64> {
        if w.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("synthetic window"));
        }
        let x = self.features(w)?;
        let x_self = match &self.params.gak {
            Some(p) if self.metric == MetricKind::COptGak => Some(
                x.iter()
                    .map(|a| gak_kernel(a, a, p))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };
        let scores = (0..self.reference.len())
            .map(|r| self.pair(&x, x_self.as_deref(), r))
            .collect::<Result<Vec<_>>>()?;
        Ok(match self.aggregation {
            Aggregation::Max if self.metric.higher_is_better() => {
                scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            }
            Aggregation::Max => scores.iter().cloned().fold(f64::INFINITY, f64::min),
            Aggregation::Mean => scores.iter().sum::<f64>() / scores.len() as f64,
        })
    }

    /// Scores a batch, dropping windows whose score is undefined.
    pub fn score_batch(&self, windows: &[TimeWindow<f64>]) -> Result<(Vec<f64>, usize)> {
        let mut scores = Vec::with_capacity(windows.len());
        let mut excluded = 0;
        for w in windows {
            match self.score_window(w) {
                Ok(s) if s.is_finite() => scores.push(s),
                Ok(_)
                | Err(Error::UndefinedCosine)
                | Err(Error::UndefinedCorrelation)
                | Err(Error::NonFinite(_)) => excluded += 1,
                Err(e) => return Err(e),
            }
        }
        if scores.is_empty() {
            return Err(Error::DegenerateBatch(excluded));
        }
        Ok((scores, excluded))
    }

    pub fn record(&self, position: usize, windows: &[TimeWindow<f64>]) -> Result<MonitorRecord> {
        let (scores, excluded) = self.score_batch(windows)?;
        if excluded > 0 {
            log::warn!("{excluded} degenerate synthetic windows excluded at position {position}");
        }
        let range = if self.metric == MetricKind::COptGak {
            self.target_range
        } else {
            None
        };
        Ok(MonitorRecord::from_scores(position, scores, excluded, range))
    }
}

fn self_logs(items: &[Item<f64>], p: &GakParams<f64>) -> Result<Vec<Vec<f64>>> {
    items
        .iter()
        .map(|it| it.iter().map(|a| gak::gak_kernel(a, a, p)).collect())
        .collect()
}

/// Seed of the probe batch drawn after `epoch`; shared by every metric.
pub fn probe_seed(seed: u64, epoch: usize) -> u64 {
    derive_seed(seed, &[0x9b0e, epoch as u64])
}

/// Fully denoises a fresh probe batch for the model state after `epoch`.
pub fn probe_samples(
    model: &DiffusionModel,
    batch: usize,
    seed: u64,
    epoch: usize,
) -> Result<Vec<TimeWindow<f64>>> {
    let mut run = begin_sampling(model, batch, probe_seed(seed, epoch))?;
    while !run.finished {
        denoise_step(&mut run, model)?;
    }
    spectro_to_windows(run.state.view(), model)
}

/// Samples a probe batch and scores it; the model is not modified.
pub fn probe_training(
    model: &DiffusionModel,
    scorer: &ProbeScorer,
    cfg: &TrainingMonitorConfig,
    epoch: usize,
    seed: u64,
) -> Result<MonitorRecord> {
    if !epoch.is_multiple_of(cfg.interval_epochs) {
        return Err(Error::config(
            "monitor.interval_epochs",
            format!("epoch {epoch} is not a probe epoch"),
        ));
    }
    let windows = probe_samples(model, cfg.probe_batch, seed, epoch)?;
    scorer.record(epoch, &windows)
}

/// Scores the partially denoised state of `run`.
pub fn probe_denoising(
    run: &SamplingRun,
    model: &DiffusionModel,
    scorer: &ProbeScorer,
    cfg: &DenoiseMonitorConfig,
) -> Result<MonitorRecord> {
    if !run.step.is_multiple_of(cfg.interval_steps) && !run.finished {
        return Err(Error::config(
            "monitor.interval_steps",
            format!("step {} is not a probe step", run.step),
        ));
    }
    let windows = spectro_to_windows(run.state.view(), model)?;
    scorer.record(run.step, &windows)
}

/// One training monitor and its state.
#[derive(Debug, Clone)]
pub struct TrainingMonitor {
    pub cfg: TrainingMonitorConfig,
    pub scorer: ProbeScorer,
    pub trace: MonitorTrace,
    best: Option<DenseNet<f64>>,
}

impl TrainingMonitor {
    pub fn new(cfg: TrainingMonitorConfig, scorer: ProbeScorer) -> Result<Self> {
        cfg.validate()?;
        if scorer.metric() != cfg.metric {
            return Err(Error::config(
                "monitor.metric",
                format!("scorer is {} but config is {}", scorer.metric(), cfg.metric),
            ));
        }
        Ok(Self {
            trace: MonitorTrace::new(cfg.metric),
            cfg,
            scorer,
            best: None,
        })
    }

    fn active(&self) -> bool {
        self.trace.stopped_at.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TrainingMonitorResult {
    pub metric: MetricKind,
    pub trace: MonitorTrace,
    /// Epoch at which the monitor decided to stop.
    pub stopped_at: usize,
    /// Epoch of the returned checkpoint.
    pub checkpoint_epoch: usize,
    pub model: DiffusionModel,
}

#[derive(Debug, Clone)]
pub struct MonitoredTraining {
    pub monitors: Vec<TrainingMonitorResult>,
    /// Model after the last trained epoch.
    pub final_model: DiffusionModel,
    pub epochs_trained: usize,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingPlan {
    pub max_epochs: usize,
    /// Keep training after every monitor stopped (one run then serves the
    /// unmonitored baseline and all monitors).
    pub continue_to_cap: bool,
    pub seed: u64,
}

/// Trains `model` for up to `plan.max_epochs`, probing every monitor at its
/// interval. Monitors sharing a probe batch size score the same samples.
pub fn train_monitored(
    mut model: DiffusionModel,
    data: ArrayView2<'_, f64>,
    cfg: &DiffusionConfig,
    mut monitors: Vec<TrainingMonitor>,
    plan: TrainingPlan,
) -> Result<MonitoredTraining> {
    let mut opt = OptimizerState::adam(&model.denoiser, cfg.learning_rate);
    let mut losses = Vec::with_capacity(plan.max_epochs);
    let mut epoch = 0;
    while epoch < plan.max_epochs {
        epoch += 1;
        let loss = train_epoch(&mut model, data, &mut opt, cfg, plan.seed, epoch)
            .context(|| format!("epoch {epoch}"))?;
        losses.push(loss);
        let mut samples: Vec<(usize, Vec<TimeWindow<f64>>)> = Vec::new();
        for m in monitors.iter_mut().filter(|m| m.active()) {
            let at_cap = epoch >= m.cfg.max_epochs;
            if epoch % m.cfg.interval_epochs != 0 && !at_cap {
                continue;
            }
            let batch = m.cfg.probe_batch;
            if !samples.iter().any(|(b, _)| *b == batch) {
                samples.push((batch, probe_samples(&model, batch, plan.seed, epoch)?));
            }
            let windows = &samples.iter().find(|(b, _)| *b == batch).expect("just added").1;
            let record = m
                .scorer
                .record(epoch, windows)
                .context(|| format!("{} probe at epoch {epoch}", m.cfg.metric))?;
            if m.trace.push(record) {
                m.best = Some(model.denoiser.clone());
            }
            let decision = training_should_stop(&m.trace, &m.cfg);
            m.trace.set_last_decision(decision);
            if decision.is_stop() {
                log::info!("{} monitor stopped at epoch {epoch}", m.cfg.metric);
            }
        }
        if !plan.continue_to_cap && !monitors.is_empty() && monitors.iter().all(|m| !m.active()) {
            break;
        }
    }
    let results = monitors
        .into_iter()
        .map(|m| {
            let decision = m
                .trace
                .records
                .last()
                .map_or(Decision::Continue, |r| r.decision);
            let (net, checkpoint_epoch) = match (decision, m.best) {
                (Decision::StopAndRollback, Some(best)) => {
                    (best, m.trace.best_position.expect("best exists"))
                }
                _ => (model.denoiser.clone(), epoch),
            };
            let mut snapshot = model.clone();
            snapshot.denoiser = net;
            TrainingMonitorResult {
                metric: m.cfg.metric,
                stopped_at: m.trace.stopped_at.unwrap_or(epoch),
                checkpoint_epoch,
                trace: m.trace,
                model: snapshot,
            }
        })
        .collect();
    Ok(MonitoredTraining {
        monitors: results,
        final_model: model,
        epochs_trained: epoch,
        losses,
    })
}

#[derive(Debug, Clone)]
pub struct MonitoredSampling {
    pub trace: MonitorTrace,
    /// Steps applied when the monitor stopped (or the full chain).
    pub steps_used: usize,
    /// Step of the returned snapshot.
    pub snapshot_step: usize,
    pub windows: Vec<TimeWindow<f64>>,
}

#[derive(Debug, Clone)]
pub struct SamplingOutcome {
    /// Windows after the full reverse chain, if it was run to the end.
    pub final_windows: Option<Vec<TimeWindow<f64>>>,
    pub final_state: Option<Array2<f64>>,
    pub monitored: Option<MonitoredSampling>,
}

/// Runs the reverse chain with an optional denoising monitor. With
/// `run_to_end` the chain continues past a stop so one run yields both the
/// full and the monitor-stopped batch.
pub fn sample_monitored(
    model: &DiffusionModel,
    batch: usize,
    seed: u64,
    monitor: Option<(&ProbeScorer, &DenoiseMonitorConfig)>,
    run_to_end: bool,
) -> Result<SamplingOutcome> {
    if let Some((scorer, cfg)) = monitor {
        cfg.validate()?;
        if scorer.metric() != cfg.metric {
            return Err(Error::config("monitor.metric", "scorer and config disagree"));
        }
    }
    let mut run = begin_sampling(model, batch, seed)?;
    let mut trace = monitor.map(|(_, cfg)| MonitorTrace::new(cfg.metric));
    let mut snapshot: Option<(usize, Array2<f64>)> = None;
    loop {
        if let (Some((scorer, cfg)), Some(tr)) = (monitor, trace.as_mut()) {
            let due = run.step % cfg.interval_steps == 0 || run.finished;
            if tr.stopped_at.is_none() && due {
                let record = probe_denoising(&run, model, scorer, cfg)
                    .context(|| format!("denoise probe at step {}", run.step))?;
                if tr.push(record) {
                    snapshot = Some((run.step, run.state.clone()));
                }
                let decision = denoising_should_stop(tr, cfg);
                tr.set_last_decision(decision);
                if decision.is_stop() && !run_to_end {
                    break;
                }
            }
        }
        if run.finished {
            break;
        }
        denoise_step(&mut run, model)?;
    }
    let monitored = match (trace, monitor) {
        (Some(tr), Some(_)) => {
            let stopped = tr.stopped_at.is_some();
            let (snapshot_step, state) = match (stopped, snapshot) {
                (true, Some(s)) => s,
                _ => (run.step, run.state.clone()),
            };
            Some(MonitoredSampling {
                steps_used: tr.stopped_at.unwrap_or(run.total_steps),
                snapshot_step,
                windows: spectro_to_windows(state.view(), model)?,
                trace: tr,
            })
        }
        _ => None,
    };
    let (final_windows, final_state) = if run.finished {
        (
            Some(spectro_to_windows(run.state.view(), model)?),
            Some(run.state),
        )
    } else {
        (None, None)
    };
    Ok(SamplingOutcome {
        final_windows,
        final_state,
        monitored,
    })
}

/// Writes a batch as CSV: one row per window and channel.
pub fn write_windows_csv<W: Write>(windows: &[TimeWindow<f64>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let len = windows.first().map_or(0, |w| w.timesteps());
    let mut header = vec!["window".to_string(), "channel".to_string()];
    header.extend((0..len).map(|t| format!("t{t}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, win) in windows.iter().enumerate() {
        for c in 0..win.channels() {
            let mut row = vec![i.to_string(), c.to_string()];
            row.extend(win.channel(c).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads windows written by [`write_windows_csv`].
pub fn read_windows_csv<R: std::io::Read>(input: R, sample_rate_hz: f64) -> Result<Vec<TimeWindow<f64>>> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let idx = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
        let values = rec.iter().skip(2).map(parse).collect::<Result<Vec<_>>>()?;
        rows.push((idx(&rec[0])?, idx(&rec[1])?, values));
    }
    let count = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut chans: Vec<&(usize, usize, Vec<f64>)> = rows.iter().filter(|r| r.0 == i).collect();
        chans.sort_by_key(|r| r.1);
        let len = chans.first().map_or(0, |c| c.2.len());
        let mut data = Array2::zeros((chans.len(), len));
        for (c, r) in chans.iter().enumerate() {
            if r.2.len() != len || r.1 != c {
                return Err(Error::Parse(format!("window {i}: ragged or missing channel")));
            }
            data.row_mut(c).assign(&ndarray::ArrayView1::from(&r.2));
        }
        out.push(TimeWindow::new(data, sample_rate_hz)?);
    }
    Ok(out)
}
