//! Downstream evaluation: training-set assembly, a proxy classifier, macro
//! F1, the leave-one-subject-out experiment and epoch-reduction arithmetic.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::diffusion::{begin_sampling, prepare_windows, spectro_to_windows, DiffusionConfig, DiffusionModel};
use crate::error::{Error, Result, ResultExt};
use crate::gak::{
    calibrate_sigma, median_heuristic_sigma, CalibrationGrid, CalibrationOptions, GakCalibration,
    Item,
};
use crate::monitor::{
    sample_monitored, train_monitored, Aggregation, DenoiseMonitorConfig, ProbeScorer,
    TrainingMonitor, TrainingMonitorConfig, TrainingPlan,
};
use crate::nn::{Activation, DenseNet, OptimizerState};
use crate::signal::{
    loso_splits, subsample_disjoint, LosoSplit, Dataset, LabeledWindow, ParticipantId, TimeWindow,
};
use crate::similarity::{Domain, MetricKind};
use crate::spectral::{psd_axes, WelchConfig};
use crate::{derive_seed, seeded_rng};

/// Participant id carried by generated windows.
pub const SYNTHETIC_PARTICIPANT: ParticipantId = ParticipantId(u32::MAX);

pub const PAPER_SYNTHETIC_PER_MODEL: usize = 15_360;
pub const DESK_SYNTHETIC_PER_MODEL: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetKind {
    TwoSample,
    FullSet,
    FullDdpm,
    OtCOptGak,
    OtdCOptGak,
    OtCosinePsd,
    OtdCosinePsd,
    OtCosineTime,
    OtdCosineTime,
}

impl SetKind {
    pub const ALL: [SetKind; 9] = [
        SetKind::TwoSample,
        SetKind::FullSet,
        SetKind::FullDdpm,
        SetKind::OtCOptGak,
        SetKind::OtdCOptGak,
        SetKind::OtCosinePsd,
        SetKind::OtdCosinePsd,
        SetKind::OtCosineTime,
        SetKind::OtdCosineTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SetKind::TwoSample => "2 Sample",
            SetKind::FullSet => "Full-Set",
            SetKind::FullDdpm => "Full DDPM",
            SetKind::OtCOptGak => "OT C-Opt GAK",
            SetKind::OtdCOptGak => "OT-D C-Opt GAK",
            SetKind::OtCosinePsd => "OT Cosine PSD",
            SetKind::OtdCosinePsd => "OT-D Cosine PSD",
            SetKind::OtCosineTime => "OT Cosine Time",
            SetKind::OtdCosineTime => "OT-D Cosine Time",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SetKind::TwoSample => "two_sample",
            SetKind::FullSet => "full_set",
            SetKind::FullDdpm => "full_ddpm",
            SetKind::OtCOptGak => "ot_copt_gak",
            SetKind::OtdCOptGak => "otd_copt_gak",
            SetKind::OtCosinePsd => "ot_cosine_psd",
            SetKind::OtdCosinePsd => "otd_cosine_psd",
            SetKind::OtCosineTime => "ot_cosine_time",
            SetKind::OtdCosineTime => "otd_cosine_time",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == s || k.name() == s)
    }

    pub fn metric(self) -> Option<MetricKind> {
        match self {
            SetKind::OtCOptGak | SetKind::OtdCOptGak => Some(MetricKind::COptGak),
            SetKind::OtCosinePsd | SetKind::OtdCosinePsd => Some(MetricKind::CosinePsd),
            SetKind::OtCosineTime | SetKind::OtdCosineTime => Some(MetricKind::CosineTime),
            _ => None,
        }
    }

    pub fn monitor_denoising(self) -> bool {
        matches!(
            self,
            SetKind::OtdCOptGak | SetKind::OtdCosinePsd | SetKind::OtdCosineTime
        )
    }

    pub fn is_synthetic(self) -> bool {
        !matches!(self, SetKind::TwoSample | SetKind::FullSet)
    }
}

impl std::fmt::Display for SetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// One row of the training-set table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSetSpec {
    pub kind: SetKind,
    /// Real windows per participant and class; `None` keeps every window.
    pub real_per_participant: Option<usize>,
    pub synthetic_per_model: usize,
    pub monitor_training: bool,
    pub monitor_denoising: bool,
    pub metric: Option<MetricKind>,
    pub domain: Option<Domain>,
}

impl TrainingSetSpec {
    pub fn new(kind: SetKind, real_per_participant: usize, synthetic_per_model: usize) -> Self {
        let metric = kind.metric();
        Self {
            kind,
            real_per_participant: (kind != SetKind::FullSet).then_some(real_per_participant),
            synthetic_per_model: if kind.is_synthetic() {
                synthetic_per_model
            } else {
                0
            },
            monitor_training: metric.is_some(),
            monitor_denoising: kind.monitor_denoising(),
            metric,
            domain: metric.map(MetricKind::domain),
        }
    }

    /// All nine sets with the given sizes.
    pub fn table(real_per_participant: usize, synthetic_per_model: usize) -> Vec<Self> {
        SetKind::ALL
            .into_iter()
            .map(|k| Self::new(k, real_per_participant, synthetic_per_model))
            .collect()
    }

    /// Real windows per class given the number of training participants.
    pub fn real_per_class(&self, participants: usize) -> Option<usize> {
        self.real_per_participant.map(|k| k * participants)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Rows are true classes, columns predictions.
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            counts: Array2::zeros((classes, classes)),
        }
    }

    pub fn from_predictions(classes: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                left: truth.len(),
                right: predicted.len(),
            });
        }
        let mut cm = Self::new(classes);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::config("classes", format!("label {} out of range", t.max(p))));
            }
            cm.counts[[t, p]] += 1;
        }
        Ok(cm)
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.counts.diag().sum() as f64 / self.total().max(1) as f64
    }
}

/// Unweighted mean of per-class F1; a class with `P + R = 0` contributes 0.
pub fn macro_f1(cm: &ConfusionMatrix) -> f64 {
    let k = cm.counts.nrows();
    if k == 0 || cm.total() == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..k {
        let tp = cm.counts[[c, c]] as f64;
        let predicted = cm.counts.column(c).sum() as f64;
        let actual = cm.counts.row(c).sum() as f64;
        let p = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let r = if actual > 0.0 { tp / actual } else { 0.0 };
        total += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    total / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub welch: WelchConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 500,
            patience: 25,
            welch: WelchConfig::default(),
        }
    }
}

/// Concatenated per-channel Welch PSD.
pub fn psd_features(w: &TimeWindow<f64>, welch: &WelchConfig) -> Result<Vec<f64>> {
    Ok(psd_axes(w, welch)?.concat())
}

/// Multinomial logistic regression on standardised PSD features.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyClassifier {
    pub net: DenseNet<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub classes: usize,
    pub welch: WelchConfig,
    pub epochs_trained: usize,
}

fn feature_matrix(windows: &[LabeledWindow<f64>], welch: &WelchConfig) -> Result<Array2<f64>> {
    let rows = windows
        .iter()
        .map(|w| psd_features(&w.window, welch))
        .collect::<Result<Vec<_>>>()?;
    let dim = rows.first().map_or(0, Vec::len);
    Array2::from_shape_vec((rows.len(), dim), rows.concat()).map_err(|e| Error::Parse(e.to_string()))
}

fn softmax_rows(logits: &mut Array2<f64>) {
    for mut row in logits.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
}

/// Mean cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let mut p = logits.clone();
    softmax_rows(&mut p);
    let n = labels.len() as f64;
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        loss -= p[[i, y]].max(1e-300).ln();
        p[[i, y]] -= 1.0;
    }
    (loss / n, p / n)
}

pub fn train_proxy_classifier(
    train: &Dataset<f64>,
    val: &Dataset<f64>,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<ProxyClassifier> {
    let classes = train.labels().len();
    let present: std::collections::BTreeSet<usize> =
        train.windows().iter().map(|w| w.label.index).collect();
    if present.len() < 2 {
        return Err(Error::SingleClass);
    }
    let mut x = feature_matrix(train.windows(), &cfg.welch)?;
    let mean = x.mean_axis(Axis(0)).expect("non-empty").to_vec();
    let std: Vec<f64> = x
        .std_axis(Axis(0), 0.0)
        .iter()
        .map(|s| if *s > 1e-12 { *s } else { 1.0 })
        .collect();
    standardize(&mut x, &mean, &std);
    let y: Vec<usize> = train.windows().iter().map(|w| w.label.index).collect();
    let (xv, yv) = if val.is_empty() {
        (x.clone(), y.clone())
    } else {
        let mut xv = feature_matrix(val.windows(), &cfg.welch)?;
        standardize(&mut xv, &mean, &std);
        (xv, val.windows().iter().map(|w| w.label.index).collect())
    };
    let mut net = DenseNet::new(
        &[x.ncols(), classes],
        Activation::Identity,
        Activation::Identity,
        derive_seed(seed, &[0xc1a5]),
    )?;
    let mut opt = OptimizerState::adam(&net, cfg.learning_rate);
    let mut best = (f64::INFINITY, net.clone(), 0);
    let mut since_best = 0;
    let mut epochs = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        let (logits, cache) = net.forward(x.view())?;
        let (_, grad) = cross_entropy(&logits, &y);
        let grads = net.param_gradients(&cache, grad.view())?;
        opt.step(&mut net, &grads)?;
        let (val_loss, _) = cross_entropy(&net.predict(xv.view())?, &yv);
        if val_loss < best.0 - 1e-9 {
            best = (val_loss, net.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    log::debug!("classifier stopped after {epochs} epochs (best {})", best.2);
    Ok(ProxyClassifier {
        net: best.1,
        mean,
        std,
        classes,
        welch: cfg.welch,
        epochs_trained: epochs,
    })
}

fn standardize(x: &mut Array2<f64>, mean: &[f64], std: &[f64]) {
    for mut row in x.rows_mut() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (*v - mean[j]) / std[j];
        }
    }
}

impl ProxyClassifier {
    pub fn predict(&self, windows: &[LabeledWindow<f64>]) -> Result<Vec<usize>> {
        if windows.is_empty() {
            return Ok(Vec::new());
        }
        let mut x = feature_matrix(windows, &self.welch)?;
        standardize(&mut x, &self.mean, &self.std);
        let logits = self.net.predict(x.view())?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                    .0
            })
            .collect())
    }

    pub fn evaluate(&self, ds: &Dataset<f64>) -> Result<ConfusionMatrix> {
        let truth: Vec<usize> = ds.windows().iter().map(|w| w.label.index).collect();
        let pred = self.predict(ds.windows())?;
        ConfusionMatrix::from_predictions(self.classes, &truth, &pred)
    }
}

/// Generated windows per class, keyed by the set they feed.
#[derive(Debug, Clone, Default)]
pub struct DdpmArtifacts {
    pub synthetic: BTreeMap<(SetKind, usize), Vec<TimeWindow<f64>>>,
}

impl DdpmArtifacts {
    pub fn insert(&mut self, kind: SetKind, class: usize, windows: Vec<TimeWindow<f64>>) {
        self.synthetic.insert((kind, class), windows);
    }
}

/// Real windows plus, for synthetic specs, each class model's output.
pub fn build_training_set(
    spec: &TrainingSetSpec,
    two_sample: &Dataset<f64>,
    full: &Dataset<f64>,
    artifacts: &DdpmArtifacts,
) -> Result<Dataset<f64>> {
    if spec.kind == SetKind::FullSet {
        return Ok(full.clone().with_meta(spec.kind.key()));
    }
    let mut ds = two_sample.clone().with_meta(spec.kind.key());
    if !spec.kind.is_synthetic() {
        return Ok(ds);
    }
    for class in 0..two_sample.labels().len() {
        let windows = artifacts
            .synthetic
            .get(&(spec.kind, class))
            .ok_or_else(|| Error::MissingArtifact(format!("{} class {class}", spec.kind)))?;
        if windows.len() < spec.synthetic_per_model {
            return Err(Error::MissingArtifact(format!(
                "{} class {class}: {} of {} synthetic windows",
                spec.kind,
                windows.len(),
                spec.synthetic_per_model
            )));
        }
        ds.extend(windows.iter().take(spec.synthetic_per_model).map(|w| LabeledWindow {
            window: w.clone(),
            label: two_sample.labels()[class].clone(),
            participant: SYNTHETIC_PARTICIPANT,
        }))?;
    }
    Ok(ds)
}

/// Per class, disjoint training and validation draws of `k` windows per
/// participant.
pub fn two_sample_sets(
    ds: &Dataset<f64>,
    k: usize,
    seed: u64,
) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let mut train = ds.empty_like("two_sample");
    let mut val = ds.empty_like("validation");
    for class in 0..ds.labels().len() {
        let of_class = ds.of_class(class);
        if of_class.is_empty() {
            return Err(Error::config("classes", format!("class {class} has no windows")));
        }
        let mut parts = subsample_disjoint(&of_class, &[k, k], derive_seed(seed, &[class as u64]))?;
        let v = parts.pop().expect("two parts");
        let t = parts.pop().expect("two parts");
        train.extend(t.windows().iter().cloned())?;
        val.extend(v.windows().iter().cloned())?;
    }
    Ok((train, val))
}

/// Data for one held-out participant.
#[derive(Debug, Clone)]
pub struct SplitData {
    /// Every window of the training participants.
    pub full: Dataset<f64>,
    pub two_sample: Dataset<f64>,
    pub validation: Dataset<f64>,
    pub test: Dataset<f64>,
}

pub fn split_data(ds: &Dataset<f64>, split: &LosoSplit, cfg: &ExperimentConfig) -> Result<SplitData> {
    let pid = split.test.0;
    let full = ds.of_participants(&split.train).with_meta("full_set");
    let test = ds.of_participants(&[split.test]).with_meta("test");
    let (two_sample, validation) = two_sample_sets(
        &full,
        cfg.real_per_participant,
        derive_seed(cfg.seed, &[0x5e7, u64::from(pid)]),
    )
    .context(|| format!("participant {pid}: subsampling"))?;
    Ok(SplitData {
        full,
        two_sample,
        validation,
        test,
    })
}

/// Splits whose held-out participant is selected by `cfg.participants`.
pub fn selected_splits(ds: &Dataset<f64>, cfg: &ExperimentConfig) -> Result<Vec<LosoSplit>> {
    let splits: Vec<_> = loso_splits(ds)?
        .into_iter()
        .filter(|s| cfg.participants.is_empty() || cfg.participants.contains(&s.test.0))
        .collect();
    if splits.is_empty() {
        return Err(Error::config("eval.participants", "no matching participants"));
    }
    Ok(splits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub diffusion: DiffusionConfig,
    pub training_monitor: TrainingMonitorConfig,
    pub denoise_monitor: DenoiseMonitorConfig,
    pub max_epochs: usize,
    pub real_per_participant: usize,
    pub synthetic_per_model: usize,
    pub calibration_grid: CalibrationGrid,
    pub calibration: CalibrationOptions,
    pub median_multiplier: f64,
    pub aggregation: Aggregation,
    pub classifier: ClassifierConfig,
    pub classifier_seeds: Vec<u64>,
    pub sets: Vec<SetKind>,
    /// Held-out participants to run; empty runs every split.
    pub participants: Vec<u32>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn desk() -> Self {
        Self {
            diffusion: DiffusionConfig::desk(),
            training_monitor: TrainingMonitorConfig::desk(MetricKind::CosinePsd),
            denoise_monitor: DenoiseMonitorConfig::new(MetricKind::CosinePsd),
            max_epochs: 600,
            real_per_participant: 2,
            synthetic_per_model: DESK_SYNTHETIC_PER_MODEL,
            calibration_grid: CalibrationGrid::default(),
            calibration: CalibrationOptions::default(),
            median_multiplier: 1.0,
            aggregation: Aggregation::Max,
            classifier: ClassifierConfig::default(),
            classifier_seeds: vec![1, 2, 3, 4, 5],
            sets: SetKind::ALL.to_vec(),
            participants: Vec::new(),
            seed: 2024,
        }
    }

    pub fn paper() -> Self {
        Self {
            diffusion: DiffusionConfig::paper(),
            training_monitor: TrainingMonitorConfig::paper(MetricKind::CosinePsd),
            max_epochs: 4500,
            synthetic_per_model: PAPER_SYNTHETIC_PER_MODEL,
            ..Self::desk()
        }
    }

    pub fn specs(&self) -> Vec<TrainingSetSpec> {
        self.sets
            .iter()
            .map(|&k| TrainingSetSpec::new(k, self.real_per_participant, self.synthetic_per_model))
            .collect()
    }

    /// Monitored metrics needed by the requested sets, in table order.
    pub fn monitored_metrics(&self) -> Vec<MetricKind> {
        let mut out = Vec::new();
        for k in &self.sets {
            if let Some(m) = k.metric() {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        out
    }

    pub fn needs_ddpm(&self) -> bool {
        self.sets.iter().any(|k| k.is_synthetic())
    }

    pub fn validate(&self) -> Result<()> {
        if self.classifier_seeds.is_empty() {
            return Err(Error::config("eval.classifier_seeds", "need at least one seed"));
        }
        if self.sets.is_empty() {
            return Err(Error::config("eval.sets", "no training sets selected"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("train.max_epochs", "must be >= 1"));
        }
        let mut m = self.training_monitor.clone();
        m.gak_target_range = Some((0.0, 1.0));
        m.validate()?;
        self.denoise_monitor.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub participant: u32,
    pub class: usize,
    pub calibration: GakCalibration<f64>,
    pub median_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageRow {
    pub participant: u32,
    pub class: usize,
    pub metric: MetricKind,
    pub epochs_used: usize,
    pub checkpoint_epoch: usize,
    pub probes: usize,
    pub denoise_steps_used: Option<usize>,
    pub denoise_snapshot_step: Option<usize>,
}

/// Cosine-PSD probe score of the unmonitored model at the first and last
/// denoising step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRow {
    pub participant: u32,
    pub class: usize,
    pub noise_score: f64,
    pub final_score: f64,
}

/// Everything produced for one (held-out participant, class) model.
#[derive(Debug, Clone)]
pub struct ClassRun {
    pub participant: u32,
    pub class: usize,
    pub calibration: Option<CalibrationRow>,
    pub usage: Vec<UsageRow>,
    pub quality: QualityRow,
    pub artifacts: DdpmArtifacts,
    pub traces: Vec<crate::monitor::MonitorTrace>,
    pub denoise_traces: Vec<crate::monitor::MonitorTrace>,
    pub losses: Vec<f64>,
}

fn psd_items(ds: &Dataset<f64>, welch: &WelchConfig) -> Result<Vec<Item<f64>>> {
    ds.windows().iter().map(|w| psd_axes(&w.window, welch)).collect()
}

/// Calibrates sigma for one class on PSD items of the training and
/// validation draws, alongside the median heuristic.
pub fn calibrate_class(
    train: &Dataset<f64>,
    val: &Dataset<f64>,
    cfg: &ExperimentConfig,
    participant: u32,
    class: usize,
) -> Result<CalibrationRow> {
    let welch = WelchConfig::default();
    let t = psd_items(&train.of_class(class), &welch)?;
    let v = psd_items(&val.of_class(class), &welch)?;
    let calibration = calibrate_sigma(&t, &v, &cfg.calibration_grid, &cfg.calibration)?;
    let median_sigma = median_heuristic_sigma(&t, &v, cfg.median_multiplier)?;
    Ok(CalibrationRow {
        participant,
        class,
        calibration,
        median_sigma,
    })
}

/// Trains the class model once to the cap with every requested monitor
/// attached, then samples the unmonitored and monitored checkpoints.
pub fn run_class(
    two_sample: &Dataset<f64>,
    calibration: Option<CalibrationRow>,
    cfg: &ExperimentConfig,
    participant: u32,
    class: usize,
) -> Result<ClassRun> {
    let real = class_windows(two_sample, class);
    let seed = class_seed(cfg, participant, class);
    let data = prepare_windows(&real, &cfg.diffusion.stft)?;
    let model = DiffusionModel::new(&data, &cfg.diffusion, derive_seed(seed, &[1]))?;
    let cal = calibration.as_ref().map(|c| &c.calibration);
    let mut monitors = Vec::new();
    let mut scorers = BTreeMap::new();
    for metric in cfg.monitored_metrics() {
        let scorer = ProbeScorer::new(metric, &real, cal, cfg.aggregation)?;
        let mut mcfg = TrainingMonitorConfig {
            metric,
            max_epochs: cfg.max_epochs,
            ..cfg.training_monitor.clone()
        };
        if let Some(c) = cal {
            mcfg = mcfg.with_calibration(c);
        }
        monitors.push(TrainingMonitor::new(mcfg, scorer.clone())?);
        scorers.insert(metric, scorer);
    }
    let plan = TrainingPlan {
        max_epochs: cfg.max_epochs,
        continue_to_cap: true,
        seed: derive_seed(seed, &[2]),
    };
    let trained = train_monitored(model, data.tensors.view(), &cfg.diffusion, monitors, plan)?;

    let n = cfg.synthetic_per_model;
    let mut artifacts = DdpmArtifacts::default();
    let psd_scorer = match scorers.get(&MetricKind::CosinePsd) {
        Some(s) => s.clone(),
        None => ProbeScorer::new(MetricKind::CosinePsd, &real, None, cfg.aggregation)?,
    };
    let dcfg = |metric| DenoiseMonitorConfig {
        metric,
        ..cfg.denoise_monitor.clone()
    };
    let wants_otd = |metric| cfg.sets.contains(&ot_kinds(metric).1);
    // a monitor that never rolled back holds the final network, so its
    // batches come from the same chain as the unmonitored one
    let at_final = |r: &crate::monitor::TrainingMonitorResult| {
        r.checkpoint_epoch == trained.epochs_trained
    };
    let full_seed = derive_seed(seed, &[3]);
    let shared = trained
        .monitors
        .iter()
        .position(|r| at_final(r) && wants_otd(r.metric));
    let shared_cfg = shared.map(|i| dcfg(trained.monitors[i].metric));
    let noise = begin_sampling(&trained.final_model, n, full_seed)?;
    let noise_windows = spectro_to_windows(noise.state.view(), &trained.final_model)?;
    let mut full = sample_monitored(
        &trained.final_model,
        n,
        full_seed,
        shared
            .zip(shared_cfg.as_ref())
            .map(|(i, c)| (&scorers[&trained.monitors[i].metric], c)),
        true,
    )?;
    let full_windows = full.final_windows.take().expect("ran to the end");
    let quality = QualityRow {
        participant,
        class,
        noise_score: psd_scorer.record(0, &noise_windows)?.mean,
        final_score: psd_scorer.record(cfg.diffusion.steps, &full_windows)?.mean,
    };

    let mut usage = Vec::new();
    let mut traces = Vec::new();
    let mut denoise_traces = Vec::new();
    let mut shared_out = Some(full);
    for (i, res) in trained.monitors.into_iter().enumerate() {
        let metric = res.metric;
        let (ot, otd) = ot_kinds(metric);
        let monitor_cfg = dcfg(metric);
        let monitor = wants_otd(metric).then_some((&scorers[&metric], &monitor_cfg));
        let (ot_windows, monitored) = if shared == Some(i) {
            let out = shared_out.take().expect("used once");
            (full_windows.clone(), out.monitored)
        } else if at_final(&res) && monitor.is_none() {
            (full_windows.clone(), None)
        } else {
            let model_seed = if at_final(&res) {
                full_seed
            } else {
                derive_seed(seed, &[4, metric as u64])
            };
            let out = sample_monitored(&res.model, n, model_seed, monitor, true)?;
            (out.final_windows.expect("ran to the end"), out.monitored)
        };
        artifacts.insert(ot, class, ot_windows);
        let mut row = UsageRow {
            participant,
            class,
            metric,
            epochs_used: res.stopped_at,
            checkpoint_epoch: res.checkpoint_epoch,
            probes: res.trace.records.len(),
            denoise_steps_used: None,
            denoise_snapshot_step: None,
        };
        if let Some(m) = monitored {
            row.denoise_steps_used = Some(m.steps_used);
            row.denoise_snapshot_step = Some(m.snapshot_step);
            artifacts.insert(otd, class, m.windows);
            denoise_traces.push(m.trace);
        }
        usage.push(row);
        traces.push(res.trace);
    }
    artifacts.insert(SetKind::FullDdpm, class, full_windows);
    Ok(ClassRun {
        participant,
        class,
        calibration,
        usage,
        quality,
        artifacts,
        traces,
        denoise_traces,
        losses: trained.losses,
    })
}

/// Seed of the class model for one held-out participant. Stream 1 seeds the
/// network, 2 training, 3 the unmonitored chain and `[4, metric]` the chain
/// of a rolled-back checkpoint.
pub fn class_seed(cfg: &ExperimentConfig, participant: u32, class: usize) -> u64 {
    derive_seed(cfg.seed, &[u64::from(participant), class as u64])
}

/// Real windows of one class.
pub fn class_windows(ds: &Dataset<f64>, class: usize) -> Vec<TimeWindow<f64>> {
    ds.of_class(class)
        .windows()
        .iter()
        .map(|w| w.window.clone())
        .collect()
}

pub fn ot_kinds(metric: MetricKind) -> (SetKind, SetKind) {
    match metric {
        MetricKind::COptGak => (SetKind::OtCOptGak, SetKind::OtdCOptGak),
        MetricKind::CosineTime => (SetKind::OtCosineTime, SetKind::OtdCosineTime),
        _ => (SetKind::OtCosinePsd, SetKind::OtdCosinePsd),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetScores {
    pub set: SetKind,
    /// Macro F1 per held-out participant, averaged over classifier seeds.
    pub per_participant: Vec<Option<f64>>,
    /// `[seed][participant]`.
    pub per_seed: Vec<Vec<Option<f64>>>,
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub participants: Vec<u32>,
    pub class_names: Vec<String>,
    pub sets: Vec<SetScores>,
    pub usage: Vec<UsageRow>,
    pub calibrations: Vec<CalibrationRow>,
    pub quality: Vec<QualityRow>,
    pub reduction: Vec<ReductionRow>,
    pub failures: Vec<String>,
    pub max_epochs: usize,
    pub denoising_steps: usize,
    pub classifier_seeds: Vec<u64>,
}

fn mean_of(v: &[Option<f64>]) -> Option<f64> {
    let vals: Vec<f64> = v.iter().flatten().copied().collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

impl EvalReport {
    pub fn set(&self, kind: SetKind) -> Option<&SetScores> {
        self.sets.iter().find(|s| s.set == kind)
    }

    /// Mean over participants for each classifier seed.
    pub fn seed_means(&self, kind: SetKind) -> Vec<Option<f64>> {
        self.set(kind)
            .map(|s| s.per_seed.iter().map(|row| mean_of(row)).collect())
            .unwrap_or_default()
    }

    /// Participant x set macro F1 table.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["participant".to_string()];
        header.extend(self.sets.iter().map(|s| s.set.name().to_string()));
        w.write_record(&header).map_err(csv_err)?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        for (i, p) in self.participants.iter().enumerate() {
            let mut row = vec![ParticipantId(*p).to_string()];
            row.extend(self.sets.iter().map(|s| fmt(s.per_participant[i])));
            w.write_record(&row).map_err(csv_err)?;
        }
        let mut row = vec!["mean".to_string()];
        row.extend(self.sets.iter().map(|s| fmt(s.mean)));
        w.write_record(&row).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_usage_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.usage {
            w.serialize(UsageCsv {
                participant: row.participant,
                class: self.class_names.get(row.class).cloned().unwrap_or_default(),
                metric: row.metric.name(),
                epochs_used: row.epochs_used,
                checkpoint_epoch: row.checkpoint_epoch,
                probes: row.probes,
                denoise_steps_used: row.denoise_steps_used,
                denoise_snapshot_step: row.denoise_snapshot_step,
            })
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct UsageCsv {
    participant: u32,
    class: String,
    metric: &'static str,
    epochs_used: usize,
    checkpoint_epoch: usize,
    probes: usize,
    denoise_steps_used: Option<usize>,
    denoise_snapshot_step: Option<usize>,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Leave-one-subject-out run over every requested training set.
pub fn losocv_experiment(ds: &Dataset<f64>, cfg: &ExperimentConfig) -> Result<EvalReport> {
    losocv_experiment_with(ds, cfg, |_| {})
}

/// As [`losocv_experiment`], handing every finished class run to `on_class`.
pub fn losocv_experiment_with(
    ds: &Dataset<f64>,
    cfg: &ExperimentConfig,
    mut on_class: impl FnMut(&ClassRun),
) -> Result<EvalReport> {
    cfg.validate()?;
    let splits = selected_splits(ds, cfg)?;
    let classes = ds.labels().len();
    let specs = cfg.specs();
    let n_seeds = cfg.classifier_seeds.len();
    let mut per_seed = vec![vec![vec![None; splits.len()]; n_seeds]; specs.len()];
    let mut report = EvalReport {
        participants: splits.iter().map(|s| s.test.0).collect(),
        class_names: ds.labels().iter().map(|l| l.name.clone()).collect(),
        sets: Vec::new(),
        usage: Vec::new(),
        calibrations: Vec::new(),
        quality: Vec::new(),
        reduction: Vec::new(),
        failures: Vec::new(),
        max_epochs: cfg.max_epochs,
        denoising_steps: cfg.diffusion.steps,
        classifier_seeds: cfg.classifier_seeds.clone(),
    };
    let needs_gak = cfg.monitored_metrics().contains(&MetricKind::COptGak);
    for (si, split) in splits.iter().enumerate() {
        let pid = split.test.0;
        let SplitData {
            full,
            two_sample: two,
            validation: val,
            test,
        } = split_data(ds, split, cfg)?;
        let mut artifacts = DdpmArtifacts::default();
        if cfg.needs_ddpm() {
            for class in 0..classes {
                let calibration = if needs_gak {
                    match calibrate_class(&two, &val, cfg, pid, class) {
                        Ok(c) => Some(c),
                        Err(e) => {
                            report
                                .failures
                                .push(format!("participant {pid}, class {class}: calibration: {e}"));
                            continue;
                        }
                    }
                } else {
                    None
                };
                let run = match run_class(&two, calibration, cfg, pid, class) {
                    Ok(r) => r,
                    Err(e) => {
                        report
                            .failures
                            .push(format!("participant {pid}, class {class}: diffusion: {e}"));
                        continue;
                    }
                };
                on_class(&run);
                log::info!(
                    "P{pid} class {class}: noise {:.3} -> final {:.3}",
                    run.quality.noise_score,
                    run.quality.final_score
                );
                artifacts.synthetic.extend(run.artifacts.synthetic);
                report.usage.extend(run.usage);
                report.quality.push(run.quality);
                report.calibrations.extend(run.calibration);
            }
        }
        for (k, spec) in specs.iter().enumerate() {
            let train = match build_training_set(spec, &two, &full, &artifacts) {
                Ok(t) => t,
                Err(e) => {
                    report.failures.push(format!("participant {pid}, {}: {e}", spec.kind));
                    continue;
                }
            };
            for (s, &cs) in cfg.classifier_seeds.iter().enumerate() {
                let clf_seed = derive_seed(cs, &[u64::from(pid)]);
                let f1 = train_proxy_classifier(&train, &val, &cfg.classifier, clf_seed)
                    .and_then(|c| c.evaluate(&test))
                    .map(|cm| macro_f1(&cm));
                match f1 {
                    Ok(f) => per_seed[k][s][si] = Some(f),
                    Err(e) => report
                        .failures
                        .push(format!("participant {pid}, {}, seed {cs}: {e}", spec.kind)),
                }
            }
        }
    }
    for (k, spec) in specs.iter().enumerate() {
        let rows = std::mem::take(&mut per_seed[k]);
        let per_participant: Vec<Option<f64>> = (0..splits.len())
            .map(|p| mean_of(&rows.iter().map(|r| r[p]).collect::<Vec<_>>()))
            .collect();
        report.sets.push(SetScores {
            set: spec.kind,
            mean: mean_of(&per_participant),
            per_participant,
            per_seed: rows,
        });
    }
    let usage: Vec<(MetricKind, usize, usize)> = report
        .usage
        .iter()
        .map(|u| (u.metric, u.class, u.epochs_used))
        .collect();
    if !usage.is_empty() {
        report.reduction = reduction_report(&usage, &report.class_names, cfg.max_epochs)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassUsage {
    pub class: String,
    pub mean: f64,
    pub std: f64,
    pub models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionRow {
    pub metric: MetricKind,
    pub per_class: Vec<ClassUsage>,
    pub models: usize,
    pub mean_epochs: f64,
    pub reduction_pct: f64,
    pub saved_epochs: u64,
    pub note: Option<String>,
}

impl ReductionRow {
    /// Adds a note when a separately reported percentage disagrees with the
    /// recomputed one at two decimals.
    pub fn with_reported_pct(mut self, reported: f64) -> Self {
        if (reported - self.reduction_pct).abs() >= 0.005 {
            self.note = Some(format!(
                "reported reduction {reported:.2}% differs from {:.2}% recomputed from per-class means; saved epochs agree with the recomputed value",
                self.reduction_pct
            ));
        }
        self
    }
}

fn finish_row(
    metric: MetricKind,
    per_class: Vec<ClassUsage>,
    total_used: u64,
    models: usize,
    max_epochs: usize,
) -> ReductionRow {
    let budget = (models * max_epochs) as u64;
    let mean_epochs = total_used as f64 / models as f64;
    ReductionRow {
        metric,
        per_class,
        models,
        mean_epochs,
        reduction_pct: 100.0 * (1.0 - mean_epochs / max_epochs as f64),
        saved_epochs: budget.saturating_sub(total_used),
        note: None,
    }
}

/// Reduction per metric from `(metric, class, epochs_used)` entries.
pub fn reduction_report(
    usage: &[(MetricKind, usize, usize)],
    class_names: &[String],
    max_epochs: usize,
) -> Result<Vec<ReductionRow>> {
    if usage.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut metrics: Vec<MetricKind> = Vec::new();
    for (m, _, _) in usage {
        if !metrics.contains(m) {
            metrics.push(*m);
        }
    }
    let mut rows = Vec::new();
    for metric in metrics {
        let mut per_class = Vec::new();
        let mut total = 0u64;
        let mut models = 0;
        for (c, name) in class_names.iter().enumerate() {
            let used: Vec<f64> = usage
                .iter()
                .filter(|(m, cl, _)| *m == metric && *cl == c)
                .map(|(_, _, e)| *e as f64)
                .collect();
            if used.is_empty() {
                continue;
            }
            let (mean, std) = sample_mean_std(&used);
            total += used.iter().sum::<f64>() as u64;
            models += used.len();
            per_class.push(ClassUsage {
                class: name.clone(),
                mean,
                std,
                models: used.len(),
            });
        }
        rows.push(finish_row(metric, per_class, total, models, max_epochs));
    }
    Ok(rows)
}

/// Reduction from published per-class mean stop epochs with a known number
/// of models per class; totals are rounded back to whole epochs.
pub fn reduction_from_class_means(
    metric: MetricKind,
    class_names: &[&str],
    means: &[f64],
    stds: &[f64],
    models_per_class: usize,
    max_epochs: usize,
) -> Result<ReductionRow> {
    if means.is_empty() || means.len() != class_names.len() || stds.len() != means.len() {
        return Err(Error::LengthMismatch {
            left: class_names.len(),
            right: means.len(),
        });
    }
    let totals: Vec<u64> = means
        .iter()
        .map(|m| (m * models_per_class as f64).round() as u64)
        .collect();
    let per_class = class_names
        .iter()
        .zip(means)
        .zip(stds)
        .map(|((name, &mean), &std)| ClassUsage {
            class: name.to_string(),
            mean,
            std,
            models: models_per_class,
        })
        .collect();
    Ok(finish_row(
        metric,
        per_class,
        totals.iter().sum(),
        models_per_class * means.len(),
        max_epochs,
    ))
}

fn sample_mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Reduction table: one row per metric, `mean ± std` per class.
pub fn write_reduction_csv<W: Write>(rows: &[ReductionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let classes: Vec<String> = rows
        .first()
        .map(|r| r.per_class.iter().map(|c| c.class.clone()).collect())
        .unwrap_or_default();
    let mut header = vec!["similarity_score".to_string()];
    header.extend(classes.iter().cloned());
    header.extend(
        ["mean_epochs", "reduction_pct", "saved_epochs", "models", "note"].map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.metric.name().to_string()];
        for name in &classes {
            rec.push(
                r.per_class
                    .iter()
                    .find(|c| &c.class == name)
                    .map_or(String::new(), |c| format!("{:.2} ± {:.2}", c.mean, c.std)),
            );
        }
        rec.push(format!("{:.3}", r.mean_epochs));
        rec.push(format!("{:.2}", r.reduction_pct));
        rec.push(r.saved_epochs.to_string());
        rec.push(r.models.to_string());
        rec.push(r.note.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Shuffles labels within a dataset; used to check chance-level behaviour.
pub fn shuffled_labels(ds: &Dataset<f64>, seed: u64) -> Result<Dataset<f64>> {
    use rand::seq::SliceRandom;
    let mut labels: Vec<_> = ds.windows().iter().map(|w| w.label.clone()).collect();
    labels.shuffle(&mut seeded_rng(seed, &[0x5f1]));
    let windows = ds
        .windows()
        .iter()
        .zip(labels)
        .map(|(w, label)| LabeledWindow {
            label,
            ..w.clone()
        })
        .collect();
    Dataset::new(windows, ds.labels().to_vec(), "shuffled")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth_activity_dataset, SynthConfig};
    use ndarray::array;

    #[test]
    fn table_has_nine_consistent_rows() {
        let t = TrainingSetSpec::table(2, PAPER_SYNTHETIC_PER_MODEL);
        assert_eq!(t.len(), 9);
        for s in &t {
            assert_eq!(s.monitor_training, s.metric.is_some());
            if s.monitor_denoising {
                assert!(s.monitor_training);
            }
        }
        let two = &t[0];
        assert_eq!(two.real_per_class(11), Some(22));
        assert_eq!(two.synthetic_per_model, 0);
        let full_ddpm = t.iter().find(|s| s.kind == SetKind::FullDdpm).unwrap();
        assert_eq!(full_ddpm.real_per_class(11), Some(22));
        assert_eq!(full_ddpm.synthetic_per_model, 15_360);
        assert_eq!(t[1].real_per_participant, None);
        for k in SetKind::ALL {
            assert_eq!(SetKind::parse(k.key()), Some(k));
            assert_eq!(SetKind::parse(k.name()), Some(k));
        }
    }

    #[test]
    fn macro_f1_examples() {
        let diag = ConfusionMatrix {
            counts: array![[4, 0], [0, 7]],
        };
        assert_eq!(macro_f1(&diag), 1.0);
        let flat = ConfusionMatrix {
            counts: array![[5, 5], [5, 5]],
        };
        assert!((macro_f1(&flat) - 0.5).abs() < 1e-15);
        let never = ConfusionMatrix {
            counts: array![[3, 0, 0], [1, 2, 0], [2, 0, 0]],
        };
        // class 2 is never predicted correctly and contributes 0
        let f1_0 = 2.0 * 0.5 * 1.0 / 1.5;
        let f1_1 = 2.0 * 1.0 * (2.0 / 3.0) / (1.0 + 2.0 / 3.0);
        assert!((macro_f1(&never) - (f1_0 + f1_1) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn macro_f1_is_relabeling_invariant() {
        let cm = ConfusionMatrix {
            counts: array![[5, 1, 2], [0, 3, 4], [1, 1, 6]],
        };
        let perm = [2, 0, 1];
        let mut swapped = ConfusionMatrix::new(3);
        for i in 0..3 {
            for j in 0..3 {
                swapped.counts[[perm[i], perm[j]]] = cm.counts[[i, j]];
            }
        }
        assert!((macro_f1(&cm) - macro_f1(&swapped)).abs() < 1e-15);
    }

    #[test]
    fn reduction_examples() {
        let names = ["Walking", "Running", "Jump Up", "Cycling"];
        let time = reduction_from_class_means(
            MetricKind::CosineTime,
            &names,
            &[3657.33, 2924.00, 3144.83, 3107.33],
            &[0.0; 4],
            12,
            4500,
        )
        .unwrap();
        assert!((time.reduction_pct - 28.70).abs() < 0.01);
        let all_max = reduction_report(
            &[(MetricKind::CosinePsd, 0, 600), (MetricKind::CosinePsd, 1, 600)],
            &["a".into(), "b".into()],
            600,
        )
        .unwrap();
        assert_eq!(all_max[0].reduction_pct, 0.0);
        assert_eq!(all_max[0].saved_epochs, 0);
        let mixed = reduction_report(
            &[
                (MetricKind::CosinePsd, 0, 100),
                (MetricKind::CosinePsd, 0, 300),
                (MetricKind::COptGak, 1, 600),
            ],
            &["a".into(), "b".into()],
            600,
        )
        .unwrap();
        assert_eq!(mixed[0].saved_epochs, 800);
        assert_eq!(mixed[0].per_class[0].mean, 200.0);
        assert_eq!(mixed[1].saved_epochs, 0);
        let mut buf = Vec::new();
        write_reduction_csv(&mixed, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("similarity_score,a"));
    }

    fn corpus() -> Dataset<f64> {
        let mut cfg = SynthConfig {
            participants: 3,
            windows_per_participant: 8,
            ..SynthConfig::four_class()
        };
        cfg.classes.truncate(2);
        synth_activity_dataset(&cfg).unwrap()
    }

    #[test]
    fn separable_classes_fit_perfectly() {
        let ds = corpus();
        let clf = train_proxy_classifier(&ds, &ds, &ClassifierConfig::default(), 1).unwrap();
        let cm = clf.evaluate(&ds).unwrap();
        assert_eq!(cm.accuracy(), 1.0);
        assert_eq!(cm.total(), ds.len() as u64);
        let again = train_proxy_classifier(&ds, &ds, &ClassifierConfig::default(), 1).unwrap();
        assert_eq!(again, clf);
    }

    #[test]
    fn shuffled_labels_are_near_chance() {
        let mut cfg = SynthConfig {
            participants: 6,
            windows_per_participant: 20,
            ..SynthConfig::four_class()
        };
        cfg.classes.truncate(2);
        let ds = synth_activity_dataset(&cfg).unwrap();
        let mut f1s = Vec::new();
        for seed in 0..5 {
            let shuffled = shuffled_labels(&ds, seed).unwrap();
            let train = shuffled.of_participants(&[ParticipantId(1), ParticipantId(2), ParticipantId(3)]);
            let val = shuffled.of_participants(&[ParticipantId(4)]);
            let test = shuffled.of_participants(&[ParticipantId(5), ParticipantId(6)]);
            let clf = train_proxy_classifier(&train, &val, &ClassifierConfig::default(), seed).unwrap();
            f1s.push(macro_f1(&clf.evaluate(&test).unwrap()));
        }
        let mean = f1s.iter().sum::<f64>() / f1s.len() as f64;
        assert!((mean - 0.5).abs() < 0.15, "{mean}");
    }

    #[test]
    fn single_class_training_is_rejected() {
        let ds = corpus().of_class(0);
        assert!(matches!(
            train_proxy_classifier(&ds, &ds, &ClassifierConfig::default(), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn training_sets_have_exact_counts() {
        let ds = corpus();
        let (two, val) = two_sample_sets(&ds, 2, 3).unwrap();
        assert_eq!(two.len(), 2 * 3 * 2);
        assert_eq!(val.len(), 2 * 3 * 2);
        for w in two.windows() {
            assert!(!val.windows().iter().any(|v| v.window == w.window));
        }
        let mut art = DdpmArtifacts::default();
        let spec = TrainingSetSpec::new(SetKind::OtCosinePsd, 2, 5);
        assert!(matches!(
            build_training_set(&spec, &two, &ds, &art),
            Err(Error::MissingArtifact(_))
        ));
        let w = ds.windows()[0].window.clone();
        art.insert(SetKind::OtCosinePsd, 0, vec![w.clone(); 7]);
        art.insert(SetKind::OtCosinePsd, 1, vec![w; 5]);
        let built = build_training_set(&spec, &two, &ds, &art).unwrap();
        assert_eq!(built.len(), two.len() + 10);
        assert_eq!(built.of_class(0).len(), 6 + 5);
        let full = build_training_set(&TrainingSetSpec::new(SetKind::FullSet, 2, 5), &two, &ds, &art).unwrap();
        assert_eq!(full.len(), ds.len());
        let plain = build_training_set(&TrainingSetSpec::new(SetKind::TwoSample, 2, 5), &two, &ds, &art).unwrap();
        assert_eq!(plain.len(), two.len());
    }

    #[test]
    fn real_only_experiment_is_deterministic() {
        let ds = corpus();
        let cfg = ExperimentConfig {
            sets: vec![SetKind::TwoSample, SetKind::FullSet],
            classifier_seeds: vec![1, 2],
            ..ExperimentConfig::desk()
        };
        let a = losocv_experiment(&ds, &cfg).unwrap();
        let b = losocv_experiment(&ds, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.participants, vec![1, 2, 3]);
        assert_eq!(a.sets.len(), 2);
        assert!(a.usage.is_empty() && a.reduction.is_empty());
        for s in &a.sets {
            assert_eq!(s.per_seed.len(), 2);
            for f in s.per_participant.iter().flatten() {
                assert!((0.0..=1.0).contains(f));
            }
        }
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("participant,2 Sample,Full-Set\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
