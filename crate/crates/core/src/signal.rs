//! Time-domain windows, labelled datasets and the splitting procedures used
//! by the leave-one-subject-out experiments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{seeded_rng, Real};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 50.0;

/// One sliding-window sample, `channels x timesteps`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeWindow<T> {
    data: Array2<T>,
    sample_rate_hz: f64,
}

impl<T: Real> TimeWindow<T> {
    pub fn new(data: Array2<T>, sample_rate_hz: f64) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::config("channels", "must be > 0"));
        }
        if data.ncols() == 0 {
            return Err(Error::EmptySequence);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::config("sample_rate_hz", "must be positive"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("time window"));
        }
        Ok(Self {
            data,
            sample_rate_hz,
        })
    }

    pub fn zeros(channels: usize, timesteps: usize, sample_rate_hz: f64) -> Result<Self> {
        Self::new(Array2::zeros((channels, timesteps)), sample_rate_hz)
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn timesteps(&self) -> usize {
        self.data.ncols()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn data(&self) -> ArrayView2<'_, T> {
        self.data.view()
    }

    pub fn channel(&self, c: usize) -> ArrayView1<'_, T> {
        self.data.row(c)
    }

    /// Per-channel sample vectors, the time-domain view used by the metrics.
    pub fn axes(&self) -> Vec<Vec<T>> {
        self.data.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    pub fn into_data(self) -> Array2<T> {
        self.data
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActivityLabel {
    pub name: String,
    pub index: usize,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ParticipantId(pub u32);

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledWindow<T> {
    pub window: TimeWindow<T>,
    pub label: ActivityLabel,
    pub participant: ParticipantId,
}

/// Builds the contiguous label set `names[i] -> index i`.
pub fn label_set<S: AsRef<str>>(names: &[S]) -> Result<Vec<ActivityLabel>> {
    let mut seen = BTreeSet::new();
    names
        .iter()
        .enumerate()
        .map(|(index, n)| {
            let name = n.as_ref().trim().to_string();
            if name.is_empty() || !seen.insert(name.clone()) {
                return Err(Error::config("labels", format!("empty or duplicate label `{name}`")));
            }
            Ok(ActivityLabel { name, index })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    windows: Vec<LabeledWindow<T>>,
    labels: Vec<ActivityLabel>,
    channels: usize,
    timesteps: usize,
    pub meta: String,
}

impl<T: Real> Dataset<T> {
    pub fn new(
        windows: Vec<LabeledWindow<T>>,
        labels: Vec<ActivityLabel>,
        meta: impl Into<String>,
    ) -> Result<Self> {
        for (i, l) in labels.iter().enumerate() {
            if l.index != i {
                return Err(Error::config("labels", "indices must be contiguous from 0"));
            }
        }
        let (channels, timesteps) = windows
            .first()
            .map(|w| (w.window.channels(), w.window.timesteps()))
            .unwrap_or((0, 0));
        for w in &windows {
            if w.window.channels() != channels {
                return Err(Error::DimensionMismatch {
                    expected: channels,
                    got: w.window.channels(),
                });
            }
            if w.window.timesteps() != timesteps {
                return Err(Error::DimensionMismatch {
                    expected: timesteps,
                    got: w.window.timesteps(),
                });
            }
            if labels.get(w.label.index) != Some(&w.label) {
                return Err(Error::config(
                    "labels",
                    format!("window label `{}` not in the label set", w.label.name),
                ));
            }
        }
        Ok(Self {
            windows,
            labels,
            channels,
            timesteps,
            meta: meta.into(),
        })
    }

    pub fn empty_like(&self, meta: impl Into<String>) -> Self {
        Self {
            windows: Vec::new(),
            labels: self.labels.clone(),
            channels: self.channels,
            timesteps: self.timesteps,
            meta: meta.into(),
        }
    }

    pub fn windows(&self) -> &[LabeledWindow<T>] {
        &self.windows
    }

    pub fn labels(&self) -> &[ActivityLabel] {
        &self.labels
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn timesteps(&self) -> usize {
        self.timesteps
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn participants(&self) -> Vec<ParticipantId> {
        self.windows
            .iter()
            .map(|w| w.participant)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn filter(&self, keep: impl Fn(&LabeledWindow<T>) -> bool) -> Self {
        Self {
            windows: self.windows.iter().filter(|w| keep(w)).cloned().collect(),
            labels: self.labels.clone(),
            channels: self.channels,
            timesteps: self.timesteps,
            meta: self.meta.clone(),
        }
    }

    pub fn of_class(&self, class: usize) -> Self {
        self.filter(|w| w.label.index == class)
    }

    pub fn of_participants(&self, ids: &[ParticipantId]) -> Self {
        self.filter(|w| ids.contains(&w.participant))
    }

    /// Appends windows; shapes and labels must agree with this dataset.
    pub fn extend(&mut self, more: impl IntoIterator<Item = LabeledWindow<T>>) -> Result<()> {
        for w in more {
            if self.windows.is_empty() && self.channels == 0 {
                self.channels = w.window.channels();
                self.timesteps = w.window.timesteps();
            }
            if w.window.channels() != self.channels || w.window.timesteps() != self.timesteps {
                return Err(Error::DimensionMismatch {
                    expected: self.channels * self.timesteps,
                    got: w.window.channels() * w.window.timesteps(),
                });
            }
            if self.labels.get(w.label.index) != Some(&w.label) {
                return Err(Error::config("labels", format!("unknown label `{}`", w.label.name)));
            }
            self.windows.push(w);
        }
        Ok(())
    }

    pub fn with_meta(mut self, meta: impl Into<String>) -> Self {
        self.meta = meta.into();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlidingWindowConfig {
    pub width: usize,
    pub overlap: usize,
}

impl Default for SlidingWindowConfig {
    fn default() -> Self {
        Self {
            width: 160,
            overlap: 40,
        }
    }
}

impl SlidingWindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::config("window.width", "must be > 0"));
        }
        if self.overlap >= self.width {
            return Err(Error::config("window.overlap", "must be smaller than the width"));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.width - self.overlap
    }

    /// Number of full windows that fit into `n` samples.
    pub fn count(&self, n: usize) -> usize {
        if n < self.width {
            0
        } else {
            (n - self.width) / self.stride() + 1
        }
    }

    /// Signal length that yields exactly `windows` windows.
    pub fn span(&self, windows: usize) -> usize {
        if windows == 0 {
            0
        } else {
            self.width + (windows - 1) * self.stride()
        }
    }
}

/// Cuts `signal` (`channels x N`) into windows at stride `width - overlap`.
/// A trailing remainder shorter than the width is dropped.
pub fn slide_windows<T: Real>(
    signal: ArrayView2<'_, T>,
    sample_rate_hz: f64,
    cfg: &SlidingWindowConfig,
) -> Result<Vec<TimeWindow<T>>> {
    cfg.validate()?;
    let n = signal.ncols();
    if n < cfg.width {
        return Err(Error::SignalTooShort {
            len: n,
            width: cfg.width,
        });
    }
    (0..cfg.count(n))
        .map(|k| {
            let start = k * cfg.stride();
            let slice = signal.slice(ndarray::s![.., start..start + cfg.width]);
            TimeWindow::new(slice.to_owned(), sample_rate_hz)
        })
        .collect()
}

/// Windows a labelled recording without crossing label boundaries: each
/// contiguous run of one label is windowed independently, runs shorter than
/// the window width contribute nothing.
pub fn segment_recording<T: Real>(
    signal: ArrayView2<'_, T>,
    labels: &[usize],
    sample_rate_hz: f64,
    cfg: &SlidingWindowConfig,
) -> Result<Vec<(usize, TimeWindow<T>)>> {
    if labels.len() != signal.ncols() {
        return Err(Error::LengthMismatch {
            left: signal.ncols(),
            right: labels.len(),
        });
    }
    cfg.validate()?;
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start;
        while end < labels.len() && labels[end] == label {
            end += 1;
        }
        if end - start >= cfg.width {
            let run = signal.slice(ndarray::s![.., start..end]);
            for w in slide_windows(run, sample_rate_hz, cfg)? {
                out.push((label, w));
            }
        }
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LosoSplit {
    pub train: Vec<ParticipantId>,
    pub test: ParticipantId,
}

/// One split per participant, in ascending participant order.
pub fn loso_splits<T: Real>(ds: &Dataset<T>) -> Result<Vec<LosoSplit>> {
    let ids = ds.participants();
    if ids.len() < 2 {
        return Err(Error::NotEnoughParticipants(ids.len()));
    }
    Ok(ids
        .iter()
        .map(|&test| LosoSplit {
            train: ids.iter().copied().filter(|&p| p != test).collect(),
            test,
        })
        .collect())
}

fn strata<T>(ds: &Dataset<T>) -> BTreeMap<(ParticipantId, usize), Vec<usize>> {
    let mut map: BTreeMap<_, Vec<usize>> = BTreeMap::new();
    for (i, w) in ds.windows.iter().enumerate() {
        map.entry((w.participant, w.label.index)).or_default().push(i);
    }
    map
}

fn pick<T: Real>(ds: &Dataset<T>, mut idx: Vec<usize>, meta: &str) -> Dataset<T> {
    idx.sort_unstable();
    Dataset {
        windows: idx.into_iter().map(|i| ds.windows[i].clone()).collect(),
        labels: ds.labels.clone(),
        channels: ds.channels,
        timesteps: ds.timesteps,
        meta: format!("{} | {meta}", ds.meta),
    }
}

/// Splits each (participant, label) stratum into `round(n * train_fraction)`
/// training windows and the rest for validation.
pub fn train_val_split<T: Real>(
    ds: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config("train_fraction", "must lie in (0, 1)"));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = seeded_rng(seed, &[0x7a11]);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (_, mut idx) in strata(ds) {
        idx.shuffle(&mut rng);
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        val.extend_from_slice(&idx[n_train..]);
        idx.truncate(n_train);
        train.extend(idx);
    }
    Ok((pick(ds, train, "train"), pick(ds, val, "val")))
}

/// Draws disjoint per-participant subsets of the given sizes, e.g. `[2, 2]`
/// for a two-sample training set and a same-sized validation set.
pub fn subsample_disjoint<T: Real>(
    ds: &Dataset<T>,
    sizes: &[usize],
    seed: u64,
) -> Result<Vec<Dataset<T>>> {
    let need: usize = sizes.iter().sum();
    let mut per_participant: BTreeMap<ParticipantId, Vec<usize>> = BTreeMap::new();
    for (i, w) in ds.windows.iter().enumerate() {
        per_participant.entry(w.participant).or_default().push(i);
    }
    let mut parts = vec![Vec::new(); sizes.len()];
    for (&pid, idx) in &per_participant {
        if idx.len() < need {
            return Err(Error::InsufficientWindows {
                participant: pid.0,
                have: idx.len(),
                need,
            });
        }
        let mut rng = seeded_rng(seed, &[0x5b5a, u64::from(pid.0)]);
        let chosen = rand::seq::index::sample(&mut rng, idx.len(), need);
        let mut offset = 0;
        for (part, &k) in parts.iter_mut().zip(sizes) {
            part.extend(chosen.iter().skip(offset).take(k).map(|j| idx[j]));
            offset += k;
        }
    }
    Ok(parts
        .into_iter()
        .enumerate()
        .map(|(i, idx)| pick(ds, idx, &format!("subsample {i}")))
        .collect())
}

/// Keeps exactly `k` randomly chosen windows per participant.
pub fn subsample_per_participant<T: Real>(
    ds: &Dataset<T>,
    k: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    Ok(subsample_disjoint(ds, &[k], seed)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthClass {
    pub name: String,
    pub fundamental_hz: f64,
    /// Amplitudes of harmonics 1, 2, 3, ... of the fundamental.
    pub harmonics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub classes: Vec<SynthClass>,
    pub participants: usize,
    pub windows_per_participant: usize,
    pub channels: usize,
    pub sample_rate_hz: f64,
    pub window: SlidingWindowConfig,
    /// Standard deviation of additive white noise.
    pub noise_level: f64,
    /// Relative per-participant amplitude jitter (uniform, +-).
    pub amplitude_jitter: f64,
    /// Relative per-participant fundamental-frequency jitter (uniform, +-).
    pub frequency_jitter: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Four cyclic classes with distinct fundamentals.
    pub fn four_class() -> Self {
        let class = |name: &str, f: f64, h: &[f64]| SynthClass {
            name: name.into(),
            fundamental_hz: f,
            harmonics: h.to_vec(),
        };
        Self {
            classes: vec![
                class("Walking", 1.8, &[1.0, 0.45, 0.2]),
                class("Running", 2.9, &[1.0, 0.6, 0.3]),
                class("JumpUp", 1.2, &[1.0, 0.8, 0.5, 0.3]),
                class("Cycling", 1.4, &[1.0, 0.25]),
            ],
            participants: 12,
            windows_per_participant: 20,
            channels: 4,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            window: SlidingWindowConfig::default(),
            noise_level: 0.3,
            amplitude_jitter: 0.3,
            frequency_jitter: 0.12,
            seed: 7,
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        if self.classes.is_empty() {
            return Err(Error::config("synth.classes", "at least one class required"));
        }
        if self.channels == 0 {
            return Err(Error::config("synth.channels", "must be > 0"));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::config("synth.sample_rate_hz", "must be positive"));
        }
        for (key, v) in [
            ("synth.noise_level", self.noise_level),
            ("synth.amplitude_jitter", self.amplitude_jitter),
            ("synth.frequency_jitter", self.frequency_jitter),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be finite and >= 0"));
            }
        }
        if self.frequency_jitter >= 1.0 {
            return Err(Error::config("synth.frequency_jitter", "must be < 1"));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        for c in &self.classes {
            if !(c.fundamental_hz > 0.0) || c.fundamental_hz >= nyquist {
                return Err(Error::AboveNyquist {
                    class: c.name.clone(),
                    freq_hz: c.fundamental_hz,
                    nyquist_hz: nyquist,
                });
            }
            if c.harmonics.is_empty() {
                return Err(Error::config(
                    "synth.harmonics",
                    format!("class `{}` needs at least one harmonic", c.name),
                ));
            }
        }
        label_set(&self.class_names())?;
        Ok(())
    }
}

/// One continuous recording of a participant performing one class.
fn synth_recording(
    cfg: &SynthConfig,
    participant: usize,
    class: usize,
    len: usize,
) -> Array2<f64> {
    let spec = &cfg.classes[class];
    let mut rng = seeded_rng(cfg.seed, &[0x5717, participant as u64, class as u64]);
    let jitter = |rng: &mut rand_chacha::ChaCha8Rng, rel: f64| {
        if rel > 0.0 {
            1.0 + rng.random_range(-rel..=rel)
        } else {
            1.0
        }
    };
    let f0 = spec.fundamental_hz * jitter(&mut rng, cfg.frequency_jitter);
    let nyquist = cfg.sample_rate_hz / 2.0;
    let mut out = Array2::zeros((cfg.channels, len));
    for c in 0..cfg.channels {
        let gain = jitter(&mut rng, cfg.amplitude_jitter) / (1.0 + 0.35 * c as f64);
        let tones: Vec<(f64, f64, f64)> = spec
            .harmonics
            .iter()
            .enumerate()
            .map(|(h, &a)| {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                ((h + 1) as f64 * f0, a * gain, phase)
            })
            .filter(|&(f, _, _)| f < nyquist)
            .collect();
        for t in 0..len {
            let time = t as f64 / cfg.sample_rate_hz;
            let clean: f64 = tones
                .iter()
                .map(|&(f, a, p)| a * (std::f64::consts::TAU * f * time + p).sin())
                .sum();
            out[[c, t]] = clean;
        }
    }
    if cfg.noise_level > 0.0 {
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += cfg.noise_level * z;
        }
    }
    out
}

/// Continuous per-participant recordings: for each participant, the
/// classes in order, each lasting exactly `windows_per_participant` windows.
pub fn synth_recordings(cfg: &SynthConfig) -> Result<Vec<Recording>> {
    cfg.validate()?;
    let len = cfg.window.span(cfg.windows_per_participant);
    (0..cfg.participants)
        .map(|p| {
            let mut data = Array2::zeros((cfg.channels, len * cfg.classes.len()));
            let mut labels = Vec::with_capacity(len * cfg.classes.len());
            for class in 0..cfg.classes.len() {
                let rec = synth_recording(cfg, p, class, len);
                data.slice_mut(ndarray::s![.., class * len..(class + 1) * len])
                    .assign(&rec);
                labels.extend(std::iter::repeat_n(cfg.classes[class].name.clone(), len));
            }
            Ok(Recording {
                participant: ParticipantId(p as u32 + 1),
                sample_rate_hz: cfg.sample_rate_hz,
                data,
                labels,
            })
        })
        .collect()
}

/// Generates the synthetic activity corpus:
/// `participants x classes x windows_per_participant` windows.
pub fn synth_activity_dataset(cfg: &SynthConfig) -> Result<Dataset<f64>> {
    let recordings = synth_recordings(cfg)?;
    let labels = label_set(&cfg.class_names())?;
    dataset_from_recordings(&recordings, &labels, &cfg.window, "synthetic activities")
}

/// A labelled continuous recording for one participant (`channels x N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub participant: ParticipantId,
    pub sample_rate_hz: f64,
    pub data: Array2<f64>,
    pub labels: Vec<String>,
}

pub fn dataset_from_recordings(
    recordings: &[Recording],
    labels: &[ActivityLabel],
    cfg: &SlidingWindowConfig,
    meta: &str,
) -> Result<Dataset<f64>> {
    let mut windows = Vec::new();
    for rec in recordings {
        let idx = rec
            .labels
            .iter()
            .map(|name| {
                labels
                    .iter()
                    .find(|l| &l.name == name)
                    .map(|l| l.index)
                    .ok_or_else(|| {
                        Error::config("labels", format!("label `{name}` not in the label set"))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        for (label, window) in segment_recording(rec.data.view(), &idx, rec.sample_rate_hz, cfg)? {
            windows.push(LabeledWindow {
                window,
                label: labels[label].clone(),
                participant: rec.participant,
            });
        }
    }
    Dataset::new(windows, labels.to_vec(), meta)
}

const SAMPLE_PERIOD_S: f64 = 0.020;
const SAMPLE_PERIOD_TOLERANCE: f64 = 0.01;

/// Writes a recording as CSV with header `t,ch0..chN,label`.
pub fn write_recording_csv<W: Write>(rec: &Recording, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..rec.data.nrows()).map(|c| format!("ch{c}")));
    header.push("label".into());
    w.write_record(&header).map_err(csv_err)?;
    for t in 0..rec.data.ncols() {
        let mut row = vec![format!("{}", t as f64 / rec.sample_rate_hz)];
        row.extend(rec.data.column(t).iter().map(|v| format!("{v}")));
        row.push(rec.labels[t].clone());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Reads a per-participant CSV recording. The sample period is inferred
/// from the `t` column and must be 20 ms within 1 %.
pub fn read_recording_csv<R: Read>(input: R, participant: ParticipantId) -> Result<Recording> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "label" {
        return Err(Error::Parse("header must be `t, ch0..chN, label`".into()));
    }
    for (c, name) in cols[1..cols.len() - 1].iter().enumerate() {
        if *name != format!("ch{c}") {
            return Err(Error::Parse(format!("expected column `ch{c}`, found `{name}`")));
        }
    }
    let channels = cols.len() - 2;
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}: {e}", line + 2)))
        };
        times.push(parse(&rec[0])?);
        for c in 0..channels {
            values.push(parse(&rec[c + 1])?);
        }
        labels.push(rec[channels + 1].trim().to_string());
    }
    if times.len() < 2 {
        return Err(Error::Parse("need at least two samples".into()));
    }
    let period = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if ((period - SAMPLE_PERIOD_S) / SAMPLE_PERIOD_S).abs() > SAMPLE_PERIOD_TOLERANCE {
        return Err(Error::Parse(format!(
            "sample period {:.6} s is not 20 ms +- 1%",
            period
        )));
    }
    let n = times.len();
    let data = Array2::from_shape_vec((n, channels), values)
        .map_err(|e| Error::Parse(e.to_string()))?
        .reversed_axes()
        .as_standard_layout()
        .to_owned();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("csv recording"));
    }
    Ok(Recording {
        participant,
        sample_rate_hz: 1.0 / period,
        data,
        labels,
    })
}

/// Loads every `participant_<id>.csv` in `dir` into a windowed dataset.
pub fn load_csv_dir(
    dir: &Path,
    labels: &[ActivityLabel],
    cfg: &SlidingWindowConfig,
) -> Result<Dataset<f64>> {
    let mut recordings = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name().to_string_lossy().to_string();
        let Some(id) = name
            .strip_prefix("participant_")
            .and_then(|s| s.strip_suffix(".csv"))
        else {
            continue;
        };
        let id: u32 = id
            .parse()
            .map_err(|_| Error::Parse(format!("bad participant id in `{name}`")))?;
        let file = std::fs::File::open(entry.path())?;
        recordings.push(
            read_recording_csv(file, ParticipantId(id))
                .map_err(|e| e.context(format!("reading {name}")))?,
        );
    }
    if recordings.is_empty() {
        return Err(Error::EmptyDataset);
    }
    dataset_from_recordings(&recordings, labels, cfg, &dir.display().to_string())
}

/// Writes one `participant_<id>.csv` per recording into `dir`.
pub fn write_csv_dir(dir: &Path, recordings: &[Recording]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for rec in recordings {
        let path = dir.join(format!("participant_{}.csv", rec.participant.0));
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write_recording_csv(rec, file)?;
    }
    Ok(())
}
