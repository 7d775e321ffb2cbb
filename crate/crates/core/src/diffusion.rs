//! Denoising diffusion over stacked STFT frames.
//!
//! A window is represented as its complex spectrogram with real and
//! imaginary parts stacked (`channels x 2*bins x frames`), standardised per
//! stacked channel. Each sensor channel gets its own linear beta ramp.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, OptimizerState};
use crate::seeded_rng;
use crate::signal::TimeWindow;
use crate::spectral::{istft, stft, Spectrogram, StftConfig};

/// Per-channel linear beta schedule; step `t` runs from 1 to `steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Array2<f64>,
    alphas: Array2<f64>,
    alpha_bars: Array2<f64>,
    beta_start: Vec<f64>,
    beta_end: Vec<f64>,
}

pub fn make_linear_schedule(
    channels: usize,
    steps: usize,
    beta_start: &[f64],
    beta_end: &[f64],
) -> Result<NoiseSchedule> {
    if channels == 0 || steps == 0 {
        return Err(Error::config("diffusion.steps", "channels and steps must be > 0"));
    }
    if beta_start.len() != channels || beta_end.len() != channels {
        return Err(Error::config(
            "diffusion.beta_start",
            format!("need one beta range per channel ({channels})"),
        ));
    }
    for (c, (&lo, &hi)) in beta_start.iter().zip(beta_end).enumerate() {
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(Error::config(
                "diffusion.beta_end",
                format!("channel {c}: need 0 < start <= end < 1, got [{lo}, {hi}]"),
            ));
        }
    }
    let betas = Array2::from_shape_fn((channels, steps), |(c, i)| {
        if steps == 1 {
            beta_start[c]
        } else {
            beta_start[c] + (beta_end[c] - beta_start[c]) * i as f64 / (steps - 1) as f64
        }
    });
    let alphas = betas.mapv(|b| 1.0 - b);
    let mut alpha_bars = alphas.clone();
    for mut row in alpha_bars.rows_mut() {
        for i in 1..steps {
            row[i] *= row[i - 1];
        }
    }
    Ok(NoiseSchedule {
        betas,
        alphas,
        alpha_bars,
        beta_start: beta_start.to_vec(),
        beta_end: beta_end.to_vec(),
    })
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.ncols()
    }

    pub fn channels(&self) -> usize {
        self.betas.nrows()
    }

    pub fn beta(&self, c: usize, t: usize) -> f64 {
        self.betas[[c, t - 1]]
    }

    pub fn alpha(&self, c: usize, t: usize) -> f64 {
        self.alphas[[c, t - 1]]
    }

    pub fn alpha_bar(&self, c: usize, t: usize) -> f64 {
        self.alpha_bars[[c, t - 1]]
    }

    pub fn beta_ranges(&self) -> (&[f64], &[f64]) {
        (&self.beta_start, &self.beta_end)
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::StepOutOfRange {
                t,
                max: self.steps(),
            });
        }
        Ok(())
    }
}

/// Shape of one stacked spectrogram tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataShape {
    pub channels: usize,
    pub freq_bins: usize,
    pub frames: usize,
}

impl DataShape {
    pub fn rows(&self) -> usize {
        2 * self.freq_bins
    }

    pub fn dim(&self) -> usize {
        self.channels * self.rows() * self.frames
    }

    /// Elements per sensor channel (real and imaginary planes).
    pub fn per_channel(&self) -> usize {
        self.rows() * self.frames
    }

    fn plane(&self) -> usize {
        self.freq_bins * self.frames
    }
}

/// Flattens a spectrogram to `[channel][re|im][bin][frame]`.
pub fn spectrogram_to_tensor(s: &Spectrogram<f64>) -> Vec<f64> {
    let (channels, bins, frames) = s.frames.dim();
    let mut out = Vec::with_capacity(channels * 2 * bins * frames);
    for c in 0..channels {
        for part in 0..2 {
            for k in 0..bins {
                for f in 0..frames {
                    let z = s.frames[[c, k, f]];
                    out.push(if part == 0 { z.re } else { z.im });
                }
            }
        }
    }
    out
}

pub fn tensor_to_spectrogram(
    v: &[f64],
    shape: &DataShape,
    cfg: &StftConfig,
    original_len: usize,
    sample_rate_hz: f64,
) -> Result<Spectrogram<f64>> {
    if v.len() != shape.dim() {
        return Err(Error::DimensionMismatch {
            expected: shape.dim(),
            got: v.len(),
        });
    }
    let plane = shape.plane();
    let frames = ndarray::Array3::from_shape_fn(
        (shape.channels, shape.freq_bins, shape.frames),
        |(c, k, f)| {
            let base = c * 2 * plane + k * shape.frames + f;
            Complex::new(v[base], v[base + plane])
        },
    );
    Ok(Spectrogram {
        frames,
        cfg: *cfg,
        original_len,
        sample_rate_hz,
    })
}

/// Mean/std per stacked channel (`2 * channels` planes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: ArrayView2<'_, f64>, shape: &DataShape) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let plane = shape.plane();
        let planes = 2 * shape.channels;
        let mut mean = vec![0.0; planes];
        let mut std = vec![0.0; planes];
        let count = (data.nrows() * plane) as f64;
        for p in 0..planes {
            let block = data.slice(s![.., p * plane..(p + 1) * plane]);
            let m = block.sum() / count;
            let var = block.iter().map(|v| (v - m).powi(2)).sum::<f64>() / count;
            mean[p] = m;
            std[p] = if var.sqrt() > 1e-12 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, row: &mut [f64]) {
        let plane = row.len() / self.mean.len();
        for (i, v) in row.iter_mut().enumerate() {
            let p = i / plane;
            *v = (*v - self.mean[p]) / self.std[p];
        }
    }

    pub fn invert(&self, row: &mut [f64]) {
        let plane = row.len() / self.mean.len();
        for (i, v) in row.iter_mut().enumerate() {
            let p = i / plane;
            *v = *v * self.std[p] + self.mean[p];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub steps: usize,
    /// One value per channel; a single value is broadcast.
    pub beta_start: Vec<f64>,
    pub beta_end: Vec<f64>,
    pub hidden: Vec<usize>,
    pub time_embedding_dim: usize,
    pub learning_rate: f64,
    /// Noisy copies of every training window per epoch.
    pub repeats_per_epoch: usize,
    pub batch_size: usize,
    /// Add the closed-form posterior mean of a per-element Gaussian fit to
    /// the network output; the network then learns the residual.
    pub gaussian_skip: bool,
    pub stft: StftConfig,
}

impl DiffusionConfig {
    /// Small model and short chain for laptop-scale runs.
    pub fn desk() -> Self {
        Self {
            steps: 200,
            beta_start: vec![1e-4],
            beta_end: vec![0.05],
            hidden: vec![128, 128],
            time_embedding_dim: 32,
            learning_rate: 1e-3,
            repeats_per_epoch: 8,
            batch_size: 64,
            gaussian_skip: true,
            stft: StftConfig::default(),
        }
    }

    /// Full-length chain used by the reference experiments.
    pub fn paper() -> Self {
        Self {
            steps: 3000,
            beta_start: vec![1e-4],
            beta_end: vec![0.02],
            hidden: vec![256, 256],
            ..Self::desk()
        }
    }

    fn per_channel(v: &[f64], channels: usize, key: &str) -> Result<Vec<f64>> {
        match v.len() {
            1 => Ok(vec![v[0]; channels]),
            n if n == channels => Ok(v.to_vec()),
            n => Err(Error::config(key, format!("expected 1 or {channels} values, got {n}"))),
        }
    }

    pub fn schedule(&self, channels: usize) -> Result<NoiseSchedule> {
        make_linear_schedule(
            channels,
            self.steps,
            &Self::per_channel(&self.beta_start, channels, "diffusion.beta_start")?,
            &Self::per_channel(&self.beta_end, channels, "diffusion.beta_end")?,
        )
    }
}

/// Sinusoidal embedding of the diffusion step.
pub fn time_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for k in 0..half {
        let freq = (-(10_000f64).ln() * k as f64 / half.max(1) as f64).exp();
        out[k] = (t as f64 * freq).sin();
        out[half + k] = (t as f64 * freq).cos();
    }
    out
}

/// Per-element Gaussian fit of the standardised training tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl GaussianPrior {
    pub fn fit(data: ArrayView2<'_, f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        let mean = data.mean_axis(Axis(0)).expect("non-empty").to_vec();
        let var = data.var_axis(Axis(0), 0.0).to_vec();
        Ok(Self { mean, var })
    }

    /// `E[eps | x_t]` when `x_0` is drawn from this Gaussian.
    fn add_noise_estimate(
        &self,
        xt: &[f64],
        t: usize,
        schedule: &NoiseSchedule,
        per_channel: usize,
        out: &mut [f64],
    ) {
        for (i, (o, &x)) in out.iter_mut().zip(xt).enumerate() {
            let ab = schedule.alpha_bar(i / per_channel, t);
            let denom = ab * self.var[i] + 1.0 - ab;
            *o += (1.0 - ab).sqrt() * (x - ab.sqrt() * self.mean[i]) / denom;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionModel {
    pub denoiser: DenseNet<f64>,
    pub prior: Option<GaussianPrior>,
    pub schedule: NoiseSchedule,
    pub shape: DataShape,
    pub time_embedding_dim: usize,
    pub standardizer: Standardizer,
    pub stft: StftConfig,
    pub window_len: usize,
    pub sample_rate_hz: f64,
}

/// Stacked, standardised training tensors plus the fitted standardiser.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub tensors: Array2<f64>,
    pub shape: DataShape,
    pub standardizer: Standardizer,
    pub window_len: usize,
    pub sample_rate_hz: f64,
}

/// STFTs every window and standardises the stacked tensors.
pub fn prepare_windows(windows: &[TimeWindow<f64>], cfg: &StftConfig) -> Result<PreparedData> {
    let first = windows.first().ok_or(Error::EmptyDataset)?;
    let shape = DataShape {
        channels: first.channels(),
        freq_bins: cfg.freq_bins(),
        frames: cfg.num_frames(first.timesteps()),
    };
    let mut tensors = Array2::zeros((windows.len(), shape.dim()));
    for (i, w) in windows.iter().enumerate() {
        if w.channels() != shape.channels || w.timesteps() != first.timesteps() {
            return Err(Error::DimensionMismatch {
                expected: shape.channels * first.timesteps(),
                got: w.channels() * w.timesteps(),
            });
        }
        let v = spectrogram_to_tensor(&stft(w, cfg)?);
        tensors.row_mut(i).assign(&ndarray::ArrayView1::from(&v));
    }
    let standardizer = Standardizer::fit(tensors.view(), &shape)?;
    for mut row in tensors.rows_mut() {
        standardizer.apply(row.as_slice_mut().expect("standard layout"));
    }
    Ok(PreparedData {
        tensors,
        shape,
        standardizer,
        window_len: first.timesteps(),
        sample_rate_hz: first.sample_rate_hz(),
    })
}

impl DiffusionModel {
    pub fn new(data: &PreparedData, cfg: &DiffusionConfig, seed: u64) -> Result<Self> {
        let schedule = cfg.schedule(data.shape.channels)?;
        let mut dims = vec![data.shape.dim() + cfg.time_embedding_dim];
        dims.extend(&cfg.hidden);
        dims.push(data.shape.dim());
        let mut denoiser = DenseNet::new(&dims, Activation::Relu, Activation::Identity, seed)?;
        denoiser.zero_output_layer();
        let prior = if cfg.gaussian_skip {
            Some(GaussianPrior::fit(data.tensors.view())?)
        } else {
            None
        };
        Ok(Self {
            denoiser,
            prior,
            schedule,
            shape: data.shape,
            time_embedding_dim: cfg.time_embedding_dim,
            standardizer: data.standardizer.clone(),
            stft: cfg.stft,
            window_len: data.window_len,
            sample_rate_hz: data.sample_rate_hz,
        })
    }

    fn denoiser_input(&self, xt: ArrayView2<'_, f64>, steps: &[usize]) -> Array2<f64> {
        let d = self.shape.dim();
        let mut input = Array2::zeros((xt.nrows(), d + self.time_embedding_dim));
        input.slice_mut(s![.., ..d]).assign(&xt);
        for (i, &t) in steps.iter().enumerate() {
            let e = time_embedding(t, self.time_embedding_dim);
            input
                .slice_mut(s![i, d..])
                .assign(&ndarray::ArrayView1::from(&e));
        }
        input
    }

    /// Predicted noise for each row of `xt` at its step.
    pub fn predict_noise(&self, xt: ArrayView2<'_, f64>, steps: &[usize]) -> Result<Array2<f64>> {
        let mut out = self.denoiser.predict(self.denoiser_input(xt, steps).view())?;
        self.add_prior(xt, steps, &mut out);
        Ok(out)
    }

    fn add_prior(&self, xt: ArrayView2<'_, f64>, steps: &[usize], out: &mut Array2<f64>) {
        if let Some(prior) = &self.prior {
            let per_channel = self.shape.per_channel();
            for ((x, mut o), &t) in xt.rows().into_iter().zip(out.rows_mut()).zip(steps) {
                let x = x.to_vec();
                prior.add_noise_estimate(
                    &x,
                    t,
                    &self.schedule,
                    per_channel,
                    o.as_slice_mut().expect("standard layout"),
                );
            }
        }
    }

    fn channel_of(&self, idx: usize) -> usize {
        idx / self.shape.per_channel()
    }

    /// Standardised tensor rows back to time windows.
    pub fn tensors_to_windows(&self, state: ArrayView2<'_, f64>) -> Result<Vec<TimeWindow<f64>>> {
        spectro_to_windows(state, self)
    }

    pub fn save(&self, dir: &Path, name: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.denoiser.save_json(&dir.join(format!("{name}.json")))?;
        let (start, end) = self.schedule.beta_ranges();
        let side = ModelSidecar {
            steps: self.schedule.steps(),
            beta_start: start.to_vec(),
            beta_end: end.to_vec(),
            shape: self.shape,
            time_embedding_dim: self.time_embedding_dim,
            prior: self.prior.clone(),
            standardizer: self.standardizer.clone(),
            stft: self.stft,
            window_len: self.window_len,
            sample_rate_hz: self.sample_rate_hz,
        };
        let file = std::fs::File::create(dir.join(format!("{name}.schedule.json")))?;
        serde_json::to_writer_pretty(file, &side)?;
        Ok(())
    }

    pub fn load(dir: &Path, name: &str) -> Result<Self> {
        let denoiser = DenseNet::load_json(&dir.join(format!("{name}.json")))?;
        let file = std::fs::File::open(dir.join(format!("{name}.schedule.json")))?;
        let side: ModelSidecar = serde_json::from_reader(std::io::BufReader::new(file))?;
        let schedule = make_linear_schedule(
            side.shape.channels,
            side.steps,
            &side.beta_start,
            &side.beta_end,
        )?;
        if denoiser.input_dim() != side.shape.dim() + side.time_embedding_dim
            || denoiser.output_dim() != side.shape.dim()
        {
            return Err(Error::DimensionMismatch {
                expected: side.shape.dim(),
                got: denoiser.output_dim(),
            });
        }
        if side.prior.as_ref().is_some_and(|p| p.mean.len() != side.shape.dim()) {
            return Err(Error::DimensionMismatch {
                expected: side.shape.dim(),
                got: side.prior.map_or(0, |p| p.mean.len()),
            });
        }
        Ok(Self {
            denoiser,
            prior: side.prior,
            schedule,
            shape: side.shape,
            time_embedding_dim: side.time_embedding_dim,
            standardizer: side.standardizer,
            stft: side.stft,
            window_len: side.window_len,
            sample_rate_hz: side.sample_rate_hz,
        })
    }
}

/// Schedule and data-layout parameters stored next to the denoiser weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub steps: usize,
    pub beta_start: Vec<f64>,
    pub beta_end: Vec<f64>,
    pub shape: DataShape,
    pub time_embedding_dim: usize,
    #[serde(default)]
    pub prior: Option<GaussianPrior>,
    pub standardizer: Standardizer,
    pub stft: StftConfig,
    pub window_len: usize,
    pub sample_rate_hz: f64,
}

fn diffuse_into(
    x0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    per_channel: usize,
    rng: &mut ChaCha8Rng,
    xt: &mut [f64],
    noise: &mut [f64],
) {
    for (i, (&x, (out, eps))) in x0.iter().zip(xt.iter_mut().zip(noise.iter_mut())).enumerate() {
        let ab = schedule.alpha_bar(i / per_channel, t);
        let z: f64 = rng.sample(StandardNormal);
        *eps = z;
        *out = ab.sqrt() * x + (1.0 - ab).sqrt() * z;
    }
}

/// `x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps`, per channel.
pub fn forward_diffuse(
    x0: &[f64],
    t: usize,
    schedule: &NoiseSchedule,
    shape: &DataShape,
    noise_seed: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    schedule.check_step(t)?;
    if x0.len() != shape.dim() || shape.channels != schedule.channels() {
        return Err(Error::DimensionMismatch {
            expected: shape.dim(),
            got: x0.len(),
        });
    }
    let mut rng = seeded_rng(noise_seed, &[0xf0d, t as u64]);
    let mut xt = vec![0.0; x0.len()];
    let mut noise = vec![0.0; x0.len()];
    diffuse_into(x0, t, schedule, shape.per_channel(), &mut rng, &mut xt, &mut noise);
    Ok((xt, noise))
}

/// One pass over the training tensors; returns the mean noise-prediction MSE.
pub fn train_epoch(
    model: &mut DiffusionModel,
    data: ArrayView2<'_, f64>,
    opt: &mut OptimizerState<f64>,
    cfg: &DiffusionConfig,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    if data.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let d = model.shape.dim();
    if data.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: data.ncols(),
        });
    }
    let mut rng = seeded_rng(seed, &[0x7ea1, epoch as u64]);
    let mut order: Vec<usize> = (0..data.nrows())
        .flat_map(|i| std::iter::repeat_n(i, cfg.repeats_per_epoch.max(1)))
        .collect();
    order.shuffle(&mut rng);
    let steps = model.schedule.steps();
    let per_channel = model.shape.per_channel();
    let mut total = 0.0;
    for batch in order.chunks(cfg.batch_size.max(1)) {
        let n = batch.len();
        let mut xt = Array2::zeros((n, d));
        let mut eps = Array2::zeros((n, d));
        let mut ts = Vec::with_capacity(n);
        for (r, &i) in batch.iter().enumerate() {
            let t = rng.random_range(1..=steps);
            ts.push(t);
            diffuse_into(
                data.row(i).as_slice().expect("standard layout"),
                t,
                &model.schedule,
                per_channel,
                &mut rng,
                xt.row_mut(r).into_slice().expect("standard layout"),
                eps.row_mut(r).into_slice().expect("standard layout"),
            );
        }
        let input = model.denoiser_input(xt.view(), &ts);
        let (mut pred, cache) = model.denoiser.forward(input.view())?;
        model.add_prior(xt.view(), &ts, &mut pred);
        let diff = pred - &eps;
        let count = (n * d) as f64;
        let loss = diff.iter().map(|v| v * v).sum::<f64>() / count;
        if !loss.is_finite() {
            return Err(Error::Diverged("training loss"));
        }
        total += loss * n as f64;
        let grad = diff * (2.0 / count);
        let grads = model.denoiser.param_gradients(&cache, grad.view())?;
        opt.step(&mut model.denoiser, &grads)?;
    }
    Ok(total / order.len() as f64)
}

/// An in-progress reverse-diffusion run over a batch.
#[derive(Debug, Clone)]
pub struct SamplingRun {
    /// Standardised stacked tensors, `batch x dim`.
    pub state: Array2<f64>,
    /// Denoising steps applied so far.
    pub step: usize,
    pub total_steps: usize,
    pub finished: bool,
    rng: ChaCha8Rng,
}

impl SamplingRun {
    pub fn batch(&self) -> usize {
        self.state.nrows()
    }

    /// Diffusion time of the current state (`T` before any step, `0` at the end).
    pub fn current_t(&self) -> usize {
        self.total_steps - self.step
    }
}

pub fn begin_sampling(model: &DiffusionModel, batch: usize, seed: u64) -> Result<SamplingRun> {
    if batch == 0 {
        return Err(Error::config("sampling.batch", "must be >= 1"));
    }
    let mut rng = seeded_rng(seed, &[0x5a3b1e]);
    let state = Array2::from_shape_simple_fn((batch, model.shape.dim()), || {
        rng.sample(StandardNormal)
    });
    Ok(SamplingRun {
        state,
        step: 0,
        total_steps: model.schedule.steps(),
        finished: false,
        rng,
    })
}

/// One ancestral step with `sigma_t^2 = beta_t` and no noise on the last step.
pub fn denoise_step(run: &mut SamplingRun, model: &DiffusionModel) -> Result<()> {
    if run.finished {
        return Err(Error::SamplingFinished);
    }
    let t = run.current_t();
    let steps = vec![t; run.batch()];
    let eps = model.predict_noise(run.state.view(), &steps)?;
    let per_channel = model.shape.per_channel();
    let channels = model.shape.channels;
    let coef: Vec<(f64, f64, f64)> = (0..channels)
        .map(|c| {
            let beta = model.schedule.beta(c, t);
            let alpha = model.schedule.alpha(c, t);
            let ab = model.schedule.alpha_bar(c, t);
            (beta / (1.0 - ab).sqrt(), 1.0 / alpha.sqrt(), beta.sqrt())
        })
        .collect();
    for (mut x, e) in run.state.axis_iter_mut(Axis(0)).zip(eps.axis_iter(Axis(0))) {
        for (i, (xv, &ev)) in x.iter_mut().zip(e.iter()).enumerate() {
            let (k, inv_sqrt_alpha, sigma) = coef[model.channel_of(i).min(channels - 1)];
            let mut next = (*xv - k * ev) * inv_sqrt_alpha;
            if t > 1 {
                let z: f64 = run.rng.sample(StandardNormal);
                next += sigma * z;
            }
            *xv = next;
        }
    }
    debug_assert_eq!(per_channel * channels, model.shape.dim());
    if run.state.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged("sampling state"));
    }
    run.step += 1;
    run.finished = run.step == run.total_steps;
    Ok(())
}

/// Runs the reverse chain to the end.
pub fn sample(model: &DiffusionModel, batch: usize, seed: u64) -> Result<SamplingRun> {
    let mut run = begin_sampling(model, batch, seed)?;
    while !run.finished {
        denoise_step(&mut run, model)?;
    }
    Ok(run)
}

/// De-standardises stacked tensors and inverts the STFT of every row.
pub fn spectro_to_windows(
    state: ArrayView2<'_, f64>,
    model: &DiffusionModel,
) -> Result<Vec<TimeWindow<f64>>> {
    state
        .rows()
        .into_iter()
        .map(|row| {
            let mut v = row.to_vec();
            model.standardizer.invert(&mut v);
            let spec = tensor_to_spectrogram(
                &v,
                &model.shape,
                &model.stft,
                model.window_len,
                model.sample_rate_hz,
            )?;
            istft(&spec)
        })
        .collect()
}
