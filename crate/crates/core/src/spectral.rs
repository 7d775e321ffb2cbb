//! Hann windowing, STFT with weighted overlap-add inversion, and Welch's
//! averaged-periodogram PSD estimate.

use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::TimeWindow;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowFn {
    #[default]
    Hanning,
}

impl WindowFn {
    pub fn coefficients<T: Real>(self, n: usize) -> Result<Vec<T>> {
        match self {
            WindowFn::Hanning => hanning(n),
        }
    }
}

/// Symmetric Hann window, `w[k] = 0.5 (1 - cos(2 pi k / (n - 1)))`.
pub fn hanning<T: Real>(n: usize) -> Result<Vec<T>> {
    match n {
        0 => Err(Error::config("window length", "must be >= 1")),
        1 => Ok(vec![T::one()]),
        _ => {
            let denom = (n - 1) as f64;
            Ok((0..n)
                .map(|k| {
                    // mirror the upper half so the window is exactly symmetric
                    let k = k.min(n - 1 - k) as f64;
                    T::of(0.5 * (1.0 - (std::f64::consts::TAU * k / denom).cos()))
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_size: usize,
    pub overlap: usize,
    pub window_fn: WindowFn,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_size: 22,
            overlap: 20,
            window_fn: WindowFn::Hanning,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(Error::config("stft.window_size", "must be >= 1"));
        }
        if self.overlap >= self.window_size {
            return Err(Error::config("stft.overlap", "must be smaller than the window"));
        }
        Ok(())
    }

    pub fn hop(&self) -> usize {
        self.window_size - self.overlap
    }

    pub fn freq_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    pub fn num_frames(&self, len: usize) -> usize {
        if len < self.window_size {
            0
        } else {
            (len - self.window_size) / self.hop() + 1
        }
    }
}

/// One-sided STFT, `channels x freq_bins x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub frames: Array3<Complex<T>>,
    pub cfg: StftConfig,
    pub original_len: usize,
    pub sample_rate_hz: f64,
}

impl<T: Real> Spectrogram<T> {
    pub fn channels(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn freq_bins(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn num_frames(&self) -> usize {
        self.frames.shape()[2]
    }

    /// Bin centre frequencies in Hz.
    pub fn freq_axis(&self) -> Vec<f64> {
        (0..self.freq_bins())
            .map(|k| k as f64 * self.sample_rate_hz / self.cfg.window_size as f64)
            .collect()
    }
}

pub fn stft<T: Real>(x: &TimeWindow<T>, cfg: &StftConfig) -> Result<Spectrogram<T>> {
    cfg.validate()?;
    let n = x.timesteps();
    let w = cfg.window_size;
    if w > n {
        return Err(Error::WindowTooLong { window: w, len: n });
    }
    let window: Vec<T> = cfg.window_fn.coefficients(w)?;
    let fft = FftPlanner::<T>::new().plan_fft_forward(w);
    let frames = cfg.num_frames(n);
    let bins = cfg.freq_bins();
    let mut out = Array3::from_elem((x.channels(), bins, frames), Complex::new(T::zero(), T::zero()));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); w];
    for c in 0..x.channels() {
        let row = x.channel(c);
        for f in 0..frames {
            let start = f * cfg.hop();
            for (m, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(row[start + m] * window[m], T::zero());
            }
            fft.process(&mut buf);
            for k in 0..bins {
                out[[c, k, f]] = buf[k];
            }
        }
    }
    Ok(Spectrogram {
        frames: out,
        cfg: *cfg,
        original_len: n,
        sample_rate_hz: x.sample_rate_hz(),
    })
}

/// Weighted overlap-add inverse of [`stft`], normalised by the summed
/// squared window. The first and last covered samples may carry zero window
/// energy (symmetric Hann endpoints); they are reconstructed as zero. Any
/// other zero-energy sample is a COLA violation.
pub fn istft<T: Real>(s: &Spectrogram<T>) -> Result<TimeWindow<T>> {
    s.cfg.validate()?;
    let w = s.cfg.window_size;
    let hop = s.cfg.hop();
    let frames = s.num_frames();
    if s.freq_bins() != s.cfg.freq_bins() {
        return Err(Error::DimensionMismatch {
            expected: s.cfg.freq_bins(),
            got: s.freq_bins(),
        });
    }
    if frames == 0 {
        return Err(Error::EmptySequence);
    }
    let covered = (frames - 1) * hop + w;
    if s.original_len > covered || s.original_len == 0 {
        return Err(Error::LengthMismatch {
            left: s.original_len,
            right: covered,
        });
    }
    let window: Vec<T> = s.cfg.window_fn.coefficients(w)?;
    let mut energy = vec![T::zero(); covered];
    for f in 0..frames {
        for (m, &wm) in window.iter().enumerate() {
            energy[f * hop + m] += wm * wm;
        }
    }
    for (pos, &e) in energy.iter().enumerate().take(s.original_len) {
        if e <= T::zero() && pos != 0 && pos != covered - 1 {
            return Err(Error::ColaViolation { position: pos });
        }
    }

    let ifft = FftPlanner::<T>::new().plan_fft_inverse(w);
    let scale = T::one() / T::of(w as f64);
    let bins = s.freq_bins();
    let mut out = Array2::zeros((s.channels(), s.original_len));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); w];
    let mut acc = vec![T::zero(); covered];
    for c in 0..s.channels() {
        acc.iter_mut().for_each(|v| *v = T::zero());
        for f in 0..frames {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = if k < bins {
                    s.frames[[c, k, f]]
                } else {
                    s.frames[[c, w - k, f]].conj()
                };
            }
            ifft.process(&mut buf);
            for m in 0..w {
                acc[f * hop + m] += window[m] * buf[m].re * scale;
            }
        }
        for n in 0..s.original_len {
            if energy[n] > T::zero() {
                out[[c, n]] = acc[n] / energy[n];
            }
        }
    }
    TimeWindow::new(out, s.sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PsdScaling {
    /// `|DFT|^2 / M`, averaged over segments.
    #[default]
    Periodogram,
    /// Power per Hz, `|DFT|^2 / (fs * sum w^2)`; integrates to mean power.
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Defaults to half the (clamped) segment length.
    pub overlap: Option<usize>,
    /// Shrink `segment_len` to the signal length instead of failing.
    pub clamp_to_signal: bool,
    pub window_fn: WindowFn,
    pub scaling: PsdScaling,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_len: 64,
            overlap: None,
            clamp_to_signal: true,
            window_fn: WindowFn::Hanning,
            scaling: PsdScaling::Periodogram,
        }
    }
}

impl WelchConfig {
    /// `(segment length, overlap)` actually used for a signal of `len` samples.
    pub fn resolve(&self, len: usize) -> Result<(usize, usize)> {
        if self.segment_len == 0 {
            return Err(Error::config("welch.segment_len", "must be >= 1"));
        }
        let m = if self.clamp_to_signal {
            self.segment_len.min(len)
        } else {
            self.segment_len
        };
        if m > len || m == 0 {
            return Err(Error::WindowTooLong { window: m, len });
        }
        let overlap = self.overlap.unwrap_or(m / 2);
        if overlap >= m {
            return Err(Error::config("welch.overlap", "must be smaller than the segment"));
        }
        Ok((m, overlap))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PsdVector<T> {
    pub power: Vec<T>,
    pub freq_axis: Vec<T>,
}

/// Welch PSD, one vector per channel, one-sided with doubled interior bins.
pub fn welch_psd<T: Real>(x: &TimeWindow<T>, cfg: &WelchConfig) -> Result<Vec<PsdVector<T>>> {
    let n = x.timesteps();
    let (m, overlap) = cfg.resolve(n)?;
    let hop = m - overlap;
    let segments = (n - m) / hop + 1;
    let window: Vec<T> = cfg.window_fn.coefficients(m)?;
    let fs = x.sample_rate_hz();
    let norm = match cfg.scaling {
        PsdScaling::Periodogram => T::of(m as f64),
        PsdScaling::Density => T::of(fs) * window.iter().map(|&w| w * w).sum::<T>(),
    };
    let bins = m / 2 + 1;
    let fft = FftPlanner::<T>::new().plan_fft_forward(m);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); m];
    let freq_axis: Vec<T> = (0..bins).map(|k| T::of(k as f64 * fs / m as f64)).collect();
    let two = T::of(2.0);
    let k_segments = T::of(segments as f64);

    (0..x.channels())
        .map(|c| {
            let row = x.channel(c);
            let mut power = vec![T::zero(); bins];
            for s in 0..segments {
                let start = s * hop;
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex::new(row[start + i] * window[i], T::zero());
                }
                fft.process(&mut buf);
                for (k, p) in power.iter_mut().enumerate() {
                    *p += buf[k].norm_sqr();
                }
            }
            for (k, p) in power.iter_mut().enumerate() {
                *p = *p / norm / k_segments;
                let nyquist = m % 2 == 0 && k == m / 2;
                if k != 0 && !nyquist {
                    *p *= two;
                }
            }
            Ok(PsdVector {
                power,
                freq_axis: freq_axis.clone(),
            })
        })
        .collect()
}

/// Per-channel PSD power vectors, the form the similarity metrics consume.
pub fn psd_axes<T: Real>(x: &TimeWindow<T>, cfg: &WelchConfig) -> Result<Vec<Vec<T>>> {
    Ok(welch_psd(x, cfg)?.into_iter().map(|p| p.power).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synth_activity_dataset, SynthClass, SynthConfig};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn window_from(rows: Vec<Vec<f64>>) -> TimeWindow<f64> {
        let n = rows[0].len();
        let c = rows.len();
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        TimeWindow::new(Array2::from_shape_vec((c, n), flat).unwrap(), 50.0).unwrap()
    }

    fn noise(channels: usize, n: usize, seed: u64) -> TimeWindow<f64> {
        let mut rng = crate::seeded_rng(seed, &[]);
        let rows = (0..channels)
            .map(|_| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        window_from(rows)
    }

    fn tone(freq: f64, n: usize) -> TimeWindow<f64> {
        window_from(vec![(0..n)
            .map(|t| (std::f64::consts::TAU * freq * t as f64 / 50.0).sin())
            .collect()])
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
            .0
    }

    #[test]
    fn hanning_values() {
        let w: Vec<f64> = hanning(3).unwrap();
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
        let w: Vec<f64> = hanning(4).unwrap();
        for (a, b) in w.iter().zip([0.0, 0.75, 0.75, 0.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(hanning::<f64>(1).unwrap(), vec![1.0]);
        assert!(hanning::<f64>(0).is_err());
        let w: Vec<f32> = hanning(22).unwrap();
        for k in 0..22 {
            assert_eq!(w[k], w[21 - k]);
        }
    }

    #[test]
    fn stft_frame_count_and_zero_input() {
        let x = TimeWindow::<f64>::zeros(2, 160, 50.0).unwrap();
        let s = stft(&x, &StftConfig::default()).unwrap();
        assert_eq!(s.num_frames(), 70);
        assert_eq!(s.freq_bins(), 12);
        assert!(s.frames.iter().all(|z| z.norm() == 0.0));
        let back = istft(&s).unwrap();
        assert!(back.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stft_tone_peaks_at_nearest_bin() {
        let s = stft(&tone(5.0, 160), &StftConfig::default()).unwrap();
        let axis = s.freq_axis();
        let nearest = argmax(&axis.iter().map(|f| -(f - 5.0).abs()).collect::<Vec<_>>());
        for f in 0..s.num_frames() {
            let mags: Vec<f64> = (0..s.freq_bins()).map(|k| s.frames[[0, k, f]].norm()).collect();
            assert_eq!(argmax(&mags), nearest);
        }
    }

    #[test]
    fn stft_rejects_short_signal() {
        let x = TimeWindow::<f64>::zeros(1, 10, 50.0).unwrap();
        assert!(matches!(
            stft(&x, &StftConfig::default()),
            Err(Error::WindowTooLong { .. })
        ));
    }

    #[test]
    fn istft_round_trip_interior() {
        for seed in 0..10 {
            let x = noise(3, 160, seed);
            let back = istft(&stft(&x, &StftConfig::default()).unwrap()).unwrap();
            for c in 0..3 {
                for t in 1..159 {
                    assert!((x.channel(c)[t] - back.channel(c)[t]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn istft_rejects_uncovered_length() {
        let mut s = stft(&noise(1, 160, 1), &StftConfig::default()).unwrap();
        s.original_len = 200;
        assert!(matches!(istft(&s), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn istft_detects_cola_violation() {
        let cfg = StftConfig {
            window_size: 8,
            overlap: 0,
            window_fn: WindowFn::Hanning,
        };
        let s = stft(&noise(1, 32, 2), &cfg).unwrap();
        assert!(matches!(istft(&s), Err(Error::ColaViolation { position: 7 })));
    }

    #[test]
    fn welch_tone_at_bin_centre() {
        // bin 5 of a 64-point segment at 50 Hz
        let f = 5.0 * 50.0 / 64.0;
        let psd = welch_psd(&tone(f, 512), &WelchConfig::default()).unwrap();
        assert_eq!(argmax(&psd[0].power), 5);
        assert_eq!(psd[0].power.len(), 33);
        assert!((psd[0].freq_axis[5] - f).abs() < 1e-12);
    }

    #[test]
    fn welch_parseval_with_density_scaling() {
        let x = noise(1, 4096, 3);
        let cfg = WelchConfig {
            scaling: PsdScaling::Density,
            ..WelchConfig::default()
        };
        let psd = welch_psd(&x, &cfg).unwrap();
        let df = 50.0 / 64.0;
        let integral: f64 = psd[0].power.iter().sum::<f64>() * df;
        let mean_power = x.channel(0).iter().map(|v| v * v).sum::<f64>() / 4096.0;
        assert!((integral / mean_power - 1.0).abs() < 0.05, "{integral} vs {mean_power}");
    }

    #[test]
    fn welch_amplitude_doubling_is_exact() {
        let x = noise(2, 300, 4);
        let doubled = TimeWindow::new(x.data().mapv(|v| 2.0 * v), 50.0).unwrap();
        let a = welch_psd(&x, &WelchConfig::default()).unwrap();
        let b = welch_psd(&doubled, &WelchConfig::default()).unwrap();
        for (pa, pb) in a.iter().zip(&b) {
            for (u, v) in pa.power.iter().zip(&pb.power) {
                assert_eq!(*v, 4.0 * u);
            }
        }
    }

    #[test]
    fn welch_variance_shrinks_with_more_segments() {
        let cv = |n: usize, seed: u64| {
            let p = &welch_psd(&noise(1, n, seed), &WelchConfig::default()).unwrap()[0].power;
            let inner = &p[1..p.len() - 1];
            let mean = inner.iter().sum::<f64>() / inner.len() as f64;
            let var = inner.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / inner.len() as f64;
            var.sqrt() / mean
        };
        for seed in [10, 11] {
            let short = cv(160, seed);
            let long = cv(16384, seed);
            assert!(long < short, "{long} !< {short}");
            assert!(long < 0.2);
        }
    }

    #[test]
    fn welch_shift_invariance_for_long_tone() {
        let f = 7.0 * 50.0 / 64.0;
        let x = tone(f, 4096);
        let base = welch_psd(&x, &WelchConfig::default()).unwrap();
        let peak = base[0].power.iter().cloned().fold(0.0, f64::max);
        for shift in [32usize, 96, 640] {
            let row = x.channel(0);
            let shifted: Vec<f64> = (0..4096).map(|t| row[(t + 4096 - shift) % 4096]).collect();
            let p = welch_psd(&window_from(vec![shifted]), &WelchConfig::default()).unwrap();
            for (a, b) in base[0].power.iter().zip(&p[0].power) {
                if *a > 1e-6 * peak {
                    assert!(((a - b) / a).abs() < 0.1);
                }
            }
        }
    }

    #[test]
    fn welch_segment_clamping() {
        let x = noise(1, 40, 5);
        let psd = welch_psd(&x, &WelchConfig::default()).unwrap();
        assert_eq!(psd[0].power.len(), 21);
        let strict = WelchConfig {
            clamp_to_signal: false,
            ..WelchConfig::default()
        };
        assert!(matches!(welch_psd(&x, &strict), Err(Error::WindowTooLong { .. })));
    }

    #[test]
    fn noiseless_synth_psd_peaks_at_fundamental() {
        for (f0, name) in [(1.6, "a"), (3.1, "b"), (6.25, "c")] {
            let cfg = SynthConfig {
                classes: vec![SynthClass {
                    name: name.into(),
                    fundamental_hz: f0,
                    harmonics: vec![1.0, 0.4, 0.2],
                }],
                participants: 2,
                windows_per_participant: 2,
                noise_level: 0.0,
                frequency_jitter: 0.0,
                ..SynthConfig::four_class()
            };
            let ds = synth_activity_dataset(&cfg).unwrap();
            for w in ds.windows() {
                for p in welch_psd(&w.window, &WelchConfig::default()).unwrap() {
                    let k = argmax(&p.power);
                    assert!((p.freq_axis[k] - f0).abs() <= 50.0 / 64.0 / 2.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn f32_welch_matches_f64() {
        let x = noise(1, 160, 6);
        let x32 = TimeWindow::new(x.data().mapv(|v| v as f32), 50.0).unwrap();
        let a = welch_psd(&x, &WelchConfig::default()).unwrap();
        let b = welch_psd(&x32, &WelchConfig::default()).unwrap();
        for (u, v) in a[0].power.iter().zip(&b[0].power) {
            assert!((u - *v as f64).abs() <= 1e-4 * (1.0 + u.abs()));
        }
    }

    proptest! {
        #[test]
        fn welch_is_non_negative(values in proptest::collection::vec(-1e3f64..1e3, 64..300)) {
            let x = window_from(vec![values]);
            for p in welch_psd(&x, &WelchConfig::default()).unwrap() {
                prop_assert!(p.power.iter().all(|v| *v >= 0.0 && v.is_finite()));
            }
        }
    }
}
