//! Flat `key = value` run configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use diffmon::eval::{ExperimentConfig, SetKind};
use diffmon::gak::{CalibrationStatistic, GridSpacing};
use diffmon::monitor::Aggregation;
use diffmon::signal::{SynthClass, SynthConfig};
use diffmon::similarity::MetricKind;

pub const CONFIG_FILE: &str = "resolved.conf";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    fn name(self) -> &'static str {
        match self {
            Preset::Desk => "desk",
            Preset::Paper => "paper",
        }
    }
}

impl FromStr for Preset {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => bail!("expected `desk` or `paper`"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    pub synth: SynthConfig,
    pub experiment: ExperimentConfig,
    /// Batch size of `sample`.
    pub sample_batch: usize,
    /// Attach the denoising monitor in `sample`.
    pub sample_monitor: bool,
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Desk => Self {
                preset,
                data_dir: "data".into(),
                out_dir: "runs".into(),
                synth: SynthConfig {
                    participants: 4,
                    ..SynthConfig::four_class()
                },
                experiment: ExperimentConfig::desk(),
                sample_batch: 128,
                sample_monitor: false,
            },
            Preset::Paper => Self {
                preset,
                synth: SynthConfig {
                    participants: 12,
                    ..SynthConfig::four_class()
                },
                experiment: ExperimentConfig::paper(),
                sample_batch: 15_360,
                ..Self::preset(Preset::Desk)
            },
        }
    }

    /// Builds a config from `key = value` pairs. The last `preset` wins and is
    /// applied first; every other key then overrides it in order.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        let mut preset = Preset::Desk;
        for (k, v) in pairs {
            if k == "preset" {
                preset = v.parse().with_context(|| format!("invalid value for `preset`: `{v}`"))?;
            }
        }
        let mut cfg = Self::preset(preset);
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Writes the resolved config into `dir` as [`CONFIG_FILE`].
    pub fn save_into(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(CONFIG_FILE);
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.validate().map_err(|e| anyhow!(e))?;
        self.experiment.diffusion.schedule(self.synth.channels).map_err(|e| anyhow!(e))?;
        if self.sample_batch == 0 {
            bail!("invalid value for `sample.batch`: must be >= 1");
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let s = &self.synth;
        let e = &self.experiment;
        let d = &e.diffusion;
        let m = &e.training_monitor;
        Some(match key {
            "preset" => self.preset.name().into(),
            "data_dir" => self.data_dir.display().to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            "seed" => e.seed.to_string(),
            "synth.classes" => render_classes(&s.classes),
            "synth.participants" => s.participants.to_string(),
            "synth.windows_per_participant" => s.windows_per_participant.to_string(),
            "synth.channels" => s.channels.to_string(),
            "synth.sample_rate_hz" => s.sample_rate_hz.to_string(),
            "synth.noise_level" => s.noise_level.to_string(),
            "synth.amplitude_jitter" => s.amplitude_jitter.to_string(),
            "synth.frequency_jitter" => s.frequency_jitter.to_string(),
            "synth.seed" => s.seed.to_string(),
            "window.width" => s.window.width.to_string(),
            "window.overlap" => s.window.overlap.to_string(),
            "diffusion.steps" => d.steps.to_string(),
            "diffusion.beta_start" => join(&d.beta_start),
            "diffusion.beta_end" => join(&d.beta_end),
            "diffusion.hidden" => join(&d.hidden),
            "diffusion.time_embedding_dim" => d.time_embedding_dim.to_string(),
            "diffusion.learning_rate" => d.learning_rate.to_string(),
            "diffusion.repeats_per_epoch" => d.repeats_per_epoch.to_string(),
            "diffusion.batch_size" => d.batch_size.to_string(),
            "diffusion.gaussian_skip" => d.gaussian_skip.to_string(),
            "stft.window_size" => d.stft.window_size.to_string(),
            "stft.overlap" => d.stft.overlap.to_string(),
            "train.max_epochs" => e.max_epochs.to_string(),
            "monitor.metric" => m.metric.name().into(),
            "monitor.interval_epochs" => m.interval_epochs.to_string(),
            "monitor.probe_batch" => m.probe_batch.to_string(),
            "monitor.patience_probes" => m.patience_probes.to_string(),
            "monitor.gak_fraction_required" => m.gak_fraction_required.to_string(),
            "monitor.gak_requires_both" => m.gak_requires_both.to_string(),
            "monitor.aggregation" => match e.aggregation {
                Aggregation::Max => "max".into(),
                Aggregation::Mean => "mean".into(),
            },
            "denoise.interval_steps" => e.denoise_monitor.interval_steps.to_string(),
            "denoise.consecutive_drops" => e.denoise_monitor.consecutive_drops_to_stop.to_string(),
            "calibration.sigma_min" => e.calibration_grid.sigma_min.to_string(),
            "calibration.sigma_max" => e.calibration_grid.sigma_max.to_string(),
            "calibration.num_points" => e.calibration_grid.num_points.to_string(),
            "calibration.spacing" => match e.calibration_grid.spacing {
                GridSpacing::Log => "log".into(),
                GridSpacing::Linear => "linear".into(),
            },
            "calibration.std_min" => e.calibration.std_range.0.to_string(),
            "calibration.std_max" => e.calibration.std_range.1.to_string(),
            "calibration.statistic" => match e.calibration.statistic {
                CalibrationStatistic::PerTrainMax => "per_train_max".into(),
                CalibrationStatistic::AllPairs => "all_pairs".into(),
            },
            "calibration.median_multiplier" => e.median_multiplier.to_string(),
            "eval.sets" => e.sets.iter().map(|k| k.key()).collect::<Vec<_>>().join(","),
            "eval.participants" => join(&e.participants),
            "eval.classifier_seeds" => join(&e.classifier_seeds),
            "eval.real_per_participant" => e.real_per_participant.to_string(),
            "eval.synthetic_per_model" => e.synthetic_per_model.to_string(),
            "classifier.learning_rate" => e.classifier.learning_rate.to_string(),
            "classifier.max_epochs" => e.classifier.max_epochs.to_string(),
            "classifier.patience" => e.classifier.patience.to_string(),
            "sample.batch" => self.sample_batch.to_string(),
            "sample.monitor" => self.sample_monitor.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_inner(key, value.trim())
            .with_context(|| format!("invalid value for `{key}`: `{value}`"))
    }

    fn set_inner(&mut self, key: &str, v: &str) -> Result<()> {
        let s = &mut self.synth;
        let e = &mut self.experiment;
        let d = &mut e.diffusion;
        let m = &mut e.training_monitor;
        match key {
            "preset" => self.preset = v.parse()?,
            "data_dir" => self.data_dir = v.into(),
            "out_dir" => self.out_dir = v.into(),
            "seed" => e.seed = v.parse()?,
            "synth.classes" => s.classes = parse_classes(v)?,
            "synth.participants" => s.participants = v.parse()?,
            "synth.windows_per_participant" => s.windows_per_participant = v.parse()?,
            "synth.channels" => s.channels = v.parse()?,
            "synth.sample_rate_hz" => s.sample_rate_hz = v.parse()?,
            "synth.noise_level" => s.noise_level = v.parse()?,
            "synth.amplitude_jitter" => s.amplitude_jitter = v.parse()?,
            "synth.frequency_jitter" => s.frequency_jitter = v.parse()?,
            "synth.seed" => s.seed = v.parse()?,
            "window.width" => s.window.width = v.parse()?,
            "window.overlap" => s.window.overlap = v.parse()?,
            "diffusion.steps" => d.steps = v.parse()?,
            "diffusion.beta_start" => d.beta_start = split(v)?,
            "diffusion.beta_end" => d.beta_end = split(v)?,
            "diffusion.hidden" => d.hidden = split(v)?,
            "diffusion.time_embedding_dim" => d.time_embedding_dim = v.parse()?,
            "diffusion.learning_rate" => d.learning_rate = v.parse()?,
            "diffusion.repeats_per_epoch" => d.repeats_per_epoch = v.parse()?,
            "diffusion.batch_size" => d.batch_size = v.parse()?,
            "diffusion.gaussian_skip" => d.gaussian_skip = v.parse()?,
            "stft.window_size" => d.stft.window_size = v.parse()?,
            "stft.overlap" => d.stft.overlap = v.parse()?,
            "train.max_epochs" => e.max_epochs = v.parse()?,
            "monitor.metric" => {
                m.metric = MetricKind::parse(v).ok_or_else(|| anyhow!("unknown metric"))?
            }
            "monitor.interval_epochs" => m.interval_epochs = v.parse()?,
            "monitor.probe_batch" => m.probe_batch = v.parse()?,
            "monitor.patience_probes" => m.patience_probes = v.parse()?,
            "monitor.gak_fraction_required" => m.gak_fraction_required = v.parse()?,
            "monitor.gak_requires_both" => m.gak_requires_both = v.parse()?,
            "monitor.aggregation" => {
                e.aggregation = match v {
                    "max" => Aggregation::Max,
                    "mean" => Aggregation::Mean,
                    _ => bail!("expected `max` or `mean`"),
                }
            }
            "denoise.interval_steps" => e.denoise_monitor.interval_steps = v.parse()?,
            "denoise.consecutive_drops" => e.denoise_monitor.consecutive_drops_to_stop = v.parse()?,
            "calibration.sigma_min" => e.calibration_grid.sigma_min = v.parse()?,
            "calibration.sigma_max" => e.calibration_grid.sigma_max = v.parse()?,
            "calibration.num_points" => e.calibration_grid.num_points = v.parse()?,
            "calibration.spacing" => {
                e.calibration_grid.spacing = match v {
                    "log" => GridSpacing::Log,
                    "linear" => GridSpacing::Linear,
                    _ => bail!("expected `log` or `linear`"),
                }
            }
            "calibration.std_min" => e.calibration.std_range.0 = v.parse()?,
            "calibration.std_max" => e.calibration.std_range.1 = v.parse()?,
            "calibration.statistic" => {
                e.calibration.statistic = match v {
                    "per_train_max" => CalibrationStatistic::PerTrainMax,
                    "all_pairs" => CalibrationStatistic::AllPairs,
                    _ => bail!("expected `per_train_max` or `all_pairs`"),
                }
            }
            "calibration.median_multiplier" => e.median_multiplier = v.parse()?,
            "eval.sets" => {
                e.sets = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| SetKind::parse(s).ok_or_else(|| anyhow!("unknown set `{s}`")))
                    .collect::<Result<_>>()?
            }
            "eval.participants" => e.participants = split(v)?,
            "eval.classifier_seeds" => e.classifier_seeds = split(v)?,
            "eval.real_per_participant" => e.real_per_participant = v.parse()?,
            "eval.synthetic_per_model" => e.synthetic_per_model = v.parse()?,
            "classifier.learning_rate" => e.classifier.learning_rate = v.parse()?,
            "classifier.max_epochs" => e.classifier.max_epochs = v.parse()?,
            "classifier.patience" => e.classifier.patience = v.parse()?,
            "sample.batch" => self.sample_batch = v.parse()?,
            "sample.monitor" => self.sample_monitor = v.parse()?,
            _ => bail!("unknown config key"),
        }
        Ok(())
    }
}

pub const KEYS: &[&str] = &[
    "preset",
    "data_dir",
    "out_dir",
    "seed",
    "synth.classes",
    "synth.participants",
    "synth.windows_per_participant",
    "synth.channels",
    "synth.sample_rate_hz",
    "synth.noise_level",
    "synth.amplitude_jitter",
    "synth.frequency_jitter",
    "synth.seed",
    "window.width",
    "window.overlap",
    "diffusion.steps",
    "diffusion.beta_start",
    "diffusion.beta_end",
    "diffusion.hidden",
    "diffusion.time_embedding_dim",
    "diffusion.learning_rate",
    "diffusion.repeats_per_epoch",
    "diffusion.batch_size",
    "diffusion.gaussian_skip",
    "stft.window_size",
    "stft.overlap",
    "train.max_epochs",
    "monitor.metric",
    "monitor.interval_epochs",
    "monitor.probe_batch",
    "monitor.patience_probes",
    "monitor.gak_fraction_required",
    "monitor.gak_requires_both",
    "monitor.aggregation",
    "denoise.interval_steps",
    "denoise.consecutive_drops",
    "calibration.sigma_min",
    "calibration.sigma_max",
    "calibration.num_points",
    "calibration.spacing",
    "calibration.std_min",
    "calibration.std_max",
    "calibration.statistic",
    "calibration.median_multiplier",
    "eval.sets",
    "eval.participants",
    "eval.classifier_seeds",
    "eval.real_per_participant",
    "eval.synthetic_per_model",
    "classifier.learning_rate",
    "classifier.max_epochs",
    "classifier.patience",
    "sample.batch",
    "sample.monitor",
];

/// Splits `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_pair(line).with_context(|| format!("line {}", i + 1))?);
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("expected `key=value`, got `{s}`"))?;
    let key = k.trim();
    if key.is_empty() {
        bail!("empty key in `{s}`");
    }
    if key != "preset" && !KEYS.contains(&key) {
        bail!("unknown config key `{key}`");
    }
    Ok((key.to_string(), v.trim().to_string()))
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn split<T: FromStr>(v: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(Into::into))
        .collect()
}

/// `name:fundamental_hz:h1/h2/...` entries separated by `;`.
fn render_classes(classes: &[SynthClass]) -> String {
    classes
        .iter()
        .map(|c| format!("{}:{}:{}", c.name, c.fundamental_hz, join(&c.harmonics).replace(',', "/")))
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_classes(v: &str) -> Result<Vec<SynthClass>> {
    v.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').collect();
            let [name, f, h] = parts[..] else {
                bail!("class `{entry}` is not `name:hz:h1/h2/..`");
            };
            Ok(SynthClass {
                name: name.trim().to_string(),
                fundamental_hz: f.trim().parse()?,
                harmonics: split(&h.replace('/', ","))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_round_trips() {
        for preset in [Preset::Desk, Preset::Paper] {
            let cfg = RunConfig::preset(preset);
            for key in KEYS {
                let v = cfg.get(key).unwrap();
                let mut copy = cfg.clone();
                copy.set(key, &v).unwrap();
                assert_eq!(copy, cfg, "{key}");
            }
            assert_eq!(RunConfig::parse(&cfg.render()).unwrap(), cfg);
        }
    }

    #[test]
    fn overrides_apply_after_preset() {
        let cfg = RunConfig::parse("train.max_epochs = 7\npreset = paper\n# note\n").unwrap();
        assert_eq!(cfg.preset, Preset::Paper);
        assert_eq!(cfg.experiment.max_epochs, 7);
        assert_eq!(cfg.experiment.diffusion.steps, 3000);
        let edited = RunConfig::parse("synth.classes = A:1.5:1/0.5;B:3:1\nseed = 9").unwrap();
        assert_eq!(edited.synth.classes.len(), 2);
        assert_eq!(edited.synth.classes[0].harmonics, vec![1.0, 0.5]);
        assert_eq!(edited.experiment.seed, 9);
    }

    #[test]
    fn bad_input_names_the_key() {
        let err = RunConfig::parse("nonsense = 1").unwrap_err();
        assert!(format!("{err:#}").contains("unknown config key `nonsense`"));
        let err = RunConfig::parse("train.max_epochs = many").unwrap_err();
        assert!(format!("{err:#}").contains("`train.max_epochs`"));
        let err = RunConfig::parse("monitor.interval_epochs = 0").unwrap_err();
        assert!(format!("{err:#}").contains("interval"));
        assert!(RunConfig::parse("just text").is_err());
    }
}
