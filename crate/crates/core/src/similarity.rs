//! Vector similarity scores and their multi-axis aggregation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gak::{self, GakParams};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    CosinePsd,
    CosineTime,
    Pearson,
    Rmse,
    COptGak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    Time,
    Psd,
}

impl MetricKind {
    pub const ALL: [MetricKind; 5] = [
        MetricKind::CosinePsd,
        MetricKind::CosineTime,
        MetricKind::Pearson,
        MetricKind::Rmse,
        MetricKind::COptGak,
    ];

    /// Metrics that drive the early-stopping monitors.
    pub const MONITORED: [MetricKind; 3] =
        [MetricKind::COptGak, MetricKind::CosinePsd, MetricKind::CosineTime];

    pub fn domain(self) -> Domain {
        match self {
            MetricKind::CosineTime => Domain::Time,
            _ => Domain::Psd,
        }
    }

    /// Whether larger scores mean more similar.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::Rmse)
    }

    pub fn is_symmetric(self) -> bool {
        true
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::CosinePsd => "cosine_psd",
            MetricKind::CosineTime => "cosine_time",
            MetricKind::Pearson => "pearson",
            MetricKind::Rmse => "rmse",
            MetricKind::COptGak => "copt_gak",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Extra parameters some metrics need.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreParams<T> {
    pub gak: Option<GakParams<T>>,
}

impl<T: Real> ScoreParams<T> {
    pub fn with_sigma(sigma: T) -> Self {
        Self {
            gak: Some(GakParams::new(sigma)),
        }
    }
}

fn check_len<T>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

pub fn cosine<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_len(x, y)?;
    let (mut dot, mut xx, mut yy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        dot += a * b;
        xx += a * a;
        yy += b * b;
    }
    if xx <= T::zero() || yy <= T::zero() {
        return Err(Error::UndefinedCosine);
    }
    let s = dot / (xx.sqrt() * yy.sqrt());
    if !s.is_finite() {
        return Err(Error::NonFinite("cosine"));
    }
    Ok(s.max(-T::one()).min(T::one()))
}

/// Pearson correlation in its raw-sum form.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_len(x, y)?;
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation);
    }
    // centre first: the raw-sum formula is algebraically identical but
    // cancels badly for large offsets
    let n = T::of(x.len() as f64);
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Err(Error::UndefinedCorrelation);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    if !r.is_finite() {
        return Err(Error::NonFinite("pearson"));
    }
    Ok(r.max(-T::one()).min(T::one()))
}

pub fn rmse<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    check_len(x, y)?;
    let sum: T = x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok((sum / T::of(x.len() as f64)).sqrt())
}

/// Score of one axis pair under `metric`.
pub fn axis_score<T: Real>(
    x: &[T],
    y: &[T],
    metric: MetricKind,
    params: &ScoreParams<T>,
) -> Result<T> {
    match metric {
        MetricKind::CosinePsd | MetricKind::CosineTime => cosine(x, y),
        MetricKind::Pearson => pearson(x, y),
        MetricKind::Rmse => rmse(x, y),
        MetricKind::COptGak => {
            let p = params
                .gak
                .ok_or_else(|| Error::config("gak.sigma", "C-Opt GAK needs a sigma"))?;
            gak::gak_normalized(x, y, &p)
        }
    }
}

/// Unweighted mean of the per-axis scores.
pub fn multi_axis_score<T: Real, A: AsRef<[T]>>(
    a: &[A],
    b: &[A],
    metric: MetricKind,
    params: &ScoreParams<T>,
) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::AxisMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut total = T::zero();
    for (x, y) in a.iter().zip(b) {
        total += axis_score(x.as_ref(), y.as_ref(), metric, params)?;
    }
    Ok(total / T::of(a.len() as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix<T> {
    pub scores: Array2<T>,
    pub metric: MetricKind,
    pub domain: Domain,
}

/// Pairwise multi-axis scores, `A.len() x B.len()`.
pub fn score_matrix<T: Real, A: AsRef<[T]>>(
    a: &[Vec<A>],
    b: &[Vec<A>],
    metric: MetricKind,
    params: &ScoreParams<T>,
) -> Result<ScoreMatrix<T>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut scores = Array2::zeros((a.len(), b.len()));
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            scores[[i, j]] = multi_axis_score(x, y, metric, params).map_err(|e| Error::PairScore {
                i,
                j,
                source: Box::new(e),
            })?;
        }
    }
    Ok(ScoreMatrix {
        scores,
        metric,
        domain: metric.domain(),
    })
}
