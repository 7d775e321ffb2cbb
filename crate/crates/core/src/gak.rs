//! Global alignment kernel.
//!
//! `k(x, y)` sums, over every monotone alignment path between `x` and `y`,
//! the product of the local kernels along the path. The local kernel is
//!
//! ```text
//! kappa(a, b) = e^{-t} / (2 - e^{-t}),   t = |a - b| / (2 sigma^2)
//! ```
//!
//! which lies in `(0, 1]` and equals 1 only for `a == b`. The sum is
//! evaluated by the usual three-neighbour recursion in log space; a
//! path-enumerating oracle is provided for short sequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

/// Sign convention of the local cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KernelConvention {
    /// `kappa = e^{-t} / (2 - e^{-t})`, bounded to `(0, 1]`.
    #[default]
    Bounded,
    /// The cost read with the opposite sign, `kappa = e^{t} (2 - e^{-t}) >= 1`.
    /// Unbounded; kept only for comparison.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GakParams<T> {
    pub sigma: T,
    #[serde(default)]
    pub convention: KernelConvention,
}

impl<T: Real> GakParams<T> {
    pub fn new(sigma: T) -> Self {
        Self {
            sigma,
            convention: KernelConvention::Bounded,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > T::zero()) {
            return Err(Error::config("gak.sigma", "must be finite and > 0"));
        }
        Ok(())
    }
}

fn log_local<T: Real>(a: T, b: T, sigma: T, convention: KernelConvention) -> T {
    let two = T::of(2.0);
    let t = (a - b).abs() / (two * sigma * sigma);
    let e = (-t).exp();
    match convention {
        // -t - ln(2 - e^{-t}); ln(2 - e) >= 0, so the result is finite for finite t
        KernelConvention::Bounded => -t - (two - e).ln(),
        KernelConvention::Literal => t + (two - e).ln(),
    }
}

/// Local kernel between two samples, in `(0, 1]`.
pub fn local_kernel<T: Real>(xi: T, yj: T, sigma: T) -> Result<T> {
    if !xi.is_finite() || !yj.is_finite() {
        return Err(Error::NonFinite("local kernel input"));
    }
    GakParams::new(sigma).validate()?;
    Ok(log_local(xi, yj, sigma, KernelConvention::Bounded).exp())
}

fn check_inputs<T: Real>(x: &[T], y: &[T], params: &GakParams<T>) -> Result<()> {
    params.validate()?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySequence);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gak input"));
    }
    Ok(())
}

fn log_sum_exp3<T: Real>(a: T, b: T, c: T) -> T {
    let m = a.max(b).max(c);
    if m == T::neg_infinity() {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

/// `log k(x, y)` by dynamic programming.
pub fn gak_kernel<T: Real>(x: &[T], y: &[T], params: &GakParams<T>) -> Result<T> {
    check_inputs(x, y, params)?;
    let m = y.len();
    let ninf = T::neg_infinity();
    // rolling rows of log M with a zero border column at index 0
    let mut prev = vec![ninf; m + 1];
    let mut cur = vec![ninf; m + 1];
    prev[0] = T::zero();
    for &xi in x {
        cur[0] = ninf;
        for j in 1..=m {
            let l = log_local(xi, y[j - 1], params.sigma, params.convention);
            cur[j] = l + log_sum_exp3(prev[j], cur[j - 1], prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = ninf;
    }
    Ok(prev[m])
}

const ORACLE_LIMIT: usize = 8;

fn enumerate_paths(
    n: usize,
    m: usize,
    path: &mut Vec<(usize, usize)>,
    visit: &mut dyn FnMut(&[(usize, usize)]),
) {
    let &(i, j) = path.last().expect("path starts at (0, 0)");
    if i == n - 1 && j == m - 1 {
        visit(path);
        return;
    }
    for (di, dj) in [(1, 0), (0, 1), (1, 1)] {
        if i + di < n && j + dj < m {
            path.push((i + di, j + dj));
            enumerate_paths(n, m, path, visit);
            path.pop();
        }
    }
}

/// Number of monotone alignment paths between sequences of length `n`, `m`,
/// counted by explicit enumeration.
pub fn alignment_path_count(n: usize, m: usize) -> Result<u64> {
    if n == 0 || m == 0 {
        return Err(Error::EmptySequence);
    }
    if n > ORACLE_LIMIT || m > ORACLE_LIMIT {
        return Err(Error::OracleLimit { n, m });
    }
    let mut count = 0u64;
    enumerate_paths(n, m, &mut vec![(0, 0)], &mut |_| count += 1);
    Ok(count)
}

/// `k(x, y)` in linear space by enumerating every alignment path. Only for
/// sequences of length at most 8.
pub fn brute_force_gak<T: Real>(x: &[T], y: &[T], params: &GakParams<T>) -> Result<T> {
    check_inputs(x, y, params)?;
    if x.len() > ORACLE_LIMIT || y.len() > ORACLE_LIMIT {
        return Err(Error::OracleLimit {
            n: x.len(),
            m: y.len(),
        });
    }
    let mut total = 0.0f64;
    enumerate_paths(x.len(), y.len(), &mut vec![(0, 0)], &mut |path| {
        total += path
            .iter()
            .map(|&(i, j)| log_local(x[i], y[j], params.sigma, params.convention).as_f64().exp())
            .product::<f64>();
    });
    Ok(T::of(total))
}

/// Normalised kernel from the three log kernels, clamped to `[0, 1]`.
pub fn normalize_log<T: Real>(log_xy: T, log_xx: T, log_yy: T) -> T {
    let half = T::of(0.5);
    (log_xy - half * (log_xx + log_yy)).exp().min(T::one()).max(T::zero())
}

/// `k(x, y) / sqrt(k(x, x) k(y, y))`.
pub fn gak_normalized<T: Real>(x: &[T], y: &[T], params: &GakParams<T>) -> Result<T> {
    let xy = gak_kernel(x, y, params)?;
    let xx = gak_kernel(x, x, params)?;
    let yy = gak_kernel(y, y, params)?;
    Ok(normalize_log(xy, xx, yy))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridSpacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub num_points: usize,
    pub spacing: GridSpacing,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            sigma_min: 0.005,
            sigma_max: 2.0,
            num_points: 120,
            spacing: GridSpacing::Log,
        }
    }
}

impl CalibrationGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return Err(Error::config("gak.grid", "need 0 < sigma_min < sigma_max"));
        }
        if self.num_points < 2 {
            return Err(Error::config("gak.grid.num_points", "must be >= 2"));
        }
        let last = (self.num_points - 1) as f64;
        Ok((0..self.num_points)
            .map(|i| {
                let f = i as f64 / last;
                match self.spacing {
                    GridSpacing::Linear => self.sigma_min + f * (self.sigma_max - self.sigma_min),
                    GridSpacing::Log => {
                        (self.sigma_min.ln() + f * (self.sigma_max.ln() - self.sigma_min.ln())).exp()
                    }
                }
            })
            .collect())
    }
}

/// How train/validation scores are summarised per sigma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CalibrationStatistic {
    /// For each training item, its best score over the validation items.
    #[default]
    PerTrainMax,
    /// Every train/validation pair.
    AllPairs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub std_range: (f64, f64),
    pub statistic: CalibrationStatistic,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            std_range: (0.09, 0.12),
            statistic: CalibrationStatistic::PerTrainMax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub sigma: f64,
    pub mean: f64,
    pub std: f64,
}

/// Result of the sigma search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GakCalibration<T> {
    pub sigma: T,
    #[serde(rename = "mean")]
    pub mean_score: f64,
    #[serde(rename = "std")]
    pub std_score: f64,
    pub range_lo: f64,
    pub range_hi: f64,
    /// No grid point met the std constraint; `sigma` is the point whose std
    /// is closest to the middle of the allowed range.
    pub fallback: bool,
    pub grid: Vec<GridPoint>,
}

impl<T: Real> GakCalibration<T> {
    pub fn target_range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    pub fn params(&self) -> GakParams<T> {
        GakParams::new(self.sigma)
    }
}

/// Multi-axis item: one vector per axis.
pub type Item<T> = Vec<Vec<T>>;

fn self_logs<T: Real>(items: &[Item<T>], params: &GakParams<T>) -> Result<Vec<Vec<T>>> {
    items
        .iter()
        .map(|it| it.iter().map(|a| gak_kernel(a, a, params)).collect())
        .collect()
}

/// Axis-averaged normalised kernel between every train/validation pair,
/// `train.len() x val.len()`.
pub fn pair_scores<T: Real>(
    train: &[Item<T>],
    val: &[Item<T>],
    params: &GakParams<T>,
) -> Result<Vec<Vec<f64>>> {
    let tl = self_logs(train, params)?;
    let vl = self_logs(val, params)?;
    let mut out = vec![vec![0.0; val.len()]; train.len()];
    for (i, x) in train.iter().enumerate() {
        for (j, y) in val.iter().enumerate() {
            if x.len() != y.len() {
                return Err(Error::AxisMismatch {
                    left: x.len(),
                    right: y.len(),
                });
            }
            let mut s = 0.0;
            for a in 0..x.len() {
                let lxy = gak_kernel(&x[a], &y[a], params)?;
                s += normalize_log(lxy, tl[i][a], vl[j][a]).as_f64();
            }
            out[i][j] = s / x.len() as f64;
        }
    }
    Ok(out)
}

/// The sample of scores summarised at one sigma.
pub fn calibration_scores<T: Real>(
    train: &[Item<T>],
    val: &[Item<T>],
    sigma: T,
    statistic: CalibrationStatistic,
) -> Result<Vec<f64>> {
    let pairs = pair_scores(train, val, &GakParams::new(sigma))?;
    Ok(match statistic {
        CalibrationStatistic::PerTrainMax => pairs
            .iter()
            .map(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect(),
        CalibrationStatistic::AllPairs => pairs.into_iter().flatten().collect(),
    })
}

/// Population mean and standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Picks the sigma that maximises the mean train/validation score while the
/// score standard deviation stays within `opts.std_range`.
pub fn calibrate_sigma<T: Real>(
    train: &[Item<T>],
    val: &[Item<T>],
    grid: &CalibrationGrid,
    opts: &CalibrationOptions,
) -> Result<GakCalibration<T>> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (lo, hi) = opts.std_range;
    if !(0.0 <= lo && lo <= hi) {
        return Err(Error::config("gak.std_range", "need 0 <= lo <= hi"));
    }
    let mut points = Vec::new();
    for sigma in grid.points()? {
        let scores = calibration_scores(train, val, T::of(sigma), opts.statistic)?;
        let (mean, std) = mean_std(&scores);
        points.push(GridPoint { sigma, mean, std });
    }
    // grid is ascending, so strict improvement keeps the smaller sigma on ties
    let mut best: Option<&GridPoint> = None;
    for p in points.iter().filter(|p| p.std >= lo && p.std <= hi) {
        if best.is_none_or(|b| p.mean > b.mean + TIE_TOLERANCE) {
            best = Some(p);
        }
    }
    let (chosen, fallback) = match best {
        Some(p) => (*p, false),
        None => {
            let mid = 0.5 * (lo + hi);
            let mut near = points[0];
            for p in &points[1..] {
                if (p.std - mid).abs() < (near.std - mid).abs() - TIE_TOLERANCE {
                    near = *p;
                }
            }
            log::warn!(
                "no sigma meets std in [{lo}, {hi}]; falling back to sigma={} (std={})",
                near.sigma,
                near.std
            );
            (near, true)
        }
    };
    Ok(GakCalibration {
        sigma: T::of(chosen.sigma),
        mean_score: chosen.mean,
        std_score: chosen.std,
        range_lo: (chosen.mean - chosen.std).max(0.0),
        range_hi: (chosen.mean + chosen.std).min(1.0),
        fallback,
        grid: points,
    })
}

pub const SIGMA_FLOOR: f64 = 1e-12;
const MEDIAN_MAX_VALUES: usize = 4_000_000;

/// Median absolute difference between samples of train and validation
/// items (all axes, all sample pairs), times `multiplier`.
pub fn median_heuristic_sigma<T: Real>(
    train: &[Item<T>],
    val: &[Item<T>],
    multiplier: f64,
) -> Result<T> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut d = Vec::new();
    'outer: for x in train {
        for y in val {
            if x.len() != y.len() {
                return Err(Error::AxisMismatch {
                    left: x.len(),
                    right: y.len(),
                });
            }
            for (xa, ya) in x.iter().zip(y) {
                for &a in xa {
                    for &b in ya {
                        d.push((a - b).abs().as_f64());
                    }
                }
            }
            if d.len() >= MEDIAN_MAX_VALUES {
                break 'outer;
            }
        }
    }
    if d.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mid = d.len() / 2;
    let (_, &mut upper, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let median = if d.len() % 2 == 1 {
        upper
    } else {
        let lower = d[..mid].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    };
    let sigma = median * multiplier;
    if !(sigma > SIGMA_FLOOR) {
        log::warn!("median distance is {median}; using sigma floor {SIGMA_FLOOR}");
        return Ok(T::of(SIGMA_FLOOR));
    }
    Ok(T::of(sigma))
}
