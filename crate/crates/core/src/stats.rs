//! Error analysis for correlated Monte Carlo time series.
//!
//! The integrated autocorrelation time uses the self-consistent window
//! `W >= c * tau_int(W)`; binning provides an independent cross-check, and a
//! delete-one-block jackknife handles nonlinear estimators such as the
//! variance.

use crate::error::{Error, Result};

/// Default window factor `c` of the automatic windowing rule.
pub const DEFAULT_WINDOW_FACTOR: f64 = 6.0;

/// Minimum series length accepted by [`tau_int`].
pub const MIN_TAU_LEN: usize = 16;

/// Jackknife estimates with fewer blocks than this are flagged.
pub const MIN_CONFIDENT_BLOCKS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub mean: f64,
    pub naive_error: f64,
    pub corrected_error: f64,
    pub tau_int: f64,
    pub window: usize,
    pub n_effective: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TauEstimate {
    pub tau: f64,
    pub window: usize,
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance `<x^2> - <x>^2` (two-pass).
pub fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Normalized autocorrelation `rho(t)` for `t = 0..=max_lag`, using the
/// biased autocovariance (divided by `N`, not `N - t`).
pub fn autocorrelation(xs: &[f64], max_lag: usize) -> Vec<f64> {
    let n = xs.len();
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    (0..=max_lag.min(n - 1))
        .map(|t| {
            let ct = centered[..n - t]
                .iter()
                .zip(&centered[t..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64;
            ct / c0
        })
        .collect()
}

/// Integrated autocorrelation time with the default window factor.
pub fn tau_int(xs: &[f64]) -> Result<TauEstimate> {
    tau_int_with(xs, DEFAULT_WINDOW_FACTOR)
}

/// `tau = 1/2 + sum_{t=1}^{W} rho(t)` with `W` the smallest lag satisfying
/// `W >= factor * tau(W)`. Zero-variance series return `tau = 1/2`.
/// Estimates below `1/2` (anticorrelated noise) are clamped to `1/2`.
pub fn tau_int_with(xs: &[f64], factor: f64) -> Result<TauEstimate> {
    if xs.len() < MIN_TAU_LEN {
        return Err(Error::SeriesTooShort {
            needed: MIN_TAU_LEN,
            len: xs.len(),
        });
    }
    let n = xs.len();
    let m = mean(xs);
    let centered: Vec<f64> = xs.iter().map(|x| x - m).collect();
    let c0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(c0 > (1e-12 * m).powi(2)) {
        return Ok(TauEstimate {
            tau: 0.5,
            window: 1,
        });
    }
    let max_window = n / 2;
    let mut tau = 0.5;
    let mut window = max_window;
    for t in 1..=max_window {
        let ct = centered[..n - t]
            .iter()
            .zip(&centered[t..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64;
        tau += ct / c0;
        if t as f64 >= factor * tau {
            window = t;
            break;
        }
    }
    Ok(TauEstimate {
        tau: tau.max(0.5),
        window,
    })
}

/// Mean with naive and autocorrelation-corrected standard errors.
pub fn error_report(xs: &[f64]) -> Result<ErrorReport> {
    error_report_with(xs, DEFAULT_WINDOW_FACTOR)
}

pub fn error_report_with(xs: &[f64], factor: f64) -> Result<ErrorReport> {
    if xs.is_empty() {
        return Err(Error::EmptySeries);
    }
    let n = xs.len() as f64;
    let m = mean(xs);
    let naive_error = if xs.len() > 1 {
        (population_variance(xs) * n / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let est = if xs.len() >= MIN_TAU_LEN {
        tau_int_with(xs, factor)?
    } else {
        // Too short to window: treat as uncorrelated.
        TauEstimate {
            tau: 0.5,
            window: 1,
        }
    };
    Ok(ErrorReport {
        mean: m,
        naive_error,
        corrected_error: naive_error * (2.0 * est.tau).sqrt(),
        tau_int: est.tau,
        window: est.window,
        n_effective: n / (2.0 * est.tau),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinningAnalysis {
    /// `(bin_size, standard error of the bin means)` per level.
    pub levels: Vec<(usize, f64)>,
    /// Level taken as the plateau.
    pub plateau: (usize, f64),
}

/// Bin counts below this are too noisy to enter the plateau choice.
const MIN_PLATEAU_BINS: usize = 64;

/// Successive pairwise binning for levels `0..max_bin_levels`.
/// The plateau is the largest error among levels that keep at least 64 bins
/// (or level 0 if none do).
pub fn binned_error(xs: &[f64], max_bin_levels: u32) -> Result<BinningAnalysis> {
    let needed = 1usize << max_bin_levels;
    if xs.len() < needed || max_bin_levels == 0 {
        return Err(Error::SeriesTooShort {
            needed: needed.max(2),
            len: xs.len(),
        });
    }
    let mut levels = Vec::with_capacity(max_bin_levels as usize);
    let mut bins: Vec<f64> = xs.to_vec();
    let mut size = 1usize;
    for _ in 0..max_bin_levels {
        let nb = bins.len() as f64;
        let err = (population_variance(&bins) / (nb - 1.0)).sqrt();
        levels.push((size, err));
        bins = bins.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        size *= 2;
    }
    let plateau = levels
        .iter()
        .copied()
        .filter(|&(s, _)| xs.len() / s >= MIN_PLATEAU_BINS)
        .fold(
            levels[0],
            |best, cur| if cur.1 > best.1 { cur } else { best },
        );
    Ok(BinningAnalysis { levels, plateau })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JackknifeResult {
    pub value: f64,
    pub error: f64,
    pub blocks: usize,
    pub block_size: usize,
    /// Fewer than [`MIN_CONFIDENT_BLOCKS`] blocks.
    pub low_confidence: bool,
}

/// Block length `ceil(2 tau_int)` used by the jackknife.
pub fn jackknife_block_size(xs: &[f64]) -> Result<usize> {
    if xs.len() < MIN_TAU_LEN {
        return Ok(1);
    }
    Ok(((2.0 * tau_int(xs)?.tau).ceil() as usize).max(1))
}

fn block_layout(len: usize, block_size: usize) -> Result<(usize, usize)> {
    let block_size = block_size.max(1);
    let blocks = len / block_size;
    if blocks < 2 {
        return Err(Error::TooFewBlocks { blocks });
    }
    Ok((blocks, block_size))
}

fn jackknife_spread(leave_out: &[f64]) -> f64 {
    let nb = leave_out.len() as f64;
    let avg = leave_out.iter().sum::<f64>() / nb;
    let ss: f64 = leave_out.iter().map(|t| (t - avg) * (t - avg)).sum();
    ((nb - 1.0) / nb * ss).sqrt()
}

/// Delete-one-block jackknife of an arbitrary estimator over blocks of
/// `ceil(2 tau_int)` samples. The series is truncated to a whole number of
/// blocks.
pub fn jackknife_variance_estimator<F>(xs: &[f64], estimator: F) -> Result<JackknifeResult>
where
    F: Fn(&[f64]) -> f64,
{
    let bs = jackknife_block_size(xs)?;
    jackknife_with_blocks(xs, bs, estimator)
}

pub fn jackknife_with_blocks<F>(
    xs: &[f64],
    block_size: usize,
    estimator: F,
) -> Result<JackknifeResult>
where
    F: Fn(&[f64]) -> f64,
{
    let (blocks, bs) = block_layout(xs.len(), block_size)?;
    let used = &xs[..blocks * bs];
    let value = estimator(used);
    let mut buf = Vec::with_capacity(used.len() - bs);
    let leave_out: Vec<f64> = (0..blocks)
        .map(|k| {
            buf.clear();
            buf.extend_from_slice(&used[..k * bs]);
            buf.extend_from_slice(&used[(k + 1) * bs..]);
            estimator(&buf)
        })
        .collect();
    Ok(JackknifeResult {
        value,
        error: jackknife_spread(&leave_out),
        blocks,
        block_size: bs,
        low_confidence: blocks < MIN_CONFIDENT_BLOCKS,
    })
}

/// Jackknife of the population variance computed from block moment sums in
/// `O(N)`; agrees with [`jackknife_with_blocks`] on [`population_variance`].
pub fn jackknife_variance(xs: &[f64]) -> Result<JackknifeResult> {
    let bs = jackknife_block_size(xs)?;
    let (blocks, bs) = block_layout(xs.len(), bs)?;
    let used = &xs[..blocks * bs];
    // Shift by the mean for numerical stability; the variance is invariant.
    let shift = mean(used);
    let sums: Vec<(f64, f64)> = used
        .chunks_exact(bs)
        .map(|b| {
            b.iter()
                .map(|x| x - shift)
                .fold((0.0, 0.0), |(s1, s2), y| (s1 + y, s2 + y * y))
        })
        .collect();
    let (t1, t2) = sums
        .iter()
        .fold((0.0, 0.0), |(a, b), &(s1, s2)| (a + s1, b + s2));
    let var_of = |s1: f64, s2: f64, count: f64| {
        let m = s1 / count;
        (s2 / count - m * m).max(0.0)
    };
    let total = used.len() as f64;
    let value = var_of(t1, t2, total);
    let rest = total - bs as f64;
    let leave_out: Vec<f64> = sums
        .iter()
        .map(|&(s1, s2)| var_of(t1 - s1, t2 - s2, rest))
        .collect();
    Ok(JackknifeResult {
        value,
        error: jackknife_spread(&leave_out),
        blocks,
        block_size: bs,
        low_confidence: blocks < MIN_CONFIDENT_BLOCKS,
    })
}

/// Jackknife of `mean(num) / mean(den)` over paired series, blocked by the
/// larger of the two autocorrelation block sizes.
pub fn jackknife_ratio(num: &[f64], den: &[f64]) -> Result<JackknifeResult> {
    if num.len() != den.len() {
        return Err(Error::DimensionMismatch {
            expected: num.len(),
            found: den.len(),
        });
    }
    let bs = jackknife_block_size(num)?.max(jackknife_block_size(den)?);
    let (blocks, bs) = block_layout(num.len(), bs)?;
    let len = blocks * bs;
    let sums: Vec<(f64, f64)> = num[..len]
        .chunks_exact(bs)
        .zip(den[..len].chunks_exact(bs))
        .map(|(a, b)| (a.iter().sum(), b.iter().sum()))
        .collect();
    let (tn, td) = sums
        .iter()
        .fold((0.0, 0.0), |(x, y), &(a, b)| (x + a, y + b));
    let leave_out: Vec<f64> = sums.iter().map(|&(a, b)| (tn - a) / (td - b)).collect();
    Ok(JackknifeResult {
        value: tn / td,
        error: jackknife_spread(&leave_out),
        blocks,
        block_size: bs,
        low_confidence: blocks < MIN_CONFIDENT_BLOCKS,
    })
}
