//! Small statistics helpers shared by the verifier and the sweep harness.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{invalid, Result};

/// One-sided exact binomial p-value `Pr{X >= successes}` for `X ~ Bin(trials, p)`.
pub fn binomial_upper_p_value(successes: u64, trials: u64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("probability must lie in [0, 1], got {p}")));
    }
    if successes > trials {
        return Err(invalid("more successes than trials"));
    }
    if successes == 0 {
        return Ok(1.0);
    }
    let dist = Binomial::new(p, trials).map_err(|e| invalid(e.to_string()))?;
    // sf(k) = Pr{X > k}
    Ok(dist.sf(successes - 1).clamp(0.0, 1.0))
}

/// Inverse-ECDF quantile of already sorted data: the smallest value whose
/// empirical CDF reaches `level`.
pub fn sorted_quantile(sorted: &[f64], level: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let n = sorted.len();
    let rank = (level * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

pub fn median(sorted: &[f64]) -> f64 {
    assert!(!sorted.is_empty(), "median of empty data");
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// `None` with fewer than three points.
    pub slope_stderr: Option<f64>,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = (n > 2).then(|| {
        let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    });
    Some(LineFit { slope, intercept, slope_stderr })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}
