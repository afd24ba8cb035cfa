//! Numerical primitives: Pearson r, simple OLS with a slope t-test, and the
//! studentized range distribution used by Tukey-Kramer intervals.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("correlation undefined: {0} series has zero variance")]
    ZeroVariance(&'static str),
    #[error("non-finite value in input")]
    NonFinite,
    #[error("all predictor values are identical")]
    ConstantPredictor,
    #[error("invalid distribution parameter: {0}")]
    Parameter(String),
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample Pearson correlation (two-pass, centered).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { needed: 3, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("first"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("second"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Two-sided p-value of the slope t-test.
    pub p_value: f64,
    pub slope_std_error: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on `x` with a two-sided t-test on the slope.
pub fn ols(x: &[f64], y: &[f64]) -> Result<RegressionFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::TooFew { needed: 3, got: n });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::ConstantPredictor);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    let df = (n - 2) as f64;
    let se = (sse / df / sxx).sqrt();
    let p_value = if se == 0.0 || !se.is_finite() {
        if slope == 0.0 {
            1.0
        } else {
            f64::MIN_POSITIVE
        }
    } else {
        let t = StudentsT::new(0.0, 1.0, df).map_err(|e| StatsError::Parameter(e.to_string()))?;
        (2.0 * t.sf((slope / se).abs())).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
        p_value,
        slope_std_error: se,
        n,
    })
}

fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

// 16-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
const GL_X: [f64; 8] = [
    0.095_012_509_837_637_45,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_37,
    0.617_876_244_402_643_8,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL_W: [f64; 8] = [
    0.189_450_610_455_068_59,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_62,
    0.149_595_988_816_576_76,
    0.124_628_971_255_534_03,
    0.095_158_511_682_492_59,
    0.062_253_523_938_647_706,
    0.027_152_459_411_754_037,
];

/// Composite 16-point Gauss-Legendre quadrature.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL_X.iter().zip(GL_W) {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}

/// P(range of `k` iid standard normals ≤ w).
fn range_cdf_known_sigma(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if k == 2 {
        return 2.0 * norm_cdf(w / std::f64::consts::SQRT_2) - 1.0;
    }
    let km1 = (k - 1) as i32;
    let v = integrate(
        |z| {
            let d = norm_cdf(z) - norm_cdf(z - w);
            norm_pdf(z) * d.max(0.0).powi(km1)
        },
        -8.5,
        8.5 + w.min(8.5),
        16,
    );
    (k as f64 * v).clamp(0.0, 1.0)
}

/// Cumulative distribution of the studentized range for `k` groups and `df`
/// error degrees of freedom.
pub fn studentized_range_cdf(q: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    if k < 2 {
        return Err(StatsError::Parameter(format!("k must be >= 2, got {k}")));
    }
    if !(df >= 1.0) {
        return Err(StatsError::Parameter(format!("df must be >= 1, got {df}")));
    }
    if q <= 0.0 {
        return Ok(0.0);
    }
    if !q.is_finite() {
        return Ok(1.0);
    }
    // Mix the known-sigma range distribution over the density of
    // s = sqrt(chi2_df / df).
    let half = df / 2.0;
    let log_norm = std::f64::consts::LN_2 + half * half.ln() - ln_gamma(half);
    let log_density = |s: f64| log_norm + (df - 1.0) * s.ln() - half * s * s;
    let mode = ((df - 1.0) / df).sqrt();
    let spread = (1.0 / (2.0 * df)).sqrt();
    let lo = (mode - 12.0 * spread).max(0.0);
    let hi = mode + 12.0 * spread + if df < 10.0 { 6.0 } else { 0.0 };
    let v = integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            log_density(s).exp() * range_cdf_known_sigma(q * s, k)
        },
        lo,
        hi,
        if df < 10.0 { 48 } else { 12 },
    );
    Ok(v.clamp(0.0, 1.0))
}

type QuantileKey = (u64, usize, u64);

fn quantile_cache() -> &'static Mutex<HashMap<QuantileKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<QuantileKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Quantile of the studentized range distribution. Results are memoized per
/// (p, k, df) since Tukey-Kramer asks for the same few values repeatedly.
pub fn studentized_range_quantile(p: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    if !(0.0 < p && p < 1.0) {
        return Err(StatsError::Parameter(format!("probability {p} outside (0, 1)")));
    }
    let key = (p.to_bits(), k, df.to_bits());
    if let Some(q) = quantile_cache().lock().ok().and_then(|c| c.get(&key).copied()) {
        return Ok(q);
    }
    let q = quantile_uncached(p, k, df)?;
    if let Ok(mut c) = quantile_cache().lock() {
        c.insert(key, q);
    }
    Ok(q)
}

fn quantile_uncached(p: f64, k: usize, df: f64) -> Result<f64, StatsError> {
    let f = |q: f64| studentized_range_cdf(q, k, df).map(|c| c - p);
    let (mut a, mut b) = (0.0, 2.0);
    let mut fb = f(b)?;
    while fb < 0.0 {
        a = b;
        b *= 2.0;
        fb = f(b)?;
        if b > 1e4 {
            return Err(StatsError::Parameter("quantile search diverged".into()));
        }
    }
    let mut fa = f(a)?;
    // Illinois variant of regula falsi.
    let mut side = 0i8;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = f(c)?;
        if fc.abs() < 1e-15 || (b - a).abs() < 1e-13 * c.abs().max(1.0) {
            return Ok(c);
        }
        if fc * fb > 0.0 {
            b = c;
            fb = fc;
            if side == -1 {
                fa /= 2.0;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb /= 2.0;
            }
            side = 1;
        }
    }
    Ok(0.5 * (a + b))
}
