use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub rate: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub samples: usize,
}

/// Least-squares line through `(t, ln v)` over samples with `t` in `window`.
pub fn fit_decay_rate(t: &[f64], v: &[f64], window: (f64, f64)) -> Result<RateFit> {
    assert_eq!(t.len(), v.len(), "time and value series differ in length");
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&ti, &vi) in t.iter().zip(v) {
        if ti < window.0 || ti > window.1 {
            continue;
        }
        if !(vi > 0.0) {
            return Err(Error::NonPositiveSample { t: ti, value: vi });
        }
        xs.push(ti);
        ys.push(vi.ln());
    }
    let n = xs.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples(n));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        rate: -slope,
        amplitude: intercept.exp(),
        window: (xs[0], xs[n - 1]),
        r_squared,
        samples: n,
    })
}

/// Default fit window: skip five predicted e-folds of transient, stop
/// before the series reaches `1e3 eps` of its first value or `1e2` times
/// its last value (the floor a finite run can resolve).
pub fn window_for_rate(t: &[f64], v: &[f64], predicted_rate: f64) -> (f64, f64) {
    let start = t.first().copied().unwrap_or(0.0) + 5.0 / predicted_rate;
    let first = v.first().copied().unwrap_or(0.0);
    let last = v.last().copied().unwrap_or(0.0).abs();
    let floor = (1e3 * f64::EPSILON * first).max(1e2 * last);
    let end = t
        .iter()
        .zip(v)
        .take_while(|(_, x)| **x > floor)
        .map(|(t, _)| *t)
        .last()
        .unwrap_or(start);
    (start, end)
}
