//! Exhaustive grid search over `(T, mu, c)`, used to validate the fitter.

use serde::{Deserialize, Serialize};

use super::ss_res;
use crate::ingest::CumulativePoints;
use crate::models::{ModelFamily, ModelParams};

/// Closed parameter intervals `(lo, hi)` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub t: (f64, f64),
    pub mu: (f64, f64),
    pub c: (f64, f64),
}

impl ParamBox {
    /// Box spanning `center * (1 ± frac)` on every axis.
    pub fn around(center: &ModelParams, frac: f64) -> Self {
        let span = |v: f64| {
            let d = (v * frac).abs();
            (v - d, v + d)
        };
        Self {
            t: span(center.t),
            mu: span(center.mu),
            c: span(center.c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptimum {
    pub params: ModelParams,
    pub ss_res: f64,
}

fn axis((lo, hi): (f64, f64), steps: usize) -> Vec<f64> {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    if steps <= 1 || lo == hi {
        return vec![lo];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// Returns the grid point with the smallest SS_res.
///
/// `steps` is the per-axis count `[T, mu, c]`. Ties resolve to the lowest
/// `T`, then `mu`, then `c`. Points where the model cannot be evaluated
/// count as infinitely bad.
pub fn grid_oracle(
    points: &CumulativePoints,
    family: ModelFamily,
    bounds: &ParamBox,
    steps: [usize; 3],
) -> GridOptimum {
    let ts = axis(bounds.t, steps[0]);
    let mus = axis(bounds.mu, steps[1]);
    let cs = axis(bounds.c, steps[2]);

    let mut best = GridOptimum {
        params: ModelParams::new(ts[0], mus[0], cs[0]),
        ss_res: f64::INFINITY,
    };
    for &t in &ts {
        for &mu in &mus {
            for &c in &cs {
                let params = ModelParams::new(t, mu, c);
                let ss = ss_res(points, family, &params).unwrap_or(f64::INFINITY);
                if ss < best.ss_res {
                    best = GridOptimum { params, ss_res: ss };
                }
            }
        }
    }
    best
}
