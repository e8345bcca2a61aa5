//! Least-squares fitting of the model families to cumulative points.
//!
//! Positivity of `T` and `c` is enforced by optimizing `(ln T, mu, ln c)`.
//! Boltzmann-Gibbs has a single identifiable amplitude `A = c exp(mu / T)`,
//! so it is optimized as `(ln T, ln A)` with `mu` pinned to zero and the
//! reported `c` equal to `A`.

mod grid;
mod lm;

pub use grid::{grid_oracle, GridOptimum, ParamBox};
pub use lm::{minimize, LeastSquares, LmOutcome, LmSettings, Termination};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CumulativePoints, Point};
use crate::models::{self, ModelError, ModelFamily, ModelParams, DEFAULT_POLE_GUARD};

/// Fits below this R² are flagged as rejected.
pub const DEFAULT_REJECT_BELOW: f64 = 0.9;

/// R² values at or above this print as `1` at four decimals.
pub const DISPLAY_AS_ONE: f64 = 0.99995;

const MIN_POINTS: usize = 4;
const T_GUESS_RANGE: (f64, f64) = (1e-3, 10.0);
const PERTURBATION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("objective is not finite at any starting point")]
    NonFinite,
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub step_tolerance: f64,
    pub lambda_init: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Total number of starts; start 0 is the unperturbed initial guess.
    pub multistart: usize,
    pub seed: u64,
    pub pole_guard: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-10,
            step_tolerance: 1e-12,
            lambda_init: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            multistart: 8,
            seed: 0,
            pole_guard: DEFAULT_POLE_GUARD,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        let positive = [
            ("gradient_tolerance", self.gradient_tolerance),
            ("step_tolerance", self.step_tolerance),
            ("lambda_init", self.lambda_init),
            ("pole_guard", self.pole_guard),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FitError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_up > 1.0 && self.lambda_down > 1.0) {
            return Err(FitError::Config("damping factors must exceed 1".into()));
        }
        if self.multistart == 0 || self.max_iterations == 0 {
            return Err(FitError::Config("multistart and max_iterations must be >= 1".into()));
        }
        Ok(())
    }

    fn lm_settings(&self) -> LmSettings {
        LmSettings {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            step_tolerance: self.step_tolerance,
            lambda_init: self.lambda_init,
            lambda_up: self.lambda_up,
            lambda_down: self.lambda_down,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: ModelFamily,
    pub params: ModelParams,
    pub r_squared: f64,
    pub ss_res: f64,
    /// `y_i - y_hat_i` per point.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    /// Index of the start that produced the result.
    pub start: usize,
    /// Boltzmann-Gibbs only: the identifiable amplitude `c exp(mu / T)`.
    pub amplitude: Option<f64>,
    /// SS_res at the start and after each accepted step of the winning start.
    pub ss_history: Vec<f64>,
}

impl FitResult {
    pub fn is_rejected(&self, threshold: f64) -> bool {
        !(self.r_squared >= threshold)
    }

    /// R² at four decimals, printing `1` once it rounds there.
    pub fn r_squared_display(&self) -> String {
        display_r_squared(self.r_squared)
    }
}

pub fn display_r_squared(r2: f64) -> String {
    if r2 >= DISPLAY_AS_ONE {
        "1".to_owned()
    } else {
        format!("{r2:.4}")
    }
}

/// Residual problem for one family over a fixed point set.
struct FamilyProblem<'a> {
    family: ModelFamily,
    points: &'a [Point],
    pole_guard: f64,
}

impl FamilyProblem<'_> {
    fn params(&self, theta: &[f64]) -> ModelParams {
        match self.family {
            ModelFamily::BoltzmannGibbs => ModelParams::new(theta[0].exp(), 0.0, theta[1].exp()),
            _ => ModelParams::new(theta[0].exp(), theta[1], theta[2].exp()),
        }
    }
}

fn to_theta(family: ModelFamily, p: &ModelParams) -> Vec<f64> {
    match family {
        ModelFamily::BoltzmannGibbs => vec![p.t.ln(), p.c.ln() + p.mu / p.t],
        _ => vec![p.t.ln(), p.mu, p.c.ln()],
    }
}

impl LeastSquares for FamilyProblem<'_> {
    fn n_params(&self) -> usize {
        match self.family {
            ModelFamily::BoltzmannGibbs => 2,
            _ => 3,
        }
    }

    fn residuals(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let mut r = DVector::zeros(self.points.len());
        if self.family == ModelFamily::BoltzmannGibbs {
            let t = theta[0].exp();
            for (i, p) in self.points.iter().enumerate() {
                r[i] = p.y - (theta[1] - p.x / t).exp();
            }
            return Some(r);
        }
        let params = self.params(theta);
        for (i, p) in self.points.iter().enumerate() {
            r[i] = p.y - models::eval_guarded(self.family, &params, p.x, self.pole_guard).ok()?;
        }
        Some(r)
    }

    fn jacobian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let m = self.points.len();
        if self.family == ModelFamily::BoltzmannGibbs {
            let t = theta[0].exp();
            let mut j = DMatrix::zeros(m, 2);
            for (i, p) in self.points.iter().enumerate() {
                let y = (theta[1] - p.x / t).exp();
                j[(i, 0)] = -y * p.x / t;
                j[(i, 1)] = -y;
            }
            return Some(j);
        }
        let params = self.params(theta);
        let mut j = DMatrix::zeros(m, 3);
        for (i, p) in self.points.iter().enumerate() {
            let g = models::gradient_guarded(self.family, &params, p.x, self.pole_guard).ok()?;
            // chain rule through ln T and ln c
            j[(i, 0)] = -g.d_t * params.t;
            j[(i, 1)] = -g.d_mu;
            j[(i, 2)] = -g.d_c * params.c;
        }
        Some(j)
    }
}

fn check_points(points: &CumulativePoints) -> Result<(), FitError> {
    if points.len() < MIN_POINTS {
        return Err(FitError::DegenerateData(format!(
            "need at least {MIN_POINTS} points, got {}",
            points.len()
        )));
    }
    let first = points.points()[0].y;
    if points.ys().all(|y| y == first) {
        return Err(FitError::DegenerateData("all y values are equal".into()));
    }
    Ok(())
}

/// Deterministic starting parameters derived from the shape of the data.
///
/// Fermi-Dirac: `c0 = max y`, `mu0` where y crosses `c0 / 2` (else max x),
/// `T0 = c0 / (4 |steepest slope|)` clamped to `[1e-3, 10]`.
/// Bose-Einstein starts from the same values with `mu0` moved below the
/// data so the pole does not sit between points. Boltzmann-Gibbs starts
/// from a log-linear regression of `ln y` on `x`.
pub fn initial_guess(points: &CumulativePoints, family: ModelFamily) -> Result<ModelParams, FitError> {
    check_points(points)?;
    let pts = points.points();
    let x_min = pts[0].x;
    let x_max = pts[pts.len() - 1].x;

    let c0 = points.ys().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * c0;
    let mu0 = pts
        .windows(2)
        .find_map(|w| {
            let (a, b) = (w[0], w[1]);
            let crosses = (a.y - half) * (b.y - half) <= 0.0 && a.y != b.y;
            crosses.then(|| a.x + (half - a.y) * (b.x - a.x) / (b.y - a.y))
        })
        .unwrap_or(x_max);
    let steepest = pts
        .windows(2)
        .map(|w| ((w[1].y - w[0].y) / (w[1].x - w[0].x)).abs())
        .fold(0.0, f64::max);
    if !(steepest > 0.0) {
        return Err(FitError::DegenerateData("zero slope everywhere".into()));
    }
    let t0 = (c0 / (4.0 * steepest)).clamp(T_GUESS_RANGE.0, T_GUESS_RANGE.1);

    match family {
        ModelFamily::FermiDirac => Ok(ModelParams::new(t0, mu0, c0)),
        ModelFamily::BoseEinstein => {
            // BE(x_min) = c0 when x_min - mu = T ln 2
            let mu = mu0.min(x_min - t0 * std::f64::consts::LN_2);
            Ok(ModelParams::new(t0, mu, c0))
        }
        ModelFamily::BoltzmannGibbs => {
            if pts.iter().any(|p| p.y <= 0.0) {
                return Err(FitError::DegenerateData(
                    "Boltzmann-Gibbs needs positive y values".into(),
                ));
            }
            let n = pts.len() as f64;
            let mx = points.xs().sum::<f64>() / n;
            let my = pts.iter().map(|p| p.y.ln()).sum::<f64>() / n;
            let sxy: f64 = pts.iter().map(|p| (p.x - mx) * (p.y.ln() - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.x - mx).powi(2)).sum();
            let slope = sxy / sxx;
            let t = if slope < 0.0 { -1.0 / slope } else { T_GUESS_RANGE.1 };
            let t = t.clamp(T_GUESS_RANGE.0, T_GUESS_RANGE.1);
            Ok(ModelParams::new(t, 0.0, bg_log_amplitude(pts, t).exp()))
        }
    }
}

/// Least-squares `ln A` in log space for a fixed `T`.
fn bg_log_amplitude(pts: &[Point], t: f64) -> f64 {
    pts.iter().map(|p| p.y.ln() + p.x / t).sum::<f64>() / pts.len() as f64
}

fn starting_points(
    points: &CumulativePoints,
    family: ModelFamily,
    base: &ModelParams,
    config: &FitConfig,
) -> Vec<Vec<f64>> {
    let pts = points.points();
    let span = pts[pts.len() - 1].x - pts[0].x;
    let log_range = (1.0 + PERTURBATION).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base_theta = match family {
        ModelFamily::BoltzmannGibbs => vec![base.t.ln(), bg_log_amplitude(pts, base.t)],
        _ => to_theta(family, base),
    };
    let mut starts = vec![base_theta];
    for _ in 1..config.multistart {
        let dt: f64 = rng.random_range(-log_range..=log_range);
        let dc: f64 = rng.random_range(-log_range..=log_range);
        let dmu: f64 = rng.random_range(-PERTURBATION..=PERTURBATION);
        let t = base.t * dt.exp();
        let theta = match family {
            ModelFamily::BoltzmannGibbs => vec![t.ln(), bg_log_amplitude(pts, t) + dc],
            _ => vec![t.ln(), base.mu + dmu * span, base.c.ln() + dc],
        };
        starts.push(theta);
    }
    starts
}

/// Multistart Levenberg-Marquardt fit of one family.
///
/// Returns the start with the lowest SS_res (ties go to the lower start index).
pub fn lm_fit(points: &CumulativePoints, family: ModelFamily, config: &FitConfig) -> Result<FitResult, FitError> {
    config.validate()?;
    let base = initial_guess(points, family)?;
    let problem = FamilyProblem {
        family,
        points: points.points(),
        pole_guard: config.pole_guard,
    };
    let settings = config.lm_settings();

    let mut best: Option<(usize, LmOutcome)> = None;
    for (k, theta0) in starting_points(points, family, &base, config).into_iter().enumerate() {
        if theta0.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let Some(out) = minimize(&problem, &theta0, &settings) else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((_, b)) => out.ss_res < b.ss_res,
        };
        if better {
            best = Some((k, out));
        }
    }
    let (start, out) = best.ok_or(FitError::NonFinite)?;

    let ss_tot = ss_total(points);
    let params = problem.params(&out.theta);
    let amplitude = (family == ModelFamily::BoltzmannGibbs).then(|| out.theta[1].exp());
    Ok(FitResult {
        family,
        params,
        r_squared: 1.0 - out.ss_res / ss_tot,
        ss_res: out.ss_res,
        residuals: out.residuals.iter().copied().collect(),
        iterations: out.iterations,
        converged: out.termination != Termination::MaxIter,
        termination: out.termination,
        start,
        amplitude,
        ss_history: out.ss_history,
    })
}

fn ss_total(points: &CumulativePoints) -> f64 {
    let n = points.len() as f64;
    let mean = points.ys().sum::<f64>() / n;
    points.ys().map(|y| (y - mean).powi(2)).sum()
}

/// Sum of squared residuals of `params` on `points`.
pub fn ss_res(points: &CumulativePoints, family: ModelFamily, params: &ModelParams) -> Result<f64, FitError> {
    let mut ss = 0.0;
    for p in points.points() {
        let r = p.y - models::eval(family, params, p.x)?;
        ss += r * r;
    }
    Ok(ss)
}

/// `1 - SS_res / SS_tot` on the fitted log-log points.
pub fn r_squared(points: &CumulativePoints, family: ModelFamily, params: &ModelParams) -> Result<f64, FitError> {
    if points.len() < 2 {
        return Err(FitError::DegenerateData("need at least 2 points".into()));
    }
    let ss_tot = ss_total(points);
    if ss_tot == 0.0 {
        return Err(FitError::DegenerateData("SS_tot is zero".into()));
    }
    Ok(1.0 - ss_res(points, family, params)? / ss_tot)
}

/// Fit attempt for one family inside a model comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub family: ModelFamily,
    pub fit: Result<FitResult, FitError>,
}

impl ModelOutcome {
    pub fn r_squared(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.r_squared)
    }
}

/// Fits every family and ranks them by descending R²; failed fits go last
/// in family order.
pub fn select_model(points: &CumulativePoints, config: &FitConfig) -> Vec<ModelOutcome> {
    let mut outcomes: Vec<ModelOutcome> = ModelFamily::ALL
        .par_iter()
        .map(|&family| ModelOutcome {
            family,
            fit: lm_fit(points, family, config),
        })
        .collect();
    // Same points means same SS_tot, so ascending SS_res is descending R²
    // without the rounding of 1 - SS_res / SS_tot. The stable sort keeps
    // family order among ties and among errors.
    outcomes.sort_by(|a, b| {
        let key = |o: &ModelOutcome| o.fit.as_ref().ok().map(|f| f.ss_res);
        match (key(a), key(b)) {
            (Some(x), Some(y)) => x.total_cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
    });
    outcomes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{cumulative_percents, MeanOffset, TableKind};

    fn fd_points(p: ModelParams, kind: TableKind) -> CumulativePoints {
        let (xs, ys): (Vec<f64>, Vec<f64>) = cumulative_percents(kind, MeanOffset::default())
            .into_iter()
            .map(|pct| {
                let y = pct.ln();
                (p.mu + p.t * (p.c / y - 1.0).ln(), y)
            })
            .unzip();
        CumulativePoints::from_xy(&xs, &ys).unwrap()
    }

    #[test]
    fn r_squared_against_shifted_midpoint() {
        // 40-digit mpmath: 0.3812132592723135646931236718944851476266
        let xs: Vec<f64> = (0..9).map(|k| 9.0 + 0.25 * k as f64).collect();
        let truth = ModelParams::new(0.5, 10.5, 4.6);
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| models::eval(ModelFamily::FermiDirac, &truth, x).unwrap())
            .collect();
        let pts = CumulativePoints::from_xy(&xs, &ys).unwrap();
        let r2 = r_squared(&pts, ModelFamily::FermiDirac, &ModelParams::new(0.5, 10.0, 4.6)).unwrap();
        assert!((r2 - 0.381_213_259_272_313_6).abs() < 1e-13, "{r2}");
        let r2 = r_squared(&pts, ModelFamily::FermiDirac, &truth).unwrap();
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn r_squared_of_mean_model_is_zero() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [4.0, 3.0, 2.0, 1.0];
        let pts = CumulativePoints::from_xy(&xs, &ys).unwrap();
        // BG with an enormous T is the constant c, here the mean of y
        let p = ModelParams::new(1e300, 0.0, 2.5);
        let r2 = r_squared(&pts, ModelFamily::BoltzmannGibbs, &p).unwrap();
        assert!(r2.abs() < 1e-12, "{r2}");
    }

    #[test]
    fn r_squared_rejects_constant_data() {
        let pts = CumulativePoints::from_xy(&[1.0, 2.0], &[3.0, 3.0]).unwrap();
        let p = ModelParams::new(1.0, 1.0, 3.0);
        assert!(matches!(
            r_squared(&pts, ModelFamily::FermiDirac, &p),
            Err(FitError::DegenerateData(_))
        ));
    }

    #[test]
    fn guess_is_close_on_noiseless_data() {
        let truth = ModelParams::new(0.4, 10.3, 4.6);
        let g = initial_guess(&fd_points(truth, TableKind::UpperLimit), ModelFamily::FermiDirac).unwrap();
        for (est, tru) in [(g.t, truth.t), (g.mu, truth.mu), (g.c, truth.c)] {
            assert!((est - tru).abs() <= 0.5 * tru, "{g:?}");
        }
    }

    #[test]
    fn guess_rejects_flat_data() {
        let pts = CumulativePoints::from_xy(&[1.0, 2.0, 3.0, 4.0], &[2.0; 4]).unwrap();
        for fam in ModelFamily::ALL {
            assert!(matches!(initial_guess(&pts, fam), Err(FitError::DegenerateData(_))));
        }
    }

    #[test]
    fn inverted_data_does_not_produce_a_good_fit() {
        let xs = [9.0, 9.3, 9.6, 9.9, 10.2, 10.5];
        let ys: Vec<f64> = [10.0f64, 20.0, 40.0, 60.0, 80.0, 90.0].iter().map(|p| p.ln()).collect();
        let pts = CumulativePoints::from_xy(&xs, &ys).unwrap();
        let g = initial_guess(&pts, ModelFamily::FermiDirac).unwrap();
        assert_eq!(g.mu, 10.5);
        let fit = lm_fit(&pts, ModelFamily::FermiDirac, &FitConfig::default()).unwrap();
        assert!(!fit.converged || fit.r_squared <= 1e-9, "{fit:?}");
    }

    #[test]
    fn recovers_fermi_dirac_upper_limit() {
        let truth = ModelParams::new(0.3074, 10.56, 4.621);
        let fit = lm_fit(&fd_points(truth, TableKind::UpperLimit), ModelFamily::FermiDirac, &FitConfig::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.params.t - truth.t).abs() < 1e-6, "{fit:?}");
        assert!((fit.params.mu - truth.mu).abs() < 1e-6);
        assert!((fit.params.c - truth.c).abs() < 1e-6);
        assert!(fit.r_squared >= 1.0 - 1e-12);
        assert_eq!(fit.residuals.len(), 9);
        assert_eq!(fit.r_squared_display(), "1");
    }

    #[test]
    fn recovers_fermi_dirac_mean_income() {
        let truth = ModelParams::new(0.4007, 10.36, 4.9);
        let pts = fd_points(truth, TableKind::MeanIncome);
        let fit = lm_fit(&pts, ModelFamily::FermiDirac, &FitConfig::default()).unwrap();
        assert!((fit.params.t - truth.t).abs() < 1e-6, "{fit:?}");
        assert!((fit.params.mu - truth.mu).abs() < 1e-6);
        assert!((fit.params.c - truth.c).abs() < 1e-6);
        let be = lm_fit(&pts, ModelFamily::BoseEinstein, &FitConfig::default()).unwrap();
        assert!(be.r_squared < fit.r_squared);
        assert!(be.params.is_valid());
    }

    #[test]
    fn selection_ranks_generating_family_first() {
        let pts = fd_points(ModelParams::new(0.5, 10.2, 4.8), TableKind::MeanIncome);
        let ranked = select_model(&pts, &FitConfig::default());
        assert_eq!(ranked[0].family, ModelFamily::FermiDirac);
        assert_eq!(ranked.len(), 3);

        let bg = ModelParams::new(0.6, 0.0, 1e8);
        let xs: Vec<f64> = (0..9).map(|k| 9.5 + 0.2 * k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| models::eval(ModelFamily::BoltzmannGibbs, &bg, x).unwrap()).collect();
        let pts = CumulativePoints::from_xy(&xs, &ys).unwrap();
        let ranked = select_model(&pts, &FitConfig::default());
        assert_eq!(ranked[0].family, ModelFamily::BoltzmannGibbs, "{ranked:?}");
        let fit = ranked[0].fit.as_ref().unwrap();
        assert!((fit.amplitude.unwrap() / 1e8 - 1.0).abs() < 1e-8);
        assert_eq!(fit.params.mu, 0.0);
    }

    #[test]
    fn selection_embeds_errors_for_tiny_input() {
        let pts = CumulativePoints::from_xy(&[1.0, 2.0], &[3.0, 2.0]).unwrap();
        let ranked = select_model(&pts, &FitConfig::default());
        let fams: Vec<_> = ranked.iter().map(|o| o.family).collect();
        assert_eq!(fams, ModelFamily::ALL.to_vec());
        assert!(ranked.iter().all(|o| matches!(o.fit, Err(FitError::DegenerateData(_)))));
    }

    #[test]
    fn config_validation() {
        let bad = FitConfig { multistart: 0, ..FitConfig::default() };
        assert!(bad.validate().is_err());
        let bad = FitConfig { gradient_tolerance: 0.0, ..FitConfig::default() };
        assert!(bad.validate().is_err());
        assert!(FitConfig::default().validate().is_ok());
    }

    #[test]
    fn display_rounding() {
        assert_eq!(display_r_squared(0.99995), "1");
        assert_eq!(display_r_squared(0.99994), "0.9999");
        assert_eq!(display_r_squared(0.9755), "0.9755");
    }
}
