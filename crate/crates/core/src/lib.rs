//! Quantum-statistics fits to decile income data.
//!
//! Decile tables are mapped to `(ln income, ln cumulative percent)` points
//! and fitted with Fermi-Dirac, Bose-Einstein or Boltzmann-Gibbs curves by
//! multistart Levenberg-Marquardt. The fitted temperature and chemical
//! potential can then be followed across years.
//!
//! ```
//! use fermi_income::{fit, ingest, models::{ModelFamily, ModelParams}};
//!
//! let truth = ModelParams::new(0.3074, 10.56, 4.621);
//! let (xs, ys): (Vec<f64>, Vec<f64>) = ingest::cumulative_percents(
//!     ingest::TableKind::UpperLimit,
//!     ingest::MeanOffset::default(),
//! )
//! .into_iter()
//! .map(|pct| (truth.mu + truth.t * (truth.c / pct.ln() - 1.0).ln(), pct.ln()))
//! .unzip();
//! let points = ingest::CumulativePoints::from_xy(&xs, &ys).unwrap();
//! let result = fit::lm_fit(&points, ModelFamily::FermiDirac, &fit::FitConfig::default()).unwrap();
//! assert!((result.params.t - 0.3074).abs() < 1e-6);
//! ```

pub mod analysis;
pub mod fit;
pub mod ingest;
pub mod models;

pub use analysis::{ParamSeries, ProxySeries, SymmetryReport, TrendReport};
pub use fit::{FitConfig, FitError, FitResult, Termination};
pub use ingest::{CumulativePoints, DecileTable, MeanOffset, TableKind};
pub use models::{ModelFamily, ModelParams};
