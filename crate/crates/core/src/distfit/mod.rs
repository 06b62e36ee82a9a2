//! Volatility-parameter laws f(β): χ², inverse χ², lognormal and the
//! lognormal/χ² κ-mixture, with likelihood fitting and histograms.

mod fit;
mod histogram;
mod kappa;
mod mixed;
mod model;

pub use fit::{fit_mle, preferred, FitStats, FittedModel, MIN_FIT_SAMPLES};
pub use histogram::{histogram, histogram_values, BetaHistogram, Binning, Histogram};
pub use kappa::{fit_kappa, KappaFit, KappaOptions, KappaPoint, DEFAULT_N_DOF, MIN_KAPPA_SAMPLES};
pub use mixed::MixedTable;
pub use model::{DistributionModel, MixedParams, ModelKind};
