//! Point-process toolkit for match scoring: Poisson and generalized Poisson
//! models of goal counts, dispersion tests (asymptotic and exact), and
//! censored survival analysis of the waiting times between goals.

pub mod counts;
pub mod dataset;
pub mod dispersion;
pub mod error;
pub mod gp;
pub mod sim;
pub mod special;
pub mod survival;

pub use counts::{
    chi_square_gof, expected_frequencies, expected_frequencies_exposure, mean_variance,
    poisson_pmf, Cell, CellLabel, FrequencyTable, GofResult, PoolingRule,
};
pub use dataset::{
    parse_dataset, CountScope, CountView, GoalEvent, Match, Side, Stage, Tournament,
};
pub use dispersion::{
    asymptotic_p, dispersion_index, dispersion_test, exact_oracle, exact_variance_test,
    DispersionResult, Tail,
};
pub use error::{DataError, StatsError};
pub use gp::{dispersion_factor, gp_fit_mle, gp_fit_mle_scaled, gp_pmf, GpFitResult, GpParams};
pub use sim::{calibration_study, simulate_match, SimConfig, SimReport};
pub use survival::{
    compare_curves, exp_fit, exp_survival, extract_intervals, km_estimate, km_median,
    CurveComparison, ExpFit, Interval, KmCurve,
};

/// The bundled UEFA EURO 2020 final-tournament dataset (51 matches).
pub const EURO2020_CSV: &str = include_str!("../../../data/euro2020.csv");

/// Parses [`EURO2020_CSV`].
pub fn euro2020() -> Tournament {
    parse_dataset(EURO2020_CSV).expect("bundled dataset is valid")
}
