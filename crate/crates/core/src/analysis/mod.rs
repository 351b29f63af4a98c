//! Fits and checks on simulated and exact two-point data: growth rate and
//! `η`, the rescaled limit shape, and the exponents `γ`, `τ`.

pub mod exponents;
pub mod growth;
pub mod shape;

pub use exponents::{exponent_fits, sandwich_check, sweep_point, ExponentFit, SandwichCheck, SweepPoint};
pub use growth::{fit_growth, fit_growth_series, growth_report, GrowthFit, GrowthReport, MIN_GROWTH_POINTS};
pub use shape::{
    compute_kn, convergence_onset, fit_limit_shape, limit_shape_from_table, rw_shape_fit, ShapeConstant, ShapeFit,
    ShapeRow, ShapeRun,
};
