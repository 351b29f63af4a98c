//! Fourier and convolution numerics for the step kernel.

pub mod asymptotics;
pub mod convolution;
pub mod diagrams;
pub mod fourier;
pub mod grid;

pub use asymptotics::{
    rw_limit_shape_oracle, scaled_probe, spectral_asymptotics, AsymptoticFit, KWindow,
    LimitShapeRow,
};
pub use convolution::{
    convolution_power, doubling_list, heat_kernel_bound_report, transform_field, FieldRole,
    HeatKernelReport, HeatKernelRow, SpectralField,
};
pub use diagrams::{diagram_values, pc_prediction, DiagramOptions, DiagramReport, DiagramValue, PcPrediction};
pub use fourier::{
    default_mu_set, fourier_transform, greens_function, greens_series, infrared_scan,
    shell_decomposition, InfraredReport, Shells,
};
pub use grid::TorusGrid;
