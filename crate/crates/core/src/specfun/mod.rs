//! Gamma-family primitives and Mellin-Barnes evaluation of Fox H-type functions.

pub mod bivariate;
pub mod contour;
pub mod fox;
pub mod gamma;

pub use bivariate::{bivariate_fox_h, bivariate_fox_h_with, BivariateHSpec, BivariateOptions, BivariateTerm, KernelBlock};
pub use contour::{
    plan_contour, plan_contour_with, ContourPlan, ContourPolicy, GammaPair, GammaTriple, HFunctionSpec,
    IncompleteHSpec, MellinSpec,
};
pub use fox::{fox_h, fox_h_with, incomplete_fox_h, incomplete_fox_h_complex, incomplete_fox_h_with, EvalOptions};
pub use gamma::{gamma_complex, log_gamma_complex, upper_incomplete_gamma};
