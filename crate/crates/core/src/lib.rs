//! Exterior-domain semilinear wave simulator with null-form cubic
//! nonlinearities, together with the diagnostics used to measure its decay.

pub mod diagnostics;
pub mod fields;
pub mod geometry;
pub mod initdata;
pub mod io;
pub mod nullforms;
pub mod registry;
pub mod solver;

/// Any error raised by this crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    NullForm(#[from] nullforms::NullFormError),
    #[error(transparent)]
    Field(#[from] fields::FieldError),
    #[error(transparent)]
    Init(#[from] initdata::InitError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Diagnostics(#[from] diagnostics::DiagnosticsError),
    #[error(transparent)]
    Fit(#[from] diagnostics::FitError),
    #[error(transparent)]
    Io(#[from] io::IoError),
    #[error(transparent)]
    Registry(#[from] registry::RegistryError),
}
