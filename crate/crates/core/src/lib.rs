//! Positive radial ground states of `−Δ_α u + λu = |u|^{p−1}u` in the plane,
//! where `−Δ_α` is the Laplacian with a point interaction of strength `α` at
//! the origin, together with the numerical checks that accompany them.

use thiserror::Error;

pub mod linops;
pub mod model;
pub mod numerics;
pub mod ode;
pub mod perturbed;
pub mod pohozaev;
pub mod shooting;
pub mod specfun;

use linops::LinopsError;
use model::ModelError;
use ode::OdeError;
use perturbed::PerturbedError;
use shooting::ShootingError;
use specfun::SpecfunError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Shooting(#[from] ShootingError),
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error(transparent)]
    Perturbed(#[from] PerturbedError),
    #[error(transparent)]
    Special(#[from] SpecfunError),
}

fn special_kind(e: &SpecfunError) -> &'static str {
    match e {
        SpecfunError::Domain { .. } => "Domain",
        SpecfunError::Order(_) => "Order",
    }
}

fn model_kind(e: &ModelError) -> &'static str {
    match e {
        ModelError::SubcriticalLambda { .. } => "SubcriticalLambda",
        ModelError::BadExponent { .. } => "BadExponent",
        ModelError::NonFinite { .. } => "NonFinite",
        ModelError::BadProfile(_) => "BadProfile",
        ModelError::TailTruncation { .. } => "TailTruncation",
        ModelError::DegenerateProfile(_) => "DegenerateProfile",
        ModelError::Special(s) => special_kind(s),
    }
}

fn ode_kind(e: &OdeError) -> &'static str {
    match e {
        OdeError::StepUnderflow { .. } => "StepUnderflow",
        OdeError::NonFinite { .. } => "NonFiniteState",
        OdeError::MaxSteps { .. } => "MaxSteps",
        OdeError::NoConvergence { .. } => "NoConvergence",
        OdeError::NoDecay(_) => "NoDecay",
        OdeError::Model(m) => model_kind(m),
    }
}

impl Error {
    /// Name of the innermost error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Model(m) => model_kind(m),
            Error::Ode(o) => ode_kind(o),
            Error::Shooting(s) => match s {
                ShootingError::Model(m) => model_kind(m),
                ShootingError::Ode(o) => ode_kind(o),
                ShootingError::NoBracket { .. } => "NoBracket",
                ShootingError::NonUnique { .. } => "NonUnique",
                ShootingError::Splice(_) => "Splice",
            },
            Error::Linops(l) => match l {
                LinopsError::BadGrid(_) => "BadGrid",
                LinopsError::ConvergenceFailure(_) => "ConvergenceFailure",
                LinopsError::Ode(o) => ode_kind(o),
            },
            Error::Perturbed(p) => match p {
                PerturbedError::BadEpsilon(_) => "BadEpsilon",
                PerturbedError::DecompositionFailure(_) => "DecompositionFailure",
                PerturbedError::Ode(o) => ode_kind(o),
                PerturbedError::Model(m) => model_kind(m),
                PerturbedError::Special(s) => special_kind(s),
            },
            Error::Special(s) => special_kind(s),
        }
    }

    /// Process exit code: 2 for invalid input, 3 when no bracket is found,
    /// 4 when the eigensolver fails, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "SubcriticalLambda" | "BadExponent" | "NonFinite" | "BadEpsilon" | "BadGrid" | "Domain"
            | "Order" => 2,
            "NoBracket" => 3,
            "ConvergenceFailure" => 4,
            _ => 1,
        }
    }
}
