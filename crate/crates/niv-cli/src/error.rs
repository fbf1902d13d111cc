//! Error type with the documented exit-code mapping: 2 for usage/input
//! problems, 3 for numerical failures (the NaN guards).

use std::fmt;

pub struct CliError {
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn usage(message: String) -> CliError {
        CliError {
            message,
            exit_code: 2,
        }
    }

    pub fn numerical(message: String) -> CliError {
        CliError {
            message,
            exit_code: 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl fmt::Debug for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<niv::scene::SceneError> for CliError {
    fn from(e: niv::scene::SceneError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<niv::tracer::TracerError> for CliError {
    fn from(e: niv::tracer::TracerError) -> Self {
        match e {
            niv::tracer::TracerError::NonFinite { .. } => CliError::numerical(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<niv::dataset::DatasetError> for CliError {
    fn from(e: niv::dataset::DatasetError) -> Self {
        match e {
            niv::dataset::DatasetError::Tracer(t) => t.into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<niv::field::FieldError> for CliError {
    fn from(e: niv::field::FieldError) -> Self {
        match e {
            niv::field::FieldError::NonFiniteLoss { .. }
            | niv::field::FieldError::NonFiniteGradient(_) => CliError::numerical(e.to_string()),
            _ => CliError::usage(e.to_string()),
        }
    }
}

impl From<niv::probes::io::ProbeIoError> for CliError {
    fn from(e: niv::probes::io::ProbeIoError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<niv::render::RenderError> for CliError {
    fn from(e: niv::render::RenderError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<niv::eval::EvalError> for CliError {
    fn from(e: niv::eval::EvalError) -> Self {
        match e {
            niv::eval::EvalError::Field(f) => f.into(),
            _ => CliError::usage(e.to_string()),
        }
    }
}
