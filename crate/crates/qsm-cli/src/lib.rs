//! Command-line interface for analyzing unifilar hidden Markov models and
//! their quantum predictive models.
//!
//! Machines are given either as JSON files or as zoo shorthand
//! (`renewal{8}`, `biased_coin{0.3}`, `golden_mean{0.5}`, `even_process{0.5}`,
//! `alternating{}`). Exit codes: 0 success, 1 validation/acceptance failure,
//! 2 usage error, 3 numerical failure (no convergence, non-ergodic input);
//! diagnostics go to stderr.

pub mod commands;
pub mod io;

use clap::ValueEnum;

#[derive(Debug)]
pub enum CliError {
    /// Exit 1: the machine (or a compared distribution) failed its checks.
    Validation(String),
    /// Exit 2: arguments or input files are unusable.
    Usage(String),
    /// Exit 3: a numerical procedure failed (no convergence, non-ergodic).
    Numerical(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Usage(m) | CliError::Numerical(m) => m,
        }
    }
}

impl From<qsm::Error> for CliError {
    fn from(err: qsm::Error) -> Self {
        use qsm::imps::ImpsError;
        use qsm::machine::MachineError;
        match &err {
            qsm::Error::Machine(MachineError::NoConvergence { .. })
            | qsm::Error::Imps(ImpsError::NoConvergence { .. }) => {
                CliError::Numerical(format!("NoConvergence: {err}"))
            }
            qsm::Error::Imps(ImpsError::NonErgodicInput { .. }) => {
                CliError::Numerical(format!("NonErgodic: {err}"))
            }
            qsm::Error::Machine(MachineError::NotIrreducible { .. }) => {
                CliError::Validation(err.to_string())
            }
            _ => CliError::Usage(err.to_string()),
        }
    }
}

macro_rules! from_module_error {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(err: $ty) -> Self {
                CliError::from(qsm::Error::from(err))
            }
        }
    };
}
from_module_error!(qsm::machine::MachineError);
from_module_error!(qsm::imps::ImpsError);
from_module_error!(qsm::canonical::CanonicalError);
from_module_error!(qsm::qsim::QsimError);
from_module_error!(qsm::oracle::OracleError);
from_module_error!(qsm::zoo::ZooError);

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Engine {
    Classical,
    Quantum,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportKind {
    Canonical,
    Qsim,
}

impl ExportKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExportKind::Canonical => "canonical",
            ExportKind::Qsim => "qsim",
        }
    }
}

