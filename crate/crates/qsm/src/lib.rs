//! Quantum stochastic modeling of stationary processes.
//!
//! The pipeline runs from a classical predictive model to its quantum
//! counterpart:
//!
//! 1. [`machine`] — finite unifilar hidden Markov models (ε-machines):
//!    validation, stationary distribution, word probabilities, classical
//!    Rényi complexities, trajectory sampling.
//! 2. [`imps`] — the infinite matrix-product-state representation with site
//!    matrices `A^x = √T^x`: transfer CP maps, fixed points, spectral gap,
//!    and boundary-free word probabilities.
//! 3. [`canonical`] — the canonical gauge exposing the Schmidt spectrum
//!    across every bond, the quantum Rényi complexities it defines, and
//!    bond-dimension truncation.
//! 4. [`qsim`] — the quantum predictive model itself: non-orthogonal memory
//!    states, Kraus step operators, and Born-rule trajectory sampling.
//! 5. [`oracle`] — independent brute-force checks: exhaustive word
//!    enumeration, finite-window Schmidt spectra, empirical distances.
//! 6. [`zoo`] — constructors for benchmark processes.

pub mod canonical;
pub mod imps;
pub mod machine;
pub mod oracle;
pub mod qsim;
pub mod zoo;

pub(crate) mod util;

use thiserror::Error;

/// Any error from the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Machine(#[from] machine::MachineError),
    #[error(transparent)]
    Imps(#[from] imps::ImpsError),
    #[error(transparent)]
    Canonical(#[from] canonical::CanonicalError),
    #[error(transparent)]
    Qsim(#[from] qsim::QsimError),
    #[error(transparent)]
    Oracle(#[from] oracle::OracleError),
    #[error(transparent)]
    Zoo(#[from] zoo::ZooError),
}

pub use canonical::{canonical_form, complexity_summary, AnalysisOptions, CanonicalForm, ComplexitySummary};
pub use imps::{fixed_points, site_matrices_from_machine, FixedPointPair, SiteMatrices};
pub use machine::{stationary_distribution, EpsilonMachine, StationaryDistribution, Word};
pub use qsim::{build_qsimulator, QSimulator};
pub use zoo::ProcessSpec;
