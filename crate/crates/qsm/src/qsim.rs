//! The quantum predictive model (q-simulator) built from the canonical form.
//!
//! The internal memory states are `σ_k = W_rᵀ |k⟩`, expressed in the
//! r-dimensional memory basis; their Gram matrix reproduces `V_r`, so two
//! causal states with similar futures get non-orthogonal memory states —
//! the source of the quantum memory advantage. One generation step is the
//! Kraus family `B_x = (W_r⁻¹ A^x W_r)ᵀ`: measuring the output register
//! yields symbol `x` with probability `‖B_x v‖²` and collapses the memory to
//! `B_x v / ‖B_x v‖`. Unifilarity makes the transition law exact:
//! `B_x σ_k = √(T^x_{kj}) σ_j` with `j` the unique successor.
//!
//! The stationary memory state `φ = Σ_k π_k σ_k σ_kᵀ` has the squared Schmidt
//! coefficients as its spectrum, which ties the sampler back to the
//! entanglement computed in the canonical module.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::canonical::CanonicalForm;
use crate::imps::SiteMatrices;
use crate::machine::{draw_index, StationaryDistribution, Word};
use crate::util::max_abs;

/// Largest tolerated Gram-matrix deviation when building the simulator.
const GRAM_TOL: f64 = 1e-8;

/// Largest tolerated deviation of step probabilities from a unit total.
const NORM_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("memory-state Gram matrix deviates from V_r by {max_dev:.3e}")]
    GramMismatch { max_dev: f64 },

    #[error("state norm drifted by {deviation:.3e} during quantum stepping")]
    NormDrift { deviation: f64 },

    #[error("symbol index {index} outside alphabet of size {alphabet_size}")]
    UnknownSymbol { index: usize, alphabet_size: usize },
}

pub type QsimResult<T> = Result<T, QsimError>;

/// A constructed q-simulator: memory states, Kraus step operators, and the
/// stationary memory state.
#[derive(Debug, Clone)]
pub struct QSimulator {
    /// r × m matrix whose k-th column is the memory state `σ_k`.
    sigma: DMatrix<f64>,
    /// One r × r Kraus operator per symbol; `Σ_x B_xᵀ B_x = I`.
    kraus: Vec<DMatrix<f64>>,
    /// Stationary memory state `Σ_k π_k σ_k σ_kᵀ`, unit trace, PSD.
    phi: DMatrix<f64>,
}

impl QSimulator {
    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// The memory state encoding causal state `k`.
    pub fn sigma_state(&self, k: usize) -> DVector<f64> {
        self.sigma.column(k).into_owned()
    }

    pub fn kraus(&self) -> &[DMatrix<f64>] {
        &self.kraus
    }

    pub fn kraus_op(&self, symbol: usize) -> &DMatrix<f64> {
        &self.kraus[symbol]
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn memory_dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn num_causal_states(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn num_symbols(&self) -> usize {
        self.kraus.len()
    }

    /// Rebuild from parts, e.g. when importing exported artifacts.
    pub fn from_parts(sigma: DMatrix<f64>, kraus: Vec<DMatrix<f64>>, phi: DMatrix<f64>) -> Self {
        QSimulator { sigma, kraus, phi }
    }
}

/// Assemble the q-simulator from the canonical form and the stationary
/// distribution. Verifies that the memory-state Gram matrix reproduces `V_r`.
pub fn build_qsimulator(
    site: &SiteMatrices,
    cf: &CanonicalForm,
    pi: &StationaryDistribution,
) -> QsimResult<QSimulator> {
    let sigma = cf.w_r().transpose();
    let gram = cf.w_r() * cf.w_r().transpose();
    let max_dev = max_abs(&(&gram - cf.v_r()));
    if max_dev > GRAM_TOL {
        return Err(QsimError::GramMismatch { max_dev });
    }
    let kraus: Vec<DMatrix<f64>> = site
        .tensors()
        .iter()
        .map(|a| (cf.w_r_pinv() * (a * cf.w_r())).transpose())
        .collect();
    let phi = memory_state_phi(pi, &sigma);
    Ok(QSimulator { sigma, kraus, phi })
}

/// The stationary memory state `φ = Σ_k π_k σ_k σ_kᵀ` for memory states given
/// as the columns of `sigma`.
pub fn memory_state_phi(pi: &StationaryDistribution, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let r = sigma.nrows();
    let mut phi = DMatrix::zeros(r, r);
    for (k, &p) in pi.as_slice().iter().enumerate() {
        let col = sigma.column(k);
        for i in 0..r {
            for j in 0..r {
                phi[(i, j)] += p * col[i] * col[j];
            }
        }
    }
    phi
}

/// Emission probabilities `p_x = ‖B_x v‖²` from memory state `v`.
pub fn emission_probabilities(qsim: &QSimulator, v: &DVector<f64>) -> Vec<f64> {
    qsim.kraus.iter().map(|b| (b * v).norm_squared()).collect()
}

/// One generation step: draw a symbol with probability `‖B_x v‖²` and collapse
/// the memory state accordingly.
pub fn step_quantum(
    qsim: &QSimulator,
    v: &DVector<f64>,
    rng: &mut impl Rng,
) -> QsimResult<(usize, DVector<f64>)> {
    let norm_dev = (v.norm() - 1.0).abs();
    if norm_dev > 1e-10 {
        return Err(QsimError::NormDrift { deviation: norm_dev });
    }
    let probs = emission_probabilities(qsim, v);
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORM_TOL {
        return Err(QsimError::NormDrift { deviation: (total - 1.0).abs() });
    }
    let x = draw_index(&probs, rng);
    let next = qsim.kraus_op(x) * v;
    let norm = next.norm();
    Ok((x, next / norm))
}

/// Sample a length-`length` trajectory. The initial memory state is `σ_k`
/// with `k` drawn from the stationary causal-state ensemble; deterministic
/// for a fixed seed.
pub fn sample_quantum(
    qsim: &QSimulator,
    pi: &StationaryDistribution,
    seed: u64,
    length: usize,
) -> QsimResult<Word> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let k = draw_index(pi.as_slice(), &mut rng);
    let mut v = qsim.sigma_state(k);
    let norm = v.norm();
    v /= norm;
    let mut symbols = Vec::with_capacity(length);
    for _ in 0..length {
        let (x, next) = step_quantum(qsim, &v, &mut rng)?;
        symbols.push(x);
        v = next;
    }
    Ok(Word::new(symbols))
}

/// Exact word probability generated by a Kraus family from the stationary
/// ensemble: `Σ_k π_k ‖B_{x_L} ⋯ B_{x_1} σ_k‖²`. Also usable with externally
/// supplied blocks (e.g. analytic reference constructions).
pub fn word_probability_kraus(
    sigma: &DMatrix<f64>,
    kraus: &[DMatrix<f64>],
    pi: &StationaryDistribution,
    word: &Word,
) -> QsimResult<f64> {
    let alphabet_size = kraus.len();
    for &x in word.iter() {
        if x >= alphabet_size {
            return Err(QsimError::UnknownSymbol { index: x, alphabet_size });
        }
    }
    let mut total = 0.0;
    for (k, &p) in pi.as_slice().iter().enumerate() {
        let mut v = sigma.column(k).into_owned();
        for &x in word.iter() {
            v = &kraus[x] * v;
        }
        total += p * v.norm_squared();
    }
    Ok(total)
}

/// Exact word probability of the q-simulator from the stationary ensemble.
pub fn word_probability_quantum(
    qsim: &QSimulator,
    pi: &StationaryDistribution,
    word: &Word,
) -> QsimResult<f64> {
    word_probability_kraus(&qsim.sigma, &qsim.kraus, pi, word)
}
