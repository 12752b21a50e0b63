//! Independent brute-force cross-checks for the analytic pipeline.
//!
//! Everything here is deliberately dumb: exhaustive enumeration of word
//! distributions by dynamic programming, finite windows onto the q-sample —
//! both the raw amplitude matrix `S[w_p, w_f] = √P(w_p w_f)` and a purified
//! variant whose singular values converge to the Schmidt coefficients as the
//! windows grow — and total-variation distances between empirical and exact
//! distributions. These oracles never touch the transfer maps or the
//! canonical form, so agreement with them is evidence rather than tautology.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::machine::{EpsilonMachine, StationaryDistribution, Word};

/// Cap on `|A|^L` for exhaustive enumeration.
pub const MAX_ENUM_WORDS: usize = 1 << 24;

/// Cap on `|A|^max(L_p, L_f)` for the q-sample window.
pub const MAX_WINDOW_DIM: usize = 1 << 14;

/// Minimum sliding windows per word for an empirical estimate to count.
pub const MIN_WINDOWS_PER_WORD: usize = 100;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("window of {words} words exceeds the cap of {cap}")]
    WindowTooLarge { words: usize, cap: usize },

    #[error("{got} sliding windows is below the required {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("distributions have different shape: {0}")]
    ShapeMismatch(String),

    #[error("symbol index {index} outside alphabet of size {alphabet_size}")]
    UnknownSymbol { index: usize, alphabet_size: usize },
}

pub type OracleResult<T> = Result<T, OracleError>;

/// The exact distribution over all words of one length, indexed base-`|A|`
/// with the first emitted symbol most significant.
#[derive(Debug, Clone)]
pub struct WordDistribution {
    length: usize,
    num_symbols: usize,
    probs: Vec<f64>,
}

impl WordDistribution {
    pub fn from_probs(length: usize, num_symbols: usize, probs: Vec<f64>) -> Self {
        assert_eq!(probs.len(), num_symbols.pow(length as u32));
        WordDistribution { length, num_symbols, probs }
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn word_count(&self) -> usize {
        self.probs.len()
    }

    pub fn index_of(&self, word: &Word) -> OracleResult<usize> {
        if word.len() != self.length {
            return Err(OracleError::ShapeMismatch(format!(
                "word length {} vs distribution length {}",
                word.len(),
                self.length
            )));
        }
        let mut idx = 0;
        for &x in word.iter() {
            if x >= self.num_symbols {
                return Err(OracleError::UnknownSymbol {
                    index: x,
                    alphabet_size: self.num_symbols,
                });
            }
            idx = idx * self.num_symbols + x;
        }
        Ok(idx)
    }

    pub fn word_of(&self, mut idx: usize) -> Word {
        let mut symbols = vec![0usize; self.length];
        for slot in symbols.iter_mut().rev() {
            *slot = idx % self.num_symbols;
            idx /= self.num_symbols;
        }
        Word::new(symbols)
    }

    pub fn prob(&self, word: &Word) -> OracleResult<f64> {
        Ok(self.probs[self.index_of(word)?])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Marginalize out the last symbol, giving the length `L−1` distribution.
    pub fn marginal(&self) -> WordDistribution {
        assert!(self.length > 0, "cannot marginalize the empty-word distribution");
        let probs: Vec<f64> = self
            .probs
            .chunks(self.num_symbols)
            .map(|chunk| chunk.iter().sum())
            .collect();
        WordDistribution { length: self.length - 1, num_symbols: self.num_symbols, probs }
    }

    /// Total-variation distance `½ Σ_w |p(w) − q(w)|`.
    pub fn tv_distance(&self, other: &WordDistribution) -> OracleResult<f64> {
        if self.length != other.length || self.num_symbols != other.num_symbols {
            return Err(OracleError::ShapeMismatch(format!(
                "({}, {}) vs ({}, {})",
                self.length, self.num_symbols, other.length, other.num_symbols
            )));
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(other.probs.iter())
                .map(|(p, q)| (p - q).abs())
                .sum::<f64>())
    }
}

/// Sparse `(from, to, prob)` lists per symbol.
fn sparse_transitions(machine: &EpsilonMachine) -> Vec<Vec<(usize, usize, f64)>> {
    let m = machine.num_states();
    machine
        .transitions()
        .iter()
        .map(|t| {
            let mut list = Vec::new();
            for k in 0..m {
                for j in 0..m {
                    let p = t[(k, j)];
                    if p > 0.0 {
                        list.push((k, j, p));
                    }
                }
            }
            list
        })
        .collect()
}

/// Extend a flat occupancy buffer (`words × m`) by one symbol to
/// `words·|A| × m`, appending the new symbol as the least significant digit.
fn extend_level(
    occ: &[f64],
    words: usize,
    m: usize,
    trans: &[Vec<(usize, usize, f64)>],
) -> Vec<f64> {
    let a = trans.len();
    let mut next = vec![0.0; words * a * m];
    for w in 0..words {
        let src = &occ[w * m..(w + 1) * m];
        for (x, list) in trans.iter().enumerate() {
            let dst = (w * a + x) * m;
            for &(k, j, p) in list {
                let v = src[k];
                if v != 0.0 {
                    next[dst + j] += v * p;
                }
            }
        }
    }
    next
}

/// Exact distribution over all length-`length` words by dynamic programming on
/// state-occupancy vectors: `O(|A|^L · m)` with prefix sharing.
pub fn enumerate_words(
    machine: &EpsilonMachine,
    pi: &StationaryDistribution,
    length: usize,
) -> OracleResult<WordDistribution> {
    let a = machine.num_symbols();
    let word_count = a.checked_pow(length as u32).filter(|&w| w <= MAX_ENUM_WORDS).ok_or(
        OracleError::WindowTooLarge {
            words: usize::MAX,
            cap: MAX_ENUM_WORDS,
        },
    )?;
    let m = machine.num_states();
    let trans = sparse_transitions(machine);

    let mut occ: Vec<f64> = pi.as_slice().to_vec();
    let mut words = 1;
    for _ in 0..length {
        occ = extend_level(&occ, words, m, &trans);
        words *= a;
    }
    debug_assert_eq!(words, word_count);
    let probs = occ.chunks(m).map(|chunk| chunk.iter().sum()).collect();
    Ok(WordDistribution { length, num_symbols: a, probs })
}

/// A finite window onto the q-sample: the amplitude matrix
/// `S[w_p, w_f] = √P(w_p w_f)` over pasts of length `l_past` and futures of
/// length `l_future`, with the past window starting from the stationary
/// causal-state ensemble.
#[derive(Debug, Clone)]
pub struct QSampleWindow {
    pub l_past: usize,
    pub l_future: usize,
    pub amplitudes: DMatrix<f64>,
}

pub fn qsample_window(
    machine: &EpsilonMachine,
    pi: &StationaryDistribution,
    l_past: usize,
    l_future: usize,
) -> OracleResult<QSampleWindow> {
    let a = machine.num_symbols();
    let rows = a
        .checked_pow(l_past as u32)
        .filter(|&w| w <= MAX_WINDOW_DIM)
        .ok_or(OracleError::WindowTooLarge { words: usize::MAX, cap: MAX_WINDOW_DIM })?;
    let cols = a
        .checked_pow(l_future as u32)
        .filter(|&w| w <= MAX_WINDOW_DIM)
        .ok_or(OracleError::WindowTooLarge { words: usize::MAX, cap: MAX_WINDOW_DIM })?;
    let m = machine.num_states();
    let trans = sparse_transitions(machine);

    // Occupancy after each possible past, then futures per past; this keeps
    // memory at O((|A|^Lp + |A|^Lf) m) instead of materializing the joint
    // occupancy table.
    let mut past_occ: Vec<f64> = pi.as_slice().to_vec();
    let mut words = 1;
    for _ in 0..l_past {
        past_occ = extend_level(&past_occ, words, m, &trans);
        words *= a;
    }

    let mut amplitudes = DMatrix::zeros(rows, cols);
    for wp in 0..rows {
        let mut occ = past_occ[wp * m..(wp + 1) * m].to_vec();
        let mut words = 1;
        for _ in 0..l_future {
            occ = extend_level(&occ, words, m, &trans);
            words *= a;
        }
        for f in 0..cols {
            let p: f64 = occ[f * m..(f + 1) * m].iter().sum();
            amplitudes[(wp, f)] = p.max(0.0).sqrt();
        }
    }
    Ok(QSampleWindow { l_past, l_future, amplitudes })
}

/// Singular values of the finite-window q-sample across the past–future cut,
/// descending. These converge to the Schmidt coefficients as the windows
/// grow; the number of values above 1e-6 is a lower bound on the Schmidt
/// rank.
///
/// The window state purifies the stationary past ensemble with the causal
/// state at the cut: rows are indexed by `(start state, past word)` with
/// amplitudes `√(π_k P(w_p w_f | k))`. For a unifilar machine the square
/// root factorizes across the cut (the mid-window state is a function of
/// `(k, w_p)`), so this matrix is exactly `F · G` with
/// `G[j, w_f] = √P(w_f | j)`; stationarity makes `FᵀF = diag(π)`, and the
/// nonzero singular values reduce to those of the m × |A|^{L_f} matrix
/// `diag(√π) G`, which is what gets decomposed. Consequences worth knowing:
/// the rank can never exceed the number of causal states, and the spectrum
/// depends on the past window only through the stationary weights. (A plain
/// unpurified past ensemble does not factorize: its windows carry spurious
/// extra rank that dies off only at the machine's synchronization rate —
/// slower than the spectral tolerances used here, e.g. ~2⁻ᴸᐟ² for the even
/// process.)
pub fn qsample_schmidt_oracle(
    machine: &EpsilonMachine,
    pi: &StationaryDistribution,
    l_past: usize,
    l_future: usize,
) -> OracleResult<Vec<f64>> {
    let a = machine.num_symbols();
    for window in [l_past, l_future] {
        a.checked_pow(window as u32)
            .filter(|&w| w <= MAX_WINDOW_DIM)
            .ok_or(OracleError::WindowTooLarge { words: usize::MAX, cap: MAX_WINDOW_DIM })?;
    }
    let m = machine.num_states();
    let cols = a.pow(l_future as u32);
    let trans = sparse_transitions(machine);

    // G[j, w_f] = √P(w_f | j), scaled by √π_j.
    let mut weighted = DMatrix::<f64>::zeros(m, cols);
    for j in 0..m {
        let mut occ = vec![0.0; m];
        occ[j] = 1.0;
        let mut words = 1;
        for _ in 0..l_future {
            occ = extend_level(&occ, words, m, &trans);
            words *= a;
        }
        let scale = pi.get(j).max(0.0).sqrt();
        for f in 0..cols {
            let p: f64 = occ[f * m..(f + 1) * m].iter().sum();
            weighted[(j, f)] = scale * p.max(0.0).sqrt();
        }
    }
    let mut values: Vec<f64> =
        nalgebra::SVD::new(weighted, false, false).singular_values.iter().copied().collect();
    values.sort_by(|x, y| y.total_cmp(x));
    Ok(values)
}

/// Total-variation distance between the sliding-window empirical length-L
/// distribution of a sampled stream and an exact distribution.
pub fn empirical_tv(samples: &Word, exact: &WordDistribution) -> OracleResult<f64> {
    let l = exact.length();
    let a = exact.num_symbols();
    if l == 0 {
        return Ok(0.0);
    }
    let windows = samples.len().saturating_sub(l - 1);
    let need = MIN_WINDOWS_PER_WORD * exact.word_count();
    if windows < need {
        return Err(OracleError::InsufficientSamples { got: windows, need });
    }
    for &x in samples.iter() {
        if x >= a {
            return Err(OracleError::UnknownSymbol { index: x, alphabet_size: a });
        }
    }

    let mut counts = vec![0u64; exact.word_count()];
    let symbols = samples.symbols();
    let top = a.pow((l - 1) as u32);
    let mut idx = 0;
    for (i, &x) in symbols.iter().enumerate() {
        if i < l {
            idx = idx * a + x;
            if i + 1 == l {
                counts[idx] += 1;
            }
        } else {
            idx = (idx - symbols[i - l] * top) * a + x;
            counts[idx] += 1;
        }
    }

    let inv = 1.0 / windows as f64;
    let tv = 0.5
        * counts
            .iter()
            .zip(exact.probs().iter())
            .map(|(&c, &p)| (c as f64 * inv - p).abs())
            .sum::<f64>();
    Ok(tv)
}
