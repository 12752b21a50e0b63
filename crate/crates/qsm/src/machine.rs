//! Unifilar hidden Markov models (ε-machines) and their classical analysis.
//!
//! An ε-machine over a finite alphabet is specified by a transition tensor
//! `T^x_{kj}`: the probability of emitting symbol `x` while moving from causal
//! state `s_k` to state `s_j`. Unifilarity means the successor state is a
//! deterministic function of the current state and the emitted symbol, so
//! each `(k, x)` row of the tensor has at most one nonzero entry.
//!
//! This module provides validation, the stationary state distribution, exact
//! word probabilities, Rényi memory complexities, and seeded trajectory
//! sampling.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::util::renyi_bits;

/// Default tolerance for the probabilistic validation checks (rows summing to
/// one, entries inside `[0, 1]`). Machine files often carry rounded decimals.
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-9;

/// Transition probabilities below this threshold are treated as exact zeros,
/// both by the unifilarity check and by the sparse transition structure.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Default residual tolerance for the stationary-distribution solve.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-13;

/// Default iteration cap for the stationary-distribution power iteration.
pub const DEFAULT_STATIONARY_MAX_ITER: usize = 1_000_000;

/// Largest state count for which the dense linear-solve fallback is attempted.
const DENSE_SOLVE_LIMIT: usize = 1024;

#[derive(Debug, Error)]
pub enum MachineError {
    /// The transition tensor dimensions disagree with the label lists.
    #[error("transition tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    /// Iterative solve exhausted its iteration budget.
    #[error("no convergence after {max_iter} iterations (residual {residual:.3e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    /// The transition graph has more than one closed communicating class, so
    /// the stationary distribution is not unique.
    #[error("transition graph is not irreducible ({detail})")]
    NotIrreducible { detail: String },

    /// A word refers to a symbol index outside the machine's alphabet.
    #[error("symbol index {index} outside alphabet of size {alphabet_size}")]
    UnknownSymbol { index: usize, alphabet_size: usize },

    /// A word refers to a symbol label the machine does not know.
    #[error("symbol label {0:?} is not in the alphabet")]
    UnknownSymbolLabel(String),

    /// Rényi order must be a nonnegative real.
    #[error("Rényi order must be nonnegative, got {0}")]
    NegativeAlpha(f64),
}

pub type MachineResult<T> = Result<T, MachineError>;

/// A finite word over the machine's alphabet, stored as symbol indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Resolve a sequence of symbol labels against a machine's alphabet.
    pub fn from_labels<S: AsRef<str>>(
        machine: &EpsilonMachine,
        labels: &[S],
    ) -> MachineResult<Self> {
        labels
            .iter()
            .map(|l| {
                machine
                    .symbol_index(l.as_ref())
                    .ok_or_else(|| MachineError::UnknownSymbolLabel(l.as_ref().to_string()))
            })
            .collect::<MachineResult<Vec<usize>>>()
            .map(Word)
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, usize> {
        self.0.iter()
    }

    pub fn push(&mut self, symbol: usize) {
        self.0.push(symbol);
    }

    /// Render the word using the machine's symbol labels.
    pub fn to_labels(&self, machine: &EpsilonMachine) -> MachineResult<Vec<String>> {
        self.0
            .iter()
            .map(|&x| {
                machine
                    .alphabet()
                    .get(x)
                    .cloned()
                    .ok_or(MachineError::UnknownSymbol {
                        index: x,
                        alphabet_size: machine.num_symbols(),
                    })
            })
            .collect()
    }
}

impl From<Vec<usize>> for Word {
    fn from(symbols: Vec<usize>) -> Self {
        Word(symbols)
    }
}

impl From<&[usize]> for Word {
    fn from(symbols: &[usize]) -> Self {
        Word(symbols.to_vec())
    }
}

/// A single validation failure, with enough location data to fix the input.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `Σ_{x,j} T^x_{kj}` deviates from one by `deviation`.
    RowSum { state: usize, deviation: f64 },
    /// Some `T^x_{kj}` lies outside `[0, 1]`.
    EntryOutOfRange {
        symbol: usize,
        from: usize,
        to: usize,
        value: f64,
    },
    /// More than one successor carries positive probability for `(state, symbol)`.
    Unifilarity {
        state: usize,
        symbol: usize,
        successors: Vec<usize>,
    },
    /// The support graph of `M = Σ_x T^x` is not strongly connected.
    NotStronglyConnected {
        unreachable: usize,
        non_returning: usize,
    },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::RowSum { state, deviation } => {
                write!(f, "row sum at state {state} deviates from 1 by {deviation:.3e}")
            }
            Violation::EntryOutOfRange { symbol, from, to, value } => write!(
                f,
                "entry T^{symbol}_[{from},{to}] = {value} lies outside [0, 1]"
            ),
            Violation::Unifilarity { state, symbol, successors } => write!(
                f,
                "unifilarity violated at (state {state}, symbol {symbol}): successors {successors:?}"
            ),
            Violation::NotStronglyConnected { unreachable, non_returning } => write!(
                f,
                "transition graph not strongly connected: {unreachable} states unreachable from state 0, {non_returning} states cannot return"
            ),
        }
    }
}

/// Outcome of [`EpsilonMachine::validate`]. Empty means the machine is a
/// well-formed, irreducible, unifilar HMM.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            write!(f, "valid")
        } else {
            for v in &self.violations {
                writeln!(f, "{v}")?;
            }
            Ok(())
        }
    }
}

/// A finite unifilar hidden Markov model: ordered symbol and state labels plus
/// the transition tensor `T^x_{kj} = P(emit x, go to j | in k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMachine {
    alphabet: Vec<String>,
    states: Vec<String>,
    transitions: Vec<DMatrix<f64>>,
}

impl EpsilonMachine {
    /// Build a machine, checking only that the tensor shape is consistent with
    /// the label lists. Probabilistic invariants are checked by [`Self::validate`].
    pub fn new(
        alphabet: Vec<String>,
        states: Vec<String>,
        transitions: Vec<DMatrix<f64>>,
    ) -> MachineResult<Self> {
        let m = states.len();
        if alphabet.is_empty() || m == 0 {
            return Err(MachineError::ShapeMismatch(
                "alphabet and state list must be nonempty".into(),
            ));
        }
        if transitions.len() != alphabet.len() {
            return Err(MachineError::ShapeMismatch(format!(
                "{} transition matrices for {} symbols",
                transitions.len(),
                alphabet.len()
            )));
        }
        for (x, t) in transitions.iter().enumerate() {
            if t.nrows() != m || t.ncols() != m {
                return Err(MachineError::ShapeMismatch(format!(
                    "T^{x} is {}x{} but there are {m} states",
                    t.nrows(),
                    t.ncols()
                )));
            }
        }
        Ok(EpsilonMachine { alphabet, states, transitions })
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_symbols(&self) -> usize {
        self.alphabet.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn transition(&self, symbol: usize) -> &DMatrix<f64> {
        &self.transitions[symbol]
    }

    pub fn transitions(&self) -> &[DMatrix<f64>] {
        &self.transitions
    }

    pub fn prob(&self, symbol: usize, from: usize, to: usize) -> f64 {
        self.transitions[symbol][(from, to)]
    }

    pub fn symbol_index(&self, label: &str) -> Option<usize> {
        self.alphabet.iter().position(|l| l == label)
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|l| l == label)
    }

    /// The symbol-summed transition matrix `M = Σ_x T^x` of the underlying
    /// state chain.
    pub fn merged_transition(&self) -> DMatrix<f64> {
        let m = self.num_states();
        let mut sum = DMatrix::zeros(m, m);
        for t in &self.transitions {
            sum += t;
        }
        sum
    }

    /// Unifilar successor of `(state, symbol)` with its probability, ignoring
    /// entries below [`ZERO_THRESHOLD`]. `None` if the symbol cannot be emitted.
    pub fn successor(&self, state: usize, symbol: usize) -> Option<(usize, f64)> {
        let row = self.transitions[symbol].row(state);
        let mut best: Option<(usize, f64)> = None;
        for (j, &p) in row.iter().enumerate() {
            if p > ZERO_THRESHOLD && best.is_none_or(|(_, q)| p > q) {
                best = Some((j, p));
            }
        }
        best
    }

    /// Check row stochasticity, entry ranges, unifilarity, and irreducibility.
    pub fn validate(&self, tol: f64) -> ValidationReport {
        let m = self.num_states();
        let mut violations = Vec::new();

        for (x, t) in self.transitions.iter().enumerate() {
            for k in 0..m {
                for j in 0..m {
                    let p = t[(k, j)];
                    if !p.is_finite() || !(-tol..=1.0 + tol).contains(&p) {
                        violations.push(Violation::EntryOutOfRange {
                            symbol: x,
                            from: k,
                            to: j,
                            value: p,
                        });
                    }
                }
            }
        }

        for k in 0..m {
            let total: f64 = self.transitions.iter().map(|t| t.row(k).sum()).sum();
            if (total - 1.0).abs() > tol {
                violations.push(Violation::RowSum { state: k, deviation: total - 1.0 });
            }
        }

        for (x, t) in self.transitions.iter().enumerate() {
            for k in 0..m {
                let successors: Vec<usize> =
                    (0..m).filter(|&j| t[(k, j)] > ZERO_THRESHOLD).collect();
                if successors.len() > 1 {
                    violations.push(Violation::Unifilarity { state: k, symbol: x, successors });
                }
            }
        }

        let (unreachable, non_returning) = self.connectivity_defect();
        if unreachable > 0 || non_returning > 0 {
            violations.push(Violation::NotStronglyConnected { unreachable, non_returning });
        }

        ValidationReport { violations }
    }

    /// Number of states not reachable from state 0, and not reaching state 0,
    /// in the support graph of `M`. `(0, 0)` iff strongly connected.
    fn connectivity_defect(&self) -> (usize, usize) {
        let m = self.num_states();
        let merged = self.merged_transition();
        let edges: Vec<Vec<usize>> = (0..m)
            .map(|k| (0..m).filter(|&j| merged[(k, j)] > ZERO_THRESHOLD).collect())
            .collect();
        let redges: Vec<Vec<usize>> = {
            let mut r = vec![Vec::new(); m];
            for (k, out) in edges.iter().enumerate() {
                for &j in out {
                    r[j].push(k);
                }
            }
            r
        };
        let reach = |adj: &[Vec<usize>]| -> usize {
            let mut seen = vec![false; m];
            let mut stack = vec![0usize];
            seen[0] = true;
            let mut count = 1;
            while let Some(k) = stack.pop() {
                for &j in &adj[k] {
                    if !seen[j] {
                        seen[j] = true;
                        count += 1;
                        stack.push(j);
                    }
                }
            }
            count
        };
        (m - reach(&edges), m - reach(&redges))
    }
}

/// Stationary distribution over causal states: `π M = π`, `Σ π_k = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution(DVector<f64>);

impl StationaryDistribution {
    pub fn probs(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.0[k]
    }

    /// Wrap an externally computed distribution. Callers are responsible for
    /// stationarity; prefer [`stationary_distribution`].
    pub fn from_vector(pi: DVector<f64>) -> Self {
        StationaryDistribution(pi)
    }
}

/// Solve `π M = π` by damped power iteration, falling back to a dense linear
/// solve for machines with at most 1024 states.
///
/// The update is averaged with the identity (`π ← (π + πM)/2`) so periodic but
/// irreducible chains converge as well.
pub fn stationary_distribution(
    machine: &EpsilonMachine,
    tol: f64,
    max_iter: usize,
) -> MachineResult<StationaryDistribution> {
    let m = machine.num_states();
    let (unreachable, non_returning) = machine.connectivity_defect();
    if unreachable > 0 || non_returning > 0 {
        return Err(MachineError::NotIrreducible {
            detail: format!(
                "{unreachable} states unreachable from state 0, {non_returning} states cannot return"
            ),
        });
    }

    let mt = machine.merged_transition().transpose();
    let mut pi = DVector::from_element(m, 1.0 / m as f64);
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = &mt * &pi;
        residual = (&next - &pi).amax();
        if residual <= tol {
            pi = next;
            break;
        }
        pi = (next + &pi) * 0.5;
        let total = pi.sum();
        pi /= total;
    }

    if residual > tol {
        if m <= DENSE_SOLVE_LIMIT {
            pi = dense_stationary_solve(&mt, m)?;
        } else {
            return Err(MachineError::NoConvergence { max_iter, residual });
        }
    }

    let total = pi.sum();
    pi /= total;
    if pi.iter().any(|&p| p <= 0.0) {
        return Err(MachineError::NotIrreducible {
            detail: "stationary solve produced nonpositive entries".into(),
        });
    }
    Ok(StationaryDistribution(pi))
}

/// Solve `(Mᵀ − I) π = 0` with the normalization `Σ π = 1` replacing one row.
fn dense_stationary_solve(mt: &DMatrix<f64>, m: usize) -> MachineResult<DVector<f64>> {
    let mut a = mt - DMatrix::<f64>::identity(m, m);
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(m);
    b[m - 1] = 1.0;
    a.lu().solve(&b).ok_or(MachineError::NotIrreducible {
        detail: "singular stationary system".into(),
    })
}

/// Exact probability of emitting `word` from the stationary ensemble:
/// `πᵀ T^{x_1} ⋯ T^{x_L} 𝟙`. The empty word has probability one.
pub fn word_probability_classical(
    machine: &EpsilonMachine,
    pi: &StationaryDistribution,
    word: &Word,
) -> MachineResult<f64> {
    let m = machine.num_states();
    let alphabet_size = machine.num_symbols();
    let mut row: Vec<f64> = pi.as_slice().to_vec();
    let mut next = vec![0.0; m];
    for &x in word.iter() {
        if x >= alphabet_size {
            return Err(MachineError::UnknownSymbol { index: x, alphabet_size });
        }
        let t = machine.transition(x);
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..m {
            let w = row[k];
            if w == 0.0 {
                continue;
            }
            for j in 0..m {
                let p = t[(k, j)];
                if p > 0.0 {
                    next[j] += w * p;
                }
            }
        }
        std::mem::swap(&mut row, &mut next);
    }
    Ok(row.iter().sum())
}

/// Classical Rényi memory complexity `C_μ^α` in bits: the order-α entropy of
/// the stationary causal-state distribution. `α = 1` is the statistical
/// complexity, `α = 0` the topological complexity.
pub fn classical_complexity(pi: &StationaryDistribution, alpha: f64) -> MachineResult<f64> {
    if alpha < 0.0 {
        return Err(MachineError::NegativeAlpha(alpha));
    }
    Ok(renyi_bits(pi.as_slice(), alpha))
}

/// Sample a trajectory of `length` symbols, returning the emitted word and the
/// visited state path (which includes the initial state, so it has length
/// `length + 1`). Deterministic for a fixed seed.
pub fn sample_classical(
    machine: &EpsilonMachine,
    pi: &StationaryDistribution,
    seed: u64,
    length: usize,
) -> MachineResult<(Word, Vec<usize>)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = draw_index(pi.as_slice(), &mut rng);
    let mut path = Vec::with_capacity(length + 1);
    path.push(state);
    let mut symbols = Vec::with_capacity(length);

    let m = machine.num_states();
    // Flattened per-state outcome lists: (symbol, successor, probability).
    let rows: Vec<Vec<(usize, usize, f64)>> = (0..m)
        .map(|k| {
            let mut out = Vec::new();
            for (x, t) in machine.transitions().iter().enumerate() {
                for j in 0..m {
                    let p = t[(k, j)];
                    if p > ZERO_THRESHOLD {
                        out.push((x, j, p));
                    }
                }
            }
            out
        })
        .collect();

    for _ in 0..length {
        let u: f64 = rng.random();
        let outcomes = &rows[state];
        let mut acc = 0.0;
        let mut chosen = outcomes.len() - 1;
        for (i, &(_, _, p)) in outcomes.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = i;
                break;
            }
        }
        let (x, j, _) = outcomes[chosen];
        symbols.push(x);
        state = j;
        path.push(state);
    }
    Ok((Word(symbols), path))
}

pub(crate) fn draw_index(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}
