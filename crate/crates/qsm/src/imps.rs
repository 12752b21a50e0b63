//! Infinite matrix-product-state representation of a unifilar HMM.
//!
//! The site matrices are the entrywise square roots `A^x = √T^x`; the transfer
//! matrix `𝔼 = Σ_x A^x ⊗ A^x` governs everything boundary-independent about
//! the state. Its left and right actions are realized as the completely
//! positive maps
//!
//! ```text
//! E_l(ρ) = Σ_x (A^x)ᵀ ρ A^x        E_r(ρ) = Σ_x A^x ρ (A^x)ᵀ
//! ```
//!
//! which this module applies without ever materializing the m² × m² matrix.
//! For unifilar site matrices every row of `A^x` has at most one nonzero
//! entry, so one map application costs `O(|A| m²)` instead of the dense
//! `O(|A| m³)`.
//!
//! The leading fixed points `V_l` (diagonal, carrying the stationary state
//! probabilities) and `V_r` (the Gram matrix of the q-simulator memory
//! states) are computed by power iteration with interleaved damping; the
//! spectral gap comes from a dense eigensolve at small bond dimension and
//! from the Wielandt-deflated transfer map (Arnoldi, then its raw growth
//! rate) beyond. A degenerate leading eigenvalue flags the process as
//! non-ergodic: boundary conditions then matter and downstream constructions
//! refuse the input.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::machine::{EpsilonMachine, Word, ZERO_THRESHOLD};
use crate::util::{frob_inner, max_abs};

/// Relative spectral gap below which the transfer matrix is treated as
/// degenerate and the process as non-ergodic.
pub const DEFAULT_DEGENERACY_THRESHOLD: f64 = 1e-8;

/// Default residual tolerance for the fixed-point iteration.
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-12;

/// Default iteration cap for the fixed-point iteration.
pub const DEFAULT_FIXED_POINT_MAX_ITER: usize = 500_000;

/// Largest bond dimension for which the gap is computed from a dense
/// eigensolve of the full m² × m² transfer matrix.
const DENSE_SPECTRUM_LIMIT: usize = 16;

/// Fixed seed for the Arnoldi start vector; the gap estimate is deterministic.
const ARNOLDI_SEED: u64 = 0x051a_b1e5;

#[derive(Debug, Error)]
pub enum ImpsError {
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    DimensionMismatch { expected: usize, rows: usize, cols: usize },

    #[error("fixed-point iteration did not converge after {max_iter} iterations (residual {residual:.3e})")]
    NoConvergence { max_iter: usize, residual: f64 },

    #[error("transfer matrix is degenerate (gap {gap:.3e}): boundary-dependent, refusing")]
    NonErgodicInput { gap: f64 },

    #[error("symbol index {index} outside alphabet of size {alphabet_size}")]
    UnknownSymbol { index: usize, alphabet_size: usize },
}

pub type ImpsResult<T> = Result<T, ImpsError>;

/// The iMPS site matrices `A^x = √T^x` together with the sparse unifilar
/// transition structure used by the fast CP-map kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteMatrices {
    tensors: Vec<DMatrix<f64>>,
    bond_dim: usize,
    /// Per symbol, the nonzero entries `(k, j, a)` with `a = √T^x_{kj}`;
    /// for unifilar machines each `k` appears at most once per symbol.
    edges: Vec<Vec<(usize, usize, f64)>>,
    unifilar: bool,
}

impl SiteMatrices {
    pub fn tensors(&self) -> &[DMatrix<f64>] {
        &self.tensors
    }

    pub fn tensor(&self, symbol: usize) -> &DMatrix<f64> {
        &self.tensors[symbol]
    }

    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }

    pub fn num_symbols(&self) -> usize {
        self.tensors.len()
    }

    fn check_dim(&self, rho: &DMatrix<f64>) -> ImpsResult<()> {
        if rho.nrows() != self.bond_dim || rho.ncols() != self.bond_dim {
            return Err(ImpsError::DimensionMismatch {
                expected: self.bond_dim,
                rows: rho.nrows(),
                cols: rho.ncols(),
            });
        }
        Ok(())
    }

    /// `A^xᵀ ρ A^x` for a single symbol.
    fn conjugate_left(&self, symbol: usize, rho: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.bond_dim;
        let mut out = DMatrix::zeros(m, m);
        self.conjugate_left_into(symbol, rho, &mut out);
        out
    }

    fn conjugate_left_into(&self, symbol: usize, rho: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let m = self.bond_dim;
        if self.unifilar {
            let edges = &self.edges[symbol];
            let rho_s = rho.as_slice();
            let out_s = out.as_mut_slice();
            for &(k, jk, ak) in edges {
                for &(l, jl, al) in edges {
                    // column-major storage
                    out_s[jl * m + jk] += ak * al * rho_s[l * m + k];
                }
            }
        } else {
            let a = &self.tensors[symbol];
            *out += a.tr_mul(&(rho * a));
        }
    }

    /// `A^x ρ A^xᵀ` for a single symbol.
    fn conjugate_right(&self, symbol: usize, rho: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.bond_dim;
        let mut out = DMatrix::zeros(m, m);
        self.conjugate_right_into(symbol, rho, &mut out);
        out
    }

    fn conjugate_right_into(&self, symbol: usize, rho: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        let m = self.bond_dim;
        if self.unifilar {
            let edges = &self.edges[symbol];
            let rho_s = rho.as_slice();
            let out_s = out.as_mut_slice();
            for &(k, jk, ak) in edges {
                for &(l, jl, al) in edges {
                    out_s[l * m + k] += ak * al * rho_s[jl * m + jk];
                }
            }
        } else {
            let a = &self.tensors[symbol];
            *out += a * rho * a.transpose();
        }
    }
}

/// Entrywise square root of the transition tensor.
/// Entries below [`ZERO_THRESHOLD`] are treated as exact zeros so the sparsity
/// pattern matches the unifilar structure of `T`.
pub fn site_matrices_from_machine(machine: &EpsilonMachine) -> SiteMatrices {
    let m = machine.num_states();
    let mut tensors = Vec::with_capacity(machine.num_symbols());
    let mut edges = Vec::with_capacity(machine.num_symbols());
    let mut unifilar = true;
    for t in machine.transitions() {
        let mut a = DMatrix::zeros(m, m);
        let mut seen = vec![false; m];
        let mut list = Vec::new();
        for k in 0..m {
            for j in 0..m {
                let p = t[(k, j)];
                if p > ZERO_THRESHOLD {
                    let amp = p.sqrt();
                    a[(k, j)] = amp;
                    if seen[k] {
                        unifilar = false;
                    }
                    seen[k] = true;
                    list.push((k, j, amp));
                }
            }
        }
        tensors.push(a);
        edges.push(list);
    }
    SiteMatrices { tensors, bond_dim: m, edges, unifilar }
}

/// Left CP-map action `E_l(ρ) = Σ_x (A^x)ᵀ ρ A^x`.
pub fn apply_cp_left(site: &SiteMatrices, rho: &DMatrix<f64>) -> ImpsResult<DMatrix<f64>> {
    site.check_dim(rho)?;
    let mut out = DMatrix::zeros(site.bond_dim, site.bond_dim);
    for x in 0..site.num_symbols() {
        out += site.conjugate_left(x, rho);
    }
    Ok(out)
}

/// Right CP-map action `E_r(ρ) = Σ_x A^x ρ (A^x)ᵀ`.
pub fn apply_cp_right(site: &SiteMatrices, rho: &DMatrix<f64>) -> ImpsResult<DMatrix<f64>> {
    site.check_dim(rho)?;
    let mut out = DMatrix::zeros(site.bond_dim, site.bond_dim);
    for x in 0..site.num_symbols() {
        out += site.conjugate_right(x, rho);
    }
    Ok(out)
}

/// The dense m² × m² transfer matrix `𝔼 = Σ_x A^x ⊗ A^x`, for small-m
/// spectra and as the explicit oracle against the CP-map kernels. With
/// column-major vectorization, `𝔼 · vec(ρ) = vec(E_r(ρ))` and
/// `𝔼ᵀ · vec(ρ) = vec(E_l(ρ))`.
pub fn transfer_matrix_dense(site: &SiteMatrices) -> DMatrix<f64> {
    let m2 = site.bond_dim * site.bond_dim;
    let mut e = DMatrix::zeros(m2, m2);
    for a in &site.tensors {
        e += a.kronecker(a);
    }
    e
}

/// All transfer-matrix eigenvalues, sorted by descending magnitude.
/// Materializes the dense transfer matrix; intended for small bond dimension.
pub fn transfer_spectrum_dense(site: &SiteMatrices) -> Vec<Complex64> {
    let e = transfer_matrix_dense(site);
    let mut eigs: Vec<Complex64> = e.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    eigs
}

/// Leading eigenvalue data of the transfer maps.
///
/// Normalization follows the stationary conventions `Tr V_l = 1` and
/// `Tr(V_l V_r) = 1`, under which `V_l` is diagonal with the stationary state
/// probabilities and `V_r` has unit diagonal.
#[derive(Debug, Clone)]
pub struct FixedPointPair {
    /// Leading transfer eigenvalue; equals 1 for a valid stochastic machine.
    pub eta: f64,
    /// `|η| − |η₂|`, the modulus gap to the second eigenvalue.
    pub gap: f64,
    /// Left fixed point `E_l(V_l) = η V_l`, symmetric positive semidefinite.
    pub v_l: DMatrix<f64>,
    /// Right fixed point `E_r(V_r) = η V_r`, symmetric positive semidefinite.
    pub v_r: DMatrix<f64>,
    /// True when the relative gap exceeds the degeneracy threshold.
    pub ergodic: bool,
}

/// Options for [`fixed_points_with`].
#[derive(Debug, Clone)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub degeneracy_threshold: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions {
            tol: DEFAULT_FIXED_POINT_TOL,
            max_iter: DEFAULT_FIXED_POINT_MAX_ITER,
            degeneracy_threshold: DEFAULT_DEGENERACY_THRESHOLD,
        }
    }
}

/// Compute both fixed points and the spectral gap with default degeneracy
/// threshold; see [`fixed_points_with`].
pub fn fixed_points(site: &SiteMatrices, tol: f64, max_iter: usize) -> ImpsResult<FixedPointPair> {
    fixed_points_with(
        site,
        &FixedPointOptions { tol, max_iter, ..FixedPointOptions::default() },
    )
}

/// Power-iterate the CP maps to their leading fixed points and estimate the
/// spectral gap.
///
/// The iteration is damped (`ρ ← (E(ρ) + ρ)/2`, re-symmetrized) so that
/// peripheral eigenvalues other than η cannot stall it; it starts at the
/// identity scaled to unit trace, which has full overlap with the leading
/// eigenvector of a CP map. Non-ergodic inputs are classified via `ergodic`,
/// not rejected — gated consumers such as [`word_probability_mps`] refuse them.
pub fn fixed_points_with(
    site: &SiteMatrices,
    options: &FixedPointOptions,
) -> ImpsResult<FixedPointPair> {
    let v_l = leading_fixed_point(site, Side::Left, options)?;
    let v_r = leading_fixed_point(site, Side::Right, options)?;

    // Fix scales: Tr V_l = 1, then Tr(V_l V_r) = 1.
    let v_l = &v_l / v_l.trace();
    let cross = frob_inner(&v_l, &v_r);
    let v_r = &v_r / cross;

    let (eta, gap) = if site.bond_dim <= DENSE_SPECTRUM_LIMIT {
        let spectrum = transfer_spectrum_dense(site);
        let eta = spectrum[0].norm();
        let gap = if spectrum.len() > 1 { eta - spectrum[1].norm() } else { eta };
        (eta, gap)
    } else {
        let eta = frob_inner(&v_l, &apply_cp_right(site, &v_r)?);
        let eta2 = deflated_second_magnitude(site, &v_l, &v_r);
        (eta, eta - eta2)
    };

    let ergodic = gap > options.degeneracy_threshold * eta.abs().max(f64::MIN_POSITIVE);
    Ok(FixedPointPair { eta, gap, v_l, v_r, ergodic })
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

/// Residual checks happen every this many power-iteration steps.
const CHECK_EVERY: usize = 16;

/// Leading fixed point of one CP map, as a symmetric matrix with positive
/// trace, satisfying `‖E(V) − η V‖_∞ ≤ tol · ‖V‖_∞`.
///
/// The iteration starts at the identity scaled to unit trace (strictly
/// positive, so it overlaps the leading eigenvector) and alternates plain and
/// damped steps: the composite map sends an eigenvalue μ to μ(μ+1)/2, which
/// keeps nearly the full convergence rate at the Perron root while strictly
/// contracting every other peripheral eigenvalue (e.g. −1 for period-two
/// machines, which a plain iteration would cycle on forever).
///
/// For unifilar site matrices the left map sends diagonal matrices to
/// diagonal matrices, so the left fixed point is iterated on the diagonal
/// alone at `O(|A| m)` per step.
fn leading_fixed_point(
    site: &SiteMatrices,
    side: Side,
    options: &FixedPointOptions,
) -> ImpsResult<DMatrix<f64>> {
    if matches!(side, Side::Left) && site.unifilar {
        return diagonal_left_fixed_point(site, options);
    }
    let m = site.bond_dim;
    let mut rho = DMatrix::<f64>::identity(m, m) / m as f64;
    let mut image = DMatrix::zeros(m, m);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for iter in 0..options.max_iter {
        image.fill(0.0);
        for x in 0..site.num_symbols() {
            match side {
                Side::Left => site.conjugate_left_into(x, &rho, &mut image),
                Side::Right => site.conjugate_right_into(x, &rho, &mut image),
            }
        }
        if iter % CHECK_EVERY == 0 {
            let scale = frob_inner(&rho, &image) / frob_inner(&rho, &rho);
            residual = max_abs(&(&image - &rho * scale)) / max_abs(&rho);
            if residual <= options.tol * scale.abs().max(1.0) {
                converged = true;
                break;
            }
            rho = (&rho + rho.transpose()) * 0.5;
            let norm = rho.norm();
            rho /= norm;
            continue;
        }
        if iter % 2 == 0 {
            std::mem::swap(&mut rho, &mut image);
        } else {
            rho += &image;
            rho *= 0.5;
        }
    }
    if !converged {
        return Err(ImpsError::NoConvergence { max_iter: options.max_iter, residual });
    }
    let mut rho = (&rho + rho.transpose()) * 0.5;
    if rho.trace() < 0.0 {
        rho.neg_mut();
    }
    Ok(rho)
}

/// Left fixed point restricted to the diagonal subspace; the induced action
/// is the state chain `d_j ← Σ_{k,x} T^x_{kj} d_k`.
fn diagonal_left_fixed_point(
    site: &SiteMatrices,
    options: &FixedPointOptions,
) -> ImpsResult<DMatrix<f64>> {
    let m = site.bond_dim;
    let chain: Vec<(usize, usize, f64)> = site
        .edges
        .iter()
        .flatten()
        .map(|&(k, j, a)| (k, j, a * a))
        .collect();
    let mut d = DVector::from_element(m, 1.0 / m as f64);
    let mut image = DVector::zeros(m);
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for iter in 0..options.max_iter {
        image.fill(0.0);
        for &(k, j, p) in &chain {
            image[j] += p * d[k];
        }
        if iter % CHECK_EVERY == 0 {
            let scale = d.dot(&image) / d.dot(&d);
            residual = (&image - &d * scale).amax() / d.amax();
            if residual <= options.tol * scale.abs().max(1.0) {
                converged = true;
                break;
            }
            let norm = d.norm();
            d /= norm;
            continue;
        }
        if iter % 2 == 0 {
            std::mem::swap(&mut d, &mut image);
        } else {
            d += &image;
            d *= 0.5;
        }
    }
    if !converged {
        return Err(ImpsError::NoConvergence { max_iter: options.max_iter, residual });
    }
    if d.sum() < 0.0 {
        d.neg_mut();
    }
    Ok(DMatrix::from_diagonal(&d))
}

/// Largest bond dimension for which the second eigenvalue is resolved by
/// Arnoldi iteration; the subleading transfer eigenvalues of large machines
/// cluster in rings whose resolution would need Krylov spaces of order m.
const ARNOLDI_GAP_LIMIT: usize = 64;

/// Magnitude of the second transfer eigenvalue, from the Wielandt-deflated
/// operator `ρ ↦ E_r(ρ) − η Tr(V_l ρ) V_r`.
///
/// The deflation removes exactly one copy of η (it sends the leading pair to
/// zero and leaves the rest of the spectrum unchanged), so a degenerate
/// leading eigenvalue still shows up here as a magnitude-η survivor. Up to
/// bond dimension 64 the magnitude comes from Arnoldi iteration; beyond
/// that, from the asymptotic growth rate of the deflated power iteration.
pub fn deflated_second_magnitude(
    site: &SiteMatrices,
    v_l: &DMatrix<f64>,
    v_r: &DMatrix<f64>,
) -> f64 {
    let m = site.bond_dim;
    let eta = frob_inner(v_l, &apply_cp_right(site, v_r).expect("dimensions fixed"))
        / frob_inner(v_l, v_r);
    let cross = frob_inner(v_l, v_r);
    if m <= ARNOLDI_GAP_LIMIT {
        let mut scratch = DMatrix::zeros(m, m);
        let apply = |v: &DVector<f64>| -> DVector<f64> {
            let rho = DMatrix::from_column_slice(m, m, v.as_slice());
            scratch.fill(0.0);
            for x in 0..site.num_symbols() {
                site.conjugate_right_into(x, &rho, &mut scratch);
            }
            let overlap = frob_inner(v_l, &rho) / cross;
            scratch.zip_apply(v_r, |s, v| *s -= eta * overlap * v);
            DVector::from_column_slice(scratch.as_slice())
        };
        arnoldi_max_magnitude(apply, m * m)
    } else {
        deflated_growth_rate(site, v_l, v_r, eta, cross, 3000.max(8 * m))
    }
}

/// Asymptotic per-step norm growth of the deflated map from a seeded random
/// start: the geometric mean over the trailing half of the run, which damps
/// the phase oscillation of complex eigenvalue pairs.
fn deflated_growth_rate(
    site: &SiteMatrices,
    v_l: &DMatrix<f64>,
    v_r: &DMatrix<f64>,
    eta: f64,
    cross: f64,
    iters: usize,
) -> f64 {
    let m = site.bond_dim;
    let mut rng = ChaCha12Rng::seed_from_u64(ARNOLDI_SEED);
    let mut rho = DMatrix::from_fn(m, m, |_, _| rng.random::<f64>() - 0.5);
    let norm = rho.norm();
    rho /= norm;
    let mut image = DMatrix::zeros(m, m);
    let mut logs = Vec::with_capacity(iters);
    for _ in 0..iters {
        image.fill(0.0);
        for x in 0..site.num_symbols() {
            site.conjugate_right_into(x, &rho, &mut image);
        }
        let overlap = frob_inner(v_l, &rho) / cross;
        image.zip_apply(v_r, |s, v| *s -= eta * overlap * v);
        let growth = image.norm();
        if growth < 1e-280 {
            return 0.0;
        }
        logs.push(growth.ln());
        std::mem::swap(&mut rho, &mut image);
        rho /= growth;
    }
    let tail = logs.len() / 2;
    (logs[tail..].iter().sum::<f64>() / (logs.len() - tail) as f64).exp()
}

/// Largest eigenvalue magnitude of a linear operator given matrix-free, by
/// Arnoldi iteration with full reorthogonalization. Runs an increasing
/// subspace schedule until two consecutive estimates agree.
fn arnoldi_max_magnitude(mut apply: impl FnMut(&DVector<f64>) -> DVector<f64>, dim: usize) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(ARNOLDI_SEED);
    let mut v0 = DVector::from_fn(dim, |_, _| rng.random::<f64>() - 0.5);
    v0 /= v0.norm();

    let mut prev: Option<f64> = None;
    for k in [24usize, 48, 96, 160] {
        let k = k.min(dim);
        let fact = arnoldi_factorize(&mut apply, &v0, k);
        let j = fact.columns;
        let hj = fact.h.view((0, 0), (j, j)).into_owned();
        let est = max_eigenvalue_norm(&hj);
        if fact.breakdown || k == dim {
            return est;
        }
        if let Some(p) = prev {
            if (est - p).abs() <= 1e-9 * est.abs().max(1.0) {
                return est;
            }
        }
        prev = Some(est);
    }
    prev.expect("schedule is nonempty")
}

struct ArnoldiFactorization {
    /// Upper Hessenberg, `(k+1) × k`; the leading `columns × columns` block is
    /// the projected operator.
    h: DMatrix<f64>,
    columns: usize,
    /// True when an invariant subspace was hit, making the block exact.
    breakdown: bool,
}

/// Arnoldi factorization of size at most `k`, with a second Gram-Schmidt pass
/// for stability.
fn arnoldi_factorize(
    apply: &mut impl FnMut(&DVector<f64>) -> DVector<f64>,
    v0: &DVector<f64>,
    k: usize,
) -> ArnoldiFactorization {
    let mut basis: Vec<DVector<f64>> = vec![v0.clone()];
    let mut h = DMatrix::<f64>::zeros(k + 1, k);
    for j in 0..k {
        let mut w = apply(&basis[j]);
        for _ in 0..2 {
            for (i, vi) in basis.iter().enumerate() {
                let c = vi.dot(&w);
                h[(i, j)] += c;
                w.axpy(-c, vi, 1.0);
            }
        }
        let beta = w.norm();
        if beta < 1e-13 {
            return ArnoldiFactorization { h, columns: j + 1, breakdown: true };
        }
        h[(j + 1, j)] = beta;
        basis.push(w / beta);
    }
    ArnoldiFactorization { h, columns: k, breakdown: false }
}

fn max_eigenvalue_norm(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Word probability from the MPS side (the boundary-free trace formula):
/// `Tr((A^{x_L})ᵀ ⋯ (A^{x_1})ᵀ V_l A^{x_1} ⋯ A^{x_L} V_r)`.
///
/// Requires an ergodic fixed-point pair; use
/// [`word_probability_mps_unchecked`] to evaluate the same formula without the
/// gate (meaningful for degenerate machines only when the supplied pair is
/// the stationary one).
pub fn word_probability_mps(
    site: &SiteMatrices,
    fp: &FixedPointPair,
    word: &Word,
) -> ImpsResult<f64> {
    if !fp.ergodic {
        return Err(ImpsError::NonErgodicInput { gap: fp.gap });
    }
    word_probability_mps_unchecked(site, fp, word)
}

/// The trace formula without the ergodicity gate.
pub fn word_probability_mps_unchecked(
    site: &SiteMatrices,
    fp: &FixedPointPair,
    word: &Word,
) -> ImpsResult<f64> {
    let alphabet_size = site.num_symbols();
    let mut rho = fp.v_l.clone();
    for &x in word.iter() {
        if x >= alphabet_size {
            return Err(ImpsError::UnknownSymbol { index: x, alphabet_size });
        }
        rho = site.conjugate_left(x, &rho);
    }
    Ok(frob_inner(&rho, &fp.v_r))
}
