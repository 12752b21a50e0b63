//! Canonical form of the iMPS and the quantum memory complexities.
//!
//! Starting from the fixed-point pair, the canonical form is computed in four
//! steps: (i) take `V_l`, `V_r`; (ii) factor them as `V_l = W_lᵀ W_l` with
//! `W_l = diag(√π_k)` and `V_r = W_r W_rᵀ` from the eigendecomposition of
//! `V_r`, keeping only eigenvalues above a relative cutoff (this defines the
//! Schmidt rank `r`); (iii) singular-value decompose `W_l W_r = U λ V`, whose
//! singular values λ are the Schmidt coefficients across any bond; (iv) form
//! the canonical tensors `Γ^x = V W_r⁻¹ A^x W_l⁻¹ U`.
//!
//! The squared Schmidt coefficients are the eigenvalues of the stationary
//! quantum memory state, so their Rényi entropies are the quantum machine
//! complexities `C_q^α`. Truncating the spectrum to its χ largest values
//! yields a smaller approximate model; the distortion is reported as
//! total-variation distance on bounded-length word distributions plus the
//! discarded Schmidt weight.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use thiserror::Error;

use crate::imps::{
    self, fixed_points_with, site_matrices_from_machine, FixedPointOptions, FixedPointPair,
    SiteMatrices,
};
use crate::machine::{
    self, stationary_distribution, EpsilonMachine, Word, DEFAULT_STATIONARY_MAX_ITER,
    DEFAULT_STATIONARY_TOL,
};
use crate::util::{frob_inner, renyi_bits};

/// Relative eigenvalue cutoff defining the numerical rank of `V_r` (and hence
/// the memory dimension). Exposed because it changes the reported integer
/// rank and `C_q^0`.
pub const DEFAULT_RANK_CUTOFF: f64 = 1e-10;

/// Rényi orders reported by default: topological, a sub-Shannon probe, the
/// Shannon point, and collision entropy.
pub const REPORT_ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Cap on `|A|^L` for the truncation distortion report.
const MAX_REPORT_WORDS: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum CanonicalError {
    #[error("stationary mass at state {state} is {value:.3e}; W_l is not invertible")]
    ZeroStationaryMass { state: usize, value: f64 },

    #[error("Schmidt normalization drift {drift:.3e} exceeds 1e-8; fixed points are suspect")]
    NormalizationDrift { drift: f64 },

    #[error("chi must satisfy 1 <= chi < rank = {rank}, got {chi}")]
    ChiOutOfRange { chi: usize, rank: usize },

    #[error("distortion report needs {words} words, above the cap {cap}")]
    ReportWindowTooLarge { words: usize, cap: usize },

    #[error("Rényi order must be nonnegative, got {0}")]
    NegativeAlpha(f64),

    #[error("symbol index {index} outside alphabet of size {alphabet_size}")]
    UnknownSymbol { index: usize, alphabet_size: usize },
}

pub type CanonicalResult<T> = Result<T, CanonicalError>;

/// Step (ii): the gauge factors `W_l` (diagonal, stored as its diagonal) and
/// `W_r` (m × r), together with the pseudo-inverse of `W_r` on its image.
#[derive(Debug, Clone)]
pub struct GaugeFactors {
    w_l_diag: DVector<f64>,
    w_r: DMatrix<f64>,
    w_r_pinv: DMatrix<f64>,
}

impl GaugeFactors {
    pub fn w_l_diag(&self) -> &DVector<f64> {
        &self.w_l_diag
    }

    pub fn w_l_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w_l_diag)
    }

    pub fn w_r(&self) -> &DMatrix<f64> {
        &self.w_r
    }

    pub fn w_r_pinv(&self) -> &DMatrix<f64> {
        &self.w_r_pinv
    }

    pub fn rank(&self) -> usize {
        self.w_r.ncols()
    }
}

/// Factor the fixed points: `W_l = diag(√π_k)` exactly, and `W_r = U₊ √D₊`
/// from the eigendecomposition of `V_r` restricted to eigenvalues above
/// `rank_cutoff` times the largest.
///
/// Eigenvector columns are ordered by descending eigenvalue and sign-fixed
/// (first entry of magnitude above 1e-12 made positive) so the output is
/// reproducible byte for byte.
pub fn gauge_factors(fp: &FixedPointPair, rank_cutoff: f64) -> CanonicalResult<GaugeFactors> {
    let m = fp.v_l.nrows();
    let mut w_l_diag = DVector::zeros(m);
    for k in 0..m {
        let pi_k = fp.v_l[(k, k)];
        if pi_k <= 0.0 {
            return Err(CanonicalError::ZeroStationaryMass { state: k, value: pi_k });
        }
        w_l_diag[k] = pi_k.sqrt();
    }

    let sym = (&fp.v_r + fp.v_r.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let max_eig = eig.eigenvalues[order[0]];
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] > rank_cutoff * max_eig)
        .collect();

    let r = kept.len();
    let mut w_r = DMatrix::zeros(m, r);
    let mut w_r_pinv = DMatrix::zeros(r, m);
    for (c, &i) in kept.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        if let Some(&lead) = col.iter().find(|e| e.abs() > 1e-12) {
            if lead < 0.0 {
                col.neg_mut();
            }
        }
        let s = eig.eigenvalues[i].sqrt();
        w_r.column_mut(c).copy_from(&(&col * s));
        w_r_pinv.row_mut(c).copy_from(&(col.transpose() / s));
    }
    Ok(GaugeFactors { w_l_diag, w_r, w_r_pinv })
}

/// Step (iii): `W_l W_r = U λ V` with λ descending and `Σ λ² = 1`.
#[derive(Debug, Clone)]
pub struct SchmidtFactors {
    u: DMatrix<f64>,
    lambda: DVector<f64>,
    v: DMatrix<f64>,
}

impl SchmidtFactors {
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
}

/// Singular value decomposition of `W_l W_r`. The singular values are the
/// Schmidt coefficients of the q-sample across any bond; their squares must
/// already sum to one up to round-off (a larger drift means the fixed points
/// are wrong, and is an error rather than something to hide by rescaling).
pub fn schmidt_spectrum(gauge: &GaugeFactors) -> CanonicalResult<SchmidtFactors> {
    let mut product = gauge.w_r.clone();
    for k in 0..product.nrows() {
        let s = gauge.w_l_diag[k];
        product.row_mut(k).scale_mut(s);
    }
    let svd = SVD::new(product, true, true);
    let mut u = svd.u.expect("u requested");
    let mut v = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;

    let r = sv.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut lambda = DVector::zeros(r);
    let mut u_sorted = DMatrix::zeros(u.nrows(), r);
    let mut v_sorted = DMatrix::zeros(r, v.ncols());
    for (c, &i) in order.iter().enumerate() {
        lambda[c] = sv[i];
        u_sorted.column_mut(c).copy_from(&u.column(i));
        v_sorted.row_mut(c).copy_from(&v.row(i));
    }
    u = u_sorted;
    v = v_sorted;

    for c in 0..r {
        let col = u.column(c);
        if let Some(&lead) = col.iter().find(|e| e.abs() > 1e-12) {
            if lead < 0.0 {
                u.column_mut(c).neg_mut();
                v.row_mut(c).neg_mut();
            }
        }
    }

    let total: f64 = lambda.iter().map(|l| l * l).sum();
    let drift = (total - 1.0).abs();
    if drift >= 1e-8 {
        return Err(CanonicalError::NormalizationDrift { drift });
    }
    lambda /= total.sqrt();
    Ok(SchmidtFactors { u, lambda, v })
}

/// Step (iv): the canonical tensors `Γ^x = V W_r⁻¹ A^x W_l⁻¹ U`, each r × r.
pub fn canonical_gammas(
    site: &SiteMatrices,
    gauge: &GaugeFactors,
    schmidt: &SchmidtFactors,
) -> CanonicalResult<Vec<DMatrix<f64>>> {
    let m = site.bond_dim();
    // W_l⁻¹ U, with W_l diagonal.
    let mut wl_inv_u = schmidt.u.clone();
    for k in 0..m {
        let s = gauge.w_l_diag[k];
        if s <= 0.0 {
            return Err(CanonicalError::ZeroStationaryMass { state: k, value: s * s });
        }
        wl_inv_u.row_mut(k).scale_mut(1.0 / s);
    }
    let gammas = site
        .tensors()
        .iter()
        .map(|a| &schmidt.v * (&gauge.w_r_pinv * (a * &wl_inv_u)))
        .collect();
    Ok(gammas)
}

/// The assembled canonical form: gauge factors, SVD factors, Schmidt spectrum,
/// canonical tensors, and the fixed points they came from.
#[derive(Debug, Clone)]
pub struct CanonicalForm {
    w_l_diag: DVector<f64>,
    w_r: DMatrix<f64>,
    w_r_pinv: DMatrix<f64>,
    u: DMatrix<f64>,
    v: DMatrix<f64>,
    lambda: DVector<f64>,
    gamma: Vec<DMatrix<f64>>,
    v_l: DMatrix<f64>,
    v_r: DMatrix<f64>,
}

impl CanonicalForm {
    pub fn w_l_diag(&self) -> &DVector<f64> {
        &self.w_l_diag
    }

    pub fn w_l_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.w_l_diag)
    }

    pub fn w_r(&self) -> &DMatrix<f64> {
        &self.w_r
    }

    pub fn w_r_pinv(&self) -> &DMatrix<f64> {
        &self.w_r_pinv
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    /// Schmidt coefficients, descending, with `Σ λ² = 1`.
    pub fn lambda(&self) -> &DVector<f64> {
        &self.lambda
    }

    /// Squared Schmidt coefficients: the spectrum of the stationary memory state.
    pub fn schmidt_probs(&self) -> Vec<f64> {
        self.lambda.iter().map(|l| l * l).collect()
    }

    pub fn gammas(&self) -> &[DMatrix<f64>] {
        &self.gamma
    }

    pub fn gamma(&self, symbol: usize) -> &DMatrix<f64> {
        &self.gamma[symbol]
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_symbols(&self) -> usize {
        self.gamma.len()
    }

    /// The left fixed point this form was derived from.
    pub fn v_l(&self) -> &DMatrix<f64> {
        &self.v_l
    }

    /// The right fixed point this form was derived from.
    pub fn v_r(&self) -> &DMatrix<f64> {
        &self.v_r
    }

    /// Rebuild from parts, e.g. when importing exported artifacts. The caller
    /// vouches for consistency of the pieces.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        w_l_diag: DVector<f64>,
        w_r: DMatrix<f64>,
        w_r_pinv: DMatrix<f64>,
        u: DMatrix<f64>,
        v: DMatrix<f64>,
        lambda: DVector<f64>,
        gamma: Vec<DMatrix<f64>>,
        v_l: DMatrix<f64>,
        v_r: DMatrix<f64>,
    ) -> Self {
        CanonicalForm { w_l_diag, w_r, w_r_pinv, u, v, lambda, gamma, v_l, v_r }
    }
}

/// Run all four canonicalization steps.
pub fn canonical_form(
    site: &SiteMatrices,
    fp: &FixedPointPair,
    rank_cutoff: f64,
) -> CanonicalResult<CanonicalForm> {
    let gauge = gauge_factors(fp, rank_cutoff)?;
    let schmidt = schmidt_spectrum(&gauge)?;
    let gamma = canonical_gammas(site, &gauge, &schmidt)?;
    Ok(CanonicalForm {
        w_l_diag: gauge.w_l_diag,
        w_r: gauge.w_r,
        w_r_pinv: gauge.w_r_pinv,
        u: schmidt.u,
        v: schmidt.v,
        lambda: schmidt.lambda,
        gamma,
        v_l: fp.v_l.clone(),
        v_r: fp.v_r.clone(),
    })
}

/// Quantum Rényi machine complexity `C_q^α` in bits: the order-α entropy of
/// the squared Schmidt coefficients. `α = 0` gives `log₂ r`, the memory
/// Hilbert-space dimension in bits.
pub fn quantum_complexity(lambda: &DVector<f64>, alpha: f64) -> CanonicalResult<f64> {
    if alpha < 0.0 {
        return Err(CanonicalError::NegativeAlpha(alpha));
    }
    let probs: Vec<f64> = lambda.iter().map(|l| l * l).collect();
    Ok(renyi_bits(&probs, alpha))
}

/// Word probability in canonical variables: `‖λ Γ^{x_1} λ ⋯ Γ^{x_L} λ‖²_F`.
/// For the empty word this is `Σ λ² = 1`.
pub fn word_probability_canonical(cf: &CanonicalForm, word: &Word) -> CanonicalResult<f64> {
    let alphabet_size = cf.num_symbols();
    let mut acc = DMatrix::from_diagonal(&cf.lambda);
    for &x in word.iter() {
        if x >= alphabet_size {
            return Err(CanonicalError::UnknownSymbol { index: x, alphabet_size });
        }
        acc *= cf.gamma(x);
        for c in 0..acc.ncols() {
            acc.column_mut(c).scale_mut(cf.lambda[c]);
        }
    }
    Ok(acc.iter().map(|e| e * e).sum())
}

/// Distortion summary of a bond-dimension truncation.
#[derive(Debug, Clone)]
pub struct TruncationReport {
    /// `Σ_{k > χ} λ_k²`, the Schmidt weight that was dropped.
    pub discarded_weight: f64,
    /// `(L, TV)` pairs: total-variation distance between the truncated model's
    /// renormalized length-L word distribution and the exact one.
    pub tv_by_length: Vec<(usize, f64)>,
}

impl TruncationReport {
    pub fn max_tv(&self) -> f64 {
        self.tv_by_length.iter().map(|&(_, tv)| tv).fold(0.0, f64::max)
    }
}

/// Keep the χ largest Schmidt values, renormalize, and cut the canonical
/// tensors down to their leading χ × χ blocks. Returns the truncated form
/// together with a distortion report over word lengths `1..=report_len`.
///
/// The truncated form is self-consistent as a gauge (its `U`, `V`, `W_r`
/// blocks are updated to match), but it no longer reproduces the fixed
/// points exactly — that is the approximation being quantified.
pub fn truncate(
    cf: &CanonicalForm,
    site: &SiteMatrices,
    chi: usize,
    report_len: usize,
) -> CanonicalResult<(CanonicalForm, TruncationReport)> {
    let r = cf.rank();
    if chi == 0 || chi >= r {
        return Err(CanonicalError::ChiOutOfRange { chi, rank: r });
    }
    let words = site.num_symbols().checked_pow(report_len as u32).unwrap_or(usize::MAX);
    if words > MAX_REPORT_WORDS {
        return Err(CanonicalError::ReportWindowTooLarge { words, cap: MAX_REPORT_WORDS });
    }

    let kept_weight: f64 = cf.lambda.iter().take(chi).map(|l| l * l).sum();
    let discarded_weight = 1.0 - kept_weight;
    let scale = kept_weight.sqrt();
    let lambda = DVector::from_fn(chi, |k, _| cf.lambda[k] / scale);
    let gamma: Vec<DMatrix<f64>> = cf
        .gamma
        .iter()
        .map(|g| g.view((0, 0), (chi, chi)).into_owned())
        .collect();

    // Updated gauge blocks: W̃_r = W_r Vᵀ[:, :χ] keeps Γ̃ = W̃_r⁻¹ A W_l⁻¹ Ũ
    // consistent with the plain block truncation above.
    let v_cols = cf.v.rows(0, chi).transpose();
    let w_r = &cf.w_r * &v_cols;
    let w_r_pinv = cf.v.rows(0, chi) * &cf.w_r_pinv;
    let u = cf.u.columns(0, chi).into_owned();
    let v = DMatrix::identity(chi, chi);
    let v_r_trunc = &w_r * w_r.transpose();

    let truncated = CanonicalForm {
        w_l_diag: cf.w_l_diag.clone(),
        w_r,
        w_r_pinv,
        u,
        v,
        lambda,
        gamma,
        v_l: cf.v_l.clone(),
        v_r: v_r_trunc,
    };

    let tv_by_length = distortion_tv(cf, &truncated, site, report_len)?;
    Ok((truncated, TruncationReport { discarded_weight, tv_by_length }))
}

/// Total-variation distances between exact and truncated word distributions
/// for every length up to `report_len`. The truncated quasi-distribution is
/// renormalized per length so both sides are proper distributions.
fn distortion_tv(
    cf: &CanonicalForm,
    truncated: &CanonicalForm,
    site: &SiteMatrices,
    report_len: usize,
) -> CanonicalResult<Vec<(usize, f64)>> {
    if report_len == 0 {
        return Ok(Vec::new());
    }
    // Depth-first over words, carrying the exact trace-formula state and the
    // truncated canonical product side by side.
    let mut per_level: Vec<Vec<(f64, f64)>> = vec![Vec::new(); report_len + 1];
    let rho0 = cf.v_l.clone();
    let acc0 = DMatrix::from_diagonal(&truncated.lambda);
    dfs_tv(cf, truncated, site, report_len, 0, &rho0, &acc0, &mut per_level);

    let mut out = Vec::with_capacity(report_len);
    for (level, pairs) in per_level.iter().enumerate().skip(1) {
        let z: f64 = pairs.iter().map(|&(t, _)| t).sum();
        let z = if z > 0.0 { z } else { 1.0 };
        let tv = 0.5 * pairs.iter().map(|&(t, e)| (t / z - e).abs()).sum::<f64>();
        out.push((level, tv));
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs_tv(
    cf: &CanonicalForm,
    truncated: &CanonicalForm,
    site: &SiteMatrices,
    report_len: usize,
    depth: usize,
    rho: &DMatrix<f64>,
    acc: &DMatrix<f64>,
    per_level: &mut [Vec<(f64, f64)>],
) {
    if depth == report_len {
        return;
    }
    for x in 0..site.num_symbols() {
        let next_rho = conjugate_left_dense(site.tensor(x), rho);
        let mut next_acc = acc * truncated.gamma(x);
        for c in 0..next_acc.ncols() {
            next_acc.column_mut(c).scale_mut(truncated.lambda[c]);
        }
        let p_exact = frob_inner(&next_rho, &cf.v_r);
        let p_trunc: f64 = next_acc.iter().map(|e| e * e).sum();
        per_level[depth + 1].push((p_trunc, p_exact));
        dfs_tv(cf, truncated, site, report_len, depth + 1, &next_rho, &next_acc, per_level);
    }
}

fn conjugate_left_dense(a: &DMatrix<f64>, rho: &DMatrix<f64>) -> DMatrix<f64> {
    a.tr_mul(&(rho * a))
}

/// Everything the analysis and sweep reports need about one machine.
#[derive(Debug, Clone)]
pub struct ComplexitySummary {
    /// `(α, C_μ^α)` pairs.
    pub c_mu: Vec<(f64, f64)>,
    /// `(α, C_q^α)` pairs.
    pub c_q: Vec<(f64, f64)>,
    /// Schmidt coefficients, descending.
    pub schmidt: Vec<f64>,
    /// Memory dimension (numerical rank of `V_r`).
    pub rank: usize,
    /// Spectral gap of the transfer matrix.
    pub gap: f64,
}

/// Knobs for the end-to-end analysis pipeline.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub stationary_tol: f64,
    pub stationary_max_iter: usize,
    pub fixed_point: FixedPointOptions,
    pub rank_cutoff: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            stationary_tol: DEFAULT_STATIONARY_TOL,
            stationary_max_iter: DEFAULT_STATIONARY_MAX_ITER,
            fixed_point: FixedPointOptions::default(),
            rank_cutoff: DEFAULT_RANK_CUTOFF,
        }
    }
}

/// Full pipeline for one machine: stationary distribution, fixed points,
/// canonical form, and both complexity profiles. Refuses non-ergodic machines
/// (their classical profile is still available through the machine module).
pub fn complexity_summary(
    machine: &EpsilonMachine,
    alphas: &[f64],
    options: &AnalysisOptions,
) -> Result<ComplexitySummary, crate::Error> {
    let pi = stationary_distribution(machine, options.stationary_tol, options.stationary_max_iter)?;
    let site = site_matrices_from_machine(machine);
    let fp = fixed_points_with(&site, &options.fixed_point)?;
    if !fp.ergodic {
        return Err(imps::ImpsError::NonErgodicInput { gap: fp.gap }.into());
    }
    let cf = canonical_form(&site, &fp, options.rank_cutoff)?;

    let mut c_mu = Vec::with_capacity(alphas.len());
    let mut c_q = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        c_mu.push((alpha, machine::classical_complexity(&pi, alpha)?));
        c_q.push((alpha, quantum_complexity(cf.lambda(), alpha)?));
    }
    Ok(ComplexitySummary {
        c_mu,
        c_q,
        schmidt: cf.lambda().iter().copied().collect(),
        rank: cf.rank(),
        gap: fp.gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imps::fixed_points;
    use crate::util::max_abs;
    use crate::zoo::{self, ProcessSpec};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn pipeline(spec: &ProcessSpec) -> (SiteMatrices, FixedPointPair, CanonicalForm) {
        let machine = zoo::make(spec).unwrap();
        let site = site_matrices_from_machine(&machine);
        let fp = fixed_points(&site, 1e-13, 200_000).unwrap();
        let cf = canonical_form(&site, &fp, DEFAULT_RANK_CUTOFF).unwrap();
        (site, fp, cf)
    }

    #[test]
    fn gauge_renewal2_analytic() {
        let (_, fp, _) = pipeline(&ProcessSpec::Renewal { n: 2 });
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        assert_abs_diff_eq!(gauge.w_l_diag()[0], (2.0f64 / 3.0).sqrt(), epsilon = 1e-11);
        assert_abs_diff_eq!(gauge.w_l_diag()[1], (1.0f64 / 3.0).sqrt(), epsilon = 1e-11);
        let rebuilt = gauge.w_r() * gauge.w_r().transpose();
        assert!(max_abs(&(&rebuilt - &fp.v_r)) < 1e-12);
    }

    #[test]
    fn gauge_single_state() {
        let (_, fp, _) = pipeline(&ProcessSpec::BiasedCoin { p: 0.3 });
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        assert_eq!(gauge.rank(), 1);
        assert_abs_diff_eq!(gauge.w_l_diag()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gauge.w_r()[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gauge_detects_rank_deficiency() {
        // Synthetic rank-1 Gram matrix: three identical memory states.
        let fp = FixedPointPair {
            eta: 1.0,
            gap: 1.0,
            v_l: DMatrix::from_diagonal_element(3, 3, 1.0 / 3.0),
            v_r: DMatrix::from_element(3, 3, 1.0),
            ergodic: true,
        };
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        assert_eq!(gauge.rank(), 1);
        assert_eq!(gauge.w_r().shape(), (3, 1));
        let rebuilt = gauge.w_r() * gauge.w_r().transpose();
        assert!(max_abs(&(&rebuilt - &fp.v_r)) < 1e-12);
    }

    #[test]
    fn gauge_rejects_zero_stationary_mass() {
        let fp = FixedPointPair {
            eta: 1.0,
            gap: 1.0,
            v_l: DMatrix::from_diagonal(&nalgebra::dvector![1.0, 0.0]),
            v_r: DMatrix::identity(2, 2),
            ergodic: true,
        };
        assert!(matches!(
            gauge_factors(&fp, DEFAULT_RANK_CUTOFF),
            Err(CanonicalError::ZeroStationaryMass { state: 1, .. })
        ));
    }

    #[test]
    fn schmidt_renewal2_analytic() {
        let (_, _, cf) = pipeline(&ProcessSpec::Renewal { n: 2 });
        let expected_hi = (3.0 + 5.0f64.sqrt()) / 6.0;
        let expected_lo = (3.0 - 5.0f64.sqrt()) / 6.0;
        let probs = cf.schmidt_probs();
        assert_eq!(probs.len(), 2);
        assert_abs_diff_eq!(probs[0], expected_hi, epsilon = 1e-11);
        assert_abs_diff_eq!(probs[1], expected_lo, epsilon = 1e-11);
    }

    #[test]
    fn schmidt_biased_coin_is_product_state() {
        let (_, _, cf) = pipeline(&ProcessSpec::BiasedCoin { p: 0.7 });
        assert_eq!(cf.rank(), 1);
        assert_abs_diff_eq!(cf.lambda()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schmidt_alternating_is_maximally_entangled() {
        // Orthogonal futures and π = (1/2, 1/2): λ = (√½, √½).
        let machine = zoo::make(&ProcessSpec::Alternating).unwrap();
        let site = site_matrices_from_machine(&machine);
        let fp = fixed_points(&site, 1e-13, 200_000).unwrap();
        assert!(!fp.ergodic);
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        let schmidt = schmidt_spectrum(&gauge).unwrap();
        assert_abs_diff_eq!(schmidt.lambda()[0], 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(schmidt.lambda()[1], 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn schmidt_flags_normalization_drift() {
        let fp = FixedPointPair {
            eta: 1.0,
            gap: 1.0,
            v_l: DMatrix::from_diagonal_element(2, 2, 0.5),
            // Twice the correct scale: Σλ² = 2.
            v_r: DMatrix::identity(2, 2) * 2.0,
            ergodic: true,
        };
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        assert!(matches!(
            schmidt_spectrum(&gauge),
            Err(CanonicalError::NormalizationDrift { .. })
        ));
    }

    #[test]
    fn gammas_single_state() {
        let (_, _, cf) = pipeline(&ProcessSpec::BiasedCoin { p: 0.5 });
        assert_abs_diff_eq!(cf.gamma(0)[(0, 0)].abs(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(cf.gamma(1)[(0, 0)].abs(), 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn canonical_identities_renewal2() {
        let (_, _, cf) = pipeline(&ProcessSpec::Renewal { n: 2 });
        let r = cf.rank();
        let lambda_sq = DMatrix::from_diagonal(&DVector::from_fn(r, |k, _| {
            cf.lambda()[k] * cf.lambda()[k]
        }));
        let mut right = DMatrix::zeros(r, r);
        let mut left = DMatrix::zeros(r, r);
        for g in cf.gammas() {
            right += g * &lambda_sq * g.transpose();
            left += g.transpose() * &lambda_sq * g;
        }
        let eye = DMatrix::identity(r, r);
        assert!(max_abs(&(&right - &eye)) < 1e-10, "right identity: {right}");
        assert!(max_abs(&(&left - &eye)) < 1e-10, "left identity: {left}");
    }

    #[test]
    fn canonical_identities_golden_mean() {
        let (_, _, cf) = pipeline(&ProcessSpec::GoldenMean { p: 0.5 });
        let r = cf.rank();
        let lambda_sq = DMatrix::from_diagonal(&DVector::from_fn(r, |k, _| {
            cf.lambda()[k] * cf.lambda()[k]
        }));
        let mut left = DMatrix::zeros(r, r);
        for g in cf.gammas() {
            left += g.transpose() * &lambda_sq * g;
        }
        assert!(max_abs(&(&left - DMatrix::identity(r, r))) < 1e-10);
    }

    #[test]
    fn gauge_consistency_short_words() {
        let (site, _, cf) = pipeline(&ProcessSpec::Renewal { n: 3 });
        // Γ^{x1} λ Γ^{x2} = V W_r⁻¹ A^{x1} A^{x2} W_l⁻¹ U
        let mut wl_inv_u = cf.u().clone();
        for k in 0..site.bond_dim() {
            wl_inv_u.row_mut(k).scale_mut(1.0 / cf.w_l_diag()[k]);
        }
        for x1 in 0..2 {
            for x2 in 0..2 {
                let mut chain = cf.gamma(x1).clone();
                for c in 0..chain.ncols() {
                    chain.column_mut(c).scale_mut(cf.lambda()[c]);
                }
                chain *= cf.gamma(x2);
                let direct =
                    cf.v() * (cf.w_r_pinv() * (site.tensor(x1) * site.tensor(x2) * &wl_inv_u));
                assert!(max_abs(&(&chain - &direct)) < 1e-10, "word ({x1},{x2})");
            }
        }
    }

    #[test]
    fn canonical_word_probabilities_match_classical() {
        let machine = zoo::make(&ProcessSpec::Renewal { n: 2 }).unwrap();
        let pi = stationary_distribution(&machine, 1e-13, 200_000).unwrap();
        let (_, _, cf) = pipeline(&ProcessSpec::Renewal { n: 2 });
        for symbols in [vec![], vec![1], vec![0, 1], vec![1, 0, 1]] {
            let word = Word::new(symbols);
            let p_cl = machine::word_probability_classical(&machine, &pi, &word).unwrap();
            let p_can = word_probability_canonical(&cf, &word).unwrap();
            assert_abs_diff_eq!(p_can, p_cl, epsilon = 1e-11);
        }
    }

    #[test]
    fn quantum_complexity_examples() {
        let (_, _, cf) = pipeline(&ProcessSpec::Renewal { n: 2 });
        // Shannon entropy of the analytic spectrum (3±√5)/6.
        let p = (3.0 + 5.0f64.sqrt()) / 6.0;
        let q = 1.0 - p;
        let expected = -p * p.log2() - q * q.log2();
        assert_abs_diff_eq!(quantum_complexity(cf.lambda(), 1.0).unwrap(), expected, epsilon = 1e-10);
        assert_abs_diff_eq!(quantum_complexity(cf.lambda(), 0.0).unwrap(), 1.0, epsilon = 1e-12);

        let (_, _, coin) = pipeline(&ProcessSpec::BiasedCoin { p: 0.3 });
        for alpha in REPORT_ALPHAS {
            assert_abs_diff_eq!(
                quantum_complexity(coin.lambda(), alpha).unwrap(),
                0.0,
                epsilon = 1e-12
            );
        }
        assert!(matches!(
            quantum_complexity(cf.lambda(), -1.0),
            Err(CanonicalError::NegativeAlpha(_))
        ));
    }

    #[test]
    fn truncate_rejects_chi_out_of_range() {
        let (site, _, cf) = pipeline(&ProcessSpec::Renewal { n: 4 });
        let r = cf.rank();
        assert!(matches!(
            truncate(&cf, &site, r, 4),
            Err(CanonicalError::ChiOutOfRange { .. })
        ));
        assert!(matches!(
            truncate(&cf, &site, 0, 4),
            Err(CanonicalError::ChiOutOfRange { .. })
        ));
    }

    #[test]
    fn truncate_renewal8_distortion() {
        let (site, _, cf) = pipeline(&ProcessSpec::Renewal { n: 8 });
        let r = cf.rank();
        let (trunc1, report1) = truncate(&cf, &site, 1, 6).unwrap();
        assert_eq!(trunc1.rank(), 1);
        let lambda1_sq = cf.lambda()[0] * cf.lambda()[0];
        assert_abs_diff_eq!(report1.discarded_weight, 1.0 - lambda1_sq, epsilon = 1e-12);
        assert!(report1.max_tv() > 0.0);

        let (_, report_all_but_one) = truncate(&cf, &site, r - 1, 6).unwrap();
        let tv1_at_6 = report1.tv_by_length.last().unwrap().1;
        let tv_r1_at_6 = report_all_but_one.tv_by_length.last().unwrap().1;
        assert!(
            tv_r1_at_6 < tv1_at_6,
            "chi = r-1 should distort less: {tv_r1_at_6} vs {tv1_at_6}"
        );
    }

    #[test]
    fn truncated_form_remains_gauge_consistent() {
        let (site, _, cf) = pipeline(&ProcessSpec::Renewal { n: 5 });
        let (trunc, _) = truncate(&cf, &site, 2, 3).unwrap();
        // Γ̃^x must equal Ṽ W̃_r⁻¹ A^x W_l⁻¹ Ũ with the updated blocks.
        let mut wl_inv_u = trunc.u().clone();
        for k in 0..site.bond_dim() {
            wl_inv_u.row_mut(k).scale_mut(1.0 / trunc.w_l_diag()[k]);
        }
        for x in 0..2 {
            let direct = trunc.v() * (trunc.w_r_pinv() * (site.tensor(x) * &wl_inv_u));
            assert!(max_abs(&(&direct - trunc.gamma(x))) < 1e-10);
        }
    }

    #[test]
    fn summary_renewal2() {
        let machine = zoo::make(&ProcessSpec::Renewal { n: 2 }).unwrap();
        let summary =
            complexity_summary(&machine, &REPORT_ALPHAS, &AnalysisOptions::default()).unwrap();
        assert_eq!(summary.rank, 2);
        let c_mu_1 = summary.c_mu.iter().find(|(a, _)| *a == 1.0).unwrap().1;
        assert_abs_diff_eq!(c_mu_1, 3.0f64.log2() - 2.0 / 3.0, epsilon = 1e-10);
        let p = (3.0 + 5.0f64.sqrt()) / 6.0;
        let expected_cq = -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let c_q_1 = summary.c_q.iter().find(|(a, _)| *a == 1.0).unwrap().1;
        assert_abs_diff_eq!(c_q_1, expected_cq, epsilon = 1e-10);
        // Quantum advantage holds at every reported order.
        for ((_, mu), (_, q)) in summary.c_mu.iter().zip(summary.c_q.iter()) {
            assert!(q <= &(mu + 1e-9));
        }
    }

    #[test]
    fn summary_refuses_degenerate_machine() {
        let machine = zoo::make(&ProcessSpec::Alternating).unwrap();
        let err = complexity_summary(&machine, &REPORT_ALPHAS, &AnalysisOptions::default())
            .unwrap_err();
        assert!(matches!(
            err,
            crate::Error::Imps(imps::ImpsError::NonErgodicInput { .. })
        ));
    }

    #[test]
    fn entropies_are_non_increasing_in_alpha() {
        let (_, _, cf) = pipeline(&ProcessSpec::Renewal { n: 6 });
        let mut prev = f64::INFINITY;
        for alpha in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let c = quantum_complexity(cf.lambda(), alpha).unwrap();
            assert!(c <= prev + 1e-12);
            prev = c;
        }
    }

    #[test]
    fn synthetic_example_v_l_diag_dominates() {
        // gauge_factors reads π off the diagonal of V_l; a hand-made pair
        // with the stationary normalization round-trips through the SVD.
        let g = 0.5f64.sqrt();
        let fp = FixedPointPair {
            eta: 1.0,
            gap: 0.5,
            v_l: DMatrix::from_diagonal(&nalgebra::dvector![2.0 / 3.0, 1.0 / 3.0]),
            v_r: dmatrix![1.0, g; g, 1.0],
            ergodic: true,
        };
        let gauge = gauge_factors(&fp, DEFAULT_RANK_CUTOFF).unwrap();
        let schmidt = schmidt_spectrum(&gauge).unwrap();
        let total: f64 = schmidt.lambda().iter().map(|l| l * l).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
