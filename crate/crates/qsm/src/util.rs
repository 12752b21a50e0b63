//! Small numeric helpers shared across modules.

use nalgebra::DMatrix;

/// Rényi entropy of order `alpha` in bits, for a normalized distribution.
///
/// Conventions: `0 log 0 = 0`; `alpha = 1` is the Shannon limit;
/// `alpha = 0` counts the strictly positive entries.
pub(crate) fn renyi_bits(probs: &[f64], alpha: f64) -> f64 {
    debug_assert!(alpha >= 0.0);
    if alpha == 0.0 {
        let support = probs.iter().filter(|&&p| p > 0.0).count();
        return (support.max(1) as f64).log2();
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return -probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| p * p.log2())
            .sum::<f64>();
    }
    let sum: f64 = probs.iter().filter(|&&p| p > 0.0).map(|&p| p.powf(alpha)).sum();
    sum.log2() / (1.0 - alpha)
}

/// Largest absolute entry of a matrix (∞-norm over entries).
pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Frobenius inner product `⟨a, b⟩ = Σ_ij a_ij b_ij`.
pub(crate) fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}
