//! Shared fixtures for the integration suites.

use nalgebra::DMatrix;
use qsm::canonical::{canonical_form, CanonicalForm, DEFAULT_RANK_CUTOFF};
use qsm::imps::{fixed_points, site_matrices_from_machine, FixedPointPair, SiteMatrices};
use qsm::machine::{stationary_distribution, EpsilonMachine, StationaryDistribution, Word};
use qsm::zoo::{self, ProcessSpec};

/// The benchmark list used throughout the acceptance criteria.
pub fn zoo_specs() -> Vec<ProcessSpec> {
    let mut specs = vec![
        ProcessSpec::BiasedCoin { p: 0.3 },
        ProcessSpec::GoldenMean { p: 0.5 },
        ProcessSpec::EvenProcess { p: 0.5 },
        ProcessSpec::Alternating,
    ];
    for n in 2..=10 {
        specs.push(ProcessSpec::Renewal { n });
    }
    specs
}

pub struct Ctx {
    #[allow(dead_code)]
    pub name: String,
    pub machine: EpsilonMachine,
    pub pi: StationaryDistribution,
    pub site: SiteMatrices,
    pub fp: FixedPointPair,
}

impl Ctx {
    pub fn canonical(&self) -> CanonicalForm {
        canonical_form(&self.site, &self.fp, DEFAULT_RANK_CUTOFF).expect("canonical form")
    }
}

pub fn context(spec: &ProcessSpec) -> Ctx {
    let machine = zoo::make(spec).expect("zoo machine");
    context_for(machine, spec.to_string())
}

pub fn context_for(machine: EpsilonMachine, name: String) -> Ctx {
    let pi = stationary_distribution(&machine, 1e-13, 1_000_000).expect("stationary");
    let site = site_matrices_from_machine(&machine);
    let fp = fixed_points(&site, 1e-12, 500_000).expect("fixed points");
    Ctx { name, machine, pi, site, fp }
}

/// All words of exactly length `len` over an alphabet of `a` symbols,
/// first symbol most significant.
pub fn words_of_length(a: usize, len: usize) -> Vec<Word> {
    let count = a.pow(len as u32);
    (0..count)
        .map(|mut idx| {
            let mut symbols = vec![0usize; len];
            for slot in symbols.iter_mut().rev() {
                *slot = idx % a;
                idx /= a;
            }
            Word::new(symbols)
        })
        .collect()
}

/// Block-diagonal union of two biased coins: the canonical non-ergodic
/// counterexample (two closed communicating classes).
pub fn disjoint_coin_union(p1: f64, p2: f64) -> EpsilonMachine {
    EpsilonMachine::new(
        vec!["0".into(), "1".into()],
        vec!["a".into(), "b".into()],
        vec![
            DMatrix::from_row_slice(2, 2, &[1.0 - p1, 0.0, 0.0, 1.0 - p2]),
            DMatrix::from_row_slice(2, 2, &[p1, 0.0, 0.0, p2]),
        ],
    )
    .expect("shape consistent")
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, &x| acc.max(x.abs()))
}

/// Descending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let mut eigs: Vec<f64> =
        nalgebra::SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.total_cmp(a));
    eigs
}
