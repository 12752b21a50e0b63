//! Parameterized constructors for benchmark processes.
//!
//! The discrete renewal process with uniform emission probability is the
//! headline example: from state `s_k` it either emits `1` and resets to `s_0`
//! (probability `1/(N-k)`) or emits `0` and moves to `s_{k+1}`. The module
//! also carries the textbook two-state processes (golden mean, even process,
//! deterministic alternation) and the single-state biased coin, plus an
//! analytic reference construction of the renewal q-simulator for
//! cross-checking the numerical pipeline.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::machine::EpsilonMachine;

#[derive(Debug, Error)]
pub enum ZooError {
    #[error("bad parameter for {family}: {reason}")]
    BadParameter { family: &'static str, reason: String },

    #[error("cannot parse process spec {input:?}: {reason}")]
    Parse { input: String, reason: String },
}

pub type ZooResult<T> = Result<T, ZooError>;

/// A named benchmark process with its parameters.
///
/// The textual form `family{params}` is accepted anywhere the command-line
/// tools expect a machine file: `renewal{8}`, `biased_coin{0.3}`,
/// `golden_mean{0.5}`, `even_process{0.5}`, `alternating{}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessSpec {
    /// Discrete renewal process with uniform emission probability, `N ≥ 2` states.
    Renewal { n: usize },
    /// Single-state i.i.d. process emitting `1` with probability `p`.
    BiasedCoin { p: f64 },
    /// No two consecutive `1`s; `s_0` emits `1` with probability `p`.
    GoldenMean { p: f64 },
    /// `1`s occur in even-length blocks; `s_0` emits `1` with probability `p`.
    EvenProcess { p: f64 },
    /// Deterministic period-two output `0101…`.
    Alternating,
}

impl ProcessSpec {
    pub fn family(&self) -> &'static str {
        match self {
            ProcessSpec::Renewal { .. } => "renewal",
            ProcessSpec::BiasedCoin { .. } => "biased_coin",
            ProcessSpec::GoldenMean { .. } => "golden_mean",
            ProcessSpec::EvenProcess { .. } => "even_process",
            ProcessSpec::Alternating => "alternating",
        }
    }

    pub fn build(&self) -> ZooResult<EpsilonMachine> {
        make(self)
    }
}

impl fmt::Display for ProcessSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProcessSpec::Renewal { n } => write!(f, "renewal{{{n}}}"),
            ProcessSpec::BiasedCoin { p } => write!(f, "biased_coin{{{p}}}"),
            ProcessSpec::GoldenMean { p } => write!(f, "golden_mean{{{p}}}"),
            ProcessSpec::EvenProcess { p } => write!(f, "even_process{{{p}}}"),
            ProcessSpec::Alternating => write!(f, "alternating{{}}"),
        }
    }
}

impl FromStr for ProcessSpec {
    type Err = ZooError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse_err = |reason: &str| ZooError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let (family, params) = match s.find('{') {
            Some(open) => {
                if !s.ends_with('}') {
                    return Err(parse_err("missing closing brace"));
                }
                (&s[..open], &s[open + 1..s.len() - 1])
            }
            None => (s, ""),
        };
        match family {
            "renewal" => {
                let n: usize = params
                    .trim()
                    .parse()
                    .map_err(|_| parse_err("renewal expects an integer N"))?;
                Ok(ProcessSpec::Renewal { n })
            }
            "biased_coin" | "golden_mean" | "even_process" => {
                let p: f64 = params
                    .trim()
                    .parse()
                    .map_err(|_| parse_err("expected a probability parameter"))?;
                Ok(match family {
                    "biased_coin" => ProcessSpec::BiasedCoin { p },
                    "golden_mean" => ProcessSpec::GoldenMean { p },
                    _ => ProcessSpec::EvenProcess { p },
                })
            }
            "alternating" => {
                if params.trim().is_empty() {
                    Ok(ProcessSpec::Alternating)
                } else {
                    Err(parse_err("alternating takes no parameters"))
                }
            }
            other => Err(parse_err(&format!("unknown family {other:?}"))),
        }
    }
}

fn check_prob(family: &'static str, p: f64) -> ZooResult<()> {
    if p.is_finite() && p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(ZooError::BadParameter {
            family,
            reason: format!("probability must lie in (0, 1), got {p}"),
        })
    }
}

/// Instantiate the ε-machine for a benchmark process.
pub fn make(spec: &ProcessSpec) -> ZooResult<EpsilonMachine> {
    let binary = vec!["0".to_string(), "1".to_string()];
    let machine = match *spec {
        ProcessSpec::Renewal { n } => {
            if n < 2 {
                return Err(ZooError::BadParameter {
                    family: "renewal",
                    reason: format!("N must be at least 2, got {n}"),
                });
            }
            let states = (0..n).map(|k| format!("s{k}")).collect();
            let mut t0 = DMatrix::zeros(n, n);
            let mut t1 = DMatrix::zeros(n, n);
            for k in 0..n {
                let remaining = (n - k) as f64;
                if k + 1 < n {
                    t0[(k, k + 1)] = (remaining - 1.0) / remaining;
                }
                t1[(k, 0)] = 1.0 / remaining;
            }
            EpsilonMachine::new(binary, states, vec![t0, t1])
        }
        ProcessSpec::BiasedCoin { p } => {
            check_prob("biased_coin", p)?;
            EpsilonMachine::new(
                binary,
                vec!["s".into()],
                vec![DMatrix::from_element(1, 1, 1.0 - p), DMatrix::from_element(1, 1, p)],
            )
        }
        ProcessSpec::GoldenMean { p } => {
            check_prob("golden_mean", p)?;
            let t0 = DMatrix::from_row_slice(2, 2, &[1.0 - p, 0.0, 1.0, 0.0]);
            let t1 = DMatrix::from_row_slice(2, 2, &[0.0, p, 0.0, 0.0]);
            EpsilonMachine::new(binary, vec!["A".into(), "B".into()], vec![t0, t1])
        }
        ProcessSpec::EvenProcess { p } => {
            check_prob("even_process", p)?;
            let t0 = DMatrix::from_row_slice(2, 2, &[1.0 - p, 0.0, 0.0, 0.0]);
            let t1 = DMatrix::from_row_slice(2, 2, &[0.0, p, 1.0, 0.0]);
            EpsilonMachine::new(binary, vec!["A".into(), "B".into()], vec![t0, t1])
        }
        ProcessSpec::Alternating => {
            let t0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
            let t1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
            EpsilonMachine::new(binary, vec!["A".into(), "B".into()], vec![t0, t1])
        }
    };
    machine.map_err(|e| ZooError::BadParameter {
        family: spec.family(),
        reason: e.to_string(),
    })
}

/// Analytic q-simulator artifacts of the renewal process, in the causal basis.
///
/// `sigma` holds the internal states `σ_k = Σ_{j≥k} √(1/(N−k)) |j⟩` as
/// columns; `shift` and `reset` are the Kraus blocks for emitting `0`
/// (subdiagonal shift) and `1` (reset onto `σ_0`).
#[derive(Debug, Clone)]
pub struct RenewalReference {
    pub sigma: DMatrix<f64>,
    pub shift: DMatrix<f64>,
    pub reset: DMatrix<f64>,
}

pub fn renewal_reference(n: usize) -> ZooResult<RenewalReference> {
    if n < 2 {
        return Err(ZooError::BadParameter {
            family: "renewal",
            reason: format!("N must be at least 2, got {n}"),
        });
    }
    let mut sigma = DMatrix::zeros(n, n);
    for k in 0..n {
        let amp = (1.0 / (n - k) as f64).sqrt();
        for j in k..n {
            sigma[(j, k)] = amp;
        }
    }
    let mut shift = DMatrix::zeros(n, n);
    for j in 0..n - 1 {
        shift[(j + 1, j)] = 1.0;
    }
    let mut reset = DMatrix::zeros(n, n);
    let amp = (1.0 / n as f64).sqrt();
    for i in 0..n {
        reset[(i, n - 1)] = amp;
    }
    Ok(RenewalReference { sigma, shift, reset })
}

/// Seeded generator of random unifilar machines, used by property tests.
///
/// Every state can emit every symbol, with a uniformly random successor and
/// probabilities bounded away from zero; draws are retried until the support
/// graph is strongly connected.
pub fn random_unifilar(num_states: usize, num_symbols: usize, seed: u64) -> EpsilonMachine {
    assert!(num_states >= 1 && num_symbols >= 1);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let mut tensors = vec![DMatrix::zeros(num_states, num_states); num_symbols];
        for k in 0..num_states {
            let weights: Vec<f64> =
                (0..num_symbols).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (x, w) in weights.iter().enumerate() {
                let j = rng.random_range(0..num_states);
                tensors[x][(k, j)] = w / total;
            }
        }
        let alphabet = (0..num_symbols).map(|x| x.to_string()).collect();
        let states = (0..num_states).map(|k| format!("s{k}")).collect();
        let machine = EpsilonMachine::new(alphabet, states, tensors).expect("shape is consistent");
        if machine.validate(crate::machine::DEFAULT_VALIDATION_TOL).is_valid() {
            return machine;
        }
    }
    panic!("failed to draw a strongly connected unifilar machine after 1000 attempts");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{self, Word, DEFAULT_VALIDATION_TOL};
    use approx::assert_abs_diff_eq;

    #[test]
    fn renewal2_matches_closed_form() {
        let machine = make(&ProcessSpec::Renewal { n: 2 }).unwrap();
        assert_eq!(machine.num_states(), 2);
        assert_abs_diff_eq!(machine.prob(0, 0, 1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(machine.prob(1, 0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(machine.prob(1, 1, 0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(machine.prob(0, 1, 0), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn biased_coin_single_row() {
        let machine = make(&ProcessSpec::BiasedCoin { p: 0.5 }).unwrap();
        assert_eq!(machine.num_states(), 1);
        assert_abs_diff_eq!(machine.prob(0, 0, 0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(machine.prob(1, 0, 0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn renewal3_stationary_and_topological_complexity() {
        let machine = make(&ProcessSpec::Renewal { n: 3 }).unwrap();
        let pi = machine::stationary_distribution(&machine, 1e-13, 100_000).unwrap();
        // pi_k proportional to N - k
        assert_abs_diff_eq!(pi.get(0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.get(1), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.get(2), 1.0 / 6.0, epsilon = 1e-12);
        let c0 = machine::classical_complexity(&pi, 0.0).unwrap();
        assert_abs_diff_eq!(c0, 3.0f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn golden_mean_stationary() {
        let machine = make(&ProcessSpec::GoldenMean { p: 0.5 }).unwrap();
        let pi = machine::stationary_distribution(&machine, 1e-13, 100_000).unwrap();
        assert_abs_diff_eq!(pi.get(0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pi.get(1), 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn even_process_forbids_odd_blocks() {
        // "010" requires a length-1 block of 1s, which the even process forbids.
        let machine = make(&ProcessSpec::EvenProcess { p: 0.5 }).unwrap();
        let pi = machine::stationary_distribution(&machine, 1e-13, 100_000).unwrap();
        let p = machine::word_probability_classical(&machine, &pi, &Word::new(vec![0, 1, 0]))
            .unwrap();
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn all_zoo_machines_validate_clean() {
        let specs = [
            ProcessSpec::Renewal { n: 2 },
            ProcessSpec::Renewal { n: 7 },
            ProcessSpec::BiasedCoin { p: 0.3 },
            ProcessSpec::GoldenMean { p: 0.5 },
            ProcessSpec::EvenProcess { p: 0.5 },
            ProcessSpec::Alternating,
        ];
        for spec in specs {
            let report = make(&spec).unwrap().validate(DEFAULT_VALIDATION_TOL);
            assert!(report.is_valid(), "{spec}: {report}");
        }
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(matches!(
            make(&ProcessSpec::Renewal { n: 1 }),
            Err(ZooError::BadParameter { .. })
        ));
        assert!(matches!(
            make(&ProcessSpec::BiasedCoin { p: 1.0 }),
            Err(ZooError::BadParameter { .. })
        ));
        assert!(matches!(
            make(&ProcessSpec::GoldenMean { p: -0.1 }),
            Err(ZooError::BadParameter { .. })
        ));
    }

    #[test]
    fn spec_parses_shorthand() {
        assert_eq!("renewal{8}".parse::<ProcessSpec>().unwrap(), ProcessSpec::Renewal { n: 8 });
        assert_eq!(
            "biased_coin{0.3}".parse::<ProcessSpec>().unwrap(),
            ProcessSpec::BiasedCoin { p: 0.3 }
        );
        assert_eq!("alternating{}".parse::<ProcessSpec>().unwrap(), ProcessSpec::Alternating);
        assert_eq!("alternating".parse::<ProcessSpec>().unwrap(), ProcessSpec::Alternating);
        assert!("renewal{x}".parse::<ProcessSpec>().is_err());
        assert!("mystery{1}".parse::<ProcessSpec>().is_err());
        assert!("renewal{3".parse::<ProcessSpec>().is_err());
    }

    #[test]
    fn spec_display_round_trips() {
        for spec in [
            ProcessSpec::Renewal { n: 12 },
            ProcessSpec::BiasedCoin { p: 0.25 },
            ProcessSpec::Alternating,
        ] {
            let again: ProcessSpec = spec.to_string().parse().unwrap();
            assert_eq!(again, spec);
        }
    }

    #[test]
    fn reference_sigma_n2() {
        let r = renewal_reference(2).unwrap();
        let half = 0.5f64.sqrt();
        assert_abs_diff_eq!(r.sigma[(0, 0)], half, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sigma[(1, 0)], half, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sigma[(0, 1)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.sigma[(1, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn reference_overlap_n3() {
        let r = renewal_reference(3).unwrap();
        let s0 = r.sigma.column(0);
        let s1 = r.sigma.column(1);
        // Two shared components of weight 1/sqrt(3) * 1/sqrt(2).
        assert_abs_diff_eq!(s0.dot(&s1), 2.0 / 6.0f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn reference_last_state_is_basis_vector() {
        for n in 2..=6 {
            let r = renewal_reference(n).unwrap();
            let last = r.sigma.column(n - 1);
            assert_abs_diff_eq!(last.norm(), 1.0, epsilon = 1e-15);
            assert_abs_diff_eq!(last[n - 1], 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn random_unifilar_is_valid_and_seed_stable() {
        let a = random_unifilar(5, 3, 11);
        let b = random_unifilar(5, 3, 11);
        assert_eq!(a, b);
        assert!(a.validate(DEFAULT_VALIDATION_TOL).is_valid());
    }
}
