//! Subcommand implementations.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::Serialize;

use qsm::canonical::{
    canonical_form, complexity_summary, quantum_complexity, truncate, AnalysisOptions,
};
use qsm::imps::{fixed_points_with, site_matrices_from_machine, FixedPointOptions, FixedPointPair};
use qsm::machine::{
    classical_complexity, sample_classical, stationary_distribution, word_probability_classical,
    EpsilonMachine, StationaryDistribution, Word,
};
use qsm::oracle::{empirical_tv, enumerate_words};
use qsm::qsim::{build_qsimulator, sample_quantum};
use qsm::zoo::ProcessSpec;

use crate::io::{export_canonical, export_qsimulator, fmt_f64, load_machine};
use crate::{CliError, Engine, ExportKind};

pub const DEFAULT_ALPHAS: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Acceptance threshold for `compare`: larger deviations exit nonzero.
const COMPARE_TOL: f64 = 1e-8;

struct Pipeline {
    machine: EpsilonMachine,
    name: String,
    pi: StationaryDistribution,
    site: qsm::SiteMatrices,
    fp: FixedPointPair,
}

fn analysis_options(tol: f64, rank_cutoff: f64) -> AnalysisOptions {
    AnalysisOptions {
        stationary_tol: tol.min(1e-13),
        stationary_max_iter: 1_000_000,
        fixed_point: FixedPointOptions { tol, ..FixedPointOptions::default() },
        rank_cutoff,
    }
}

/// Load, validate, and run the common classical + fixed-point stages.
fn pipeline(machine_arg: &str, tol: f64) -> Result<Pipeline, CliError> {
    let (machine, name) = load_machine(machine_arg)?;
    let report = machine.validate(qsm::machine::DEFAULT_VALIDATION_TOL);
    if !report.is_valid() {
        return Err(CliError::Validation(format!("machine {name:?} is invalid:\n{report}")));
    }
    let pi = stationary_distribution(&machine, 1e-13, 1_000_000)?;
    let site = site_matrices_from_machine(&machine);
    let fp = fixed_points_with(&site, &FixedPointOptions { tol, ..FixedPointOptions::default() })?;
    Ok(Pipeline { machine, name, pi, site, fp })
}

fn require_ergodic(fp: &FixedPointPair, what: &str) -> Result<(), CliError> {
    if fp.ergodic {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "NonErgodic: transfer matrix is degenerate (gap {:.3e}); {what} needs an ergodic process",
            fp.gap
        )))
    }
}

pub fn cmd_validate(machine_arg: &str, tol: f64) -> Result<(), CliError> {
    let (machine, name) = load_machine(machine_arg)?;
    let report = machine.validate(tol);
    if report.is_valid() {
        println!("{name}: valid ({} states, {} symbols)", machine.num_states(), machine.num_symbols());
        Ok(())
    } else {
        Err(CliError::Validation(format!("machine {name:?} is invalid:\n{report}")))
    }
}

#[derive(Debug, Serialize)]
struct AlphaValue {
    alpha: f64,
    bits: f64,
}

#[derive(Debug, Serialize)]
struct AnalysisReport {
    machine: String,
    states: usize,
    alphabet: usize,
    ergodic: bool,
    eta: f64,
    gap: f64,
    c_mu: Vec<AlphaValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    schmidt: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_q: Option<Vec<AlphaValue>>,
    wall_time_s: f64,
}

pub enum AnalyzeFormat {
    Human,
    Json,
    Csv,
}

pub fn cmd_analyze(
    machine_arg: &str,
    alphas: &[f64],
    format: AnalyzeFormat,
    rank_cutoff: f64,
    tol: f64,
) -> Result<(), CliError> {
    let start = Instant::now();
    let p = pipeline(machine_arg, tol)?;

    let c_mu: Vec<AlphaValue> = alphas
        .iter()
        .map(|&alpha| {
            classical_complexity(&p.pi, alpha)
                .map(|bits| AlphaValue { alpha, bits })
                .map_err(CliError::from)
        })
        .collect::<Result<_, _>>()?;

    let quantum = if p.fp.ergodic {
        let cf = canonical_form(&p.site, &p.fp, rank_cutoff)?;
        let c_q: Vec<AlphaValue> = alphas
            .iter()
            .map(|&alpha| {
                quantum_complexity(cf.lambda(), alpha)
                    .map(|bits| AlphaValue { alpha, bits })
                    .map_err(CliError::from)
            })
            .collect::<Result<_, _>>()?;
        Some((cf, c_q))
    } else {
        None
    };

    let report = AnalysisReport {
        machine: p.name.clone(),
        states: p.machine.num_states(),
        alphabet: p.machine.num_symbols(),
        ergodic: p.fp.ergodic,
        eta: p.fp.eta,
        gap: p.fp.gap,
        c_mu,
        rank: quantum.as_ref().map(|(cf, _)| cf.rank()),
        schmidt: quantum.as_ref().map(|(cf, _)| cf.lambda().iter().copied().collect()),
        c_q: quantum.map(|(_, c_q)| c_q),
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    match format {
        AnalyzeFormat::Json => {
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
        }
        AnalyzeFormat::Csv => print_analysis_csv(&report),
        AnalyzeFormat::Human => print_analysis_human(&report),
    }

    if !report.ergodic {
        return Err(CliError::Numerical(format!(
            "NonErgodic: transfer matrix is degenerate (gap {:.3e}); classical complexities above remain valid",
            report.gap
        )));
    }
    Ok(())
}

fn print_analysis_human(report: &AnalysisReport) {
    println!("machine: {}", report.machine);
    println!("states: {}", report.states);
    println!("alphabet: {}", report.alphabet);
    println!("ergodic: {}", report.ergodic);
    println!("eta: {}", fmt_f64(report.eta));
    println!("gap: {}", fmt_f64(report.gap));
    if let Some(rank) = report.rank {
        println!("rank: {rank}");
    }
    if let Some(schmidt) = &report.schmidt {
        let rendered: Vec<String> = schmidt.iter().map(|l| fmt_f64(*l)).collect();
        println!("schmidt: {}", rendered.join(" "));
    }
    println!("alpha        c_mu                     c_q");
    for (i, mu) in report.c_mu.iter().enumerate() {
        let q = report
            .c_q
            .as_ref()
            .map(|c_q| fmt_f64(c_q[i].bits))
            .unwrap_or_else(|| "-".to_string());
        println!("{:<12} {:<24} {}", mu.alpha, fmt_f64(mu.bits), q);
    }
    println!("wall_time_s: {:.3}", report.wall_time_s);
}

fn print_analysis_csv(report: &AnalysisReport) {
    let mut header = vec!["name".into(), "m".into(), "rank".into(), "gap".into(), "ergodic".into()];
    for v in &report.c_mu {
        header.push(format!("c_mu_{}", v.alpha));
    }
    for v in &report.c_mu {
        header.push(format!("c_q_{}", v.alpha));
    }
    header.push("seconds".into());
    println!("{}", header.join(","));

    let mut row = vec![
        report.machine.clone(),
        report.states.to_string(),
        report.rank.map(|r| r.to_string()).unwrap_or_default(),
        fmt_f64(report.gap),
        report.ergodic.to_string(),
    ];
    for v in &report.c_mu {
        row.push(fmt_f64(v.bits));
    }
    match &report.c_q {
        Some(c_q) => row.extend(c_q.iter().map(|v| fmt_f64(v.bits))),
        None => row.extend(report.c_mu.iter().map(|_| String::new())),
    }
    row.push(format!("{:.3}", report.wall_time_s));
    println!("{}", row.join(","));
}

pub fn cmd_compare(machine_arg: &str, max_len: usize) -> Result<(), CliError> {
    let p = pipeline(machine_arg, 1e-12)?;
    require_ergodic(&p.fp, "the MPS word distribution")?;

    println!("word,classical,mps,oracle");
    let mut max_dev: f64 = 0.0;
    for length in 1..=max_len {
        let dist = enumerate_words(&p.machine, &p.pi, length)?;
        for idx in 0..dist.word_count() {
            let word = dist.word_of(idx);
            let classical = word_probability_classical(&p.machine, &p.pi, &word)?;
            let mps = qsm::imps::word_probability_mps(&p.site, &p.fp, &word)?;
            let oracle = dist.probs()[idx];
            let dev = (classical - mps)
                .abs()
                .max((classical - oracle).abs())
                .max((mps - oracle).abs());
            max_dev = max_dev.max(dev);
            println!(
                "{},{},{},{}",
                render_word(&p.machine, &word),
                fmt_f64(classical),
                fmt_f64(mps),
                fmt_f64(oracle)
            );
        }
    }
    println!("max_deviation,{}", fmt_f64(max_dev));
    if max_dev > COMPARE_TOL {
        return Err(CliError::Validation(format!(
            "distributions deviate by {max_dev:.3e} (threshold {COMPARE_TOL:.0e})"
        )));
    }
    Ok(())
}

fn render_word(machine: &EpsilonMachine, word: &Word) -> String {
    let labels = word.to_labels(machine).expect("word from machine alphabet");
    if machine.alphabet().iter().all(|l| l.chars().count() == 1) {
        labels.concat()
    } else {
        labels.join(" ")
    }
}

pub fn cmd_sample(
    machine_arg: &str,
    engine: Engine,
    steps: usize,
    seed: u64,
    tv_len: Option<usize>,
) -> Result<(), CliError> {
    let p = pipeline(machine_arg, 1e-12)?;
    let word = match engine {
        Engine::Classical => sample_classical(&p.machine, &p.pi, seed, steps)?.0,
        Engine::Quantum => {
            require_ergodic(&p.fp, "the q-simulator")?;
            let cf = canonical_form(&p.site, &p.fp, qsm::canonical::DEFAULT_RANK_CUTOFF)?;
            let qsim = build_qsimulator(&p.site, &cf, &p.pi)?;
            sample_quantum(&qsim, &p.pi, seed, steps)?
        }
    };
    println!("{}", render_word(&p.machine, &word));
    if let Some(len) = tv_len {
        let exact = enumerate_words(&p.machine, &p.pi, len)?;
        let tv = empirical_tv(&word, &exact)?;
        eprintln!("tv(len={len}) = {tv:.6e}");
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct SweepRow {
    n: usize,
    m: usize,
    rank: usize,
    gap: f64,
    c_mu_0: f64,
    c_mu_1: f64,
    c_q_0: f64,
    c_q_1: f64,
    seconds: f64,
}

pub fn cmd_sweep(
    family: &str,
    n_min: usize,
    n_max: usize,
    out: &Path,
    svg: Option<&PathBuf>,
) -> Result<(), CliError> {
    if family != "renewal" {
        return Err(CliError::usage(format!("unsupported sweep family {family:?} (only renewal)")));
    }
    if n_min < 2 || n_max < n_min {
        return Err(CliError::usage("sweep needs 2 <= n-min <= n-max"));
    }

    let threads = std::env::var("QSM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;

    let ns: Vec<usize> = (n_min..=n_max).collect();
    let rows: Vec<Result<SweepRow, CliError>> = pool.install(|| {
        use rayon::prelude::*;
        ns.par_iter().map(|&n| sweep_row(n)).collect()
    });
    let rows: Vec<SweepRow> = rows.into_iter().collect::<Result<_, _>>()?;

    let mut csv = String::from("N,m,rank,gap,c_mu_0,c_mu_1,c_q_0,c_q_1,seconds\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.3}\n",
            row.n,
            row.m,
            row.rank,
            fmt_f64(row.gap),
            fmt_f64(row.c_mu_0),
            fmt_f64(row.c_mu_1),
            fmt_f64(row.c_q_0),
            fmt_f64(row.c_q_1),
            row.seconds
        ));
    }
    write_file(out, &csv)?;
    eprintln!("wrote {} rows to {}", rows.len(), out.display());

    if let Some(svg_path) = svg {
        let chart = sweep_svg(&rows);
        write_file(svg_path, &chart)?;
        eprintln!("wrote chart to {}", svg_path.display());
    }
    Ok(())
}

fn sweep_row(n: usize) -> Result<SweepRow, CliError> {
    let start = Instant::now();
    let machine = ProcessSpec::Renewal { n }
        .build()
        .map_err(|e| CliError::usage(e.to_string()))?;
    let summary = complexity_summary(&machine, &[0.0, 1.0], &analysis_options(1e-12, 1e-10))?;
    let at = |pairs: &[(f64, f64)], alpha: f64| {
        pairs.iter().find(|(a, _)| *a == alpha).map(|(_, v)| *v).expect("alpha in grid")
    };
    Ok(SweepRow {
        n,
        m: machine.num_states(),
        rank: summary.rank,
        gap: summary.gap,
        c_mu_0: at(&summary.c_mu, 0.0),
        c_mu_1: at(&summary.c_mu, 1.0),
        c_q_0: at(&summary.c_q, 0.0),
        c_q_1: at(&summary.c_q, 1.0),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Minimal static line chart of the sweep: classical and quantum Shannon
/// memory versus N.
fn sweep_svg(rows: &[SweepRow]) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 400.0, 60.0, 20.0, 20.0, 45.0);
    let x_min = rows.first().map(|r| r.n as f64).unwrap_or(0.0);
    let x_max = rows.last().map(|r| r.n as f64).unwrap_or(1.0).max(x_min + 1.0);
    let y_max = rows.iter().map(|r| r.c_mu_1).fold(1.0_f64, f64::max) * 1.05;
    let x = |n: f64| ml + (n - x_min) / (x_max - x_min) * (w - ml - mr);
    let y = |v: f64| h - mb - v / y_max * (h - mt - mb);
    let path = |pick: &dyn Fn(&SweepRow) -> f64| -> String {
        rows.iter()
            .map(|r| format!("{:.2},{:.2}", x(r.n as f64), y(pick(r))))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    s.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb, w - mr, h - mb, h - mb
    ));
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path(&|r| r.c_mu_1)
    ));
    s.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"firebrick\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        path(&|r| r.c_q_1)
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\">N</text>\n<text x=\"12\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 12 {})\">bits</text>\n",
        (w - mr + ml) / 2.0, h - 12.0, (h - mb + mt) / 2.0, (h - mb + mt) / 2.0
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"steelblue\">classical memory</text>\n<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"firebrick\">quantum memory</text>\n",
        ml + 10.0, mt + 14.0, ml + 10.0, mt + 30.0
    ));
    s.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\" font-size=\"10\">{x_min}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"10\">{x_max}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"10\">{y_max:.2}</text>\n",
        h - mb + 14.0, w - mr - 20.0, h - mb + 14.0, 8.0, mt + 4.0
    ));
    s.push_str("</svg>\n");
    s
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::usage(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(contents.as_bytes())
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn cmd_export(
    machine_arg: &str,
    what: ExportKind,
    out: &Path,
    rank_cutoff: f64,
    tol: f64,
) -> Result<(), CliError> {
    let p = pipeline(machine_arg, tol)?;
    require_ergodic(&p.fp, "the canonical form")?;
    let cf = canonical_form(&p.site, &p.fp, rank_cutoff)?;
    let text = match what {
        ExportKind::Canonical => export_canonical(&p.name, p.machine.alphabet(), &cf),
        ExportKind::Qsim => {
            let qsim = build_qsimulator(&p.site, &cf, &p.pi)?;
            let pi = DVector::from_column_slice(p.pi.as_slice());
            export_qsimulator(&p.name, p.machine.alphabet(), &qsim, &pi)
        }
    };
    write_file(out, &text)?;
    eprintln!("wrote {} export to {}", what.as_str(), out.display());
    Ok(())
}


pub fn cmd_truncate(machine_arg: &str, chi: usize, report_len: usize) -> Result<(), CliError> {
    let p = pipeline(machine_arg, 1e-12)?;
    require_ergodic(&p.fp, "truncation")?;
    let cf = canonical_form(&p.site, &p.fp, qsm::canonical::DEFAULT_RANK_CUTOFF)?;
    let rank = cf.rank();
    let (truncated, report) = truncate(&cf, &p.site, chi, report_len)?;
    println!("machine: {}", p.name);
    println!("rank: {rank} -> chi: {}", truncated.rank());
    println!("discarded_weight: {}", fmt_f64(report.discarded_weight));
    println!("length,tv");
    for (length, tv) in &report.tv_by_length {
        println!("{length},{}", fmt_f64(*tv));
    }
    Ok(())
}
