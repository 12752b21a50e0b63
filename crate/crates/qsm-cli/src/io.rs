//! File formats: the JSON machine description and the CSV-block export format
//! for canonical and q-simulator artifacts.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use qsm::canonical::CanonicalForm;
use qsm::machine::EpsilonMachine;
use qsm::qsim::QSimulator;
use qsm::zoo::ProcessSpec;

use crate::CliError;

/// One labeled transition `P(symbol, to | from) = prob`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: String,
    pub symbol: String,
    pub to: String,
    pub prob: f64,
}

/// The on-disk machine description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MachineFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabet: Vec<String>,
    pub states: Vec<String>,
    pub transitions: Vec<TransitionRecord>,
}

impl MachineFile {
    pub fn to_machine(&self) -> Result<EpsilonMachine, CliError> {
        let m = self.states.len();
        let a = self.alphabet.len();
        if m == 0 || a == 0 {
            return Err(CliError::usage("machine file needs nonempty alphabet and states"));
        }
        let mut tensors = vec![DMatrix::<f64>::zeros(m, m); a];
        for record in &self.transitions {
            let x = self
                .alphabet
                .iter()
                .position(|l| *l == record.symbol)
                .ok_or_else(|| {
                    CliError::usage(format!("unknown symbol label {:?}", record.symbol))
                })?;
            let from = self
                .states
                .iter()
                .position(|l| *l == record.from)
                .ok_or_else(|| CliError::usage(format!("unknown state label {:?}", record.from)))?;
            let to = self
                .states
                .iter()
                .position(|l| *l == record.to)
                .ok_or_else(|| CliError::usage(format!("unknown state label {:?}", record.to)))?;
            if tensors[x][(from, to)] != 0.0 {
                return Err(CliError::usage(format!(
                    "duplicate transition record ({}, {}, {})",
                    record.from, record.symbol, record.to
                )));
            }
            tensors[x][(from, to)] = record.prob;
        }
        EpsilonMachine::new(self.alphabet.clone(), self.states.clone(), tensors)
            .map_err(|e| CliError::usage(format!("inconsistent machine file: {e}")))
    }

    pub fn from_machine(machine: &EpsilonMachine, name: Option<String>) -> Self {
        let mut transitions = Vec::new();
        for (x, t) in machine.transitions().iter().enumerate() {
            for k in 0..machine.num_states() {
                for j in 0..machine.num_states() {
                    let p = t[(k, j)];
                    if p > 0.0 {
                        transitions.push(TransitionRecord {
                            from: machine.states()[k].clone(),
                            symbol: machine.alphabet()[x].clone(),
                            to: machine.states()[j].clone(),
                            prob: p,
                        });
                    }
                }
            }
        }
        MachineFile {
            name,
            alphabet: machine.alphabet().to_vec(),
            states: machine.states().to_vec(),
            transitions,
        }
    }
}

/// Resolve a machine argument: either zoo shorthand (`renewal{8}`,
/// `biased_coin{0.3}`, …) or a path to a JSON machine file.
pub fn load_machine(arg: &str) -> Result<(EpsilonMachine, String), CliError> {
    if let Ok(spec) = arg.parse::<ProcessSpec>() {
        let machine = spec
            .build()
            .map_err(|e| CliError::usage(format!("bad process spec {arg:?}: {e}")))?;
        return Ok((machine, spec.to_string()));
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {arg:?}: {e}")))?;
    let file: MachineFile = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("cannot parse {arg:?}: {e}")))?;
    let machine = file.to_machine()?;
    let name = file.name.unwrap_or_else(|| {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| arg.into())
    });
    Ok((machine, name))
}

/// Serialize a double losslessly (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write one named matrix block in the export format.
fn write_block(out: &mut String, name: &str, rows: usize, cols: usize, entry: impl Fn(usize, usize) -> f64) {
    let _ = writeln!(out, "# block: {name} rows={rows} cols={cols}");
    for i in 0..rows {
        let line: Vec<String> = (0..cols).map(|j| fmt_f64(entry(i, j))).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
}

fn matrix_block(out: &mut String, name: &str, m: &DMatrix<f64>) {
    write_block(out, name, m.nrows(), m.ncols(), |i, j| m[(i, j)]);
}

fn vector_block(out: &mut String, name: &str, v: &DVector<f64>) {
    write_block(out, name, 1, v.len(), |_, j| v[j]);
}

/// Render the canonical form as CSV blocks with named headers.
pub fn export_canonical(machine_name: &str, symbols: &[String], cf: &CanonicalForm) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# qsm export v1");
    let _ = writeln!(out, "# kind: canonical");
    let _ = writeln!(out, "# machine: {machine_name}");
    let _ = writeln!(out, "# symbols: {}", symbols.join(" "));
    vector_block(&mut out, "w_l_diag", cf.w_l_diag());
    matrix_block(&mut out, "w_r", cf.w_r());
    matrix_block(&mut out, "w_r_pinv", cf.w_r_pinv());
    matrix_block(&mut out, "u", cf.u());
    matrix_block(&mut out, "v", cf.v());
    vector_block(&mut out, "lambda", cf.lambda());
    for (x, gamma) in cf.gammas().iter().enumerate() {
        matrix_block(&mut out, &format!("gamma_{x}"), gamma);
    }
    matrix_block(&mut out, "v_l", cf.v_l());
    matrix_block(&mut out, "v_r", cf.v_r());
    out
}

/// Render the q-simulator as CSV blocks with named headers.
pub fn export_qsimulator(
    machine_name: &str,
    symbols: &[String],
    qsim: &QSimulator,
    pi: &DVector<f64>,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# qsm export v1");
    let _ = writeln!(out, "# kind: qsim");
    let _ = writeln!(out, "# machine: {machine_name}");
    let _ = writeln!(out, "# symbols: {}", symbols.join(" "));
    matrix_block(&mut out, "sigma", qsim.sigma());
    for (x, b) in qsim.kraus().iter().enumerate() {
        matrix_block(&mut out, &format!("kraus_{x}"), b);
    }
    matrix_block(&mut out, "phi", qsim.phi());
    vector_block(&mut out, "pi", pi);
    out
}

/// Parsed export document: header fields plus named blocks.
#[derive(Debug, Clone)]
pub struct ExportDocument {
    pub kind: String,
    pub machine: String,
    pub blocks: BTreeMap<String, DMatrix<f64>>,
}

impl ExportDocument {
    pub fn block(&self, name: &str) -> Result<&DMatrix<f64>, CliError> {
        self.blocks
            .get(name)
            .ok_or_else(|| CliError::usage(format!("export document is missing block {name:?}")))
    }

    pub fn vector(&self, name: &str) -> Result<DVector<f64>, CliError> {
        let m = self.block(name)?;
        if m.nrows() != 1 {
            return Err(CliError::usage(format!("block {name:?} is not a row vector")));
        }
        Ok(DVector::from_iterator(m.ncols(), m.iter().copied()))
    }

    /// Gamma (or Kraus) blocks in symbol order.
    pub fn indexed_blocks(&self, prefix: &str) -> Vec<DMatrix<f64>> {
        let mut found: Vec<(usize, DMatrix<f64>)> = self
            .blocks
            .iter()
            .filter_map(|(name, m)| {
                name.strip_prefix(prefix).and_then(|idx| idx.parse::<usize>().ok()).map(|x| (x, m.clone()))
            })
            .collect();
        found.sort_by_key(|(x, _)| *x);
        found.into_iter().map(|(_, m)| m).collect()
    }
}

/// Parse the export format back into matrices.
pub fn parse_export(text: &str) -> Result<ExportDocument, CliError> {
    let mut kind = String::new();
    let mut machine = String::new();
    let mut blocks = BTreeMap::new();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.next() {
        if let Some(rest) = line.strip_prefix("# kind: ") {
            kind = rest.trim().to_string();
        } else if let Some(rest) = line.strip_prefix("# machine: ") {
            machine = rest.trim().to_string();
        } else if let Some(rest) = line.strip_prefix("# block: ") {
            let mut parts = rest.split_whitespace();
            let name = parts
                .next()
                .ok_or_else(|| CliError::usage("block header missing name"))?
                .to_string();
            let mut rows = None;
            let mut cols = None;
            for p in parts {
                if let Some(v) = p.strip_prefix("rows=") {
                    rows = v.parse::<usize>().ok();
                } else if let Some(v) = p.strip_prefix("cols=") {
                    cols = v.parse::<usize>().ok();
                }
            }
            let (rows, cols) = match (rows, cols) {
                (Some(r), Some(c)) => (r, c),
                _ => return Err(CliError::usage(format!("malformed block header for {name:?}"))),
            };
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows {
                let row = lines
                    .next()
                    .ok_or_else(|| CliError::usage(format!("block {name:?} truncated")))?;
                for cell in row.split(',') {
                    let value: f64 = cell.trim().parse().map_err(|e| {
                        CliError::usage(format!("bad number {cell:?} in block {name:?}: {e}"))
                    })?;
                    data.push(value);
                }
            }
            if data.len() != rows * cols {
                return Err(CliError::usage(format!(
                    "block {name:?} has {} entries, expected {}",
                    data.len(),
                    rows * cols
                )));
            }
            blocks.insert(name, DMatrix::from_row_slice(rows, cols, &data));
        }
    }
    Ok(ExportDocument { kind, machine, blocks })
}

/// Rebuild a canonical form from a parsed export document.
pub fn canonical_from_export(doc: &ExportDocument) -> Result<CanonicalForm, CliError> {
    Ok(CanonicalForm::from_parts(
        doc.vector("w_l_diag")?,
        doc.block("w_r")?.clone(),
        doc.block("w_r_pinv")?.clone(),
        doc.block("u")?.clone(),
        doc.block("v")?.clone(),
        doc.vector("lambda")?,
        doc.indexed_blocks("gamma_"),
        doc.block("v_l")?.clone(),
        doc.block("v_r")?.clone(),
    ))
}

/// Rebuild a q-simulator from a parsed export document.
pub fn qsimulator_from_export(doc: &ExportDocument) -> Result<QSimulator, CliError> {
    Ok(QSimulator::from_parts(
        doc.block("sigma")?.clone(),
        doc.indexed_blocks("kraus_"),
        doc.block("phi")?.clone(),
    ))
}
