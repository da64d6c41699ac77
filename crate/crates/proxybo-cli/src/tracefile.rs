//! Run traces as CSV files.
//!
//! One row per evaluation:
//!
//! ```csv
//! iter,encoding,val,test,best_val,best_test,cost,G_M,I_M,G_good,I_good
//! 1,"2,0,1,3",0.41,0.43,0.41,0.43,72.5,,,,
//! 6,"0,0,2,1",0.２...
//! ```
//!
//! The encoding field is always double-quoted (it contains commas). `G_M`
//! and `I_M` are the surrogate's generalization ability and influence; one
//! `G_<name>,I_<name>` pair follows per proxy. The guidance cells are empty
//! during cold start and for strategies that don't use guidance. Floats are
//! written in Rust's shortest round-trip form, so rewriting an identical
//! run reproduces the file byte for byte.

use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use proxybo::engine::RunTrace;

const FIXED_COLUMNS: [&str; 7] = [
    "iter", "encoding", "val", "test", "best_val", "best_test", "cost",
];

/// Serializes a trace in the canonical CSV form.
pub fn trace_to_string(trace: &RunTrace) -> String {
    // Unguided strategies still carry the surrogate column pair, empty.
    let proxy_names: &[String] = if trace.component_names.is_empty() {
        &[]
    } else {
        &trace.component_names[1..]
    };
    let mut out = String::new();
    out.push_str(&FIXED_COLUMNS.join(","));
    out.push_str(",G_M,I_M");
    for name in proxy_names {
        out.push_str(&format!(",G_{name},I_{name}"));
    }
    out.push('\n');
    let pairs = 1 + proxy_names.len();
    for r in &trace.records {
        out.push_str(&format!(
            "{},\"{}\",{},{},{},{},{}",
            r.iteration, r.encoding, r.val, r.test, r.best_val, r.best_test, r.cost
        ));
        match &r.guidance {
            Some(snap) => {
                for i in 0..pairs {
                    out.push_str(&format!(",{},{}", snap.g[i], snap.influence[i]));
                }
            }
            None => out.push_str(&",".repeat(2 * pairs)),
        }
        out.push('\n');
    }
    out
}

/// Writes a trace file.
pub fn write_trace(path: &Path, trace: &RunTrace) -> Result<()> {
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("creating trace file {}", path.display()))?;
    f.write_all(trace_to_string(trace).as_bytes())
        .with_context(|| format!("writing trace file {}", path.display()))?;
    Ok(())
}

/// One parsed trace row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub encoding: String,
    pub val: f64,
    pub test: f64,
    pub best_val: f64,
    pub best_test: f64,
    pub cost: f64,
    /// Generalization abilities (surrogate first), when the row was guided.
    pub g: Option<Vec<f64>>,
    /// Influence weights, aligned with `g`.
    pub influence: Option<Vec<f64>>,
}

/// A parsed trace file.
#[derive(Debug, Clone)]
pub struct TraceFile {
    /// Component names: "M", then proxy names.
    pub component_names: Vec<String>,
    pub rows: Vec<TraceRow>,
}

/// Reads a trace file written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<TraceFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening trace file {}", path.display()))?;

    let headers = reader.headers().context("reading trace header")?.clone();
    let fields: Vec<&str> = headers.iter().collect();
    if fields.len() < FIXED_COLUMNS.len() + 2 {
        bail!(
            "trace header has {} column(s); expected at least {}",
            fields.len(),
            FIXED_COLUMNS.len() + 2
        );
    }
    for (i, expect) in FIXED_COLUMNS.iter().enumerate() {
        if fields[i] != *expect {
            bail!("trace column {} is `{}`, expected `{expect}`", i + 1, fields[i]);
        }
    }
    let tail = &fields[FIXED_COLUMNS.len()..];
    if tail.len() % 2 != 0 {
        bail!("guidance columns must come in G_*,I_* pairs");
    }
    let mut component_names = Vec::with_capacity(tail.len() / 2);
    for pair in tail.chunks(2) {
        let g_name = pair[0]
            .strip_prefix("G_")
            .with_context(|| format!("column `{}` should start with G_", pair[0]))?;
        let i_name = pair[1]
            .strip_prefix("I_")
            .with_context(|| format!("column `{}` should start with I_", pair[1]))?;
        if g_name != i_name {
            bail!("mismatched guidance pair: G_{g_name} next to I_{i_name}");
        }
        component_names.push(g_name.to_string());
    }
    if component_names.first().map(String::as_str) != Some("M") {
        bail!("the first guidance component must be the surrogate column G_M");
    }

    let parse = |cell: &str, what: &str, line: usize| -> Result<f64> {
        cell.parse::<f64>()
            .with_context(|| format!("line {line}: {what} `{cell}` is not a number"))
    };
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let record = record.with_context(|| format!("reading trace line {line}"))?;
        if record.len() != fields.len() {
            bail!(
                "line {line}: {} cell(s), expected {}",
                record.len(),
                fields.len()
            );
        }
        let iter: usize = record[0]
            .parse()
            .with_context(|| format!("line {line}: bad iteration `{}`", &record[0]))?;
        let guided = !record[FIXED_COLUMNS.len()].is_empty();
        let (g, influence) = if guided {
            let mut g = Vec::with_capacity(component_names.len());
            let mut inf = Vec::with_capacity(component_names.len());
            for (k, name) in component_names.iter().enumerate() {
                let base = FIXED_COLUMNS.len() + 2 * k;
                g.push(parse(&record[base], &format!("G_{name}"), line)?);
                inf.push(parse(&record[base + 1], &format!("I_{name}"), line)?);
            }
            (Some(g), Some(inf))
        } else {
            for k in FIXED_COLUMNS.len()..fields.len() {
                if !record[k].is_empty() {
                    bail!("line {line}: guidance cells must be all present or all empty");
                }
            }
            (None, None)
        };
        rows.push(TraceRow {
            iter,
            encoding: record[1].to_string(),
            val: parse(&record[2], "val", line)?,
            test: parse(&record[3], "test", line)?,
            best_val: parse(&record[4], "best_val", line)?,
            best_test: parse(&record[5], "best_test", line)?,
            cost: parse(&record[6], "cost", line)?,
            g,
            influence,
        });
    }
    Ok(TraceFile {
        component_names,
        rows,
    })
}
