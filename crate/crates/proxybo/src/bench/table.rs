//! Benchmark table files: metrics for every evaluated architecture.
//!
//! A table is a plain text file with two header lines and one row per
//! architecture:
//!
//! ```text
//! #space edges=3 ops=3
//! #meta name=demo minimize=1 optimum_test=0.12
//! 0,0,0;0.41;0.43;88.25;proxy:good=0.12;proxy:anti=0.9
//! ...
//! ```
//!
//! Fields within a row are `encoding;val;test;cost`, followed by any number
//! of `proxy:<name>=<value>` columns. `minimize` declares the metric
//! orientation (`1`: lower raw values are better; `0`: higher are better,
//! e.g. accuracies); the [`objective`](BenchmarkTable::objective) accessors
//! fold that orientation away so the engine always minimizes. Rows are kept
//! and saved in the encodings' canonical (lexicographic) order, making the
//! file bytes a deterministic function of the table's contents.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::space::{ArchEncoding, SearchSpaceSpec};

/// Metrics recorded for one architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    /// Validation metric in the table's raw orientation.
    pub val: f64,
    /// Test metric in the table's raw orientation.
    pub test: f64,
    /// Simulated evaluation cost (e.g. training seconds); strictly positive.
    pub cost: f64,
    /// Named proxy score columns (lower is better).
    pub proxies: BTreeMap<String, f64>,
}

/// Table-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkMeta {
    /// Benchmark name (no whitespace).
    pub name: String,
    /// Whether lower raw metrics are better.
    pub minimize: bool,
    /// The space's best raw test metric, when known.
    pub optimum_test: Option<f64>,
}

/// An in-memory benchmark: a search space plus metrics per encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    space: SearchSpaceSpec,
    meta: BenchmarkMeta,
    rows: BTreeMap<ArchEncoding, BenchmarkRecord>,
}

fn valid_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.')
}

impl BenchmarkTable {
    /// Creates an empty table; the metadata name must be a plain token.
    pub fn new(space: SearchSpaceSpec, meta: BenchmarkMeta) -> Result<Self> {
        if !valid_token(&meta.name) {
            return Err(Error::InvalidValue(format!(
                "benchmark name `{}` must be a plain token (alphanumeric, _, -, .)",
                meta.name
            )));
        }
        if let Some(v) = meta.optimum_test {
            if !v.is_finite() {
                return Err(Error::InvalidValue(
                    "optimum_test must be finite when present".into(),
                ));
            }
        }
        Ok(Self {
            space,
            meta,
            rows: BTreeMap::new(),
        })
    }

    /// Adds one row. The encoding must belong to the space and be new; the
    /// metrics must be finite, the cost strictly positive, proxy names plain
    /// tokens, and proxy values non-NaN.
    pub fn insert(&mut self, encoding: ArchEncoding, record: BenchmarkRecord) -> Result<()> {
        if !self.space.contains(&encoding) {
            return Err(Error::EncodingMismatch {
                encoding: encoding.to_string(),
                space: self.space.name().to_string(),
            });
        }
        if self.rows.contains_key(&encoding) {
            return Err(Error::InvalidValue(format!(
                "duplicate benchmark entry for {encoding}"
            )));
        }
        if !record.val.is_finite() || !record.test.is_finite() {
            return Err(Error::InvalidValue(format!(
                "metrics for {encoding} must be finite"
            )));
        }
        if !(record.cost.is_finite() && record.cost > 0.0) {
            return Err(Error::InvalidValue(format!(
                "cost for {encoding} must be a positive finite number"
            )));
        }
        for (name, value) in &record.proxies {
            if !valid_token(name) {
                return Err(Error::InvalidValue(format!(
                    "proxy name `{name}` must be a plain token"
                )));
            }
            if value.is_nan() {
                return Err(Error::InvalidValue(format!(
                    "proxy `{name}` for {encoding} must not be NaN"
                )));
            }
        }
        self.rows.insert(encoding, record);
        Ok(())
    }

    pub fn space(&self) -> &SearchSpaceSpec {
        &self.space
    }

    pub fn meta(&self) -> &BenchmarkMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Whether every encoding of the space has a row.
    pub fn is_exhaustive(&self) -> bool {
        self.rows.len() as u128 == self.space.size()
    }

    /// The raw record for an encoding, if present.
    pub fn record(&self, x: &ArchEncoding) -> Option<&BenchmarkRecord> {
        self.rows.get(x)
    }

    /// Rows in canonical encoding order.
    pub fn iter(&self) -> impl Iterator<Item = (&ArchEncoding, &BenchmarkRecord)> {
        self.rows.iter()
    }

    /// Encodings in canonical order.
    pub fn encodings(&self) -> impl Iterator<Item = &ArchEncoding> {
        self.rows.keys()
    }

    fn lookup(&self, x: &ArchEncoding) -> Result<&BenchmarkRecord> {
        self.rows
            .get(x)
            .ok_or_else(|| Error::MissingEntry(x.to_string()))
    }

    fn orient(&self, raw: f64) -> f64 {
        if self.meta.minimize {
            raw
        } else {
            -raw
        }
    }

    /// Validation metric oriented for minimization.
    pub fn objective(&self, x: &ArchEncoding) -> Result<f64> {
        Ok(self.orient(self.lookup(x)?.val))
    }

    /// Test metric oriented for minimization.
    pub fn test_objective(&self, x: &ArchEncoding) -> Result<f64> {
        Ok(self.orient(self.lookup(x)?.test))
    }

    /// Evaluation cost of an encoding.
    pub fn cost(&self, x: &ArchEncoding) -> Result<f64> {
        Ok(self.lookup(x)?.cost)
    }

    /// The best test objective (minimization-oriented): the declared optimum
    /// if the metadata carries one, otherwise the best over the table's rows.
    pub fn optimum_test_objective(&self) -> Option<f64> {
        if let Some(v) = self.meta.optimum_test {
            return Some(self.orient(v));
        }
        self.rows
            .values()
            .map(|r| self.orient(r.test))
            .min_by(|a, b| a.partial_cmp(b).expect("finite metrics"))
    }

    /// Extracts a proxy column present on *every* row.
    pub fn proxy_column(&self, name: &str) -> Result<HashMap<ArchEncoding, f64>> {
        let missing = self
            .rows
            .values()
            .filter(|r| !r.proxies.contains_key(name))
            .count();
        if missing > 0 {
            return Err(Error::MissingProxyColumn {
                name: name.to_string(),
                missing,
                total: self.rows.len(),
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|(x, r)| (x.clone(), r.proxies[name]))
            .collect())
    }

    /// Names of proxy columns carried by every row, sorted.
    pub fn universal_proxy_names(&self) -> Vec<String> {
        let mut rows = self.rows.values();
        let Some(first) = rows.next() else {
            return Vec::new();
        };
        let mut names: Vec<String> = first.proxies.keys().cloned().collect();
        for r in rows {
            names.retain(|n| r.proxies.contains_key(n));
        }
        names
    }

    /// Serializes the table in its canonical byte form.
    pub fn save_to_string(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "#space edges={} ops={}",
            self.space.edge_count(),
            self.space.ops_per_edge()
        )
        .expect("writing to a string cannot fail");
        write!(
            out,
            "#meta name={} minimize={}",
            self.meta.name,
            u8::from(self.meta.minimize)
        )
        .expect("writing to a string cannot fail");
        if let Some(v) = self.meta.optimum_test {
            write!(out, " optimum_test={v}").expect("writing to a string cannot fail");
        }
        out.push('\n');
        for (x, r) in &self.rows {
            write!(out, "{x};{};{};{}", r.val, r.test, r.cost)
                .expect("writing to a string cannot fail");
            for (name, value) in &r.proxies {
                write!(out, ";proxy:{name}={value}").expect("writing to a string cannot fail");
            }
            out.push('\n');
        }
        out
    }

    /// Writes the canonical byte form to a file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.save_to_string())?;
        Ok(())
    }

    /// Parses the canonical text form. The reconstructed search space takes
    /// the benchmark's name.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();

        let (line_no, space_line) = lines
            .next()
            .ok_or_else(|| Error::TableFormat {
                line: 1,
                message: "missing #space header".into(),
            })?;
        let (edges, ops) = parse_space_header(line_no + 1, space_line)?;

        let (line_no, meta_line) = lines
            .next()
            .ok_or_else(|| Error::TableFormat {
                line: 2,
                message: "missing #meta header".into(),
            })?;
        let meta = parse_meta_header(line_no + 1, meta_line)?;
        let space =
            SearchSpaceSpec::new(meta.name.clone(), edges, ops).map_err(|e| Error::TableFormat {
                line: 1,
                message: e.to_string(),
            })?;

        let mut table = BenchmarkTable::new(space, meta).map_err(|e| Error::TableFormat {
            line: 2,
            message: e.to_string(),
        })?;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let (encoding, record) = parse_row(line_no, line, table.space())?;
            table.insert(encoding, record).map_err(|e| Error::TableFormat {
                line: line_no,
                message: e.to_string(),
            })?;
        }
        Ok(table)
    }

    /// Reads and parses a table file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }
}

fn header_fields<'a>(
    line_no: usize,
    line: &'a str,
    tag: &str,
    allowed: &[&str],
) -> Result<Vec<(&'a str, &'a str)>> {
    let mut parts = line.split_whitespace();
    match parts.next() {
        Some(t) if t == tag => {}
        _ => {
            return Err(Error::TableFormat {
                line: line_no,
                message: format!("expected a `{tag}` header"),
            })
        }
    }
    let mut fields = Vec::new();
    for part in parts {
        let (key, value) = part.split_once('=').ok_or_else(|| Error::TableFormat {
            line: line_no,
            message: format!("malformed field `{part}` (expected key=value)"),
        })?;
        if !allowed.contains(&key) {
            return Err(Error::TableFormat {
                line: line_no,
                message: format!("unknown {tag} field `{key}`"),
            });
        }
        if fields.iter().any(|(k, _)| *k == key) {
            return Err(Error::TableFormat {
                line: line_no,
                message: format!("repeated {tag} field `{key}`"),
            });
        }
        fields.push((key, value));
    }
    Ok(fields)
}

fn require<'a>(
    line_no: usize,
    fields: &[(&str, &'a str)],
    key: &str,
) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::TableFormat {
            line: line_no,
            message: format!("missing required field `{key}`"),
        })
}

fn parse_space_header(line_no: usize, line: &str) -> Result<(usize, usize)> {
    let fields = header_fields(line_no, line, "#space", &["edges", "ops"])?;
    let edges: usize = require(line_no, &fields, "edges")?
        .parse()
        .map_err(|_| Error::TableFormat {
            line: line_no,
            message: "edges must be a non-negative integer".into(),
        })?;
    let ops: usize = require(line_no, &fields, "ops")?
        .parse()
        .map_err(|_| Error::TableFormat {
            line: line_no,
            message: "ops must be a non-negative integer".into(),
        })?;
    Ok((edges, ops))
}

fn parse_meta_header(line_no: usize, line: &str) -> Result<BenchmarkMeta> {
    let fields = header_fields(line_no, line, "#meta", &["name", "minimize", "optimum_test"])?;
    let name = require(line_no, &fields, "name")?.to_string();
    let minimize = match require(line_no, &fields, "minimize")? {
        "0" => false,
        "1" => true,
        other => {
            return Err(Error::TableFormat {
                line: line_no,
                message: format!("minimize must be 0 or 1, got `{other}`"),
            })
        }
    };
    let optimum_test = fields
        .iter()
        .find(|(k, _)| *k == "optimum_test")
        .map(|(_, v)| {
            v.parse::<f64>().map_err(|_| Error::TableFormat {
                line: line_no,
                message: format!("optimum_test `{v}` is not a number"),
            })
        })
        .transpose()?;
    Ok(BenchmarkMeta {
        name,
        minimize,
        optimum_test,
    })
}

fn parse_row(
    line_no: usize,
    line: &str,
    space: &SearchSpaceSpec,
) -> Result<(ArchEncoding, BenchmarkRecord)> {
    let fields: Vec<&str> = line.split(';').collect();
    if fields.len() < 4 {
        return Err(Error::TableFormat {
            line: line_no,
            message: format!(
                "row has {} field(s); expected encoding;val;test;cost[;proxy:...]",
                fields.len()
            ),
        });
    }
    let encoding = space.parse_encoding(fields[0]).map_err(|e| Error::TableFormat {
        line: line_no,
        message: e.to_string(),
    })?;
    let parse_num = |what: &str, s: &str| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| Error::TableFormat {
            line: line_no,
            message: format!("{what} `{s}` is not a number"),
        })
    };
    let val = parse_num("val", fields[1])?;
    let test = parse_num("test", fields[2])?;
    let cost = parse_num("cost", fields[3])?;
    let mut proxies = BTreeMap::new();
    for field in &fields[4..] {
        let rest = field.strip_prefix("proxy:").ok_or_else(|| Error::TableFormat {
            line: line_no,
            message: format!("unexpected trailing field `{field}` (expected proxy:<name>=<value>)"),
        })?;
        let (name, value) = rest.split_once('=').ok_or_else(|| Error::TableFormat {
            line: line_no,
            message: format!("malformed proxy field `{field}`"),
        })?;
        if proxies.contains_key(name) {
            return Err(Error::TableFormat {
                line: line_no,
                message: format!("repeated proxy column `{name}`"),
            });
        }
        proxies.insert(name.to_string(), parse_num("proxy value", value)?);
    }
    Ok((
        encoding,
        BenchmarkRecord {
            val,
            test,
            cost,
            proxies,
        },
    ))
}
