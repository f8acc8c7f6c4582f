//! Mixed numerical/categorical tabular data.
//!
//! A cell is either a finite real ([`Value::Num`]) or a categorical token
//! ([`Value::Cat`]). The missing marker `?` is an ordinary token. Which
//! columns may hold numbers is decided per feature ([`FeatureKind`]); inside
//! a numerical column any cell that does not parse as a real stays
//! categorical.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token used for absent cells.
pub const MISSING: &str = "?";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl Value {
    /// Builds a numeric value, rejecting NaN and infinities. `-0.0` is
    /// normalized to `0.0` so that equality and hashing agree.
    pub fn num(x: f64) -> Option<Value> {
        if x.is_finite() {
            Some(Value::Num(if x == 0.0 { 0.0 } else { x }))
        } else {
            None
        }
    }

    /// Builds a categorical value; an empty token becomes the missing marker.
    pub fn cat(token: impl Into<String>) -> Value {
        let token = token.into();
        if token.is_empty() {
            Value::Cat(MISSING.to_string())
        } else {
            Value::Cat(token)
        }
    }

    /// Interprets a raw cell of a numerical column.
    pub fn parse_numeric_cell(raw: &str) -> Value {
        parse_real(raw)
            .and_then(Value::num)
            .unwrap_or_else(|| Value::cat(raw))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<&str> {
        match self {
            Value::Num(_) => None,
            Value::Cat(s) => Some(s),
        }
    }

    pub fn is_num(&self) -> bool {
        matches!(self, Value::Num(_))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Cat(a), Value::Cat(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Num(x) => {
                0u8.hash(state);
                // 0.0 and -0.0 compare equal; hash them alike.
                let x = if *x == 0.0 { 0.0f64 } else { *x };
                x.to_bits().hash(state);
            }
            Value::Cat(s) => {
                1u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Numbers sort before tokens; numbers numerically, tokens lexicographically.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Num(_), Value::Cat(_)) => Ordering::Less,
            (Value::Cat(_), Value::Num(_)) => Ordering::Greater,
            (Value::Cat(a), Value::Cat(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Value {
    /// Numbers use the shortest representation that parses back to the same
    /// `f64`; tokens are written raw.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(x) => write!(f, "{x}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

/// Parses an integer or decimal literal with optional sign and exponent.
/// Words such as `inf` or `NaN` are not numbers here.
pub fn parse_real(raw: &str) -> Option<f64> {
    let s = raw.trim();
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        digits += i - frac_start;
    }
    if digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    s.parse::<f64>().ok().filter(|x| x.is_finite())
}

/// Comparison operator of a literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    /// `≤`
    Le,
    /// `>`
    Gt,
    /// `=`
    Eq,
    /// `≠`
    Ne,
}

impl Op {
    pub fn symbol(self) -> &'static str {
        match self {
            Op::Le => "<=",
            Op::Gt => ">",
            Op::Eq => "=",
            Op::Ne => "!=",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Op::Le | Op::Gt)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Evaluates `left op right`.
///
/// Number against number compares arithmetically and token against token by
/// identity (ordering operators are false between tokens). When a number
/// meets a token, `=` is false, `≠` is true, and `≤`/`>` are false.
pub fn compare(left: &Value, op: Op, right: &Value) -> bool {
    match (left, right) {
        (Value::Num(a), Value::Num(b)) => match op {
            Op::Le => a <= b,
            Op::Gt => a > b,
            Op::Eq => a == b,
            Op::Ne => a != b,
        },
        (Value::Cat(a), Value::Cat(b)) => match op {
            Op::Eq => a == b,
            Op::Ne => a != b,
            Op::Le | Op::Gt => false,
        },
        _ => matches!(op, Op::Ne),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub index: usize,
    pub kind: FeatureKind,
}

/// A column is numerical as soon as one of its cells reads as a real.
/// Columns mixing numbers and tokens are therefore numerical.
pub fn infer_feature_kind<S: AsRef<str>>(column: &[S]) -> FeatureKind {
    if column
        .iter()
        .any(|c| c.as_ref() != MISSING && parse_real(c.as_ref()).is_some())
    {
        FeatureKind::Numerical
    } else {
        FeatureKind::Categorical
    }
}

/// Which column holds the class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LabelColumn {
    Name(String),
    Index(usize),
}

impl LabelColumn {
    /// A header name when one matches, otherwise a 0-based index if the
    /// argument is a plain integer.
    fn resolve(&self, header: &[String]) -> Result<usize> {
        match self {
            LabelColumn::Name(name) => {
                if let Some(i) = header.iter().position(|h| h == name) {
                    return Ok(i);
                }
                match name.parse::<usize>() {
                    Ok(i) if i < header.len() => Ok(i),
                    _ => Err(Error::Config(format!("unknown label column `{name}`"))),
                }
            }
            LabelColumn::Index(i) if *i < header.len() => Ok(*i),
            LabelColumn::Index(i) => Err(Error::Config(format!(
                "label column index {i} out of range ({} columns)",
                header.len()
            ))),
        }
    }
}

/// How numerical features are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum NumericSpec {
    /// Infer per column with [`infer_feature_kind`].
    #[default]
    Auto,
    /// Exactly these columns are numerical, all others categorical.
    Columns(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<FeatureSchema>,
    rows: Vec<Vec<Value>>,
    labels: Vec<String>,
    label_name: String,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        rows: Vec<Vec<Value>>,
        labels: Vec<String>,
        label_name: impl Into<String>,
    ) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, f) in schema.iter().enumerate() {
            if f.index != i {
                return Err(Error::Input(format!(
                    "feature `{}` has index {} at position {i}",
                    f.name, f.index
                )));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::Input(format!(
                    "row {r} has {} values, schema has {}",
                    row.len(),
                    schema.len()
                )));
            }
            for (v, f) in row.iter().zip(&schema) {
                if f.kind == FeatureKind::Categorical && v.is_num() {
                    return Err(Error::Input(format!(
                        "row {r}: numeric value in categorical feature `{}`",
                        f.name
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            rows,
            labels,
            label_name: label_name.into(),
        })
    }

    /// Reads a CSV with a header row. The label column is removed from the
    /// features.
    pub fn parse_csv<R: Read>(
        source: R,
        label: &LabelColumn,
        numeric: &NumericSpec,
    ) -> Result<Self> {
        let (header, records) = read_records(source)?;
        if header.is_empty() {
            return Err(Error::Config("empty dataset: no header row".into()));
        }
        let label_idx = label.resolve(&header)?;
        if records.is_empty() {
            return Err(Error::Config("empty dataset: no data rows".into()));
        }
        if let NumericSpec::Columns(cols) = numeric {
            for c in cols {
                if !header.iter().any(|h| h == c) {
                    return Err(Error::Config(format!("unknown numeric column `{c}`")));
                }
                if header[label_idx] == *c {
                    return Err(Error::Config(format!(
                        "label column `{c}` cannot be numerical"
                    )));
                }
            }
        }

        let feature_cols: Vec<usize> = (0..header.len()).filter(|&c| c != label_idx).collect();
        let schema: Vec<FeatureSchema> = feature_cols
            .iter()
            .enumerate()
            .map(|(index, &c)| {
                let kind = match numeric {
                    NumericSpec::Columns(cols) => {
                        if cols.iter().any(|n| *n == header[c]) {
                            FeatureKind::Numerical
                        } else {
                            FeatureKind::Categorical
                        }
                    }
                    NumericSpec::Auto => {
                        let column: Vec<&str> =
                            records.iter().map(|(_, r)| r[c].as_str()).collect();
                        infer_feature_kind(&column)
                    }
                };
                FeatureSchema {
                    name: header[c].clone(),
                    index,
                    kind,
                }
            })
            .collect();

        let mut rows = Vec::with_capacity(records.len());
        let mut labels = Vec::with_capacity(records.len());
        for (_, rec) in &records {
            rows.push(
                feature_cols
                    .iter()
                    .zip(&schema)
                    .map(|(&c, f)| cell_value(&rec[c], f.kind))
                    .collect(),
            );
            labels.push(label_token(&rec[label_idx]));
        }
        Dataset::new(schema, rows, labels, header[label_idx].clone())
    }

    pub fn schema(&self) -> &[FeatureSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Value] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    /// Distinct labels in order of first occurrence.
    pub fn label_values(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.labels
            .iter()
            .filter(|l| seen.insert(l.as_str()))
            .cloned()
            .collect()
    }

    /// The rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            label_name: self.label_name.clone(),
        }
    }

    /// Writes features then the label column, numbers at full precision.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header: Vec<&str> = self.schema.iter().map(|f| f.name.as_str()).collect();
        header.push(&self.label_name);
        w.write_record(&header).map_err(csv_io)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.clone());
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows read against a known schema, e.g. for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<Value>>,
    /// Present when the CSV also carried the label column.
    pub labels: Option<Vec<String>>,
}

/// Reads a CSV whose columns must be exactly the schema's features, in any
/// order, optionally plus the label column. Unlike [`Dataset::parse_csv`] an
/// input without rows (or without even a header) is accepted.
pub fn parse_csv_with_schema<R: Read>(
    source: R,
    schema: &[FeatureSchema],
    label_name: &str,
) -> Result<Table> {
    let (header, records) = read_records(source)?;
    if header.is_empty() {
        return Ok(Table {
            rows: Vec::new(),
            labels: None,
        });
    }
    let mut positions = Vec::with_capacity(schema.len());
    for f in schema {
        match header.iter().position(|h| *h == f.name) {
            Some(p) => positions.push(p),
            None => return Err(Error::Schema(format!("missing feature column `{}`", f.name))),
        }
    }
    let label_pos = header.iter().position(|h| h == label_name);
    for (i, h) in header.iter().enumerate() {
        if Some(i) != label_pos && !positions.contains(&i) {
            return Err(Error::Schema(format!(
                "unexpected column `{h}` ({} columns, model has {} features)",
                header.len(),
                schema.len()
            )));
        }
    }
    let rows = records
        .iter()
        .map(|(_, rec)| {
            positions
                .iter()
                .zip(schema)
                .map(|(&p, f)| cell_value(&rec[p], f.kind))
                .collect()
        })
        .collect();
    let labels =
        label_pos.map(|p| records.iter().map(|(_, rec)| label_token(&rec[p])).collect());
    Ok(Table { rows, labels })
}

fn cell_value(raw: &str, kind: FeatureKind) -> Value {
    match kind {
        FeatureKind::Numerical => Value::parse_numeric_cell(raw),
        FeatureKind::Categorical => Value::cat(raw),
    }
}

fn label_token(raw: &str) -> String {
    if raw.is_empty() {
        MISSING.to_string()
    } else {
        raw.to_string()
    }
}

type Records = Vec<(usize, Vec<String>)>;

/// Header plus (line number, cells) for every record; checks arity.
fn read_records<R: Read>(source: R) -> Result<(Vec<String>, Records)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut header: Vec<String> = Vec::new();
    let mut records = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            row: e.position().map(|p| p.line() as usize).unwrap_or(n + 1),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(n + 1);
        if n == 0 {
            header = rec.iter().map(str::to_string).collect();
            continue;
        }
        if rec.len() == 1 && rec.get(0) == Some("") {
            // blank line
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row: line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        records.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok((header, records))
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
