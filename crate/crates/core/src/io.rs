//! CSV ingestion, result emission, run manifests and flat config files.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Locale-independent rendering with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ColumnKind {
    /// Parsed and kept as is.
    Numeric,
    /// Parsed, then centered and scaled to unit sample standard deviation.
    Standardized,
    /// Categorical: one indicator per level except the first (levels sorted).
    /// A two-level column keeps its own name.
    Dummy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn new(name: &str, kind: ColumnKind) -> Self {
        Self {
            name: name.to_string(),
            kind,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Self { columns }
    }

    /// Balanced wage panel: identifiers, log-wage response and covariates.
    pub fn wage_panel() -> Self {
        use ColumnKind::*;
        let mut cols = vec![
            ColumnSpec::new("id", Numeric),
            ColumnSpec::new("year", Numeric),
            ColumnSpec::new("lwage", Numeric),
            ColumnSpec::new("ed", Standardized),
            ColumnSpec::new("exp", Standardized),
            ColumnSpec::new("wks", Standardized),
        ];
        for c in [
            "union", "married", "bluecol", "ind", "south", "smsa", "sex", "black",
        ] {
            cols.push(ColumnSpec::new(c, Dummy));
        }
        Self::new(cols)
    }

    /// Predictive-maintenance table: five sensor readings, machine type and
    /// the failure flag.
    pub fn ai4i() -> Self {
        use ColumnKind::*;
        Self::new(vec![
            ColumnSpec::new("Type", Dummy),
            ColumnSpec::new("Air temperature [K]", Standardized),
            ColumnSpec::new("Process temperature [K]", Standardized),
            ColumnSpec::new("Rotational speed [rpm]", Standardized),
            ColumnSpec::new("Torque [Nm]", Standardized),
            ColumnSpec::new("Tool wear [min]", Standardized),
            ColumnSpec::new("Machine failure", Numeric),
        ])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnSummary {
    pub name: String,
    pub kind: ColumnKind,
    /// Output column names produced from this input column.
    pub encoded_as: Vec<String>,
    /// Mean and sample sd before standardization (numeric kinds only).
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    /// Sorted levels (dummy kind only).
    pub levels: Option<Vec<String>>,
}

/// Encoded table: one column per output name, schema order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    data: DMatrix<f64>,
    summary: Vec<ColumnSummary>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn summary(&self) -> &[ColumnSummary] {
        &self.summary
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column(&self, name: &str) -> Result<DVector<f64>> {
        Ok(self.data.column(self.index(name)?).into_owned())
    }

    /// Columns `names` side by side.
    pub fn matrix(&self, names: &[&str]) -> Result<DMatrix<f64>> {
        let idx = names
            .iter()
            .map(|n| self.index(n))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_fn(self.n_rows(), idx.len(), |i, j| {
            self.data[(i, idx[j])]
        }))
    }

    /// Output names derived from input columns other than `exclude`.
    pub fn covariate_names(&self, exclude: &[&str]) -> Vec<String> {
        self.summary
            .iter()
            .filter(|s| !exclude.contains(&s.name.as_str()))
            .flat_map(|s| s.encoded_as.iter().cloned())
            .collect()
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let file = fs::File::open(path.as_ref())?;
    load_csv_from(file, schema)
}

/// Reads a headed CSV; column order is irrelevant and unlisted columns are
/// ignored. Empty cells are an error.
pub fn load_csv_from<R: Read>(reader: R, schema: &Schema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::EmptyFile);
    }
    let pos = schema
        .columns
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == &c.name)
                .ok_or_else(|| Error::MissingColumn(c.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut raw: Vec<Vec<String>> = vec![Vec::new(); schema.columns.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (k, &p) in pos.iter().enumerate() {
            let cell = rec.get(p).unwrap_or("");
            if cell.is_empty() {
                return Err(Error::MissingCell {
                    column: schema.columns[k].name.clone(),
                    row: row + 1,
                });
            }
            raw[k].push(cell.to_string());
        }
    }
    let n = raw.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::EmptyFile);
    }

    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let mut summary = Vec::new();
    for (spec, cells) in schema.columns.iter().zip(&raw) {
        match spec.kind {
            ColumnKind::Numeric | ColumnKind::Standardized => {
                let mut v = cells
                    .iter()
                    .enumerate()
                    .map(|(row, c)| {
                        c.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::NonNumericCell {
                                column: spec.name.clone(),
                                row: row + 1,
                                value: c.clone(),
                            })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let mean = v.iter().sum::<f64>() / n as f64;
                let sd = if n > 1 {
                    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0))
                        .sqrt()
                } else {
                    0.0
                };
                if spec.kind == ColumnKind::Standardized {
                    let scale = if sd > 0.0 { sd } else { 1.0 };
                    v.iter_mut().for_each(|x| *x = (*x - mean) / scale);
                }
                names.push(spec.name.clone());
                cols.push(v);
                summary.push(ColumnSummary {
                    name: spec.name.clone(),
                    kind: spec.kind,
                    encoded_as: vec![spec.name.clone()],
                    mean: Some(mean),
                    sd: Some(sd),
                    levels: None,
                });
            }
            ColumnKind::Dummy => {
                let levels: Vec<String> = cells
                    .iter()
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let encoded: Vec<String> = if levels.len() == 2 {
                    vec![spec.name.clone()]
                } else {
                    levels[1..]
                        .iter()
                        .map(|l| format!("{}={}", spec.name, l))
                        .collect()
                };
                for (lvl, out) in levels.iter().skip(1).zip(&encoded) {
                    names.push(out.clone());
                    cols.push(
                        cells
                            .iter()
                            .map(|c| f64::from(u8::from(c == lvl)))
                            .collect(),
                    );
                }
                summary.push(ColumnSummary {
                    name: spec.name.clone(),
                    kind: spec.kind,
                    encoded_as: encoded,
                    mean: None,
                    sd: None,
                    levels: Some(levels),
                });
            }
        }
    }
    let data = DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]);
    Ok(Dataset {
        names,
        data,
        summary,
    })
}

/// Writes a header and rows of preformatted cells.
pub fn write_csv_rows(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Everything needed to rerun a command bit for bit. No timestamps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<DataManifest>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataManifest {
    pub path: String,
    pub rows: usize,
    pub columns: Vec<ColumnSummary>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: BTreeMap<String, String>) -> Self {
        Self {
            command: command.to_string(),
            version: crate::VERSION.to_string(),
            seed,
            config,
            outputs: Vec::new(),
            data: None,
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path.as_ref(), text)?;
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment. Keys outside `allowed`
/// and repeated keys are rejected.
pub fn parse_config(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !allowed.contains(&k) {
            return Err(Error::InvalidConfig(format!(
                "line {}: unknown key `{k}` (allowed: {})",
                lineno + 1,
                allowed.join(", ")
            )));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(Error::InvalidConfig(format!(
                "line {}: duplicate key `{k}`",
                lineno + 1
            )));
        }
    }
    Ok(out)
}

pub fn load_config(path: impl AsRef<Path>, allowed: &[&str]) -> Result<BTreeMap<String, String>> {
    parse_config(&fs::read_to_string(path.as_ref())?, allowed)
}
