//! Column-typed tables and CSV ingestion.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt::f64_17;
use crate::schema::{Feature, FeatureKind, Schema};

/// A rectangular sample matrix, row-major. Categorical cells store the
/// category index.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    schema: Schema,
    n_rows: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(schema: Schema, values: Vec<f64>) -> Result<Self> {
        let n_cols = schema.len();
        if values.len() % n_cols != 0 {
            return Err(Error::Data(format!(
                "{} values do not fill rows of {n_cols} columns",
                values.len()
            )));
        }
        let n_rows = values.len() / n_cols;
        for (i, &v) in values.iter().enumerate() {
            schema
                .check_value(i % n_cols, v)
                .map_err(|e| Error::Data(format!("row {}: {e}", i / n_cols)))?;
        }
        Ok(Dataset { schema, n_rows, values })
    }

    pub fn from_rows(schema: Schema, rows: &[Vec<f64>]) -> Result<Self> {
        let n = schema.len();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(Error::Data(format!("row {i} has the wrong length")));
        }
        Self::new(schema, rows.concat())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.n_cols();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    columns: Vec<Feature>,
}

pub fn read_schema(path: &Path) -> Result<Schema> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: SchemaDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: line {}: {e}", path.display(), e.line())))?;
    Schema::new(doc.columns)
}

pub fn write_schema(schema: &Schema, path: &Path) -> Result<()> {
    let doc = SchemaDoc {
        columns: schema.features().to_vec(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("schema serialises");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Loads a headed CSV file. With `schema_path` the column kinds are taken
/// from the sidecar; otherwise a column is real iff every cell parses as a
/// finite decimal number, and categorical (categories in order of first
/// appearance) otherwise.
pub fn load_csv(path: &Path, schema_path: Option<&Path>) -> Result<Dataset> {
    let declared = schema_path.map(read_schema).transpose()?;
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, declared, &path.display().to_string())
}

/// Loads a headed CSV file against a known schema, such as the one stored
/// in a trained model.
pub fn load_csv_with_schema(path: &Path, schema: Schema) -> Result<Dataset> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, Some(schema), &path.display().to_string())
}

pub(crate) fn parse_csv(reader: impl std::io::Read, declared: Option<Schema>, origin: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Data(format!("{origin}: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(Error::Data(format!("{origin}: missing header row")));
    }
    let n = header.len();

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Data(format!("{origin}: line {line}: {e}")))?;
        if rec.len() != n {
            return Err(Error::Data(format!(
                "{origin}: line {line}: {} cells, header has {n} (ragged row)",
                rec.len()
            )));
        }
        let row: Vec<String> = rec.iter().map(|c| c.trim().to_string()).collect();
        if let Some(col) = row.iter().position(|c| c.is_empty()) {
            return Err(Error::Data(format!(
                "{origin}: line {line}, column {} ({}): missing value",
                col + 1,
                header[col]
            )));
        }
        cells.push(row);
    }

    let schema = match declared {
        Some(s) => {
            if s.len() != n {
                return Err(Error::Data(format!(
                    "{origin}: schema declares {} columns, file has {n}",
                    s.len()
                )));
            }
            for (i, (f, h)) in s.features().iter().zip(&header).enumerate() {
                if &f.name != h {
                    return Err(Error::Data(format!(
                        "{origin}: column {} is named {h:?} but the schema says {:?}",
                        i + 1,
                        f.name
                    )));
                }
            }
            s
        }
        None => infer_schema(&header, &cells)?,
    };

    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .features()
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Real => None,
            FeatureKind::Categorical { categories } => {
                Some(categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect())
            }
        })
        .collect();

    let mut values = Vec::with_capacity(cells.len() * n);
    for (i, row) in cells.iter().enumerate() {
        let line = i + 2;
        for (j, cell) in row.iter().enumerate() {
            let v = match &lookups[j] {
                None => parse_decimal(cell).ok_or_else(|| {
                    Error::Data(format!(
                        "{origin}: line {line}, column {} ({}): {cell:?} is not a number",
                        j + 1,
                        header[j]
                    ))
                })?,
                Some(map) => *map.get(cell.as_str()).ok_or_else(|| {
                    Error::Data(format!(
                        "{origin}: line {line}, column {} ({}): unknown category {cell:?}",
                        j + 1,
                        header[j]
                    ))
                })? as f64,
            };
            values.push(v);
        }
    }
    Dataset::new(schema, values)
}

fn parse_decimal(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn infer_schema(header: &[String], cells: &[Vec<String>]) -> Result<Schema> {
    let features = header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            if cells.iter().all(|r| parse_decimal(&r[j]).is_some()) {
                return Feature::real(name.clone());
            }
            let mut categories: Vec<String> = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for r in cells {
                if seen.insert(r[j].as_str()) {
                    categories.push(r[j].clone());
                }
            }
            Feature::categorical(name.clone(), categories)
        })
        .collect();
    Schema::new(features)
}

/// Writes a headed CSV; reals with 17 significant digits, categoricals by
/// label.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(dataset)).map_err(|e| Error::io(path, e))
}

pub fn to_csv_string(dataset: &Dataset) -> String {
    let mut wtr = csv::WriterBuilder::new().from_writer(Vec::new());
    let schema = dataset.schema();
    wtr.write_record(schema.features().iter().map(|f| f.name.as_str()))
        .expect("in-memory write");
    for row in dataset.rows() {
        let rec: Vec<String> = row
            .iter()
            .zip(schema.features())
            .map(|(&v, f)| match &f.kind {
                FeatureKind::Real => f64_17(v),
                FeatureKind::Categorical { categories } => categories[v as usize].clone(),
            })
            .collect();
        wtr.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(wtr.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}
