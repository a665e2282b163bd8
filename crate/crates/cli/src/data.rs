//! Delimited numeric tables with a header row.

use std::collections::BTreeMap;
use std::path::Path;

use dispmod::model::Dataset;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") | Some("tab") => b'\t',
        _ => b',',
    }
}

fn parse_cell(raw: &str, line: usize, column: &str) -> Result<f64, CliError> {
    let s = raw.trim();
    let err = |why: &str| CliError::Data(format!("line {line}, column '{column}': {why} ('{s}')"));
    if s.is_empty() {
        return Err(err("missing value"));
    }
    if s.contains(',') {
        return Err(err("decimal comma; use a decimal point"));
    }
    let v: f64 = s.parse().map_err(|_| err("not a number"))?;
    if !v.is_finite() {
        return Err(err("missing or non-finite value"));
    }
    Ok(v)
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let file = std::fs::File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
        Table::from_reader(file, delimiter_for(path))
    }

    pub fn from_reader<R: std::io::Read>(reader: R, delimiter: u8) -> Result<Self, CliError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| CliError::Data(format!("cannot read header row: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.is_empty() || headers.iter().any(String::is_empty) {
            return Err(CliError::Data("header row has an empty column name".into()));
        }
        if let Some(dup) = headers.iter().enumerate().find(|(i, h)| headers[..*i].contains(h)) {
            return Err(CliError::Data(format!("duplicate column '{}'", dup.1)));
        }
        let mut columns = vec![Vec::new(); headers.len()];
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
            if rec.len() != headers.len() {
                return Err(CliError::Data(format!(
                    "line {line}: {} fields, header has {}",
                    rec.len(),
                    headers.len()
                )));
            }
            for (j, cell) in rec.iter().enumerate() {
                columns[j].push(parse_cell(cell, line, &headers[j])?);
            }
        }
        if columns[0].is_empty() {
            return Err(CliError::Data("no data rows".into()));
        }
        Ok(Table { headers, columns })
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers.iter().position(|h| h == name).map(|j| self.columns[j].as_slice())
    }

    pub fn n(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Covariate bindings `identifier -> column`: the explicit map, or every
/// non-response column under its own name.
pub fn bindings(
    table: &Table,
    response: &str,
    explicit: Option<&BTreeMap<String, String>>,
) -> Result<Vec<(String, String)>, CliError> {
    match explicit {
        Some(map) => map
            .iter()
            .map(|(ident, col)| {
                if table.column(col).is_none() {
                    Err(CliError::Config(format!(
                        "binding for '{ident}' names column '{col}', which is not in the data header"
                    )))
                } else {
                    Ok((ident.clone(), col.clone()))
                }
            })
            .collect(),
        None => Ok(table
            .headers
            .iter()
            .filter(|h| *h != response)
            .map(|h| (h.clone(), h.clone()))
            .collect()),
    }
}

/// Dataset with covariates named by their predictor identifiers.
pub fn dataset(table: &Table, response: &str, bound: &[(String, String)]) -> Result<Dataset, CliError> {
    let y = table
        .column(response)
        .ok_or_else(|| CliError::Config(format!("response column '{response}' is not in the data header")))?
        .to_vec();
    let cols = bound
        .iter()
        .map(|(ident, col)| (ident.clone(), table.column(col).expect("binding checked").to_vec()))
        .collect();
    Ok(Dataset::from_columns(y, cols)?)
}

/// Writes a table with a header row (comma separated, shortest round-trip
/// float formatting).
pub fn write_table(path: &Path, headers: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter_for(path))
        .from_path(path)
        .map_err(|e| CliError::Io(e.to_string()))?;
    w.write_record(headers).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:?}"))).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
