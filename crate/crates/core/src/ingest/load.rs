use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use indexmap::IndexMap;
use tracing::warn;

use super::columnar;
use super::{Database, TableData};
use crate::error::IngestError;
use crate::schema::{DataType, DatasetSchema, TableDef, TableFormat};
use crate::value::Value;

/// A loaded payload plus non-fatal observations (e.g. undeclared columns).
#[derive(Debug, Clone)]
pub struct LoadedTable {
    pub data: TableData,
    pub warnings: Vec<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

/// Resolves `def.source` against `data_root` and loads every declared
/// column.
pub fn load_table(def: &TableDef, data_root: &Path) -> Result<LoadedTable, IngestError> {
    let path = data_root.join(&def.source);
    let (mut raw, order) = match def.format {
        TableFormat::Csv => read_csv(&path, def)?,
        TableFormat::Parquet => columnar::read_parquet(&path, def)?,
        TableFormat::Numpy => columnar::read_npz(&path, def)?,
    };
    let mut warnings = Vec::new();
    for name in &order {
        if def.column(name).is_none() {
            let msg = format!("table '{}': column '{}' in {} is not declared; skipped", def.name, name, path.display());
            warn!("{msg}");
            warnings.push(msg);
        }
    }
    let mut columns = IndexMap::new();
    for c in &def.columns {
        let values = raw.swap_remove(&c.name).ok_or_else(|| IngestError::MissingColumn {
            table: def.name.clone(),
            column: c.name.clone(),
            path: path.clone(),
        })?;
        columns.insert(c.name.clone(), values);
    }
    Ok(LoadedTable { data: TableData::new(&def.name, columns)?, warnings })
}

/// Loads every declared table of `schema`.
pub fn load_database(schema: &DatasetSchema, data_root: &Path) -> Result<(Database, Vec<String>), IngestError> {
    let mut db = Database::new();
    let mut warnings = Vec::new();
    for t in &schema.tables {
        let loaded = load_table(t, data_root)?;
        warnings.extend(loaded.warnings);
        db.insert(loaded.data);
    }
    Ok((db, warnings))
}

type RawColumns = (IndexMap<String, Vec<Value>>, Vec<String>);

fn read_csv(path: &PathBuf, def: &TableDef) -> Result<RawColumns, IngestError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let fmt_err = |e: csv::Error| IngestError::Format { table: def.name.clone(), message: e.to_string() };
    let headers: Vec<String> = reader.headers().map_err(fmt_err)?.iter().map(str::to_string).collect();
    let dtypes: Vec<Option<DataType>> = headers.iter().map(|h| def.column(h).map(|c| c.dtype)).collect();
    let mut cols: Vec<Vec<Value>> = vec![Vec::new(); headers.len()];
    for record in reader.records() {
        let record = record.map_err(fmt_err)?;
        for (i, cell) in record.iter().enumerate() {
            let v = match dtypes[i] {
                Some(d) => parse_cell(cell, d),
                None => Value::Null,
            };
            cols[i].push(v);
        }
    }
    let map = headers.iter().cloned().zip(cols).collect();
    Ok((map, headers))
}

fn parse_json_array(text: &str) -> Option<Vec<serde_json::Value>> {
    let t = text.trim();
    if !(t.starts_with('[') && t.ends_with(']')) {
        return None;
    }
    serde_json::from_str(t)
        .ok()
        .or_else(|| serde_json::from_str(&t.replace('\'', "\"")).ok())
}

fn json_scalar(v: &serde_json::Value) -> Value {
    match v {
        serde_json::Value::Null => Value::Null,
        serde_json::Value::Bool(b) => Value::Int(*b as i64),
        serde_json::Value::Number(n) => n.as_i64().map(Value::Int).unwrap_or_else(|| Value::Float(n.as_f64().unwrap_or(f64::NAN))),
        serde_json::Value::String(s) => Value::Str(s.clone()),
        other => Value::Str(other.to_string()),
    }
}

fn parse_number(text: &str) -> Option<Value> {
    if let Ok(i) = text.parse::<i64>() {
        return Some(Value::Int(i));
    }
    match text.parse::<f64>() {
        Ok(f) => Some(Value::Float(f)),
        Err(_) => None,
    }
}

/// Seconds since the Unix epoch for full date(time) strings.
pub(crate) fn parse_timestamp(text: &str) -> Option<i64> {
    let t = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    for fmt in ["%Y-%m-%d", "%Y/%m/%d"] {
        if let Ok(d) = NaiveDate::parse_from_str(t, fmt) {
            return Some(d.and_hms_opt(0, 0, 0)?.and_utc().timestamp());
        }
    }
    None
}

/// Parses one text cell according to its declared dtype.
pub fn parse_cell(text: &str, dtype: DataType) -> Value {
    if text.is_empty() {
        return Value::Null;
    }
    match dtype {
        DataType::Text => Value::Str(text.to_string()),
        DataType::MultiCategory => match parse_json_array(text) {
            Some(items) => Value::List(items.iter().map(json_scalar).collect()),
            None => Value::List(vec![Value::Str(text.to_string())]),
        },
        DataType::Embedding => match parse_json_array(text) {
            Some(items) => Value::Vector(items.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect()),
            None => Value::Str(text.to_string()),
        },
        DataType::Numeric => parse_number(text).unwrap_or_else(|| Value::Str(text.to_string())),
        DataType::Timestamp => parse_timestamp(text)
            .map(Value::Int)
            .or_else(|| parse_number(text))
            .unwrap_or_else(|| Value::Str(text.to_string())),
        DataType::PrimaryKey | DataType::ForeignKey | DataType::Category => match text.parse::<i64>() {
            Ok(i) => Value::Int(i),
            Err(_) => Value::Str(text.to_string()),
        },
    }
}

/// Parses a cell without a declared dtype, as needed for type inference.
/// Arrays of numbers containing a non-integer are embedding vectors; other
/// arrays are multi-category lists.
pub fn parse_cell_untyped(text: &str) -> Value {
    if text.is_empty() {
        return Value::Null;
    }
    if let Some(v) = parse_number(text) {
        return v;
    }
    if let Some(items) = parse_json_array(text) {
        let numeric = !items.is_empty() && items.iter().all(|x| x.is_number());
        let fractional = items.iter().any(|x| x.is_f64());
        if numeric && fractional {
            return Value::Vector(items.iter().filter_map(|x| x.as_f64()).collect());
        }
        return Value::List(items.iter().map(json_scalar).collect());
    }
    Value::Str(text.to_string())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Float(f) if f.is_nan() => String::new(),
        Value::List(items) => {
            let json: Vec<serde_json::Value> = items
                .iter()
                .map(|x| match x {
                    Value::Int(i) => serde_json::json!(i),
                    Value::Float(f) => serde_json::json!(f),
                    Value::Null => serde_json::Value::Null,
                    other => serde_json::json!(other.to_string()),
                })
                .collect();
            serde_json::to_string(&json).expect("json")
        }
        Value::Vector(xs) => serde_json::to_string(xs).expect("json"),
        other => other.to_string(),
    }
}

/// Writes a payload as RFC-4180 CSV with a header row; list and vector cells
/// are JSON arrays.
pub fn write_table_csv(table: &TableData, path: &Path) -> Result<(), IngestError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    let fmt_err = |e: csv::Error| IngestError::Format { table: table.table_name.clone(), message: e.to_string() };
    w.write_record(table.columns.keys()).map_err(fmt_err)?;
    for row in 0..table.row_count {
        w.write_record(table.columns.values().map(|c| csv_cell(&c[row]))).map_err(fmt_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Writes every table with a payload to `root/<source>` in its declared
/// format, dummy codes decoded. Returns the written paths.
pub fn write_database(schema: &DatasetSchema, data: &Database, root: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let decoded = data.decoded(schema);
    let mut written = Vec::new();
    for t in &schema.tables {
        let Some(table) = decoded.table(&t.name) else { continue };
        let path = root.join(&t.source);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        match t.format {
            TableFormat::Csv => write_table_csv(table, &path)?,
            TableFormat::Parquet => columnar::write_parquet(&path, &t.name, &table.columns)?,
            TableFormat::Numpy => columnar::write_npz(&path, &t.name, &table.columns)?,
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnDef;

    fn def(format: TableFormat, source: &str) -> TableDef {
        TableDef::new("T", source, format)
            .with_column(ColumnDef::new("id", DataType::PrimaryKey))
            .with_column(ColumnDef::new("tag", DataType::MultiCategory))
    }

    #[test]
    fn csv_with_three_rows() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "id,tag,extra\n0,\"[\"\"a\"\",\"\"b\"\"]\",x\n1,[],y\n2,,z\n").unwrap();
        let loaded = load_table(&def(TableFormat::Csv, "t.csv"), dir.path()).unwrap();
        assert_eq!(loaded.data.row_count, 3);
        assert_eq!(loaded.warnings.len(), 1);
        assert_eq!(
            loaded.data.column("tag").unwrap(),
            &[Value::List(vec!["a".into(), "b".into()]), Value::List(vec![]), Value::Null]
        );
    }

    #[test]
    fn missing_declared_column_names_table_and_column() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("h.csv"), "id,tag\n0,[]\n").unwrap();
        let d = def(TableFormat::Csv, "h.csv").with_column(ColumnDef::new("repeater", DataType::Category));
        let err = load_table(&d, dir.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("'T'") && msg.contains("'repeater'"), "{msg}");
    }

    #[test]
    fn missing_file() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_table(&def(TableFormat::Csv, "nope.csv"), dir.path()), Err(IngestError::Io { .. })));
    }

    #[test]
    fn ragged_csv_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "id,tag\n0,[]\n1\n").unwrap();
        assert!(load_table(&def(TableFormat::Csv, "t.csv"), dir.path()).is_err());
    }

    #[test]
    fn csv_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = TableData::from_columns(
            "T",
            [
                ("id", vec![Value::Int(0), Value::Int(1)]),
                ("tag", vec![Value::List(vec!["a, b".into()]), Value::Null]),
            ],
        );
        write_table_csv(&t, &dir.path().join("t.csv")).unwrap();
        let back = load_table(&def(TableFormat::Csv, "t.csv"), dir.path()).unwrap();
        assert_eq!(back.data, t);
    }

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cell("12", DataType::Category), Value::Int(12));
        assert_eq!(parse_cell("12", DataType::Text), Value::Str("12".into()));
        assert_eq!(parse_cell("1.5", DataType::Numeric), Value::Float(1.5));
        assert_eq!(parse_cell("2020-01-02", DataType::Timestamp), Value::Int(1577923200));
        assert_eq!(parse_cell("[0.5, 1]", DataType::Embedding), Value::Vector(vec![0.5, 1.0]));
        assert_eq!(parse_cell_untyped("[0.5, 1.25]"), Value::Vector(vec![0.5, 1.25]));
        assert_eq!(parse_cell_untyped("[1, 2]"), Value::List(vec![Value::Int(1), Value::Int(2)]));
        assert_eq!(parse_cell_untyped("['x']"), Value::List(vec!["x".into()]));
    }
}
