//! Parquet and npz payload codecs.

use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use arrow_array::builder::{FixedSizeListBuilder, Float64Builder, Int64Builder, ListBuilder, StringBuilder};
use arrow_array::cast::AsArray;
use arrow_array::types::{
    Date32Type, Float32Type, Float64Type, Int16Type, Int32Type, Int64Type, Int8Type, TimestampMicrosecondType,
    TimestampMillisecondType, TimestampNanosecondType, TimestampSecondType, UInt16Type, UInt32Type, UInt64Type,
    UInt8Type,
};
use arrow_array::{Array, ArrayRef, Float64Array, Int64Array, RecordBatch, StringArray};
use arrow_schema::{DataType as ArrowType, Field, Schema, TimeUnit};
use indexmap::IndexMap;
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use npyz::WriterBuilder;
use parquet::arrow::ArrowWriter;

use crate::error::IngestError;
use crate::schema::{DataType, TableDef};
use crate::value::Value;

type RawColumns = (IndexMap<String, Vec<Value>>, Vec<String>);

fn format_err(table: &str, e: impl std::fmt::Display) -> IngestError {
    IngestError::Format { table: table.to_string(), message: e.to_string() }
}

fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io { path: path.to_path_buf(), source }
}

macro_rules! prim_values {
    ($arr:expr, $t:ty, $conv:expr) => {{
        let a = $arr.as_primitive::<$t>();
        (0..a.len()).map(|i| if a.is_null(i) { Value::Null } else { $conv(a.value(i)) }).collect::<Vec<Value>>()
    }};
}

/// Converts one arrow column into cell values. `dtype` decides whether list
/// columns become multi-category lists or embedding vectors.
pub fn array_to_values(array: &dyn Array, dtype: Option<DataType>) -> Result<Vec<Value>, String> {
    let int = |x: i64| Value::Int(x);
    Ok(match array.data_type() {
        ArrowType::Int8 => prim_values!(array, Int8Type, |x: i8| int(x as i64)),
        ArrowType::Int16 => prim_values!(array, Int16Type, |x: i16| int(x as i64)),
        ArrowType::Int32 => prim_values!(array, Int32Type, |x: i32| int(x as i64)),
        ArrowType::Int64 => prim_values!(array, Int64Type, int),
        ArrowType::UInt8 => prim_values!(array, UInt8Type, |x: u8| int(x as i64)),
        ArrowType::UInt16 => prim_values!(array, UInt16Type, |x: u16| int(x as i64)),
        ArrowType::UInt32 => prim_values!(array, UInt32Type, |x: u32| int(x as i64)),
        ArrowType::UInt64 => prim_values!(array, UInt64Type, |x: u64| int(x as i64)),
        ArrowType::Float32 => prim_values!(array, Float32Type, |x: f32| Value::Float(x as f64)),
        ArrowType::Float64 => prim_values!(array, Float64Type, Value::Float),
        ArrowType::Boolean => {
            let a = array.as_boolean();
            (0..a.len()).map(|i| if a.is_null(i) { Value::Null } else { Value::Int(a.value(i) as i64) }).collect()
        }
        ArrowType::Date32 => prim_values!(array, Date32Type, |d: i32| int(d as i64 * 86_400)),
        ArrowType::Timestamp(unit, _) => match unit {
            TimeUnit::Second => prim_values!(array, TimestampSecondType, int),
            TimeUnit::Millisecond => prim_values!(array, TimestampMillisecondType, |x: i64| int(x.div_euclid(1_000))),
            TimeUnit::Microsecond => prim_values!(array, TimestampMicrosecondType, |x: i64| int(x.div_euclid(1_000_000))),
            TimeUnit::Nanosecond => prim_values!(array, TimestampNanosecondType, |x: i64| int(x.div_euclid(1_000_000_000))),
        },
        ArrowType::Utf8 => {
            let a = array.as_string::<i32>();
            (0..a.len()).map(|i| if a.is_null(i) { Value::Null } else { Value::Str(a.value(i).to_string()) }).collect()
        }
        ArrowType::LargeUtf8 => {
            let a = array.as_string::<i64>();
            (0..a.len()).map(|i| if a.is_null(i) { Value::Null } else { Value::Str(a.value(i).to_string()) }).collect()
        }
        ArrowType::List(_) => {
            let a = array.as_list::<i32>();
            let mut out = Vec::with_capacity(a.len());
            for i in 0..a.len() {
                out.push(if a.is_null(i) { Value::Null } else { nested(&*a.value(i), dtype)? });
            }
            out
        }
        ArrowType::LargeList(_) => {
            let a = array.as_list::<i64>();
            let mut out = Vec::with_capacity(a.len());
            for i in 0..a.len() {
                out.push(if a.is_null(i) { Value::Null } else { nested(&*a.value(i), dtype)? });
            }
            out
        }
        ArrowType::FixedSizeList(_, _) => {
            let a = array.as_fixed_size_list();
            let mut out = Vec::with_capacity(a.len());
            for i in 0..a.len() {
                let inner = a.value(i);
                out.push(if a.is_null(i) {
                    Value::Null
                } else if dtype == Some(DataType::MultiCategory) {
                    nested(&*inner, dtype)?
                } else {
                    vector(&*inner)?
                });
            }
            out
        }
        other => return Err(format!("unsupported arrow type {other}")),
    })
}

fn nested(inner: &dyn Array, dtype: Option<DataType>) -> Result<Value, String> {
    if dtype == Some(DataType::Embedding) {
        return vector(inner);
    }
    Ok(Value::List(array_to_values(inner, None)?))
}

fn vector(inner: &dyn Array) -> Result<Value, String> {
    let xs = array_to_values(inner, None)?;
    Ok(Value::Vector(xs.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect()))
}

/// Picks an arrow column type able to hold every cell and builds it.
pub fn values_to_array(values: &[Value]) -> ArrayRef {
    let non_null: Vec<&Value> = values.iter().filter(|v| !matches!(v, Value::Null)).collect();
    let all = |f: fn(&Value) -> bool| non_null.iter().all(|v| f(v));
    if all(|v| matches!(v, Value::Int(_))) {
        return Arc::new(values.iter().map(|v| v.as_i64()).collect::<Int64Array>());
    }
    if all(|v| matches!(v, Value::Int(_) | Value::Float(_))) {
        return Arc::new(values.iter().map(|v| v.as_f64()).collect::<Float64Array>());
    }
    if all(|v| matches!(v, Value::Vector(_))) {
        let dim = non_null.iter().map(|v| if let Value::Vector(x) = v { x.len() } else { 0 }).max().unwrap_or(0);
        let uniform = non_null.iter().all(|v| matches!(v, Value::Vector(x) if x.len() == dim));
        if uniform {
            let mut b = FixedSizeListBuilder::new(Float64Builder::new(), dim as i32);
            for v in values {
                match v {
                    Value::Vector(x) => {
                        b.values().append_slice(x);
                        b.append(true);
                    }
                    _ => {
                        for _ in 0..dim {
                            b.values().append_null();
                        }
                        b.append(false);
                    }
                }
            }
            return Arc::new(b.finish());
        }
    }
    if all(|v| matches!(v, Value::List(_) | Value::Vector(_))) {
        let ints = non_null.iter().all(|v| match v {
            Value::List(items) => items.iter().all(|x| matches!(x, Value::Int(_) | Value::Null)),
            _ => false,
        });
        if ints {
            let mut b = ListBuilder::new(Int64Builder::new());
            for v in values {
                match v {
                    Value::List(items) => {
                        for x in items {
                            b.values().append_option(x.as_i64());
                        }
                        b.append(true);
                    }
                    _ => b.append(false),
                }
            }
            return Arc::new(b.finish());
        }
        let mut b = ListBuilder::new(StringBuilder::new());
        for v in values {
            match v {
                Value::List(items) => {
                    for x in items {
                        match x {
                            Value::Null => b.values().append_null(),
                            other => b.values().append_value(other.to_string()),
                        }
                    }
                    b.append(true);
                }
                _ => b.append(false),
            }
        }
        return Arc::new(b.finish());
    }
    Arc::new(
        values
            .iter()
            .map(|v| match v {
                Value::Null => None,
                other => Some(other.to_string()),
            })
            .collect::<StringArray>(),
    )
}

fn batch_of(columns: &IndexMap<String, Vec<Value>>, rows: usize) -> Result<RecordBatch, String> {
    let arrays: Vec<ArrayRef> = columns.values().map(|v| values_to_array(v)).collect();
    let fields: Vec<Field> = columns
        .keys()
        .zip(&arrays)
        .map(|(name, a)| Field::new(name, a.data_type().clone(), true))
        .collect();
    let schema = Arc::new(Schema::new(fields));
    if arrays.is_empty() {
        let opts = arrow_array::RecordBatchOptions::new().with_row_count(Some(rows));
        return RecordBatch::try_new_with_options(schema, arrays, &opts).map_err(|e| e.to_string());
    }
    RecordBatch::try_new(schema, arrays).map_err(|e| e.to_string())
}

/// Writes named columns of equal length as a single-row-group parquet file.
pub fn write_parquet(path: &Path, name: &str, columns: &IndexMap<String, Vec<Value>>) -> Result<(), IngestError> {
    let rows = columns.values().next().map_or(0, Vec::len);
    let batch = batch_of(columns, rows).map_err(|e| format_err(name, e))?;
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = ArrowWriter::try_new(file, batch.schema(), None).map_err(|e| format_err(name, e))?;
    writer.write(&batch).map_err(|e| format_err(name, e))?;
    writer.close().map_err(|e| format_err(name, e))?;
    Ok(())
}

pub(crate) fn read_parquet(path: &Path, def: &TableDef) -> Result<RawColumns, IngestError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = ParquetRecordBatchReaderBuilder::try_new(file)
        .and_then(|b| b.build())
        .map_err(|e| format_err(&def.name, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut out: IndexMap<String, Vec<Value>> = IndexMap::new();
    for batch in reader {
        let batch = batch.map_err(|e| format_err(&def.name, e))?;
        let schema = batch.schema();
        if order.is_empty() {
            order = schema.fields().iter().map(|f| f.name().clone()).collect();
        }
        for (field, column) in schema.fields().iter().zip(batch.columns()) {
            let Some(decl) = def.column(field.name()) else { continue };
            let values = array_to_values(column.as_ref(), Some(decl.dtype))
                .map_err(|e| format_err(&def.name, format!("column '{}': {e}", field.name())))?;
            out.entry(field.name().clone()).or_default().extend(values);
        }
    }
    Ok((out, order))
}

pub(crate) fn read_npz(path: &Path, def: &TableDef) -> Result<RawColumns, IngestError> {
    use npyz::TypeChar;
    let mut archive = npyz::npz::NpzArchive::open(path).map_err(|e| io_err(path, e))?;
    let order: Vec<String> = archive.array_names().map(str::to_string).collect();
    let mut out = IndexMap::new();
    for name in &order {
        if def.column(name).is_none() {
            continue;
        }
        let npy = archive
            .by_name(name)
            .map_err(|e| io_err(path, e))?
            .ok_or_else(|| format_err(&def.name, format!("array '{name}' vanished")))?;
        let shape = npy.shape().to_vec();
        let npyz::DType::Plain(ts) = npy.dtype() else {
            return Err(format_err(&def.name, format!("array '{name}' has a structured dtype")));
        };
        let err = |e: std::io::Error| format_err(&def.name, format!("array '{name}': {e}"));
        let flat: Vec<Value> = match ts.type_char() {
            TypeChar::Int | TypeChar::Uint | TypeChar::Bool | TypeChar::DateTime => {
                npy.into_vec::<i64>().map_err(err)?.into_iter().map(Value::Int).collect()
            }
            TypeChar::Float => npy.into_vec::<f64>().map_err(err)?.into_iter().map(Value::Float).collect(),
            TypeChar::ByteStr | TypeChar::UnicodeStr => {
                npy.into_vec::<String>().map_err(err)?.into_iter().map(Value::Str).collect()
            }
            other => return Err(format_err(&def.name, format!("array '{name}' has unsupported dtype {other:?}"))),
        };
        let values = match shape.len() {
            0 | 1 => flat,
            2 => {
                let width = shape[1] as usize;
                flat.chunks(width.max(1))
                    .map(|row| Value::Vector(row.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)).collect()))
                    .collect()
            }
            n => return Err(format_err(&def.name, format!("array '{name}' has {n} dimensions"))),
        };
        out.insert(name.clone(), values);
    }
    Ok((out, order))
}

/// Writes numeric and string columns as an npz archive; vector columns
/// become 2-D float arrays.
pub fn write_npz(path: &Path, name: &str, columns: &IndexMap<String, Vec<Value>>) -> Result<(), IngestError> {
    let ioe = |e: std::io::Error| io_err(path, e);
    let mut npz = npyz::npz::NpzWriter::create(path).map_err(ioe)?;
    for (col, values) in columns {
        let n = values.len() as u64;
        if values.iter().all(|v| matches!(v, Value::Int(_))) {
            npz.array::<i64>(col, Default::default())
                .map_err(ioe)?
                .default_dtype()
                .shape(&[n])
                .begin_nd()
                .map_err(ioe)?
                .extend(values.iter().map(|v| v.as_i64().unwrap_or_default()))
                .map_err(ioe)?;
        } else if values.iter().all(|v| matches!(v, Value::Int(_) | Value::Float(_) | Value::Null)) {
            npz.array::<f64>(col, Default::default())
                .map_err(ioe)?
                .default_dtype()
                .shape(&[n])
                .begin_nd()
                .map_err(ioe)?
                .extend(values.iter().map(|v| v.as_f64().unwrap_or(f64::NAN)))
                .map_err(ioe)?;
        } else if let Some(Value::Vector(first)) = values.first() {
            let width = first.len();
            if values.iter().any(|v| !matches!(v, Value::Vector(x) if x.len() == width)) {
                return Err(format_err(name, format!("column '{col}' has ragged vectors")));
            }
            npz.array::<f64>(col, Default::default())
                .map_err(ioe)?
                .default_dtype()
                .shape(&[n, width as u64])
                .begin_nd()
                .map_err(ioe)?
                .extend(values.iter().flat_map(|v| match v {
                    Value::Vector(x) => x.clone(),
                    _ => Vec::new(),
                }))
                .map_err(ioe)?;
        } else if values.iter().all(|v| matches!(v, Value::Str(_))) {
            let width = values.iter().map(|v| v.as_str().map_or(0, |s| s.chars().count())).max().unwrap_or(1).max(1);
            let dtype = npyz::DType::Plain(format!("<U{width}").parse().expect("type string"));
            let mut w = npz
                .array::<str>(col, Default::default())
                .map_err(ioe)?
                .dtype(dtype)
                .shape(&[n])
                .begin_nd()
                .map_err(ioe)?;
            for v in values {
                w.push(v.as_str().unwrap_or("")).map_err(ioe)?;
            }
            w.finish().map_err(ioe)?;
        } else {
            return Err(format_err(name, format!("column '{col}' cannot be stored in npz")));
        }
    }
    Ok(())
}
