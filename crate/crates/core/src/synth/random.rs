//! Seeded random schemas, payloads and actions for property checks and
//! benchmarks. Everything here is a pure function of the RNG state.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::json;

use crate::actions::{Action, ActionKind, State};
use crate::ingest::{Database, TableData};
use crate::schema::{resolve_links, ColumnDef, DataType, DatasetSchema, DummyPolicy, LinkTarget, TableDef, TableFormat};
use crate::value::Value;

const FORMATS: [TableFormat; 3] = [TableFormat::Parquet, TableFormat::Csv, TableFormat::Numpy];

/// Descriptions that need quoting or escaping in YAML.
const AWKWARD: [&str; 8] = [
    "plain words",
    "colon: inside",
    "# not a comment",
    "quote ' and \" both",
    "yes",
    "  leading space",
    "multi\nline",
    "1e5",
];

fn table_name(i: usize) -> String {
    format!("T{i}")
}

/// A random schema over every dtype: declared FK links to earlier tables,
/// links to dummies, descriptions, time columns and all payload formats.
/// The dummy set is resolved, so the result is what a parser would build.
pub fn random_schema(rng: &mut impl Rng) -> DatasetSchema {
    let mut schema = DatasetSchema::new(format!("rand_{}", rng.gen_range(0..1000)));
    let n = rng.gen_range(1..=5);
    for i in 0..n {
        let name = table_name(i);
        let format = *FORMATS.choose(rng).expect("non-empty");
        let mut t = TableDef::new(&name, format!("data/{}.{}", name.to_lowercase(), format.extension()), format);
        if rng.gen_bool(0.7) {
            t.columns.push(ColumnDef::new(format!("{name}ID"), DataType::PrimaryKey));
        }
        for j in 0..rng.gen_range(0..6) {
            let dtype = *DataType::ALL[1..].choose(rng).expect("non-empty");
            let mut c = ColumnDef::new(format!("c{j}"), dtype);
            if dtype == DataType::ForeignKey {
                let keyed: Vec<&TableDef> = schema.tables.iter().filter(|t| t.primary_key().is_some()).collect();
                c.link_to = Some(match keyed.choose(rng) {
                    Some(target) if rng.gen_bool(0.6) => {
                        LinkTarget::new(&target.name, &target.primary_key().expect("keyed").name)
                    }
                    _ => {
                        let d = format!("D{}", rng.gen_range(0..3));
                        LinkTarget::new(&d, &d)
                    }
                });
            }
            if rng.gen_bool(0.3) {
                c.description = Some(AWKWARD.choose(rng).expect("non-empty").to_string());
            }
            t.columns.push(c);
        }
        let times: Vec<String> = t.columns.iter().filter(|c| c.dtype == DataType::Timestamp).map(|c| c.name.clone()).collect();
        if let Some(tc) = times.choose(rng) {
            if rng.gen_bool(0.5) {
                t.time_column = Some(tc.clone());
            }
        }
        schema.tables.push(t);
    }
    resolve_links(&schema, DummyPolicy::Materialize).expect("links target keys by construction")
}

fn null_or<R: Rng>(rng: &mut R, p_null: f64, v: impl FnOnce(&mut R) -> Value) -> Value {
    if rng.gen_bool(p_null) {
        Value::Null
    } else {
        v(rng)
    }
}

/// A random dataset with payloads. Column names hint at their content:
/// `cat*` small string pools, `ref*` integer categories drawn from another
/// table's key, `num*` floats, `txt*` near-unique strings, `set*` lists,
/// `fk*` declared links and `dim*` links to a dummy table.
pub fn random_state(rng: &mut impl Rng) -> State {
    let mut schema = DatasetSchema::new("rand");
    let mut data = Database::new();
    let n = rng.gen_range(2..=4);
    let mut keys: Vec<(String, String, Vec<i64>)> = Vec::new();
    for i in 0..n {
        let name = table_name(i);
        let rows = rng.gen_range(4..=16);
        let mut t = TableDef::new(&name, format!("data/{name}.pqt"), TableFormat::Parquet);
        let mut cols: IndexMap<String, Vec<Value>> = IndexMap::new();
        if i == 0 || rng.gen_bool(0.75) {
            let pk = format!("{name}ID");
            let ids: Vec<i64> = (0..rows as i64).map(|r| 100 * i as i64 + r).collect();
            t.columns.push(ColumnDef::new(&pk, DataType::PrimaryKey));
            cols.insert(pk.clone(), ids.iter().copied().map(Value::Int).collect());
            keys.push((name.clone(), pk, ids));
        }
        for j in 0..rng.gen_range(1..=5) {
            let pick = rng.gen_range(0..7);
            let (col, dtype, values): (String, DataType, Vec<Value>) = match pick {
                0 => {
                    let pool = rng.gen_range(1..=4);
                    let v = (0..rows).map(|_| null_or(rng, 0.1, |r| Value::Str(format!("v{}", r.gen_range(0..pool))))).collect();
                    (format!("cat{j}"), DataType::Category, v)
                }
                1 if !keys.is_empty() => {
                    let (_, _, ids) = keys.choose(rng).expect("non-empty").clone();
                    let v = (0..rows).map(|_| Value::Int(*ids.choose(rng).expect("non-empty"))).collect();
                    (format!("ref{j}"), DataType::Category, v)
                }
                2 => {
                    let v = (0..rows).map(|_| null_or(rng, 0.1, |r| Value::Float(r.gen_range(0..10) as f64 / 2.0))).collect();
                    (format!("num{j}"), DataType::Numeric, v)
                }
                3 => {
                    let v = (0..rows).map(|r| Value::Str(format!("text {r} {}", rng.gen_range(0..3)))).collect();
                    (format!("txt{j}"), DataType::Text, v)
                }
                4 => {
                    let v = (0..rows)
                        .map(|_| {
                            let k = rng.gen_range(0..4);
                            let items = (0..k).map(|_| Value::Str(format!("e{}", rng.gen_range(0..5)))).collect();
                            null_or(rng, 0.1, |_| Value::List(items))
                        })
                        .collect();
                    (format!("set{j}"), DataType::MultiCategory, v)
                }
                5 if !keys.is_empty() => {
                    let (tname, pk, ids) = keys.choose(rng).expect("non-empty").clone();
                    let v = (0..rows).map(|_| null_or(rng, 0.15, |r| Value::Int(*ids.choose(r).expect("non-empty")))).collect();
                    t.columns.push(ColumnDef::foreign_key(format!("fk{j}"), LinkTarget::new(tname, pk)));
                    cols.insert(format!("fk{j}"), v);
                    continue;
                }
                _ => {
                    let d = format!("D{}", rng.gen_range(0..2));
                    let v = (0..rows).map(|_| null_or(rng, 0.1, |r| Value::Str(format!("d{}", r.gen_range(0..4))))).collect();
                    t.columns.push(ColumnDef::foreign_key(format!("dim{j}"), LinkTarget::new(&d, &d)));
                    cols.insert(format!("dim{j}"), v);
                    continue;
                }
            };
            t.columns.push(ColumnDef::new(&col, dtype));
            cols.insert(col, values);
        }
        schema.tables.push(t);
        data.insert(TableData::new(&name, cols).expect("equal lengths"));
    }
    let schema = resolve_links(&schema, DummyPolicy::Materialize).expect("links target keys by construction");
    State::new(schema, data)
}

fn columns_of(state: &State, dtype: DataType) -> Vec<(String, String)> {
    state
        .schema
        .tables
        .iter()
        .flat_map(|t| t.columns.iter().filter(move |c| c.dtype == dtype).map(move |c| (t.name.clone(), c.name.clone())))
        .collect()
}

fn act(kind: ActionKind, params: serde_json::Value) -> Action {
    let map = params.as_object().expect("object").clone();
    Action::new(kind, map)
}

/// A random action whose parameters name existing tables and columns of
/// `state`. It may still be rejected (asking for a dummy of a column that
/// is already linked, a key over duplicate values, and so on).
pub fn random_action(state: &State, rng: &mut impl Rng) -> Action {
    let tag = rng.gen_range(0..1000);
    let cats = columns_of(state, DataType::Category);
    let pks = columns_of(state, DataType::PrimaryKey);
    for _ in 0..16 {
        match rng.gen_range(0..6) {
            0 => {
                if let Some((t, c)) = cats.choose(rng) {
                    let existing: Vec<String> = state.schema.derived.iter().map(|d| d.name.clone()).collect();
                    let name = match existing.choose(rng) {
                        Some(d) if rng.gen_bool(0.3) => d.clone(),
                        _ => format!("G{tag}"),
                    };
                    return act(
                        ActionKind::GenerateOrConnectDummyTable,
                        json!({"base_table_name": t, "orig_col_name": c, "new_table_name": name, "new_col_name": name}),
                    );
                }
            }
            1 => {
                let mut ends: Vec<(String, String)> = cats.clone();
                ends.extend(pks.iter().cloned());
                if let (Some(a), Some(b)) = (cats.choose(rng), ends.choose(rng)) {
                    return act(
                        ActionKind::ConnectTwoColumns,
                        json!({"table_1_name": a.0, "table_1_col_name": a.1, "table_2_name": b.0, "table_2_col_name": b.1}),
                    );
                }
            }
            2 => {
                let sets = columns_of(state, DataType::MultiCategory);
                if let Some((t, c)) = sets.choose(rng) {
                    let Some(pk) = state.schema.table(t).and_then(|d| d.primary_key()) else { continue };
                    let dtype = if rng.gen_bool(0.5) { "foreign_key" } else { "category" };
                    return act(
                        ActionKind::ExplodeMultiCategoryColumn,
                        json!({"original_table": t, "multi_cat_col": c, "primary_key_column": pk.name,
                               "new_table_name": format!("E{tag}"), "new_col_name": format!("X{tag}"), "dtype": dtype}),
                    );
                }
            }
            3 => {
                let Some(t) = state.schema.tables.choose(rng) else { continue };
                let plain: Vec<&str> = t
                    .columns
                    .iter()
                    .filter(|c| matches!(c.dtype, DataType::Category | DataType::Numeric | DataType::Text))
                    .map(|c| c.name.as_str())
                    .collect();
                if plain.is_empty() {
                    continue;
                }
                let k = rng.gen_range(1..=plain.len().min(2));
                let cols: Vec<&str> = plain.choose_multiple(rng, k).copied().collect();
                return act(
                    ActionKind::GenerateNonDummyTable,
                    json!({"base_table_name": t.name, "cols": cols, "new_table_name": format!("N{tag}")}),
                );
            }
            4 => {
                if let Some((t, c)) = pks.choose(rng) {
                    return act(ActionKind::RemovePrimaryKey, json!({"base_table_name": t, "col_name": c}));
                }
            }
            _ => {
                let keyless: Vec<&TableDef> = state.schema.tables.iter().filter(|t| t.primary_key().is_none()).collect();
                let Some(t) = keyless.choose(rng) else { continue };
                // A fresh surrogate name, sometimes a taken one.
                let c = match t.columns.choose(rng) {
                    Some(c) if rng.gen_bool(0.2) => c.name.clone(),
                    _ => format!("K{tag}"),
                };
                return act(ActionKind::AddPrimaryKey, json!({"base_table_name": t.name, "col_name": c}));
            }
        }
    }
    Action::none()
}

/// Two keyed tables `A` and `B` plus a key-less `Link` table with one FK to
/// each (nullable) and a weight column.
pub fn edge_fixture(rng: &mut impl Rng) -> State {
    let (na, nb, nl) = (rng.gen_range(1..=12), rng.gen_range(1..=12), rng.gen_range(0..=40));
    let mut schema = DatasetSchema::new("edge_fixture");
    schema.tables.push(
        TableDef::new("A", "data/A.pqt", TableFormat::Parquet)
            .with_column(ColumnDef::new("AID", DataType::PrimaryKey))
            .with_column(ColumnDef::new("label", DataType::Category)),
    );
    schema.tables.push(TableDef::new("B", "data/B.pqt", TableFormat::Parquet).with_column(ColumnDef::new("BID", DataType::PrimaryKey)));
    schema.tables.push(
        TableDef::new("Link", "data/Link.pqt", TableFormat::Parquet)
            .with_column(ColumnDef::foreign_key("a", LinkTarget::new("A", "AID")))
            .with_column(ColumnDef::foreign_key("b", LinkTarget::new("B", "BID")))
            .with_column(ColumnDef::new("w", DataType::Numeric)),
    );
    let p = rng.gen_range(0.0..0.4);
    let a: Vec<Value> = (0..nl).map(|_| null_or(rng, p, |r| Value::Int(r.gen_range(0..na)))).collect();
    let b: Vec<Value> = (0..nl).map(|_| null_or(rng, p, |r| Value::Int(1000 + r.gen_range(0..nb)))).collect();
    let data = Database::new()
        .with_table(TableData::from_columns(
            "A",
            [("AID", (0..na).map(Value::Int).collect()), ("label", (0..na).map(|i| Value::Int(i % 2)).collect())],
        ))
        .with_table(TableData::from_columns("B", [("BID", (0..nb).map(|i| Value::Int(1000 + i)).collect::<Vec<_>>())]))
        .with_table(TableData::from_columns(
            "Link",
            [("a", a), ("b", b), ("w", (0..nl).map(|i| Value::Float(i as f64)).collect())],
        ));
    State::new(schema, data)
}
