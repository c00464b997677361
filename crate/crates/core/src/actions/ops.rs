use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexMap;

use super::{ActionError, State};
use crate::ingest::{recode, TableData};
use crate::schema::{is_identifier, ColumnDef, DataType, DummyTableRef, LinkTarget, TableDef, TableFormat};
use crate::value::Value;

fn err(code: &str, message: impl Into<String>) -> ActionError {
    ActionError::new(code, message)
}

/// Where a foreign key points.
#[derive(Debug, Clone, PartialEq)]
enum Target {
    Dummy { name: String, key: String },
    Declared { table: String, pk: String },
}

impl Target {
    fn link(&self) -> LinkTarget {
        match self {
            Target::Dummy { name, key } => LinkTarget::new(name, key),
            Target::Declared { table, pk } => LinkTarget::new(table, pk),
        }
    }
}

fn target_of(state: &State, link: &LinkTarget) -> Target {
    if state.schema.table(&link.table).is_some() {
        Target::Declared { table: link.table.clone(), pk: link.column.clone() }
    } else {
        Target::Dummy { name: link.table.clone(), key: link.column.clone() }
    }
}

fn table_def<'a>(state: &'a State, name: &str) -> Result<&'a TableDef, ActionError> {
    state.schema.table(name).ok_or_else(|| {
        if state.schema.is_dummy(name) {
            err("unknown-table", format!("'{name}' is a dummy table and has no columns to edit"))
        } else {
            err("unknown-table", format!("table '{name}' does not exist"))
        }
    })
}

fn column_def(state: &State, table: &str, column: &str) -> Result<ColumnDef, ActionError> {
    table_def(state, table)?
        .column(column)
        .cloned()
        .ok_or_else(|| err("unknown-column", format!("column '{column}' does not exist in table '{table}'")))
}

fn check_identifier(name: &str) -> Result<(), ActionError> {
    if is_identifier(name) {
        Ok(())
    } else {
        Err(err("invalid-identifier", format!("'{name}' is not a valid identifier")))
    }
}

fn row_count(state: &State, table: &str) -> usize {
    state.data.table(table).map_or(0, |t| t.row_count)
}

/// Cell values with dummy codes decoded.
fn display_values(state: &State, table: &str, column: &str) -> Vec<Value> {
    let raw = state.data.column(table, column).map(<[Value]>::to_vec).unwrap_or_default();
    let link = state.schema.table(table).and_then(|t| t.column(column)).and_then(|c| c.link_to.clone());
    match link.and_then(|l| state.data.key_spaces.get(&l.table)) {
        Some(space) => raw.iter().map(|v| if v.is_nan() { Value::Null } else { space.decode(v) }).collect(),
        None => raw,
    }
}

fn set_values(state: &mut State, table: &str, column: &str, values: Vec<Value>) {
    if let Some(t) = state.data.table_mut(table) {
        t.columns.insert(column.to_string(), values);
    }
}

fn set_link(state: &mut State, table: &str, column: &str, target: &Target) {
    let c = state.schema.table_mut(table).and_then(|t| t.column_mut(column)).expect("column checked");
    c.dtype = DataType::ForeignKey;
    c.link_to = Some(target.link());
}

/// Points `table.column` at `target`, translating its payload. Returns the
/// number of non-null values without a match in a declared target.
fn attach(state: &mut State, table: &str, column: &str, target: &Target) -> usize {
    let values = display_values(state, table, column);
    let mut unmatched = 0;
    let coded = match target {
        Target::Dummy { name, key } => {
            let space = state.data.key_spaces.entry(name.clone()).or_default();
            let index = space.extend(values.iter().filter(|v| !v.is_nan()));
            let mut coded = values;
            recode(&mut coded, &index);
            state.schema.derived.insert(DummyTableRef { name: name.clone(), key_column: key.clone() });
            coded
        }
        Target::Declared { table: t, pk } => {
            let index: HashMap<String, Value> = state
                .data
                .column(t, pk)
                .unwrap_or(&[])
                .iter()
                .filter_map(|v| v.join_key().map(|k| (k, v.clone())))
                .collect();
            values
                .iter()
                .map(|v| match v.join_key() {
                    None => Value::Null,
                    Some(k) => index.get(&k).cloned().unwrap_or_else(|| {
                        unmatched += 1;
                        Value::Null
                    }),
                })
                .collect()
        }
    };
    set_values(state, table, column, coded);
    set_link(state, table, column, target);
    unmatched
}

fn unmatched_warning(warnings: &mut Vec<String>, table: &str, column: &str, target: &Target, unmatched: usize) {
    if unmatched > 0 {
        warnings.push(format!(
            "{unmatched} values of {table}.{column} have no match in {}; they become null links",
            target.link()
        ));
    }
}

/// Creates (or joins) dummy `name` keyed by `key` over the union of the
/// columns' values. A new key space is ordered by sorted value.
fn create_dummy(state: &mut State, name: &str, key: &str, cols: &[(&str, &str)]) -> Result<String, ActionError> {
    check_identifier(name)?;
    check_identifier(key)?;
    if state.schema.table(name).is_some() {
        return Err(err("name-collision", format!("'{name}' is already a declared table")));
    }
    let joined = match state.schema.dummy(name) {
        Some(d) if d.key_column != key => {
            return Err(err("pk-mismatch", format!("dummy table {name} is keyed by {}, not {key}", d.key_column)))
        }
        Some(_) => true,
        None => false,
    };
    if !joined || !state.data.key_spaces.contains_key(name) {
        let distinct: BTreeSet<Value> = cols
            .iter()
            .flat_map(|(t, c)| display_values(state, t, c))
            .filter(|v| !v.is_nan())
            .collect();
        let space = state.data.key_spaces.entry(name.to_string()).or_default();
        space.extend(distinct.iter());
    }
    let target = Target::Dummy { name: name.to_string(), key: key.to_string() };
    for (t, c) in cols {
        attach(state, t, c, &target);
    }
    let size = state.data.key_spaces.get(name).map_or(0, |s| s.len());
    let verb = if joined { "joined" } else { "created" };
    let names: Vec<String> = cols.iter().map(|(t, c)| format!("{t}.{c}")).collect();
    Ok(format!("{verb} dummy table {name}.{key} ({size} keys) for {}", names.join(", ")))
}

pub(super) fn generate_or_connect_dummy_table(
    state: &mut State,
    base: &str,
    orig: &str,
    new_table: &str,
    new_col: &str,
) -> Result<String, ActionError> {
    let col = column_def(state, base, orig)?;
    if let Some(link) = &col.link_to {
        if link.table == new_table && link.column == new_col && state.schema.is_dummy(new_table) {
            return Ok(format!("{base}.{orig} already links to dummy table {new_table}; nothing to do"));
        }
        return Err(err("already-fk", format!("{base}.{orig} is already a foreign key to {link}")));
    }
    if col.dtype != DataType::Category {
        return Err(err(
            "wrong-dtype",
            format!("orig_col_name must be a column with category type; {base}.{orig} is {}", col.dtype),
        ));
    }
    create_dummy(state, new_table, new_col, &[(base, orig)])
}

fn incompatible(t: &str, c: &str, d: DataType) -> ActionError {
    err("incompatible-dtype", format!("{t}.{c} has dtype {d}, which cannot take part in this connection"))
}

pub(super) fn connect_two_columns(
    state: &mut State,
    warnings: &mut Vec<String>,
    (t1, c1): (&str, &str),
    (t2, c2): (&str, &str),
    new_table_name: Option<&str>,
) -> Result<String, ActionError> {
    if t1 == t2 && c1 == c2 {
        return Err(err("self-connection", format!("cannot connect {t1}.{c1} to itself")));
    }
    let d1 = column_def(state, t1, c1)?;
    let d2 = column_def(state, t2, c2)?;
    let fresh_name = new_table_name.unwrap_or(c2).to_string();
    match (d1.dtype, d2.dtype) {
        (DataType::ForeignKey, DataType::ForeignKey) => {
            let target1 = target_of(state, d1.link_to.as_ref().expect("fk has link"));
            let target2 = target_of(state, d2.link_to.as_ref().expect("fk has link"));
            if target1 == target2 {
                return Ok(format!("{t1}.{c1} and {t2}.{c2} already share {}", target1.link()));
            }
            let Target::Dummy { name: absorbed, .. } = &target2 else {
                return Err(err(
                    "incompatible-dtype",
                    format!("{t2}.{c2} points at declared table {}; only dummy targets can be merged", target2.link()),
                ));
            };
            let mut moved = Vec::new();
            for (t, c) in state.schema.inbound_links(absorbed) {
                let n = attach(state, &t, &c, &target1);
                unmatched_warning(warnings, &t, &c, &target1, n);
                moved.push(format!("{t}.{c}"));
            }
            Ok(format!("merged {absorbed} into {}; relinked {}", target1.link(), moved.join(", ")))
        }
        (DataType::ForeignKey, DataType::PrimaryKey) => Err(err(
            "incompatible-dtype",
            format!("{t2}.{c2} is a primary key; {t1}.{c1} already links to {}", d1.link_to.expect("fk has link")),
        )),
        (DataType::ForeignKey, d) | (DataType::Category, d)
            if matches!(d, DataType::Embedding | DataType::MultiCategory | DataType::Timestamp) =>
        {
            Err(incompatible(t2, c2, d))
        }
        (DataType::ForeignKey, _) => {
            let target = target_of(state, d1.link_to.as_ref().expect("fk has link"));
            let n = attach(state, t2, c2, &target);
            unmatched_warning(warnings, t2, c2, &target, n);
            Ok(format!("{t2}.{c2} now links to {} alongside {t1}.{c1}", target.link()))
        }
        (DataType::Category, DataType::Category) => create_dummy(state, &fresh_name, &fresh_name, &[(t1, c1), (t2, c2)]),
        (DataType::Category, DataType::PrimaryKey) => {
            let target = Target::Declared { table: t2.to_string(), pk: c2.to_string() };
            let n = attach(state, t1, c1, &target);
            unmatched_warning(warnings, t1, c1, &target, n);
            Ok(format!("{t1}.{c1} now links to {t2}.{c2}"))
        }
        (DataType::Category, DataType::ForeignKey) => {
            let target = target_of(state, d2.link_to.as_ref().expect("fk has link"));
            let n = attach(state, t1, c1, &target);
            unmatched_warning(warnings, t1, c1, &target, n);
            Ok(format!("{t1}.{c1} now links to {} alongside {t2}.{c2}", target.link()))
        }
        (DataType::Category, _) => {
            let values2 = display_values(state, t2, c2);
            let keys2: Vec<Option<String>> = values2.iter().map(Value::join_key).collect();
            let distinct: HashSet<&String> = keys2.iter().flatten().collect();
            let pk = table_def(state, t2)?.primary_key().map(|c| c.name.clone());
            let functional =
                keys2.iter().all(Option::is_some) && !keys2.is_empty() && distinct.len() == row_count(state, t2);
            match pk {
                Some(pk) if functional => {
                    let pk_values = state.data.column(t2, &pk).unwrap_or(&[]).to_vec();
                    let by_value: HashMap<&String, &Value> =
                        keys2.iter().flatten().zip(pk_values.iter()).collect();
                    let mut unmatched = 0;
                    let mapped: Vec<Value> = display_values(state, t1, c1)
                        .iter()
                        .map(|v| match v.join_key() {
                            None => Value::Null,
                            Some(k) => by_value.get(&k).map(|v| (*v).clone()).unwrap_or_else(|| {
                                unmatched += 1;
                                Value::Null
                            }),
                        })
                        .collect();
                    let target = Target::Declared { table: t2.to_string(), pk: pk.clone() };
                    set_values(state, t1, c1, mapped);
                    set_link(state, t1, c1, &target);
                    unmatched_warning(warnings, t1, c1, &target, unmatched);
                    Ok(format!("{t1}.{c1} now links to {t2}.{pk} through {t2}.{c2}"))
                }
                _ => {
                    let log = create_dummy(state, &fresh_name, &fresh_name, &[(t2, c2), (t1, c1)])?;
                    Ok(format!("surrogate key: {log}"))
                }
            }
        }
        (d, _) => Err(err(
            "wrong-dtype",
            format!("table_1_col_name must be a category or foreign_key column; {t1}.{c1} is {d}. Put the category column in table 1"),
        )),
    }
}

fn new_table_def(name: &str) -> TableDef {
    TableDef::new(name, format!("data/{name}.pqt"), TableFormat::Parquet)
}

fn check_new_table(state: &State, name: &str) -> Result<(), ActionError> {
    check_identifier(name)?;
    if state.schema.has_table_name(name) {
        return Err(err("name-collision", format!("a table named '{name}' already exists")));
    }
    Ok(())
}

fn distinct_names(names: &[&str]) -> Result<(), ActionError> {
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(*n) {
            return Err(err("name-collision", format!("column name '{n}' would appear twice")));
        }
    }
    Ok(())
}

fn remove_column(state: &mut State, table: &str, column: &str) {
    if let Some(t) = state.schema.table_mut(table) {
        t.columns.retain(|c| c.name != column);
        if t.time_column.as_deref() == Some(column) {
            t.time_column = None;
        }
    }
    if let Some(t) = state.data.table_mut(table) {
        t.columns.shift_remove(column);
    }
}

pub(super) fn explode_multi_category_column(
    state: &mut State,
    original: &str,
    multi: &str,
    pk_col: &str,
    new_table: &str,
    new_col: &str,
    dtype: &str,
) -> Result<String, ActionError> {
    let col = column_def(state, original, multi)?;
    if col.dtype != DataType::MultiCategory {
        return Err(err("wrong-dtype", format!("{original}.{multi} is {}, not multi_category", col.dtype)));
    }
    let pk = table_def(state, original)?
        .primary_key()
        .map(|c| c.name.clone())
        .ok_or_else(|| err("not-pk", format!("table {original} has no primary key")))?;
    if pk != pk_col {
        return Err(err("pk-mismatch", format!("primary_key_column is {pk_col}, but the primary key of {original} is {pk}")));
    }
    let dtype: DataType = dtype.parse().map_err(|_| err("invalid-dtype", format!("unknown dtype '{dtype}'")))?;
    if dtype == DataType::PrimaryKey {
        return Err(err("invalid-dtype", "the exploded column cannot be a primary_key"));
    }
    check_new_table(state, new_table)?;
    check_identifier(new_col)?;

    let pk_values = state.data.column(original, &pk).unwrap_or(&[]).to_vec();
    let cells = state.data.column(original, multi).unwrap_or(&[]).to_vec();
    let mut back = Vec::new();
    let mut elems = Vec::new();
    for (owner, cell) in pk_values.iter().zip(&cells) {
        let items: Vec<Value> = match cell {
            Value::List(items) => items.iter().filter(|v| !v.is_nan()).cloned().collect(),
            v if !v.is_nan() => vec![v.clone()],
            _ => vec![],
        };
        for item in items {
            back.push(owner.clone());
            elems.push(item);
        }
    }
    let n = elems.len();
    let back_fk = ColumnDef::foreign_key(pk_col, LinkTarget::new(original, &pk));
    let has_data = state.data.table(original).is_some();
    let log = if dtype == DataType::ForeignKey {
        distinct_names(&[pk_col, new_col])?;
        if state.schema.table(new_col).is_some() {
            return Err(err("name-collision", format!("'{new_col}' is already a declared table")));
        }
        let def = new_table_def(new_table).with_column(back_fk).with_column(ColumnDef::new(new_col, DataType::Category));
        state.schema.tables.push(def);
        if has_data {
            state.data.insert(TableData::from_columns(new_table, [(pk_col, back), (new_col, elems)]));
        }
        let dummy_log = create_dummy(state, new_col, new_col, &[(new_table, new_col)])?;
        format!("exploded {original}.{multi} into edge table {new_table} ({n} rows); {dummy_log}")
    } else {
        let new_pk = format!("{new_table}ID");
        distinct_names(&[&new_pk, pk_col, new_col])?;
        let def = new_table_def(new_table)
            .with_column(ColumnDef::new(&new_pk, DataType::PrimaryKey))
            .with_column(back_fk)
            .with_column(ColumnDef::new(new_col, dtype));
        state.schema.tables.push(def);
        if has_data {
            let ids = (0..n as i64).map(Value::Int).collect();
            state.data.insert(TableData::from_columns(new_table, [(new_pk.as_str(), ids), (pk_col, back), (new_col, elems)]));
        }
        format!("exploded {original}.{multi} into table {new_table} ({n} rows) keyed by {new_pk}")
    };
    remove_column(state, original, multi);
    Ok(log)
}

pub(super) fn generate_non_dummy_table(
    state: &mut State,
    base: &str,
    cols: &[String],
    new_table: &str,
) -> Result<String, ActionError> {
    if cols.is_empty() {
        return Err(err("empty-cols", "cols must name at least one column"));
    }
    let mut moved: Vec<ColumnDef> = Vec::new();
    for c in cols {
        let def = column_def(state, base, c)?;
        if def.dtype.is_key() {
            return Err(err("key-column", format!("{base}.{c} is a {} and cannot be moved", def.dtype)));
        }
        if !moved.iter().any(|m| m.name == def.name) {
            moved.push(def);
        }
    }
    check_new_table(state, new_table)?;
    let new_pk = format!("{new_table}ID");
    if moved.iter().any(|m| m.name == new_pk) {
        return Err(err("name-collision", format!("the new key column {new_pk} clashes with a moved column")));
    }
    let base_def = table_def(state, base)?;
    if base_def.column(new_table).is_some() && !moved.iter().any(|m| m.name == new_table) {
        return Err(err("name-collision", format!("{base} already has a column named {new_table}")));
    }
    let position = base_def.columns.iter().position(|c| moved.iter().any(|m| m.name == c.name)).expect("moved exist");
    let moves_time = base_def.time_column.as_deref().filter(|t| moved.iter().any(|m| m.name == *t)).map(str::to_string);

    let columns: Vec<Vec<Value>> = moved.iter().map(|m| display_values(state, base, &m.name)).collect();
    let rows = row_count(state, base);
    let mut tuples: IndexMap<Vec<Option<String>>, Vec<Value>> = IndexMap::new();
    let mut codes = Vec::with_capacity(rows);
    for r in 0..rows {
        let key: Vec<Option<String>> = columns.iter().map(|c| c[r].join_key()).collect();
        let entry = tuples.entry(key);
        codes.push(Value::Int(entry.index() as i64));
        entry.or_insert_with(|| columns.iter().map(|c| c[r].clone()).collect());
    }
    let k = tuples.len();

    let mut def = new_table_def(new_table).with_column(ColumnDef::new(&new_pk, DataType::PrimaryKey));
    def.time_column = moves_time;
    let mut payload: IndexMap<String, Vec<Value>> = IndexMap::new();
    payload.insert(new_pk.clone(), (0..k as i64).map(Value::Int).collect());
    for (i, m) in moved.iter().enumerate() {
        def.columns.push(ColumnDef { link_to: None, ..m.clone() });
        payload.insert(m.name.clone(), tuples.values().map(|t| t[i].clone()).collect());
    }
    state.schema.tables.push(def);
    let has_data = state.data.table(base).is_some();
    if has_data {
        state.data.insert(TableData::new(new_table, payload).expect("aligned columns"));
    }
    for m in &moved {
        remove_column(state, base, &m.name);
    }
    let fk = ColumnDef::foreign_key(new_table, LinkTarget::new(new_table, &new_pk));
    state.schema.table_mut(base).expect("base exists").columns.insert(position, fk);
    if let Some(t) = state.data.table_mut(base) {
        t.columns.shift_insert(position, new_table.to_string(), codes);
    }
    let names: Vec<&str> = moved.iter().map(|m| m.name.as_str()).collect();
    Ok(format!("moved {base}.{{{}}} into table {new_table} ({k} distinct rows); {base}.{new_table} links to it", names.join(", ")))
}

pub(super) fn remove_primary_key(state: &mut State, base: &str, col: &str) -> Result<String, ActionError> {
    let def = column_def(state, base, col)?;
    if def.dtype != DataType::PrimaryKey {
        return Err(err("not-pk", format!("{base}.{col} is {}, not a primary key", def.dtype)));
    }
    let refs: Vec<String> = state
        .schema
        .links()
        .filter(|(_, _, l)| l.table == base && l.column == col)
        .map(|(t, c, _)| format!("{t}.{c}"))
        .collect();
    if !refs.is_empty() {
        return Err(err("referenced-pk", format!("{base}.{col} is referenced by {}", refs.join(", "))));
    }
    remove_column(state, base, col);
    Ok(format!("removed primary key {base}.{col}"))
}

pub(super) fn add_primary_key(state: &mut State, base: &str, col: &str) -> Result<String, ActionError> {
    let def = table_def(state, base)?;
    if let Some(pk) = def.primary_key() {
        return Err(err("pk-exists", format!("table {base} already has primary key {}", pk.name)));
    }
    if def.column(col).is_some() {
        return Err(err("name-collision", format!("table {base} already has a column named {col}")));
    }
    check_identifier(col)?;
    let n = row_count(state, base);
    state.schema.table_mut(base).expect("checked").columns.insert(0, ColumnDef::new(col, DataType::PrimaryKey));
    if let Some(t) = state.data.table_mut(base) {
        t.columns.shift_insert(0, col.to_string(), (0..n as i64).map(Value::Int).collect());
    }
    Ok(format!("added primary key {base}.{col} over {n} rows"))
}
