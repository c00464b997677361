use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use serde_json::json;

use super::*;
use crate::ingest::TableData;
use crate::schema::{ColumnDef, DataType, LinkTarget, TableDef, TableFormat};
use crate::value::Value;

fn strs(xs: &[&str]) -> Vec<Value> {
    xs.iter().map(|s| Value::from(*s)).collect()
}

fn ints(xs: &[i64]) -> Vec<Value> {
    xs.iter().copied().map(Value::Int).collect()
}

fn table(name: &str, cols: &[(&str, DataType)]) -> TableDef {
    cols.iter().fold(TableDef::new(name, format!("data/{name}.pqt"), TableFormat::Parquet), |t, (c, d)| {
        t.with_column(ColumnDef::new(*c, *d))
    })
}

/// Paper(6 rows) and Journal(3 rows).
fn papers() -> State {
    let mut schema = DatasetSchema::new("papers");
    schema.tables.push(table(
        "Paper",
        &[
            ("PaperID", DataType::PrimaryKey),
            ("Journal", DataType::Category),
            ("Keyword", DataType::Category),
            ("Author", DataType::MultiCategory),
            ("Publisher", DataType::Text),
            ("PublisherLocation", DataType::Category),
        ],
    ));
    schema.tables.push(table(
        "Journal",
        &[("JournalID", DataType::PrimaryKey), ("Name", DataType::Text), ("Country", DataType::Category)],
    ));
    let authors = vec![
        Value::List(strs(&["ann", "bob"])),
        Value::List(strs(&["bob"])),
        Value::List(vec![]),
        Value::List(strs(&["cat", "ann"])),
        Value::Null,
        Value::List(strs(&["dan"])),
    ];
    let data = Database::new()
        .with_table(TableData::from_columns(
            "Paper",
            [
                ("PaperID", ints(&[0, 1, 2, 3, 4, 5])),
                ("Journal", strs(&["Nature", "Science", "Nature", "ICML", "ICML", "Science"])),
                ("Keyword", strs(&["gnn", "rl", "gnn", "cv", "rl", "gnn"])),
                ("Author", authors),
                ("Publisher", strs(&["ACM", "IEEE", "ACM", "ACM", "IEEE", "Springer"])),
                ("PublisherLocation", strs(&["USA", "USA", "USA", "USA", "USA", "Germany"])),
            ],
        ))
        .with_table(TableData::from_columns(
            "Journal",
            [
                ("JournalID", ints(&[10, 11, 12])),
                ("Name", strs(&["Nature", "Science", "ICML"])),
                ("Country", strs(&["UK", "USA", "USA"])),
            ],
        ));
    State::new(schema, data)
}

fn act(kind: ActionKind, params: &[(&str, serde_json::Value)]) -> Action {
    Action::new(kind, params.iter().map(|(k, v)| (k.to_string(), v.clone())))
}

fn dummy(base: &str, col: &str, name: &str) -> Action {
    act(
        ActionKind::GenerateOrConnectDummyTable,
        &[
            ("base_table_name", json!(base)),
            ("orig_col_name", json!(col)),
            ("new_table_name", json!(name)),
            ("new_col_name", json!(name)),
        ],
    )
}

fn connect(t1: &str, c1: &str, t2: &str, c2: &str) -> Action {
    act(
        ActionKind::ConnectTwoColumns,
        &[
            ("table_1_name", json!(t1)),
            ("table_1_col_name", json!(c1)),
            ("table_2_name", json!(t2)),
            ("table_2_col_name", json!(c2)),
        ],
    )
}

fn decoded(state: &State, t: &str, c: &str) -> Vec<Value> {
    state.data.decoded(&state.schema).column(t, c).unwrap().to_vec()
}

fn link(state: &State, t: &str, c: &str) -> Option<LinkTarget> {
    state.schema.table(t).unwrap().column(c).unwrap().link_to.clone()
}

#[test]
fn dummy_table_from_category() {
    let s = papers();
    let out = apply_action(&s, &dummy("Paper", "Keyword", "Keyword")).unwrap();
    assert_eq!(link(&out.state, "Paper", "Keyword"), Some(LinkTarget::new("Keyword", "Keyword")));
    assert!(out.state.schema.is_dummy("Keyword"));
    assert_eq!(out.state.data.key_spaces["Keyword"].values, strs(&["cv", "gnn", "rl"]));
    assert_eq!(out.state.data.column("Paper", "Keyword").unwrap(), ints(&[1, 2, 1, 0, 2, 1]).as_slice());
    assert_eq!(decoded(&out.state, "Paper", "Keyword"), s.data.column("Paper", "Keyword").unwrap());
}

#[test]
fn dummy_twice_is_noop() {
    let a = dummy("Paper", "Keyword", "Keyword");
    let once = apply_action(&papers(), &a).unwrap().state;
    let twice = apply_action(&once, &a).unwrap().state;
    assert_eq!(once, twice);
}

#[test]
fn dummy_requires_category() {
    let e = apply_action(&papers(), &dummy("Paper", "Publisher", "Pub")).unwrap_err();
    assert_eq!(e.code(), "wrong-dtype");
    assert!(e.message.contains("orig_col_name must be a column with category type"));
    let e = apply_action(&papers(), &dummy("Paper", "PaperID", "X")).unwrap_err();
    assert_eq!(e.code(), "wrong-dtype");
}

#[test]
fn dummy_already_fk_elsewhere() {
    let s = apply_action(&papers(), &dummy("Paper", "Keyword", "Keyword")).unwrap().state;
    assert_eq!(apply_action(&s, &dummy("Paper", "Keyword", "Topic")).unwrap_err().code(), "already-fk");
}

#[test]
fn shared_dummy_is_union_of_domains() {
    let mut schema = DatasetSchema::new("shop");
    schema.tables.push(table("Item", &[("ItemID", DataType::PrimaryKey), ("brand", DataType::Category)]));
    schema.tables.push(table("Ad", &[("AdID", DataType::PrimaryKey), ("brand", DataType::Category)]));
    let item_brands = strs(&["acme", "zeta", "acme", "bolt", "zeta", "acme"]);
    let ad_brands = strs(&["bolt", "kilo", "kilo", "acme", "omni", "bolt"]);
    let data = Database::new()
        .with_table(TableData::from_columns("Item", [("ItemID", ints(&[0, 1, 2, 3, 4, 5])), ("brand", item_brands.clone())]))
        .with_table(TableData::from_columns("Ad", [("AdID", ints(&[0, 1, 2, 3, 4, 5])), ("brand", ad_brands.clone())]));
    let s = State::new(schema, data);
    let s = apply_action(&s, &dummy("Item", "brand", "Brand")).unwrap().state;
    let before: Vec<Value> = s.data.key_spaces["Brand"].values.clone();
    let s = apply_action(&s, &dummy("Ad", "brand", "Brand")).unwrap().state;
    let union: BTreeSet<Value> = item_brands.iter().chain(&ad_brands).cloned().collect();
    assert_eq!(s.data.key_spaces["Brand"].len(), union.len());
    assert_eq!(&s.data.key_spaces["Brand"].values[..before.len()], before.as_slice());
    assert_eq!(decoded(&s, "Item", "brand"), item_brands);
    assert_eq!(decoded(&s, "Ad", "brand"), ad_brands);
}

#[test]
fn connect_category_to_pk() {
    let mut s = papers();
    s.data.table_mut("Paper").unwrap().columns["Journal"] = ints(&[10, 11, 10, 12, 12, 11]);
    let out = apply_action(&s, &connect("Paper", "Journal", "Journal", "JournalID")).unwrap();
    assert!(out.warnings.is_empty());
    assert_eq!(link(&out.state, "Paper", "Journal"), Some(LinkTarget::new("Journal", "JournalID")));

    s.data.table_mut("Paper").unwrap().columns["Journal"] = ints(&[10, 11, 99, 12, 12, 98]);
    let out = apply_action(&s, &connect("Paper", "Journal", "Journal", "JournalID")).unwrap();
    assert_eq!(out.warnings.len(), 1);
    let col = out.state.data.column("Paper", "Journal").unwrap();
    assert_eq!(col.iter().filter(|v| v.is_nan()).count(), 2);
}

#[test]
fn connect_through_functional_text_column() {
    let out = apply_action(&papers(), &connect("Paper", "Journal", "Journal", "Name")).unwrap();
    assert_eq!(link(&out.state, "Paper", "Journal"), Some(LinkTarget::new("Journal", "JournalID")));
    assert_eq!(out.state.data.column("Paper", "Journal").unwrap(), ints(&[10, 11, 10, 12, 12, 11]).as_slice());
    assert!(out.state.schema.derived.is_empty());
}

#[test]
fn connect_surrogate_key() {
    let mut schema = DatasetSchema::new("s");
    schema.tables.push(table("A", &[("AID", DataType::PrimaryKey), ("tag", DataType::Category)]));
    schema.tables.push(table("B", &[("label", DataType::Text), ("w", DataType::Numeric)]));
    let data = Database::new()
        .with_table(TableData::from_columns("A", [("AID", ints(&[0, 1, 2])), ("tag", strs(&["x", "y", "x"]))]))
        .with_table(TableData::from_columns(
            "B",
            [("label", strs(&["x", "y", "z", "z"])), ("w", vec![Value::Float(1.0); 4])],
        ));
    let out = apply_action(&State::new(schema, data), &connect("A", "tag", "B", "label")).unwrap();
    let s = out.state;
    assert_eq!(s.data.key_spaces["label"].len(), 3);
    assert_eq!(link(&s, "A", "tag"), Some(LinkTarget::new("label", "label")));
    assert_eq!(link(&s, "B", "label"), Some(LinkTarget::new("label", "label")));
    assert_eq!(decoded(&s, "B", "label"), strs(&["x", "y", "z", "z"]));
}

#[test]
fn connect_two_categories_and_merge() {
    let s = papers();
    let out = apply_action(&s, &connect("Paper", "PublisherLocation", "Journal", "Country")).unwrap().state;
    assert_eq!(out.data.key_spaces["Country"].values, strs(&["Germany", "UK", "USA"]));
    assert_eq!(decoded(&out, "Journal", "Country"), strs(&["UK", "USA", "USA"]));

    // Case 4: Keyword's dummy is absorbed into Country's.
    let out = apply_action(&out, &dummy("Paper", "Keyword", "Keyword")).unwrap().state;
    let merged = apply_action(&out, &connect("Paper", "PublisherLocation", "Paper", "Keyword")).unwrap().state;
    assert!(!merged.schema.is_dummy("Keyword"));
    assert_eq!(link(&merged, "Paper", "Keyword"), Some(LinkTarget::new("Country", "Country")));
    assert_eq!(&merged.data.key_spaces["Country"].values[..3], strs(&["Germany", "UK", "USA"]).as_slice());
    assert_eq!(decoded(&merged, "Paper", "Keyword"), s.data.column("Paper", "Keyword").unwrap());
}

#[test]
fn connect_errors() {
    let s = papers();
    assert_eq!(apply_action(&s, &connect("Paper", "Journal", "Paper", "Journal")).unwrap_err().code(), "self-connection");
    assert_eq!(apply_action(&s, &connect("Paper", "Publisher", "Journal", "Name")).unwrap_err().code(), "wrong-dtype");
    assert_eq!(apply_action(&s, &connect("Paper", "Journal", "Paper", "Author")).unwrap_err().code(), "incompatible-dtype");
    assert_eq!(apply_action(&s, &connect("Nope", "x", "Paper", "Journal")).unwrap_err().code(), "unknown-table");
    assert_eq!(apply_action(&s, &connect("Paper", "x", "Paper", "Journal")).unwrap_err().code(), "unknown-column");
}

fn explode(dtype: &str) -> Action {
    act(
        ActionKind::ExplodeMultiCategoryColumn,
        &[
            ("original_table", json!("Paper")),
            ("multi_cat_col", json!("Author")),
            ("primary_key_column", json!("PaperID")),
            ("new_table_name", json!("Author")),
            ("new_col_name", json!("AuthorName")),
            ("dtype", json!(dtype)),
        ],
    )
}

#[test]
fn explode_to_edge_table() {
    let s = apply_action(&papers(), &explode("foreign_key")).unwrap().state;
    let t = s.schema.table("Author").unwrap();
    assert!(t.primary_key().is_none());
    assert_eq!(t.foreign_keys().count(), 2);
    assert!(s.schema.table("Paper").unwrap().column("Author").is_none());
    assert!(s.data.column("Paper", "Author").is_none());
    assert_eq!(s.data.table("Author").unwrap().row_count, 6);
    assert_eq!(s.data.key_spaces["AuthorName"].values, strs(&["ann", "bob", "cat", "dan"]));
    assert_eq!(s.data.column("Author", "PaperID").unwrap(), ints(&[0, 0, 1, 3, 3, 5]).as_slice());
}

#[test]
fn explode_small_fixture() {
    let mut schema = DatasetSchema::new("m");
    schema.tables.push(table("T", &[("TID", DataType::PrimaryKey), ("tags", DataType::MultiCategory)]));
    let tags = vec![Value::List(strs(&["a", "b"])), Value::List(strs(&["b"])), Value::List(vec![])];
    let data = Database::new().with_table(TableData::from_columns("T", [("TID", ints(&[0, 1, 2])), ("tags", tags)]));
    let a = act(
        ActionKind::ExplodeMultiCategoryColumn,
        &[
            ("original_table", json!("T")),
            ("multi_cat_col", json!("tags")),
            ("primary_key_column", json!("TID")),
            ("new_table_name", json!("Tagging")),
            ("new_col_name", json!("Tag")),
            ("dtype", json!("foreign_key")),
        ],
    );
    let s = apply_action(&State::new(schema, data), &a).unwrap().state;
    assert_eq!(s.data.table("Tagging").unwrap().row_count, 3);
    assert_eq!(s.data.key_spaces["Tag"].len(), 2);
}

#[test]
fn explode_with_values_adds_key() {
    let s = apply_action(&papers(), &explode("category")).unwrap().state;
    let t = s.schema.table("Author").unwrap();
    assert_eq!(t.primary_key().unwrap().name, "AuthorID");
    assert_eq!(t.column("AuthorName").unwrap().dtype, DataType::Category);
    assert_eq!(s.data.column("Author", "AuthorID").unwrap(), ints(&[0, 1, 2, 3, 4, 5]).as_slice());
}

#[test]
fn explode_errors() {
    let s = papers();
    assert_eq!(apply_action(&s, &explode("primary_key")).unwrap_err().code(), "invalid-dtype");
    assert_eq!(apply_action(&s, &explode("weird")).unwrap_err().code(), "invalid-dtype");
    let mut a = explode("foreign_key");
    a.parameters.insert("primary_key_column".into(), json!("Journal"));
    assert_eq!(apply_action(&s, &a).unwrap_err().code(), "pk-mismatch");
    a.parameters.insert("primary_key_column".into(), json!("PaperID"));
    a.parameters.insert("multi_cat_col".into(), json!("Keyword"));
    assert_eq!(apply_action(&s, &a).unwrap_err().code(), "wrong-dtype");
}

fn publisher() -> Action {
    act(
        ActionKind::GenerateNonDummyTable,
        &[
            ("base_table_name", json!("Paper")),
            ("cols", json!(["Publisher", "PublisherLocation"])),
            ("new_table_name", json!("Publisher")),
        ],
    )
}

#[test]
fn non_dummy_table_dedups_tuples() {
    let s0 = papers();
    let s = apply_action(&s0, &publisher()).unwrap().state;
    let t = s.schema.table("Publisher").unwrap();
    let names: Vec<&str> = t.columns.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, ["PublisherID", "Publisher", "PublisherLocation"]);
    assert_eq!(s.data.table("Publisher").unwrap().row_count, 3);
    let codes = s.data.column("Paper", "Publisher").unwrap();
    assert_eq!(codes, ints(&[0, 1, 0, 0, 1, 2]).as_slice());
    assert_eq!(link(&s, "Paper", "Publisher"), Some(LinkTarget::new("Publisher", "PublisherID")));
    assert!(s.schema.table("Paper").unwrap().column("PublisherLocation").is_none());
    // Joining back through the new key restores the moved tuples.
    for col in ["Publisher", "PublisherLocation"] {
        let attr = s.data.column("Publisher", col).unwrap();
        let back: Vec<Value> = codes.iter().map(|c| attr[c.as_i64().unwrap() as usize].clone()).collect();
        assert_eq!(back, s0.data.column("Paper", col).unwrap());
    }
}

#[test]
fn non_dummy_table_errors() {
    let s = papers();
    let mut a = publisher();
    a.parameters.insert("cols".into(), json!([]));
    assert_eq!(apply_action(&s, &a).unwrap_err().code(), "missing-parameter");
    a.parameters.insert("cols".into(), json!(["PaperID"]));
    assert_eq!(apply_action(&s, &a).unwrap_err().code(), "key-column");
    a.parameters.insert("cols".into(), json!(["Publisher"]));
    a.parameters.insert("new_table_name".into(), json!("Journal"));
    assert_eq!(apply_action(&s, &a).unwrap_err().code(), "name-collision");
}

fn edge_state() -> State {
    let mut schema = DatasetSchema::new("rate");
    schema.tables.push(table("user", &[("userID", DataType::PrimaryKey)]));
    schema.tables.push(table("book", &[("bookID", DataType::PrimaryKey)]));
    schema.tables.push(
        TableDef::new("Rates", "data/rates.pqt", TableFormat::Parquet)
            .with_column(ColumnDef::new("id", DataType::PrimaryKey))
            .with_column(ColumnDef::foreign_key("user", LinkTarget::new("user", "userID")))
            .with_column(ColumnDef::foreign_key("book", LinkTarget::new("book", "bookID"))),
    );
    let data = Database::new()
        .with_table(TableData::from_columns("user", [("userID", ints(&[0, 1]))]))
        .with_table(TableData::from_columns("book", [("bookID", ints(&[0, 1, 2]))]))
        .with_table(TableData::from_columns(
            "Rates",
            [("id", ints(&[0, 1, 2, 3])), ("user", ints(&[0, 0, 1, 1])), ("book", ints(&[0, 1, 1, 2]))],
        ));
    State::new(schema, data)
}

fn pk_action(kind: ActionKind, t: &str, c: &str) -> Action {
    act(kind, &[("base_table_name", json!(t)), ("col_name", json!(c))])
}

#[test]
fn remove_and_add_primary_key_round_trip() {
    let s = edge_state();
    let removed = apply_action(&s, &pk_action(ActionKind::RemovePrimaryKey, "Rates", "id")).unwrap().state;
    assert!(removed.schema.table("Rates").unwrap().primary_key().is_none());
    assert!(removed.data.column("Rates", "id").is_none());
    let restored = apply_action(&removed, &pk_action(ActionKind::AddPrimaryKey, "Rates", "id")).unwrap().state;
    assert_eq!(restored, s);
}

#[test]
fn add_then_remove_restores() {
    let s = apply_action(&edge_state(), &pk_action(ActionKind::RemovePrimaryKey, "Rates", "id")).unwrap().state;
    let added = apply_action(&s, &pk_action(ActionKind::AddPrimaryKey, "Rates", "rid")).unwrap().state;
    assert_eq!(added.data.column("Rates", "rid").unwrap(), ints(&[0, 1, 2, 3]).as_slice());
    let back = apply_action(&added, &pk_action(ActionKind::RemovePrimaryKey, "Rates", "rid")).unwrap().state;
    assert_eq!(back, s);
}

#[test]
fn primary_key_errors() {
    let s = edge_state();
    assert_eq!(apply_action(&s, &pk_action(ActionKind::RemovePrimaryKey, "user", "userID")).unwrap_err().code(), "referenced-pk");
    assert_eq!(apply_action(&s, &pk_action(ActionKind::RemovePrimaryKey, "Rates", "user")).unwrap_err().code(), "not-pk");
    assert_eq!(apply_action(&s, &pk_action(ActionKind::AddPrimaryKey, "Rates", "x")).unwrap_err().code(), "pk-exists");
}

#[test]
fn none_is_terminal_and_identity() {
    let s = papers();
    let out = apply_action(&s, &Action::none()).unwrap();
    assert!(out.terminal);
    assert_eq!(out.state, s);
}

#[test]
fn parameter_and_kind_errors() {
    let mut a = dummy("Paper", "Keyword", "Keyword");
    a.parameters.shift_remove("new_table_name");
    let e = apply_action(&papers(), &a).unwrap_err();
    assert_eq!(e.code(), "missing-parameter");
    assert_eq!(e.parameter.as_deref(), Some("new_table_name"));
    let e = apply_action(&papers(), &Action { action: "drop_everything".into(), ..Default::default() }).unwrap_err();
    assert_eq!(e.code(), "unknown-action");
}

#[test]
fn script_fold_and_error_index() {
    let s = papers();
    assert_eq!(apply_script(&s, &[]).state, s);
    let ok = [explode("foreign_key"), publisher()];
    let folded = apply_script(&s, &ok);
    let manual = apply_action(&apply_action(&s, &ok[0]).unwrap().state, &ok[1]).unwrap().state;
    assert_eq!(folded.state, manual);

    let bad = [dummy("Paper", "Keyword", "Keyword"), dummy("Paper", "Publisher", "P"), publisher()];
    let out = apply_script(&s, &bad);
    assert_eq!(out.error.as_ref().map(|(i, e)| (*i, e.code())), Some((2, "wrong-dtype")));
    assert_eq!(out.state, apply_action(&s, &bad[0]).unwrap().state);

    let stop = apply_script(&s, &[Action::none(), publisher()]);
    assert!(stop.terminated);
    assert_eq!(stop.state, s);
}

#[test]
fn script_json_is_wire_compatible() {
    let text = r#"[{"explanation": "x", "action": "remove_primary_key", "parameters": {"base_table_name": "Rates", "col_name": "id"}}]"#;
    let script = parse_script(text).unwrap();
    assert_eq!(script[0].kind().unwrap(), ActionKind::RemovePrimaryKey);
    let round: Vec<Action> = serde_json::from_str(&serde_json::to_string(&script).unwrap()).unwrap();
    assert_eq!(round, script);
}

fn multiset(vals: &[Value]) -> BTreeMap<Value, usize> {
    let mut m = BTreeMap::new();
    for v in vals {
        *m.entry(v.clone()).or_insert(0) += 1;
    }
    m
}

proptest! {
    #[test]
    fn explode_conserves_elements(lists in proptest::collection::vec(proptest::collection::vec(0u8..6, 0..4), 1..12)) {
        let mut schema = DatasetSchema::new("p");
        schema.tables.push(table("T", &[("TID", DataType::PrimaryKey), ("m", DataType::MultiCategory)]));
        let cells: Vec<Value> = lists.iter().map(|l| Value::List(l.iter().map(|x| Value::Str(format!("e{x}"))).collect())).collect();
        let ids = (0..lists.len() as i64).map(Value::Int).collect();
        let s = State::new(schema, Database::new().with_table(TableData::from_columns("T", [("TID", ids), ("m", cells)])));
        let a = act(ActionKind::ExplodeMultiCategoryColumn, &[
            ("original_table", json!("T")), ("multi_cat_col", json!("m")), ("primary_key_column", json!("TID")),
            ("new_table_name", json!("E")), ("new_col_name", json!("El")), ("dtype", json!("foreign_key")),
        ]);
        let before = s.clone();
        let out = apply_action(&s, &a).unwrap().state;
        prop_assert_eq!(&s, &before);
        let total: usize = lists.iter().map(Vec::len).sum();
        prop_assert_eq!(out.data.table("E").unwrap().row_count, total);
        let flat: Vec<Value> = lists.iter().flatten().map(|x| Value::Str(format!("e{x}"))).collect();
        prop_assert_eq!(multiset(&decoded(&out, "E", "El")), multiset(&flat));
        prop_assert!(crate::schema::validate_schema(&out.schema).is_empty());
    }

    #[test]
    fn dummy_preserves_category_multiset(xs in proptest::collection::vec(proptest::option::of(0u8..5), 1..20)) {
        let mut schema = DatasetSchema::new("p");
        schema.tables.push(table("T", &[("TID", DataType::PrimaryKey), ("c", DataType::Category)]));
        let cells: Vec<Value> = xs.iter().map(|x| x.map_or(Value::Null, |x| Value::Str(format!("v{x}")))).collect();
        let ids = (0..xs.len() as i64).map(Value::Int).collect();
        let s = State::new(schema, Database::new().with_table(TableData::from_columns("T", [("TID", ids), ("c", cells.clone())])));
        let out = apply_action(&s, &dummy("T", "c", "C")).unwrap().state;
        prop_assert_eq!(decoded(&out, "T", "c"), cells);
    }

    #[test]
    fn non_dummy_table_is_reconstructible(rows in proptest::collection::vec((0u8..3, 0u8..3), 1..20)) {
        let mut schema = DatasetSchema::new("p");
        schema.tables.push(table("T", &[("TID", DataType::PrimaryKey), ("a", DataType::Category), ("b", DataType::Numeric)]));
        let a: Vec<Value> = rows.iter().map(|r| Value::Str(format!("a{}", r.0))).collect();
        let b: Vec<Value> = rows.iter().map(|r| Value::Float(r.1 as f64)).collect();
        let ids = (0..rows.len() as i64).map(Value::Int).collect();
        let s = State::new(schema, Database::new().with_table(TableData::from_columns("T", [("TID", ids), ("a", a.clone()), ("b", b.clone())])));
        let g = act(ActionKind::GenerateNonDummyTable, &[("base_table_name", json!("T")), ("cols", json!(["a", "b"])), ("new_table_name", json!("N"))]);
        let out = apply_action(&s, &g).unwrap().state;
        let codes = out.data.column("T", "N").unwrap();
        let distinct: BTreeSet<(u8, u8)> = rows.iter().copied().collect();
        prop_assert_eq!(out.data.table("N").unwrap().row_count, distinct.len());
        for (col, orig) in [("a", &a), ("b", &b)] {
            let attr = out.data.column("N", col).unwrap();
            let back: Vec<Value> = codes.iter().map(|c| attr[c.as_i64().unwrap() as usize].clone()).collect();
            prop_assert_eq!(&back, orig);
        }
    }
}
