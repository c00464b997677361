//! Seeded citation-style benchmarks with planted schema defects and the
//! actions that repair them.
//!
//! Papers belong to latent communities. Authors, venues and keywords are
//! drawn mostly from each paper's own community, so relations through them
//! carry the community signal; the `Session` column groups papers of
//! distinct communities and is harmful by construction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::actions::{apply_script, Action, ActionError, ActionKind, State};
use crate::error::IngestError;
use crate::graph::Role;
use crate::ingest::{write_database, Database, TableData};
use crate::oracle::{Metric, Task};
use crate::schema::{serialize_schema, ColumnDef, DataType, DatasetSchema, LinkTarget, TableDef, TableFormat};
use crate::value::Value;

pub mod random;

pub const TASKS_FILE: &str = "tasks.json";
pub const ANSWER_KEY_FILE: &str = "answer_key.json";
pub const SCHEMA_FILE: &str = "schema.yaml";
pub const HARMFUL_FILE: &str = "harmful.json";

/// Smallest allowed table size.
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Challenges {
    /// `Writes.person` holds author ids without a declared link.
    pub c1_renamed_fk: bool,
    /// `Paper.Venue` (category) and `Paper.Keywords` (multi_category) hide
    /// useful relations.
    pub c2_self_induced: bool,
    /// `Writes` carries a dense `WriteID` primary key, so it builds as a node.
    pub c3_edge_table_with_spurious_pk: bool,
    /// A second, structure-independent label on `Paper`.
    pub c4_dual_tasks: bool,
}

impl Default for Challenges {
    fn default() -> Self {
        Self { c1_renamed_fk: true, c2_self_induced: true, c3_edge_table_with_spurious_pk: true, c4_dual_tasks: true }
    }
}

impl Challenges {
    fn any(&self) -> bool {
        self.c1_renamed_fk || self.c2_self_induced || self.c3_edge_table_with_spurious_pk || self.c4_dual_tasks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelModel {
    /// Chance that a paper's `Field` is not its community.
    pub flip: f64,
    /// Chance that a paper's `Flag` is 1, independently of everything.
    pub noise_rate: f64,
    /// Chance that a venue or keyword is drawn outside the community.
    pub leak: f64,
}

impl Default for LabelModel {
    fn default() -> Self {
        Self { flip: 0.1, noise_rate: 0.5, leak: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchSpec {
    pub seed: u64,
    pub papers: usize,
    pub authors: usize,
    pub venues: usize,
    pub keywords: usize,
    pub communities: usize,
    pub challenges: Challenges,
    pub labels: LabelModel,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            papers: 300,
            authors: 120,
            venues: 8,
            keywords: 20,
            communities: 4,
            challenges: Challenges::default(),
            labels: LabelModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid bench spec: {0}")]
pub struct SpecError(pub String);

impl BenchSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn check(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError(m));
        if !self.challenges.any() {
            return bad("at least one challenge must be enabled".into());
        }
        for (name, n) in [("papers", self.papers), ("authors", self.authors)] {
            if n < MIN_ROWS {
                return bad(format!("{name} = {n}, need at least {MIN_ROWS}"));
            }
        }
        if self.communities < 2 || self.communities > self.authors {
            return bad(format!("communities = {}, need 2..={}", self.communities, self.authors));
        }
        if self.challenges.c2_self_induced && (self.venues < self.communities || self.keywords < self.communities) {
            return bad("venues and keywords must each be at least the number of communities".into());
        }
        let LabelModel { flip, noise_rate, leak } = self.labels;
        if !(0.0..=1.0).contains(&flip) || !(0.0..=1.0).contains(&leak) {
            return bad("flip and leak must lie in [0, 1]".into());
        }
        if !(noise_rate > 0.0 && noise_rate < 1.0) {
            return bad(format!("noise_rate = {noise_rate}, need (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Challenge {
    C1,
    C2,
    C3,
    C4,
}

impl fmt::Display for Challenge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyAction {
    pub challenge: Challenge,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerKey {
    /// Ground-truth actions in an order that applies cleanly.
    pub actions: Vec<KeyAction>,
    /// Roles under `row2node_edge` after the actions.
    pub roles: BTreeMap<String, Role>,
    /// Symmetric metapaths on `Paper` that carry the community signal.
    pub metapaths: Vec<Vec<String>>,
    /// Task names: the one the relations help, the one they do not.
    pub better_task: Option<String>,
    pub worse_task: Option<String>,
}

impl AnswerKey {
    pub fn action_list(&self) -> Vec<Action> {
        self.actions.iter().map(|k| k.action.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bench {
    pub schema: DatasetSchema,
    pub data: Database,
    pub tasks: Vec<Task>,
    pub key: AnswerKey,
    /// Actions that add a relation hurting the community task.
    pub harmful: Vec<Action>,
    /// Latent community of every paper, in row order.
    pub communities: Vec<usize>,
}

impl Bench {
    pub fn state(&self) -> State {
        State::new(self.schema.clone(), self.data.clone())
    }

    pub fn task(&self, name: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.name == name)
    }

    /// Reference candidates `original`, `harmful` and `planted`, each with
    /// the actions that produce it.
    pub fn reference_candidates(&self) -> Result<Vec<(String, Vec<Action>, State)>, ActionError> {
        let base = self.state();
        let mut out = vec![("original".to_string(), vec![], base.clone())];
        for (id, actions) in [("harmful", self.harmful.clone()), ("planted", self.key.action_list())] {
            let run = apply_script(&base, &actions);
            if let Some((_, e)) = run.error {
                return Err(e);
            }
            out.push((id.to_string(), actions, run.state));
        }
        Ok(out)
    }
}

pub const COMMUNITY_TASK: &str = "field";
pub const NOISE_TASK: &str = "flag";
/// The metapath through co-authorship.
pub fn planted_metapath() -> Vec<String> {
    vec!["Writes".into(), "Writes_rev".into()]
}

fn action<const N: usize>(kind: ActionKind, params: [(&str, &str); N]) -> Action {
    Action::new(kind, params)
}

fn csv_table(name: &str, source: &str) -> TableDef {
    TableDef::new(name, format!("data/{source}.csv"), TableFormat::Csv)
}

fn columns(cols: Vec<(&str, Vec<Value>)>) -> IndexMap<String, Vec<Value>> {
    cols.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Picks from `own` with probability `1 - leak`, else from `0..all`.
fn draw(rng: &mut ChaCha8Rng, own: &[usize], all: usize, leak: f64) -> usize {
    if own.is_empty() || rng.gen_bool(leak) {
        rng.gen_range(0..all)
    } else {
        own[rng.gen_range(0..own.len())]
    }
}

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ren", "sa", "tor", "vi", "ne", "du", "pa", "xe", "ul"];

fn word(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(2..4);
    (0..n).map(|_| SYLLABLES[rng.gen_range(0..SYLLABLES.len())]).collect()
}

/// Builds the benchmark described by `spec`; identical specs give identical
/// benchmarks.
pub fn generate(spec: &BenchSpec) -> Result<Bench, SpecError> {
    spec.check()?;
    let ch = spec.challenges;
    let k = spec.communities;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut author_comm: Vec<usize> = (0..spec.authors).map(|a| a % k).collect();
    author_comm.shuffle(&mut rng);
    let mut by_comm: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (a, &c) in author_comm.iter().enumerate() {
        by_comm[c].push(a);
    }
    let author_id = |a: usize| Value::Int(1000 + a as i64);

    let n = spec.papers;
    let comm: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let mut writes_paper = Vec::new();
    let mut writes_author = Vec::new();
    for (p, &c) in comm.iter().enumerate() {
        let team = rng.gen_range(1..=3.min(by_comm[c].len()));
        for &a in by_comm[c].choose_multiple(&mut rng, team) {
            writes_paper.push(Value::Int(p as i64));
            writes_author.push(author_id(a));
        }
    }
    let field: Vec<Value> = comm
        .iter()
        .map(|&c| {
            let label = if rng.gen_bool(spec.labels.flip) {
                (c + rng.gen_range(1..k)) % k
            } else {
                c
            };
            Value::Str(format!("F{label}"))
        })
        .collect();
    let flag: Vec<Value> = (0..n).map(|_| Value::Int(rng.gen_bool(spec.labels.noise_rate) as i64)).collect();

    // Session s holds the s-th paper of every community: members never share
    // a community.
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (p, &c) in comm.iter().enumerate() {
        members[c].push(p);
    }
    let mut session = vec![Value::Null; n];
    for list in &mut members {
        list.shuffle(&mut rng);
        for (s, &p) in list.iter().enumerate() {
            session[p] = Value::Str(format!("S{s}"));
        }
    }

    let mut paper_cols: Vec<(&str, Vec<Value>)> = vec![
        ("PaperID", (0..n as i64).map(Value::Int).collect()),
        ("Title", (0..n).map(|_| Value::Str(format!("{} {} {}", word(&mut rng), word(&mut rng), word(&mut rng)))).collect()),
        ("Year", (0..n).map(|_| Value::Int(rng.gen_range(2000..2021))).collect()),
    ];
    let mut paper = csv_table("Paper", "paper")
        .with_column(ColumnDef::new("PaperID", DataType::PrimaryKey))
        .with_column(ColumnDef::new("Title", DataType::Text))
        .with_column(ColumnDef::new("Year", DataType::Numeric));
    if ch.c2_self_induced {
        let leak = spec.labels.leak;
        let venue_pool = |c: usize| (0..spec.venues).filter(|v| v % k == c).collect::<Vec<_>>();
        let kw_pool = |c: usize| (0..spec.keywords).filter(|w| w % k == c).collect::<Vec<_>>();
        let venues: Vec<Value> =
            comm.iter().map(|&c| Value::Str(format!("V{}", draw(&mut rng, &venue_pool(c), spec.venues, leak)))).collect();
        let keywords: Vec<Value> = comm
            .iter()
            .map(|&c| {
                let pool = kw_pool(c);
                let mut picked: Vec<usize> = Vec::new();
                for _ in 0..rng.gen_range(1..=3) {
                    let w = draw(&mut rng, &pool, spec.keywords, leak);
                    if !picked.contains(&w) {
                        picked.push(w);
                    }
                }
                Value::List(picked.into_iter().map(|w| Value::Str(format!("kw{w}"))).collect())
            })
            .collect();
        paper_cols.push(("Venue", venues));
        paper_cols.push(("Keywords", keywords));
        paper = paper
            .with_column(ColumnDef::new("Venue", DataType::Category))
            .with_column(ColumnDef::new("Keywords", DataType::MultiCategory));
    }
    paper_cols.push(("Session", session));
    paper_cols.push(("Field", field));
    paper = paper
        .with_column(ColumnDef::new("Session", DataType::Category))
        .with_column(ColumnDef::new("Field", DataType::Category));
    if ch.c4_dual_tasks {
        paper_cols.push(("Flag", flag));
        paper = paper.with_column(ColumnDef::new("Flag", DataType::Category));
    }

    let author = csv_table("Author", "author")
        .with_column(ColumnDef::new("AuthorID", DataType::PrimaryKey))
        .with_column(ColumnDef::new("Name", DataType::Text))
        .with_column(ColumnDef::new("Affiliation", DataType::Category));
    let author_cols = vec![
        ("AuthorID", (0..spec.authors).map(author_id).collect()),
        ("Name", (0..spec.authors).map(|_| Value::Str(format!("{} {}", word(&mut rng), word(&mut rng)))).collect()),
        ("Affiliation", (0..spec.authors).map(|_| Value::Str(format!("U{}", rng.gen_range(0..10)))).collect()),
    ];

    let m = writes_paper.len();
    let mut writes = csv_table("Writes", "writes");
    let mut writes_cols = Vec::new();
    if ch.c3_edge_table_with_spurious_pk {
        writes = writes.with_column(ColumnDef::new("WriteID", DataType::PrimaryKey));
        writes_cols.push(("WriteID", (0..m as i64).map(Value::Int).collect()));
    }
    writes = writes.with_column(ColumnDef::foreign_key("PaperRef", LinkTarget::new("Paper", "PaperID")));
    writes = writes.with_column(if ch.c1_renamed_fk {
        ColumnDef::new("person", DataType::Category)
    } else {
        ColumnDef::foreign_key("person", LinkTarget::new("Author", "AuthorID"))
    });
    writes_cols.push(("PaperRef", writes_paper));
    writes_cols.push(("person", writes_author));

    let mut schema = DatasetSchema::new("synth_citations");
    schema.tables = vec![paper, author, writes];
    let mut data = Database::new();
    for (name, cols) in [("Paper", paper_cols), ("Author", author_cols), ("Writes", writes_cols)] {
        data.insert(TableData::new(name, columns(cols)).expect("generated columns have equal length"));
    }

    let mut key = Vec::new();
    use ActionKind::{ConnectTwoColumns, ExplodeMultiCategoryColumn, GenerateOrConnectDummyTable, RemovePrimaryKey};
    if ch.c1_renamed_fk {
        let a = action(
            ConnectTwoColumns,
            [("table_1_name", "Writes"), ("table_1_col_name", "person"), ("table_2_name", "Author"), ("table_2_col_name", "AuthorID")],
        );
        key.push(KeyAction { challenge: Challenge::C1, action: a });
    }
    if ch.c3_edge_table_with_spurious_pk {
        let a = action(RemovePrimaryKey, [("base_table_name", "Writes"), ("col_name", "WriteID")]);
        key.push(KeyAction { challenge: Challenge::C3, action: a });
    }
    if ch.c2_self_induced {
        let venue = action(
            GenerateOrConnectDummyTable,
            [("base_table_name", "Paper"), ("orig_col_name", "Venue"), ("new_table_name", "Venue"), ("new_col_name", "Venue")],
        );
        let kw = action(
            ExplodeMultiCategoryColumn,
            [
                ("original_table", "Paper"),
                ("multi_cat_col", "Keywords"),
                ("primary_key_column", "PaperID"),
                ("new_table_name", "PaperKeyword"),
                ("new_col_name", "Keyword"),
                ("dtype", "foreign_key"),
            ],
        );
        key.push(KeyAction { challenge: Challenge::C2, action: venue });
        key.push(KeyAction { challenge: Challenge::C2, action: kw });
    }
    let harmful = vec![action(
        GenerateOrConnectDummyTable,
        [("base_table_name", "Paper"), ("orig_col_name", "Session"), ("new_table_name", "Session"), ("new_col_name", "Session")],
    )];

    let mut roles: BTreeMap<String, Role> =
        ["Paper", "Author", "Writes"].map(|t| (t.to_string(), if t == "Writes" { Role::Edge } else { Role::Node })).into();
    let mut metapaths = vec![planted_metapath()];
    if ch.c2_self_induced {
        roles.insert("Venue".into(), Role::DummyNode);
        roles.insert("Keyword".into(), Role::DummyNode);
        roles.insert("PaperKeyword".into(), Role::Edge);
        metapaths.push(vec!["Paper.Venue".into(), "Paper.Venue_rev".into()]);
        metapaths.push(vec!["PaperKeyword".into(), "PaperKeyword_rev".into()]);
    }

    let mut tasks = vec![Task { name: COMMUNITY_TASK.into(), ..Task::classification("Paper", "Field", Metric::Accuracy) }];
    let (better, worse) = if ch.c4_dual_tasks {
        tasks.push(Task { name: NOISE_TASK.into(), ..Task::classification("Paper", "Flag", Metric::Accuracy) });
        (Some(COMMUNITY_TASK.to_string()), Some(NOISE_TASK.to_string()))
    } else {
        (None, None)
    };
    let key = AnswerKey { actions: key, roles, metapaths, better_task: better, worse_task: worse };
    data.materialize_key_spaces(&schema);
    Ok(Bench { schema, data, tasks, key, harmful, communities: comm })
}

/// Writes `schema.yaml`, the CSV payloads, `tasks.json`, `answer_key.json`
/// and `harmful.json` under `dir`.
pub fn write_bench(bench: &Bench, dir: &Path) -> Result<(), IngestError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Io { path, source }
    };
    write_database(&bench.schema, &bench.data, dir)?;
    for (file, text) in [
        (SCHEMA_FILE, serialize_schema(&bench.schema)),
        (TASKS_FILE, pretty_json(&bench.tasks)),
        (ANSWER_KEY_FILE, pretty_json(&bench.key)),
        (HARMFUL_FILE, pretty_json(&bench.harmful)),
    ] {
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(io(&path))?;
    }
    Ok(())
}

fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Renaming applied by [`anonymize`]. Tokens are unique across tables and
/// columns, so a bare token identifies its original name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NameMap {
    pub tables: BTreeMap<String, String>,
    pub columns: BTreeMap<String, BTreeMap<String, String>>,
    /// Payload paths, which usually spell the table name.
    pub sources: BTreeMap<String, String>,
}

impl NameMap {
    fn table(&self, t: &str) -> String {
        self.tables.get(t).cloned().unwrap_or_else(|| t.to_string())
    }

    fn column(&self, t: &str, c: &str) -> String {
        self.columns.get(t).and_then(|m| m.get(c)).cloned().unwrap_or_else(|| c.to_string())
    }

    /// The map from tokens back to original names.
    pub fn inverse(&self) -> NameMap {
        let tables: BTreeMap<String, String> = self.tables.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        let columns = self
            .columns
            .iter()
            .map(|(t, cols)| (self.table(t), cols.iter().map(|(k, v)| (v.clone(), k.clone())).collect()))
            .collect();
        let sources = self.sources.iter().map(|(k, v)| (v.clone(), k.clone())).collect();
        NameMap { tables, columns, sources }
    }

    pub fn schema(&self, schema: &DatasetSchema) -> DatasetSchema {
        let mut out = schema.clone();
        for t in &mut out.tables {
            let old = t.name.clone();
            t.name = self.table(&old);
            if let Some(src) = self.sources.get(&t.source) {
                t.source = src.clone();
            }
            for c in &mut t.columns {
                c.name = self.column(&old, &c.name);
                if let Some(l) = &mut c.link_to {
                    *l = LinkTarget::new(self.table(&l.table), self.column(&l.table, &l.column));
                }
            }
            t.time_column = t.time_column.as_ref().map(|c| self.column(&old, c));
        }
        out.derived = out
            .derived
            .iter()
            .map(|d| crate::schema::DummyTableRef { name: self.table(&d.name), key_column: self.column(&d.name, &d.key_column) })
            .collect();
        out
    }

    pub fn data(&self, data: &Database) -> Database {
        let mut out = Database::new();
        for (name, t) in &data.tables {
            let cols = t.columns.iter().map(|(c, v)| (self.column(name, c), v.clone())).collect();
            out.insert(TableData::new(self.table(name), cols).expect("renaming keeps lengths"));
        }
        out.key_spaces = data.key_spaces.iter().map(|(k, v)| (self.table(k), v.clone())).collect();
        out
    }

    pub fn task(&self, task: &Task) -> Task {
        Task {
            target_type: self.table(&task.target_type),
            label_column: self.column(&task.target_type, &task.label_column),
            ..task.clone()
        }
    }

    /// Renames the table and column parameters of `action`. Names minted by
    /// the action itself pass through.
    pub fn action(&self, action: &Action) -> Action {
        let mut out = action.clone();
        let Ok(kind) = action.kind() else { return out };
        let set = |out: &mut Action, key: &str, v: String| {
            out.parameters.insert(key.into(), serde_json::Value::String(v));
        };
        for (tp, cps) in table_column_params(kind) {
            let Some(t) = action.str_param(tp) else { continue };
            for &cp in cps.iter() {
                if let Some(c) = action.str_param(cp) {
                    set(&mut out, cp, self.column(&t, &c));
                } else if let Some(list) = action.list_param(cp) {
                    let renamed: Vec<serde_json::Value> =
                        list.iter().map(|c| serde_json::Value::String(self.column(&t, c))).collect();
                    out.parameters.insert(cp.into(), serde_json::Value::Array(renamed));
                }
            }
            set(&mut out, tp, self.table(&t));
        }
        out
    }
}

/// `(table parameter, column parameters of that table)` per action kind.
fn table_column_params(kind: ActionKind) -> &'static [(&'static str, &'static [&'static str])] {
    use ActionKind::*;
    match kind {
        GenerateOrConnectDummyTable => &[("base_table_name", &["orig_col_name"])],
        ConnectTwoColumns => &[("table_1_name", &["table_1_col_name"]), ("table_2_name", &["table_2_col_name"])],
        ExplodeMultiCategoryColumn => &[("original_table", &["multi_cat_col", "primary_key_column"])],
        GenerateNonDummyTable => &[("base_table_name", &["cols"])],
        RemovePrimaryKey | AddPrimaryKey => &[("base_table_name", &["col_name"])],
        None => &[],
    }
}

/// Replaces every table and column name with an opaque seeded token.
/// Values are untouched.
pub fn anonymize(schema: &DatasetSchema, data: &Database, seed: u64) -> (DatasetSchema, Database, NameMap) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used = std::collections::HashSet::new();
    let mut token = |prefix: char| loop {
        let t = format!("{prefix}{:05x}", rng.gen_range(0..0x100000));
        if used.insert(t.clone()) {
            break t;
        }
    };
    let mut map = NameMap::default();
    let mut names: Vec<(String, Vec<String>)> =
        schema.tables.iter().map(|t| (t.name.clone(), t.columns.iter().map(|c| c.name.clone()).collect())).collect();
    names.extend(schema.derived.iter().map(|d| (d.name.clone(), vec![d.key_column.clone()])));
    for t in &schema.tables {
        let ext = Path::new(&t.source).extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
        map.sources.insert(t.source.clone(), format!("data/{}{ext}", token('f')));
    }
    for (t, cols) in names {
        map.tables.insert(t.clone(), token('t'));
        let entry = map.columns.entry(t).or_default();
        for c in cols {
            entry.insert(c, token('c'));
        }
    }
    (map.schema(schema), map.data(data), map)
}

/// Matched and expected ground-truth actions for one challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recovery {
    pub challenge: Challenge,
    pub matched: usize,
    pub expected: usize,
}

impl Recovery {
    pub fn fraction(&self) -> f64 {
        if self.expected == 0 {
            1.0
        } else {
            self.matched as f64 / self.expected as f64
        }
    }
}

impl fmt::Display for Recovery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}/{}", self.challenge, self.matched, self.expected)
    }
}

/// Canonical names for tables and columns created along an action list, so
/// that two lists doing the same thing under different new names agree.
#[derive(Default)]
struct Canon {
    tables: HashMap<String, String>,
    columns: HashMap<(String, String), String>,
}

impl Canon {
    fn t(&self, t: &str) -> String {
        self.tables.get(t).cloned().unwrap_or_else(|| t.to_string())
    }

    fn c(&self, t: &str, c: &str) -> String {
        let col = self.columns.get(&(t.to_string(), c.to_string())).cloned().unwrap_or_else(|| c.to_string());
        format!("{}.{col}", self.t(t))
    }

    fn mint(&mut self, name: &str, canonical: String) {
        self.tables.entry(name.to_string()).or_insert(canonical);
    }
}

/// Name-free description of what `action` does to the schema.
fn signature(action: &Action, canon: &mut Canon) -> Option<String> {
    let kind = action.kind().ok()?;
    let p = |n: &str| action.str_param(n).unwrap_or_default();
    use ActionKind::*;
    let sig = match kind {
        GenerateOrConnectDummyTable => {
            let sig = format!("dummy({})", canon.c(&p("base_table_name"), &p("orig_col_name")));
            canon.mint(&p("new_table_name"), sig.clone());
            canon.columns.insert((p("new_table_name"), p("new_col_name")), "key".into());
            sig
        }
        ConnectTwoColumns => {
            let mut ends = [canon.c(&p("table_1_name"), &p("table_1_col_name")), canon.c(&p("table_2_name"), &p("table_2_col_name"))];
            ends.sort();
            let sig = format!("link({}|{})", ends[0], ends[1]);
            let new = p("new_table_name");
            if !new.is_empty() {
                canon.mint(&new, sig.clone());
            }
            sig
        }
        ExplodeMultiCategoryColumn => {
            let col = canon.c(&p("original_table"), &p("multi_cat_col"));
            let linked = p("dtype") == "foreign_key";
            let sig = format!("explode({col},{})", if linked { "linked" } else { "plain" });
            canon.mint(&p("new_table_name"), format!("explode({col})"));
            canon.columns.insert((p("new_table_name"), p("new_col_name")), "elem".into());
            if linked {
                canon.mint(&p("new_col_name"), format!("explode({col}).elem"));
                canon.columns.insert((p("new_col_name"), p("new_col_name")), "key".into());
            }
            sig
        }
        GenerateNonDummyTable => {
            let base = p("base_table_name");
            let mut cols: Vec<String> = action.list_param("cols").unwrap_or_default().iter().map(|c| canon.c(&base, c)).collect();
            cols.sort();
            let sig = format!("split({})", cols.join(","));
            let new = p("new_table_name");
            canon.mint(&new, sig.clone());
            canon.columns.insert((new.clone(), format!("{new}ID")), "id".into());
            sig
        }
        RemovePrimaryKey => format!("unkey({})", canon.c(&p("base_table_name"), &p("col_name"))),
        AddPrimaryKey => format!("key({})", canon.c(&p("base_table_name"), &p("col_name"))),
        None => return Option::None,
    };
    Some(sig)
}

fn signatures(actions: &[Action]) -> Vec<String> {
    let mut canon = Canon::default();
    actions.iter().filter_map(|a| signature(a, &mut canon)).collect()
}

/// Per-challenge recovery of `key` by `applied`. Actions match on their
/// structural effect, so planner-chosen names for new tables do not matter;
/// each applied action matches at most one key action.
pub fn score_against_key(applied: &[Action], key: &AnswerKey) -> Vec<Recovery> {
    let mut pool: Vec<String> = signatures(applied);
    let wanted = signatures(&key.action_list());
    let mut out: BTreeMap<Challenge, Recovery> = BTreeMap::new();
    for (k, sig) in key.actions.iter().zip(wanted) {
        let r = out.entry(k.challenge).or_insert(Recovery { challenge: k.challenge, matched: 0, expected: 0 });
        r.expected += 1;
        if let Some(i) = pool.iter().position(|s| *s == sig) {
            pool.swap_remove(i);
            r.matched += 1;
        }
    }
    out.into_values().collect()
}

#[cfg(test)]
mod tests;
