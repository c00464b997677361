//! Named test fixtures shipped with the crate.
//!
//! Every file under `fixtures/<name>/` is produced by [`generate`]; the test
//! suite regenerates and diffs them. Set `AUTOG_BLESS=1` when running the
//! `fixtures_are_current` test to rewrite them after an intended change.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::actions::{apply_script, Action, State};
use crate::graph::{build_graph, graph_summary, BuildMode};
use crate::ingest::columnar::write_parquet;
use crate::ingest::{load_database, profile_database, render_stats_report, write_table_csv, TableData, DEFAULT_SAMPLE_SIZE};
use crate::join::{rank_pairs, Method, DEFAULT_TOP_N};
use crate::planner::{
    parse_selection, parse_transcript, run_autog_s, PlannerConfig, PromptContext, ScriptedClient, TranscriptEntry,
    COT_EXAMPLE,
};
use crate::schema::{parse_schema, serialize_schema, DatasetSchema};
use crate::value::Value;

pub const FIXTURE_NAMES: [&str; 3] = ["cot_paper_journal", "avs_min", "mag_stats"];

/// Task text used with the Paper/Journal fixture.
pub const COT_TASK: &str = "Predict the category of a paper from the information in the paper.";

macro_rules! embedded {
    ($name:literal: $($file:literal),* $(,)?) => {
        &[$(($file, include_bytes!(concat!("../fixtures/", $name, "/", $file)) as &[u8])),*]
    };
}

type Files = &'static [(&'static str, &'static [u8])];

fn embedded_files(name: &str) -> Option<Files> {
    let files: Files = match name {
        "cot_paper_journal" => embedded!("cot_paper_journal":
            "schema.yaml", "data/paper.csv", "data/journal.csv", "script.json", "transcript.jsonl",
            "expected/stats.txt", "expected/similarity.txt", "expected/final_schema.yaml",
            "expected/graph_summary.txt",
        ),
        "avs_min" => embedded!("avs_min":
            "schema.yaml", "data/history.pqt", "expected/stats.txt", "expected/graph_summary.txt",
        ),
        "mag_stats" => embedded!("mag_stats":
            "schema.yaml", "data/paper.csv", "data/cites.csv", "data/has_topic.csv", "expected/stats.txt",
            "expected/graph_summary.txt",
        ),
        _ => return None,
    };
    Some(files)
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("unknown fixture '{0}'; known: {names}", names = FIXTURE_NAMES.join(", "))]
    Unknown(String),
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture content: {0}")]
    Content(String),
}

fn content<E: std::fmt::Display>(e: E) -> FixtureError {
    FixtureError::Content(e.to_string())
}

/// A fixture materialized under a temporary root.
#[derive(Debug)]
pub struct Fixture {
    pub name: String,
    pub root: tempfile::TempDir,
    pub schema: DatasetSchema,
    pub script: Option<Vec<Action>>,
    pub transcript: Option<Vec<TranscriptEntry>>,
}

impl Fixture {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.path().join(rel)
    }

    pub fn schema_path(&self) -> PathBuf {
        self.path("schema.yaml")
    }

    pub fn state(&self) -> Result<State, FixtureError> {
        let (data, _) = load_database(&self.schema, self.root.path()).map_err(content)?;
        Ok(State::new(self.schema.clone(), data))
    }

    pub fn expected(&self, file: &str) -> Option<String> {
        std::fs::read_to_string(self.path(&format!("expected/{file}"))).ok()
    }
}

pub fn load_fixture(name: &str) -> Result<Fixture, FixtureError> {
    let files = embedded_files(name).ok_or_else(|| FixtureError::Unknown(name.into()))?;
    let root = tempfile::tempdir()?;
    for (rel, bytes) in files {
        let path = root.path().join(rel);
        std::fs::create_dir_all(path.parent().expect("relative file has a parent"))?;
        std::fs::write(path, bytes)?;
    }
    let text = |rel: &str| std::fs::read_to_string(root.path().join(rel)).ok();
    let schema = parse_schema(&text("schema.yaml").unwrap_or_default()).map_err(content)?;
    let script = text("script.json").map(|t| serde_json::from_str(&t)).transpose().map_err(content)?;
    let transcript = text("transcript.jsonl").map(|t| parse_transcript(&t)).transpose().map_err(content)?;
    Ok(Fixture { name: name.into(), root, schema, script, transcript })
}

/// Generated bytes of every file of fixture `name`.
pub fn generate(name: &str) -> Result<BTreeMap<String, Vec<u8>>, FixtureError> {
    let dir = tempfile::tempdir()?;
    let (schema, tables) = match name {
        "cot_paper_journal" => (COT_SCHEMA, cot_tables()),
        "avs_min" => (AVS_SCHEMA, avs_tables()),
        "mag_stats" => (MAG_SCHEMA, mag_tables()),
        _ => return Err(FixtureError::Unknown(name.into())),
    };
    let mut out = BTreeMap::new();
    out.insert("schema.yaml".to_string(), schema.as_bytes().to_vec());
    let schema = parse_schema(schema).map_err(content)?;
    for t in &tables {
        let def = schema.table(&t.table_name).expect("generated table is declared");
        let path = dir.path().join(&def.source);
        std::fs::create_dir_all(path.parent().expect("source has a parent"))?;
        if def.source.ends_with(".csv") {
            write_table_csv(t, &path).map_err(content)?;
        } else {
            write_parquet(&path, &t.table_name, &t.columns).map_err(content)?;
        }
        out.insert(def.source.clone(), std::fs::read(&path)?);
    }
    let (data, _) = load_database(&schema, dir.path()).map_err(content)?;
    let state = State::new(schema, data);
    let decoded = state.data.decoded(&state.schema);
    let profiles = profile_database(&state.schema, &decoded, DEFAULT_SAMPLE_SIZE, 0);
    out.insert("expected/stats.txt".into(), render_stats_report(&state.schema, &profiles).into_bytes());

    let mut final_state = state.clone();
    if name == "cot_paper_journal" {
        let similarity = rank_pairs(&state.schema, &profiles, &decoded, Method::Embedding, DEFAULT_TOP_N).report;
        out.insert("expected/similarity.txt".into(), similarity.into_bytes());
        let script = parse_selection(COT_EXAMPLE).map_err(content)?.actions;
        let replay = apply_script(&state, &script);
        if let Some((i, e)) = replay.error {
            return Err(FixtureError::Content(format!("script step {i} failed: {e}")));
        }
        final_state = replay.state;
        out.insert("script.json".into(), (serde_json::to_string_pretty(&script).map_err(content)? + "\n").into_bytes());
        out.insert("expected/final_schema.yaml".into(), serialize_schema(&final_state.schema).into_bytes());

        let ctx = PromptContext::from_state(&state, COT_TASK, 0);
        let client = ScriptedClient::new([COT_EXAMPLE]);
        let session = run_autog_s(&state, &ctx, &client, &PlannerConfig::default()).map_err(content)?;
        let mut jsonl = String::new();
        for e in &session.transcript {
            jsonl.push_str(&serde_json::to_string(e).map_err(content)?);
            jsonl.push('\n');
        }
        out.insert("transcript.jsonl".into(), jsonl.into_bytes());
    }
    let graph = build_graph(&final_state.schema, &final_state.data, BuildMode::Row2nodeEdge).map_err(content)?.graph;
    out.insert("expected/graph_summary.txt".into(), graph_summary(&graph).render().into_bytes());
    Ok(out)
}

/// Writes generated files into `root/<name>/`.
pub fn bless(root: &Path, name: &str) -> Result<(), FixtureError> {
    for (rel, bytes) in generate(name)? {
        let path = root.join(name).join(rel);
        std::fs::create_dir_all(path.parent().expect("relative file has a parent"))?;
        std::fs::write(path, bytes)?;
    }
    Ok(())
}

/// Files of fixture `name` as shipped.
pub fn shipped(name: &str) -> Option<BTreeMap<String, Vec<u8>>> {
    embedded_files(name).map(|files| files.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect())
}

const COT_SCHEMA: &str = "\
# Paper/Journal example at toy scale: 100 papers, 10 journals.
dataset_name: Papers
tables:
  - name: Paper
    source: data/paper.csv
    format: csv
    columns:
      - name: PaperID
        dtype: primary_key
      - name: Title
        dtype: text
      - name: Author
        dtype: multi_category
      - name: Journal
        dtype: category
      - name: Year
        dtype: float
      - name: Keyword
        dtype: category
      - name: Abstract
        dtype: text
      - name: Category
        dtype: category
      - name: Publisher
        dtype: text
      - name: PublisherLocation
        dtype: category
  - name: Journal
    source: data/journal.csv
    format: csv
    columns:
      - name: JournalID
        dtype: primary_key
      - name: Name
        dtype: text
      - name: ImpactFactor
        dtype: float
      - name: Country
        dtype: category
";

const AVS_SCHEMA: &str = "\
dataset_name: avs
tables:
  - name: History
    source: data/history.pqt
    format: parquet
    columns:
      - name: chain
        dtype: category
      - name: market
        dtype: category
      - name: offerdate
        dtype: datetime
      - name: id
        dtype: primary_key
      - name: repeater
        dtype: category
      - name: offer
        dtype: foreign_key
        link_to: Offer.offer
    time_column: offerdate
";

const MAG_SCHEMA: &str = "\
dataset_name: mag_toy
tables:
  - name: paper
    source: data/paper.csv
    format: csv
    columns:
      - name: paperID
        dtype: primary_key
      - name: label
        dtype: category
      - name: feat
        dtype: embedding
      - name: year
        dtype: category
  - name: Cites
    source: data/cites.csv
    format: csv
    columns:
      - name: paper_cite
        dtype: foreign_key
        link_to: paper.paperID
      - name: paper_cited
        dtype: foreign_key
        link_to: paper.paperID
  - name: HasTopic
    source: data/has_topic.csv
    format: csv
    columns:
      - name: paper_name
        dtype: foreign_key
        link_to: paper.paperID
      - name: field_of_study
        dtype: foreign_key
        link_to: FieldOfStudy.field_of_study
";

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn table(name: &str, cols: Vec<(&str, Vec<Value>)>) -> TableData {
    let columns: IndexMap<String, Vec<Value>> = cols.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    TableData::new(name, columns).expect("generated columns have equal length")
}

fn cot_tables() -> Vec<TableData> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let journals = strs(&["Nature", "Science", "NeurIPS", "ICML", "CVPR", "ICLR", "KDD", "WWW", "AAAI", "IJCAI"]);
    let countries = ["USA", "USA", "Canada", "UK", "USA", "USA", "USA", "Canada", "UK", "Germany"];
    let authors = strs(&[
        "Yann LeCun", "Geoffrey Hinton", "Yoshua Bengio", "Fei-Fei Li", "Jitendra Malik", "Daphne Koller",
        "Michael Jordan", "Andrew Ng", "Judea Pearl", "Bernhard Scholkopf", "Yee Whye Teh", "Zoubin Ghahramani",
    ]);
    let keywords = strs(&[
        "Machine Learning", "Deep Learning", "Graph Neural Networks", "Reinforcement Learning", "Meta Learning",
        "Computer Vision", "Transformers", "Optimization", "Causality", "Robotics",
    ]);
    // Publisher determines its location.
    let publishers = [
        ("Springer", "Germany"),
        ("Elsevier", "Netherlands"),
        ("ACM", "USA"),
        ("IEEE", "USA"),
        ("Nature", "UK"),
        ("Wiley", "USA"),
        ("MIT Press", "USA"),
        ("Taylor & Francis", "UK"),
        ("Sage", "Canada"),
    ];
    let n = 100;
    let mut cols: BTreeMap<&str, Vec<Value>> = BTreeMap::new();
    for i in 0..n {
        let kw = rng.gen_range(0..keywords.len());
        let category = if rng.gen_bool(0.8) { kw as i64 } else { rng.gen_range(0..10) };
        let k = rng.gen_range(1..=3);
        let mut names: Vec<String> = authors.choose_multiple(&mut rng, k).cloned().collect();
        names.sort();
        let (publisher, location) = publishers[rng.gen_range(0..publishers.len())];
        let row = [
            ("PaperID", Value::Int(i)),
            ("Title", Value::Str(format!("{} study {i}", keywords[kw]))),
            ("Author", Value::List(names.into_iter().map(Value::Str).collect())),
            ("Journal", Value::Str(journals[rng.gen_range(0..journals.len())].clone())),
            ("Year", Value::Int(rng.gen_range(2010..2020))),
            ("Keyword", Value::Str(keywords[kw].clone())),
            ("Abstract", Value::Str(format!("This paper presents result {i} on {}.", keywords[kw].to_lowercase()))),
            ("Category", Value::Int(category)),
            ("Publisher", Value::from(publisher)),
            ("PublisherLocation", Value::from(location)),
        ];
        for (k, v) in row {
            cols.entry(k).or_default().push(v);
        }
    }
    let order = [
        "PaperID", "Title", "Author", "Journal", "Year", "Keyword", "Abstract", "Category", "Publisher",
        "PublisherLocation",
    ];
    let paper = table("Paper", order.iter().map(|k| (*k, cols.remove(k).expect("column filled"))).collect());
    let journal = table(
        "Journal",
        vec![
            ("JournalID", (0..10).map(Value::Int).collect()),
            ("Name", journals.iter().cloned().map(Value::Str).collect()),
            ("ImpactFactor", (0..10).map(|_| Value::Float((rng.gen_range(10..500) as f64) / 10.0)).collect()),
            ("Country", countries.iter().map(|&c| Value::from(c)).collect()),
        ],
    );
    vec![paper, journal]
}

fn avs_tables() -> Vec<TableData> {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 24;
    let base = 1_364_774_400; // 2013-04-01
    let mut offer: Vec<Value> = (0..n).map(|_| Value::Str(format!("o{}", rng.gen_range(1..5)))).collect();
    offer[5] = Value::Null;
    let history = table(
        "History",
        vec![
            ("chain", (0..n).map(|_| Value::Int(rng.gen_range(1..6))).collect()),
            ("market", (0..n).map(|_| Value::Int(rng.gen_range(1..4))).collect()),
            ("offerdate", (0..n).map(|i| Value::Int(base + 86_400 * (i as i64 % 7))).collect()),
            ("id", (0..n).map(|i| Value::Int(86_246 + i as i64)).collect()),
            ("repeater", (0..n).map(|_| Value::from(if rng.gen_bool(0.3) { "t" } else { "f" })).collect()),
            ("offer", offer),
        ],
    );
    vec![history]
}

fn mag_tables() -> Vec<TableData> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 30;
    let paper = table(
        "paper",
        vec![
            ("paperID", (0..n).map(Value::Int).collect()),
            ("label", (0..n).map(|_| Value::Int(rng.gen_range(0..5))).collect()),
            (
                "feat",
                (0..n).map(|_| Value::Vector((0..4).map(|_| (rng.gen_range(-100..100) as f64) / 100.0).collect())).collect(),
            ),
            ("year", (0..n).map(|_| Value::Int(rng.gen_range(2010..2020))).collect()),
        ],
    );
    let m = 60;
    let cites = table(
        "Cites",
        vec![
            ("paper_cite", (0..m).map(|_| Value::Int(rng.gen_range(0..n))).collect()),
            ("paper_cited", (0..m).map(|_| Value::Int(rng.gen_range(0..n))).collect()),
        ],
    );
    let k = 40;
    let has_topic = table(
        "HasTopic",
        vec![
            ("paper_name", (0..k).map(|i| Value::Int(i % n)).collect()),
            ("field_of_study", (0..k).map(|_| Value::Int(rng.gen_range(0..8))).collect()),
        ],
    );
    vec![paper, cites, has_topic]
}
