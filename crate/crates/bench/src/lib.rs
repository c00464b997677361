//! Workloads shared by the criterion benches: a synthetic benchmark at a
//! chosen scale, before and after its answer key is applied.

use autog_core::actions::{apply_script, Action, State};
use autog_core::ingest::{profile_database, Profiles, DEFAULT_SAMPLE_SIZE};
use autog_core::oracle::Task;
use autog_core::schema::serialize_schema;
use autog_core::synth::{generate, BenchSpec, COMMUNITY_TASK};

pub struct Workload {
    pub original: State,
    pub repaired: State,
    pub key: Vec<Action>,
    pub task: Task,
    pub schema_text: String,
    pub profiles: Profiles,
}

/// `papers` papers with authors, venues and keywords scaled along.
pub fn workload(papers: usize, seed: u64) -> Workload {
    let spec = BenchSpec {
        papers,
        authors: (papers * 2 / 5).max(10),
        keywords: (papers / 15).max(20),
        ..BenchSpec::default().with_seed(seed)
    };
    let bench = generate(&spec).expect("valid spec");
    let original = bench.state();
    let key = bench.key.action_list();
    let run = apply_script(&original, &key);
    assert!(run.error.is_none(), "answer key failed: {:?}", run.error);
    let task = bench.task(COMMUNITY_TASK).expect("community task").clone();
    let schema_text = serialize_schema(&original.schema);
    let profiles = profile_database(&original.schema, &original.data.decoded(&original.schema), DEFAULT_SAMPLE_SIZE, seed);
    Workload { original, repaired: run.state, key, task, schema_text, profiles }
}
