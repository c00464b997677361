use super::*;
use crate::actions::apply_action;
use crate::graph::{build_graph, classify_tables, BuildMode};
use crate::ingest::{load_database, profile_database, render_stats_report};
use crate::oracle::{adjusted_homophily, class_labels, default_basket, metapath_project, score_candidate, Candidate};
use crate::schema::{parse_schema, validate_schema};

fn bench(seed: u64) -> Bench {
    generate(&BenchSpec::default().with_seed(seed)).unwrap()
}

fn planted_homophily(b: &Bench, task: &str) -> f64 {
    let run = apply_script(&b.state(), &b.key.action_list());
    assert!(run.error.is_none(), "{:?}", run.error);
    let graph = build_graph(&run.state.schema, &run.state.data, BuildMode::Row2nodeEdge).unwrap().graph;
    let (labels, _) = class_labels(&graph, b.task(task).unwrap()).unwrap();
    let adj = metapath_project(&graph, "Paper", &planted_metapath()).unwrap();
    adjusted_homophily(&adj, &labels).unwrap()
}

#[test]
fn generated_schema_is_valid_and_key_replays() {
    let b = bench(0);
    assert!(validate_schema(&b.schema).is_empty());
    assert!(b.key.actions.len() >= 4);
    let mut state = b.state();
    for k in &b.key.actions {
        state = apply_action(&state, &k.action).unwrap_or_else(|e| panic!("{:?}: {e}", k.challenge)).state;
        assert!(validate_schema(&state.schema).is_empty());
    }
    let (roles, _) = classify_tables(&state.schema, BuildMode::Row2nodeEdge);
    let got: BTreeMap<String, Role> = roles.into_iter().map(|r| (r.table, r.role)).collect();
    assert_eq!(got, b.key.roles);
    let graph = build_graph(&state.schema, &state.data, BuildMode::Row2nodeEdge).unwrap().graph;
    for path in &b.key.metapaths {
        assert!(metapath_project(&graph, "Paper", path).is_ok(), "{path:?}");
    }
    assert_eq!(b.key.better_task.as_deref(), Some(COMMUNITY_TASK));
}

#[test]
fn writes_builds_as_node_until_repaired() {
    let b = bench(1);
    let (roles, _) = classify_tables(&b.schema, BuildMode::Row2nodeEdge);
    assert!(roles.iter().any(|r| r.table == "Writes" && r.role == Role::Node));
    assert!(b.schema.table("Writes").unwrap().column("person").unwrap().link_to.is_none());
    assert_ne!(
        b.schema.table("Writes").unwrap().column("person").unwrap().name,
        b.schema.table("Author").unwrap().primary_key().unwrap().name
    );
}

#[test]
fn deterministic_under_seed() {
    assert_eq!(bench(3), bench(3));
    assert_ne!(bench(3).data, bench(4).data);
}

#[test]
fn every_challenge_subset_replays() {
    for mask in 1u8..16 {
        let challenges = Challenges {
            c1_renamed_fk: mask & 1 != 0,
            c2_self_induced: mask & 2 != 0,
            c3_edge_table_with_spurious_pk: mask & 4 != 0,
            c4_dual_tasks: mask & 8 != 0,
        };
        let b = generate(&BenchSpec { challenges, ..BenchSpec::default() }).unwrap();
        let run = apply_script(&b.state(), &b.key.action_list());
        assert!(run.error.is_none(), "mask {mask}: {:?}", run.error);
        assert!(validate_schema(&run.state.schema).is_empty());
        assert_eq!(b.tasks.len(), 1 + challenges.c4_dual_tasks as usize);
    }
}

#[test]
fn invalid_specs_are_rejected() {
    let none = Challenges { c1_renamed_fk: false, c2_self_induced: false, c3_edge_table_with_spurious_pk: false, c4_dual_tasks: false };
    for spec in [
        BenchSpec { challenges: none, ..BenchSpec::default() },
        BenchSpec { papers: 9, ..BenchSpec::default() },
        BenchSpec { authors: 5, ..BenchSpec::default() },
        BenchSpec { communities: 1, ..BenchSpec::default() },
        BenchSpec { venues: 2, ..BenchSpec::default() },
        BenchSpec { labels: LabelModel { flip: 1.5, ..LabelModel::default() }, ..BenchSpec::default() },
        BenchSpec { labels: LabelModel { noise_rate: 0.0, ..LabelModel::default() }, ..BenchSpec::default() },
    ] {
        assert!(generate(&spec).is_err(), "{spec:?}");
    }
}

#[test]
fn sessions_never_share_a_community() {
    let b = bench(2);
    let sessions = b.data.decoded(&b.schema).table("Paper").unwrap().column("Session").unwrap().to_vec();
    let mut seen: HashMap<String, Vec<usize>> = HashMap::new();
    for (v, &c) in sessions.iter().zip(&b.communities) {
        seen.entry(v.to_string()).or_default().push(c);
    }
    for comms in seen.values() {
        let mut d = comms.clone();
        d.sort();
        d.dedup();
        assert_eq!(d.len(), comms.len());
    }
}

#[test]
fn planted_metapath_separates_the_two_labels() {
    for seed in 0..20 {
        let b = bench(seed);
        let field = planted_homophily(&b, COMMUNITY_TASK);
        let flag = planted_homophily(&b, NOISE_TASK);
        assert!(field >= 0.3, "seed {seed}: {field}");
        assert!(flag.abs() <= 0.1, "seed {seed}: {flag}");
    }
}

#[test]
fn planted_relations_help_only_the_community_task() {
    let b = bench(5);
    let cands = b.reference_candidates().unwrap();
    let score = |state: &State, task: &str| {
        let graph = build_graph(&state.schema, &state.data, BuildMode::Row2nodeEdge).unwrap().graph;
        let task = b.task(task).unwrap();
        let c = Candidate { id: "x".into(), graph, action_count: 0 };
        score_candidate(&c, task, &default_basket(task), 1.0).unwrap().aggregate
    };
    let gap = |state: &State| score(state, COMMUNITY_TASK) - score(state, NOISE_TASK);
    let original = &cands[0].2;
    let planted = &cands[2].2;
    assert!(gap(planted) > gap(original), "{} vs {}", gap(planted), gap(original));
}

#[test]
fn written_bench_loads_back() {
    let b = bench(0);
    let dir = tempfile::tempdir().unwrap();
    write_bench(&b, dir.path()).unwrap();
    let schema = parse_schema(&std::fs::read_to_string(dir.path().join(SCHEMA_FILE)).unwrap()).unwrap();
    assert_eq!(schema, b.schema);
    let (data, warnings) = load_database(&schema, dir.path()).unwrap();
    assert!(warnings.is_empty(), "{warnings:?}");
    assert_eq!(State::new(schema, data).data, b.state().data);
    let tasks: Vec<Task> = serde_json::from_str(&std::fs::read_to_string(dir.path().join(TASKS_FILE)).unwrap()).unwrap();
    assert_eq!(tasks, b.tasks);
    let key: AnswerKey = serde_json::from_str(&std::fs::read_to_string(dir.path().join(ANSWER_KEY_FILE)).unwrap()).unwrap();
    assert_eq!(key, b.key);
}

#[test]
fn anonymization_round_trips() {
    let b = bench(0);
    let state = b.state();
    let (schema, data, map) = anonymize(&state.schema, &state.data, 7);
    assert!(validate_schema(&schema).is_empty());
    for t in &schema.tables {
        assert!(!b.schema.tables.iter().any(|o| o.name == t.name || t.source.contains(&o.name)));
        for c in &t.columns {
            assert!(c.name.starts_with('c') && c.name.len() == 6, "{}", c.name);
        }
    }
    let back = map.inverse();
    assert_eq!(back.schema(&schema), state.schema);
    assert_eq!(back.data(&data), state.data);
    let (_, _, other) = anonymize(&state.schema, &state.data, 8);
    assert_ne!(other.tables, map.tables);
    assert_eq!(anonymize(&state.schema, &state.data, 7).2, map);
}

#[test]
fn anonymized_stats_match_up_to_names() {
    let b = bench(0);
    let state = b.state();
    let (schema, data, map) = anonymize(&state.schema, &state.data, 3);
    let report = |s: &DatasetSchema, d: &Database| render_stats_report(s, &profile_database(s, &d.decoded(s), 5, 0));
    let mut anon = report(&schema, &data);
    let inverse = map.inverse();
    for (token, name) in inverse.tables.iter().chain(inverse.columns.values().flatten()) {
        anon = anon.replace(token.as_str(), name);
    }
    assert_eq!(anon, report(&state.schema, &state.data));
}

#[test]
fn key_replays_on_anonymized_data() {
    let b = bench(0);
    let state = b.state();
    let (schema, data, map) = anonymize(&state.schema, &state.data, 11);
    let renamed: Vec<Action> = b.key.action_list().iter().map(|a| map.action(a)).collect();
    let run = apply_script(&State::new(schema, data), &renamed);
    assert!(run.error.is_none(), "{:?}", run.error);
    let task = map.task(b.task(COMMUNITY_TASK).unwrap());
    let graph = build_graph(&run.state.schema, &run.state.data, BuildMode::Row2nodeEdge).unwrap().graph;
    assert!(class_labels(&graph, &task).is_ok());
    let restored: Vec<Action> = renamed.iter().map(|a| map.inverse().action(a)).collect();
    assert!(score_against_key(&restored, &b.key).iter().all(|r| r.fraction() == 1.0));
}

#[test]
fn key_against_itself_and_nothing() {
    let b = bench(0);
    let full = score_against_key(&b.key.action_list(), &b.key);
    assert_eq!(full.iter().map(|r| r.challenge).collect::<Vec<_>>(), [Challenge::C1, Challenge::C2, Challenge::C3]);
    assert!(full.iter().all(|r| r.matched == r.expected && r.fraction() == 1.0));
    assert!(score_against_key(&[], &b.key).iter().all(|r| r.matched == 0 && r.fraction() == 0.0));
    let text: Vec<String> = full.iter().map(ToString::to_string).collect();
    assert_eq!(text, ["C1: 1/1", "C2: 2/2", "C3: 1/1"]);
}

#[test]
fn partial_recovery_with_other_names() {
    let script = crate::planner::parse_selection(crate::planner::COT_EXAMPLE).unwrap().actions;
    // Author explode, Publisher split, Keyword dummy.
    let key = AnswerKey {
        actions: [0, 2, 3].map(|i| KeyAction { challenge: Challenge::C2, action: script[i].clone() }).to_vec(),
        roles: BTreeMap::new(),
        metapaths: vec![],
        better_task: None,
        worse_task: None,
    };
    let mut explode = script[0].clone();
    explode.parameters.insert("new_table_name".into(), "Authorship".into());
    explode.parameters.insert("new_col_name".into(), "Person".into());
    let mut dummy = script[3].clone();
    dummy.parameters.insert("new_table_name".into(), "Kw".into());
    let got = score_against_key(&[explode, script[1].clone(), dummy], &key);
    assert_eq!(got, vec![Recovery { challenge: Challenge::C2, matched: 2, expected: 3 }]);
    assert_eq!(got[0].to_string(), "C2: 2/3");
}

#[test]
fn naming_does_not_hide_a_different_effect() {
    let b = bench(0);
    let mut wrong = b.key.action_list();
    // Venue dummy made from another column.
    wrong[2].parameters.insert("orig_col_name".into(), "Session".into());
    let got = score_against_key(&wrong, &b.key);
    let c2 = got.iter().find(|r| r.challenge == Challenge::C2).unwrap();
    assert_eq!((c2.matched, c2.expected), (1, 2));
}
