//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so every line is printed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use autog_core::actions::{apply_action, Action, ActionKind, State};
use autog_core::fixtures::load_fixture;
use autog_core::graph::{classify_tables, graph_summary, Role};
use autog_core::oracle::{
    adjusted_homophily, class_labels, default_basket, kendall_tau_distance, metapath_project, rank_candidates,
    score_candidate, Candidate,
};
use autog_core::planner::{
    parse_selection, run_autog_a, run_autog_s, OracleConfig, PlannerConfig, PromptContext, ReplayClient, ScriptedClient,
};
use autog_core::schema::{parse_schema, serialize_schema, validate_schema};
use autog_core::synth::random::{edge_fixture, random_action, random_schema, random_state};
use autog_core::synth::{
    anonymize, generate, planted_metapath, score_against_key, BenchSpec, LabelModel, COMMUNITY_TASK, NOISE_TASK,
};
use autog_core::{build_graph, BuildMode, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn selection(actions: &[Action]) -> String {
    format!("<selection>{}</selection>", serde_json::to_string_pretty(actions).expect("actions serialize"))
}

fn schema_round_trip() -> Outcome {
    let mut rng = rng(1);
    let mut schemas: Vec<_> = (0..200).map(|_| random_schema(&mut rng)).collect();
    schemas.push(load_fixture("avs_min").map_err(|e| e.to_string())?.schema);
    for (i, s) in schemas.iter().enumerate() {
        let text = serialize_schema(s);
        let back = parse_schema(&text).map_err(|e| format!("schema {i}: {e}\n{text}"))?;
        ensure!(&back == s, "schema {i} changed on round trip\n{text}");
        ensure!(serialize_schema(&back) == text, "schema {i}: serialization is not idempotent");
    }
    Ok(format!("{} schemas, zero diffs", schemas.len()))
}

fn cot_replay() -> Outcome {
    let f = load_fixture("cot_paper_journal").map_err(|e| e.to_string())?;
    let state = f.state().map_err(|e| e.to_string())?;
    let client = ReplayClient::new(f.transcript.as_ref().ok_or("fixture has no transcript")?);
    let ctx = PromptContext::from_state(&state, autog_core::fixtures::COT_TASK, 0);
    let s = run_autog_s(&state, &ctx, &client, &PlannerConfig::default()).map_err(|e| e.error.to_string())?;
    let schema = &s.state.schema;
    let tables: BTreeSet<&str> = schema.tables.iter().map(|t| t.name.as_str()).collect();
    let dummies: BTreeSet<&str> = schema.derived.iter().map(|d| d.name.as_str()).collect();
    ensure!(tables == BTreeSet::from(["Paper", "Journal", "Publisher", "Author"]), "tables {tables:?}");
    ensure!(dummies == BTreeSet::from(["Keyword", "AuthorName"]), "dummies {dummies:?}");
    let (roles, _) = classify_tables(schema, BuildMode::Row2nodeEdge);
    ensure!(roles.iter().any(|r| r.table == "Author" && r.role == Role::Edge), "Author is not an edge table");
    ensure!(validate_schema(schema).is_empty(), "violations {:?}", validate_schema(schema));
    ensure!(Some(serialize_schema(schema)) == f.expected("final_schema.yaml"), "final schema differs");
    let graph = build_graph(schema, &s.state.data, BuildMode::Row2nodeEdge).map_err(|e| e.to_string())?.graph;
    let summary = graph_summary(&graph).render();
    ensure!(Some(summary.clone()) == f.expected("graph_summary.txt"), "graph summary differs:\n{summary}");
    Ok(format!("{} actions replayed, inventory matches", s.applied.len()))
}

fn edge_discrimination() -> Outcome {
    let mut rng = rng(3);
    for i in 0..50 {
        let s = edge_fixture(&mut rng);
        let role = |mode| {
            classify_tables(&s.schema, mode).0.into_iter().find(|r| r.table == "Link").map(|r| r.role)
        };
        ensure!(role(BuildMode::Row2nodeEdge) == Some(Role::Edge), "fixture {i}: not an edge under row2node_edge");
        ensure!(role(BuildMode::Row2node) == Some(Role::Node), "fixture {i}: not a node under row2node");
        let link = s.data.table("Link").ok_or("no Link payload")?;
        let a = link.column("a").ok_or("no a")?;
        let b = link.column("b").ok_or("no b")?;
        let both = a.iter().zip(b).filter(|(x, y)| !x.is_nan() && !y.is_nan()).count();
        let edge = build_graph(&s.schema, &s.data, BuildMode::Row2nodeEdge).map_err(|e| e.to_string())?.graph;
        let node = build_graph(&s.schema, &s.data, BuildMode::Row2node).map_err(|e| e.to_string())?.graph;
        let len = |g: &autog_core::HeteroGraph, r: &str| g.relation(r).map(|e| e.len());
        ensure!(len(&edge, "Link") == Some(both), "fixture {i}: {:?} edges, {both} complete rows", len(&edge, "Link"));
        ensure!(len(&edge, "Link_rev") == Some(both), "fixture {i}: reverse count");
        for (col, cells) in [("a", a), ("b", b)] {
            let non_null = cells.iter().filter(|v| !v.is_nan()).count();
            let got = len(&node, &format!("Link.{col}"));
            ensure!(got == Some(non_null), "fixture {i}: Link.{col} has {got:?} edges, {non_null} non-null cells");
        }
        ensure!(node.node_count("Link") == link.row_count, "fixture {i}: Link node count");
    }
    Ok("50 fixtures, counts conserved".into())
}

fn decode(state: &State, table: &str, col: &str) -> Option<Vec<Value>> {
    state.data.decoded(&state.schema).column(table, col).map(<[Value]>::to_vec)
}

fn multiset(vals: impl IntoIterator<Item = Value>) -> BTreeMap<Value, usize> {
    let mut m = BTreeMap::new();
    for v in vals {
        *m.entry(v).or_insert(0) += 1;
    }
    m
}

/// Kind-specific conservation laws for one applied action.
fn conserved(before: &State, action: &Action, after: &State) -> Result<(), String> {
    let p = |n: &str| action.str_param(n).unwrap_or_default();
    let kind = action.kind().map_err(|e| e.to_string())?;
    let touched: BTreeSet<(String, String)> = match kind {
        ActionKind::ConnectTwoColumns => {
            BTreeSet::from([(p("table_1_name"), p("table_1_col_name")), (p("table_2_name"), p("table_2_col_name"))])
        }
        _ => BTreeSet::new(),
    };
    for t in &before.schema.tables {
        let rows = before.data.table(&t.name).map_or(0, |d| d.row_count);
        ensure!(after.data.table(&t.name).map_or(0, |d| d.row_count) == rows, "{}: row count changed", t.name);
        for c in &t.columns {
            let (Some(old), Some(new)) = (decode(before, &t.name, &c.name), decode(after, &t.name, &c.name)) else { continue };
            if touched.contains(&(t.name.clone(), c.name.clone())) {
                ensure!(old.iter().zip(&new).all(|(o, n)| n.is_nan() || o.join_key() == n.join_key()), "{}.{} rewritten", t.name, c.name);
            } else {
                ensure!(old == new, "{}.{} changed", t.name, c.name);
            }
        }
    }
    match kind {
        ActionKind::ExplodeMultiCategoryColumn => {
            let cells = decode(before, &p("original_table"), &p("multi_cat_col")).ok_or("no exploded column")?;
            let flat: Vec<Value> = cells.iter().flat_map(|c| if let Value::List(xs) = c { xs.clone() } else { vec![] }).collect();
            let new = p("new_table_name");
            let rows = after.data.table(&new).map_or(0, |d| d.row_count);
            ensure!(rows == flat.len(), "explode: {rows} rows for {} elements", flat.len());
            let got = decode(after, &new, &p("new_col_name")).ok_or("no element column")?;
            ensure!(multiset(got) == multiset(flat), "explode: element multiset changed");
        }
        ActionKind::GenerateOrConnectDummyTable => {
            let (t, c) = (p("base_table_name"), p("orig_col_name"));
            ensure!(decode(before, &t, &c) == decode(after, &t, &c), "dummy: category values changed");
        }
        ActionKind::GenerateNonDummyTable => {
            let (base, new) = (p("base_table_name"), p("new_table_name"));
            let codes = after.data.column(&base, &new).ok_or("no code column")?;
            let cols = action.list_param("cols").unwrap_or_default();
            let orig: Vec<Vec<Value>> = cols.iter().map(|c| decode(before, &base, c).unwrap_or_default()).collect();
            let rows = (0..codes.len()).map(|r| orig.iter().map(|c| c[r].clone()).collect::<Vec<_>>());
            let distinct: BTreeSet<Vec<Value>> = rows.collect();
            ensure!(after.data.table(&new).map(|d| d.row_count) == Some(distinct.len()), "non-dummy: not deduplicated");
            for (c, vals) in cols.iter().zip(&orig) {
                let attr = decode(after, &new, c).ok_or("no attribute")?;
                let back: Vec<Value> = codes.iter().map(|k| k.as_i64().map_or(Value::Null, |k| attr[k as usize].clone())).collect();
                ensure!(&back == vals, "non-dummy: {c} not reconstructible");
            }
        }
        _ => {}
    }
    Ok(())
}

fn action_conservation() -> Outcome {
    let mut rng = rng(4);
    let (mut applied, mut rejected, mut attempts) = (0usize, 0usize, 0usize);
    let mut kinds: BTreeMap<String, usize> = BTreeMap::new();
    while applied < 500 && attempts < 50_000 {
        let mut state = random_state(&mut rng);
        for _ in 0..8 {
            if applied == 500 {
                break;
            }
            attempts += 1;
            let action = random_action(&state, &mut rng);
            if action.kind() == Ok(ActionKind::None) {
                break;
            }
            let snapshot = state.clone();
            match apply_action(&state, &action) {
                Ok(out) => {
                    ensure!(state == snapshot, "apply mutated its input");
                    let v = validate_schema(&out.state.schema);
                    ensure!(v.is_empty(), "{} left violations {v:?}", action.action);
                    conserved(&state, &action, &out.state).map_err(|e| format!("{}: {e}\n{action:?}", action.action))?;
                    *kinds.entry(action.action.clone()).or_default() += 1;
                    applied += 1;
                    state = out.state;
                }
                Err(_) => rejected += 1,
            }
        }
    }
    ensure!(applied == 500, "only {applied} actions applied in {attempts} attempts");
    ensure!(kinds.len() == 6, "kinds exercised: {kinds:?}");
    Ok(format!("{applied} applied ({rejected} rejected) across {} kinds", kinds.len()))
}

fn homophily_diagnosis() -> Outcome {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for seed in 0..20 {
        let b = generate(&BenchSpec::default().with_seed(seed)).map_err(|e| e.to_string())?;
        let run = autog_core::apply_script(&b.state(), &b.key.action_list());
        ensure!(run.error.is_none(), "seed {seed}: key failed {:?}", run.error);
        let graph = build_graph(&run.state.schema, &run.state.data, BuildMode::Row2nodeEdge).map_err(|e| e.to_string())?.graph;
        let adj = metapath_project(&graph, "Paper", &planted_metapath()).map_err(|e| e.to_string())?;
        let h = |task: &str| -> Result<f64, String> {
            let (labels, _) = class_labels(&graph, b.task(task).ok_or("no task")?).map_err(|e| e.to_string())?;
            adjusted_homophily(&adj, &labels).map_err(|e| e.to_string())
        };
        let (field, flag) = (h(COMMUNITY_TASK)?, h(NOISE_TASK)?);
        ensure!(field >= 0.3, "seed {seed}: community homophily {field:.3}");
        ensure!(flag.abs() <= 0.1, "seed {seed}: noise homophily {flag:.3}");
        lo = lo.min(field);
        hi = hi.max(flag.abs());
    }
    Ok(format!("20 seeds, community >= {lo:.3}, |noise| <= {hi:.3}"))
}

fn oracle_fidelity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..10 {
        let b = generate(&BenchSpec::default().with_seed(seed)).map_err(|e| e.to_string())?;
        let task = b.task(COMMUNITY_TASK).ok_or("no community task")?;
        let basket = default_basket(task);
        let cands = b.reference_candidates().map_err(|e| e.to_string())?;
        let ranking = |budget: f64| -> Result<Vec<String>, String> {
            let mut reports = Vec::new();
            for (id, actions, state) in &cands {
                let graph = build_graph(&state.schema, &state.data, BuildMode::Row2nodeEdge).map_err(|e| e.to_string())?.graph;
                let c = Candidate { id: id.clone(), graph, action_count: actions.len() };
                reports.push(score_candidate(&c, task, &basket, budget).map_err(|e| e.to_string())?);
            }
            Ok(rank_candidates(&reports))
        };
        let (full, cheap) = (ranking(1.0)?, ranking(0.1)?);
        ensure!(full[0] == "planted", "seed {seed}: full-budget ranking {full:?}");
        let d = kendall_tau_distance(&full, &cheap).map_err(|e| e.to_string())?;
        ensure!(d == 0.0, "seed {seed}: distance {d} between {full:?} and {cheap:?}");
        worst = worst.max(d);
    }
    Ok(format!("10 seeds, planted first, max distance {worst}"))
}

fn autog_a_selection() -> Outcome {
    let pick = |spec: BenchSpec, task: &str| -> Result<(autog_core::planner::AutogA, usize), String> {
        let b = generate(&spec).map_err(|e| e.to_string())?;
        let state = b.state();
        let client = ScriptedClient::default()
            .with_seed(0, [autog_core::planner::NONE_SELECTION])
            .with_seed(1, [selection(&b.harmful).as_str()])
            .with_seed(2, [selection(&b.key.action_list()).as_str()]);
        let ctx = PromptContext::from_state(&state, "Predict the label of each paper.", 0);
        let oracle = OracleConfig::new(b.task(task).ok_or("no task")?.clone());
        let cfg = PlannerConfig::default();
        let run = || run_autog_a(&state, &ctx, &client, &cfg, 3, &oracle).map_err(|e| e.to_string());
        let a = run()?;
        ensure!(a == run()?, "second run differs");
        Ok((a, b.key.actions.len()))
    };
    let noise = BenchSpec { labels: LabelModel { noise_rate: 0.2, ..LabelModel::default() }, ..BenchSpec::default() };
    let (a, _) = pick(noise, NOISE_TASK)?;
    ensure!(a.winner().session.applied.is_empty(), "noise task picked {:?}", a.ranking);
    let (b, key_len) = pick(BenchSpec::default(), COMMUNITY_TASK)?;
    ensure!(b.winner().session.applied.len() == key_len, "community task picked {:?}", b.ranking);
    Ok(format!("noise -> {} (original), community -> {} (planted)", a.ranking[0], b.ranking[0]))
}

fn malformed(rng: &mut ChaCha8Rng, valid: &Action) -> String {
    let n = rng.gen_range(0..1_000_000);
    match rng.gen_range(0..7) {
        0 => format!("I would connect the tables {n}."),
        1 => format!("<selection>[{{'action': 'connect_two_columns', 'parameters': {{{n}</selection>"),
        2 => format!("<selection>{}</selection>", [json!({"n": n}), json!(n), json!(format!("s{n}"))][n % 3]),
        3 => format!("<selection>[{n}, \"x\"]</selection>"),
        4 => format!("<selection>[{{\"action\": \"drop_table_{n}\", \"parameters\": {{}}}}]</selection>"),
        5 => {
            let mut a = valid.clone();
            let keys: Vec<String> = a.parameters.keys().cloned().collect();
            a.parameters.shift_remove(&keys[n % keys.len()]);
            selection(&[valid.clone(), a])
        }
        _ => format!("<selection>[{{\"parameters\": {{\"col_name\": \"c{n}\"}}}}]</selection>"),
    }
}

fn threshold_and_closure() -> Outcome {
    let f = load_fixture("cot_paper_journal").map_err(|e| e.to_string())?;
    let state = f.state().map_err(|e| e.to_string())?;
    let ctx = PromptContext::from_state(&state, autog_core::fixtures::COT_TASK, 0);
    let toggle = |kind: ActionKind| Action::new(kind, [("base_table_name", json!("Journal")), ("col_name", json!("JournalID"))]);
    let turn = selection(&[toggle(ActionKind::RemovePrimaryKey), toggle(ActionKind::AddPrimaryKey), toggle(ActionKind::RemovePrimaryKey)]);
    let greedy = ScriptedClient::new(vec![turn.as_str(); 40]);
    let s = run_autog_s(&state, &ctx, &greedy, &PlannerConfig::default()).map_err(|e| e.error.to_string())?;
    ensure!(s.applied.len() == 10, "{} actions applied", s.applied.len());

    let mut rng = rng(8);
    let valid = toggle(ActionKind::RemovePrimaryKey);
    let codes = ["no-selection", "unparseable", "not-a-list", "bad-entry", "unknown-action", "missing-parameter"];
    let mut seen = BTreeSet::new();
    let mut texts = Vec::new();
    for i in 0..1000 {
        let text = malformed(&mut rng, &valid);
        match parse_selection(&text) {
            Ok(sel) => return Err(format!("case {i} accepted: {sel:?}\n{text}")),
            Err(e) => {
                ensure!(codes.contains(&e.code.as_str()), "case {i}: unstructured error {e}");
                seen.insert(e.code.clone());
            }
        }
        texts.push(text);
    }
    let cfg = PlannerConfig { max_turns: 5, reflect: false, ..PlannerConfig::default() };
    for chunk in texts.chunks(50) {
        let client = ScriptedClient::new(chunk.iter().map(String::as_str));
        let s = match run_autog_s(&state, &ctx, &client, &cfg) {
            Ok(s) => s.state,
            Err(e) => e.session.state,
        };
        ensure!(s == state, "a malformed selection changed the schema");
    }
    Ok(format!("10 applied under an endless client; 1000 malformed rejected with {} codes", seen.len()))
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let first = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, first.clone());
            out.push(p);
        }
    }
    out
}

fn kendall_truths() -> Outcome {
    let abc: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let d = |x: &[String], y: &[String]| kendall_tau_distance(x, y).map_err(|e| e.to_string());
    ensure!(d(&abc, &abc)? == 0.0, "identity");
    let rev: Vec<String> = abc.iter().rev().cloned().collect();
    ensure!(d(&abc, &rev)? == 1.0, "reversal");
    let acb: Vec<String> = ["a", "c", "b"].map(String::from).to_vec();
    ensure!((d(&abc, &acb)? - 1.0 / 3.0).abs() < 1e-12, "one swap of three");
    let mut checked = 0;
    for n in 2..=4 {
        let items: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let perms = permutations(&items);
        for x in &perms {
            for y in &perms {
                let dxy = d(x, y)?;
                ensure!((0.0..=1.0).contains(&dxy), "range");
                ensure!((dxy == 0.0) == (x == y), "identity of indiscernibles");
                ensure!(dxy == d(y, x)?, "symmetry");
                for z in &perms {
                    ensure!(d(x, z)? <= dxy + d(y, z)? + 1e-12, "triangle inequality");
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("unit truths hold; axioms over {checked} triples"))
}

fn anonymization_harness() -> Outcome {
    let b = generate(&BenchSpec::default()).map_err(|e| e.to_string())?;
    let state = b.state();
    let key = b.key.action_list();
    let render = |r: &[autog_core::synth::Recovery]| r.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ");
    let original = score_against_key(&key, &b.key);
    ensure!(original.iter().all(|r| r.fraction() == 1.0), "original replay: {}", render(&original));

    let (schema, data, map) = anonymize(&state.schema, &state.data, 17);
    let renamed: Vec<Action> = key.iter().map(|a| map.action(a)).collect();
    let run = autog_core::apply_script(&State::new(schema, data), &renamed);
    ensure!(run.error.is_none(), "key on anonymized data: {:?}", run.error);
    let restored: Vec<Action> = renamed.iter().map(|a| map.inverse().action(a)).collect();
    let anonymized = score_against_key(&restored, &b.key);
    ensure!(anonymized.iter().all(|r| r.fraction() == 1.0), "anonymized replay: {}", render(&anonymized));

    // A partial plan is reported, not judged.
    let partial = score_against_key(&key[..2], &b.key);
    Ok(format!("original [{}]; anonymized [{}]; partial plan [{}]", render(&original), render(&anonymized), render(&partial)))
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("schema round trip", Duration::from_secs(1), schema_round_trip),
        ("selection replay equivalence", Duration::from_secs(1), cot_replay),
        ("edge-table discrimination", Duration::from_secs(2), edge_discrimination),
        ("action conservation", Duration::from_secs(10), action_conservation),
        ("homophily diagnosis", Duration::from_secs(5), homophily_diagnosis),
        ("oracle ranking fidelity", Duration::from_secs(30), oracle_fidelity),
        ("multi-run selection", Duration::from_secs(30), autog_a_selection),
        ("threshold and closure", Duration::from_secs(10), threshold_and_closure),
        ("rank distance truths", Duration::from_secs(1), kendall_truths),
        ("anonymization harness", Duration::from_secs(60), anonymization_harness),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        let (verdict, detail) = match outcome {
            Ok(d) if took <= *limit => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took {took:.2?}, limit {limit:?}")),
            Err(e) => ("FAIL", e),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} {:>2} {name} ({took:.2?} of {limit:?}): {detail}", i + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
