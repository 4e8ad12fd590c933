//! Acceptance suite. Runs as its own binary so each criterion prints one
//! PASS/FAIL line regardless of output capture.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use awareplan::grounding::pddl::{emit_domain, emit_problem, parse_domain, parse_problem};
use awareplan::grounding::DomainSpec;
use awareplan::knowledge::KnowledgeBase;
use awareplan::logic::Atom;
use awareplan::pipeline::{ground_stage, plan_stage, simulate_stage, PipelineConfig};
use awareplan::planner::{
    ground_task, optimal_plan_bfs, plan, trajectory, validate_plan, PlanError, SearchConfig, StrategyRegistry,
    UniformCost, Verdict, DEFAULT_ACTION_CAP,
};
use awareplan::predictor::{renormalize, select_goal, HeuristicBackend, PredictionContext, PredictorBackend, RawCandidate};
use awareplan::random::{random_domain, random_fetch_instance, random_problem};
use awareplan::scene_graph::{build_history, SceneGraph, SemanticEdge, SnapshotSequence};
use awareplan::simulator::Agenda;

const FETCH_RUNTIME_LIMIT: Duration = Duration::from_secs(1);
const APARTMENT_RUNTIME_LIMIT: Duration = Duration::from_secs(5);
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;
const HISTORY_SAMPLES: usize = 1_000;
const PLANNER_INSTANCES: usize = 25;
const PLANNER_STATE_CAP: usize = 100_000;
const ROUND_TRIP_SPECS: usize = 100;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn awareplan(args: &[&str]) -> Result<(std::process::Output, Duration), String> {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_awareplan"))
        .args(args)
        .env_remove("LLM_MODE")
        .env_remove("LLM_FIXTURES_PATH")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out, start.elapsed()))
}

fn pipeline_args(name: &str, out: &Path) -> Vec<String> {
    let p = |f: String| data(&f).to_string_lossy().into_owned();
    vec![
        "pipeline".into(),
        "--scene".into(),
        p(format!("{name}.scene.json")),
        "--knowledge".into(),
        p("household.kb.json".into()),
        "--task".into(),
        p(format!("{name}.task.json")),
        "--out".into(),
        out.to_string_lossy().into_owned(),
    ]
}

fn run_cli(args: &[String]) -> Result<Duration, String> {
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    let (out, elapsed) = awareplan(&argv)?;
    ensure(out.status.code() == Some(0), || {
        format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr).trim())
    })?;
    Ok(elapsed)
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn fetch_example() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let elapsed = run_cli(&pipeline_args("fetch", dir.path()))?;
    let plan = read(&dir.path().join("fetch.plan"))?;
    let shape: Vec<&str> = plan
        .lines()
        .map(|l| l.trim_start_matches('(').split_whitespace().next().unwrap_or(""))
        .collect();
    ensure(shape == ["goto", "pick", "goto", "drop"], || format!("plan shape {shape:?}"))?;
    ensure(elapsed < FETCH_RUNTIME_LIMIT, || format!("runtime {elapsed:?}"))?;
    Ok(format!("4-step plan goto/pick/goto/drop in {} ms", elapsed.as_millis()))
}

fn apartment_end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let elapsed = run_cli(&pipeline_args("apartment", dir.path()))?;
    ensure(elapsed < APARTMENT_RUNTIME_LIMIT, || format!("runtime {elapsed:?}"))?;

    let domain_text = read(&dir.path().join("apartment.domain.pddl"))?;
    let problem_text = read(&dir.path().join("apartment.problem.pddl"))?;
    let domain = parse_domain(&domain_text).map_err(|e| e.to_string())?;
    let problem = parse_problem(&problem_text).map_err(|e| e.to_string())?;

    let mut cfg = PipelineConfig::new(data("apartment.scene.json"), data("household.kb.json"), dir.path());
    cfg.task = Some(data("apartment.task.json"));
    let g = ground_stage(&cfg, &cfg.engines().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(domain == g.domain, || "parsed domain differs from the grounded one".into())?;
    ensure(problem == g.problem, || "parsed problem differs from the grounded one".into())?;
    ensure(emit_domain(&domain) == domain_text && emit_problem(&problem) == problem_text, || {
        "re-emission differs from the written files".into()
    })?;

    let file = awareplan::planner::PlanFile::from_json(&read(&dir.path().join("apartment.plan.json"))?)
        .map_err(|e| e.to_string())?;
    let task = ground_task(&domain, &problem, DEFAULT_ACTION_CAP).map_err(|e| e.to_string())?;
    let (states, verdict) = trajectory(&task, &file.plan()).map_err(|e| e.to_string())?;
    ensure(verdict == Verdict::Valid, || format!("verdict {verdict:?}"))?;
    let last = states.last().expect("trajectory has the initial state");
    let humans: Vec<&String> = problem.goal.humans.keys().collect();
    ensure(humans.len() == 2, || format!("{} human partitions", humans.len()))?;
    for (h, goal) in &problem.goal.humans {
        for lit in goal {
            ensure(last.contains(&lit.atom) != lit.negated, || format!("partition of {h} unmet at {lit}"))?;
        }
    }
    Ok(format!(
        "{} rooms, {} items, 2 human partitions satisfied by a {}-step plan in {} ms",
        g.scene.latest().map(|s| s.rooms.len()).unwrap_or(0),
        g.scene.latest().map(|s| s.items.len()).unwrap_or(0),
        file.steps.len(),
        elapsed.as_millis()
    ))
}

/// A random non-empty interaction history of `h1` over up to 12 snapshots.
fn history_scene(rng: &mut ChaCha8Rng) -> SnapshotSequence {
    let categories = ["stove", "tv", "sink", "sofa", "fridge", "mug"];
    let rooms = ["kitchen", "living", "hall"];
    let n_items = rng.gen_range(1..=8);
    let items: Vec<(String, &str, &str)> = (0..n_items)
        .map(|k| {
            let c = categories[rng.gen_range(0..categories.len())];
            (format!("{c}{k}"), c, rooms[rng.gen_range(0..rooms.len())])
        })
        .collect();
    let horizon = rng.gen_range(1..=12);
    let forced = rng.gen_range(1..=horizon);
    let mut snapshots = Vec::new();
    for t in 1..=horizon {
        let mut sg: SceneGraph = serde_json::from_value(serde_json::json!({
            "graph_id": "h", "timestep": t,
            "floors": [{"id": "f"}],
            "rooms": [{"id": "kitchen", "parent_floor": "f", "neighbors": ["hall"]},
                      {"id": "living", "parent_floor": "f", "neighbors": ["hall"]},
                      {"id": "hall", "parent_floor": "f", "neighbors": ["kitchen", "living"]}],
            "items": items.iter().map(|(id, c, r)| serde_json::json!({"id": id, "parent_room": r, "category": c})).collect::<Vec<_>>(),
            "agents": [{"id": "r1", "kind": "robot", "parent_room": "hall"},
                       {"id": "h1", "kind": "human", "parent_room": "hall"}]
        }))
        .expect("generated snapshot");
        let lo = usize::from(t == forced);
        for _ in 0..rng.gen_range(lo..=2) {
            let (id, _, _) = items.choose(rng).expect("at least one item");
            sg.edges.push(SemanticEdge::new("h1", id, "near", t));
        }
        snapshots.push(sg);
    }
    SnapshotSequence::new(snapshots).expect("generated sequence validates")
}

fn distribution_invariants() -> Outcome {
    let kb = KnowledgeBase::from_json(&read(&data("household.kb.json"))?).map_err(|e| e.to_string())?;
    let domain = kb.structured.clone().expect("structured household domain");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..HISTORY_SAMPLES {
        let seq = history_scene(&mut rng);
        let scene = seq.latest().map_err(|e| e.to_string())?;
        let history = build_history(&seq, "h1").map_err(|e| e.to_string())?;
        let backend = HeuristicBackend::new(rng.gen_range(0.05..=1.0));
        let ctx = PredictionContext {
            human: scene.agent("h1").expect("h1"),
            history: &history,
            scene,
            domain: &domain,
            templates: &kb.goal_templates,
            max_candidates: rng.gen_range(1..=6),
        };
        let dist = match backend.predict(&ctx) {
            Ok(d) => d,
            Err(e) => return Err(format!("history {k}: {e}")),
        };
        worst = worst.max((dist.total() - 1.0).abs());
        ensure((dist.total() - 1.0).abs() <= PROBABILITY_SUM_TOLERANCE, || format!("history {k}: sum {}", dist.total()))?;
        let scale = 10f64.powf(rng.gen_range(-6.0..6.0));
        let raw = dist
            .candidates
            .iter()
            .map(|c| RawCandidate {
                goal: c.goal.clone(),
                weight: c.probability * scale,
                rationale: None,
            })
            .collect();
        let rescaled = renormalize("h1", raw).map_err(|e| format!("history {k}: {e}"))?;
        ensure(select_goal(&rescaled).canonical() == select_goal(&dist).canonical(), || {
            format!("history {k}: argmax changed under scale {scale}")
        })?;
    }
    Ok(format!("{HISTORY_SAMPLES} histories, max |sum - 1| = {worst:.1e}, argmax stable under rescaling"))
}

fn planner_optimality() -> Outcome {
    let registry = StrategyRegistry::with_defaults();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut solved, mut unsolvable, mut plans_checked, mut attempts) = (0, 0, 0, 0);
    while solved < PLANNER_INSTANCES {
        attempts += 1;
        ensure(attempts <= 20 * PLANNER_INSTANCES, || format!("only {solved} usable instances"))?;
        let (d, p) = random_fetch_instance(&mut rng);
        let task = ground_task(&d, &p, DEFAULT_ACTION_CAP).map_err(|e| e.to_string())?;
        let oracle = match optimal_plan_bfs(&task, PLANNER_STATE_CAP) {
            Ok(plan) => Some(plan),
            Err(PlanError::Unsolvable(_)) => None,
            Err(PlanError::OracleCapExceeded { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        let ucs = plan(&task, &UniformCost, &SearchConfig::default());
        match (&oracle, &ucs) {
            (Some(o), Ok(u)) => ensure(o.len() == u.plan.len(), || {
                format!("instance {attempts}: ucs {} vs bfs {}", u.plan.len(), o.len())
            })?,
            (None, Err(PlanError::Unsolvable(_))) => {
                unsolvable += 1;
                continue;
            }
            _ => return Err(format!("instance {attempts}: ucs and bfs disagree on solvability")),
        }
        for name in registry.names() {
            let out = plan(&task, registry.get(name).map_err(|e| e.to_string())?, &SearchConfig::default())
                .map_err(|e| format!("{name}: {e}"))?;
            let verdict = validate_plan(&task, &out.plan).map_err(|e| e.to_string())?;
            ensure(verdict == Verdict::Valid, || format!("{name} returned an invalid plan: {verdict:?}"))?;
            plans_checked += 1;
        }
        solved += 1;
    }
    Ok(format!(
        "{solved} solvable instances: ucs length = bfs length; {plans_checked}/{plans_checked} plans valid ({unsolvable} unsolvable agreed)"
    ))
}

fn parser_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..ROUND_TRIP_SPECS {
        let d = random_domain(&mut rng);
        let p = random_problem(&mut rng, &d);
        let (dt, pt) = (emit_domain(&d), emit_problem(&p));
        let d2 = parse_domain(&dt).map_err(|e| format!("pair {k}: {e}"))?;
        let p2 = parse_problem(&pt).map_err(|e| format!("pair {k}: {e}"))?;
        ensure(d2 == d && p2 == p, || format!("pair {k}: structure changed"))?;
        ensure(emit_domain(&d2) == dt && emit_problem(&p2) == pt, || format!("pair {k}: emit not a fixpoint"))?;
    }
    Ok(format!("{ROUND_TRIP_SPECS} domain/problem pairs"))
}

/// Drops `(not (human-active-in ?r))` from every action that requires
/// `(is-robot ?a)`.
fn strip_occupancy(d: &DomainSpec) -> DomainSpec {
    let mut out = d.clone();
    for a in out.elements.actions.values_mut() {
        if a.pre.iter().any(|l| !l.negated && l.atom.predicate == "is-robot") {
            a.pre.retain(|l| !(l.negated && l.atom.predicate == "human-active-in"));
        }
    }
    out
}

fn human_awareness_contrast() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::new(data("conflict.scene.json"), data("household.kb.json"), dir.path());
    cfg.task = Some(data("conflict.task.json"));
    let engines = cfg.engines().map_err(|e| e.to_string())?;
    let g = ground_stage(&cfg, &engines).map_err(|e| e.to_string())?;
    let agenda = Agenda::from_json(&read(&data("conflict.h1.agenda.json"))?).map_err(|e| e.to_string())?;
    let scene = g.scene.latest().map_err(|e| e.to_string())?;
    let search = SearchConfig::default();

    let aware = plan_stage(&g.domain, &g.problem, &engines.strategies, &search, false).map_err(|e| e.to_string())?;
    let (_, aware_report) = simulate_stage(&g.domain, scene, &aware, std::slice::from_ref(&agenda)).map_err(|e| e.to_string())?;

    let stripped = strip_occupancy(&g.domain);
    ensure(stripped != g.domain, || "no occupancy preconditions to strip".into())?;
    let naive = plan_stage(&stripped, &g.problem, &engines.strategies, &search, false).map_err(|e| e.to_string())?;
    let (_, naive_report) = simulate_stage(&stripped, scene, &naive, &[agenda]).map_err(|e| e.to_string())?;

    ensure(aware_report.co_occupancy_steps == 0, || {
        format!("aware plan co-occupancy {}", aware_report.co_occupancy_steps)
    })?;
    ensure(naive_report.co_occupancy_steps >= 1, || "stripped plan never shares a room".into())?;
    Ok(format!(
        "co-occupancy {} with occupancy preconditions ({} steps), {} without ({} steps)",
        aware_report.co_occupancy_steps,
        aware.steps.len(),
        naive_report.co_occupancy_steps,
        naive.steps.len()
    ))
}

fn hash_dir(dir: &Path) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        out.insert(name, hex::encode(Sha256::digest(&bytes)));
    }
    Ok(out)
}

fn replay_args(out: &Path) -> Vec<String> {
    let mut args = pipeline_args("plant", out);
    args.extend(
        [
            "--backend",
            "llm",
            "--extractor",
            "llm",
            "--llm-mode",
            "replay",
            "--fixtures",
            &data("fixtures/llm").to_string_lossy(),
        ]
        .map(String::from),
    );
    args
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    run_cli(&replay_args(a.path()))?;
    run_cli(&replay_args(b.path()))?;
    let (ha, hb) = (hash_dir(a.path())?, hash_dir(b.path())?);
    ensure(!ha.is_empty() && ha == hb, || format!("{ha:?} vs {hb:?}"))?;
    Ok(format!("{} artifacts with identical SHA-256 across two replay runs", ha.len()))
}

fn synthesis_path() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = PipelineConfig::new(data("plant.scene.json"), data("household.kb.json"), dir.path());
    cfg.task = Some(data("plant.task.json"));
    cfg.backend = "llm".into();
    cfg.llm.fixtures_path = data("fixtures/llm");
    let g = ground_stage(&cfg, &cfg.engines().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let kb = KnowledgeBase::from_json(&read(&data("household.kb.json"))?).map_err(|e| e.to_string())?;
    let before = kb.structured.expect("structured household domain");
    let human = &g.report.humans[0];
    let synthesis = human.synthesis.as_ref().ok_or("no synthesis was run")?;
    let new_predicates: BTreeSet<&str> = synthesis
        .predicates
        .iter()
        .map(|p| p.name.as_str())
        .filter(|n| !before.predicates.contains_key(*n))
        .collect();
    let new_actions: BTreeSet<&str> = synthesis
        .actions
        .iter()
        .map(|a| a.name.as_str())
        .filter(|n| !before.actions.contains_key(*n))
        .collect();
    ensure(!new_predicates.is_empty() && !new_actions.is_empty(), || "nothing new synthesized".into())?;
    g.domain.elements.validate().map_err(|e| format!("extended domain invalid: {e}"))?;
    let uncovered = human.distribution.candidates.iter().filter(|c| c.uncovered).count();
    ensure(uncovered == 0, || format!("{uncovered} candidates still uncovered"))?;
    let goal: Atom = "(watered plant1)".parse().map_err(|e| format!("{e}"))?;
    ensure(human.selected.goal.iter().any(|l| l.atom == goal), || "selected goal changed".into())?;
    Ok(format!(
        "added predicates {new_predicates:?} and actions {new_actions:?}; 0 of {} candidates uncovered",
        human.distribution.candidates.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("fetch example reproduction", fetch_example),
        ("end-to-end on the apartment", apartment_end_to_end),
        ("distribution invariants", distribution_invariants),
        ("planner optimality and soundness", planner_optimality),
        ("parser round-trip", parser_round_trip),
        ("human-awareness contrast", human_awareness_contrast),
        ("replay determinism", determinism),
        ("synthesis path", synthesis_path),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail})", k + 1);
            }
        }
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
