use std::path::{Path, PathBuf};

use awareplan::grounding::pddl::{parse_domain, parse_problem};
use awareplan::grounding::{transform, Role, TransformOptions};
use awareplan::knowledge::Passthrough;
use awareplan::pipeline::{exit, load_knowledge, load_scene, load_task, run_pipeline, PipelineConfig, PipelineError};
use awareplan::planner::{ground_task, validate_plan, PlanFile, Verdict, DEFAULT_ACTION_CAP};
use awareplan::predictor::HeuristicBackend;
use awareplan::simulator::Agenda;

fn data(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(file)
}

fn config(name: &str, out: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(data(&format!("{name}.scene.json")), data("household.kb.json"), out);
    cfg.task = Some(data(&format!("{name}.task.json")));
    cfg
}

#[test]
fn fetch_transform_has_robot_and_one_human_partition() {
    let kb = load_knowledge(&data("household.kb.json")).unwrap();
    let seq = load_scene(&data("fetch.scene.json")).unwrap();
    let task = load_task(&data("fetch.task.json")).unwrap();
    let options = TransformOptions {
        problem_name: task.name,
        robot_goal: task.goal,
        ..Default::default()
    };
    let (domain, problem, report) = transform(&kb, &seq, &Passthrough, &HeuristicBackend::default(), &options).unwrap();
    assert_eq!(problem.agents(&domain).collect::<Vec<_>>(), ["h1", "r1"]);
    let parts: Vec<(Role, &str, String)> = problem
        .goal
        .partitions()
        .map(|(r, a, g)| (r, a, g.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(" ")))
        .collect();
    assert_eq!(
        parts,
        [
            (Role::Robot, "r1", "(at x room_b)".to_string()),
            (Role::Human, "h1", "(resting h1 sofa1)".to_string())
        ]
    );
    assert_eq!(report.humans[0].history_events, 3);
}

#[test]
fn artifacts_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("apartment", dir.path());
    cfg.agendas = vec![data("apartment.h1.agenda.json"), data("apartment.h2.agenda.json")];
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.artifacts.len(), 7);
    let read = |f: &str| std::fs::read_to_string(dir.path().join(f)).unwrap();

    let domain = parse_domain(&read("apartment.domain.pddl")).unwrap();
    let problem = parse_problem(&read("apartment.problem.pddl")).unwrap();
    assert_eq!(problem.goal.partition_count(), 3);
    let plan = PlanFile::from_json(&read("apartment.plan.json")).unwrap();
    assert_eq!(plan, summary.plan);
    assert!(plan.metadata.runtime_ms.is_none());
    let task = ground_task(&domain, &problem, DEFAULT_ACTION_CAP).unwrap();
    assert_eq!(validate_plan(&task, &plan.plan()).unwrap(), Verdict::Valid);
    assert_eq!(read("apartment.plan"), plan.plan().to_classical());

    let report: serde_json::Value = serde_json::from_str(&read("apartment.prediction.json")).unwrap();
    assert_eq!(report["humans"].as_array().unwrap().len(), 2);
    let trace = read("apartment.trace.jsonl");
    let lines: Vec<serde_json::Value> = trace.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), summary.disturbance.unwrap().steps + 1);
    assert!(lines[0]["action"].is_null());
    let metrics: serde_json::Value = serde_json::from_str(&read("apartment.disturbance.json")).unwrap();
    assert_eq!(metrics["co_occupancy_steps"], 0);
}

#[test]
fn uncovered_goal_with_heuristic_backend() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&config("plant", dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), exit::PREDICTION);
    assert!(err.to_string().contains("watered"), "{err}");
}

#[test]
fn replay_miss_is_a_gateway_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("fetch", dir.path());
    cfg.backend = "llm".into();
    cfg.llm.fixtures_path = dir.path().join("empty");
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::GATEWAY, "{err}");
}

#[test]
fn input_and_search_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("fetch", dir.path());
    cfg.scene = data("missing.scene.json");
    assert!(matches!(run_pipeline(&cfg), Err(e @ PipelineError::Input { .. }) if e.exit_code() == exit::INPUT));

    let mut cfg = config("fetch", dir.path());
    cfg.strategy = "dfs".into();
    assert_eq!(run_pipeline(&cfg).unwrap_err().exit_code(), exit::INPUT);

    let task = dir.path().join("far.task.json");
    std::fs::write(&task, r#"{"name":"far","goal":["(at x hall)","(holding r1 x)"]}"#).unwrap();
    let mut cfg = config("fetch", dir.path());
    cfg.task = Some(task);
    let err = run_pipeline(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), exit::UNSOLVABLE, "{err}");
    assert!(dir.path().join("far.problem.pddl").exists());
    assert!(!dir.path().join("far.plan.json").exists());
}

#[test]
fn agenda_files_parse() {
    for f in ["apartment.h1.agenda.json", "apartment.h2.agenda.json", "conflict.h1.agenda.json"] {
        let a = Agenda::from_json(&std::fs::read_to_string(data(f)).unwrap()).unwrap();
        assert!(!a.script.is_empty());
    }
}
