//! File-level orchestration: loading inputs, running the stages in order and
//! writing every artifact under one output directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounding::pddl::{emit_domain, emit_problem, parse_domain, parse_problem};
use crate::grounding::{transform, DomainSpec, GroundingError, ProblemSpec, Stage, TransformError, TransformFailure, TransformOptions, TransformReport};
use crate::knowledge::{ExtractError, ExtractorRegistry, KnowledgeBase};
use crate::llm::{LlmConfig, LlmError, LlmGateway};
use crate::logic::Literal;
use crate::planner::{ground_task, plan, validate_plan, PlanError, PlanFile, SearchConfig, StrategyRegistry, Verdict, DEFAULT_ACTION_CAP};
use crate::predictor::{BackendRegistry, PredictError, DEFAULT_MAX_CANDIDATES};
use crate::scene_graph::{validate_hierarchy, SceneGraph, SnapshotSequence};
use crate::simulator::{disturbance_metrics, Agenda, DisturbanceReport, SimError, Simulator, Trace};

pub mod exit {
    pub const OK: i32 = 0;
    pub const VIOLATIONS: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const UNSOLVABLE: i32 = 3;
    pub const PREDICTION: i32 = 4;
    pub const GATEWAY: i32 = 5;
    pub const OTHER: i32 = 6;
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("returned plan failed validation: {0:?}")]
    InvalidPlan(Verdict),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Gateway(#[from] LlmError),
    #[error("cannot write {path}: {message}")]
    Write { path: PathBuf, message: String },
}

impl PipelineError {
    fn input(path: &Path, message: impl ToString) -> Self {
        PipelineError::Input {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input { .. } | PipelineError::Usage(_) => exit::INPUT,
            PipelineError::Gateway(_) => exit::GATEWAY,
            PipelineError::Plan(PlanError::Unsolvable(_)) => exit::UNSOLVABLE,
            PipelineError::Plan(PlanError::UnknownStrategy(_) | PlanError::InvalidConfig(_)) => exit::INPUT,
            PipelineError::Simulation(SimError::Grounding(_) | SimError::EmptyTrace) => exit::OTHER,
            PipelineError::Simulation(_) => exit::INPUT,
            PipelineError::Transform(e) => match &e.failure {
                TransformFailure::Predict(PredictError::Gateway(_)) | TransformFailure::Extract(ExtractError::Gateway(_)) => {
                    exit::GATEWAY
                }
                TransformFailure::Predict(PredictError::UnknownBackend(_))
                | TransformFailure::Extract(ExtractError::UnknownExtractor(_)) => exit::INPUT,
                TransformFailure::Predict(_) => exit::PREDICTION,
                TransformFailure::Knowledge(_) | TransformFailure::Scene(_) => exit::INPUT,
                TransformFailure::Grounding(GroundingError::IllTypedGoal { .. }) if e.stage == Stage::RobotGoal => exit::INPUT,
                _ => exit::OTHER,
            },
            _ => exit::OTHER,
        }
    }
}

/// The robot's own task: the literals it must reach and an optional
/// problem name used for the problem and artifact names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    #[serde(default = "default_task_name")]
    pub name: String,
    pub goal: BTreeSet<Literal>,
}

fn default_task_name() -> String {
    "task".into()
}

pub fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::input(path, e))
}

pub fn load_knowledge(path: &Path) -> Result<KnowledgeBase, PipelineError> {
    KnowledgeBase::from_json(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn load_scene(path: &Path) -> Result<SnapshotSequence, PipelineError> {
    SnapshotSequence::from_json(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn load_task(path: &Path) -> Result<TaskFile, PipelineError> {
    let task: TaskFile = serde_json::from_str(&read_text(path)?).map_err(|e| PipelineError::input(path, e))?;
    if !crate::grounding::is_identifier(&task.name) {
        return Err(PipelineError::input(path, format!("task name `{}` is not a PDDL identifier", task.name)));
    }
    Ok(task)
}

pub fn load_agenda(path: &Path) -> Result<Agenda, PipelineError> {
    Agenda::from_json(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn load_domain(path: &Path) -> Result<DomainSpec, PipelineError> {
    parse_domain(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn load_problem(path: &Path) -> Result<ProblemSpec, PipelineError> {
    parse_problem(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

pub fn load_plan(path: &Path) -> Result<PlanFile, PipelineError> {
    PlanFile::from_json(&read_text(path)?).map_err(|e| PipelineError::input(path, e))
}

/// Every problem found in the scene, knowledge and agenda files. Unreadable
/// or unparsable files are errors; broken invariants are listed.
pub fn validate_inputs(
    scene: Option<&Path>,
    knowledge: Option<&Path>,
    agendas: &[PathBuf],
) -> Result<Vec<String>, PipelineError> {
    let mut out = Vec::new();
    let mut latest: Option<SceneGraph> = None;
    if let Some(path) = scene {
        let value: serde_json::Value =
            serde_json::from_str(&read_text(path)?).map_err(|e| PipelineError::input(path, e))?;
        let docs = match value {
            serde_json::Value::Array(v) => v,
            other => vec![other],
        };
        let mut graphs = Vec::new();
        for d in docs {
            let sg: SceneGraph = serde_json::from_value(d).map_err(|e| PipelineError::input(path, e))?;
            for v in validate_hierarchy(&sg) {
                out.push(format!("{}: t={}: {v}", path.display(), sg.timestep));
            }
            graphs.push(sg);
        }
        if out.is_empty() {
            match SnapshotSequence::new(graphs) {
                Ok(seq) => latest = seq.latest().ok().cloned(),
                Err(e) => out.push(format!("{}: {e}", path.display())),
            }
        }
    }
    let mut domain = None;
    if let Some(path) = knowledge {
        match KnowledgeBase::from_json(&read_text(path)?) {
            Ok(kb) => domain = kb.structured.map(|e| DomainSpec::new(kb.domain, e)),
            Err(e) => out.push(format!("{}: {e}", path.display())),
        }
    }
    for path in agendas {
        let agenda = match Agenda::from_json(&read_text(path)?) {
            Ok(a) => a,
            Err(e) => {
                out.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        if let (Some(sg), Some(d)) = (&latest, &domain) {
            if let Err(e) = agenda.validate(sg, d) {
                out.push(format!("{}: {e}", path.display()));
            }
        }
    }
    Ok(out)
}

/// Registries of extractors, predictor backends and search strategies. The
/// LLM gateway is only built when one of the selected components needs it.
pub struct Engines {
    pub extractors: ExtractorRegistry,
    pub backends: BackendRegistry,
    pub strategies: StrategyRegistry,
}

impl Engines {
    pub fn new(gamma: f64, gateway: Option<Arc<LlmGateway>>) -> Result<Self, PipelineError> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(PipelineError::Usage(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Engines {
            extractors: ExtractorRegistry::with_defaults(gateway.clone()),
            backends: BackendRegistry::with_defaults(gamma, gateway),
            strategies: StrategyRegistry::with_defaults(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub scene: PathBuf,
    pub knowledge: PathBuf,
    pub task: Option<PathBuf>,
    pub agendas: Vec<PathBuf>,
    pub backend: String,
    pub extractor: String,
    pub strategy: String,
    pub llm: LlmConfig,
    pub out: PathBuf,
    pub gamma: f64,
    pub max_candidates: usize,
    pub seed: u64,
    pub max_expansions: u64,
    pub timings: bool,
}

impl PipelineConfig {
    pub fn new(scene: impl Into<PathBuf>, knowledge: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            scene: scene.into(),
            knowledge: knowledge.into(),
            task: None,
            agendas: Vec::new(),
            backend: "heuristic".into(),
            extractor: "passthrough".into(),
            strategy: "ucs".into(),
            llm: LlmConfig::default(),
            out: out.into(),
            gamma: 0.5,
            max_candidates: DEFAULT_MAX_CANDIDATES,
            seed: 0,
            max_expansions: SearchConfig::default().max_expansions,
            timings: false,
        }
    }

    pub fn needs_llm(&self) -> bool {
        self.backend == "llm" || self.extractor == "llm"
    }

    pub fn engines(&self) -> Result<Engines, PipelineError> {
        let gateway = if self.needs_llm() {
            Some(Arc::new(LlmGateway::from_config(&self.llm)?))
        } else {
            None
        };
        Engines::new(self.gamma, gateway)
    }

    fn search(&self) -> SearchConfig {
        SearchConfig {
            strategy: self.strategy.clone(),
            max_expansions: self.max_expansions,
            seed: self.seed,
        }
    }
}

pub struct Grounded {
    pub name: String,
    pub domain: DomainSpec,
    pub problem: ProblemSpec,
    pub report: TransformReport,
    pub scene: SnapshotSequence,
}

/// Extraction, prediction and problem construction.
pub fn ground_stage(cfg: &PipelineConfig, engines: &Engines) -> Result<Grounded, PipelineError> {
    let kb = load_knowledge(&cfg.knowledge)?;
    let seq = load_scene(&cfg.scene)?;
    let task = match &cfg.task {
        Some(p) => load_task(p)?,
        None => TaskFile {
            name: default_task_name(),
            goal: BTreeSet::new(),
        },
    };
    let extractor = engines
        .extractors
        .get(&cfg.extractor)
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let backend = engines
        .backends
        .get(&cfg.backend)
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let options = TransformOptions {
        problem_name: task.name.clone(),
        robot_goal: task.goal,
        max_candidates: cfg.max_candidates,
    };
    let (domain, problem, report) = transform(&kb, &seq, extractor, backend, &options)?;
    Ok(Grounded {
        name: task.name,
        domain,
        problem,
        report,
        scene: seq,
    })
}

/// Searches and checks the returned plan with the independent validator.
pub fn plan_stage(
    domain: &DomainSpec,
    problem: &ProblemSpec,
    strategies: &StrategyRegistry,
    search: &SearchConfig,
    timings: bool,
) -> Result<PlanFile, PipelineError> {
    let start = Instant::now();
    let strategy = strategies.get(&search.strategy)?;
    let task = ground_task(domain, problem, DEFAULT_ACTION_CAP)?;
    let outcome = plan(&task, strategy, search)?;
    let runtime = timings.then(|| start.elapsed().as_millis() as u64);
    match validate_plan(&task, &outcome.plan)? {
        Verdict::Valid => Ok(PlanFile::new(&outcome, runtime)),
        v => Err(PipelineError::InvalidPlan(v)),
    }
}

pub fn simulate_stage(
    domain: &DomainSpec,
    scene: &SceneGraph,
    plan: &PlanFile,
    agendas: &[Agenda],
) -> Result<(Trace, DisturbanceReport), PipelineError> {
    let sim = Simulator::new(domain, scene)?;
    let trace = sim.run(&plan.plan(), agendas)?;
    let report = disturbance_metrics(&trace);
    Ok((trace, report))
}

/// Output file names for a task called `name`.
pub struct ArtifactNames {
    pub domain: String,
    pub problem: String,
    pub prediction: String,
    pub plan_json: String,
    pub plan_text: String,
    pub trace: String,
    pub disturbance: String,
}

impl ArtifactNames {
    pub fn for_task(name: &str) -> Self {
        ArtifactNames {
            domain: format!("{name}.domain.pddl"),
            problem: format!("{name}.problem.pddl"),
            prediction: format!("{name}.prediction.json"),
            plan_json: format!("{name}.plan.json"),
            plan_text: format!("{name}.plan"),
            trace: format!("{name}.trace.jsonl"),
            disturbance: format!("{name}.disturbance.json"),
        }
    }
}

pub fn write_artifact(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, PipelineError> {
    let path = dir.join(file);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|e| PipelineError::Write {
            path: path.clone(),
            message: e.to_string(),
        })?;
    Ok(path)
}

pub fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub name: String,
    pub report: TransformReport,
    pub plan: PlanFile,
    pub disturbance: Option<DisturbanceReport>,
    pub artifacts: Vec<PathBuf>,
}

/// All stages end to end. Artifacts of completed stages stay on disk when
/// a later stage fails.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineSummary, PipelineError> {
    run_with(cfg, &cfg.engines()?)
}

pub fn run_with(cfg: &PipelineConfig, engines: &Engines) -> Result<PipelineSummary, PipelineError> {
    let agendas = cfg.agendas.iter().map(|p| load_agenda(p)).collect::<Result<Vec<_>, _>>()?;
    let g = ground_stage(cfg, engines)?;
    let names = ArtifactNames::for_task(&g.name);
    let mut artifacts = vec![
        write_artifact(&cfg.out, &names.domain, &emit_domain(&g.domain))?,
        write_artifact(&cfg.out, &names.problem, &emit_problem(&g.problem))?,
        write_artifact(&cfg.out, &names.prediction, &to_json_line(&g.report))?,
    ];
    let plan_file = plan_stage(&g.domain, &g.problem, &engines.strategies, &cfg.search(), cfg.timings)?;
    artifacts.push(write_artifact(&cfg.out, &names.plan_json, &plan_file.to_json())?);
    artifacts.push(write_artifact(&cfg.out, &names.plan_text, &plan_file.plan().to_classical())?);
    let disturbance = if agendas.is_empty() {
        None
    } else {
        let scene = g.scene.latest().map_err(|e| PipelineError::input(&cfg.scene, e))?;
        let (trace, report) = simulate_stage(&g.domain, scene, &plan_file, &agendas)?;
        artifacts.push(write_artifact(&cfg.out, &names.trace, &trace.to_jsonl())?);
        artifacts.push(write_artifact(&cfg.out, &names.disturbance, &to_json_line(&report))?);
        Some(report)
    };
    Ok(PipelineSummary {
        name: g.name,
        report: g.report,
        plan: plan_file,
        disturbance,
        artifacts,
    })
}
