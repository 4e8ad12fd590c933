use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use awareplan::grounding::pddl::{emit_domain, emit_problem};
use awareplan::llm::{LlmConfig, Mode};
use awareplan::pipeline::{
    exit, ground_stage, load_agenda, load_domain, load_plan, load_problem, load_scene, plan_stage, run_pipeline,
    simulate_stage, to_json_line, validate_inputs, write_artifact, ArtifactNames, PipelineConfig, PipelineError,
    PipelineSummary,
};
use awareplan::planner::{SearchConfig, StrategyRegistry};

#[derive(Parser)]
#[command(name = "awareplan", version, about = "Human-aware task planning over layered scene graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check scene, knowledge and agenda files and list every violation.
    Validate {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        knowledge: Option<PathBuf>,
        #[arg(long = "agenda")]
        agendas: Vec<PathBuf>,
    },
    /// Predict each human's goal distribution and print the report.
    Predict(StageArgs),
    /// Write the joint domain and problem PDDL plus the prediction report.
    Ground(StageArgs),
    /// Solve a PDDL domain/problem pair.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[command(flatten)]
        search: SearchArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a plan against scripted human agendas.
    Simulate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long = "agenda")]
        agendas: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every stage and write all artifacts.
    Pipeline {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long = "agenda")]
        agendas: Vec<PathBuf>,
        #[command(flatten)]
        search: SearchArgs,
    },
}

#[derive(Args, Clone)]
struct StageArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    knowledge: PathBuf,
    #[arg(long)]
    task: Option<PathBuf>,
    /// Predictor backend: heuristic or llm.
    #[arg(long, default_value = "heuristic")]
    backend: String,
    /// Element extractor: passthrough or llm.
    #[arg(long, default_value = "passthrough")]
    extractor: String,
    #[arg(long = "llm-mode")]
    llm_mode: Option<Mode>,
    /// JSON gateway configuration; LLM_* environment variables override it.
    #[arg(long = "llm-config")]
    llm_config: Option<PathBuf>,
    /// Directory of recorded replies.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Recency discount of the heuristic backend.
    #[arg(long, default_value_t = 0.5)]
    gamma: f64,
    #[arg(long = "max-candidates", default_value_t = 5)]
    max_candidates: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct SearchArgs {
    /// uniform_cost (ucs), astar_goalcount (astar) or gbfs_hadd (gbfs).
    #[arg(long, default_value = "ucs")]
    strategy: String,
    /// Tie-break seed; 0 keeps the natural successor order.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-expansions", default_value_t = 1_000_000)]
    max_expansions: u64,
    /// Record planner runtime in the plan file.
    #[arg(long)]
    timings: bool,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            strategy: self.strategy.clone(),
            max_expansions: self.max_expansions,
            seed: self.seed,
        }
    }
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut llm = LlmConfig::load(self.llm_config.as_deref())?;
        if let Some(mode) = self.llm_mode {
            llm.mode = mode;
        }
        if let Some(dir) = &self.fixtures {
            llm.fixtures_path = dir.clone();
        }
        let out = self.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let mut cfg = PipelineConfig::new(&self.scene, &self.knowledge, out);
        cfg.task = self.task.clone();
        cfg.backend = self.backend.clone();
        cfg.extractor = self.extractor.clone();
        cfg.llm = llm;
        cfg.gamma = self.gamma;
        cfg.max_candidates = self.max_candidates;
        Ok(cfg)
    }
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<(), PipelineError> {
    match out {
        Some(dir) => {
            let path = write_artifact(dir, file, text)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn print_summary(s: &PipelineSummary) {
    println!("{:<10} result", "stage");
    for h in &s.report.humans {
        println!(
            "{:<10} {}: {} (p = {:.6}, {} candidates{})",
            "predict",
            h.human_id,
            h.selected.canonical(),
            h.selected.probability,
            h.distribution.candidates.len(),
            if h.synthesis.is_some() { ", synthesized elements" } else { "" }
        );
    }
    println!(
        "{:<10} {} steps, {} expansions, {}",
        "plan", s.plan.metadata.length, s.plan.metadata.expansions, s.plan.metadata.strategy
    );
    if let Some(d) = &s.disturbance {
        println!(
            "{:<10} {} steps, co-occupancy {}, item conflicts {}, faults {}",
            "simulate", d.steps, d.co_occupancy_steps, d.item_conflicts, d.faulted_steps
        );
    }
    for a in &s.artifacts {
        println!("{:<10} {}", "artifact", a.display());
    }
}

fn run(cli: Cli) -> Result<i32, PipelineError> {
    match cli.command {
        Command::Validate { scene, knowledge, agendas } => {
            let violations = validate_inputs(scene.as_deref(), knowledge.as_deref(), &agendas)?;
            for v in &violations {
                println!("{v}");
            }
            Ok(if violations.is_empty() { exit::OK } else { exit::VIOLATIONS })
        }
        Command::Predict(args) => {
            let cfg = args.config()?;
            let g = ground_stage(&cfg, &cfg.engines()?)?;
            let names = ArtifactNames::for_task(&g.name);
            emit(args.out.as_deref(), &names.prediction, &to_json_line(&g.report))?;
            Ok(exit::OK)
        }
        Command::Ground(args) => {
            let cfg = args.config()?;
            let g = ground_stage(&cfg, &cfg.engines()?)?;
            let names = ArtifactNames::for_task(&g.name);
            let out = args.out.as_deref();
            emit(out, &names.domain, &emit_domain(&g.domain))?;
            emit(out, &names.problem, &emit_problem(&g.problem))?;
            if out.is_some() {
                emit(out, &names.prediction, &to_json_line(&g.report))?;
            }
            Ok(exit::OK)
        }
        Command::Plan { domain, problem, search, out } => {
            let d = load_domain(&domain)?;
            let p = load_problem(&problem)?;
            let file = plan_stage(&d, &p, &StrategyRegistry::with_defaults(), &search.config(), search.timings)?;
            let names = ArtifactNames::for_task(&p.name);
            match out.as_deref() {
                Some(dir) => {
                    emit(Some(dir), &names.plan_json, &file.to_json())?;
                    emit(Some(dir), &names.plan_text, &file.plan().to_classical())?;
                }
                None => print!("{}", file.plan().to_classical()),
            }
            Ok(exit::OK)
        }
        Command::Simulate { domain, scene, plan, agendas, out } => {
            let d = load_domain(&domain)?;
            let seq = load_scene(&scene)?;
            let initial = seq.latest().map_err(|e| PipelineError::Usage(e.to_string()))?;
            let plan_file = load_plan(&plan)?;
            let agendas = agendas.iter().map(|p| load_agenda(p)).collect::<Result<Vec<_>, _>>()?;
            let (trace, report) = simulate_stage(&d, initial, &plan_file, &agendas)?;
            let stem = plan
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".plan.json"))
                .unwrap_or("simulation");
            let names = ArtifactNames::for_task(stem);
            if let Some(dir) = out.as_deref() {
                emit(Some(dir), &names.trace, &trace.to_jsonl())?;
            }
            emit(out.as_deref(), &names.disturbance, &to_json_line(&report))?;
            Ok(exit::OK)
        }
        Command::Pipeline { stage, agendas, search } => {
            let mut cfg = stage.config()?;
            cfg.agendas = agendas;
            cfg.strategy = search.strategy;
            cfg.seed = search.seed;
            cfg.max_expansions = search.max_expansions;
            cfg.timings = search.timings;
            let summary = run_pipeline(&cfg)?;
            print_summary(&summary);
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
