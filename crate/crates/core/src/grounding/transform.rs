use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{held_items, DomainSpec, GroundingError, ProblemBuilder, ProblemSpec};
use crate::knowledge::{ElementExtractor, ExtractError, KnowledgeBase, KnowledgeError};
use crate::logic::Literal;
use crate::predictor::{
    select_goal, synthesize_missing_elements, GoalCandidate, GoalDistribution, PredictError, PredictionContext,
    PredictorBackend, Synthesis, DEFAULT_MAX_CANDIDATES,
};
use crate::scene_graph::{build_history, SceneError, SnapshotSequence};

/// Where in the transformation a failure happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Knowledge,
    Extract,
    AddRobot,
    ItemInit,
    AddHuman,
    History,
    Predict,
    Synthesize,
    AddGoal,
    RobotGoal,
    Finish,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Knowledge => "load knowledge",
            Stage::Extract => "extract domain elements",
            Stage::AddRobot => "add robot agent",
            Stage::ItemInit => "set item initial states",
            Stage::AddHuman => "add human agent",
            Stage::History => "build interaction history",
            Stage::Predict => "predict goals",
            Stage::Synthesize => "synthesize missing elements",
            Stage::AddGoal => "add human goal",
            Stage::RobotGoal => "add robot goal",
            Stage::Finish => "validate problem",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum TransformFailure {
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Predict(#[from] PredictError),
    #[error(transparent)]
    Grounding(#[from] GroundingError),
}

#[derive(Debug, Error)]
#[error("{stage}: {failure}")]
pub struct TransformError {
    pub stage: Stage,
    pub failure: TransformFailure,
}

fn at<E: Into<TransformFailure>>(stage: Stage) -> impl FnOnce(E) -> TransformError {
    move |e| TransformError {
        stage,
        failure: e.into(),
    }
}

#[derive(Debug, Clone)]
pub struct TransformOptions {
    pub problem_name: String,
    pub robot_goal: BTreeSet<Literal>,
    pub max_candidates: usize,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            problem_name: "task".into(),
            robot_goal: BTreeSet::new(),
            max_candidates: DEFAULT_MAX_CANDIDATES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanReport {
    pub human_id: String,
    pub history_events: usize,
    pub distribution: GoalDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<Synthesis>,
    pub selected: GoalCandidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformReport {
    pub domain: String,
    pub extractor: String,
    pub backend: String,
    pub robot: String,
    pub timestep: u32,
    pub humans: Vec<HumanReport>,
}

/// Builds the joint planning problem: extracts the domain, adds the robot,
/// item states and each human (in id order) with its predicted goal, and
/// finally the robot's own goal. Initial states come from the latest
/// snapshot.
pub fn transform(
    kb: &KnowledgeBase,
    seq: &SnapshotSequence,
    extractor: &dyn ElementExtractor,
    backend: &dyn PredictorBackend,
    options: &TransformOptions,
) -> Result<(DomainSpec, ProblemSpec, TransformReport), TransformError> {
    let bundle = kb.get_knowledge(&kb.domain).map_err(at(Stage::Knowledge))?;
    let elements = extractor.extract(&bundle).map_err(at(Stage::Extract))?;
    let mut builder = ProblemBuilder::new(DomainSpec::new(&kb.domain, elements), &options.problem_name);

    let scene = seq.latest().map_err(at(Stage::AddRobot))?;
    let robot = scene.get_robot_node().map_err(at(Stage::AddRobot))?;
    builder.add_rooms(&scene.rooms).map_err(at(Stage::AddRobot))?;
    builder.add_agent(robot).map_err(at(Stage::AddRobot))?;

    let held = held_items(scene);
    for item in &scene.items {
        builder
            .set_init_state(item, held.contains_key(item.id.as_str()))
            .map_err(at(Stage::ItemInit))?;
    }

    let mut report = TransformReport {
        domain: kb.domain.clone(),
        extractor: extractor.name().to_string(),
        backend: backend.name().to_string(),
        robot: robot.id.clone(),
        timestep: scene.timestep,
        humans: Vec::new(),
    };

    for human in scene.humans() {
        builder.add_agent(human).map_err(at(Stage::AddHuman))?;
        builder.apply_current_activity(human, scene).map_err(at(Stage::AddHuman))?;
        let history = build_history(seq, &human.id).map_err(at(Stage::History))?;
        let mut dist = {
            let ctx = PredictionContext {
                human,
                history: &history,
                scene,
                domain: &builder.domain().elements,
                templates: &kb.goal_templates,
                max_candidates: options.max_candidates,
            };
            backend.predict(&ctx).map_err(at(Stage::Predict))?
        };
        let synthesis = if dist.has_uncovered() {
            let s = synthesize_missing_elements(&dist, &builder.domain().elements, backend)
                .map_err(at(Stage::Synthesize))?;
            builder.extend_domain(&s).map_err(at(Stage::Synthesize))?;
            dist.mark_coverage(&builder.domain().elements);
            Some(s)
        } else {
            None
        };
        let selected = select_goal(&dist).clone();
        builder.add_goal(&human.id, &selected).map_err(at(Stage::AddGoal))?;
        report.humans.push(HumanReport {
            human_id: human.id.clone(),
            history_events: history.item_events.len(),
            distribution: dist,
            synthesis,
            selected,
        });
    }

    builder
        .set_robot_goal(&robot.id, options.robot_goal.clone())
        .map_err(at(Stage::RobotGoal))?;
    let (domain, problem) = builder.finish().map_err(at(Stage::Finish))?;
    Ok((domain, problem, report))
}
