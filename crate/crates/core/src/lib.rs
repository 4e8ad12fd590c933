//! Human-aware task planning: layered scene graphs with human nodes,
//! activity prediction from interaction history, grounding into a joint
//! multi-agent STRIPS problem, search, and a discrete-step simulator that
//! scores disturbance.

pub mod grounding;
pub mod knowledge;
pub mod llm;
pub mod logic;
pub mod pipeline;
pub mod planner;
pub mod predictor;
pub mod random;
pub mod scene_graph;
pub mod sexpr;
pub mod simulator;
