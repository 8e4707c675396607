//! Engine for plan-based deep search over questions.
//!
//! A question is first decomposed breadth-wise into an ordered list of atomic
//! sub-problems, each carrying a natural-language `Step` and a logical-form
//! `Action` ([`logical_form`], [`planning`]). Retrieval sub-problems are then
//! solved depth-wise: a knowledge-boundary check ([`boundary`]) decides
//! whether the model can already answer reliably, and if not the solver
//! iterates retrieve / focus / reason rounds against a pluggable retriever
//! ([`retrieval`]) until an answer is produced or the depth budget runs out
//! ([`solver`]). Every model exchange goes through a neutral chat gateway
//! ([`llm`]) so runs can be replayed deterministically from scripts.
//!
//! [`eval`] scores predictions with exact-match / token-F1 and exports run
//! traces as loss-masked supervised fine-tuning samples.

pub mod boundary;
pub mod eval;
pub mod llm;
pub mod logical_form;
pub mod planning;
mod prompt;
pub mod retrieval;
pub mod solver;

pub use boundary::{knowledge_boundary, likelihood_confidence, ConfidenceReport, DEFAULT_TAU};
pub use eval::{
    em, export_sft, f1, load_dataset, normalize_answer, run_eval, EvalReport, EvalRun, QAItem,
    SftSample,
};
pub use llm::{
    BackendHandle, ChatBackend, ChatMessage, Completion, GatewayError, GenParams, HttpBackend,
    Role, ScriptedBackend, TokenProb,
};
pub use logical_form::{parse_action, render_action, Alias, LogicalForm, ParseError};
pub use planning::{
    build_decomposition_prompt, parse_decomposition, plan_dag, validate_plan, Plan, PlanViolation,
    SubProblem,
};
pub use retrieval::{Corpus, Document, HttpRetriever, LexicalRetriever, RetrievalQuery, Retriever};
pub use solver::{
    eval_expression, BindingEnv, RunFailure, RunTrace, SolveConfig, SolveError, Solver, SubAnswer,
    Via,
};
