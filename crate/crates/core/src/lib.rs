//! Learning default rules with exceptions for multi-category classification
//! of mixed numerical and categorical tabular data.
//!
//! Typical flow: [`Dataset::parse_csv`], [`fold_rm`], [`Program::from_model`],
//! then [`predict`] / [`justify`] or [`run_cv`] for evaluation.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod heuristics;
pub mod induction;
pub mod inference;
pub mod program;

pub use data::{
    compare, infer_feature_kind, parse_csv_with_schema, Dataset, FeatureKind, FeatureSchema,
    LabelColumn, NumericSpec, Op, Table, Value,
};
pub use error::{Error, Result};
pub use heuristics::{
    best_info_gain, candidate_counts, find_best_literal, ig, ConfusionCounts, Literal,
    ScoredLiteral,
};
pub use induction::{
    fold_rm, fold_rpp, learn_rule, most, split_by_literal, HeadedRule, LearnedModel, LearnedRule,
    TrainConfig, TrainStats,
};
pub use program::{
    AbnormalRule, Clause, Dispatch, FlattenedProgram, Meta, MetaFeature, Program, Rule,
    FORMAT_VERSION,
};
pub use inference::{
    justify, predict, trace, Goal, Justification, JustificationNode, Prediction,
};
pub use evaluation::{
    compute_metrics, format_csv, format_table, kfold_split, run_cv, stratified_kfold_split,
    train_and_score, CvConfig, CvReport, FoldPlan, FoldReport, Metrics, Protocol,
};
