//! Statistics, logistic mapping and the repeated split evaluation protocol.

pub mod logistic;
pub mod protocol;
pub mod stats;

pub use logistic::{fit_logistic5, Logistic5Params, LogisticFit};
pub use protocol::{
    breakdown_by_type, config_hash, per_distortion_breakdown, predict_split, run_protocol,
    EvalReport, ProtocolParams, RepeatMetrics, RepeatRow, SplitPredictions,
};
pub use stats::{average_ranks, median, plcc, rmse, srocc};
