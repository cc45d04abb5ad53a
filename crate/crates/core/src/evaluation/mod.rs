//! Point metrics, statistical baselines, the cross-task Skill / RankRMSE /
//! Wins protocol and attribution tables.

mod attribution;
mod baseline;
mod metrics;
mod protocol;

pub use attribution::{export_attribution, AttributionInput, AttributionTables, DailyWeights};
pub use baseline::{stat_baseline, SeasonalProfile, PERSISTENCE_MAX_WINDOW};
pub use metrics::{point_metrics, rmse, PointMetrics, DENOMINATOR_FLOOR};
pub use protocol::{
    protocol, protocol_from_rmse, rank_rmse, read_rmse_table, skill, wins, EvalTask, ProtocolReport,
    RmseTable, SourceRow, TaskRmse,
};
