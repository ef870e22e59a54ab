//! Frame scoring, threshold and ranking metrics, feature projection and report exports.

mod metrics;
mod pca;
mod report;
mod scoring;

pub use metrics::{
    compute_threshold, delta_s, false_positive_rate, mean_squared_reconstruction_error, roc_auc, threshold_metrics,
    Confusion, RocCurve, RocPoint, ThresholdMetrics,
};
pub use pca::{pca_project, PcaResult};
pub use report::{
    build_report, features_csv, roc_csv, score_curve_svg, scores_csv, EvalOptions, EvalReport, VideoAuc,
};
pub use scoring::{first_scored_frame, score_video, ScoreSeries, ScoredVideo};
