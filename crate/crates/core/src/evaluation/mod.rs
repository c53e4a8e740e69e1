//! Scoring with the masked weighted metric, mean and persistence
//! baselines, and report rendering.

mod baselines;
mod report;
mod score;

pub use baselines::{mean_baseline, persistence_baseline, MeanBaseline, RegionMeans};
pub use report::{leadtime_csv, report, variable_columns, ReportFormat, ReportRow, REPORT_COLUMNS};
pub use score::{predict_windows, score, score_windows, validation_score, ScoreAccumulator, ScoreReport};
