//! Model evaluation: metric suite, Copeland ranking and their text/CSV forms.

mod copeland;
mod metrics;
mod report;

pub use self::copeland::{copeland_rank, ComparisonMatrix, CopelandEntry, CopelandResult, Metric, RankError};
pub use self::metrics::{compute_metrics, compute_series, MetricError, MetricReport, Scope, MAPE_EPS};
pub use self::report::{
    copeland_csv, copeland_table, load_metric_table, metric_table, metrics_csv, TableError,
};

use crate::data::Dataset;
use crate::learners::TrainedModel;

/// Evaluates a model on a labelled dataset.
pub fn evaluate_model(model: &TrainedModel, data: &Dataset, scope: Scope) -> Result<MetricReport, MetricError> {
    let predicted: Vec<_> = data.features().iter().map(|x| model.predict(x)).collect();
    compute_metrics(&data.targets(), &predicted, scope)
}
