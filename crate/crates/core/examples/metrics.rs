//! The ten multilabel indicators on a small hand-made prediction set.

use mlkit::metrics::{MetricReport, PredictionSet, DEFAULT_THRESHOLD};
use mlkit::numerics::Tensor;

fn main() -> mlkit::Result<()> {
    let y = Tensor::from_rows(&[[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0], [1.0, 1.0, 0.0, 1.0]])?;
    let f = Tensor::from_rows(&[[0.9, 0.2, 0.4, 0.1], [0.6, 0.7, 0.1, 0.3], [0.8, 0.3, 0.2, 0.55]])?;
    let ps = PredictionSet::from_scores(y, f, DEFAULT_THRESHOLD)?;
    let report = MetricReport::compute(&ps);
    for (name, v) in MetricReport::FIELDS.iter().zip(report.values()) {
        println!("{name:<16} {v:.4}");
    }
    println!("{}", report.to_record("toy", "ENN", "1"));
    Ok(())
}
