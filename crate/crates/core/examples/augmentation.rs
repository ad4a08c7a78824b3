//! Cluster-center augmentation: k-means centers with averaged soft labels
//! appended to the training set.

use mlkit::harness::synthetic_linear_task;
use mlkit::numerics::RngStream;
use mlkit::pipeline::{build_training_set, default_clusters, imcc_augment};

fn main() -> mlkit::Result<()> {
    let mut rng = RngStream::from_seed(5);
    let ds = synthetic_linear_task(120, 4, 3, 0.05, &mut rng)?.dataset;
    let c = default_clusters(ds.n());
    let aug = imcc_augment(&ds, c, &mut rng)?;
    println!("n={} clusters={c}", ds.n());
    for j in 0..4 {
        let size = aug.assignments.iter().filter(|&&a| a == j).count();
        println!("center {j}: size={size:>2} x={:.3?} soft labels={:.3?}", aug.z.row(j), aug.t.row(j));
    }
    let set = build_training_set(&ds, &aug, 0.5)?;
    println!(
        "training set: {} rows, weights {:?} .. {:?}",
        set.len(),
        set.weights.first(),
        set.weights.last()
    );
    Ok(())
}
