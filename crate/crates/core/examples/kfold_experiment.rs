//! A complete cross-validated experiment: folds, preprocessing, augmentation,
//! training, external-score fusion and the written report.

use mlkit::ensemble::InputEncoding;
use mlkit::harness::{run_experiment, save_dataset, synthetic_linear_task, Augmentation, ClusterCount, FoldScheme, RunConfig};
use mlkit::numerics::RngStream;

fn main() -> mlkit::Result<()> {
    let dir = std::env::temp_dir().join("mlkit-kfold-example");
    std::fs::create_dir_all(&dir)?;
    let task = synthetic_linear_task(200, 8, 3, 0.1, &mut RngStream::from_seed(9))?;
    let data = dir.join("synthetic.txt");
    save_dataset(&task.dataset, &data)?;

    // a stand-in external classifier: the teacher's noisy probabilities
    let mut rng = RngStream::from_seed(10);
    let ext: Vec<String> = (0..task.dataset.n())
        .map(|i| {
            let row: Vec<String> = task
                .logits
                .row(i)
                .iter()
                .map(|z| format!("{:.4}", (1.0 / (1.0 + (-z).exp()) + 0.2 * (rng.uniform() - 0.5)).clamp(0.0, 1.0)))
                .collect();
            row.join(",")
        })
        .collect();
    let ext_path = dir.join("external.csv");
    std::fs::write(&ext_path, ext.join("\n") + "\n")?;

    let mut cfg = RunConfig::new(&data, dir.join("out"));
    cfg.members = 3;
    cfg.epochs = Some(15);
    cfg.input_encoding = InputEncoding::SingleStep;
    cfg.folds = FoldScheme::KFold(3);
    cfg.augmentation = Augmentation::Clusters {
        count: ClusterCount::Auto,
        weight: 0.5,
    };
    cfg.external_scores = Some(ext_path);
    let report = run_experiment(&cfg)?;
    print!("{}", report.to_text());
    println!("report written to {}", cfg.output_dir.display());
    Ok(())
}
