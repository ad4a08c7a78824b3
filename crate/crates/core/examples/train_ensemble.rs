//! Trains a single network and a stochastic-optimizer ensemble on a
//! synthetic task, compares test average precision, and round-trips the
//! ensemble through its JSON file.

use mlkit::ensemble::{train_ensemble, EnsembleConfig, EnsembleModel, InputEncoding, OptimizerPolicy};
use mlkit::harness::{holdout_split, synthetic_linear_task};
use mlkit::metrics::{average_precision, PredictionSet, DEFAULT_THRESHOLD};
use mlkit::numerics::{RngStream, Tensor};
use mlkit::optim::Variant;
use mlkit::pipeline::{PreprocessConfig, Preprocessor, TrainingSet};

fn ap(y: &Tensor, f: Tensor) -> mlkit::Result<f64> {
    average_precision(&PredictionSet::from_scores(y.clone(), f, DEFAULT_THRESHOLD)?)
}

fn main() -> mlkit::Result<()> {
    let ds = synthetic_linear_task(300, 10, 4, 0.1, &mut RngStream::from_seed(0))?.dataset;
    let fold = holdout_split(ds.n(), 0.25, &mut RngStream::from_seed(1))?;
    let (train, test) = (ds.subset(&fold.train), ds.subset(&fold.test));
    let pre = Preprocessor::fit(&train, &PreprocessConfig::default())?;
    let (train, test) = (pre.apply_dataset(&train)?, pre.apply_dataset(&test)?);
    let data = TrainingSet::from_dataset(&train);

    let mut cfg = EnsembleConfig::new(ds.l());
    cfg.train.epochs = Some(20);
    cfg.spec.input_encoding = InputEncoding::SingleStep;

    let mut single = cfg.clone();
    single.members = 1;
    single.policy = OptimizerPolicy::Fixed(Variant::Adam);
    let one = train_ensemble(&single, &data, 42)?;
    println!("single Adam network  AP {:.4}", ap(&test.y, one.predict(&test.x)?)?);

    cfg.members = 5;
    let model = train_ensemble(&cfg, &data, 42)?;
    for (i, m) in model.members.iter().enumerate() {
        let tags: Vec<&str> = m.optimizers.iter().map(|v| v.name()).collect();
        let member_ap = ap(&test.y, m.net.predict(&test.x)?)?;
        println!("member {i}: optimizers [{}] AP {member_ap:.4}", tags.join(","));
    }
    let fused = model.predict(&test.x)?;
    println!("average-fused ensemble AP {:.4}", ap(&test.y, fused.clone())?);

    let path = std::env::temp_dir().join("mlkit-example-model.json");
    model.save(&path)?;
    let loaded = EnsembleModel::load(&path)?;
    println!("reloaded from {}: identical scores = {}", path.display(), loaded.predict(&test.x)? == fused);
    Ok(())
}
