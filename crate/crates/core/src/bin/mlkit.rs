use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlkit::ensemble::{EnsembleModel, InputEncoding, OptimizerPolicy, Topology};
use mlkit::harness::{
    evaluate_model, load_dataset, load_external_scores, run_experiment, train_on_dataset, Augmentation, FoldScheme,
    RunConfig,
};
use mlkit::numerics::RngStream;
use mlkit::optim::Variant;
use mlkit::pipeline::{default_clusters, imcc_augment, PcaPolicy, Preprocessor, PreprocessConfig};

#[derive(Parser)]
#[command(name = "mlkit", version, about = "Multilabel GRU/TCN ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an ensemble on a whole dataset and save it.
    Train(RunArgs),
    /// Score a saved ensemble on a dataset.
    Evaluate(EvalArgs),
    /// Cross-validate and write report.txt, report.json and config.json.
    Kfold(RunArgs),
    /// Show the cluster-center examples augmentation would add.
    AugmentPreview(PreviewArgs),
}

fn parse_policy(s: &str) -> Result<OptimizerPolicy, String> {
    if s == "stochastic" {
        return Ok(OptimizerPolicy::Stochastic);
    }
    match s.split_once(':') {
        Some(("fixed", v)) => v.parse::<Variant>().map(OptimizerPolicy::Fixed).map_err(|e| e.to_string()),
        _ => Err(format!("`{s}`: expected stochastic or fixed:<adam|diffgrad|dgrad|cos1|exp|sto>")),
    }
}

fn parse_encoding(s: &str) -> Result<InputEncoding, String> {
    match s {
        "sequence" => Ok(InputEncoding::SequenceOfScalars),
        "single-step" => Ok(InputEncoding::SingleStep),
        _ => Err(format!("`{s}`: expected sequence or single-step")),
    }
}

fn parse_pca(s: &str) -> Result<PcaPolicy, String> {
    match s {
        "auto" => Ok(PcaPolicy::Auto),
        "always" => Ok(PcaPolicy::Always),
        "never" => Ok(PcaPolicy::Never),
        _ => Err(format!("`{s}`: expected auto, always or never")),
    }
}

/// One flag per `RunConfig` field.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Comma-separated list of GRU_A, GRU_B, TCN_A, TCN_B, GRU_TCN.
    #[arg(long, value_delimiter = ',', default_value = "GRU_A")]
    topologies: Vec<Topology>,
    #[arg(long, default_value_t = 10)]
    members: usize,
    /// `stochastic` or `fixed:<variant>`.
    #[arg(long, default_value = "stochastic", value_parser = parse_policy)]
    optimizer: OptimizerPolicy,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.5)]
    rho1: f64,
    #[arg(long, default_value_t = 0.999)]
    rho2: f64,
    #[arg(long, default_value_t = 1.0)]
    clip_threshold: f64,
    #[arg(long, default_value_t = 30)]
    minibatch: usize,
    /// Defaults to 150 for GRU-family and 100 for TCN-family members.
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 50)]
    hidden_units: usize,
    #[arg(long, default_value_t = 175)]
    tcn_filters: usize,
    #[arg(long, default_value_t = 4)]
    tcn_blocks: usize,
    #[arg(long, default_value_t = 32)]
    pre_conv_filters: usize,
    #[arg(long, default_value_t = 0.05)]
    dropout: f64,
    /// `sequence` (d steps of one value) or `single-step`.
    #[arg(long, default_value = "sequence", value_parser = parse_encoding)]
    input_encoding: InputEncoding,
    /// `kfold:<k>`, `holdout:<fraction>` or `split:<train-idx>,<test-idx>`.
    #[arg(long, default_value = "kfold:5")]
    folds: FoldScheme,
    #[arg(long)]
    stratified: bool,
    /// `off` or `clusters:<auto|c|c1|c2..>:<weight>`.
    #[arg(long, default_value = "off")]
    augmentation: Augmentation,
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    minmax: bool,
    #[arg(long, default_value = "auto", value_parser = parse_pca)]
    pca: PcaPolicy,
    #[arg(long, default_value_t = 0.99)]
    pca_retain: f64,
    #[arg(long)]
    external_scores: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "mlkit-out")]
    output_dir: PathBuf,
}

impl From<RunArgs> for RunConfig {
    fn from(a: RunArgs) -> Self {
        RunConfig {
            dataset: a.dataset,
            topologies: a.topologies,
            members: a.members,
            optimizer: a.optimizer,
            learning_rate: a.learning_rate,
            rho1: a.rho1,
            rho2: a.rho2,
            clip_threshold: a.clip_threshold,
            minibatch: a.minibatch,
            epochs: a.epochs,
            hidden_units: a.hidden_units,
            tcn_filters: a.tcn_filters,
            tcn_blocks: a.tcn_blocks,
            pre_conv_filters: a.pre_conv_filters,
            dropout: a.dropout,
            input_encoding: a.input_encoding,
            folds: a.folds,
            stratified: a.stratified,
            augmentation: a.augmentation,
            minmax: a.minmax,
            pca: a.pca,
            pca_retain: a.pca_retain,
            external_scores: a.external_scores,
            seed: a.seed,
            output_dir: a.output_dir,
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model_dir: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    external_scores: Option<PathBuf>,
}

#[derive(Args)]
struct PreviewArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Defaults to round(sqrt(n)).
    #[arg(long)]
    clusters: Option<usize>,
    /// Number of centers to print.
    #[arg(long, default_value_t = 5)]
    show: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

type Failure = (&'static str, String);

fn fail<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> Failure {
    move |e| (stage, e.to_string())
}

fn train(args: RunArgs) -> Result<(), Failure> {
    let cfg = RunConfig::from(args);
    cfg.validate().map_err(fail("config"))?;
    let ds = load_dataset(&cfg.dataset).map_err(fail("load"))?;
    let art = train_on_dataset(&cfg, &ds).map_err(fail("train"))?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(fail("save"))?;
    art.model.save(&cfg.output_dir.join("model.json")).map_err(fail("save"))?;
    let pre = serde_json::to_string_pretty(&art.preprocessor).map_err(fail("save"))?;
    std::fs::write(cfg.output_dir.join("preprocessor.json"), pre + "\n").map_err(fail("save"))?;
    for (i, m) in art.model.members.iter().enumerate() {
        let tags: Vec<&str> = m.optimizers.iter().map(|v| v.name()).collect();
        println!(
            "member {i}: {} params={} optimizers=[{}] final_loss={:.6}",
            m.net.spec.topology,
            m.net.param_count(),
            tags.join(","),
            m.loss_trace.last().copied().unwrap_or(f64::NAN)
        );
    }
    println!("saved {}", cfg.output_dir.display());
    Ok(())
}

fn evaluate(args: EvalArgs) -> Result<(), Failure> {
    let model = EnsembleModel::load(&args.model_dir.join("model.json")).map_err(fail("load model"))?;
    let pre_text = std::fs::read_to_string(args.model_dir.join("preprocessor.json")).map_err(fail("load model"))?;
    let pre: Preprocessor = serde_json::from_str(&pre_text).map_err(fail("load model"))?;
    let ds = load_dataset(&args.dataset).map_err(fail("load"))?;
    let external = args
        .external_scores
        .as_deref()
        .map(|p| load_external_scores(p, ds.n(), ds.l()))
        .transpose()
        .map_err(fail("load external scores"))?;
    let test = pre.apply_dataset(&ds).map_err(fail("preprocess"))?;
    let scores = evaluate_model(&model, &test, external.as_ref()).map_err(fail("evaluate"))?;
    for s in scores {
        println!("{}", s.metrics.to_record(&ds.name, &s.model, "all"));
    }
    Ok(())
}

fn kfold(args: RunArgs) -> Result<(), Failure> {
    let cfg = RunConfig::from(args);
    let report = run_experiment(&cfg).map_err(fail("kfold"))?;
    print!("{}", report.to_text());
    if let Some(f) = report.failed_folds().next() {
        return Err(("kfold", format!("fold {} failed: {}", f.fold, f.error.as_deref().unwrap_or(""))));
    }
    Ok(())
}

fn augment_preview(args: PreviewArgs) -> Result<(), Failure> {
    let ds = load_dataset(&args.dataset).map_err(fail("load"))?;
    let pre = Preprocessor::fit(&ds, &PreprocessConfig::default()).map_err(fail("preprocess"))?;
    let ds = pre.apply_dataset(&ds).map_err(fail("preprocess"))?;
    let c = args.clusters.unwrap_or_else(|| default_clusters(ds.n()));
    let aug = imcc_augment(&ds, c, &mut RngStream::from_seed(args.seed)).map_err(fail("augment"))?;
    let mut sizes = vec![0usize; c];
    for &a in &aug.assignments {
        sizes[a] += 1;
    }
    println!("dataset={} n={} d={} l={} clusters={c}", ds.name, ds.n(), ds.d(), ds.l());
    for j in 0..c.min(args.show) {
        let t: Vec<String> = aug.t.row(j).iter().map(|v| format!("{v:.3}")).collect();
        let z: Vec<String> = aug.z.row(j).iter().take(6).map(|v| format!("{v:.3}")).collect();
        let more = if ds.d() > 6 { ",..." } else { "" };
        println!("center {j}: size={} labels=[{}] features=[{}{more}]", sizes[j], t.join(","), z.join(","));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let result = match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Kfold(a) => kfold(a),
        Command::AugmentPreview(a) => augment_preview(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((stage, msg)) => {
            eprintln!("error [{stage}]: {msg}");
            ExitCode::FAILURE
        }
    }
}
