//! Min-max scaling followed by PCA that keeps 99% of the variance, fitted on
//! training rows only.

use mlkit::numerics::{pca_fit, RngStream, Tensor};
use mlkit::pipeline::{Dataset, PcaPolicy, PreprocessConfig, Preprocessor};

fn main() -> mlkit::Result<()> {
    let mut rng = RngStream::from_seed(2);
    // 6 features driven by 2 latent factors plus small noise
    let n = 100;
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = (rng.normal(), rng.normal());
        rows.push([a, 2.0 * a, -a + b, b, 3.0 * b, a + b].map(|v| v + 0.01 * rng.normal()));
    }
    let x = Tensor::from_rows(&rows)?;
    let y = Tensor::zeros(&[n, 1]);
    let ds = Dataset::new("latent", x.clone(), y, false)?;

    let pca = pca_fit(&x, 0.99)?;
    println!("explained variance {:.4?}", pca.explained_variance.data());

    let cfg = PreprocessConfig {
        pca: PcaPolicy::Always,
        ..PreprocessConfig::default()
    };
    let pre = Preprocessor::fit(&ds, &cfg)?;
    let out = pre.apply_dataset(&ds)?;
    println!("{} features -> {} components", ds.d(), out.d());
    println!("first row {:.4?}", out.x.row(0));
    Ok(())
}
