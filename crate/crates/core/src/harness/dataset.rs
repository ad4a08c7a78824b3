//! The `mlkit-dataset v1` text format and a synthetic teacher task.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor};
use crate::pipeline::Dataset;

pub const DATASET_MAGIC: &str = "mlkit-dataset v1";

/// Header fields of a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n: usize,
    pub d: usize,
    pub l: usize,
    pub sparse: bool,
}

fn parse_header(line: &str, path: &str) -> Result<DatasetHeader> {
    let err = |msg: String| Error::Parse {
        path: path.to_string(),
        line: 1,
        msg,
    };
    let mut parts = line.split(',').map(str::trim);
    if parts.next() != Some(DATASET_MAGIC) {
        return Err(err(format!("header must start with `{DATASET_MAGIC}`")));
    }
    let mut fields = [None; 4];
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header field `{part}`")))?;
        let slot = match key.trim() {
            "n" => 0,
            "d" => 1,
            "l" => 2,
            "sparse" => 3,
            other => return Err(err(format!("unknown header field `{other}`"))),
        };
        let v: usize = value
            .trim()
            .parse()
            .map_err(|_| err(format!("header field `{key}` is not a non-negative integer")))?;
        fields[slot] = Some(v);
    }
    let get = |i: usize, name: &str| fields[i].ok_or_else(|| err(format!("header is missing `{name}`")));
    let sparse = match get(3, "sparse")? {
        0 => false,
        1 => true,
        _ => return Err(err("sparse must be 0 or 1".into())),
    };
    Ok(DatasetHeader {
        n: get(0, "n")?,
        d: get(1, "d")?,
        l: get(2, "l")?,
        sparse,
    })
}

/// Parses dataset text; `origin` names the source in error messages and
/// becomes the dataset name.
pub fn parse_dataset(text: &str, origin: &str, name: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        line: 1,
        msg: "empty file".into(),
    })?;
    let h = parse_header(header, origin)?;
    let mut x = Vec::with_capacity(h.n * h.d);
    let mut y = Vec::with_capacity(h.n * h.l);
    let mut rows = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let err = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: lineno,
            msg,
        };
        rows += 1;
        if rows > h.n {
            return Err(err(format!("more than the {} rows declared in the header", h.n)));
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != h.d + h.l {
            return Err(err(format!(
                "row {rows} has {} fields, expected {} features + {} labels",
                fields.len(),
                h.d,
                h.l
            )));
        }
        for (j, f) in fields[..h.d].iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| err(format!("row {rows}: feature {j} `{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("row {rows}: feature {j} is not finite")));
            }
            x.push(v);
        }
        for (j, f) in fields[h.d..].iter().enumerate() {
            let v = match *f {
                "0" => 0.0,
                "1" => 1.0,
                other => return Err(err(format!("row {rows}: label {j} `{other}` is not 0 or 1"))),
            };
            y.push(v);
        }
    }
    if rows != h.n {
        return Err(Error::Parse {
            path: origin.to_string(),
            line: text.lines().count(),
            msg: format!("header declares {} rows, file has {rows}", h.n),
        });
    }
    Dataset::new(name, Tensor::new(vec![h.n, h.d], x)?, Tensor::new(vec![h.n, h.l], y)?, h.sparse)
}

/// Loads a dataset file; the dataset is named after the file stem.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    parse_dataset(&text, &path.display().to_string(), &name)
}

/// Renders a dataset in the file format. Values use the shortest
/// representation that round-trips exactly.
pub fn format_dataset(ds: &Dataset) -> String {
    let mut s = format!(
        "{DATASET_MAGIC}, n={}, d={}, l={}, sparse={}\n",
        ds.n(),
        ds.d(),
        ds.l(),
        u8::from(ds.sparse)
    );
    for i in 0..ds.n() {
        let feats = ds.x.row(i).iter().map(|v| format!("{v:?}"));
        let labels = ds.y.row(i).iter().map(|v| if *v > 0.5 { "1".to_string() } else { "0".to_string() });
        let row: Vec<String> = feats.chain(labels).collect();
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, format_dataset(ds))?;
    Ok(())
}

/// A multilabel task generated by a random linear teacher.
#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub dataset: Dataset,
    /// Teacher weights, `l x d`.
    pub weights: Tensor,
    pub bias: Vec<f64>,
    /// Noise-free teacher logits, `n x l`.
    pub logits: Tensor,
}

/// Draws `x ~ U(-1, 1)^d`, `W ~ N(0, 1)` and `b ~ U(-0.5, 0.5)`, sets
/// `y_j = [w_j . x + b_j > 0]`, then flips each label independently with
/// probability `noise`.
pub fn synthetic_linear_task(
    n: usize,
    d: usize,
    l: usize,
    noise: f64,
    rng: &mut RngStream,
) -> Result<SyntheticTask> {
    if n == 0 || d == 0 || l == 0 {
        return Err(Error::invalid("synthetic task needs n, d, l >= 1"));
    }
    if !(0.0..=0.5).contains(&noise) {
        return Err(Error::invalid(format!("label noise must lie in [0, 0.5], got {noise}")));
    }
    let mut x = Tensor::zeros(&[n, d]);
    for v in x.data_mut() {
        *v = rng.uniform_range(-1.0, 1.0);
    }
    let mut weights = Tensor::zeros(&[l, d]);
    for v in weights.data_mut() {
        *v = rng.normal();
    }
    let bias: Vec<f64> = (0..l).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
    let mut logits = x.matmul(&weights.transpose())?;
    for i in 0..n {
        for (v, b) in logits.row_mut(i).iter_mut().zip(&bias) {
            *v += b;
        }
    }
    let mut y = logits.map(|v| if v > 0.0 { 1.0 } else { 0.0 });
    for v in y.data_mut() {
        if rng.uniform() < noise {
            *v = 1.0 - *v;
        }
    }
    Ok(SyntheticTask {
        dataset: Dataset::new("synthetic", x, y, false)?,
        weights,
        bias,
        logits,
    })
}
