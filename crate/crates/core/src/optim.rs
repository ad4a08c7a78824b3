//! Adam-family update rules: Adam, diffGrad and the DGrad, Cos#1, Exp and
//! Sto variants, plus global L2 gradient clipping.
//!
//! Every rule shares Adam's bias-corrected moments and differs only in the
//! per-element factor `xi` that modulates the step:
//!
//! ```text
//! theta <- theta - lr * xi * m_hat / (sqrt(u_hat) + eps)
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, RngStream, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Adam,
    DiffGrad,
    DGrad,
    Cos1,
    Exp,
    Sto,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Adam,
        Variant::DiffGrad,
        Variant::DGrad,
        Variant::Cos1,
        Variant::Exp,
        Variant::Sto,
    ];

    /// The pool drawn from when optimizers are assigned per layer at random.
    pub const STOCHASTIC_POOL: [Variant; 4] =
        [Variant::DGrad, Variant::Cos1, Variant::Exp, Variant::Sto];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Adam => "adam",
            Variant::DiffGrad => "diffgrad",
            Variant::DGrad => "dgrad",
            Variant::Cos1 => "cos1",
            Variant::Exp => "exp",
            Variant::Sto => "sto",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown optimizer `{s}`")))
    }
}

/// What the `avg` moving average tracks for the DGrad family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AvgMode {
    /// EMA of the raw gradient, so `|g - avg|` compares like with like.
    #[default]
    Gradient,
    /// EMA of the element-wise squared gradient.
    SquaredGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub epsilon: f64,
    /// Cycle period of the Cos#1 learning-rate multiplier.
    pub cos_period: u64,
    /// Decay constant of the Exp variant.
    pub exp_k: f64,
    pub avg_mode: AvgMode,
}

impl Default for OptimConfig {
    /// Training defaults: `lr = 0.01`, `rho1 = 0.5`, `rho2 = 0.999`.
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            rho1: 0.5,
            rho2: 0.999,
            epsilon: 1e-8,
            cos_period: 30,
            exp_k: 2.0,
            avg_mode: AvgMode::Gradient,
        }
    }
}

impl OptimConfig {
    /// The usual Adam constants (`rho1 = 0.9`, `rho2 = 0.999`).
    pub fn textbook(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            rho1: 0.9,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config {
                field: "learning_rate",
                msg: format!("must be > 0, got {}", self.learning_rate),
            });
        }
        if !in_unit(self.rho1) {
            return Err(Error::Config {
                field: "rho1",
                msg: format!("must lie in (0, 1), got {}", self.rho1),
            });
        }
        if !in_unit(self.rho2) {
            return Err(Error::Config {
                field: "rho2",
                msg: format!("must lie in (0, 1), got {}", self.rho2),
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Config {
                field: "epsilon",
                msg: "must be > 0".into(),
            });
        }
        if self.cos_period == 0 {
            return Err(Error::Config {
                field: "cos_period",
                msg: "must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Per-parameter-tensor optimizer state.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    variant: Variant,
    cfg: OptimConfig,
    m: Tensor,
    u: Tensor,
    prev_grad: Tensor,
    avg: Tensor,
    t: u64,
    rng: Option<RngStream>,
    forced_uniform: Option<f64>,
}

impl OptimizerState {
    /// `rng` is required for [`Variant::Sto`] and ignored otherwise.
    pub fn new(variant: Variant, shape: &[usize], cfg: OptimConfig, rng: Option<RngStream>) -> Result<Self> {
        cfg.validate()?;
        if variant == Variant::Sto && rng.is_none() {
            return Err(Error::invalid("the Sto optimizer needs a random stream"));
        }
        let zeros = Tensor::zeros(shape);
        Ok(Self {
            variant,
            cfg,
            m: zeros.clone(),
            u: zeros.clone(),
            prev_grad: zeros.clone(),
            avg: zeros,
            t: 0,
            rng,
            forced_uniform: None,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    /// Number of completed steps.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &Tensor {
        &self.m
    }

    pub fn second_moment(&self) -> &Tensor {
        &self.u
    }

    pub fn avg(&self) -> &Tensor {
        &self.avg
    }

    /// Replaces the Sto variant's uniform draws by a constant. Test hook.
    pub fn force_uniform(&mut self, value: Option<f64>) {
        self.forced_uniform = value;
    }

    /// Applies one update to `theta` and returns the modulation `xi` used.
    pub fn step(&mut self, theta: &mut Tensor, g: &Tensor) -> Result<Tensor> {
        theta.expect_shape("optimizer step theta", self.m.shape())?;
        g.expect_shape("optimizer step gradient", self.m.shape())?;
        g.ensure_finite("optimizer gradient")?;

        self.t += 1;
        let t = self.t;
        let OptimConfig {
            learning_rate: lr,
            rho1,
            rho2,
            epsilon,
            ..
        } = self.cfg;

        for ((m, u), &gv) in self
            .m
            .data_mut()
            .iter_mut()
            .zip(self.u.data_mut().iter_mut())
            .zip(g.data())
        {
            *m = rho1 * *m + (1.0 - rho1) * gv;
            *u = rho2 * *u + (1.0 - rho2) * gv * gv;
        }

        let xi = match self.variant {
            Variant::Adam => Tensor::filled(g.shape(), 1.0),
            Variant::DiffGrad => {
                let xi = self.prev_grad.zip_map(g, |p, c| sigmoid((p - c).abs()))?;
                self.prev_grad = g.clone();
                xi
            }
            Variant::DGrad | Variant::Cos1 | Variant::Exp | Variant::Sto => {
                let delta = self.update_avg(g)?;
                match self.variant {
                    Variant::DGrad => dgrad_modulation(&delta),
                    Variant::Cos1 => cos1_modulation(&delta, cos1_lr(t, self.cfg.cos_period)),
                    Variant::Exp => exp_modulation(&delta, self.cfg.exp_k),
                    _ => {
                        let mut noise = Tensor::zeros(g.shape());
                        match self.forced_uniform {
                            Some(v) => noise.fill(v),
                            None => self
                                .rng
                                .as_mut()
                                .expect("checked at construction")
                                .fill_uniform(noise.data_mut()),
                        }
                        sto_modulation(&delta, &noise)?
                    }
                }
            }
        };

        let c1 = 1.0 - rho1.powi(t as i32);
        let c2 = 1.0 - rho2.powi(t as i32);
        for (((th, m), u), x) in theta
            .data_mut()
            .iter_mut()
            .zip(self.m.data())
            .zip(self.u.data())
            .zip(xi.data())
        {
            let m_hat = m / c1;
            let u_hat = u / c2;
            *th -= lr * x * m_hat / (u_hat.sqrt() + epsilon);
        }
        Ok(xi)
    }

    /// Updates the bias-corrected `avg` EMA and returns `|g - avg_t|`.
    fn update_avg(&mut self, g: &Tensor) -> Result<Tensor> {
        let rho2 = self.cfg.rho2;
        let mode = self.cfg.avg_mode;
        for (a, &gv) in self.avg.data_mut().iter_mut().zip(g.data()) {
            let sample = match mode {
                AvgMode::Gradient => gv,
                AvgMode::SquaredGradient => gv * gv,
            };
            *a = rho2 * *a + (1.0 - rho2) * sample;
        }
        let corr = 1.0 - rho2.powi(self.t as i32);
        g.zip_map(&self.avg, |gv, a| (gv - a / corr).abs())
    }
}

/// `max(x)` over the tensor, or `None` when it is not positive.
fn positive_max(x: &Tensor) -> Option<f64> {
    let m = x.max_element();
    (m > 0.0).then_some(m)
}

/// Normalizes `delta` by its maximum; all zeros when the maximum is zero.
pub fn normalize_by_max(delta: &Tensor) -> Tensor {
    match positive_max(delta) {
        Some(m) => delta.map(|d| d / m),
        None => Tensor::zeros(delta.shape()),
    }
}

/// DGrad: `xi = Sig(4 * delta / max(delta))`.
pub fn dgrad_modulation(delta: &Tensor) -> Tensor {
    normalize_by_max(delta).map(|d| sigmoid(4.0 * d))
}

/// Cos#1 cyclic multiplier at step `t`:
/// `2 - |cos(pi t / period)| * exp(-0.01 (t mod period + 1))`.
///
/// `t` is reduced modulo the period before the cosine, which leaves the value
/// unchanged (|cos| has period pi) and makes the periodicity exact.
pub fn cos1_lr(t: u64, period: u64) -> f64 {
    let phase = t % period;
    // |cos(pi x)| as |sin(pi (1/2 - x))| so the half-period zero is exact.
    let c = (PI * (0.5 - phase as f64 / period as f64)).sin().abs();
    2.0 - c * (-0.01 * (phase as f64 + 1.0)).exp()
}

/// Cos#1: `xi = Sig(4 * lr_t * delta / max(delta))`.
pub fn cos1_modulation(delta: &Tensor, lr_t: f64) -> Tensor {
    normalize_by_max(delta).map(|d| sigmoid(4.0 * lr_t * d))
}

/// Exp: `lr = delta * exp(-k delta)`, `xi = 1.5 * lr / max(lr)`.
pub fn exp_modulation(delta: &Tensor, k: f64) -> Tensor {
    let lr = delta.map(|d| d * (-k * d).exp());
    normalize_by_max(&lr).map(|v| 1.5 * v)
}

/// Sto: `lr = delta * exp(-4 delta) * (noise + 0.5)`, `xi = 1.5 * lr / max(lr)`,
/// with `noise` drawn from `U(0, 1)`.
pub fn sto_modulation(delta: &Tensor, noise: &Tensor) -> Result<Tensor> {
    let lr = delta.zip_map(noise, |d, x| d * (-4.0 * d).exp() * (x + 0.5))?;
    Ok(normalize_by_max(&lr).map(|v| 1.5 * v))
}

/// Rescales all gradients of one network so their joint L2 norm is at most
/// `threshold`. Returns the norm before clipping.
pub fn clip_gradients_l2(grads: &mut [Tensor], threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::invalid(format!("clip threshold must be > 0, got {threshold}")));
    }
    for g in grads.iter() {
        g.ensure_finite("gradient before clipping")?;
    }
    let norm = grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt();
    if norm > threshold {
        let s = threshold / norm;
        for g in grads.iter_mut() {
            g.scale_in_place(s);
        }
    }
    Ok(norm)
}
