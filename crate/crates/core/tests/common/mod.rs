//! Shared oracles for the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mlkit::ensemble::{build_network, Network, NetworkSpec, Topology};
use mlkit::layers::{
    batchnorm_apply, batchnorm_backward, conv1d_backward, conv1d_forward, dense_backward, dense_forward,
    gru_backward, gru_forward, maxpool_time_backward, maxpool_time_forward, relu, relu_backward, sigmoid,
    sigmoid_backward, BatchNormParams, ConvParams, DenseParams, GruParams, Mode,
};
use mlkit::metrics::{
    absolute_false, absolute_true, accuracy_ml, aiming, average_precision, bce_grad, bce_loss, coverage, hamming_loss,
    one_error, ranking_loss, recall, PredictionSet,
};
use mlkit::optim::{OptimConfig, OptimizerState, Variant};
use mlkit::pipeline::{imcc_augment, Dataset};
use mlkit::numerics::{RngStream, Tensor};

pub const FD_STEP: f64 = 1e-6;
/// Gradients below this magnitude sit under the central-difference noise
/// floor, so relative error is measured against at least this scale.
pub const REL_FLOOR: f64 = 1e-5;
/// Whole networks chain many more rounding steps into the loss, which lifts
/// the central-difference noise to about 3e-9.
pub const NETWORK_REL_FLOOR: f64 = 1e-4;

pub fn rel_err(a: f64, n: f64) -> f64 {
    rel_err_floor(a, n, REL_FLOOR)
}

pub fn rel_err_floor(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

pub fn random_tensor(shape: &[usize], lo: f64, hi: f64, rng: &mut RngStream) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..len).map(|_| rng.uniform_range(lo, hi)).collect()).unwrap()
}

/// Worst relative error between `analytic[i]` and central differences of
/// `loss` with respect to every entry of `vars[i]`.
pub fn compare(vars: &mut [Tensor], analytic: &[Tensor], loss: &dyn Fn(&[Tensor]) -> f64) -> f64 {
    compare_with_floor(vars, analytic, loss, REL_FLOOR)
}

pub fn compare_with_floor(
    vars: &mut [Tensor],
    analytic: &[Tensor],
    loss: &dyn Fn(&[Tensor]) -> f64,
    floor: f64,
) -> f64 {
    assert_eq!(vars.len(), analytic.len());
    let mut worst = 0.0f64;
    for v in 0..vars.len() {
        assert_eq!(vars[v].shape(), analytic[v].shape(), "gradient shape of variable {v}");
        for k in 0..vars[v].len() {
            let orig = vars[v].data()[k];
            vars[v].data_mut()[k] = orig + FD_STEP;
            let lp = loss(vars);
            vars[v].data_mut()[k] = orig - FD_STEP;
            let lm = loss(vars);
            vars[v].data_mut()[k] = orig;
            let num = (lp - lm) / (2.0 * FD_STEP);
            worst = worst.max(rel_err_floor(analytic[v].data()[k], num, floor));
        }
    }
    worst
}

fn weighted_sum(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn dims(rng: &mut RngStream) -> (usize, usize, usize) {
    (2 + rng.below(2), 2 + rng.below(4), 1 + rng.below(3))
}

/// GRU: all nine parameters, the input sequence, and the initial state.
pub fn gru_case(rng: &mut RngStream) -> f64 {
    let (b, t, d) = dims(rng);
    let n = 1 + rng.below(4);
    let p = GruParams::init(d, n, rng);
    let mut vars: Vec<Tensor> = p.tensors().iter().map(|t| (*t).clone()).collect();
    for v in vars.iter_mut().skip(6) {
        *v = random_tensor(v.shape(), -0.5, 0.5, rng);
    }
    vars.push(random_tensor(&[b, t, d], -1.0, 1.0, rng));
    vars.push(random_tensor(&[b, n], -0.5, 0.5, rng));
    let r = random_tensor(&[b, t, n], -1.0, 1.0, rng);
    let unpack = |vars: &[Tensor]| {
        let mut q = GruParams::zeros(d, n);
        for (dst, src) in q.tensors_mut().into_iter().zip(vars) {
            *dst = src.clone();
        }
        q
    };
    let q = unpack(&vars);
    let (_, cache) = gru_forward(&q, &vars[9], Some(&vars[10])).unwrap();
    let g = gru_backward(&q, &cache, &r).unwrap();
    let mut analytic = g.params;
    analytic.push(g.input);
    analytic.push(g.initial_state.expect("initial state gradient"));
    compare(&mut vars, &analytic, &|v| {
        let q = unpack(v);
        weighted_sum(&gru_forward(&q, &v[9], Some(&v[10])).unwrap().0, &r)
    })
}

pub fn conv_case(dilation: usize, rng: &mut RngStream) -> f64 {
    let (b, t, cin) = dims(rng);
    let t = t + 2;
    let f = 1 + rng.below(3);
    let width = [1, 3, 5][rng.below(3)];
    let mut vars = vec![
        random_tensor(&[f, cin, width], -1.0, 1.0, rng),
        random_tensor(&[f], -0.5, 0.5, rng),
        random_tensor(&[b, t, cin], -1.0, 1.0, rng),
    ];
    let r = random_tensor(&[b, t, f], -1.0, 1.0, rng);
    let build = |v: &[Tensor]| ConvParams::new(v[0].clone(), v[1].clone(), dilation).unwrap();
    let p = build(&vars);
    let (_, cache) = conv1d_forward(&p, &vars[2]).unwrap();
    let g = conv1d_backward(&p, &cache, &r).unwrap();
    let mut analytic = g.params;
    analytic.push(g.input);
    compare(&mut vars, &analytic, &|v| weighted_sum(&conv1d_forward(&build(v), &v[2]).unwrap().0, &r))
}

pub fn batchnorm_case(mode: Mode, rng: &mut RngStream) -> f64 {
    let (b, t, c) = dims(rng);
    let mut base = BatchNormParams::new(c);
    base.running_mean = random_tensor(&[c], -0.5, 0.5, rng);
    base.running_var = random_tensor(&[c], 0.5, 2.0, rng);
    let mut vars = vec![
        random_tensor(&[c], 0.5, 2.0, rng),
        random_tensor(&[c], -0.5, 0.5, rng),
        random_tensor(&[b, t, c], -2.0, 2.0, rng),
    ];
    let r = random_tensor(&[b, t, c], -1.0, 1.0, rng);
    let build = |v: &[Tensor]| {
        let mut p = base.clone();
        p.gamma = v[0].clone();
        p.beta = v[1].clone();
        p
    };
    let p = build(&vars);
    let (_, cache) = batchnorm_apply(&p, &vars[2], mode).unwrap();
    let g = batchnorm_backward(&p, &cache, &r).unwrap();
    let mut analytic = g.params;
    analytic.push(g.input);
    compare(&mut vars, &analytic, &|v| weighted_sum(&batchnorm_apply(&build(v), &v[2], mode).unwrap().0, &r))
}

/// Dense on a 2-D batch or, time-distributed, on a sequence.
pub fn dense_case(rng: &mut RngStream) -> f64 {
    let (b, t, i) = dims(rng);
    let o = 1 + rng.below(3);
    let xshape = if rng.below(2) == 0 { vec![b, i] } else { vec![b, t, i] };
    let mut oshape = xshape.clone();
    *oshape.last_mut().unwrap() = o;
    let mut vars = vec![
        random_tensor(&[o, i], -1.0, 1.0, rng),
        random_tensor(&[o], -0.5, 0.5, rng),
        random_tensor(&xshape, -1.0, 1.0, rng),
    ];
    let r = random_tensor(&oshape, -1.0, 1.0, rng);
    let build = |v: &[Tensor]| DenseParams {
        weights: v[0].clone(),
        bias: v[1].clone(),
    };
    let p = build(&vars);
    let (_, cache) = dense_forward(&p, &vars[2]).unwrap();
    let g = dense_backward(&p, &cache, &r).unwrap();
    let mut analytic = g.params;
    analytic.push(g.input);
    compare(&mut vars, &analytic, &|v| weighted_sum(&dense_forward(&build(v), &v[2]).unwrap().0, &r))
}

pub fn maxpool_case(rng: &mut RngStream) -> f64 {
    let (b, t, c) = dims(rng);
    let mut vars = vec![random_tensor(&[b, t, c], -1.0, 1.0, rng)];
    let r = random_tensor(&[b, c], -1.0, 1.0, rng);
    let (_, cache) = maxpool_time_forward(&vars[0]).unwrap();
    let analytic = vec![maxpool_time_backward(&cache, &r).unwrap()];
    compare(&mut vars, &analytic, &|v| weighted_sum(&maxpool_time_forward(&v[0]).unwrap().0, &r))
}

/// `sigmoid(dense(relu(dense(x))))`, differentiated end to end.
pub fn activation_chain_case(rng: &mut RngStream) -> f64 {
    let (b, t, i) = dims(rng);
    let h = 2 + rng.below(3);
    let o = 1 + rng.below(3);
    let mut vars = vec![
        random_tensor(&[h, i], -1.0, 1.0, rng),
        random_tensor(&[h], -0.5, 0.5, rng),
        random_tensor(&[o, h], -1.0, 1.0, rng),
        random_tensor(&[o], -0.5, 0.5, rng),
        random_tensor(&[b, t, i], -1.0, 1.0, rng),
    ];
    let r = random_tensor(&[b, t, o], -1.0, 1.0, rng);
    let fwd = |v: &[Tensor]| {
        let p1 = DenseParams {
            weights: v[0].clone(),
            bias: v[1].clone(),
        };
        let p2 = DenseParams {
            weights: v[2].clone(),
            bias: v[3].clone(),
        };
        let (a1, c1) = dense_forward(&p1, &v[4]).unwrap();
        let z1 = relu(&a1);
        let (a2, c2) = dense_forward(&p2, &z1).unwrap();
        let y = sigmoid(&a2);
        (p1, p2, a1, c1, c2, y)
    };
    let (p1, p2, a1, c1, c2, y) = fwd(&vars);
    let d_a2 = sigmoid_backward(&y, &r).unwrap();
    let g2 = dense_backward(&p2, &c2, &d_a2).unwrap();
    let d_a1 = relu_backward(&a1, &g2.input).unwrap();
    let g1 = dense_backward(&p1, &c1, &d_a1).unwrap();
    let analytic = vec![
        g1.params[0].clone(),
        g1.params[1].clone(),
        g2.params[0].clone(),
        g2.params[1].clone(),
        g1.input,
    ];
    compare(&mut vars, &analytic, &|v| weighted_sum(&fwd(v).5, &r))
}

/// Cross-entropy against soft targets.
pub fn bce_case(rng: &mut RngStream) -> f64 {
    let (m, _, l) = dims(rng);
    let y = random_tensor(&[m, l], 0.0, 1.0, rng);
    let mut vars = vec![random_tensor(&[m, l], 0.05, 0.95, rng)];
    let analytic = vec![bce_grad(&y, &vars[0]).unwrap()];
    compare(&mut vars, &analytic, &|v| bce_loss(&y, &v[0]).unwrap())
}

/// Whole-network parameter gradients of the cross-entropy loss.
pub fn network_case(topology: Topology, rng: &mut RngStream) -> f64 {
    let mut spec = NetworkSpec::new(topology, 2);
    spec.hidden_units = 3;
    spec.tcn_filters = 2;
    spec.tcn_blocks = 2;
    spec.pre_conv_filters = 2;
    spec.dropout = 0.0;
    let d = 3 + rng.below(2);
    let mut net = build_network(&spec, d, rng).unwrap();
    // zero-initialized biases can park a ReLU exactly on its kink
    for p in net.params_mut() {
        for v in p.data_mut() {
            *v += rng.uniform_range(-0.2, 0.2);
        }
    }
    let x = random_tensor(&[3, d], 0.0, 1.0, rng);
    let y = random_tensor(&[3, 2], 0.0, 1.0, rng).map(|v| (v > 0.5) as u8 as f64);
    let enc = net.encode(&x).unwrap();
    let loss_of = |n: &Network| {
        let (p, _) = n.clone().forward(&enc, Mode::Train, &mut RngStream::from_seed(0)).unwrap();
        bce_loss(&y, &p).unwrap()
    };
    let (p, caches) = net.clone().forward(&enc, Mode::Train, &mut RngStream::from_seed(0)).unwrap();
    let (analytic, _) = net.backward(&caches, &bce_grad(&y, &p).unwrap()).unwrap();
    let mut vars: Vec<Tensor> = net.params().into_iter().cloned().collect();
    let loss = |v: &[Tensor]| {
        let mut n = net.clone();
        for (dst, src) in n.params_mut().into_iter().zip(v) {
            *dst = src.clone();
        }
        loss_of(&n)
    };
    compare_with_floor(&mut vars, &analytic, &loss, NETWORK_REL_FLOOR)
}

/// Runs `cases` random configurations of one suite and returns the worst error.
pub fn run_suite(cases: usize, seed: u64, mut case: impl FnMut(&mut RngStream) -> f64) -> f64 {
    let mut rng = RngStream::from_seed(seed);
    (0..cases).map(|_| case(&mut rng)).fold(0.0, f64::max)
}

/// Every gradient suite with its worst relative error over `cases` configurations.
pub fn gradient_suites(cases: usize) -> Vec<(String, f64)> {
    let mut out = vec![
        ("gru".to_string(), run_suite(cases, 1, gru_case)),
        ("conv1d dilation 1".to_string(), run_suite(cases, 2, |r| conv_case(1, r))),
        ("conv1d dilation 2".to_string(), run_suite(cases, 3, |r| conv_case(2, r))),
        ("conv1d dilation 4".to_string(), run_suite(cases, 4, |r| conv_case(4, r))),
        ("batchnorm train".to_string(), run_suite(cases, 5, |r| batchnorm_case(Mode::Train, r))),
        ("batchnorm eval".to_string(), run_suite(cases, 6, |r| batchnorm_case(Mode::Eval, r))),
        ("dense".to_string(), run_suite(cases, 7, dense_case)),
        ("maxpool time".to_string(), run_suite(cases, 8, maxpool_case)),
        ("sigmoid/relu chain".to_string(), run_suite(cases, 9, activation_chain_case)),
        ("bce loss".to_string(), run_suite(cases, 10, bce_case)),
    ];
    for (i, topo) in Topology::ALL.into_iter().enumerate() {
        out.push((format!("network {topo}"), run_suite(cases.min(4), 20 + i as u64, |r| network_case(topo, r))));
    }
    out
}

// ---------------------------------------------------------------------------
// Brute-force metric oracles.

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// The unique label order that is non-increasing in score with ties broken
/// by ascending index, found by enumerating every permutation.
pub fn stable_order_by_enumeration(f: &[f64]) -> Vec<usize> {
    let valid: Vec<Vec<usize>> = permutations(f.len())
        .into_iter()
        .filter(|p| p.windows(2).all(|w| f[w[0]] > f[w[1]] || (f[w[0]] == f[w[1]] && w[0] < w[1])))
        .collect();
    assert_eq!(valid.len(), 1);
    valid.into_iter().next().unwrap()
}

fn labels_of(row: &[f64]) -> BTreeSet<usize> {
    (0..row.len()).filter(|&j| row[j] == 1.0).collect()
}

pub struct OracleMetrics {
    pub hamming_loss: f64,
    pub one_error: f64,
    pub ranking_loss: Option<f64>,
    pub coverage: f64,
    pub average_precision: Option<f64>,
    pub aiming: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub absolute_true: f64,
    pub absolute_false: f64,
}

pub fn oracle_metrics(ps: &PredictionSet) -> OracleMetrics {
    let (m, l) = (ps.y.rows(), ps.y.cols());
    let mut hl = 0.0;
    let mut oe = 0.0;
    let (mut rl, mut rl_n) = (0.0, 0);
    let mut cov = 0.0;
    let (mut ap, mut ap_n) = (0.0, 0);
    let (mut aim, mut rec, mut acc, mut at, mut af) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..m {
        let y = labels_of(ps.y.row(i));
        let h = labels_of(ps.h.row(i));
        let f = ps.f.row(i);
        let inter = y.intersection(&h).count() as f64;
        let union = y.union(&h).count() as f64;
        let sym = y.symmetric_difference(&h).count() as f64;
        hl += sym / (l as f64);
        af += sym / l as f64;
        at += f64::from(u8::from(y == h));
        aim += if h.is_empty() { 0.0 } else { inter / h.len() as f64 };
        rec += if y.is_empty() { 0.0 } else { inter / y.len() as f64 };
        acc += if union == 0.0 { 0.0 } else { inter / union };

        let order = stable_order_by_enumeration(f);
        oe += f64::from(u8::from(!y.contains(&order[0])));

        if !y.is_empty() && y.len() < l {
            let mut bad = 0.0;
            let mut pairs = 0.0;
            for a in 0..l {
                for b in 0..l {
                    if y.contains(&a) && !y.contains(&b) {
                        pairs += 1.0;
                        bad += if f[a] < f[b] { 1.0 } else if f[a] == f[b] { 0.5 } else { 0.0 };
                    }
                }
            }
            rl += bad / pairs;
            rl_n += 1;
        }
        if let Some(lowest) = y.iter().map(|&j| f[j]).min_by(f64::total_cmp) {
            cov += (f.iter().filter(|&&v| v >= lowest).count() - 1) as f64;
        }
        if !y.is_empty() {
            let mut hits = 0.0;
            let mut sum = 0.0;
            for (pos, &j) in order.iter().enumerate() {
                if y.contains(&j) {
                    hits += 1.0;
                    sum += hits / (pos + 1) as f64;
                }
            }
            ap += sum / y.len() as f64;
            ap_n += 1;
        }
    }
    let m = m as f64;
    OracleMetrics {
        hamming_loss: hl / m,
        one_error: oe / m,
        ranking_loss: (rl_n > 0).then(|| rl / rl_n as f64),
        coverage: cov / m,
        average_precision: (ap_n > 0).then(|| ap / ap_n as f64),
        aiming: aim / m,
        recall: rec / m,
        accuracy: acc / m,
        absolute_true: at / m,
        absolute_false: af / m,
    }
}

/// A random prediction set with `m <= 8`, `l <= 6`; scores come from a
/// coarse grid so ties are frequent.
pub fn random_prediction_set(rng: &mut RngStream) -> PredictionSet {
    let m = 1 + rng.below(8);
    let l = 1 + rng.below(6);
    let bits = |rng: &mut RngStream| {
        Tensor::new(vec![m, l], (0..m * l).map(|_| rng.below(2) as f64).collect()).unwrap()
    };
    let y = bits(rng);
    let h = bits(rng);
    let f = Tensor::new(vec![m, l], (0..m * l).map(|_| rng.below(9) as f64 / 8.0).collect()).unwrap();
    PredictionSet::new(y, h, f).unwrap()
}

/// Largest deviation between the metric implementations and the oracle, or
/// an error when one side is defined and the other is not.
pub fn metric_oracle_error(ps: &PredictionSet) -> Result<f64, String> {
    let o = oracle_metrics(ps);
    let mut worst: f64 = 0.0;
    let pairs = [
        ("hamming_loss", hamming_loss(ps), o.hamming_loss),
        ("one_error", one_error(ps), o.one_error),
        ("coverage", coverage(ps), o.coverage),
        ("aiming", aiming(ps), o.aiming),
        ("recall", recall(ps), o.recall),
        ("accuracy", accuracy_ml(ps), o.accuracy),
        ("absolute_true", absolute_true(ps), o.absolute_true),
        ("absolute_false", absolute_false(ps), o.absolute_false),
    ];
    for (name, a, b) in pairs {
        let e = (a - b).abs();
        if !(e <= 1e-12) {
            return Err(format!("{name}: {a} vs {b}"));
        }
        worst = worst.max(e);
    }
    for (name, a, b) in [
        ("ranking_loss", ranking_loss(ps).ok(), o.ranking_loss),
        ("average_precision", average_precision(ps).ok(), o.average_precision),
    ] {
        match (a, b) {
            (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
            (None, None) => {}
            _ => return Err(format!("{name} definedness differs: {a:?} vs {b:?}")),
        }
    }
    Ok(worst)
}

/// Whether the ranking metrics are unchanged under three increasing maps of the scores.
pub fn ranking_metrics_monotone_invariant(ps: &PredictionSet) -> bool {
    [|v: f64| 3.0 * v + 0.5, |v: f64| v * v * v, |v: f64| v.exp()].into_iter().all(|g| {
        let moved = PredictionSet::new(ps.y.clone(), ps.h.clone(), ps.f.map(g)).unwrap();
        one_error(ps) == one_error(&moved)
            && coverage(ps) == coverage(&moved)
            && ranking_loss(ps).ok() == ranking_loss(&moved).ok()
            && average_precision(ps).ok() == average_precision(&moved).ok()
    })
}

/// Augments a random small dataset and returns the largest deviation of the
/// cluster centers from means computed by direct summation over each cluster.
pub fn augmentation_case(rng: &mut RngStream) -> f64 {
    let n = 3 + rng.below(12);
    let d = 1 + rng.below(4);
    let l = 1 + rng.below(4);
    let x = random_tensor(&[n, d], -1.0, 1.0, rng);
    let y = Tensor::new(vec![n, l], (0..n * l).map(|_| rng.below(2) as f64).collect()).unwrap();
    let ds = Dataset::new("a", x.clone(), y.clone(), false).unwrap();
    let c = 1 + rng.below(n);
    let aug = imcc_augment(&ds, c, rng).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..c {
        let members: Vec<usize> = (0..n).filter(|&i| aug.assignments[i] == k).collect();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let mean = |t: &Tensor, j: usize| members.iter().map(|&i| t.get2(i, j)).sum::<f64>() / members.len() as f64;
        for j in 0..d {
            worst = worst.max((aug.z.get2(k, j) - mean(&x, j)).abs());
        }
        for j in 0..l {
            worst = worst.max((aug.t.get2(k, j) - mean(&y, j)).abs());
        }
    }
    worst
}

/// With one cluster per sample the centers are exactly the samples.
pub fn one_cluster_per_sample_is_exact(rng: &mut RngStream) -> bool {
    let x = random_tensor(&[9, 3], -1.0, 1.0, rng);
    let y = Tensor::new(vec![9, 2], (0..18).map(|i| (i % 3 == 0) as u8 as f64).collect()).unwrap();
    let ds = Dataset::new("a", x.clone(), y.clone(), false).unwrap();
    let aug = imcc_augment(&ds, 9, rng).unwrap();
    let mut rows: Vec<(Vec<f64>, Vec<f64>)> = (0..9).map(|k| (aug.z.row(k).to_vec(), aug.t.row(k).to_vec())).collect();
    let mut orig: Vec<(Vec<f64>, Vec<f64>)> = (0..9).map(|i| (x.row(i).to_vec(), y.row(i).to_vec())).collect();
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    orig.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rows == orig
}

/// Closed range every element of an optimizer's modulation must lie in.
pub fn xi_bounds(variant: Variant) -> (f64, f64) {
    match variant {
        Variant::Adam => (1.0, 1.0),
        Variant::DiffGrad => (0.5, 1.0),
        Variant::DGrad => (0.5, mlkit::numerics::sigmoid(4.0)),
        Variant::Cos1 => (0.5, mlkit::numerics::sigmoid(8.0)),
        Variant::Exp | Variant::Sto => (0.0, 1.5),
    }
}

/// Checks one modulation tensor against [`xi_bounds`]. The diffGrad upper
/// bound is closed because `Sig(x)` rounds to exactly 1.0 once `x > 36.7`.
pub fn check_xi(variant: Variant, xi: &Tensor) -> Result<(), String> {
    let (lo, hi) = xi_bounds(variant);
    match xi.data().iter().find(|&&v| !(v >= lo && v <= hi)) {
        Some(v) => Err(format!("{variant}: xi {v} outside [{lo}, {hi}]")),
        None => Ok(()),
    }
}

/// Runs `steps` updates of `variant` on a random tensor with heavy-tailed
/// random gradients, checking the modulation at every step.
pub fn xi_bound_run(variant: Variant, steps: usize, rng: &mut RngStream) -> Result<(), String> {
    let len = 1 + rng.below(8);
    let cfg = OptimConfig {
        learning_rate: rng.uniform_range(1e-4, 0.1),
        rho1: rng.uniform_range(0.0, 0.95),
        rho2: rng.uniform_range(0.5, 0.9999),
        ..OptimConfig::default()
    };
    let mut state = OptimizerState::new(variant, &[len], cfg, Some(rng.child(7))).map_err(|e| e.to_string())?;
    let mut theta = random_tensor(&[len], -1.0, 1.0, rng);
    for _ in 0..steps {
        let scale = 10f64.powf(rng.uniform_range(-6.0, 3.0));
        let g = Tensor::vector((0..len).map(|_| scale * rng.normal()).collect());
        let xi = state.step(&mut theta, &g).map_err(|e| e.to_string())?;
        check_xi(variant, &xi)?;
    }
    Ok(())
}

/// Writes a small synthetic dataset file into `dir` and returns its path.
pub fn small_dataset_file(dir: &std::path::Path, n: usize, seed: u64) -> std::path::PathBuf {
    let task = mlkit::harness::synthetic_linear_task(n, 6, 3, 0.05, &mut RngStream::from_seed(seed)).unwrap();
    let path = dir.join("small.txt");
    mlkit::harness::save_dataset(&task.dataset, &path).unwrap();
    path
}

/// A run configuration that finishes in well under a second.
pub fn small_run_config(dataset: &std::path::Path, out: &std::path::Path) -> mlkit::harness::RunConfig {
    let mut cfg = mlkit::harness::RunConfig::new(dataset, out);
    cfg.members = 2;
    cfg.epochs = Some(3);
    cfg.hidden_units = 4;
    cfg.input_encoding = mlkit::ensemble::InputEncoding::SingleStep;
    cfg.folds = mlkit::harness::FoldScheme::KFold(2);
    cfg
}
