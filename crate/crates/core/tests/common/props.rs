//! Seeded property checks. Each returns `Err` with a description of the
//! first violation.

use gpnet::classifier::{loss_and_grad, softmax_rows, AdamConfig, AdamState, ModelParams};
use gpnet::filter::{
    aggregate, exponent_set, channel_sum_matrix, apply_alpha_beta, propagate_features, sgc_features,
    Aggregation, FilterConfig, PropagateOptions, PropagationPath, Sign,
};
use gpnet::spectral::{filter_response, laplacian_eigen, stationary_limit, Disconnected};
use gpnet::sparse::build_adjacency;
use gpnet::DenseMatrix;
use rand::seq::SliceRandom;
use rand::Rng;

use super::*;

type Check = Result<(), String>;

fn numerically_equal(a: &DenseMatrix, b: &DenseMatrix) -> bool {
    a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x == y)
}

fn random_filter<R: Rng>(r: &mut R, m: usize, agg: Aggregation) -> FilterConfig {
    FilterConfig {
        terms: r.random_range(1..=3),
        first_item: r.random_range(0..=1),
        ratios: (0..m).map(|_| r.random_range(1..=3)).collect(),
        offsets: (0..m).map(|_| r.random_range(0..=2)).collect(),
        alpha: r.random_range(-3.0..3.0),
        beta: if r.random::<bool>() { Sign::Plus } else { Sign::Minus },
        aggregation: agg,
        self_loops: true,
    }
}

/// Aggregating a permutation of the channels gives the same matrix, both for
/// raw channel matrices and for the channels of a full configuration.
pub fn aggregator_permutation_invariance(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.random_range(2..=5);
    let (rows, cols) = (r.random_range(1..12), r.random_range(1..12));
    let channels: Vec<DenseMatrix> = (0..m).map(|_| random_dense(rows, cols, &mut r)).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut r);
    let permuted: Vec<DenseMatrix> = order.iter().map(|&i| channels[i].clone()).collect();
    for agg in Aggregation::ALL {
        if !numerically_equal(&aggregate(&channels, agg).unwrap(), &aggregate(&permuted, agg).unwrap()) {
            return Err(format!("{agg}: channel order {order:?} changed the aggregate"));
        }
    }

    let n = r.random_range(2..25);
    let s = operator(&random_edges(n, 0.25, &mut r), n, true);
    let x = random_dense(n, 4, &mut r);
    for agg in Aggregation::ALL {
        let cfg = random_filter(&mut r, m, agg);
        let mut shuffled = cfg.clone();
        shuffled.ratios = order.iter().map(|&i| cfg.ratios[i]).collect();
        shuffled.offsets = order.iter().map(|&i| cfg.offsets[i]).collect();
        let a = propagate_default(&cfg, &s, &x);
        let b = propagate_default(&shuffled, &s, &x);
        if !numerically_equal(&a, &b) {
            return Err(format!("{agg}: permuting channels of {} changed H̄", cfg.canonical()));
        }
    }
    Ok(())
}

/// Sum/Avg in feature space agree with the explicit operator.
pub fn feature_path_matches_matrix_path(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=100);
    let s = operator(&random_edges(n, r.random_range(0.0..0.15), &mut r), n, r.random::<bool>());
    let x = random_dense(n, r.random_range(1..6), &mut r);
    for agg in [Aggregation::Sum, Aggregation::Avg] {
        let m = r.random_range(1..=3);
        let cfg = random_filter(&mut r, m, agg);
        let fp = propagate_features(&cfg, &s, &x, &PropagateOptions::default()).unwrap();
        let opts = PropagateOptions { path: PropagationPath::Matrix, ..PropagateOptions::default() };
        let mp = propagate_features(&cfg, &s, &x, &opts).unwrap();
        let diff = fp.max_abs_diff(&mp);
        if diff > 1e-9 {
            return Err(format!("{}: paths differ by {diff:e} (n = {n})", cfg.canonical()));
        }
    }
    Ok(())
}

/// Each channel matrix equals `U·diag(ĝ_c(λ))·Uᵀ` on the Laplacian's eigenbasis.
pub fn spectral_identity(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=30);
    let s = operator(&random_edges(n, r.random_range(0.05..0.4), &mut r), n, r.random::<bool>());
    let m = r.random_range(1..=3);
    let cfg = random_filter(&mut r, m, Aggregation::Sum);
    let eig = laplacian_eigen(&s, 100).unwrap();
    let resp = filter_response(&cfg, &eig.eigenvalues).unwrap();
    let u = &eig.eigenvectors;
    for c in 0..cfg.channels() {
        let set = exponent_set(&cfg, c).unwrap();
        let g = apply_alpha_beta(
            &channel_sum_matrix(&s, &set, &PropagateOptions::default()).unwrap(),
            cfg.alpha,
            cfg.beta,
        )
        .unwrap();
        let mut scaled = u.clone();
        for i in 0..n {
            for (j, v) in scaled.row_mut(i).iter_mut().enumerate() {
                *v *= resp.channels[c][j];
            }
        }
        let rebuilt = scaled.matmul(&u.transpose()).unwrap();
        let diff = g.max_abs_diff(&rebuilt);
        if diff > 1e-8 {
            return Err(format!("channel {c} of {}: {diff:e} (n = {n})", cfg.canonical()));
        }
    }
    Ok(())
}

/// `S^500` reaches `√(d̃ᵢd̃ⱼ)/(2e+n)` on connected graphs with self-loops.
pub fn stationary_convergence(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(2..=20);
    let edges = connected_edges(n, 0.35, &mut r);
    let adj = build_adjacency(&edges, n, true).unwrap();
    let limit = stationary_limit(&adj, Disconnected::Reject).unwrap();
    let e = (adj.nnz() - n) / 2;
    let closed = {
        let deg = adj.degrees().0;
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, (deg[i] * deg[j]).sqrt() / (2 * e + n) as f64);
            }
        }
        m
    };
    if limit.max_abs_diff(&closed) > 1e-15 {
        return Err("stationary_limit disagrees with the closed form".into());
    }
    let power = fast_power(&operator(&edges, n, true).to_dense(), 500);
    let diff = power.max_abs_diff(&closed);
    if diff > 1e-6 {
        return Err(format!("S^500 is {diff:e} from the limit (n = {n}, e = {e})"));
    }
    Ok(())
}

/// Analytic gradient against central differences, relative 1e-6.
pub fn gradient_check(seed: u64) -> Check {
    let mut r = rng(seed);
    let (n, d, c) = (r.random_range(2..15), r.random_range(1..6), r.random_range(2..5));
    let h = random_dense(n, d, &mut r);
    let labels: Vec<u16> = (0..n).map(|_| r.random_range(0..c) as u16).collect();
    let mask: Vec<usize> = (0..n).collect();
    let mut params = ModelParams::zeros(d, c, r.random::<bool>());
    params.weights = random_dense(d, c, &mut r);
    let wd = r.random_range(0.0..0.1);
    let (_, grad) = loss_and_grad(&h, &params, &labels, &mask, wd).unwrap();
    let step = 1e-6;
    for k in 0..d * c {
        let mut p = params.clone();
        p.weights.data_mut()[k] += step;
        let up = loss_and_grad(&h, &p, &labels, &mask, wd).unwrap().0;
        p.weights.data_mut()[k] -= 2.0 * step;
        let down = loss_and_grad(&h, &p, &labels, &mask, wd).unwrap().0;
        let numeric = (up - down) / (2.0 * step);
        let analytic = grad.weights.data()[k];
        let scale = analytic.abs().max(numeric.abs()).max(1e-3);
        if (analytic - numeric).abs() / scale > 1e-6 {
            return Err(format!("dW[{k}]: analytic {analytic} vs numeric {numeric}"));
        }
    }
    Ok(())
}

/// SGC and MLP special cases reproduce their reference features exactly.
pub fn reductions(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..40);
    let s = operator(&random_edges(n, 0.2, &mut r), n, true);
    let x = random_dense(n, 5, &mut r);
    let w = random_dense(5, 3, &mut r);

    let sgc_cfg = FilterConfig::sgc(2);
    if sgc_cfg.max_exponent() != 2 || sgc_cfg.alpha != 0.0 {
        return Err("sgc(2) is not α=0, single exponent 2".into());
    }
    let gp = propagate_default(&sgc_cfg, &s, &x);
    let sgc = sgc_features(&s, &x, 2).unwrap();
    if !numerically_equal(&logits(&gp, &w), &logits(&sgc, &w)) {
        return Err("SGC reduction logits differ".into());
    }

    for (alpha, beta) in [(0.0, Sign::Plus), (1.0, Sign::Plus), (0.0, Sign::Minus), (1.0, Sign::Minus)] {
        let h = propagate_default(&FilterConfig::mlp(alpha, beta), &s, &x);
        let want = x.scaled(alpha + beta.value());
        if !numerically_equal(&logits(&h, &w), &logits(&want, &w)) {
            return Err(format!("MLP reduction with α={alpha}, β={beta} differs from (α+β)·X"));
        }
    }
    Ok(())
}

/// Negating propagation and weights together leaves logits bit-identical.
pub fn joint_negation(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..40);
    let s = operator(&random_edges(n, 0.2, &mut r), n, true);
    let x = random_dense(n, 4, &mut r);
    let w = random_dense(4, 3, &mut r);
    for agg in Aggregation::ALL {
        let m = r.random_range(1..=3);
        let cfg = random_filter(&mut r, m, agg);
        let h = propagate_default(&cfg, &s, &x);
        let neg_h = h.scaled(-1.0);
        if !bitwise_eq(&logits(&h, &w), &logits(&neg_h, &w.scaled(-1.0))) {
            return Err(format!("{}: logits(−H̄, −W) differ", cfg.canonical()));
        }
        if agg.is_linear() {
            // Flipping α and β negates the whole operator.
            let flipped = FilterConfig {
                alpha: -cfg.alpha,
                beta: if cfg.beta == Sign::Plus { Sign::Minus } else { Sign::Plus },
                ..cfg.clone()
            };
            let hf = propagate_default(&flipped, &s, &x);
            if !numerically_equal(&hf, &neg_h) {
                return Err(format!("{}: flipping α, β did not negate H̄", cfg.canonical()));
            }
            if !bitwise_eq(&logits(&h, &w), &logits(&hf, &w.scaled(-1.0))) {
                return Err(format!("{}: flipped operator logits differ", cfg.canonical()));
            }
        }
    }
    Ok(())
}

/// Adding a constant to a row of logits leaves its probabilities unchanged.
pub fn softmax_shift_invariance(seed: u64) -> Check {
    let mut r = rng(seed);
    let z = random_dense(r.random_range(1..10), r.random_range(1..8), &mut r).scaled(10.0);
    let mut shifted = z.clone();
    for i in 0..z.rows() {
        let c = r.random_range(-50.0..50.0);
        shifted.row_mut(i).iter_mut().for_each(|v| *v += c);
    }
    let diff = softmax_rows(&z).max_abs_diff(&softmax_rows(&shifted));
    if diff > 1e-12 {
        return Err(format!("shift changed probabilities by {diff:e}"));
    }
    Ok(())
}

/// With zero features the data gradient vanishes and weight decay alone
/// shrinks ‖W‖ every step.
pub fn l2_decay(seed: u64) -> Check {
    let mut r = rng(seed);
    let (d, c) = (r.random_range(1..6), r.random_range(2..5));
    let h = DenseMatrix::zeros(6, d);
    let labels: Vec<u16> = (0..6).map(|i| (i % c) as u16).collect();
    let mask: Vec<usize> = (0..6).collect();
    let mut params = ModelParams::zeros(d, c, false);
    params.weights = random_dense(d, c, &mut r).scaled(2.0);
    params.weights.data_mut().iter_mut().for_each(|v| *v += v.signum());
    let cfg = AdamConfig::new(1e-3);
    let mut st = AdamState::new(d * c);
    let mut norm = params.weights.frobenius_sq();
    for step in 0..50 {
        let (_, g) = loss_and_grad(&h, &params, &labels, &mask, 0.1).unwrap();
        st.step(params.weights.data_mut(), g.weights.data(), &cfg);
        let next = params.weights.frobenius_sq();
        if next >= norm {
            return Err(format!("‖W‖ did not decrease at step {step}"));
        }
        norm = next;
    }
    Ok(())
}
