//! Property suites behind `hyla verify` and the acceptance tests: the
//! ball-constraint sweeps, round-trip and gradient oracles, the
//! reordering/equivalence checks for every mechanism, and the end-to-end
//! pipeline invariants. Everything is seeded and single-threaded.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::{
    hyperbolic_linear_attention, linear_attention, qkv_views, rwkv_wkv, softmax_weight_matrix,
    ssm_conv, ssm_discretize, ssm_scan, AttentionConfig, Kernel, Normalize, ProjectionWeights,
    QkvMode, RwkvParams, SsmParams, WkvMode,
};
use crate::model::{
    gen_synthetic_skeletons, hyliformer_block, hyliformer_forward, layer_weights, tokenize,
    untokenize, AttentionAxis, LinearProbe, ModelConfig, SkeletonSequence, SyntheticDatasetSpec,
};
use crate::poincare::{htc_forward, htc_inverse, htc_jvp, metric_factor, Curvature, PoincareBatch};
use crate::tensor::{norm, DenseArray};

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn run(name: &str, body: impl FnOnce() -> Result<String, String>) -> PropertyResult {
    match body() {
        Ok(detail) => PropertyResult {
            name: name.into(),
            passed: true,
            detail,
        },
        Err(detail) => PropertyResult {
            name: name.into(),
            passed: false,
            detail,
        },
    }
}

const SWEEP_KAPPAS: [f64; 4] = [-0.5, -1.0, -2.0, -3.0];

fn random_row(rng: &mut ChaCha8Rng, f: usize, scale: f64) -> Vec<f64> {
    (0..f).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

/// Forward-map ball sweep: every forward output row lands strictly inside the ball,
/// for entry scales spanning 1e-3..1e3.
pub fn forward_ball_constraint(seed: u64, samples_per_kappa: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_margin = f64::INFINITY;
    for kappa in SWEEP_KAPPAS {
        let kappa = Curvature::new(kappa).unwrap();
        let r = kappa.radius();
        let mut checked = 0;
        while checked < samples_per_kappa {
            let f = rng.random_range(1..16);
            let rows = rng.random_range(1..8).min(samples_per_kappa - checked).max(1);
            let scale = 10f64.powf(rng.random_range(-3.0..3.0));
            let data: Vec<f64> = (0..rows * f)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            let x = DenseArray::new(vec![rows, f], data).unwrap();
            let out = htc_forward(&x, kappa).map_err(|e| e.to_string())?;
            for &n in out.tokens().row_norms().data() {
                if !(n < r) {
                    return Err(format!("output norm {n} >= radius {r} at kappa {}", kappa.kappa()));
                }
                worst_margin = worst_margin.min(r - n);
            }
            checked += rows;
        }
    }
    Ok(format!(
        "{} samples per kappa in {{-0.5,-1,-2,-3}}, min boundary margin {worst_margin:.3e}",
        samples_per_kappa
    ))
}

pub fn direction_preservation(seed: u64, kappa: Curvature) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let f = rng.random_range(1..12);
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let row = random_row(&mut rng, f, scale);
        let n = norm(&row);
        if n < 1e-9 {
            continue;
        }
        let x = DenseArray::new(vec![1, f], row.clone()).unwrap();
        let out = htc_forward(&x, kappa).map_err(|e| e.to_string())?;
        let o = out.tokens().row(0);
        let on = norm(o);
        for j in 0..f {
            let diff = (o[j] / on - row[j] / n).abs();
            worst = worst.max(diff);
            if diff > 1e-12 {
                return Err(format!("unit-direction deviation {diff:.3e} > 1e-12"));
            }
        }
    }
    Ok(format!("1000 samples, max unit-direction deviation {worst:.3e}"))
}

pub fn norm_monotonicity(seed: u64, kappa: Curvature) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = kappa.radius();
    for _ in 0..500 {
        let f = rng.random_range(1..8);
        let dir = random_row(&mut rng, f, 1.0);
        if norm(&dir) < 1e-9 {
            continue;
        }
        let (a, b) = {
            let a = 10f64.powf(rng.random_range(-2.0..2.0));
            let b = 10f64.powf(rng.random_range(-2.0..2.0));
            (a.min(b), a.max(b))
        };
        if a == b {
            continue;
        }
        let scaled = |s: f64| {
            let u = norm(&dir);
            DenseArray::new(vec![1, f], dir.iter().map(|&v| v * s / u).collect()).unwrap()
        };
        let na = htc_forward(&scaled(a), kappa).unwrap().tokens().row_norms().data()[0];
        let nb = htc_forward(&scaled(b), kappa).unwrap().tokens().row_norms().data()[0];
        // strict ordering is only representable while tanh has not
        // saturated in f64; past that the outputs may tie exactly
        let ma = (r * (a / r).tanh()).min(r * (1.0 - 1e-12));
        let mb = (r * (b / r).tanh()).min(r * (1.0 - 1e-12));
        if ma < mb {
            if !(na < nb) {
                return Err(format!("norms {na} !< {nb} for input norms {a} < {b}"));
            }
        } else if na - nb > 4e-15 * r {
            return Err(format!("norms {na} > {nb} for input norms {a} < {b}"));
        }
    }
    // hierarchy mapping along one ray: small inputs near the origin,
    // large inputs approach but never reach the boundary
    let eps = 0.005 * r;
    let e1 = |s: f64| DenseArray::new(vec![1, 1], vec![s]).unwrap();
    let small = htc_forward(&e1(eps), kappa).unwrap().tokens().row_norms().data()[0];
    if !(small < 0.01 * r) {
        return Err(format!("htc({eps}) = {small} not < 0.01 r"));
    }
    let mut prev = 0.0;
    for exp in 0..=3 {
        let t = 10f64.powi(exp);
        let n = htc_forward(&e1(t), kappa).unwrap().tokens().row_norms().data()[0];
        // past f64 tanh saturation consecutive norms may tie exactly
        let strict = (t / r).tanh() < 1.0 - 1e-12;
        if !(n < r) || (strict && n <= prev) || n < prev {
            return Err(format!("ray norms not increasing inside ball at t={t}"));
        }
        prev = n;
    }
    Ok("norm ordering preserved; ray sweep increasing with supremum inside the ball".into())
}

pub fn htc_round_trip(seed: u64, kappa: Curvature, tokens: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..tokens {
        let f = rng.random_range(1..12);
        let target = rng.random_range(0.01..5.0);
        let dir = random_row(&mut rng, f, 1.0);
        let u = norm(&dir);
        if u < 1e-9 {
            continue;
        }
        let row: Vec<f64> = dir.iter().map(|&v| v * target / u).collect();
        let x = DenseArray::new(vec![1, f], row.clone()).unwrap();
        let back = htc_inverse(&htc_forward(&x, kappa).unwrap()).map_err(|e| e.to_string())?;
        let diff: f64 = row
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let rel = diff / target;
        worst = worst.max(rel);
        if rel > 1e-10 {
            return Err(format!("round-trip relative error {rel:.3e} > 1e-10"));
        }
    }
    Ok(format!("{tokens} tokens, max relative error {worst:.3e}"))
}

pub fn htc_gradient_check(seed: u64, kappa: Curvature, points: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut done = 0;
    while done < points {
        let f = rng.random_range(2..10);
        let target = rng.random_range(0.1..3.0);
        let dir = random_row(&mut rng, f, 1.0);
        let u = norm(&dir);
        if u < 1e-9 {
            continue;
        }
        let x: Vec<f64> = dir.iter().map(|&v| v * target / u).collect();
        let v = random_row(&mut rng, f, 1.0);
        if norm(&v) < 1e-9 {
            continue;
        }
        let analytic = htc_jvp(&x, &v, kappa).map_err(|e| e.to_string())?;
        let h = 1e-5 * (1.0 + target);
        let eval = |pt: &[f64]| {
            htc_forward(&DenseArray::new(vec![1, f], pt.to_vec()).unwrap(), kappa)
                .unwrap()
                .into_tokens()
                .into_data()
        };
        let plus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - h * b).collect();
        let fp = eval(&plus);
        let fm = eval(&minus);
        let fd: Vec<f64> = fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * h))
            .collect();
        let num: f64 = analytic
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let den = norm(&analytic).max(1e-12);
        let rel = num / den;
        worst = worst.max(rel);
        if rel > 1e-6 {
            return Err(format!("jvp vs finite differences relative error {rel:.3e} > 1e-6"));
        }
        done += 1;
    }
    Ok(format!("{points} points, max relative error {worst:.3e}"))
}

pub fn metric_factor_origin() -> Result<String, String> {
    for kappa in SWEEP_KAPPAS {
        let c = Curvature::new(kappa).unwrap();
        let v = metric_factor(&[0.0, 0.0, 0.0], c).map_err(|e| e.to_string())?;
        if v != 4.0 {
            return Err(format!("metric_factor(0) = {v} != 4 at kappa {kappa}"));
        }
    }
    Ok("metric_factor(0) = 4 exactly for all tested curvatures".into())
}

pub fn verify_poincare(seed: u64, kappa: Curvature, full: bool) -> Vec<PropertyResult> {
    let samples = if full { 10_000 } else { 1_000 };
    vec![
        run("poincare/forward_ball_constraint", || {
            forward_ball_constraint(seed, samples)
        }),
        run("poincare/direction_preservation", || {
            direction_preservation(seed.wrapping_add(1), kappa)
        }),
        run("poincare/norm_monotonicity", || {
            norm_monotonicity(seed.wrapping_add(2), kappa)
        }),
        run("poincare/round_trip", || {
            htc_round_trip(seed.wrapping_add(3), kappa, 1000)
        }),
        run("poincare/jvp_finite_differences", || {
            htc_gradient_check(seed.wrapping_add(4), kappa, 100)
        }),
        run("poincare/metric_factor_origin", metric_factor_origin),
    ]
}

// ---- attention suite -------------------------------------------------------

/// Attention ball invariant: HLA output rows are strictly inside the ball for
/// random ball-interior inputs under kappa in {-1, -2}.
pub fn attention_ball_constraint(seed: u64, rows_per_kappa: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for kappa in [-1.0, -2.0] {
        let kappa = Curvature::new(kappa).unwrap();
        let r = kappa.radius();
        let mut checked = 0;
        while checked < rows_per_kappa {
            let n = rng.random_range(1..12);
            let f = rng.random_range(1..8);
            let mut data = Vec::with_capacity(n * f);
            for _ in 0..n {
                let dir = random_row(&mut rng, f, 1.0);
                let u = norm(&dir).max(1e-12);
                let target = rng.random_range(0.0..r * 0.999);
                data.extend(dir.iter().map(|&v| v * target / u));
            }
            let batch =
                PoincareBatch::new(DenseArray::new(vec![n, f], data).unwrap(), kappa).unwrap();
            let config = AttentionConfig::new(f, kappa);
            let weights = ProjectionWeights::seeded(f, &mut rng);
            let out = hyperbolic_linear_attention(&batch, &config, &weights)
                .map_err(|e| e.to_string())?;
            for &on in out.tokens().row_norms().data() {
                if !(on < r) {
                    return Err(format!("HLA output norm {on} >= radius {r}"));
                }
            }
            checked += n;
        }
    }
    Ok(format!("{rows_per_kappa} rows per kappa in {{-1,-2}}, all strictly inside the ball"))
}

/// The reordering identity: with the identity kernel and no normalization,
/// Q (K^T V) equals the quadratic (Q K^T) V.
pub fn reordering_oracle(seed: u64, cases: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = Curvature::new(-1.0).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.random_range(1..=256);
        let f = rng.random_range(1..=64);
        let mat = |rng: &mut ChaCha8Rng| {
            DenseArray::new(
                vec![n, f],
                (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let q = mat(&mut rng);
        let k = mat(&mut rng);
        let v = mat(&mut rng);
        let mut config = AttentionConfig::new(f, kappa);
        config.kernel = Kernel::Identity;
        config.normalize = Normalize::None;
        let linear = linear_attention(&q, &k, &v, &config).map_err(|e| e.to_string())?;
        let quadratic = q
            .matmul(&k.transpose().unwrap())
            .unwrap()
            .matmul(&v)
            .unwrap();
        let diff = linear.sub(&quadratic).unwrap().max_abs();
        worst = worst.max(diff);
        if diff > 1e-10 {
            return Err(format!("reordering max-abs diff {diff:.3e} > 1e-10 (N={n}, F={f})"));
        }
    }
    Ok(format!("{cases} cases up to N=256, F=64, max-abs diff {worst:.3e}"))
}

pub fn softmax_rows_sum_to_one(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..32);
        let f = rng.random_range(1..16);
        let x = DenseArray::new(
            vec![n, f],
            (0..n * f).map(|_| rng.random_range(-2.0..2.0)).collect(),
        )
        .unwrap();
        let weights = ProjectionWeights::seeded(f, &mut rng);
        let attn = softmax_weight_matrix(&x, &weights).map_err(|e| e.to_string())?;
        for i in 0..n {
            let sum: f64 = attn.row(i).iter().sum();
            let dev = (sum - 1.0).abs();
            worst = worst.max(dev);
            if dev > 1e-12 {
                return Err(format!("row sum deviates by {dev:.3e} > 1e-12"));
            }
        }
    }
    Ok(format!("50 cases, max row-sum deviation {worst:.3e}"))
}

pub fn permutation_equivariance(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = Curvature::new(-1.0).unwrap();
    for _ in 0..25 {
        let n = rng.random_range(2..24);
        let f = rng.random_range(1..10);
        let x = DenseArray::new(
            vec![n, f],
            (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let weights = ProjectionWeights::seeded(f, &mut rng);
        let config = AttentionConfig::new(f, kappa);
        let out = |tokens: &DenseArray| -> Result<DenseArray, String> {
            let (q, k, v) =
                qkv_views(tokens, QkvMode::Projection, &weights).map_err(|e| e.to_string())?;
            linear_attention(&q, &k, &v, &config).map_err(|e| e.to_string())
        };
        let base = out(&x)?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let permuted_rows: Vec<Vec<f64>> = perm.iter().map(|&i| x.row(i).to_vec()).collect();
        let permuted = out(&DenseArray::from_rows(&permuted_rows).unwrap())?;
        for (pos, &src) in perm.iter().enumerate() {
            for j in 0..f {
                let d = (permuted.get2(pos, j) - base.get2(src, j)).abs();
                if d > 1e-12 {
                    return Err(format!("output not permutation-equivariant, diff {d:.3e}"));
                }
            }
        }
    }
    Ok("25 random permutations, outputs permute with the tokens".into())
}

pub fn rwkv_dual_mode(seed: u64, cases: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.random_range(1..=128);
        let f = rng.random_range(1..=8);
        let params = RwkvParams {
            mu_r: vec![0.5; f],
            mu_k: vec![0.5; f],
            mu_v: vec![0.5; f],
            mu_g: vec![0.5; f],
            w_r: DenseArray::eye(f),
            w_k: DenseArray::eye(f),
            w_v: DenseArray::eye(f),
            w_g: DenseArray::eye(f),
            w: (0..f).map(|_| rng.random_range(0.001..0.999)).collect(),
            u: (0..f).map(|_| rng.random_range(-2.0..2.0)).collect(),
        };
        let mat = |rng: &mut ChaCha8Rng| {
            DenseArray::new(
                vec![n, f],
                (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let k = mat(&mut rng);
        let v = mat(&mut rng);
        let direct = rwkv_wkv(&k, &v, &params, WkvMode::Direct).map_err(|e| e.to_string())?;
        let recurrent = rwkv_wkv(&k, &v, &params, WkvMode::Recurrent).map_err(|e| e.to_string())?;
        let diff = direct.sub(&recurrent).unwrap().max_abs();
        worst = worst.max(diff);
        if diff > 1e-12 {
            return Err(format!("wkv direct vs recurrent diff {diff:.3e} > 1e-12 (N={n}, F={f})"));
        }
    }
    Ok(format!("{cases} parameterizations up to N=128, F=8, max diff {worst:.3e}"))
}

pub fn ssm_dual_form(seed: u64, cases: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let s = rng.random_range(1..=16);
        let m = rng.random_range(1..=64);
        let mut a = DenseArray::zeros(vec![s, s]);
        for i in 0..s {
            a.set2(i, i, -rng.random_range(0.01..4.0));
        }
        let params = SsmParams {
            a,
            b: DenseArray::new(vec![s, 1], (0..s).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap(),
            c: DenseArray::new(vec![1, s], (0..s).map(|_| rng.random_range(-1.0..1.0)).collect())
                .unwrap(),
            delta: rng.random_range(0.01..1.0),
        };
        let (a_bar, b_bar) = ssm_discretize(&params).map_err(|e| e.to_string())?;
        let x = DenseArray::new(vec![m], (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let scan = ssm_scan(&a_bar, &b_bar, &params.c, &x).map_err(|e| e.to_string())?;
        let conv = ssm_conv(&a_bar, &b_bar, &params.c, &x).map_err(|e| e.to_string())?;
        let diff = scan.sub(&conv).unwrap().max_abs();
        worst = worst.max(diff);
        if diff > 1e-10 {
            return Err(format!("scan vs conv diff {diff:.3e} > 1e-10 (M={m}, S={s})"));
        }
    }
    // ZOH limit: A = 0 gives Bbar = delta B exactly
    let params = SsmParams {
        a: DenseArray::zeros(vec![2, 2]),
        b: DenseArray::new(vec![2, 1], vec![1.5, -0.25]).unwrap(),
        c: DenseArray::new(vec![1, 2], vec![1.0, 1.0]).unwrap(),
        delta: 0.125,
    };
    let (a_bar, b_bar) = ssm_discretize(&params).map_err(|e| e.to_string())?;
    if a_bar != DenseArray::eye(2) {
        return Err("ZOH limit: Abar != I for A = 0".into());
    }
    if b_bar.data() != [0.125 * 1.5, 0.125 * -0.25] {
        return Err("ZOH limit: Bbar != delta B for A = 0".into());
    }
    Ok(format!("{cases} stable parameterizations, max diff {worst:.3e}; A=0 limit exact"))
}

pub fn verify_attention(seed: u64, full: bool) -> Vec<PropertyResult> {
    let sweep_rows = if full { 10_000 } else { 1_000 };
    vec![
        run("attention/attention_ball_constraint", || {
            attention_ball_constraint(seed, sweep_rows)
        }),
        run("attention/reordering_oracle", || {
            reordering_oracle(seed.wrapping_add(1), 100)
        }),
        run("attention/softmax_rows_sum_to_one", || {
            softmax_rows_sum_to_one(seed.wrapping_add(2))
        }),
        run("attention/permutation_equivariance", || {
            permutation_equivariance(seed.wrapping_add(3))
        }),
        run("attention/rwkv_dual_mode", || {
            rwkv_dual_mode(seed.wrapping_add(4), 100)
        }),
        run("attention/ssm_dual_form", || {
            ssm_dual_form(seed.wrapping_add(5), 100)
        }),
    ]
}

// ---- model suite -----------------------------------------------------------

pub fn pipeline_finiteness(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kappa = Curvature::new(-1.0).unwrap();
    for _ in 0..20 {
        let (t, v, m, c) = (
            rng.random_range(2..6),
            rng.random_range(1..4),
            rng.random_range(1..3),
            rng.random_range(1..5),
        );
        let scale = 10f64.powf(rng.random_range(-1.0..2.0));
        let data: Vec<f64> = (0..t * v * m * c)
            .map(|_| scale * rng.random_range(-1.0..1.0))
            .collect();
        let seq = SkeletonSequence::new(DenseArray::new(vec![t, v, m, c], data).unwrap()).unwrap();
        let tokens = tokenize(&seq, AttentionAxis::Temporal);
        let f = tokens.ncols();
        let ball = htc_forward(&tokens, kappa).map_err(|e| e.to_string())?;
        let r = kappa.radius();
        if ball.tokens().row_norms().data().iter().any(|&n| !(n < r)) {
            return Err("post-HTC stage violates the ball invariant".into());
        }
        let config = AttentionConfig::new(f, kappa);
        let weights = ProjectionWeights::seeded(f, &mut rng);
        let mixed =
            hyperbolic_linear_attention(&ball, &config, &weights).map_err(|e| e.to_string())?;
        if mixed.tokens().row_norms().data().iter().any(|&n| !(n < r)) {
            return Err("post-HLA stage violates the ball invariant".into());
        }
        let back = htc_inverse(&mixed).map_err(|e| e.to_string())?;
        if !back.is_finite() {
            return Err("post-inverse stage is non-finite".into());
        }
    }
    Ok("20 random pipelines: all stages finite, ball stages inside the ball".into())
}

pub fn origin_fixed_point() -> Result<String, String> {
    let mut config = ModelConfig::new(1, 3, Curvature::new(-1.0).unwrap(), 0);
    config.residual = false;
    config.attention.feature_dim = 3;
    config.attention.kernel = Kernel::Identity;
    config.attention.normalize = Normalize::None;
    let tokens = DenseArray::zeros(vec![6, 3]);
    let out = hyliformer_block(&tokens, &config, &ProjectionWeights::identity(3))
        .map_err(|e| e.to_string())?;
    if out.data().iter().any(|&v| v != 0.0) {
        return Err("zero tokens did not map to zero through the block".into());
    }
    Ok("zero tokens with identity projections map to zero through the block".into())
}

pub fn forward_determinism(seed: u64) -> Result<String, String> {
    let spec = SyntheticDatasetSpec {
        samples_per_class: 1,
        num_classes: 2,
        seed,
        ..Default::default()
    };
    let data = gen_synthetic_skeletons(&spec).map_err(|e| e.to_string())?;
    let mut config = ModelConfig::new(2, 16, Curvature::new(-1.0).unwrap(), seed);
    config.attention.feature_dim = 0;
    let f = tokenize(&data[0].sequence, config.attention_axis).ncols();
    let weights = layer_weights(&config, f);
    let a = hyliformer_forward(&data[0].sequence, &config, &weights).map_err(|e| e.to_string())?;
    let b = hyliformer_forward(&data[0].sequence, &config, &weights).map_err(|e| e.to_string())?;
    if a != b {
        return Err("two forward passes with equal seed differ".into());
    }
    Ok("repeated forward passes are bit-identical".into())
}

pub fn tokenize_round_trip(seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for axis in [
        AttentionAxis::Temporal,
        AttentionAxis::Spatial,
        AttentionAxis::Flattened,
    ] {
        let (t, v, m, c) = (
            rng.random_range(1..6),
            rng.random_range(1..6),
            rng.random_range(1..4),
            rng.random_range(1..6),
        );
        let data: Vec<f64> = (0..t * v * m * c).map(|_| rng.random_range(-3.0..3.0)).collect();
        let seq = SkeletonSequence::new(DenseArray::new(vec![t, v, m, c], data).unwrap()).unwrap();
        let back = untokenize(&tokenize(&seq, axis), axis, (t, v, m, c))
            .map_err(|e| e.to_string())?;
        if back.data() != seq.data() {
            return Err(format!("tokenize/untokenize not exact for {axis:?}"));
        }
    }
    Ok("exact round trip on all three axes".into())
}

/// Functional check: probe accuracy on model features against the
/// label-shuffled control.
pub fn probe_feature_gap(seed: u64) -> Result<String, String> {
    let spec = SyntheticDatasetSpec {
        seed,
        ..Default::default()
    };
    let data = gen_synthetic_skeletons(&spec).map_err(|e| e.to_string())?;
    let mut config = ModelConfig::new(2, 16, Curvature::new(-1.0).unwrap(), seed);
    config.attention.feature_dim = 0;
    let f = tokenize(&data[0].sequence, config.attention_axis).ncols();
    let weights = layer_weights(&config, f);
    let mut rows = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for sample in &data {
        rows.push(
            hyliformer_forward(&sample.sequence, &config, &weights)
                .map_err(|e| e.to_string())?
                .into_data(),
        );
        labels.push(sample.label);
    }
    let features = DenseArray::from_rows(&rows).unwrap();
    let (_, acc) = LinearProbe::fit(&features, &labels).map_err(|e| e.to_string())?;
    let mut shuffled = labels.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
    shuffled.shuffle(&mut rng);
    let (_, shuffled_acc) = LinearProbe::fit(&features, &shuffled).map_err(|e| e.to_string())?;
    if acc < 0.9 {
        return Err(format!("probe accuracy {acc:.3} < 0.90"));
    }
    if acc - shuffled_acc < 0.40 {
        return Err(format!(
            "gap over shuffled control {:.3} < 0.40 (probe {acc:.3}, shuffled {shuffled_acc:.3})",
            acc - shuffled_acc
        ));
    }
    Ok(format!(
        "probe accuracy {acc:.3}, shuffled control {shuffled_acc:.3}"
    ))
}

pub fn verify_model(seed: u64) -> Vec<PropertyResult> {
    vec![
        run("model/pipeline_finiteness", || pipeline_finiteness(seed)),
        run("model/origin_fixed_point", origin_fixed_point),
        run("model/forward_determinism", || forward_determinism(seed)),
        run("model/tokenize_round_trip", || tokenize_round_trip(seed)),
        run("model/probe_feature_gap", || probe_feature_gap(seed)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyScope {
    All,
    Poincare,
    Attention,
    Model,
}

/// Run the suites for a scope. `full` selects the acceptance-scale sample
/// counts (10^4 sweeps) rather than the quick ones.
pub fn verify(scope: VerifyScope, seed: u64, kappa: Curvature, full: bool) -> Vec<PropertyResult> {
    let mut results = Vec::new();
    if matches!(scope, VerifyScope::All | VerifyScope::Poincare) {
        results.extend(verify_poincare(seed, kappa, full));
    }
    if matches!(scope, VerifyScope::All | VerifyScope::Attention) {
        results.extend(verify_attention(seed, full));
    }
    if matches!(scope, VerifyScope::All | VerifyScope::Model) {
        results.extend(verify_model(seed));
    }
    results
}
