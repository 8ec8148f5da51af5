//! Python bindings for the hyperbolic attention stack: the ball maps,
//! the attention variants, the RWKV/SSM baselines, and the synthetic
//! end-to-end probe. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hyliformer::attention::{
    hyperbolic_linear_attention, linear_attention, rwkv_wkv, softmax_attention, ssm_conv,
    ssm_discretize, ssm_scan, AttentionConfig, Kernel, Normalize, ProjectionWeights, RwkvParams,
    SsmParams, WkvMode,
};
use hyliformer::model::{
    gen_synthetic_skeletons, hyliformer_forward, layer_weights, tokenize, LinearProbe,
    ModelConfig, SyntheticDatasetSpec,
};
use hyliformer::poincare::{htc_forward, htc_inverse, htc_jvp, metric_factor, mobius_scalar_mul};
use hyliformer::verify::{verify, VerifyScope};
use hyliformer::{Curvature, DenseArray, PoincareBatch};

fn err(e: hyliformer::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn curvature(kappa: f64) -> PyResult<Curvature> {
    Curvature::new(kappa).map_err(err)
}

fn mat(rows: Vec<Vec<f64>>) -> PyResult<DenseArray> {
    DenseArray::from_rows(&rows).map_err(err)
}

fn rows(a: &DenseArray) -> Vec<Vec<f64>> {
    (0..a.nrows()).map(|i| a.row(i).to_vec()).collect()
}

fn config(f: usize, kappa: f64, kernel: &str, normalize: &str) -> PyResult<AttentionConfig> {
    let mut c = AttentionConfig::new(f, curvature(kappa)?);
    c.kernel = match kernel {
        "exp" => Kernel::Exp,
        "identity" => Kernel::Identity,
        "elu_plus_one" => Kernel::EluPlusOne,
        other => return Err(PyValueError::new_err(format!("unknown kernel {other:?}"))),
    };
    c.normalize = match normalize {
        "denominator" => Normalize::Denominator,
        "none" => Normalize::None,
        other => return Err(PyValueError::new_err(format!("unknown normalize {other:?}"))),
    };
    Ok(c)
}

/// Map Euclidean rows into the Poincare ball of curvature `kappa`.
#[pyfunction]
fn ball_forward(x: Vec<Vec<f64>>, kappa: f64) -> PyResult<Vec<Vec<f64>>> {
    let out = htc_forward(&mat(x)?, curvature(kappa)?).map_err(err)?;
    Ok(rows(out.tokens()))
}

/// Exact inverse of `ball_forward`; rows must lie strictly inside the ball.
#[pyfunction]
fn ball_inverse(y: Vec<Vec<f64>>, kappa: f64) -> PyResult<Vec<Vec<f64>>> {
    let batch = PoincareBatch::new(mat(y)?, curvature(kappa)?).map_err(err)?;
    Ok(rows(&htc_inverse(&batch).map_err(err)?))
}

/// Jacobian-vector product of the forward map at `x` applied to `v`.
#[pyfunction]
fn ball_jvp(x: Vec<f64>, v: Vec<f64>, kappa: f64) -> PyResult<Vec<f64>> {
    htc_jvp(&x, &v, curvature(kappa)?).map_err(err)
}

/// Mobius scalar multiplication r (x) x inside the ball.
#[pyfunction]
fn mobius_scale(r: f64, x: Vec<f64>, kappa: f64) -> PyResult<Vec<f64>> {
    mobius_scalar_mul(r, &x, curvature(kappa)?).map_err(err)
}

/// Conformal metric factor lambda(x) at a ball-interior point.
#[pyfunction]
fn metric(x: Vec<f64>, kappa: f64) -> PyResult<f64> {
    metric_factor(&x, curvature(kappa)?).map_err(err)
}

/// Quadratic softmax attention over `x` with seeded projections.
#[pyfunction]
fn softmax_attn(x: Vec<Vec<f64>>, seed: u64) -> PyResult<Vec<Vec<f64>>> {
    let x = mat(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = ProjectionWeights::seeded(x.ncols(), &mut rng);
    Ok(rows(&softmax_attention(&x, &w).map_err(err)?))
}

/// Kernelized linear attention from explicit Q, K, V.
#[pyfunction]
#[pyo3(signature = (q, k, v, kernel="exp", normalize="denominator"))]
fn linear_attn(
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    kernel: &str,
    normalize: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let q = mat(q)?;
    let c = config(q.ncols(), -1.0, kernel, normalize)?;
    Ok(rows(&linear_attention(&q, &mat(k)?, &mat(v)?, &c).map_err(err)?))
}

/// Linear attention on ball-resident tokens; output rows stay strictly
/// inside the ball.
#[pyfunction]
#[pyo3(signature = (tokens, kappa=-1.0, seed=42, kernel="exp", normalize="denominator"))]
fn hyperbolic_attn(
    tokens: Vec<Vec<f64>>,
    kappa: f64,
    seed: u64,
    kernel: &str,
    normalize: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let x = mat(tokens)?;
    let c = config(x.ncols(), kappa, kernel, normalize)?;
    let batch = PoincareBatch::new(x, curvature(kappa)?).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = ProjectionWeights::seeded(batch.tokens().ncols(), &mut rng);
    let out = hyperbolic_linear_attention(&batch, &c, &w).map_err(err)?;
    Ok(rows(out.tokens()))
}

/// RWKV weighted key-value mixing with per-feature decay `w` and bonus
/// `u`; `mode` selects the direct summation or the recurrent state form.
#[pyfunction]
#[pyo3(signature = (k, v, w, u, mode="recurrent"))]
fn rwkv(
    k: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    w: Vec<f64>,
    u: Vec<f64>,
    mode: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let f = w.len();
    let params = RwkvParams {
        mu_r: vec![0.5; f],
        mu_k: vec![0.5; f],
        mu_v: vec![0.5; f],
        mu_g: vec![0.5; f],
        w_r: DenseArray::eye(f),
        w_k: DenseArray::eye(f),
        w_v: DenseArray::eye(f),
        w_g: DenseArray::eye(f),
        w,
        u,
    };
    let mode = match mode {
        "direct" => WkvMode::Direct,
        "recurrent" => WkvMode::Recurrent,
        other => return Err(PyValueError::new_err(format!("unknown wkv mode {other:?}"))),
    };
    Ok(rows(&rwkv_wkv(&mat(k)?, &mat(v)?, &params, mode).map_err(err)?))
}

/// Diagonal state-space model: zero-order-hold discretization followed by
/// either the recurrent scan or the causal convolution dual form.
#[pyfunction]
#[pyo3(signature = (a_diag, b, c, delta, x, form="scan"))]
fn ssm_apply(
    a_diag: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    delta: f64,
    x: Vec<f64>,
    form: &str,
) -> PyResult<Vec<f64>> {
    let s = a_diag.len();
    let mut a = DenseArray::zeros(vec![s, s]);
    for (i, &v) in a_diag.iter().enumerate() {
        a.set2(i, i, v);
    }
    let params = SsmParams {
        a,
        b: DenseArray::new(vec![s, 1], b).map_err(err)?,
        c: DenseArray::new(vec![1, s], c).map_err(err)?,
        delta,
    };
    let (a_bar, b_bar) = ssm_discretize(&params).map_err(err)?;
    let x = DenseArray::new(vec![x.len()], x).map_err(err)?;
    let out = match form {
        "scan" => ssm_scan(&a_bar, &b_bar, &params.c, &x),
        "conv" => ssm_conv(&a_bar, &b_bar, &params.c, &x),
        other => return Err(PyValueError::new_err(format!("unknown ssm form {other:?}"))),
    }
    .map_err(err)?;
    Ok(out.into_data())
}

/// Generate the default synthetic skeleton set, run the forward pipeline,
/// and fit the ridge probe. Returns (accuracy, shuffled_accuracy).
#[pyfunction]
#[pyo3(signature = (seed=42, layers=2))]
fn probe_demo(seed: u64, layers: usize) -> PyResult<(f64, f64)> {
    let spec = SyntheticDatasetSpec {
        seed,
        ..Default::default()
    };
    let data = gen_synthetic_skeletons(&spec).map_err(err)?;
    let mut cfg = ModelConfig::new(layers, 16, curvature(-1.0)?, seed);
    cfg.attention.feature_dim = 0;
    let f = tokenize(&data[0].sequence, cfg.attention_axis).ncols();
    let weights = layer_weights(&cfg, f);
    let mut feats = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for s in &data {
        feats.push(hyliformer_forward(&s.sequence, &cfg, &weights).map_err(err)?.into_data());
        labels.push(s.label);
    }
    let x = DenseArray::from_rows(&feats).map_err(err)?;
    let (_, acc) = LinearProbe::fit(&x, &labels).map_err(err)?;
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));
    let mut shuffled = labels.clone();
    shuffled.shuffle(&mut rng);
    let (_, shuffled_acc) = LinearProbe::fit(&x, &shuffled).map_err(err)?;
    Ok((acc, shuffled_acc))
}

/// Run the invariant suites; returns (name, passed, detail) triples.
#[pyfunction]
#[pyo3(signature = (scope="all", seed=42, kappa=-1.0, full=false))]
fn run_verify(
    scope: &str,
    seed: u64,
    kappa: f64,
    full: bool,
) -> PyResult<Vec<(String, bool, String)>> {
    let scope = match scope {
        "all" => VerifyScope::All,
        "poincare" => VerifyScope::Poincare,
        "attention" => VerifyScope::Attention,
        "model" => VerifyScope::Model,
        other => return Err(PyValueError::new_err(format!("unknown scope {other:?}"))),
    };
    Ok(verify(scope, seed, curvature(kappa)?, full)
        .into_iter()
        .map(|r| (r.name, r.passed, r.detail))
        .collect())
}

#[pymodule]
fn hyliformer_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ball_forward, m)?)?;
    m.add_function(wrap_pyfunction!(ball_inverse, m)?)?;
    m.add_function(wrap_pyfunction!(ball_jvp, m)?)?;
    m.add_function(wrap_pyfunction!(mobius_scale, m)?)?;
    m.add_function(wrap_pyfunction!(metric, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_attn, m)?)?;
    m.add_function(wrap_pyfunction!(linear_attn, m)?)?;
    m.add_function(wrap_pyfunction!(hyperbolic_attn, m)?)?;
    m.add_function(wrap_pyfunction!(rwkv, m)?)?;
    m.add_function(wrap_pyfunction!(ssm_apply, m)?)?;
    m.add_function(wrap_pyfunction!(probe_demo, m)?)?;
    m.add_function(wrap_pyfunction!(run_verify, m)?)?;
    Ok(())
}
