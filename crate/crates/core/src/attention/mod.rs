//! Sequence-mixing mechanisms: quadratic softmax attention, kernelized
//! linear attention with the KtV reordering, and its hyperbolic wrapper
//! that projects outputs back into the Poincare ball. The RWKV and SSM
//! baselines live in the submodules.

pub mod rwkv;
pub mod ssm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poincare::{Curvature, PoincareBatch};
use crate::tensor::{dot, DenseArray};

pub use rwkv::{rwkv_mix, rwkv_wkv, RwkvParams, WkvMode};
pub use ssm::{ssm_conv, ssm_discretize, ssm_scan, SsmParams};

/// Feature map applied to Q and K before the reordered product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// phi(x) = exp(x), the default.
    Exp,
    /// phi(x) = x; makes linear attention algebraically equal to (QK^T)V.
    Identity,
    /// phi(x) = elu(x) + 1, positive and smooth.
    EluPlusOne,
}

impl Kernel {
    fn apply(&self, v: f64) -> f64 {
        match self {
            Kernel::Exp => v.exp(),
            Kernel::Identity => v,
            Kernel::EluPlusOne => {
                if v >= 0.0 {
                    v + 1.0
                } else {
                    v.exp()
                }
            }
        }
    }
}

/// How Q, K, V are derived from the token matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QkvMode {
    /// Learned projections Q = xW_Q, K = xW_K, V = xW_V.
    Projection,
    /// Token-axis slices at offsets 1, 2, 3, truncated to length N-3.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalize {
    /// Divide by phi(Q_i) . sum_j phi(K_j), the convex-combination form.
    Denominator,
    None,
}

const DENOM_FLOOR: f64 = 1e-30;

/// Configuration for the linear-attention family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AttentionConfig {
    pub feature_dim: usize,
    pub kernel: Kernel,
    pub qkv_mode: QkvMode,
    pub normalize: Normalize,
    pub ball_eps: f64,
    pub kappa: f64,
}

impl AttentionConfig {
    pub fn new(feature_dim: usize, kappa: Curvature) -> Self {
        Self {
            feature_dim,
            kernel: Kernel::Exp,
            qkv_mode: QkvMode::Projection,
            normalize: Normalize::Denominator,
            ball_eps: 1e-5,
            kappa: kappa.kappa(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ball_eps > 0.0 && self.ball_eps < 0.01) {
            return Err(Error::Config(format!(
                "ball_eps must lie in (0, 0.01), got {}",
                self.ball_eps
            )));
        }
        Curvature::new(self.kappa)?;
        Ok(())
    }

    pub fn curvature(&self) -> Curvature {
        Curvature::new(self.kappa).expect("validated curvature")
    }
}

/// Learned square projections for Q, K, V.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProjectionWeights {
    pub w_q: DenseArray,
    pub w_k: DenseArray,
    pub w_v: DenseArray,
}

impl ProjectionWeights {
    pub fn new(w_q: DenseArray, w_k: DenseArray, w_v: DenseArray) -> Result<Self> {
        for (name, w) in [("W_Q", &w_q), ("W_K", &w_k), ("W_V", &w_v)] {
            if w.ndim() != 2 || w.nrows() != w.ncols() {
                return Err(Error::Shape(format!("{name} must be square")));
            }
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("{name} contains NaN/Inf")));
            }
        }
        Ok(Self { w_q, w_k, w_v })
    }

    pub fn identity(f: usize) -> Self {
        Self {
            w_q: DenseArray::eye(f),
            w_k: DenseArray::eye(f),
            w_v: DenseArray::eye(f),
        }
    }

    /// Fan-in scaled uniform init from a seeded generator.
    pub fn seeded(f: usize, rng: &mut impl rand::Rng) -> Self {
        let bound = 1.0 / (f as f64).sqrt();
        let mut sample = || {
            let data: Vec<f64> = (0..f * f)
                .map(|_| rng.random_range(-bound..bound))
                .collect();
            DenseArray::new(vec![f, f], data).expect("square init")
        };
        Self {
            w_q: sample(),
            w_k: sample(),
            w_v: sample(),
        }
    }

    pub fn dim(&self) -> usize {
        self.w_q.nrows()
    }
}

/// Quadratic softmax attention: materializes the full N x N similarity
/// matrix with Sim(q, k) = exp(q.k / sqrt(F)). Rows of the normalized
/// weight matrix sum to 1. This is the quadratic baseline on purpose.
pub fn softmax_attention(x: &DenseArray, weights: &ProjectionWeights) -> Result<DenseArray> {
    let v = x.matmul(&weights.w_v)?;
    softmax_weight_matrix(x, weights)?.matmul(&v)
}

/// The normalized N x N weight matrix of `softmax_attention`, exposed for
/// the row-stochasticity checks.
pub fn softmax_weight_matrix(x: &DenseArray, weights: &ProjectionWeights) -> Result<DenseArray> {
    let n = x.nrows();
    let f = x.ncols();
    if n == 0 {
        return Err(Error::Shape("softmax_attention needs N >= 1".into()));
    }
    let q = x.matmul(&weights.w_q)?;
    let k = x.matmul(&weights.w_k)?;
    let scale = 1.0 / (f as f64).sqrt();

    let mut attn = vec![0.0; n * n];
    for i in 0..n {
        let qi = q.row(i);
        let row = &mut attn[i * n..(i + 1) * n];
        let mut row_max = f64::NEG_INFINITY;
        for j in 0..n {
            let s = dot(qi, k.row(j)) * scale;
            row[j] = s;
            row_max = row_max.max(s);
        }
        // per-row shift cancels exactly in the normalization
        let mut sum = 0.0;
        for e in row.iter_mut() {
            *e = (*e - row_max).exp();
            sum += *e;
        }
        for e in row.iter_mut() {
            *e /= sum;
        }
    }
    DenseArray::new(vec![n, n], attn)
}

/// Derive Q, K, V from tokens per the configured mode.
pub fn qkv_views(
    x: &DenseArray,
    mode: QkvMode,
    weights: &ProjectionWeights,
) -> Result<(DenseArray, DenseArray, DenseArray)> {
    match mode {
        QkvMode::Projection => Ok((
            x.matmul(&weights.w_q)?,
            x.matmul(&weights.w_k)?,
            x.matmul(&weights.w_v)?,
        )),
        QkvMode::Shift => {
            let n = x.nrows();
            if n < 4 {
                return Err(Error::InputTooShort { needed: 4, got: n });
            }
            let f = x.ncols();
            let len = n - 3;
            let slice = |offset: usize| {
                DenseArray::new(
                    vec![len, f],
                    x.data()[offset * f..(offset + len) * f].to_vec(),
                )
            };
            Ok((slice(1)?, slice(2)?, slice(3)?))
        }
    }
}

/// Kernelized linear attention via the reordering S = phi(K)^T V,
/// z = phi(K)^T 1: out_i = phi(Q_i) S / (phi(Q_i) . z). Never builds an
/// N x N matrix; cost is Theta(N F^2).
///
/// For the exp kernel in denominator mode, each Q row is shifted by its
/// own max and K by a single global max before exponentiation. A scalar
/// shift of q_i scales both phi(q_i) S and phi(q_i) . z by exp(-s_i), and
/// a scalar shift of K scales S and z by exp(-s_K), so both cancel exactly
/// in the normalized form. In unnormalized mode no shift is applied and
/// inputs are clamped to [-30, 30].
pub fn linear_attention(
    q: &DenseArray,
    k: &DenseArray,
    v: &DenseArray,
    config: &AttentionConfig,
) -> Result<DenseArray> {
    config.validate()?;
    let n = q.nrows();
    let f = q.ncols();
    if k.shape() != q.shape() || v.nrows() != n {
        return Err(Error::Shape(format!(
            "linear_attention shapes disagree: Q {:?}, K {:?}, V {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let fv = v.ncols();

    let (phi_q, phi_k) = apply_kernel(q, k, config);

    // S = phi(K)^T V  (F x Fv), z = phi(K)^T 1  (F)
    let mut s = vec![0.0; f * fv];
    let mut z = vec![0.0; f];
    for j in 0..n {
        let kj = phi_k.row(j);
        let vj = v.row(j);
        for a in 0..f {
            let ka = kj[a];
            z[a] += ka;
            let srow = &mut s[a * fv..(a + 1) * fv];
            for (b, &vb) in vj.iter().enumerate() {
                srow[b] += ka * vb;
            }
        }
    }

    let mut out = vec![0.0; n * fv];
    for i in 0..n {
        let qi = phi_q.row(i);
        let orow = &mut out[i * fv..(i + 1) * fv];
        for a in 0..f {
            let qa = qi[a];
            if qa == 0.0 {
                continue;
            }
            let srow = &s[a * fv..(a + 1) * fv];
            for (b, &sv) in srow.iter().enumerate() {
                orow[b] += qa * sv;
            }
        }
        if config.normalize == Normalize::Denominator {
            let denom = dot(qi, &z);
            if denom.abs() < DENOM_FLOOR {
                return Err(Error::NormalizationUnderflow(DENOM_FLOOR));
            }
            for e in orow.iter_mut() {
                *e /= denom;
            }
        }
    }
    DenseArray::new(vec![n, fv], out)
}

fn apply_kernel(q: &DenseArray, k: &DenseArray, config: &AttentionConfig) -> (DenseArray, DenseArray) {
    match (config.kernel, config.normalize) {
        (Kernel::Exp, Normalize::Denominator) => {
            let row_max = |row: &[f64]| {
                let m = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                if m.is_finite() { m } else { 0.0 }
            };
            let f = q.ncols();
            let mut phi_q = q.data().to_vec();
            for row in phi_q.chunks_mut(f.max(1)) {
                let s = row_max(row);
                for e in row.iter_mut() {
                    *e = (*e - s).exp();
                }
            }
            let k_shift = row_max(k.data());
            (
                DenseArray::new(q.shape().to_vec(), phi_q).expect("shape preserved"),
                k.map(|v| (v - k_shift).exp()),
            )
        }
        (Kernel::Exp, Normalize::None) => {
            let clamped = |a: &DenseArray| a.map(|v| v.clamp(-30.0, 30.0).exp());
            (clamped(q), clamped(k))
        }
        (kernel, _) => (q.map(|v| kernel.apply(v)), k.map(|v| kernel.apply(v))),
    }
}

/// Linear attention on ball-resident tokens, with an explicit projection
/// back into the ball: any output row whose norm reaches
/// (1 - ball_eps) * (-1/kappa) is rescaled onto that margin, so the output
/// batch satisfies the ball constraint by construction.
pub fn hyperbolic_linear_attention(
    x: &PoincareBatch,
    config: &AttentionConfig,
    weights: &ProjectionWeights,
) -> Result<PoincareBatch> {
    config.validate()?;
    let kappa = x.curvature();
    let (q, k, v) = qkv_views(x.tokens(), config.qkv_mode, weights)?;
    let mixed = linear_attention(&q, &k, &v, config)?;
    let projected = project_into_ball(mixed, kappa, config.ball_eps)?;
    Ok(projected)
}

/// Rescale any row with norm >= (1 - eps) * radius to exactly that margin.
pub fn project_into_ball(
    mut tokens: DenseArray,
    kappa: Curvature,
    ball_eps: f64,
) -> Result<PoincareBatch> {
    if !tokens.is_finite() {
        return Err(Error::NonFinite("ball projection input".into()));
    }
    let radius = kappa.radius();
    let margin = (1.0 - ball_eps) * radius;
    let f = tokens.ncols().max(1);
    let n = tokens.len() / f;
    for i in 0..n {
        let row = &mut tokens.data_mut()[i * f..(i + 1) * f];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm >= margin {
            let s = margin / norm;
            for e in row.iter_mut() {
                *e *= s;
            }
        }
    }
    Ok(PoincareBatch::new_unchecked(tokens, kappa))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(f: usize) -> AttentionConfig {
        AttentionConfig::new(f, Curvature::new(-1.0).unwrap())
    }

    #[test]
    fn softmax_single_token_returns_value() {
        let x = DenseArray::new(vec![1, 2], vec![0.3, -0.7]).unwrap();
        let w = ProjectionWeights::identity(2);
        let out = softmax_attention(&x, &w).unwrap();
        assert_eq!(out.data(), x.data());
    }

    #[test]
    fn softmax_identical_keys_average_values() {
        // W_K = 0 makes all keys equal; weights become uniform
        let w = ProjectionWeights::new(
            DenseArray::eye(1),
            DenseArray::zeros(vec![1, 1]),
            DenseArray::eye(1),
        )
        .unwrap();
        let x = DenseArray::new(vec![2, 1], vec![1.0, 3.0]).unwrap();
        let out = softmax_attention(&x, &w).unwrap();
        assert!((out.data()[0] - 2.0).abs() < 1e-12);
        assert!((out.data()[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn qkv_projection_identity() {
        let x = DenseArray::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let w = ProjectionWeights::identity(2);
        let (q, k, v) = qkv_views(&x, QkvMode::Projection, &w).unwrap();
        assert_eq!(q, x);
        assert_eq!(k, x);
        assert_eq!(v, x);
    }

    #[test]
    fn qkv_shift_offsets() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let x = DenseArray::from_rows(&rows).unwrap();
        let w = ProjectionWeights::identity(1);
        let (q, k, v) = qkv_views(&x, QkvMode::Shift, &w).unwrap();
        assert_eq!(q.data(), &[1.0, 2.0, 3.0]);
        assert_eq!(k.data(), &[2.0, 3.0, 4.0]);
        assert_eq!(v.data(), &[3.0, 4.0, 5.0]);
    }

    #[test]
    fn qkv_shift_too_short() {
        let x = DenseArray::zeros(vec![3, 2]);
        let w = ProjectionWeights::identity(2);
        assert!(matches!(
            qkv_views(&x, QkvMode::Shift, &w),
            Err(Error::InputTooShort { .. })
        ));
    }

    #[test]
    fn linear_identity_kernel_matches_quadratic_product() {
        let x = DenseArray::new(
            vec![4, 2],
            vec![0.1, -0.4, 0.9, 0.2, -0.3, 0.8, 0.5, -0.6],
        )
        .unwrap();
        let mut c = cfg(2);
        c.kernel = Kernel::Identity;
        c.normalize = Normalize::None;
        let out = linear_attention(&x, &x, &x, &c).unwrap();
        let quadratic = x.matmul(&x.transpose().unwrap()).unwrap().matmul(&x).unwrap();
        assert!(out.sub(&quadratic).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn linear_identity_on_eye_is_eye() {
        let i2 = DenseArray::eye(2);
        let mut c = cfg(2);
        c.kernel = Kernel::Identity;
        c.normalize = Normalize::None;
        let out = linear_attention(&i2, &i2, &i2, &c).unwrap();
        assert!(out.sub(&i2).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn linear_single_token_normalized_returns_value() {
        let q = DenseArray::new(vec![1, 2], vec![0.2, -0.1]).unwrap();
        let v = DenseArray::new(vec![1, 2], vec![5.0, -3.0]).unwrap();
        let out = linear_attention(&q, &q, &v, &cfg(2)).unwrap();
        assert!(out.sub(&v).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn exp_shift_cancels_in_normalized_form() {
        // shifting Q and K by a shared scalar must not change the output
        let q = DenseArray::new(vec![3, 2], vec![10.0, 12.0, 9.0, 11.0, 13.0, 8.0]).unwrap();
        let k = DenseArray::new(vec![3, 2], vec![11.0, 9.5, 12.0, 10.0, 8.5, 13.5]).unwrap();
        let v = DenseArray::new(vec![3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let c = cfg(2);
        let big = linear_attention(&q, &k, &v, &c).unwrap();
        let small = linear_attention(&q.map(|x| x - 10.0), &k.map(|x| x - 10.0), &v, &c).unwrap();
        assert!(big.sub(&small).unwrap().max_abs() < 1e-10);
    }

    #[test]
    fn exp_kernel_survives_large_entries() {
        let q = DenseArray::new(vec![2, 2], vec![500.0, -500.0, 300.0, 200.0]).unwrap();
        let v = DenseArray::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = linear_attention(&q, &q, &v, &cfg(2)).unwrap();
        assert!(out.is_finite());
    }

    #[test]
    fn denominator_underflow_detected() {
        // identity kernel with orthogonal q/z gives a zero denominator
        let q = DenseArray::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let k = DenseArray::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let v = DenseArray::new(vec![1, 2], vec![1.0, 1.0]).unwrap();
        let mut c = cfg(2);
        c.kernel = Kernel::Identity;
        assert!(matches!(
            linear_attention(&q, &k, &v, &c),
            Err(Error::NormalizationUnderflow(_))
        ));
    }

    #[test]
    fn hla_output_stays_in_ball() {
        let kappa = Curvature::new(-1.0).unwrap();
        let tokens = DenseArray::new(
            vec![4, 2],
            vec![0.9, 0.0, 0.0, 0.9, -0.9, 0.0, 0.6, 0.6],
        )
        .unwrap();
        let batch = PoincareBatch::new(tokens, kappa).unwrap();
        let c = cfg(2);
        let w = ProjectionWeights::identity(2);
        let out = hyperbolic_linear_attention(&batch, &c, &w).unwrap();
        for &n in out.tokens().row_norms().data() {
            assert!(n < kappa.radius());
        }
    }

    #[test]
    fn hla_all_origin_identity_kernel_stays_origin() {
        let kappa = Curvature::new(-1.0).unwrap();
        let batch = PoincareBatch::new(DenseArray::zeros(vec![5, 3]), kappa).unwrap();
        let mut c = cfg(3);
        c.kernel = Kernel::Identity;
        c.normalize = Normalize::None;
        let w = ProjectionWeights::identity(3);
        let out = hyperbolic_linear_attention(&batch, &c, &w).unwrap();
        assert!(out.tokens().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hla_single_token_collinear_with_value_row() {
        let kappa = Curvature::new(-1.0).unwrap();
        let tokens = DenseArray::new(vec![1, 2], vec![0.4, 0.3]).unwrap();
        let batch = PoincareBatch::new(tokens.clone(), kappa).unwrap();
        let c = cfg(2);
        let w = ProjectionWeights::identity(2);
        let out = hyperbolic_linear_attention(&batch, &c, &w).unwrap();
        // single-token normalization returns the V row itself (here = x)
        let o = out.tokens().row(0);
        let cross = o[0] * tokens.data()[1] - o[1] * tokens.data()[0];
        assert!(cross.abs() < 1e-12);
        assert!(crate::tensor::norm(o) < kappa.radius());
    }

    #[test]
    fn config_validation() {
        let mut c = cfg(2);
        c.ball_eps = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg(2);
        c.kappa = 1.0;
        assert!(c.validate().is_err());
    }
}
