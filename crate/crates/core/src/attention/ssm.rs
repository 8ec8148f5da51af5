//! Diagonal/small-dense state-space baseline: zero-order-hold
//! discretization, the sequential state recurrence, and the equivalent
//! global-convolution form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{solve, DenseArray};

const MAX_DENSE_STATE: usize = 32;
const SERIES_NORM_CUTOFF: f64 = 1e-6;

/// Continuous-time parameters (A, B, C) and the ZOH step size delta.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SsmParams {
    pub a: DenseArray,
    pub b: DenseArray,
    pub c: DenseArray,
    pub delta: f64,
}

impl SsmParams {
    pub fn validate(&self) -> Result<()> {
        let s = self.a.nrows();
        if self.a.ndim() != 2 || self.a.ncols() != s {
            return Err(Error::Shape("A must be square".into()));
        }
        if self.b.shape() != [s, 1] {
            return Err(Error::Shape("B must be S x 1".into()));
        }
        if self.c.shape() != [1, s] {
            return Err(Error::Shape("C must be 1 x S".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config(format!("delta must be > 0, got {}", self.delta)));
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn is_diagonal(&self) -> bool {
        let s = self.a.nrows();
        (0..s).all(|i| (0..s).all(|j| i == j || self.a.get2(i, j) == 0.0))
    }
}

fn inf_norm(a: &DenseArray) -> f64 {
    let (n, m) = (a.nrows(), a.ncols());
    (0..n)
        .map(|i| (0..m).map(|j| a.get2(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a Taylor series.
/// Intended for small dense matrices (S <= 32); the diagonal fast path in
/// `ssm_discretize` bypasses this entirely.
pub fn expm(a: &DenseArray) -> Result<DenseArray> {
    let s = a.nrows();
    if a.ndim() != 2 || a.ncols() != s {
        return Err(Error::Shape("expm requires a square matrix".into()));
    }
    if s > MAX_DENSE_STATE {
        return Err(Error::Conditioning(format!(
            "expm supports S <= {MAX_DENSE_STATE}, got {s}"
        )));
    }
    let norm = inf_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(0.5f64.powi(squarings as i32));

    let mut result = DenseArray::eye(s);
    let mut term = DenseArray::eye(s);
    for k in 1..=30u32 {
        term = term.matmul(&scaled)?.scale(1.0 / k as f64);
        result = result.add(&term)?;
        if term.max_abs() < 1e-18 * result.max_abs().max(1.0) {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result)?;
    }
    Ok(result)
}

// phi(z) = (e^z - 1)/z with the series fallback near zero.
fn phi_scalar(z: f64) -> f64 {
    if z.abs() < SERIES_NORM_CUTOFF {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

/// Zero-order-hold discretization: Abar = exp(dA),
/// Bbar = (dA)^-1 (exp(dA) - I) dB, with the series
/// d (I + dA/2! + (dA)^2/3! + ...) B used when ||dA|| is tiny.
pub fn ssm_discretize(params: &SsmParams) -> Result<(DenseArray, DenseArray)> {
    params.validate()?;
    let s = params.state_dim();
    let d = params.delta;

    if params.is_diagonal() {
        let mut a_bar = DenseArray::zeros(vec![s, s]);
        let mut b_bar = DenseArray::zeros(vec![s, 1]);
        for i in 0..s {
            let z = d * params.a.get2(i, i);
            a_bar.set2(i, i, z.exp());
            b_bar.set2(i, 0, phi_scalar(z) * d * params.b.get2(i, 0));
        }
        return Ok((a_bar, b_bar));
    }

    let da = params.a.scale(d);
    let a_bar = expm(&da)?;
    let db = params.b.scale(d);
    let b_bar = if inf_norm(&da) < SERIES_NORM_CUTOFF {
        // d (I + dA/2! + (dA)^2/3!) B
        let mut acc = DenseArray::eye(s);
        acc = acc.add(&da.scale(0.5))?;
        acc = acc.add(&da.matmul(&da)?.scale(1.0 / 6.0))?;
        acc.matmul(&db)?
    } else {
        let rhs = a_bar.sub(&DenseArray::eye(s))?.matmul(&db)?;
        solve(&da, &rhs).map_err(|_| {
            Error::Conditioning("ZOH: dA is singular outside the series regime".into())
        })?
    };
    Ok((a_bar, b_bar))
}

/// Sequential recurrence h_t = Abar h_{t-1} + Bbar x_t, y_t = C h_t with
/// h_0 = 0.
pub fn ssm_scan(
    a_bar: &DenseArray,
    b_bar: &DenseArray,
    c: &DenseArray,
    x: &DenseArray,
) -> Result<DenseArray> {
    let s = a_bar.nrows();
    let n = x.len();
    let mut h = vec![0.0; s];
    let mut h_next = vec![0.0; s];
    let mut y = Vec::with_capacity(n);
    for &xt in x.data() {
        for i in 0..s {
            let mut acc = b_bar.get2(i, 0) * xt;
            for j in 0..s {
                acc += a_bar.get2(i, j) * h[j];
            }
            h_next[i] = acc;
        }
        std::mem::swap(&mut h, &mut h_next);
        let mut yt = 0.0;
        for j in 0..s {
            yt += c.get2(0, j) * h[j];
        }
        y.push(yt);
    }
    DenseArray::new(vec![n], y)
}

/// Builds the kernel Kbar = (C Bbar, C Abar Bbar, ..., C Abar^{M-1} Bbar).
pub fn ssm_kernel(
    a_bar: &DenseArray,
    b_bar: &DenseArray,
    c: &DenseArray,
    len: usize,
) -> Result<DenseArray> {
    let s = a_bar.nrows();
    let mut v: Vec<f64> = (0..s).map(|i| b_bar.get2(i, 0)).collect();
    let mut kernel = Vec::with_capacity(len);
    let mut v_next = vec![0.0; s];
    for step in 0..len {
        let mut k = 0.0;
        for j in 0..s {
            k += c.get2(0, j) * v[j];
        }
        kernel.push(k);
        if step + 1 == len {
            break;
        }
        for i in 0..s {
            let mut acc = 0.0;
            for j in 0..s {
                acc += a_bar.get2(i, j) * v[j];
            }
            v_next[i] = acc;
        }
        std::mem::swap(&mut v, &mut v_next);
    }
    DenseArray::new(vec![len], kernel)
}

/// Global-convolution form: y = x * Kbar (causal). Equals `ssm_scan` on
/// the same discretized parameters.
pub fn ssm_conv(
    a_bar: &DenseArray,
    b_bar: &DenseArray,
    c: &DenseArray,
    x: &DenseArray,
) -> Result<DenseArray> {
    let m = x.len();
    let kernel = ssm_kernel(a_bar, b_bar, c, m)?;
    let mut y = vec![0.0; m];
    for t in 0..m {
        let mut acc = 0.0;
        for tau in 0..=t {
            acc += kernel.data()[tau] * x.data()[t - tau];
        }
        y[t] = acc;
    }
    DenseArray::new(vec![m], y)
}
