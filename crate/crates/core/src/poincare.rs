//! Poincare-ball geometry with the radius convention r = -1/kappa: a point
//! x lives in the ball of curvature kappa < 0 iff ||x|| < -1/kappa.
//!
//! Houses the curvature-aware Euclidean-to-ball map (unit vector, tanh
//! magnitude compression, -1/kappa scaling), its exact inverse, an analytic
//! Jacobian-vector product for gradient checks, and the Mobius scalar
//! multiplication utility.

use crate::error::{Error, Result};
use crate::tensor::{dot, norm, DenseArray};

/// Strictly negative curvature. Ball radius is -1/kappa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa < 0.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!(
                "curvature must be finite and strictly negative, got {kappa}"
            )));
        }
        Ok(Self(kappa))
    }

    pub fn kappa(&self) -> f64 {
        self.0
    }

    pub fn radius(&self) -> f64 {
        -1.0 / self.0
    }
}

/// Token matrix whose rows all lie strictly inside the ball.
#[derive(Debug, Clone)]
pub struct PoincareBatch {
    tokens: DenseArray,
    curvature: Curvature,
}

impl PoincareBatch {
    pub fn new(tokens: DenseArray, curvature: Curvature) -> Result<Self> {
        let r = curvature.radius();
        let norms = tokens.row_norms();
        for (i, &n) in norms.data().iter().enumerate() {
            if !(n < r) {
                return Err(Error::Domain(format!(
                    "row {i} has norm {n} >= ball radius {r}"
                )));
            }
        }
        Ok(Self { tokens, curvature })
    }

    /// Construct without the membership scan. Callers must already have
    /// established the invariant (e.g. via projection).
    pub(crate) fn new_unchecked(tokens: DenseArray, curvature: Curvature) -> Self {
        Self { tokens, curvature }
    }

    pub fn tokens(&self) -> &DenseArray {
        &self.tokens
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }

    pub fn into_tokens(self) -> DenseArray {
        self.tokens
    }
}

/// Verification telemetry for one forward application.
#[derive(Debug, Clone)]
pub struct HtcReport {
    pub input_norms: DenseArray,
    pub output_norms: DenseArray,
    pub max_output_norm: f64,
}

/// Strict ball membership test: ||x|| < -1/kappa.
pub fn ball_contains(x: &[f64], curvature: Curvature) -> bool {
    norm(x) < curvature.radius()
}

/// Conformal factor lambda(x) = (2 / (1 + kappa ||x||^2))^2.
pub fn metric_factor(x: &[f64], curvature: Curvature) -> Result<f64> {
    if !ball_contains(x, curvature) {
        return Err(Error::Domain("metric_factor: point outside ball".into()));
    }
    let denom = 1.0 + curvature.kappa() * dot(x, x);
    if denom <= 0.0 {
        return Err(Error::Conditioning(format!(
            "metric factor singular: 1 + kappa*||x||^2 = {denom}"
        )));
    }
    let f = 2.0 / denom;
    Ok(f * f)
}

// Relative slack tolerated before artanh inputs are treated as a domain
// violation rather than forward-map round-off.
const ARTANH_SLACK: f64 = 1e-12;

fn guarded_artanh(v: f64) -> Result<f64> {
    if v >= 1.0 + ARTANH_SLACK {
        return Err(Error::Domain(format!("artanh argument {v} >= 1")));
    }
    Ok(v.min(1.0 - 1e-15).atanh())
}

/// Mobius scalar multiplication in the gyrovector form
/// r (x) x = (1/sqrt(-k)) tanh(r artanh(sqrt(-k) ||x||)) x/||x||.
pub fn mobius_scalar_mul(r: f64, x: &[f64], curvature: Curvature) -> Result<Vec<f64>> {
    if !ball_contains(x, curvature) {
        return Err(Error::Domain("mobius_scalar_mul: point outside ball".into()));
    }
    let n = norm(x);
    if n == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let sqrt_mk = (-curvature.kappa()).sqrt();
    let mag = (r * guarded_artanh(sqrt_mk * n)?).tanh() / sqrt_mk;
    Ok(x.iter().map(|&v| v * mag / n).collect())
}

// Rows with norm below this fraction of the radius are treated as the
// origin, where the unit-vector step is the continuous limit 0 -> 0.
const ORIGIN_FRAC: f64 = 1e-12;

/// Forward map per token: out = -(1/kappa) tanh(-kappa ||x||) x/||x||.
/// Every output row lands strictly inside the ball and keeps the input
/// direction exactly.
pub fn htc_forward(x: &DenseArray, curvature: Curvature) -> Result<PoincareBatch> {
    if !x.is_finite() {
        return Err(Error::NonFinite("htc_forward input".into()));
    }
    let r = curvature.radius();
    let f = *x.shape().last().ok_or_else(|| {
        Error::Shape("htc_forward needs at least one axis".into())
    })?;
    let n_rows = x.len().checked_div(f).unwrap_or(0);
    let mut out = vec![0.0; x.len()];
    for i in 0..n_rows {
        let row = &x.data()[i * f..(i + 1) * f];
        let n = norm(row);
        if n < ORIGIN_FRAC * r {
            continue; // origin maps to origin
        }
        // tanh rounds to 1.0 in f64 once n/r exceeds ~19, which would put
        // the row exactly on the boundary; clamp keeps containment strict.
        let mag = (r * (n / r).tanh()).min(r * (1.0 - 1e-12));
        for (j, &v) in row.iter().enumerate() {
            out[i * f + j] = v * mag / n;
        }
    }
    let tokens = DenseArray::new(x.shape().to_vec(), out)?;
    Ok(PoincareBatch::new_unchecked(tokens, curvature))
}

/// Forward map plus norm telemetry.
pub fn htc_forward_report(x: &DenseArray, curvature: Curvature) -> Result<(PoincareBatch, HtcReport)> {
    let input_norms = x.row_norms();
    let batch = htc_forward(x, curvature)?;
    let output_norms = batch.tokens().row_norms();
    let max_output_norm = output_norms.data().iter().fold(0.0f64, |m, &v| m.max(v));
    Ok((
        batch,
        HtcReport {
            input_norms,
            output_norms,
            max_output_norm,
        },
    ))
}

/// Exact inverse of the forward map:
/// x = artanh(-kappa ||y||) / (-kappa) * y/||y||.
pub fn htc_inverse(batch: &PoincareBatch) -> Result<DenseArray> {
    let y = batch.tokens();
    let kappa = batch.curvature();
    let r = kappa.radius();
    let f = *y.shape().last().unwrap_or(&0);
    let n_rows = y.len().checked_div(f).unwrap_or(0);
    let mut out = vec![0.0; y.len()];
    for i in 0..n_rows {
        let row = &y.data()[i * f..(i + 1) * f];
        let n = norm(row);
        if n < ORIGIN_FRAC * r {
            continue;
        }
        let mag = r * guarded_artanh(n / r)?;
        for (j, &v) in row.iter().enumerate() {
            out[i * f + j] = v * mag / n;
        }
    }
    DenseArray::new(y.shape().to_vec(), out)
}

/// Analytic Jacobian-vector product of the forward map at x in direction v.
///
/// With f(n) = r tanh(n/r), n = ||x||, u = x/n:
///   J v = f'(n) (u.v) u + (f(n)/n) (v - (u.v) u)
pub fn htc_jvp(x: &[f64], v: &[f64], curvature: Curvature) -> Result<Vec<f64>> {
    if x.len() != v.len() {
        return Err(Error::Shape("htc_jvp: x and v lengths differ".into()));
    }
    let r = curvature.radius();
    let n = norm(x);
    if n < ORIGIN_FRAC * r {
        return Err(Error::Domain(
            "htc_jvp undefined at the origin (unit-vector direction singularity)".into(),
        ));
    }
    let t = (n / r).tanh();
    let radial = 1.0 - t * t; // f'(n) = sech^2(n/r)
    let tangential = r * t / n; // f(n)/n
    let udotv = dot(x, v) / n;
    Ok(x
        .iter()
        .zip(v)
        .map(|(&xi, &vi)| {
            let ui = xi / n;
            radial * udotv * ui + tangential * (vi - udotv * ui)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(kappa: f64) -> Curvature {
        Curvature::new(kappa).unwrap()
    }

    #[test]
    fn curvature_rejects_nonnegative() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(0.5).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
        assert_eq!(k(-2.0).radius(), 0.5);
    }

    #[test]
    fn ball_membership() {
        let c = k(-1.0);
        assert!(ball_contains(&[0.0, 0.0], c));
        assert!(!ball_contains(&[1.0, 0.0], c)); // boundary excluded
        assert!(ball_contains(&[0.999, 0.0], c));
    }

    #[test]
    fn metric_factor_values() {
        let c = k(-1.0);
        assert_eq!(metric_factor(&[0.0, 0.0], c).unwrap(), 4.0);
        let x = [0.5f64.sqrt(), 0.0];
        assert!((metric_factor(&x, c).unwrap() - 16.0).abs() < 1e-12);
        let x = [0.75f64.sqrt(), 0.0];
        assert!((metric_factor(&x, c).unwrap() - 64.0).abs() < 1e-9);
        assert!(metric_factor(&[2.0, 0.0], c).is_err());
    }

    #[test]
    fn mobius_scalar_endpoints() {
        let c = k(-1.0);
        let x = [0.3, 0.0];
        let id = mobius_scalar_mul(1.0, &x, c).unwrap();
        assert!((id[0] - 0.3).abs() < 1e-15);
        let zero = mobius_scalar_mul(0.0, &x, c).unwrap();
        assert_eq!(zero, vec![0.0, 0.0]);
        let twice = mobius_scalar_mul(2.0, &x, c).unwrap();
        let expected = (2.0 * 0.3f64.atanh()).tanh();
        assert!((twice[0] - expected).abs() < 1e-12);
        // double-angle identity: tanh(2 artanh(t)) = 2t/(1+t^2)
        assert!((twice[0] - 0.6 / 1.09).abs() < 1e-12);
    }

    #[test]
    fn htc_forward_cases() {
        let c = k(-1.0);
        let zero = DenseArray::zeros(vec![1, 3]);
        let out = htc_forward(&zero, c).unwrap();
        assert!(out.tokens().data().iter().all(|&v| v == 0.0));

        let x = DenseArray::new(vec![1, 2], vec![0.5f64.atanh(), 0.0]).unwrap();
        let out = htc_forward(&x, c).unwrap();
        assert!((out.tokens().data()[0] - 0.5).abs() < 1e-14);

        let x = DenseArray::new(vec![1, 2], vec![100.0, 0.0]).unwrap();
        let out = htc_forward(&x, c).unwrap();
        let n = out.tokens().row_norms().data()[0];
        assert!(n < 1.0);
        assert!(n > 1.0 - 1e-10);
    }

    #[test]
    fn htc_inverse_cases() {
        let c = k(-1.0);
        let y = PoincareBatch::new(DenseArray::new(vec![1, 2], vec![0.5, 0.0]).unwrap(), c).unwrap();
        let x = htc_inverse(&y).unwrap();
        assert!((x.data()[0] - 0.5f64.atanh()).abs() < 1e-14);

        let origin = PoincareBatch::new(DenseArray::zeros(vec![1, 2]), c).unwrap();
        assert!(htc_inverse(&origin).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_rejects_boundary_row() {
        let c = k(-1.0);
        assert!(PoincareBatch::new(DenseArray::new(vec![1, 2], vec![1.0, 0.0]).unwrap(), c).is_err());
    }

    #[test]
    fn jvp_tangential_and_radial() {
        let c = k(-1.0);
        let x = [1.0, 0.0];
        // orthogonal direction scales by tanh(1)/1
        let out = htc_jvp(&x, &[0.0, 2.0], c).unwrap();
        assert!((out[1] - 2.0 * 1.0f64.tanh()).abs() < 1e-14);
        assert!(out[0].abs() < 1e-14);
        // parallel direction scales by f'(1) = sech^2(1)
        let out = htc_jvp(&x, &[3.0, 0.0], c).unwrap();
        let t = 1.0f64.tanh();
        assert!((out[0] - 3.0 * (1.0 - t * t)).abs() < 1e-14);
        assert!(out[1].abs() < 1e-14);
    }

    #[test]
    fn jvp_rejects_origin() {
        assert!(htc_jvp(&[0.0, 0.0], &[1.0, 0.0], k(-1.0)).is_err());
    }
}
