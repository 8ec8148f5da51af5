//! RWKV-style token mixing: the mu-interpolated r/k/v/g projections and
//! the wkv recurrence over decayed outer products, in both a literal
//! (quadratic) form and the equivalent linear recurrent form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DenseArray;

/// Parameter bundle for the mix step and the wkv recurrence.
///
/// `w` is the per-channel decay (the low-rank data-dependent variant is
/// intentionally not modeled; decay is a direct parameter here) and `u`
/// the per-channel current-token bonus.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RwkvParams {
    pub mu_r: Vec<f64>,
    pub mu_k: Vec<f64>,
    pub mu_v: Vec<f64>,
    pub mu_g: Vec<f64>,
    pub w_r: DenseArray,
    pub w_k: DenseArray,
    pub w_v: DenseArray,
    pub w_g: DenseArray,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
}

impl RwkvParams {
    pub fn validate(&self) -> Result<()> {
        for (name, mu) in [
            ("mu_r", &self.mu_r),
            ("mu_k", &self.mu_k),
            ("mu_v", &self.mu_v),
            ("mu_g", &self.mu_g),
        ] {
            if mu.iter().any(|&m| !(0.0..=1.0).contains(&m)) {
                return Err(Error::Config(format!("{name} entries must lie in [0,1]")));
            }
        }
        if self.w.iter().any(|&w| !(w > 0.0 && w < 1.0)) {
            return Err(Error::Config("decay w must lie strictly in (0,1)".into()));
        }
        if self.u.iter().any(|u| !u.is_finite()) {
            return Err(Error::NonFinite("bonus u".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.w.len()
    }
}

/// Which evaluation path the wkv aggregation takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WkvMode {
    /// Literal evaluation of the decayed sum (quadratic oracle).
    Direct,
    /// Running-state recurrence (linear).
    Recurrent,
}

fn interp(mu: &[f64], x_t: &[f64], x_prev: &[f64]) -> Vec<f64> {
    mu.iter()
        .zip(x_t.iter().zip(x_prev))
        .map(|(&m, (&a, &b))| m * a + (1.0 - m) * b)
        .collect()
}

/// The four mixed-and-projected token views (r, k, v, g).
pub type RwkvViews = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Token mix: box_t = W_box (mu_box x_t + (1 - mu_box) x_prev) for
/// box in {r, k, v, g}.
pub fn rwkv_mix(x_t: &[f64], x_prev: &[f64], params: &RwkvParams) -> Result<RwkvViews> {
    params.validate()?;
    let f = x_t.len();
    if x_prev.len() != f {
        return Err(Error::Shape("rwkv_mix: x_t and x_prev lengths differ".into()));
    }
    let project = |w: &DenseArray, mixed: Vec<f64>| -> Result<Vec<f64>> {
        let row = DenseArray::new(vec![1, f], mixed)?;
        Ok(row.matmul(w)?.into_data())
    };
    Ok((
        project(&params.w_r, interp(&params.mu_r, x_t, x_prev))?,
        project(&params.w_k, interp(&params.mu_k, x_t, x_prev))?,
        project(&params.w_v, interp(&params.mu_v, x_t, x_prev))?,
        project(&params.w_g, interp(&params.mu_g, x_t, x_prev))?,
    ))
}

// wkv_t is the F x F matrix d(u) k_t^T v_t + sum_{i<t} d(w^{t-1-i}) k_i^T v_i.
// The public op contracts each state over the key index (left-multiplying
// by the all-ones row vector), yielding one F-vector per step.
fn wkv_states(k: &DenseArray, v: &DenseArray, params: &RwkvParams, mode: WkvMode) -> Vec<Vec<f64>> {
    let n = k.nrows();
    let f = k.ncols();
    let mut states = Vec::with_capacity(n);
    match mode {
        WkvMode::Direct => {
            for t in 0..n {
                let mut wkv = vec![0.0; f * f];
                let kt = k.row(t);
                let vt = v.row(t);
                for a in 0..f {
                    let ua_ka = params.u[a] * kt[a];
                    for b in 0..f {
                        wkv[a * f + b] = ua_ka * vt[b];
                    }
                }
                for i in 0..t {
                    let ki = k.row(i);
                    let vi = v.row(i);
                    let pow = (t - 1 - i) as i32;
                    for a in 0..f {
                        let decay = params.w[a].powi(pow);
                        let d_ka = decay * ki[a];
                        for b in 0..f {
                            wkv[a * f + b] += d_ka * vi[b];
                        }
                    }
                }
                states.push(wkv);
            }
        }
        WkvMode::Recurrent => {
            let mut sigma = vec![0.0; f * f];
            for t in 0..n {
                let kt = k.row(t);
                let vt = v.row(t);
                let mut wkv = vec![0.0; f * f];
                for a in 0..f {
                    let ua_ka = params.u[a] * kt[a];
                    for b in 0..f {
                        wkv[a * f + b] = ua_ka * vt[b] + sigma[a * f + b];
                    }
                }
                for a in 0..f {
                    let wa = params.w[a];
                    let ka = kt[a];
                    for b in 0..f {
                        sigma[a * f + b] = wa * sigma[a * f + b] + ka * vt[b];
                    }
                }
                states.push(wkv);
            }
        }
    }
    states
}

/// The wkv aggregation of decayed k^T v outer products. Direct mode
/// evaluates the decayed sum literally; recurrent mode keeps the running
/// F x F state. Both agree to round-off.
pub fn rwkv_wkv(
    k: &DenseArray,
    v: &DenseArray,
    params: &RwkvParams,
    mode: WkvMode,
) -> Result<DenseArray> {
    params.validate()?;
    if k.shape() != v.shape() || k.ndim() != 2 {
        return Err(Error::Shape("rwkv_wkv: k and v must share an NxF shape".into()));
    }
    let f = k.ncols();
    if params.w.len() != f || params.u.len() != f {
        return Err(Error::Shape("rwkv_wkv: decay/bonus length must equal F".into()));
    }
    let n = k.nrows();
    if n == 0 {
        return Err(Error::Shape("rwkv_wkv needs N >= 1".into()));
    }
    let states = wkv_states(k, v, params, mode);
    let mut out = vec![0.0; n * f];
    for (t, wkv) in states.iter().enumerate() {
        for b in 0..f {
            let mut acc = 0.0;
            for a in 0..f {
                acc += wkv[a * f + b];
            }
            out[t * f + b] = acc;
        }
    }
    DenseArray::new(vec![n, f], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(f: usize, w: f64, u: f64) -> RwkvParams {
        RwkvParams {
            mu_r: vec![0.5; f],
            mu_k: vec![0.5; f],
            mu_v: vec![0.5; f],
            mu_g: vec![0.5; f],
            w_r: DenseArray::eye(f),
            w_k: DenseArray::eye(f),
            w_v: DenseArray::eye(f),
            w_g: DenseArray::eye(f),
            w: vec![w; f],
            u: vec![u; f],
        }
    }

    #[test]
    fn mix_endpoints() {
        let mut p = params(2, 0.5, 0.0);
        let x_t = [1.0, 2.0];
        let x_prev = [3.0, 4.0];
        p.mu_r = vec![1.0, 1.0];
        let (r, _, _, _) = rwkv_mix(&x_t, &x_prev, &p).unwrap();
        assert_eq!(r, vec![1.0, 2.0]);
        p.mu_r = vec![0.0, 0.0];
        let (r, _, _, _) = rwkv_mix(&x_t, &x_prev, &p).unwrap();
        assert_eq!(r, vec![3.0, 4.0]);
        // equal inputs are mu-independent
        p.mu_r = vec![0.3, 0.7];
        let (r, _, _, _) = rwkv_mix(&x_t, &x_t, &p).unwrap();
        assert_eq!(r, vec![1.0, 2.0]);
    }

    #[test]
    fn wkv_first_step_is_bonus_only() {
        let p = params(1, 0.5, 0.5);
        let k = DenseArray::new(vec![1, 1], vec![1.0]).unwrap();
        let v = DenseArray::new(vec![1, 1], vec![2.0]).unwrap();
        let out = rwkv_wkv(&k, &v, &p, WkvMode::Direct).unwrap();
        assert_eq!(out.data(), &[1.0]);
    }

    #[test]
    fn wkv_scalar_hand_case() {
        // F=1, u=0.5, w=0.5, k=(1,1), v=(2,3): wkv1 = 1.0, wkv2 = 0.5*3 + 2 = 3.5
        let p = params(1, 0.5, 0.5);
        let k = DenseArray::new(vec![2, 1], vec![1.0, 1.0]).unwrap();
        let v = DenseArray::new(vec![2, 1], vec![2.0, 3.0]).unwrap();
        for mode in [WkvMode::Direct, WkvMode::Recurrent] {
            let out = rwkv_wkv(&k, &v, &p, mode).unwrap();
            assert_eq!(out.data(), &[1.0, 3.5]);
        }
    }

    #[test]
    fn wkv_modes_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.random_range(1..32);
            let f = rng.random_range(1..6);
            let mut p = params(f, 0.5, 0.0);
            p.w = (0..f).map(|_| rng.random_range(0.05..0.95)).collect();
            p.u = (0..f).map(|_| rng.random_range(-1.0..1.0)).collect();
            let data = |rng: &mut rand_chacha::ChaCha8Rng| {
                DenseArray::new(
                    vec![n, f],
                    (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
                .unwrap()
            };
            let k = data(&mut rng);
            let v = data(&mut rng);
            let a = rwkv_wkv(&k, &v, &p, WkvMode::Direct).unwrap();
            let b = rwkv_wkv(&k, &v, &p, WkvMode::Recurrent).unwrap();
            assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_decay() {
        let mut p = params(1, 0.5, 0.0);
        p.w = vec![1.0];
        let k = DenseArray::zeros(vec![1, 1]);
        assert!(rwkv_wkv(&k, &k, &p, WkvMode::Direct).is_err());
    }
}
