//! Wall-time and working-set scaling harness for the sequence mixers.
//!
//! Kernels here are dedicated f32 implementations instrumented with
//! explicit byte counters: `peak_bytes` is the transient working state a
//! kernel allocates (scratch buffers, projections, the N x N attention
//! matrix), excluding the shared input and the returned output. The f64
//! verification kernels in `attention` are deliberately not reused so the
//! cost model stays transparent.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Softmax,
    Hla,
    LinearIdentity,
    Rwkv,
    SsmScan,
    SsmConv,
}

impl Mechanism {
    pub const ALL: [Mechanism; 6] = [
        Mechanism::Softmax,
        Mechanism::Hla,
        Mechanism::LinearIdentity,
        Mechanism::Rwkv,
        Mechanism::SsmScan,
        Mechanism::SsmConv,
    ];
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mechanism::Softmax => "softmax",
            Mechanism::Hla => "hla",
            Mechanism::LinearIdentity => "linear_identity",
            Mechanism::Rwkv => "rwkv",
            Mechanism::SsmScan => "ssm_scan",
            Mechanism::SsmConv => "ssm_conv",
        };
        f.write_str(s)
    }
}

impl FromStr for Mechanism {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(Mechanism::Softmax),
            "hla" => Ok(Mechanism::Hla),
            "linear_identity" => Ok(Mechanism::LinearIdentity),
            "rwkv" => Ok(Mechanism::Rwkv),
            "ssm_scan" => Ok(Mechanism::SsmScan),
            "ssm_conv" => Ok(Mechanism::SsmConv),
            other => Err(Error::Config(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// One timed measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub mechanism: Mechanism,
    pub n: usize,
    pub f: usize,
    pub runtime_ns: u64,
    pub repeats: usize,
    pub peak_bytes: u64,
    pub threads: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SlopeReport {
    pub mechanism: Mechanism,
    pub slope: f64,
    pub r_squared: f64,
    /// set when the fit quality falls below r^2 = 0.95
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub ns: Vec<usize>,
    pub feature_dim: usize,
    pub repeats: usize,
    pub warmup: usize,
    pub threads: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            ns: vec![512, 1024, 2048, 4096, 8192],
            feature_dim: 64,
            repeats: 5,
            warmup: 3,
            threads: 1,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.len() < 4 {
            return Err(Error::Config("need at least 4 grid points".into()));
        }
        if self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("grid must be strictly increasing".into()));
        }
        let span = self.ns[self.ns.len() - 1] as f64 / self.ns[0] as f64;
        if span < 16.0 {
            return Err(Error::Config(format!(
                "grid must span >= 16x, got {span:.1}x"
            )));
        }
        if self.repeats < 5 {
            return Err(Error::Config("repeats must be >= 5".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        Ok(())
    }
}

// ---- f32 kernels ---------------------------------------------------------

const SSM_STATE: usize = 16;
const RWKV_DECAY: f32 = 0.9;
const RWKV_BONUS: f32 = 0.1;

struct KernelOutput {
    out: Vec<f32>,
    peak_bytes: u64,
}

fn bytes_of(len: usize) -> u64 {
    (len * std::mem::size_of::<f32>()) as u64
}

/// Split the rows of `out` across `threads` scoped workers.
fn for_row_chunks(
    out: &mut [f32],
    row_width: usize,
    threads: usize,
    body: impl Fn(usize, &mut [f32]) + Sync,
) {
    let rows = out.len() / row_width;
    if threads <= 1 || rows < threads * 2 {
        body(0, out);
        return;
    }
    let chunk_rows = rows.div_ceil(threads);
    std::thread::scope(|scope| {
        for (idx, chunk) in out.chunks_mut(chunk_rows * row_width).enumerate() {
            let body = &body;
            scope.spawn(move || body(idx * chunk_rows, chunk));
        }
    });
}

// C += A (n x k) * B (k x m), fixed ikj order.
fn matmul_f32(a: &[f32], b: &[f32], _n: usize, k: usize, m: usize, out: &mut [f32], threads: usize) {
    for_row_chunks(out, m, threads, |row0, chunk| {
        for (local, orow) in chunk.chunks_mut(m).enumerate() {
            let i = row0 + local;
            let arow = &a[i * k..(i + 1) * k];
            for (p, &ap) in arow.iter().enumerate() {
                if ap == 0.0 {
                    continue;
                }
                let brow = &b[p * m..(p + 1) * m];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += ap * bv;
                }
            }
        }
    });
}

struct BenchInputs {
    x: Vec<f32>,
    w_q: Vec<f32>,
    w_k: Vec<f32>,
    w_v: Vec<f32>,
}

fn gen_inputs(n: usize, f: usize, seed: u64) -> BenchInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |len: usize, bound: f32| -> Vec<f32> {
        (0..len).map(|_| rng.random_range(-bound..bound)).collect()
    };
    let wb = 1.0 / (f as f32).sqrt();
    BenchInputs {
        x: draw(n * f, 1.0),
        w_q: draw(f * f, wb),
        w_k: draw(f * f, wb),
        w_v: draw(f * f, wb),
    }
}

/// Quadratic baseline: projections, the materialized N x N row-softmax
/// matrix, and the weighted sum.
fn softmax_kernel(inp: &BenchInputs, n: usize, f: usize, threads: usize) -> KernelOutput {
    let mut q = vec![0.0f32; n * f];
    let mut k = vec![0.0f32; n * f];
    let mut v = vec![0.0f32; n * f];
    matmul_f32(&inp.x, &inp.w_q, n, f, f, &mut q, threads);
    matmul_f32(&inp.x, &inp.w_k, n, f, f, &mut k, threads);
    matmul_f32(&inp.x, &inp.w_v, n, f, f, &mut v, threads);
    let mut kt = vec![0.0f32; n * f];
    for i in 0..n {
        for j in 0..f {
            kt[j * n + i] = k[i * f + j];
        }
    }
    let scale = 1.0 / (f as f32).sqrt();
    let mut attn = vec![0.0f32; n * n];
    for_row_chunks(&mut attn, n, threads, |row0, chunk| {
        for (local, row) in chunk.chunks_mut(n).enumerate() {
            let i = row0 + local;
            let qi = &q[i * f..(i + 1) * f];
            for (p, &qp) in qi.iter().enumerate() {
                let ktrow = &kt[p * n..(p + 1) * n];
                for (r, &kv) in row.iter_mut().zip(ktrow) {
                    *r += qp * kv;
                }
            }
            let mut row_max = f32::NEG_INFINITY;
            for e in row.iter_mut() {
                *e *= scale;
                row_max = row_max.max(*e);
            }
            let mut sum = 0.0f32;
            for e in row.iter_mut() {
                *e = (*e - row_max).exp();
                sum += *e;
            }
            for e in row.iter_mut() {
                *e /= sum;
            }
        }
    });
    let mut out = vec![0.0f32; n * f];
    matmul_f32(&attn, &v, n, n, f, &mut out, threads);
    KernelOutput {
        out,
        peak_bytes: bytes_of(4 * n * f + n * n),
    }
}

/// Streaming linear attention: the only persistent working state is the
/// F x F aggregate and the length-F sums, independent of N.
fn linear_kernel(inp: &BenchInputs, n: usize, f: usize, exp_kernel: bool, threads: usize) -> KernelOutput {
    let phi = |v: f32| -> f32 {
        if exp_kernel {
            v.clamp(-30.0, 30.0).exp()
        } else {
            v
        }
    };
    let mut s = vec![0.0f32; f * f];
    let mut z = vec![0.0f32; f];
    let mut krow = vec![0.0f32; f];
    let mut vrow = vec![0.0f32; f];
    for t in 0..n {
        let xt = &inp.x[t * f..(t + 1) * f];
        krow.iter_mut().for_each(|e| *e = 0.0);
        vrow.iter_mut().for_each(|e| *e = 0.0);
        for (p, &xp) in xt.iter().enumerate() {
            let wkrow = &inp.w_k[p * f..(p + 1) * f];
            let wvrow = &inp.w_v[p * f..(p + 1) * f];
            for j in 0..f {
                krow[j] += xp * wkrow[j];
                vrow[j] += xp * wvrow[j];
            }
        }
        for (a, kv) in krow.iter().enumerate() {
            let ka = phi(*kv);
            z[a] += ka;
            let srow = &mut s[a * f..(a + 1) * f];
            for (sv, &vv) in srow.iter_mut().zip(&vrow) {
                *sv += ka * vv;
            }
        }
    }
    let mut out = vec![0.0f32; n * f];
    let s_ref = &s;
    let z_ref = &z;
    for_row_chunks(&mut out, f, threads, |row0, chunk| {
        let mut qrow = vec![0.0f32; f];
        for (local, orow) in chunk.chunks_mut(f).enumerate() {
            let i = row0 + local;
            let xi = &inp.x[i * f..(i + 1) * f];
            qrow.iter_mut().for_each(|e| *e = 0.0);
            for (p, &xp) in xi.iter().enumerate() {
                let wqrow = &inp.w_q[p * f..(p + 1) * f];
                for j in 0..f {
                    qrow[j] += xp * wqrow[j];
                }
            }
            let mut denom = 0.0f32;
            for a in 0..f {
                let qa = phi(qrow[a]);
                denom += qa * z_ref[a];
                let srow = &s_ref[a * f..(a + 1) * f];
                for (o, &sv) in orow.iter_mut().zip(srow) {
                    *o += qa * sv;
                }
            }
            if exp_kernel {
                for o in orow.iter_mut() {
                    *o /= denom;
                }
            }
        }
    });
    KernelOutput {
        out,
        peak_bytes: bytes_of(f * f + 4 * f),
    }
}

/// Recurrent wkv with a fixed per-channel decay/bonus; O(F^2) state.
fn rwkv_kernel(inp: &BenchInputs, n: usize, f: usize) -> KernelOutput {
    let mut sigma = vec![0.0f32; f * f];
    let mut out = vec![0.0f32; n * f];
    for t in 0..n {
        let xt = &inp.x[t * f..(t + 1) * f];
        let orow = &mut out[t * f..(t + 1) * f];
        for a in 0..f {
            let ka = xt[a];
            let srow = &mut sigma[a * f..(a + 1) * f];
            let bonus = RWKV_BONUS * ka;
            for b in 0..f {
                orow[b] += bonus * xt[b] + srow[b];
                srow[b] = RWKV_DECAY * srow[b] + ka * xt[b];
            }
        }
    }
    KernelOutput {
        out,
        peak_bytes: bytes_of(f * f),
    }
}

// diagonal decay/input vectors shared by the scan and conv kernels
fn ssm_coeffs(delta: f32) -> ([f32; SSM_STATE], [f32; SSM_STATE], [f32; SSM_STATE]) {
    let mut a_bar = [0.0f32; SSM_STATE];
    let mut b_bar = [0.0f32; SSM_STATE];
    let mut c = [0.0f32; SSM_STATE];
    for i in 0..SSM_STATE {
        let a = -(1.0 + i as f32);
        let z = delta * a;
        a_bar[i] = z.exp();
        b_bar[i] = (z.exp() - 1.0) / a;
        c[i] = 1.0 / (1.0 + i as f32);
    }
    (a_bar, b_bar, c)
}

/// Per-channel diagonal scan; O(S) state reused across channels.
fn ssm_scan_kernel(inp: &BenchInputs, n: usize, f: usize) -> KernelOutput {
    let (a_bar, b_bar, c) = ssm_coeffs(0.2);
    let mut out = vec![0.0f32; n * f];
    let mut h = [0.0f32; SSM_STATE];
    for ch in 0..f {
        h.iter_mut().for_each(|e| *e = 0.0);
        for t in 0..n {
            let xt = inp.x[t * f + ch];
            let mut y = 0.0f32;
            for i in 0..SSM_STATE {
                h[i] = a_bar[i] * h[i] + b_bar[i] * xt;
                y += c[i] * h[i];
            }
            out[t * f + ch] = y;
        }
    }
    KernelOutput {
        out,
        peak_bytes: bytes_of(3 * SSM_STATE),
    }
}

/// Convolutional form with the kernel truncated where the decayed taps
/// drop below 1e-9 of the leading tap, so the cost stays linear in N.
fn ssm_conv_kernel(inp: &BenchInputs, n: usize, f: usize) -> KernelOutput {
    let (a_bar, b_bar, c) = ssm_coeffs(0.2);
    let mut taps: Vec<f32> = Vec::new();
    let mut v = b_bar;
    loop {
        let mut k = 0.0f32;
        for i in 0..SSM_STATE {
            k += c[i] * v[i];
        }
        taps.push(k);
        if taps.len() >= n || k.abs() < 1e-9 * taps[0].abs().max(f32::MIN_POSITIVE) {
            break;
        }
        for i in 0..SSM_STATE {
            v[i] *= a_bar[i];
        }
    }
    let klen = taps.len();
    let mut out = vec![0.0f32; n * f];
    for ch in 0..f {
        for t in 0..n {
            let mut acc = 0.0f32;
            let maxtau = klen.min(t + 1);
            for (tau, &kv) in taps.iter().enumerate().take(maxtau) {
                acc += kv * inp.x[(t - tau) * f + ch];
            }
            out[t * f + ch] = acc;
        }
    }
    KernelOutput {
        out,
        peak_bytes: bytes_of(klen + 2 * SSM_STATE),
    }
}

fn run_kernel(mech: Mechanism, inp: &BenchInputs, n: usize, f: usize, threads: usize) -> KernelOutput {
    match mech {
        Mechanism::Softmax => softmax_kernel(inp, n, f, threads),
        Mechanism::Hla => linear_kernel(inp, n, f, true, threads),
        Mechanism::LinearIdentity => linear_kernel(inp, n, f, false, threads),
        Mechanism::Rwkv => rwkv_kernel(inp, n, f),
        Mechanism::SsmScan => ssm_scan_kernel(inp, n, f),
        Mechanism::SsmConv => ssm_conv_kernel(inp, n, f),
    }
}

fn timer_resolution_ns() -> u64 {
    let mut best = u64::MAX;
    for _ in 0..256 {
        let t0 = Instant::now();
        let mut dt = t0.elapsed();
        while dt.is_zero() {
            dt = t0.elapsed();
        }
        best = best.min(dt.as_nanos() as u64);
    }
    best.max(1)
}

/// Time each (mechanism, N) pair on identical inputs: `warmup` discarded
/// runs, then the median of `repeats` timed runs.
pub fn run_scaling_bench(mechanisms: &[Mechanism], config: &BenchConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    if mechanisms.is_empty() {
        return Err(Error::Config("no mechanisms selected".into()));
    }
    let f = config.feature_dim;
    let resolution = timer_resolution_ns();
    let mut records = Vec::new();
    for &n in &config.ns {
        // identical inputs for every mechanism at this N
        let inputs = gen_inputs(n, f, config.seed ^ n as u64);
        for &mech in mechanisms {
            let mut peak_bytes = 0;
            for _ in 0..config.warmup {
                let r = run_kernel(mech, &inputs, n, f, config.threads);
                std::hint::black_box(&r.out);
                peak_bytes = r.peak_bytes;
            }
            let mut times = Vec::with_capacity(config.repeats);
            for _ in 0..config.repeats {
                let t0 = Instant::now();
                let r = run_kernel(mech, &inputs, n, f, config.threads);
                let dt = t0.elapsed().as_nanos() as u64;
                std::hint::black_box(&r.out);
                peak_bytes = r.peak_bytes;
                times.push(dt.max(1));
            }
            times.sort_unstable();
            let median = times[times.len() / 2];
            if resolution > median / 100 {
                return Err(Error::Conditioning(format!(
                    "timer resolution {resolution} ns exceeds 1% of measured {median} ns \
                     for {mech} at N={n}; increase N or repeats"
                )));
            }
            records.push(BenchRecord {
                mechanism: mech,
                n,
                f,
                runtime_ns: median,
                repeats: config.repeats,
                peak_bytes,
                threads: config.threads,
            });
        }
    }
    Ok(records)
}

/// Ordinary least squares of log runtime against log N.
pub fn fit_loglog_slope(records: &[BenchRecord], mechanism: Mechanism) -> Result<SlopeReport> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.mechanism == mechanism)
        .map(|r| ((r.n as f64).ln(), (r.runtime_ns as f64).ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need >= 4 records for {mechanism}, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        // perfectly flat line: the fit explains everything
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    Ok(SlopeReport {
        mechanism,
        slope,
        r_squared,
        flagged: r_squared < 0.95,
    })
}

/// Median runtime should be non-decreasing in N; one inversion is
/// tolerated as timing noise.
pub fn check_monotonic(records: &[BenchRecord], mechanism: Mechanism) -> bool {
    let mut rows: Vec<(usize, u64)> = records
        .iter()
        .filter(|r| r.mechanism == mechanism)
        .map(|r| (r.n, r.runtime_ns))
        .collect();
    rows.sort_unstable();
    let inversions = rows.windows(2).filter(|w| w[1].1 < w[0].1).count();
    inversions <= 1
}

// ---- report serialization -------------------------------------------------

pub const CSV_HEADER: &str = "mechanism,N,F,runtime_ns,repeats,peak_bytes";

pub fn emit_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.mechanism, r.n, r.f, r.runtime_ns, r.repeats, r.peak_bytes
        ));
    }
    out
}

/// Parse the CSV form back into records (threads is not part of the CSV
/// contract and comes back as 1).
pub fn parse_csv(text: &str) -> Result<Vec<BenchRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Format(format!("bad CSV header: {other:?}"))),
    }
    let mut records = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::Format(format!("bad CSV row: {line:?}")));
        }
        let parse_int = |s: &str| -> Result<u64> {
            s.parse().map_err(|_| Error::Format(format!("bad integer {s:?}")))
        };
        records.push(BenchRecord {
            mechanism: cols[0].parse()?,
            n: parse_int(cols[1])? as usize,
            f: parse_int(cols[2])? as usize,
            runtime_ns: parse_int(cols[3])?,
            repeats: parse_int(cols[4])? as usize,
            peak_bytes: parse_int(cols[5])?,
            threads: 1,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub slopes: Vec<SlopeReport>,
}

pub fn emit_json(records: &[BenchRecord], slopes: &[SlopeReport]) -> Result<String> {
    Ok(serde_json::to_string_pretty(&BenchReport {
        records: records.to_vec(),
        slopes: slopes.to_vec(),
    })?)
}
