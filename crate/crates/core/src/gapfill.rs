//! Auto-regressive reconstruction of masked segments.
//!
//! The valid data on each side of a gap is modelled as an AR process and
//! extrapolated into the gap, forward from the left flank and backward from
//! the right, then the two predictions are crossfaded.
//!
//! Models are fitted by forward-backward least squares (minimum-norm when
//! the data is rank deficient, e.g. a few pure tones at high order). When
//! that solution has a pole outside the unit circle the Burg estimate,
//! which is stable by construction, is used instead.

use nalgebra::{DMatrix, DVector};

use crate::synth::SyntheticSignal;
use crate::{Error, Result};

/// Ceiling on the default model order.
pub const MAX_DEFAULT_ORDER: usize = 64;

/// Relative singular-value cutoff of the minimum-norm least-squares solve.
const RANK_CUTOFF: f64 = 1e-11;

/// Pole radius above which a least-squares model counts as unstable.
const POLE_RADIUS_LIMIT: f64 = 1.0 + 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArMethod {
    ForwardBackward,
    Burg,
}

/// `x[t] ≈ Σ coefficients[i-1] · x[t-i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ARModel {
    pub order: usize,
    pub coefficients: Vec<f64>,
    /// Mean squared forward and backward prediction residual on the fitting data.
    pub fit_error: f64,
    pub method: ArMethod,
}

impl ARModel {
    /// Largest root magnitude of `z^p − Σ c_i z^(p−i)`.
    pub fn max_pole_radius(&self) -> f64 {
        max_pole_radius(&self.coefficients)
    }

    /// Extends `history` by `len` predicted samples.
    pub fn predict(&self, history: &[f64], len: usize) -> Vec<f64> {
        let p = self.order;
        let mut buf: Vec<f64> = history[history.len().saturating_sub(p)..].to_vec();
        let lead = p - buf.len().min(p);
        let mut out = Vec::with_capacity(len);
        let mut ext = vec![0.0; lead];
        ext.append(&mut buf);
        for _ in 0..len {
            let n = ext.len();
            let y: f64 = self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| c * ext[n - 1 - i])
                .sum();
            ext.push(y);
            out.push(y);
        }
        out
    }
}

fn max_pole_radius(c: &[f64]) -> f64 {
    let p = c.len();
    if p == 0 {
        return 0.0;
    }
    let mut companion = DMatrix::<f64>::zeros(p, p);
    for (j, &cj) in c.iter().enumerate() {
        companion[(0, j)] = cj;
    }
    for i in 1..p {
        companion[(i, i - 1)] = 1.0;
    }
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Mean of the squared forward and backward residuals.
fn fb_residual(data: &[f64], c: &[f64]) -> f64 {
    let p = c.len();
    let n = data.len();
    let mut acc = 0.0;
    for t in p..n {
        let fwd: f64 = data[t] - (0..p).map(|i| c[i] * data[t - 1 - i]).sum::<f64>();
        let s = t - p;
        let bwd: f64 = data[s] - (0..p).map(|i| c[i] * data[s + 1 + i]).sum::<f64>();
        acc += fwd * fwd + bwd * bwd;
    }
    acc / (2 * (n - p)) as f64
}

/// Burg recursion. Returns prediction-form coefficients.
pub fn burg(data: &[f64], order: usize) -> Vec<f64> {
    let n = data.len();
    let mut f = data.to_vec();
    let mut b = data.to_vec();
    let mut a = vec![1.0];
    for m in 0..order {
        let (mut num, mut den) = (0.0, 0.0);
        for t in m + 1..n {
            num += f[t] * b[t - 1];
            den += f[t] * f[t] + b[t - 1] * b[t - 1];
        }
        let k = if den > 0.0 { -2.0 * num / den } else { 0.0 };
        a.push(0.0);
        let prev = a.clone();
        for i in 0..a.len() {
            a[i] = prev[i] + k * prev[a.len() - 1 - i];
        }
        for t in (m + 1..n).rev() {
            let (ft, bt) = (f[t], b[t - 1]);
            f[t] = ft + k * bt;
            b[t] = bt + k * ft;
        }
    }
    a[1..].iter().map(|v| -v).collect()
}

/// Minimum-norm forward-backward least squares, solved on the data matrix.
fn forward_backward(data: &[f64], p: usize) -> Vec<f64> {
    let n = data.len();
    let rows = 2 * (n - p);
    // Forward rows predict x[t] from x[t-1..=t-p]; backward rows predict
    // x[t-p] from x[t-p+1..=t].
    let mut a = DMatrix::<f64>::zeros(rows, p);
    let mut b = DVector::<f64>::zeros(rows);
    for (r, t) in (p..n).enumerate() {
        for i in 0..p {
            a[(2 * r, i)] = data[t - 1 - i];
            a[(2 * r + 1, i)] = data[t - p + 1 + i];
        }
        b[2 * r] = data[t];
        b[2 * r + 1] = data[t - p];
    }
    // Reduce to the p×p triangular factor before the rank-revealing solve.
    let qr = a.qr();
    qr.q_tr_mul(&mut b);
    let r = qr.r();
    let rhs = b.rows(0, p).into_owned();
    let svd = r.svd(true, true);
    let top = svd.singular_values.max();
    match svd.solve(&rhs, RANK_CUTOFF * top) {
        Ok(c) => c.iter().copied().collect(),
        Err(_) => vec![f64::NAN; p],
    }
}

pub fn fit_ar(data: &[f64], order: usize) -> Result<ARModel> {
    if order == 0 || data.len() <= 2 * order {
        return Err(Error::invalid(format!(
            "AR order {order} needs more than {} samples, got {}",
            2 * order,
            data.len()
        )));
    }
    if data.iter().all(|v| *v == 0.0) {
        return Err(Error::Fit("cannot fit an AR model to all-zero data".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample in AR fitting data".into()));
    }
    let ls = forward_backward(data, order);
    let ls_ok = ls.iter().all(|v| v.is_finite()) && max_pole_radius(&ls) <= POLE_RADIUS_LIMIT;
    let (coefficients, method) = if ls_ok {
        (ls, ArMethod::ForwardBackward)
    } else {
        (burg(data, order), ArMethod::Burg)
    };
    let fit_error = fb_residual(data, &coefficients);
    Ok(ARModel {
        order,
        fit_error,
        coefficients,
        method,
    })
}

/// Maximal runs of `true` in `mask`.
pub fn find_gaps(mask: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut gaps = Vec::new();
    let mut start = None;
    for (i, &m) in mask.iter().enumerate() {
        match (m, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                gaps.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        gaps.push(s..mask.len());
    }
    gaps
}

/// Fills every masked run of `samples` in place. `order = None` picks
/// `min(⌊flank/3⌋, 64)` per gap from the shorter flank.
pub fn fill_gaps_in(samples: &mut [f64], mask: &[bool], order: Option<usize>) -> Result<()> {
    if samples.len() != mask.len() {
        return Err(Error::invalid(format!(
            "mask length {} differs from signal length {}",
            mask.len(),
            samples.len()
        )));
    }
    let gaps = find_gaps(mask);
    if gaps.is_empty() {
        return Ok(());
    }
    if gaps.len() == 1 && gaps[0].len() == samples.len() {
        return Err(Error::Reconstruction("every sample is masked".into()));
    }
    let original = samples.to_vec();
    for (g, gap) in gaps.iter().enumerate() {
        let left_end = gap.start;
        let left_start = if g == 0 { 0 } else { gaps[g - 1].end };
        let right_start = gap.end;
        let right_end = gaps.get(g + 1).map_or(samples.len(), |n| n.start);
        // Receive gates leave exact zeros at the far signal ends; they carry no model.
        let mut ls = left_start;
        while ls < left_end && original[ls] == 0.0 {
            ls += 1;
        }
        let mut re = right_end;
        while re > right_start && original[re - 1] == 0.0 {
            re -= 1;
        }
        let left = &original[ls..left_end];
        let right = &original[right_start..re];
        let p = order.unwrap_or_else(|| (left.len().min(right.len()) / 3).min(MAX_DEFAULT_ORDER));
        if p == 0 || left.len() < 2 * p + 1 || right.len() < 2 * p + 1 {
            return Err(Error::Reconstruction(format!(
                "gap {g} at samples {}..{}: flanks of {} and {} samples are too short for order {p}",
                gap.start,
                gap.end,
                left.len(),
                right.len()
            )));
        }
        let name = |e: Error| {
            Error::Reconstruction(format!("gap {g} at samples {}..{}: {e}", gap.start, gap.end))
        };
        let fwd_model = fit_ar(left, p).map_err(name)?;
        let reversed: Vec<f64> = right.iter().rev().copied().collect();
        let bwd_model = fit_ar(&reversed, p).map_err(name)?;
        let len = gap.len();
        let fwd = fwd_model.predict(left, len);
        let bwd = bwd_model.predict(&reversed, len);
        for i in 0..len {
            let w = (i + 1) as f64 / (len + 1) as f64;
            samples[gap.start + i] = (1.0 - w) * fwd[i] + w * bwd[len - 1 - i];
        }
    }
    Ok(())
}

/// Reconstructs all gaps of a stitched signal and clears their mask.
pub fn fill_gap(sig: &SyntheticSignal, order: Option<usize>) -> Result<SyntheticSignal> {
    let mut out = sig.clone();
    fill_gaps_in(&mut out.samples, &sig.gap_mask, order)?;
    out.gap_mask.iter_mut().for_each(|m| *m = false);
    Ok(out)
}
