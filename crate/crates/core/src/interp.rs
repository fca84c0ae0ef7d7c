//! Fractional-sample evaluation of gated, oversampled signals.
//!
//! De-chirped rows are short tones gated by hard window edges, so an
//! FFT phase ramp would ring at both ends. A Lagrange stencil that is
//! slid inward near the edges keeps the interpolation inside the gate.

use std::ops::Range;

/// Stencil order used by the synthesis stage.
pub const LAGRANGE_ORDER: usize = 15;

/// Offsets closer than this to an integer sample are treated as exact.
pub const INTEGER_SNAP: f64 = 1e-9;

/// Evaluates `data` at fractional index `x` with a Lagrange polynomial of
/// degree `order` through samples drawn from `support` only.
///
/// `x` may lie slightly outside `support`; the stencil then extrapolates.
pub fn lagrange_at(data: &[f64], support: Range<usize>, x: f64, order: usize) -> f64 {
    debug_assert!(support.end <= data.len());
    if support.is_empty() {
        return 0.0;
    }
    let nearest = x.round();
    if (x - nearest).abs() < INTEGER_SNAP && nearest >= 0.0 {
        let i = nearest as usize;
        if support.contains(&i) {
            return data[i];
        }
    }

    let pts = (order + 1).min(support.len());
    let lo = support.start as f64;
    let hi = (support.end - pts) as f64;
    let start = (x.floor() - ((pts - 1) / 2) as f64).clamp(lo, hi) as usize;

    let nodes = start..start + pts;
    let mut acc = 0.0;
    for j in nodes.clone() {
        let xj = j as f64;
        let mut w = 1.0;
        for i in nodes.clone() {
            if i != j {
                w *= (x - i as f64) / (xj - i as f64);
            }
        }
        acc += w * data[j];
    }
    acc
}
