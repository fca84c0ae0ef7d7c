//! Bandwidth synthesis: splicing de-chirped rows into one wideband signal.
//!
//! Shifting row `n` by `n·(T_cr − Δf/k)` turns it into the continuation
//! of row `n−1`: both then read `cos 2π[k·τ·t + f_0·τ − k·τ²/2]` on a
//! common synthetic time axis `t`, where row `n` spans
//! `[n·Δf/k, n·Δf/k + T_cw]`. Adjacent spans overlap by `T_cw − Δf/k`.
//!
//! The splice keeps row 0 whole and, from every later row, only the part
//! past the end of its predecessor, i.e. the last `Δf/k` of each window.
//! The echo-arrival gate at the head of each row therefore only appears
//! once, at the start of the synthetic signal.

use crate::dechirp::SubSignalFrame;
use crate::interp::{lagrange_at, INTEGER_SNAP, LAGRANGE_ORDER};
use crate::plan::WaveformPlan;
use crate::txgen::first_sample_at;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// One train's wideband-equivalent de-chirped signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub plan: WaveformPlan,
    /// First sample of each row's contribution.
    pub segment_boundaries: Vec<usize>,
    /// True where the sample came from a masked row and has not been reconstructed.
    pub gap_mask: Vec<bool>,
    pub train_index: usize,
}

impl SyntheticSignal {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    /// Range that a beat frequency maps to, `c·f / 2k`.
    pub fn range_of_beat(&self, f: f64) -> f64 {
        SPEED_OF_LIGHT * f / (2.0 * self.plan.chirp_rate())
    }

    /// Beat frequency of a scatterer at round-trip delay `tau`.
    pub fn beat_of_delay(&self, tau: f64) -> f64 {
        self.plan.chirp_rate() * tau
    }

    /// Half-open sample range of segment `n`.
    pub fn segment(&self, n: usize) -> std::ops::Range<usize> {
        let start = self.segment_boundaries[n];
        let end = self
            .segment_boundaries
            .get(n + 1)
            .copied()
            .unwrap_or(self.samples.len());
        start..end
    }
}

fn check_frame(frame: &SubSignalFrame, plan: &WaveformPlan) -> Result<()> {
    if frame.plan != *plan {
        return Err(Error::invalid("frame was simulated with a different plan"));
    }
    let l = frame.row_len();
    if frame.rows.len() != plan.subpulses
        || frame.valid_mask.len() != plan.subpulses
        || frame.row_offsets.len() != plan.subpulses
        || frame.gate_start.len() != plan.subpulses
        || frame.rows.iter().any(|r| r.len() != l)
    {
        return Err(Error::invalid("frame shape does not match its plan"));
    }
    Ok(())
}

/// Value of row `n` at time `u` after its gate; zero before every echo has arrived.
fn row_value_at(frame: &SubSignalFrame, n: usize, u: f64) -> f64 {
    let row = &frame.rows[n];
    let x = (u - frame.row_offsets[n]) * frame.sample_rate;
    let gate = frame.gate_start[n];
    if x < gate as f64 - INTEGER_SNAP {
        return 0.0;
    }
    let nearest = x.round();
    if (x - nearest).abs() < INTEGER_SNAP && (nearest as usize) < row.len() {
        return row[nearest as usize];
    }
    lagrange_at(row, gate..row.len(), x, LAGRANGE_ORDER)
}

/// Splices the rows of `frame` into one synthetic de-chirped signal.
pub fn stitch(frame: &SubSignalFrame, plan: &WaveformPlan) -> Result<SyntheticSignal> {
    check_frame(frame, plan)?;
    let fs = frame.sample_rate;
    let shift = plan.segment_duration();
    if shift * fs < 1.0 {
        return Err(Error::invalid(format!(
            "segment shift Δf/k = {shift:e} s is below one sample"
        )));
    }
    let total = (plan.synthesized_duration() * fs).round() as usize;
    let n = plan.subpulses;

    let mut bounds = Vec::with_capacity(n);
    bounds.push(0);
    for i in 1..n {
        let t = (i - 1) as f64 * shift + plan.chirp_width;
        bounds.push(first_sample_at(t, fs).min(total));
    }

    let mut samples = vec![0.0; total];
    let mut gap_mask = vec![false; total];
    for i in 0..n {
        let end = bounds.get(i + 1).copied().unwrap_or(total);
        for j in bounds[i]..end {
            if !frame.valid_mask[i] {
                gap_mask[j] = true;
                continue;
            }
            let u = j as f64 / fs - i as f64 * shift;
            samples[j] = row_value_at(frame, i, u);
        }
    }

    Ok(SyntheticSignal {
        samples,
        sample_rate: fs,
        plan: *plan,
        segment_boundaries: bounds,
        gap_mask,
        train_index: frame.train_index,
    })
}

/// Largest mismatch between row `n`, shifted onto row `n−1`, and row `n−1`
/// over their common support, relative to the peak of row `n−1`.
pub fn coherence_residual(frame: &SubSignalFrame, plan: &WaveformPlan, n: usize) -> Result<f64> {
    check_frame(frame, plan)?;
    if n == 0 || n >= plan.subpulses {
        return Err(Error::Index {
            index: n,
            len: plan.subpulses,
        });
    }
    for r in [n - 1, n] {
        if !frame.valid_mask[r] {
            return Err(Error::invalid(format!("row {r} is masked")));
        }
    }
    let fs = frame.sample_rate;
    let shift = plan.segment_duration();
    let prev = &frame.rows[n - 1];
    let len = prev.len();
    let peak = prev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(Error::invalid(format!("row {} is all zero", n - 1)));
    }

    let gate_n = frame.gate_start[n] as f64;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (i, &p) in prev.iter().enumerate().skip(frame.gate_start[n - 1]) {
        let u = frame.sample_time(n - 1, i) - shift;
        let x = (u - frame.row_offsets[n]) * fs;
        if x < gate_n - INTEGER_SNAP || x > (len - 1) as f64 + INTEGER_SNAP {
            continue;
        }
        worst = worst.max((row_value_at(frame, n, u) - p).abs());
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid(format!("rows {} and {n} do not overlap", n - 1)));
    }
    Ok(worst / peak)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dechirp::{apply_gap, beat_cycles, dechirp_frame};
    use crate::plan::PlanParams;
    use crate::scene::{scatterer_delay, GapSpec, Scatterer, Scene};
    use std::f64::consts::PI;

    const FS: f64 = 100e6;

    fn one_point() -> Scene {
        Scene::new(vec![Scatterer::new(0.0, 0.01)], 1.5)
    }

    /// A valid plan whose shifts are not whole samples at 100 MSa/s.
    pub(crate) fn fractional_plan() -> WaveformPlan {
        let t_cr = 5.1437e-6;
        WaveformPlan::new(PlanParams {
            step: 1.99e9,
            chirp_period: t_cr,
            loop_time: t_cr,
            train_period: 14.0 * t_cr,
            ..PlanParams::reference()
        })
        .unwrap()
    }

    #[test]
    fn reference_length_and_boundaries() {
        let plan = WaveformPlan::reference();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        let sig = stitch(&frame, &plan).unwrap();
        assert_eq!(sig.len(), 2730);
        assert_eq!(sig.segment_boundaries[0], 0);
        assert_eq!(sig.segment_boundaries[1], 330);
        assert_eq!(sig.segment_boundaries[8], 330 + 7 * 300);
        assert!(sig.segment_boundaries.windows(2).all(|w| w[0] < w[1]));
        assert!((sig.duration() - 27.3e-6).abs() < 1e-12);
    }

    #[test]
    fn single_row_passes_through() {
        let plan = WaveformPlan::reference().with_subpulses(1).unwrap();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        let sig = stitch(&frame, &plan).unwrap();
        assert_eq!(sig.samples, frame.rows[0]);
    }

    #[test]
    fn stitched_signal_is_one_long_tone() {
        let plan = WaveformPlan::reference();
        let scene = one_point();
        let tau = scatterer_delay(&scene, &scene.scatterers[0], 0.0);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        let sig = stitch(&frame, &plan).unwrap();
        let k = plan.chirp_rate();
        let f0 = plan.subpulse_start(0).unwrap();
        for (j, &v) in sig.samples.iter().enumerate() {
            let t = j as f64 / FS;
            let want = if t >= tau {
                (2.0 * PI * beat_cycles(k, tau, f0, t)).cos()
            } else {
                0.0
            };
            assert!((v - want).abs() < 1e-9, "sample {j}: {v} vs {want}");
        }
    }

    #[test]
    fn segments_match_their_own_row_formula() {
        let plan = WaveformPlan::reference();
        let scene = Scene::new(
            vec![Scatterer::new(0.0, 0.01), Scatterer::new(0.02, -0.03)],
            1.5,
        );
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        let sig = stitch(&frame, &plan).unwrap();
        let k = plan.chirp_rate();
        let tau_max = scene
            .scatterers
            .iter()
            .map(|s| scatterer_delay(&scene, s, 0.0))
            .fold(0.0, f64::max);
        for n in 0..plan.subpulses {
            let f_n = plan.subpulse_start(n).unwrap();
            for j in sig.segment(n) {
                let u = j as f64 / FS - n as f64 * plan.segment_duration();
                // Samples before the last echo arrives are blanked.
                let want: f64 = if u < tau_max {
                    0.0
                } else {
                    scene
                        .scatterers
                        .iter()
                        .map(|s| {
                            let tau = scatterer_delay(&scene, s, 0.0);
                            (2.0 * PI * beat_cycles(k, tau, f_n, u)).cos()
                        })
                        .sum()
                };
                assert!((sig.samples[j] - want).abs() < 1e-9, "segment {n}, sample {j}");
            }
        }
    }

    #[test]
    fn masked_rows_become_flagged_gaps() {
        let plan = WaveformPlan::reference();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        let masked = apply_gap(frame, &GapSpec::Indices(vec![3]), &plan).unwrap().frame;
        let sig = stitch(&masked, &plan).unwrap();
        let gap = sig.segment(3);
        assert_eq!(gap, 930..1230);
        for j in 0..sig.len() {
            assert_eq!(sig.gap_mask[j], gap.contains(&j));
            if gap.contains(&j) {
                assert_eq!(sig.samples[j], 0.0);
            }
        }
    }

    #[test]
    fn integer_shift_coherence_is_exact() {
        let plan = WaveformPlan::reference();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        for n in 1..plan.subpulses {
            let r = coherence_residual(&frame, &plan, n).unwrap();
            assert!(r <= 1e-9, "n={n}: {r}");
        }
    }

    #[test]
    fn fractional_shift_coherence() {
        let plan = fractional_plan();
        assert!((plan.segment_duration() * FS).fract() > 0.1);
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        assert!(frame.row_offsets.iter().skip(1).any(|&d| d > 0.0));
        for n in 1..plan.subpulses {
            let r = coherence_residual(&frame, &plan, n).unwrap();
            assert!(r <= 1e-6, "n={n}: {r}");
        }
    }

    #[test]
    fn fractional_stitch_matches_closed_form() {
        let plan = fractional_plan();
        let scene = one_point();
        let tau = scatterer_delay(&scene, &scene.scatterers[0], 0.0);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        let sig = stitch(&frame, &plan).unwrap();
        let k = plan.chirp_rate();
        let f0 = plan.subpulse_start(0).unwrap();
        let mut worst: f64 = 0.0;
        for (j, &v) in sig.samples.iter().enumerate().skip(2) {
            let t = j as f64 / FS;
            worst = worst.max((v - (2.0 * PI * beat_cycles(k, tau, f0, t)).cos()).abs());
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn anti_phase_row_gives_residual_two() {
        let plan = WaveformPlan::reference();
        let mut frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        frame.rows[4].iter_mut().for_each(|v| *v = -*v);
        let r = coherence_residual(&frame, &plan, 4).unwrap();
        assert!((r - 2.0).abs() < 0.05, "{r}");
    }

    #[test]
    fn residual_rejects_masked_rows() {
        let plan = WaveformPlan::reference();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        let masked = apply_gap(frame, &GapSpec::Indices(vec![2]), &plan).unwrap().frame;
        let err = coherence_residual(&masked, &plan, 3).unwrap_err();
        assert!(err.to_string().contains("row 2"));
        assert!(coherence_residual(&masked, &plan, 0).is_err());
    }

    #[test]
    fn plan_mismatch_is_rejected() {
        let plan = WaveformPlan::reference();
        let frame = dechirp_frame(&plan, &one_point(), 0, FS).unwrap();
        let other = plan.with_subpulses(8).unwrap();
        assert!(stitch(&frame, &other).is_err());
    }
}
