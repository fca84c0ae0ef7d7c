//! Analytic de-chirp (stretch) reception.
//!
//! Mixing the echo of subpulse `n` with its own reference chirp leaves,
//! for a scatterer at delay `τ`,
//!
//! ```text
//! s_n(u) = cos 2π[ k·τ·u − k·τ²/2 + f_n·τ ],   u ∈ [τ, T_cw]
//! ```
//!
//! where `u` is time since the subpulse gate and `f_n` the subpulse start
//! frequency. Consecutive rows differ in phase by exactly `2π·Δf·τ`, which
//! is what makes bandwidth synthesis possible.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::plan::WaveformPlan;
use crate::scene::{scatterer_delay, GapSpec, Scene};
use crate::txgen::first_sample_at;
use crate::{Error, Result};

/// The N de-chirped rows of one train, sampled at the receiver rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSignalFrame {
    /// `N × L`, `L = round(T_cw · sample_rate)`.
    pub rows: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub train_index: usize,
    pub valid_mask: Vec<bool>,
    /// Time of each row's first sample after its subpulse gate, in `[0, 1/fs)`.
    pub row_offsets: Vec<f64>,
    /// First sample of each row at which every echo has arrived.
    pub gate_start: Vec<usize>,
    pub plan: WaveformPlan,
}

impl SubSignalFrame {
    pub fn row_len(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// Time of sample `i` of row `n`, measured from the subpulse gate.
    pub fn sample_time(&self, n: usize, i: usize) -> f64 {
        self.row_offsets[n] + i as f64 / self.sample_rate
    }
}

/// Phase of a unit echo at local time `u`, in cycles.
pub(crate) fn beat_cycles(k: f64, tau: f64, start_freq: f64, u: f64) -> f64 {
    k * tau * u - 0.5 * k * tau * tau + start_freq * tau
}

fn cos_cycles(c: f64) -> f64 {
    (2.0 * PI * (c - c.floor())).cos()
}

/// Noise stream for one row of one train.
fn row_rng(seed: u64, train: usize, row: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((train as u64) << 16) | row as u64);
    rng
}

/// Simulates the de-chirped rows of train `train_index` for `scene`.
///
/// Delays are frozen at each subpulse gate (stop-and-hop).
pub fn dechirp_frame(
    plan: &WaveformPlan,
    scene: &Scene,
    train_index: usize,
    sample_rate: f64,
) -> Result<SubSignalFrame> {
    scene.check()?;
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample rate must be positive"));
    }
    let len = (plan.chirp_width * sample_rate).round() as usize;
    if len < 2 {
        return Err(Error::invalid(format!(
            "chirp width {} s gives fewer than two samples at {sample_rate} Hz",
            plan.chirp_width
        )));
    }
    let k = plan.chirp_rate();
    let train_start = train_index as f64 * plan.train_period;
    let sigma = scene.noise_sigma();
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::invalid(format!("noise: {e}")))?;

    let n_rows = plan.subpulses;
    let mut rows = Vec::with_capacity(n_rows);
    let mut row_offsets = Vec::with_capacity(n_rows);
    let mut gate_start = Vec::with_capacity(n_rows);

    for n in 0..n_rows {
        let gate = n as f64 * plan.chirp_period;
        let offset = first_sample_at(gate, sample_rate) as f64 / sample_rate - gate;
        let start_freq = plan.subpulse_start(n)?;
        let t_gate = train_start + gate;

        let mut row = vec![0.0; len];
        let mut tau_max: f64 = 0.0;
        for (si, s) in scene.scatterers.iter().enumerate() {
            let tau = scatterer_delay(scene, s, t_gate);
            if k * tau >= 0.5 * sample_rate {
                return Err(Error::invalid(format!(
                    "scatterer {si} at ({}, {}) beats at {:.4e} Hz, above Nyquist {:.4e} Hz",
                    s.x,
                    s.y,
                    k * tau,
                    0.5 * sample_rate
                )));
            }
            if tau >= plan.chirp_width {
                return Err(Error::invalid(format!(
                    "scatterer {si} delay {tau:.4e} s exceeds the chirp width"
                )));
            }
            tau_max = tau_max.max(tau);
            for (i, v) in row.iter_mut().enumerate() {
                let u = offset + i as f64 / sample_rate;
                if u >= tau && u <= plan.chirp_width {
                    *v += s.reflectivity * cos_cycles(beat_cycles(k, tau, start_freq, u));
                }
            }
        }
        if sigma > 0.0 {
            let mut rng = row_rng(scene.rng_seed, train_index, n);
            for v in row.iter_mut() {
                *v += noise.sample(&mut rng);
            }
        }
        let first = ((tau_max - offset) * sample_rate - 1e-9).ceil().max(0.0) as usize;
        rows.push(row);
        row_offsets.push(offset);
        gate_start.push(first.min(len));
    }

    Ok(SubSignalFrame {
        rows,
        sample_rate,
        train_index,
        valid_mask: vec![true; n_rows],
        row_offsets,
        gate_start,
        plan: *plan,
    })
}

/// Result of [`apply_gap`].
#[derive(Debug, Clone)]
pub struct GapApplied {
    pub frame: SubSignalFrame,
    /// Rows that were zeroed.
    pub masked: Vec<usize>,
    /// Set when the gap resolved to no rows and the frame is unchanged.
    pub warning: Option<String>,
}

/// Zeroes the rows an interference gap corrupts.
pub fn apply_gap(frame: SubSignalFrame, gap: &GapSpec, plan: &WaveformPlan) -> Result<GapApplied> {
    if frame.plan != *plan {
        return Err(Error::invalid("frame was simulated with a different plan"));
    }
    let masked = gap.resolve(plan)?;
    if masked.is_empty() {
        return Ok(GapApplied {
            frame,
            masked,
            warning: Some("gap resolves to no subpulses; frame unchanged".into()),
        });
    }
    let mut frame = frame;
    for &n in &masked {
        frame.rows[n].iter_mut().for_each(|v| *v = 0.0);
        frame.valid_mask[n] = false;
    }
    Ok(GapApplied {
        frame,
        masked,
        warning: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::fit_tone;
    use crate::scene::Scatterer;
    use crate::SPEED_OF_LIGHT;

    const FS: f64 = 100e6;

    fn scene_at_delay(tau: f64) -> Scene {
        Scene::new(vec![Scatterer::new(0.0, 0.0)], 0.5 * SPEED_OF_LIGHT * tau)
    }

    fn peak_freq(row: &[f64], fs: f64) -> (f64, f64) {
        use crate::Complex64;
        use rustfft::FftPlanner;
        let nfft = 8192;
        let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        buf.resize(nfft, Complex64::new(0.0, 0.0));
        FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
        let (i, _) = buf[..nfft / 2]
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, c)| if c.norm() > b.1 { (i, c.norm()) } else { b });
        (i as f64 * fs / nfft as f64, fs / nfft as f64)
    }

    #[test]
    fn beat_at_7_5_mhz() {
        let plan = WaveformPlan::reference();
        let tau = 7.5e6 / plan.chirp_rate();
        assert!((tau - 11.25e-9).abs() < 1e-15);
        let frame = dechirp_frame(&plan, &scene_at_delay(tau), 0, FS).unwrap();
        assert_eq!(frame.rows.len(), 9);
        assert_eq!(frame.row_len(), 330);
        for row in &frame.rows {
            let (f, bin) = peak_freq(row, FS);
            assert!((f - 7.5e6).abs() <= bin, "{f}");
        }
    }

    #[test]
    fn zero_delay_rows_are_dc() {
        let plan = WaveformPlan::reference();
        let scene = Scene::new(vec![Scatterer::new(0.0, -1.0)], 1.0);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        for row in &frame.rows {
            assert!(row.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn two_tone_closed_form() {
        let plan = WaveformPlan::reference();
        let k = plan.chirp_rate();
        let tau1 = 10e-9;
        let tau2 = tau1 + 38e3 / k;
        let r0 = 0.5 * SPEED_OF_LIGHT * tau1;
        let dy = 0.5 * SPEED_OF_LIGHT * (tau2 - tau1);
        let scene = Scene::new(vec![Scatterer::new(0.0, 0.0), Scatterer::new(0.0, dy)], r0);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        for n in 0..plan.subpulses {
            let f_n = plan.subpulse_start(n).unwrap();
            for (i, &v) in frame.rows[n].iter().enumerate() {
                let u = frame.sample_time(n, i);
                let mut want = 0.0;
                for tau in [tau1, tau2] {
                    if u >= tau {
                        want += (2.0 * PI * (k * tau * u - 0.5 * k * tau * tau + f_n * tau)).cos();
                    }
                }
                assert!((v - want).abs() < 1e-9, "row {n} sample {i}");
            }
        }
    }

    #[test]
    fn phase_steps_by_delta_f_tau() {
        let plan = WaveformPlan::reference();
        let scene = Scene::new(vec![Scatterer::new(0.0, 0.013)], 1.5);
        let tau = scatterer_delay(&scene, &scene.scatterers[0], 0.0);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();
        let f_beat = plan.chirp_rate() * tau;
        let phases: Vec<f64> = (0..plan.subpulses)
            .map(|n| {
                let g = frame.gate_start[n];
                let t: Vec<f64> = (g..frame.row_len()).map(|i| frame.sample_time(n, i)).collect();
                fit_tone(&frame.rows[n][g..], &t, f_beat).1
            })
            .collect();
        let want = 2.0 * PI * plan.step * tau;
        for n in 1..phases.len() {
            let d = phases[n] - phases[n - 1] - want;
            let wrapped = d - 2.0 * PI * (d / (2.0 * PI)).round();
            assert!(wrapped.abs() < 1e-6, "row {n}: {wrapped}");
        }
    }

    #[test]
    fn superposition_of_scatterers() {
        let plan = WaveformPlan::reference();
        let a = Scatterer::new(0.01, -0.02);
        let b = Scatterer {
            reflectivity: 0.4,
            ..Scatterer::new(-0.03, 0.05)
        };
        let both = Scene::new(vec![a, b], 1.5).with_omega(2.0 * PI);
        let fa = dechirp_frame(&plan, &Scene::new(vec![a], 1.5).with_omega(2.0 * PI), 3, FS).unwrap();
        let fb = dechirp_frame(&plan, &Scene::new(vec![b], 1.5).with_omega(2.0 * PI), 3, FS).unwrap();
        let fab = dechirp_frame(&plan, &both, 3, FS).unwrap();
        for n in 0..plan.subpulses {
            for i in 0..fab.row_len() {
                let sum = fa.rows[n][i] + fb.rows[n][i];
                assert!((fab.rows[n][i] - sum).abs() <= 1e-12 * sum.abs().max(1.0));
            }
        }
    }

    #[test]
    fn aliasing_is_rejected() {
        let plan = WaveformPlan::reference();
        // k·τ > 50 MHz needs τ > 75 ns, i.e. R > 11.2 m.
        let scene = Scene::new(vec![Scatterer::new(0.0, 0.0)], 12.0);
        let err = dechirp_frame(&plan, &scene, 0, FS).unwrap_err();
        assert!(err.to_string().contains("scatterer 0"), "{err}");
    }

    #[test]
    fn noise_is_seeded_and_split() {
        let plan = WaveformPlan::reference();
        let scene = Scene::new(vec![Scatterer::new(0.0, 0.0)], 1.5).with_noise(10.0, 42);
        let a = dechirp_frame(&plan, &scene, 5, FS).unwrap();
        let b = dechirp_frame(&plan, &scene, 5, FS).unwrap();
        assert_eq!(a.rows, b.rows);
        let c = dechirp_frame(&plan, &scene, 6, FS).unwrap();
        assert_ne!(a.rows[0], c.rows[0]);
        assert_ne!(a.rows[0], a.rows[1]);

        let clean = Scene::new(vec![Scatterer::new(0.0, 0.0)], 1.5);
        let off = clean.clone().with_noise(f64::INFINITY, 9);
        let x = dechirp_frame(&plan, &clean, 0, FS).unwrap();
        let y = dechirp_frame(&plan, &off, 0, FS).unwrap();
        assert_eq!(x.rows, y.rows);
    }

    #[test]
    fn gap_zeroes_masked_rows() {
        let plan = WaveformPlan::reference();
        let scene = Scene::new(vec![Scatterer::new(0.0, 0.0)], 1.5);
        let frame = dechirp_frame(&plan, &scene, 0, FS).unwrap();

        let out = apply_gap(frame.clone(), &GapSpec::Band { lo: 22.9e9, hi: 25.1e9 }, &plan).unwrap();
        assert_eq!(out.masked, vec![3]);
        assert!(out.frame.rows[3].iter().all(|&v| v == 0.0));
        assert!(!out.frame.valid_mask[3]);
        assert_eq!(out.frame.valid_mask.iter().filter(|v| **v).count(), 8);

        let same = apply_gap(frame.clone(), &GapSpec::Indices(vec![]), &plan).unwrap();
        assert_eq!(same.frame, frame);
        assert!(same.warning.is_some());

        let all = apply_gap(frame, &GapSpec::Band { lo: 16.9e9, hi: 35.1e9 }, &plan).unwrap();
        assert!(all.frame.valid_mask.iter().all(|v| !v));
        assert!(all.frame.rows.iter().flatten().all(|&v| v == 0.0));
    }
}
