//! Full-rate transmit waveform and short-time spectra.
//!
//! Subpulse `n` of train `m` occupies `u = t − n·T_cr − m·T_pr ∈ [0, T_cw)`
//! and carries `cos(2π(f_n·u + k·u²/2))`, where `f_n` is the subpulse
//! start frequency. Each subpulse restarts its phase at its own gate.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::plan::WaveformPlan;
use crate::window::Window;
use crate::{Complex64, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledWaveform {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    /// Time of the first sample, s.
    pub t0: f64,
}

impl SampledWaveform {
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Index of the first sample at or after time `t` on a grid of rate `fs`.
pub(crate) fn first_sample_at(t: f64, fs: f64) -> usize {
    let x = t * fs;
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// Renders `n_trains` trains of the frequency-stepped chirp at `sample_rate`.
pub fn generate_transmit(
    plan: &WaveformPlan,
    sample_rate: f64,
    n_trains: usize,
) -> Result<SampledWaveform> {
    let top = plan.synthesized_band().1;
    if !(sample_rate > 2.0 * top) {
        return Err(Error::invalid(format!(
            "sample rate {sample_rate} Hz violates Nyquist for {top} Hz content"
        )));
    }
    if n_trains == 0 {
        return Err(Error::invalid("need at least one train"));
    }
    let len = (n_trains as f64 * plan.train_period * sample_rate).round() as usize;
    let mut samples = vec![0.0; len];
    let k = plan.chirp_rate();

    for m in 0..n_trains {
        for n in 0..plan.subpulses {
            let f0 = plan.subpulse_start(n)?;
            let gate = m as f64 * plan.train_period + n as f64 * plan.chirp_period;
            let start = first_sample_at(gate, sample_rate);
            let stop = first_sample_at(gate + plan.chirp_width, sample_rate).min(len);
            for (j, s) in samples.iter_mut().enumerate().take(stop).skip(start) {
                let u = j as f64 / sample_rate - gate;
                let cycles = f0 * u + 0.5 * k * u * u;
                *s = (2.0 * PI * cycles.fract()).cos();
            }
        }
    }
    Ok(SampledWaveform {
        samples,
        sample_rate,
        t0: 0.0,
    })
}

/// Magnitude STFT with a Hann window.
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// `frames × bins`, one-sided.
    pub magnitude: Vec<Vec<f64>>,
    /// Frame center times, s.
    pub times: Vec<f64>,
    /// Bin frequencies, Hz.
    pub freqs: Vec<f64>,
}

impl Spectrogram {
    /// Frequency of the strongest bin in every frame.
    pub fn ridge(&self) -> Vec<f64> {
        self.magnitude
            .iter()
            .map(|frame| {
                let (i, _) = frame
                    .iter()
                    .enumerate()
                    .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
                self.freqs[i]
            })
            .collect()
    }

    pub fn bin_width(&self) -> f64 {
        self.freqs.get(1).copied().unwrap_or(0.0)
    }
}

pub fn spectrogram(w: &SampledWaveform, window_len: usize, hop: usize) -> Result<Spectrogram> {
    if window_len < 2 || window_len > w.samples.len() || hop == 0 {
        return Err(Error::invalid(format!(
            "bad STFT geometry: window {window_len}, hop {hop}, signal {}",
            w.samples.len()
        )));
    }
    let taper = Window::Hann.coefficients(window_len);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(window_len);
    let bins = window_len / 2 + 1;
    let mut buf = vec![Complex64::new(0.0, 0.0); window_len];
    let mut magnitude = Vec::new();
    let mut times = Vec::new();

    let mut start = 0;
    while start + window_len <= w.samples.len() {
        for ((b, &x), &t) in buf.iter_mut().zip(&w.samples[start..]).zip(&taper) {
            *b = Complex64::new(x * t, 0.0);
        }
        fft.process(&mut buf);
        magnitude.push(buf[..bins].iter().map(|c| c.norm()).collect());
        times.push(w.t0 + (start as f64 + 0.5 * window_len as f64) / w.sample_rate);
        start += hop;
    }
    let freqs = (0..bins)
        .map(|i| i as f64 * w.sample_rate / window_len as f64)
        .collect();
    Ok(Spectrogram {
        magnitude,
        times,
        freqs,
    })
}
