//! Range-Doppler ISAR imaging of a turntable scene.
//!
//! Each train yields one stitched range profile. Stacking them over slow
//! time and transforming every range bin gives Doppler, which for rotation
//! rate `ω` maps to cross-range as `x = λ_c·f_D / (2ω)`.

use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::dechirp::{apply_gap, dechirp_frame};
use crate::gapfill::fill_gap;
use crate::plan::WaveformPlan;
use crate::profile::{lobe_width_bins, range_profile, to_db, RangeProfile, MAINLOBE_DROP_DB};
use crate::scene::{GapSpec, Scene};
use crate::synth::{stitch, SyntheticSignal};
use crate::window::Window;
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

/// Optional interference handling applied to every train.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainProcessing {
    pub gap: Option<GapSpec>,
    /// Reconstruct masked segments after stitching.
    pub fill: bool,
    /// AR order for the fill; `None` uses the default rule.
    pub ar_order: Option<usize>,
}

/// Stitched signals of trains `0..n_trains`, noiseless and unmasked unless
/// the scene or `proc` say otherwise.
pub fn collect_trains(
    plan: &WaveformPlan,
    scene: &Scene,
    n_trains: usize,
    sample_rate: f64,
) -> Result<Vec<SyntheticSignal>> {
    collect_trains_with(plan, scene, n_trains, sample_rate, &TrainProcessing::default())
}

pub fn collect_trains_with(
    plan: &WaveformPlan,
    scene: &Scene,
    n_trains: usize,
    sample_rate: f64,
    proc: &TrainProcessing,
) -> Result<Vec<SyntheticSignal>> {
    if n_trains < 2 {
        return Err(Error::invalid(format!("need at least 2 trains, got {n_trains}")));
    }
    (0..n_trains)
        .into_par_iter()
        .map(|m| train_signal(plan, scene, m, sample_rate, proc))
        .collect()
}

pub fn train_signal(
    plan: &WaveformPlan,
    scene: &Scene,
    train: usize,
    sample_rate: f64,
    proc: &TrainProcessing,
) -> Result<SyntheticSignal> {
    let mut frame = dechirp_frame(plan, scene, train, sample_rate)?;
    if let Some(gap) = &proc.gap {
        frame = apply_gap(frame, gap, plan)?.frame;
    }
    let sig = stitch(&frame, plan)?;
    if proc.fill && sig.gap_mask.iter().any(|m| *m) {
        fill_gap(&sig, proc.ar_order)
    } else {
        Ok(sig)
    }
}

/// Range profiles of `signals`, cropped to `[range_lo, range_hi]` m.
pub fn slow_time_profiles(
    signals: &[SyntheticSignal],
    window: Window,
    fft_size: usize,
    range_lo: f64,
    range_hi: f64,
) -> Result<Vec<RangeProfile>> {
    signals
        .par_iter()
        .map(|s| Ok(range_profile(s, window, fft_size)?.crop_range(range_lo, range_hi)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageOptions {
    pub window: Window,
    /// Slow-time zero-padding factor, ≥ 1.
    pub zero_pad: usize,
}

impl Default for ImageOptions {
    fn default() -> Self {
        ImageOptions {
            window: Window::Hann,
            zero_pad: 1,
        }
    }
}

/// Complex image, row-major with range along rows.
#[derive(Debug, Clone, PartialEq)]
pub struct IsarImage {
    pub pixels: Vec<Complex64>,
    pub n_range: usize,
    pub n_cross: usize,
    /// m, increasing.
    pub range_axis: Vec<f64>,
    /// m, increasing, zero at the rotation center.
    pub crossrange_axis: Vec<f64>,
    pub center_wavelength: f64,
    pub aperture_angle: f64,
}

/// `λ / (2·Δθ)`.
pub fn cross_range_resolution(center_wavelength: f64, aperture_angle: f64) -> Result<f64> {
    if !(center_wavelength > 0.0 && aperture_angle > 0.0 && aperture_angle < std::f64::consts::PI)
    {
        return Err(Error::invalid(format!(
            "need λ > 0 and 0 < Δθ < π, got λ = {center_wavelength}, Δθ = {aperture_angle}"
        )));
    }
    Ok(center_wavelength / (2.0 * aperture_angle))
}

/// Wavelength at the middle of the synthesized band.
pub fn center_wavelength(plan: &WaveformPlan) -> f64 {
    SPEED_OF_LIGHT / plan.synthesized_center()
}

/// Rotation swept while `n_trains` trains are transmitted.
pub fn aperture_angle(plan: &WaveformPlan, omega: f64, n_trains: usize) -> f64 {
    omega.abs() * n_trains as f64 * plan.train_period
}

pub fn form_image(
    profiles: &[RangeProfile],
    center_wavelength: f64,
    aperture_angle: f64,
    opts: &ImageOptions,
) -> Result<IsarImage> {
    let m = profiles.len();
    if m < 2 {
        return Err(Error::invalid(format!("need at least 2 profiles, got {m}")));
    }
    let first = &profiles[0];
    if let Some((i, p)) = profiles.iter().enumerate().find(|(_, p)| {
        p.len() != first.len() || p.first_bin != first.first_bin || p.bin_hz != first.bin_hz
    }) {
        return Err(Error::invalid(format!(
            "profile {i} has {} bins from {}, profile 0 has {} from {}",
            p.len(),
            p.first_bin,
            first.len(),
            first.first_bin
        )));
    }
    if first.is_empty() {
        return Err(Error::invalid("profiles are empty"));
    }
    if opts.zero_pad == 0 {
        return Err(Error::invalid("zero-padding factor must be ≥ 1"));
    }
    let cross_bin = cross_range_resolution(center_wavelength, aperture_angle)? / opts.zero_pad as f64;

    let n_range = first.len();
    let n_cross = m * opts.zero_pad;
    let taper = opts.window.coefficients(m);
    let fft = FftPlanner::new().plan_fft_inverse(n_cross);
    let scale = 1.0 / (n_cross as f64).sqrt();
    let half = n_cross / 2;

    let rows: Vec<Vec<Complex64>> = (0..n_range)
        .into_par_iter()
        .map(|r| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n_cross];
            for (j, p) in profiles.iter().enumerate() {
                buf[j] = p.spectrum[r] * taper[j];
            }
            fft.process(&mut buf);
            // fftshift: zero Doppler lands on column n_cross/2.
            let mut row = vec![Complex64::new(0.0, 0.0); n_cross];
            for (l, v) in buf.into_iter().enumerate() {
                row[(l + half) % n_cross] = v * scale;
            }
            row
        })
        .collect();

    Ok(IsarImage {
        pixels: rows.into_iter().flatten().collect(),
        n_range,
        n_cross,
        range_axis: first.range_axis(),
        crossrange_axis: (0..n_cross)
            .map(|c| (c as f64 - half as f64) * cross_bin)
            .collect(),
        center_wavelength,
        aperture_angle,
    })
}

impl IsarImage {
    pub fn at(&self, range_bin: usize, cross_bin: usize) -> Complex64 {
        self.pixels[range_bin * self.n_cross + cross_bin]
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.pixels.iter().map(|c| c.norm()).collect()
    }

    pub fn range_spacing(&self) -> f64 {
        axis_step(&self.range_axis)
    }

    pub fn crossrange_spacing(&self) -> f64 {
        axis_step(&self.crossrange_axis)
    }

    /// `(range_bin, cross_bin)` of the brightest pixel.
    pub fn peak(&self) -> (usize, usize) {
        let (i, _) = self
            .pixels
            .iter()
            .enumerate()
            .fold((0, -1.0), |b, (i, c)| {
                let v = c.norm_sqr();
                if v > b.1 {
                    (i, v)
                } else {
                    b
                }
            });
        (i / self.n_cross, i % self.n_cross)
    }

    /// Physical `(range, cross-range)` of a pixel, m.
    pub fn position(&self, range_bin: usize, cross_bin: usize) -> (f64, f64) {
        (self.range_axis[range_bin], self.crossrange_axis[cross_bin])
    }

    /// 3.92-dB mainlobe width along range through `(r, c)`, m.
    pub fn range_width(&self, r: usize, c: usize) -> Result<f64> {
        let cut: Vec<f64> = (0..self.n_range).map(|i| self.at(i, c).norm()).collect();
        Ok(lobe_width_bins(&to_db(&cut), r, MAINLOBE_DROP_DB)? * self.range_spacing())
    }

    /// 3.92-dB mainlobe width along cross-range through `(r, c)`, m.
    pub fn crossrange_width(&self, r: usize, c: usize) -> Result<f64> {
        let cut: Vec<f64> = (0..self.n_cross).map(|j| self.at(r, j).norm()).collect();
        Ok(lobe_width_bins(&to_db(&cut), c, MAINLOBE_DROP_DB)? * self.crossrange_spacing())
    }

    /// Sub-image with range in `[range_lo, range_hi]` and cross-range in
    /// `[cross_lo, cross_hi]`, m.
    pub fn crop(&self, range_lo: f64, range_hi: f64, cross_lo: f64, cross_hi: f64) -> IsarImage {
        let pick = |axis: &[f64], lo: f64, hi: f64| -> std::ops::Range<usize> {
            let idx: Vec<usize> = (0..axis.len())
                .filter(|&i| axis[i] >= lo && axis[i] <= hi)
                .collect();
            match (idx.first(), idx.last()) {
                (Some(&a), Some(&b)) => a..b + 1,
                _ => 0..0,
            }
        };
        let rr = pick(&self.range_axis, range_lo, range_hi);
        let cc = pick(&self.crossrange_axis, cross_lo, cross_hi);
        let mut pixels = Vec::with_capacity(rr.len() * cc.len());
        for r in rr.clone() {
            pixels.extend_from_slice(&self.pixels[r * self.n_cross + cc.start..r * self.n_cross + cc.end]);
        }
        IsarImage {
            pixels,
            n_range: rr.len(),
            n_cross: cc.len(),
            range_axis: self.range_axis[rr].to_vec(),
            crossrange_axis: self.crossrange_axis[cc].to_vec(),
            ..*self
        }
    }

    pub fn energy(&self) -> f64 {
        self.pixels.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Zero-mean normalized cross-correlation of the magnitude images.
    pub fn correlation(&self, other: &IsarImage) -> Result<f64> {
        if self.n_range != other.n_range || self.n_cross != other.n_cross {
            return Err(Error::invalid(format!(
                "image sizes differ: {}×{} vs {}×{}",
                self.n_range, self.n_cross, other.n_range, other.n_cross
            )));
        }
        pearson(&self.magnitude(), &other.magnitude())
    }

    /// Zero-mean normalized cross-correlation of the dB images, each
    /// clipped `floor_db` below its own peak.
    pub fn correlation_db(&self, other: &IsarImage, floor_db: f64) -> Result<f64> {
        if self.n_range != other.n_range || self.n_cross != other.n_cross {
            return Err(Error::invalid(format!(
                "image sizes differ: {}×{} vs {}×{}",
                self.n_range, self.n_cross, other.n_range, other.n_cross
            )));
        }
        let clip = |img: &IsarImage| -> Vec<f64> {
            to_db(&img.magnitude()).into_iter().map(|v| v.max(-floor_db)).collect()
        };
        pearson(&clip(self), &clip(other))
    }
}

fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += (x - ma) * (y - mb);
        aa += (x - ma) * (x - ma);
        bb += (y - mb) * (y - mb);
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::Metrology("correlation of a constant image".into()));
    }
    Ok(ab / (aa * bb).sqrt())
}

fn axis_step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        0.0
    } else {
        axis[1] - axis[0]
    }
}
