//! Range profiles and resolution metrology.
//!
//! A de-chirped scatterer at delay `τ` is a tone at `k·τ`, so the spectrum
//! of a synthetic signal is a range profile with `R = c·f / 2k`. For an
//! untapered tone of duration `T` the two-sided mainlobe width 3.92 dB
//! below the peak is exactly `1/T`, because `|sinc(±½)| = 2/π`. Measured
//! that way, the width maps straight onto `c / 2B`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rustfft::FftPlanner;

use crate::synth::SyntheticSignal;
use crate::window::Window;
use crate::{Complex64, Error, Result, SPEED_OF_LIGHT};

/// Drop below the peak at which mainlobe widths are read.
pub const MAINLOBE_DROP_DB: f64 = 3.92;

/// Zero-padding factor of [`default_fft_size`].
pub const DEFAULT_OVERSAMPLE: usize = 8;

/// Floor used for empty bins when expressing magnitudes in dB.
pub const DB_FLOOR: f64 = -400.0;

/// Next power of two at or above `oversample × len`.
pub fn fft_size_for(len: usize, oversample: usize) -> usize {
    (len.max(1) * oversample.max(1)).next_power_of_two()
}

pub fn default_fft_size(len: usize) -> usize {
    fft_size_for(len, DEFAULT_OVERSAMPLE)
}

/// One-sided spectrum of a synthetic signal with frequency and range axes.
///
/// `spectrum[i]` is DFT bin `first_bin + i`; a freshly computed profile
/// starts at bin 0 and holds `fft_size/2 + 1` bins.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfile {
    pub spectrum: Vec<Complex64>,
    pub first_bin: usize,
    /// Bin spacing, `sample_rate / fft_size`.
    pub bin_hz: f64,
    pub chirp_rate: f64,
    pub window: Window,
    pub fft_size: usize,
    /// Number of time samples transformed.
    pub signal_len: usize,
}

impl RangeProfile {
    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    pub fn freq(&self, i: usize) -> f64 {
        (self.first_bin + i) as f64 * self.bin_hz
    }

    pub fn range(&self, i: usize) -> f64 {
        beat_to_range(self.freq(i), self.chirp_rate)
    }

    pub fn freq_axis(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.freq(i)).collect()
    }

    pub fn range_axis(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.range(i)).collect()
    }

    /// Range spacing between bins, m.
    pub fn range_bin(&self) -> f64 {
        beat_to_range(self.bin_hz, self.chirp_rate)
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.spectrum.iter().map(|c| c.norm()).collect()
    }

    /// `20·log10(|X| / max|X|)`, floored at [`DB_FLOOR`].
    pub fn magnitude_db(&self) -> Vec<f64> {
        to_db(&self.magnitude())
    }

    pub fn peak_bin(&self) -> Option<usize> {
        let mag = self.magnitude();
        let (i, m) = mag
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        (m > 0.0).then_some(i)
    }

    /// Time-domain energy recovered from the one-sided spectrum (Parseval).
    ///
    /// Only meaningful on an uncropped profile.
    pub fn energy(&self) -> f64 {
        let half = self.fft_size / 2;
        let total: f64 = self
            .spectrum
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let bin = self.first_bin + i;
                let fold = if bin == 0 || bin == half { 1.0 } else { 2.0 };
                fold * c.norm_sqr()
            })
            .sum();
        total / self.fft_size as f64
    }

    /// Keeps only bins whose range lies in `[lo, hi]`.
    pub fn crop_range(&self, lo: f64, hi: f64) -> RangeProfile {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let r = self.range(i);
                r >= lo && r <= hi
            })
            .collect();
        let (start, end) = match (keep.first(), keep.last()) {
            (Some(&a), Some(&b)) => (a, b + 1),
            _ => (0, 0),
        };
        RangeProfile {
            spectrum: self.spectrum[start..end].to_vec(),
            first_bin: self.first_bin + start,
            ..self.clone()
        }
    }
}

pub fn beat_to_range(f: f64, chirp_rate: f64) -> f64 {
    SPEED_OF_LIGHT * f / (2.0 * chirp_rate)
}

pub(crate) fn to_db(mag: &[f64]) -> Vec<f64> {
    let max = mag.iter().fold(0.0f64, |m, &v| m.max(v));
    mag.iter()
        .map(|&v| {
            if max > 0.0 && v > 0.0 {
                (20.0 * (v / max).log10()).max(DB_FLOOR)
            } else {
                DB_FLOOR
            }
        })
        .collect()
}

/// Windowed, zero-padded one-sided spectrum of real samples.
pub fn spectrum_of(
    samples: &[f64],
    sample_rate: f64,
    chirp_rate: f64,
    window: Window,
    fft_size: usize,
) -> Result<RangeProfile> {
    if fft_size < samples.len() || !fft_size.is_power_of_two() {
        return Err(Error::invalid(format!(
            "fft size {fft_size} must be a power of two ≥ signal length {}",
            samples.len()
        )));
    }
    let taper = window.coefficients(samples.len());
    let mut buf: Vec<Complex64> = samples
        .iter()
        .zip(&taper)
        .map(|(&x, &w)| Complex64::new(x * w, 0.0))
        .collect();
    buf.resize(fft_size, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(fft_size).process(&mut buf);
    buf.truncate(fft_size / 2 + 1);
    Ok(RangeProfile {
        spectrum: buf,
        first_bin: 0,
        bin_hz: sample_rate / fft_size as f64,
        chirp_rate,
        window,
        fft_size,
        signal_len: samples.len(),
    })
}

/// Range profile of a synthetic signal.
pub fn range_profile(sig: &SyntheticSignal, window: Window, fft_size: usize) -> Result<RangeProfile> {
    spectrum_of(
        &sig.samples,
        sig.sample_rate,
        sig.plan.chirp_rate(),
        window,
        fft_size,
    )
}

/// Sub-bin offset and level of a peak from a parabola through three dB values.
pub fn parabolic_peak(left: f64, center: f64, right: f64) -> (f64, f64) {
    let denom = left - 2.0 * center + right;
    if denom.abs() < 1e-300 || !denom.is_finite() {
        return (0.0, center);
    }
    let p = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
    (p, center - 0.25 * (left - right) * p)
}

fn peak_level(db: &[f64], peak: usize) -> (f64, f64) {
    if peak == 0 || peak + 1 >= db.len() {
        return (0.0, db[peak]);
    }
    parabolic_peak(db[peak - 1], db[peak], db[peak + 1])
}

/// Fractional bin where the lobe around `peak` falls `drop_db` below its
/// top, walking in direction `step` (±1). `None` if the lobe turns upward
/// or the data ends first.
fn crossing(db: &[f64], peak: usize, threshold: f64, step: isize) -> Option<f64> {
    let mut prev = peak;
    loop {
        let next = prev as isize + step;
        if next < 0 || next as usize >= db.len() {
            return None;
        }
        let next = next as usize;
        if db[next] <= threshold {
            let frac = (db[prev] - threshold) / (db[prev] - db[next]);
            return Some(prev as f64 + step as f64 * frac);
        }
        if db[next] > db[prev] {
            return None;
        }
        prev = next;
    }
}

/// Two-sided width, in bins, of the lobe around `peak` at `drop_db` below its top.
pub fn lobe_width_bins(db: &[f64], peak: usize, drop_db: f64) -> Result<f64> {
    if peak >= db.len() {
        return Err(Error::Index {
            index: peak,
            len: db.len(),
        });
    }
    let (_, level) = peak_level(db, peak);
    let threshold = level - drop_db;
    let left = crossing(db, peak, threshold, -1);
    let right = crossing(db, peak, threshold, 1);
    match (left, right) {
        (Some(l), Some(r)) => Ok(r - l),
        _ => Err(Error::Metrology(format!(
            "no −{drop_db} dB crossing on both sides of bin {peak}"
        ))),
    }
}

/// Two-sided 3.92-dB mainlobe width around `peak_bin`, in Hz.
pub fn mainlobe_width_392(profile: &RangeProfile, peak_bin: usize) -> Result<f64> {
    let db = profile.magnitude_db();
    if peak_bin >= db.len() {
        return Err(Error::Index {
            index: peak_bin,
            len: db.len(),
        });
    }
    let is_local_max = (peak_bin == 0 || db[peak_bin] >= db[peak_bin - 1])
        && (peak_bin + 1 == db.len() || db[peak_bin] >= db[peak_bin + 1]);
    if !is_local_max {
        return Err(Error::Metrology(format!("bin {peak_bin} is not a local maximum")));
    }
    Ok(lobe_width_bins(&db, peak_bin, MAINLOBE_DROP_DB)? * profile.bin_hz)
}

/// Range resolution implied by a mainlobe width, `c·w / 2k`.
pub fn measured_resolution(width_hz: f64, chirp_rate: f64) -> Result<f64> {
    if !(width_hz > 0.0 && chirp_rate > 0.0) {
        return Err(Error::invalid(format!(
            "width {width_hz} Hz and chirp rate {chirp_rate} Hz/s must be positive"
        )));
    }
    Ok(beat_to_range(width_hz, chirp_rate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub bin: usize,
    /// Least-squares tone frequency, Hz.
    pub frequency: f64,
    pub range: f64,
    /// Level relative to the strongest peak, ≤ 0.
    pub magnitude_db: f64,
    pub mainlobe_width_hz: f64,
}

/// Local maxima within `threshold_db` of the strongest bin, pruned greedily
/// so that no two are closer than `min_separation_hz`, strongest first.
///
/// Each peak's frequency is then refined by fitting windowed tones to its
/// lobe, jointly with any neighbour whose mainlobe overlaps.
pub fn extract_peaks(profile: &RangeProfile, min_separation_hz: f64, threshold_db: f64) -> Vec<Peak> {
    let db = profile.magnitude_db();
    if profile.peak_bin().is_none() || db.len() < 3 {
        return Vec::new();
    }
    let (_, top) = db
        .iter()
        .enumerate()
        .skip(1)
        .take(db.len() - 2)
        .filter(|&(i, &v)| v > db[i - 1] && v >= db[i + 1])
        .map(|(i, _)| peak_level(&db, i))
        .fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let reference = top.max(0.0);

    let mut candidates: Vec<(usize, f64, f64)> = (1..db.len() - 1)
        .filter(|&i| db[i] > db[i - 1] && db[i] >= db[i + 1])
        .map(|i| {
            let (off, level) = peak_level(&db, i);
            (i, off, level - reference)
        })
        .filter(|&(_, _, rel)| rel >= threshold_db)
        .collect();
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut kept: Vec<Peak> = Vec::new();
    for (bin, off, rel) in candidates {
        let frequency = (profile.first_bin as f64 + bin as f64 + off) * profile.bin_hz;
        if kept
            .iter()
            .any(|p| (p.frequency - frequency).abs() < min_separation_hz)
        {
            continue;
        }
        kept.push(Peak {
            bin,
            frequency,
            range: beat_to_range(frequency, profile.chirp_rate),
            magnitude_db: rel.min(0.0),
            mainlobe_width_hz: peak_width_hz(&db, bin, profile.bin_hz),
        });
    }
    refine_frequencies(profile, &mut kept);
    kept
}

/// DTFT of the analysis window at `nu` Hz, `Σ w[t]·e^(−j2πνt/fs)`.
fn window_kernel(taper: &[f64], nu: f64, sample_rate: f64) -> Complex64 {
    let z = Complex64::from_polar(1.0, -2.0 * PI * nu / sample_rate);
    taper.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &w| acc * z + w)
}

/// Residual of the best real-amplitude fit of windowed cosines at `freqs`
/// to `spectrum` sampled at `bins` (Hz).
fn tone_fit_residual(
    spectrum: &[Complex64],
    bins: &[f64],
    freqs: &[f64],
    taper: &[f64],
    sample_rate: f64,
) -> Option<DVector<f64>> {
    let m = bins.len();
    let k = freqs.len();
    let mut g = DMatrix::<f64>::zeros(2 * m, 2 * k);
    let mut y = DVector::<f64>::zeros(2 * m);
    for (r, &nu) in bins.iter().enumerate() {
        for (i, &f) in freqs.iter().enumerate() {
            let minus = window_kernel(taper, nu - f, sample_rate);
            let plus = window_kernel(taper, nu + f, sample_rate);
            // Spectra of cos(2πft) and sin(2πft) under the window.
            let c = (minus + plus) * 0.5;
            let s = (minus - plus) * Complex64::new(0.0, -0.5);
            g[(r, 2 * i)] = c.re;
            g[(m + r, 2 * i)] = c.im;
            g[(r, 2 * i + 1)] = s.re;
            g[(m + r, 2 * i + 1)] = s.im;
        }
        y[r] = spectrum[r].re;
        y[m + r] = spectrum[r].im;
    }
    let svd = g.clone().svd(true, true);
    let top = svd.singular_values.max();
    let coef = svd.solve(&y, 1e-12 * top).ok()?;
    Some(y - g * coef)
}

/// Moves peak frequencies to the least-squares fit of a sum of windowed
/// tones over the lobes, so overlapping mainlobes no longer pull the
/// maxima apart. Peaks whose lobes overlap are fitted jointly.
fn refine_frequencies(profile: &RangeProfile, peaks: &mut [Peak]) {
    if peaks.is_empty() || profile.signal_len < 2 {
        return;
    }
    let taper = profile.window.coefficients(profile.signal_len);
    let fs = profile.bin_hz * profile.fft_size as f64;
    let mut order: Vec<usize> = (0..peaks.len()).collect();
    order.sort_by(|&a, &b| peaks[a].frequency.total_cmp(&peaks[b].frequency));

    // Clusters of peaks closer than two mainlobe widths.
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let joins = clusters.last().is_some_and(|c| {
            let j = *c.last().unwrap();
            let reach = peaks[i].mainlobe_width_hz.max(peaks[j].mainlobe_width_hz);
            peaks[i].frequency - peaks[j].frequency < 2.0 * reach
        });
        if joins {
            clusters.last_mut().unwrap().push(i);
        } else {
            clusters.push(vec![i]);
        }
    }

    for cluster in clusters {
        let width = cluster
            .iter()
            .map(|&i| peaks[i].mainlobe_width_hz)
            .fold(0.0, f64::max);
        if !(width > 0.0) {
            continue;
        }
        let lo = peaks[cluster[0]].frequency - width;
        let hi = peaks[*cluster.last().unwrap()].frequency + width;
        let idx: Vec<usize> = (0..profile.len())
            .filter(|&i| profile.freq(i) >= lo && profile.freq(i) <= hi)
            .collect();
        if idx.len() < 2 * cluster.len() + 1 {
            continue;
        }
        let bins: Vec<f64> = idx.iter().map(|&i| profile.freq(i)).collect();
        let spectrum: Vec<Complex64> = idx.iter().map(|&i| profile.spectrum[i]).collect();
        let start: Vec<f64> = cluster.iter().map(|&i| peaks[i].frequency).collect();
        if let Some(fit) = levenberg_marquardt(&start, width, |f| {
            tone_fit_residual(&spectrum, &bins, f, &taper, fs)
        }) {
            // Each tone must stay in its own half of the gap to its neighbours.
            let stays = start.iter().enumerate().all(|(a, &f0)| {
                let room = start
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &g)| 0.5 * (g - f0).abs())
                    .fold(width, f64::min);
                (fit[a] - f0).abs() < room
            });
            if !stays {
                continue;
            }
            for (&i, f) in cluster.iter().zip(fit) {
                peaks[i].frequency = f;
                peaks[i].range = beat_to_range(f, profile.chirp_rate);
            }
        }
    }
}

/// Minimizes `‖r(f)‖²` from `start`; `None` if the fit fails or any
/// frequency leaves `start ± width`.
fn levenberg_marquardt<F>(start: &[f64], width: f64, residual: F) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Option<DVector<f64>>,
{
    let k = start.len();
    let h = 1e-4 * width;
    let mut f = start.to_vec();
    let mut r = residual(&f)?;
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..100 {
        let mut jac = DMatrix::<f64>::zeros(r.len(), k);
        for i in 0..k {
            let mut up = f.clone();
            let mut down = f.clone();
            up[i] += h;
            down[i] -= h;
            let d = (residual(&up)? - residual(&down)?) / (2.0 * h);
            jac.set_column(i, &d);
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut improved = false;
        for _ in 0..20 {
            let mut a = jtj.clone();
            for i in 0..k {
                a[(i, i)] *= 1.0 + lambda;
                a[(i, i)] += 1e-30;
            }
            let step = a.lu().solve(&(-&jtr))?;
            let trial: Vec<f64> = f.iter().zip(step.iter()).map(|(x, d)| x + d).collect();
            if let Some(rt) = residual(&trial) {
                let ct = rt.norm_squared();
                if ct < cost {
                    let moved = step.amax();
                    f = trial;
                    r = rt;
                    let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                    cost = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if moved < 1e-9 * width || rel < 1e-14 {
                        return within(start, &f, width);
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    within(start, &f, width)
}

fn within(start: &[f64], f: &[f64], width: f64) -> Option<Vec<f64>> {
    start
        .iter()
        .zip(f)
        .all(|(a, b)| (a - b).abs() <= width && b.is_finite())
        .then(|| f.to_vec())
}

/// Width of a possibly merged lobe: both crossings if present, else twice
/// the one that exists, else the span between the neighbouring minima.
fn peak_width_hz(db: &[f64], peak: usize, bin_hz: f64) -> f64 {
    let (_, level) = peak_level(db, peak);
    let threshold = level - MAINLOBE_DROP_DB;
    let left = crossing(db, peak, threshold, -1);
    let right = crossing(db, peak, threshold, 1);
    let bins = match (left, right) {
        (Some(l), Some(r)) => r - l,
        (Some(l), None) => 2.0 * (peak as f64 - l),
        (None, Some(r)) => 2.0 * (r - peak as f64),
        (None, None) => {
            let mut l = peak;
            while l > 0 && db[l - 1] <= db[l] {
                l -= 1;
            }
            let mut r = peak;
            while r + 1 < db.len() && db[r + 1] <= db[r] {
                r += 1;
            }
            (r - l) as f64
        }
    };
    bins * bin_hz
}

/// Default half-width of the region around each true tone that
/// [`spurious_sidelobe_db`] ignores, in units of `1/T`.
pub const SPUR_EXCLUSION_WIDTHS: f64 = 3.0;

/// Highest level, dB relative to the profile maximum, found farther than
/// `exclusion_hz` from every frequency in `tones`.
pub fn spurious_sidelobe_db(profile: &RangeProfile, tones: &[f64], exclusion_hz: f64) -> Result<f64> {
    if !(exclusion_hz >= 0.0) {
        return Err(Error::invalid(format!("exclusion must be ≥ 0, got {exclusion_hz}")));
    }
    let db = profile.magnitude_db();
    (0..profile.len())
        .filter(|&i| {
            let f = profile.freq(i);
            tones.iter().all(|t| (f - t).abs() > exclusion_hz)
        })
        .map(|i| db[i])
        .reduce(f64::max)
        .ok_or_else(|| Error::Metrology("no bins outside the excluded regions".into()))
}

/// Least-squares amplitude and phase of `A·cos(2π·f·t + φ)` fitted to
/// `samples` taken at `times`.
pub fn fit_tone(samples: &[f64], times: &[f64], freq: f64) -> (f64, f64) {
    let (mut cc, mut ss, mut cs, mut xc, mut xs) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &t) in samples.iter().zip(times) {
        let (s, c) = (2.0 * PI * freq * t).sin_cos();
        cc += c * c;
        ss += s * s;
        cs += c * s;
        xc += x * c;
        xs += x * s;
    }
    let det = cc * ss - cs * cs;
    if det.abs() < 1e-300 {
        return (0.0, 0.0);
    }
    let a = (xc * ss - xs * cs) / det;
    let b = (xs * cc - xc * cs) / det;
    // a·cos + b·sin = A·cos(θ + φ) with a = A cos φ, b = −A sin φ.
    (a.hypot(b), (-b).atan2(a))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 100e6;
    const K: f64 = 2.2e9 / 3.3e-6;

    fn tone(f: f64, len: usize) -> Vec<f64> {
        (0..len).map(|i| (2.0 * PI * f * i as f64 / FS + 0.3).cos()).collect()
    }

    /// Direct DTFT magnitude; independent of the FFT path.
    fn dtft(samples: &[f64], w: &[f64], f: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (i, (&x, &wi)) in samples.iter().zip(w).enumerate() {
            let (s, c) = (2.0 * PI * f * i as f64 / FS).sin_cos();
            re += x * wi * c;
            im -= x * wi * s;
        }
        re.hypot(im)
    }

    /// 3.92-dB width by bisection on the DTFT around a known tone.
    fn oracle_width(samples: &[f64], window: Window, f0: f64) -> f64 {
        let w = window.coefficients(samples.len());
        // Locate the true peak by golden-section search.
        let span = 2.0 * FS / samples.len() as f64;
        let (mut a, mut b) = (f0 - 0.2 * span, f0 + 0.2 * span);
        for _ in 0..200 {
            let m1 = a + 0.382 * (b - a);
            let m2 = a + 0.618 * (b - a);
            if dtft(samples, &w, m1) > dtft(samples, &w, m2) {
                b = m2;
            } else {
                a = m1;
            }
        }
        let fp = 0.5 * (a + b);
        let target = dtft(samples, &w, fp) * 10f64.powf(-MAINLOBE_DROP_DB / 20.0);
        let edge = |dir: f64| {
            let (mut lo, mut hi) = (0.0, 3.0 * span);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if dtft(samples, &w, fp + dir * mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        edge(1.0) + edge(-1.0)
    }

    #[test]
    fn rect_width_is_inverse_duration() {
        for len in [330, 1000, 2730] {
            let x = tone(7.3e6, len);
            let t = len as f64 / FS;
            let oracle = oracle_width(&x, Window::Rect, 7.3e6);
            assert!((oracle * t - 1.0).abs() < 0.01, "oracle {oracle}");
            let p = spectrum_of(&x, FS, K, Window::Rect, default_fft_size(len)).unwrap();
            let w = mainlobe_width_392(&p, p.peak_bin().unwrap()).unwrap();
            assert!((w - oracle).abs() / oracle < 0.005, "len {len}: {w} vs {oracle}");
        }
    }

    #[test]
    fn tapered_widths_match_their_factors() {
        let len = 2730;
        let x = tone(7.3e6, len);
        let t = len as f64 / FS;
        for win in [Window::Hann, Window::Hamming, Window::Taylor] {
            let oracle = oracle_width(&x, win, 7.3e6);
            assert!((oracle * t / win.width_factor() - 1.0).abs() < 0.005, "{win}: {}", oracle * t);
            let p = spectrum_of(&x, FS, K, win, default_fft_size(len)).unwrap();
            let w = mainlobe_width_392(&p, p.peak_bin().unwrap()).unwrap();
            assert!((w - oracle).abs() / oracle < 0.005, "{win}: {w} vs {oracle}");
        }
    }

    #[test]
    fn tone_maps_to_range() {
        let x = tone(7.5e6, 2730);
        let p = spectrum_of(&x, FS, K, Window::Rect, default_fft_size(2730)).unwrap();
        let peaks = extract_peaks(&p, 10e3, -10.0);
        assert!(!peaks.is_empty());
        assert!((peaks[0].frequency - 7.5e6).abs() < p.bin_hz);
        assert!((peaks[0].range - 1.6862).abs() < 1e-3, "{}", peaks[0].range);
        let nearest = (7.5e6 / p.bin_hz).round() as usize;
        assert_eq!(p.peak_bin().unwrap(), nearest);
    }

    #[test]
    fn zero_signal() {
        let p = spectrum_of(&[0.0; 100], FS, K, Window::Rect, 1024).unwrap();
        assert!(p.spectrum.iter().all(|c| c.norm() == 0.0));
        assert!(extract_peaks(&p, 1.0, -10.0).is_empty());
        assert!(p.peak_bin().is_none());
    }

    #[test]
    fn fft_size_is_checked() {
        assert!(spectrum_of(&[0.0; 100], FS, K, Window::Rect, 64).is_err());
        assert!(spectrum_of(&[0.0; 100], FS, K, Window::Rect, 1000).is_err());
        assert_eq!(default_fft_size(2730), 32768);
    }

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..777).map(|i| ((i * 37 % 101) as f64 - 50.0) / 17.0).collect();
        let e: f64 = x.iter().map(|v| v * v).sum();
        for n in [1024, 4096] {
            let p = spectrum_of(&x, FS, K, Window::Rect, n).unwrap();
            assert!((p.energy() - e).abs() <= 1e-9 * e);
        }
    }

    #[test]
    fn resolution_examples() {
        let r = measured_resolution(37.4e3, K).unwrap();
        assert!((r - 8.41e-3).abs() < 0.01e-3, "{r}");
        let r = measured_resolution(36.63e3, K).unwrap();
        assert!((r - 8.24e-3).abs() < 0.01e-3, "{r}");
        let r = measured_resolution(38e3, K).unwrap();
        assert!((r - 8.55e-3).abs() < 0.01e-3, "{r}");
        assert!(measured_resolution(0.0, K).is_err());
    }

    #[test]
    fn width_requires_local_max() {
        let x = tone(7.3e6, 500);
        let p = spectrum_of(&x, FS, K, Window::Rect, 4096).unwrap();
        let pk = p.peak_bin().unwrap();
        assert!(matches!(
            mainlobe_width_392(&p, pk + 2),
            Err(Error::Metrology(_))
        ));
    }

    #[test]
    fn crop_keeps_axes() {
        let x = tone(7.5e6, 2730);
        let p = spectrum_of(&x, FS, K, Window::Rect, 8192).unwrap();
        let c = p.crop_range(1.6, 1.8);
        assert!(c.range(0) >= 1.6 && c.range(c.len() - 1) <= 1.8);
        assert_eq!(c.spectrum[0], p.spectrum[c.first_bin]);
        assert!((c.range_axis()[3] - p.range(c.first_bin + 3)).abs() < 1e-15);
    }

    #[test]
    fn fit_tone_recovers_phase() {
        let t: Vec<f64> = (0..200).map(|i| 3e-9 + i as f64 / FS).collect();
        let x: Vec<f64> = t.iter().map(|&t| 0.7 * (2.0 * PI * 5e6 * t - 1.1).cos()).collect();
        let (a, ph) = fit_tone(&x, &t, 5e6);
        assert!((a - 0.7).abs() < 1e-12 && (ph + 1.1).abs() < 1e-12);
    }

    #[test]
    fn spurious_level_of_a_rect_tone_is_its_sidelobe() {
        // Beyond the first null a rect tone peaks at the −13.26 dB sidelobe.
        let len = 1000;
        let x = tone(7.3e6, len);
        let p = spectrum_of(&x, FS, K, Window::Rect, 1 << 16).unwrap();
        let t = len as f64 / FS;
        let s = spurious_sidelobe_db(&p, &[7.3e6], 1.0 / t).unwrap();
        assert!((s + 13.26).abs() < 0.1, "{s}");
        let far = spurious_sidelobe_db(&p, &[7.3e6], 3.0 / t).unwrap();
        assert!(far < -20.0);
        assert!(spurious_sidelobe_db(&p, &[7.3e6], 1e9).is_err());
    }

    #[test]
    fn overlapping_tones_are_refined_jointly() {
        // Two tones 1.04/T apart, in anti-phase mid-record: raw maxima are
        // pushed apart, the refined frequencies are not.
        let len = 2730;
        let t = len as f64 / FS;
        let (f1, f2) = (7.0e6, 7.0e6 + 1.04 / t);
        let phase = PI - PI * (f2 - f1) * t;
        let x: Vec<f64> = (0..len)
            .map(|i| {
                let s = i as f64 / FS;
                (2.0 * PI * f1 * s).cos() + (2.0 * PI * f2 * s + phase).cos()
            })
            .collect();
        let p = spectrum_of(&x, FS, K, Window::Rect, default_fft_size(len)).unwrap();
        let mut peaks = extract_peaks(&p, 0.2 / t, -10.0);
        assert_eq!(peaks.len(), 2);
        peaks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let raw = (peaks[1].bin as f64 - peaks[0].bin as f64) * p.bin_hz;
        assert!(raw > 1.2 * (f2 - f1), "raw spacing {raw}");
        assert!((peaks[0].frequency - f1).abs() < 1e-3 / t);
        assert!((peaks[1].frequency - f2).abs() < 1e-3 / t);
    }

    #[test]
    fn parabolic_peak_on_exact_parabola() {
        // y = 3 − (x − 0.2)² sampled at −1, 0, 1.
        let f = |x: f64| 3.0 - (x - 0.2) * (x - 0.2);
        let (p, v) = parabolic_peak(f(-1.0), f(0.0), f(1.0));
        assert!((p - 0.2).abs() < 1e-12 && (v - 3.0).abs() < 1e-12);
    }
}
