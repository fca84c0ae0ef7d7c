//! Waveform plan for the frequency-stepped chirp train.
//!
//! A plan fixes the seed chirp (start frequency, bandwidth, width), the
//! loop timing that turns one chirp into a train of `N` frequency-stepped
//! subpulses, and the frequency step between subpulses. Everything else
//! (carriers, synthesized bandwidth, resolution) is derived from it.
//!
//! [`PlanParams`] is the raw, freely editable parameter set. It becomes a
//! [`WaveformPlan`] only after [`validate_plan`] reports no violations;
//! every downstream stage takes a `&WaveformPlan`.

use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, SPEED_OF_LIGHT};

/// Relative tolerance for "equal" durations and the integer train-slot check.
pub const TIMING_REL_TOL: f64 = 1e-9;

/// Raw waveform parameters, SI units throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanParams {
    /// Start frequency of the seed chirp.
    #[serde(rename = "chirp_start_hz")]
    pub chirp_start: f64,
    /// Bandwidth swept by every subpulse.
    #[serde(rename = "chirp_bandwidth_hz")]
    pub chirp_bandwidth: f64,
    /// Chirp pulse width `T_cw`.
    #[serde(rename = "chirp_width_s")]
    pub chirp_width: f64,
    /// Chirp repetition period `T_cr`.
    #[serde(rename = "chirp_period_s")]
    pub chirp_period: f64,
    /// Loop circulation time `T_L`.
    #[serde(rename = "loop_time_s")]
    pub loop_time: f64,
    /// Seed pulse train period `T_pr`.
    #[serde(rename = "train_period_s")]
    pub train_period: f64,
    /// Seed pulse width `T_pw`.
    #[serde(rename = "seed_width_s")]
    pub seed_width: f64,
    /// Carrier step between consecutive subpulses.
    #[serde(rename = "step_hz")]
    pub step: f64,
    /// Fixed shift applied to every subpulse carrier (the switch modulator shift).
    #[serde(rename = "offset_hz")]
    pub offset: f64,
    /// Loop filter bandwidth; bounds the number of subpulses.
    #[serde(rename = "filter_bandwidth_hz")]
    pub filter_bandwidth: f64,
    /// Subpulses used per train.
    pub subpulses: usize,
}

impl PlanParams {
    /// The 16.9–35.1 GHz desk configuration: 2.2 GHz chirps of 3.3 µs,
    /// 2 GHz steps, 5.14 µs loop, 71.96 µs train period, nine subpulses.
    pub fn reference() -> Self {
        PlanParams {
            chirp_start: 14.7e9,
            chirp_bandwidth: 2.2e9,
            chirp_width: 3.3e-6,
            chirp_period: 5.14e-6,
            loop_time: 5.14e-6,
            train_period: 71.96e-6,
            seed_width: 5e-6,
            step: 2e9,
            offset: 0.2e9,
            filter_bandwidth: 16e9,
            subpulses: 9,
        }
    }

    /// Chirp rate `k = B_chirp / T_cw`.
    pub fn chirp_rate(&self) -> f64 {
        self.chirp_bandwidth / self.chirp_width
    }

    /// Center frequency of the seed chirp.
    pub fn chirp_center(&self) -> f64 {
        self.chirp_start + 0.5 * self.chirp_bandwidth
    }

    /// Center frequency of subpulse `n`: `f_c + (n+1)·Δf + f_offset`.
    pub fn subpulse_carrier(&self, n: usize) -> Result<f64> {
        if n >= self.subpulses {
            return Err(Error::Index {
                index: n,
                len: self.subpulses,
            });
        }
        Ok(self.carrier_unchecked(n))
    }

    fn carrier_unchecked(&self, n: usize) -> f64 {
        self.chirp_center() + (n as f64 + 1.0) * self.step + self.offset
    }

    /// Frequency at which subpulse `n` starts its sweep.
    pub fn subpulse_start(&self, n: usize) -> Result<f64> {
        Ok(self.subpulse_carrier(n)? - 0.5 * self.chirp_bandwidth)
    }

    /// Swept band `[lo, hi]` of subpulse `n`.
    pub fn subpulse_band(&self, n: usize) -> Result<(f64, f64)> {
        let c = self.subpulse_carrier(n)?;
        let half = 0.5 * self.chirp_bandwidth;
        Ok((c - half, c + half))
    }

    /// `(N−1)·Δf + B_chirp`.
    pub fn equivalent_bandwidth(&self) -> f64 {
        self.subpulses.saturating_sub(1) as f64 * self.step + self.chirp_bandwidth
    }

    /// Lowest and highest frequency covered by the train.
    pub fn synthesized_band(&self) -> (f64, f64) {
        let lo = self.carrier_unchecked(0) - 0.5 * self.chirp_bandwidth;
        (lo, lo + self.equivalent_bandwidth())
    }

    /// Mid frequency of the synthesized band.
    pub fn synthesized_center(&self) -> f64 {
        let (lo, hi) = self.synthesized_band();
        0.5 * (lo + hi)
    }

    /// Time shift between consecutive de-chirped segments, `Δf / k`.
    pub fn segment_duration(&self) -> f64 {
        self.step / self.chirp_rate()
    }

    /// Duration of the synthesized de-chirped signal, `(N−1)·Δf/k + T_cw`.
    pub fn synthesized_duration(&self) -> f64 {
        self.subpulses.saturating_sub(1) as f64 * self.segment_duration() + self.chirp_width
    }
}

/// `⌊B_obpf / Δf⌋ + 1`.
pub fn n_max(filter_bandwidth: f64, step: f64) -> Result<usize> {
    if !(filter_bandwidth > 0.0 && step > 0.0) || !filter_bandwidth.is_finite() || !step.is_finite()
    {
        return Err(Error::invalid(format!(
            "n_max needs positive finite inputs, got B_obpf={filter_bandwidth}, Δf={step}"
        )));
    }
    Ok((filter_bandwidth / step).floor() as usize + 1)
}

/// Equivalent bandwidth of a plan.
pub fn equivalent_bandwidth(plan: &WaveformPlan) -> f64 {
    plan.equivalent_bandwidth()
}

/// Ideal range resolution `c / 2B`.
pub fn theoretical_resolution(bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    Ok(SPEED_OF_LIGHT / (2.0 * bandwidth))
}

/// A single broken feasibility rule.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotPositive(&'static str),
    NoSubpulses,
    StepNotBelowBandwidth,
    SeedShorterThanChirp,
    LoopShorterThanSeed,
    ChirpPeriodNotLoopTime,
    TrainPeriodNotMultiple { ratio: f64 },
    TooFewTrainSlots { slots: u64, n_max: usize },
    TooManySubpulses { n: usize, n_max: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPositive(field) => write!(f, "{field} > 0"),
            Violation::NoSubpulses => write!(f, "N ≥ 1"),
            Violation::StepNotBelowBandwidth => write!(f, "Δf < B_chirp"),
            Violation::SeedShorterThanChirp => write!(f, "T_pw ≥ T_cw"),
            Violation::LoopShorterThanSeed => write!(f, "T_L ≥ T_pw"),
            Violation::ChirpPeriodNotLoopTime => write!(f, "T_cr = T_L"),
            Violation::TrainPeriodNotMultiple { ratio } => {
                write!(f, "T_pr = M·T_cr for integer M (T_pr/T_cr = {ratio})")
            }
            Violation::TooFewTrainSlots { slots, n_max } => {
                write!(f, "M ≥ N_max (M = {slots}, N_max = {n_max})")
            }
            Violation::TooManySubpulses { n, n_max } => {
                write!(f, "N ≤ N_max (N = {n}, N_max = {n_max})")
            }
        }
    }
}

/// Outcome of [`validate_plan`]. An empty violation list means the plan is usable.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Integer `M = T_pr / T_cr`, when it exists.
    pub train_slots: Option<u64>,
    pub n_max: Option<usize>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIMING_REL_TOL * a.abs().max(b.abs())
}

/// Checks every feasibility rule of a plan. Violations are returned, never raised.
pub fn validate_plan(p: &PlanParams) -> ValidationReport {
    let mut violations = Vec::new();
    let positive = [
        ("chirp_start_hz", p.chirp_start),
        ("chirp_bandwidth_hz", p.chirp_bandwidth),
        ("chirp_width_s", p.chirp_width),
        ("chirp_period_s", p.chirp_period),
        ("loop_time_s", p.loop_time),
        ("train_period_s", p.train_period),
        ("seed_width_s", p.seed_width),
        ("step_hz", p.step),
        ("filter_bandwidth_hz", p.filter_bandwidth),
    ];
    for (name, v) in positive {
        if !(v > 0.0) || !v.is_finite() {
            violations.push(Violation::NotPositive(name));
        }
    }
    if !(p.offset.is_finite()) {
        violations.push(Violation::NotPositive("offset_hz"));
    }
    if p.subpulses == 0 {
        violations.push(Violation::NoSubpulses);
    }
    if !violations.is_empty() {
        return ValidationReport {
            violations,
            train_slots: None,
            n_max: None,
        };
    }

    if p.step >= p.chirp_bandwidth {
        violations.push(Violation::StepNotBelowBandwidth);
    }
    if p.seed_width < p.chirp_width {
        violations.push(Violation::SeedShorterThanChirp);
    }
    if p.loop_time < p.seed_width {
        violations.push(Violation::LoopShorterThanSeed);
    }
    if !rel_eq(p.chirp_period, p.loop_time) {
        violations.push(Violation::ChirpPeriodNotLoopTime);
    }

    let n_max = n_max(p.filter_bandwidth, p.step).ok();
    let ratio = p.train_period / p.chirp_period;
    let m = ratio.round();
    let train_slots = if m >= 1.0 && (ratio - m).abs() <= TIMING_REL_TOL * ratio {
        Some(m as u64)
    } else {
        violations.push(Violation::TrainPeriodNotMultiple { ratio });
        None
    };
    if let (Some(slots), Some(n_max)) = (train_slots, n_max) {
        if (slots as usize) < n_max {
            violations.push(Violation::TooFewTrainSlots { slots, n_max });
        }
    }
    if let Some(n_max) = n_max {
        if p.subpulses > n_max {
            violations.push(Violation::TooManySubpulses {
                n: p.subpulses,
                n_max,
            });
        }
    }

    ValidationReport {
        violations,
        train_slots,
        n_max,
    }
}

/// A plan that passed [`validate_plan`]. Immutable; dereferences to its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformPlan {
    params: PlanParams,
    train_slots: u64,
    n_max: usize,
}

impl WaveformPlan {
    pub fn new(params: PlanParams) -> Result<Self> {
        let report = validate_plan(&params);
        if !report.is_valid() {
            return Err(Error::PlanViolations(
                report.violations.iter().map(ToString::to_string).collect(),
            ));
        }
        Ok(WaveformPlan {
            params,
            train_slots: report.train_slots.expect("valid plan has M"),
            n_max: report.n_max.expect("valid plan has N_max"),
        })
    }

    /// The reference 9-subpulse plan.
    pub fn reference() -> Self {
        Self::new(PlanParams::reference()).expect("reference plan is valid")
    }

    /// Same plan with a different subpulse count.
    pub fn with_subpulses(&self, n: usize) -> Result<Self> {
        Self::new(PlanParams {
            subpulses: n,
            ..self.params
        })
    }

    pub fn params(&self) -> &PlanParams {
        &self.params
    }

    /// `M = T_pr / T_cr`.
    pub fn train_slots(&self) -> u64 {
        self.train_slots
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn theoretical_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.equivalent_bandwidth())
    }
}

impl Deref for WaveformPlan {
    type Target = PlanParams;

    fn deref(&self) -> &PlanParams {
        &self.params
    }
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.1.min(b.1) - a.0.max(b.0)).max(0.0)
}

/// Subpulses whose data an interference band `[band_lo, band_hi]` corrupts.
///
/// Adjacent subpulses share `B_chirp − Δf` of spectrum. A subpulse is
/// masked when the band overlaps the part of its sweep that no neighbour
/// covers, or, if neighbours cover all of it, any part of its sweep. A
/// band that sits entirely inside shared spectrum masks every subpulse it
/// touches.
pub fn interference_masked_subpulses(
    plan: &PlanParams,
    band_lo: f64,
    band_hi: f64,
) -> Result<Vec<usize>> {
    if !(band_lo < band_hi) || !band_lo.is_finite() || !band_hi.is_finite() {
        return Err(Error::invalid(format!(
            "interference band needs lo < hi, got [{band_lo}, {band_hi}]"
        )));
    }
    let band = (band_lo, band_hi);
    let spans: Vec<(f64, f64)> = (0..plan.subpulses)
        .map(|n| plan.subpulse_band(n))
        .collect::<Result<_>>()?;

    let exclusive = |n: usize| {
        let (mut lo, mut hi) = spans[n];
        if n > 0 {
            lo = lo.max(spans[n - 1].1);
        }
        if n + 1 < spans.len() {
            hi = hi.min(spans[n + 1].0);
        }
        (lo, hi)
    };

    let hit: Vec<usize> = (0..spans.len())
        .filter(|&n| {
            let (lo, hi) = exclusive(n);
            if hi > lo {
                overlap((lo, hi), band) > 0.0
            } else {
                overlap(spans[n], band) > 0.0
            }
        })
        .collect();
    if !hit.is_empty() {
        return Ok(hit);
    }
    Ok((0..spans.len())
        .filter(|&n| overlap(spans[n], band) > 0.0)
        .collect())
}
