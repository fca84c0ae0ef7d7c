//! Point-scatterer scenes on a turntable.
//!
//! Coordinates are in the turntable frame at `t = 0`: `x` is cross-range,
//! `y` is down-range relative to the rotation center. The turntable spins
//! at `omega` rad/s; the range to a scatterer uses the far-field projection
//! `R(t) = R0 + y·cos(ωt) − x·sin(ωt)`.

use serde::{Deserialize, Serialize};

use crate::plan::PlanParams;
use crate::{Error, Result, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scatterer {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
    #[serde(default = "unit")]
    pub reflectivity: f64,
}

fn unit() -> f64 {
    1.0
}

impl Scatterer {
    pub fn new(x: f64, y: f64) -> Self {
        Scatterer {
            x,
            y,
            reflectivity: 1.0,
        }
    }

    /// Position after the turntable has turned by `angle` radians.
    pub fn rotated(&self, angle: f64) -> Scatterer {
        let (s, c) = angle.sin_cos();
        Scatterer {
            x: self.x * c + self.y * s,
            y: self.y * c - self.x * s,
            reflectivity: self.reflectivity,
        }
    }
}

/// Interference description: either a frequency band or explicit subpulse indices.
#[derive(Debug, Clone, PartialEq)]
pub enum GapSpec {
    Band { lo: f64, hi: f64 },
    Indices(Vec<usize>),
}

impl GapSpec {
    /// Subpulse indices this gap removes from a plan.
    pub fn resolve(&self, plan: &PlanParams) -> Result<Vec<usize>> {
        match self {
            GapSpec::Band { lo, hi } => {
                crate::plan::interference_masked_subpulses(plan, *lo, *hi)
            }
            GapSpec::Indices(ix) => {
                let mut ix = ix.clone();
                ix.sort_unstable();
                ix.dedup();
                if let Some(&bad) = ix.iter().find(|&&n| n >= plan.subpulses) {
                    return Err(Error::Index {
                        index: bad,
                        len: plan.subpulses,
                    });
                }
                Ok(ix)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    /// Radar to rotation center, m.
    pub center_range: f64,
    /// Turntable rate, rad/s.
    pub omega: f64,
    /// Per-sample SNR of a unit echo at the de-chirp output; `None` is noiseless.
    pub snr_db: Option<f64>,
    pub rng_seed: u64,
}

impl Scene {
    pub fn new(scatterers: Vec<Scatterer>, center_range: f64) -> Self {
        Scene {
            scatterers,
            center_range,
            omega: 0.0,
            snr_db: None,
            rng_seed: 0,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_noise(mut self, snr_db: f64, seed: u64) -> Self {
        self.snr_db = Some(snr_db);
        self.rng_seed = seed;
        self
    }

    /// The same scene with every scatterer turned by `angle` radians.
    pub fn rotated(&self, angle: f64) -> Scene {
        Scene {
            scatterers: self.scatterers.iter().map(|s| s.rotated(angle)).collect(),
            ..self.clone()
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.center_range > 0.0) || !self.center_range.is_finite() {
            return Err(Error::invalid(format!(
                "center range must be positive, got {}",
                self.center_range
            )));
        }
        if !self.omega.is_finite() {
            return Err(Error::invalid("rotation rate must be finite"));
        }
        if self.scatterers.is_empty() {
            return Err(Error::invalid("scene has no scatterers"));
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if !(s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::invalid(format!("scatterer {i} has non-finite position")));
            }
            if !(s.reflectivity >= 0.0) || !s.reflectivity.is_finite() {
                return Err(Error::invalid(format!(
                    "scatterer {i} reflectivity must be ≥ 0, got {}",
                    s.reflectivity
                )));
            }
        }
        Ok(())
    }

    /// Instantaneous range to a scatterer at time `t`.
    pub fn range_at(&self, s: &Scatterer, t: f64) -> f64 {
        self.center_range + s.rotated(self.omega * t).y
    }

    /// Noise standard deviation per sample, zero when noise is disabled.
    pub fn noise_sigma(&self) -> f64 {
        match self.snr_db {
            // A unit cosine has power 1/2.
            Some(snr) if snr.is_finite() => (0.5 / 10f64.powf(snr / 10.0)).sqrt(),
            _ => 0.0,
        }
    }
}

/// Round-trip delay `2·R(t)/c` of scatterer `s` at time `t`.
pub fn scatterer_delay(scene: &Scene, s: &Scatterer, t: f64) -> f64 {
    2.0 * scene.range_at(s, t) / SPEED_OF_LIGHT
}

/// Two unit scatterers at `y = ±separation/2` on the boresight, no rotation.
pub fn make_two_target_scene(separation: f64, center_range: f64) -> Result<Scene> {
    if !(separation > 0.0) {
        return Err(Error::invalid(format!(
            "separation must be positive, got {separation}"
        )));
    }
    let h = 0.5 * separation;
    Ok(Scene::new(
        vec![Scatterer::new(0.0, -h), Scatterer::new(0.0, h)],
        center_range,
    ))
}

/// A "V" of point scatterers: two arms of length `side` with opening
/// `angle_deg`, sampled every `spacing` or finer.
///
/// The bisector points down-range with the vertex nearest the radar; the
/// figure is centered on the rotation axis.
pub fn make_v_scene(side: f64, angle_deg: f64, spacing: f64, center_range: f64) -> Result<Scene> {
    if !(side > 0.0) {
        return Err(Error::invalid(format!("side must be positive, got {side}")));
    }
    if !(angle_deg > 0.0 && angle_deg <= 180.0) {
        return Err(Error::invalid(format!(
            "V angle must lie in (0, 180], got {angle_deg}"
        )));
    }
    if !(spacing > 0.0 && spacing <= side) {
        return Err(Error::invalid(format!(
            "spacing must lie in (0, side], got {spacing}"
        )));
    }
    let per_arm = ((side / spacing) - 1e-9).ceil().max(1.0) as usize;
    let half = 0.5 * angle_deg.to_radians();
    let (s, c) = half.sin_cos();

    let mut pts = vec![(0.0, 0.0)];
    for sign in [-1.0, 1.0] {
        for i in 1..=per_arm {
            let r = side * i as f64 / per_arm as f64;
            pts.push((sign * r * s, r * c));
        }
    }
    // Center the bounding box on the rotation axis.
    let (xmin, xmax, ymin, ymax) = pts.iter().fold(
        (f64::MAX, f64::MIN, f64::MAX, f64::MIN),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    let (cx, cy) = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    Ok(Scene::new(
        pts.into_iter()
            .map(|(x, y)| Scatterer::new(x - cx, y - cy))
            .collect(),
        center_range,
    ))
}
