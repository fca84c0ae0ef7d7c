//! Tapering windows for spectral analysis.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Taylor window sidelobe level, dB below the mainlobe.
pub const TAYLOR_SLL_DB: f64 = 30.0;
/// Number of nearly constant-level sidelobes of the Taylor window.
pub const TAYLOR_NBAR: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// No taper. The 3.92-dB mainlobe width of a tone of duration `T` is exactly `1/T`.
    #[default]
    Rect,
    Hann,
    Hamming,
    /// Taylor, `n̄ = 4`, −30 dB sidelobes.
    Taylor,
}

impl Window {
    /// Symmetric window coefficients of length `len`.
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        if len <= 1 {
            return vec![1.0; len];
        }
        let m = (len - 1) as f64;
        match self {
            Window::Rect => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / m).cos())
                .collect(),
            Window::Hamming => (0..len)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos())
                .collect(),
            Window::Taylor => taylor(len, TAYLOR_NBAR, TAYLOR_SLL_DB),
        }
    }

    /// 3.92-dB mainlobe width of a windowed tone of duration `T`, in units of `1/T`.
    pub fn width_factor(self) -> f64 {
        match self {
            Window::Rect => 1.0,
            Window::Hann => 1.635,
            Window::Hamming => 1.480,
            Window::Taylor => 1.275,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rect => "rect",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
            Window::Taylor => "taylor",
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rect" | "rectangular" | "none" => Ok(Window::Rect),
            "hann" | "hanning" => Ok(Window::Hann),
            "hamming" => Ok(Window::Hamming),
            "taylor" => Ok(Window::Taylor),
            other => Err(Error::invalid(format!("unknown window '{other}'"))),
        }
    }
}

fn taylor(len: usize, nbar: usize, sll_db: f64) -> Vec<f64> {
    let b = 10f64.powf(sll_db / 20.0);
    let a = b.acosh() / PI;
    let nb = nbar as f64;
    let s2 = nb * nb / (a * a + (nb - 0.5).powi(2));
    let ms: Vec<f64> = (1..nbar).map(|m| m as f64).collect();

    let fm: Vec<f64> = ms
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let sign = if mi % 2 == 0 { 1.0 } else { -1.0 };
            let numer: f64 = ms
                .iter()
                .map(|&j| 1.0 - m * m / s2 / (a * a + (j - 0.5).powi(2)))
                .product();
            let denom: f64 = ms
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != mi)
                .map(|(_, &j)| 1.0 - m * m / (j * j))
                .product();
            sign * numer / (2.0 * denom)
        })
        .collect();

    let n = len as f64;
    let w = |i: f64| {
        1.0 + 2.0
            * ms.iter()
                .zip(&fm)
                .map(|(&m, &f)| f * (2.0 * PI * m * (i - n / 2.0 + 0.5) / n).cos())
                .sum::<f64>()
    };
    let scale = 1.0 / w((n - 1.0) / 2.0);
    (0..len).map(|i| w(i as f64) * scale).collect()
}
