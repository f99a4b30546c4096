use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Frequency band `[lo, hi)`, or `[lo, hi]` when `hi_closed`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub hi_closed: bool,
}

impl Band {
    pub fn new(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            name: name.to_string(),
            lo,
            hi,
            hi_closed: false,
        }
    }

    pub fn closed(name: &str, lo: f64, hi: f64) -> Self {
        Self {
            hi_closed: true,
            ..Self::new(name, lo, hi)
        }
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        let bad = |reason: String| Error::InvalidBand {
            name: self.name.clone(),
            reason,
        };
        if !(self.lo >= 0.0 && self.lo < self.hi) {
            return Err(bad(format!("need 0 <= lo < hi, got [{}, {}]", self.lo, self.hi)));
        }
        if self.hi > rate / 2.0 {
            return Err(bad(format!("upper edge {} Hz exceeds Nyquist {} Hz", self.hi, rate / 2.0)));
        }
        Ok(())
    }

    pub fn contains(&self, f: f64) -> bool {
        let eps = 1e-9 * self.hi.max(1.0);
        f >= self.lo - eps && (f < self.hi - eps || (self.hi_closed && f <= self.hi + eps))
    }
}

/// Named list of bands used together for feature extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSet {
    name: String,
    bands: Vec<Band>,
}

impl BandSet {
    pub fn new(name: &str, bands: Vec<Band>) -> Result<Self> {
        if bands.is_empty() {
            return Err(Error::InvalidArgument("band set is empty".into()));
        }
        Ok(Self {
            name: name.to_string(),
            bands,
        })
    }

    /// delta 0-3, theta 4-7, alpha 8-13, beta 14-20 Hz, each closed.
    pub fn alzheimer4() -> Self {
        Self {
            name: "alzheimer4".into(),
            bands: vec![
                Band::closed("delta", 0.0, 3.0),
                Band::closed("theta", 4.0, 7.0),
                Band::closed("alpha", 8.0, 13.0),
                Band::closed("beta", 14.0, 20.0),
            ],
        }
    }

    /// Six contiguous bands from 0 to 20 Hz; the last is closed at 20.
    pub fn risk6() -> Self {
        Self {
            name: "risk6".into(),
            bands: vec![
                Band::new("subdelta", 0.0, 1.5),
                Band::new("delta", 1.5, 3.5),
                Band::new("theta", 3.5, 7.5),
                Band::new("alpha", 7.5, 13.5),
                Band::new("beta1", 13.5, 19.5),
                Band::closed("beta2", 19.5, 20.0),
            ],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "alzheimer4" => Some(Self::alzheimer4()),
            "risk6" => Some(Self::risk6()),
            _ => None,
        }
    }

    /// Parses `name:lo-hi,name:lo-hi,...`; the last band is closed.
    pub fn parse_custom(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mut bands = Vec::with_capacity(parts.len());
        for (i, part) in parts.iter().enumerate() {
            let bad = || Error::InvalidArgument(format!("cannot parse band {part:?}; expected name:lo-hi"));
            let (name, range) = part.split_once(':').ok_or_else(bad)?;
            let (lo, hi) = range.split_once('-').ok_or_else(bad)?;
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let name = name.trim();
            bands.push(if i + 1 == parts.len() {
                Band::closed(name, lo, hi)
            } else {
                Band::new(name, lo, hi)
            });
        }
        Self::new("custom", bands)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn validate(&self, rate: f64) -> Result<()> {
        self.bands.iter().try_for_each(|b| b.validate(rate))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
    Rectangular,
}

impl Window {
    /// Periodic form: the Hann DFT leaks into exactly one bin either side.
    fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpectralConfig {
    pub window: Window,
    pub remove_mean: bool,
}

/// One-sided power spectrum. Bin powers sum to the window-compensated mean
/// square `sum (w x)^2 / sum w^2` (plain mean square for a rectangular window).
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    nyquist: f64,
}

impl Periodogram {
    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn band_power(&self, band: &Band) -> Result<f64> {
        band.validate(2.0 * self.nyquist)?;
        Ok(self
            .freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| band.contains(**f))
            .map(|(_, p)| p)
            .sum())
    }
}

pub fn periodogram(segment: &[f64], rate: f64, cfg: &SpectralConfig) -> Result<Periodogram> {
    let n = segment.len();
    if n < 2 {
        return Err(Error::InvalidArgument("segment needs at least 2 samples".into()));
    }
    let mean = if cfg.remove_mean {
        segment.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let w = cfg.window.coefficients(n);
    let w_energy: f64 = w.iter().map(|v| v * v).sum();
    let mut buf: Vec<Complex<f64>> = segment
        .iter()
        .zip(&w)
        .map(|(x, wi)| Complex::new((x - mean) * wi, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let scale = 1.0 / (n as f64 * w_energy);
    let half = n / 2;
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in buf.iter().enumerate().take(half + 1) {
        let mirrored = k != 0 && !(n % 2 == 0 && k == half);
        let p = c.norm_sqr() * scale * if mirrored { 2.0 } else { 1.0 };
        freqs.push(k as f64 * rate / n as f64);
        power.push(p);
    }
    Ok(Periodogram {
        freqs,
        power,
        nyquist: rate / 2.0,
    })
}

/// Power of `segment` inside `band` (Hann window, mean kept).
pub fn band_power(segment: &[f64], rate: f64, band: &Band) -> Result<f64> {
    band.validate(rate)?;
    periodogram(segment, rate, &SpectralConfig::default())?.band_power(band)
}
