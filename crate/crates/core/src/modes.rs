//! OAM mode algebra: topological charges, superposition vectors over a
//! truncated index range, sector states and phase-only hologram masks.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Largest |m| accepted unless a caller asks for a different truncation.
pub const DEFAULT_TRUNCATION: u32 = 10;

const NORM_TOL: f64 = 1e-12;

/// Signed topological charge of a helically phased mode.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct OamIndex(pub i32);

impl OamIndex {
    pub fn value(self) -> i32 {
        self.0
    }

    /// Returns the index if it lies in `[-truncation, truncation]`.
    pub fn checked(self, truncation: u32) -> Result<Self> {
        if self.0.unsigned_abs() > truncation {
            return Err(Error::InvalidMode(format!(
                "|{}| exceeds truncation {}",
                self.0, truncation
            )));
        }
        Ok(self)
    }
}

impl From<i32> for OamIndex {
    fn from(v: i32) -> Self {
        OamIndex(v)
    }
}

impl std::fmt::Display for OamIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Complex amplitudes over OAM eigenmodes `|m>` with `|m| <= truncation`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVector {
    amps: BTreeMap<i32, Complex64>,
    truncation: u32,
}

impl ModeVector {
    /// Builds a vector from `(m, amplitude)` pairs. Repeated indices add.
    /// Indices beyond the truncation are rejected.
    pub fn new<I>(amplitudes: I, truncation: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, Complex64)>,
    {
        let mut amps = BTreeMap::new();
        for (m, a) in amplitudes {
            OamIndex(m).checked(truncation)?;
            *amps.entry(m).or_insert(Complex64::new(0.0, 0.0)) += a;
        }
        Ok(ModeVector { amps, truncation })
    }

    /// The pure eigenmode `|m>`.
    pub fn eigenmode(m: i32, truncation: u32) -> Result<Self> {
        Self::new([(m, Complex64::new(1.0, 0.0))], truncation)
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn amplitude(&self, m: i32) -> Complex64 {
        self.amps.get(&m).copied().unwrap_or_default()
    }

    /// Iterates `(m, amplitude)` in increasing `m`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.amps.iter().map(|(&m, &a)| (m, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    /// Rescales to unit norm. A zero vector cannot be normalized.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm_sqr().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidMode("cannot normalize a zero vector".into()));
        }
        for a in self.amps.values_mut() {
            *a /= n;
        }
        Ok(self)
    }

    /// Number of components with non-negligible weight.
    pub fn support(&self) -> usize {
        self.amps
            .values()
            .filter(|a| a.norm_sqr() > NORM_TOL)
            .count()
    }

    /// True when the vector is a single eigenmode (up to phase).
    pub fn is_eigenmode(&self) -> bool {
        self.support() == 1
    }

    /// Copy with every index moved by `delta`. The truncation is widened by
    /// `|delta|` so misaligned detection modes can sit just outside the
    /// nominal range.
    pub(crate) fn shifted(&self, delta: i32) -> ModeVector {
        ModeVector {
            amps: self.amps.iter().map(|(&m, &a)| (m + delta, a)).collect(),
            truncation: self.truncation + delta.unsigned_abs(),
        }
    }
}

/// `sum_m conj(a_m) b_m`.
pub fn mode_overlap(a: &ModeVector, b: &ModeVector) -> Complex64 {
    a.iter().map(|(m, am)| am.conj() * b.amplitude(m)).sum()
}

/// Equal-weight superposition of `|l>` and `|-l>` set by a hologram rotated to
/// angle `theta`. The angle is kept reduced modulo `pi / l`, the period of the
/// sector pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorState {
    l: u32,
    theta: f64,
}

impl SectorState {
    pub fn new(l: i32, theta: f64) -> Result<Self> {
        if l < 1 {
            return Err(Error::InvalidMode(format!(
                "sector states need l >= 1, got {l}"
            )));
        }
        if !theta.is_finite() {
            return Err(Error::Parameter(format!("non-finite sector angle {theta}")));
        }
        let l = l as u32;
        let period = PI / l as f64;
        let mut theta = theta.rem_euclid(period);
        if theta >= period {
            theta = 0.0;
        }
        Ok(SectorState { l, theta })
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    /// Canonical angle in `[0, pi / l)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `(e^{i l theta}|l> + e^{-i l theta}|-l>) / sqrt(2)`.
    pub fn to_mode_vector(&self, truncation: u32) -> Result<ModeVector> {
        let l = self.l as i32;
        let phase = l as f64 * self.theta;
        ModeVector::new(
            [
                (l, Complex64::from_polar(FRAC_1_SQRT_2, phase)),
                (-l, Complex64::from_polar(FRAC_1_SQRT_2, -phase)),
            ],
            truncation,
        )
    }
}

/// Sector state for hologram angle `theta` in the default truncation.
pub fn sector_state(l: i32, theta: f64) -> Result<ModeVector> {
    SectorState::new(l, theta)?.to_mode_vector(DEFAULT_TRUNCATION.max(l.unsigned_abs()))
}

/// Phase-only mask sampled on a pixel grid, row-major, values in `[0, 2pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hologram {
    width: usize,
    height: usize,
    phase: Vec<f64>,
}

impl Hologram {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn phase(&self, x: usize, y: usize) -> f64 {
        self.phase[y * self.width + x]
    }

    pub fn phases(&self) -> &[f64] {
        &self.phase
    }

    /// 8-bit gray levels, phase 0 -> 0 and 2pi -> 255.
    pub fn gray_levels(&self) -> Vec<u8> {
        self.phase
            .iter()
            .map(|p| (p / TAU * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Binary (P5) PGM encoding.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.gray_levels());
        out
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&self.to_pgm())
    }
}

/// Renders `arg(sum_m a_m e^{i m phi})` where `phi` is the azimuth about the
/// grid center. Phase singularities (the center pixel and nodal lines of
/// superpositions) are assigned phase 0.
pub fn render_hologram(mode: &ModeVector, width: usize, height: usize) -> Result<Hologram> {
    if width < 16 || height < 16 {
        return Err(Error::Parameter(format!(
            "hologram needs at least 16x16 pixels, got {width}x{height}"
        )));
    }
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let terms: Vec<(f64, Complex64)> = mode.iter().map(|(m, a)| (m as f64, a)).collect();
    let mut phase = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let dx = x as f64 - cx;
            // image rows grow downwards; flip so the azimuth runs counter-clockwise
            let dy = cy - y as f64;
            if dx == 0.0 && dy == 0.0 {
                phase.push(0.0);
                continue;
            }
            let phi = dy.atan2(dx);
            let field: Complex64 = terms
                .iter()
                .map(|&(m, a)| a * Complex64::from_polar(1.0, m * phi))
                .sum();
            let p = if field.norm() < 1e-12 {
                0.0
            } else {
                field.arg().rem_euclid(TAU)
            };
            phase.push(if p >= TAU { 0.0 } else { p });
        }
    }
    Ok(Hologram {
        width,
        height,
        phase,
    })
}
