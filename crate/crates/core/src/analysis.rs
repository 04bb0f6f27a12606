//! Estimators run on count records: fringe visibility, CHSH correlations with
//! Poisson bootstrap errors, and the spiral bandwidth of the source.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::measurement::{chsh_angles, OamGrid, Setting, Tally};
use crate::par::{map_indices, Execution};
use crate::rng::{poisson, seeded_rng, split_seed};
use crate::{Error, Result};

/// Resampling controls shared by the bootstrap estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        BootstrapOptions {
            resamples: 1000,
            seed: 0,
            exec: Execution::default(),
        }
    }
}

impl BootstrapOptions {
    pub fn with_seed(seed: u64) -> Self {
        BootstrapOptions {
            seed,
            ..Self::default()
        }
    }
}

/// Least-squares fit of `C(theta) = A cos^2[l (theta - phi)] + B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub l: u32,
    pub amplitude: f64,
    pub offset: f64,
    /// Fringe maximum, reduced to `[0, pi/l)`.
    pub phase: f64,
    /// `A / (A + 2B)`, the `(max - min)/(max + min)` of the fitted curve.
    pub visibility: f64,
    /// Set when the data carry no modulation.
    pub degenerate: bool,
}

impl FringeFit {
    pub fn curve(&self, theta: f64) -> f64 {
        self.amplitude * (self.l as f64 * (theta - self.phase)).cos().powi(2) + self.offset
    }

    /// Two-column CSV `theta,fitted_counts`.
    pub fn curve_csv(&self, thetas: &[f64]) -> String {
        let mut out = String::from("theta,fitted_counts\n");
        for &t in thetas {
            out.push_str(&format!("{t},{}\n", self.curve(t)));
        }
        out
    }
}

/// Fits a sector-state fringe. The signal hologram angle is read from each
/// record's first setting; at least six records spanning a full period
/// `pi / l` are required.
pub fn fit_fringe<R: Tally>(records: &[R], l: u32) -> Result<FringeFit> {
    if l == 0 {
        return Err(Error::InvalidMode("fringe fit needs l >= 1".into()));
    }
    let mut pts = Vec::with_capacity(records.len());
    for r in records {
        match *r.setting_a() {
            Setting::Sector { l: lr, theta } if lr == l => pts.push((theta, r.value())),
            _ => {
                return Err(Error::InsufficientData(format!(
                    "fringe records need l = {l} sector settings"
                )))
            }
        }
    }
    if pts.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "{} fringe records, need at least 6",
            pts.len()
        )));
    }
    let period = PI / l as f64;
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < period - 1e-9 {
        return Err(Error::InsufficientSpan {
            span: hi - lo,
            period,
        });
    }

    let vmax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let vmin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    if vmax - vmin <= 1e-12 * vmax.abs().max(1.0) {
        return Ok(FringeFit {
            l,
            amplitude: 0.0,
            offset: mean,
            phase: 0.0,
            visibility: 0.0,
            degenerate: true,
        });
    }

    // A cos^2(l(t - phi)) + B = (B + A/2) + (A/2) cos(2l t - 2l phi): linear in
    // (1, cos 2lt, sin 2lt)
    let k = 2.0 * l as f64;
    let design = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (k * pts[i].0).cos(),
        _ => (k * pts[i].0).sin(),
    });
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|p| p.1));
    let coef = design
        .svd(true, true)
        .solve(&y, 1e-14)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let half_amp = coef[1].hypot(coef[2]);
    let amplitude = 2.0 * half_amp;
    let offset = (coef[0] - half_amp).max(0.0);
    let phase = (coef[2].atan2(coef[1]) / k).rem_euclid(period);
    let denom = amplitude + 2.0 * offset;
    let degenerate = half_amp <= 1e-12 * coef[0].abs().max(1.0) || denom <= 0.0;
    let visibility = if degenerate {
        0.0
    } else {
        (amplitude / denom).clamp(0.0, 1.0)
    };
    Ok(FringeFit {
        l,
        amplitude,
        offset,
        phase: if phase >= period { 0.0 } else { phase },
        visibility,
        degenerate,
    })
}

/// `(C00 + C11 - C10 - C01) / (C00 + C11 + C10 + C01)`, where `C11` has both
/// holograms advanced by `pi/2l` and `C10`, `C01` only one of them.
pub fn correlation_e(c_00: f64, c_11: f64, c_10: f64, c_01: f64) -> Result<f64> {
    let total = c_00 + c_11 + c_10 + c_01;
    if !(total > 0.0) {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((c_00 + c_11 - c_10 - c_01) / total)
}

/// CHSH parameter with its bootstrap standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChshResult {
    pub l: u32,
    pub s: f64,
    pub stderr: f64,
    /// `E` for the four angle pairs in `settings` order.
    pub e_values: [f64; 4],
    /// `(theta_A, theta_B)`, `(theta_A, theta'_B)`, `(theta'_A, theta_B)`,
    /// `(theta'_A, theta'_B)`.
    pub settings: [(f64, f64); 4],
}

fn same_angle(a: f64, b: f64, period: f64) -> bool {
    let d = (a - b).rem_euclid(period);
    d.min(period - d) < 1e-9
}

/// Pulls the 16 CHSH counts out of `records`, in the order of
/// [`crate::measurement::chsh_settings`].
fn chsh_counts<R: Tally>(records: &[R], l: u32) -> Result<[f64; 16]> {
    let period = PI / l as f64;
    let q = period / 2.0;
    let lookup = |ta: f64, tb: f64| -> Result<f64> {
        records
            .iter()
            .find(|r| match (*r.setting_a(), *r.setting_b()) {
                (Setting::Sector { l: la, theta: a }, Setting::Sector { l: lb, theta: b }) => {
                    la == l && lb == l && same_angle(a, ta, period) && same_angle(b, tb, period)
                }
                _ => false,
            })
            .map(|r| r.value())
            .ok_or(Error::IncompleteSettings {
                theta_a: ta,
                theta_b: tb,
            })
    };
    let mut out = [0.0; 16];
    for (k, &(ta, tb)) in chsh_angles(l).iter().enumerate() {
        let quad = [(ta, tb), (ta + q, tb + q), (ta + q, tb), (ta, tb + q)];
        for (j, &(a, b)) in quad.iter().enumerate() {
            out[4 * k + j] = lookup(a, b)?;
        }
    }
    Ok(out)
}

fn s_from_counts(c: &[f64; 16]) -> Result<(f64, [f64; 4])> {
    let mut e = [0.0; 4];
    for (k, ek) in e.iter_mut().enumerate() {
        let q = &c[4 * k..4 * k + 4];
        *ek = correlation_e(q[0], q[1], q[2], q[3])?;
    }
    Ok((e[0] - e[1] + e[2] + e[3], e))
}

/// `S = E(a, b) - E(a, b') + E(a', b) + E(a', b')` without an error estimate.
pub fn chsh_value<R: Tally>(records: &[R], l: u32) -> Result<(f64, [f64; 4])> {
    if l == 0 {
        return Err(Error::InvalidMode("CHSH needs l >= 1".into()));
    }
    s_from_counts(&chsh_counts(records, l)?)
}

/// CHSH parameter from the 16 sector-setting records. The standard error is
/// the spread of `S` over parametric bootstrap replicas in which every count
/// is redrawn from a Poisson law with the observed value as mean.
pub fn chsh<R: Tally>(records: &[R], l: u32, opts: &BootstrapOptions) -> Result<ChshResult> {
    if l == 0 {
        return Err(Error::InvalidMode("CHSH needs l >= 1".into()));
    }
    let counts = chsh_counts(records, l)?;
    let (s, e_values) = s_from_counts(&counts)?;
    let replicas: Vec<Option<f64>> = map_indices(opts.exec, opts.resamples, |i| {
        let mut rng = seeded_rng(split_seed(opts.seed, i as u64));
        let mut c = [0.0; 16];
        for (dst, &mean) in c.iter_mut().zip(&counts) {
            *dst = poisson(mean, &mut rng) as f64;
        }
        s_from_counts(&c).ok().map(|(s, _)| s)
    });
    let stderr = std_dev(replicas.into_iter().flatten());
    Ok(ChshResult {
        l,
        s,
        stderr,
        e_values,
        settings: chsh_angles(l),
    })
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two
/// values.
pub(crate) fn std_dev<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Full width at half maximum of samples on a unit-spaced grid, with linear
/// interpolation between neighbours. Points beyond the ends count as zero,
/// so an isolated spike has width 1.
pub fn fwhm(points: &[(i32, f64)]) -> Option<f64> {
    let (k, peak) = points
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p.1))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = peak / 2.0;
    let cross = |x_out: f64, y_out: f64, x_in: f64, y_in: f64| {
        x_out + (half - y_out) / (y_in - y_out) * (x_in - x_out)
    };

    let mut j = k;
    while j > 0 && points[j - 1].1 > half {
        j -= 1;
    }
    let (x_in, y_in) = (points[j].0 as f64, points[j].1);
    let left = if j == 0 {
        cross(x_in - 1.0, 0.0, x_in, y_in)
    } else {
        cross(points[j - 1].0 as f64, points[j - 1].1, x_in, y_in)
    };

    let mut j = k;
    while j + 1 < points.len() && points[j + 1].1 > half {
        j += 1;
    }
    let (x_in, y_in) = (points[j].0 as f64, points[j].1);
    let right = if j + 1 == points.len() {
        cross(x_in + 1.0, 0.0, x_in, y_in)
    } else {
        cross(points[j + 1].0 as f64, points[j + 1].1, x_in, y_in)
    };
    Some(right - left)
}

/// Spiral bandwidth in modes: FWHM of the `m_s + m_i = l_p` anti-diagonal
/// after subtracting the mean of all other entries.
pub fn spiral_bandwidth(expected: &OamGrid<f64>, l_p: i32) -> Result<f64> {
    let diag = expected.anti_diagonal(l_p);
    let mut off_sum = 0.0;
    let mut off_n = 0usize;
    for (r, &ms) in expected.indices.iter().enumerate() {
        for (c, &mi) in expected.indices.iter().enumerate() {
            if ms + mi != l_p {
                off_sum += expected.values[r][c];
                off_n += 1;
            }
        }
    }
    let background = if off_n > 0 {
        off_sum / off_n as f64
    } else {
        0.0
    };
    let pts: Vec<(i32, f64)> = diag
        .iter()
        .map(|&(ms, _, v)| (ms, v - background))
        .collect();
    fwhm(&pts).ok_or(Error::EmptyDiagonal(l_p))
}
