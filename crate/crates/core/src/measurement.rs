//! Coincidence rates, detector imperfections and Poisson-sampled count data.
//!
//! A detection setting is a normalized [`ModeVector`] (hologram plus
//! single-mode fiber). The noise model acts on the detection side:
//! misalignment leaks a fraction `eps` of each projector onto copies shifted
//! by one OAM unit (`eps / 2` each way), coupling efficiencies scale the rate
//! per side, and accidentals add a flat floor.

use std::f64::consts::PI;
use std::fmt::Display;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::modes::{ModeVector, SectorState, DEFAULT_TRUNCATION};
use crate::rng::{sample_counts, split_seed};
use crate::source::JointOamState;
use crate::state::{qubit_components, TwoQubitState};
use crate::tomography::QubitBasis;
use crate::{Error, Result};

/// Reference peak coincidences per 10 s for the `(0, 0)` correlation entry.
pub const REFERENCE_PEAK_COUNTS: f64 = 31475.0;
/// Integration time of every reported count.
pub const REFERENCE_INTEGRATION_TIME: f64 = 10.0;

/// Rate scale placing the default source's `(0, 0)` entry at 31475 counts
/// per 10 s under the default noise model (see `default_r0_matches_peak`).
pub const DEFAULT_R0: f64 = 18_451.182_925_664_31;
/// Superposition-hologram coupling efficiency (eigenmode efficiency 1) that
/// brings the l = 2 tomography fidelity to about 0.84.
pub const DEFAULT_ETA_SUPER: f64 = 0.83;

const PROJECTOR_TOL: f64 = 1e-9;

/// Detection-side imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Projector weight leaked to `m +- 1`, in `[0, 0.5]`.
    pub crosstalk_eps: f64,
    /// Flat accidental coincidence rate, counts/s.
    pub accidental_rate: f64,
    /// Coupling efficiency with an eigenmode hologram, `(0, 1]`.
    pub eta_eigen: f64,
    /// Coupling efficiency with a superposition hologram, `(0, 1]`.
    pub eta_super: f64,
    /// Rate scale, counts/s.
    pub r0: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            crosstalk_eps: 0.05,
            accidental_rate: 10.0,
            eta_eigen: 1.0,
            eta_super: DEFAULT_ETA_SUPER,
            r0: DEFAULT_R0,
        }
    }
}

impl NoiseModel {
    /// Perfect detection with rate scale `r0`.
    pub fn ideal(r0: f64) -> Self {
        NoiseModel {
            crosstalk_eps: 0.0,
            accidental_rate: 0.0,
            eta_eigen: 1.0,
            eta_super: 1.0,
            r0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Parameter(format!("{what} = {v} out of range")));
        if !(0.0..=0.5).contains(&self.crosstalk_eps) {
            return bad("crosstalk_eps", self.crosstalk_eps);
        }
        if !(self.accidental_rate >= 0.0 && self.accidental_rate.is_finite()) {
            return bad("accidental_rate", self.accidental_rate);
        }
        if !(self.eta_eigen > 0.0 && self.eta_eigen <= 1.0) {
            return bad("eta_eigen", self.eta_eigen);
        }
        if !(self.eta_super > 0.0 && self.eta_super <= 1.0) {
            return bad("eta_super", self.eta_super);
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return bad("r0", self.r0);
        }
        Ok(())
    }

    fn efficiency(&self, v: &ModeVector) -> f64 {
        if v.is_eigenmode() {
            self.eta_eigen
        } else {
            self.eta_super
        }
    }

    /// Projector after misalignment: `(weight, mode)` terms summing to 1.
    fn leaked(&self, v: &ModeVector) -> Vec<(f64, ModeVector)> {
        let eps = self.crosstalk_eps;
        if eps == 0.0 {
            return vec![(1.0, v.clone())];
        }
        vec![
            (1.0 - eps, v.clone()),
            (eps / 2.0, v.shifted(1)),
            (eps / 2.0, v.shifted(-1)),
        ]
    }
}

/// A source of photon pairs that can be projected onto product settings.
pub trait PairState {
    /// `<a, b| rho |a, b>` with `a` on the signal and `b` on the idler.
    fn joint_probability(&self, a: &ModeVector, b: &ModeVector) -> f64;

    /// Rejects detection modes the state cannot be projected onto.
    fn check_projector(&self, v: &ModeVector) -> Result<()>;
}

impl PairState for JointOamState {
    fn joint_probability(&self, a: &ModeVector, b: &ModeVector) -> f64 {
        self.projection_amplitude(a, b).norm_sqr()
    }

    fn check_projector(&self, _v: &ModeVector) -> Result<()> {
        Ok(())
    }
}

impl PairState for TwoQubitState {
    fn joint_probability(&self, a: &ModeVector, b: &ModeVector) -> f64 {
        let l = self.l();
        self.joint_expectation(&qubit_components(a, l), &qubit_components(b, l))
    }

    fn check_projector(&self, v: &ModeVector) -> Result<()> {
        let l = self.l() as i32;
        match v
            .iter()
            .find(|&(m, a)| m.abs() != l && a.norm_sqr() > 1e-24)
        {
            Some((m, _)) => Err(Error::InvalidProjector(format!(
                "component |{m}> lies outside the l = {l} subspace"
            ))),
            None => Ok(()),
        }
    }
}

/// Coincidence rate (counts/s) for settings `proj_a` (signal) and `proj_b`
/// (idler): `R0 eta_a eta_b <leaked projector> + accidentals`.
pub fn coincidence_rate<S: PairState + ?Sized>(
    state: &S,
    proj_a: &ModeVector,
    proj_b: &ModeVector,
    noise: &NoiseModel,
) -> Result<f64> {
    noise.validate()?;
    for v in [proj_a, proj_b] {
        if !v.is_normalized(PROJECTOR_TOL) {
            return Err(Error::InvalidProjector(format!(
                "norm^2 = {} is not 1",
                v.norm_sqr()
            )));
        }
        state.check_projector(v)?;
    }
    let mut p = 0.0;
    for (wa, a) in noise.leaked(proj_a) {
        for (wb, b) in noise.leaked(proj_b) {
            p += wa * wb * state.joint_probability(&a, &b);
        }
    }
    let eta = noise.efficiency(proj_a) * noise.efficiency(proj_b);
    Ok(noise.r0 * eta * p + noise.accidental_rate)
}

/// One detection setting as dialled on a hologram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Setting {
    /// Eigenmode hologram `|m>`.
    Eigen { m: i32 },
    /// Sector hologram for `{|l>, |-l>}` rotated to `theta` (unreduced).
    Sector { l: u32, theta: f64 },
    /// One of the four tomography states in the `{|l>, |-l>}` qubit.
    Qubit { l: u32, basis: QubitBasis },
}

impl Setting {
    pub fn mode_vector(&self) -> Result<ModeVector> {
        match *self {
            Setting::Eigen { m } => {
                ModeVector::eigenmode(m, DEFAULT_TRUNCATION.max(m.unsigned_abs()))
            }
            Setting::Sector { l, theta } => {
                SectorState::new(l as i32, theta)?.to_mode_vector(DEFAULT_TRUNCATION.max(l))
            }
            Setting::Qubit { l, basis } => {
                if l == 0 {
                    return Err(Error::InvalidMode("qubit subspace needs l >= 1".into()));
                }
                let v = basis.vector();
                ModeVector::new(
                    [(l as i32, v[0]), (-(l as i32), v[1])],
                    DEFAULT_TRUNCATION.max(l),
                )
            }
        }
    }

    /// Hologram angle of a sector setting.
    pub fn theta(&self) -> Option<f64> {
        match *self {
            Setting::Sector { theta, .. } => Some(theta),
            _ => None,
        }
    }

    /// Subspace index for sector and qubit settings.
    pub fn subspace(&self) -> Option<u32> {
        match *self {
            Setting::Sector { l, .. } | Setting::Qubit { l, .. } => Some(l),
            Setting::Eigen { .. } => None,
        }
    }
}

/// Anything carrying a pair of settings and a (possibly fractional) count.
pub trait Tally {
    fn setting_a(&self) -> &Setting;
    fn setting_b(&self) -> &Setting;
    fn integration_time(&self) -> f64;
    fn value(&self) -> f64;
}

/// Sampled coincidences for one pair of settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub integration_time: f64,
    pub counts: u64,
}

/// Mean coincidences for one pair of settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRecord {
    pub setting_a: Setting,
    pub setting_b: Setting,
    pub integration_time: f64,
    pub mean: f64,
}

impl Tally for CountRecord {
    fn setting_a(&self) -> &Setting {
        &self.setting_a
    }
    fn setting_b(&self) -> &Setting {
        &self.setting_b
    }
    fn integration_time(&self) -> f64 {
        self.integration_time
    }
    fn value(&self) -> f64 {
        self.counts as f64
    }
}

impl Tally for ExpectedRecord {
    fn setting_a(&self) -> &Setting {
        &self.setting_a
    }
    fn setting_b(&self) -> &Setting {
        &self.setting_b
    }
    fn integration_time(&self) -> f64 {
        self.integration_time
    }
    fn value(&self) -> f64 {
        self.mean
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "integration time must be positive, got {t}"
        )))
    }
}

/// Mean counts for every settings pair.
pub fn expected_records<S: PairState + ?Sized>(
    state: &S,
    settings: &[(Setting, Setting)],
    noise: &NoiseModel,
    integration_time: f64,
) -> Result<Vec<ExpectedRecord>> {
    check_time(integration_time)?;
    settings
        .iter()
        .map(|(a, b)| {
            let rate = coincidence_rate(state, &a.mode_vector()?, &b.mode_vector()?, noise)?;
            Ok(ExpectedRecord {
                setting_a: *a,
                setting_b: *b,
                integration_time,
                mean: rate * integration_time,
            })
        })
        .collect()
}

/// Poisson-samples each record; record `i` uses subseed `split_seed(seed, i)`.
pub fn sample_records(expected: &[ExpectedRecord], seed: u64) -> Vec<CountRecord> {
    expected
        .iter()
        .enumerate()
        .map(|(i, e)| CountRecord {
            setting_a: e.setting_a,
            setting_b: e.setting_b,
            integration_time: e.integration_time,
            counts: sample_counts(
                e.mean / e.integration_time,
                e.integration_time,
                split_seed(seed, i as u64),
            ),
        })
        .collect()
}

/// `n` evenly spaced hologram angles covering one full period `[0, pi/l]`.
pub fn default_fringe_grid(l: u32, n: usize) -> Vec<f64> {
    let period = PI / l as f64;
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| period * k as f64 / (n - 1) as f64).collect(),
    }
}

fn fringe_settings(l: u32, theta_b: f64, grid: &[f64]) -> Result<Vec<(Setting, Setting)>> {
    if l == 0 {
        return Err(Error::InvalidMode("fringe scans need l >= 1".into()));
    }
    Ok(grid
        .iter()
        .map(|&ta| {
            (
                Setting::Sector { l, theta: ta },
                Setting::Sector { l, theta: theta_b },
            )
        })
        .collect())
}

/// Mean counts of a sector-state fringe: signal hologram swept over `grid`,
/// idler hologram fixed at `theta_b`.
pub fn expected_fringe<S: PairState + ?Sized>(
    state: &S,
    l: u32,
    theta_b: f64,
    grid: &[f64],
    noise: &NoiseModel,
    integration_time: f64,
) -> Result<Vec<ExpectedRecord>> {
    expected_records(
        state,
        &fringe_settings(l, theta_b, grid)?,
        noise,
        integration_time,
    )
}

/// Sampled sector-state fringe, one record per grid angle.
pub fn fringe_scan<S: PairState + ?Sized>(
    state: &S,
    l: u32,
    theta_b: f64,
    grid: &[f64],
    noise: &NoiseModel,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    let expected = expected_fringe(state, l, theta_b, grid, noise, integration_time)?;
    Ok(sample_records(&expected, seed))
}

/// The four CHSH angle pairs `(theta_A, theta_B)`, `(theta_A, theta'_B)`,
/// `(theta'_A, theta_B)`, `(theta'_A, theta'_B)` with `theta_A = 0`,
/// `theta'_A = pi/4l`, `theta_B = pi/8l`, `theta'_B = 3pi/8l`.
pub fn chsh_angles(l: u32) -> [(f64, f64); 4] {
    let u = PI / l as f64;
    let (ta, tap, tb, tbp) = (0.0, u / 4.0, u / 8.0, 3.0 * u / 8.0);
    [(ta, tb), (ta, tbp), (tap, tb), (tap, tbp)]
}

/// The 16 sector settings needed for CHSH: each angle pair together with its
/// `pi/2l` offsets, in the order `(a, b)`, `(a+, b+)`, `(a+, b)`, `(a, b+)`.
pub fn chsh_settings(l: u32) -> Vec<(Setting, Setting)> {
    let q = PI / (2.0 * l as f64);
    chsh_angles(l)
        .iter()
        .flat_map(|&(ta, tb)| {
            [(ta, tb), (ta + q, tb + q), (ta + q, tb), (ta, tb + q)].map(|(a, b)| {
                (
                    Setting::Sector { l, theta: a },
                    Setting::Sector { l, theta: b },
                )
            })
        })
        .collect()
}

pub fn expected_chsh_scan<S: PairState + ?Sized>(
    state: &S,
    l: u32,
    noise: &NoiseModel,
    integration_time: f64,
) -> Result<Vec<ExpectedRecord>> {
    if l == 0 {
        return Err(Error::InvalidMode("CHSH needs l >= 1".into()));
    }
    expected_records(state, &chsh_settings(l), noise, integration_time)
}

pub fn chsh_scan<S: PairState + ?Sized>(
    state: &S,
    l: u32,
    noise: &NoiseModel,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    Ok(sample_records(
        &expected_chsh_scan(state, l, noise, integration_time)?,
        seed,
    ))
}

/// Square table indexed by OAM charge: `values[row][col]` with rows the
/// signal charge `m_s` and columns the idler charge `m_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OamGrid<T> {
    pub indices: Vec<i32>,
    pub values: Vec<Vec<T>>,
}

impl<T: Copy> OamGrid<T> {
    pub fn get(&self, m_s: i32, m_i: i32) -> Option<T> {
        let r = self.indices.iter().position(|&m| m == m_s)?;
        let c = self.indices.iter().position(|&m| m == m_i)?;
        Some(self.values[r][c])
    }

    /// `(m_s, m_i, value)` along `m_s + m_i = l_p`, increasing `m_s`.
    pub fn anti_diagonal(&self, l_p: i32) -> Vec<(i32, i32, T)> {
        self.indices
            .iter()
            .filter_map(|&ms| self.get(ms, l_p - ms).map(|v| (ms, l_p - ms, v)))
            .collect()
    }
}

impl<T: Display> OamGrid<T> {
    /// CSV with the idler charges as header row and the signal charge leading
    /// each line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m_s\\m_i");
        for m in &self.indices {
            out.push_str(&format!(",{m}"));
        }
        out.push('\n');
        for (m, row) in self.indices.iter().zip(&self.values) {
            out.push_str(&m.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Expected and sampled eigenmode coincidence tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub l_p: i32,
    pub integration_time: f64,
    pub expected: OamGrid<f64>,
    pub sampled: OamGrid<u64>,
}

impl CorrelationMatrix {
    /// CSV rows `m_s,m_i,expected,sampled` along the pump anti-diagonal.
    pub fn anti_diagonal_csv(&self) -> String {
        let mut out = String::from("m_s,m_i,expected,sampled\n");
        let sampled = self.sampled.anti_diagonal(self.l_p);
        for ((ms, mi, e), (_, _, s)) in self
            .expected
            .anti_diagonal(self.l_p)
            .into_iter()
            .zip(sampled)
        {
            out.push_str(&format!("{ms},{mi},{e},{s}\n"));
        }
        out
    }
}

/// Eigenmode coincidences for signal and idler charges over `m_range`.
/// Entry `(row, col)` is sampled with subseed `split_seed(seed, row * n + col)`.
pub fn correlation_matrix(
    state: &JointOamState,
    m_range: RangeInclusive<i32>,
    noise: &NoiseModel,
    integration_time: f64,
    seed: u64,
) -> Result<CorrelationMatrix> {
    check_time(integration_time)?;
    let m_trunc = state.spectrum().truncation();
    let indices: Vec<i32> = m_range.collect();
    if indices.is_empty() {
        return Err(Error::Parameter("empty OAM range".into()));
    }
    let modes = indices
        .iter()
        .map(|&m| ModeVector::eigenmode(m, m_trunc))
        .collect::<Result<Vec<_>>>()?;
    let n = indices.len();
    let mut expected = Vec::with_capacity(n);
    let mut sampled = Vec::with_capacity(n);
    for (r, a) in modes.iter().enumerate() {
        let mut erow = Vec::with_capacity(n);
        let mut srow = Vec::with_capacity(n);
        for (c, b) in modes.iter().enumerate() {
            let rate = coincidence_rate(state, a, b, noise)?;
            erow.push(rate * integration_time);
            srow.push(sample_counts(
                rate,
                integration_time,
                split_seed(seed, (r * n + c) as u64),
            ));
        }
        expected.push(erow);
        sampled.push(srow);
    }
    Ok(CorrelationMatrix {
        l_p: state.l_p().0,
        integration_time,
        expected: OamGrid {
            indices: indices.clone(),
            values: expected,
        },
        sampled: OamGrid {
            indices,
            values: sampled,
        },
    })
}

/// Rate scale `r0` that puts the largest expected eigenmode coincidence over
/// `m_range` (accidentals included) at `target_counts` in `integration_time`.
pub fn calibrate_r0(
    state: &JointOamState,
    m_range: RangeInclusive<i32>,
    noise: &NoiseModel,
    target_counts: f64,
    integration_time: f64,
) -> Result<f64> {
    let unit = NoiseModel {
        r0: 1.0,
        accidental_rate: 0.0,
        ..*noise
    };
    let m = correlation_matrix(state, m_range, &unit, 1.0, 0)?;
    let peak = m
        .expected
        .values
        .iter()
        .flatten()
        .copied()
        .fold(0.0, f64::max);
    let signal = target_counts - noise.accidental_rate * integration_time;
    if peak <= 0.0 || signal <= 0.0 {
        return Err(Error::Parameter("cannot reach target peak".into()));
    }
    Ok(signal / (peak * integration_time))
}

/// Rate scale `r0` that puts the largest expected count over `settings`
/// (accidentals included) at `target_counts` in `integration_time`.
pub fn calibrate_scan_r0<S: PairState + ?Sized>(
    state: &S,
    settings: &[(Setting, Setting)],
    noise: &NoiseModel,
    target_counts: f64,
    integration_time: f64,
) -> Result<f64> {
    let unit = NoiseModel {
        r0: 1.0,
        accidental_rate: 0.0,
        ..*noise
    };
    let peak = expected_records(state, settings, &unit, 1.0)?
        .iter()
        .map(|r| r.mean)
        .fold(0.0, f64::max);
    let signal = target_counts - noise.accidental_rate * integration_time;
    if peak <= 0.0 || signal <= 0.0 {
        return Err(Error::Parameter("cannot reach target peak".into()));
    }
    Ok(signal / (peak * integration_time))
}

/// One line of the fringe-record JSON-lines format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeLine {
    pub l: u32,
    pub theta_a: f64,
    pub theta_b: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub counts: u64,
}

impl TryFrom<&CountRecord> for FringeLine {
    type Error = Error;

    fn try_from(r: &CountRecord) -> Result<Self> {
        match (r.setting_a, r.setting_b) {
            (Setting::Sector { l, theta: ta }, Setting::Sector { l: lb, theta: tb }) if l == lb => {
                Ok(FringeLine {
                    l,
                    theta_a: ta,
                    theta_b: tb,
                    t: r.integration_time,
                    counts: r.counts,
                })
            }
            _ => Err(Error::Serialization(
                "JSON-lines export needs matching sector settings".into(),
            )),
        }
    }
}

impl From<&FringeLine> for CountRecord {
    fn from(f: &FringeLine) -> Self {
        CountRecord {
            setting_a: Setting::Sector {
                l: f.l,
                theta: f.theta_a,
            },
            setting_b: Setting::Sector {
                l: f.l,
                theta: f.theta_b,
            },
            integration_time: f.t,
            counts: f.counts,
        }
    }
}

/// One JSON object per line: `{l, theta_a, theta_b, T, counts}`.
pub fn records_to_jsonl(records: &[CountRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        let line = FringeLine::try_from(r)?;
        out.push_str(
            &serde_json::to_string(&line).map_err(|e| Error::Serialization(e.to_string()))?,
        );
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<CountRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: FringeLine =
                serde_json::from_str(l).map_err(|e| Error::Serialization(e.to_string()))?;
            Ok(CountRecord::from(&f))
        })
        .collect()
}
