//! Cascaded up-conversion and down-conversion source model.
//!
//! The classical 1550 nm beam and the 795 nm beam add their charges in the
//! sum-frequency stage; the up-converted beam then pumps down-conversion,
//! which emits pairs `sum_m c_m |m>_s |l_p - m>_i`.

use std::collections::BTreeMap;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::modes::{ModeVector, OamIndex};
use crate::state::{TwoQubitState, Vector4c};
use crate::{Error, Result};

/// Default Gaussian width; its integer-sampled FWHM is close to 5 modes.
pub const DEFAULT_SIGMA: f64 = 2.12;

/// Signal and idler wavelength tags in nm.
pub const SIGNAL_NM: u32 = 795;
pub const IDLER_NM: u32 = 1550;

/// Charge carried by the up-converted pump: charges add in sum-frequency
/// generation.
pub fn sfg_pump_oam(l_classical_1550: OamIndex, l_pump_795: OamIndex) -> OamIndex {
    OamIndex(l_classical_1550.0 + l_pump_795.0)
}

/// Pair amplitudes `c_m` for signal charge `m` (idler `l_p - m`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpectrumJson", into = "SpectrumJson")]
pub struct SpiralSpectrum {
    l_p: OamIndex,
    sigma: f64,
    amplitudes: BTreeMap<i32, Complex64>,
    truncation: u32,
}

impl SpiralSpectrum {
    /// Arbitrary spectrum, normalized on construction. Every signal index `m`
    /// and its idler partner `l_p - m` must lie within the truncation.
    /// `sigma` is set to the RMS width of `|c_m|^2` about `l_p / 2`.
    pub fn from_amplitudes<I>(l_p: OamIndex, amplitudes: I, truncation: u32) -> Result<Self>
    where
        I: IntoIterator<Item = (i32, Complex64)>,
    {
        let amps = collect_pairs(l_p, amplitudes, truncation)?;
        let center = l_p.0 as f64 / 2.0;
        let sigma = amps
            .iter()
            .map(|(&m, a)| a.norm_sqr() * (m as f64 - center).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(SpiralSpectrum {
            l_p,
            sigma,
            amplitudes: amps,
            truncation,
        })
    }

    pub fn l_p(&self) -> OamIndex {
        self.l_p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truncation(&self) -> u32 {
        self.truncation
    }

    pub fn amplitude(&self, m: i32) -> Complex64 {
        self.amplitudes.get(&m).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, Complex64)> + '_ {
        self.amplitudes.iter().map(|(&m, &a)| (m, a))
    }

    /// `|c_m|^2`.
    pub fn weight(&self, m: i32) -> f64 {
        self.amplitude(m).norm_sqr()
    }

    pub fn total_weight(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }
}

fn collect_pairs<I>(
    l_p: OamIndex,
    amplitudes: I,
    truncation: u32,
) -> Result<BTreeMap<i32, Complex64>>
where
    I: IntoIterator<Item = (i32, Complex64)>,
{
    let mut amps: BTreeMap<i32, Complex64> = BTreeMap::new();
    for (m, a) in amplitudes {
        OamIndex(m).checked(truncation)?;
        OamIndex(l_p.0 - m).checked(truncation)?;
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::Parameter(format!("non-finite amplitude at m = {m}")));
        }
        *amps.entry(m).or_default() += a;
    }
    let norm = amps.values().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Parameter("spectrum has no weight".into()));
    }
    for a in amps.values_mut() {
        *a /= norm;
    }
    Ok(amps)
}

/// Real, non-negative Gaussian spectrum `|c_m|^2 ~ exp(-(m - l_p/2)^2 / 2 sigma^2)`
/// over every `m` with both `m` and `l_p - m` inside `[-M, M]`.
pub fn gaussian_spiral_spectrum(
    l_p: OamIndex,
    sigma: f64,
    truncation: u32,
) -> Result<SpiralSpectrum> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if l_p.0.unsigned_abs() > truncation {
        return Err(Error::Parameter(format!(
            "pump charge {l_p} exceeds truncation {truncation}"
        )));
    }
    let m_lo = (-(truncation as i32)).max(l_p.0 - truncation as i32);
    let m_hi = (truncation as i32).min(l_p.0 + truncation as i32);
    let center = l_p.0 as f64 / 2.0;
    // log-weights shifted by their maximum so very narrow spectra stay finite
    let logw: Vec<(i32, f64)> = (m_lo..=m_hi)
        .map(|m| (m, -(m as f64 - center).powi(2) / (2.0 * sigma * sigma)))
        .collect();
    let peak = logw
        .iter()
        .map(|&(_, w)| w)
        .fold(f64::NEG_INFINITY, f64::max);
    let amps = collect_pairs(
        l_p,
        logw.into_iter()
            .map(|(m, w)| (m, Complex64::new(((w - peak) / 2.0).exp(), 0.0))),
        truncation,
    )?;
    Ok(SpiralSpectrum {
        l_p,
        sigma,
        amplitudes: amps,
        truncation,
    })
}

#[derive(Serialize, Deserialize)]
struct SpectrumJson {
    l_p: i32,
    sigma: f64,
    amplitudes: Vec<AmplitudeJson>,
}

#[derive(Serialize, Deserialize)]
struct AmplitudeJson {
    m: i32,
    re: f64,
    im: f64,
}

impl From<SpiralSpectrum> for SpectrumJson {
    fn from(s: SpiralSpectrum) -> Self {
        SpectrumJson {
            l_p: s.l_p.0,
            sigma: s.sigma,
            amplitudes: s
                .amplitudes
                .iter()
                .map(|(&m, a)| AmplitudeJson {
                    m,
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }
}

impl TryFrom<SpectrumJson> for SpiralSpectrum {
    type Error = Error;

    fn try_from(j: SpectrumJson) -> Result<Self> {
        if !(j.sigma > 0.0 && j.sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be positive, got {}",
                j.sigma
            )));
        }
        let truncation = j
            .amplitudes
            .iter()
            .map(|a| a.m.unsigned_abs().max((j.l_p - a.m).unsigned_abs()))
            .max()
            .unwrap_or(0)
            .max(j.l_p.unsigned_abs());
        let amps = collect_pairs(
            OamIndex(j.l_p),
            j.amplitudes
                .iter()
                .map(|a| (a.m, Complex64::new(a.re, a.im))),
            truncation,
        )?;
        Ok(SpiralSpectrum {
            l_p: OamIndex(j.l_p),
            sigma: j.sigma,
            amplitudes: amps,
            truncation,
        })
    }
}

/// Two-photon pure state `sum_m c_m |m, 795> |l_p - m, 1550>`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointOamState {
    spectrum: SpiralSpectrum,
}

impl JointOamState {
    pub fn spectrum(&self) -> &SpiralSpectrum {
        &self.spectrum
    }

    pub fn l_p(&self) -> OamIndex {
        self.spectrum.l_p
    }

    pub fn signal_nm(&self) -> u32 {
        SIGNAL_NM
    }

    pub fn idler_nm(&self) -> u32 {
        IDLER_NM
    }

    /// Amplitude on `|m_s>|m_i>`; zero unless `m_s + m_i = l_p`.
    pub fn amplitude(&self, m_s: i32, m_i: i32) -> Complex64 {
        if m_s + m_i == self.spectrum.l_p.0 {
            self.spectrum.amplitude(m_s)
        } else {
            Complex64::default()
        }
    }

    /// `(m_s, m_i, amplitude)` for every stored pair.
    pub fn pairs(&self) -> impl Iterator<Item = (i32, i32, Complex64)> + '_ {
        let lp = self.spectrum.l_p.0;
        self.spectrum.iter().map(move |(m, a)| (m, lp - m, a))
    }

    pub fn total_probability(&self) -> f64 {
        self.pairs().map(|(_, _, a)| a.norm_sqr()).sum()
    }

    /// `<a, b | Psi>` for detection modes `a` (signal) and `b` (idler).
    pub fn projection_amplitude(&self, a: &ModeVector, b: &ModeVector) -> Complex64 {
        let lp = self.spectrum.l_p.0;
        a.iter()
            .map(|(m, am)| am.conj() * b.amplitude(lp - m).conj() * self.spectrum.amplitude(m))
            .sum()
    }

    /// Probability that a pair lands in the `{|l>, |-l>}` subspace on both sides.
    pub fn post_selection_probability(&self, l: i32) -> f64 {
        subspace_vector(self, l)
            .map(|v| v.norm_squared())
            .unwrap_or(0.0)
    }
}

pub fn build_joint_state(spectrum: SpiralSpectrum) -> JointOamState {
    JointOamState { spectrum }
}

fn subspace_vector(state: &JointOamState, l: i32) -> Result<Vector4c> {
    if l < 1 {
        return Err(Error::InvalidMode(format!(
            "subspace index must be >= 1, got {l}"
        )));
    }
    let lp = state.l_p().0;
    let slot = |a: i32, b: i32| (usize::from(a == -l) << 1) | usize::from(b == -l);
    let mut psi = Vector4c::zeros();
    for m in [l, -l] {
        let n = lp - m;
        if n == l || n == -l {
            psi[slot(m, n)] += state.spectrum.amplitude(m);
        }
    }
    Ok(psi)
}

/// Restricts the pair state to `{|l>, |-l>}` on both photons and renormalizes.
pub fn post_select(state: &JointOamState, l: i32) -> Result<TwoQubitState> {
    let psi = subspace_vector(state, l)?;
    if psi.norm_squared() == 0.0 {
        return Err(Error::EmptySubspace(l as u32));
    }
    TwoQubitState::pure(psi, l as u32)
}

/// Werner mixing `(1 - p) rho + p I / 4`.
pub fn apply_white_noise(state: &TwoQubitState, p: f64) -> Result<TwoQubitState> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!(
            "white-noise fraction {p} outside [0, 1]"
        )));
    }
    let mixed = state.rho().scale(1.0 - p) + Matrix4::identity().scale(p / 4.0);
    TwoQubitState::new(mixed, state.l())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pump_charge_adds() {
        assert_eq!(sfg_pump_oam(OamIndex(0), OamIndex(0)), OamIndex(0));
        assert_eq!(sfg_pump_oam(OamIndex(-1), OamIndex(0)), OamIndex(-1));
        assert_eq!(sfg_pump_oam(OamIndex(2), OamIndex(3)), OamIndex(5));
    }

    #[test]
    fn gaussian_is_symmetric_for_zero_pump() {
        let s = gaussian_spiral_spectrum(OamIndex(0), 1.2, 5).unwrap();
        for m in 0..=5 {
            assert_eq!(s.amplitude(m), s.amplitude(-m));
        }
        assert!((s.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_gaussian_is_single_mode() {
        let s = gaussian_spiral_spectrum(OamIndex(0), 1e-6, 5).unwrap();
        assert!((s.weight(0) - 1.0).abs() < 1e-12);
        for m in 1..=5 {
            assert!(s.amplitude(m).norm() < 1e-12);
            assert!(s.amplitude(-m).norm() < 1e-12);
        }
        // odd pump: two degenerate peaks instead of an underflow
        let s = gaussian_spiral_spectrum(OamIndex(-1), 1e-6, 5).unwrap();
        assert!((s.weight(0) - 0.5).abs() < 1e-12);
        assert!((s.weight(-1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gaussian_range_respects_truncation() {
        let s = gaussian_spiral_spectrum(OamIndex(2), 2.0, 4).unwrap();
        let ms: Vec<i32> = s.iter().map(|(m, _)| m).collect();
        assert_eq!(ms, (-2..=4).collect::<Vec<_>>());
    }

    #[test]
    fn gaussian_parameter_errors() {
        assert!(matches!(
            gaussian_spiral_spectrum(OamIndex(0), 0.0, 5),
            Err(Error::Parameter(_))
        ));
        assert!(gaussian_spiral_spectrum(OamIndex(0), -1.0, 5).is_err());
        assert!(gaussian_spiral_spectrum(OamIndex(6), 1.0, 5).is_err());
    }

    #[test]
    fn shift_covariance_closed_form() {
        // ratios to the central weight follow the same exponent for any pump
        let sigma = 1.7;
        for lp in [-3, -1, 0, 2, 4] {
            let s = gaussian_spiral_spectrum(OamIndex(lp), sigma, 10).unwrap();
            let center = lp as f64 / 2.0;
            let (m0, w0) = s
                .iter()
                .map(|(m, a)| (m, a.norm_sqr()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            for (m, a) in s.iter() {
                let expect = (-((m as f64 - center).powi(2) - (m0 as f64 - center).powi(2))
                    / (2.0 * sigma * sigma))
                    .exp();
                assert!((a.norm_sqr() / w0 - expect).abs() < 1e-12);
            }
        }
        // even pumps: exact shifted copy of the l_p = 0 ratios
        let base = gaussian_spiral_spectrum(OamIndex(0), sigma, 10).unwrap();
        let shifted = gaussian_spiral_spectrum(OamIndex(4), sigma, 10).unwrap();
        for m in -5..=5 {
            let r0 = base.weight(m) / base.weight(0);
            let r1 = shifted.weight(m + 2) / shifted.weight(2);
            assert!((r0 - r1).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_state_conserves_charge() {
        let s = gaussian_spiral_spectrum(OamIndex(-1), 2.12, 10).unwrap();
        let j = build_joint_state(s);
        assert!((j.total_probability() - 1.0).abs() < 1e-12);
        for (ms, mi, _) in j.pairs() {
            assert_eq!(ms + mi, -1);
        }
        for ms in -10..=10 {
            for mi in -10..=10 {
                if ms + mi != -1 {
                    assert_eq!(j.amplitude(ms, mi), Complex64::default());
                }
            }
        }
    }

    #[test]
    fn single_mode_is_product_state() {
        let s = SpiralSpectrum::from_amplitudes(OamIndex(3), [(0, Complex64::new(1.0, 0.0))], 10)
            .unwrap();
        let j = build_joint_state(s);
        assert_eq!(j.amplitude(0, 3), Complex64::new(1.0, 0.0));
        assert_eq!(j.pairs().count(), 1);
    }

    #[test]
    fn symmetric_spectrum_pairs_are_symmetric() {
        let j = build_joint_state(gaussian_spiral_spectrum(OamIndex(0), 2.12, 10).unwrap());
        for m in 1..=10 {
            assert_eq!(j.amplitude(m, -m), j.amplitude(-m, m));
        }
    }

    #[test]
    fn post_select_gives_bell_state() {
        let j = build_joint_state(gaussian_spiral_spectrum(OamIndex(0), 2.12, 10).unwrap());
        for l in 1..=3 {
            let s = post_select(&j, l).unwrap();
            assert!((s.fidelity_to_phi() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn post_select_unbalanced_schmidt_weights() {
        // (2, 1)/sqrt(5) on (|1,-1>, |-1,1>)
        let s = SpiralSpectrum::from_amplitudes(
            OamIndex(0),
            [
                (1, Complex64::new(2.0, 0.0)),
                (-1, Complex64::new(1.0, 0.0)),
            ],
            10,
        )
        .unwrap();
        let q = post_select(&build_joint_state(s), 1).unwrap();
        let w = q.schmidt_weights();
        assert!((w[0] - 0.8).abs() < 1e-12);
        assert!((w[1] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn post_select_empty_subspace() {
        let s = SpiralSpectrum::from_amplitudes(
            OamIndex(0),
            [
                (0, Complex64::new(1.0, 0.0)),
                (1, Complex64::new(1.0, 0.0)),
                (-1, Complex64::new(1.0, 0.0)),
            ],
            10,
        )
        .unwrap();
        let j = build_joint_state(s);
        assert_eq!(post_select(&j, 2), Err(Error::EmptySubspace(2)));
        assert!(matches!(post_select(&j, 0), Err(Error::InvalidMode(_))));
    }

    #[test]
    fn post_select_odd_pump() {
        let j = build_joint_state(gaussian_spiral_spectrum(OamIndex(-1), 2.12, 10).unwrap());
        assert_eq!(post_select(&j, 1), Err(Error::EmptySubspace(1)));
        // l_p = 2l keeps the |l, l> pair only
        let j = build_joint_state(gaussian_spiral_spectrum(OamIndex(2), 2.12, 10).unwrap());
        let q = post_select(&j, 1).unwrap();
        assert!((q.rho()[(0, 0)].re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn white_noise_limits() {
        let phi = TwoQubitState::phi(1);
        assert_eq!(apply_white_noise(&phi, 0.0).unwrap().rho(), phi.rho());
        let mixed = apply_white_noise(&phi, 1.0).unwrap();
        assert!((mixed.rho() - Matrix4::identity().scale(0.25)).norm() < 1e-15);
        assert!(apply_white_noise(&phi, 1.2).is_err());
        assert!(apply_white_noise(&phi, -0.1).is_err());
    }

    #[test]
    fn spectrum_json_schema() {
        let s = gaussian_spiral_spectrum(OamIndex(0), 1.5, 3).unwrap();
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["l_p"], 0);
        assert_eq!(v["sigma"], 1.5);
        assert_eq!(v["amplitudes"].as_array().unwrap().len(), 7);
        assert_eq!(v["amplitudes"][0]["m"], -3);
        assert!(v["amplitudes"][0]["re"].is_f64());
        assert!(v["amplitudes"][0]["im"].is_f64());
        // loading renormalizes, which may move the last bit
        let back: SpiralSpectrum = serde_json::from_value(v).unwrap();
        assert_eq!(back.l_p(), s.l_p());
        assert_eq!(back.sigma(), s.sigma());
        assert_eq!(back.truncation(), s.truncation());
        for (m, a) in s.iter() {
            assert!((back.amplitude(m) - a).norm() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn white_noise_keeps_state_physical(p in 0.0f64..=1.0, l in 1u32..4) {
            let s = apply_white_noise(&TwoQubitState::phi(l), p).unwrap();
            prop_assert!((s.rho().trace().re - 1.0).abs() < 1e-12);
            prop_assert!(crate::state::hermiticity_defect(s.rho()) == 0.0);
            prop_assert!(s.eigenvalues()[0] >= p / 4.0 - 1e-12);
            // <Phi|(1-p)rho + p I/4|Phi> = 1 - 3p/4
            prop_assert!((s.fidelity_to_phi() - (1.0 - 0.75 * p)).abs() < 1e-12);
        }

        #[test]
        fn gaussian_normalized(lp in -4i32..=4, sigma in 0.3f64..6.0) {
            let s = gaussian_spiral_spectrum(OamIndex(lp), sigma, 10).unwrap();
            prop_assert!((s.total_weight() - 1.0).abs() < 1e-12);
        }
    }
}
