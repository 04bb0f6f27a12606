//! Two-qubit density matrices on the post-selected `{|l>, |-l>}` subspace.
//!
//! Basis order is `{|l,l>, |l,-l>, |-l,l>, |-l,-l>}` with the signal photon
//! first.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::modes::ModeVector;
use crate::{Error, Result};

pub type Matrix4c = Matrix4<Complex64>;
pub type Vector4c = Vector4<Complex64>;
pub type Vector2c = Vector2<Complex64>;

pub(crate) const HERMITIAN_TOL: f64 = 1e-12;
pub(crate) const TRACE_TOL: f64 = 1e-12;
pub(crate) const PSD_TOL: f64 = 1e-9;

/// Physical density matrix of a signal/idler pair restricted to one
/// two-dimensional OAM subspace per photon.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4c,
    l: u32,
}

impl TwoQubitState {
    /// Validates hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix4c, l: u32) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidMode("subspace index l must be >= 1".into()));
        }
        let herm = hermiticity_defect(&rho);
        if herm > HERMITIAN_TOL {
            return Err(Error::NonPhysical(format!("hermiticity defect {herm:e}")));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::NonPhysical(format!("trace {tr}")));
        }
        let min = min_eigenvalue(&rho);
        if min < -PSD_TOL {
            return Err(Error::NonPhysical(format!("eigenvalue {min:e}")));
        }
        Ok(TwoQubitState { rho, l })
    }

    /// `|psi><psi|` after normalizing `psi`.
    pub fn pure(psi: Vector4c, l: u32) -> Result<Self> {
        let n = psi.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NonPhysical("zero state vector".into()));
        }
        let psi = psi.unscale(n);
        Self::new(psi * psi.adjoint(), l)
    }

    /// `(|l,-l> + |-l,l>) / sqrt(2)`.
    pub fn phi(l: u32) -> Self {
        Self::pure(phi_vector(), l).expect("valid Bell vector")
    }

    pub fn maximally_mixed(l: u32) -> Self {
        Self::new(Matrix4c::identity().scale(0.25), l).expect("I/4 is physical")
    }

    /// Random state of the given rank (1..=4): `G G^dag / tr` with `G` a 4 x rank
    /// complex Gaussian matrix.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, rank: usize, l: u32) -> Self {
        let rank = rank.clamp(1, 4);
        let mut g = nalgebra::DMatrix::<Complex64>::zeros(4, rank);
        for v in g.iter_mut() {
            *v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let m = &g * g.adjoint();
        let mut rho = Matrix4c::from_fn(|i, j| m[(i, j)]);
        rho = hermitian_part(&rho);
        let tr = rho.trace().re;
        Self::new(rho.unscale(tr), l).expect("Gram matrix is physical")
    }

    pub fn rho(&self) -> &Matrix4c {
        &self.rho
    }

    pub fn l(&self) -> u32 {
        self.l
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 4] {
        eigenvalues(&self.rho)
    }

    /// `<Phi_l| rho |Phi_l>`.
    pub fn fidelity_to_phi(&self) -> f64 {
        let phi = phi_vector();
        (phi.adjoint() * self.rho * phi)[(0, 0)].re
    }

    /// Eigenvalues (descending) of the signal photon's reduced state. For a
    /// pure state these are the squared Schmidt coefficients.
    pub fn schmidt_weights(&self) -> [f64; 2] {
        let r = &self.rho;
        let red = Matrix2::new(
            r[(0, 0)] + r[(1, 1)],
            r[(0, 2)] + r[(1, 3)],
            r[(2, 0)] + r[(3, 1)],
            r[(2, 2)] + r[(3, 3)],
        );
        let ev = red.symmetric_eigenvalues();
        let (a, b) = (ev[0], ev[1]);
        if a >= b {
            [a, b]
        } else {
            [b, a]
        }
    }

    /// `<a,b| rho |a,b>` for single-photon qubit vectors `a`, `b` given in the
    /// `(|l>, |-l>)` basis.
    pub fn joint_expectation(&self, a: &Vector2c, b: &Vector2c) -> f64 {
        let psi = kron(a, b);
        (psi.adjoint() * self.rho * psi)[(0, 0)].re
    }

    /// Trace distance `|rho - sigma|_1 / 2`.
    pub fn trace_distance(&self, other: &Matrix4c) -> f64 {
        trace_distance(&self.rho, other)
    }
}

/// `(0, 1, 1, 0) / sqrt(2)` in the pair basis.
pub fn phi_vector() -> Vector4c {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    Vector4c::new(z, h, h, z)
}

pub fn kron(a: &Vector2c, b: &Vector2c) -> Vector4c {
    Vector4c::new(a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
}

/// Components of `v` on `(|l>, |-l>)`. Weight elsewhere is dropped.
pub fn qubit_components(v: &ModeVector, l: u32) -> Vector2c {
    let l = l as i32;
    Vector2c::new(v.amplitude(l), v.amplitude(-l))
}

pub fn hermitian_part(m: &Matrix4c) -> Matrix4c {
    (m + m.adjoint()).scale(0.5)
}

pub fn hermiticity_defect(m: &Matrix4c) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Ascending eigenvalues of the Hermitian part of `m`.
pub fn eigenvalues(m: &Matrix4c) -> [f64; 4] {
    let ev = hermitian_part(m).symmetric_eigenvalues();
    let mut out = [ev[0], ev[1], ev[2], ev[3]];
    out.sort_by(f64::total_cmp);
    out
}

pub fn min_eigenvalue(m: &Matrix4c) -> f64 {
    eigenvalues(m)[0]
}

pub fn trace_distance(a: &Matrix4c, b: &Matrix4c) -> f64 {
    0.5 * eigenvalues(&(a - b)).iter().map(|e| e.abs()).sum::<f64>()
}

/// Clips eigenvalues below `floor` up to `floor` and rescales to unit trace.
pub fn project_psd(m: &Matrix4c, floor: f64) -> Matrix4c {
    let eig = hermitian_part(m).symmetric_eigen();
    let vals = eig.eigenvalues.map(|e| Complex64::new(e.max(floor), 0.0));
    let v = &eig.eigenvectors;
    let out = v * Matrix4c::from_diagonal(&vals) * v.adjoint();
    let out = hermitian_part(&out);
    let tr = out.trace().re;
    out.unscale(tr)
}

/// Serializable `4 x 4` array of `{re, im}` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrixJson {
    pub l: u32,
    pub rho: Vec<Vec<ComplexJson>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<&TwoQubitState> for DensityMatrixJson {
    fn from(s: &TwoQubitState) -> Self {
        let rho = (0..4)
            .map(|i| {
                (0..4)
                    .map(|j| {
                        let z = s.rho[(i, j)];
                        ComplexJson { re: z.re, im: z.im }
                    })
                    .collect()
            })
            .collect();
        DensityMatrixJson { l: s.l, rho }
    }
}

impl TryFrom<DensityMatrixJson> for TwoQubitState {
    type Error = Error;

    fn try_from(j: DensityMatrixJson) -> Result<Self> {
        if j.rho.len() != 4 || j.rho.iter().any(|r| r.len() != 4) {
            return Err(Error::Serialization("density matrix must be 4x4".into()));
        }
        let m = Matrix4c::from_fn(|i, j_| Complex64::new(j.rho[i][j_].re, j.rho[i][j_].im));
        TwoQubitState::new(m, j.l)
    }
}

/// Basis labels matching the row/column order of the exported matrices.
pub fn basis_labels(l: u32) -> [String; 4] {
    [
        format!("|{l},{l}>"),
        format!("|{l},-{l}>"),
        format!("|-{l},{l}>"),
        format!("|-{l},-{l}>"),
    ]
}

/// Real or imaginary part as CSV with labelled rows and columns.
pub fn density_csv(s: &TwoQubitState, imaginary: bool) -> String {
    let labels = basis_labels(s.l);
    let mut out = String::from("row");
    for lab in &labels {
        out.push(',');
        out.push_str(lab);
    }
    out.push('\n');
    for (i, lab) in labels.iter().enumerate() {
        out.push_str(lab);
        for j in 0..4 {
            let z = s.rho[(i, j)];
            let v = if imaginary { z.im } else { z.re };
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn phi_is_physical_and_pure() {
        let s = TwoQubitState::phi(1);
        let ev = s.eigenvalues();
        assert!((ev[3] - 1.0).abs() < 1e-12);
        assert!(ev[..3].iter().all(|e| e.abs() < 1e-12));
        assert!((s.fidelity_to_phi() - 1.0).abs() < 1e-12);
        let w = s.schmidt_weights();
        assert!((w[0] - 0.5).abs() < 1e-12 && (w[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_physical() {
        let mut m = Matrix4c::identity().scale(0.25);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(
            TwoQubitState::new(m, 1),
            Err(Error::NonPhysical(_))
        ));
        let m = Matrix4c::identity().scale(0.3);
        assert!(TwoQubitState::new(m, 1).is_err());
        let m = Matrix4c::from_diagonal(&Vector4c::new(
            Complex64::new(1.1, 0.0),
            Complex64::new(-0.1, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        ));
        assert!(TwoQubitState::new(m, 1).is_err());
    }

    #[test]
    fn random_states_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for rank in 1..=4 {
            let s = TwoQubitState::random(&mut rng, rank, 2);
            let ev = s.eigenvalues();
            let nonzero = ev.iter().filter(|&&e| e > 1e-10).count();
            assert_eq!(nonzero, rank);
        }
    }

    #[test]
    fn psd_projection_clips_and_renormalizes() {
        let m = Matrix4c::from_diagonal(&Vector4c::new(
            Complex64::new(0.7, 0.0),
            Complex64::new(0.4, 0.0),
            Complex64::new(-0.1, 0.0),
            Complex64::new(0.0, 0.0),
        ));
        let p = project_psd(&m, 0.0);
        assert!((p.trace().re - 1.0).abs() < 1e-12);
        assert!(min_eigenvalue(&p) > -1e-12);
        assert!((p[(0, 0)].re - 0.7 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_of_orthogonal_pure_states_is_one() {
        let a = TwoQubitState::phi(1);
        let mut psi = Vector4c::zeros();
        psi[0] = Complex64::new(1.0, 0.0);
        let b = TwoQubitState::pure(psi, 1).unwrap();
        assert!((a.trace_distance(b.rho()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = TwoQubitState::random(&mut rng, 3, 2);
        let j = DensityMatrixJson::from(&s);
        let text = serde_json::to_string(&j).unwrap();
        let back: DensityMatrixJson = serde_json::from_str(&text).unwrap();
        let s2 = TwoQubitState::try_from(back).unwrap();
        assert_eq!(s, s2);
    }
}
