//! Two-qubit state tomography in the `{|L> = |l>, |R> = |-l>}` subspace.
//!
//! Each photon is projected onto `|L>`, `|R>`, `(|L> + |R>)/sqrt(2)` and
//! `(|L> - i|R>)/sqrt(2)`; the 16 product settings are inverted either
//! linearly or by maximizing the Poisson likelihood over physical states
//! `rho = T^dag T / tr(T^dag T)` with `T` lower triangular. The unknown
//! brightness `R0 T` is profiled out: for counts `n_k` and
//! `q_k = tr(rho P_k)` the maximizing scale is `sum n / sum q`, leaving
//!
//! ```text
//! L(rho) = sum_k n_k ln q_k - N ln sum_k q_k + const,   N = sum_k n_k.
//! ```

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::{std_dev, BootstrapOptions};
use crate::measurement::{
    expected_records, sample_records, CountRecord, ExpectedRecord, NoiseModel, Setting, Tally,
};
use crate::modes::ModeVector;
use crate::optim::{minimize, BfgsOptions};
use crate::par::map_indices;
use crate::rng::{poisson, seeded_rng, split_seed};
use crate::state::{
    hermitian_part, kron, min_eigenvalue, project_psd, qubit_components, Matrix4c, TwoQubitState,
    Vector2c, Vector4c,
};
use crate::{Error, Result};

/// Number of real parameters of a lower-triangular complex 4x4 `T` with real
/// diagonal.
pub const N_PARAMS: usize = 16;

/// Eigenvalue floor applied to the linear estimate before it seeds the
/// likelihood ascent.
pub const INIT_EIGEN_FLOOR: f64 = 1e-6;

/// Single-photon analysis states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QubitBasis {
    /// `|l>`
    L,
    /// `|-l>`
    R,
    /// `(|L> + |R>)/sqrt(2)`
    D,
    /// `(|L> - i|R>)/sqrt(2)`
    C,
}

impl QubitBasis {
    pub const ALL: [QubitBasis; 4] = [QubitBasis::L, QubitBasis::R, QubitBasis::D, QubitBasis::C];

    pub fn vector(self) -> Vector2c {
        let z = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        match self {
            QubitBasis::L => Vector2c::new(one, z),
            QubitBasis::R => Vector2c::new(z, one),
            QubitBasis::D => Vector2c::new(h, h),
            QubitBasis::C => Vector2c::new(h, Complex64::new(0.0, -FRAC_1_SQRT_2)),
        }
    }

    pub fn label(self) -> char {
        match self {
            QubitBasis::L => 'L',
            QubitBasis::R => 'R',
            QubitBasis::D => 'D',
            QubitBasis::C => 'C',
        }
    }
}

/// One tomography setting: an analysis state per photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorPair {
    pub l: u32,
    pub a: QubitBasis,
    pub b: QubitBasis,
    pub label: String,
}

impl ProjectorPair {
    pub fn new(l: u32, a: QubitBasis, b: QubitBasis) -> Self {
        ProjectorPair {
            l,
            a,
            b,
            label: format!("{}{}", a.label(), b.label()),
        }
    }

    pub fn settings(&self) -> (Setting, Setting) {
        (
            Setting::Qubit {
                l: self.l,
                basis: self.a,
            },
            Setting::Qubit {
                l: self.l,
                basis: self.b,
            },
        )
    }

    pub fn side_a(&self) -> Result<ModeVector> {
        self.settings().0.mode_vector()
    }

    pub fn side_b(&self) -> Result<ModeVector> {
        self.settings().1.mode_vector()
    }
}

/// The 16 product settings, signal basis varying slowest in the order
/// `L, R, D, C`.
pub fn tomo_basis(l: i32) -> Result<Vec<ProjectorPair>> {
    if l < 1 {
        return Err(Error::InvalidMode(format!(
            "tomography needs l >= 1, got {l}"
        )));
    }
    let l = l as u32;
    Ok(QubitBasis::ALL
        .iter()
        .flat_map(|&a| {
            QubitBasis::ALL
                .iter()
                .map(move |&b| ProjectorPair::new(l, a, b))
        })
        .collect())
}

fn basis_settings(l: u32) -> Result<Vec<(Setting, Setting)>> {
    Ok(tomo_basis(l as i32)?
        .iter()
        .map(ProjectorPair::settings)
        .collect())
}

pub fn expected_tomo_counts(
    rho: &TwoQubitState,
    noise: &NoiseModel,
    integration_time: f64,
) -> Result<Vec<ExpectedRecord>> {
    expected_records(rho, &basis_settings(rho.l())?, noise, integration_time)
}

/// Poisson-sampled counts for the 16 settings. Eigenmode analysis states use
/// `eta_eigen`, superpositions `eta_super`.
pub fn simulate_tomo_counts(
    rho: &TwoQubitState,
    noise: &NoiseModel,
    integration_time: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    Ok(sample_records(
        &expected_tomo_counts(rho, noise, integration_time)?,
        seed,
    ))
}

/// Projector vectors `a (x) b` and counts extracted from records.
#[derive(Debug, Clone)]
struct TomoData {
    l: u32,
    vectors: Vec<Vector4c>,
    counts: Vec<f64>,
}

impl TomoData {
    fn from_tallies<R: Tally>(records: &[R]) -> Result<Self> {
        let l = records
            .iter()
            .find_map(|r| r.setting_a().subspace())
            .ok_or_else(|| Error::InsufficientData("no qubit settings in records".into()))?;
        let mut vectors = Vec::with_capacity(records.len());
        let mut counts = Vec::with_capacity(records.len());
        for r in records {
            let a = r.setting_a().mode_vector()?;
            let b = r.setting_b().mode_vector()?;
            for v in [&a, &b] {
                let inside = qubit_components(v, l).norm_squared();
                if (inside - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidProjector(format!(
                        "setting leaves the l = {l} subspace"
                    )));
                }
            }
            let n = r.value();
            if !(n >= 0.0 && n.is_finite()) {
                return Err(Error::InsufficientData(format!("invalid count {n}")));
            }
            vectors.push(kron(&qubit_components(&a, l), &qubit_components(&b, l)));
            counts.push(n);
        }
        if counts.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InsufficientData("no counts recorded".into()));
        }
        Ok(TomoData { l, vectors, counts })
    }

    fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    fn with_counts(&self, counts: Vec<f64>) -> Self {
        TomoData {
            counts,
            ..self.clone()
        }
    }
}

fn pauli(k: usize) -> Matrix2<Complex64> {
    let z = Complex64::new(0.0, 0.0);
    let o = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match k {
        0 => Matrix2::new(o, z, z, o),
        1 => Matrix2::new(z, o, o, z),
        2 => Matrix2::new(z, -i, i, z),
        _ => Matrix2::new(o, z, z, -o),
    }
}

fn pauli_pair(mu: usize) -> Matrix4c {
    pauli(mu / 4).kronecker(&pauli(mu % 4))
}

/// Unconstrained linear inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEstimate {
    /// Hermitian with unit trace; not necessarily positive.
    pub rho: Matrix4c,
    pub l: u32,
    pub min_eigenvalue: f64,
    /// Fitted brightness (counts for a unit-trace state).
    pub scale: f64,
}

impl LinearEstimate {
    pub fn is_physical(&self) -> bool {
        self.min_eigenvalue >= -crate::state::PSD_TOL
    }
}

fn linear_from_data(data: &TomoData) -> Result<LinearEstimate> {
    let rows = data.vectors.len();
    if rows < N_PARAMS {
        return Err(Error::RankDeficient { rank: rows });
    }
    let paulis: Vec<Matrix4c> = (0..16).map(pauli_pair).collect();
    // expected count k = sum_mu x_mu <v_k|sigma_mu|v_k> / 4 with x = N r
    let design = DMatrix::from_fn(rows, 16, |k, mu| {
        let v = &data.vectors[k];
        (v.adjoint() * paulis[mu] * v)[(0, 0)].re / 4.0
    });
    let svd = design.svd(true, true);
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * smax)
        .count();
    if rank < 16 {
        return Err(Error::RankDeficient { rank });
    }
    let y = DVector::from_column_slice(&data.counts);
    let x = svd
        .solve(&y, 1e-12)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let scale = x[0];
    if !(scale > 0.0) {
        return Err(Error::InsufficientData(
            "non-positive fitted brightness".into(),
        ));
    }
    let mut rho = Matrix4c::zeros();
    for (mu, p) in paulis.iter().enumerate() {
        rho += p.scale(x[mu] / (4.0 * scale));
    }
    let rho = hermitian_part(&rho);
    Ok(LinearEstimate {
        min_eigenvalue: min_eigenvalue(&rho),
        rho,
        l: data.l,
        scale,
    })
}

/// Solves the 16 linear equations `n_k = N tr(rho P_k)` for `rho` and the
/// brightness `N`. The settings are read from the records, so duplicated
/// settings surface as a rank deficiency.
pub fn linear_reconstruct<R: Tally>(records: &[R]) -> Result<LinearEstimate> {
    linear_from_data(&TomoData::from_tallies(records)?)
}

/// Profiled Poisson likelihood of tomography counts in the `T`
/// parameterization.
#[derive(Debug, Clone)]
pub struct PoissonLikelihood {
    data: TomoData,
}

impl PoissonLikelihood {
    pub fn new<R: Tally>(records: &[R]) -> Result<Self> {
        Ok(PoissonLikelihood {
            data: TomoData::from_tallies(records)?,
        })
    }

    /// `-L(rho(t)) / N`, the quantity minimized.
    pub fn objective(&self, t: &DVector<f64>) -> f64 {
        self.objective_and_gradient(t).0
    }

    pub fn gradient(&self, t: &DVector<f64>) -> DVector<f64> {
        self.objective_and_gradient(t).1
    }

    pub fn objective_and_gradient(&self, t: &DVector<f64>) -> (f64, DVector<f64>) {
        let tm = t_matrix(t);
        let total = self.data.total();
        let ws: Vec<Vector4c> = self.data.vectors.iter().map(|v| tm * v).collect();
        let q: Vec<f64> = ws.iter().map(|w| w.norm_squared()).collect();
        let qsum: f64 = q.iter().sum();

        let mut value = total * qsum.ln();
        for (&n, &qk) in self.data.counts.iter().zip(&q) {
            if n > 0.0 {
                value -= n * qk.ln();
            }
        }
        value /= total;

        let mut grad = DVector::zeros(N_PARAMS);
        for ((w, v), (&n, &qk)) in ws
            .iter()
            .zip(&self.data.vectors)
            .zip(self.data.counts.iter().zip(&q))
        {
            let data_term = if n > 0.0 { n / qk } else { 0.0 };
            let c = (total / qsum - data_term) / total;
            for (i, j, slot) in param_slots() {
                let z = w[i].conj() * v[j];
                grad[slot] += c * 2.0 * z.re;
                if i != j {
                    grad[slot + 1] -= c * 2.0 * z.im;
                }
            }
        }
        (value, grad)
    }

    /// Profiled log-likelihood of a state, omitting the `ln n_k!` constants.
    pub fn log_likelihood(&self, rho: &Matrix4c) -> f64 {
        let q: Vec<f64> = self
            .data
            .vectors
            .iter()
            .map(|v| (v.adjoint() * rho * v)[(0, 0)].re.max(0.0))
            .collect();
        let qsum: f64 = q.iter().sum();
        let scale = self.data.total() / qsum;
        self.data
            .counts
            .iter()
            .zip(&q)
            .map(|(&n, &qk)| {
                let mu = scale * qk;
                if n > 0.0 {
                    n * mu.ln() - mu
                } else {
                    -mu
                }
            })
            .sum()
    }
}

/// `(row, col, first parameter slot)` of every free entry of `T`. The
/// diagonal takes slots 0..4 (real); each strictly lower entry takes two
/// consecutive slots (real, imaginary) from 4 on.
fn param_slots() -> impl Iterator<Item = (usize, usize, usize)> {
    let diag = (0..4).map(|i| (i, i, i));
    let lower = (1..4)
        .flat_map(|i| (0..i).map(move |j| (i, j)))
        .enumerate()
        .map(|(k, (i, j))| (i, j, 4 + 2 * k));
    diag.chain(lower)
}

pub fn t_matrix(t: &DVector<f64>) -> Matrix4c {
    let mut m = Matrix4c::zeros();
    for (i, j, slot) in param_slots() {
        m[(i, j)] = if i == j {
            Complex64::new(t[slot], 0.0)
        } else {
            Complex64::new(t[slot], t[slot + 1])
        };
    }
    m
}

/// `T^dag T / tr(T^dag T)`.
pub fn rho_from_params(t: &DVector<f64>) -> Matrix4c {
    let tm = t_matrix(t);
    let r = tm.adjoint() * tm;
    let tr = r.trace().re;
    hermitian_part(&r.unscale(tr))
}

/// Parameters with `T^dag T = rho` for a positive-definite `rho`.
pub fn params_from_rho(rho: &Matrix4c) -> Result<DVector<f64>> {
    // Cholesky of the index-reversed matrix J rho J = L L^dag gives
    // T = J L^dag J, which is lower triangular with T^dag T = rho
    let rev = Matrix4c::from_fn(|i, j| rho[(3 - i, 3 - j)]);
    let chol = hermitian_part(&rev)
        .cholesky()
        .ok_or_else(|| Error::NonPhysical("initial state is not positive definite".into()))?;
    let l = chol.l();
    let ldag = l.adjoint();
    let tm = Matrix4c::from_fn(|i, j| ldag[(3 - i, 3 - j)]);
    let mut t = DVector::zeros(N_PARAMS);
    for (i, j, slot) in param_slots() {
        t[slot] = tm[(i, j)].re;
        if i != j {
            t[slot + 1] = tm[(i, j)].im;
        }
    }
    Ok(t)
}

/// Maximum-likelihood reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographyResult {
    pub rho_hat: TwoQubitState,
    /// Fidelity to `(|l,-l> + |-l,l>)/sqrt(2)`.
    pub fidelity: f64,
    /// Bootstrap standard error; zero unless requested.
    pub fidelity_stderr: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

/// Serializable summary written next to the reconstructed matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub l: u32,
    pub fidelity: f64,
    pub fidelity_stderr: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl From<&TomographyResult> for FidelityReport {
    fn from(r: &TomographyResult) -> Self {
        FidelityReport {
            l: r.rho_hat.l(),
            fidelity: r.fidelity,
            fidelity_stderr: r.fidelity_stderr,
            log_likelihood: r.log_likelihood,
            converged: r.converged,
            iterations: r.iterations,
        }
    }
}

fn mle_from_data(data: &TomoData, init: Option<&Matrix4c>) -> Result<TomographyResult> {
    let start = match init {
        Some(m) => project_psd(m, INIT_EIGEN_FLOOR),
        None => project_psd(&linear_from_data(data)?.rho, INIT_EIGEN_FLOOR),
    };
    let lik = PoissonLikelihood { data: data.clone() };
    let t0 = params_from_rho(&start)?;
    let min = minimize(
        |t| lik.objective_and_gradient(t),
        t0,
        &BfgsOptions::default(),
    );
    let rho = rho_from_params(&min.x);
    let rho_hat = TwoQubitState::new(rho, data.l)?;
    Ok(TomographyResult {
        fidelity: rho_hat.fidelity_to_phi(),
        log_likelihood: lik.log_likelihood(rho_hat.rho()),
        rho_hat,
        fidelity_stderr: 0.0,
        converged: min.converged,
        iterations: min.iterations,
        gradient_norm: min.grad_norm,
    })
}

/// Maximizes the profiled Poisson likelihood over physical states. Without
/// `init` the ascent starts from the linear estimate with eigenvalues clipped
/// to [`INIT_EIGEN_FLOOR`]. Convergence means a gradient norm below `1e-8` on
/// the count-normalized objective within `10^4` iterations; otherwise the
/// best point is still returned with `converged = false`.
pub fn mle_reconstruct<R: Tally>(
    records: &[R],
    init: Option<&Matrix4c>,
) -> Result<TomographyResult> {
    mle_from_data(&TomoData::from_tallies(records)?, init)
}

/// `<Phi_l| rho |Phi_l>`; zero when `rho` lives in a different subspace.
pub fn fidelity(rho: &TwoQubitState, l: u32) -> f64 {
    if rho.l() != l {
        return 0.0;
    }
    rho.fidelity_to_phi()
}

/// Standard deviation of the reconstructed fidelity over Poisson resamples of
/// the observed counts. Replica `i` draws from subseed `split_seed(seed, i)`.
pub fn bootstrap_fidelity_error<R: Tally>(records: &[R], opts: &BootstrapOptions) -> Result<f64> {
    let data = TomoData::from_tallies(records)?;
    let fids: Vec<Option<f64>> = map_indices(opts.exec, opts.resamples, |i| {
        let mut rng = seeded_rng(split_seed(opts.seed, i as u64));
        let counts = data
            .counts
            .iter()
            .map(|&n| poisson(n, &mut rng) as f64)
            .collect();
        mle_from_data(&data.with_counts(counts), None)
            .ok()
            .map(|r| r.fidelity)
    });
    Ok(std_dev(fids.into_iter().flatten()))
}

/// Reconstruction plus bootstrap error on the fidelity.
pub fn reconstruct_with_error<R: Tally>(
    records: &[R],
    opts: &BootstrapOptions,
) -> Result<TomographyResult> {
    let mut r = mle_reconstruct(records, None)?;
    r.fidelity_stderr = bootstrap_fidelity_error(records, opts)?;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Execution;
    use crate::source::apply_white_noise;
    use crate::state::trace_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact(rho: &TwoQubitState, r0: f64) -> Vec<ExpectedRecord> {
        expected_tomo_counts(rho, &NoiseModel::ideal(r0), 1.0).unwrap()
    }

    #[test]
    fn basis_shape() {
        let b = tomo_basis(2).unwrap();
        assert_eq!(b.len(), 16);
        assert_eq!(b[0].label, "LL");
        assert_eq!(b[6].label, "RD");
        assert_eq!(b[15].label, "CC");
        for p in &b {
            assert!(p.side_a().unwrap().is_normalized(1e-12));
            assert!(p.side_b().unwrap().is_normalized(1e-12));
        }
        assert!(tomo_basis(0).is_err());
    }

    #[test]
    fn joint_projectors_are_informationally_complete() {
        // rank of the 16x16 Gram matrix tr(P_j P_k) = |<v_j|v_k>|^2
        let vs: Vec<Vector4c> = tomo_basis(1)
            .unwrap()
            .iter()
            .map(|p| kron(&p.a.vector(), &p.b.vector()))
            .collect();
        let gram = DMatrix::from_fn(16, 16, |j, k| (vs[j].adjoint() * vs[k])[(0, 0)].norm_sqr());
        let sv = gram.svd(false, false).singular_values;
        let rank = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
        assert_eq!(rank, 16);
    }

    #[test]
    fn simulated_counts_for_bell_state() {
        let phi = TwoQubitState::phi(2);
        let noise = NoiseModel {
            accidental_rate: 0.0,
            ..NoiseModel::ideal(1000.0)
        };
        let recs = expected_tomo_counts(&phi, &noise, 10.0).unwrap();
        assert!(recs[0].mean.abs() < 1e-9); // LL
        assert!((recs[1].mean - 5000.0).abs() < 1e-9); // LR: R0 T / 2
    }

    #[test]
    fn efficiency_ratio_depresses_superposition_settings() {
        let phi = TwoQubitState::phi(1);
        let base = NoiseModel::ideal(1000.0);
        let lossy = NoiseModel {
            eta_super: 0.7,
            ..base
        };
        let a = expected_tomo_counts(&phi, &base, 1.0).unwrap();
        let b = expected_tomo_counts(&phi, &lossy, 1.0).unwrap();
        for (k, (x, y)) in a.iter().zip(&b).enumerate() {
            let n_super = [k / 4, k % 4].iter().filter(|&&s| s >= 2).count() as i32;
            assert!((y.mean - x.mean * 0.7f64.powi(n_super)).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_inversion_is_exact_on_expected_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for rank in 1..=4 {
            let s = TwoQubitState::random(&mut rng, rank, 1);
            let est = linear_reconstruct(&exact(&s, 5e4)).unwrap();
            assert!((est.rho - s.rho()).iter().all(|z| z.norm() < 1e-9));
            assert!((est.scale - 5e4).abs() < 1e-6);
        }
        let mixed = TwoQubitState::maximally_mixed(1);
        let est = linear_reconstruct(&exact(&mixed, 100.0)).unwrap();
        assert!((est.rho - mixed.rho()).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn duplicated_settings_are_rank_deficient() {
        let mut recs = exact(&TwoQubitState::phi(1), 100.0);
        recs[3] = recs[2].clone();
        assert!(matches!(
            linear_reconstruct(&recs),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn low_counts_can_give_negative_eigenvalues() {
        let phi = TwoQubitState::phi(1);
        let noise = NoiseModel::ideal(100.0);
        let negative = (0..40u64).any(|seed| {
            let recs = simulate_tomo_counts(&phi, &noise, 1.0, seed).unwrap();
            let est = linear_reconstruct(&recs).unwrap();
            assert!((est.rho.trace().re - 1.0).abs() < 1e-12);
            !est.is_physical()
        });
        assert!(negative);
    }

    #[test]
    fn parameterization_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = TwoQubitState::random(&mut rng, 4, 1);
        let t = params_from_rho(s.rho()).unwrap();
        assert!((rho_from_params(&t) - s.rho())
            .iter()
            .all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = TwoQubitState::random(&mut rng, 4, 1);
        let recs = simulate_tomo_counts(&truth, &NoiseModel::ideal(2e4), 1.0, 4).unwrap();
        let lik = PoissonLikelihood::new(&recs).unwrap();
        for _ in 0..10 {
            let t = DVector::from_fn(N_PARAMS, |_, _| rng.random_range(-1.0..1.0));
            let g = lik.gradient(&t);
            let h = 1e-6;
            for k in 0..N_PARAMS {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp[k] += h;
                tm[k] -= h;
                let fd = (lik.objective(&tp) - lik.objective(&tm)) / (2.0 * h);
                let scale = g.norm().max(1e-12);
                assert!(
                    (fd - g[k]).abs() <= 1e-5 * scale,
                    "k = {k}: {fd} vs {}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn mle_on_pure_bell_state() {
        let phi = TwoQubitState::phi(2);
        let r = mle_reconstruct(&exact(&phi, 1e6), None).unwrap();
        assert!(r.fidelity >= 1.0 - 1e-6, "{r:?}");
        assert!((fidelity(&r.rho_hat, 2) - r.fidelity).abs() < 1e-15);
        assert_eq!(fidelity(&r.rho_hat, 1), 0.0);
    }

    #[test]
    fn mle_dominates_projected_linear_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..10u64 {
            let truth = TwoQubitState::random(&mut rng, 1 + (seed as usize % 4), 1);
            let recs = simulate_tomo_counts(&truth, &NoiseModel::ideal(300.0), 1.0, seed).unwrap();
            let lik = PoissonLikelihood::new(&recs).unwrap();
            let lin = linear_reconstruct(&recs).unwrap();
            let projected = project_psd(&lin.rho, 0.0);
            let r = mle_reconstruct(&recs, None).unwrap();
            assert!(r.log_likelihood >= lik.log_likelihood(&projected) - 1e-9);
        }
    }

    #[test]
    fn mle_agrees_with_interior_linear_estimate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        for seed in 0..20u64 {
            let truth = TwoQubitState::random(&mut rng, 4, 1);
            let recs = simulate_tomo_counts(&truth, &NoiseModel::ideal(1e5), 1.0, seed).unwrap();
            let lin = linear_reconstruct(&recs).unwrap();
            if lin.min_eigenvalue > 1e-3 {
                let r = mle_reconstruct(&recs, None).unwrap();
                assert!(trace_distance(r.rho_hat.rho(), &lin.rho) < 1e-4);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn fidelity_values() {
        assert!((fidelity(&TwoQubitState::phi(1), 1) - 1.0).abs() < 1e-15);
        assert!((fidelity(&TwoQubitState::maximally_mixed(1), 1) - 0.25).abs() < 1e-15);
        let p = 0.3;
        let w = apply_white_noise(&TwoQubitState::phi(1), p).unwrap();
        assert!((fidelity(&w, 1) - (1.0 - 0.75 * p)).abs() < 1e-12);
    }

    #[test]
    fn fidelity_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let a = TwoQubitState::random(&mut rng, 2, 1);
            let b = TwoQubitState::random(&mut rng, 3, 1);
            let alpha: f64 = rng.random();
            let mix =
                TwoQubitState::new(a.rho().scale(alpha) + b.rho().scale(1.0 - alpha), 1).unwrap();
            let lhs = fidelity(&mix, 1);
            let rhs = alpha * fidelity(&a, 1) + (1.0 - alpha) * fidelity(&b, 1);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_error_scaling() {
        // interior state (smallest eigenvalue 0.075) so the positivity
        // boundary does not clip the resampled estimates
        let s = apply_white_noise(&TwoQubitState::phi(1), 0.3).unwrap();
        let opts = BootstrapOptions {
            resamples: 300,
            seed: 9,
            exec: Execution::default(),
        };
        let small = bootstrap_fidelity_error(&exact(&s, 1e4), &opts).unwrap();
        let large = bootstrap_fidelity_error(&exact(&s, 4e4), &opts).unwrap();
        let ratio = small / large;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
        let huge = bootstrap_fidelity_error(&exact(&s, 1e8), &opts).unwrap();
        assert!(huge < 1e-3);
        assert_eq!(
            bootstrap_fidelity_error(&exact(&s, 4e4), &opts).unwrap(),
            large
        );
    }

    #[test]
    fn bootstrap_matches_sequential() {
        let s = apply_white_noise(&TwoQubitState::phi(1), 0.1).unwrap();
        let recs = exact(&s, 1e4);
        let par = BootstrapOptions {
            resamples: 40,
            seed: 1,
            exec: Execution::default(),
        };
        let seq = BootstrapOptions {
            exec: Execution::Sequential,
            ..par
        };
        assert_eq!(
            bootstrap_fidelity_error(&recs, &par).unwrap(),
            bootstrap_fidelity_error(&recs, &seq).unwrap()
        );
    }
}
