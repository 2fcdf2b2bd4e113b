//! Process tomography: a qubit channel as `rho -> sum_lk chi_lk s_l rho s_k`
//! in the Pauli basis `s = (I, X, Y, Z)`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{minimize_bfgs, BfgsOptions, BfgsOutcome};
use super::{dark_sign, measurement_setting, order_six, Basis, TomographyCounts};
use crate::error::{Error, Result};
use crate::protocol::{InputQubit, MubState};
use crate::qmath::{c64, DensityMatrix};

type M2 = Matrix2<Complex64>;
type M4 = Matrix4<Complex64>;

pub const HERMITIAN_TOLERANCE: f64 = 1e-7;
pub const CLOSURE_TOLERANCE: f64 = 1e-6;

fn paulis() -> [M2; 4] {
    let (o, l, i) = (c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 1.0));
    [
        M2::new(l, o, o, l),
        M2::new(o, l, l, o),
        M2::new(o, -i, i, o),
        M2::new(l, o, o, -l),
    ]
}

fn to_m2(rho: &DensityMatrix) -> Result<M2> {
    if rho.dim() != 2 {
        return Err(Error::Dimension { expected: 2, found: rho.dim() });
    }
    let e = rho.entries();
    Ok(M2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]))
}

/// `sum_lk chi_lk s_k s_l`; the identity for a trace-preserving map.
fn closure(chi: &M4) -> M2 {
    let s = paulis();
    let mut out = M2::zeros();
    for l in 0..4 {
        for k in 0..4 {
            out += s[k] * s[l] * chi[(l, k)];
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct ProcessMatrix {
    chi: M4,
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for ProcessMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if rows.len() != 4 || rows.iter().any(|r| r.len() != 4) {
            return Err(Error::InvalidProcess("chi must be 4x4".into()));
        }
        Self::new(M4::from_fn(|l, k| c64(rows[l][k][0], rows[l][k][1])))
    }
}

impl From<ProcessMatrix> for Vec<Vec<[f64; 2]>> {
    fn from(p: ProcessMatrix) -> Self {
        (0..4).map(|l| (0..4).map(|k| [p.chi[(l, k)].re, p.chi[(l, k)].im]).collect()).collect()
    }
}

impl ProcessMatrix {
    pub fn new(chi: M4) -> Result<Self> {
        let p = Self { chi };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        let mut chi = M4::zeros();
        chi[(0, 0)] = c64(1.0, 0.0);
        Self { chi }
    }

    /// `(1 - eps) rho + eps I/2`.
    pub fn depolarizing(eps: f64) -> Result<Self> {
        if !(0.0..=4.0 / 3.0).contains(&eps) {
            return Err(Error::Probability { name: "depolarizing strength", value: eps });
        }
        let d = [1.0 - 0.75 * eps, 0.25 * eps, 0.25 * eps, 0.25 * eps];
        Self::new(M4::from_fn(|l, k| if l == k { c64(d[l], 0.0) } else { c64(0.0, 0.0) }))
    }

    /// Channel with Kraus operators `K_m = sum_l a_ml s_l`.
    pub fn from_kraus(kraus: &[M2]) -> Result<Self> {
        let s = paulis();
        let mut chi = M4::zeros();
        for k in kraus {
            let a: Vec<Complex64> = s.iter().map(|p| (p * k).trace() * 0.5).collect();
            for l in 0..4 {
                for m in 0..4 {
                    chi[(l, m)] += a[l] * a[m].conj();
                }
            }
        }
        Self::new(chi)
    }

    pub fn entries(&self) -> &M4 {
        &self.chi
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (self.chi + self.chi.adjoint()) * c64(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Frobenius distance of `sum chi_lk s_k s_l` from the identity.
    pub fn closure_residual(&self) -> f64 {
        (closure(&self.chi) - M2::identity()).norm()
    }

    pub fn validate(&self) -> Result<()> {
        if self.chi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidProcess("non-finite entry".into()));
        }
        let herm = (self.chi - self.chi.adjoint()).norm();
        if herm > HERMITIAN_TOLERANCE {
            return Err(Error::InvalidProcess(format!("not Hermitian (deviation {herm:e})")));
        }
        let min = self.eigenvalues()[0];
        if min < -HERMITIAN_TOLERANCE {
            return Err(Error::InvalidProcess(format!("negative eigenvalue {min:e}")));
        }
        let tr = self.chi.trace();
        if (tr - c64(1.0, 0.0)).norm() > CLOSURE_TOLERANCE {
            return Err(Error::InvalidProcess(format!("trace {tr} != 1")));
        }
        let res = self.closure_residual();
        if res > CLOSURE_TOLERANCE {
            return Err(Error::InvalidProcess(format!("not trace preserving (residual {res:e})")));
        }
        Ok(())
    }

    fn apply_m2(&self, rho: &M2) -> M2 {
        let s = paulis();
        let mut out = M2::zeros();
        for l in 0..4 {
            for k in 0..4 {
                out += s[l] * rho * s[k] * self.chi[(l, k)];
            }
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let out = self.apply_m2(&to_m2(rho)?);
        DensityMatrix::new(DMatrix::from_iterator(2, 2, out.iter().copied()), rho.labels().to_vec())
    }
}

/// `tr(chi_ideal chi)` with the identity as ideal process.
pub fn process_fidelity(chi: &ProcessMatrix) -> f64 {
    chi.chi[(0, 0)].re.clamp(0.0, 1.0)
}

#[derive(Clone, Debug)]
struct Setting {
    /// `c_lk = tr(E s_l rho_in s_k)` with `E` the dark-outcome effect.
    coeffs: M4,
    dark: f64,
    bright: f64,
}

/// Likelihood data for the six inputs in three bases.
#[derive(Clone, Debug)]
pub struct ProcessData {
    settings: Vec<Setting>,
    total: f64,
}

fn dark_effect(basis: Basis) -> M2 {
    let u = measurement_setting(basis);
    let e = u.entries();
    let u = M2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]);
    let mut p0 = M2::zeros();
    p0[(0, 0)] = c64(1.0, 0.0);
    u.adjoint() * p0 * u
}

fn coefficients(input: MubState, basis: Basis) -> M4 {
    let rho = to_m2(&InputQubit::from(input).ideal_state().density()).expect("qubit");
    let e = dark_effect(basis);
    let s = paulis();
    M4::from_fn(|l, k| (e * s[l] * rho * s[k]).trace())
}

impl ProcessData {
    fn build(weights: Vec<(MubState, Basis, f64, f64)>) -> Self {
        let settings: Vec<Setting> = weights
            .into_iter()
            .map(|(m, b, dark, bright)| Setting { coeffs: coefficients(m, b), dark, bright })
            .collect();
        let total = settings.iter().map(|s| s.dark + s.bright).sum();
        Self { settings, total }
    }

    pub fn from_counts(counts: &[TomographyCounts]) -> Result<Self> {
        let six = order_six(counts, |c| c.input)?;
        let mut w = Vec::with_capacity(18);
        for c in six {
            c.validate()?;
            for b in Basis::ALL {
                let n = c.get(b);
                w.push((c.input, b, n.dark as f64, n.bright as f64));
            }
        }
        Ok(Self::build(w))
    }

    /// Infinite-statistics data: outcome frequencies are the exact probabilities.
    pub fn from_states(states: &[(MubState, DensityMatrix)]) -> Result<Self> {
        let six = order_six(states, |s| s.0)?;
        let mut w = Vec::with_capacity(18);
        for (m, rho) in six {
            for b in Basis::ALL {
                let p = super::dark_probability(rho, b)?;
                w.push((*m, b, p, 1.0 - p));
            }
        }
        Ok(Self::build(w))
    }

    /// Negative log-likelihood per setting.
    pub fn negative_log_likelihood(&self, chi: &ProcessMatrix) -> f64 {
        self.nll(&chi.chi)
    }

    fn nll(&self, chi: &M4) -> f64 {
        let mut acc = 0.0;
        for s in &self.settings {
            let p = chi.component_mul(&s.coeffs).sum().re.clamp(1e-15, 1.0 - 1e-15);
            acc -= s.dark * p.ln() + s.bright * (1.0 - p).ln();
        }
        acc * self.settings.len() as f64 / self.total
    }

    /// Pauli transfer matrix estimate from the (unrescaled) output Bloch vectors.
    fn bloch_outputs(&self) -> [[f64; 3]; 6] {
        let mut out = [[0.0; 3]; 6];
        for (i, chunk) in self.settings.chunks(3).enumerate() {
            for (k, (s, b)) in chunk.iter().zip(Basis::ALL).enumerate() {
                out[i][k] = dark_sign(b) * (s.dark - s.bright) / (s.dark + s.bright);
            }
        }
        out
    }
}

/// Pauli transfer matrix from output Bloch vectors ordered as [`MubState::ALL`].
pub fn transfer_matrix(outputs: &[[f64; 3]; 6]) -> Matrix4<f64> {
    let mut r = Matrix4::zeros();
    r[(0, 0)] = 1.0;
    for i in 0..3 {
        let (plus, minus) = (outputs[2 * i], outputs[2 * i + 1]);
        for j in 0..3 {
            r[(j + 1, i + 1)] = (plus[j] - minus[j]) / 2.0;
            r[(j + 1, 0)] += (plus[j] + minus[j]) / 6.0;
        }
    }
    r
}

/// Solves `R_ij = tr(s_i E(s_j))/2` for `chi`.
pub fn chi_from_transfer(r: &Matrix4<f64>) -> M4 {
    let s = paulis();
    let b = DMatrix::from_fn(16, 16, |row, col| {
        let (i, j) = (row / 4, row % 4);
        let (l, k) = (col / 4, col % 4);
        (s[i] * s[l] * s[j] * s[k]).trace() * 0.5
    });
    let rhs = DVector::from_fn(16, |row, _| c64(r[(row / 4, row % 4)], 0.0));
    let x = b.lu().solve(&rhs).expect("Pauli superoperator basis is invertible");
    M4::from_fn(|l, k| x[4 * l + k])
}

/// Unconstrained linear inversion; the result need not be positive.
pub fn linear_inversion(data: &ProcessData) -> M4 {
    chi_from_transfer(&transfer_matrix(&data.bloch_outputs()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub starts: usize,
    pub seed: u64,
    pub bfgs: BfgsOptions,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { starts: 8, seed: 0, bfgs: BfgsOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessFit {
    pub chi: ProcessMatrix,
    pub process_fidelity: f64,
    pub negative_log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub best_start: usize,
    pub starts: usize,
}

const OFF_DIAGONAL: [(usize, usize); 6] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];

fn lower_triangular(theta: &DVector<f64>) -> M4 {
    let mut t = M4::zeros();
    for i in 0..4 {
        t[(i, i)] = c64(theta[i], 0.0);
    }
    for (n, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        t[(i, j)] = c64(theta[4 + 2 * n], theta[5 + 2 * n]);
    }
    t
}

fn inverse_sqrt(s: &M2) -> Option<M2> {
    let det = s.determinant().re;
    let tr = s.trace().re;
    if !(det > 0.0 && tr > 0.0) {
        return None;
    }
    let sd = det.sqrt();
    let root = (s + M2::identity() * c64(sd, 0.0)) / c64((tr + 2.0 * sd).sqrt(), 0.0);
    root.try_inverse()
}

/// Maps 16 reals to a CPTP `chi`: `T T^dag` is positive, then the Kraus
/// operators are right-multiplied by `S^{-1/2}` with `S = sum K^dag K`.
fn chi_from_params(theta: &DVector<f64>) -> Option<M4> {
    let t = lower_triangular(theta);
    let raw = t * t.adjoint();
    let s_inv = inverse_sqrt(&closure(&raw))?;
    let p = paulis();
    let m = M4::from_fn(|j, l| (p[j] * p[l] * s_inv).trace() * 0.5);
    let chi = m * raw * m.adjoint();
    Some((chi + chi.adjoint()) * c64(0.5, 0.0))
}

fn params_from_chi(chi: &M4) -> Option<DVector<f64>> {
    let h = (chi + chi.adjoint()) * c64(0.5, 0.0) + M4::identity() * c64(1e-3, 0.0);
    let l = h.cholesky()?.unpack();
    let mut theta = DVector::zeros(16);
    for i in 0..4 {
        theta[i] = l[(i, i)].re;
    }
    for (n, &(i, j)) in OFF_DIAGONAL.iter().enumerate() {
        theta[4 + 2 * n] = l[(i, j)].re;
        theta[5 + 2 * n] = l[(i, j)].im;
    }
    let norm = theta.norm();
    Some(theta / norm)
}

fn starting_point(index: usize, seed: u64, data: &ProcessData) -> DVector<f64> {
    match index {
        0 => {
            let mut theta = DVector::zeros(16);
            theta[0] = 1.0;
            for i in 1..4 {
                theta[i] = 0.1;
            }
            theta
        }
        1 => {
            let lin = linear_inversion(data);
            // Clip negative eigenvalues before factorizing.
            let h = (lin + lin.adjoint()) * c64(0.5, 0.0);
            let eig = h.symmetric_eigen();
            let clipped = eig.eigenvalues.map(|v| c64(v.max(0.0), 0.0));
            let psd = eig.eigenvectors * M4::from_diagonal(&clipped) * eig.eigenvectors.adjoint();
            params_from_chi(&psd).unwrap_or_else(|| starting_point(0, seed, data))
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let theta: DVector<f64> = DVector::from_fn(16, |_, _| StandardNormal.sample(&mut rng));
            let norm = theta.norm();
            theta / norm
        }
    }
}

fn objective(data: &ProcessData, theta: &DVector<f64>) -> f64 {
    let Some(chi) = chi_from_params(theta) else {
        return f64::INFINITY;
    };
    // The map is invariant under rescaling theta; pin the scale.
    let radial = theta.norm_squared() - 1.0;
    data.nll(&chi) + 1e-3 * radial * radial
}

/// Maximum-likelihood `chi` over CPTP maps, best of several seeded starts.
pub fn reconstruct_process(data: &ProcessData, options: &MleOptions) -> Result<ProcessFit> {
    let starts = options.starts.max(1);
    let runs: Vec<_> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let x0 = starting_point(i, options.seed, data);
            minimize_bfgs(|x| objective(data, x), x0, &options.bfgs)
        })
        .collect();
    let (best_start, best) = runs
        .iter()
        .enumerate()
        .fold(None::<(usize, &BfgsOutcome)>, |acc, (i, r)| match acc {
            Some((_, b)) if b.value <= r.value => acc,
            _ => Some((i, r)),
        })
        .expect("at least one start");
    let chi = chi_from_params(&best.x)
        .ok_or_else(|| Error::InvalidProcess("optimizer ended on a singular map".into()))?;
    let chi = ProcessMatrix::new(chi)?;
    Ok(ProcessFit {
        process_fidelity: process_fidelity(&chi),
        negative_log_likelihood: data.nll(&chi.chi),
        chi,
        converged: best.converged,
        iterations: best.iterations,
        gradient_norm: best.gradient_norm,
        best_start,
        starts,
    })
}
