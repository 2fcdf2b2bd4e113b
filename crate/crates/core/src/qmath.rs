//! Dense complex linear algebra for at most four qubits.
//!
//! Qubit order is the order of the label list, big-endian: the first label is
//! the most significant bit of a basis index. Structural checks (normalization,
//! Hermiticity, unitarity, idempotence) use the absolute tolerance
//! [`TOLERANCE`].

use std::fmt;
use std::ops::{Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TOLERANCE: f64 = 1e-9;
pub const MAX_QUBITS: usize = 4;

/// Probabilities below this are treated as an impossible projection outcome.
const NULL_PROBABILITY: f64 = 1e-15;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Subsystem identifier attached to each tensor factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    AtomA,
    AtomB,
    PhotonA,
    PhotonB,
    Qubit(u8),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::AtomA => f.write_str("atom_a"),
            Label::AtomB => f.write_str("atom_b"),
            Label::PhotonA => f.write_str("photon_a"),
            Label::PhotonB => f.write_str("photon_b"),
            Label::Qubit(i) => write!(f, "q{i}"),
        }
    }
}

fn check_labels(labels: &[Label]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(Error::TooManyQubits(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(Error::DuplicateLabel(*l));
        }
    }
    Ok(())
}

fn joined_labels(a: &[Label], b: &[Label]) -> Result<Vec<Label>> {
    let labels: Vec<Label> = a.iter().chain(b).copied().collect();
    check_labels(&labels)?;
    Ok(labels)
}

fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::Dimension { expected: dim.next_power_of_two(), found: dim });
    }
    let n = dim.trailing_zeros() as usize;
    if n > MAX_QUBITS {
        return Err(Error::TooManyQubits(n));
    }
    Ok(n)
}

fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn is_hermitian_matrix(m: &DMatrix<Complex64>, tol: f64) -> bool {
    max_abs_diff(m, &m.adjoint()) <= tol
}

/// Tensor product with label concatenation in argument order.
pub trait Kron: Sized {
    fn kron(&self, other: &Self) -> Result<Self>;
}

pub fn kron<T: Kron>(a: &T, b: &T) -> Result<T> {
    a.kron(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: DVector<Complex64>,
    labels: Vec<Label>,
}

impl PureState {
    /// Builds a state from already-normalized amplitudes.
    pub fn new(amplitudes: Vec<Complex64>, labels: Vec<Label>) -> Result<Self> {
        let state = Self::raw(amplitudes, labels)?;
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(state)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(amplitudes: Vec<Complex64>, labels: Vec<Label>) -> Result<Self> {
        Self::raw(amplitudes, labels)?.renormalize()
    }

    fn raw(amplitudes: Vec<Complex64>, labels: Vec<Label>) -> Result<Self> {
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if amplitudes.len() != expected {
            return Err(Error::Dimension { expected, found: amplitudes.len() });
        }
        Ok(Self { amplitudes: DVector::from_vec(amplitudes), labels })
    }

    fn renormalize(mut self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm < NULL_PROBABILITY.sqrt() {
            return Err(Error::ZeroNorm);
        }
        self.amplitudes.unscale_mut(norm);
        Ok(self)
    }

    pub fn basis(index: usize, labels: Vec<Label>) -> Result<Self> {
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        if index >= dim {
            return Err(Error::Dimension { expected: dim, found: index + 1 });
        }
        let mut amps = vec![Complex64::ZERO; dim];
        amps[index] = Complex64::ONE;
        Self::new(amps, labels)
    }

    /// `alpha|0> + beta|1>` on a single labelled qubit.
    pub fn qubit(alpha: Complex64, beta: Complex64, label: Label) -> Result<Self> {
        Self::new(vec![alpha, beta], vec![label])
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        self.amplitudes.as_slice()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// Applies a unitary operator.
    pub fn apply(&self, op: &Operator) -> Result<Self> {
        if !op.unitary {
            return Err(Error::NotUnitary);
        }
        self.check_dim(op.dim())?;
        Ok(Self { amplitudes: &op.entries * &self.amplitudes, labels: self.labels.clone() })
    }

    /// Applies an arbitrary operator and rescales the result to unit norm.
    pub fn apply_and_normalize(&self, op: &Operator) -> Result<Self> {
        self.check_dim(op.dim())?;
        Self { amplitudes: &op.entries * &self.amplitudes, labels: self.labels.clone() }
            .renormalize()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        self.check_dim(other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn overlap(&self, other: &PureState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix {
            entries: &self.amplitudes * self.amplitudes.adjoint(),
            labels: self.labels.clone(),
        }
    }

    /// Same amplitudes under a different label list of equal length.
    pub fn relabel(&self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.labels.len() {
            return Err(Error::Dimension { expected: self.labels.len(), found: labels.len() });
        }
        check_labels(&labels)?;
        Ok(Self { amplitudes: self.amplitudes.clone(), labels })
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: dim });
        }
        Ok(())
    }
}

impl Kron for PureState {
    fn kron(&self, other: &Self) -> Result<Self> {
        let labels = joined_labels(&self.labels, &other.labels)?;
        Ok(Self { amplitudes: self.amplitudes.kronecker(&other.amplitudes), labels })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: DMatrix<Complex64>,
    unitary: bool,
}

impl Operator {
    /// Wraps a square matrix. When `unitary` is set the matrix is checked
    /// against `U^dag U = I`.
    pub fn new(entries: DMatrix<Complex64>, unitary: bool) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::Dimension { expected: entries.nrows(), found: entries.ncols() });
        }
        qubits_for_dim(entries.nrows())?;
        let op = Self { entries, unitary };
        if unitary && !op.check_unitary() {
            return Err(Error::NotUnitary);
        }
        Ok(op)
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        if num_qubits > MAX_QUBITS {
            return Err(Error::TooManyQubits(num_qubits));
        }
        let d = 1usize << num_qubits;
        Ok(Self { entries: DMatrix::identity(d, d), unitary: true })
    }

    /// `|psi><psi|`.
    pub fn projector(state: &PureState) -> Self {
        Self {
            entries: &state.amplitudes * state.amplitudes.adjoint(),
            unitary: false,
        }
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_unitary(&self) -> bool {
        self.unitary
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.dim().trailing_zeros() as usize
    }

    /// Matrix product `self * rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Self { entries: &self.entries * &rhs.entries, unitary: self.unitary && rhs.unitary })
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.adjoint(), unitary: self.unitary }
    }

    pub fn check_unitary(&self) -> bool {
        let d = self.dim();
        max_abs_diff(&(self.entries.adjoint() * &self.entries), &DMatrix::identity(d, d))
            <= TOLERANCE
    }

    pub fn is_hermitian(&self) -> bool {
        is_hermitian_matrix(&self.entries, TOLERANCE)
    }

    pub fn is_idempotent(&self) -> bool {
        max_abs_diff(&(&self.entries * &self.entries), &self.entries) <= TOLERANCE
    }
}

impl Kron for Operator {
    fn kron(&self, other: &Self) -> Result<Self> {
        let n = self.num_qubits() + other.num_qubits();
        if n > MAX_QUBITS {
            return Err(Error::TooManyQubits(n));
        }
        Ok(Self {
            entries: self.entries.kronecker(&other.entries),
            unitary: self.unitary && other.unitary,
        })
    }
}

impl Sub for &Operator {
    type Output = Result<Operator>;

    fn sub(self, rhs: &Operator) -> Result<Operator> {
        if self.dim() != rhs.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: rhs.dim() });
        }
        Ok(Operator { entries: &self.entries - &rhs.entries, unitary: false })
    }
}

impl Mul<&Operator> for Complex64 {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        let unitary = rhs.unitary && (self.norm() - 1.0).abs() <= TOLERANCE;
        Operator { entries: rhs.entries.map(|z| z * self), unitary }
    }
}

/// Pauli matrix by index: 0 = identity, 1 = x, 2 = y, 3 = z.
pub fn pauli(index: usize) -> Result<Operator> {
    let o = Complex64::ZERO;
    let l = Complex64::ONE;
    let i = Complex64::I;
    let m = match index {
        0 => [l, o, o, l],
        1 => [o, l, l, o],
        2 => [o, -i, i, o],
        3 => [l, o, o, -l],
        _ => return Err(Error::PauliIndex(index)),
    };
    Ok(Operator { entries: DMatrix::from_row_slice(2, 2, &m), unitary: true })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

/// `R_axis(theta) = cos(theta/2) I - i sin(theta/2) sigma_axis`.
pub fn rotation(axis: Axis, angle: f64) -> Result<Operator> {
    if !angle.is_finite() {
        return Err(Error::NonFiniteAngle(angle));
    }
    let sigma = pauli(match axis {
        Axis::X => 1,
        Axis::Y => 2,
    })?;
    let (s, c) = (angle / 2.0).sin_cos();
    let entries = DMatrix::identity(2, 2).map(|z: Complex64| z * c)
        - sigma.entries.map(|z| z * c64(0.0, s));
    Ok(Operator { entries, unitary: true })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
    labels: Vec<Label>,
}

impl DensityMatrix {
    /// Builds a density matrix, checking Hermiticity, unit trace and
    /// positivity.
    pub fn new(entries: DMatrix<Complex64>, labels: Vec<Label>) -> Result<Self> {
        check_labels(&labels)?;
        let expected = 1usize << labels.len();
        if entries.nrows() != expected || entries.ncols() != expected {
            return Err(Error::Dimension { expected, found: entries.nrows() });
        }
        let rho = Self { entries, labels };
        rho.validate()?;
        Ok(rho)
    }

    pub(crate) fn from_parts(entries: DMatrix<Complex64>, labels: Vec<Label>) -> Self {
        Self { entries, labels }
    }

    pub fn from_pure(state: &PureState) -> Self {
        state.density()
    }

    pub fn maximally_mixed(labels: Vec<Label>) -> Result<Self> {
        check_labels(&labels)?;
        let d = 1usize << labels.len();
        let w = c64(1.0 / d as f64, 0.0);
        Ok(Self { entries: DMatrix::identity(d, d).map(|z: Complex64| z * w), labels })
    }

    /// `(I + r . sigma) / 2`; requires `|r| <= 1`.
    pub fn from_bloch(r: [f64; 3], label: Label) -> Result<Self> {
        let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + TOLERANCE {
            return Err(Error::InvalidDensity(format!("Bloch vector length {norm} > 1")));
        }
        let entries = DMatrix::from_row_slice(
            2,
            2,
            &[
                c64((1.0 + r[2]) / 2.0, 0.0),
                c64(r[0] / 2.0, -r[1] / 2.0),
                c64(r[0] / 2.0, r[1] / 2.0),
                c64((1.0 - r[2]) / 2.0, 0.0),
            ],
        );
        Ok(Self { entries, labels: vec![label] })
    }

    /// Pauli expectations `(<x>, <y>, <z>)` of a single-qubit state.
    pub fn bloch_vector(&self) -> Result<[f64; 3]> {
        if self.num_qubits() != 1 {
            return Err(Error::Dimension { expected: 2, found: self.dim() });
        }
        let e = &self.entries;
        Ok([2.0 * e[(1, 0)].re, 2.0 * e[(1, 0)].im, (e[(0, 0)] - e[(1, 1)]).re])
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> =
            self.entries.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn validate(&self) -> Result<()> {
        if !is_hermitian_matrix(&self.entries, TOLERANCE) {
            return Err(Error::InvalidDensity("not Hermitian".into()));
        }
        let tr = self.trace();
        if (tr - Complex64::ONE).norm() > TOLERANCE {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = self.eigenvalues()[0];
        if min < -TOLERANCE {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {min}")));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_ok()
    }

    /// `U rho U^dag` for a unitary `U`.
    pub fn evolve(&self, u: &Operator) -> Result<Self> {
        if !u.unitary {
            return Err(Error::NotUnitary);
        }
        self.check_dim(u.dim())?;
        Ok(Self {
            entries: &u.entries * &self.entries * u.entries.adjoint(),
            labels: self.labels.clone(),
        })
    }

    /// Convex combination `(1 - weight) * self + weight * other`.
    pub fn mix(&self, weight: f64, other: &DensityMatrix) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::Probability { name: "mixing weight", value: weight });
        }
        self.check_dim(other.dim())?;
        Ok(Self {
            entries: self.entries.map(|z| z * (1.0 - weight)) + other.entries.map(|z| z * weight),
            labels: self.labels.clone(),
        })
    }

    pub fn partial_trace(&self, keep: &[Label]) -> Result<Self> {
        partial_trace(self, keep)
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), found: dim });
        }
        Ok(())
    }
}

impl Kron for DensityMatrix {
    fn kron(&self, other: &Self) -> Result<Self> {
        let labels = joined_labels(&self.labels, &other.labels)?;
        Ok(Self { entries: self.entries.kronecker(&other.entries), labels })
    }
}

/// Reduced state on `keep`; kept qubits retain their original relative order.
pub fn partial_trace(rho: &DensityMatrix, keep: &[Label]) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    check_labels(keep)?;
    for l in keep {
        if !rho.labels.contains(l) {
            return Err(Error::UnknownLabel(*l));
        }
    }
    let n = rho.num_qubits();
    let kept: Vec<usize> = (0..n).filter(|&i| keep.contains(&rho.labels[i])).collect();
    let traced: Vec<usize> = (0..n).filter(|&i| !keep.contains(&rho.labels[i])).collect();

    // Scatter the bits of a sub-index onto the listed qubit positions.
    let scatter = |sub: usize, positions: &[usize]| -> usize {
        let k = positions.len();
        positions.iter().enumerate().fold(0usize, |acc, (j, &q)| {
            let bit = (sub >> (k - 1 - j)) & 1;
            acc | (bit << (n - 1 - q))
        })
    };

    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let mut out = DMatrix::<Complex64>::zeros(dk, dk);
    for i in 0..dk {
        let fi = scatter(i, &kept);
        for j in 0..dk {
            let fj = scatter(j, &kept);
            out[(i, j)] = (0..dt)
                .map(|t| {
                    let ft = scatter(t, &traced);
                    rho.entries[(fi | ft, fj | ft)]
                })
                .sum();
        }
    }
    let labels = kept.iter().map(|&i| rho.labels[i]).collect();
    Ok(DensityMatrix { entries: out, labels })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub probability: f64,
    /// Renormalized post-projection state; `None` when the outcome is
    /// impossible.
    pub state: Option<PureState>,
}

pub fn project(state: &PureState, projector: &Operator) -> Result<Projection> {
    if !projector.is_idempotent() {
        return Err(Error::NotIdempotent);
    }
    state.check_dim(projector.dim())?;
    let projected = &projector.entries * &state.amplitudes;
    let probability = state.amplitudes.dotc(&projected).re.clamp(0.0, 1.0);
    if probability <= NULL_PROBABILITY {
        return Ok(Projection { probability: 0.0, state: None });
    }
    let amplitudes = projected.unscale(probability.sqrt());
    Ok(Projection {
        probability,
        state: Some(PureState { amplitudes, labels: state.labels.clone() }),
    })
}

/// `<psi|rho|psi>`.
pub fn fidelity_pure(psi: &PureState, rho: &DensityMatrix) -> Result<f64> {
    if psi.dim() != rho.dim() {
        return Err(Error::Dimension { expected: rho.dim(), found: psi.dim() });
    }
    let f = psi.amplitudes.dotc(&(&rho.entries * &psi.amplitudes)).re;
    Ok(f.clamp(0.0, 1.0))
}

/// `tr(rho * obs)` for a Hermitian observable.
pub fn expect(rho: &DensityMatrix, obs: &Operator) -> Result<f64> {
    if !obs.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    rho.check_dim(obs.dim())?;
    Ok((&rho.entries * &obs.entries).trace().re)
}

/// `1/2 sum |lambda_i(a - b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    a.check_dim(b.dim())?;
    let diff = &a.entries - &b.entries;
    Ok(0.5 * diff.symmetric_eigenvalues().iter().map(|l| l.abs()).sum::<f64>())
}

/// Haar-random pure state on the given qubits.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, labels: Vec<Label>) -> Result<PureState> {
    let d = 1usize << labels.len();
    let amps = (0..d)
        .map(|_| c64(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    PureState::normalized(amps, labels)
}

/// Full-rank random density matrix `G G^dag / tr(G G^dag)` from a Ginibre
/// matrix `G`.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, labels: Vec<Label>) -> Result<DensityMatrix> {
    check_labels(&labels)?;
    let d = 1usize << labels.len();
    let g = DMatrix::<Complex64>::from_fn(d, d, |_, _| {
        c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let gg = &g * g.adjoint();
    let tr = gg.trace().re;
    Ok(DensityMatrix { entries: gg.unscale(tr), labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    const Q0: Label = Label::Qubit(0);
    const Q1: Label = Label::Qubit(1);

    fn ket(bits: &[Complex64]) -> PureState {
        PureState::normalized(bits.to_vec(), vec![Q0]).unwrap()
    }

    fn assert_mat_eq(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>, tol: f64) {
        assert!(max_abs_diff(a, b) <= tol, "{a} != {b}");
    }

    #[test]
    fn pauli_identity_and_algebra() {
        assert_mat_eq(pauli(0).unwrap().entries(), &DMatrix::identity(2, 2), 0.0);
        let xy = pauli(1).unwrap().compose(&pauli(2).unwrap()).unwrap();
        let iz = Complex64::I * &pauli(3).unwrap();
        assert_mat_eq(xy.entries(), iz.entries(), 1e-15);
        let one = PureState::basis(1, vec![Q0]).unwrap();
        let z1 = one.apply(&pauli(3).unwrap()).unwrap();
        assert_eq!(z1.amplitudes(), &[Complex64::ZERO, -Complex64::ONE]);
    }

    #[test]
    fn pauli_rejects_out_of_range() {
        assert!(matches!(pauli(4), Err(Error::PauliIndex(4))));
    }

    #[test]
    fn rotations() {
        let zero = PureState::basis(0, vec![Q0]).unwrap();
        let plus = ket(&[c64(1.0, 0.0), c64(1.0, 0.0)]);
        let r = zero.apply(&rotation(Axis::Y, PI / 2.0).unwrap()).unwrap();
        assert_abs_diff_eq!(r.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(r.overlap(&plus).unwrap(), 1.0, epsilon = 1e-12);

        // alpha|1> + beta|0> -> -i (alpha|0> + beta|1>)
        let (alpha, beta) = (c64(0.6, 0.0), c64(0.0, 0.8));
        let flipped = PureState::qubit(beta, alpha, Q0).unwrap();
        let out = flipped.apply(&rotation(Axis::X, PI).unwrap()).unwrap();
        let minus_i = c64(0.0, -1.0);
        assert_abs_diff_eq!((out.amplitudes()[0] - minus_i * alpha).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((out.amplitudes()[1] - minus_i * beta).norm(), 0.0, epsilon = 1e-15);

        assert_mat_eq(rotation(Axis::Y, 0.0).unwrap().entries(), &DMatrix::identity(2, 2), 0.0);
        assert!(matches!(rotation(Axis::X, f64::NAN), Err(Error::NonFiniteAngle(_))));
    }

    #[test]
    fn kron_examples() {
        let i2 = Operator::identity(1).unwrap();
        assert_mat_eq(kron(&i2, &i2).unwrap().entries(), &DMatrix::identity(4, 4), 0.0);

        let zero = PureState::basis(0, vec![Q0]).unwrap();
        let one = PureState::basis(1, vec![Q1]).unwrap();
        let s = kron(&zero, &one).unwrap();
        assert_eq!(s, PureState::basis(1, vec![Q0, Q1]).unwrap());

        let zz = kron(&pauli(3).unwrap(), &pauli(3).unwrap()).unwrap();
        let s10 = PureState::basis(2, vec![Q0, Q1]).unwrap();
        assert_eq!(s10.apply(&zz).unwrap().amplitudes()[2], -Complex64::ONE);

        assert!(matches!(kron(&zero, &zero), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn partial_trace_examples() {
        let singlet = PureState::normalized(
            vec![Complex64::ZERO, Complex64::ONE, -Complex64::ONE, Complex64::ZERO],
            vec![Q0, Q1],
        )
        .unwrap()
        .density();
        let reduced = singlet.partial_trace(&[Q0]).unwrap();
        let half = DensityMatrix::maximally_mixed(vec![Q0]).unwrap();
        assert_mat_eq(reduced.entries(), half.entries(), 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_density(&mut rng, vec![Q0]).unwrap();
        let b = random_density(&mut rng, vec![Q1]).unwrap();
        let ab = kron(&a, &b).unwrap();
        assert_mat_eq(ab.partial_trace(&[Q1]).unwrap().entries(), b.entries(), 1e-14);
        assert_mat_eq(ab.partial_trace(&[Q0]).unwrap().entries(), a.entries(), 1e-14);

        assert!(matches!(ab.partial_trace(&[Label::AtomA]), Err(Error::UnknownLabel(_))));
        assert!(matches!(ab.partial_trace(&[]), Err(Error::EmptyKeep)));
    }

    #[test]
    fn partial_trace_of_heralded_pair_at_beta_zero() {
        // alpha|01> - beta|10> with alpha = 1 reduces to |0><0| on the first atom.
        let heralded = PureState::basis(1, vec![Label::AtomA, Label::AtomB]).unwrap().density();
        let a = heralded.partial_trace(&[Label::AtomA]).unwrap();
        assert_mat_eq(
            a.entries(),
            PureState::basis(0, vec![Label::AtomA]).unwrap().density().entries(),
            0.0,
        );
    }

    #[test]
    fn partial_trace_keeps_original_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let labels = vec![Q0, Q1, Label::Qubit(2)];
        let a = random_density(&mut rng, vec![Q0]).unwrap();
        let b = random_density(&mut rng, vec![Q1]).unwrap();
        let c = random_density(&mut rng, vec![Label::Qubit(2)]).unwrap();
        let abc = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        assert_eq!(abc.labels(), labels.as_slice());
        let ac = abc.partial_trace(&[Label::Qubit(2), Q0]).unwrap();
        assert_eq!(ac.labels(), &[Q0, Label::Qubit(2)]);
        assert_mat_eq(ac.entries(), kron(&a, &c).unwrap().entries(), 1e-14);
    }

    #[test]
    fn projection_examples() {
        let zero = PureState::basis(0, vec![Q0]).unwrap();
        let one = PureState::basis(1, vec![Q0]).unwrap();
        let p = project(&zero, &Operator::projector(&zero)).unwrap();
        assert_abs_diff_eq!(p.probability, 1.0);
        assert_eq!(p.state.unwrap(), zero);
        let p = project(&zero, &Operator::projector(&one)).unwrap();
        assert_eq!(p.probability, 0.0);
        assert!(p.state.is_none());

        let not_proj = 2.0 * c64(1.0, 0.0) * &Operator::identity(1).unwrap();
        let not_proj = Operator::new(not_proj.entries().clone(), false).unwrap();
        assert!(matches!(project(&zero, &not_proj), Err(Error::NotIdempotent)));
    }

    #[test]
    fn fidelity_examples() {
        let zero = PureState::basis(0, vec![Q0]).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&zero, &zero.density()).unwrap(), 1.0);
        let mixed = DensityMatrix::maximally_mixed(vec![Q0]).unwrap();
        assert_abs_diff_eq!(fidelity_pure(&zero, &mixed).unwrap(), 0.5);

        // Off-diagonals scaled by V: <+|rho|+> = (1 + V) / 2.
        let plus = ket(&[c64(1.0, 0.0), c64(1.0, 0.0)]);
        for v in [0.0, 0.3, 0.96, 1.0] {
            let mut e = plus.density().entries().clone();
            e[(0, 1)] *= v;
            e[(1, 0)] *= v;
            let rho = DensityMatrix::new(e, vec![Q0]).unwrap();
            assert_abs_diff_eq!(fidelity_pure(&plus, &rho).unwrap(), (1.0 + v) / 2.0, epsilon = 1e-15);
        }

        let two = DensityMatrix::maximally_mixed(vec![Q0, Q1]).unwrap();
        assert!(matches!(fidelity_pure(&zero, &two), Err(Error::Dimension { .. })));
    }

    #[test]
    fn expectation_examples() {
        let zero = PureState::basis(0, vec![Q0]).unwrap();
        assert_abs_diff_eq!(expect(&zero.density(), &pauli(3).unwrap()).unwrap(), 1.0);
        let mixed = DensityMatrix::maximally_mixed(vec![Q0]).unwrap();
        assert_abs_diff_eq!(expect(&mixed, &pauli(1).unwrap()).unwrap(), 0.0);
        let plus_i = ket(&[c64(1.0, 0.0), c64(0.0, 1.0)]);
        assert_abs_diff_eq!(expect(&plus_i.density(), &pauli(2).unwrap()).unwrap(), 1.0, epsilon = 1e-15);

        let skew = Operator::new(DMatrix::from_row_slice(2, 2, &[
            Complex64::ZERO, Complex64::ONE, -Complex64::ONE, Complex64::ZERO,
        ]), false)
        .unwrap();
        assert!(matches!(expect(&mixed, &skew), Err(Error::NotHermitian)));
    }

    #[test]
    fn density_validation_rejects_bad_matrices() {
        let bad_trace = DMatrix::<Complex64>::identity(2, 2);
        assert!(DensityMatrix::new(bad_trace, vec![Q0]).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[c64(1.5, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-0.5, 0.0)]);
        assert!(DensityMatrix::new(negative, vec![Q0]).is_err());
        assert!(PureState::new(vec![c64(1.0, 0.0), c64(1.0, 0.0)], vec![Q0]).is_err());
        assert!(PureState::normalized(vec![Complex64::ZERO; 2], vec![Q0]).is_err());
    }

    #[test]
    fn bloch_round_trip() {
        let r = [0.3, -0.4, 0.5];
        let rho = DensityMatrix::from_bloch(r, Q0).unwrap();
        let back = rho.bloch_vector().unwrap();
        for k in 0..3 {
            assert_abs_diff_eq!(back[k], r[k], epsilon = 1e-15);
            let obs = pauli(k + 1).unwrap();
            assert_abs_diff_eq!(expect(&rho, &obs).unwrap(), r[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn projection_completeness_over_bell_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = [
            [s, 0.0, 0.0, s],
            [s, 0.0, 0.0, -s],
            [0.0, s, s, 0.0],
            [0.0, s, -s, 0.0],
        ];
        for _ in 0..50 {
            let psi = random_pure(&mut rng, vec![Q0, Q1]).unwrap();
            let total: f64 = bell
                .iter()
                .map(|b| {
                    let v = PureState::new(b.iter().map(|&x| c64(x, 0.0)).collect(), vec![Q0, Q1]).unwrap();
                    project(&psi, &Operator::projector(&v)).unwrap().probability
                })
                .sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rotations_are_unitary(angle in -20.0f64..20.0, x in any::<bool>()) {
                let axis = if x { Axis::X } else { Axis::Y };
                prop_assert!(rotation(axis, angle).unwrap().check_unitary());
            }

            #[test]
            fn partial_trace_preserves_trace(seed in any::<u64>(), keep_mask in 1u8..15) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let labels = vec![Label::AtomA, Label::AtomB, Label::PhotonA, Label::PhotonB];
                let rho = random_density(&mut rng, labels.clone()).unwrap();
                let keep: Vec<Label> = labels.iter().enumerate()
                    .filter(|(i, _)| keep_mask >> i & 1 == 1)
                    .map(|(_, l)| *l)
                    .collect();
                let reduced = rho.partial_trace(&keep).unwrap();
                prop_assert!((reduced.trace() - rho.trace()).norm() < TOLERANCE);
                prop_assert!(reduced.validate().is_ok());
            }
        }
    }
}
