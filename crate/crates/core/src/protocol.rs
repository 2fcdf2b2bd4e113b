//! The heralded teleportation chain from atom A to atom B.
//!
//! Stages, in order: both atoms are prepared; each atom emits a photon whose
//! frequency qubit copies the atomic qubit (`|0> -> |0, blue>`,
//! `|1> -> |1, red>`, with blue encoded as `|0>` and red as `|1>`); a
//! coincidence at the beamsplitter projects the photons onto the singlet and
//! heralds the atom pair `alpha|01> - beta|10>`; atom A is rotated by
//! `R_y(pi/2)` and read out; atom B receives `R_x(pi)` after outcome 0 or
//! `R_y(pi)` after outcome 1.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{self, NoiseBudget};
use crate::qmath::{
    self, c64, project, rotation, Axis, DensityMatrix, Kron, Label, Operator, PureState, TOLERANCE,
};
use crate::ratebudget::RateParams;

pub const ATOMS: [Label; 2] = [Label::AtomA, Label::AtomB];

/// Attempt cap per teleport; keeps the chance of a spurious failure negligible
/// at any rescaled gate probability.
pub const DEFAULT_ATTEMPT_CAP: u64 = 10_000_000;

/// The qubit `alpha|0> + beta|1>` written into atom A.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInput", into = "RawInput")]
pub struct InputQubit {
    alpha: Complex64,
    beta: Complex64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInput {
    alpha: [f64; 2],
    beta: [f64; 2],
}

impl TryFrom<RawInput> for InputQubit {
    type Error = Error;

    fn try_from(raw: RawInput) -> Result<Self> {
        InputQubit::new(c64(raw.alpha[0], raw.alpha[1]), c64(raw.beta[0], raw.beta[1]))
    }
}

impl From<InputQubit> for RawInput {
    fn from(q: InputQubit) -> Self {
        RawInput { alpha: [q.alpha.re, q.alpha.im], beta: [q.beta.re, q.beta.im] }
    }
}

impl InputQubit {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > TOLERANCE {
            return Err(Error::NotNormalized(norm));
        }
        Ok(Self { alpha, beta })
    }

    /// Haar-random input.
    pub fn haar_random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let a = c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let b = c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
        let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Self { alpha: a / norm, beta: b / norm }
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    /// The state atom B should end up in.
    pub fn ideal_state(&self) -> PureState {
        self.on(Label::AtomB)
    }

    pub fn on(&self, label: Label) -> PureState {
        PureState::qubit(self.alpha, self.beta, label).expect("normalized by construction")
    }
}

/// The six basis states used as tomography inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum MubState {
    /// `|0> + |1>`
    PlusX,
    /// `|0> - |1>`
    MinusX,
    /// `|0> + i|1>`
    PlusY,
    /// `|0> - i|1>`
    MinusY,
    /// `|0>`
    Zero,
    /// `|1>`
    One,
}

impl MubState {
    pub const ALL: [MubState; 6] = [
        MubState::PlusX,
        MubState::MinusX,
        MubState::PlusY,
        MubState::MinusY,
        MubState::Zero,
        MubState::One,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            MubState::PlusX => "+x",
            MubState::MinusX => "-x",
            MubState::PlusY => "+y",
            MubState::MinusY => "-y",
            MubState::Zero => "+z",
            MubState::One => "-z",
        }
    }

    pub fn is_equatorial(&self) -> bool {
        !matches!(self, MubState::Zero | MubState::One)
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        let s = FRAC_1_SQRT_2;
        match self {
            MubState::PlusX => (c64(s, 0.0), c64(s, 0.0)),
            MubState::MinusX => (c64(s, 0.0), c64(-s, 0.0)),
            MubState::PlusY => (c64(s, 0.0), c64(0.0, s)),
            MubState::MinusY => (c64(s, 0.0), c64(0.0, -s)),
            MubState::Zero => (Complex64::ONE, Complex64::ZERO),
            MubState::One => (Complex64::ZERO, Complex64::ONE),
        }
    }
}

impl fmt::Display for MubState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for MubState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MubState::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::UnknownInput(s.to_string()))
    }
}

impl TryFrom<String> for MubState {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<MubState> for String {
    fn from(m: MubState) -> String {
        m.label().to_string()
    }
}

impl From<MubState> for InputQubit {
    fn from(m: MubState) -> Self {
        let (alpha, beta) = m.amplitudes();
        InputQubit { alpha, beta }
    }
}

/// Feed-forward rotation applied to atom B.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Correction {
    #[serde(rename = "Rx(pi)")]
    RxPi,
    #[serde(rename = "Ry(pi)")]
    RyPi,
}

impl Correction {
    pub fn for_bit(bit: u8) -> Self {
        if bit == 0 {
            Correction::RxPi
        } else {
            Correction::RyPi
        }
    }

    pub fn operator(&self) -> Operator {
        let axis = match self {
            Correction::RxPi => Axis::X,
            Correction::RyPi => Axis::Y,
        };
        rotation(axis, PI).expect("finite angle")
    }
}

impl fmt::Display for Correction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Correction::RxPi => "Rx(pi)",
            Correction::RyPi => "Ry(pi)",
        })
    }
}

/// One heralded teleportation event.
#[derive(Clone, Debug, PartialEq)]
pub struct TeleportOutcome {
    /// Always true for a returned outcome; attempt-cap failures surface as
    /// [`Error::AttemptCapExceeded`].
    pub herald_success: bool,
    /// Classical bit reported by the readout of atom A.
    pub measured_bit_a: u8,
    pub feed_forward_applied: Correction,
    pub final_rho_b: DensityMatrix,
    pub attempt_count: u64,
}

/// `(alpha|0> + beta|1>)_A (|0> + |1>)_B / sqrt 2`.
pub fn prepare_states(input: &InputQubit) -> PureState {
    input.on(Label::AtomA).kron(&superposition(Label::AtomB)).expect("distinct labels")
}

fn superposition(label: Label) -> PureState {
    PureState::qubit(c64(FRAC_1_SQRT_2, 0.0), c64(FRAC_1_SQRT_2, 0.0), label)
        .expect("normalized")
}

fn photon_for(atom: Label) -> Result<Label> {
    match atom {
        Label::AtomA => Ok(Label::PhotonA),
        Label::AtomB => Ok(Label::PhotonB),
        other => Err(Error::UnknownLabel(other)),
    }
}

/// Each atom emits a photon whose frequency qubit mirrors the atomic qubit.
/// Output labels are the atoms followed by their photons, in the same order.
pub fn excite_and_emit(atoms: &PureState) -> Result<PureState> {
    let k = atoms.num_qubits();
    if k == 0 || k > 2 {
        return Err(Error::WrongLabels { expected: 2, labels: atoms.labels().to_vec() });
    }
    let mut labels = atoms.labels().to_vec();
    for &a in atoms.labels() {
        labels.push(photon_for(a)?);
    }
    let mut amps = vec![Complex64::ZERO; 1 << (2 * k)];
    for (i, &amp) in atoms.amplitudes().iter().enumerate() {
        amps[(i << k) | i] = amp;
    }
    PureState::new(amps, labels)
}

/// `(|blue, red> - |red, blue>) / sqrt 2` on the two photons.
pub fn photon_singlet() -> PureState {
    let s = FRAC_1_SQRT_2;
    PureState::new(
        vec![Complex64::ZERO, c64(s, 0.0), c64(-s, 0.0), Complex64::ZERO],
        vec![Label::PhotonA, Label::PhotonB],
    )
    .expect("normalized")
}

/// `I_atoms (x) |Psi-><Psi-|_photons`.
pub fn coincidence_projector() -> Operator {
    Operator::identity(2)
        .and_then(|i| i.kron(&Operator::projector(&photon_singlet())))
        .expect("four qubits")
}

/// The heralding gate `1/2 sigma_z^A (I - sigma_z^A sigma_z^B)`.
pub fn entangling_gate() -> Result<Operator> {
    let z = qmath::pauli(3)?;
    let i = qmath::pauli(0)?;
    let zz = z.kron(&z)?;
    let ii = i.kron(&i)?;
    let za = z.kron(&i)?;
    let inner = (&ii - &zz)?;
    Ok(c64(0.5, 0.0) * &za.compose(&inner)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Herald {
    pub success: bool,
    /// Probability of a coincidence for the input state.
    pub probability: f64,
    /// Heralded atom pair, present on success.
    pub atoms: Option<PureState>,
}

/// Deterministic part of the herald: the coincidence probability and the atom
/// pair it leaves behind (photons removed).
pub fn herald_projection(joint: &PureState) -> Result<(f64, Option<PureState>)> {
    let expected = [Label::AtomA, Label::AtomB, Label::PhotonA, Label::PhotonB];
    if joint.labels() != expected {
        return Err(Error::WrongLabels { expected: 4, labels: joint.labels().to_vec() });
    }
    let projection = project(joint, &coincidence_projector())?;
    let Some(post) = projection.state else {
        return Ok((projection.probability, None));
    };
    // post = |atoms> (x) |Psi->, so contracting the photons with <Psi-| leaves the atoms.
    let singlet = photon_singlet();
    let atoms = (0..4)
        .map(|a| {
            (0..4).map(|p| singlet.amplitudes()[p].conj() * post.amplitudes()[(a << 2) | p]).sum()
        })
        .collect();
    Ok((projection.probability, Some(PureState::normalized(atoms, ATOMS.to_vec())?)))
}

/// Samples a coincidence from the four-qubit atom-photon state.
pub fn herald<R: Rng + ?Sized>(joint: &PureState, rng: &mut R) -> Result<Herald> {
    let (probability, atoms) = herald_projection(joint)?;
    let success = probability > 0.0 && rng.random_bool(probability.min(1.0));
    Ok(Herald { success, probability, atoms: if success { atoms } else { None } })
}

fn rotation_on_a() -> Operator {
    rotation(Axis::Y, FRAC_PI_2)
        .and_then(|r| r.kron(&Operator::identity(1)?))
        .expect("two qubits")
}

fn check_atoms(labels: &[Label]) -> Result<()> {
    if labels != ATOMS {
        return Err(Error::WrongLabels { expected: 2, labels: labels.to_vec() });
    }
    Ok(())
}

/// `R_y(pi/2)` on atom A.
pub fn rotate_a(atoms: &PureState) -> Result<PureState> {
    check_atoms(atoms.labels())?;
    atoms.apply(&rotation_on_a())
}

/// Born-rule readout of atom A; returns the true outcome and atom B's state.
pub fn measure_a<R: Rng + ?Sized>(atoms: &PureState, rng: &mut R) -> Result<(u8, PureState)> {
    check_atoms(atoms.labels())?;
    let a = atoms.amplitudes();
    let p0 = a[0].norm_sqr() + a[1].norm_sqr();
    let bit = u8::from(!rng.random_bool(p0.clamp(0.0, 1.0)));
    let offset = 2 * bit as usize;
    let b = PureState::normalized(vec![a[offset], a[offset + 1]], vec![Label::AtomB])?;
    Ok((bit, b))
}

/// Conditional `R_x(pi)` (bit 0) or `R_y(pi)` (bit 1) on atom B.
pub fn feed_forward(b_state: &PureState, bit: u8) -> Result<PureState> {
    b_state.apply(&Correction::for_bit(bit).operator())
}

/// Probability of outcome `bit` on atom A and atom B's conditional state.
fn condition_on_a(rho: &DensityMatrix, bit: u8) -> (f64, DensityMatrix) {
    let e = rho.entries();
    let o = 2 * bit as usize;
    let block = e.view((o, o), (2, 2)).into_owned();
    let p = block.trace().re;
    let b = if p > 0.0 { block.unscale(p) } else { block };
    (p, DensityMatrix::from_parts(b, vec![Label::AtomB]))
}

/// Mixed-state readout of atom A after the rotation.
pub fn measure_a_mixed<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<(u8, DensityMatrix)> {
    check_atoms(rho.labels())?;
    let (p0, _) = condition_on_a(rho, 0);
    let bit = u8::from(!rng.random_bool(p0.clamp(0.0, 1.0)));
    Ok((bit, condition_on_a(rho, bit).1))
}

/// The heralded pair `alpha|01> - beta|10>` with no imperfections.
pub fn ideal_heralded_pair(input: &InputQubit) -> Result<PureState> {
    let joint = excite_and_emit(&prepare_states(input))?;
    herald_projection(&joint)?.1.ok_or(Error::ZeroNorm)
}

/// Rotation, readout and feed-forward applied to a heralded pair, averaged over
/// readout outcomes and readout flips. Returns atom B's ensemble state.
pub fn teleport_pair_exact(pair: &DensityMatrix, detection_error: f64) -> Result<DensityMatrix> {
    check_atoms(pair.labels())?;
    let rotated = pair.evolve(&rotation_on_a())?;
    let mut out = nalgebra::DMatrix::<Complex64>::zeros(2, 2);
    for bit in 0..2u8 {
        let (p, b) = condition_on_a(&rotated, bit);
        if p <= 0.0 {
            continue;
        }
        for reported in 0..2u8 {
            let w = if reported == bit { 1.0 - detection_error } else { detection_error };
            let corrected = b.evolve(&Correction::for_bit(reported).operator())?;
            out += corrected.entries().map(|z| z * (p * w));
        }
    }
    Ok(DensityMatrix::from_parts(out, vec![Label::AtomB]))
}

/// Atom B's state when the readout result of atom A is never delivered.
pub fn unconditioned_b(pair: &DensityMatrix) -> Result<DensityMatrix> {
    check_atoms(pair.labels())?;
    pair.evolve(&rotation_on_a())?.partial_trace(&[Label::AtomB])
}

/// Exact post-herald ensemble of atom B for an input under a noise budget.
/// Preparation failures are enumerated and weighted by their herald
/// probabilities.
pub fn ensemble_output(input: &InputQubit, noise: &NoiseBudget) -> Result<DensityMatrix> {
    noise.validate()?;
    let p = noise.prep_error;
    let mut pair = nalgebra::DMatrix::<Complex64>::zeros(4, 4);
    let mut total = 0.0;
    for (fail_a, fail_b) in [(false, false), (false, true), (true, false), (true, true)] {
        let w = (if fail_a { p } else { 1.0 - p }) * (if fail_b { p } else { 1.0 - p });
        if w == 0.0 {
            continue;
        }
        let atoms = prepared_atoms(input, fail_a, fail_b)?;
        let (h, heralded) = herald_projection(&excite_and_emit(&atoms)?)?;
        if let Some(s) = heralded {
            pair += s.density().entries().map(|z| z * (w * h));
            total += w * h;
        }
    }
    let pair = DensityMatrix::from_parts(pair.unscale(total), ATOMS.to_vec());
    let pair = noise::herald_channels(&pair, noise)?;
    teleport_pair_exact(&pair, noise.detection_error)
}

fn prepared_atoms(input: &InputQubit, fail_a: bool, fail_b: bool) -> Result<PureState> {
    let a = if fail_a { PureState::basis(1, vec![Label::AtomA])? } else { input.on(Label::AtomA) };
    let b = if fail_b { PureState::basis(1, vec![Label::AtomB])? } else { superposition(Label::AtomB) };
    a.kron(&b)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TeleportMode {
    /// Count only the singlet-projection trials; photon loss is ignored.
    Conditional,
    /// Every excitation attempt also needs both photons detected.
    RateRealistic,
}

impl FromStr for TeleportMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conditional" => Ok(TeleportMode::Conditional),
            "rate-realistic" => Ok(TeleportMode::RateRealistic),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TeleportSettings {
    pub mode: TeleportMode,
    pub attempt_cap: u64,
    /// Probability that both photons of an attempt reach the detectors.
    pub detection_probability: f64,
}

impl TeleportSettings {
    pub fn conditional() -> Self {
        Self {
            mode: TeleportMode::Conditional,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            detection_probability: 1.0,
        }
    }

    pub fn rate_realistic(rate: &RateParams) -> Self {
        Self {
            mode: TeleportMode::RateRealistic,
            attempt_cap: DEFAULT_ATTEMPT_CAP,
            detection_probability: rate.photon_pair_detection(),
        }
    }
}

impl Default for TeleportSettings {
    fn default() -> Self {
        Self::conditional()
    }
}

/// One attempt: prepare, excite, and try for a coincidence.
pub fn attempt_herald<R: Rng + ?Sized>(
    input: &InputQubit,
    noise: &NoiseBudget,
    rng: &mut R,
) -> Result<Herald> {
    let a = noise::prep_fail(&input.on(Label::AtomA), noise.prep_error, rng)?;
    let b = noise::prep_fail(&superposition(Label::AtomB), noise.prep_error, rng)?;
    herald(&excite_and_emit(&a.kron(&b)?)?, rng)
}

/// Full chain: repeat attempts until a herald, then rotate, read out and
/// correct. `noise = None` runs the ideal pure-state pipeline.
pub fn run_teleport<R: Rng + ?Sized>(
    input: &InputQubit,
    noise: Option<&NoiseBudget>,
    settings: &TeleportSettings,
    rng: &mut R,
) -> Result<TeleportOutcome> {
    let noise = noise.copied().unwrap_or(NoiseBudget::NOISELESS);
    noise.validate()?;
    let detection = match settings.mode {
        TeleportMode::Conditional => None,
        TeleportMode::RateRealistic => {
            let p = settings.detection_probability;
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Probability { name: "detection_probability", value: p });
            }
            Some(Geometric::new(p).map_err(|_| Error::Probability {
                name: "detection_probability",
                value: p,
            })?)
        }
    };

    let mut attempts: u64 = 0;
    let atoms = loop {
        attempts += match &detection {
            None => 1,
            Some(geo) => geo.sample(rng).saturating_add(1),
        };
        if attempts > settings.attempt_cap {
            return Err(Error::AttemptCapExceeded { attempts, cap: settings.attempt_cap });
        }
        if let Herald { success: true, atoms: Some(atoms), .. } = attempt_herald(input, &noise, rng)? {
            break atoms;
        }
    };

    let (bit, final_rho_b) = if noise.is_noiseless() {
        let rotated = rotate_a(&atoms)?;
        let (bit, b) = measure_a(&rotated, rng)?;
        (bit, feed_forward(&b, bit)?.density())
    } else {
        let pair = noise::herald_channels(&atoms.density(), &noise)?;
        let rotated = pair.evolve(&rotation_on_a())?;
        let (bit, b) = measure_a_mixed(&rotated, rng)?;
        let reported = noise::flip_readout(bit, noise.detection_error, rng);
        (reported, b.evolve(&Correction::for_bit(reported).operator())?)
    };

    Ok(TeleportOutcome {
        herald_success: true,
        measured_bit_a: bit,
        feed_forward_applied: Correction::for_bit(bit),
        final_rho_b,
        attempt_count: attempts,
    })
}
