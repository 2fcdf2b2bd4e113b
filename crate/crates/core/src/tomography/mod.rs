//! Single-qubit state tomography in three bases, and process tomography of
//! the teleportation channel.
//!
//! A basis measurement is a pre-rotation followed by fluorescence readout in
//! `z`: `R_y(pi/2)` for `x`, `R_x(pi/2)` for `y`, nothing for `z`. Readout
//! reports dark (`|0>`) or bright (`|1>`). The pre-rotation maps the readout
//! observable to `U^dag sigma_z U = s_b sigma_b`, so dark counts as `s_b` on
//! the tagged Pauli; `s_x = -1`, `s_y = s_z = +1`.

mod optimize;
pub mod process;

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise;
use crate::protocol::{InputQubit, MubState};
use crate::qmath::{self, rotation, Axis, DensityMatrix, Label, Operator};

pub use optimize::{minimize_bfgs, BfgsOptions, BfgsOutcome};
pub use process::{
    linear_inversion, process_fidelity, reconstruct_process, MleOptions, ProcessData, ProcessFit,
    ProcessMatrix,
};

/// Default shots per basis per input: 1285 events spread evenly over six
/// inputs and three bases.
pub const DEFAULT_SHOTS_PER_BASIS: u64 = 72;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    X,
    Y,
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    fn index(&self) -> usize {
        match self {
            Basis::X => 1,
            Basis::Y => 2,
            Basis::Z => 3,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::X => "x",
            Basis::Y => "y",
            Basis::Z => "z",
        })
    }
}

/// Pre-rotation applied before the `z` readout.
pub fn measurement_setting(basis: Basis) -> Operator {
    match basis {
        Basis::X => rotation(Axis::Y, FRAC_PI_2),
        Basis::Y => rotation(Axis::X, FRAC_PI_2),
        Basis::Z => rotation(Axis::X, 0.0),
    }
    .expect("finite angle")
}

/// `s_b` in `U_b^dag sigma_z U_b = s_b sigma_b`: the Pauli eigenvalue that a
/// dark outcome stands for.
pub fn dark_sign(basis: Basis) -> f64 {
    let u = measurement_setting(basis);
    let z = qmath::pauli(3).expect("z");
    let observable = u.adjoint().compose(&z).and_then(|m| m.compose(&u)).expect("2x2");
    let sigma = qmath::pauli(basis.index()).expect("pauli");
    let overlap = observable.compose(&sigma).expect("2x2").entries().trace().re / 2.0;
    overlap.signum()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisCounts {
    /// `|1>` outcomes.
    pub bright: u64,
    /// `|0>` outcomes.
    pub dark: u64,
}

impl BasisCounts {
    pub fn shots(&self) -> u64 {
        self.bright + self.dark
    }
}

/// Outcome counts of one input state in the three bases.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyCounts {
    pub input: MubState,
    pub x: BasisCounts,
    pub y: BasisCounts,
    pub z: BasisCounts,
}

impl TomographyCounts {
    pub fn get(&self, basis: Basis) -> BasisCounts {
        match basis {
            Basis::X => self.x,
            Basis::Y => self.y,
            Basis::Z => self.z,
        }
    }

    fn slot(&mut self, basis: Basis) -> &mut BasisCounts {
        match basis {
            Basis::X => &mut self.x,
            Basis::Y => &mut self.y,
            Basis::Z => &mut self.z,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for b in Basis::ALL {
            if self.get(b).shots() == 0 {
                return Err(Error::ZeroShots { state: self.input.to_string(), basis: b });
            }
        }
        Ok(())
    }

    /// Empirical Pauli expectations, before any physicality correction.
    pub fn raw_bloch(&self) -> Result<[f64; 3]> {
        self.validate()?;
        let mut r = [0.0; 3];
        for (k, b) in Basis::ALL.into_iter().enumerate() {
            let c = self.get(b);
            r[k] = dark_sign(b) * (c.dark as f64 - c.bright as f64) / c.shots() as f64;
        }
        Ok(r)
    }
}

/// Probability of a dark outcome in each basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisProbabilities {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BasisProbabilities {
    pub fn get(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.x,
            Basis::Y => self.y,
            Basis::Z => self.z,
        }
    }
}

fn check_single(rho: &DensityMatrix) -> Result<()> {
    if rho.num_qubits() != 1 {
        return Err(Error::Dimension { expected: 2, found: rho.dim() });
    }
    Ok(())
}

/// Dark probability of `rho` in `basis` with no readout error.
pub fn dark_probability(rho: &DensityMatrix, basis: Basis) -> Result<f64> {
    check_single(rho)?;
    let rotated = rho.evolve(&measurement_setting(basis))?;
    Ok(rotated.entries()[(0, 0)].re.clamp(0.0, 1.0))
}

/// Infinite-statistics dark probabilities, including a symmetric readout flip.
pub fn exact_probabilities(rho: &DensityMatrix, detection_error: f64) -> Result<BasisProbabilities> {
    let flip = |p: f64| p * (1.0 - detection_error) + (1.0 - p) * detection_error;
    Ok(BasisProbabilities {
        x: flip(dark_probability(rho, Basis::X)?),
        y: flip(dark_probability(rho, Basis::Y)?),
        z: flip(dark_probability(rho, Basis::Z)?),
    })
}

/// Born-rule sampling after each pre-rotation, with a readout flip per shot.
pub fn simulate_counts<R: Rng + ?Sized>(
    input: MubState,
    rho: &DensityMatrix,
    shots_per_basis: u64,
    detection_error: f64,
    rng: &mut R,
) -> Result<TomographyCounts> {
    if shots_per_basis == 0 {
        return Err(Error::NoShots);
    }
    let mut counts = TomographyCounts {
        input,
        x: BasisCounts::default(),
        y: BasisCounts::default(),
        z: BasisCounts::default(),
    };
    for basis in Basis::ALL {
        let p_dark = dark_probability(rho, basis)?;
        let slot = counts.slot(basis);
        for _ in 0..shots_per_basis {
            let bit = u8::from(!rng.random_bool(p_dark));
            if noise::flip_readout(bit, detection_error, rng) == 0 {
                slot.dark += 1;
            } else {
                slot.bright += 1;
            }
        }
    }
    Ok(counts)
}

fn bloch_to_state(mut r: [f64; 3]) -> DensityMatrix {
    let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1.0 {
        r.iter_mut().for_each(|x| *x /= norm);
    }
    DensityMatrix::from_bloch(r, Label::AtomB).expect("|r| <= 1")
}

/// Linear reconstruction `(I + r . sigma)/2`; a Bloch vector longer than 1
/// is scaled back onto the sphere.
pub fn reconstruct_state(counts: &TomographyCounts) -> Result<DensityMatrix> {
    Ok(bloch_to_state(counts.raw_bloch()?))
}

pub fn reconstruct_from_probabilities(probs: &BasisProbabilities) -> Result<DensityMatrix> {
    let mut r = [0.0; 3];
    for (k, b) in Basis::ALL.into_iter().enumerate() {
        let p = probs.get(b);
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Probability { name: "dark probability", value: p });
        }
        r[k] = dark_sign(b) * (2.0 * p - 1.0);
    }
    Ok(bloch_to_state(r))
}

/// Returns the six count sets ordered as [`MubState::ALL`].
pub fn order_six<T, F>(items: &[T], key: F) -> Result<[&T; 6]>
where
    F: Fn(&T) -> MubState,
{
    let mut slots: BTreeMap<MubState, &T> = BTreeMap::new();
    for item in items {
        if slots.insert(key(item), item).is_some() {
            return Err(Error::DuplicateInput(key(item).to_string()));
        }
    }
    let mut out = Vec::with_capacity(6);
    for m in MubState::ALL {
        out.push(*slots.get(&m).ok_or_else(|| Error::MissingInput(m.to_string()))?);
    }
    Ok(out.try_into().ok().expect("six entries"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFidelity {
    pub input: MubState,
    pub fidelity: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub per_state: Vec<StateFidelity>,
    pub f_bar: f64,
    pub f_bar_std_error: f64,
    pub f_process: Option<f64>,
    pub f_process_std_error: Option<f64>,
    /// `f_process - (3 f_bar - 1)/2`.
    pub relation_residual: Option<f64>,
}

impl FidelityReport {
    pub fn new(per_state: Vec<StateFidelity>, f_bar_std_error: f64) -> Self {
        let f_bar = per_state.iter().map(|s| s.fidelity).sum::<f64>() / per_state.len() as f64;
        Self {
            per_state,
            f_bar,
            f_bar_std_error,
            f_process: None,
            f_process_std_error: None,
            relation_residual: None,
        }
    }

    pub fn with_process(mut self, f_process: f64, std_error: Option<f64>) -> Self {
        self.f_process = Some(f_process);
        self.f_process_std_error = std_error;
        self.relation_residual = check_average_relation(&self);
        self
    }

    pub fn get(&self, input: MubState) -> Option<&StateFidelity> {
        self.per_state.iter().find(|s| s.input == input)
    }
}

/// `f_process - (3 f_bar - 1)/2`, once a process fidelity is attached.
pub fn check_average_relation(report: &FidelityReport) -> Option<f64> {
    report.f_process.map(|fp| fp - (3.0 * report.f_bar - 1.0) / 2.0)
}

fn state_fidelity(counts: &TomographyCounts) -> Result<f64> {
    let ideal = InputQubit::from(counts.input).ideal_state();
    qmath::fidelity_pure(&ideal, &reconstruct_state(counts)?)
}

/// Redraws every basis count from a binomial at its observed frequency.
pub fn resample_counts<R: Rng + ?Sized>(counts: &TomographyCounts, rng: &mut R) -> TomographyCounts {
    let mut out = counts.clone();
    for b in Basis::ALL {
        let c = counts.get(b);
        let n = c.shots();
        let p = c.dark as f64 / n as f64;
        let dark = Binomial::new(n, p).expect("valid binomial").sample(rng);
        *out.slot(b) = BasisCounts { dark, bright: n - dark };
    }
    out
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Per-state fidelities of the six reconstructed states with parametric
/// bootstrap standard errors.
pub fn fidelity_report<R: Rng + ?Sized>(
    counts: &[TomographyCounts],
    resamples: usize,
    rng: &mut R,
) -> Result<FidelityReport> {
    let six = order_six(counts, |c| c.input)?;
    let mut boot = vec![[0.0; 6]; resamples];
    for sample in boot.iter_mut() {
        for (k, c) in six.iter().enumerate() {
            sample[k] = state_fidelity(&resample_counts(c, rng))?;
        }
    }
    let mut per_state = Vec::with_capacity(6);
    for (k, c) in six.iter().enumerate() {
        let column: Vec<f64> = boot.iter().map(|s| s[k]).collect();
        per_state.push(StateFidelity {
            input: c.input,
            fidelity: state_fidelity(c)?,
            std_error: std_dev(&column),
        });
    }
    let means: Vec<f64> = boot.iter().map(|s| s.iter().sum::<f64>() / 6.0).collect();
    Ok(FidelityReport::new(per_state, std_dev(&means)))
}

/// Report from already reconstructed states; uncertainties are zero.
pub fn fidelity_report_from_states(states: &[(MubState, DensityMatrix)]) -> Result<FidelityReport> {
    let six = order_six(states, |s| s.0)?;
    let per_state = six
        .iter()
        .map(|(m, rho)| {
            Ok(StateFidelity {
                input: *m,
                fidelity: qmath::fidelity_pure(&InputQubit::from(*m).ideal_state(), rho)?,
                std_error: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FidelityReport::new(per_state, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmath::{c64, random_density, PureState};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(m: MubState) -> DensityMatrix {
        InputQubit::from(m).ideal_state().density()
    }

    #[test]
    fn settings_and_sign_convention() {
        assert_eq!(measurement_setting(Basis::Z), Operator::identity(1).unwrap());
        // |0> + |1> under R_y(pi/2) always reads bright, which the x sign maps to +1.
        let plus = state(MubState::PlusX);
        assert_abs_diff_eq!(dark_probability(&plus, Basis::X).unwrap(), 0.0, epsilon = 1e-15);
        let probs = exact_probabilities(&plus, 0.0).unwrap();
        let back = reconstruct_from_probabilities(&probs).unwrap();
        assert_abs_diff_eq!(back.bloch_vector().unwrap()[0], 1.0, epsilon = 1e-12);

        let plus_i = state(MubState::PlusY);
        let p = dark_probability(&plus_i, Basis::Y).unwrap();
        assert_abs_diff_eq!(p, 1.0, epsilon = 1e-12);

        assert_eq!(dark_sign(Basis::X), -1.0);
        assert_eq!(dark_sign(Basis::Y), 1.0);
        assert_eq!(dark_sign(Basis::Z), 1.0);
    }

    #[test]
    fn readout_observable_matches_sign() {
        for b in Basis::ALL {
            let u = measurement_setting(b);
            let z = qmath::pauli(3).unwrap();
            let obs = u.adjoint().compose(&z).unwrap().compose(&u).unwrap();
            let sigma = qmath::pauli(b.index()).unwrap();
            let expected = c64(dark_sign(b), 0.0) * &sigma;
            assert!((obs.entries() - expected.entries()).norm() < 1e-12);
        }
    }

    #[test]
    fn simulate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let zero = state(MubState::Zero);
        let c = simulate_counts(MubState::Zero, &zero, 500, 0.0, &mut rng).unwrap();
        assert_eq!(c.z, BasisCounts { bright: 0, dark: 500 });

        let mixed = DensityMatrix::maximally_mixed(vec![Label::AtomB]).unwrap();
        let n = 100_000;
        let c = simulate_counts(MubState::Zero, &mixed, n, 0.0, &mut rng).unwrap();
        for b in Basis::ALL {
            let f = c.get(b).bright as f64 / n as f64;
            assert!((f - 0.5).abs() < 0.005, "{b}: {f}");
        }

        let c = simulate_counts(MubState::Zero, &zero, n, 0.02, &mut rng).unwrap();
        let f = c.z.bright as f64 / n as f64;
        assert!((f - 0.02).abs() < 0.002, "{f}");

        assert!(matches!(simulate_counts(MubState::Zero, &zero, 0, 0.0, &mut rng), Err(Error::NoShots)));
    }

    #[test]
    fn reconstruction_examples() {
        let n = 1000;
        let balanced = BasisCounts { bright: n / 2, dark: n / 2 };
        let c = TomographyCounts {
            input: MubState::Zero,
            x: balanced,
            y: balanced,
            z: BasisCounts { bright: 0, dark: n },
        };
        let rho = reconstruct_state(&c).unwrap();
        assert!((rho.entries() - state(MubState::Zero).entries()).norm() < 1e-15);

        let c = TomographyCounts { z: balanced, ..c };
        let rho = reconstruct_state(&c).unwrap();
        let half = DensityMatrix::maximally_mixed(vec![Label::AtomB]).unwrap();
        assert!((rho.entries() - half.entries()).norm() < 1e-15);

        let c = TomographyCounts { y: BasisCounts::default(), ..c };
        assert!(matches!(reconstruct_state(&c), Err(Error::ZeroShots { basis: Basis::Y, .. })));
    }

    #[test]
    fn unphysical_counts_are_rescaled() {
        // Pure z and pure x at once is outside the Bloch ball.
        let c = TomographyCounts {
            input: MubState::Zero,
            x: BasisCounts { bright: 100, dark: 0 },
            y: BasisCounts { bright: 50, dark: 50 },
            z: BasisCounts { bright: 0, dark: 100 },
        };
        let rho = reconstruct_state(&c).unwrap();
        rho.validate().unwrap();
        let r = rho.bloch_vector().unwrap();
        assert_abs_diff_eq!(r.iter().map(|x| x * x).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_at_infinite_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let rho = random_density(&mut rng, vec![Label::AtomB]).unwrap();
            let back = reconstruct_from_probabilities(&exact_probabilities(&rho, 0.0).unwrap()).unwrap();
            assert!(qmath::trace_distance(&rho, &back).unwrap() < 1e-9);
        }
    }

    #[test]
    fn report_examples() {
        let ideal: Vec<(MubState, DensityMatrix)> = MubState::ALL.iter().map(|&m| (m, state(m))).collect();
        let r = fidelity_report_from_states(&ideal).unwrap();
        assert_abs_diff_eq!(r.f_bar, 1.0, epsilon = 1e-12);

        let quoted = [0.91, 0.88, 0.92, 0.91, 0.93, 0.88];
        let per_state = MubState::ALL
            .iter()
            .zip(quoted)
            .map(|(&input, fidelity)| StateFidelity { input, fidelity, std_error: 0.0 })
            .collect();
        let r = FidelityReport::new(per_state, 0.0);
        assert_abs_diff_eq!(r.f_bar, 0.905, epsilon = 1e-12);

        let r = r.with_process(0.84, None);
        // (3 * 0.905 - 1)/2 = 0.8575
        assert_abs_diff_eq!(r.relation_residual.unwrap(), 0.84 - 0.8575, epsilon = 1e-12);
        let r = FidelityReport { f_bar: 0.90, ..r };
        assert_abs_diff_eq!(check_average_relation(&r).unwrap(), -0.01, epsilon = 1e-12);

        let perfect = FidelityReport::new(vec![StateFidelity { input: MubState::Zero, fidelity: 1.0, std_error: 0.0 }], 0.0)
            .with_process(1.0, None);
        assert_eq!(perfect.relation_residual, Some(0.0));
    }

    #[test]
    fn report_requires_all_six() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut counts: Vec<TomographyCounts> = MubState::ALL
            .iter()
            .map(|&m| simulate_counts(m, &state(m), 50, 0.0, &mut rng).unwrap())
            .collect();
        let r = fidelity_report(&counts, 50, &mut rng).unwrap();
        assert!(r.f_bar > 0.95 && r.f_bar <= 1.0);
        assert!(r.per_state.iter().all(|s| s.std_error > 0.0));
        assert_eq!(r.per_state.len(), 6);
        counts.pop();
        assert!(matches!(fidelity_report(&counts, 10, &mut rng), Err(Error::MissingInput(_))));
        counts.push(counts[0].clone());
        assert!(matches!(fidelity_report(&counts, 10, &mut rng), Err(Error::DuplicateInput(_))));
    }

    #[test]
    fn bootstrap_error_matches_binomial_scale() {
        // Equatorial state with fidelity ~0.9 and 72 shots per basis.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plus = PureState::qubit(c64(std::f64::consts::FRAC_1_SQRT_2, 0.0), c64(std::f64::consts::FRAC_1_SQRT_2, 0.0), Label::AtomB)
            .unwrap()
            .density();
        let rho = noise::depolarize(&plus, 0.2).unwrap();
        let counts: Vec<TomographyCounts> = MubState::ALL
            .iter()
            .map(|&m| {
                let r = if m == MubState::PlusX { rho.clone() } else { state(m) };
                simulate_counts(m, &r, 72, 0.0, &mut rng).unwrap()
            })
            .collect();
        let r = fidelity_report(&counts, 400, &mut rng).unwrap();
        let err = r.get(MubState::PlusX).unwrap().std_error;
        // f = (1 + r_x)/2 with var(r_x) = (1 - r_x^2)/72, r_x = 0.8.
        let expected = 0.5 * ((1.0 - 0.64f64) / 72.0).sqrt();
        assert!((err - expected).abs() < 0.4 * expected, "{err} vs {expected}");
    }
}
