use heralded_teleport::noise::NoiseBudget;
use heralded_teleport::protocol::{
    attempt_herald, run_teleport, Correction, InputQubit, MubState, TeleportSettings,
};
use heralded_teleport::ratebudget::{gate_probability, sample_wait, RateParams};
use heralded_teleport::stats::{chi_square_geometric, ks_two_sample};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn herald_rate_does_not_depend_on_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let n = 20_000;
    // Binomial standard error at p = 1/4.
    let sigma = (0.25f64 * 0.75 / n as f64).sqrt();
    for _ in 0..20 {
        let input = InputQubit::haar_random(&mut rng);
        let hits = (0..n)
            .filter(|_| attempt_herald(&input, &NoiseBudget::NOISELESS, &mut rng).unwrap().success)
            .count();
        let rate = hits as f64 / n as f64;
        assert!((rate - 0.25).abs() < 5.0 * sigma, "{rate}");
    }
}

#[test]
fn conditional_attempts_follow_geometric_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let input = InputQubit::haar_random(&mut rng);
    let settings = TeleportSettings::conditional();
    let attempts: Vec<u64> = (0..20_000)
        .map(|_| run_teleport(&input, None, &settings, &mut rng).unwrap().attempt_count)
        .collect();
    let (_, p) = chi_square_geometric(&attempts, 0.25);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn classical_record_is_two_bits_and_carries_no_amplitude() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let settings = TeleportSettings::conditional();
    let n = 8_000;
    let sigma = (0.25 / n as f64).sqrt();
    let mut inputs: Vec<InputQubit> = vec![MubState::Zero.into(), MubState::One.into(), MubState::PlusY.into()];
    inputs.extend((0..3).map(|_| InputQubit::haar_random(&mut rng)));
    for input in &inputs {
        for noise in [None, Some(NoiseBudget::paper())] {
            let mut zeros = 0;
            for _ in 0..n {
                let o = run_teleport(input, noise.as_ref(), &settings, &mut rng).unwrap();
                assert!(o.herald_success);
                assert!(o.measured_bit_a <= 1);
                assert_eq!(o.feed_forward_applied, Correction::for_bit(o.measured_bit_a));
                zeros += usize::from(o.measured_bit_a == 0);
            }
            let f = zeros as f64 / n as f64;
            assert!((f - 0.5).abs() < 5.0 * sigma, "{f}");
        }
    }
}

#[test]
fn rate_realistic_attempts_match_waiting_time_law() {
    let params = RateParams::unit_efficiency(0.05);
    assert!((gate_probability(&params) - 0.05f64.powi(2) / 4.0).abs() < 1e-15);
    let settings = TeleportSettings::rate_realistic(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let input = InputQubit::haar_random(&mut rng);
    let noise = NoiseBudget::paper();
    let simulated: Vec<f64> = (0..3000)
        .map(|_| run_teleport(&input, Some(&noise), &settings, &mut rng).unwrap().attempt_count as f64)
        .collect();
    let direct: Vec<f64> = (0..3000).map(|_| sample_wait(&params, &mut rng).unwrap() as f64).collect();
    let (_, p) = ks_two_sample(&simulated, &direct);
    assert!(p > 0.01, "p = {p}");
}
