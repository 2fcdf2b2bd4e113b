//! Subcommand bodies. Each returns the names of the files it wrote plus a
//! short human-readable summary.
//!
//! Seeding: every random draw comes from `ChaCha8Rng::seed_from_u64(seed)`
//! with stream `(kind << 60) | (state << 32) | event`, where `kind` is 0 for
//! teleport events, 1 for tomography shots and 2 for bootstrap resampling.
//! Results therefore do not depend on the number of worker threads.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{InputSpec, RunConfig};
use super::output::{
    complex_rows, write_json, write_table, write_text, BudgetOutput, ChiEntry, CountsFile, EventRecord, Format,
    ProcessReport, StateMatrix, StateSummary, SummaryRow, TeleportSummary, TomographyReport,
};
use crate::error::Result;
use crate::noise::budget_breakdown;
use crate::protocol::{run_teleport, MubState, TeleportOutcome};
use crate::qmath::{fidelity_pure, DensityMatrix, Label};
use crate::ratebudget::budget_report;
use crate::tomography::{
    fidelity_report, linear_inversion, reconstruct_process, reconstruct_state, simulate_counts, MleOptions,
    ProcessData, ProcessFit, TomographyCounts,
};

pub const STREAM_TELEPORT: u64 = 0;
pub const STREAM_SHOTS: u64 = 1;
pub const STREAM_BOOTSTRAP: u64 = 2;

pub fn stream_rng(seed: u64, kind: u64, state: u64, event: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 60) | (state << 32) | (event & 0xffff_ffff));
    rng
}

#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub files: Vec<String>,
    pub summary: String,
}

/// Heralded events for one input, run in parallel and returned in event order.
pub fn teleport_events(config: &RunConfig, state_index: usize, input: &InputSpec) -> Result<Vec<TeleportOutcome>> {
    let settings = config.teleport_settings();
    (0..config.heralds_per_state)
        .into_par_iter()
        .map(|event| {
            let mut rng = stream_rng(config.seed, STREAM_TELEPORT, state_index as u64, event);
            run_teleport(&input.qubit, Some(&config.noise), &settings, &mut rng)
        })
        .collect()
}

/// Mean of the final states of atom B.
pub fn average_state(events: &[TeleportOutcome]) -> Result<DensityMatrix> {
    let mut sum = DMatrix::<Complex64>::zeros(2, 2);
    for e in events {
        sum += e.final_rho_b.entries();
    }
    sum /= Complex64::new(events.len() as f64, 0.0);
    DensityMatrix::new(sum, vec![Label::AtomB])
}

fn event_record(input: &str, event: u64, o: &TeleportOutcome) -> EventRecord {
    let r = o.final_rho_b.entries();
    EventRecord {
        input: input.to_string(),
        event,
        attempts: o.attempt_count,
        bit: o.measured_bit_a,
        correction: o.feed_forward_applied.to_string(),
        rho00_re: r[(0, 0)].re,
        rho00_im: r[(0, 0)].im,
        rho01_re: r[(0, 1)].re,
        rho01_im: r[(0, 1)].im,
        rho10_re: r[(1, 0)].re,
        rho10_im: r[(1, 0)].im,
        rho11_re: r[(1, 1)].re,
        rho11_im: r[(1, 1)].im,
    }
}

pub fn cmd_teleport(config: &RunConfig, out: &Path, format: Format) -> Result<CommandOutput> {
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    let mut states = Vec::new();
    for (i, input) in config.input_states.iter().enumerate() {
        let events = teleport_events(config, i, input)?;
        let rho = average_state(&events)?;
        let n = events.len() as f64;
        summaries.push(StateSummary {
            input: input.label.clone(),
            heralds: events.len() as u64,
            mean_attempts: events.iter().map(|e| e.attempt_count as f64).sum::<f64>() / n,
            bit0_fraction: events.iter().filter(|e| e.measured_bit_a == 0).count() as f64 / n,
            fidelity: fidelity_pure(&input.qubit.ideal_state(), &rho)?,
        });
        records.extend(events.iter().enumerate().map(|(k, o)| event_record(&input.label, k as u64, o)));
        states.push(StateMatrix { input: input.label.clone(), rho: complex_rows(rho.entries()) });
    }
    let f_bar = config
        .mub_inputs()
        .ok()
        .map(|_| {
            let mub: Vec<f64> =
                summaries.iter().zip(&config.input_states).filter(|(_, s)| s.mub.is_some()).map(|(r, _)| r.fidelity).collect();
            mub.iter().sum::<f64>() / mub.len() as f64
        });

    let mut summary = String::new();
    for s in &summaries {
        writeln!(summary, "{:>8}  f = {:.4}  heralds = {}  mean attempts = {:.1}", s.input, s.fidelity, s.heralds, s.mean_attempts)
            .unwrap();
    }
    if let Some(f) = f_bar {
        writeln!(summary, "average fidelity over the six basis inputs: {f:.4}").unwrap();
    }

    let files = vec![
        write_table(out, "events", &records, format)?,
        write_table(out, "summary", &summaries, format)?,
        write_json(out, "states.json", &states)?,
        write_json(out, "teleport_summary.json", &TeleportSummary { states: summaries, f_bar })?,
    ];
    Ok(CommandOutput { files, summary })
}

/// Simulated tomography counts: the event-averaged state of each basis input
/// is measured `shots_per_basis` times per basis.
pub fn simulate_tomography(config: &RunConfig) -> Result<Vec<TomographyCounts>> {
    let inputs = config.mub_inputs()?;
    inputs
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let events = teleport_events(config, i, &InputSpec::mub(m))?;
            let rho = average_state(&events)?;
            let mut rng = stream_rng(config.seed, STREAM_SHOTS, i as u64, 0);
            simulate_counts(m, &rho, config.shots_per_basis, config.noise.detection_error, &mut rng)
        })
        .collect()
}

fn load_or_simulate(config: &RunConfig, counts: Option<&Path>) -> Result<Vec<TomographyCounts>> {
    match counts {
        Some(path) => Ok(CountsFile::load(path)?.counts),
        None => simulate_tomography(config),
    }
}

pub fn fit_process(config: &RunConfig, counts: &[TomographyCounts]) -> Result<(ProcessData, ProcessFit)> {
    let data = ProcessData::from_counts(counts)?;
    let options = MleOptions { starts: config.mle_starts, seed: config.seed, ..Default::default() };
    let fit = reconstruct_process(&data, &options)?;
    Ok((data, fit))
}

fn process_note(fit: &ProcessFit) -> String {
    if fit.converged {
        String::new()
    } else {
        format!(
            "warning: MLE did not converge after {} iterations (gradient norm {:.2e})\n",
            fit.iterations, fit.gradient_norm
        )
    }
}

pub fn cmd_tomography(config: &RunConfig, counts: Option<&Path>, out: &Path, format: Format) -> Result<CommandOutput> {
    let counts = load_or_simulate(config, counts)?;
    let mut boot = stream_rng(config.seed, STREAM_BOOTSTRAP, 0, 0);
    let report = fidelity_report(&counts, config.bootstrap_resamples, &mut boot)?;
    let (_, fit) = fit_process(config, &counts)?;
    let report = report.with_process(fit.process_fidelity, None);

    let mut states = Vec::new();
    for m in MubState::ALL {
        let c = counts.iter().find(|c| c.input == m).expect("validated by the report");
        states.push(StateMatrix { input: m.to_string(), rho: complex_rows(reconstruct_state(c)?.entries()) });
    }

    let mut rows: Vec<SummaryRow> = report
        .per_state
        .iter()
        .map(|s| SummaryRow {
            quantity: "fidelity".into(),
            input: s.input.to_string(),
            value: s.fidelity,
            std_error: Some(s.std_error),
        })
        .collect();
    rows.push(SummaryRow { quantity: "f_bar".into(), input: String::new(), value: report.f_bar, std_error: Some(report.f_bar_std_error) });
    rows.push(SummaryRow { quantity: "f_process".into(), input: String::new(), value: fit.process_fidelity, std_error: None });
    rows.push(SummaryRow {
        quantity: "relation_residual".into(),
        input: String::new(),
        value: report.relation_residual.expect("process attached"),
        std_error: None,
    });

    let mut summary = String::new();
    for s in &report.per_state {
        writeln!(summary, "{:>4}  f = {:.3}({:.0})", s.input, s.fidelity, s.std_error * 1e3).unwrap();
    }
    writeln!(summary, "average fidelity  {:.3} +- {:.3}", report.f_bar, report.f_bar_std_error).unwrap();
    writeln!(summary, "process fidelity  {:.3}", fit.process_fidelity).unwrap();
    writeln!(summary, "f_process - (3 f_bar - 1)/2 = {:+.4}", report.relation_residual.unwrap()).unwrap();
    summary.push_str(&process_note(&fit));

    let files = vec![
        write_text(out, "counts.json", &CountsFile { counts }.to_json()?)?,
        write_json(out, "reconstructed_states.json", &states)?,
        write_json(out, "tomography.json", &TomographyReport { fidelity: report, process: fit })?,
        write_table(out, "tomography_summary", &rows, format)?,
    ];
    Ok(CommandOutput { files, summary })
}

pub fn cmd_process(config: &RunConfig, counts: Option<&Path>, out: &Path, format: Format) -> Result<CommandOutput> {
    let counts = load_or_simulate(config, counts)?;
    let (data, fit) = fit_process(config, &counts)?;
    let chi = fit.chi.entries();
    let entries: Vec<ChiEntry> = (0..4)
        .flat_map(|row| (0..4).map(move |col| (row, col)))
        .map(|(row, col)| {
            let z = chi[(row, col)];
            ChiEntry { row, col, re: z.re, im: z.im, abs: z.norm() }
        })
        .collect();
    let lin = linear_inversion(&data);
    let lin = DMatrix::from_fn(4, 4, |r, c| lin[(r, c)]);

    let mut summary = format!(
        "process fidelity {:.4}  (best of {} starts: #{}, {} iterations)\n",
        fit.process_fidelity, fit.starts, fit.best_start, fit.iterations
    );
    summary.push_str(&process_note(&fit));
    let files = vec![
        write_json(out, "process.json", &ProcessReport { fit, linear_inversion: complex_rows(&lin) })?,
        write_table(out, "chi", &entries, format)?,
    ];
    Ok(CommandOutput { files, summary })
}

pub fn cmd_budget(config: &RunConfig, out: &Path, format: Format) -> Result<CommandOutput> {
    let rate = budget_report(&config.rate)?;
    let noise = budget_breakdown(&config.noise)?;
    let mut summary = format!(
        "gate probability {:.4e} (quoted {:.1e}, deviation {:+.1}%)\n\
         expected wait {:.4} s ({:.2} min); at the quoted probability {:.1} s\n",
        rate.gate_probability,
        rate.quoted_gate_probability,
        100.0 * rate.quoted_deviation,
        rate.expected_wait_s,
        rate.expected_wait_s / 60.0,
        rate.expected_wait_quoted_s,
    );
    for l in &noise.lines {
        writeln!(summary, "{:?}: {:.4}", l.channel, l.standalone_cost).unwrap();
    }
    writeln!(summary, "combined infidelity {:.4}", noise.combined_cost).unwrap();
    let files = vec![
        write_table(out, "sensitivity", &rate.sensitivity, format)?,
        write_table(out, "noise_budget", &noise.lines, format)?,
        write_json(out, "budget.json", &BudgetOutput { rate, noise })?,
    ];
    Ok(CommandOutput { files, summary })
}
