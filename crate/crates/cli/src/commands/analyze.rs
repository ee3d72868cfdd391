use anyhow::Result;
use serde::Serialize;

use smf_core::identifiability::{analyze, oracle_summary};
use smf_core::{FactorPair, Orientation};

use super::Run;
use crate::args::AnalyzeArgs;

#[derive(Serialize)]
struct AnalyzeConfig {
    orientation: Orientation,
    zero_tol: f64,
    samples: usize,
    seed: u64,
    step: f64,
}

pub(super) fn run(args: &AnalyzeArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    run.set_config(
        &AnalyzeConfig {
            orientation: args.orientation,
            zero_tol: args.zero_tol,
            samples: args.samples,
            seed: args.seed,
            step: args.step,
        },
        Some(args.seed),
    )?;
    if args.zero_tol.is_nan() || args.zero_tol < 0.0 || args.step.is_nan() || args.step <= 0.0 {
        anyhow::bail!(smf_core::SmfError::invalid("zero-tol must be >= 0 and step > 0"));
    }
    let w = run.read_matrix(&args.w)?;
    let h = run.read_matrix(&args.h)?;
    let factors = FactorPair::new(w, h, args.orientation)?;

    let mut report = analyze(&factors, args.zero_tol)?;
    if args.samples > 0 {
        report.oracle = Some(oracle_summary(
            &factors,
            &report.bounds,
            args.samples,
            args.seed,
            args.step,
            args.zero_tol,
        ));
    }
    run.write_json("report.json", &report)?;
    println!(
        "unique: {}, {} violations, {} bounds, max width {:.6}",
        report.unique,
        report.violations.len(),
        report.bounds.len(),
        report.summary.max_width
    );
    Ok(run)
}
