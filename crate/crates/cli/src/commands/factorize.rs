use anyhow::Result;
use serde::Serialize;

use smf_core::solver::{factorize, SolveResult};
use smf_core::{DenseMatrix, Mode, Orientation, SolverConfig};

use super::Run;
use crate::args::FactorizeArgs;

/// Contents of `result.json`. Timing lives only in the manifest so results
/// stay bitwise reproducible.
#[derive(Debug, Serialize)]
pub(super) struct FitReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub orientation: Orientation,
    pub mode: Mode,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub best_restart: usize,
    pub restart_objectives: Vec<f64>,
    pub feasibility: Feasibility,
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub(super) struct Feasibility {
    pub max_w_row_sum_error: f64,
    pub max_h_row_sum_error: f64,
    pub min_w: f64,
    pub min_h: f64,
    pub max_h: f64,
}

fn max_row_sum_error(m: &DenseMatrix) -> f64 {
    m.row_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

impl FitReport {
    pub(super) fn new(x: &DenseMatrix, config: &SolverConfig, result: SolveResult) -> Self {
        let (w, h) = (result.factors.w(), result.factors.h());
        let feasibility = Feasibility {
            max_w_row_sum_error: max_row_sum_error(w),
            max_h_row_sum_error: max_row_sum_error(h),
            min_w: w.min_value(),
            min_h: h.min_value(),
            max_h: h.max_value(),
        };
        FitReport {
            rows: x.rows(),
            cols: x.cols(),
            rank: config.rank,
            orientation: config.orientation,
            mode: config.mode,
            objective: result.objective,
            converged: result.converged,
            iterations: result.iterations,
            best_restart: result.best_restart,
            restart_objectives: result.restart_objectives,
            feasibility,
            objective_trace: result.objective_trace,
        }
    }

    pub(super) fn summary(&self) -> String {
        format!(
            "objective {:.6e}, {} after {} iterations (best restart {})",
            self.objective,
            if self.converged { "converged" } else { "not converged" },
            self.iterations,
            self.best_restart
        )
    }
}

pub(super) fn run(args: &FactorizeArgs) -> Result<Run> {
    let mut run = Run::new(&args.out)?;
    let config = args.solver.config(args.orientation);
    run.set_config(&config, Some(config.seed))?;
    let x = run.read_matrix(&args.input)?;

    let result = factorize(&x, &config)?;
    run.write_matrix("W", result.factors.w())?;
    run.write_matrix("H", result.factors.h())?;
    let report = FitReport::new(&x, &config, result);
    run.write_json("result.json", &report)?;
    println!("{}", report.summary());
    Ok(run)
}
