//! Sweep execution. Cells are independent runs with their own seeds, so they
//! can be spread over a rayon pool; results keep the cell order either way.

use std::panic::{catch_unwind, AssertUnwindSafe};

use crate::error::ConfigError;
use crate::metrics::BssStats;
use crate::scenario::{Cell, SweepSpec};
use crate::sim::{RunReport, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when built with the `parallel` feature; falls back
    /// to sequential execution otherwise.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub scheme: String,
    pub total_load_bps: f64,
    pub seed: u64,
    pub outcome: Result<RunReport, String>,
}

fn run_cell(cell: &Cell) -> CellResult {
    let outcome = catch_unwind(AssertUnwindSafe(|| {
        Simulation::new(&cell.scenario, cell.seed).map(Simulation::run)
    }));
    let outcome = match outcome {
        Ok(Ok(report)) => Ok(report),
        Ok(Err(e)) => Err(e.to_string()),
        Err(panic) => Err(panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "run panicked".into())),
    };
    CellResult {
        scheme: cell.scenario.name.clone(),
        total_load_bps: cell.total_load_bps,
        seed: cell.seed,
        outcome,
    }
}

/// Runs every cell; a failing cell is reported without affecting the others.
pub fn run_cells(cells: &[Cell], exec: Execution) -> Vec<CellResult> {
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            cells.par_iter().map(run_cell).collect()
        }
        _ => cells.iter().map(run_cell).collect(),
    }
}

pub fn sweep(spec: &SweepSpec, exec: Execution) -> Result<SweepTable, ConfigError> {
    let cells = spec.cells()?;
    Ok(SweepTable {
        results: run_cells(&cells, exec),
    })
}

/// Ordered results of a sweep.
#[derive(Debug, Clone, Default)]
pub struct SweepTable {
    pub results: Vec<CellResult>,
}

impl SweepTable {
    pub fn reports(&self) -> impl Iterator<Item = &RunReport> {
        self.results.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = &CellResult> {
        self.results.iter().filter(|r| r.outcome.is_err())
    }

    pub fn schemes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.results {
            if !out.contains(&r.scheme) {
                out.push(r.scheme.clone());
            }
        }
        out
    }

    pub fn loads(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.results {
            if !out.contains(&r.total_load_bps) {
                out.push(r.total_load_bps);
            }
        }
        out
    }

    /// Every BSS of every seed replicate of `(scheme, load)`, pooled.
    pub fn pooled(&self, scheme: &str, total_load_bps: f64) -> Option<BssStats> {
        let members: Vec<&BssStats> = self
            .results
            .iter()
            .filter(|r| r.scheme == scheme && r.total_load_bps == total_load_bps)
            .filter_map(|r| r.outcome.as_ref().ok())
            .flat_map(|rep| rep.bss.iter())
            .collect();
        BssStats::pooled(scheme, members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Preset;

    fn small_spec() -> SweepSpec {
        SweepSpec {
            preset: Some(Preset::Fig2),
            loads_bps: vec![0.1e9, 0.4e9],
            seeds: Some(vec![1, 2]),
            duration_s: Some(0.2),
            warmup_fraction: None,
            schemes: Vec::new(),
        }
    }

    #[test]
    fn order_and_results_match_across_execution_modes() {
        let spec = small_spec();
        let seq = sweep(&spec, Execution::Sequential).unwrap();
        let par = sweep(&spec, Execution::Parallel).unwrap();
        assert_eq!(seq.results.len(), 12);
        for (a, b) in seq.results.iter().zip(&par.results) {
            assert_eq!(a.scheme, b.scheme);
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
        }
    }

    #[test]
    fn failing_cell_is_isolated() {
        let mut cells = small_spec().cells().unwrap();
        cells[1].scenario.bss[0].channels = vec![99];
        let results = run_cells(&cells[..3], Execution::Parallel);
        assert!(results[0].outcome.is_ok());
        assert!(results[1]
            .outcome
            .as_ref()
            .unwrap_err()
            .contains("channel 99"));
        assert!(results[2].outcome.is_ok());
    }

    #[test]
    fn pooling_covers_all_seeds() {
        let table = sweep(&small_spec(), Execution::Sequential).unwrap();
        let pooled = table.pooled("SL", 0.4e9).unwrap();
        let per_seed: usize = table
            .results
            .iter()
            .filter(|r| r.scheme == "SL" && r.total_load_bps == 0.4e9)
            .map(|r| r.outcome.as_ref().unwrap().bss[0].delays_ns.len())
            .sum();
        assert_eq!(pooled.delays_ns.len(), per_seed);
        assert_eq!(table.schemes(), vec!["SL", "STR-EMLMR:2", "STR-EMLMR:4"]);
        assert_eq!(table.loads(), vec![0.1e9, 0.4e9]);
    }
}
