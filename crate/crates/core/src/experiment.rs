//! Experiment harness: sweeps (vm_count, seed) pairs, runs the exact solver
//! against the random baseline, and writes CSV/JSON reports plus a plain-text
//! comparison table.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Topology;
use crate::power::total_power;
use crate::scenario::{baseline_place, generate_scenario, GeneratorParams};
use crate::solver::{solve_exact, SolveStatus, SolverConfig};

/// Decorrelates the baseline's RNG stream from the generator's.
pub const BASELINE_SEED_SALT: u64 = 0x5EED_BA5E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Baseline,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Baseline => "baseline",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub vm_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub modes: Vec<Mode>,
    pub topology: Topology,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub vm_count: usize,
    pub seed: u64,
    pub mode: Mode,
    pub status: String,
    pub total_w: Option<f64>,
    pub spc_w: Option<f64>,
    pub onu_w: Option<f64>,
    pub active_servers: Option<usize>,
    pub nodes_explored: u64,
    /// Wall-clock time; reported on stderr only, never in the CSV, so report
    /// files stay byte-identical across runs.
    #[serde(skip)]
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VmCountSummary {
    pub vm_count: usize,
    pub seeds_total: usize,
    /// Seeds where both modes produced a feasible placement.
    pub compared: usize,
    pub excluded: usize,
    pub proven_optimal: usize,
    pub mean_baseline_w: Option<f64>,
    pub mean_exact_w: Option<f64>,
    /// Headline savings: 1 - mean(exact) / mean(baseline).
    pub savings_ratio_of_means: Option<f64>,
    pub savings_mean_of_ratios: Option<f64>,
    pub mean_active_exact: Option<f64>,
    pub mean_active_baseline: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub per_vm_count: Vec<VmCountSummary>,
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment spec needs at least one vm_count, seed, and mode")]
    EmptySpec,
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Runs the full sweep. Rows are sorted by (vm_count, seed, mode); per-row
/// failures are recorded in the status column, never propagated.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<(Vec<ExperimentRow>, Summary), ExperimentError> {
    if spec.vm_counts.is_empty() || spec.seeds.is_empty() || spec.modes.is_empty() {
        return Err(ExperimentError::EmptySpec);
    }
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut vm_counts = spec.vm_counts.clone();
    vm_counts.sort_unstable();
    vm_counts.dedup();

    for &vm_count in &vm_counts {
        let mut exact_w = Vec::new();
        let mut base_w = Vec::new();
        let mut exact_active = Vec::new();
        let mut base_active = Vec::new();
        let mut excluded = 0usize;
        let mut proven = 0usize;

        for &seed in &spec.seeds {
            let scenario = match generate_scenario(&GeneratorParams::new(vm_count, seed), &spec.topology) {
                Ok(sc) => sc,
                Err(_) => {
                    for &mode in &spec.modes {
                        rows.push(ExperimentRow {
                            vm_count,
                            seed,
                            mode,
                            status: "generation_failed".into(),
                            total_w: None,
                            spc_w: None,
                            onu_w: None,
                            active_servers: None,
                            nodes_explored: 0,
                            wall_ms: 0,
                        });
                    }
                    excluded += 1;
                    continue;
                }
            };

            let mut pair: Vec<(Mode, Option<(f64, usize)>)> = Vec::new();
            for &mode in &spec.modes {
                let start = Instant::now();
                let row = match mode {
                    Mode::Exact => {
                        let r = solve_exact(&scenario, &spec.solver);
                        if r.status == SolveStatus::Optimal {
                            proven += 1;
                        }
                        let status = match r.status {
                            SolveStatus::Optimal => "optimal",
                            SolveStatus::Infeasible => "infeasible",
                            SolveStatus::NodeLimit => "node_limit",
                        };
                        ExperimentRow {
                            vm_count,
                            seed,
                            mode,
                            status: status.into(),
                            total_w: r.power.map(|p| p.total_w),
                            spc_w: r.power.map(|p| p.spc_w),
                            onu_w: r.power.map(|p| p.onu_w),
                            active_servers: r.power.map(|p| p.active_servers),
                            nodes_explored: r.nodes_explored,
                            wall_ms: start.elapsed().as_millis(),
                        }
                    }
                    Mode::Baseline => match baseline_place(&scenario, seed ^ BASELINE_SEED_SALT) {
                        Ok(p) => {
                            let pw = total_power(&p, &scenario);
                            ExperimentRow {
                                vm_count,
                                seed,
                                mode,
                                status: "feasible".into(),
                                total_w: Some(pw.total_w),
                                spc_w: Some(pw.spc_w),
                                onu_w: Some(pw.onu_w),
                                active_servers: Some(pw.active_servers),
                                nodes_explored: 0,
                                wall_ms: start.elapsed().as_millis(),
                            }
                        }
                        Err(_) => ExperimentRow {
                            vm_count,
                            seed,
                            mode,
                            status: "infeasible".into(),
                            total_w: None,
                            spc_w: None,
                            onu_w: None,
                            active_servers: None,
                            nodes_explored: 0,
                            wall_ms: start.elapsed().as_millis(),
                        },
                    },
                };
                pair.push((mode, row.total_w.map(|w| (w, row.active_servers.unwrap_or(0)))));
                rows.push(row);
            }

            let exact = pair.iter().find(|(m, _)| *m == Mode::Exact).and_then(|(_, v)| *v);
            let base = pair
                .iter()
                .find(|(m, _)| *m == Mode::Baseline)
                .and_then(|(_, v)| *v);
            match (exact, base) {
                (Some((ew, ea)), Some((bw, ba))) => {
                    exact_w.push(ew);
                    base_w.push(bw);
                    exact_active.push(ea as f64);
                    base_active.push(ba as f64);
                }
                _ => excluded += 1,
            }
        }

        let mean = |v: &[f64]| {
            if v.is_empty() {
                None
            } else {
                Some(v.iter().sum::<f64>() / v.len() as f64)
            }
        };
        let mean_exact = mean(&exact_w);
        let mean_base = mean(&base_w);
        let ratios: Vec<f64> = exact_w
            .iter()
            .zip(&base_w)
            .map(|(e, b)| 1.0 - e / b)
            .collect();
        summaries.push(VmCountSummary {
            vm_count,
            seeds_total: spec.seeds.len(),
            compared: exact_w.len(),
            excluded,
            proven_optimal: proven,
            mean_baseline_w: mean_base,
            mean_exact_w: mean_exact,
            savings_ratio_of_means: match (mean_exact, mean_base) {
                (Some(e), Some(b)) if b > 0.0 => Some(1.0 - e / b),
                _ => None,
            },
            savings_mean_of_ratios: mean(&ratios),
            mean_active_exact: mean(&exact_active),
            mean_active_baseline: mean(&base_active),
        });
    }

    rows.sort_by(|a, b| {
        (a.vm_count, a.seed, a.mode).cmp(&(b.vm_count, b.seed, b.mode))
    });
    Ok((rows, Summary { per_vm_count: summaries }))
}

pub const CSV_HEADER: [&str; 9] = [
    "vm_count",
    "seed",
    "mode",
    "status",
    "total_w",
    "spc_w",
    "onu_w",
    "active_servers",
    "nodes_explored",
];

/// Serializes the rows as RFC-4180 CSV with a fixed header. Output depends
/// only on the row contents, so identical specs yield identical bytes.
pub fn rows_to_csv(rows: &[ExperimentRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("csv header");
    let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.vm_count.to_string(),
            r.seed.to_string(),
            r.mode.as_str().to_string(),
            r.status.clone(),
            opt_f(r.total_w),
            opt_f(r.spc_w),
            opt_f(r.onu_w),
            r.active_servers.map(|a| a.to_string()).unwrap_or_default(),
            r.nodes_explored.to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

/// Plain-text comparison table: power and active servers per vm_count per
/// mode, with the headline savings column.
pub fn summary_table(summary: &Summary) -> String {
    let mut out = String::new();
    out.push_str(
        "vm_count  mean_power_baseline_w  mean_power_exact_w  savings  mean_servers_baseline  mean_servers_exact\n",
    );
    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.1}"),
        None => "-".to_string(),
    };
    let fmt_pct = |v: Option<f64>| match v {
        Some(x) => format!("{:.1}%", x * 100.0),
        None => "-".to_string(),
    };
    for s in &summary.per_vm_count {
        out.push_str(&format!(
            "{:<8}  {:>21}  {:>18}  {:>7}  {:>21}  {:>18}\n",
            s.vm_count,
            fmt(s.mean_baseline_w),
            fmt(s.mean_exact_w),
            fmt_pct(s.savings_ratio_of_means),
            fmt(s.mean_active_baseline),
            fmt(s.mean_active_exact),
        ));
    }
    out
}

/// Writes results.csv and summary.json. Either path may be omitted.
pub fn emit_reports(
    rows: &[ExperimentRow],
    summary: &Summary,
    csv_path: Option<&Path>,
    json_path: Option<&Path>,
) -> Result<(), ExperimentError> {
    let wrap = |path: &Path, source: io::Error| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(path) = csv_path {
        fs::write(path, rows_to_csv(rows)).map_err(|e| wrap(path, e))?;
    }
    if let Some(path) = json_path {
        let mut text = serde_json::to_string_pretty(summary).expect("summary json");
        text.push('\n');
        fs::write(path, text).map_err(|e| wrap(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_topology;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            vm_counts: vec![3],
            seeds: vec![1, 2, 3],
            modes: vec![Mode::Exact, Mode::Baseline],
            topology: default_topology(),
            solver: SolverConfig::default(),
        }
    }

    #[test]
    fn row_count_is_counts_times_seeds_times_modes() {
        let (rows, _) = run_experiment(&small_spec()).unwrap();
        assert_eq!(rows.len(), 1 * 3 * 2);
    }

    #[test]
    fn exact_never_beats_baseline_the_wrong_way() {
        let (rows, summary) = run_experiment(&small_spec()).unwrap();
        for seed in [1, 2, 3] {
            let find = |mode: Mode| {
                rows.iter()
                    .find(|r| r.seed == seed && r.mode == mode)
                    .and_then(|r| r.total_w)
            };
            if let (Some(e), Some(b)) = (find(Mode::Exact), find(Mode::Baseline)) {
                assert!(e <= b + 1e-9, "seed {seed}: exact {e} > baseline {b}");
            }
        }
        let s = &summary.per_vm_count[0];
        if let Some(sv) = s.savings_ratio_of_means {
            assert!((0.0..1.0).contains(&sv));
        }
    }

    #[test]
    fn csv_has_fixed_header_and_is_deterministic() {
        let spec = small_spec();
        let (rows_a, _) = run_experiment(&spec).unwrap();
        let (rows_b, _) = run_experiment(&spec).unwrap();
        let a = rows_to_csv(&rows_a);
        let b = rows_to_csv(&rows_b);
        assert_eq!(a, b);
        assert!(a.starts_with("vm_count,seed,mode,status,total_w"));
    }

    #[test]
    fn empty_rows_give_header_only_csv() {
        let csv = rows_to_csv(&[]);
        assert_eq!(csv.lines().count(), 1);
    }

    #[test]
    fn empty_spec_is_rejected() {
        let mut spec = small_spec();
        spec.seeds.clear();
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn reports_round_trip_to_disk() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("results.csv");
        let json_path = dir.path().join("summary.json");
        let (rows, summary) = run_experiment(&small_spec()).unwrap();
        emit_reports(&rows, &summary, Some(&csv_path), Some(&json_path)).unwrap();
        let text = std::fs::read_to_string(&json_path).unwrap();
        let parsed: Summary = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.per_vm_count.len(), 1);
        assert!(std::fs::read_to_string(&csv_path)
            .unwrap()
            .starts_with("vm_count,"));
    }
}
