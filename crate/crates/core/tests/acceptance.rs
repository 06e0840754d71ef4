//! Acceptance gate: one test per release criterion. Each test prints a
//! single PASS line on success; a failure panics with the measured values.
//!
//! Criteria 4 and 5 share one 10/15/20-VM x 20-seed sweep, computed once.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use fogpon::experiment::{run_experiment, rows_to_csv, ExperimentRow, ExperimentSpec, Mode, Summary};
use fogpon::milp::{build_milp, check_feasibility, Violation};
use fogpon::model::{Cell, Placement, Rack, Scenario, Server, Topology};
use fogpon::power::total_power;
use fogpon::scenario::{default_topology, generate_scenario, GeneratorParams};
use fogpon::solver::{brute_force_oracle, solve_exact, SolveStatus, SolverConfig};

const EPS: f64 = 1e-9;

/// 2 cells x 1 rack x 3 servers, same server class as the default fabric.
fn small_topology() -> Topology {
    let server = |id| Server {
        id,
        cpu_capacity: 1.0,
        mem_capacity_mb: 16_384,
        onu_rate_mbps: 10_000,
        onu_power_w: 2.5,
        idle_power_w: 301.6,
        max_power_w: 457.0,
    };
    Topology {
        cells: (0..2)
            .map(|c| Cell {
                wavelength_capacity_mbps: 60_000,
                racks: vec![Rack {
                    servers: (0..3).map(|s| server(c * 3 + s)).collect(),
                }],
            })
            .collect(),
    }
}

fn light_params(n_vms: usize, seed: u64) -> GeneratorParams {
    GeneratorParams {
        rate_range_mbps: (100, 3_000),
        max_partners: 2,
        ..GeneratorParams::new(n_vms, seed)
    }
}

/// Criterion 1: exact solver vs brute force on 210 seeded small scenarios
/// (sizes 1..=7 on 6 servers), matching status, value, and placement.
#[test]
fn criterion_1_oracle_equivalence() {
    let topo = small_topology();
    let cfg = SolverConfig::default();
    let mut checked = 0usize;
    for n_vms in 1..=7usize {
        for seed in 0..30u64 {
            // Alternate heavy and light traffic so both feasible and
            // infeasible instances are exercised.
            let params = if seed % 2 == 0 {
                GeneratorParams::new(n_vms, 1000 * n_vms as u64 + seed)
            } else {
                light_params(n_vms, 1000 * n_vms as u64 + seed)
            };
            let sc = match generate_scenario(&params, &topo) {
                Ok(sc) => sc,
                Err(_) => continue, // oversubscribed draw; rare at these sizes
            };
            let fast = solve_exact(&sc, &cfg);
            let slow = brute_force_oracle(&sc).expect("within oracle limits");
            assert_eq!(
                fast.status, slow.status,
                "status mismatch, {n_vms} VMs seed {seed}"
            );
            if fast.status == SolveStatus::Optimal {
                let (a, b) = (fast.power.unwrap().total_w, slow.power.unwrap().total_w);
                assert!(
                    (a - b).abs() <= EPS,
                    "value mismatch {a} vs {b}, {n_vms} VMs seed {seed}"
                );
                assert_eq!(
                    fast.placement, slow.placement,
                    "tie-break mismatch, {n_vms} VMs seed {seed}"
                );
            }
            checked += 1;
        }
    }
    assert!(checked >= 200, "only {checked} scenarios compared");
    println!("criterion 1 PASS: solver == oracle on {checked} scenarios");
}

/// Criterion 2: the three hand-computed optima.
#[test]
fn criterion_2_hand_computed_optima() {
    let topo = default_topology();
    let cfg = SolverConfig::default();
    let vm = |id, cpu| fogpon::model::VmRequest {
        id,
        cpu_demand: cpu,
        mem_demand_mb: 1024,
    };
    let solve = |vms: Vec<fogpon::model::VmRequest>, traffic| {
        let sc = Scenario {
            topology: topo.clone(),
            vms,
            traffic,
            seed: 0,
            provenance: None,
        };
        solve_exact(&sc, &cfg).power.expect("optimal").total_w
    };

    // One full-load VM: 457.0 W.
    let single = solve(vec![vm(0, 1.0)], vec![]);
    assert!((single - 457.0).abs() <= EPS, "single VM: {single}");

    // Two half-load VMs with mutual traffic co-locate: 457.0 W.
    let pair = solve(
        vec![vm(0, 0.5), vm(1, 0.5)],
        vec![fogpon::model::TrafficDemand {
            src: 0,
            dst: 1,
            rate_mbps: 5_000,
        }],
    );
    assert!((pair - 457.0).abs() <= EPS, "co-located pair: {pair}");

    // Two full-load VMs cannot share a server: 2 x 457 W plus ONU power
    // for 10 Gbps carried at both endpoints = 919.0 W.
    let split = solve(
        vec![vm(0, 1.0), vm(1, 1.0)],
        vec![fogpon::model::TrafficDemand {
            src: 0,
            dst: 1,
            rate_mbps: 10_000,
        }],
    );
    assert!((split - 919.0).abs() <= EPS, "forced split: {split}");

    println!("criterion 2 PASS: optima 457.0 / 457.0 / 919.0 W reproduced");
}

fn random_total_placement(sc: &Scenario, rng: &mut ChaCha8Rng) -> Placement {
    let m = sc.topology.server_count() as u32;
    Placement {
        assignment: sc
            .vms
            .iter()
            .map(|v| (v.id, rng.random_range(0..m)))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Criterion 3: the load-dependent part of server power does not depend on
/// where VMs land (homogeneous servers), only idle and ONU power do.
#[test]
fn criterion_3_placement_invariant_dynamic_power() {
    let topo = default_topology();
    let sc = generate_scenario(&light_params(12, 7), &topo).unwrap();
    let idle = 301.6;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut reference = None;
    for _ in 0..100 {
        let p = random_total_placement(&sc, &mut rng);
        let power = total_power(&p, &sc);
        let dynamic = power.spc_w - power.active_servers as f64 * idle;
        match reference {
            None => reference = Some(dynamic),
            Some(r) => assert!(
                (dynamic - r).abs() <= EPS,
                "dynamic power drifted: {dynamic} vs {r}"
            ),
        }
    }
    println!(
        "criterion 3 PASS: dynamic power {:.6} W constant over 100 placements",
        reference.unwrap()
    );
}

fn sweep() -> &'static (Vec<ExperimentRow>, Summary) {
    static SWEEP: OnceLock<(Vec<ExperimentRow>, Summary)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let spec = ExperimentSpec {
            vm_counts: vec![10, 15, 20],
            seeds: (1..=20).collect(),
            modes: vec![Mode::Exact, Mode::Baseline],
            topology: default_topology(),
            solver: SolverConfig::default(),
        };
        run_experiment(&spec).expect("sweep runs")
    })
}

/// Criterion 4: wherever both modes solved a seed, the exact placement uses
/// no more power than the baseline and savings lie in [0, 1).
#[test]
fn criterion_4_power_dominance() {
    let (rows, _) = sweep();
    let mut by_key: BTreeMap<(usize, u64), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for row in rows {
        let entry = by_key.entry((row.vm_count, row.seed)).or_default();
        match row.mode {
            Mode::Exact => entry.0 = row.total_w,
            Mode::Baseline => entry.1 = row.total_w,
        }
    }
    let mut compared = 0usize;
    for ((vm_count, seed), pair) in &by_key {
        if let (Some(exact), Some(baseline)) = pair {
            assert!(
                exact <= &(baseline + EPS),
                "{vm_count} VMs seed {seed}: exact {exact} > baseline {baseline}"
            );
            let savings = 1.0 - exact / baseline;
            assert!(
                (0.0..1.0).contains(&(savings + EPS)),
                "{vm_count} VMs seed {seed}: savings {savings} outside [0, 1)"
            );
            compared += 1;
        }
    }
    println!(
        "criterion 4 PASS: dominance held on all {compared} compared seeds (of {})",
        by_key.len()
    );
}

/// Criterion 5: headline reproduction band — mean savings per VM count in
/// [0.25, 0.65], fewer active servers under exact, >= 80% proven optimal.
#[test]
fn criterion_5_headline_band() {
    let (_, summary) = sweep();
    for s in &summary.per_vm_count {
        let savings = s.savings_ratio_of_means.unwrap_or_else(|| {
            panic!(
                "{} VMs: no comparable seeds ({} of {} excluded), savings undefined",
                s.vm_count, s.excluded, s.seeds_total
            )
        });
        assert!(
            (0.25..=0.65).contains(&savings),
            "{} VMs: mean savings {savings} outside [0.25, 0.65]",
            s.vm_count
        );
        let (ae, ab) = (
            s.mean_active_exact.unwrap(),
            s.mean_active_baseline.unwrap(),
        );
        assert!(
            ae <= ab + EPS,
            "{} VMs: exact uses {ae} active servers vs baseline {ab}",
            s.vm_count
        );
        assert!(
            s.proven_optimal * 5 >= s.seeds_total * 4,
            "{} VMs: only {}/{} proven optimal",
            s.vm_count,
            s.proven_optimal,
            s.seeds_total
        );
    }
    println!("criterion 5 PASS: savings bands, server counts, and optimality rate hold");
}

/// Criterion 6: on 50 small instances, a placement is feasible exactly when
/// its 0/1 point satisfies the MILP, and the objective equals total_power.
#[test]
fn criterion_6_milp_round_trip() {
    let topo = small_topology();
    let mut instances = 0usize;
    let mut points = 0usize;
    for seed in 0..50u64 {
        let n_vms = 2 + (seed % 3) as usize; // 2..=4 VMs
        let params = if seed % 2 == 0 {
            GeneratorParams::new(n_vms, 7_000 + seed)
        } else {
            light_params(n_vms, 7_000 + seed)
        };
        let sc = generate_scenario(&params, &topo).unwrap();
        let inst = build_milp(&sc).unwrap();
        let m = sc.topology.server_count() as u32;
        // Every total placement of this instance.
        let mut digits = vec![0u32; n_vms];
        loop {
            let p = Placement {
                assignment: sc
                    .vms
                    .iter()
                    .zip(&digits)
                    .map(|(v, &s)| (v.id, s))
                    .collect(),
            };
            let point = inst.point_from_placement(&p);
            let feasible = check_feasibility(&p, &sc).is_empty();
            assert_eq!(
                inst.satisfies(&point, 1e-6),
                feasible,
                "feasibility disagrees, seed {seed} digits {digits:?}"
            );
            let obj = inst.objective_value(&point);
            let power = total_power(&p, &sc).total_w;
            assert!(
                (obj - power).abs() <= 1e-6,
                "objective {obj} != power {power}, seed {seed} digits {digits:?}"
            );
            points += 1;
            // Odometer step over the |S|^|VM| assignment space.
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    break;
                }
                digits[pos] += 1;
                if digits[pos] < m {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
            if pos == digits.len() {
                break;
            }
        }
        instances += 1;
    }
    println!("criterion 6 PASS: {instances} instances, {points} points round-tripped");
}

/// Criterion 7: moving a VM onto a communicating partner's server never
/// increases ONU power, provided the move is capacity-feasible and the VM
/// leaves no partner behind on its old server (a left-behind partner's
/// demand starts crossing and can outweigh the saved one).
#[test]
fn criterion_7_colocation_monotonicity() {
    let topo = default_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut tested = 0usize;
    let mut attempts = 0usize;
    while tested < 500 {
        attempts += 1;
        assert!(attempts < 50_000, "too few movable triples found");
        let sc = generate_scenario(&light_params(10, attempts as u64), &topo).unwrap();
        let before = random_total_placement(&sc, &mut rng);
        // Pick a VM with a crossing partner and nobody co-located with it.
        let candidates: Vec<(u32, u32)> = sc
            .traffic
            .iter()
            .flat_map(|d| [(d.src, d.dst), (d.dst, d.src)])
            .filter(|&(i, f)| {
                let (si, sf) = (before.server_of(i).unwrap(), before.server_of(f).unwrap());
                si != sf
                    && !sc.traffic.iter().any(|d| {
                        (d.src == i && d.dst != f || d.dst == i && d.src != f)
                            && d.rate_mbps > 0
                            && before.server_of(d.src) == before.server_of(d.dst)
                    })
            })
            .collect();
        let Some(&(mover, partner)) = candidates.first() else {
            continue;
        };
        let mut after = before.clone();
        after
            .assignment
            .insert(mover, before.server_of(partner).unwrap());
        let capacity_ok = !check_feasibility(&after, &sc)
            .iter()
            .any(|v| matches!(v, Violation::Cpu { .. } | Violation::Memory { .. }));
        if !capacity_ok {
            continue;
        }
        let (ob, oa) = (total_power(&before, &sc).onu_w, total_power(&after, &sc).onu_w);
        assert!(
            oa <= ob + EPS,
            "onu_w rose {ob} -> {oa} moving VM {mover} to VM {partner}'s server"
        );
        tested += 1;
    }
    println!("criterion 7 PASS: onu_w never rose over {tested} relocations");
}

/// Criterion 8: the experiment report is byte-identical across runs.
#[test]
fn criterion_8_deterministic_reports() {
    let spec = ExperimentSpec {
        vm_counts: vec![6, 10],
        seeds: (1..=5).collect(),
        modes: vec![Mode::Exact, Mode::Baseline],
        topology: default_topology(),
        solver: SolverConfig::default(),
    };
    let (rows_a, _) = run_experiment(&spec).unwrap();
    let (rows_b, _) = run_experiment(&spec).unwrap();
    let (csv_a, csv_b) = (rows_to_csv(&rows_a), rows_to_csv(&rows_b));
    assert_eq!(csv_a.as_bytes(), csv_b.as_bytes(), "CSV differs across runs");
    // Only baseline failures would hide nondeterminism, so require content.
    assert!(csv_a.lines().count() > 1, "report carried no result rows");
    println!(
        "criterion 8 PASS: {} CSV bytes identical across two runs",
        csv_a.len()
    );
}
