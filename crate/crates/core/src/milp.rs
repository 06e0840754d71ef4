//! Solver-agnostic MILP formulation of the placement model: assignment,
//! memory, CPU, activation big-M, AND-linearization of the traffic product
//! variables, ONU rate, and per-rack wavelength constraints, with LP-format
//! export and a direct feasibility checker for concrete placements.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Placement, Scenario, ServerId, VmId};

/// Default cap on the number of Q (traffic product) variables.
pub const DEFAULT_Q_CAP: usize = 1_000_000;

/// Big-M constant linking activation to assignment (Table value).
pub const BIG_M: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization instance over binaries with [0,1] bounds, so it doubles
/// as its own LP relaxation. Variable layout: all W, then all A, then all Q.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpInstance {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Linear minimization objective as (variable index, coefficient).
    pub objective: Vec<(usize, f64)>,
    /// VM ids in variable-layout order.
    pub vm_ids: Vec<VmId>,
    pub n_servers: usize,
    /// Ordered traffic pairs (src, dst) that own Q variables.
    pub pairs: Vec<(VmId, VmId)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulationStats {
    pub n_binary: usize,
    pub n_constraints: usize,
    pub n_traffic_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulationError {
    #[error("instance too large: {q_count} Q variables exceed cap {cap}")]
    FormulationTooLarge { q_count: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error("variable values have wrong length: got {got}, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("non-integral solution at variable {name} = {value}")]
    NonIntegralSolution { name: String, value: f64 },
    #[error("vm {vm} is assigned to {count} servers")]
    AssignmentViolation { vm: VmId, count: usize },
    #[error("linearization mismatch at {name}: Q = {q} but W product = {product}")]
    InconsistentLinearization { name: String, q: u8, product: u8 },
}

impl MilpInstance {
    pub fn n_vms(&self) -> usize {
        self.vm_ids.len()
    }

    pub fn w_index(&self, vm_pos: usize, server: usize) -> usize {
        vm_pos * self.n_servers + server
    }

    pub fn a_index(&self, server: usize) -> usize {
        self.n_vms() * self.n_servers + server
    }

    pub fn q_index(&self, pair_pos: usize, s: usize, d: usize) -> usize {
        let m = self.n_servers;
        self.n_vms() * m + m + pair_pos * m * m + s * m + d
    }

    pub fn stats(&self) -> FormulationStats {
        FormulationStats {
            n_binary: self
                .variables
                .iter()
                .filter(|v| v.kind == VarKind::Binary)
                .count(),
            n_constraints: self.constraints.len(),
            n_traffic_pairs: self.pairs.len(),
        }
    }

    /// Evaluates the objective at a variable-value vector.
    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(i, c)| c * values[i]).sum()
    }

    /// Builds the integral point corresponding to a placement (W from the
    /// assignment, A and Q derived from W).
    pub fn point_from_placement(&self, p: &Placement) -> Vec<f64> {
        let m = self.n_servers;
        let mut values = vec![0.0; self.variables.len()];
        for (vp, &vm) in self.vm_ids.iter().enumerate() {
            if let Some(s) = p.server_of(vm) {
                values[self.w_index(vp, s as usize)] = 1.0;
                values[self.a_index(s as usize)] = 1.0;
            }
        }
        for (pp, &(i, f)) in self.pairs.iter().enumerate() {
            if let (Some(s), Some(d)) = (p.server_of(i), p.server_of(f)) {
                values[self.q_index(pp, s as usize, d as usize)] = 1.0;
            }
        }
        let _ = m;
        values
    }

    /// True iff the point satisfies every constraint within tolerance.
    pub fn satisfies(&self, values: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|c| {
            let lhs: f64 = c.terms.iter().map(|&(i, co)| co * values[i]).sum();
            match c.sense {
                Sense::Le => lhs <= c.rhs + tol,
                Sense::Eq => (lhs - c.rhs).abs() <= tol,
                Sense::Ge => lhs >= c.rhs - tol,
            }
        })
    }
}

/// Builds the placement MILP with the default Q-variable cap.
pub fn build_milp(sc: &Scenario) -> Result<MilpInstance, FormulationError> {
    build_milp_capped(sc, DEFAULT_Q_CAP)
}

/// Builds the placement MILP, refusing instances whose |P| * m^2 Q-variable
/// block exceeds `q_cap`.
pub fn build_milp_capped(sc: &Scenario, q_cap: usize) -> Result<MilpInstance, FormulationError> {
    let idx = sc.topology.index();
    let m = idx.servers.len();
    let vm_ids: Vec<VmId> = sc.vms.iter().map(|v| v.id).collect();
    let n = vm_ids.len();
    let pairs: Vec<(VmId, VmId)> = sc
        .traffic
        .iter()
        .filter(|d| d.rate_mbps > 0)
        .map(|d| (d.src, d.dst))
        .collect();
    let rates: Vec<u64> = sc
        .traffic
        .iter()
        .filter(|d| d.rate_mbps > 0)
        .map(|d| d.rate_mbps)
        .collect();
    let q_count = pairs.len() * m * m;
    if q_count > q_cap {
        return Err(FormulationError::FormulationTooLarge {
            q_count,
            cap: q_cap,
        });
    }

    let vm_pos: HashMap<VmId, usize> = vm_ids.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let binary = |name: String| Variable {
        name,
        kind: VarKind::Binary,
        lower: 0.0,
        upper: 1.0,
    };
    let mut variables = Vec::with_capacity(n * m + m + q_count);
    for &vm in &vm_ids {
        for s in 0..m {
            variables.push(binary(format!("W_i{vm}_s{s}")));
        }
    }
    for s in 0..m {
        variables.push(binary(format!("A_s{s}")));
    }
    for &(i, f) in &pairs {
        for s in 0..m {
            for d in 0..m {
                variables.push(binary(format!("Q_i{i}_f{f}_s{s}_d{d}")));
            }
        }
    }

    let inst_layout = MilpInstance {
        variables,
        constraints: Vec::new(),
        objective: Vec::new(),
        vm_ids: vm_ids.clone(),
        n_servers: m,
        pairs: pairs.clone(),
    };
    let w = |vp: usize, s: usize| inst_layout.w_index(vp, s);
    let a = |s: usize| inst_layout.a_index(s);
    let q = |pp: usize, s: usize, d: usize| inst_layout.q_index(pp, s, d);

    let mut constraints = Vec::new();

    // Assignment: each VM lands on exactly one server.
    for (vp, &vm) in vm_ids.iter().enumerate() {
        constraints.push(Constraint {
            name: format!("assign_vm{vm}"),
            terms: (0..m).map(|s| (w(vp, s), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    // Memory and CPU capacity per server.
    for s in 0..m {
        constraints.push(Constraint {
            name: format!("mem_s{s}"),
            terms: sc
                .vms
                .iter()
                .enumerate()
                .map(|(vp, v)| (w(vp, s), v.mem_demand_mb as f64))
                .collect(),
            sense: Sense::Le,
            rhs: idx.servers[s].mem_capacity_mb as f64,
        });
        constraints.push(Constraint {
            name: format!("cpu_s{s}"),
            terms: sc
                .vms
                .iter()
                .enumerate()
                .map(|(vp, v)| (w(vp, s), v.cpu_demand))
                .collect(),
            sense: Sense::Le,
            rhs: idx.servers[s].cpu_capacity,
        });
    }
    // Activation big-M, both directions so A is well-defined for reporting.
    // The stated constant is 1000; n is used when tighter (same feasible set).
    let big_m = if n > 0 && (n as f64) < BIG_M {
        n as f64
    } else {
        BIG_M
    };
    for s in 0..m {
        let mut terms: Vec<(usize, f64)> = (0..n).map(|vp| (w(vp, s), 1.0)).collect();
        terms.push((a(s), -big_m));
        constraints.push(Constraint {
            name: format!("act_ub_s{s}"),
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
        let mut terms: Vec<(usize, f64)> = vec![(a(s), 1.0)];
        terms.extend((0..n).map(|vp| (w(vp, s), -1.0)));
        constraints.push(Constraint {
            name: format!("act_lb_s{s}"),
            terms,
            sense: Sense::Le,
            rhs: 0.0,
        });
    }
    // AND-linearization: Q = W_i_s AND W_f_d at every integral point.
    for (pp, &(i, f)) in pairs.iter().enumerate() {
        let (ip, fp) = (vm_pos[&i], vm_pos[&f]);
        for s in 0..m {
            for d in 0..m {
                constraints.push(Constraint {
                    name: format!("q_ub1_i{i}_f{f}_s{s}_d{d}"),
                    terms: vec![(q(pp, s, d), 1.0), (w(ip, s), -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                constraints.push(Constraint {
                    name: format!("q_ub2_i{i}_f{f}_s{s}_d{d}"),
                    terms: vec![(q(pp, s, d), 1.0), (w(fp, d), -1.0)],
                    sense: Sense::Le,
                    rhs: 0.0,
                });
                constraints.push(Constraint {
                    name: format!("q_lb_i{i}_f{f}_s{s}_d{d}"),
                    terms: vec![(q(pp, s, d), 1.0), (w(ip, s), -1.0), (w(fp, d), -1.0)],
                    sense: Sense::Ge,
                    rhs: -1.0,
                });
            }
        }
    }
    // ONU rate: T^s (ingress + egress through s) within the ONU data rate.
    for s in 0..m {
        let mut terms = Vec::new();
        for (pp, _) in pairs.iter().enumerate() {
            let r = rates[pp] as f64;
            for d in 0..m {
                if d != s {
                    terms.push((q(pp, s, d), r));
                    terms.push((q(pp, d, s), r));
                }
            }
        }
        constraints.push(Constraint {
            name: format!("onu_s{s}"),
            terms,
            sense: Sense::Le,
            rhs: idx.servers[s].onu_rate_mbps as f64,
        });
    }
    // Wavelength capacity per rack: traffic crossing the rack boundary.
    for rack in 0..idx.rack_count() {
        let mut terms = Vec::new();
        for (pp, _) in pairs.iter().enumerate() {
            let r = rates[pp] as f64;
            for s in 0..m {
                for d in 0..m {
                    let s_in = idx.rack_of[s] == rack;
                    let d_in = idx.rack_of[d] == rack;
                    if s_in != d_in {
                        terms.push((q(pp, s, d), r));
                    }
                }
            }
        }
        constraints.push(Constraint {
            name: format!("wl_r{rack}"),
            terms,
            sense: Sense::Le,
            rhs: idx.rack_wavelength_cap[rack] as f64,
        });
    }

    // Objective: idle power on A, dynamic power on W, ONU power on Q.
    let mut objective: Vec<(usize, f64)> = Vec::new();
    for (vp, v) in sc.vms.iter().enumerate() {
        for s in 0..m {
            objective.push((w(vp, s), idx.servers[s].dynamic_range_w() * v.cpu_demand));
        }
    }
    for s in 0..m {
        objective.push((a(s), idx.servers[s].idle_power_w));
    }
    for (pp, _) in pairs.iter().enumerate() {
        let r = rates[pp] as f64;
        for s in 0..m {
            let ratio_s = idx.servers[s].onu_power_w / idx.servers[s].onu_rate_mbps as f64;
            for d in 0..m {
                if s == d {
                    continue;
                }
                let ratio_d = idx.servers[d].onu_power_w / idx.servers[d].onu_rate_mbps as f64;
                objective.push((q(pp, s, d), r * (ratio_s + ratio_d)));
            }
        }
    }

    Ok(MilpInstance {
        constraints,
        objective,
        ..inst_layout
    })
}

/// Recovers the placement from an integral solution vector and verifies the
/// linearization: Q[i,f,s,d] must equal W[i,s] * W[f,d].
pub fn extract_placement(
    inst: &MilpInstance,
    values: &[f64],
    _sc: &Scenario,
) -> Result<Placement, ExtractError> {
    const TOL: f64 = 1e-6;
    if values.len() != inst.variables.len() {
        return Err(ExtractError::WrongLength {
            got: values.len(),
            expected: inst.variables.len(),
        });
    }
    let as_bit = |idx: usize| -> Result<u8, ExtractError> {
        let v = values[idx];
        if (v - 0.0).abs() <= TOL {
            Ok(0)
        } else if (v - 1.0).abs() <= TOL {
            Ok(1)
        } else {
            Err(ExtractError::NonIntegralSolution {
                name: inst.variables[idx].name.clone(),
                value: v,
            })
        }
    };

    let m = inst.n_servers;
    let mut placement = Placement::default();
    for (vp, &vm) in inst.vm_ids.iter().enumerate() {
        let mut chosen = Vec::new();
        for s in 0..m {
            if as_bit(inst.w_index(vp, s))? == 1 {
                chosen.push(s);
            }
        }
        if chosen.len() != 1 {
            return Err(ExtractError::AssignmentViolation {
                vm,
                count: chosen.len(),
            });
        }
        placement.assignment.insert(vm, chosen[0] as ServerId);
    }
    let pos: HashMap<VmId, usize> = inst
        .vm_ids
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    for (pp, &(i, f)) in inst.pairs.iter().enumerate() {
        for s in 0..m {
            let wi = as_bit(inst.w_index(pos[&i], s))?;
            for d in 0..m {
                let wf = as_bit(inst.w_index(pos[&f], d))?;
                let qv = as_bit(inst.q_index(pp, s, d))?;
                if qv != wi * wf {
                    return Err(ExtractError::InconsistentLinearization {
                        name: inst.variables[inst.q_index(pp, s, d)].name.clone(),
                        q: qv,
                        product: wi * wf,
                    });
                }
            }
        }
    }
    Ok(placement)
}

/// A violated capacity constraint, with the offending id and signed slack
/// (negative = amount over capacity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    Cpu {
        server: ServerId,
        used: f64,
        capacity: f64,
        slack: f64,
    },
    Memory {
        server: ServerId,
        used_mb: u64,
        capacity_mb: u64,
        slack_mb: i64,
    },
    OnuRate {
        server: ServerId,
        load_mbps: u64,
        capacity_mbps: u64,
        slack_mbps: i64,
    },
    Wavelength {
        cell: usize,
        rack: usize,
        crossing_mbps: u64,
        capacity_mbps: u64,
        slack_mbps: i64,
    },
    Unplaced {
        vm: VmId,
    },
}

/// Checks a total placement against the memory, CPU, ONU-rate, and per-rack
/// wavelength rule, reporting every violation.
pub fn check_feasibility(p: &Placement, sc: &Scenario) -> Vec<Violation> {
    let idx = sc.topology.index();
    let m = idx.servers.len();
    let mut violations = Vec::new();

    let mut cpu = vec![0.0f64; m];
    let mut mem = vec![0u64; m];
    for vm in &sc.vms {
        match p.server_of(vm.id) {
            Some(s) => {
                cpu[s as usize] += vm.cpu_demand;
                mem[s as usize] += vm.mem_demand_mb;
            }
            None => violations.push(Violation::Unplaced { vm: vm.id }),
        }
    }
    let mut load = vec![0u64; m];
    let mut rack_cross = vec![0u64; idx.rack_count()];
    for d in &sc.traffic {
        let (Some(s), Some(t)) = (p.server_of(d.src), p.server_of(d.dst)) else {
            continue;
        };
        if s == t {
            continue;
        }
        load[s as usize] += d.rate_mbps;
        load[t as usize] += d.rate_mbps;
        let (rs, rt) = (idx.rack_of[s as usize], idx.rack_of[t as usize]);
        if rs != rt {
            rack_cross[rs] += d.rate_mbps;
            rack_cross[rt] += d.rate_mbps;
        }
    }

    for (s, srv) in idx.servers.iter().enumerate() {
        if cpu[s] > srv.cpu_capacity + 1e-9 {
            violations.push(Violation::Cpu {
                server: srv.id,
                used: cpu[s],
                capacity: srv.cpu_capacity,
                slack: srv.cpu_capacity - cpu[s],
            });
        }
        if mem[s] > srv.mem_capacity_mb {
            violations.push(Violation::Memory {
                server: srv.id,
                used_mb: mem[s],
                capacity_mb: srv.mem_capacity_mb,
                slack_mb: srv.mem_capacity_mb as i64 - mem[s] as i64,
            });
        }
        if load[s] > srv.onu_rate_mbps {
            violations.push(Violation::OnuRate {
                server: srv.id,
                load_mbps: load[s],
                capacity_mbps: srv.onu_rate_mbps,
                slack_mbps: srv.onu_rate_mbps as i64 - load[s] as i64,
            });
        }
    }
    for (rack, &cap) in idx.rack_wavelength_cap.iter().enumerate() {
        if rack_cross[rack] > cap {
            violations.push(Violation::Wavelength {
                cell: idx.rack_cell[rack],
                rack,
                crossing_mbps: rack_cross[rack],
                capacity_mbps: cap,
                slack_mbps: cap as i64 - rack_cross[rack] as i64,
            });
        }
    }
    violations
}

/// Renders the instance as an LP-format text file (Minimize / Subject To /
/// Bounds / Binary sections). Constraints with no terms are trivially true
/// and skipped since the format cannot express an empty left side.
pub fn write_lp(inst: &MilpInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ placement MILP export\n");
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, inst, &inst.objective);
    out.push_str("\nSubject To\n");
    for c in &inst.constraints {
        if c.terms.is_empty() {
            continue;
        }
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, inst, &c.terms);
        let sense = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {} {}", sense, c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &inst.variables {
        if v.kind == VarKind::Continuous {
            let _ = writeln!(out, " {} <= {} <= {}", v.lower, v.name, v.upper);
        }
    }
    out.push_str("Binary\n");
    for v in &inst.variables {
        if v.kind == VarKind::Binary {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}

fn write_terms(out: &mut String, inst: &MilpInstance, terms: &[(usize, f64)]) {
    for (k, &(i, c)) in terms.iter().enumerate() {
        let name = &inst.variables[i].name;
        let mag = c.abs();
        let sign = if c < 0.0 { "-" } else if k == 0 { "" } else { "+" };
        if sign.is_empty() {
            if mag == 1.0 {
                let _ = write!(out, " {name}");
            } else {
                let _ = write!(out, " {mag} {name}");
            }
        } else if mag == 1.0 {
            let _ = write!(out, " {sign} {name}");
        } else {
            let _ = write!(out, " {sign} {mag} {name}");
        }
    }
}
