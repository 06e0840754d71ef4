//! Exact placement optimization: depth-first branch-and-bound over
//! VM -> server assignments with an admissible idle/bin-packing bound,
//! plus an exhaustive-enumeration oracle for verification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::check_feasibility;
use crate::model::{Placement, Scenario, ServerId, VmId};
use crate::power::{total_power, PowerBreakdown};

/// Strict-improvement tolerance for incumbent comparisons.
pub const IMPROVEMENT_EPS: f64 = 1e-9;
const CAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub node_limit: u64,
    /// Restrict fresh servers to the next unused index when the fabric is
    /// symmetric. Ties are still broken lexicographically on the final
    /// assignment vector.
    pub symmetry_breaking: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            node_limit: 100_000_000,
            symmetry_breaking: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NodeLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Present when an incumbent exists (always for Optimal).
    pub placement: Option<Placement>,
    pub power: Option<PowerBreakdown>,
    pub nodes_explored: u64,
    pub bound_at_root_w: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance too large for brute force: {vms} VMs x {servers} servers (limits 8 x 6)")]
    TooLargeForOracle { vms: usize, servers: usize },
}

#[derive(Debug, Clone, Copy)]
struct ServerInfo {
    id: ServerId,
    cpu_cap: f64,
    mem_cap: u64,
    onu_rate: u64,
    onu_ratio: f64,
    idle: f64,
    dynr: f64,
}

#[derive(Debug, Clone, Copy)]
struct VmInfo {
    id: VmId,
    cpu: f64,
    mem: u64,
}

struct Search {
    servers: Vec<ServerInfo>,
    rack_of: Vec<usize>,
    rack_cap: Vec<u64>,
    vms: Vec<VmInfo>,
    /// For each VM position, the demands touching it: (other position, rate).
    incident: Vec<Vec<(usize, u64)>>,
    order: Vec<usize>,
    min_idle: f64,
    min_dynr: f64,
    max_cpu_cap: f64,
    max_mem_cap: u64,
    symmetry: bool,
    node_limit: u64,

    assign: Vec<Option<usize>>,
    cpu_used: Vec<f64>,
    mem_used: Vec<u64>,
    load: Vec<u64>,
    rack_cross: Vec<u64>,
    vm_count: Vec<u32>,
    resid_cpu: f64,
    resid_mem: u64,
    resid_dyn: f64,

    nodes: u64,
    hit_limit: bool,
    best_cost: f64,
    best_assign: Option<Vec<usize>>,
}

struct Undo {
    vm: usize,
    server: usize,
    opened: bool,
    crossings: Vec<(usize, u64)>,
}

impl Search {
    fn new(sc: &Scenario, cfg: &SolverConfig) -> Self {
        let idx = sc.topology.index();
        let servers: Vec<ServerInfo> = idx
            .servers
            .iter()
            .map(|s| ServerInfo {
                id: s.id,
                cpu_cap: s.cpu_capacity,
                mem_cap: s.mem_capacity_mb,
                onu_rate: s.onu_rate_mbps,
                onu_ratio: s.onu_power_w / s.onu_rate_mbps as f64,
                idle: s.idle_power_w,
                dynr: s.dynamic_range_w(),
            })
            .collect();
        let m = servers.len();
        let rack_of = idx.rack_of.clone();
        let rack_cap = idx.rack_wavelength_cap.clone();

        let mut vms: Vec<VmInfo> = sc
            .vms
            .iter()
            .map(|v| VmInfo {
                id: v.id,
                cpu: v.cpu_demand,
                mem: v.mem_demand_mb,
            })
            .collect();
        vms.sort_by_key(|v| v.id);
        let pos_of = |id: VmId| vms.binary_search_by_key(&id, |v| v.id).unwrap();

        let n = vms.len();
        let mut incident = vec![Vec::new(); n];
        let mut traffic_weight = vec![0u64; n];
        for d in &sc.traffic {
            let a = pos_of(d.src);
            let b = pos_of(d.dst);
            incident[a].push((b, d.rate_mbps));
            incident[b].push((a, d.rate_mbps));
            traffic_weight[a] += d.rate_mbps;
            traffic_weight[b] += d.rate_mbps;
        }

        // Branch hard items first: descending CPU, then descending incident
        // traffic, then id.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            vms[b]
                .cpu
                .partial_cmp(&vms[a].cpu)
                .unwrap()
                .then(traffic_weight[b].cmp(&traffic_weight[a]))
                .then(vms[a].id.cmp(&vms[b].id))
        });

        // Symmetry breaking is sound only when servers are interchangeable:
        // identical specs and wavelength caps that can never bind.
        let homogeneous = sc.topology.is_homogeneous();
        let mut wavelength_vacuous = true;
        let mut rack_do = vec![0u64; rack_cap.len()];
        for (si, srv) in servers.iter().enumerate() {
            rack_do[rack_of[si]] += srv.onu_rate;
        }
        for (r, cap) in rack_cap.iter().enumerate() {
            if rack_do[r] > *cap {
                wavelength_vacuous = false;
            }
        }
        let symmetry = cfg.symmetry_breaking && homogeneous && wavelength_vacuous;

        let min_idle = servers.iter().map(|s| s.idle).fold(f64::INFINITY, f64::min);
        let min_dynr = servers.iter().map(|s| s.dynr).fold(f64::INFINITY, f64::min);
        let max_cpu_cap = servers.iter().map(|s| s.cpu_cap).fold(0.0, f64::max);
        let max_mem_cap = servers.iter().map(|s| s.mem_cap).max().unwrap_or(0);
        let resid_cpu = vms.iter().map(|v| v.cpu).sum();
        let resid_mem = vms.iter().map(|v| v.mem).sum();
        let resid_dyn = vms.iter().map(|v| v.cpu * min_dynr).sum();

        let n_racks = rack_cap.len();
        Search {
            rack_of,
            rack_cap,
            incident,
            order,
            min_idle,
            min_dynr,
            max_cpu_cap,
            max_mem_cap,
            symmetry,
            node_limit: cfg.node_limit,
            assign: vec![None; n],
            cpu_used: vec![0.0; m],
            mem_used: vec![0; m],
            load: vec![0; m],
            rack_cross: vec![0; n_racks],
            vm_count: vec![0; m],
            resid_cpu,
            resid_mem,
            resid_dyn,
            nodes: 0,
            hit_limit: false,
            best_cost: f64::INFINITY,
            best_assign: None,
            servers,
            vms,
        }
    }

    /// Tries to place VM `v` on server `s`, checking CPU, memory, ONU rate,
    /// and rack wavelength capacity incrementally. Returns the committed-cost
    /// delta and an undo record on success.
    fn try_assign(&mut self, v: usize, s: usize) -> Option<(f64, Undo)> {
        let vm = self.vms[v];
        let srv = self.servers[s];
        if self.cpu_used[s] + vm.cpu > srv.cpu_cap + CAP_EPS {
            return None;
        }
        if self.mem_used[s] + vm.mem > srv.mem_cap {
            return None;
        }

        // Crossing traffic newly decided by this assignment.
        let mut crossings: Vec<(usize, u64)> = Vec::new();
        for &(u, rate) in &self.incident[v] {
            if let Some(t) = self.assign[u] {
                if t != s {
                    crossings.push((t, rate));
                }
            }
        }
        let delta_s: u64 = crossings.iter().map(|&(_, r)| r).sum();
        if self.load[s] + delta_s > srv.onu_rate {
            return None;
        }
        for &(t, _) in &crossings {
            let dt: u64 = crossings.iter().filter(|&&(x, _)| x == t).map(|&(_, r)| r).sum();
            if self.load[t] + dt > self.servers[t].onu_rate {
                return None;
            }
        }
        let rs = self.rack_of[s];
        // Per-rack deltas (crossings into racks other than rs count at both).
        let mut rack_delta: Vec<(usize, u64)> = Vec::new();
        for &(t, rate) in &crossings {
            let rt = self.rack_of[t];
            if rt != rs {
                for r in [rs, rt] {
                    match rack_delta.iter_mut().find(|(x, _)| *x == r) {
                        Some((_, d)) => *d += rate,
                        None => rack_delta.push((r, rate)),
                    }
                }
            }
        }
        for &(r, d) in &rack_delta {
            if self.rack_cross[r] + d > self.rack_cap[r] {
                return None;
            }
        }

        // Feasible: apply.
        let opened = self.vm_count[s] == 0;
        let mut delta = vm.cpu * srv.dynr;
        if opened {
            delta += srv.idle;
        }
        for &(t, rate) in &crossings {
            self.load[s] += rate;
            self.load[t] += rate;
            delta += rate as f64 * (srv.onu_ratio + self.servers[t].onu_ratio);
        }
        for &(r, d) in &rack_delta {
            self.rack_cross[r] += d;
        }
        self.cpu_used[s] += vm.cpu;
        self.mem_used[s] += vm.mem;
        self.vm_count[s] += 1;
        self.assign[v] = Some(s);
        self.resid_cpu -= vm.cpu;
        self.resid_mem -= vm.mem;
        self.resid_dyn -= vm.cpu * self.min_dynr;
        Some((
            delta,
            Undo {
                vm: v,
                server: s,
                opened,
                crossings,
            },
        ))
    }

    fn undo(&mut self, u: Undo) {
        let vm = self.vms[u.vm];
        let s = u.server;
        let rs = self.rack_of[s];
        for &(t, rate) in &u.crossings {
            self.load[s] -= rate;
            self.load[t] -= rate;
            let rt = self.rack_of[t];
            if rt != rs {
                self.rack_cross[rs] -= rate;
                self.rack_cross[rt] -= rate;
            }
        }
        self.cpu_used[s] -= vm.cpu;
        self.mem_used[s] -= vm.mem;
        self.vm_count[s] -= 1;
        self.assign[u.vm] = None;
        self.resid_cpu += vm.cpu;
        self.resid_mem += vm.mem;
        self.resid_dyn += vm.cpu * self.min_dynr;
        debug_assert!(!u.opened || self.vm_count[s] == 0);
    }

    /// Admissible lower bound on the best completion cost from this state.
    fn bound(&self, committed: f64) -> f64 {
        let mut spare_cpu = 0.0;
        let mut spare_mem: u64 = 0;
        let mut open_count = 0usize;
        for (i, srv) in self.servers.iter().enumerate() {
            if self.vm_count[i] > 0 {
                spare_cpu += srv.cpu_cap - self.cpu_used[i];
                spare_mem += srv.mem_cap - self.mem_used[i];
                open_count += 1;
            }
        }
        let closed = self.servers.len() - open_count;
        let mut extra = 0usize;
        if self.resid_cpu > spare_cpu + CAP_EPS {
            let need = self.resid_cpu - spare_cpu;
            let k = (need / self.max_cpu_cap - CAP_EPS).ceil().max(1.0) as usize;
            extra = extra.max(k);
        }
        if self.resid_mem > spare_mem {
            let need = self.resid_mem - spare_mem;
            let k = need.div_ceil(self.max_mem_cap.max(1)) as usize;
            extra = extra.max(k.max(1));
        }
        if extra > closed {
            return f64::INFINITY;
        }
        committed + self.resid_dyn + extra as f64 * self.min_idle
    }

    /// Exact cost of the (complete) current assignment, recomputed from
    /// scratch with the same arithmetic as the power evaluator.
    fn exact_cost(&self) -> f64 {
        let m = self.servers.len();
        let mut cpu = vec![0.0f64; m];
        let mut on = vec![false; m];
        for (v, vm) in self.vms.iter().enumerate() {
            let s = self.assign[v].expect("complete assignment");
            cpu[s] += vm.cpu;
            on[s] = true;
        }
        let mut total = 0.0;
        for (i, srv) in self.servers.iter().enumerate() {
            if on[i] {
                total += srv.idle + srv.dynr * cpu[i];
            }
        }
        for (v, inc) in self.incident.iter().enumerate() {
            for &(u, rate) in inc {
                if u < v {
                    continue; // each demand appears in both lists; count once
                }
                let (s, t) = (self.assign[v].unwrap(), self.assign[u].unwrap());
                if s != t {
                    total +=
                        rate as f64 * (self.servers[s].onu_ratio + self.servers[t].onu_ratio);
                }
            }
        }
        total
    }

    fn highest_used_index(&self) -> Option<usize> {
        (0..self.servers.len()).rev().find(|&i| self.vm_count[i] > 0)
    }

    fn candidates(&self) -> Vec<usize> {
        let m = self.servers.len();
        let upper = if self.symmetry {
            match self.highest_used_index() {
                Some(h) => (h + 1).min(m - 1),
                None => 0,
            }
        } else {
            m - 1
        };
        let mut cands: Vec<usize> = (0..=upper).filter(|&i| self.vm_count[i] > 0).collect();
        cands.extend((0..=upper).filter(|&i| self.vm_count[i] == 0));
        cands
    }

    fn dfs(&mut self, depth: usize, committed: f64) {
        if depth == self.order.len() {
            let cost = self.exact_cost();
            if cost < self.best_cost - IMPROVEMENT_EPS {
                self.best_cost = cost;
                self.best_assign = Some(self.assign.iter().map(|a| a.unwrap()).collect());
            }
            return;
        }
        let v = self.order[depth];
        for s in self.candidates() {
            if self.nodes >= self.node_limit {
                self.hit_limit = true;
                return;
            }
            if let Some((delta, undo)) = self.try_assign(v, s) {
                self.nodes += 1;
                let child = committed + delta;
                if self.bound(child) < self.best_cost - IMPROVEMENT_EPS {
                    self.dfs(depth + 1, child);
                }
                self.undo(undo);
            }
            if self.hit_limit {
                return;
            }
        }
    }

    /// Finds the lexicographically smallest assignment vector (in VM id
    /// order) whose cost is within tolerance of `target`. DFS in id/index
    /// order guarantees the first accepted leaf is the lexicographic minimum.
    fn dfs_lex(&mut self, depth: usize, committed: f64, target: f64, budget: u64) -> bool {
        if depth == self.vms.len() {
            let cost = self.exact_cost();
            if cost <= target + IMPROVEMENT_EPS {
                self.best_cost = cost;
                self.best_assign = Some(self.assign.iter().map(|a| a.unwrap()).collect());
                return true;
            }
            return false;
        }
        for s in 0..self.servers.len() {
            if self.nodes >= budget {
                self.hit_limit = true;
                return false;
            }
            if let Some((delta, undo)) = self.try_assign(depth, s) {
                self.nodes += 1;
                let child = committed + delta;
                let found = if self.bound(child) <= target + IMPROVEMENT_EPS {
                    self.dfs_lex(depth + 1, child, target, budget)
                } else {
                    false
                };
                self.undo(undo);
                if found || self.hit_limit {
                    return found;
                }
            }
        }
        false
    }

    fn placement(&self, assign: &[usize]) -> Placement {
        Placement {
            assignment: assign
                .iter()
                .enumerate()
                .map(|(v, &s)| (self.vms[v].id, self.servers[s].id))
                .collect(),
        }
    }
}

/// Exact minimization of total power over all feasible placements; ties are
/// broken by the lexicographically smallest assignment vector in VM id order.
pub fn solve_exact(sc: &Scenario, cfg: &SolverConfig) -> SolveResult {
    if sc.vms.is_empty() {
        return SolveResult {
            status: SolveStatus::Optimal,
            placement: Some(Placement::default()),
            power: Some(PowerBreakdown::ZERO),
            nodes_explored: 0,
            bound_at_root_w: 0.0,
        };
    }
    let mut search = Search::new(sc, cfg);
    let bound_at_root = search.bound(0.0);
    search.dfs(0, 0.0);
    let nodes_after_main = search.nodes;
    let hit_limit = search.hit_limit;

    let Some(best) = search.best_assign.clone() else {
        return SolveResult {
            status: if hit_limit {
                SolveStatus::NodeLimit
            } else {
                SolveStatus::Infeasible
            },
            placement: None,
            power: None,
            nodes_explored: nodes_after_main,
            bound_at_root_w: bound_at_root,
        };
    };
    let best_cost = search.best_cost;

    if hit_limit {
        let placement = search.placement(&best);
        let power = total_power(&placement, sc);
        return SolveResult {
            status: SolveStatus::NodeLimit,
            placement: Some(placement),
            power: Some(power),
            nodes_explored: nodes_after_main,
            bound_at_root_w: bound_at_root,
        };
    }

    // Optimal value proven; a second lexicographic pass pins the tie-break.
    let mut polish = Search::new(sc, &SolverConfig {
        node_limit: cfg.node_limit,
        symmetry_breaking: false,
    });
    polish.symmetry = false;
    polish.best_cost = f64::INFINITY;
    let budget = cfg.node_limit.saturating_mul(2);
    polish.nodes = nodes_after_main;
    let found = polish.dfs_lex(0, 0.0, best_cost, budget);
    let (assign, nodes) = if found {
        (polish.best_assign.clone().unwrap(), polish.nodes)
    } else {
        (best, polish.nodes)
    };
    let placement = search.placement(&assign);
    let power = total_power(&placement, sc);
    SolveResult {
        status: SolveStatus::Optimal,
        placement: Some(placement),
        power: Some(power),
        nodes_explored: nodes,
        bound_at_root_w: bound_at_root,
    }
}

/// Admissible lower bound for a partial assignment: committed idle, dynamic,
/// and decided-crossing ONU power, plus a bin-packing estimate of servers
/// still to open. Returns infinity when the partial assignment already
/// violates a capacity.
pub fn lower_bound(partial: &Placement, sc: &Scenario) -> f64 {
    let mut search = Search::new(sc, &SolverConfig::default());
    let mut committed = 0.0;
    for (v, vm) in search.vms.clone().iter().enumerate() {
        if let Some(sid) = partial.server_of(vm.id) {
            match search.try_assign(v, sid as usize) {
                Some((delta, _)) => committed += delta,
                None => return f64::INFINITY,
            }
        }
    }
    search.bound(committed)
}

/// Enumerates every |S|^|VM| placement, filters by feasibility, and returns
/// the minimum-power one under the same tie-break as the solver. Limited to
/// 8 VMs and 6 servers.
pub fn brute_force_oracle(sc: &Scenario) -> Result<SolveResult, OracleError> {
    let n = sc.vms.len();
    let m = sc.topology.server_count();
    if n == 0 {
        return Ok(SolveResult {
            status: SolveStatus::Optimal,
            placement: Some(Placement::default()),
            power: Some(PowerBreakdown::ZERO),
            nodes_explored: 0,
            bound_at_root_w: 0.0,
        });
    }
    if n > 8 || m > 6 {
        return Err(OracleError::TooLargeForOracle {
            vms: n,
            servers: m,
        });
    }
    let mut vm_ids: Vec<VmId> = sc.vms.iter().map(|v| v.id).collect();
    vm_ids.sort_unstable();

    let mut digits = vec![0usize; n];
    let mut best: Option<(f64, Placement, PowerBreakdown)> = None;
    let mut explored = 0u64;
    loop {
        explored += 1;
        let placement = Placement {
            assignment: vm_ids
                .iter()
                .zip(&digits)
                .map(|(&vm, &s)| (vm, s as ServerId))
                .collect(),
        };
        if check_feasibility(&placement, sc).is_empty() {
            let pb = total_power(&placement, sc);
            let better = match &best {
                None => true,
                Some((c, _, _)) => pb.total_w < c - IMPROVEMENT_EPS,
            };
            if better {
                best = Some((pb.total_w, placement, pb));
            }
        }
        // Odometer in lexicographic order of the assignment vector.
        let mut pos = n;
        loop {
            if pos == 0 {
                break;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < m {
                break;
            }
            digits[pos] = 0;
        }
        if pos == 0 && digits[0] == 0 {
            break;
        }
    }
    Ok(match best {
        Some((_, placement, power)) => SolveResult {
            status: SolveStatus::Optimal,
            placement: Some(placement),
            power: Some(power),
            nodes_explored: explored,
            bound_at_root_w: 0.0,
        },
        None => SolveResult {
            status: SolveStatus::Infeasible,
            placement: None,
            power: None,
            nodes_explored: explored,
            bound_at_root_w: 0.0,
        },
    })
}
