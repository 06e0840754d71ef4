//! Power evaluation for a concrete placement: server power (idle + dynamic),
//! ONU power proportional to carried traffic, and the traffic aggregates
//! they depend on.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{Placement, PlacementError, Scenario, Server, ServerId, Topology, VmId};

/// SPC + ONU_PC split, with the active-server count for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub spc_w: f64,
    pub onu_w: f64,
    pub total_w: f64,
    pub active_servers: usize,
}

impl PowerBreakdown {
    pub const ZERO: PowerBreakdown = PowerBreakdown {
        spc_w: 0.0,
        onu_w: 0.0,
        total_w: 0.0,
        active_servers: 0,
    };
}

/// Inter-server traffic T^{sd} and per-server ONU load T^s, in Mbps.
///
/// T^s counts both egress and ingress: a demand crossing servers is carried
/// by the ONUs at both ends. Co-located demands contribute to neither.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficLoad {
    pub inter_server_mbps: BTreeMap<(ServerId, ServerId), u64>,
    pub per_server_mbps: BTreeMap<ServerId, u64>,
}

/// P_s^i: the fraction of server s's CPU used by VM i under placement p.
pub fn processing_fraction(
    vm: VmId,
    server: ServerId,
    p: &Placement,
    sc: &Scenario,
) -> Result<f64, PlacementError> {
    let req = sc.vm(vm).ok_or(PlacementError::UnknownVm(vm))?;
    if sc.topology.servers().all(|s| s.id != server) {
        return Err(PlacementError::UnknownServer(server));
    }
    let assigned = p.server_of(vm).ok_or(PlacementError::UnplacedVm(vm))?;
    Ok(if assigned == server { req.cpu_demand } else { 0.0 })
}

/// Per-server ONU load as a dense vector indexed by server id. Shared by the
/// map-producing [`traffic_loads`] and by the hot paths in the solver.
pub(crate) fn per_server_load_vec(p: &Placement, sc: &Scenario, n_servers: usize) -> Vec<u64> {
    let mut per = vec![0u64; n_servers];
    for d in &sc.traffic {
        let (Some(s), Some(t)) = (p.server_of(d.src), p.server_of(d.dst)) else {
            continue;
        };
        if s != t {
            per[s as usize] += d.rate_mbps;
            per[t as usize] += d.rate_mbps;
        }
    }
    per
}

/// Aggregates the demand list into T^{sd} and T^s for placement p.
pub fn traffic_loads(p: &Placement, sc: &Scenario) -> TrafficLoad {
    let mut inter: BTreeMap<(ServerId, ServerId), u64> = BTreeMap::new();
    let mut per: BTreeMap<ServerId, u64> = BTreeMap::new();
    for d in &sc.traffic {
        let (Some(s), Some(t)) = (p.server_of(d.src), p.server_of(d.dst)) else {
            continue;
        };
        if s != t {
            *inter.entry((s, t)).or_insert(0) += d.rate_mbps;
            *per.entry(s).or_insert(0) += d.rate_mbps;
            *per.entry(t).or_insert(0) += d.rate_mbps;
        }
    }
    TrafficLoad {
        inter_server_mbps: inter,
        per_server_mbps: per,
    }
}

/// One server's contribution: I*A_s + (M-I)*sum_i P_s^i.
pub fn server_power(server: &Server, p: &Placement, sc: &Scenario) -> f64 {
    let mut load = 0.0;
    let mut active = false;
    for vm in &sc.vms {
        if p.server_of(vm.id) == Some(server.id) {
            load += vm.cpu_demand;
            active = true;
        }
    }
    if active {
        server.idle_power_w + server.dynamic_range_w() * load
    } else {
        0.0
    }
}

/// ONU power: sum over servers of (PO/DO) * T^s.
pub fn onu_power(loads: &TrafficLoad, topo: &Topology) -> f64 {
    topo.servers()
        .map(|s| {
            let t = loads.per_server_mbps.get(&s.id).copied().unwrap_or(0);
            s.onu_power_w / s.onu_rate_mbps as f64 * t as f64
        })
        .sum()
}

/// Total power of a placement, with the activation count.
pub fn total_power(p: &Placement, sc: &Scenario) -> PowerBreakdown {
    let idx = sc.topology.index();
    let n = idx.servers.len();
    let mut cpu_load = vec![0.0f64; n];
    let mut active = vec![false; n];
    for vm in &sc.vms {
        if let Some(s) = p.server_of(vm.id) {
            cpu_load[s as usize] += vm.cpu_demand;
            active[s as usize] = true;
        }
    }
    let mut spc = 0.0;
    for (i, srv) in idx.servers.iter().enumerate() {
        if active[i] {
            spc += srv.idle_power_w + srv.dynamic_range_w() * cpu_load[i];
        }
    }
    let per = per_server_load_vec(p, sc, n);
    let onu: f64 = idx
        .servers
        .iter()
        .enumerate()
        .map(|(i, srv)| srv.onu_power_w / srv.onu_rate_mbps as f64 * per[i] as f64)
        .sum();
    PowerBreakdown {
        spc_w: spc,
        onu_w: onu,
        total_w: spc + onu,
        active_servers: active.iter().filter(|a| **a).count(),
    }
}
