//! Domain types for the fog fabric, VM workloads, inter-VM traffic, and
//! placements, plus validation and derived quantities.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type VmId = u32;
pub type ServerId = u32;

/// A fog server attached to the PON through its own ONU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Server {
    pub id: ServerId,
    /// CPU capacity in normalized server-units (1.0 = one full server).
    pub cpu_capacity: f64,
    pub mem_capacity_mb: u64,
    pub onu_rate_mbps: u64,
    pub onu_power_w: f64,
    pub idle_power_w: f64,
    pub max_power_w: f64,
}

impl Server {
    /// Dynamic power range M - I.
    pub fn dynamic_range_w(&self) -> f64 {
        self.max_power_w - self.idle_power_w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rack {
    pub servers: Vec<Server>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub wavelength_capacity_mbps: u64,
    pub racks: Vec<Rack>,
}

/// The whole fog fabric: cells of racks of servers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cells: Vec<Cell>,
}

impl Topology {
    pub fn servers(&self) -> impl Iterator<Item = &Server> {
        self.cells
            .iter()
            .flat_map(|c| c.racks.iter())
            .flat_map(|r| r.servers.iter())
    }

    pub fn server_count(&self) -> usize {
        self.servers().count()
    }

    /// True when every server has identical capacities and power figures.
    pub fn is_homogeneous(&self) -> bool {
        let mut it = self.servers();
        let Some(first) = it.next() else { return true };
        it.all(|s| {
            s.cpu_capacity == first.cpu_capacity
                && s.mem_capacity_mb == first.mem_capacity_mb
                && s.onu_rate_mbps == first.onu_rate_mbps
                && s.onu_power_w == first.onu_power_w
                && s.idle_power_w == first.idle_power_w
                && s.max_power_w == first.max_power_w
        })
    }

    /// Flattened, id-indexed view used by the evaluators and the solver.
    pub fn index(&self) -> TopologyIndex<'_> {
        let n = self.server_count();
        let mut servers: Vec<&Server> = Vec::with_capacity(n);
        let mut rack_of = Vec::new();
        let mut cell_of = Vec::new();
        let mut rack_wavelength_cap = Vec::new();
        let mut rack_cell = Vec::new();
        let mut flat = Vec::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            for rack in &cell.racks {
                let rack_idx = rack_wavelength_cap.len();
                rack_wavelength_cap.push(cell.wavelength_capacity_mbps);
                rack_cell.push(ci);
                for s in &rack.servers {
                    flat.push((s, rack_idx, ci));
                }
            }
        }
        // ids are validated dense 0..n-1; sort the flat view into id order.
        flat.sort_by_key(|(s, _, _)| s.id);
        for (s, r, c) in flat {
            servers.push(s);
            rack_of.push(r);
            cell_of.push(c);
        }
        TopologyIndex {
            servers,
            rack_of,
            cell_of,
            rack_wavelength_cap,
            rack_cell,
        }
    }
}

/// Id-ordered view of a topology with rack/cell lookup tables.
#[derive(Debug, Clone)]
pub struct TopologyIndex<'a> {
    /// servers[i] has id i.
    pub servers: Vec<&'a Server>,
    /// Global rack index per server id.
    pub rack_of: Vec<usize>,
    /// Cell index per server id.
    pub cell_of: Vec<usize>,
    /// Wavelength capacity (Wc of the owning cell) per global rack index.
    pub rack_wavelength_cap: Vec<u64>,
    /// Owning cell per global rack index.
    pub rack_cell: Vec<usize>,
}

impl TopologyIndex<'_> {
    pub fn rack_count(&self) -> usize {
        self.rack_wavelength_cap.len()
    }
}

/// One VM request: CPU as a fraction of one server, memory in MB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmRequest {
    pub id: VmId,
    pub cpu_demand: f64,
    pub mem_demand_mb: u64,
}

/// A directed traffic demand between two VMs, in Mbps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficDemand {
    pub src: VmId,
    pub dst: VmId,
    pub rate_mbps: u64,
}

/// Generation metadata carried along with generated scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub rng: String,
    pub seed: u64,
    pub params: serde_json::Value,
}

/// A complete problem instance: fabric, workload, and traffic graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub vms: Vec<VmRequest>,
    pub traffic: Vec<TrafficDemand>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Scenario {
    pub fn vm(&self, id: VmId) -> Option<&VmRequest> {
        self.vms.iter().find(|v| v.id == id)
    }
}

/// The assignment map VM -> server; total over the scenario's VMs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub assignment: BTreeMap<VmId, ServerId>,
}

impl Placement {
    pub fn server_of(&self, vm: VmId) -> Option<ServerId> {
        self.assignment.get(&vm).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("duplicate server id {0}")]
    DuplicateServerId(ServerId),
    #[error("server ids are not dense 0..{expected}: missing id {missing}")]
    NonDenseServerIds { expected: usize, missing: ServerId },
    #[error("server {0}: max_power_w must exceed idle_power_w")]
    InvalidPowerRange(ServerId),
    #[error("server {0}: non-positive capacity")]
    NonPositiveCapacity(ServerId),
    #[error("cell {0} has no racks")]
    EmptyCell(usize),
    #[error("cell {cell} rack {rack} has no servers")]
    EmptyRack { cell: usize, rack: usize },
    #[error("duplicate vm id {0}")]
    DuplicateVmId(VmId),
    #[error("vm {0}: cpu_demand must lie in (0, 1]")]
    CpuDemandOutOfRange(VmId),
    #[error("vm {0}: non-positive demand")]
    NonPositiveDemand(VmId),
    #[error("traffic {src}->{dst}: non-positive rate")]
    NonPositiveRate { src: VmId, dst: VmId },
    #[error("traffic {src}->{dst}: dangling endpoint or self-loop")]
    DanglingOrSelfLoop { src: VmId, dst: VmId },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("unknown vm {0}")]
    UnknownVm(VmId),
    #[error("unknown server {0}")]
    UnknownServer(ServerId),
    #[error("vm {0} has no assigned server")]
    UnplacedVm(VmId),
}

/// Checks every type invariant, collecting all violations. On success the
/// returned scenario has duplicate ordered traffic pairs merged by summing
/// their rates, with the demand list sorted by (src, dst).
pub fn validate_scenario(s: Scenario) -> Result<Scenario, Vec<ValidationError>> {
    let mut errors = Vec::new();

    let mut seen_servers = HashSet::new();
    for srv in s.topology.servers() {
        if !seen_servers.insert(srv.id) {
            errors.push(ValidationError::DuplicateServerId(srv.id));
        }
        if srv.max_power_w <= srv.idle_power_w {
            errors.push(ValidationError::InvalidPowerRange(srv.id));
        }
        if srv.cpu_capacity <= 0.0
            || srv.mem_capacity_mb == 0
            || srv.onu_rate_mbps == 0
            || srv.onu_power_w <= 0.0
            || srv.idle_power_w <= 0.0
        {
            errors.push(ValidationError::NonPositiveCapacity(srv.id));
        }
    }
    let n_servers = s.topology.server_count();
    for id in 0..n_servers as ServerId {
        if !seen_servers.contains(&id) {
            errors.push(ValidationError::NonDenseServerIds {
                expected: n_servers,
                missing: id,
            });
        }
    }
    for (ci, cell) in s.topology.cells.iter().enumerate() {
        if cell.racks.is_empty() {
            errors.push(ValidationError::EmptyCell(ci));
        }
        for (ri, rack) in cell.racks.iter().enumerate() {
            if rack.servers.is_empty() {
                errors.push(ValidationError::EmptyRack { cell: ci, rack: ri });
            }
        }
    }

    let mut seen_vms = HashSet::new();
    for vm in &s.vms {
        if !seen_vms.insert(vm.id) {
            errors.push(ValidationError::DuplicateVmId(vm.id));
        }
        if !(vm.cpu_demand > 0.0 && vm.cpu_demand <= 1.0) {
            errors.push(ValidationError::CpuDemandOutOfRange(vm.id));
        }
        if vm.mem_demand_mb == 0 {
            errors.push(ValidationError::NonPositiveDemand(vm.id));
        }
    }

    let mut merged: BTreeMap<(VmId, VmId), u64> = BTreeMap::new();
    for d in &s.traffic {
        if d.src == d.dst || !seen_vms.contains(&d.src) || !seen_vms.contains(&d.dst) {
            errors.push(ValidationError::DanglingOrSelfLoop {
                src: d.src,
                dst: d.dst,
            });
            continue;
        }
        if d.rate_mbps == 0 {
            errors.push(ValidationError::NonPositiveRate {
                src: d.src,
                dst: d.dst,
            });
            continue;
        }
        *merged.entry((d.src, d.dst)).or_insert(0) += d.rate_mbps;
    }

    if !errors.is_empty() {
        return Err(errors);
    }

    Ok(Scenario {
        traffic: merged
            .into_iter()
            .map(|((src, dst), rate_mbps)| TrafficDemand { src, dst, rate_mbps })
            .collect(),
        ..s
    })
}

/// Per-server activation bit and VM count derived from a placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerActivity {
    pub active: bool,
    pub vm_count: usize,
}

/// A_s and N^s for every server in the topology.
pub fn derived_activation(
    p: &Placement,
    s: &Scenario,
) -> Result<BTreeMap<ServerId, ServerActivity>, PlacementError> {
    let mut counts: HashMap<ServerId, usize> = HashMap::new();
    for vm in &s.vms {
        let srv = p.server_of(vm.id).ok_or(PlacementError::UnplacedVm(vm.id))?;
        *counts.entry(srv).or_insert(0) += 1;
    }
    Ok(s.topology
        .servers()
        .map(|srv| {
            let vm_count = counts.get(&srv.id).copied().unwrap_or(0);
            (
                srv.id,
                ServerActivity {
                    active: vm_count > 0,
                    vm_count,
                },
            )
        })
        .collect())
}

/// V^{if}: 1 iff both VMs sit on the same server.
pub fn colocation(p: &Placement, i: VmId, f: VmId) -> Result<bool, PlacementError> {
    let si = p.server_of(i).ok_or(PlacementError::UnknownVm(i))?;
    let sf = p.server_of(f).ok_or(PlacementError::UnknownVm(f))?;
    Ok(si == sf)
}
