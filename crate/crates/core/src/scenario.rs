//! Seeded scenario generation and the random baseline placement the
//! optimizer is compared against.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::check_feasibility;
use crate::model::{
    validate_scenario, Cell, Placement, Provenance, Rack, Scenario, Server, Topology,
    TrafficDemand, VmId, VmRequest,
};

/// RNG algorithm identifier recorded in scenario provenance.
pub const RNG_ID: &str = "chacha8";

const GENERATION_RETRIES: u64 = 16;
const BASELINE_RESTARTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_vms: usize,
    pub cpu_choices: Vec<f64>,
    pub mem_range_mb: (u64, u64),
    pub rate_range_mbps: (u64, u64),
    pub max_partners: usize,
    pub seed: u64,
}

impl GeneratorParams {
    pub fn new(n_vms: usize, seed: u64) -> Self {
        GeneratorParams {
            n_vms,
            cpu_choices: vec![0.1, 0.5, 1.0],
            mem_range_mb: (100, 500),
            rate_range_mbps: (100, 10_000),
            max_partners: 4,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid generator params: {0}")]
    InvalidParams(String),
    #[error("no capacity-sane scenario found after {retries} seeds starting at {seed}")]
    UnsatisfiableParams { seed: u64, retries: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("no feasible random placement after {restarts} restarts")]
    Infeasible { restarts: usize },
}

/// The reference fabric: 3 cells x 2 racks x 4 servers, 10G ONUs at 2.5 W,
/// 60 Gbps wavelength capacity per cell.
pub fn default_topology() -> Topology {
    let mut next_id = 0u32;
    let cells = (0..3)
        .map(|_| Cell {
            wavelength_capacity_mbps: 60_000,
            racks: (0..2)
                .map(|_| Rack {
                    servers: (0..4)
                        .map(|_| {
                            let id = next_id;
                            next_id += 1;
                            Server {
                                id,
                                cpu_capacity: 1.0,
                                mem_capacity_mb: 16_384,
                                onu_rate_mbps: 10_000,
                                onu_power_w: 2.5,
                                idle_power_w: 301.6,
                                max_power_w: 457.0,
                            }
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    Topology { cells }
}

/// Draws a random scenario: CPU uniform over the choice set, memory and
/// rates uniform integers over their ranges, and up to `max_partners`
/// directed demands per VM. Retries with seed+1 (16 attempts) when the draw
/// fails the total-capacity sanity check.
pub fn generate_scenario(
    params: &GeneratorParams,
    topo: &Topology,
) -> Result<Scenario, GeneratorError> {
    if params.cpu_choices.is_empty() {
        return Err(GeneratorError::InvalidParams("empty cpu_choices".into()));
    }
    if params.mem_range_mb.0 > params.mem_range_mb.1
        || params.rate_range_mbps.0 > params.rate_range_mbps.1
        || params.mem_range_mb.0 == 0
        || params.rate_range_mbps.0 == 0
    {
        return Err(GeneratorError::InvalidParams("bad range".into()));
    }
    if params
        .cpu_choices
        .iter()
        .any(|&c| !(c > 0.0 && c <= 1.0))
    {
        return Err(GeneratorError::InvalidParams(
            "cpu choices must lie in (0, 1]".into(),
        ));
    }

    let total_cpu_cap: f64 = topo.servers().map(|s| s.cpu_capacity).sum();
    let total_mem_cap: u64 = topo.servers().map(|s| s.mem_capacity_mb).sum();

    for attempt in 0..GENERATION_RETRIES {
        let seed = params.seed.wrapping_add(attempt);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = params.n_vms;

        let vms: Vec<VmRequest> = (0..n as VmId)
            .map(|id| VmRequest {
                id,
                cpu_demand: params.cpu_choices[rng.random_range(0..params.cpu_choices.len())],
                mem_demand_mb: rng.random_range(params.mem_range_mb.0..=params.mem_range_mb.1),
            })
            .collect();

        let mut traffic = Vec::new();
        for i in 0..n as VmId {
            let k = rng.random_range(0..=params.max_partners).min(n.saturating_sub(1));
            let mut others: Vec<VmId> = (0..n as VmId).filter(|&f| f != i).collect();
            others.shuffle(&mut rng);
            for &f in others.iter().take(k) {
                traffic.push(TrafficDemand {
                    src: i,
                    dst: f,
                    rate_mbps: rng
                        .random_range(params.rate_range_mbps.0..=params.rate_range_mbps.1),
                });
            }
        }

        let total_cpu: f64 = vms.iter().map(|v| v.cpu_demand).sum();
        let total_mem: u64 = vms.iter().map(|v| v.mem_demand_mb).sum();
        if total_cpu > total_cpu_cap || total_mem > total_mem_cap {
            continue;
        }

        let scenario = Scenario {
            topology: topo.clone(),
            vms,
            traffic,
            seed,
            provenance: Some(Provenance {
                rng: RNG_ID.to_string(),
                seed,
                params: serde_json::to_value(params).expect("params serialize"),
            }),
        };
        return Ok(validate_scenario(scenario).expect("generated scenario is valid"));
    }
    Err(GeneratorError::UnsatisfiableParams {
        seed: params.seed,
        retries: GENERATION_RETRIES,
    })
}

/// Random baseline: place each VM on a uniformly random server, ignoring
/// traffic. A server violating CPU/memory is resampled among the remaining
/// ones; a placement that ends up ONU- or wavelength-infeasible restarts the
/// whole draw (64 attempts). Deterministic given the seed.
pub fn baseline_place(sc: &Scenario, seed: u64) -> Result<Placement, BaselineError> {
    let idx = sc.topology.index();
    let m = idx.servers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vm_order: Vec<&VmRequest> = sc.vms.iter().collect();
    vm_order.sort_by_key(|v| v.id);

    'restart: for _ in 0..BASELINE_RESTARTS {
        let mut cpu_used = vec![0.0f64; m];
        let mut mem_used = vec![0u64; m];
        let mut placement = Placement::default();
        for vm in &vm_order {
            let mut candidates: Vec<usize> = (0..m).collect();
            candidates.shuffle(&mut rng);
            let mut placed = false;
            for s in candidates {
                let srv = idx.servers[s];
                if cpu_used[s] + vm.cpu_demand <= srv.cpu_capacity + 1e-9
                    && mem_used[s] + vm.mem_demand_mb <= srv.mem_capacity_mb
                {
                    cpu_used[s] += vm.cpu_demand;
                    mem_used[s] += vm.mem_demand_mb;
                    placement.assignment.insert(vm.id, srv.id);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        if check_feasibility(&placement, sc).is_empty() {
            return Ok(placement);
        }
    }
    Err(BaselineError::Infeasible {
        restarts: BASELINE_RESTARTS,
    })
}
