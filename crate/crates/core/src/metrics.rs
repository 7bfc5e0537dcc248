//! Transmission and execution times, and the overall / marginal energy of
//! links, function executions and complete placements.
//!
//! Powers are in watts and durations in milliseconds; every energy leaves
//! this module in joules through [`energy_j`].

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infrastructure::{DeviceId, LinkId, LoadState, PathDescriptor, Topology};
use crate::workload::{FunctionInstance, FunctionSpec, Request};

/// Why a transfer or an execution cannot happen under the current load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Infeasible {
    /// Non-empty dataflow over a link with no bandwidth left.
    Transfer { link: LinkId },
    /// Device with no computing capacity left.
    Execution { device: DeviceId },
}

impl fmt::Display for Infeasible {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Infeasible::Transfer { link } => write!(f, "no bandwidth left on link {}", link.0),
            Infeasible::Execution { device } => write!(f, "no compute left on device {device}"),
        }
    }
}

impl From<Infeasible> for Error {
    fn from(cause: Infeasible) -> Self {
        Error::Infeasible(cause)
    }
}

/// How the marginal energy of an execution on a busy device is read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginalReading {
    /// `P(u_after) - P(u_before)`: the power increment caused by the work.
    #[default]
    Increment,
    /// `P(u_after - u_before)`: the power curve evaluated at the delta.
    Literal,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub marginal: MarginalReading,
}

/// Watts over milliseconds, in joules.
pub fn energy_j(power_w: f64, duration_ms: f64) -> f64 {
    power_w * duration_ms / 1000.0
}

fn hop_times(topology: &Topology, load: &LoadState, path: &PathDescriptor, data_mb: f64) -> Result<Vec<f64>> {
    path.hops
        .iter()
        .map(|&hop| {
            let link = topology.link(hop)?;
            let bandwidth = topology.available_bandwidth(hop, load)?;
            if data_mb == 0.0 {
                Ok(link.propagation_delay_ms)
            } else if bandwidth <= 0.0 {
                Err(Infeasible::Transfer { link: hop }.into())
            } else {
                Ok(link.propagation_delay_ms + data_mb / bandwidth)
            }
        })
        .collect()
}

/// Time to push `data_mb` along `path`: per hop, propagation delay plus
/// size over the bandwidth left on that hop.
pub fn transmission_time(topology: &Topology, load: &LoadState, path: &PathDescriptor, data_mb: f64) -> Result<f64> {
    Ok(hop_times(topology, load, path, data_mb)?.iter().sum())
}

/// Static plus dynamic link power over each hop's transmission time.
pub fn link_energy(topology: &Topology, load: &LoadState, path: &PathDescriptor, data_mb: f64) -> Result<f64> {
    let times = hop_times(topology, load, path, data_mb)?;
    let mut total = 0.0;
    for (&hop, t) in path.hops.iter().zip(times) {
        let link = topology.link(hop)?;
        total += energy_j(link.idle_w + link.dyn_w, t);
    }
    Ok(total)
}

pub fn execution_time(topology: &Topology, load: &LoadState, function: &FunctionSpec, device: DeviceId) -> Result<f64> {
    let capacity = topology.available_compute(device, load)?;
    if capacity <= 0.0 {
        return Err(Infeasible::Execution { device }.into());
    }
    Ok(function.compute_size_mi / capacity)
}

/// Utilization once the instance runs: one more busy core, capped at 1.
pub fn utilization_after(topology: &Topology, load: &LoadState, device: DeviceId) -> Result<f64> {
    let u = load.device_utilization(device)?;
    if u >= 1.0 {
        return Err(Infeasible::Execution { device }.into());
    }
    let cores = topology.device(device)?.cores;
    Ok((u + 1.0 / f64::from(cores)).min(1.0))
}

pub fn device_energy_overall(
    topology: &Topology,
    load: &LoadState,
    function: &FunctionSpec,
    device: DeviceId,
) -> Result<f64> {
    let duration = execution_time(topology, load, function, device)?;
    let after = utilization_after(topology, load, device)?;
    let power = &topology.device(device)?.power;
    Ok(energy_j(power.idle_w() + power.dynamic_power(after)?, duration))
}

pub fn device_energy_marginal(
    topology: &Topology,
    load: &LoadState,
    function: &FunctionSpec,
    device: DeviceId,
    reading: MarginalReading,
) -> Result<f64> {
    let before = load.device_utilization(device)?;
    if before == 0.0 {
        return device_energy_overall(topology, load, function, device);
    }
    let duration = execution_time(topology, load, function, device)?;
    let after = utilization_after(topology, load, device)?;
    let power = &topology.device(device)?.power;
    let watts = match reading {
        MarginalReading::Increment => power.dynamic_power(after)? - power.dynamic_power(before)?,
        MarginalReading::Literal => power.dynamic_power(after - before)?,
    };
    Ok(energy_j(watts, duration))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementEvaluation {
    pub completion_ms: f64,
    pub energy_overall_j: f64,
    pub energy_marginal_j: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Evaluation {
    Feasible(PlacementEvaluation),
    Infeasible(Infeasible),
}

impl Evaluation {
    pub fn feasible(self) -> Option<PlacementEvaluation> {
        match self {
            Evaluation::Feasible(e) => Some(e),
            Evaluation::Infeasible(_) => None,
        }
    }
}

/// Completion time and both energies of the route
/// `begin -> instance_1 -> ... -> instance_n -> end`. Every execution is
/// evaluated against the same pre-request load.
pub fn evaluate_placement(
    request: &Request,
    placement: &[FunctionInstance],
    topology: &Topology,
    load: &LoadState,
    model: EnergyModel,
) -> Result<Evaluation> {
    let chain = &request.service;
    if placement.len() != chain.len() {
        return Err(Error::InvalidPlacement(format!(
            "{} instances for a chain of {} functions",
            placement.len(),
            chain.len()
        )));
    }
    for (inst, f) in placement.iter().zip(chain.functions()) {
        if inst.function != f.id {
            return Err(Error::InvalidPlacement(format!(
                "expected an instance of {} at this position, got {inst}",
                f.id
            )));
        }
    }
    match route_totals(request, placement, topology, load, model) {
        Ok(e) => Ok(Evaluation::Feasible(e)),
        Err(Error::Infeasible(cause)) => Ok(Evaluation::Infeasible(cause)),
        Err(e) => Err(e),
    }
}

fn route_totals(
    request: &Request,
    placement: &[FunctionInstance],
    topology: &Topology,
    load: &LoadState,
    model: EnergyModel,
) -> Result<PlacementEvaluation> {
    let chain = &request.service;
    let mut time = 0.0;
    let mut links = 0.0;
    let mut overall = 0.0;
    let mut marginal = 0.0;
    let mut at = request.begin_device;
    for (i, (inst, f)) in placement.iter().zip(chain.functions()).enumerate() {
        let path = topology.shortest_path(at, inst.device)?;
        let data = chain.dataflows()[i].data_size_mb;
        time += transmission_time(topology, load, path, data)?;
        links += link_energy(topology, load, path, data)?;
        time += execution_time(topology, load, f, inst.device)?;
        overall += device_energy_overall(topology, load, f, inst.device)?;
        marginal += device_energy_marginal(topology, load, f, inst.device, model.marginal)?;
        at = inst.device;
    }
    let path = topology.shortest_path(at, request.end_device)?;
    let data = chain.dataflows()[chain.len()].data_size_mb;
    time += transmission_time(topology, load, path, data)?;
    links += link_energy(topology, load, path, data)?;
    Ok(PlacementEvaluation {
        completion_ms: time,
        energy_overall_j: links + overall,
        energy_marginal_j: links + marginal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infrastructure::{DevicePowerProfile, EdgeDevice, NetworkLink};
    use crate::workload::{DataflowSpec, FunctionId, ServiceChain};
    use proptest::prelude::*;

    fn device(id: u32) -> EdgeDevice {
        EdgeDevice::new(DeviceId(id), 500.0, DevicePowerProfile::linear(98.0, 143.0, 16)).unwrap()
    }

    fn link(a: u32, b: u32, delay: f64) -> NetworkLink {
        NetworkLink {
            a: DeviceId(a),
            b: DeviceId(b),
            propagation_delay_ms: delay,
            bandwidth: 500.0,
            idle_w: 1.0,
            dyn_w: 9.0,
        }
    }

    /// Line 1 - 2 - 3 with 1 ms links.
    fn line() -> Topology {
        Topology::new(vec![device(1), device(2), device(3)], vec![link(1, 2, 1.0), link(2, 3, 1.0)]).unwrap()
    }

    fn func(mi: f64) -> FunctionSpec {
        FunctionSpec {
            id: FunctionId::new("F"),
            compute_size_mi: mi,
        }
    }

    #[test]
    fn transmission_one_and_two_hops() {
        let t = line();
        let load = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        let one = t.shortest_path(DeviceId(1), DeviceId(2)).unwrap();
        let two = t.shortest_path(DeviceId(1), DeviceId(3)).unwrap();
        let same = t.shortest_path(DeviceId(2), DeviceId(2)).unwrap();
        assert!((transmission_time(&t, &load, one, 500.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((transmission_time(&t, &load, two, 500.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(transmission_time(&t, &load, same, 500.0).unwrap(), 0.0);
    }

    #[test]
    fn link_energy_values() {
        let t = line();
        let load = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        let one = t.shortest_path(DeviceId(1), DeviceId(2)).unwrap();
        let two = t.shortest_path(DeviceId(1), DeviceId(3)).unwrap();
        let same = t.shortest_path(DeviceId(1), DeviceId(1)).unwrap();
        // (1 + 9) W * 2 ms
        assert!((link_energy(&t, &load, one, 500.0).unwrap() - 0.02).abs() < 1e-12);
        assert!((link_energy(&t, &load, two, 500.0).unwrap() - 0.04).abs() < 1e-12);
        assert_eq!(link_energy(&t, &load, same, 500.0).unwrap(), 0.0);
    }

    #[test]
    fn saturated_link_blocks_only_non_empty_transfers() {
        let t = line();
        let load = LoadState::uniform(&t, 0.0, 1.0).unwrap();
        let one = t.shortest_path(DeviceId(1), DeviceId(2)).unwrap();
        assert!(matches!(
            transmission_time(&t, &load, one, 1.0),
            Err(Error::Infeasible(Infeasible::Transfer { link: LinkId(0) }))
        ));
        assert_eq!(transmission_time(&t, &load, one, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn execution_times() {
        let t = line();
        let idle = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        assert!((execution_time(&t, &idle, &func(200.0), DeviceId(1)).unwrap() - 6.4).abs() < 1e-12);
        assert!((execution_time(&t, &idle, &func(20.0), DeviceId(1)).unwrap() - 0.64).abs() < 1e-12);
        let full = LoadState::uniform(&t, 1.0, 0.0).unwrap();
        assert!(matches!(
            execution_time(&t, &full, &func(20.0), DeviceId(1)),
            Err(Error::Infeasible(Infeasible::Execution { .. }))
        ));
    }

    #[test]
    fn utilization_after_adds_one_core() {
        let t = line();
        let at = |u: f64| {
            let load = LoadState::uniform(&t, u, 0.0).unwrap();
            utilization_after(&t, &load, DeviceId(1))
        };
        assert_eq!(at(0.0).unwrap(), 0.0625);
        assert_eq!(at(0.5).unwrap(), 0.5625);
        assert_eq!(at(0.97).unwrap(), 1.0);
        assert!(at(1.0).is_err());
    }

    #[test]
    fn overall_energy_on_idle_device() {
        let t = line();
        let idle = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        // (98 + 8.9375) W * 6.4 ms
        let e = device_energy_overall(&t, &idle, &func(200.0), DeviceId(1)).unwrap();
        assert!((e - 0.6844).abs() < 1e-6, "{e}");
        let e = device_energy_overall(&t, &idle, &func(20.0), DeviceId(1)).unwrap();
        assert!((e - 0.06844).abs() < 1e-7, "{e}");
        let tiny = device_energy_overall(&t, &idle, &func(1e-9), DeviceId(1)).unwrap();
        assert!(tiny < 1e-9);
    }

    #[test]
    fn marginal_energy_cases() {
        let t = line();
        let idle = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        let f = func(200.0);
        for reading in [MarginalReading::Increment, MarginalReading::Literal] {
            assert_eq!(
                device_energy_marginal(&t, &idle, &f, DeviceId(1), reading).unwrap(),
                device_energy_overall(&t, &idle, &f, DeviceId(1)).unwrap()
            );
        }
        let half = LoadState::uniform(&t, 0.5, 0.0).unwrap();
        // (P(0.5625) - P(0.5)) * 6.4 ms = 8.9375 W * 6.4 ms
        let e = device_energy_marginal(&t, &half, &f, DeviceId(1), MarginalReading::Increment).unwrap();
        assert!((e - 0.0572).abs() < 1e-9, "{e}");
        // literal: P(0.0625) * 6.4 ms, same number on a linear curve
        let e = device_energy_marginal(&t, &half, &f, DeviceId(1), MarginalReading::Literal).unwrap();
        assert!((e - 0.0572).abs() < 1e-9, "{e}");
    }

    #[test]
    fn concave_profile_makes_low_load_marginal_more_expensive() {
        // two cores, steep first segment: 0 -> 100 W -> 120 W
        let power = DevicePowerProfile::new(50.0, vec![0.0, 100.0, 120.0]).unwrap();
        let d = EdgeDevice::new(DeviceId(1), 100.0, power).unwrap();
        let t = Topology::new(vec![d], vec![]).unwrap();
        let f = func(50.0);
        let at = |u: f64| {
            let load = LoadState::uniform(&t, u, 0.0).unwrap();
            device_energy_marginal(&t, &load, &f, DeviceId(1), MarginalReading::Increment).unwrap()
        };
        // one core = 50 MI/ms -> 1 ms either way.
        // u = 0.1: P(0.6) - P(0.1) = 104 - 20 = 84 W
        // u = 0.4: P(0.9) - P(0.4) = 116 - 80 = 36 W
        assert!((at(0.1) - 0.084).abs() < 1e-12);
        assert!((at(0.4) - 0.036).abs() < 1e-12);
        assert!(at(0.1) > at(0.4));
    }

    fn alternating_request() -> (Topology, Request, Vec<FunctionInstance>) {
        let t = line();
        let ids = ["F1", "F2", "F3", "F4"];
        let chain = ServiceChain::new(
            ids.iter()
                .zip([20.0, 200.0, 200.0, 20.0])
                .map(|(id, mi)| FunctionSpec {
                    id: FunctionId::new(*id),
                    compute_size_mi: mi,
                })
                .collect(),
            [250.0, 500.0, 750.0, 500.0, 250.0]
                .iter()
                .map(|&mb| DataflowSpec { data_size_mb: mb })
                .collect(),
        )
        .unwrap();
        let request = Request::new(chain, DeviceId(1), DeviceId(1), 100.0).unwrap();
        let placement = ids
            .iter()
            .zip([2, 3, 2, 3])
            .map(|(f, d)| FunctionInstance::new(DeviceId(d), FunctionId::new(*f)))
            .collect();
        (t, request, placement)
    }

    #[test]
    fn alternating_devices_hand_summed() {
        let (t, request, placement) = alternating_request();
        let mut devices = std::collections::BTreeMap::new();
        devices.insert(DeviceId(1), 0.0);
        devices.insert(DeviceId(2), 0.5);
        devices.insert(DeviceId(3), 0.0);
        let load = LoadState::new(&t, devices, vec![0.5, 0.0]).unwrap();
        let e = evaluate_placement(&request, &placement, &t, &load, EnergyModel::default())
            .unwrap()
            .feasible()
            .unwrap();
        // Route 1 -> 2 -> 3 -> 2 -> 3 -> 1. Link 1-2 has 250 MB/ms left, 2-3 has 500.
        // d1 250 MB over 1-2:            1 + 1      = 2
        // d2 500 MB over 2-3:            1 + 1      = 2
        // d3 750 MB over 3-2:            1 + 1.5    = 2.5
        // d4 500 MB over 2-3:            1 + 1      = 2
        // d5 250 MB over 3-2 then 2-1:   1.5 + 2    = 3.5
        // transmission = 12 ms, link energy = 10 W * 12 ms = 0.12 J
        // execution 0.64 + 6.4 + 6.4 + 0.64 = 14.08 ms
        assert!((e.completion_ms - 26.08).abs() < 1e-9, "{}", e.completion_ms);
        // device 2 at u = 0.5: (98 + P(0.5625)) = 98 + 80.4375 = 178.4375 W over 0.64 + 6.4 ms
        // device 3 idle:       (98 + 8.9375)   = 106.9375 W over 6.4 + 0.64 ms
        let dev2 = 178.4375 * 7.04 / 1000.0;
        let dev3 = 106.9375 * 7.04 / 1000.0;
        assert!((e.energy_overall_j - (0.12 + dev2 + dev3)).abs() < 1e-9);
        // marginal on device 2 is the 8.9375 W increment
        let dev2_m = 8.9375 * 7.04 / 1000.0;
        assert!((e.energy_marginal_j - (0.12 + dev2_m + dev3)).abs() < 1e-9);
    }

    #[test]
    fn colocated_zero_delay_is_execution_only() {
        let d = device(1);
        let t = Topology::new(vec![d], vec![]).unwrap();
        let (_, request, _) = alternating_request();
        let placement: Vec<_> = request
            .service
            .functions()
            .iter()
            .map(|f| FunctionInstance::new(DeviceId(1), f.id.clone()))
            .collect();
        let load = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        let e = evaluate_placement(&request, &placement, &t, &load, EnergyModel::default())
            .unwrap()
            .feasible()
            .unwrap();
        assert!((e.completion_ms - 14.08).abs() < 1e-9);
    }

    #[test]
    fn placement_shape_is_checked() {
        let (t, request, mut placement) = alternating_request();
        let load = LoadState::uniform(&t, 0.0, 0.0).unwrap();
        placement.swap(0, 1);
        assert!(matches!(
            evaluate_placement(&request, &placement, &t, &load, EnergyModel::default()),
            Err(Error::InvalidPlacement(_))
        ));
        placement.pop();
        assert!(evaluate_placement(&request, &placement, &t, &load, EnergyModel::default()).is_err());
    }

    #[test]
    fn saturated_device_marks_evaluation_infeasible() {
        let (t, request, placement) = alternating_request();
        let load = LoadState::uniform(&t, 1.0, 0.0).unwrap();
        let e = evaluate_placement(&request, &placement, &t, &load, EnergyModel::default()).unwrap();
        assert_eq!(e, Evaluation::Infeasible(Infeasible::Execution { device: DeviceId(2) }));
    }

    proptest! {
        #[test]
        fn marginal_never_exceeds_overall(u in 0.0f64..0.999, mi in 1.0f64..500.0, literal: bool) {
            let t = line();
            let load = LoadState::uniform(&t, u, 0.0).unwrap();
            let f = func(mi);
            let reading = if literal { MarginalReading::Literal } else { MarginalReading::Increment };
            let o = device_energy_overall(&t, &load, &f, DeviceId(1)).unwrap();
            let m = device_energy_marginal(&t, &load, &f, DeviceId(1), reading).unwrap();
            prop_assert!(m <= o + 1e-12);
            prop_assert!(o > 0.0);
            prop_assert!(m >= 0.0);
        }

        #[test]
        fn energy_linear_in_compute_size(u in 0.0f64..0.999, mi in 1.0f64..500.0, scale in 1.0f64..10.0) {
            let t = line();
            let load = LoadState::uniform(&t, u, 0.0).unwrap();
            let a = device_energy_overall(&t, &load, &func(mi), DeviceId(1)).unwrap();
            let b = device_energy_overall(&t, &load, &func(mi * scale), DeviceId(1)).unwrap();
            prop_assert!((b - a * scale).abs() < 1e-9 * b.max(1.0));
        }

        #[test]
        fn transmission_additive_over_hops(u1 in 0.0f64..0.99, u2 in 0.0f64..0.99, mb in 0.0f64..1000.0) {
            let t = line();
            let mut devices = std::collections::BTreeMap::new();
            for id in 1..=3 { devices.insert(DeviceId(id), 0.0); }
            let load = LoadState::new(&t, devices, vec![u1, u2]).unwrap();
            let whole = t.shortest_path(DeviceId(1), DeviceId(3)).unwrap();
            let a = t.shortest_path(DeviceId(1), DeviceId(2)).unwrap();
            let b = t.shortest_path(DeviceId(2), DeviceId(3)).unwrap();
            let tt = |p| transmission_time(&t, &load, p, mb).unwrap();
            let le = |p| link_energy(&t, &load, p, mb).unwrap();
            prop_assert!((tt(whole) - tt(a) - tt(b)).abs() < 1e-9);
            prop_assert!((le(whole) - le(a) - le(b)).abs() < 1e-12);
        }
    }
}
