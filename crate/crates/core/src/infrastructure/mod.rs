//! Physical edge infrastructure: devices, links, power profiles and the
//! utilization snapshot observed at a decision point.
//!
//! The [`Topology`] is immutable once built. All-pairs shortest paths are
//! computed at construction time and shared read-only by every solve.

pub mod abilene;
mod paths;
mod power;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use paths::{shortest_path_between, PathDescriptor};
pub use power::DevicePowerProfile;

/// Identifier of an edge device, as used in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a link in its [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeDevice {
    pub id: DeviceId,
    pub name: Option<String>,
    /// Full computing capacity in MI/ms.
    pub compute_capacity: f64,
    pub cores: u32,
    pub power: DevicePowerProfile,
}

impl EdgeDevice {
    pub fn new(id: DeviceId, compute_capacity: f64, power: DevicePowerProfile) -> Result<Self> {
        if !(compute_capacity.is_finite() && compute_capacity > 0.0) {
            return Err(Error::InvalidTopology(format!(
                "device {id}: compute capacity must be positive, got {compute_capacity}"
            )));
        }
        Ok(Self {
            id,
            name: None,
            compute_capacity,
            cores: power.cores(),
            power,
        })
    }

    /// Capacity a single function instance can use: at most one core, and
    /// never more than what the current load leaves free.
    pub fn available_compute(&self, utilization: f64) -> Result<f64> {
        check_fraction(utilization)?;
        let one_core = self.compute_capacity / f64::from(self.cores);
        let free = (1.0 - utilization) * self.compute_capacity;
        Ok(one_core.min(free).max(0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkLink {
    pub a: DeviceId,
    pub b: DeviceId,
    pub propagation_delay_ms: f64,
    /// Nominal bandwidth in MB/ms.
    pub bandwidth: f64,
    pub idle_w: f64,
    pub dyn_w: f64,
}

impl NetworkLink {
    pub fn available_bandwidth(&self, utilization: f64) -> Result<f64> {
        check_fraction(utilization)?;
        Ok(((1.0 - utilization) * self.bandwidth).max(0.0))
    }

    pub fn other_end(&self, from: DeviceId) -> Option<DeviceId> {
        if from == self.a {
            Some(self.b)
        } else if from == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

pub(crate) fn check_fraction(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::UtilizationOutOfRange(u))
    }
}

/// Undirected edge graph with cached all-pairs minimum-delay paths.
#[derive(Debug, Clone)]
pub struct Topology {
    devices: Vec<EdgeDevice>,
    links: Vec<NetworkLink>,
    index: BTreeMap<DeviceId, usize>,
    // paths[src_idx][dst_idx]
    paths: Vec<Vec<PathDescriptor>>,
}

impl Topology {
    pub fn new(mut devices: Vec<EdgeDevice>, links: Vec<NetworkLink>) -> Result<Self> {
        if devices.is_empty() {
            return Err(Error::InvalidTopology("no devices".into()));
        }
        devices.sort_by_key(|d| d.id);
        let mut index = BTreeMap::new();
        for (i, d) in devices.iter().enumerate() {
            if index.insert(d.id, i).is_some() {
                return Err(Error::InvalidTopology(format!("duplicate device id {}", d.id)));
            }
            if d.cores == 0 || d.power.cores() != d.cores {
                return Err(Error::InvalidTopology(format!(
                    "device {}: power profile must have cores + 1 breakpoints",
                    d.id
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, l) in links.iter().enumerate() {
            for end in [l.a, l.b] {
                if !index.contains_key(&end) {
                    return Err(Error::InvalidTopology(format!(
                        "link {i} references unknown device {end}"
                    )));
                }
            }
            if l.a == l.b {
                return Err(Error::InvalidTopology(format!("link {i} is a self-loop on {}", l.a)));
            }
            if !seen.insert((l.a.min(l.b), l.a.max(l.b))) {
                return Err(Error::InvalidTopology(format!(
                    "duplicate link between {} and {}",
                    l.a, l.b
                )));
            }
            let ok = l.propagation_delay_ms.is_finite()
                && l.propagation_delay_ms >= 0.0
                && l.bandwidth.is_finite()
                && l.bandwidth > 0.0
                && l.idle_w >= 0.0
                && l.dyn_w >= 0.0;
            if !ok {
                return Err(Error::InvalidTopology(format!(
                    "link {i} ({}-{}): delay and powers must be >= 0, bandwidth > 0",
                    l.a, l.b
                )));
            }
        }

        let mut paths = Vec::with_capacity(devices.len());
        for src in &devices {
            let mut row = Vec::with_capacity(devices.len());
            for dst in &devices {
                match shortest_path_between(&devices, &links, src.id, dst.id) {
                    Ok(p) => row.push(p),
                    Err(Error::NoPath { .. }) => {
                        return Err(Error::InvalidTopology(format!(
                            "graph is not connected: no path from {} to {}",
                            src.id, dst.id
                        )))
                    }
                    Err(e) => return Err(e),
                }
            }
            paths.push(row);
        }

        Ok(Self {
            devices,
            links,
            index,
            paths,
        })
    }

    /// Devices in ascending id order.
    pub fn devices(&self) -> &[EdgeDevice] {
        &self.devices
    }

    pub fn links(&self) -> &[NetworkLink] {
        &self.links
    }

    pub fn device_ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.devices.iter().map(|d| d.id)
    }

    pub fn contains(&self, id: DeviceId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn device(&self, id: DeviceId) -> Result<&EdgeDevice> {
        self.index
            .get(&id)
            .map(|&i| &self.devices[i])
            .ok_or(Error::UnknownDevice(id))
    }

    pub fn link(&self, id: LinkId) -> Result<&NetworkLink> {
        self.links.get(id.0).ok_or(Error::UnknownLink(id.0))
    }

    /// Minimum-propagation-delay path. Load never reroutes traffic, so the
    /// answer comes straight from the cache built in [`Topology::new`].
    pub fn shortest_path(&self, src: DeviceId, dst: DeviceId) -> Result<&PathDescriptor> {
        let s = *self.index.get(&src).ok_or(Error::UnknownDevice(src))?;
        let d = *self.index.get(&dst).ok_or(Error::UnknownDevice(dst))?;
        Ok(&self.paths[s][d])
    }

    pub fn available_bandwidth(&self, link: LinkId, load: &LoadState) -> Result<f64> {
        self.link(link)?.available_bandwidth(load.link_utilization(link)?)
    }

    pub fn available_compute(&self, device: DeviceId, load: &LoadState) -> Result<f64> {
        self.device(device)?
            .available_compute(load.device_utilization(device)?)
    }

    pub fn from_config(config: &TopologyConfig) -> Result<Self> {
        let mut devices = Vec::with_capacity(config.devices.len());
        for d in &config.devices {
            let power = DevicePowerProfile::new(d.idle_w, d.dyn_breakpoints_w.clone())
                .map_err(|e| Error::InvalidTopology(format!("device {}: {e}", d.id)))?;
            if power.cores() != d.cores {
                return Err(Error::InvalidTopology(format!(
                    "device {}: {} cores but {} dynamic power breakpoints",
                    d.id,
                    d.cores,
                    d.dyn_breakpoints_w.len()
                )));
            }
            let mut dev = EdgeDevice::new(d.id, d.capacity_mi_ms, power)?;
            dev.name = d.name.clone();
            devices.push(dev);
        }
        let links = config
            .links
            .iter()
            .map(|l| NetworkLink {
                a: l.a,
                b: l.b,
                propagation_delay_ms: l.delay_ms,
                bandwidth: l.bandwidth_mb_ms,
                idle_w: l.idle_w,
                dyn_w: l.dyn_w,
            })
            .collect();
        Self::new(devices, links)
    }

    pub fn to_config(&self) -> TopologyConfig {
        TopologyConfig {
            devices: self
                .devices
                .iter()
                .map(|d| DeviceConfig {
                    id: d.id,
                    name: d.name.clone(),
                    capacity_mi_ms: d.compute_capacity,
                    cores: d.cores,
                    idle_w: d.power.idle_w(),
                    dyn_breakpoints_w: d.power.breakpoints().to_vec(),
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkConfig {
                    a: l.a,
                    b: l.b,
                    delay_ms: l.propagation_delay_ms,
                    bandwidth_mb_ms: l.bandwidth,
                    idle_w: l.idle_w,
                    dyn_w: l.dyn_w,
                })
                .collect(),
        }
    }
}

/// Per-device and per-link utilization at one decision point, as fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    devices: BTreeMap<DeviceId, f64>,
    links: Vec<f64>,
}

impl LoadState {
    pub fn new(topology: &Topology, devices: BTreeMap<DeviceId, f64>, links: Vec<f64>) -> Result<Self> {
        if devices.len() != topology.devices().len() {
            return Err(Error::InvalidLoad(format!(
                "{} device entries for {} devices",
                devices.len(),
                topology.devices().len()
            )));
        }
        for (id, u) in &devices {
            if !topology.contains(*id) {
                return Err(Error::UnknownDevice(*id));
            }
            check_fraction(*u)?;
        }
        if links.len() != topology.links().len() {
            return Err(Error::InvalidLoad(format!(
                "{} link entries for {} links",
                links.len(),
                topology.links().len()
            )));
        }
        for u in &links {
            check_fraction(*u)?;
        }
        Ok(Self { devices, links })
    }

    pub fn uniform(topology: &Topology, device_u: f64, link_u: f64) -> Result<Self> {
        let devices = topology.device_ids().map(|id| (id, device_u)).collect();
        Self::new(topology, devices, vec![link_u; topology.links().len()])
    }

    /// Same as [`LoadState::new`] but with utilizations given in percent.
    pub fn from_percent(
        topology: &Topology,
        devices: BTreeMap<DeviceId, f64>,
        links: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            topology,
            devices.into_iter().map(|(k, v)| (k, v / 100.0)).collect(),
            links.into_iter().map(|v| v / 100.0).collect(),
        )
    }

    pub fn device_utilization(&self, id: DeviceId) -> Result<f64> {
        self.devices.get(&id).copied().ok_or(Error::UnknownDevice(id))
    }

    pub fn link_utilization(&self, id: LinkId) -> Result<f64> {
        self.links.get(id.0).copied().ok_or(Error::UnknownLink(id.0))
    }

    pub fn devices(&self) -> &BTreeMap<DeviceId, f64> {
        &self.devices
    }

    pub fn links(&self) -> &[f64] {
        &self.links
    }

    pub fn set_device(&mut self, id: DeviceId, u: f64) -> Result<()> {
        check_fraction(u)?;
        match self.devices.get_mut(&id) {
            Some(slot) => {
                *slot = u;
                Ok(())
            }
            None => Err(Error::UnknownDevice(id)),
        }
    }

    pub fn set_link(&mut self, id: LinkId, u: f64) -> Result<()> {
        check_fraction(u)?;
        match self.links.get_mut(id.0) {
            Some(slot) => {
                *slot = u;
                Ok(())
            }
            None => Err(Error::UnknownLink(id.0)),
        }
    }
}

/// On-disk topology description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub devices: Vec<DeviceConfig>,
    pub links: Vec<LinkConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub id: DeviceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub capacity_mi_ms: f64,
    pub cores: u32,
    pub idle_w: f64,
    pub dyn_breakpoints_w: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: DeviceId,
    pub b: DeviceId,
    pub delay_ms: f64,
    pub bandwidth_mb_ms: f64,
    pub idle_w: f64,
    pub dyn_w: f64,
}
