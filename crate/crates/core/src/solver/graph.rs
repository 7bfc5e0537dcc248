use crate::error::{Error, Result};
use crate::infrastructure::{DeviceId, LoadState, Topology};
use crate::metrics::{self, EnergyModel};
use crate::workload::{Deployment, FunctionId, FunctionInstance, Request};

use super::Objective;

/// Everything a single request placement depends on.
#[derive(Debug, Clone, Copy)]
pub struct PlacementProblem<'a> {
    pub topology: &'a Topology,
    pub deployment: &'a Deployment,
    pub request: &'a Request,
    pub load: &'a LoadState,
    pub model: EnergyModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeCost {
    pub latency_ms: f64,
    pub energy_overall_j: f64,
    pub energy_marginal_j: f64,
}

impl NodeCost {
    pub fn energy(&self, objective: Objective) -> f64 {
        match objective {
            Objective::Overall => self.energy_overall_j,
            Objective::Marginal => self.energy_marginal_j,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcCost {
    pub latency_ms: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceNode {
    pub instance: FunctionInstance,
    /// Zero-based chain position of the instance's function.
    pub position: usize,
    /// `None` when the device has no capacity left.
    pub cost: Option<NodeCost>,
}

/// Node of the instance graph: the virtual begin/end instances or a real
/// function instance (index into [`InstanceGraph::nodes`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Begin,
    Instance(usize),
    End,
}

/// Function instances laid out in chain layers, with every per-node and
/// per-arc coefficient computed once against the decision-time load.
///
/// Arcs only join consecutive layers (plus begin -> first layer and last
/// layer -> end). Arcs between instances on the same device cost no energy.
#[derive(Debug, Clone)]
pub struct InstanceGraph {
    pub(crate) functions: Vec<FunctionId>,
    pub(crate) begin_device: DeviceId,
    pub(crate) end_device: DeviceId,
    pub(crate) nodes: Vec<InstanceNode>,
    /// `layers[i]` lists node indices of function `i`, ordered by device id.
    pub(crate) layers: Vec<Vec<usize>>,
    /// `arcs[t][a][b]`: transition `t` joins slot `a` of layer `t - 1` (or
    /// the begin node when `t == 0`) to slot `b` of layer `t` (or the end
    /// node when `t == functions.len()`).
    pub(crate) arcs: Vec<Vec<Vec<Option<ArcCost>>>>,
}

impl InstanceGraph {
    pub fn functions(&self) -> &[FunctionId] {
        &self.functions
    }

    pub fn nodes(&self) -> &[InstanceNode] {
        &self.nodes
    }

    pub fn layer(&self, position: usize) -> &[usize] {
        &self.layers[position]
    }

    pub fn begin_device(&self) -> DeviceId {
        self.begin_device
    }

    pub fn end_device(&self) -> DeviceId {
        self.end_device
    }

    /// Function instances plus the virtual begin and end nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len() + 2
    }

    pub fn arc_count(&self) -> usize {
        self.arcs
            .iter()
            .flatten()
            .flatten()
            .filter(|a| a.is_some())
            .count()
    }

    /// First function left without any usable instance, if any.
    pub fn function_infeasible(&self) -> Option<&FunctionId> {
        self.layers
            .iter()
            .position(|layer| layer.iter().all(|&n| self.nodes[n].cost.is_none()))
            .map(|i| &self.functions[i])
    }

    /// Number of complete instance combinations, usable or not.
    pub fn combinations(&self) -> u128 {
        self.layers.iter().map(|l| l.len() as u128).product()
    }

    pub fn find(&self, instance: &FunctionInstance) -> Option<usize> {
        self.nodes.iter().position(|n| &n.instance == instance)
    }

    pub fn device_of(&self, node: NodeRef) -> DeviceId {
        match node {
            NodeRef::Begin => self.begin_device,
            NodeRef::End => self.end_device,
            NodeRef::Instance(i) => self.nodes[i].instance.device,
        }
    }

    /// Chain position of a node: begin is -1, end is `functions.len()`.
    pub(crate) fn level(&self, node: NodeRef) -> isize {
        match node {
            NodeRef::Begin => -1,
            NodeRef::End => self.functions.len() as isize,
            NodeRef::Instance(i) => self.nodes[i].position as isize,
        }
    }

    fn slot(&self, node: NodeRef) -> usize {
        match node {
            NodeRef::Begin | NodeRef::End => 0,
            NodeRef::Instance(i) => {
                let layer = &self.layers[self.nodes[i].position];
                layer.iter().position(|&n| n == i).expect("node is in its layer")
            }
        }
    }

    /// Cost of the arc `from -> to`, `None` if the graph has no such arc.
    pub fn arc(&self, from: NodeRef, to: NodeRef) -> Option<ArcCost> {
        let (lf, lt) = (self.level(from), self.level(to));
        if lt != lf + 1 || from == NodeRef::End || to == NodeRef::Begin {
            return None;
        }
        self.arcs[lt as usize][self.slot(from)][self.slot(to)]
    }

    pub(crate) fn arc_at(&self, transition: usize, from_slot: usize, to_slot: usize) -> Option<ArcCost> {
        self.arcs[transition][from_slot][to_slot]
    }

    /// Copy of the graph with one instance removed.
    pub fn without(&self, instance: &FunctionInstance) -> InstanceGraph {
        let Some(idx) = self.find(instance) else {
            return self.clone();
        };
        let position = self.nodes[idx].position;
        let slot = self.slot(NodeRef::Instance(idx));
        let mut g = self.clone();
        g.nodes.remove(idx);
        for layer in &mut g.layers {
            layer.retain(|&n| n != idx);
            for n in layer.iter_mut() {
                if *n > idx {
                    *n -= 1;
                }
            }
        }
        // incoming arcs are rows of transition `position`'s columns,
        // outgoing arcs are rows of transition `position + 1`
        for row in &mut g.arcs[position] {
            row.remove(slot);
        }
        g.arcs[position + 1].remove(slot);
        g
    }
}

/// Builds the layered instance graph for `problem`.
pub fn build_instance_graph(problem: &PlacementProblem<'_>) -> Result<InstanceGraph> {
    let PlacementProblem {
        topology,
        deployment,
        request,
        load,
        model,
    } = *problem;
    topology.device(request.begin_device)?;
    topology.device(request.end_device)?;
    let chain = &request.service;

    let mut nodes = Vec::new();
    let mut layers = Vec::with_capacity(chain.len());
    for (position, f) in chain.functions().iter().enumerate() {
        let mut layer = Vec::new();
        for instance in deployment.instances_of(&f.id)? {
            topology.device(instance.device)?;
            let cost = node_cost(topology, load, f, instance.device, model)?;
            layer.push(nodes.len());
            nodes.push(InstanceNode {
                instance,
                position,
                cost,
            });
        }
        layers.push(layer);
    }

    let mut arcs = Vec::with_capacity(chain.len() + 1);
    for t in 0..=chain.len() {
        let from: Vec<(DeviceId, bool)> = if t == 0 {
            vec![(request.begin_device, true)]
        } else {
            layers[t - 1]
                .iter()
                .map(|&n| (nodes[n].instance.device, nodes[n].cost.is_some()))
                .collect()
        };
        let to: Vec<(DeviceId, bool)> = if t == chain.len() {
            vec![(request.end_device, true)]
        } else {
            layers[t]
                .iter()
                .map(|&n| (nodes[n].instance.device, nodes[n].cost.is_some()))
                .collect()
        };
        let data = chain.dataflows()[t].data_size_mb;
        let mut table = Vec::with_capacity(from.len());
        for &(a, a_ok) in &from {
            let mut row = Vec::with_capacity(to.len());
            for &(b, b_ok) in &to {
                row.push(if a_ok && b_ok {
                    arc_cost(topology, load, a, b, data)?
                } else {
                    None
                });
            }
            table.push(row);
        }
        arcs.push(table);
    }

    Ok(InstanceGraph {
        functions: chain.functions().iter().map(|f| f.id.clone()).collect(),
        begin_device: request.begin_device,
        end_device: request.end_device,
        nodes,
        layers,
        arcs,
    })
}

fn node_cost(
    topology: &Topology,
    load: &LoadState,
    f: &crate::workload::FunctionSpec,
    device: DeviceId,
    model: EnergyModel,
) -> Result<Option<NodeCost>> {
    let cost = (|| {
        Ok(NodeCost {
            latency_ms: metrics::execution_time(topology, load, f, device)?,
            energy_overall_j: metrics::device_energy_overall(topology, load, f, device)?,
            energy_marginal_j: metrics::device_energy_marginal(topology, load, f, device, model.marginal)?,
        })
    })();
    match cost {
        Ok(c) => Ok(Some(c)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn arc_cost(topology: &Topology, load: &LoadState, a: DeviceId, b: DeviceId, data_mb: f64) -> Result<Option<ArcCost>> {
    let path = topology.shortest_path(a, b)?;
    let cost = (|| {
        Ok(ArcCost {
            latency_ms: metrics::transmission_time(topology, load, path, data_mb)?,
            energy_j: metrics::link_energy(topology, load, path, data_mb)?,
        })
    })();
    match cost {
        Ok(c) => Ok(Some(c)),
        Err(Error::Infeasible(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
