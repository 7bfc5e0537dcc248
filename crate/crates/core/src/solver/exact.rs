//! Depth-first branch-and-bound over the chain layers.
//!
//! Children are expanded in ascending device-id order and an incumbent is
//! only replaced by a strictly cheaper placement (beyond the tie tolerance),
//! so among equal-energy optima the lexicographically smallest device
//! sequence wins. Bounds come from exact backward cost-to-go tables, one for
//! energy and one for latency, both ignoring the deadline.

use std::time::Instant;

use super::graph::{InstanceGraph, NodeRef};
use super::{Objective, PlacementOutcome, SolverOptions, Status, DEADLINE_TOLERANCE_MS};
use crate::metrics::PlacementEvaluation;

struct Search<'g> {
    graph: &'g InstanceGraph,
    objective: Objective,
    deadline: f64,
    tolerance: f64,
    // per layer, per slot
    energy_to_go: Vec<Vec<f64>>,
    latency_to_go: Vec<Vec<f64>>,
    best: Option<(f64, Vec<usize>)>,
    path: Vec<usize>,
}

/// Minimum remaining energy and latency from every slot of every layer to
/// the end node.
fn cost_to_go(graph: &InstanceGraph, objective: Objective) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = graph.layers.len();
    let mut energy = vec![Vec::new(); n];
    let mut latency = vec![Vec::new(); n];
    for i in (0..n).rev() {
        let width = graph.layers[i].len();
        let mut e = vec![f64::INFINITY; width];
        let mut l = vec![f64::INFINITY; width];
        for a in 0..width {
            if i + 1 == n {
                if let Some(arc) = graph.arc_at(n, a, 0) {
                    e[a] = arc.energy_j;
                    l[a] = arc.latency_ms;
                }
                continue;
            }
            for (b, &node) in graph.layers[i + 1].iter().enumerate() {
                let (Some(arc), Some(cost)) = (graph.arc_at(i + 1, a, b), graph.nodes[node].cost) else {
                    continue;
                };
                e[a] = e[a].min(arc.energy_j + cost.energy(objective) + energy[i + 1][b]);
                l[a] = l[a].min(arc.latency_ms + cost.latency_ms + latency[i + 1][b]);
            }
        }
        energy[i] = e;
        latency[i] = l;
    }
    (energy, latency)
}

impl Search<'_> {
    fn descend(&mut self, layer: usize, from_slot: usize, energy: f64, latency: f64) {
        let n = self.graph.layers.len();
        if layer == n {
            let Some(arc) = self.graph.arc_at(n, from_slot, 0) else { return };
            let total_e = energy + arc.energy_j;
            let total_l = latency + arc.latency_ms;
            if total_l > self.deadline + DEADLINE_TOLERANCE_MS {
                return;
            }
            let better = match &self.best {
                None => true,
                Some((best, _)) => total_e < best - self.tolerance,
            };
            if better {
                self.best = Some((total_e, self.path.clone()));
            }
            return;
        }
        for (slot, &node) in self.graph.layers[layer].iter().enumerate() {
            let (Some(arc), Some(cost)) = (self.graph.arc_at(layer, from_slot, slot), self.graph.nodes[node].cost)
            else {
                continue;
            };
            let e = energy + arc.energy_j + cost.energy(self.objective);
            let l = latency + arc.latency_ms + cost.latency_ms;
            // slack on both bounds keeps rounding noise from pruning a
            // branch the exhaustive search would accept
            if l + self.latency_to_go[layer][slot] > self.deadline + 2.0 * DEADLINE_TOLERANCE_MS {
                continue;
            }
            if let Some((best, _)) = &self.best {
                if e + self.energy_to_go[layer][slot] > best - self.tolerance / 2.0 {
                    continue;
                }
            }
            self.path.push(node);
            self.descend(layer + 1, slot, e, l);
            self.path.pop();
        }
    }
}

pub(super) fn solve(
    graph: &InstanceGraph,
    objective: Objective,
    deadline_ms: f64,
    options: &SolverOptions,
) -> PlacementOutcome {
    let started = Instant::now();
    let mut outcome = PlacementOutcome::infeasible(objective, deadline_ms);
    if graph.function_infeasible().is_none() {
        let (energy_to_go, latency_to_go) = cost_to_go(graph, objective);
        let mut search = Search {
            graph,
            objective,
            deadline: deadline_ms,
            tolerance: options.tie_tolerance_j,
            energy_to_go,
            latency_to_go,
            best: None,
            path: Vec::with_capacity(graph.layers.len()),
        };
        search.descend(0, 0, 0.0, 0.0);
        if let Some((_, nodes)) = search.best {
            outcome.status = Status::Feasible;
            outcome.evaluation = Some(evaluate_nodes(graph, &nodes));
            outcome.placement = nodes.iter().map(|&n| graph.nodes[n].instance.clone()).collect();
        }
    }
    outcome.solver_time_ms = started.elapsed().as_secs_f64() * 1000.0;
    outcome
}

/// Sums graph coefficients along `begin -> nodes... -> end`.
pub(super) fn evaluate_nodes(graph: &InstanceGraph, nodes: &[usize]) -> PlacementEvaluation {
    let mut eval = PlacementEvaluation {
        completion_ms: 0.0,
        energy_overall_j: 0.0,
        energy_marginal_j: 0.0,
    };
    let mut prev = NodeRef::Begin;
    for &n in nodes.iter() {
        let next = NodeRef::Instance(n);
        let arc = graph.arc(prev, next).expect("solution arc exists");
        let cost = graph.nodes[n].cost.expect("solution node is usable");
        eval.completion_ms += arc.latency_ms + cost.latency_ms;
        eval.energy_overall_j += arc.energy_j + cost.energy_overall_j;
        eval.energy_marginal_j += arc.energy_j + cost.energy_marginal_j;
        prev = next;
    }
    let arc = graph.arc(prev, NodeRef::End).expect("solution arc exists");
    eval.completion_ms += arc.latency_ms;
    eval.energy_overall_j += arc.energy_j;
    eval.energy_marginal_j += arc.energy_j;
    eval
}
