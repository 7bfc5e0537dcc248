use std::cmp::Ordering;

use crate::error::{Error, Result};

use super::{DeviceId, EdgeDevice, LinkId, NetworkLink};

const DELAY_TIE_MS: f64 = 1e-9;

/// A physical route between two devices.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDescriptor {
    /// Visited devices, source first. A single entry for `src == dst`.
    pub devices: Vec<DeviceId>,
    pub hops: Vec<LinkId>,
    pub total_delay_ms: f64,
}

impl PathDescriptor {
    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

#[derive(Clone)]
struct Label {
    delay: f64,
    seq: Vec<DeviceId>,
    hops: Vec<LinkId>,
}

fn better(a: &Label, b: &Label) -> Ordering {
    if (a.delay - b.delay).abs() <= DELAY_TIE_MS {
        a.seq.cmp(&b.seq)
    } else if a.delay < b.delay {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

/// Dijkstra on propagation delay. Equal-delay paths are ordered by their
/// device-id sequence; that order survives extension by a common suffix
/// (two simple paths ending at the same device first differ inside the
/// shorter one), so settling by `(delay, sequence)` stays exact.
pub fn shortest_path_between(
    devices: &[EdgeDevice],
    links: &[NetworkLink],
    src: DeviceId,
    dst: DeviceId,
) -> Result<PathDescriptor> {
    let pos = |id: DeviceId| devices.iter().position(|d| d.id == id);
    let s = pos(src).ok_or(Error::UnknownDevice(src))?;
    let t = pos(dst).ok_or(Error::UnknownDevice(dst))?;

    let n = devices.len();
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (li, l) in links.iter().enumerate() {
        if let (Some(a), Some(b)) = (pos(l.a), pos(l.b)) {
            adjacency[a].push((li, b));
            adjacency[b].push((li, a));
        }
    }

    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut done = vec![false; n];
    labels[s] = Some(Label {
        delay: 0.0,
        seq: vec![src],
        hops: Vec::new(),
    });

    loop {
        let next = (0..n)
            .filter(|&i| !done[i])
            .filter_map(|i| labels[i].as_ref().map(|l| (i, l)))
            .min_by(|x, y| better(x.1, y.1))
            .map(|(i, _)| i);
        let Some(u) = next else { break };
        done[u] = true;
        if u == t {
            break;
        }
        let current = labels[u].clone().expect("settled node has a label");
        for &(li, v) in &adjacency[u] {
            if done[v] {
                continue;
            }
            let mut cand = current.clone();
            cand.delay += links[li].propagation_delay_ms;
            cand.seq.push(devices[v].id);
            cand.hops.push(LinkId(li));
            let replace = match &labels[v] {
                None => true,
                Some(old) => better(&cand, old) == Ordering::Less,
            };
            if replace {
                labels[v] = Some(cand);
            }
        }
    }

    match labels[t].take() {
        Some(l) if done[t] => Ok(PathDescriptor {
            devices: l.seq,
            hops: l.hops,
            total_delay_ms: l.delay,
        }),
        _ => Err(Error::NoPath { src, dst }),
    }
}
