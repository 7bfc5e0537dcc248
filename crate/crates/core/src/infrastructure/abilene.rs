//! The Abilene backbone (11 PoPs, 14 links) shrunk to a city-scale edge
//! deployment. Link delay is proportional to the great-circle distance
//! between the PoPs, multiplied by a configurable ms-per-km factor.

use super::{DeviceConfig, DeviceId, LinkConfig, TopologyConfig};

/// Homogeneous device and link characteristics.
pub const DEVICE_CAPACITY_MI_MS: f64 = 500.0;
pub const DEVICE_CORES: u32 = 16;
pub const DEVICE_IDLE_W: f64 = 98.0;
pub const DEVICE_DYN_MAX_W: f64 = 143.0;
pub const LINK_BANDWIDTH_MB_MS: f64 = 500.0;
pub const LINK_IDLE_W: f64 = 1.0;
pub const LINK_DYN_W: f64 = 9.0;

/// Default delay factor. The longest Abilene span (Los Angeles - Houston,
/// ~2200 km) maps to ~0.88 ms.
pub const DEFAULT_DELAY_MS_PER_KM: f64 = 0.0004;

const EARTH_RADIUS_KM: f64 = 6371.0;

/// (id, name, latitude, longitude)
pub const POPS: [(u32, &str, f64, f64); 11] = [
    (1, "Seattle", 47.6062, -122.3321),
    (2, "Sunnyvale", 37.3688, -122.0363),
    (3, "Los Angeles", 34.0522, -118.2437),
    (4, "Denver", 39.7392, -104.9903),
    (5, "Kansas City", 39.0997, -94.5786),
    (6, "Houston", 29.7604, -95.3698),
    (7, "Indianapolis", 39.7684, -86.1581),
    (8, "Atlanta", 33.7490, -84.3880),
    (9, "Chicago", 41.8781, -87.6298),
    (10, "New York", 40.7128, -74.0060),
    (11, "Washington DC", 38.9072, -77.0369),
];

pub const LINKS: [(u32, u32); 14] = [
    (1, 2),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 6),
    (4, 5),
    (5, 6),
    (5, 7),
    (6, 8),
    (7, 8),
    (7, 9),
    (8, 11),
    (9, 10),
    (10, 11),
];

fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (lat1, lon1) = (a.0.to_radians(), a.1.to_radians());
    let (lat2, lon2) = (b.0.to_radians(), b.1.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().asin()
}

pub fn distance_km(a: u32, b: u32) -> f64 {
    let pos = |id: u32| {
        let p = POPS.iter().find(|p| p.0 == id).expect("known PoP");
        (p.2, p.3)
    };
    great_circle_km(pos(a), pos(b))
}

/// Builds the topology description. Delays are rounded to 0.1 us so the
/// generated file stays readable.
pub fn config(delay_ms_per_km: f64) -> TopologyConfig {
    let breakpoints: Vec<f64> = (0..=DEVICE_CORES)
        .map(|j| DEVICE_DYN_MAX_W * f64::from(j) / f64::from(DEVICE_CORES))
        .collect();
    let devices = POPS
        .iter()
        .map(|&(id, name, _, _)| DeviceConfig {
            id: DeviceId(id),
            name: Some(name.to_string()),
            capacity_mi_ms: DEVICE_CAPACITY_MI_MS,
            cores: DEVICE_CORES,
            idle_w: DEVICE_IDLE_W,
            dyn_breakpoints_w: breakpoints.clone(),
        })
        .collect();
    let links = LINKS
        .iter()
        .map(|&(a, b)| LinkConfig {
            a: DeviceId(a),
            b: DeviceId(b),
            delay_ms: (distance_km(a, b) * delay_ms_per_km * 1e4).round() / 1e4,
            bandwidth_mb_ms: LINK_BANDWIDTH_MB_MS,
            idle_w: LINK_IDLE_W,
            dyn_w: LINK_DYN_W,
        })
        .collect();
    TopologyConfig { devices, links }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infrastructure::Topology;

    #[test]
    fn shape() {
        let topo = Topology::from_config(&config(DEFAULT_DELAY_MS_PER_KM)).unwrap();
        assert_eq!(topo.devices().len(), 11);
        assert_eq!(topo.links().len(), 14);
    }

    #[test]
    fn known_distance() {
        // New York - Washington is roughly 330 km.
        let d = distance_km(10, 11);
        assert!((300.0..360.0).contains(&d), "{d}");
    }

    #[test]
    fn delays_scale_linearly() {
        let a = config(0.001);
        let b = config(0.002);
        for (x, y) in a.links.iter().zip(&b.links) {
            assert!((2.0 * x.delay_ms - y.delay_ms).abs() < 2e-4);
        }
    }
}
