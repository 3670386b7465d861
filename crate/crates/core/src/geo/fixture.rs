//! Synthetic seven-zone layout used by tests and as the fallback when no
//! zone file is configured.
//!
//! The barangay is a 0.012° × 0.014° rectangle split into a southern row of
//! four zones (1-4) and a northern row of three (5-7). Northern corners on
//! the dividing street are also vertices of the southern rings, so zones 2,
//! 5 and 6 meet at a common vertex.

use super::{polygon, GeoPoint, Zone, ZoneFile, ZoneMap};
use crate::registry::ZoneId;

const SOUTH: f64 = 14.600;
const MID: f64 = 14.606;
const NORTH: f64 = 14.612;

fn pt(lat: f64, lon: f64) -> GeoPoint {
    GeoPoint::new(lat, lon)
}

fn zone(id: u32, name: &str, ring: Vec<GeoPoint>) -> Zone {
    Zone {
        zone_id: ZoneId(id),
        name: name.to_string(),
        boundary: ring,
    }
}

pub fn synthetic_zone_list() -> Vec<Zone> {
    vec![
        zone(1, "Zone 1", vec![pt(SOUTH, 120.980), pt(SOUTH, 120.984), pt(MID, 120.984), pt(MID, 120.980)]),
        zone(
            2,
            "Zone 2",
            vec![pt(SOUTH, 120.984), pt(SOUTH, 120.988), pt(MID, 120.988), pt(MID, 120.986), pt(MID, 120.984)],
        ),
        zone(
            3,
            "Zone 3",
            vec![pt(SOUTH, 120.988), pt(SOUTH, 120.991), pt(MID, 120.991), pt(MID, 120.990), pt(MID, 120.988)],
        ),
        zone(4, "Zone 4", vec![pt(SOUTH, 120.991), pt(SOUTH, 120.994), pt(MID, 120.994), pt(MID, 120.991)]),
        zone(
            5,
            "Zone 5",
            vec![pt(MID, 120.980), pt(MID, 120.984), pt(MID, 120.986), pt(NORTH, 120.986), pt(NORTH, 120.980)],
        ),
        zone(
            6,
            "Zone 6",
            vec![pt(MID, 120.986), pt(MID, 120.988), pt(MID, 120.990), pt(NORTH, 120.990), pt(NORTH, 120.986)],
        ),
        zone(
            7,
            "Zone 7",
            vec![pt(MID, 120.990), pt(MID, 120.991), pt(MID, 120.994), pt(NORTH, 120.994), pt(NORTH, 120.990)],
        ),
    ]
}

pub fn synthetic_zones() -> ZoneMap {
    ZoneMap::new(synthetic_zone_list()).expect("synthetic layout is a valid partition")
}

/// The same layout in the on-disk zone-file format.
pub fn synthetic_zones_json() -> String {
    let files: Vec<ZoneFile> = synthetic_zone_list()
        .into_iter()
        .map(|z| ZoneFile {
            zone_id: z.zone_id,
            name: z.name,
            boundary: z.boundary.iter().map(|p| [p.lat, p.lon]).collect(),
        })
        .collect();
    serde_json::to_string_pretty(&files).expect("zone list serializes")
}

pub fn centroid(ring: &[GeoPoint]) -> GeoPoint {
    polygon::vertex_mean(ring)
}

pub fn shared_vertex(map: &ZoneMap, a: ZoneId, b: ZoneId) -> Option<GeoPoint> {
    let find = |id| map.zones().iter().find(|z| z.zone_id == id);
    let (za, zb) = (find(a)?, find(b)?);
    za.boundary.iter().copied().find(|p| zb.boundary.contains(p))
}
