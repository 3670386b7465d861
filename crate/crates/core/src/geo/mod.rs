//! Zones, great-circle distance, incident markers and grid hotspots.
//!
//! Map tiles are not rendered here; this module only emits geodata that a
//! client overlays on whatever slippy-map provider it is configured with.

pub mod fixture;
mod grid;
mod polygon;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use grid::{detect_hotspots, Band, HotspotCell, HotspotGrid, HotspotReport, METERS_PER_DEGREE};
pub use polygon::{point_in_polygon, point_on_boundary, segments_cross};

use crate::error::{Error, Result};
use crate::registry::ZoneId;
use crate::scalar::Real;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GeoPoint<T = f64> {
    pub lat: T,
    pub lon: T,
}

impl<T: Real> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Self {
        GeoPoint { lat, lon }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && self.lat.abs() <= T::lit(90.0)
            && self.lon.abs() <= T::lit(180.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidLocation(format!("({}, {}) is not a WGS84 coordinate", self.lat, self.lon)))
        }
    }
}

/// Great-circle distance in meters on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine<T: Real>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let two = T::lit(2.0);
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / two).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / two).sin().powi(2);
    // h can drift a hair above 1 for antipodal points
    let h = h.min(T::one()).max(T::zero());
    two * T::lit(EARTH_RADIUS_M) * h.sqrt().asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub zone_id: ZoneId,
    pub name: String,
    /// Closed ring; repeating the first vertex at the end is optional.
    pub boundary: Vec<GeoPoint>,
}

/// The configured set of zones, validated as a partition of the barangay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneMap {
    zones: Vec<Zone>,
}

pub const ZONE_COUNT: usize = 7;

impl ZoneMap {
    pub fn new(mut zones: Vec<Zone>) -> Result<Self> {
        if zones.len() != ZONE_COUNT {
            return Err(Error::invalid("zones", format!("expected {ZONE_COUNT} zones, got {}", zones.len())));
        }
        zones.sort_by_key(|z| z.zone_id);
        for z in &mut zones {
            if z.boundary.len() > 1 && z.boundary.first() == z.boundary.last() {
                z.boundary.pop();
            }
            if z.boundary.len() < 3 {
                return Err(Error::invalid("zones", format!("zone {} has fewer than 3 vertices", z.zone_id)));
            }
            for p in &z.boundary {
                p.validate()?;
            }
            if polygon::self_intersects(&z.boundary) {
                return Err(Error::invalid("zones", format!("zone {} boundary self-intersects", z.zone_id)));
            }
        }
        for pair in zones.windows(2) {
            if pair[0].zone_id == pair[1].zone_id {
                return Err(Error::invalid("zones", format!("duplicate zone id {}", pair[0].zone_id)));
            }
        }
        for (i, a) in zones.iter().enumerate() {
            for b in &zones[i + 1..] {
                if polygon::interiors_overlap(&a.boundary, &b.boundary) {
                    return Err(Error::invalid(
                        "zones",
                        format!("zones {} and {} overlap", a.zone_id, b.zone_id),
                    ));
                }
            }
        }
        Ok(ZoneMap { zones })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let raw: Vec<ZoneFile> =
            serde_json::from_slice(bytes).map_err(|e| Error::invalid("zones", e.to_string()))?;
        ZoneMap::new(
            raw.into_iter()
                .map(|z| Zone {
                    zone_id: z.zone_id,
                    name: z.name,
                    boundary: z.boundary.into_iter().map(|[lat, lon]| GeoPoint { lat, lon }).collect(),
                })
                .collect(),
        )
    }

    pub fn zones(&self) -> &[Zone] {
        &self.zones
    }

    pub fn ids(&self) -> BTreeSet<ZoneId> {
        self.zones.iter().map(|z| z.zone_id).collect()
    }

    /// Zone containing `point`; boundary points go to the lowest touching id.
    pub fn assign_zone(&self, point: GeoPoint) -> Result<ZoneId> {
        point.validate()?;
        // zones are sorted by id, so the first hit is the lowest id
        self.zones
            .iter()
            .find(|z| point_on_boundary(point, &z.boundary) || point_in_polygon(point, &z.boundary))
            .map(|z| z.zone_id)
            .ok_or(Error::Unzoned {
                lat: point.lat,
                lon: point.lon,
            })
    }

    /// South-west and north-east corners of the union of all zones.
    pub fn bounds(&self) -> (GeoPoint, GeoPoint) {
        let pts = self.zones.iter().flat_map(|z| z.boundary.iter());
        let mut sw = GeoPoint::new(f64::INFINITY, f64::INFINITY);
        let mut ne = GeoPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in pts {
            sw.lat = sw.lat.min(p.lat);
            sw.lon = sw.lon.min(p.lon);
            ne.lat = ne.lat.max(p.lat);
            ne.lon = ne.lon.max(p.lon);
        }
        (sw, ne)
    }
}

/// On-disk zone configuration: `[{zone_id, name, boundary: [[lat, lon], ...]}]`.
#[derive(Debug, Serialize, Deserialize)]
pub struct ZoneFile {
    pub zone_id: ZoneId,
    pub name: String,
    pub boundary: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerKind {
    Crime,
    Health,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub kind: MarkerKind,
    pub point: GeoPoint,
    pub occurred_at: DateTime<Utc>,
    pub label: String,
    pub source_id: String,
}

/// JSON document consumed by map clients.
#[derive(Debug, Clone, Serialize)]
pub struct GeoDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zones: Option<Vec<ZoneJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub markers: Option<Vec<MarkerJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hotspots: Option<HotspotReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ZoneJson {
    pub zone_id: ZoneId,
    pub name: String,
    pub polygon: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkerJson {
    pub kind: MarkerKind,
    pub lat: f64,
    pub lon: f64,
    pub label: String,
    pub at: DateTime<Utc>,
    pub source_id: String,
}

impl GeoDocument {
    pub fn zones(map: &ZoneMap) -> Self {
        GeoDocument {
            zones: Some(
                map.zones()
                    .iter()
                    .map(|z| ZoneJson {
                        zone_id: z.zone_id,
                        name: z.name.clone(),
                        polygon: z.boundary.iter().map(|p| [p.lat, p.lon]).collect(),
                    })
                    .collect(),
            ),
            markers: None,
            hotspots: None,
        }
    }

    pub fn markers(markers: &[Marker]) -> Self {
        GeoDocument {
            zones: None,
            markers: Some(
                markers
                    .iter()
                    .map(|m| MarkerJson {
                        kind: m.kind,
                        lat: m.point.lat,
                        lon: m.point.lon,
                        label: m.label.clone(),
                        at: m.occurred_at,
                        source_id: m.source_id.clone(),
                    })
                    .collect(),
            ),
            hotspots: None,
        }
    }

    pub fn hotspots(report: HotspotReport) -> Self {
        GeoDocument {
            zones: None,
            markers: None,
            hotspots: Some(report),
        }
    }
}
