//! Planar polygon predicates on (lon, lat) treated as (x, y).

use super::GeoPoint;
use crate::scalar::Real;

const EPS: f64 = 1e-12;

fn cross<T: Real>(o: GeoPoint<T>, a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon)
}

fn within_box<T: Real>(p: GeoPoint<T>, a: GeoPoint<T>, b: GeoPoint<T>) -> bool {
    let eps = T::lit(EPS);
    p.lon >= a.lon.min(b.lon) - eps
        && p.lon <= a.lon.max(b.lon) + eps
        && p.lat >= a.lat.min(b.lat) - eps
        && p.lat <= a.lat.max(b.lat) + eps
}

fn on_segment<T: Real>(p: GeoPoint<T>, a: GeoPoint<T>, b: GeoPoint<T>) -> bool {
    cross(a, b, p).abs() <= T::lit(EPS) && within_box(p, a, b)
}

fn edges<T: Real>(ring: &[GeoPoint<T>]) -> impl Iterator<Item = (GeoPoint<T>, GeoPoint<T>)> + '_ {
    (0..ring.len()).map(move |i| (ring[i], ring[(i + 1) % ring.len()]))
}

/// Even-odd ray casting. Points exactly on an edge may land either way; use
/// [`point_on_boundary`] first when that matters.
pub fn point_in_polygon<T: Real>(p: GeoPoint<T>, ring: &[GeoPoint<T>]) -> bool {
    let mut inside = false;
    for (a, b) in edges(ring) {
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if p.lon < x {
                inside = !inside;
            }
        }
    }
    inside
}

pub fn point_on_boundary<T: Real>(p: GeoPoint<T>, ring: &[GeoPoint<T>]) -> bool {
    edges(ring).any(|(a, b)| on_segment(p, a, b))
}

fn strictly_inside<T: Real>(p: GeoPoint<T>, ring: &[GeoPoint<T>]) -> bool {
    !point_on_boundary(p, ring) && point_in_polygon(p, ring)
}

/// True when segments `ab` and `cd` cross at a single interior point of both.
pub fn segments_cross<T: Real>(a: GeoPoint<T>, b: GeoPoint<T>, c: GeoPoint<T>, d: GeoPoint<T>) -> bool {
    let eps = T::lit(EPS);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps))
}

pub(crate) fn self_intersects<T: Real>(ring: &[GeoPoint<T>]) -> bool {
    let n = ring.len();
    let es: Vec<_> = edges(ring).collect();
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = es[i];
            let (c, d) = es[j];
            if segments_cross(a, b, c, d) || on_segment(c, a, b) || on_segment(d, a, b) {
                return true;
            }
        }
    }
    false
}

/// Vertex average; inside the ring for the convex zones used in fixtures.
pub(crate) fn vertex_mean<T: Real>(ring: &[GeoPoint<T>]) -> GeoPoint<T> {
    let n = T::from_count(ring.len() as u64);
    let (lat, lon) = ring
        .iter()
        .fold((T::zero(), T::zero()), |(la, lo), p| (la + p.lat, lo + p.lon));
    GeoPoint::new(lat / n, lon / n)
}

/// Detects interior overlap between two simple polygons: crossing edges,
/// a vertex strictly inside the other ring, or nested/identical rings.
pub(crate) fn interiors_overlap<T: Real>(a: &[GeoPoint<T>], b: &[GeoPoint<T>]) -> bool {
    for (p, q) in edges(a) {
        for (r, s) in edges(b) {
            if segments_cross(p, q, r, s) {
                return true;
            }
        }
    }
    let probe = |x: &[GeoPoint<T>], y: &[GeoPoint<T>]| {
        x.iter().any(|&v| strictly_inside(v, y)) || {
            let m = vertex_mean(x);
            strictly_inside(m, x) && strictly_inside(m, y)
        }
    };
    probe(a, b) || probe(b, a)
}
