use serde::Serialize;

use super::{GeoPoint, Marker};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Meters per degree of latitude in the local equirectangular projection;
/// a degree of longitude is this times `cos(origin latitude)`.
pub const METERS_PER_DEGREE: f64 = 111_320.0;

const MAX_CELLS: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    None,
    Low,
    Medium,
    High,
}

/// Per-cell incident counts over the zones' bounding box. Row 0 is the
/// southern edge, column 0 the western edge.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotspotGrid {
    pub origin: GeoPoint,
    pub cell_size_m: f64,
    pub rows: usize,
    pub cols: usize,
    pub counts: Vec<Vec<u64>>,
    pub bands: Vec<Vec<Band>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotspotCell {
    pub row: usize,
    pub col: usize,
    pub count: u64,
    pub band: Band,
    pub center: GeoPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotspotReport {
    #[serde(flatten)]
    pub grid: HotspotGrid,
    pub top: Vec<HotspotCell>,
}

/// Offsets in meters of `p` from `origin` along the north and east axes.
pub fn local_offsets<T: Real>(origin: GeoPoint<T>, p: GeoPoint<T>) -> (T, T) {
    let m = T::lit(METERS_PER_DEGREE);
    let north = (p.lat - origin.lat) * m;
    let east = (p.lon - origin.lon) * m * origin.lat.to_radians().cos();
    (north, east)
}

impl HotspotGrid {
    fn empty(origin: GeoPoint, ne: GeoPoint, cell_size_m: f64) -> Result<Self> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(Error::invalid("cell_size_m", "must be a positive number of meters"));
        }
        let (h, w) = local_offsets(origin, ne);
        let rows = (h / cell_size_m).floor() as usize + 1;
        let cols = (w / cell_size_m).floor() as usize + 1;
        if rows.saturating_mul(cols) > MAX_CELLS {
            return Err(Error::invalid("cell_size_m", format!("{rows}x{cols} grid is too fine")));
        }
        Ok(HotspotGrid {
            origin,
            cell_size_m,
            rows,
            cols,
            counts: vec![vec![0; cols]; rows],
            bands: vec![vec![Band::None; cols]; rows],
        })
    }

    /// `(row, col)` of the cell holding `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        let (n, e) = local_offsets(self.origin, p);
        let row = (n / self.cell_size_m).floor();
        let col = (e / self.cell_size_m).floor();
        if row < 0.0 || col < 0.0 || row >= self.rows as f64 || col >= self.cols as f64 {
            return None;
        }
        Some((row as usize, col as usize))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> GeoPoint {
        let m = METERS_PER_DEGREE;
        let lat = self.origin.lat + (row as f64 + 0.5) * self.cell_size_m / m;
        let lon = self.origin.lon + (col as f64 + 0.5) * self.cell_size_m / (m * self.origin.lat.to_radians().cos());
        GeoPoint::new(lat, lon)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn assign_bands(&mut self) {
        let mut nonzero: Vec<u64> = self.counts.iter().flatten().copied().filter(|&c| c > 0).collect();
        if nonzero.is_empty() {
            return;
        }
        nonzero.sort_unstable();
        let p50 = nearest_rank(&nonzero, 0.5);
        let p90 = nearest_rank(&nonzero, 0.9);
        let max = *nonzero.last().expect("non-empty");
        for (counts, bands) in self.counts.iter().zip(self.bands.iter_mut()) {
            for (&c, b) in counts.iter().zip(bands.iter_mut()) {
                *b = band_for(c, p50, p90, max);
            }
        }
    }
}

fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// none = 0, low = 1..=p50, medium = p50+1..=p90, high > p90. The maximum
/// count is always high so the hottest cell is never drawn as cool.
fn band_for(c: u64, p50: u64, p90: u64, max: u64) -> Band {
    if c == 0 {
        Band::None
    } else if c > p90 || c == max {
        Band::High
    } else if c > p50 {
        Band::Medium
    } else {
        Band::Low
    }
}

/// Bins markers into a grid anchored at `sw` and covering up to `ne`, then
/// ranks non-empty cells by count (ties by row, then column).
pub fn detect_hotspots(
    sw: GeoPoint,
    ne: GeoPoint,
    markers: &[Marker],
    cell_size_m: f64,
    top_k: usize,
) -> Result<HotspotReport> {
    if top_k == 0 {
        return Err(Error::invalid("top_k", "must be at least 1"));
    }
    let mut grid = HotspotGrid::empty(sw, ne, cell_size_m)?;
    for m in markers {
        if let Some((r, c)) = grid.cell_of(m.point) {
            grid.counts[r][c] += 1;
        }
    }
    grid.assign_bands();

    let mut ranked: Vec<(usize, usize, u64)> = grid
        .counts
        .iter()
        .enumerate()
        .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &n)| (r, c, n)))
        .filter(|&(_, _, n)| n > 0)
        .collect();
    ranked.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let top = ranked
        .into_iter()
        .take(top_k)
        .map(|(row, col, count)| HotspotCell {
            row,
            col,
            count,
            band: grid.bands[row][col],
            center: grid.cell_center(row, col),
        })
        .collect();
    Ok(HotspotReport { grid, top })
}
