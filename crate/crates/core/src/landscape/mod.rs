//! Height profiles of printed polymer structures, their fabrication
//! artifacts, and the plain-text grid file format.

mod artifacts;
mod io;

pub use artifacts::{apply_voxel_smoothing, quantize_dipin, step_width_10_90};
pub use io::{read_grid_field, read_heightmap, write_grid_field, write_heightmap, HEADER_TOKEN};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Default clearance between any structure and the grid edge, µm.
pub const DEFAULT_MARGIN: f64 = 2.0;

/// Polymer surface heights `h_s(x, y)` in nm on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap {
    pub grid: Grid,
    pub h: Vec<f64>,
}

impl HeightMap {
    pub fn new(grid: Grid, h: Vec<f64>) -> Result<Self> {
        if h.len() != grid.len() {
            return Err(invalid(
                "height map",
                format!("{} values for a {}x{} grid", h.len(), grid.nx, grid.ny),
            ));
        }
        if let Some(bad) = h.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(invalid("height", format!("heights must be finite and >= 0, got {bad}")));
        }
        Ok(Self { grid, h })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            h: vec![0.0; grid.len()],
            grid,
        }
    }

    pub fn max_height(&self) -> f64 {
        self.h.iter().copied().fold(0.0, f64::max)
    }

    /// `∑ h dx dy` in nm·µm².
    pub fn volume(&self) -> f64 {
        self.h.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.h[self.grid.index(ix, iy)]
    }

    fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut h = Vec::with_capacity(grid.len());
        for iy in 0..grid.ny {
            let y = grid.y(iy);
            for ix in 0..grid.nx {
                h.push(f(grid.x(ix), y));
            }
        }
        Self { grid, h }
    }
}

/// Dimerized chain of pillars: alternating intra-cell (`d_i`) and inter-cell
/// (`d_o`) center distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SshGeometry {
    pub n_cells: usize,
    /// Intra-cell center distance, µm.
    pub d_i: f64,
    /// Inter-cell center distance, µm.
    pub d_o: f64,
    /// Pillar radius, µm.
    pub r: f64,
    /// Pillar height, nm.
    pub h_s: f64,
}

impl SshGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.n_cells < 2 {
            return Err(invalid("n_cells", "an SSH chain needs at least 2 unit cells"));
        }
        if !(self.d_i > 0.0 && self.d_o > 0.0) {
            return Err(invalid("d_i/d_o", "center distances must be positive"));
        }
        if !(self.r > 0.0) {
            return Err(invalid("r", "pillar radius must be positive"));
        }
        if !(self.h_s >= 0.0) {
            return Err(invalid("h_s", "pillar height must be >= 0"));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        2 * self.n_cells
    }

    /// Distance between the first and the last pillar center.
    pub fn chain_length(&self) -> f64 {
        self.n_cells as f64 * self.d_i + (self.n_cells - 1) as f64 * self.d_o
    }

    /// Pillar centers along `y = cy`, symmetric about `cx`.
    pub fn centers(&self, (cx, cy): (f64, f64)) -> Vec<(f64, f64)> {
        let mut x = cx - 0.5 * self.chain_length();
        let mut out = Vec::with_capacity(self.n_sites());
        for site in 0..self.n_sites() {
            out.push((x, cy));
            x += if site % 2 == 0 { self.d_i } else { self.d_o };
        }
        out
    }

    /// Same chain with intra- and inter-cell distances exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            d_i: self.d_o,
            d_o: self.d_i,
            ..*self
        }
    }
}

fn check_height(h_s: f64) -> Result<()> {
    if !(h_s.is_finite() && h_s >= 0.0) {
        return Err(invalid("h_s", format!("height must be finite and >= 0, got {h_s}")));
    }
    Ok(())
}

fn check_fits(grid: &Grid, bbox: (f64, f64, f64, f64), margin: f64, what: &str) -> Result<()> {
    if grid.contains_with_margin(bbox, margin) {
        Ok(())
    } else {
        let (x0, x1, y0, y1) = grid.bounds();
        Err(Error::Geometry(format!(
            "{what} spanning x [{:.3}, {:.3}] y [{:.3}, {:.3}] µm plus a {margin} µm margin \
             exceeds the grid x [{x0:.3}, {x1:.3}] y [{y0:.3}, {y1:.3}]",
            bbox.0, bbox.1, bbox.2, bbox.3
        )))
    }
}

/// Axis-aligned square plateau of height `h_s` (nm) and edge `side` (µm).
/// A node belongs to the box when its center lies inside or on the edge.
pub fn make_box(
    grid: Grid,
    side: f64,
    h_s: f64,
    (cx, cy): (f64, f64),
    margin: f64,
) -> Result<HeightMap> {
    if !(side >= 0.0) {
        return Err(invalid("side", format!("box edge must be >= 0, got {side}")));
    }
    check_height(h_s)?;
    let half = 0.5 * side;
    check_fits(&grid, (cx - half, cx + half, cy - half, cy + half), margin, "box")?;
    if side == 0.0 {
        return Ok(HeightMap::zeros(grid));
    }
    let lim = half + 1e-9 * grid.dx;
    Ok(HeightMap::from_fn(grid, |x, y| {
        if (x - cx).abs() <= lim && (y - cy).abs() <= lim {
            h_s
        } else {
            0.0
        }
    }))
}

/// Union of flat circular pillars; overlapping disks merge at the same height.
pub fn make_pillars(
    grid: Grid,
    centers: &[(f64, f64)],
    r: f64,
    h_s: f64,
    margin: f64,
) -> Result<HeightMap> {
    if !(r > 0.0) {
        return Err(invalid("r", format!("pillar radius must be positive, got {r}")));
    }
    check_height(h_s)?;
    for &(px, py) in centers {
        check_fits(&grid, (px - r, px + r, py - r, py + r), margin, "pillar")?;
    }
    let r2 = r * r * (1.0 + 1e-12);
    Ok(HeightMap::from_fn(grid, |x, y| {
        let inside = centers
            .iter()
            .any(|&(px, py)| (x - px).powi(2) + (y - py).powi(2) <= r2);
        if inside {
            h_s
        } else {
            0.0
        }
    }))
}

/// SSH pillar chain centered on the grid, starting and ending with an
/// intra-cell pair.
pub fn make_ssh_chain(grid: Grid, geo: &SshGeometry, margin: f64) -> Result<HeightMap> {
    geo.validate()?;
    let centers = geo.centers(grid.center());
    make_pillars(grid, &centers, geo.r, geo.h_s, margin)
}

/// Dome `h = max(0, h_max - curvature * ρ²)` with curvature in nm/µm².
pub fn make_paraboloid(
    grid: Grid,
    curvature: f64,
    h_max: f64,
    (cx, cy): (f64, f64),
) -> Result<HeightMap> {
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(invalid("curvature", format!("must be positive, got {curvature}")));
    }
    if !(h_max > 0.0 && h_max.is_finite()) {
        return Err(invalid("h_max", format!("must be positive, got {h_max}")));
    }
    Ok(HeightMap::from_fn(grid, |x, y| {
        let rho2 = (x - cx).powi(2) + (y - cy).powi(2);
        (h_max - curvature * rho2).max(0.0)
    }))
}
