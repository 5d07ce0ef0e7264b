//! Uniform node grid shared by height maps, potentials and mode fields.

use crate::error::{invalid, Result};

/// Smallest admissible node count along either axis.
pub const MIN_NODES: usize = 8;

/// Uniform square-cell grid. Node `(ix, iy)` sits at `(x0 + ix*dx, y0 + iy*dy)`,
/// lengths in µm. Field arrays are stored row-major with `ix` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(invalid(
                "grid",
                format!("need at least {MIN_NODES}x{MIN_NODES} nodes, got {nx}x{ny}"),
            ));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(invalid("grid", format!("spacing must be positive, got {dx}, {dy}")));
        }
        if (dx - dy).abs() > 1e-12 * dx.max(dy) {
            return Err(invalid("grid", format!("cells must be square, got dx={dx} dy={dy}")));
        }
        if !(x0.is_finite() && y0.is_finite()) {
            return Err(invalid("grid", "origin must be finite"));
        }
        Ok(Self { nx, ny, dx, dy, x0, y0 })
    }

    /// Grid of `nx` x `ny` nodes with spacing `dx`, mirror-symmetric about `(0, 0)`.
    ///
    /// With an even node count the origin falls between nodes, so structure
    /// edges placed at half-integer cell offsets never coincide with a node.
    pub fn centered(nx: usize, ny: usize, dx: f64) -> Result<Self> {
        let x0 = -0.5 * (nx as f64 - 1.0) * dx;
        let y0 = -0.5 * (ny as f64 - 1.0) * dx;
        Self::new(nx, ny, dx, dx, x0, y0)
    }

    /// Smallest even-sized centered grid whose nodes span `[-wx/2, wx/2] x [-wy/2, wy/2]`.
    pub fn covering(wx: f64, wy: f64, dx: f64) -> Result<Self> {
        if !(wx > 0.0 && wy > 0.0) {
            return Err(invalid("grid", format!("extent must be positive, got {wx} x {wy}")));
        }
        let count = |w: f64| {
            let n = (w / dx - 1e-9).ceil() as usize + 1;
            (n + n % 2).max(MIN_NODES)
        };
        Self::centered(count(wx), count(wy), dx)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + ix as f64 * self.dx
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + iy as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    /// Extent spanned by the nodes, `(xmin, xmax, ymin, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        (self.x(0), self.x(self.nx - 1), self.y(0), self.y(self.ny - 1))
    }

    pub fn center(&self) -> (f64, f64) {
        let (x0, x1, y0, y1) = self.bounds();
        (0.5 * (x0 + x1), 0.5 * (y0 + y1))
    }

    /// Node index of the mirror image under `x -> 2*xc - x`, `xc` the grid center.
    #[inline]
    pub fn mirror_x(&self, idx: usize) -> usize {
        let (ix, iy) = (idx % self.nx, idx / self.nx);
        self.index(self.nx - 1 - ix, iy)
    }

    /// Checks that the rectangle `[xmin, xmax] x [ymin, ymax]` keeps `margin`
    /// to every grid edge.
    pub(crate) fn contains_with_margin(
        &self,
        (xmin, xmax, ymin, ymax): (f64, f64, f64, f64),
        margin: f64,
    ) -> bool {
        let (gx0, gx1, gy0, gy1) = self.bounds();
        let slack = 1e-9 * self.dx;
        xmin - margin >= gx0 - slack
            && xmax + margin <= gx1 + slack
            && ymin - margin >= gy0 - slack
            && ymax + margin <= gy1 + slack
    }
}
