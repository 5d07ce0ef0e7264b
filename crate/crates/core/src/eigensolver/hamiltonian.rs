use faer::sparse::{SparseColMat, Triplet};

use super::PotentialMap;
use crate::cavity::CavityParams;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Five-point finite-difference operator `H/h` (THz) on a [`PotentialMap`]:
///
/// `H ψ = K (4ψ - Σ neighbours)/dx² + (V_max - V) ψ`, with `K = ħ/(4π m_ph)`
/// and ψ = 0 on the ring of nodes just outside the grid. Eigenvalues are
/// frequencies measured from the bottom of the potential, so bound modes sit
/// below `depth = V_max`.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    pub grid: Grid,
    /// Kinetic coefficient `K` in µm²·THz.
    pub kinetic: f64,
    /// Nearest-neighbour hopping `K/dx²` in THz.
    pub hop: f64,
    /// Potential depth `V_max/h` in THz.
    pub depth: f64,
    /// Diagonal entries, THz.
    pub diag: Vec<f64>,
    pub m_ph: f64,
}

pub fn assemble_hamiltonian(pmap: &PotentialMap, cav: &CavityParams) -> Result<Hamiltonian> {
    let grid = pmap.grid;
    if (grid.dx - grid.dy).abs() > 1e-12 * grid.dx {
        return Err(Error::Config(format!(
            "finite differences need square cells, got dx={} dy={}",
            grid.dx, grid.dy
        )));
    }
    let kinetic = cav.kinetic_coefficient();
    let hop = kinetic / (grid.dx * grid.dx);
    let depth = pmap.depth();
    let diag = pmap.v.iter().map(|&v| 4.0 * hop + (depth - v)).collect();
    Ok(Hamiltonian {
        grid,
        kinetic,
        hop,
        depth,
        diag,
        m_ph: cav.m_ph,
    })
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `y = H x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let t = self.hop;
        for iy in 0..ny {
            let row = iy * nx;
            for ix in 0..nx {
                let i = row + ix;
                let mut nb = 0.0;
                if ix > 0 {
                    nb += x[i - 1];
                }
                if ix + 1 < nx {
                    nb += x[i + 1];
                }
                if iy > 0 {
                    nb += x[i - nx];
                }
                if iy + 1 < ny {
                    nb += x[i + nx];
                }
                y[i] = self.diag[i] * x[i] - t * nb;
            }
        }
    }

    /// Lower triangle plus `shift` on the diagonal, as a sparse matrix.
    pub(crate) fn lower_sparse(&self, shift: f64) -> Result<SparseColMat<usize, f64>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let mut entries = Vec::with_capacity(3 * self.dim());
        for iy in 0..ny {
            for ix in 0..nx {
                let i = iy * nx + ix;
                entries.push(Triplet::new(i, i, self.diag[i] + shift));
                if ix + 1 < nx {
                    entries.push(Triplet::new(i + 1, i, -self.hop));
                }
                if iy + 1 < ny {
                    entries.push(Triplet::new(i + nx, i, -self.hop));
                }
            }
        }
        SparseColMat::try_new_from_triplets(self.dim(), self.dim(), &entries)
            .map_err(|e| Error::Solver {
                message: format!("sparse assembly failed: {e:?}"),
                residual: f64::NAN,
            })
    }

    /// Full matrix, row-major. Only sensible for small grids.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..n {
                out[i * n + j] = col[i];
            }
            e[j] = 0.0;
        }
        out
    }

    /// `‖H x - ν x‖₂`.
    pub fn residual(&self, x: &[f64], nu: f64) -> f64 {
        let mut hx = vec![0.0; x.len()];
        self.apply(x, &mut hx);
        hx.iter()
            .zip(x)
            .map(|(a, b)| (a - nu * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
