//! Transverse cavity eigenmodes: the effective-mass Schrödinger operator on a
//! [`PotentialMap`] and its lowest eigenpairs.

mod export;
mod hamiltonian;
mod krylov;

pub use export::{read_mode_manifest, write_modeset, ModeManifestRow};
pub use hamiltonian::{assemble_hamiltonian, Hamiltonian};

use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid;

/// Node rings counted as "boundary" by [`bound_filter`].
pub const BOUNDARY_RINGS: usize = 3;
/// Largest probability on the boundary rings for a mode to count as bound.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-3;
/// Frequencies closer than this (THz) are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-4;

/// Attractive potential `V/h` in THz on a grid. Non-negative by construction;
/// the solver subtracts it.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialMap {
    pub grid: Grid,
    pub v: Vec<f64>,
}

impl PotentialMap {
    pub fn new(grid: Grid, v: Vec<f64>) -> Result<Self> {
        if v.len() != grid.len() {
            return Err(invalid("potential", "value count does not match grid"));
        }
        if let Some(bad) = v.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(invalid("potential", format!("values must be finite and >= 0, got {bad}")));
        }
        Ok(Self { grid, v })
    }

    /// `V_max/h`, THz.
    pub fn depth(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }
}

/// Lowest eigenmodes of one potential, ascending in frequency.
#[derive(Debug, Clone)]
pub struct ModeSet {
    pub grid: Grid,
    /// Frequencies relative to the potential minimum, THz.
    pub freqs: Vec<f64>,
    /// Real fields normalized to `Σ ψ² dx dy = 1`.
    pub fields: Vec<Vec<f64>>,
    /// Potential depth `V_max/h`, THz. Infinite means "treat all modes as bound".
    pub depth: f64,
    pub m_ph: f64,
    /// Kinetic coefficient `ħ/(4π m_ph)`, µm²·THz.
    pub kinetic: f64,
    /// Achieved `‖Hψ - νψ‖` per mode (unit-norm vectors).
    pub residuals: Vec<f64>,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// Keeps the modes at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> ModeSet {
        ModeSet {
            grid: self.grid,
            freqs: indices.iter().map(|&i| self.freqs[i]).collect(),
            fields: indices.iter().map(|&i| self.fields[i].clone()).collect(),
            depth: self.depth,
            m_ph: self.m_ph,
            kinetic: self.kinetic,
            residuals: indices.iter().map(|&i| self.residuals[i]).collect(),
        }
    }

    /// Index ranges of modes whose frequencies agree within [`DEGENERACY_TOL`].
    pub fn degenerate_groups(&self) -> Vec<std::ops::Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=self.len() {
            if i == self.len() || self.freqs[i] - self.freqs[i - 1] > DEGENERACY_TOL {
                groups.push(start..i);
                start = i;
            }
        }
        groups
    }

    /// `⟨ψ_i, ψ_j⟩ = Σ ψ_i ψ_j dx dy`.
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        let s: f64 = self.fields[i]
            .iter()
            .zip(&self.fields[j])
            .map(|(a, b)| a * b)
            .sum();
        s * self.grid.cell_area()
    }

    /// Probability on the outermost `rings` node rings of the grid.
    pub fn boundary_mass(&self, i: usize, rings: usize) -> f64 {
        let g = self.grid;
        let f = &self.fields[i];
        let mut s = 0.0;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let edge = ix < rings || iy < rings || ix + rings >= g.nx || iy + rings >= g.ny;
                if edge {
                    s += f[g.index(ix, iy)].powi(2);
                }
            }
        }
        s * g.cell_area()
    }

    /// `(even, odd)` residuals `‖ψ ∓ Pψ‖ / (2‖ψ‖)` under the mirror
    /// `x -> -x` about the grid center. A mode is even when the first is small.
    pub fn mirror_residuals(&self, i: usize) -> (f64, f64) {
        let g = self.grid;
        let f = &self.fields[i];
        let (mut even, mut odd, mut norm) = (0.0, 0.0, 0.0);
        for (idx, &a) in f.iter().enumerate() {
            let b = f[g.mirror_x(idx)];
            even += (a - b).powi(2);
            odd += (a + b).powi(2);
            norm += a * a;
        }
        (0.5 * (even / norm).sqrt(), 0.5 * (odd / norm).sqrt())
    }

    /// Mean kinetic frequency `K ⟨|∇ψ|²⟩` from grid differences, including the
    /// jump to the zero boundary. Equals the kinetic part of the discrete
    /// operator, so it never exceeds the mode frequency.
    pub fn kinetic_energy_fd(&self, i: usize) -> f64 {
        let g = self.grid;
        let f = &self.fields[i];
        let mut s = 0.0;
        for iy in 0..g.ny {
            for ix in 0..g.nx {
                let a = f[g.index(ix, iy)];
                let right = if ix + 1 < g.nx { f[g.index(ix + 1, iy)] } else { 0.0 };
                let up = if iy + 1 < g.ny { f[g.index(ix, iy + 1)] } else { 0.0 };
                s += (a - right).powi(2) + (a - up).powi(2);
                if ix == 0 {
                    s += a * a;
                }
                if iy == 0 {
                    s += a * a;
                }
            }
        }
        self.kinetic * s / (g.dx * g.dx) * g.cell_area()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverMethod {
    /// Dense below [`DENSE_LIMIT`] unknowns, Krylov above.
    Auto,
    Krylov,
    Dense,
}

/// Largest operator dimension the automatic choice solves densely.
pub const DENSE_LIMIT: usize = 1600;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub k: usize,
    /// Relative residual target `‖Hψ - νψ‖ ≤ tol·|ν|`.
    pub tol: f64,
    /// Seed of the random start block.
    pub seed: u64,
    /// Start block size; resolves degeneracies up to this multiplicity.
    pub block: usize,
    pub max_restarts: usize,
    pub method: SolverMethod,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            k: 10,
            tol: 1e-8,
            seed: 42,
            block: 4,
            max_restarts: 300,
            method: SolverMethod::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }
}

/// Computes the `k` lowest eigenmodes of `h`.
pub fn solve_lowest(h: &Hamiltonian, opts: &SolverOptions) -> Result<ModeSet> {
    let n = h.dim();
    let k_max = (n / 10).min(512);
    if opts.k < 1 || opts.k > k_max {
        return Err(invalid(
            "k",
            format!("{} modes requested, allowed 1..={k_max} for {n} unknowns", opts.k),
        ));
    }
    if !(1e-10..=1e-4).contains(&opts.tol) {
        return Err(invalid("tol", format!("{} outside [1e-10, 1e-4]", opts.tol)));
    }
    let dense = match opts.method {
        SolverMethod::Dense => true,
        SolverMethod::Krylov => false,
        SolverMethod::Auto => n <= DENSE_LIMIT,
    };
    let (values, vectors, residuals) = if dense {
        dense_lowest(h, opts.k)?
    } else {
        let pairs = krylov::lowest_eigenpairs(
            h,
            krylov::KrylovParams {
                k: opts.k,
                tol: opts.tol,
                seed: opts.seed,
                block: opts.block,
                max_restarts: opts.max_restarts,
                shift: 0.0,
            },
        )?;
        (pairs.values, pairs.vectors, pairs.residuals)
    };
    Ok(finish_modes(h, values, vectors, residuals))
}

/// Eigenvalues, eigenvectors and residuals.
type Pairs = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>);

fn dense_lowest(h: &Hamiltonian, k: usize) -> Result<Pairs> {
    let n = h.dim();
    let a = h.to_dense();
    let mat = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let evd = mat.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver {
        message: format!("dense eigen-decomposition failed: {e:?}"),
        residual: f64::NAN,
    })?;
    let (s, u) = (evd.S(), evd.U());
    let values: Vec<f64> = (0..k).map(|i| s[i]).collect();
    let vectors: Vec<Vec<f64>> = (0..k).map(|j| (0..n).map(|i| u[(i, j)]).collect()).collect();
    let residuals = vectors
        .iter()
        .zip(&values)
        .map(|(v, &nu)| h.residual(v, nu))
        .collect();
    Ok((values, vectors, residuals))
}

/// Sorts, normalizes to unit probability and fixes the sign so the largest
/// amplitude is positive.
fn finish_modes(
    h: &Hamiltonian,
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
) -> ModeSet {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let area = h.grid.cell_area();
    let mut fields = Vec::with_capacity(order.len());
    for &i in &order {
        let v = &vectors[i];
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let peak = v
            .iter()
            .copied()
            .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if peak < 0.0 { -1.0 } else { 1.0 };
        let scale = sign / (nrm * area.sqrt());
        fields.push(v.iter().map(|x| x * scale).collect());
    }
    ModeSet {
        grid: h.grid,
        freqs: order.iter().map(|&i| values[i]).collect(),
        fields,
        depth: h.depth,
        m_ph: h.m_ph,
        kinetic: h.kinetic,
        residuals: order.iter().map(|&i| residuals[i]).collect(),
    }
}

/// Per-mode bound flag: below the depth and with less than
/// [`BOUNDARY_MASS_LIMIT`] probability on the outer [`BOUNDARY_RINGS`] rings.
pub fn bound_flags(modes: &ModeSet) -> Vec<bool> {
    if modes.depth.is_infinite() {
        return vec![true; modes.len()];
    }
    (0..modes.len())
        .map(|i| {
            modes.freqs[i] < modes.depth
                && modes.boundary_mass(i, BOUNDARY_RINGS) < BOUNDARY_MASS_LIMIT
        })
        .collect()
}

/// Drops modes that are not bound to the structure.
pub fn bound_filter(modes: &ModeSet) -> ModeSet {
    let keep: Vec<usize> = bound_flags(modes)
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    modes.select(&keep)
}
