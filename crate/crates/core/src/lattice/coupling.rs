use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::cavity::{height_to_potential, CavityParams};
use crate::eigensolver::{assemble_hamiltonian, bound_flags, solve_lowest, ModeSet, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::grid::Grid;
use crate::landscape::make_pillars;

/// Largest mirror residual still accepted as a clean parity.
pub const PARITY_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct JExtraction {
    /// Half the splitting of the two lowest bound modes, THz.
    pub j: f64,
    pub nu_s: f64,
    pub nu_a: f64,
    /// Even residual of the lower mode.
    pub even_residual: f64,
    /// Odd residual of the upper mode.
    pub odd_residual: f64,
    pub warnings: Vec<String>,
}

/// Coupling from the splitting of the two lowest bound modes of a double
/// well that is mirror-symmetric about the grid center.
pub fn extract_j(modes: &ModeSet) -> Result<JExtraction> {
    let bound: Vec<usize> = bound_flags(modes)
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    if bound.len() < 2 {
        return Err(Error::Extraction(format!(
            "need two bound modes for a splitting, found {}",
            bound.len()
        )));
    }
    let (s, a) = (bound[0], bound[1]);
    let (nu_s, nu_a) = (modes.freqs[s], modes.freqs[a]);
    let j = 0.5 * (nu_a - nu_s);
    let even_residual = modes.mirror_residuals(s).0;
    let odd_residual = modes.mirror_residuals(a).1;
    let mut warnings = Vec::new();
    if even_residual > PARITY_TOL {
        warnings.push(format!("lower mode is not mirror-even (residual {even_residual:.2e})"));
    }
    if odd_residual > PARITY_TOL {
        warnings.push(format!("upper mode is not mirror-odd (residual {odd_residual:.2e})"));
    }
    if let Some(&third) = bound.get(2) {
        if modes.freqs[third] - nu_a <= nu_a - nu_s {
            warnings.push(format!(
                "third mode {:.4} THz is closer than the splitting {:.4} THz",
                modes.freqs[third] - nu_a,
                nu_a - nu_s
            ));
        }
    }
    Ok(JExtraction {
        j,
        nu_s,
        nu_a,
        even_residual,
        odd_residual,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PillarParams {
    /// Radius, µm.
    pub r: f64,
    /// Height, nm.
    pub h_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    /// Node spacing, µm.
    pub dx: f64,
    /// Clearance between the pillars and the grid edge, µm.
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingSource {
    Simulated,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingCurve {
    /// Center-to-center distances, µm, ascending.
    pub distances: Vec<f64>,
    /// Couplings, THz.
    pub couplings: Vec<f64>,
    pub source: CouplingSource,
}

impl CouplingCurve {
    pub fn analytic(distances: &[f64], f: impl Fn(f64) -> f64) -> Self {
        Self {
            distances: distances.to_vec(),
            couplings: distances.iter().map(|&d| f(d)).collect(),
            source: CouplingSource::Analytic,
        }
    }

    pub fn is_strictly_decreasing(&self) -> bool {
        self.couplings.windows(2).all(|w| w[1] < w[0])
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Successful points only.
    pub curve: CouplingCurve,
    pub extractions: Vec<JExtraction>,
    /// Distances whose solve or extraction failed, with the error text.
    pub failures: Vec<(f64, String)>,
    pub monotone: bool,
}

/// Lowest modes of a symmetric pillar pair at center distance `d`, pillars at
/// `±d/2` on the smallest grid holding them plus the margin.
pub fn pillar_pair_modes(
    d: f64,
    pillar: PillarParams,
    cav: &CavityParams,
    grid: SweepGrid,
    opts: &SolverOptions,
) -> Result<ModeSet> {
    let g = Grid::covering(d + 2.0 * pillar.r + 2.0 * grid.margin, 2.0 * pillar.r + 2.0 * grid.margin, grid.dx)?;
    let hm = make_pillars(g, &[(-0.5 * d, 0.0), (0.5 * d, 0.0)], pillar.r, pillar.h_s, grid.margin)?;
    let pot = height_to_potential(&hm, cav)?;
    let h = assemble_hamiltonian(&pot, cav)?;
    solve_lowest(&h, opts)
}

/// `J(d)` over `d_list`, one independent solve per distance. Failed points
/// are reported and skipped.
pub fn coupling_sweep(
    d_list: &[f64],
    pillar: PillarParams,
    cav: &CavityParams,
    grid: SweepGrid,
    opts: &SolverOptions,
) -> Result<SweepResult> {
    if d_list.is_empty() {
        return Err(invalid("d_list", "no distances given"));
    }
    if let Some(d) = d_list.iter().find(|d| !(**d >= 0.1 && d.is_finite())) {
        return Err(invalid("d_list", format!("distance {d} µm below 0.1")));
    }
    if d_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("d_list", "distances must be strictly ascending"));
    }
    let points: Vec<Result<JExtraction>> = d_list
        .par_iter()
        .map(|&d| pillar_pair_modes(d, pillar, cav, grid, opts).and_then(|m| extract_j(&m)))
        .collect();
    let mut curve = CouplingCurve {
        distances: Vec::new(),
        couplings: Vec::new(),
        source: CouplingSource::Simulated,
    };
    let mut extractions = Vec::new();
    let mut failures = Vec::new();
    for (&d, p) in d_list.iter().zip(points) {
        match p {
            Ok(x) => {
                curve.distances.push(d);
                curve.couplings.push(x.j);
                extractions.push(x);
            }
            Err(e) => failures.push((d, e.to_string())),
        }
    }
    let monotone = curve.is_strictly_decreasing();
    Ok(SweepResult {
        curve,
        extractions,
        failures,
        monotone,
    })
}

/// Breakpoint of the best continuous two-segment line through `ln J(d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kink {
    pub d: f64,
    /// `d ln J / d d` below and above the breakpoint, 1/µm.
    pub slope_left: f64,
    pub slope_right: f64,
    /// Residual sum of squares of the hinge fit.
    pub sse: f64,
    /// Residual sum of squares of a single straight line.
    pub sse_line: f64,
}

/// Least-squares fit of `y = a + b d + c max(0, d - d_b)` to `ln J`, trying
/// every interior sample as `d_b`.
pub fn find_kink(curve: &CouplingCurve) -> Option<Kink> {
    let n = curve.distances.len();
    if n < 5 || curve.couplings.iter().any(|&j| !(j > 0.0)) {
        return None;
    }
    let y: Vec<f64> = curve.couplings.iter().map(|j| j.ln()).collect();
    let d = &curve.distances;
    let line = lstsq(&[vec![1.0; n], d.clone()], &y)?;
    let mut best: Option<Kink> = None;
    for b in 1..n - 1 {
        let hinge: Vec<f64> = d.iter().map(|&x| (x - d[b]).max(0.0)).collect();
        let Some((coef, sse)) = lstsq(&[vec![1.0; n], d.clone(), hinge], &y) else {
            continue;
        };
        if best.is_none_or(|k| sse < k.sse) {
            best = Some(Kink {
                d: d[b],
                slope_left: coef[1],
                slope_right: coef[1] + coef[2],
                sse,
                sse_line: line.1,
            });
        }
    }
    best
}

/// Normal-equation least squares for a handful of columns.
fn lstsq(cols: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = cols.len();
    let mut a = vec![0.0; p * p];
    let mut rhs = vec![0.0; p];
    for i in 0..p {
        for j in 0..p {
            a[i * p + j] = cols[i].iter().zip(&cols[j]).map(|(u, v)| u * v).sum();
        }
        rhs[i] = cols[i].iter().zip(y).map(|(u, v)| u * v).sum();
    }
    // Gaussian elimination with partial pivoting
    for c in 0..p {
        let piv = (c..p).max_by(|&r, &s| a[r * p + c].abs().total_cmp(&a[s * p + c].abs()))?;
        if a[piv * p + c].abs() < 1e-14 {
            return None;
        }
        for k in 0..p {
            a.swap(c * p + k, piv * p + k);
        }
        rhs.swap(c, piv);
        for r in c + 1..p {
            let f = a[r * p + c] / a[c * p + c];
            for k in c..p {
                a[r * p + k] -= f * a[c * p + k];
            }
            rhs[r] -= f * rhs[c];
        }
    }
    let mut x = vec![0.0; p];
    for c in (0..p).rev() {
        let s: f64 = (c + 1..p).map(|k| a[c * p + k] * x[k]).sum();
        x[c] = (rhs[c] - s) / a[c * p + c];
    }
    let sse = y
        .iter()
        .enumerate()
        .map(|(i, &yi)| {
            let fit: f64 = (0..p).map(|k| x[k] * cols[k][i]).sum();
            (yi - fit).powi(2)
        })
        .sum();
    Some((x, sse))
}

/// `d_um,j_thz` rows.
pub fn write_coupling_curve(path: impl AsRef<Path>, curve: &CouplingCurve) -> Result<()> {
    let mut s = String::from("d_um,j_thz\n");
    for (d, j) in curve.distances.iter().zip(&curve.couplings) {
        let _ = writeln!(s, "{d:.9e},{j:.9e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}
