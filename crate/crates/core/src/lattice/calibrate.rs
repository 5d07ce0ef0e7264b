use crate::eigensolver::{bound_flags, ModeSet};
use crate::error::{invalid, Error, Result};
use crate::landscape::SshGeometry;

use super::{edge_localization, TightBindingModel, MIDGAP_SHARE};

/// Calibration fits whose RMS exceeds this share of the spectral span warn.
pub const CALIBRATION_WARN_SHARE: f64 = 0.2;
const LM_STEPS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub model: TightBindingModel,
    /// RMS distance between sorted model and continuum frequencies, THz.
    pub rms: f64,
    pub warnings: Vec<String>,
}

fn bound_indices(modes: &ModeSet) -> Vec<usize> {
    bound_flags(modes)
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect()
}

/// Sorted SSH eigenvalues and their gradients in `(e0, J_i, J_o)` from the
/// Hellmann-Feynman theorem.
fn ssh_eval(n: usize, p: [f64; 3]) -> Result<(Vec<f64>, Vec<[f64; 3]>)> {
    let model = TightBindingModel {
        n_sites: n,
        e0: p[0],
        couplings: (0..n - 1).map(|b| if b % 2 == 0 { p[1] } else { p[2] }).collect(),
    };
    let (vals, vecs) = super::sym_eigen(&model.matrix(), n)?;
    let grads = vecs
        .iter()
        .map(|v| {
            let mut g = [1.0, 0.0, 0.0];
            for b in 0..n - 1 {
                g[1 + b % 2] -= 2.0 * v[b] * v[b + 1];
            }
            g
        })
        .collect();
    Ok((vals, grads))
}

fn rms_of(n: usize, p: [f64; 3], target: &[f64]) -> Result<f64> {
    let (vals, _) = ssh_eval(n, p)?;
    let ss: f64 = vals.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / n as f64).sqrt())
}

/// Levenberg-Marquardt on the sorted eigenvalues.
fn fit_from(n: usize, start: [f64; 3], target: &[f64]) -> Result<([f64; 3], f64)> {
    let mut p = start;
    let mut cost = rms_of(n, p, target)?;
    let mut lambda = 1e-3;
    for _ in 0..LM_STEPS {
        let (vals, grads) = ssh_eval(n, p)?;
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (k, g) in grads.iter().enumerate() {
            let r = target[k] - vals[k];
            for a in 0..3 {
                jtr[a] += g[a] * r;
                for b in 0..3 {
                    jtj[a][b] += g[a] * g[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * (jtj[a][a] + 1e-12);
            }
            let Some(step) = solve3(m, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let c = rms_of(n, trial, target)?;
            if c < cost {
                let small = step.iter().all(|s| s.abs() < 1e-13 * (1.0 + p[0].abs()));
                p = trial;
                cost = c;
                lambda = (lambda * 0.3).max(1e-12);
                improved = !small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    Ok((p, cost))
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |a: [[f64; 3]; 3]| {
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (c, o) in out.iter_mut().enumerate() {
        let mut a = m;
        for row in 0..3 {
            a[row][c] = r[row];
        }
        *o = det(a) / d;
    }
    Some(out)
}

/// Fits `(e0, J_i, J_o)` of an SSH chain to the lowest `2·n_cells` bound
/// frequencies of `modes`. Both coupling orderings are tried as starting
/// points; the better fit wins.
pub fn calibrate_tb(modes: &ModeSet, geo: &SshGeometry) -> Result<Calibration> {
    geo.validate()?;
    let n = geo.n_sites();
    let bound = bound_indices(modes);
    if bound.len() < n {
        return Err(Error::Extraction(format!(
            "{} bound modes for a chain of {n} pillars",
            bound.len()
        )));
    }
    let target: Vec<f64> = bound[..n].iter().map(|&i| modes.freqs[i]).collect();
    calibrate_freqs(&target)
}

/// [`calibrate_tb`] on explicit ascending frequencies, one per site.
pub fn calibrate_freqs(target: &[f64]) -> Result<Calibration> {
    let n = target.len();
    if n < 4 {
        return Err(invalid("modes", "an SSH fit needs at least four frequencies"));
    }
    let span = target[n - 1] - target[0];
    if !(span > 0.0) {
        return Err(invalid("modes", "frequencies do not spread"));
    }
    let e0 = target.iter().sum::<f64>() / n as f64;
    let total = 0.5 * span;
    let mut best: Option<([f64; 3], f64)> = None;
    for t in [0.15, 0.35, 0.6, 0.85] {
        let (a, b) = (total * t / (1.0 + t), total / (1.0 + t));
        for start in [[e0, a, b], [e0, b, a]] {
            let fit = fit_from(n, start, target)?;
            if best.is_none_or(|(_, c)| fit.1 < c) {
                best = Some(fit);
            }
        }
    }
    let (p, rms) = best.expect("at least one start");
    let mut warnings = Vec::new();
    if rms > CALIBRATION_WARN_SHARE * span {
        warnings.push(format!("fit RMS {rms:.3} THz exceeds 20% of the {span:.3} THz span"));
    }
    // the spectrum is even in each coupling's sign
    let model = TightBindingModel::ssh(n, p[0], p[1].abs(), p[2].abs())?;
    Ok(Calibration {
        model,
        rms,
        warnings,
    })
}

/// Probability of mode `i` on each pillar, assigning every node to its
/// nearest pillar center.
pub fn site_weights(modes: &ModeSet, i: usize, centers: &[(f64, f64)]) -> Vec<f64> {
    let g = modes.grid;
    let mut w = vec![0.0; centers.len()];
    if centers.is_empty() {
        return w;
    }
    for iy in 0..g.ny {
        let y = g.y(iy);
        for ix in 0..g.nx {
            let x = g.x(ix);
            let nearest = (0..centers.len())
                .min_by(|&a, &b| {
                    let da = (x - centers[a].0).powi(2) + (y - centers[a].1).powi(2);
                    let db = (x - centers[b].0).powi(2) + (y - centers[b].1).powi(2);
                    da.total_cmp(&db)
                })
                .unwrap_or(0);
            w[nearest] += modes.fields[i][g.index(ix, iy)].powi(2);
        }
    }
    w.iter_mut().for_each(|x| *x *= g.cell_area());
    w
}

/// Band analysis of a continuum SSH chain.
#[derive(Debug, Clone)]
pub struct ContinuumSsh {
    pub calibration: Calibration,
    /// ModeSet indices of the `2·n_cells` lowest bound modes.
    pub indices: Vec<usize>,
    pub freqs: Vec<f64>,
    /// Positions in `freqs` of the midgap states.
    pub midgap: Vec<usize>,
    /// Band gap between the bulk bands, THz.
    pub gap: f64,
    /// Share of each mode's pillar weight on the outer two cells.
    pub edge_fractions: Vec<f64>,
}

/// Splits the `2·n_cells` lowest bound modes into two bands and midgap
/// states. Midgap states are the modes within [`MIDGAP_SHARE`]`·|J_i - J_o|`
/// (fitted) of the center of the two middle modes; this center tolerates the
/// small band asymmetry of continuum chains, unlike the fitted `e0`.
pub fn analyze_continuum_ssh(modes: &ModeSet, geo: &SshGeometry) -> Result<ContinuumSsh> {
    let calibration = calibrate_tb(modes, geo)?;
    let n = geo.n_sites();
    let indices: Vec<usize> = bound_indices(modes)[..n].to_vec();
    let freqs: Vec<f64> = indices.iter().map(|&i| modes.freqs[i]).collect();
    let (j_i, j_o) = calibration.model.ssh_couplings()?;
    let center = 0.5 * (freqs[n / 2 - 1] + freqs[n / 2]);
    let window = MIDGAP_SHARE * (j_i - j_o).abs();
    let midgap: Vec<usize> = (0..n).filter(|&k| (freqs[k] - center).abs() < window).collect();
    let bulk: Vec<f64> = (0..n)
        .filter(|k| !midgap.contains(k))
        .map(|k| freqs[k])
        .collect();
    let half = bulk.len() / 2;
    let gap = if half == 0 { 0.0 } else { bulk[half] - bulk[half - 1] };
    let centers = geo.centers(modes.grid.center());
    let edge_fractions = indices
        .iter()
        .map(|&i| {
            let w = site_weights(modes, i, &centers);
            let total: f64 = w.iter().sum();
            let amps: Vec<f64> = w.iter().map(|x| (x / total).sqrt()).collect();
            edge_localization(&amps)
        })
        .collect();
    Ok(ContinuumSsh {
        calibration,
        indices,
        freqs,
        midgap,
        gap,
        edge_fractions,
    })
}
