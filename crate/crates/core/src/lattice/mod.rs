//! Tight-binding description of coupled pillars: the two-mode problem, SSH
//! chains and their topology, and the bridge to continuum mode sets.
//!
//! Couplings enter the Hamiltonian as `-J` on the off-diagonal, so a positive
//! `J` lowers the symmetric combination.

mod calibrate;
mod coupling;

pub use calibrate::{
    analyze_continuum_ssh, calibrate_freqs, calibrate_tb, site_weights, Calibration, ContinuumSsh,
};
pub use coupling::{
    coupling_sweep, extract_j, find_kink, pillar_pair_modes, write_coupling_curve, CouplingCurve,
    CouplingSource, JExtraction, Kink, PillarParams, SweepGrid, SweepResult,
};

use std::fmt::Write as _;
use std::path::Path;

use faer::{Mat, Side};

use crate::error::{invalid, Error, Result};

/// Midgap window half-width as a share of `|J_i - J_o|`.
pub const MIDGAP_SHARE: f64 = 0.25;
/// Samples of the Bloch loop `h(k)` used by [`winding_number`].
const WINDING_SAMPLES: usize = 512;

/// Nearest-neighbor chain with on-site frequency `e0` and bond couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct TightBindingModel {
    pub n_sites: usize,
    pub e0: f64,
    /// `couplings[i]` links sites `i` and `i + 1`.
    pub couplings: Vec<f64>,
}

impl TightBindingModel {
    pub fn new(e0: f64, couplings: Vec<f64>) -> Result<Self> {
        if couplings.is_empty() {
            return Err(invalid("couplings", "need at least one bond (two sites)"));
        }
        if let Some(j) = couplings.iter().find(|j| !(j.is_finite() && **j > 0.0)) {
            return Err(invalid("couplings", format!("couplings must be positive, got {j}")));
        }
        if !e0.is_finite() {
            return Err(invalid("e0", "on-site frequency must be finite"));
        }
        Ok(Self {
            n_sites: couplings.len() + 1,
            e0,
            couplings,
        })
    }

    /// SSH chain of `n_sites` sites starting with an intra-cell bond `j_i`.
    pub fn ssh(n_sites: usize, e0: f64, j_i: f64, j_o: f64) -> Result<Self> {
        if n_sites < 2 {
            return Err(invalid("n_sites", "need at least two sites"));
        }
        let couplings = (0..n_sites - 1)
            .map(|b| if b % 2 == 0 { j_i } else { j_o })
            .collect();
        Self::new(e0, couplings)
    }

    /// `(J_i, J_o)` of an alternating chain.
    pub fn ssh_couplings(&self) -> Result<(f64, f64)> {
        if self.n_sites < 4 {
            return Err(invalid("n_sites", "an SSH chain needs at least two unit cells"));
        }
        let (a, b) = (self.couplings[0], self.couplings[1]);
        let alternating = self
            .couplings
            .iter()
            .enumerate()
            .all(|(i, &j)| j == if i % 2 == 0 { a } else { b });
        if !alternating {
            return Err(invalid("couplings", "couplings do not alternate J_i, J_o"));
        }
        Ok((a, b))
    }

    /// Dense row-major Hamiltonian.
    pub fn matrix(&self) -> Vec<f64> {
        let n = self.n_sites;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = self.e0;
        }
        for (i, &j) in self.couplings.iter().enumerate() {
            a[i * n + i + 1] = -j;
            a[(i + 1) * n + i] = -j;
        }
        a
    }

    /// Ascending eigenvalues and eigenvectors, largest amplitude positive.
    pub fn eigen(&self) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        sym_eigen(&self.matrix(), self.n_sites)
    }

    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "n_sites = {}", self.n_sites);
        let _ = writeln!(s, "e0_thz = {:.12e}", self.e0);
        let list: Vec<String> = self.couplings.iter().map(|j| format!("{j:.12e}")).collect();
        let _ = writeln!(s, "couplings_thz = {}", list.join(","));
        s
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let (mut n, mut e0, mut couplings) = (None, None, None);
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |message: String| Error::Parse {
                line: ln + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| perr("expected key = value".into()))?;
            let value = value.trim();
            match key.trim() {
                "n_sites" => n = Some(value.parse::<usize>().map_err(|e| perr(e.to_string()))?),
                "e0_thz" => e0 = Some(value.parse::<f64>().map_err(|e| perr(e.to_string()))?),
                "couplings_thz" => {
                    couplings = Some(
                        value
                            .split(',')
                            .map(|v| v.trim().parse::<f64>().map_err(|e| perr(e.to_string())))
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                other => return Err(perr(format!("unknown key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse {
            line: 0,
            message: format!("missing key {k}"),
        };
        let model = Self::new(
            e0.ok_or_else(|| missing("e0_thz"))?,
            couplings.ok_or_else(|| missing("couplings_thz"))?,
        )?;
        if Some(model.n_sites) != n {
            return Err(Error::Parse {
                line: 0,
                message: "n_sites does not match the coupling count".into(),
            });
        }
        Ok(model)
    }
}

/// Eigen-decomposition of a small dense symmetric matrix, ascending, with
/// each vector's largest-magnitude amplitude made positive.
pub(crate) fn sym_eigen(a: &[f64], n: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let m = Mat::<f64>::from_fn(n, n, |i, j| a[i * n + j]);
    let evd = m.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver {
        message: format!("dense eigen-decomposition failed: {e:?}"),
        residual: f64::NAN,
    })?;
    let (s, u) = (evd.S(), evd.U());
    let values = (0..n).map(|i| s[i]).collect();
    let vectors = (0..n)
        .map(|j| {
            let mut v: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
            fix_phase(&mut v);
            v
        })
        .collect();
    Ok((values, vectors))
}

pub(crate) fn fix_phase(v: &mut [f64]) {
    let peak = v
        .iter()
        .copied()
        .fold(0.0f64, |acc, x| if x.abs() > acc.abs() + 1e-12 { x } else { acc });
    if peak < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoMode {
    pub e_s: f64,
    pub e_a: f64,
    pub psi_s: [f64; 2],
    pub psi_a: [f64; 2],
}

/// Symmetric and antisymmetric modes of two identical sites.
pub fn two_mode_eigen(e0: f64, j: f64) -> Result<TwoMode> {
    if !(j > 0.0 && j.is_finite()) {
        return Err(invalid("j", format!("coupling must be positive, got {j}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(TwoMode {
        e_s: e0 - j,
        e_a: e0 + j,
        psi_s: [s, s],
        psi_a: [s, -s],
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SshSpectrum {
    pub freqs: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// Distance between the lower and the upper band, midgap states excluded.
    pub gap: f64,
    /// `ν_max - ν_min`.
    pub span: f64,
    /// Indices of states within the midgap window around `e0`.
    pub midgap: Vec<usize>,
}

/// Indices of `freqs` within [`MIDGAP_SHARE`]`·|J_i - J_o|` of `e0`.
pub fn midgap_indices(freqs: &[f64], e0: f64, j_i: f64, j_o: f64) -> Vec<usize> {
    let window = MIDGAP_SHARE * (j_i - j_o).abs();
    (0..freqs.len())
        .filter(|&i| (freqs[i] - e0).abs() < window)
        .collect()
}

/// Band gap of `freqs` around `e0` ignoring the `midgap` states.
pub fn band_gap(freqs: &[f64], e0: f64, midgap: &[usize]) -> f64 {
    let mut lower = f64::NEG_INFINITY;
    let mut upper = f64::INFINITY;
    for (i, &f) in freqs.iter().enumerate() {
        if midgap.contains(&i) {
            continue;
        }
        if f < e0 {
            lower = lower.max(f);
        } else {
            upper = upper.min(f);
        }
    }
    upper - lower
}

pub fn ssh_spectrum(model: &TightBindingModel) -> Result<SshSpectrum> {
    let (j_i, j_o) = model.ssh_couplings()?;
    let (freqs, vectors) = model.eigen()?;
    let midgap = midgap_indices(&freqs, model.e0, j_i, j_o);
    let gap = band_gap(&freqs, model.e0, &midgap);
    let span = freqs[freqs.len() - 1] - freqs[0];
    Ok(SshSpectrum {
        freqs,
        vectors,
        gap,
        span,
        midgap,
    })
}

/// Probability on the first two and the last two sites.
pub fn edge_localization(vector: &[f64]) -> f64 {
    let n = vector.len();
    (0..n)
        .filter(|&i| i < 2 || i + 2 >= n)
        .map(|i| vector[i] * vector[i])
        .sum()
}

/// Times the Bloch loop `h(k) = j_i + j_o e^{ik}` winds around the origin.
pub fn winding_number(j_i: f64, j_o: f64) -> Result<u32> {
    if !(j_i.is_finite() && j_o.is_finite()) {
        return Err(invalid("couplings", "couplings must be finite"));
    }
    if (j_i.abs() - j_o.abs()).abs() <= 1e-12 * j_i.abs().max(j_o.abs()) {
        return Err(Error::Domain(format!(
            "gap closes at |J_i| = |J_o| = {j_i}: winding number undefined"
        )));
    }
    let phase = |s: usize| {
        let k = 2.0 * std::f64::consts::PI * s as f64 / WINDING_SAMPLES as f64;
        (j_o * k.sin()).atan2(j_i + j_o * k.cos())
    };
    let mut total = 0.0;
    for s in 0..WINDING_SAMPLES {
        let mut d = phase(s + 1) - phase(s);
        d -= 2.0 * std::f64::consts::PI * (d / (2.0 * std::f64::consts::PI)).round();
        total += d;
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round().abs() as u32)
}

/// `index,nu_thz,midgap,edge_fraction` rows of a tight-binding spectrum.
pub fn format_ssh_spectrum(spec: &SshSpectrum) -> String {
    let mut s = String::from("index,nu_thz,midgap,edge_fraction\n");
    for (i, (nu, v)) in spec.freqs.iter().zip(&spec.vectors).enumerate() {
        let mid = u8::from(spec.midgap.contains(&i));
        let _ = writeln!(s, "{i},{nu:.9e},{mid},{:.9e}", edge_localization(v));
    }
    s
}

pub fn write_ssh_spectrum(path: impl AsRef<Path>, spec: &SshSpectrum) -> Result<()> {
    std::fs::write(path, format_ssh_spectrum(spec))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    /// Bulk gap of an open chain of `n` cells. Standing waves `k = π - q`
    /// obey `J_i sin((N+1)q) = J_o sin(Nq)`; the smallest root `q > 0` gives
    /// the band edge `|E|² = Δ² + 4 J_i J_o sin²(q/2)`.
    fn open_chain_gap(j_i: f64, j_o: f64, n: usize) -> f64 {
        let f = |q: f64| j_i * ((n + 1) as f64 * q).sin() - j_o * (n as f64 * q).sin();
        let steps = 20_000;
        let h = std::f64::consts::PI / steps as f64;
        let mut lo = 1e-9;
        let mut hi = lo;
        for s in 1..=steps {
            hi = s as f64 * h;
            if f(lo).signum() != f(hi).signum() {
                break;
            }
            lo = hi;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo).signum() == f(mid).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        2.0 * ((j_i - j_o).powi(2) + 4.0 * j_i * j_o * (0.5 * q).sin().powi(2)).sqrt()
    }

    #[test]
    fn two_mode_closed_form() {
        let m = two_mode_eigen(0.0, 1.0).unwrap();
        assert_eq!((m.e_s, m.e_a), (-1.0, 1.0));
        assert_relative_eq!(m.psi_s[0], m.psi_s[1]);
        assert_relative_eq!(m.psi_a[0], -m.psi_a[1]);
        let m = two_mode_eigen(123.4, 2.0).unwrap();
        assert_relative_eq!(m.e_a - m.e_s, 4.0, max_relative = 1e-12);
        assert!(two_mode_eigen(0.0, 0.0).is_err());
        // agrees with the matrix form
        let tb = TightBindingModel::new(5.0, vec![0.7]).unwrap();
        let (vals, vecs) = tb.eigen().unwrap();
        assert_relative_eq!(vals[0], 4.3, max_relative = 1e-14);
        assert_relative_eq!(vecs[0][0], vecs[0][1], max_relative = 1e-12);
    }

    #[test]
    fn eigen_matches_nalgebra() {
        let tb = TightBindingModel::ssh(12, 1.5, 0.8, 1.9).unwrap();
        let (vals, vecs) = tb.eigen().unwrap();
        let a = DMatrix::from_row_slice(12, 12, &tb.matrix());
        let mut oracle: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        for (v, o) in vals.iter().zip(&oracle) {
            assert!((v - o).abs() < 1e-12);
        }
        for (v, lam) in vecs.iter().zip(&vals) {
            let x = nalgebra::DVector::from_column_slice(v);
            assert!((&a * &x - &x * *lam).norm() < 1e-12);
        }
    }

    #[test]
    fn topological_chain_has_edge_pair() {
        let spec = ssh_spectrum(&TightBindingModel::ssh(20, 0.0, 1.0, 2.0).unwrap()).unwrap();
        let near: Vec<usize> = (0..20).filter(|&i| spec.freqs[i].abs() < 0.01).collect();
        assert_eq!(near.len(), 2);
        assert_eq!(spec.midgap, near);
        let below = spec.freqs.iter().filter(|f| **f < -0.01).count();
        assert_eq!(below, 9);
        // inner band edges near ±|J_i - J_o|, pushed out by the open ends
        assert_relative_eq!(spec.gap, open_chain_gap(1.0, 2.0, 10), max_relative = 1e-9);
        assert!(spec.gap > 2.0);
        assert!((spec.span / 6.0 - 1.0).abs() < 0.05);
        for &i in &spec.midgap {
            assert!(edge_localization(&spec.vectors[i]) >= 0.6);
        }
    }

    #[test]
    fn uniform_chain_is_gapless() {
        let n = 20;
        let spec = ssh_spectrum(&TightBindingModel::ssh(n, 0.0, 1.0, 1.0).unwrap()).unwrap();
        assert!(spec.midgap.is_empty());
        assert!(spec.gap <= 2.0 * std::f64::consts::PI / (n as f64 + 1.0));
        // ground state of the open chain is a half sine
        let g = &spec.vectors[0];
        assert!(edge_localization(g) < 0.3);
        for (s, a) in g.iter().enumerate() {
            let exact = (2.0 / (n as f64 + 1.0)).sqrt()
                * (std::f64::consts::PI * (s + 1) as f64 / (n as f64 + 1.0)).sin();
            assert!((a - exact).abs() < 1e-10);
        }
    }

    #[test]
    fn edge_weight_of_delta() {
        let mut v = vec![0.0; 10];
        v[1] = 1.0;
        assert_eq!(edge_localization(&v), 1.0);
        v[1] = 0.0;
        v[5] = 1.0;
        assert_eq!(edge_localization(&v), 0.0);
    }

    #[test]
    fn winding_values() {
        assert_eq!(winding_number(1.0, 2.0).unwrap(), 1);
        assert_eq!(winding_number(2.0, 1.0).unwrap(), 0);
        assert!(matches!(winding_number(1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn model_validation_and_text_round_trip() {
        assert!(TightBindingModel::new(0.0, vec![]).is_err());
        assert!(TightBindingModel::new(0.0, vec![1.0, -1.0]).is_err());
        assert!(TightBindingModel::new(0.0, vec![1.0, 2.0, 1.5]).unwrap().ssh_couplings().is_err());
        let tb = TightBindingModel::ssh(6, 3.25, 0.5, 1.75).unwrap();
        let back = TightBindingModel::from_key_value(&tb.to_key_value()).unwrap();
        assert_eq!(back, tb);
        assert!(TightBindingModel::from_key_value("n_sites = 3\nbogus = 1\n").is_err());
        assert!(TightBindingModel::from_key_value("n_sites = 3\ne0_thz = 0\ncouplings_thz = 1\n").is_err());
    }

    #[test]
    fn spectrum_rows() {
        let spec = ssh_spectrum(&TightBindingModel::ssh(4, 0.0, 1.0, 2.0).unwrap()).unwrap();
        let text = format_ssh_spectrum(&spec);
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("index,nu_thz,midgap,edge_fraction\n"));
    }

    proptest! {
        #[test]
        fn chiral_symmetry(j_i in 0.1f64..3.0, j_o in 0.1f64..3.0, e0 in -5.0f64..5.0) {
            let spec = ssh_spectrum(&TightBindingModel::ssh(20, e0, j_i, j_o).unwrap()).unwrap();
            let n = spec.freqs.len();
            for i in 0..n {
                let a = spec.freqs[i] - e0;
                let b = spec.freqs[n - 1 - i] - e0;
                prop_assert!((a + b).abs() < 1e-10);
            }
        }

        #[test]
        fn midgap_count_follows_topology(j_i in 0.2f64..3.0, ratio in 0.05f64..0.6, flip: bool) {
            let (a, b) = if flip { (j_i, j_i * ratio) } else { (j_i * ratio, j_i) };
            let spec = ssh_spectrum(&TightBindingModel::ssh(20, 0.0, a, b).unwrap()).unwrap();
            let delta = (a - b).abs();
            let inside = spec.freqs.iter().filter(|f| f.abs() < delta).count();
            let expected = if b > a { 2 } else { 0 };
            prop_assert_eq!(inside, expected);
            prop_assert_eq!(spec.midgap.len(), expected);
            prop_assert_eq!(winding_number(a, b).unwrap() as usize, expected / 2);
        }

        #[test]
        fn gap_matches_open_chain_quantization(j_i in 0.2f64..3.0, ratio in 0.05f64..0.6, flip: bool) {
            let (a, b) = if flip { (j_i, j_i * ratio) } else { (j_i * ratio, j_i) };
            let spec = ssh_spectrum(&TightBindingModel::ssh(20, 0.0, a, b).unwrap()).unwrap();
            let exact = open_chain_gap(a, b, 10);
            prop_assert!((spec.gap - exact).abs() < 1e-9 * exact);
            prop_assert!(spec.gap >= 2.0 * (a - b).abs());
        }

        #[test]
        fn winding_is_scale_invariant(j_i in 0.1f64..3.0, j_o in 0.1f64..3.0, alpha in 0.01f64..100.0) {
            prop_assume!((j_i - j_o).abs() > 1e-6);
            prop_assert_eq!(
                winding_number(j_i, j_o).unwrap(),
                winding_number(alpha * j_i, alpha * j_o).unwrap()
            );
        }
    }
}
