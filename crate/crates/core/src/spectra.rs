//! Synthetic spectra of a weighted [`ModeSet`]: slitless position-space
//! images, momentum-space images and the free-particle dispersion parabola.
//!
//! Frequencies on the spectral axis are measured from the potential minimum,
//! like [`ModeSet::freqs`]. Intensities are densities: summing
//! `intensity · step0 · step1` gives the total weight.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::cavity::CavityParams;
use crate::eigensolver::ModeSet;
use crate::error::{invalid, Error, Result};

/// Default spectrometer dispersion along `y`, µm per THz.
pub const DEFAULT_DISPERSION: f64 = 1.0;
/// Default frequency bin width, THz.
pub const DEFAULT_BIN_WIDTH: f64 = 0.05;
/// Zero padding factor of the momentum-space transform.
const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    /// Position `x`, µm.
    Position,
    /// Transverse momentum `k_x`, rad/µm.
    Momentum,
}

impl AxisKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisKind::Position => "position",
            AxisKind::Momentum => "momentum",
        }
    }
}

/// Uniform frequency bins. Without explicit limits the range is chosen to
/// hold every contribution with two empty bins on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqBins {
    pub width: f64,
    pub range: Option<(f64, f64)>,
}

impl Default for FreqBins {
    fn default() -> Self {
        Self {
            width: DEFAULT_BIN_WIDTH,
            range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumImage {
    pub kind: AxisKind,
    pub axis0_min: f64,
    pub axis0_step: f64,
    pub axis1_min: f64,
    pub axis1_step: f64,
    pub n0: usize,
    pub n1: usize,
    /// Row-major `[i0 * n1 + i1]`.
    pub intensity: Vec<f64>,
    /// µm per THz along the dispersion axis (position images).
    pub dispersion: Option<f64>,
    /// Largest `|k|` collected by the objective, rad/µm (momentum images).
    pub na_limit: Option<f64>,
    /// Lowest mode frequency in the image, THz.
    pub ground: f64,
}

impl SpectrumImage {
    pub fn axis0(&self, i: usize) -> f64 {
        self.axis0_min + i as f64 * self.axis0_step
    }

    pub fn axis1(&self, j: usize) -> f64 {
        self.axis1_min + j as f64 * self.axis1_step
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.intensity[i * self.n1 + j]
    }

    pub fn integral(&self) -> f64 {
        self.intensity.iter().sum::<f64>() * self.axis0_step * self.axis1_step
    }

    /// Integral over the cells accepted by `keep(axis0, axis1)`.
    pub fn integral_where(&self, keep: impl Fn(f64, f64) -> bool) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n0 {
            for j in 0..self.n1 {
                if keep(self.axis0(i), self.axis1(j)) {
                    s += self.at(i, j);
                }
            }
        }
        s * self.axis0_step * self.axis1_step
    }

    /// Share of the intensity with `lo ≤ axis1 ≤ hi`.
    pub fn band_fraction(&self, lo: f64, hi: f64) -> f64 {
        self.integral_where(|_, f| f >= lo && f <= hi) / self.integral()
    }

    /// Share of the intensity with `|axis0 - center| ≤ half_width`.
    pub fn confined_fraction(&self, center: f64, half_width: f64) -> f64 {
        let tol = 1e-9 * self.axis0_step;
        self.integral_where(|a, _| (a - center).abs() <= half_width + tol) / self.integral()
    }
}

fn check_weights(modes: &ModeSet, weights: &[f64]) -> Result<()> {
    if weights.len() != modes.len() {
        return Err(invalid(
            "weights",
            format!("{} weights for {} modes", weights.len(), modes.len()),
        ));
    }
    if modes.is_empty() {
        return Err(invalid("modes", "no modes to image"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(invalid("weights", "weights must be finite and >= 0"));
    }
    Ok(())
}

/// Cloud-in-cell deposit of `mass` at position `f` on bins centered at
/// `min + j·step`. Mass outside the axis is dropped.
fn deposit(line: &mut [f64], min: f64, step: f64, f: f64, mass: f64) {
    let u = (f - min) / step;
    let j = u.floor();
    let frac = u - j;
    let j = j as isize;
    let n = line.len() as isize;
    if (0..n).contains(&j) {
        line[j as usize] += mass * (1.0 - frac);
    }
    if (0..n).contains(&(j + 1)) {
        line[(j + 1) as usize] += mass * frac;
    }
}

fn frequency_axis(bins: FreqBins, lo: f64, hi: f64) -> Result<(f64, usize)> {
    if !(bins.width > 0.0 && bins.width.is_finite()) {
        return Err(invalid("bin_width", format!("{} must be positive", bins.width)));
    }
    let (lo, hi) = match bins.range {
        Some((a, b)) if a < b => (a, b),
        Some(_) => return Err(invalid("freq_range", "lower limit must be below the upper")),
        None => {
            let lo = (lo / bins.width).floor() * bins.width - 2.0 * bins.width;
            (lo, hi + 2.0 * bins.width)
        }
    };
    let n = ((hi - lo) / bins.width).ceil() as usize + 1;
    Ok((lo, n))
}

/// Gaussian blur of a sampled line that keeps every sample's mass on the
/// line (weights renormalized per source).
fn blur_conserving(line: &[f64], step: f64, sigma: f64) -> Vec<f64> {
    let reach = (3.0 * sigma / step).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach)
        .map(|d| (-0.5 * (d as f64 * step / sigma).powi(2)).exp())
        .collect();
    let n = line.len();
    let mut out = vec![0.0; n];
    for (i, &m) in line.iter().enumerate() {
        if m == 0.0 {
            continue;
        }
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        let norm: f64 = (lo..=hi).map(|j| kernel[i.abs_diff(j)]).sum();
        for j in lo..=hi {
            out[j] += m * kernel[i.abs_diff(j)] / norm;
        }
    }
    out
}

/// Slitless spectrometer image: mode `i` contributes `w_i T_i(x) K_i(Δν)`,
/// with `T_i` the `y`-integrated intensity and `K_i` the `x`-integrated
/// profile along `y` mapped to `Δν = ν_i + (y - y_c)/dispersion`.
/// `defocus` (µm) blurs `T_i` with a Gaussian of that standard deviation.
pub fn position_spectrum(
    modes: &ModeSet,
    weights: &[f64],
    dispersion: f64,
    bins: FreqBins,
    defocus: Option<f64>,
) -> Result<SpectrumImage> {
    check_weights(modes, weights)?;
    if !(dispersion > 0.0 && dispersion.is_finite()) {
        return Err(invalid("dispersion", format!("{dispersion} µm/THz must be positive")));
    }
    if let Some(s) = defocus {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(invalid("defocus", format!("{s} µm must be >= 0")));
        }
    }
    let g = modes.grid;
    let (_, yc) = g.center();
    let reach = 0.5 * (g.ny - 1) as f64 * g.dy / dispersion;
    let fmin = modes.freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = modes.freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (axis1_min, n1) = frequency_axis(bins, fmin - reach, fmax + reach)?;
    let bw = bins.width;

    let profiles: Vec<(Vec<f64>, Vec<f64>)> = (0..modes.len())
        .into_par_iter()
        .map(|m| {
            let f = &modes.fields[m];
            let mut tx = vec![0.0; g.nx];
            let mut py = vec![0.0; g.ny];
            for iy in 0..g.ny {
                for ix in 0..g.nx {
                    let p = f[g.index(ix, iy)].powi(2);
                    tx[ix] += p * g.dy;
                    py[iy] += p * g.dx;
                }
            }
            if let Some(s) = defocus.filter(|&s| s > 0.0) {
                tx = blur_conserving(&tx, g.dx, s);
            }
            let mut kf = vec![0.0; n1];
            for (iy, &p) in py.iter().enumerate() {
                let nu = modes.freqs[m] + (g.y(iy) - yc) / dispersion;
                deposit(&mut kf, axis1_min, bw, nu, p * g.dy / bw);
            }
            (tx, kf)
        })
        .collect();

    let mut intensity = vec![0.0; g.nx * n1];
    for ((tx, kf), &w) in profiles.iter().zip(weights) {
        accumulate(&mut intensity, n1, tx, kf, w);
    }
    Ok(SpectrumImage {
        kind: AxisKind::Position,
        axis0_min: g.x(0),
        axis0_step: g.dx,
        axis1_min,
        axis1_step: bw,
        n0: g.nx,
        n1,
        intensity,
        dispersion: Some(dispersion),
        na_limit: None,
        ground: fmin,
    })
}

fn accumulate(image: &mut [f64], n1: usize, a0: &[f64], a1: &[f64], w: f64) {
    if w == 0.0 {
        return;
    }
    for (i, &t) in a0.iter().enumerate() {
        if t == 0.0 {
            continue;
        }
        let row = &mut image[i * n1..(i + 1) * n1];
        for (cell, &k) in row.iter_mut().zip(a1) {
            *cell += w * t * k;
        }
    }
}

/// `|ψ̃(k)|²` of one mode on the zero-padded, centered momentum grid.
/// `ψ̃(k) = Σ ψ e^{-ik·r} dx dy`, so `Σ |ψ̃|² dk_x dk_y / (2π)² = 1`.
pub struct MomentumDensity {
    pub nkx: usize,
    pub nky: usize,
    pub dkx: f64,
    pub dky: f64,
    /// Row-major `[iky * nkx + ikx]`, index `nk/2` is `k = 0`.
    pub density: Vec<f64>,
}

impl MomentumDensity {
    pub fn kx(&self, i: usize) -> f64 {
        (i as f64 - (self.nkx / 2) as f64) * self.dkx
    }

    pub fn ky(&self, j: usize) -> f64 {
        (j as f64 - (self.nky / 2) as f64) * self.dky
    }

    fn cell(&self) -> f64 {
        self.dkx * self.dky / (4.0 * std::f64::consts::PI * std::f64::consts::PI)
    }

    /// `Σ |ψ̃|² dk/(2π)²`.
    pub fn norm(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell()
    }

    /// `⟨k_x² + k_y²⟩`, rad²/µm².
    pub fn mean_k2(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.nky {
            let ky = self.ky(j);
            for i in 0..self.nkx {
                let kx = self.kx(i);
                s += (kx * kx + ky * ky) * self.density[j * self.nkx + i];
            }
        }
        s * self.cell() / self.norm()
    }

    /// Marginal over `k_y`, normalized so `Σ M dk_x = 1` for a unit mode.
    pub fn marginal_kx(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.nkx];
        for j in 0..self.nky {
            for i in 0..self.nkx {
                m[i] += self.density[j * self.nkx + i];
            }
        }
        let scale = self.dky / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
        m.iter_mut().for_each(|x| *x *= scale);
        m
    }
}

pub fn momentum_density(modes: &ModeSet, i: usize) -> MomentumDensity {
    let mut planner = FftPlanner::<f64>::new();
    momentum_density_with(modes, i, &mut planner)
}

fn momentum_density_with(
    modes: &ModeSet,
    i: usize,
    planner: &mut FftPlanner<f64>,
) -> MomentumDensity {
    let g = modes.grid;
    let (nkx, nky) = (PAD * g.nx, PAD * g.ny);
    let mut buf = vec![Complex64::new(0.0, 0.0); nkx * nky];
    let f = &modes.fields[i];
    for iy in 0..g.ny {
        for ix in 0..g.nx {
            buf[iy * nkx + ix] = Complex64::new(f[g.index(ix, iy)], 0.0);
        }
    }
    let row_fft = planner.plan_fft_forward(nkx);
    for row in buf.chunks_exact_mut(nkx) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(nky);
    let mut col = vec![Complex64::new(0.0, 0.0); nky];
    for ix in 0..nkx {
        for iy in 0..nky {
            col[iy] = buf[iy * nkx + ix];
        }
        col_fft.process(&mut col);
        for iy in 0..nky {
            buf[iy * nkx + ix] = col[iy];
        }
    }
    let area2 = (g.dx * g.dy).powi(2);
    let mut density = vec![0.0; nkx * nky];
    for jy in 0..nky {
        // fftshift: output index jy holds frequency jy - nky/2
        let sy = (jy + nky - nky / 2) % nky;
        for jx in 0..nkx {
            let sx = (jx + nkx - nkx / 2) % nkx;
            density[jy * nkx + jx] = buf[sy * nkx + sx].norm_sqr() * area2;
        }
    }
    MomentumDensity {
        nkx,
        nky,
        dkx: 2.0 * std::f64::consts::PI / (nkx as f64 * g.dx),
        dky: 2.0 * std::f64::consts::PI / (nky as f64 * g.dy),
        density,
    }
}

/// Largest transverse momentum collected by an objective of numerical
/// aperture `na`, rad/µm.
pub fn na_momentum_limit(cav: &CavityParams, na: f64) -> f64 {
    2.0 * std::f64::consts::PI * na * cav.n_medium / (cav.lambda_cut * 1e-3)
}

/// Momentum-space image: the `k_y`-integrated `|ψ̃_i|²` of every mode placed at
/// its frequency `ν_i`. Momenta beyond the objective's reach stay in the
/// image; [`SpectrumImage::na_limit`] marks them.
pub fn momentum_spectrum(
    modes: &ModeSet,
    weights: &[f64],
    cav: &CavityParams,
    na: f64,
    bins: FreqBins,
) -> Result<SpectrumImage> {
    check_weights(modes, weights)?;
    if !(na > 0.0 && na <= 1.0) {
        return Err(invalid("na", format!("{na} outside (0, 1]")));
    }
    let fmin = modes.freqs.iter().copied().fold(f64::INFINITY, f64::min);
    let fmax = modes.freqs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (axis1_min, n1) = frequency_axis(bins, fmin, fmax)?;
    let bw = bins.width;

    let marginals: Vec<(Vec<f64>, f64)> = (0..modes.len())
        .into_par_iter()
        .map_init(FftPlanner::<f64>::new, |planner, m| {
            let d = momentum_density_with(modes, m, planner);
            (d.marginal_kx(), d.dkx)
        })
        .collect();
    let nkx = marginals[0].0.len();
    let dkx = marginals[0].1;
    let mut intensity = vec![0.0; nkx * n1];
    for (m, ((mx, _), &w)) in marginals.iter().zip(weights).enumerate() {
        let mut kf = vec![0.0; n1];
        deposit(&mut kf, axis1_min, bw, modes.freqs[m], 1.0 / bw);
        accumulate(&mut intensity, n1, mx, &kf, w);
    }
    Ok(SpectrumImage {
        kind: AxisKind::Momentum,
        axis0_min: -((nkx / 2) as f64) * dkx,
        axis0_step: dkx,
        axis1_min,
        axis1_step: bw,
        n0: nkx,
        n1,
        intensity,
        dispersion: None,
        na_limit: Some(na_momentum_limit(cav, na)),
        ground: fmin,
    })
}

/// Share of a momentum image inside the free-particle parabola shifted up
/// by `slack`: cells with `K k_x² ≤ Δν + slack`.
pub fn parabola_fraction(img: &SpectrumImage, cav: &CavityParams, slack: f64) -> Result<f64> {
    if img.kind != AxisKind::Momentum {
        return Err(Error::Domain("parabola test needs a momentum image".into()));
    }
    let kc = cav.kinetic_coefficient();
    Ok(img.integral_where(|k, nu| kc * k * k <= nu + slack) / img.integral())
}

/// Free-particle kinetic frequency `ħk²/(4π m_ph)` at each `k` (rad/µm).
pub fn dispersion_curve(cav: &CavityParams, k_samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    if let Some(k) = k_samples.iter().find(|k| !k.is_finite()) {
        return Err(invalid("k_samples", format!("non-finite momentum {k}")));
    }
    let kc = cav.kinetic_coefficient();
    Ok(k_samples.iter().map(|&k| (k, kc * k * k)).collect())
}

pub fn format_spectrum(img: &SpectrumImage) -> String {
    let mut s = String::from("# axis0_kind axis0_min axis0_step axis1_min axis1_step\n");
    let _ = writeln!(
        s,
        "# {} {:.9e} {:.9e} {:.9e} {:.9e}",
        img.kind.as_str(),
        img.axis0_min,
        img.axis0_step,
        img.axis1_min,
        img.axis1_step
    );
    if let Some(d) = img.dispersion {
        let _ = writeln!(s, "# dispersion_um_per_thz {d:.9e}");
    }
    if let Some(k) = img.na_limit {
        let _ = writeln!(s, "# na_limit_rad_per_um {k:.9e}");
    }
    let _ = writeln!(s, "# ground_thz {:.9e}", img.ground);
    for i in 0..img.n0 {
        let row = &img.intensity[i * img.n1..(i + 1) * img.n1];
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.6e}");
        }
        s.push('\n');
    }
    s
}

pub fn write_spectrum(path: impl AsRef<Path>, img: &SpectrumImage) -> Result<()> {
    std::fs::write(path, format_spectrum(img))?;
    Ok(())
}

pub fn write_dispersion_curve(path: impl AsRef<Path>, curve: &[(f64, f64)]) -> Result<()> {
    let mut s = String::from("k_rad_per_um,dnu_thz\n");
    for (k, nu) in curve {
        let _ = writeln!(s, "{k:.9e},{nu:.9e}");
    }
    std::fs::write(path, s)?;
    Ok(())
}
