use super::HeightMap;
use crate::error::{invalid, Result};

/// Gaussian kernel support in standard deviations. Truncating at 3σ and
/// renormalizing keeps the height mass exact for anything at least 3σ from
/// the boundary.
const KERNEL_SIGMAS: f64 = 3.0;

/// Blurs the map with a Gaussian of standard deviation `voxel_radius` (nm),
/// treating everything outside the grid as zero height.
pub fn apply_voxel_smoothing(hmap: &HeightMap, voxel_radius: f64) -> Result<HeightMap> {
    if !(voxel_radius >= 0.0 && voxel_radius.is_finite()) {
        return Err(invalid("voxel_radius", format!("must be >= 0, got {voxel_radius}")));
    }
    let sigma = voxel_radius * 1e-3;
    let grid = hmap.grid;
    let reach = (KERNEL_SIGMAS * sigma / grid.dx + 1e-9).floor() as usize;
    if sigma == 0.0 || reach == 0 {
        return Ok(hmap.clone());
    }
    let mut kernel: Vec<f64> = (0..=2 * reach)
        .map(|k| {
            let x = (k as f64 - reach as f64) * grid.dx;
            (-0.5 * (x / sigma).powi(2)).exp()
        })
        .collect();
    let norm: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= norm);

    let (nx, ny) = (grid.nx, grid.ny);
    let mut tmp = vec![0.0; grid.len()];
    for iy in 0..ny {
        let row = &hmap.h[iy * nx..(iy + 1) * nx];
        convolve_line(row, &kernel, reach, &mut tmp[iy * nx..(iy + 1) * nx]);
    }
    let mut out = vec![0.0; grid.len()];
    let mut col = vec![0.0; ny];
    let mut col_out = vec![0.0; ny];
    for ix in 0..nx {
        for iy in 0..ny {
            col[iy] = tmp[iy * nx + ix];
        }
        convolve_line(&col, &kernel, reach, &mut col_out);
        for iy in 0..ny {
            // clamp roundoff below zero
            out[iy * nx + ix] = col_out[iy].max(0.0);
        }
    }
    HeightMap::new(grid, out)
}

fn convolve_line(input: &[f64], kernel: &[f64], reach: usize, out: &mut [f64]) {
    let n = input.len();
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(reach);
        let hi = (i + reach).min(n - 1);
        *o = (lo..=hi).map(|j| input[j] * kernel[j + reach - i]).sum();
    }
}

/// Snaps every height to the nearest multiple of `step` (nm), ties to even.
pub fn quantize_dipin(hmap: &HeightMap, step: f64) -> Result<HeightMap> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step", format!("must be positive, got {step}")));
    }
    let h = hmap
        .h
        .iter()
        .map(|&h| (h / step).round_ties_even() * step)
        .collect();
    HeightMap::new(hmap.grid, h)
}

/// Lateral 10–90 % rise distance of a monotone profile sampled at spacing
/// `dx`, located by linear interpolation. `None` if the profile never crosses
/// both levels.
pub fn step_width_10_90(profile: &[f64], dx: f64) -> Option<f64> {
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = profile.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let crossing = |level: f64| {
        let target = lo + level * (hi - lo);
        profile.windows(2).enumerate().find_map(|(i, w)| {
            let (a, b) = (w[0], w[1]);
            ((a - target) * (b - target) <= 0.0 && a != b)
                .then(|| (i as f64 + (target - a) / (b - a)) * dx)
        })
    };
    Some((crossing(0.9)? - crossing(0.1)?).abs())
}
