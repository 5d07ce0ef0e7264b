//! Cavity parameters and the closed-form conversions built on them: the
//! paraxial photon mass, the cutoff frequency and the height-to-potential map.
//!
//! Units: heights and wavelengths in nm, lateral lengths in µm, frequencies in
//! THz. Energies are always reported as `E/h`.

use crate::constants::{BOLTZMANN, HBAR, HZ_PER_THZ, PLANCK, SPEED_OF_LIGHT};
use crate::eigensolver::PotentialMap;
use crate::error::{invalid, Error, Result};
use crate::landscape::HeightMap;

/// One cavity configuration. Build it with [`derive_cavity`] so the derived
/// fields stay consistent with the inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Longitudinal mode number.
    pub q: u32,
    /// Cutoff vacuum wavelength, nm.
    pub lambda_cut: f64,
    /// Refractive index of the dye solution.
    pub n_medium: f64,
    /// Polymer minus medium refractive index.
    pub delta_n: f64,
    /// Mechanical mirror distance, µm.
    pub d0: f64,
    /// Effective photon mass, kg.
    pub m_ph: f64,
    /// Cutoff frequency, THz.
    pub nu_cut: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

pub fn derive_cavity(
    q: u32,
    lambda_cut: f64,
    n_medium: f64,
    delta_n: f64,
    temperature: f64,
) -> Result<CavityParams> {
    if q < 1 {
        return Err(invalid("q", "longitudinal mode number must be >= 1"));
    }
    if !(400.0..=800.0).contains(&lambda_cut) {
        return Err(invalid("lambda_cut", format!("{lambda_cut} nm outside [400, 800]")));
    }
    if !(n_medium > 1.0 && n_medium <= 2.0) {
        return Err(invalid("n_medium", format!("{n_medium} outside (1, 2]")));
    }
    if !(delta_n > -0.5 && delta_n < 0.5) {
        return Err(invalid("delta_n", format!("{delta_n} outside (-0.5, 0.5)")));
    }
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature", format!("{temperature} K must be positive")));
    }
    let lambda_m = lambda_cut * 1e-9;
    Ok(CavityParams {
        q,
        lambda_cut,
        n_medium,
        delta_n,
        d0: q as f64 * lambda_cut / (2.0 * n_medium) * 1e-3,
        m_ph: PLANCK * n_medium * n_medium / (SPEED_OF_LIGHT * lambda_m),
        nu_cut: SPEED_OF_LIGHT / lambda_m / HZ_PER_THZ,
        temperature,
    })
}

impl CavityParams {
    /// `ħ/(4π m_ph)` in µm²·THz, the prefactor turning `k²` (rad²/µm²) into
    /// kinetic `E/h` in THz. Numerically identical to its SI value in m²/s.
    pub fn kinetic_coefficient(&self) -> f64 {
        HBAR / (4.0 * std::f64::consts::PI * self.m_ph)
    }

    /// Potential depth `V/h` (THz) produced by a structure of height `h_nm`.
    pub fn potential_of_height(&self, h_nm: f64) -> f64 {
        self.nu_cut * (h_nm * 1e-3) * self.delta_n / (self.d0 * self.n_medium)
    }

    /// Local increase of the optical path length, nm.
    pub fn optical_path_increase(&self, h_nm: f64) -> f64 {
        h_nm * self.delta_n / self.n_medium
    }

    /// Same cavity at another bath temperature.
    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        derive_cavity(self.q, self.lambda_cut, self.n_medium, self.delta_n, temperature)
    }
}

/// `k_B T / h` in THz.
pub fn thermal_frequency(cav: &CavityParams) -> f64 {
    thermal_frequency_at(cav.temperature)
}

pub(crate) fn thermal_frequency_at(temperature: f64) -> f64 {
    BOLTZMANN * temperature / PLANCK / HZ_PER_THZ
}

/// Converts polymer heights into the attractive potential `V/h` (THz).
pub fn height_to_potential(hmap: &HeightMap, cav: &CavityParams) -> Result<PotentialMap> {
    if cav.delta_n < 0.0 {
        return Err(invalid(
            "delta_n",
            "negative index contrast gives a repulsive potential, unsupported",
        ));
    }
    let d0_nm = cav.d0 * 1e3;
    let mut v = Vec::with_capacity(hmap.h.len());
    for &h in &hmap.h {
        if !(h >= 0.0) {
            return Err(invalid("height", format!("negative or non-finite height {h} nm")));
        }
        if h >= d0_nm {
            return Err(Error::Geometry(format!(
                "structure height {h} nm does not fit below the mirror distance {d0_nm:.1} nm"
            )));
        }
        v.push(cav.potential_of_height(h));
    }
    PotentialMap::new(hmap.grid, v)
}
