//! Bose-Einstein statistics of the photon gas over a list of transverse modes.
//!
//! All frequencies are `E/h` in THz; only differences matter, so the offset of
//! a [`ModeSet`] (potential minimum) drops out. Functions taking a `ModeSet`
//! use every mode in it: bound-filter first.

use std::fmt::Write as _;
use std::path::Path;

use crate::cavity::thermal_frequency_at;
use crate::eigensolver::{ModeSet, DEGENERACY_TOL};
use crate::error::{invalid, Error, Result};

/// Smallest `ν_ground - µ` the bisection explores, THz.
const MIN_DETUNING: f64 = 1e-12;
/// Largest `ν_ground - µ` in units of `k_B T / h`.
const MAX_DETUNING_THERMAL: f64 = 100.0;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// Chemical potential `µ/h`, THz, in the same frame as the frequencies.
    pub mu: f64,
    pub occupations: Vec<f64>,
    pub total_n: f64,
    /// `n_ground / total_n`.
    pub condensate_fraction: f64,
}

/// Mean photon number `1/(exp(h(ν-µ)/k_B T) - 1)`.
pub fn be_occupation(nu: f64, mu: f64, temperature: f64) -> Result<f64> {
    if !(mu < nu) {
        return Err(Error::Domain(format!(
            "chemical potential {mu} THz must lie below the mode frequency {nu} THz"
        )));
    }
    check_temperature(temperature)?;
    Ok(1.0 / ((nu - mu) / thermal_frequency_at(temperature)).exp_m1())
}

fn check_temperature(temperature: f64) -> Result<()> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(invalid("temperature", format!("{temperature} K must be positive")));
    }
    Ok(())
}

/// Total photon number of degenerate levels `(ν, g)` at `ν_ground - µ = x`.
fn level_sum(levels: &[(f64, f64)], ground: f64, x: f64, nu_th: f64) -> f64 {
    levels
        .iter()
        .map(|&(nu, g)| g / ((nu - ground + x) / nu_th).exp_m1())
        .sum()
}

/// Bisects `ln(ν_ground - µ)` until the levels hold `total_n` photons.
fn solve_mu_levels(levels: &[(f64, f64)], total_n: f64, temperature: f64) -> Result<f64> {
    if !(total_n > 0.0 && total_n.is_finite()) {
        return Err(invalid("total_n", format!("{total_n} must be positive")));
    }
    check_temperature(temperature)?;
    let nu_th = thermal_frequency_at(temperature);
    let ground = levels.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (MIN_DETUNING.ln(), (MAX_DETUNING_THERMAL * nu_th).ln());
    let count = |lx: f64| level_sum(levels, ground, lx.exp(), nu_th);
    if !(count(lo) >= total_n && count(hi) <= total_n) {
        return Err(Error::Solver {
            message: format!("chemical potential for N = {total_n} not bracketed"),
            residual: f64::NAN,
        });
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count(mid) > total_n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the bracket end with the smaller mismatch
    let lx = if (count(lo) - total_n).abs() <= (count(hi) - total_n).abs() { lo } else { hi };
    Ok(ground - lx.exp())
}

fn check_modes(freqs: &[f64]) -> Result<()> {
    if freqs.len() < 2 {
        return Err(invalid("modes", format!("need >= 2 bound modes, got {}", freqs.len())));
    }
    if freqs.iter().any(|f| !f.is_finite()) {
        return Err(invalid("modes", "non-finite mode frequency"));
    }
    Ok(())
}

/// Chemical potential and occupations of individual modes `freqs` holding
/// `total_n` photons.
pub fn solve_mu_freqs(freqs: &[f64], total_n: f64, temperature: f64) -> Result<Population> {
    check_modes(freqs)?;
    let levels: Vec<(f64, f64)> = freqs.iter().map(|&f| (f, 1.0)).collect();
    let mu = solve_mu_levels(&levels, total_n, temperature)?;
    let occupations = freqs
        .iter()
        .map(|&nu| be_occupation(nu, mu, temperature))
        .collect::<Result<Vec<f64>>>()?;
    let ground = (0..freqs.len())
        .min_by(|&a, &b| freqs[a].total_cmp(&freqs[b]))
        .unwrap_or(0);
    Ok(Population {
        mu,
        condensate_fraction: occupations[ground] / total_n,
        occupations,
        total_n,
    })
}

pub fn solve_mu(modes: &ModeSet, total_n: f64, temperature: f64) -> Result<Population> {
    solve_mu_freqs(&modes.freqs, total_n, temperature)
}

/// Degenerate level: frequency and number of modes sharing it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level {
    pub nu: f64,
    pub degeneracy: usize,
}

/// Groups ascending frequencies closer than `tol` into levels.
pub fn bin_levels(freqs: &[f64], tol: f64) -> Vec<Level> {
    let mut sorted = freqs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<Level> = Vec::new();
    let mut first = f64::NAN;
    for nu in sorted {
        match out.last_mut() {
            Some(last) if nu - first <= tol => {
                // running mean of the group
                let g = last.degeneracy as f64;
                last.nu = (last.nu * g + nu) / (g + 1.0);
                last.degeneracy += 1;
            }
            _ => {
                first = nu;
                out.push(Level { nu, degeneracy: 1 });
            }
        }
    }
    out
}

/// Degeneracy-binned populations: modes within [`DEGENERACY_TOL`] share one
/// level. `occupations` holds the photon number per level (all `g` modes).
pub fn solve_mu_binned(
    modes: &ModeSet,
    total_n: f64,
    temperature: f64,
) -> Result<(Vec<Level>, Population)> {
    check_modes(&modes.freqs)?;
    let levels = bin_levels(&modes.freqs, DEGENERACY_TOL);
    let weighted: Vec<(f64, f64)> = levels.iter().map(|l| (l.nu, l.degeneracy as f64)).collect();
    let mu = solve_mu_levels(&weighted, total_n, temperature)?;
    let occupations = levels
        .iter()
        .map(|l| Ok(l.degeneracy as f64 * be_occupation(l.nu, mu, temperature)?))
        .collect::<Result<Vec<f64>>>()?;
    let pop = Population {
        mu,
        condensate_fraction: occupations[0] / total_n,
        occupations,
        total_n,
    };
    Ok((levels, pop))
}

/// Photons the excited modes hold when `µ` reaches the ground frequency.
pub fn critical_number_freqs(freqs: &[f64], temperature: f64) -> Result<f64> {
    check_modes(freqs)?;
    check_temperature(temperature)?;
    let ground = (0..freqs.len())
        .min_by(|&a, &b| freqs[a].total_cmp(&freqs[b]))
        .unwrap_or(0);
    let mut sum = 0.0;
    for (i, &nu) in freqs.iter().enumerate() {
        if i != ground {
            sum += be_occupation(nu, freqs[ground], temperature)?;
        }
    }
    Ok(sum)
}

pub fn critical_number(modes: &ModeSet, temperature: f64) -> Result<f64> {
    critical_number_freqs(&modes.freqs, temperature)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightMode {
    /// `exp(-h(ν - ν_ground)/k_B T)`.
    Boltzmann,
    /// Bose-Einstein occupations at this photon number.
    Bose { total_n: f64 },
}

/// Per-mode spectral weights, scaled so the largest is 1.
pub fn thermal_weights_freqs(freqs: &[f64], mode: WeightMode, temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    let mut w = match mode {
        WeightMode::Boltzmann => {
            if freqs.is_empty() {
                return Err(invalid("modes", "no modes to weight"));
            }
            let ground = freqs.iter().copied().fold(f64::INFINITY, f64::min);
            let nu_th = thermal_frequency_at(temperature);
            freqs.iter().map(|&nu| (-(nu - ground) / nu_th).exp()).collect::<Vec<f64>>()
        }
        WeightMode::Bose { total_n } => solve_mu_freqs(freqs, total_n, temperature)?.occupations,
    };
    let top = w.iter().copied().fold(0.0, f64::max);
    w.iter_mut().for_each(|x| *x /= top);
    Ok(w)
}

pub fn thermal_weights(modes: &ModeSet, mode: WeightMode, temperature: f64) -> Result<Vec<f64>> {
    thermal_weights_freqs(&modes.freqs, mode, temperature)
}

/// `index,nu_thz,occupation` rows.
pub fn format_population(freqs: &[f64], pop: &Population) -> String {
    let mut s = String::from("index,nu_thz,occupation\n");
    for (i, (nu, n)) in freqs.iter().zip(&pop.occupations).enumerate() {
        let _ = writeln!(s, "{i},{nu:.9e},{n:.9e}");
    }
    s
}

pub fn write_population(path: impl AsRef<Path>, freqs: &[f64], pop: &Population) -> Result<()> {
    std::fs::write(path, format_population(freqs, pop))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const T: f64 = 300.0;

    fn nu_th() -> f64 {
        thermal_frequency_at(T)
    }

    /// Infinite-well box levels `c (n² + m² - 2)`, lowest `count`.
    fn box_levels(c: f64, count: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (1..40)
            .flat_map(|n| (1..40).map(move |m| c * ((n * n + m * m - 2) as f64)))
            .collect();
        v.sort_by(f64::total_cmp);
        v.truncate(count);
        v
    }

    #[test]
    fn occupation_closed_forms() {
        let th = nu_th();
        assert_relative_eq!(be_occupation(th * 2f64.ln(), 0.0, T).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            be_occupation(10.0 + th, 10.0, T).unwrap(),
            1.0 / (std::f64::consts::E - 1.0),
            max_relative = 1e-12
        );
        assert!((be_occupation(6.25, 0.0, T).unwrap() - 0.582).abs() < 1e-3);
        let dnu = 5.0 * th;
        let ratio = be_occupation(dnu, 0.0, T).unwrap() / (-dnu / th).exp();
        assert!((ratio - 1.0).abs() < 0.01);
        assert!(be_occupation(1.0, 1.0, T).is_err());
        assert!(be_occupation(1.0, 2.0, T).is_err());
    }

    #[test]
    fn single_mode_inverts_analytically() {
        // a far-away second mode keeps the precondition without holding photons
        for n in [0.5, 1.0, 55.0, 1e4] {
            let pop = solve_mu_freqs(&[3.0, 3.0 + 1e4], n, T).unwrap();
            let exact = 3.0 - nu_th() * (1.0 + 1.0 / n).ln();
            assert_relative_eq!(pop.mu, exact, max_relative = 1e-12);
            assert_relative_eq!(pop.condensate_fraction, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn photon_number_is_met() {
        let freqs = box_levels(0.105, 200);
        for n in [1.0, 55.0, 144.0, 469.0, 1e4] {
            let pop = solve_mu_freqs(&freqs, n, T).unwrap();
            let sum: f64 = pop.occupations.iter().sum();
            assert!(((sum - n) / n).abs() < 1e-8, "N={n}: sum {sum}");
            assert!(pop.mu < freqs[0]);
            assert!(pop.occupations.iter().all(|&o| o >= 0.0));
        }
    }

    #[test]
    fn mu_and_condensate_fraction_grow_with_n() {
        let freqs = box_levels(0.105, 120);
        let pops: Vec<Population> = [55.0, 144.0, 469.0]
            .iter()
            .map(|&n| solve_mu_freqs(&freqs, n, T).unwrap())
            .collect();
        assert!(pops[0].mu < pops[1].mu && pops[1].mu < pops[2].mu);
        assert!(pops[0].condensate_fraction < pops[1].condensate_fraction);
        assert!(pops[1].condensate_fraction < pops[2].condensate_fraction);
    }

    #[test]
    fn wider_gaps_empty_excited_modes() {
        let freqs = box_levels(0.105, 80);
        let wide: Vec<f64> = freqs.iter().map(|&f| freqs[0] + 2.0 * (f - freqs[0])).collect();
        let a = solve_mu_freqs(&freqs, 144.0, T).unwrap();
        let b = solve_mu_freqs(&wide, 144.0, T).unwrap();
        for i in 1..freqs.len() {
            assert!(b.occupations[i] < a.occupations[i], "mode {i}");
        }
    }

    #[test]
    fn critical_number_forms() {
        let dnu = 0.7;
        let nc = critical_number_freqs(&[1.0, 1.0 + dnu], T).unwrap();
        assert_relative_eq!(nc, 1.0 / (dnu / nu_th()).exp_m1(), max_relative = 1e-12);
        let cold = critical_number_freqs(&box_levels(0.105, 50), 1e-3).unwrap();
        assert!(cold < 1e-100);
        // hot box gas: N_c grows with temperature
        let levels = box_levels(0.105, 120);
        assert!(
            critical_number_freqs(&levels, 600.0).unwrap()
                > critical_number_freqs(&levels, T).unwrap()
        );
    }

    #[test]
    fn boltzmann_weights() {
        let th = nu_th();
        let w = thermal_weights_freqs(&[2.0, 2.0 + 6.25, 2.0 + th], WeightMode::Boltzmann, T).unwrap();
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.368).abs() < 1e-3);
        assert_relative_eq!(w[2], (-1.0f64).exp(), max_relative = 1e-12);
        let b = thermal_weights_freqs(&[2.0, 3.0], WeightMode::Bose { total_n: 10.0 }, T).unwrap();
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn bose_tail_exceeds_boltzmann() {
        // at a common µ every Bose occupation lies above exp(-h(ν-µ)/k_B T)
        let freqs = box_levels(0.105, 60);
        let pop = solve_mu_freqs(&freqs, 144.0, T).unwrap();
        for (nu, n) in freqs.iter().zip(&pop.occupations) {
            assert!(*n >= (-(nu - pop.mu) / nu_th()).exp());
        }
    }

    #[test]
    fn binning_counts_degeneracies() {
        let levels = bin_levels(&[0.0, 0.1, 0.1 + 1e-6, 0.2, 0.2, 0.2], 1e-4);
        assert_eq!(
            levels.iter().map(|l| l.degeneracy).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn degenerate_copies_share_photons() {
        // a g-fold level behaves as g identical modes
        let freqs = [0.0, 0.3, 0.3, 0.5];
        let exact = solve_mu_freqs(&freqs, 20.0, T).unwrap();
        let levels: Vec<(f64, f64)> = vec![(0.0, 1.0), (0.3, 2.0), (0.5, 1.0)];
        let mu = solve_mu_levels(&levels, 20.0, T).unwrap();
        assert_relative_eq!(mu, exact.mu, max_relative = 1e-12);
        let per_mode = be_occupation(0.3, mu, T).unwrap();
        assert_relative_eq!(exact.occupations[1], per_mode, max_relative = 1e-10);
        assert_relative_eq!(exact.occupations[2], per_mode, max_relative = 1e-10);
    }

    #[test]
    fn population_rows() {
        let pop = solve_mu_freqs(&[0.0, 1.0], 2.0, T).unwrap();
        let csv = format_population(&[0.0, 1.0], &pop);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,nu_thz,occupation");
        assert!(lines[1].starts_with("0,0.000000000e0,"));
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(solve_mu_freqs(&[1.0], 10.0, T).is_err());
        assert!(solve_mu_freqs(&[1.0, 2.0], 0.0, T).is_err());
        assert!(solve_mu_freqs(&[1.0, 2.0], 1.0, -1.0).is_err());
        assert!(critical_number_freqs(&[1.0], T).is_err());
    }

    proptest! {
        #[test]
        fn sum_matches_for_random_spectra(
            gaps in prop::collection::vec(0.001f64..3.0, 1..60),
            log_n in -1.0f64..5.0,
        ) {
            let mut freqs = vec![0.0];
            for g in gaps {
                let last = *freqs.last().unwrap();
                freqs.push(last + g);
            }
            let n = 10f64.powf(log_n);
            let pop = solve_mu_freqs(&freqs, n, T).unwrap();
            let sum: f64 = pop.occupations.iter().sum();
            prop_assert!(((sum - n) / n).abs() < 1e-8);
            prop_assert!(pop.mu < freqs[0]);
        }

        #[test]
        fn condensate_fraction_is_monotone(n1 in 1.0f64..1e4, factor in 1.0f64..10.0) {
            let freqs = box_levels(0.105, 60);
            let a = solve_mu_freqs(&freqs, n1, T).unwrap();
            let b = solve_mu_freqs(&freqs, n1 * factor, T).unwrap();
            prop_assert!(b.condensate_fraction + 1e-12 >= a.condensate_fraction);
            prop_assert!(b.mu >= a.mu);
        }
    }
}
