//! Continuum eigenmodes against independent closed forms.

use photon_landscape::eigensolver::bound_filter;
use photon_landscape::landscape::{make_box, make_paraboloid};
use photon_landscape::{
    assemble_hamiltonian, derive_cavity, height_to_potential, solve_lowest, CavityParams, Grid,
    HeightMap, ModeSet, SolverOptions,
};

fn cavity() -> CavityParams {
    derive_cavity(10, 580.0, 1.44, 0.11, 300.0).unwrap()
}

fn solve(hm: &HeightMap, cav: &CavityParams, k: usize) -> ModeSet {
    let pot = height_to_potential(hm, cav).unwrap();
    let h = assemble_hamiltonian(&pot, cav).unwrap();
    solve_lowest(&h, &SolverOptions::with_k(k)).unwrap()
}

/// Dome of curvature `a` (nm/µm²): near the bottom `V = C ρ²` with
/// `C = a · dV/dh`, a 2D oscillator with levels `2 sqrt(K C) (n + 1)`.
fn dome_levels(dx: f64) -> (Vec<f64>, f64) {
    let cav = cavity();
    let a = 30.0;
    let g = Grid::covering(13.0, 13.0, dx).unwrap();
    let hm = make_paraboloid(g, a, 600.0, (0.0, 0.0)).unwrap();
    let modes = solve(&hm, &cav, 6);
    let c = a * cav.potential_of_height(1.0);
    let quantum = 2.0 * (cav.kinetic_coefficient() * c).sqrt();
    (modes.freqs, quantum)
}

#[test]
fn dome_bottom_is_a_harmonic_oscillator() {
    let (freqs, quantum) = dome_levels(0.05);
    let shells = [1.0, 2.0, 2.0, 3.0, 3.0, 3.0];
    for (f, n) in freqs.iter().zip(shells) {
        assert!((f / (n * quantum) - 1.0).abs() < 2e-3, "{f} vs {}", n * quantum);
    }
}

#[test]
fn discretization_error_is_second_order() {
    let errs: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&dx| {
            let (f, q) = dome_levels(dx);
            (f[0] - q).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.5..4.5).contains(&ratio), "{errs:?}");
    }
}

/// Levels `K k²` of a 1D well of width `w` whose walls sit `u` above the
/// floor, from the even/odd matching conditions.
fn finite_well_1d(w: f64, u: f64, kin: f64) -> Vec<f64> {
    let a = 0.5 * w;
    let k_max = (u / kin).sqrt();
    let mismatch = |k: f64, even: bool| {
        let kappa = (u / kin - k * k).max(0.0).sqrt();
        let (s, c) = (k * a).sin_cos();
        if even { k * s - kappa * c } else { -k * c - kappa * s }
    };
    let mut levels = Vec::new();
    let steps = 200_000;
    for even in [true, false] {
        let mut prev = 1e-12;
        for i in 1..=steps {
            let k = k_max * i as f64 / steps as f64;
            let (fa, fb) = (mismatch(prev, even), mismatch(k, even));
            if fa.signum() != fb.signum() && fa.is_finite() && fb.is_finite() {
                let (mut lo, mut hi) = (prev, k);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mismatch(lo, even).signum() == mismatch(mid, even).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                levels.push(kin * (0.5 * (lo + hi)).powi(2));
            }
            prev = k;
        }
    }
    levels.sort_by(f64::total_cmp);
    levels
}

fn separable(w: f64, u: f64, kin: f64, count: usize) -> Vec<f64> {
    let e = finite_well_1d(w, u, kin);
    let mut sums: Vec<f64> = e.iter().flat_map(|a| e.iter().map(move |b| a + b)).collect();
    sums.sort_by(f64::total_cmp);
    sums.truncate(count);
    sums
}

#[test]
fn box_levels_sit_between_separable_bounds() {
    // V0 (1 - 1_x 1_y) lies between V0/2 (2 - 1_x - 1_y) and V0 (2 - 1_x - 1_y),
    // so min-max brackets every level by the two separable problems
    let cav = cavity();
    let side = 4.0;
    let g = Grid::covering(side + 4.0, side + 4.0, 0.05).unwrap();
    let hm = make_box(g, side, 475.0, (0.0, 0.0), 2.0).unwrap();
    let modes = bound_filter(&solve(&hm, &cav, 12));
    let depth = modes.depth;
    let kin = cav.kinetic_coefficient();
    let upper = separable(side, depth, kin, modes.len());
    let lower = separable(side, 0.5 * depth, kin, modes.len());
    assert!(modes.len() >= 6);
    for i in 0..modes.len().min(lower.len()).min(upper.len()) {
        // half a cell of edge placement on each side
        let slack = 1.0 + 2.0 * 0.05 / side;
        assert!(modes.freqs[i] <= upper[i] * slack, "level {i}: {} > {}", modes.freqs[i], upper[i]);
        assert!(modes.freqs[i] >= lower[i] / slack, "level {i}: {} < {}", modes.freqs[i], lower[i]);
    }
}

#[test]
fn box_degeneracies_follow_the_square_symmetry() {
    let cav = cavity();
    let g = Grid::covering(8.0, 8.0, 0.05).unwrap();
    let hm = make_box(g, 4.0, 475.0, (0.0, 0.0), 2.0).unwrap();
    let modes = solve(&hm, &cav, 6);
    // (1,2)/(2,1) form a symmetry-protected pair; (1,3)±(3,1) are not
    // protected and the non-separable walls split them slightly
    assert!((modes.freqs[1] - modes.freqs[2]).abs() < 1e-7 * modes.freqs[1]);
    assert!(modes.freqs[2] < modes.freqs[3] * 0.99);
    let split = (modes.freqs[5] - modes.freqs[4]) / modes.freqs[4];
    assert!(split > 1e-6 && split < 0.05, "split {split}");
    for i in 0..modes.len() {
        for j in 0..i {
            assert!(modes.overlap(i, j).abs() < 1e-8);
        }
    }
}
