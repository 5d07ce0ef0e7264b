//! Scenario execution: landscape, modes, populations and spectra written to
//! an output directory with a hashed manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use photon_landscape::eigensolver::{bound_filter, bound_flags, write_modeset};
use photon_landscape::landscape::{
    apply_voxel_smoothing, make_box, make_paraboloid, make_pillars, make_ssh_chain,
    quantize_dipin, read_heightmap, write_grid_field, write_heightmap,
};
use photon_landscape::lattice::{
    analyze_continuum_ssh, extract_j, find_kink, ssh_spectrum, winding_number,
    write_coupling_curve, write_ssh_spectrum, CouplingCurve, CouplingSource,
};
use photon_landscape::spectra::{
    dispersion_curve, momentum_spectrum, na_momentum_limit, position_spectrum,
    write_dispersion_curve, write_spectrum, FreqBins,
};
use photon_landscape::thermo::{critical_number, solve_mu, thermal_weights, write_population, WeightMode};
use photon_landscape::{
    assemble_hamiltonian, height_to_potential, solve_lowest, Error, Grid, HeightMap, ModeSet,
    Population, Result, SolverOptions,
};
use rayon::prelude::*;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{Geometry, Kind, Scenario};

pub const MANIFEST: &str = "manifest.json";
const DISPERSION_SAMPLES: usize = 101;

/// Process exit code for an error: 2 configuration, 3 numerics, 4 I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Validation { .. } | Error::Geometry(_) => 2,
        Error::Solver { .. } | Error::Domain(_) | Error::Extraction(_) => 3,
        Error::Io(_) => 4,
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub out: PathBuf,
    pub results: Map<String, Value>,
    /// Output files relative to `out`, with their SHA-256.
    pub files: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn partial_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_else(|| "out".into());
    name.push(".partial");
    out.with_file_name(name)
}

/// Clears `dir` when it is empty or holds a previous run; refuses otherwise.
fn clear_previous(dir: &Path) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    let empty = std::fs::read_dir(dir)?.next().is_none();
    if empty || dir.join(MANIFEST).is_file() {
        std::fs::remove_dir_all(dir)?;
        Ok(())
    } else {
        Err(Error::Config(format!(
            "output directory {} exists and is not a previous run",
            dir.display()
        )))
    }
}

fn grid_for(s: &Scenario) -> Result<Grid> {
    let m = s.solver.margin_um;
    let dx = s.solver.dx_um;
    match &s.geometry {
        Geometry::Box { side_um, .. } => Grid::covering(side_um + 2.0 * m, side_um + 2.0 * m, dx),
        Geometry::DoubleWell { d_um, r_um, .. } => {
            Grid::covering(d_um + 2.0 * r_um + 2.0 * m, 2.0 * r_um + 2.0 * m, dx)
        }
        Geometry::Ssh(g) => Grid::covering(g.chain_length() + 2.0 * g.r + 2.0 * m, 2.0 * g.r + 2.0 * m, dx),
        Geometry::Paraboloid { curvature, h_max_nm } => {
            let w = 2.0 * (h_max_nm / curvature).sqrt() + 2.0 * m;
            Grid::covering(w, w, dx)
        }
        Geometry::CustomHeightmap { .. } => unreachable!("custom maps carry their own grid"),
    }
}

/// Height map of the scenario after fabrication artifacts: dip-in
/// quantization first, then voxel smoothing.
pub fn build_heightmap(s: &Scenario) -> Result<HeightMap> {
    let m = s.solver.margin_um;
    let hm = match &s.geometry {
        Geometry::Box { side_um, h_s_nm } => make_box(grid_for(s)?, *side_um, *h_s_nm, (0.0, 0.0), m)?,
        Geometry::DoubleWell { d_um, r_um, h_s_nm } => make_pillars(
            grid_for(s)?,
            &[(-0.5 * d_um, 0.0), (0.5 * d_um, 0.0)],
            *r_um,
            *h_s_nm,
            m,
        )?,
        Geometry::Ssh(g) => make_ssh_chain(grid_for(s)?, g, m)?,
        Geometry::Paraboloid { curvature, h_max_nm } => {
            make_paraboloid(grid_for(s)?, *curvature, *h_max_nm, (0.0, 0.0))?
        }
        Geometry::CustomHeightmap { path } => read_heightmap(path)?,
    };
    let hm = match s.artifacts.dipin_step_nm {
        Some(step) => quantize_dipin(&hm, step)?,
        None => hm,
    };
    apply_voxel_smoothing(&hm, s.artifacts.voxel_radius_nm)
}

/// Solves the scenario's eigenmodes; returns the height map with them.
pub fn solve_scenario(s: &Scenario) -> Result<(HeightMap, ModeSet)> {
    let hm = build_heightmap(s)?;
    let pot = height_to_potential(&hm, &s.cavity)?;
    let h = assemble_hamiltonian(&pot, &s.cavity)?;
    let opts = SolverOptions {
        k: s.solver.k,
        tol: s.solver.tol,
        seed: s.seed,
        block: s.solver.block,
        max_restarts: s.solver.max_restarts,
        ..SolverOptions::default()
    };
    Ok((hm, solve_lowest(&h, &opts)?))
}

struct Outputs {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.root.join(name);
        self.files.push(p.clone());
        p
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Runs `s` into `out`. Files are written under `<out>.partial`, renamed to
/// `out` on success and left in place on failure.
pub fn run_scenario(s: &Scenario, out: &Path) -> Result<Report> {
    let partial = partial_path(out);
    clear_previous(out)?;
    if partial.exists() {
        std::fs::remove_dir_all(&partial)?;
    }
    std::fs::create_dir_all(&partial)?;
    let (results, files, timings) = run_into(s, &partial)?;

    let mut listed = Vec::with_capacity(files.len());
    for f in &files {
        let rel = f.strip_prefix(&partial).unwrap_or(f).to_string_lossy().replace('\\', "/");
        listed.push((rel, sha256_hex(&std::fs::read(f)?)));
    }
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": s.kind.as_str(),
        "seed": s.seed,
        "config_sha256": s.config_sha256,
        "overrides": s.overrides.iter().map(|(k, v)| json!({"param": k, "value": v})).collect::<Vec<_>>(),
        "results": results,
        "timings_s": timings,
        "files": listed.iter().map(|(p, h)| json!({"path": p, "sha256": h})).collect::<Vec<_>>(),
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(partial.join(MANIFEST), text + "\n")?;
    std::fs::rename(&partial, out)?;
    Ok(Report {
        out: out.to_path_buf(),
        results,
        files: listed,
    })
}

/// Results, files written and stage timings.
type RunOutput = (Map<String, Value>, Vec<PathBuf>, Map<String, Value>);

fn run_into(s: &Scenario, dir: &Path) -> Result<RunOutput> {
    let mut out = Outputs {
        root: dir.to_path_buf(),
        files: Vec::new(),
    };
    let mut results = Map::new();
    let mut timings = Map::new();
    let mut clock = Instant::now();
    let mut lap = |timings: &mut Map<String, Value>, name: &str| {
        timings.insert(name.to_string(), json!(clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let (hm, modes) = solve_scenario(s)?;
    lap(&mut timings, "solve");
    write_heightmap(&hm, out.path("heightmap.hmap"))?;
    let pot = height_to_potential(&hm, &s.cavity)?;
    write_grid_field(out.path("potential.hmap"), &pot.grid, &pot.v)?;
    for p in write_modeset(&modes, dir.join("modes"), s.solver.export_fields)? {
        out.files.push(p);
    }
    let bound = bound_filter(&modes);
    results.insert("grid_nx".into(), json!(hm.grid.nx));
    results.insert("grid_ny".into(), json!(hm.grid.ny));
    results.insert("dx_um".into(), json!(hm.grid.dx));
    results.insert("depth_thz".into(), finite(modes.depth));
    results.insert("n_modes".into(), json!(modes.len()));
    results.insert("n_bound".into(), json!(bound.len()));
    results.insert("max_residual".into(), json!(modes.residuals.iter().copied().fold(0.0, f64::max)));
    if bound.is_empty() {
        return Err(Error::Extraction("no bound modes among the solved ones".into()));
    }
    results.insert("ground_thz".into(), json!(bound.freqs[0]));
    lap(&mut timings, "export_modes");

    kind_results(s, &modes, &mut results, &mut out)?;
    lap(&mut timings, "analysis");

    let temperature = s.thermo.temperature_k;
    results.insert("critical_number".into(), json!(critical_number(&bound, temperature)?));
    let weight_mode = match s.thermo.photons {
        Some(n) => {
            let pop = solve_mu(&bound, n, temperature)?;
            results.insert("mu_thz".into(), json!(pop.mu));
            results.insert("condensate_fraction".into(), json!(pop.condensate_fraction));
            write_population(out.path("population.csv"), &bound.freqs, &pop)?;
            WeightMode::Bose { total_n: n }
        }
        None => {
            // without a photon number the populations are relative Boltzmann weights
            let w = thermal_weights(&bound, WeightMode::Boltzmann, temperature)?;
            let total: f64 = w.iter().sum();
            let pop = Population {
                mu: f64::NEG_INFINITY,
                condensate_fraction: w[0] / total,
                total_n: total,
                occupations: w,
            };
            write_population(out.path("population.csv"), &bound.freqs, &pop)?;
            WeightMode::Boltzmann
        }
    };
    results.insert(
        "weights".into(),
        json!(if s.thermo.photons.is_some() { "bose" } else { "boltzmann" }),
    );
    lap(&mut timings, "thermo");

    let weights = thermal_weights(&bound, weight_mode, temperature)?;
    let bins = FreqBins {
        width: s.spectra.bin_width_thz,
        range: None,
    };
    let pos = position_spectrum(
        &bound,
        &weights,
        s.spectra.dispersion_um_per_thz,
        bins,
        s.spectra.defocus_um,
    )?;
    write_spectrum(out.path("spectrum_position.csv"), &pos)?;
    let mom = momentum_spectrum(&bound, &weights, &s.cavity, s.spectra.na, bins)?;
    write_spectrum(out.path("spectrum_momentum.csv"), &mom)?;
    let k_max = na_momentum_limit(&s.cavity, s.spectra.na);
    let ks: Vec<f64> = (0..DISPERSION_SAMPLES)
        .map(|i| k_max * i as f64 / (DISPERSION_SAMPLES - 1) as f64)
        .collect();
    write_dispersion_curve(out.path("dispersion.csv"), &dispersion_curve(&s.cavity, &ks)?)?;
    if let Geometry::Box { side_um, .. } = s.geometry {
        results.insert(
            "position_confined_fraction".into(),
            json!(pos.confined_fraction(0.0, 0.5 * side_um)),
        );
    }
    lap(&mut timings, "spectra");
    Ok((results, out.files, timings))
}

fn kind_results(
    s: &Scenario,
    modes: &ModeSet,
    results: &mut Map<String, Value>,
    out: &mut Outputs,
) -> Result<()> {
    match &s.geometry {
        Geometry::Box { side_um, .. } => {
            // 2D Weyl law: N(ν) = A ν / (4π K)
            let weyl = side_um * side_um * modes.depth / (4.0 * std::f64::consts::PI * modes.kinetic);
            results.insert("weyl_estimate".into(), json!(weyl));
        }
        Geometry::DoubleWell { d_um, .. } => {
            let x = extract_j(modes)?;
            results.insert("d_um".into(), json!(d_um));
            results.insert("j_thz".into(), json!(x.j));
            results.insert("nu_symmetric_thz".into(), json!(x.nu_s));
            results.insert("nu_antisymmetric_thz".into(), json!(x.nu_a));
            results.insert("warnings".into(), json!(x.warnings));
        }
        Geometry::Ssh(geo) => {
            let c = analyze_continuum_ssh(modes, geo)?;
            let flags = bound_flags(modes);
            let mut csv = String::from("index,nu_thz,midgap,edge_fraction\n");
            for (k, (&i, &nu)) in c.indices.iter().zip(&c.freqs).enumerate() {
                debug_assert!(flags[i]);
                csv.push_str(&format!(
                    "{i},{nu:.9e},{},{:.6e}\n",
                    u8::from(c.midgap.contains(&k)),
                    c.edge_fractions[k]
                ));
            }
            std::fs::write(out.path("ssh_modes.csv"), csv)?;
            let model = &c.calibration.model;
            std::fs::write(out.path("tb_model.txt"), model.to_key_value())?;
            write_ssh_spectrum(out.path("tb_spectrum.csv"), &ssh_spectrum(model)?)?;
            let (j_i, j_o) = model.ssh_couplings()?;
            results.insert("gap_thz".into(), json!(c.gap));
            results.insert("midgap_count".into(), json!(c.midgap.len()));
            results.insert(
                "midgap_edge_fractions".into(),
                json!(c.midgap.iter().map(|&k| c.edge_fractions[k]).collect::<Vec<_>>()),
            );
            results.insert("tb_e0_thz".into(), json!(model.e0));
            results.insert("tb_j_i_thz".into(), json!(j_i));
            results.insert("tb_j_o_thz".into(), json!(j_o));
            results.insert("tb_rms_thz".into(), json!(c.calibration.rms));
            results.insert("tb_warnings".into(), json!(c.calibration.warnings));
            results.insert("winding_number".into(), json!(winding_number(j_i, j_o).ok()));
        }
        Geometry::Paraboloid { .. } | Geometry::CustomHeightmap { .. } => {}
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub out: PathBuf,
    pub points: Vec<(f64, std::result::Result<Report, String>)>,
    /// `J(d)` of the successful points when sweeping a double-well distance.
    pub coupling: Option<CouplingCurve>,
}

/// Runs one scenario per value of `param` into `out/point_NNN`, then writes
/// `sweep.csv` and, for double-well distance sweeps, `coupling_curve.csv`.
/// Failed points are recorded and the sweep continues.
pub fn run_sweep(s: &Scenario, param: &str, values: &[f64], out: &Path) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(Error::Config("sweep: no values given".into()));
    }
    let variants = values
        .iter()
        .map(|&v| s.with_override(param, v))
        .collect::<Result<Vec<Scenario>>>()?;
    clear_previous(out)?;
    std::fs::create_dir_all(out)?;
    let runs: Vec<std::result::Result<Report, Error>> = variants
        .par_iter()
        .enumerate()
        .map(|(i, v)| run_scenario(v, &out.join(format!("point_{i:03}"))))
        .collect();
    if runs.iter().all(|r| r.is_err()) {
        if let Some(Err(e)) = runs.into_iter().next() {
            return Err(e);
        }
        unreachable!("values are nonempty");
    }

    let mut csv = String::from("index,value,status,n_bound,ground_thz,j_thz\n");
    let mut points = Vec::with_capacity(values.len());
    let dist_sweep = s.kind == Kind::DoubleWell && matches!(param, "geometry.d" | "geometry.d_um");
    let mut curve = CouplingCurve {
        distances: Vec::new(),
        couplings: Vec::new(),
        source: CouplingSource::Simulated,
    };
    for (i, (&v, r)) in values.iter().zip(runs).enumerate() {
        match r {
            Ok(rep) => {
                let get = |k: &str| rep.results.get(k).and_then(Value::as_f64);
                let cell = |x: Option<f64>| x.map_or(String::new(), |x| format!("{x:.9e}"));
                csv.push_str(&format!(
                    "{i},{v},ok,{},{},{}\n",
                    rep.results.get("n_bound").and_then(Value::as_u64).unwrap_or(0),
                    cell(get("ground_thz")),
                    cell(get("j_thz")),
                ));
                if let (true, Some(j)) = (dist_sweep, get("j_thz")) {
                    curve.distances.push(v);
                    curve.couplings.push(j);
                }
                points.push((v, Ok(rep)));
            }
            Err(e) => {
                csv.push_str(&format!("{i},{v},error,,,\n"));
                points.push((v, Err(e.to_string())));
            }
        }
    }
    let mut files = vec![out.join("sweep.csv")];
    std::fs::write(&files[0], csv)?;
    let mut summary = json!({
        "param": param,
        "values": values,
        "failures": points.iter().filter_map(|(v, r)| r.as_ref().err().map(|e| json!({"value": v, "error": e}))).collect::<Vec<_>>(),
    });
    let coupling = if dist_sweep {
        let path = out.join("coupling_curve.csv");
        write_coupling_curve(&path, &curve)?;
        files.push(path);
        summary["monotone"] = json!(curve.is_strictly_decreasing());
        summary["kink"] = match find_kink(&curve) {
            Some(k) => json!({"d_um": k.d, "slope_left": k.slope_left, "slope_right": k.slope_right,
                              "sse": k.sse, "sse_line": k.sse_line}),
            None => Value::Null,
        };
        Some(curve)
    } else {
        None
    };
    let mut listed = Vec::new();
    for f in &files {
        let name = f.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        listed.push(json!({"path": name, "sha256": sha256_hex(&std::fs::read(f)?)}));
    }
    for (i, (_, r)) in points.iter().enumerate() {
        if r.is_ok() {
            let name = format!("point_{i:03}/{MANIFEST}");
            listed.push(json!({"path": name, "sha256": sha256_hex(&std::fs::read(out.join(&name))?)}));
        }
    }
    let manifest = json!({
        "program": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "kind": s.kind.as_str(),
        "seed": s.seed,
        "config_sha256": s.config_sha256,
        "sweep": summary,
        "files": listed,
    });
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.into()))?;
    std::fs::write(out.join(MANIFEST), text + "\n")?;
    Ok(SweepReport {
        out: out.to_path_buf(),
        points,
        coupling,
    })
}
