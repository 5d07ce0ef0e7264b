//! Scenario files: TOML restricted to `[section]` headers with flat
//! `key = value` entries. Unknown sections and keys are rejected.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use photon_landscape::{derive_cavity, CavityParams, Error, Result, SshGeometry};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Box,
    DoubleWell,
    Ssh,
    Paraboloid,
    CustomHeightmap,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Box => "box",
            Kind::DoubleWell => "double_well",
            Kind::Ssh => "ssh",
            Kind::Paraboloid => "paraboloid",
            Kind::CustomHeightmap => "custom_heightmap",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "box" => Kind::Box,
            "double_well" => Kind::DoubleWell,
            "ssh" => Kind::Ssh,
            "paraboloid" => Kind::Paraboloid,
            "custom_heightmap" => Kind::CustomHeightmap,
            other => {
                return Err(Error::Config(format!(
                    "scenario.kind: unknown kind {other:?}, expected box, double_well, ssh, \
                     paraboloid or custom_heightmap"
                )))
            }
        })
    }

    /// Geometry keys each kind accepts.
    fn geometry_keys(self) -> &'static [&'static str] {
        match self {
            Kind::Box => &["side_um", "h_s_nm"],
            Kind::DoubleWell => &["d_um", "r_um", "h_s_nm"],
            Kind::Ssh => &["n_cells", "d_i_um", "d_o_um", "r_um", "h_s_nm"],
            Kind::Paraboloid => &["curvature_nm_per_um2", "h_max_nm"],
            Kind::CustomHeightmap => &["path"],
        }
    }

    /// Mode count solved for when `solver.k` is not given.
    fn default_k(self) -> usize {
        match self {
            Kind::Box => 120,
            Kind::DoubleWell => 4,
            Kind::Ssh => 26,
            Kind::Paraboloid => 40,
            Kind::CustomHeightmap => 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Box { side_um: f64, h_s_nm: f64 },
    DoubleWell { d_um: f64, r_um: f64, h_s_nm: f64 },
    Ssh(SshGeometry),
    Paraboloid { curvature: f64, h_max_nm: f64 },
    CustomHeightmap { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Artifacts {
    /// Gaussian σ of the printing voxel, nm; 0 disables smoothing.
    pub voxel_radius_nm: f64,
    /// Dip-in terrace height, nm.
    pub dipin_step_nm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverBlock {
    pub k: usize,
    pub tol: f64,
    pub dx_um: f64,
    pub margin_um: f64,
    pub block: usize,
    pub max_restarts: usize,
    /// Mode fields written as grid files; all frequencies are always listed.
    pub export_fields: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermoBlock {
    pub temperature_k: f64,
    /// Photon number for Bose weights; Boltzmann weights without it.
    pub photons: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectraBlock {
    pub dispersion_um_per_thz: f64,
    pub na: f64,
    pub defocus_um: Option<f64>,
    pub bin_width_thz: f64,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: Kind,
    pub seed: u64,
    /// Output directory from the file, resolved against its directory.
    pub out: Option<PathBuf>,
    pub cavity: CavityParams,
    pub geometry: Geometry,
    pub artifacts: Artifacts,
    pub solver: SolverBlock,
    pub thermo: ThermoBlock,
    pub spectra: SpectraBlock,
    /// SHA-256 of the configuration text.
    pub config_sha256: String,
    /// `section.key = value` overrides applied after parsing.
    pub overrides: Vec<(String, f64)>,
    doc: toml::Table,
    base_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    scenario: Option<RawScenario>,
    cavity: Option<RawCavity>,
    geometry: Option<toml::Table>,
    artifacts: Option<RawArtifacts>,
    solver: Option<RawSolver>,
    thermo: Option<RawThermo>,
    spectra: Option<RawSpectra>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    seed: Option<u64>,
    out: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    q: Option<u32>,
    lambda_nm: Option<f64>,
    n_medium: Option<f64>,
    delta_n: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArtifacts {
    voxel_radius_nm: Option<f64>,
    dipin_step_nm: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    k: Option<usize>,
    tol: Option<f64>,
    dx_um: Option<f64>,
    margin_um: Option<f64>,
    block: Option<usize>,
    max_restarts: Option<usize>,
    export_fields: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawThermo {
    temperature_k: Option<f64>,
    photons: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectra {
    dispersion_um_per_thz: Option<f64>,
    na: Option<f64>,
    defocus_um: Option<f64>,
    bin_width_thz: Option<f64>,
}

/// `(line, column)`, both 1-based, of byte `offset` in `text`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, col) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    Error::Parse {
        line,
        message: format!("column {col}: {}", e.message().trim()),
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("{key}: required key missing")))
}

fn positive(value: f64, key: &str) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!("{key}: must be positive, got {value}")))
    }
}

fn non_negative(value: f64, key: &str) -> Result<f64> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Config(format!("{key}: must be >= 0, got {value}")))
    }
}

/// Numeric value of `geometry.<key>`; integers are accepted for floats.
fn geo_f64(table: &toml::Table, key: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Float(f)) => Ok(Some(*f)),
        Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(other) => Err(Error::Config(format!(
            "geometry.{key}: expected a number, got {}",
            other.type_str()
        ))),
    }
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_config_str(&text, &base)
}

/// Parses configuration text; relative paths resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<Scenario> {
    let doc: toml::Table = text.parse().map_err(|e| toml_error(text, &e))?;
    for (section, value) in &doc {
        if !value.is_table() {
            return Err(Error::Config(format!(
                "{section}: top-level keys must sit inside a [section]"
            )));
        }
    }
    let hash = Sha256::digest(text.as_bytes());
    let hex = hash.iter().map(|b| format!("{b:02x}")).collect::<String>();
    // typed pass for spans on unknown keys and wrong types
    toml::from_str::<RawDoc>(text).map_err(|e| toml_error(text, &e))?;
    build(doc, base_dir.to_path_buf(), hex, Vec::new())
}

fn build(
    doc: toml::Table,
    base_dir: PathBuf,
    config_sha256: String,
    overrides: Vec<(String, f64)>,
) -> Result<Scenario> {
    let raw: RawDoc = toml::Value::Table(doc.clone())
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.message().trim().to_string()))?;
    let scen = required(raw.scenario, "[scenario]")?;
    let kind = Kind::parse(&required(scen.kind, "scenario.kind")?)?;

    let cav = required(raw.cavity, "[cavity]")?;
    let thermo = raw.thermo.unwrap_or(RawThermo {
        temperature_k: None,
        photons: None,
    });
    let temperature_k = positive(thermo.temperature_k.unwrap_or(300.0), "thermo.temperature_k")?;
    let photons = thermo
        .photons
        .map(|n| positive(n, "thermo.photons"))
        .transpose()?;
    let cavity = derive_cavity(
        required(cav.q, "cavity.q")?,
        required(cav.lambda_nm, "cavity.lambda_nm")?,
        required(cav.n_medium, "cavity.n_medium")?,
        required(cav.delta_n, "cavity.delta_n")?,
        temperature_k,
    )
    .map_err(|e| Error::Config(format!("cavity: {e}")))?;

    let geo = raw.geometry.unwrap_or_default();
    let allowed = kind.geometry_keys();
    let given: BTreeSet<&str> = geo.keys().map(String::as_str).collect();
    if let Some(bad) = given.iter().find(|k| !allowed.contains(k)) {
        return Err(Error::Config(format!(
            "geometry.{bad}: not a {} key (allowed: {})",
            kind.as_str(),
            allowed.join(", ")
        )));
    }
    let need = |key: &str| -> Result<f64> {
        required(geo_f64(&geo, key)?, &format!("geometry.{key}"))
    };
    let geometry = match kind {
        Kind::Box => Geometry::Box {
            side_um: positive(need("side_um")?, "geometry.side_um")?,
            h_s_nm: non_negative(need("h_s_nm")?, "geometry.h_s_nm")?,
        },
        Kind::DoubleWell => Geometry::DoubleWell {
            d_um: positive(need("d_um")?, "geometry.d_um")?,
            r_um: positive(need("r_um")?, "geometry.r_um")?,
            h_s_nm: non_negative(need("h_s_nm")?, "geometry.h_s_nm")?,
        },
        Kind::Ssh => {
            let cells = need("n_cells")?;
            if !(cells >= 2.0 && cells.fract() == 0.0) {
                return Err(Error::Config(format!(
                    "geometry.n_cells: need an integer >= 2, got {cells}"
                )));
            }
            let g = SshGeometry {
                n_cells: cells as usize,
                d_i: need("d_i_um")?,
                d_o: need("d_o_um")?,
                r: need("r_um")?,
                h_s: need("h_s_nm")?,
            };
            g.validate().map_err(|e| Error::Config(format!("geometry: {e}")))?;
            Geometry::Ssh(g)
        }
        Kind::Paraboloid => Geometry::Paraboloid {
            curvature: positive(need("curvature_nm_per_um2")?, "geometry.curvature_nm_per_um2")?,
            h_max_nm: positive(need("h_max_nm")?, "geometry.h_max_nm")?,
        },
        Kind::CustomHeightmap => {
            let p = match geo.get("path") {
                Some(toml::Value::String(s)) => s.clone(),
                Some(_) => return Err(Error::Config("geometry.path: expected a string".into())),
                None => return Err(Error::Config("geometry.path: required key missing".into())),
            };
            let path = base_dir.join(p);
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "geometry.path: {} does not exist",
                    path.display()
                )));
            }
            Geometry::CustomHeightmap { path }
        }
    };

    let art = raw.artifacts.unwrap_or(RawArtifacts {
        voxel_radius_nm: None,
        dipin_step_nm: None,
    });
    let artifacts = Artifacts {
        voxel_radius_nm: non_negative(art.voxel_radius_nm.unwrap_or(0.0), "artifacts.voxel_radius_nm")?,
        dipin_step_nm: art
            .dipin_step_nm
            .map(|s| positive(s, "artifacts.dipin_step_nm"))
            .transpose()?,
    };

    let s = raw.solver.unwrap_or(RawSolver {
        k: None,
        tol: None,
        dx_um: None,
        margin_um: None,
        block: None,
        max_restarts: None,
        export_fields: None,
    });
    let solver = SolverBlock {
        k: s.k.unwrap_or(kind.default_k()),
        tol: s.tol.unwrap_or(1e-8),
        dx_um: positive(s.dx_um.unwrap_or(0.05), "solver.dx_um")?,
        margin_um: non_negative(s.margin_um.unwrap_or(2.0), "solver.margin_um")?,
        block: s.block.unwrap_or(4),
        max_restarts: s.max_restarts.unwrap_or(300),
        export_fields: s.export_fields.unwrap_or(10),
    };
    if solver.k == 0 {
        return Err(Error::Config("solver.k: must be >= 1".into()));
    }
    if !(1e-10..=1e-4).contains(&solver.tol) {
        return Err(Error::Config(format!("solver.tol: {} outside [1e-10, 1e-4]", solver.tol)));
    }
    if solver.block == 0 {
        return Err(Error::Config("solver.block: must be >= 1".into()));
    }

    let sp = raw.spectra.unwrap_or(RawSpectra {
        dispersion_um_per_thz: None,
        na: None,
        defocus_um: None,
        bin_width_thz: None,
    });
    let na = sp.na.unwrap_or(0.5);
    if !(na > 0.0 && na <= 1.0) {
        return Err(Error::Config(format!("spectra.na: {na} outside (0, 1]")));
    }
    let spectra = SpectraBlock {
        dispersion_um_per_thz: positive(sp.dispersion_um_per_thz.unwrap_or(1.0), "spectra.dispersion_um_per_thz")?,
        na,
        defocus_um: sp
            .defocus_um
            .map(|d| non_negative(d, "spectra.defocus_um"))
            .transpose()?,
        bin_width_thz: positive(sp.bin_width_thz.unwrap_or(0.05), "spectra.bin_width_thz")?,
    };

    Ok(Scenario {
        kind,
        seed: scen.seed.unwrap_or(42),
        out: scen.out.map(|o| base_dir.join(o)),
        cavity,
        geometry,
        artifacts,
        solver,
        thermo: ThermoBlock {
            temperature_k,
            photons,
        },
        spectra,
        config_sha256,
        overrides,
        doc,
        base_dir,
    })
}

impl Scenario {
    /// Same scenario with the numeric entry `section.key` replaced.
    pub fn with_override(&self, param: &str, value: f64) -> Result<Scenario> {
        let (section, key) = param
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("{param}: expected section.key")))?;
        if section == "scenario" {
            return Err(Error::Config(format!("{param}: scenario entries cannot be swept")));
        }
        // `geometry.d` names `geometry.d_um`, and so on
        let unit_key;
        let key = if section == "geometry" && !self.kind.geometry_keys().contains(&key) {
            unit_key = ["_um", "_nm"]
                .iter()
                .map(|u| format!("{key}{u}"))
                .find(|k| self.kind.geometry_keys().contains(&k.as_str()))
                .unwrap_or_else(|| key.to_string());
            unit_key.as_str()
        } else {
            key
        };
        let mut doc = self.doc.clone();
        let table = doc
            .entry(section.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{section}: not a section")))?;
        let integral = matches!(
            (section, key),
            ("cavity", "q")
                | ("geometry", "n_cells")
                | ("solver", "k")
                | ("solver", "block")
                | ("solver", "max_restarts")
                | ("solver", "export_fields")
        );
        let v = if integral {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::Config(format!("{param}: needs a non-negative integer")));
            }
            toml::Value::Integer(value as i64)
        } else {
            toml::Value::Float(value)
        };
        table.insert(key.to_string(), v);
        let mut overrides = self.overrides.clone();
        overrides.push((param.to_string(), value));
        let mut s = build(doc, self.base_dir.clone(), self.config_sha256.clone(), overrides)?;
        s.seed = self.seed;
        s.out = self.out.clone();
        Ok(s)
    }
}

/// Parses `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("--values: {s:?} is not a number")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.len() {
        1 => spec.split(',').map(num).collect::<Result<Vec<f64>>>()?,
        3 => {
            let (a, b, h) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
            if !(h > 0.0) || b < a {
                return Err(Error::Config(format!("--values: bad range {spec}")));
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            // snap to 12 decimals so 0.8 + 4·0.1 reads back as 1.2
            (0..=n).map(|i| ((a + i as f64 * h) * 1e12).round() / 1e12).collect()
        }
        _ => return Err(Error::Config(format!("--values: expected start:stop:step, got {spec}"))),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("--values: no usable values in {spec}")));
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = r#"
[scenario]
kind = "box"

[cavity]
q = 10
lambda_nm = 580
n_medium = 1.44
delta_n = 0.11

[geometry]
side_um = 10
h_s_nm = 475
"#;

    fn parse(text: &str) -> Result<Scenario> {
        parse_config_str(text, Path::new("."))
    }

    #[test]
    fn minimal_box() {
        let s = parse(BOX).unwrap();
        assert_eq!(s.kind, Kind::Box);
        assert!((s.cavity.d0 - 2.0139).abs() < 1e-4);
        assert_eq!(s.seed, 42);
        assert_eq!(s.solver.dx_um, 0.05);
        assert_eq!(s.thermo.temperature_k, 300.0);
        assert_eq!(s.config_sha256.len(), 64);
    }

    #[test]
    fn missing_kind_is_semantic() {
        let text = BOX.replace("kind = \"box\"", "seed = 3");
        match parse(&text) {
            Err(Error::Config(m)) => assert!(m.contains("scenario.kind"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_key_reports_position() {
        let text = BOX.replace("q = 10", "q = 10\nq = 11");
        match parse(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.starts_with("column 1"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BOX.replace("delta_n = 0.11", "delta_n = 0.11\nfinesse = 3");
        match parse(&text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 10);
                assert!(message.contains("finesse"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let text = BOX.replace("side_um = 10", "side_um = 10\nr_um = 1");
        match parse(&text) {
            Err(Error::Config(m)) => assert!(m.starts_with("geometry.r_um"), "{m}"),
            other => panic!("{other:?}"),
        }
        assert!(parse(&format!("{BOX}\n[optics]\nna = 1\n")).is_err());
    }

    #[test]
    fn semantic_errors_name_the_key() {
        let text = BOX.replace("h_s_nm = 475", "");
        let Err(Error::Config(m)) = parse(&text) else { panic!() };
        assert!(m.contains("geometry.h_s_nm"));
        let text = BOX.replace("n_medium = 1.44", "n_medium = 0.9");
        let Err(Error::Config(m)) = parse(&text) else { panic!() };
        assert!(m.contains("n_medium"));
        let text = format!("{BOX}\n[spectra]\nna = 2\n");
        let Err(Error::Config(m)) = parse(&text) else { panic!() };
        assert!(m.contains("spectra.na"));
    }

    #[test]
    fn custom_heightmap_must_exist() {
        let text = BOX
            .replace("\"box\"", "\"custom_heightmap\"")
            .replace("side_um = 10\nh_s_nm = 475", "path = \"nowhere.hmap\"");
        let Err(Error::Config(m)) = parse(&text) else { panic!() };
        assert!(m.contains("does not exist"));
    }

    #[test]
    fn overrides_rebuild_the_scenario() {
        let s = parse(BOX).unwrap();
        let t = s.with_override("geometry.side_um", 8.0).unwrap();
        assert_eq!(t.geometry, Geometry::Box { side_um: 8.0, h_s_nm: 475.0 });
        assert_eq!(t.overrides, vec![("geometry.side_um".to_string(), 8.0)]);
        assert!(s.with_override("geometry.d_um", 1.0).is_err());
        assert!(s.with_override("cavity.q", 10.5).is_err());
        assert_eq!(s.with_override("cavity.q", 12.0).unwrap().cavity.q, 12);
        let t = s.with_override("geometry.side", 6.0).unwrap();
        assert_eq!(t.geometry, Geometry::Box { side_um: 6.0, h_s_nm: 475.0 });
    }

    #[test]
    fn value_lists() {
        let v = parse_values("0.8:2.0:0.1").unwrap();
        assert_eq!(v.len(), 13);
        assert_eq!(v[4], 1.2);
        assert_eq!(v[12], 2.0);
        assert_eq!(parse_values("1,2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_values("1:0:0.1").is_err());
        assert!(parse_values("a").is_err());
    }
}
