//! TOML simulation configuration: parsing, defaults, validation.
//!
//! The schema is documented in docs/config.md. Unknown keys are rejected
//! everywhere so that typos cannot silently fall back to defaults.

use crate::error::{AppError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tfsolve_core::mesh::Mesh;
use tfsolve_core::sim::{
    BoundaryCondition, BoundarySchedule, Material, MaterialTable, PropertyTable,
    ThermalSolveOptions, ElasticSolveOptions, BoundaryFluxSign, KrylovKind, TimeController,
};

/// A property that is either constant or a piecewise-linear table. Material
/// tables run over temperature, boundary tables over time.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarOrTable {
    Constant(f64),
    Table { table: Vec<[f64; 2]> },
}

impl ScalarOrTable {
    fn build(&self, what: &str) -> Result<PropertyTable> {
        match self {
            ScalarOrTable::Constant(v) => Ok(PropertyTable::constant(*v)),
            ScalarOrTable::Table { table } => {
                let samples: Vec<(f64, f64)> = table.iter().map(|s| (s[0], s[1])).collect();
                PropertyTable::new(&samples)
                    .map_err(|e| AppError::config(format!("{what}: {e}")))
            }
        }
    }
}

fn default_degree() -> usize {
    1
}
fn default_theta() -> f64 {
    1.0
}
fn default_dt0() -> f64 {
    1.0
}
fn default_max_temperature_change() -> f64 {
    10.0
}
fn default_epsilon_target() -> f64 {
    0.9
}
fn default_t_end() -> f64 {
    1.0
}
fn default_max_retries() -> usize {
    20
}
fn default_t0() -> f64 {
    293.0
}
fn default_steady_guess() -> f64 {
    400.0
}
fn default_newton_rtol() -> f64 {
    tfsolve_core::sim::thermal::NEWTON_RTOL
}
fn default_max_newton() -> usize {
    25
}
fn default_flux_sign() -> String {
    "cooling".into()
}
fn default_krylov() -> String {
    "cg".into()
}
fn default_krylov_rtol() -> f64 {
    tfsolve_core::sim::thermal::INNER_KRYLOV_RTOL
}
fn default_max_krylov() -> usize {
    2000
}
fn default_elastic_rtol() -> f64 {
    tfsolve_core::sim::elastic::ELASTIC_RTOL
}
fn default_max_elastic_krylov() -> usize {
    1000
}
fn default_true() -> bool {
    true
}
fn default_thermal_strength() -> f64 {
    tfsolve_core::amg::CLASSICAL_STRENGTH_THRESHOLD
}
fn default_coarse_size() -> usize {
    tfsolve_core::amg::DEFAULT_COARSE_SIZE
}
fn default_body_force() -> [f64; 3] {
    [0.0; 3]
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_output_every() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Time integration parameter in (0, 1]; 1 is backward Euler.
    pub theta: f64,
    /// Initial step size, seconds.
    pub dt0: f64,
    /// Per-step cap on the nodal temperature change, kelvin.
    pub max_temperature_change: f64,
    /// Fraction of the cap the controller steers toward.
    pub epsilon_target: f64,
    /// Simulated end time, seconds.
    pub t_end: f64,
    /// Step halvings allowed before a step fails.
    pub max_retries: usize,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            theta: default_theta(),
            dt0: default_dt0(),
            max_temperature_change: default_max_temperature_change(),
            epsilon_target: default_epsilon_target(),
            t_end: default_t_end(),
            max_retries: default_max_retries(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalConfig {
    /// Initial temperature for transients, kelvin.
    pub t0: f64,
    /// Initial Newton iterate for steady solves, kelvin.
    pub steady_guess: f64,
    pub newton_rtol: f64,
    pub max_newton: usize,
    /// "cooling" or "heating" Robin sign convention.
    pub flux_sign: String,
}

impl Default for ThermalConfig {
    fn default() -> Self {
        ThermalConfig {
            t0: default_t0(),
            steady_guess: default_steady_guess(),
            newton_rtol: default_newton_rtol(),
            max_newton: default_max_newton(),
            flux_sign: default_flux_sign(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// "cg" or "bicgstab" for the thermal Newton systems.
    pub krylov: String,
    pub krylov_rtol: f64,
    pub max_krylov: usize,
    pub elastic_rtol: f64,
    pub max_elastic_krylov: usize,
    /// Include rotational rigid modes in the elastic near-nullspace.
    pub use_rotations: bool,
    /// Classical strength threshold for the thermal hierarchy.
    pub thermal_strength: f64,
    /// Aggregation strength threshold; omitted means degree-dependent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elastic_strength: Option<f64>,
    /// Coarsening stops at or below this many unknowns.
    pub coarse_size: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            krylov: default_krylov(),
            krylov_rtol: default_krylov_rtol(),
            max_krylov: default_max_krylov(),
            elastic_rtol: default_elastic_rtol(),
            max_elastic_krylov: default_max_elastic_krylov(),
            use_rotations: default_true(),
            thermal_strength: default_thermal_strength(),
            elastic_strength: None,
            coarse_size: default_coarse_size(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticConfig {
    /// Constant body force density, N/m^3.
    pub body_force: [f64; 3],
}

impl Default for ElasticConfig {
    fn default() -> Self {
        ElasticConfig { body_force: default_body_force() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    /// Write fields every this many accepted steps; 0 disables field output.
    pub every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: default_output_dir(), every: default_output_every() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialConfig {
    /// Cell region the material applies to.
    pub region: i32,
    /// Thermal expansion coefficient over temperature, 1/K.
    pub alpha: ScalarOrTable,
    /// Young's modulus over temperature, Pa.
    pub young: ScalarOrTable,
    /// Thermal conductivity over temperature, W/(m K).
    pub kappa: ScalarOrTable,
    /// Specific heat over temperature, J/(kg K).
    pub c_v: ScalarOrTable,
    /// Density, kg/m^3.
    pub rho: f64,
    pub poisson: f64,
    /// Stress-free reference temperature, kelvin.
    pub t_ref: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    /// Facet tag the condition applies to.
    pub tag: i32,
    /// "robin", "pressure", or "displacement".
    pub kind: String,
    /// Robin: heat transfer coefficient over time, W/(m^2 K).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<ScalarOrTable>,
    /// Robin: ambient temperature over time, kelvin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_bc: Option<ScalarOrTable>,
    /// Pressure over time, Pa; positive pushes into the surface.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<ScalarOrTable>,
    /// Prescribed displacement components over time, meters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<[ScalarOrTable; 3]>,
}

/// Raw deserialized file; kept around so the effective configuration can be
/// echoed back with all defaults filled in.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Path to the tfmesh file, relative to the config file's directory.
    pub mesh: PathBuf,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub thermal: ThermalConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub elastic: ElasticConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, rename = "material")]
    pub materials: Vec<MaterialConfig>,
    #[serde(default, rename = "boundary")]
    pub boundaries: Vec<BoundaryConfig>,
}

/// Validated configuration with core-facing objects built.
#[derive(Debug)]
pub struct SimulationConfig {
    pub raw: ConfigFile,
    /// Mesh path resolved against the config file location.
    pub mesh_path: PathBuf,
    pub materials: MaterialTable,
    pub schedule: BoundarySchedule,
}

impl SimulationConfig {
    pub fn flux_sign(&self) -> BoundaryFluxSign {
        match self.raw.thermal.flux_sign.as_str() {
            "heating" => BoundaryFluxSign::Heating,
            _ => BoundaryFluxSign::Cooling,
        }
    }

    pub fn krylov_kind(&self) -> KrylovKind {
        match self.raw.solver.krylov.as_str() {
            "bicgstab" => KrylovKind::Bicgstab,
            _ => KrylovKind::Cg,
        }
    }

    pub fn thermal_options(&self) -> ThermalSolveOptions {
        let s = &self.raw.solver;
        let mut opts = ThermalSolveOptions {
            newton_rtol: self.raw.thermal.newton_rtol,
            max_newton: self.raw.thermal.max_newton,
            krylov_rtol: s.krylov_rtol,
            max_krylov: s.max_krylov,
            solver: self.krylov_kind(),
            ..ThermalSolveOptions::default()
        };
        opts.amg.strength_threshold = s.thermal_strength;
        opts.amg.coarse_size_threshold = s.coarse_size;
        opts
    }

    pub fn elastic_options(&self) -> ElasticSolveOptions {
        let s = &self.raw.solver;
        ElasticSolveOptions {
            krylov_rtol: s.elastic_rtol,
            max_krylov: s.max_elastic_krylov,
            use_rotations: s.use_rotations,
            strength_threshold: s.elastic_strength,
            ..ElasticSolveOptions::default()
        }
    }

    pub fn controller(&self) -> Result<TimeController> {
        let c = &self.raw.controller;
        let mut controller = TimeController::new(
            c.theta,
            c.dt0,
            c.max_temperature_change,
            c.epsilon_target,
            c.t_end,
        )?;
        controller.max_retries = c.max_retries;
        Ok(controller)
    }

    /// Effective configuration with every default filled in, as TOML.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(&self.raw).unwrap_or_else(|e| format!("# echo failed: {e}"))
    }

    /// Checks constraints that need the mesh: scheduled tags must exist and
    /// every cell region must have a material.
    pub fn validate_against_mesh(&self, mesh: &Mesh) -> Result<()> {
        let tags: std::collections::BTreeSet<i32> =
            mesh.facet_tags().values().copied().collect();
        for b in &self.raw.boundaries {
            if !tags.contains(&b.tag) {
                return Err(AppError::config(format!(
                    "boundary schedule references tag {} but the mesh only carries tags {:?}",
                    b.tag,
                    tags.iter().collect::<Vec<_>>()
                )));
            }
        }
        let mut regions: Vec<i32> = mesh.cell_regions().to_vec();
        regions.sort_unstable();
        regions.dedup();
        for region in regions {
            if self.materials.get(region).is_err() {
                return Err(AppError::config(format!(
                    "mesh region {region} has no material"
                )));
            }
        }
        Ok(())
    }
}

fn build_material(mc: &MaterialConfig) -> Result<Material> {
    let label = format!("material for region {}", mc.region);
    Material::new(
        mc.alpha.build(&format!("{label}: alpha"))?,
        mc.young.build(&format!("{label}: young"))?,
        mc.kappa.build(&format!("{label}: kappa"))?,
        mc.c_v.build(&format!("{label}: c_v"))?,
        mc.rho,
        mc.poisson,
        mc.t_ref,
    )
    .map_err(|e| AppError::config(format!("{label}: {e}")))
}

fn build_boundary(bc: &BoundaryConfig) -> Result<BoundaryCondition> {
    let label = format!("boundary for tag {}", bc.tag);
    let want = |field: &Option<ScalarOrTable>, name: &str| -> Result<PropertyTable> {
        field
            .as_ref()
            .ok_or_else(|| {
                AppError::config(format!("{label}: kind {:?} needs field {name}", bc.kind))
            })?
            .build(&format!("{label}: {name}"))
    };
    let forbid = |field_set: bool, name: &str| -> Result<()> {
        if field_set {
            return Err(AppError::config(format!(
                "{label}: field {name} does not apply to kind {:?}",
                bc.kind
            )));
        }
        Ok(())
    };
    match bc.kind.as_str() {
        "robin" => {
            forbid(bc.p.is_some(), "p")?;
            forbid(bc.u.is_some(), "u")?;
            Ok(BoundaryCondition::RobinThermal {
                beta: want(&bc.beta, "beta")?,
                t_bc: want(&bc.t_bc, "t_bc")?,
            })
        }
        "pressure" => {
            forbid(bc.beta.is_some(), "beta")?;
            forbid(bc.t_bc.is_some(), "t_bc")?;
            forbid(bc.u.is_some(), "u")?;
            Ok(BoundaryCondition::Pressure { p: want(&bc.p, "p")? })
        }
        "displacement" => {
            forbid(bc.beta.is_some(), "beta")?;
            forbid(bc.t_bc.is_some(), "t_bc")?;
            forbid(bc.p.is_some(), "p")?;
            let u = bc.u.as_ref().ok_or_else(|| {
                AppError::config(format!("{label}: kind \"displacement\" needs field u"))
            })?;
            Ok(BoundaryCondition::Displacement {
                u: [
                    u[0].build(&format!("{label}: u[0]"))?,
                    u[1].build(&format!("{label}: u[1]"))?,
                    u[2].build(&format!("{label}: u[2]"))?,
                ],
            })
        }
        other => Err(AppError::config(format!(
            "{label}: unknown kind {other:?}, expected robin, pressure, or displacement"
        ))),
    }
}

pub fn parse_config(text: &str, config_dir: &Path) -> Result<SimulationConfig> {
    let raw: ConfigFile =
        toml::from_str(text).map_err(|e| AppError::config(format!("config: {e}")))?;

    if raw.degree != 1 && raw.degree != 2 {
        return Err(AppError::config(format!(
            "degree must be 1 or 2, got {}",
            raw.degree
        )));
    }
    let c = &raw.controller;
    if !(c.theta > 0.0 && c.theta <= 1.0) {
        return Err(AppError::config(format!(
            "controller.theta must lie in (0, 1], got {}",
            c.theta
        )));
    }
    for (value, name) in [
        (c.dt0, "controller.dt0"),
        (c.max_temperature_change, "controller.max_temperature_change"),
        (c.t_end, "controller.t_end"),
        (raw.thermal.newton_rtol, "thermal.newton_rtol"),
        (raw.solver.krylov_rtol, "solver.krylov_rtol"),
        (raw.solver.elastic_rtol, "solver.elastic_rtol"),
    ] {
        if !(value > 0.0) || !value.is_finite() {
            return Err(AppError::config(format!("{name} must be positive, got {value}")));
        }
    }
    if !(c.epsilon_target > 0.0 && c.epsilon_target <= 1.0) {
        return Err(AppError::config(format!(
            "controller.epsilon_target must lie in (0, 1], got {}",
            c.epsilon_target
        )));
    }
    match raw.thermal.flux_sign.as_str() {
        "cooling" | "heating" => {}
        other => {
            return Err(AppError::config(format!(
                "thermal.flux_sign must be \"cooling\" or \"heating\", got {other:?}"
            )))
        }
    }
    match raw.solver.krylov.as_str() {
        "cg" | "bicgstab" => {}
        other => {
            return Err(AppError::config(format!(
                "solver.krylov must be \"cg\" or \"bicgstab\", got {other:?}"
            )))
        }
    }
    if raw.materials.is_empty() {
        return Err(AppError::config("at least one [[material]] block is required"));
    }

    let mut materials = MaterialTable::new();
    let mut seen = std::collections::BTreeSet::new();
    for mc in &raw.materials {
        if !seen.insert(mc.region) {
            return Err(AppError::config(format!(
                "region {} has more than one material",
                mc.region
            )));
        }
        materials.insert(mc.region, build_material(mc)?);
    }
    let mut schedule = BoundarySchedule::new();
    let mut seen_tags = std::collections::BTreeSet::new();
    for bc in &raw.boundaries {
        if !seen_tags.insert(bc.tag) {
            return Err(AppError::config(format!(
                "tag {} has more than one boundary condition",
                bc.tag
            )));
        }
        schedule.insert(bc.tag, build_boundary(bc)?);
    }

    let mesh_path = if raw.mesh.is_absolute() {
        raw.mesh.clone()
    } else {
        config_dir.join(&raw.mesh)
    };
    Ok(SimulationConfig { raw, mesh_path, materials, schedule })
}

pub fn read_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        AppError::config(format!("cannot read config {}: {e}", path.display()))
    })?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let config = parse_config(&text, dir)?;
    if !config.mesh_path.exists() {
        return Err(AppError::config(format!(
            "mesh file {} does not exist",
            config.mesh_path.display()
        )));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
mesh = "cube.tfmesh"

[[material]]
region = 0
alpha = 1.2e-5
young = 2.0e11
kappa = 45.0
c_v = 470.0
rho = 7800.0
poisson = 0.3
t_ref = 293.0
"#;

    #[test]
    fn defaults_are_applied_and_echoed() {
        let config = parse_config(MINIMAL, Path::new("/work")).unwrap();
        assert_eq!(config.raw.controller.theta, 1.0);
        assert_eq!(config.raw.thermal.newton_rtol, 1e-9);
        assert_eq!(config.raw.solver.elastic_rtol, 1e-6);
        assert_eq!(config.raw.controller.max_temperature_change, 10.0);
        assert_eq!(config.raw.thermal.t0, 293.0);
        assert_eq!(config.raw.thermal.steady_guess, 400.0);
        assert_eq!(config.mesh_path, Path::new("/work/cube.tfmesh"));

        // The echo must make every default visible; parsing it back must
        // reproduce the same effective configuration.
        let echo = config.echo();
        for key in [
            "theta",
            "newton_rtol",
            "elastic_rtol",
            "max_temperature_change",
            "steady_guess",
            "flux_sign",
            "coarse_size",
        ] {
            assert!(echo.contains(key), "echo misses {key:?}:\n{echo}");
        }
        let back = parse_config(&echo, Path::new("/work")).unwrap();
        assert_eq!(back.raw.thermal.newton_rtol, 1e-9);
        assert_eq!(back.raw.solver.elastic_rtol, 1e-6);
        assert_eq!(back.raw.thermal.t0, 293.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("[[material]]", "typo_key = 3\n[[material]]");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("typo_key"), "{err}");
    }

    #[test]
    fn theta_out_of_range_is_rejected() {
        let text = format!("{MINIMAL}\n[controller]\ntheta = 1.5\n");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn unknown_schedule_tag_is_caught_against_the_mesh() {
        let text = format!(
            "{MINIMAL}\n[[boundary]]\ntag = 7\nkind = \"robin\"\nbeta = 10.0\nt_bc = 350.0\n"
        );
        let config = parse_config(&text, Path::new(".")).unwrap();
        let mesh = tfsolve_core::mesh::build_box_mesh([0.0; 3], [1.0; 3], 1, 1, 1).unwrap();
        let err = config.validate_against_mesh(&mesh).unwrap_err();
        assert!(err.to_string().contains("tag 7"), "{err}");
    }

    #[test]
    fn boundary_kinds_check_their_fields() {
        let text = format!(
            "{MINIMAL}\n[[boundary]]\ntag = 1\nkind = \"pressure\"\nbeta = 10.0\np = 1e5\n"
        );
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");

        let text = format!("{MINIMAL}\n[[boundary]]\ntag = 1\nkind = \"squeeze\"\n");
        let err = parse_config(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("squeeze"), "{err}");
    }

    #[test]
    fn tables_are_parsed_for_materials_and_boundaries() {
        let text = r#"
mesh = "cube.tfmesh"
degree = 2

[[material]]
region = 0
alpha = { table = [[293.0, 1.2e-5], [800.0, 1.5e-5]] }
young = 2.0e11
kappa = { table = [[293.0, 45.0], [800.0, 38.0]] }
c_v = 470.0
rho = 7800.0
poisson = 0.3
t_ref = 293.0

[[boundary]]
tag = 1
kind = "robin"
beta = { table = [[0.0, 10.0], [60.0, 2000.0]] }
t_bc = 350.0
"#;
        let config = parse_config(text, Path::new(".")).unwrap();
        let (_, _, kappa, _) = config.materials.eval(0, 546.5).unwrap();
        assert!((kappa - 41.5).abs() < 1e-12);
        let (beta, t_bc) = config.schedule.eval_robin(1, 30.0).unwrap();
        assert!((beta - 1005.0).abs() < 1e-12);
        assert_eq!(t_bc, 350.0);
    }
}
