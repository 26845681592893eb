//! Scenario files: a TOML schema mapping onto `SimulationConfig` plus the
//! medium description. Unknown keys are rejected; every effective value,
//! defaults included, is echoed back for the run report.

use crate::driver::SimulationConfig;
use crate::error::{Error, Result};
use crate::krylov::KrylovConfig;
use crate::laguerre::LaguerreBasis;
use crate::medium::{AcousticMedium, ElasticMedium, Grid2D, RasterModel};
use crate::operators::{SourceKind, SourceSpec};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Physics {
    Acoustic,
    Elastic,
}

pub enum MediumConfig {
    Acoustic(AcousticMedium),
    Elastic(ElasticMedium),
}

pub struct Scenario {
    pub physics: Physics,
    pub config: SimulationConfig,
    pub medium: MediumConfig,
    /// raw medium kind string: homogeneous, layered, or raster
    pub medium_kind: String,
    /// normalized effective configuration, defaults included
    pub echo: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    physics: String,
    domain: DomainSec,
    basis: BasisSec,
    source: SourceSec,
    medium: MediumSec,
    receivers: Vec<[f64; 2]>,
    #[serde(default)]
    snapshot_times: Vec<f64>,
    output: OutputSec,
    #[serde(default)]
    solver: SolverSec,
    workers: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSec {
    l1: f64,
    l2: f64,
    n_r: usize,
    n_z: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BasisSec {
    alpha: u32,
    h: f64,
    n: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSec {
    kind: String,
    r: f64,
    z: f64,
    f0: f64,
    t0: f64,
    gamma: f64,
    #[serde(default = "one")]
    amplitude: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MediumSec {
    kind: String,
    kappa: Option<f64>,
    rho: Option<f64>,
    lambda: Option<f64>,
    mu: Option<f64>,
    vp: Option<f64>,
    vs: Option<f64>,
    /// acoustic rows `[z_max, kappa, rho]`; elastic rows `[z_max, lambda, mu, rho]`
    layers: Option<Vec<Vec<f64>>>,
    path: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSec {
    #[serde(default)]
    t_start: f64,
    t_end: f64,
    dt: f64,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolverSec {
    tol: Option<f64>,
    max_iters: Option<usize>,
    restart_k: Option<usize>,
}

fn one() -> f64 {
    1.0
}

fn scn(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

fn need<T: Copy>(v: Option<T>, key: &str, kind: &str) -> Result<T> {
    v.ok_or_else(|| scn(format!("medium kind {kind:?} requires key {key:?}")))
}

impl MediumSec {
    fn build(&self, physics: Physics, base_dir: &Path) -> Result<MediumConfig> {
        match (physics, self.kind.as_str()) {
            (Physics::Acoustic, "homogeneous") => Ok(MediumConfig::Acoustic(
                AcousticMedium::homogeneous(
                    need(self.kappa, "kappa", "homogeneous")?,
                    need(self.rho, "rho", "homogeneous")?,
                ),
            )),
            (Physics::Acoustic, "layered") => {
                let rows = self.layers.as_ref().ok_or_else(|| {
                    scn("medium kind \"layered\" requires key \"layers\"")
                })?;
                let layers = rows
                    .iter()
                    .map(|row| match row.as_slice() {
                        &[z_max, kappa, rho] => Ok((z_max, kappa, rho)),
                        _ => Err(scn("acoustic layer rows must be [z_max, kappa, rho]")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MediumConfig::Acoustic(AcousticMedium::layered(layers)))
            }
            (Physics::Acoustic, "raster") => {
                let raster = self.load_raster(base_dir)?;
                Ok(MediumConfig::Acoustic(AcousticMedium {
                    kappa: raster.field("kappa")?,
                    rho: raster.field("rho")?,
                }))
            }
            (Physics::Elastic, "homogeneous") => {
                let rho = need(self.rho, "rho", "homogeneous")?;
                let medium = match (self.lambda, self.mu, self.vp, self.vs) {
                    (Some(lambda), Some(mu), None, None) => {
                        ElasticMedium::homogeneous(lambda, mu, rho)
                    }
                    (None, None, Some(vp), Some(vs)) => ElasticMedium::from_speeds(vp, vs, rho)?,
                    _ => {
                        return Err(scn(
                            "elastic homogeneous medium needs either {lambda, mu} or {vp, vs}",
                        ))
                    }
                };
                Ok(MediumConfig::Elastic(medium))
            }
            (Physics::Elastic, "layered") => {
                let rows = self.layers.as_ref().ok_or_else(|| {
                    scn("medium kind \"layered\" requires key \"layers\"")
                })?;
                let layers = rows
                    .iter()
                    .map(|row| match row.as_slice() {
                        &[z_max, lambda, mu, rho] => Ok((z_max, lambda, mu, rho)),
                        _ => Err(scn("elastic layer rows must be [z_max, lambda, mu, rho]")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(MediumConfig::Elastic(ElasticMedium::layered(layers)))
            }
            (Physics::Elastic, "raster") => {
                let raster = self.load_raster(base_dir)?;
                Ok(MediumConfig::Elastic(ElasticMedium {
                    lambda: raster.field("lambda")?,
                    mu: raster.field("mu")?,
                    rho: raster.field("rho")?,
                }))
            }
            (_, other) => Err(scn(format!(
                "unknown medium kind {other:?}; expected homogeneous, layered, or raster"
            ))),
        }
    }

    fn load_raster(&self, base_dir: &Path) -> Result<Arc<RasterModel>> {
        let rel = self
            .path
            .as_ref()
            .ok_or_else(|| scn("medium kind \"raster\" requires key \"path\""))?;
        let full = base_dir.join(rel);
        Ok(Arc::new(RasterModel::load(&full)?))
    }
}

/// Parse and validate a scenario file; raster paths resolve relative to the
/// scenario's directory.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| scn(format!("cannot read scenario {path:?}: {e}")))?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| scn(format!("scenario parse error: {e}")))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    scenario_from_file(file, base_dir)
}

fn scenario_from_file(file: ScenarioFile, base_dir: &Path) -> Result<Scenario> {
    let physics = match file.physics.as_str() {
        "acoustic" => Physics::Acoustic,
        "elastic" => Physics::Elastic,
        other => return Err(scn(format!("unknown physics {other:?}"))),
    };
    let grid = Grid2D::build(file.domain.l1, file.domain.l2, file.domain.n_r, file.domain.n_z)?;
    let basis = LaguerreBasis::new(file.basis.alpha, file.basis.h, file.basis.n)?;
    let kind = match file.source.kind.as_str() {
        "monopole" => SourceKind::Monopole,
        "center_of_pressure" => SourceKind::CenterOfPressure,
        other => return Err(scn(format!("unknown source kind {other:?}"))),
    };
    let source = SourceSpec {
        kind,
        r0: file.source.r,
        z0: file.source.z,
        f0: file.source.f0,
        t0: file.source.t0,
        gamma: file.source.gamma,
    };
    let defaults = KrylovConfig::default();
    let solver = KrylovConfig {
        tol: file.solver.tol.unwrap_or(defaults.tol),
        max_iters: file.solver.max_iters.unwrap_or(defaults.max_iters),
        restart_k: file.solver.restart_k.unwrap_or(defaults.restart_k),
    };
    let medium = file.medium.build(physics, base_dir)?;
    let config = SimulationConfig {
        grid,
        basis,
        source,
        amplitude: file.source.amplitude,
        receivers: file.receivers.iter().map(|&[r, z]| (r, z)).collect(),
        snapshot_times: file.snapshot_times.clone(),
        t_start: file.output.t_start,
        t_end: file.output.t_end,
        dt: file.output.dt,
        solver,
        workers: file.workers.unwrap_or(1),
    };
    config.validate().map_err(|e| scn(e.to_string()))?;
    let echo = render_echo(physics, &config, &file);
    Ok(Scenario { physics, config, medium, medium_kind: file.medium.kind.clone(), echo })
}

fn render_echo(physics: Physics, config: &SimulationConfig, file: &ScenarioFile) -> String {
    let mut s = String::new();
    s.push_str("# effective configuration\n");
    s.push_str(&format!(
        "physics {}\n",
        match physics {
            Physics::Acoustic => "acoustic",
            Physics::Elastic => "elastic",
        }
    ));
    let g = &config.grid;
    s.push_str(&format!("domain.l1 {}\ndomain.l2 {}\n", g.l1, g.l2));
    s.push_str(&format!("domain.n_r {}\ndomain.n_z {}\n", g.n_r, g.n_z));
    s.push_str(&format!("domain.h_r {}\ndomain.h_z {}\n", g.h_r, g.h_z));
    s.push_str(&format!(
        "basis.alpha {}\nbasis.h {}\nbasis.n {}\n",
        config.basis.alpha(),
        config.basis.h(),
        config.basis.n()
    ));
    s.push_str(&format!("source.kind {}\n", file.source.kind));
    s.push_str(&format!(
        "source.r {}\nsource.z {}\nsource.f0 {}\nsource.t0 {}\nsource.gamma {}\n",
        config.source.r0, config.source.z0, config.source.f0, config.source.t0, config.source.gamma
    ));
    s.push_str(&format!("source.amplitude {}\n", config.amplitude));
    s.push_str(&format!("medium.kind {}\n", file.medium.kind));
    for (idx, &(r, z)) in config.receivers.iter().enumerate() {
        s.push_str(&format!("receiver.{idx} {r} {z}\n"));
    }
    for (idx, t) in config.snapshot_times.iter().enumerate() {
        s.push_str(&format!("snapshot.{idx} {t}\n"));
    }
    s.push_str(&format!(
        "output.t_start {}\noutput.t_end {}\noutput.dt {}\n",
        config.t_start, config.t_end, config.dt
    ));
    s.push_str(&format!(
        "solver.tol {}\nsolver.max_iters {}\nsolver.restart_k {}\n",
        config.solver.tol, config.solver.max_iters, config.solver.restart_k
    ));
    s.push_str(&format!("workers {}\n", config.workers));
    s
}
