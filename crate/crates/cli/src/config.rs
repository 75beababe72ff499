//! Experiment configuration: a TOML file with layout, pathloss, system,
//! family and run sections. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use netmimo::channel::{Pathloss, SystemParams};
use netmimo::geometry::{ClusterTemplate, Layout, TriangleFamily, HEX_CELLS};
use netmimo::optimizer::{SchemeChoice, SchemeFamily, ScenarioTemplate};
use netmimo::scheduler::{Utility, DEFAULT_BANDWIDTH_HZ};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub layout: LayoutSection,
    pub pathloss: Option<PathlossSection>,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub family: FamilySection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DimensionKind {
    Line,
    Hex,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    pub dimension: DimensionKind,
    /// Ring size B (1-D); the hexagonal torus always has 19 cells.
    pub bs_count: Option<usize>,
    #[serde(default = "default_hex_radius")]
    pub hex_radius_km: f64,
    pub grid_density: usize,
    /// User-grid offset u0 in grid steps (2-D only).
    pub grid_offset: Option<[f64; 2]>,
}

fn default_hex_radius() -> f64 {
    1.6
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathlossSection {
    pub reference_gain: f64,
    pub exponent: f64,
    pub breakpoint: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub antennas: f64,
    pub antenna_sweep: Vec<f64>,
    pub coherence: f64,
    pub uplink_power: f64,
    /// Users-per-location factor U; when set, m*U >= C*M is enforced.
    pub users_per_location: Option<f64>,
    pub bandwidth_hz: f64,
    pub sinr_cap: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let sys = SystemParams::<f64>::default();
        Self {
            antennas: 30.0,
            antenna_sweep: Vec::new(),
            coherence: sys.coherence,
            uplink_power: sys.uplink_power,
            users_per_location: None,
            bandwidth_hz: DEFAULT_BANDWIDTH_HZ,
            sinr_cap: sys.sinr_cap,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    Single,
    Pair,
    TriangleA,
    TriangleB,
    NearestTriangle,
}

impl From<TemplateKind> for ClusterTemplate {
    fn from(t: TemplateKind) -> Self {
        match t {
            TemplateKind::Single => ClusterTemplate::Single,
            TemplateKind::Pair => ClusterTemplate::Pair,
            TemplateKind::TriangleA => ClusterTemplate::Triangle(TriangleFamily::A),
            TemplateKind::TriangleB => ClusterTemplate::Triangle(TriangleFamily::B),
            TemplateKind::NearestTriangle => ClusterTemplate::NearestTriangle,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub f: usize,
    pub cluster: TemplateKind,
    pub j: usize,
    pub q: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySection {
    pub frequency_reuse: Vec<usize>,
    pub clusters: Vec<TemplateKind>,
    pub pilot_reuse: Vec<usize>,
    pub zf_orders: Option<Vec<usize>>,
    pub max_load: Option<f64>,
    /// Explicit scheme list; replaces the grid above when present.
    pub schemes: Option<Vec<SchemeSpec>>,
}

impl Default for FamilySection {
    fn default() -> Self {
        Self {
            frequency_reuse: vec![1],
            clusters: vec![TemplateKind::Single],
            pilot_reuse: vec![1],
            zf_orders: None,
            max_load: None,
            schemes: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UtilityKind {
    ProportionalFair,
    MaxMin,
    AlphaFair,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    /// System sizes N for Monte Carlo; the first one is used by bin-rates.
    pub system_sizes: Vec<usize>,
    pub partial_trace_realizations: usize,
    pub relative_tolerance: f64,
    pub sigma_tolerance: f64,
    pub utility: UtilityKind,
    pub alpha: f64,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 0,
            system_sizes: vec![1],
            partial_trace_realizations: 100,
            relative_tolerance: 0.05,
            sigma_tolerance: 3.0,
            utility: UtilityKind::ProportionalFair,
            alpha: 2.0,
            out: PathBuf::from("out"),
        }
    }
}

/// Validated, ready-to-run form of a config.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub template: ScenarioTemplate<f64>,
    pub family: SchemeFamily<f64>,
    pub antennas: f64,
    pub antenna_sweep: Vec<f64>,
    pub bandwidth_hz: f64,
    pub utility: Utility<f64>,
    pub run: RunSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let l = &self.layout;
        let layout = match l.dimension {
            DimensionKind::Line => {
                let b = l.bs_count.ok_or_else(|| CliError::Config("layout.bs_count is required for a line layout".into()))?;
                if l.grid_offset.is_some() {
                    return Err(CliError::Config("layout.grid_offset applies to hex layouts only".into()));
                }
                Layout::line(b, l.grid_density)?
            }
            DimensionKind::Hex => {
                if let Some(b) = l.bs_count.filter(|&b| b != HEX_CELLS) {
                    return Err(CliError::Config(format!("hex layouts have {HEX_CELLS} cells, got bs_count = {b}")));
                }
                Layout::hexagonal(l.hex_radius_km, l.grid_density, l.grid_offset.unwrap_or([0.5, 0.5]))?
            }
        };
        let pathloss = match (self.pathloss, l.dimension) {
            (Some(p), _) => Pathloss::new(p.reference_gain, p.exponent, p.breakpoint)?,
            (None, DimensionKind::Line) => Pathloss::ring_default(),
            (None, DimensionKind::Hex) => Pathloss::hex_default(),
        };
        let s = &self.system;
        let system = SystemParams {
            coherence: s.coherence,
            uplink_power: s.uplink_power,
            users_per_location: s.users_per_location,
            sinr_cap: s.sinr_cap,
        };
        system.validate()?;
        for &m in std::iter::once(&s.antennas).chain(&s.antenna_sweep) {
            if !(m > 0.0 && m.is_finite()) {
                return Err(CliError::Config(format!("antenna factors must be positive, got {m}")));
            }
        }
        if !(s.bandwidth_hz > 0.0) {
            return Err(CliError::Config(format!("bandwidth must be positive, got {}", s.bandwidth_hz)));
        }
        let f = &self.family;
        let mut family = match &f.schemes {
            Some(list) => SchemeFamily::new(list.iter().map(|x| SchemeChoice::new(x.f, x.cluster.into(), x.j, x.q)).collect()),
            None => {
                let templates: Vec<ClusterTemplate> = f.clusters.iter().map(|&t| t.into()).collect();
                SchemeFamily::grid(&f.frequency_reuse, &templates, &f.pilot_reuse, f.zf_orders.as_deref())
            }
        };
        family.max_load = f.max_load;
        let r = &self.run;
        if r.system_sizes.is_empty() || r.system_sizes.contains(&0) {
            return Err(CliError::Config("run.system_sizes must list positive integers".into()));
        }
        let utility = match r.utility {
            UtilityKind::ProportionalFair => Utility::ProportionalFair,
            UtilityKind::MaxMin => Utility::MaxMin,
            UtilityKind::AlphaFair => Utility::AlphaFair(r.alpha),
        };
        Ok(Experiment {
            template: ScenarioTemplate { layout, pathloss, system },
            family,
            antennas: s.antennas,
            antenna_sweep: s.antenna_sweep.clone(),
            bandwidth_hz: s.bandwidth_hz,
            utility,
            run: r.clone(),
        })
    }
}
