//! Run configuration: defaults table, TOML file, and flag overrides (flags win).

use std::f64::consts::FRAC_PI_2;
use std::path::{Path, PathBuf};

use capstab_core::delaunay::DEFAULT_SAMPLES;
use capstab_core::ode::DEFAULT_TOLERANCE;
use capstab_core::stability::{
    StabilityTolerances, EPS_STAB, MAX_MODE, TRANSLATION_SHAPE_TOL, TRANSLATION_TOL,
};
use capstab_core::sweep::{neck_grid, Family, FamilyParams, ParamRange, SweepSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Convergence threshold of the eigen solver. Fixed; echoed for reference.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Every numerical default in one place; echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Defaults {
    pub grid: usize,
    pub integrator_tol: f64,
    pub eigen_tol: f64,
    pub eps_stab: f64,
    pub translation_tol: f64,
    pub translation_shape_tol: f64,
    pub max_mode: usize,
    pub refine: bool,
    pub first_variation_delta: f64,
}

impl Defaults {
    pub fn table() -> Self {
        Self {
            grid: DEFAULT_SAMPLES,
            integrator_tol: DEFAULT_TOLERANCE,
            eigen_tol: EIGEN_TOL,
            eps_stab: EPS_STAB,
            translation_tol: TRANSLATION_TOL,
            translation_shape_tol: TRANSLATION_SHAPE_TOL,
            max_mode: MAX_MODE,
            refine: true,
            first_variation_delta: 1e-4,
        }
    }
}

/// Config file layout. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub schema_version: Option<u32>,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub numerics: NumericsSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub n: Option<usize>,
    pub family: Option<Family>,
    pub theta: Option<f64>,
    pub theta_upper: Option<f64>,
    pub height: Option<f64>,
    pub radius: Option<f64>,
    pub mean_curvature: Option<f64>,
    pub half_periods: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: Option<ParamRange>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsSection {
    pub grid: Option<usize>,
    pub integrator_tol: Option<f64>,
    pub eps_stab: Option<f64>,
    pub refine: Option<bool>,
    pub first_variation_delta: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

/// Command-line overrides.
#[derive(Debug, Default, Clone, clap::Args)]
pub struct Overrides {
    /// Config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Profile samples M.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Output format; repeat for several.
    #[arg(long, global = true, value_enum)]
    pub format: Vec<Format>,
    /// Surface dimension n.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Contact angle on the lower wall.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Contact angle on the upper wall.
    #[arg(long, global = true)]
    pub theta_upper: Option<f64>,
    /// Slab height (the cylinder height when no --param is given).
    #[arg(long, global = true)]
    pub height: Option<f64>,
    #[arg(long, global = true, value_parser = parse_family)]
    pub family: Option<Family>,
    /// Parameter value or range `min:max:count`.
    #[arg(long, global = true, value_parser = parse_range)]
    pub param: Option<ParamRange>,
}

fn parse_family(s: &str) -> Result<Family, String> {
    s.parse()
        .map_err(|e: capstab_core::CapstabError| e.to_string())
}

fn parse_range(s: &str) -> Result<ParamRange, String> {
    ParamRange::parse(s).map_err(|e| e.to_string())
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub schema_version: u32,
    pub family: Family,
    pub n: usize,
    pub theta: f64,
    pub theta_upper: Option<f64>,
    pub height: Option<f64>,
    pub radius: f64,
    pub mean_curvature: f64,
    pub half_periods: usize,
    pub param: ParamRange,
    pub grid: usize,
    pub integrator_tol: f64,
    pub eps_stab: f64,
    pub refine: bool,
    pub first_variation_delta: f64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn load(ov: &Overrides) -> Result<Self, CliError> {
        let file = match &ov.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        Self::resolve(file, ov)
    }

    pub fn resolve(file: FileConfig, ov: &Overrides) -> Result<Self, CliError> {
        let d = Defaults::table();
        if let Some(v) = file.schema_version {
            if v != SCHEMA_VERSION {
                return Err(CliError::Config(format!(
                    "config schema_version {v}, this build reads {SCHEMA_VERSION}"
                )));
            }
        }
        let p = file.problem;
        let family = ov.family.or(p.family).unwrap_or(Family::Cap);
        let theta = ov.theta.or(p.theta).unwrap_or(FRAC_PI_2);
        let height = ov.height.or(p.height);
        let param = match ov.param.or(file.sweep.param) {
            Some(r) => r,
            None => default_param(family, theta, height),
        };
        let formats = if !ov.format.is_empty() {
            ov.format.clone()
        } else {
            file.output.formats.unwrap_or_else(|| vec![Format::Json])
        };
        let cfg = RunConfig {
            schema_version: SCHEMA_VERSION,
            family,
            n: ov.n.or(p.n).unwrap_or(2),
            theta,
            theta_upper: ov.theta_upper.or(p.theta_upper),
            height,
            radius: p.radius.unwrap_or(1.0),
            mean_curvature: p.mean_curvature.unwrap_or(1.0),
            half_periods: p.half_periods.unwrap_or(1),
            param,
            grid: ov.grid.or(file.numerics.grid).unwrap_or(d.grid),
            integrator_tol: file.numerics.integrator_tol.unwrap_or(d.integrator_tol),
            eps_stab: file.numerics.eps_stab.unwrap_or(d.eps_stab),
            refine: file.numerics.refine.unwrap_or(d.refine),
            first_variation_delta: file
                .numerics
                .first_variation_delta
                .unwrap_or(d.first_variation_delta),
            out: ov
                .out
                .clone()
                .or(file.output.dir)
                .unwrap_or_else(|| PathBuf::from("out")),
            formats,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.grid < 16 {
            return bad(format!("grid {} must be at least 16", self.grid));
        }
        for (name, v) in [
            ("integrator_tol", self.integrator_tol),
            ("eps_stab", self.eps_stab),
            ("first_variation_delta", self.first_variation_delta),
            ("radius", self.radius),
            ("mean_curvature", self.mean_curvature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        if self.half_periods == 0 {
            return bad("half_periods must be at least 1".into());
        }
        self.param
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.theta > 0.0 && self.theta < std::f64::consts::PI) {
            return bad(format!("theta = {} must lie in (0, π)", self.theta));
        }
        match self.family {
            Family::Cap => {
                if self.theta_upper.is_some() || self.height.is_some() {
                    return bad("caps sit in a half-space: no upper wall or height".into());
                }
            }
            Family::Cylinder | Family::Unduloid | Family::Nodoid => {
                // Free-boundary families meet both walls orthogonally.
                for t in [Some(self.theta), self.theta_upper].into_iter().flatten() {
                    if (t - FRAC_PI_2).abs() > 1e-12 {
                        return bad(format!(
                            "{} meets the walls at θ = π/2, got {t}",
                            self.family.as_str()
                        ));
                    }
                }
                if self.family != Family::Cylinder && self.height.is_some() {
                    return bad(format!(
                        "{} height follows from the parameter",
                        self.family.as_str()
                    ));
                }
            }
        }
        if self.formats.is_empty() {
            return bad("no output format".into());
        }
        Ok(())
    }

    pub fn family_params(&self) -> FamilyParams {
        FamilyParams {
            family: self.family,
            n: self.n,
            radius: self.radius,
            mean_curvature: self.mean_curvature,
            half_periods: self.half_periods,
            integrator_tol: self.integrator_tol,
        }
    }

    pub fn tolerances(&self) -> StabilityTolerances {
        StabilityTolerances {
            eps_stab: self.eps_stab,
            ..StabilityTolerances::default()
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            grid: self.grid,
            tolerances: self.tolerances(),
            refine: self.refine,
            identities: true,
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    /// SHA-256 of the canonical JSON of the numerical configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn default_param(family: Family, theta: f64, height: Option<f64>) -> ParamRange {
    match family {
        Family::Cylinder => ParamRange::single(height.unwrap_or(2.0)),
        Family::Cap => ParamRange::single(theta),
        Family::Unduloid => neck_grid(50),
        Family::Nodoid => ParamRange::single(1.4),
    }
}

fn read_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: FileConfig = toml::from_str(
            "schema_version = 1\n[problem]\nn = 3\nfamily = \"unduloid\"\n[numerics]\ngrid = 500\n",
        )
        .unwrap();
        let ov = Overrides {
            n: Some(4),
            ..Overrides::default()
        };
        let cfg = RunConfig::resolve(file, &ov).unwrap();
        assert_eq!(cfg.n, 4);
        assert_eq!(cfg.grid, 500);
        assert_eq!(cfg.family, Family::Unduloid);
        assert_eq!(cfg.param, neck_grid(50));
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[problem]\nwidth = 2\n").is_err());
        let file: FileConfig = toml::from_str("schema_version = 9\n").unwrap();
        assert!(RunConfig::resolve(file, &Overrides::default()).is_err());
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = RunConfig::resolve(FileConfig::default(), &Overrides::default()).unwrap();
        let ov = Overrides {
            out: Some("elsewhere".into()),
            format: vec![Format::Csv],
            ..Overrides::default()
        };
        let b = RunConfig::resolve(FileConfig::default(), &ov).unwrap();
        assert_eq!(a.hash(), b.hash());
        let ov = Overrides {
            grid: Some(400),
            ..Overrides::default()
        };
        assert_ne!(
            a.hash(),
            RunConfig::resolve(FileConfig::default(), &ov)
                .unwrap()
                .hash()
        );
    }

    #[test]
    fn free_boundary_families_need_right_angles() {
        let ov = Overrides {
            family: Some(Family::Unduloid),
            theta: Some(1.0),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(FileConfig::default(), &ov).is_err());
        let ov = Overrides {
            family: Some(Family::Cap),
            height: Some(1.0),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(FileConfig::default(), &ov).is_err());
    }
}
