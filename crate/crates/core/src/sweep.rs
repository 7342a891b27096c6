//! Parameter sweeps over one-parameter families of capillary surfaces.

use serde::{Deserialize, Serialize};

use crate::delaunay::{
    cylinder, free_boundary_nodoid_with, free_boundary_unduloid_with, halfspace_cap_with,
};
use crate::error::{CapstabError, Result};
use crate::geometry::RevolutionSurface;
use crate::identity::{
    check_divergence_identities, check_gauss_equation, check_normal_integral,
    check_position_laplacian, check_support_equation,
};
use crate::stability::{
    classify_stability, classify_stability_refined, StabilityTolerances, Verdict,
};

/// Surface family swept over a single parameter.
///
/// | family   | parameter               |
/// |----------|-------------------------|
/// | cylinder | height `h`              |
/// | cap      | contact angle `θ`       |
/// | unduloid | neck radius times `H`   |
/// | nodoid   | start radius times `H`  |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Cylinder,
    Cap,
    Unduloid,
    Nodoid,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Cylinder => "cylinder",
            Family::Cap => "cap",
            Family::Unduloid => "unduloid",
            Family::Nodoid => "nodoid",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = CapstabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cylinder" => Ok(Family::Cylinder),
            "cap" => Ok(Family::Cap),
            "unduloid" => Ok(Family::Unduloid),
            "nodoid" => Ok(Family::Nodoid),
            other => Err(CapstabError::InvalidInput(format!(
                "unknown family `{other}`"
            ))),
        }
    }
}

/// `count` equally spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ParamRange {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn single(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(CapstabError::InvalidInput(
                "parameter range has count 0".into(),
            ));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(CapstabError::InvalidInput(format!(
                "parameter range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        if self.count > 1 && self.max == self.min {
            return Err(CapstabError::InvalidInput(
                "repeated parameter values".into(),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let d = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + d * i as f64
                }
            })
            .collect()
    }

    /// Parses `min:max:count` or a single value.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || {
            CapstabError::InvalidInput(format!(
                "cannot parse range `{text}`, expected min:max:count"
            ))
        };
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let r = match parts.as_slice() {
            [v] => Self::single(v.parse().map_err(|_| bad())?),
            [a, b, c] => Self::new(
                a.parse().map_err(|_| bad())?,
                b.parse().map_err(|_| bad())?,
                c.parse().map_err(|_| bad())?,
            ),
            _ => return Err(bad()),
        };
        r.validate()?;
        Ok(r)
    }
}

/// The unduloid neck grid used for the stability landscape:
/// `a_i = 0.02 + 0.96 i/(count − 1)` in units of `1/H`.
pub fn neck_grid(count: usize) -> ParamRange {
    ParamRange::new(0.02, 0.98, count)
}

/// Everything but the swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    pub family: Family,
    pub n: usize,
    /// Cylinder radius or cap radius.
    pub radius: f64,
    /// Mean curvature for unduloids and nodoids.
    pub mean_curvature: f64,
    /// Unduloid half periods between the walls.
    pub half_periods: usize,
    pub integrator_tol: f64,
}

impl FamilyParams {
    pub fn new(family: Family, n: usize) -> Self {
        Self {
            family,
            n,
            radius: 1.0,
            mean_curvature: 1.0,
            half_periods: 1,
            integrator_tol: crate::ode::DEFAULT_TOLERANCE,
        }
    }

    /// Builds the family member at `param` on `grid` samples.
    pub fn surface(&self, param: f64, grid: usize) -> Result<RevolutionSurface> {
        let h = self.mean_curvature;
        match self.family {
            Family::Cylinder => cylinder(self.n, self.radius, param, grid),
            Family::Cap => halfspace_cap_with(self.n, param, self.radius, grid),
            Family::Unduloid => Ok(free_boundary_unduloid_with(
                self.n,
                h,
                param / h,
                self.half_periods,
                grid,
                self.integrator_tol,
            )?
            .surface),
            Family::Nodoid => {
                Ok(
                    free_boundary_nodoid_with(self.n, h, param / h, grid, self.integrator_tol)?
                        .surface,
                )
            }
        }
    }
}

/// One grid point of a sweep. Failures keep their error and leave the
/// numerical fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub index: usize,
    pub family: Family,
    pub n: usize,
    pub param: f64,
    pub verdict: Option<Verdict>,
    pub worst_lambda: Option<f64>,
    pub worst_l: Option<usize>,
    pub constrained_l0: Option<f64>,
    /// Largest single-grid residual over the geometric identities.
    pub identity_max: Option<f64>,
    pub surface_hash: Option<String>,
    pub error: Option<String>,
    pub error_kind: Option<String>,
}

impl SweepRecord {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

/// Short machine tag for an error variant.
pub fn error_kind(e: &CapstabError) -> &'static str {
    match e {
        CapstabError::GridTooCoarse(_) => "grid_too_coarse",
        CapstabError::NonUniformGrid(_) => "non_uniform_grid",
        CapstabError::NonPositiveRadius { .. } => "non_positive_radius",
        CapstabError::AxisEndpoint => "axis_endpoint",
        CapstabError::NotAWallEndpoint => "not_a_wall_endpoint",
        CapstabError::InvalidInput(_) => "invalid_input",
        CapstabError::IntegrationBlowup { .. } => "integration_blowup",
        CapstabError::MaxLengthExceeded(_) => "max_length_exceeded",
        CapstabError::NoMatch(_) => "no_match",
        CapstabError::BracketInvalid { .. } => "bracket_invalid",
        CapstabError::InvalidSurface(_) => "invalid_surface",
        CapstabError::SolverFailure(_) => "solver_failure",
        CapstabError::PerturbationTooLarge { .. } => "perturbation_too_large",
        CapstabError::NoSignChange => "no_sign_change",
        CapstabError::DimensionUnsupported(_) => "dimension_unsupported",
        CapstabError::Io(_) => "io",
    }
}

/// Largest residual of the single-grid geometric identity checks.
pub fn identity_summary(surface: &RevolutionSurface) -> Result<f64> {
    let checks = [
        check_position_laplacian,
        check_support_equation,
        check_gauss_equation,
        check_divergence_identities,
        check_normal_integral,
    ];
    let mut worst = 0.0_f64;
    for check in checks {
        worst = worst.max(check(surface)?.max_residual);
    }
    Ok(worst)
}

/// Settings shared by every point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSettings {
    pub grid: usize,
    pub tolerances: StabilityTolerances,
    /// Classify on Richardson-extrapolated eigenvalues.
    pub refine: bool,
    pub identities: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            grid: crate::delaunay::DEFAULT_SAMPLES,
            tolerances: StabilityTolerances::default(),
            refine: true,
            identities: true,
        }
    }
}

/// Generate, classify and summarize one parameter value.
pub fn run_point(
    params: &FamilyParams,
    settings: &SweepSettings,
    index: usize,
    param: f64,
) -> SweepRecord {
    let mut rec = SweepRecord {
        index,
        family: params.family,
        n: params.n,
        param,
        verdict: None,
        worst_lambda: None,
        worst_l: None,
        constrained_l0: None,
        identity_max: None,
        surface_hash: None,
        error: None,
        error_kind: None,
    };
    let outcome = (|| -> Result<()> {
        let surface = params.surface(param, settings.grid)?;
        let report = if settings.refine {
            classify_stability_refined(&surface, &settings.tolerances)?
        } else {
            classify_stability(&surface, &settings.tolerances)?
        };
        rec.verdict = Some(report.verdict);
        rec.worst_lambda = Some(report.worst_lambda);
        rec.worst_l = Some(report.worst_l);
        rec.constrained_l0 = Some(report.constrained_l0);
        rec.surface_hash = Some(report.surface_hash);
        if settings.identities {
            rec.identity_max = Some(identity_summary(&surface)?);
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        rec.error_kind = Some(error_kind(&e).to_string());
        rec.error = Some(e.to_string());
    }
    rec
}

/// Sequential sweep; records come back in parameter order.
pub fn run_sweep(
    params: &FamilyParams,
    range: &ParamRange,
    settings: &SweepSettings,
) -> Result<Vec<SweepRecord>> {
    range.validate()?;
    Ok(range
        .values()
        .into_iter()
        .enumerate()
        .map(|(i, p)| run_point(params, settings, i, p))
        .collect())
}

/// Whether a verdict counts as stable for threshold location. Marginal
/// records count as stable: they have no eigenvalue below `−ε_stab`.
fn is_stable(v: Verdict) -> bool {
    v != Verdict::Unstable
}

/// First pair of consecutive successful records whose verdicts differ in
/// stability, as `(lower param, upper param)`.
pub fn first_flip(records: &[SweepRecord]) -> Option<(f64, f64)> {
    let ok: Vec<&SweepRecord> = records.iter().filter(|r| r.verdict.is_some()).collect();
    ok.windows(2).find_map(|w| {
        let (a, b) = (w[0].verdict?, w[1].verdict?);
        (is_stable(a) != is_stable(b)).then_some((w[0].param, w[1].param))
    })
}

/// Bisects a verdict flip inside `[lo, hi]` until the bracket is narrower
/// than `rel_width` times its midpoint. Returns the final bracket.
pub fn bisect_flip(
    params: &FamilyParams,
    settings: &SweepSettings,
    lo: f64,
    hi: f64,
    rel_width: f64,
) -> Result<(f64, f64)> {
    let stable_at = |p: f64| -> Result<bool> {
        let surface = params.surface(p, settings.grid)?;
        let report = if settings.refine {
            classify_stability_refined(&surface, &settings.tolerances)?
        } else {
            classify_stability(&surface, &settings.tolerances)?
        };
        Ok(is_stable(report.verdict))
    };
    let (mut lo, mut hi) = (lo, hi);
    let s_lo = stable_at(lo)?;
    if s_lo == stable_at(hi)? {
        return Err(CapstabError::BracketInvalid { lo, hi });
    }
    for _ in 0..200 {
        if hi - lo <= rel_width * 0.5 * (lo + hi).abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if stable_at(mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}
