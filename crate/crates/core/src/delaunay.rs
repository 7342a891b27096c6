//! Closed-form and shooting-based capillary profiles: cylinders, spherical
//! caps, closed spheres, free-boundary unduloids and nodoids in a slab, and
//! slab capillary segments matched to two contact angles.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{CapstabError, Result};
use crate::geometry::{
    CapillaryProblem, Domain, EndpointKind, ProfileCurve, RevolutionSurface, ShapeModel, Wall,
};
use crate::ode::{self, CmcOde, ShootingSpec, StartMode, StopRule, DEFAULT_TOLERANCE};

/// Default number of profile samples.
pub const DEFAULT_SAMPLES: usize = 2000;

/// Residuals of an accepted shooting solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootingResiduals {
    /// `|z − z_wall|` per wall endpoint.
    pub wall: Vec<f64>,
    /// `|θ_measured − θ_prescribed|` per wall endpoint.
    pub angle: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShootingResult {
    pub surface: RevolutionSurface,
    pub residuals: ShootingResiduals,
    pub flux_drift: f64,
    /// Value of the free parameter at the match.
    pub parameter: f64,
}

fn uniform(m: usize, length: f64) -> Vec<f64> {
    (0..m).map(|i| length * i as f64 / (m - 1) as f64).collect()
}

fn sample_shape(shape: ShapeModel, length: f64, m: usize) -> ProfileCurve {
    let s = uniform(m, length);
    let mut p = ProfileCurve {
        s: s.clone(),
        x: Vec::with_capacity(m),
        z: Vec::with_capacity(m),
        alpha: Vec::with_capacity(m),
    };
    for &si in &s {
        let (x, z, a) = match shape {
            ShapeModel::Circle {
                radius,
                alpha0,
                z_center,
            } => {
                let a = alpha0 + si / radius;
                (radius * a.sin(), z_center - radius * a.cos(), a)
            }
            ShapeModel::Line { x0, z0, alpha } => {
                (x0 + si * alpha.cos(), z0 + si * alpha.sin(), alpha)
            }
            ShapeModel::Delaunay => unreachable!("sampled by integration"),
        };
        p.x.push(x);
        p.z.push(z);
        p.alpha.push(a);
    }
    p
}

/// Residuals of the wall endpoints of a surface.
pub fn residuals(surface: &RevolutionSurface) -> Result<ShootingResiduals> {
    let mut r = ShootingResiduals {
        wall: vec![],
        angle: vec![],
    };
    for (end, wall) in surface.wall_ends() {
        let i = surface.end_index(end);
        r.wall
            .push((surface.profile.z[i] - surface.problem.wall_height(wall)?).abs());
        let f = surface.boundary_frame(end)?;
        r.angle.push((f.theta - surface.problem.theta(wall)).abs());
    }
    Ok(r)
}

/// Spherical cap of radius `r` on the wall `z = 0` with contact angle `θ`.
/// The profile runs from the wall to the pole.
pub fn solve_halfspace_cap(n: usize, theta: f64, radius: f64) -> Result<RevolutionSurface> {
    halfspace_cap_with(n, theta, radius, DEFAULT_SAMPLES)
}

pub fn halfspace_cap_with(
    n: usize,
    theta: f64,
    radius: f64,
    m: usize,
) -> Result<RevolutionSurface> {
    if !(radius > 0.0) {
        return Err(CapstabError::InvalidInput(format!(
            "cap radius {radius} must be positive"
        )));
    }
    let problem = CapillaryProblem::halfspace(n, theta, 1.0 / radius);
    problem.validate()?;
    let shape = ShapeModel::Circle {
        radius,
        alpha0: PI - theta,
        z_center: -radius * theta.cos(),
    };
    let mut profile = sample_shape(shape, theta * radius, m);
    // Pin the endpoints exactly onto the wall and the axis.
    profile.z[0] = 0.0;
    profile.x[m - 1] = 0.0;
    profile.alpha[m - 1] = PI;
    RevolutionSurface::new(
        profile,
        problem,
        EndpointKind::Wall(Wall::Lower),
        EndpointKind::Axis,
        shape,
    )
}

/// Circular cylinder of radius `r` between the walls of a slab of height `h`,
/// meeting both orthogonally.
pub fn cylinder(n: usize, radius: f64, height: f64, m: usize) -> Result<RevolutionSurface> {
    if !(radius > 0.0) {
        return Err(CapstabError::InvalidInput(format!(
            "cylinder radius {radius} must be positive"
        )));
    }
    let h = (n as f64 - 1.0) / (n as f64 * radius);
    let problem = CapillaryProblem::slab(n, height, FRAC_PI_2, FRAC_PI_2, h);
    problem.validate()?;
    let shape = ShapeModel::Line {
        x0: radius,
        z0: 0.0,
        alpha: FRAC_PI_2,
    };
    let mut profile = sample_shape(shape, height, m);
    profile.x.iter_mut().for_each(|x| *x = radius);
    profile.z[m - 1] = height;
    RevolutionSurface::new(
        profile,
        problem,
        EndpointKind::Wall(Wall::Lower),
        EndpointKind::Wall(Wall::Upper),
        shape,
    )
}

/// Round sphere of radius `r` with lowest point at `z = 0`; both ends on the axis.
/// The problem is recorded as a half-space one with `θ = π/2`, which is not used.
pub fn closed_sphere(n: usize, radius: f64, m: usize) -> Result<RevolutionSurface> {
    if !(radius > 0.0) {
        return Err(CapstabError::InvalidInput(format!(
            "sphere radius {radius} must be positive"
        )));
    }
    let shape = ShapeModel::Circle {
        radius,
        alpha0: 0.0,
        z_center: radius,
    };
    let mut profile = sample_shape(shape, PI * radius, m);
    profile.x[0] = 0.0;
    profile.x[m - 1] = 0.0;
    profile.alpha[m - 1] = PI;
    RevolutionSurface::new(
        profile,
        CapillaryProblem::halfspace(n, FRAC_PI_2, 1.0 / radius),
        EndpointKind::Axis,
        EndpointKind::Axis,
        shape,
    )
}

/// Integrates `spec` and wraps the result as a surface with the given
/// problem and endpoint kinds.
pub fn surface_from_spec(
    spec: &ShootingSpec,
    problem: CapillaryProblem,
    start: EndpointKind,
    finish: EndpointKind,
) -> Result<(RevolutionSurface, f64)> {
    if let StartMode::Axis { z0 } = spec.start {
        // Regular axis solutions are round spheres (planes when H = 0).
        let shape = if spec.mean_curvature > 0.0 {
            let r = 1.0 / spec.mean_curvature;
            ShapeModel::Circle {
                radius: r,
                alpha0: 0.0,
                z_center: z0 + r,
            }
        } else {
            ShapeModel::Line {
                x0: 0.0,
                z0,
                alpha: 0.0,
            }
        };
        let length = ode::locate_event(spec)?;
        let profile = sample_shape(shape, length, spec.samples);
        let surf = RevolutionSurface::new(profile, problem, start, finish, shape)?;
        return Ok((surf, 0.0));
    }
    let out = ode::integrate_profile(spec)?;
    let surf = RevolutionSurface::new(out.profile, problem, start, finish, ShapeModel::Delaunay)?;
    Ok((surf, out.flux_drift))
}

/// A verification-only Delaunay segment of fixed length with free cuts at both ends.
pub fn delaunay_segment(
    n: usize,
    mean_curvature: f64,
    x0: f64,
    alpha0: f64,
    length: f64,
    m: usize,
) -> Result<RevolutionSurface> {
    let spec = ShootingSpec::new(
        n,
        mean_curvature,
        StartMode::Point {
            x0,
            z0: 0.0,
            alpha0,
        },
        StopRule::Length(length),
    )
    .with_samples(m);
    let problem = CapillaryProblem::halfspace(n, FRAC_PI_2, mean_curvature);
    Ok(surface_from_spec(&spec, problem, EndpointKind::Cut, EndpointKind::Cut)?.0)
}

/// Free-boundary slab surface launched vertically at radius `x0` from the
/// lower wall. The slab height is wherever the profile is next vertical
/// after `half_periods` half-periods, so the upper contact is orthogonal too.
fn free_boundary(
    n: usize,
    mean_curvature: f64,
    x0: f64,
    target: f64,
    count: usize,
    m: usize,
    tolerance: f64,
) -> Result<ShootingResult> {
    let mut spec = ShootingSpec::new(
        n,
        mean_curvature,
        StartMode::Point {
            x0,
            z0: 0.0,
            alpha0: FRAC_PI_2,
        },
        StopRule::Alpha { target, count },
    )
    .with_samples(m);
    spec.tolerance = tolerance;
    let out = ode::integrate_profile(&spec)?;
    let mut profile = out.profile;
    let last = profile.len() - 1;
    let height = profile.z[last];
    if !(height > 0.0) {
        return Err(CapstabError::NoMatch(format!(
            "profile from x0 = {x0} ends at height {height}, not above the lower wall"
        )));
    }
    // Snap the endpoint angle to the exact event value; the difference is
    // below the integrator tolerance.
    profile.alpha[last] = target;
    let problem = CapillaryProblem::slab(n, height, FRAC_PI_2, FRAC_PI_2, mean_curvature);
    let surface = RevolutionSurface::new(
        profile,
        problem,
        EndpointKind::Wall(Wall::Lower),
        EndpointKind::Wall(Wall::Upper),
        ShapeModel::Delaunay,
    )?;
    Ok(ShootingResult {
        residuals: residuals(&surface)?,
        flux_drift: out.flux_drift,
        parameter: x0,
        surface,
    })
}

/// Free-boundary unduloid between two walls, starting at a neck or bulge of
/// radius `a` and spanning `half_periods` half-periods.
pub fn free_boundary_unduloid(
    n: usize,
    mean_curvature: f64,
    a: f64,
    half_periods: usize,
    m: usize,
) -> Result<ShootingResult> {
    free_boundary_unduloid_with(n, mean_curvature, a, half_periods, m, DEFAULT_TOLERANCE)
}

/// [`free_boundary_unduloid`] with an explicit integrator tolerance.
pub fn free_boundary_unduloid_with(
    n: usize,
    mean_curvature: f64,
    a: f64,
    half_periods: usize,
    m: usize,
    tolerance: f64,
) -> Result<ShootingResult> {
    if !(mean_curvature > 0.0) || !(a > 0.0) {
        return Err(CapstabError::InvalidInput(
            "unduloid needs H > 0 and a > 0".into(),
        ));
    }
    let rc = (n as f64 - 1.0) / (n as f64 * mean_curvature);
    if (a - rc).abs() < 1e-12 * rc {
        return Err(CapstabError::InvalidInput(format!(
            "radius {a} is the cylinder radius; use cylinder()"
        )));
    }
    if a * mean_curvature >= 1.0 {
        return Err(CapstabError::InvalidInput(format!(
            "radius {a} ≥ 1/H gives a nodoid, not an unduloid"
        )));
    }
    free_boundary(
        n,
        mean_curvature,
        a,
        FRAC_PI_2,
        half_periods.max(1),
        m,
        tolerance,
    )
}

/// Free-boundary nodoid between two walls: launched vertically at an outer
/// radius `a > 1/H`, through one full loop until vertical again.
pub fn free_boundary_nodoid(
    n: usize,
    mean_curvature: f64,
    a: f64,
    m: usize,
) -> Result<ShootingResult> {
    free_boundary_nodoid_with(n, mean_curvature, a, m, DEFAULT_TOLERANCE)
}

/// [`free_boundary_nodoid`] with an explicit integrator tolerance.
pub fn free_boundary_nodoid_with(
    n: usize,
    mean_curvature: f64,
    a: f64,
    m: usize,
    tolerance: f64,
) -> Result<ShootingResult> {
    if !(mean_curvature > 0.0) || !(a * mean_curvature > 1.0) {
        return Err(CapstabError::InvalidInput(
            "nodoid needs H > 0 and a > 1/H".into(),
        ));
    }
    free_boundary(n, mean_curvature, a, FRAC_PI_2 + 2.0 * PI, 1, m, tolerance)
}

/// Free parameter scanned by [`solve_slab_capillary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SlabFamily {
    /// Fixed mean curvature; the lower-wall radius `x0` varies in the bracket.
    FixedCurvature {
        mean_curvature: f64,
        x0_min: f64,
        x0_max: f64,
        scan: usize,
    },
    /// Fixed lower-wall radius; the mean curvature varies in the bracket.
    FixedRadius {
        x0: f64,
        h_min: f64,
        h_max: f64,
        scan: usize,
    },
}

/// Upper-wall residual `θ_measured − θ_upper` of a shot, or `None` if the
/// profile never reaches the upper wall.
fn slab_shot(
    problem: &CapillaryProblem,
    mean_curvature: f64,
    x0: f64,
    m: usize,
) -> Option<(f64, ShootingSpec)> {
    let height = match problem.domain {
        Domain::Slab { height } => height,
        Domain::Halfspace => return None,
    };
    let mut spec = ShootingSpec::new(
        problem.n,
        mean_curvature,
        StartMode::Point {
            x0,
            z0: 0.0,
            alpha0: PI - problem.theta_lower,
        },
        StopRule::ZLevel(height),
    )
    .with_samples(m);
    spec.max_length = 200.0 * height.max(x0).max(1.0);
    let l = ode::locate_event(&spec).ok()?;
    spec.stop = StopRule::Length(l);
    let ode = spec.ode();
    // Evaluate the end state precisely with fine steps.
    let steps = 4000usize;
    let mut y = [x0, 0.0, PI - problem.theta_lower];
    for _ in 0..steps {
        y = ode.rk4(y, l / steps as f64);
    }
    let theta = y[2].sin().atan2(y[2].cos());
    if !(theta > 0.0) {
        return None;
    }
    spec.stop = StopRule::ZLevel(height);
    Some((theta - problem.theta_upper, spec))
}

/// Shoots from the lower wall at angle `θ_lower` and matches `θ_upper` on
/// the upper wall by scanning and bisecting the free parameter. Every
/// bracketed match is returned, in increasing parameter order.
pub fn solve_slab_capillary(
    problem: &CapillaryProblem,
    family: SlabFamily,
    m: usize,
) -> Result<Vec<ShootingResult>> {
    problem.validate()?;
    if !matches!(problem.domain, Domain::Slab { .. }) {
        return Err(CapstabError::InvalidInput(
            "slab shooting needs a slab domain".into(),
        ));
    }
    let (lo, hi, scan) = match family {
        SlabFamily::FixedCurvature {
            x0_min,
            x0_max,
            scan,
            ..
        } => (x0_min, x0_max, scan),
        SlabFamily::FixedRadius {
            h_min, h_max, scan, ..
        } => (h_min, h_max, scan),
    };
    let lo_ok = match family {
        SlabFamily::FixedCurvature { .. } => lo > 0.0,
        SlabFamily::FixedRadius { .. } => lo >= 0.0,
    };
    if !(lo < hi) || !lo_ok || scan < 2 {
        return Err(CapstabError::BracketInvalid { lo, hi });
    }
    let shot = |p: f64| -> Option<(f64, ShootingSpec)> {
        match family {
            SlabFamily::FixedCurvature { mean_curvature, .. } => {
                slab_shot(problem, mean_curvature, p, m)
            }
            SlabFamily::FixedRadius { x0, .. } => slab_shot(problem, p, x0, m),
        }
    };
    let grid: Vec<f64> = (0..scan)
        .map(|i| lo + (hi - lo) * i as f64 / (scan - 1) as f64)
        .collect();
    let values: Vec<Option<f64>> = grid.iter().map(|&p| shot(p).map(|r| r.0)).collect();
    let mut matches = Vec::new();
    for i in 0..scan - 1 {
        let (Some(fa), Some(fb)) = (values[i], values[i + 1]) else {
            continue;
        };
        if fa == 0.0 || (fa > 0.0) != (fb > 0.0) {
            // Rule out jumps of the wrapped angle by requiring a small gap.
            if (fa - fb).abs() > PI {
                continue;
            }
            let (mut a, mut b, mut ga) = (grid[i], grid[i + 1], fa);
            let mut ok = true;
            for _ in 0..100 {
                let c = 0.5 * (a + b);
                match shot(c) {
                    Some((gc, _)) => {
                        if (gc > 0.0) == (ga > 0.0) {
                            a = c;
                            ga = gc;
                        } else {
                            b = c;
                        }
                    }
                    None => {
                        ok = false;
                        break;
                    }
                }
                if b - a < 1e-14 * (1.0 + a.abs()) {
                    break;
                }
            }
            if !ok {
                continue;
            }
            let p = 0.5 * (a + b);
            if let Some(res) = finish_slab_match(problem, family, p, m)? {
                matches.push(res);
            }
        }
    }
    if matches.is_empty() {
        return Err(CapstabError::NoMatch(format!(
            "no upper contact-angle match for {family:?}"
        )));
    }
    Ok(matches)
}

fn finish_slab_match(
    problem: &CapillaryProblem,
    family: SlabFamily,
    p: f64,
    m: usize,
) -> Result<Option<ShootingResult>> {
    let (h, x0) = match family {
        SlabFamily::FixedCurvature { mean_curvature, .. } => (mean_curvature, p),
        SlabFamily::FixedRadius { x0, .. } => (p, x0),
    };
    let Some((res, spec)) = slab_shot(problem, h, x0, m) else {
        return Ok(None);
    };
    if res.abs() > 1e-9 {
        return Ok(None);
    }
    let out = ode::integrate_profile(&spec)?;
    let mut profile = out.profile;
    let last = profile.len() - 1;
    let height = problem.wall_height(Wall::Upper)?;
    profile.z[last] = height;
    let mut matched = *problem;
    matched.mean_curvature = h;
    let surface = RevolutionSurface::new(
        profile,
        matched,
        EndpointKind::Wall(Wall::Lower),
        EndpointKind::Wall(Wall::Upper),
        ShapeModel::Delaunay,
    )?;
    Ok(Some(ShootingResult {
        residuals: residuals(&surface)?,
        flux_drift: out.flux_drift,
        parameter: p,
        surface,
    }))
}

/// Outcome of one trial in the half-space nodoid-cap search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapTrial {
    pub flux: f64,
    pub loops: usize,
    /// Height of the returning end above the wall; a cap needs zero.
    pub height_gap: f64,
}

/// Searches for a rotational annulus with both boundary circles on the wall
/// `z = 0` at contact angle `θ` (a half-space "nodoid cap"). Launches from
/// the wall with `α = π − θ` for a log-spaced range of negative fluxes and
/// up to `max_loops` extra loops, and measures where the profile next has the
/// angle required on the returning end. A cap exists where that height gap
/// changes sign.
pub fn search_halfspace_nodoid_cap(
    n: usize,
    theta: f64,
    mean_curvature: f64,
    max_loops: usize,
    m: usize,
) -> Result<(ShootingResult, Vec<CapTrial>)> {
    let problem = CapillaryProblem::halfspace(n, theta, mean_curvature);
    problem.validate()?;
    if !(mean_curvature > 0.0) {
        return Err(CapstabError::InvalidInput(
            "nodoid cap search needs H > 0".into(),
        ));
    }
    let ode = CmcOde::new(n, mean_curvature);
    let alpha0 = PI - theta;
    let fluxes: Vec<f64> = (0..80)
        .map(|i| -(10f64.powf(-3.0 + 5.0 * i as f64 / 79.0)))
        .collect();
    let mut trials = Vec::new();
    for loops in 0..=max_loops {
        let target = PI + theta + 2.0 * PI * loops as f64;
        let mut prev: Option<(f64, f64)> = None;
        for &phi in &fluxes {
            let Some(x0) = radius_for_flux(&ode, phi, alpha0) else {
                continue;
            };
            let gap = cap_gap(n, mean_curvature, x0, alpha0, target);
            if let Some(g) = gap {
                trials.push(CapTrial {
                    flux: phi,
                    loops,
                    height_gap: g,
                });
                if let Some((pphi, pg)) = prev {
                    if (pg > 0.0) != (g > 0.0) {
                        let x = bisect_gap(n, mean_curvature, &ode, alpha0, target, pphi, phi)?;
                        let spec = ShootingSpec::new(
                            n,
                            mean_curvature,
                            StartMode::Point {
                                x0: x,
                                z0: 0.0,
                                alpha0,
                            },
                            StopRule::Alpha { target, count: 1 },
                        )
                        .with_samples(m);
                        let out = ode::integrate_profile(&spec)?;
                        let mut profile = out.profile;
                        let last = profile.len() - 1;
                        profile.z[last] = 0.0;
                        let surface = RevolutionSurface::new(
                            profile,
                            problem,
                            EndpointKind::Wall(Wall::Lower),
                            EndpointKind::Wall(Wall::Lower),
                            ShapeModel::Delaunay,
                        )?;
                        return Ok((
                            ShootingResult {
                                residuals: residuals(&surface)?,
                                flux_drift: out.flux_drift,
                                parameter: x,
                                surface,
                            },
                            trials,
                        ));
                    }
                }
                prev = Some((phi, g));
            }
        }
    }
    let min_gap = trials
        .iter()
        .map(|t| t.height_gap)
        .fold(f64::INFINITY, f64::min);
    Err(CapstabError::NoMatch(format!(
        "no half-space nodoid cap at n = {n}, θ = {theta}: returning end stays above the wall \
         (smallest height gap {min_gap:.3e} over {} trials)",
        trials.len()
    )))
}

/// Radius on the wall at which a profile leaving with angle `α₀` has flux `φ < 0`.
fn radius_for_flux(ode: &CmcOde, phi: f64, alpha0: f64) -> Option<f64> {
    let n = ode.n as i32;
    let f = |x: f64| x.powi(n - 1) * alpha0.sin() - ode.h * x.powi(n) - phi;
    // f(0) = −φ > 0 and f → −∞: a single sign change for x > 0 beyond the hump.
    let mut hi = 1.0 / ode.h;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e8 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let c = 0.5 * (lo + hi);
        if f(c) > 0.0 {
            lo = c;
        } else {
            hi = c;
        }
    }
    Some(0.5 * (lo + hi))
}

fn cap_gap(n: usize, h: f64, x0: f64, alpha0: f64, target: f64) -> Option<f64> {
    let mut spec = ShootingSpec::new(
        n,
        h,
        StartMode::Point {
            x0,
            z0: 0.0,
            alpha0,
        },
        StopRule::Alpha { target, count: 1 },
    );
    spec.max_length = 100.0 * (x0 + 1.0 / h);
    let l = ode::locate_event(&spec).ok()?;
    let ode = spec.ode();
    let steps = 4000;
    let mut y = [x0, 0.0, alpha0];
    for _ in 0..steps {
        y = ode.rk4(y, l / steps as f64);
    }
    Some(y[1])
}

fn bisect_gap(
    n: usize,
    h: f64,
    ode: &CmcOde,
    alpha0: f64,
    target: f64,
    mut a: f64,
    mut b: f64,
) -> Result<f64> {
    let gap = |phi: f64| -> Result<f64> {
        let x0 = radius_for_flux(ode, phi, alpha0).ok_or(CapstabError::NoSignChange)?;
        cap_gap(n, h, x0, alpha0, target).ok_or(CapstabError::NoSignChange)
    };
    let ga = gap(a)?;
    for _ in 0..100 {
        let c = 0.5 * (a + b);
        if (gap(c)? > 0.0) == (ga > 0.0) {
            a = c;
        } else {
            b = c;
        }
    }
    radius_for_flux(ode, 0.5 * (a + b), alpha0).ok_or(CapstabError::NoSignChange)
}
