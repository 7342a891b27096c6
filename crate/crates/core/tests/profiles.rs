use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, PI};

use capstab_core::delaunay::{
    cylinder, delaunay_segment, free_boundary_nodoid, free_boundary_unduloid, residuals,
    search_halfspace_nodoid_cap, solve_halfspace_cap, solve_slab_capillary, SlabFamily,
};
use capstab_core::geometry::{curvature_data, CapillaryProblem, Wall};
use capstab_core::ode::{integrate_profile, CmcOde, ShootingSpec, StartMode, StopRule};
use capstab_core::CapstabError;

fn worst(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Height and arclength of half a period of the n = 2 unduloid with neck `a`,
/// from the first integral `sin α = Φ/x + Hx` in the radial parametrization.
/// With `x = c + d cos t` the endpoint singularities cancel and the trapezoid
/// rule on `[0, π]` converges geometrically.
fn unduloid_half_period(h: f64, a: f64) -> (f64, f64) {
    let b = 1.0 / h - a;
    let phi = a - h * a * a;
    let (c, d) = (0.5 * (a + b), 0.5 * (b - a));
    let k = 4000;
    let (mut height, mut length) = (0.0, 0.0);
    for j in 0..=k {
        let t = PI * j as f64 / k as f64;
        let x = c + d * t.cos();
        let f = phi / x + h * x;
        // dx / sqrt(1 − f²) = dt · sqrt(x / (H (1 + f))).
        let w = (x / (h * (1.0 + f))).sqrt();
        let wt = if j == 0 || j == k { 0.5 } else { 1.0 } * PI / k as f64;
        height += wt * f * w;
        length += wt * w;
    }
    (height, length)
}

#[test]
fn unduloid_matches_first_integral_quadrature() {
    for a in [0.1, 0.3, 0.45, 0.6, 0.8] {
        let r = free_boundary_unduloid(2, 1.0, a, 1, 2000).unwrap();
        let (h_exact, l_exact) = unduloid_half_period(1.0, a);
        let height = r.surface.problem.domain_height().unwrap();
        assert!(
            (height - h_exact).abs() < 1e-8,
            "a = {a}: {height} vs {h_exact}"
        );
        assert!((r.surface.profile.length() - l_exact).abs() < 1e-8);
        assert!(r.flux_drift < 1e-9);
    }
}

#[test]
fn axis_start_gives_round_sphere() {
    let spec = ShootingSpec::new(
        2,
        1.0,
        StartMode::Axis { z0: 0.0 },
        StopRule::Alpha {
            target: 3.0,
            count: 1,
        },
    );
    let out = integrate_profile(&spec).unwrap();
    let p = &out.profile;
    for i in 0..p.len() {
        assert!(
            (p.x[i].hypot(p.z[i] - 1.0) - 1.0).abs() < 1e-9,
            "sample {i}"
        );
    }
    assert!((p.alpha[p.len() - 1] - 3.0).abs() < 1e-9);
}

#[test]
fn cylinder_is_a_fixed_point() {
    let spec = ShootingSpec::new(
        2,
        0.5,
        StartMode::Point {
            x0: 1.0,
            z0: 0.0,
            alpha0: FRAC_PI_2,
        },
        StopRule::Length(3.0),
    );
    let out = integrate_profile(&spec).unwrap();
    assert!(out.profile.x.iter().all(|x| (x - 1.0).abs() < 1e-12));
    assert!((out.profile.z[out.profile.len() - 1] - 3.0).abs() < 1e-12);
}

#[test]
fn flux_is_conserved() {
    let spec = ShootingSpec::new(
        3,
        1.0,
        StartMode::Point {
            x0: 0.7,
            z0: 0.0,
            alpha0: FRAC_PI_2,
        },
        StopRule::Length(6.0),
    );
    let out = integrate_profile(&spec).unwrap();
    let ode = CmcOde::new(3, 1.0);
    let phi0 = 0.7f64.powi(2) - 0.7f64.powi(3);
    let p = &out.profile;
    for i in 0..p.len() {
        let phi = ode.flux([p.x[i], p.z[i], p.alpha[i]]);
        assert!((phi - phi0).abs() < 1e-9);
    }
    assert!(out.flux_drift < 1e-9);
}

#[test]
fn flux_start_picks_vertical_radius() {
    let spec = ShootingSpec::new(
        2,
        1.0,
        StartMode::Flux { phi: 0.21, z0: 0.0 },
        StopRule::Length(1.0),
    );
    let y = spec.initial_state().unwrap();
    // Neck of x − x² = 0.21.
    assert!((y[0] - 0.3).abs() < 1e-12);
    assert_eq!(y[2], FRAC_PI_2);
}

#[test]
fn profile_reproduces_mean_curvature() {
    let s = delaunay_segment(3, 1.0, 0.4, 1.2, 4.0, 2000).unwrap();
    let c = curvature_data(&s).unwrap();
    let worst = c.h_check[1..c.h_check.len() - 1]
        .iter()
        .map(|h| (h - 1.0).abs())
        .fold(0.0, f64::max);
    // Second-order stencils for α′: the bound is a discretization bound, not
    // an integrator one.
    assert!(worst < 5e-5, "{worst}");
}

#[test]
fn caps_have_exact_residuals() {
    for (theta, r) in [(FRAC_PI_2, 1.0), (FRAC_PI_3, 1.0), (PI / 6.0, 2.0)] {
        let s = solve_halfspace_cap(2, theta, r).unwrap();
        let res = residuals(&s).unwrap();
        assert!(worst(&res.wall) < 1e-12 && worst(&res.angle) < 1e-12);
    }
}

#[test]
fn slab_shooting_finds_the_cylinder() {
    let problem = CapillaryProblem::slab(2, 2.0, FRAC_PI_2, FRAC_PI_2, 0.5);
    let family = SlabFamily::FixedCurvature {
        mean_curvature: 0.5,
        x0_min: 0.9,
        x0_max: 1.1,
        scan: 4,
    };
    let found = solve_slab_capillary(&problem, family, 500).unwrap();
    let cyl = found
        .iter()
        .find(|r| (r.parameter - 1.0).abs() < 1e-6)
        .expect("cylinder among the matches");
    assert!(worst(&cyl.residuals.wall) < 1e-12 && worst(&cyl.residuals.angle) < 1e-9);
    assert!(cyl.surface.profile.x.iter().all(|x| (x - 1.0).abs() < 1e-9));
    let direct = cylinder(2, 1.0, 2.0, 500).unwrap();
    assert_eq!(direct.topology(), cyl.surface.topology());
}

#[test]
fn slab_shooting_recovers_a_sphere_segment() {
    // Unit sphere between its parallels at polar angles π/3 and π/4 from the top.
    let (a0, a1) = (2.0 * FRAC_PI_3, 3.0 * FRAC_PI_4);
    let height = a0.cos() - a1.cos();
    let problem = CapillaryProblem::slab(2, height, PI - a0, a1, 1.0);
    let family = SlabFamily::FixedCurvature {
        mean_curvature: 1.0,
        x0_min: 0.5,
        x0_max: 1.0,
        scan: 40,
    };
    let found = solve_slab_capillary(&problem, family, 1000).unwrap();
    let seg = found
        .iter()
        .find(|r| (r.parameter - a0.sin()).abs() < 1e-6)
        .expect("sphere among the matches");
    let p = &seg.surface.profile;
    let zc = a0.cos();
    for i in 0..p.len() {
        assert!((p.x[i].hypot(p.z[i] - zc) - 1.0).abs() < 1e-9);
    }
    for (end, wall) in seg.surface.wall_ends() {
        let f = seg.surface.boundary_frame(end).unwrap();
        assert!((f.theta - problem.theta(wall)).abs() < 1e-9);
    }
}

#[test]
fn nodoid_reaches_overhang() {
    let r = free_boundary_nodoid(2, 1.0, 1.4, 1000).unwrap();
    let max_alpha = r
        .surface
        .profile
        .alpha
        .iter()
        .cloned()
        .fold(f64::MIN, f64::max);
    assert!(max_alpha > FRAC_PI_2 + 0.1);
    assert!(r.flux_drift < 1e-9);
    assert!(worst(&r.residuals.wall) < 1e-9);
}

#[test]
fn halfspace_nodoid_cap_search_reports_no_match() {
    let err = search_halfspace_nodoid_cap(2, FRAC_PI_4, 1.0, 1, 500).unwrap_err();
    assert!(matches!(err, CapstabError::NoMatch(_)), "{err}");
}

#[test]
fn crossing_the_axis_is_an_error() {
    let spec = ShootingSpec::new(
        2,
        0.0,
        StartMode::Point {
            x0: 0.1,
            z0: 0.0,
            alpha0: PI,
        },
        StopRule::Length(1.0),
    );
    assert!(matches!(
        integrate_profile(&spec),
        Err(CapstabError::IntegrationBlowup { .. })
    ));
}

#[test]
fn unreachable_level_exceeds_max_length() {
    let mut spec = ShootingSpec::new(
        2,
        0.5,
        StartMode::Point {
            x0: 1.0,
            z0: 0.0,
            alpha0: FRAC_PI_2,
        },
        StopRule::ZLevel(-1.0),
    );
    spec.max_length = 10.0;
    assert!(matches!(
        integrate_profile(&spec),
        Err(CapstabError::MaxLengthExceeded(_))
    ));
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ShootingSpec::new(2, 1.0, StartMode::Axis { z0: 0.0 }, StopRule::Length(1.0));
    spec.tolerance = 1e-3;
    assert!(matches!(
        integrate_profile(&spec),
        Err(CapstabError::InvalidInput(_))
    ));
    let spec = ShootingSpec::new(2, 1.0, StartMode::Axis { z0: 0.0 }, StopRule::Length(1.0))
        .with_samples(8);
    assert_eq!(
        integrate_profile(&spec).unwrap_err(),
        CapstabError::GridTooCoarse(8)
    );
    assert!(free_boundary_unduloid(2, 1.0, 0.5, 1, 100).is_err());
    assert!(free_boundary_unduloid(2, 1.0, 1.2, 1, 100).is_err());
}

#[test]
fn unduloid_walls_are_lower_and_upper() {
    let r = free_boundary_unduloid(3, 1.0, 0.3, 2, 400).unwrap();
    let walls: Vec<Wall> = r.surface.wall_ends().into_iter().map(|(_, w)| w).collect();
    assert_eq!(walls, vec![Wall::Lower, Wall::Upper]);
    for (end, _) in r.surface.wall_ends() {
        let f = r.surface.boundary_frame(end).unwrap();
        assert!((f.theta - FRAC_PI_2).abs() < 1e-9);
    }
}
