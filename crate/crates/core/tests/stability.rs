use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI};

use capstab_core::delaunay::{cylinder, free_boundary_unduloid, solve_halfspace_cap};
use capstab_core::geometry::{robin_coefficient, RevolutionSurface};
use capstab_core::numerics::{dot, SymTridiagonal};
use capstab_core::stability::{
    assemble_mode, classify_stability, classify_stability_refined, index_value, kth_eigenvalue,
    min_eigenvalue, translation_mismatch, BoundaryCondition, StabilityTolerances, Verdict,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn dense(t: &SymTridiagonal) -> DMatrix<f64> {
    let n = t.dim();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = t.diag[i];
        if i + 1 < n {
            m[(i, i + 1)] = t.off[i];
            m[(i + 1, i)] = t.off[i];
        }
    }
    m
}

/// Smallest eigenvalue of `(A, M)` restricted to `{cᵀg = 0}` (or unrestricted),
/// via a dense orthonormal basis of the constraint space and Cholesky reduction.
fn dense_min(a: &DMatrix<f64>, m: &DMatrix<f64>, c: Option<&[f64]>) -> f64 {
    let n = a.nrows();
    let q = match c {
        Some(c) => {
            let cv = DVector::from_column_slice(c).normalize();
            // Householder reflector mapping e₀ to c; its last n−1 columns span c^⊥.
            let mut v = cv.clone();
            v[0] -= 1.0;
            let h = if v.norm() < 1e-14 {
                DMatrix::identity(n, n)
            } else {
                let v = v.normalize();
                DMatrix::identity(n, n) - 2.0 * &v * v.transpose()
            };
            h.columns(1, n - 1).into_owned()
        }
        None => DMatrix::identity(n, n),
    };
    let ar = q.transpose() * a * &q;
    let mr = q.transpose() * m * &q;
    let l = mr.cholesky().expect("mass matrix is positive definite").l();
    let li = l.try_inverse().unwrap();
    let s = &li * ar * li.transpose();
    let s = (&s + s.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.min()
}

fn cylinder_lambda(n: usize, r: f64, h: f64, l: usize, k: usize) -> f64 {
    let kk = k as f64 * PI / h;
    kk * kk + ((l * (l + n - 2)) as f64 - (n as f64 - 1.0)) / (r * r)
}

#[test]
fn tridiagonal_solver_matches_dense_oracle() {
    let cases: Vec<RevolutionSurface> = vec![
        solve_halfspace_cap(2, FRAC_PI_3, 1.0)
            .unwrap()
            .resampled(60)
            .unwrap(),
        free_boundary_unduloid(2, 1.0, 0.3, 2, 80).unwrap().surface,
        free_boundary_unduloid(4, 1.0, 0.5, 2, 80).unwrap().surface,
        // Constrained root close to λ₂ relative to the grid scale.
        solve_halfspace_cap(2, 1.0, 2.5)
            .unwrap()
            .resampled(800)
            .unwrap(),
    ];
    for s in &cases {
        for l in 0..3 {
            let p = assemble_mode(s, l).unwrap();
            let (a, m) = (dense(&p.stiffness), dense(&p.mass));
            let (lam, _) = min_eigenvalue(&p, false).unwrap();
            let oracle = dense_min(&a, &m, None);
            assert!(
                (lam - oracle).abs() < 1e-9 * (1.0 + oracle.abs()),
                "l={l}: {lam} vs {oracle}"
            );
            if l == 0 {
                let c = p.constraint.as_ref().unwrap();
                let (lam_c, g) = min_eigenvalue(&p, true).unwrap();
                let oracle_c = dense_min(&a, &m, Some(c));
                assert!(
                    (lam_c - oracle_c).abs() < 1e-8 * (1.0 + oracle_c.abs()),
                    "{lam_c} vs {oracle_c}"
                );
                assert!(dot(c, &p.restrict(&g)).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn cylinder_spectrum_matches_fourier_modes() {
    let (r, h) = (1.0, 2.0);
    let s = cylinder(2, r, h, 2000).unwrap();
    for l in 0..=3 {
        let p = assemble_mode(&s, l).unwrap();
        for k in 0..=3 {
            let lam = kth_eigenvalue(&p.stiffness, &p.mass, k + 1).unwrap();
            let exact = cylinder_lambda(2, r, h, l, k);
            let err = (lam - exact).abs() / exact.abs().max(1.0);
            assert!(err < 1e-4, "l={l} k={k}: {lam} vs {exact}");
        }
    }
}

#[test]
fn cylinder_constrained_mode_in_higher_dimension() {
    let s = cylinder(4, 1.5, 3.0, 1500).unwrap();
    let (lam, _) = min_eigenvalue(&assemble_mode(&s, 0).unwrap(), true).unwrap();
    let exact = cylinder_lambda(4, 1.5, 3.0, 0, 1);
    assert!((lam - exact).abs() < 1e-4 * exact.abs());
}

#[test]
fn cylinder_eigenvalues_converge_quadratically() {
    let lam = |m: usize| {
        let s = cylinder(2, 1.0, 4.0, m).unwrap();
        min_eigenvalue(&assemble_mode(&s, 0).unwrap(), true)
            .unwrap()
            .0
    };
    let exact = PI * PI / 16.0 - 1.0;
    let e1 = (lam(200) - exact).abs();
    let e2 = (lam(399) - exact).abs();
    assert!((3.5..4.5).contains(&(e1 / e2)), "{e1} {e2}");
}

#[test]
fn cylinder_verdicts() {
    let tol = StabilityTolerances::default();
    let long = classify_stability(&cylinder(2, 1.0, 4.0, 1000).unwrap(), &tol).unwrap();
    assert_eq!(long.verdict, Verdict::Unstable);
    assert_eq!(long.worst_l, 0);
    assert!((long.constrained_l0 - (PI * PI / 16.0 - 1.0)).abs() < 1e-4);
    let short = classify_stability(&cylinder(2, 1.0, 3.0, 1000).unwrap(), &tol).unwrap();
    assert_eq!(short.verdict, Verdict::Stable);
    assert!(short.modes[1].translation);
}

#[test]
fn hemisphere_translation_kernel() {
    let s = solve_halfspace_cap(2, FRAC_PI_2, 1.0).unwrap();
    let p = assemble_mode(&s, 1).unwrap();
    let (lam, g) = min_eigenvalue(&p, false).unwrap();
    assert!(lam.abs() < 1e-6);
    assert!(translation_mismatch(&s, &p, &g) < 1e-3);
    // sin α is the horizontal component of N up to sign: a Jacobi field.
    let t: Vec<f64> = s.profile.alpha.iter().map(|a| a.sin()).collect();
    let rt = p.restrict(&t);
    let rq = p.stiffness.bilinear(&rt, &rt) / p.mass.bilinear(&rt, &rt);
    assert!(rq.abs() < 1e-6, "{rq}");
}

#[test]
fn cap_robin_terms() {
    let s = solve_halfspace_cap(2, FRAC_PI_3, 1.0).unwrap();
    let p = assemble_mode(&s, 0).unwrap();
    let (end, _) = s.wall_ends()[0];
    let q = robin_coefficient(&s, end).unwrap();
    let bc = if end == capstab_core::End::Start {
        p.start_bc
    } else {
        p.finish_bc
    };
    assert_eq!(bc, BoundaryCondition::Robin { q });
    assert!((q - 1.0 / 3f64.sqrt()).abs() < 1e-6);
    let p1 = assemble_mode(&s, 1).unwrap();
    assert_eq!(p1.dofs.len(), s.profile.len() - 1);
    assert!(p1.constraint.is_none());
}

#[test]
fn caps_are_stable() {
    let tol = StabilityTolerances::default();
    for theta in [PI / 6.0, PI / 4.0, FRAC_PI_3, FRAC_PI_2, 2.0 * FRAC_PI_3] {
        let r = classify_stability(&solve_halfspace_cap(2, theta, 1.0).unwrap(), &tol).unwrap();
        assert_eq!(r.verdict, Verdict::Stable, "θ = {theta}");
        let m1 = &r.modes[1];
        assert!(m1.translation && m1.lambda_min.abs() <= 1e-5);
        assert!(r.monotone);
    }
}

#[test]
fn hemisphere_constant_function_index() {
    let s = solve_halfspace_cap(2, FRAC_PI_2, 1.0).unwrap();
    let one = vec![1.0; s.profile.len()];
    // −∫|σ|² = −2 · 2π on the unit hemisphere.
    let value = index_value(&s, &[(0, one)]).unwrap();
    assert!((value + 4.0 * PI).abs() < 1e-4, "{value}");
    let zero = vec![0.0; s.profile.len()];
    assert_eq!(
        index_value(&s, &[(0, zero.clone()), (2, zero)]).unwrap(),
        0.0
    );
}

#[test]
fn cylinder_translation_index_vanishes() {
    let s = cylinder(3, 1.0, 2.5, 800).unwrap();
    let t: Vec<f64> = s.profile.alpha.iter().map(|a| a.sin()).collect();
    assert!(index_value(&s, &[(1, t)]).unwrap().abs() < 1e-6);
}

#[test]
fn rayleigh_quotient_reproduces_eigenvalue() {
    let s = free_boundary_unduloid(3, 1.0, 0.4, 2, 1000)
        .unwrap()
        .surface;
    for l in 0..3 {
        let p = assemble_mode(&s, l).unwrap();
        let (lam, g) = min_eigenvalue(&p, l == 0).unwrap();
        let omega = capstab_core::numerics::unit_sphere_area(3);
        let rq = index_value(&s, &[(l, g.clone())]).unwrap() / (omega * p.mass_norm_sq(&g));
        assert!(
            (rq - lam).abs() < 1e-8 * (1.0 + lam.abs()),
            "l={l}: {rq} vs {lam}"
        );
    }
}

#[test]
fn low_dimension_unduloids_are_unstable() {
    let tol = StabilityTolerances::default();
    for n in [2, 3, 5] {
        let u = free_boundary_unduloid(n, 1.0, 0.3, 1, 1000)
            .unwrap()
            .surface;
        assert_eq!(
            classify_stability(&u, &tol).unwrap().verdict,
            Verdict::Unstable,
            "n = {n}"
        );
    }
}

#[test]
fn some_high_dimension_unduloid_is_stable() {
    let tol = StabilityTolerances::default();
    let u = free_boundary_unduloid(9, 1.0, 0.5, 1, 1000)
        .unwrap()
        .surface;
    let r = classify_stability(&u, &tol).unwrap();
    assert_eq!(r.verdict, Verdict::Stable);
    assert!(r.constrained_l0 > tol.eps_stab);
}

#[test]
fn extrapolation_resolves_near_cylindrical_unduloids() {
    // Neck 1.4e−4 below the cylinder radius 2/3: the constrained eigenvalue is
    // below −ε_stab, but the M = 2000 discretization error exceeds it.
    let a = 0.02 + 0.96 * 33.0 / 49.0;
    let tol = StabilityTolerances::default();
    let u = free_boundary_unduloid(3, 1.0, a, 1, 2000).unwrap().surface;
    let raw = classify_stability(&u, &tol).unwrap();
    let refined = classify_stability_refined(&u, &tol).unwrap();
    let reference = classify_stability(
        &free_boundary_unduloid(3, 1.0, a, 1, 8000).unwrap().surface,
        &tol,
    )
    .unwrap();
    assert!(raw.constrained_l0 > 0.0);
    assert_eq!(refined.verdict, Verdict::Unstable);
    assert_eq!(reference.verdict, Verdict::Unstable);
    assert!(refined.extrapolated && !raw.extrapolated);
    // The extrapolated value is closer to the fine grid than the M = 2000 one.
    let d_ref = (refined.constrained_l0 - reference.constrained_l0).abs();
    assert!(d_ref < 0.2 * (raw.constrained_l0 - reference.constrained_l0).abs());
    assert!(refined.modes[0].error_estimate.unwrap() > raw.constrained_l0);
}

#[test]
fn extrapolation_keeps_exact_cylinder_values() {
    let s = cylinder(2, 1.0, 4.0, 2000).unwrap();
    let r = classify_stability_refined(&s, &StabilityTolerances::default()).unwrap();
    assert!((r.constrained_l0 - (PI * PI / 16.0 - 1.0)).abs() < 1e-9);
    assert_eq!(r.verdict, Verdict::Unstable);
}

#[test]
fn report_serializes() {
    let r = classify_stability(
        &cylinder(2, 1.0, 2.0, 200).unwrap(),
        &StabilityTolerances::default(),
    )
    .unwrap();
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"verdict\":\"stable\""));
    assert!(json.contains(&r.surface_hash));
}
