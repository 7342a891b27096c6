use std::f64::consts::{FRAC_PI_2, PI};

use capstab_core::delaunay::{free_boundary_unduloid, halfspace_cap_with};
use capstab_core::geometry::{curvature_data, ProfileCurve};
use capstab_core::numerics::{dot, unit_sphere_area};
use capstab_core::ode::CmcOde;
use capstab_core::stability::{assemble_mode, index_value, min_eigenvalue, smallest_eigenvalues};
use capstab_core::testfn::{eval_w, phi_values};
use proptest::prelude::*;

fn neck(n: usize, frac: f64) -> f64 {
    frac * (n as f64 - 1.0) / n as f64
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn flux_is_constant_along_unduloids(n in 2usize..7, frac in 0.1f64..0.9, h in 0.5f64..2.0) {
        let a = neck(n, frac) / h;
        let r = free_boundary_unduloid(n, h, a, 2, 600).unwrap();
        let ode = CmcOde::new(n, h);
        let p = &r.surface.profile;
        let phi0 = ode.flux([p.x[0], p.z[0], p.alpha[0]]);
        for i in 0..p.len() {
            let phi = ode.flux([p.x[i], p.z[i], p.alpha[i]]);
            prop_assert!((phi - phi0).abs() <= 1e-9 * phi0.abs().max(1.0));
        }
    }

    #[test]
    fn umbilicity_defect_is_nonnegative(n in 2usize..7, frac in 0.1f64..0.9) {
        let s = free_boundary_unduloid(n, 1.0, neck(n, frac), 1, 500).unwrap().surface;
        let c = curvature_data(&s).unwrap();
        let nn = n as f64;
        for i in 0..c.sigma_sq.len() {
            let h = (c.kappa1[i] + (nn - 1.0) * c.kappa2[i]) / nn;
            prop_assert!(c.sigma_sq[i] - nn * h * h >= -1e-10);
        }
    }

    #[test]
    fn cap_frames_are_orthonormal(n in 2usize..6, theta in 0.1f64..(PI - 0.1), r in 0.2f64..5.0) {
        let s = halfspace_cap_with(n, theta, r, 300).unwrap();
        for (end, _) in s.wall_ends() {
            let f = s.boundary_frame(end).unwrap();
            let (r1, r2) = f.relation_residuals();
            prop_assert!(r1 < 1e-12 && r2 < 1e-12);
            prop_assert!((f.theta - theta).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_vanishes_on_every_cap(n in 2usize..6, theta in 0.1f64..(PI - 0.1), r in 0.2f64..5.0) {
        let s = halfspace_cap_with(n, theta, r, 300).unwrap();
        prop_assert!(phi_values(&s).iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn rayleigh_quotients_bound_the_minimum(
        frac in 0.2f64..0.9,
        l in 0usize..4,
        coeffs in prop::collection::vec(-1.0f64..1.0, 4),
    ) {
        let s = free_boundary_unduloid(3, 1.0, neck(3, frac), 1, 400).unwrap().surface;
        let p = assemble_mode(&s, l).unwrap();
        let (lam, _) = min_eigenvalue(&p, false).unwrap();
        let len = s.profile.length();
        let g: Vec<f64> = s.profile.s.iter().map(|t| {
            let u = (t - s.profile.s[0]) / len;
            coeffs.iter().enumerate().map(|(k, c)| c * (PI * k as f64 * u).cos()).sum::<f64>()
        }).collect();
        let rg = p.restrict(&g);
        let m = p.mass.bilinear(&rg, &rg);
        prop_assume!(m > 1e-8);
        let rq = p.stiffness.bilinear(&rg, &rg) / m;
        prop_assert!(rq >= lam - 1e-9 * (1.0 + lam.abs()));
        let omega = unit_sphere_area(3);
        let iq = index_value(&s, &[(l, g.clone())]).unwrap() / (omega * m);
        prop_assert!((iq - rq).abs() < 1e-8 * (1.0 + rq.abs()));
    }

    #[test]
    fn constraint_raises_the_minimum(n in 2usize..8, frac in 0.1f64..0.95) {
        let s = free_boundary_unduloid(n, 1.0, neck(n, frac), 1, 400).unwrap().surface;
        let p = assemble_mode(&s, 0).unwrap();
        let (free, _) = min_eigenvalue(&p, false).unwrap();
        let (cons, g) = min_eigenvalue(&p, true).unwrap();
        prop_assert!(cons >= free - 1e-10 * (1.0 + free.abs()));
        let c = p.constraint.as_ref().unwrap();
        prop_assert!(dot(c, &p.restrict(&g)).abs() < 1e-9);
    }

    #[test]
    fn mode_minima_increase_with_l(n in 2usize..8, frac in 0.1f64..0.95) {
        let s = free_boundary_unduloid(n, 1.0, neck(n, frac), 1, 400).unwrap().surface;
        let mut prev = f64::NEG_INFINITY;
        for l in 0..5 {
            let (lam, _) = min_eigenvalue(&assemble_mode(&s, l).unwrap(), false).unwrap();
            prop_assert!(lam >= prev - 1e-10);
            prev = lam;
        }
    }

    #[test]
    fn translations_are_jacobi_fields(n in 2usize..6, frac in 0.3f64..0.9) {
        let s = free_boundary_unduloid(n, 1.0, neck(n, frac), 1, 1000).unwrap().surface;
        let p = assemble_mode(&s, 1).unwrap();
        let lams = smallest_eigenvalues(&p, 3).unwrap();
        prop_assert!(lams.iter().any(|l| l.abs() < 1e-5), "{lams:?}");
        let t: Vec<f64> = s.profile.alpha.iter().map(|a| a.sin()).collect();
        let rt = p.restrict(&t);
        let mass = unit_sphere_area(n) * p.mass.bilinear(&rt, &rt);
        prop_assert!((index_value(&s, &[(1, t)]).unwrap() / mass).abs() < 1e-5);
    }

    #[test]
    fn w_is_mean_zero(n in 2usize..5, theta in (FRAC_PI_2 + 0.1)..(PI - 0.1), r in 0.5f64..2.0) {
        let s = halfspace_cap_with(n, theta, r, 800).unwrap();
        let w = eval_w(&s).unwrap();
        prop_assert!(w.mean.abs() < 1e-10);
        prop_assert!(w.balance.unwrap() > 0.0);
    }

    #[test]
    fn csv_round_trip(frac in 0.1f64..0.9, h in 0.3f64..3.0) {
        let s = free_boundary_unduloid(2, h, neck(2, frac) / h, 1, 64).unwrap().surface;
        let back = ProfileCurve::read_csv(s.profile.to_csv_string().as_bytes()).unwrap();
        prop_assert_eq!(back, s.profile);
    }
}

#[test]
fn cap_spectrum_scales_with_radius() {
    let a = halfspace_cap_with(2, 1.0, 1.0, 800).unwrap();
    let b = halfspace_cap_with(2, 1.0, 2.5, 800).unwrap();
    for l in 0..3 {
        let la = min_eigenvalue(&assemble_mode(&a, l).unwrap(), l == 0)
            .unwrap()
            .0;
        let lb = min_eigenvalue(&assemble_mode(&b, l).unwrap(), l == 0)
            .unwrap()
            .0;
        assert!(
            (la - 6.25 * lb).abs() < 1e-9 * (1.0 + la.abs()),
            "l={l}: {la} {lb}"
        );
    }
}
