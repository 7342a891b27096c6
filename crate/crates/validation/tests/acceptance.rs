//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};
use std::time::{Duration, Instant};

use capstab_core::delaunay::{
    cylinder, free_boundary_unduloid, halfspace_cap_with, search_halfspace_nodoid_cap,
    DEFAULT_SAMPLES,
};
use capstab_core::identity::{first_variation_check, identity_suite, ResidualReport};
use capstab_core::stability::{
    assemble_mode, classify_stability, classify_stability_refined, kth_eigenvalue,
    StabilityTolerances, Verdict,
};
use capstab_core::sweep::{
    bisect_flip, first_flip, neck_grid, run_sweep, Family, FamilyParams, ParamRange, SweepSettings,
};
use capstab_core::testfn::eval_phi;
use capstab_core::{CapstabError, RevolutionSurface};

const M: usize = DEFAULT_SAMPLES;

// Criterion 1.
const IDENTITY_MAX: f64 = 1e-5;
const ORDER_RANGE: (f64, f64) = (1.7, 2.3);
const FV_DELTA: f64 = 1e-4;
// Criterion 2 and 3.
const PHI_CAP_MAX: f64 = 1e-9;
const PHI_MEAN_MAX: f64 = 1e-7;
const PHI_NONUMBILIC_MIN: f64 = 1e-2;
const CHAIN_REL: f64 = 1e-4;
// Criterion 4.
const CYL_RANGE: (f64, f64, usize) = (2.8, 3.5, 36);
const LOCALIZE_REL: f64 = 0.01;
// Criterion 5 and 6.
const NECKS: usize = 50;
// Criterion 7.
const TRANSLATION_MAX: f64 = 1e-5;
// Criterion 8.
const FOURIER_REL: f64 = 1e-4;
// Criterion 9. Large enough that O(δ²) defects sit well above roundoff.
const RATIO_DELTA: f64 = 1e-3;
const RATIO_RANGE: (f64, f64) = (3.5, 4.5);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn unduloid(n: usize, a: f64) -> RevolutionSurface {
    free_boundary_unduloid(n, 1.0, a, 1, M)
        .expect("unduloid")
        .surface
}

fn criterion_1() -> Outcome {
    // Necks at 0.9 of the cylinder radius (n − 1)/n.
    let surfaces: Vec<(&str, RevolutionSurface)> = vec![
        (
            "hemisphere",
            halfspace_cap_with(2, FRAC_PI_2, 1.0, M).unwrap(),
        ),
        (
            "cap pi/3",
            halfspace_cap_with(2, FRAC_PI_3, 1.0, M).unwrap(),
        ),
        ("cylinder r=1 h=2", cylinder(2, 1.0, 2.0, M).unwrap()),
        ("unduloid n=2 a=0.45", unduloid(2, 0.45)),
        ("unduloid n=3 a=0.6", unduloid(3, 0.6)),
    ];
    let bump = |_: f64, y: [f64; 3]| 1.0 + 0.3 * y[1].sin();
    let mut failures = Vec::new();
    let (mut worst, mut lo, mut hi, mut exact) = (0.0_f64, f64::INFINITY, f64::NEG_INFINITY, 0);
    let mut count = 0;
    for (name, s) in &surfaces {
        let mut reports: Vec<ResidualReport> = match identity_suite(s) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{name}: {e}"));
                continue;
            }
        };
        match first_variation_check(s, &bump, FV_DELTA) {
            Ok(fv) => reports.push(fv.as_residual_report(M)),
            Err(e) => failures.push(format!("{name} first variation: {e}")),
        }
        for r in reports {
            count += 1;
            worst = worst.max(r.max_residual);
            if r.exact {
                exact += 1;
            } else if let Some(p) = r.order {
                lo = lo.min(p);
                hi = hi.max(p);
            }
            if r.max_residual > IDENTITY_MAX || !r.order_ok(ORDER_RANGE.0, ORDER_RANGE.1) {
                failures.push(format!(
                    "{name} {}: max {:.2e} order {:?}",
                    r.id.as_str(),
                    r.max_residual,
                    r.order
                ));
            }
        }
    }
    let detail = format!(
        "{count} checks on 5 surfaces, max residual {worst:.2e} (tol {IDENTITY_MAX:e}), orders in [{lo:.3}, {hi:.3}], {exact} at roundoff"
    );
    if failures.is_empty() {
        outcome(true, detail)
    } else {
        outcome(false, format!("{detail}; failing: {}", failures.join("; ")))
    }
}

fn nodoid_cap_search(theta: f64) -> Result<RevolutionSurface, CapstabError> {
    search_halfspace_nodoid_cap(2, theta, 1.0, 2, M).map(|(r, _)| r.surface)
}

fn criterion_2() -> Outcome {
    let mut worst = 0.0_f64;
    for theta in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, FRAC_PI_2] {
        match eval_phi(&halfspace_cap_with(2, theta, 1.0, M).unwrap()) {
            Ok(r) => worst = worst.max(r.max_abs),
            Err(e) => return outcome(false, format!("eval_phi on cap θ={theta:.4}: {e}")),
        }
    }
    let caps_ok = worst <= PHI_CAP_MAX;
    let caps = format!("caps max|φ| = {worst:.1e} (tol {PHI_CAP_MAX:e})");
    match nodoid_cap_search(FRAC_PI_4) {
        Ok(s) => match eval_phi(&s) {
            Ok(r) => {
                let ok = caps_ok && r.mean.abs() <= PHI_MEAN_MAX && r.max_abs > PHI_NONUMBILIC_MIN;
                outcome(
                    ok,
                    format!(
                        "{caps}; nodoid cap |mean φ| = {:.1e}, max|φ| = {:.2e}",
                        r.mean.abs(),
                        r.max_abs
                    ),
                )
            }
            Err(e) => outcome(false, format!("{caps}; nodoid cap: {e}")),
        },
        Err(e) => outcome(
            false,
            format!("{caps}; no half-space nodoid cap to test: {e}"),
        ),
    }
}

fn criterion_3() -> Outcome {
    match nodoid_cap_search(FRAC_PI_4) {
        Ok(s) => match capstab_core::testfn::check_phi_identities(&s) {
            Ok(checks) => {
                let worst = checks.iter().map(|c| c.rel).fold(0.0, f64::max);
                outcome(
                    worst <= CHAIN_REL,
                    format!(
                        "{} identities, worst relative {worst:.2e} (tol {CHAIN_REL:e})",
                        checks.len()
                    ),
                )
            }
            Err(e) => outcome(false, e.to_string()),
        },
        Err(e) => outcome(
            false,
            format!("no θ=π/4 half-space nodoid cap to test: {e}"),
        ),
    }
}

fn criterion_4() -> Outcome {
    let params = FamilyParams::new(Family::Cylinder, 2);
    let settings = SweepSettings {
        refine: false,
        identities: false,
        ..SweepSettings::default()
    };
    let range = ParamRange::new(CYL_RANGE.0, CYL_RANGE.1, CYL_RANGE.2);
    let records = run_sweep(&params, &range, &settings).unwrap();
    let failed = records.iter().filter(|r| !r.ok()).count();
    let Some((a, b)) = first_flip(&records) else {
        return outcome(false, "no verdict flip in the sweep");
    };
    let first = records[0].verdict.unwrap();
    let straddles = a < PI && PI < b;
    let (lo, hi) = match bisect_flip(&params, &settings, a, b, 1e-4) {
        Ok(br) => br,
        Err(e) => return outcome(false, format!("bisection: {e}")),
    };
    let h_star = 0.5 * (lo + hi);
    let rel = (h_star - PI).abs() / PI;
    let ok = failed == 0
        && first != Verdict::Unstable
        && straddles
        && rel <= LOCALIZE_REL
        && (hi - lo) / h_star <= LOCALIZE_REL;
    outcome(
        ok,
        format!(
            "{} points, flip between h={a:.4} and h={b:.4}, bisected threshold h*={h_star:.6}, |h*−π|/π = {rel:.1e} (tol {LOCALIZE_REL})",
            records.len()
        ),
    )
}

fn landscape(n: usize, refine: bool) -> Vec<capstab_core::sweep::SweepRecord> {
    let params = FamilyParams::new(Family::Unduloid, n);
    let settings = SweepSettings {
        refine,
        identities: false,
        ..SweepSettings::default()
    };
    run_sweep(&params, &neck_grid(NECKS), &settings).unwrap()
}

fn criterion_5() -> Outcome {
    let mut stable = Vec::new();
    let mut raw_stable = Vec::new();
    let (mut unstable, mut marginal, mut errors, mut total) = (0, 0, 0, 0);
    for n in 2..=7 {
        for r in landscape(n, true) {
            total += 1;
            match r.verdict {
                Some(Verdict::Stable) => stable.push(format!("n={n} a={:.5}", r.param)),
                Some(Verdict::Marginal) => marginal += 1,
                Some(Verdict::Unstable) => unstable += 1,
                None => errors += 1,
            }
        }
        for r in landscape(n, false) {
            if r.verdict == Some(Verdict::Stable) {
                raw_stable.push(format!(
                    "n={n} a={:.5} λ={:.2e}",
                    r.param,
                    r.worst_lambda.unwrap()
                ));
            }
        }
    }
    let raw = if raw_stable.is_empty() {
        "none".to_string()
    } else {
        raw_stable.join(", ")
    };
    outcome(
        stable.is_empty() && errors == 0,
        format!(
            "{total} unduloids (n=2..7, {NECKS} necks each, extrapolated eigenvalues): {unstable} unstable, {marginal} marginal, {} stable {:?}, {errors} errors; single-grid M={M} stable: {raw}",
            stable.len(),
            stable
        ),
    )
}

fn criterion_6() -> Outcome {
    let tol = StabilityTolerances::default();
    let records = landscape(9, true);
    let mut witnesses = 0;
    let mut best: Option<(f64, f64)> = None;
    for r in records
        .iter()
        .filter(|r| r.verdict == Some(Verdict::Stable))
    {
        let s = unduloid(9, r.param);
        let rep = classify_stability_refined(&s, &tol).unwrap();
        let all_modes = rep.modes.iter().all(|m| m.lambda_min >= -tol.eps_stab);
        if all_modes && rep.constrained_l0 > tol.eps_stab {
            witnesses += 1;
            if best.is_none_or(|(_, l)| rep.constrained_l0 > l) {
                best = Some((r.param, rep.constrained_l0));
            }
        }
    }
    let detail = match best {
        Some((a, l)) => format!(
            "{witnesses} of {} necks stable, e.g. a={a:.4} with constrained λ₀ = {l:.3e}",
            records.len()
        ),
        None => format!("no stable record among {} necks", records.len()),
    };
    outcome(witnesses >= 1, detail)
}

fn criterion_7() -> Outcome {
    let tol = StabilityTolerances::default();
    let mut worst_t = 0.0_f64;
    for theta in [FRAC_PI_6, FRAC_PI_4, FRAC_PI_3, FRAC_PI_2] {
        let s = halfspace_cap_with(2, theta, 1.0, M).unwrap();
        let r = classify_stability(&s, &tol).unwrap();
        let Some(m1) = r.modes.iter().find(|m| m.l == 1) else {
            return outcome(false, format!("θ={theta:.4}: no ℓ=1 mode computed"));
        };
        worst_t = worst_t.max(m1.lambda_min.abs());
        if r.verdict != Verdict::Stable || m1.lambda_min.abs() > TRANSLATION_MAX {
            return outcome(
                false,
                format!(
                    "θ={theta:.4}: verdict {}, ℓ=1 λ = {:.2e}",
                    r.verdict, m1.lambda_min
                ),
            );
        }
    }
    outcome(
        true,
        format!("4 caps stable, max |λ(ℓ=1)| = {worst_t:.1e} (tol {TRANSLATION_MAX:e})"),
    )
}

fn criterion_8() -> Outcome {
    let (r, h) = (1.0, 2.0);
    let s = cylinder(2, r, h, M).unwrap();
    let mut worst = 0.0_f64;
    for l in 0..=3usize {
        let p = assemble_mode(&s, l).unwrap();
        for k in 0..=3usize {
            let lam = kth_eigenvalue(&p.stiffness, &p.mass, k + 1).unwrap();
            let kk = k as f64 * PI / h;
            let exact = kk * kk + ((l * l) as f64 - 1.0) / (r * r);
            worst = worst.max((lam - exact).abs() / exact.abs().max(1.0));
        }
    }
    outcome(
        worst <= FOURIER_REL,
        format!("16 eigenvalues, worst relative error {worst:.2e} (tol {FOURIER_REL:e}, floor 1)"),
    )
}

fn criterion_9() -> Outcome {
    let cases = [
        ("cylinder n=2", cylinder(2, 1.0, 2.0, M).unwrap()),
        ("cylinder n=3", cylinder(3, 1.0, 2.0, M).unwrap()),
        (
            "cap pi/3",
            halfspace_cap_with(2, FRAC_PI_3, 1.0, M).unwrap(),
        ),
    ];
    let bump = |_: f64, y: [f64; 3]| 1.0 + 0.3 * y[1].sin();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, s) in &cases {
        let r = match first_variation_check(s, &bump, RATIO_DELTA) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("{name}: {e}")),
        };
        ok &= r.ratios_ok(RATIO_RANGE.0, RATIO_RANGE.1);
        let show = |ratio: f64, exact: bool| {
            if exact {
                "exact".to_string()
            } else {
                format!("{ratio:.3}")
            }
        };
        parts.push(format!(
            "{name} E′ {} V′ {}",
            show(r.energy_ratio, r.energy_exact),
            show(r.volume_ratio, r.volume_exact)
        ));
    }
    outcome(
        ok,
        format!(
            "halving ratios (range {:?}): {}",
            RATIO_RANGE,
            parts.join(", ")
        ),
    )
}

/// Name, check, time budget in seconds.
type Criterion = (&'static str, fn() -> Outcome, u64);

fn main() {
    let criteria: [Criterion; 9] = [
        ("identity suite", criterion_1, 30),
        ("phi rigidity", criterion_2, 10),
        ("identity chain on a nodoid cap", criterion_3, 10),
        ("cylinder threshold", criterion_4, 60),
        ("landscape n=2..7", criterion_5, 900),
        ("landscape n=9", criterion_6, 300),
        ("stability of caps", criterion_7, 30),
        ("cylinder Fourier spectrum", criterion_8, 60),
        ("first variation", criterion_9, 60),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = run();
        let elapsed = t.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {} {}: {} [{:.1} s of {} s]: {}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            name,
            elapsed.as_secs_f64(),
            budget,
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
