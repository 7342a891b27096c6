//! WebAssembly bindings for the browser demo. Every export takes plain
//! numbers and returns a JSON string; the `*_json` functions hold the logic
//! and run natively too.

use capstab_core::geometry::areas;
use capstab_core::stability::{classify_stability, StabilityTolerances};
use capstab_core::sweep::Family;
use capstab_core::sweep::{run_sweep, FamilyParams, ParamRange, SweepSettings};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Samples used when the caller passes 0.
pub const DEMO_GRID: usize = 600;

fn params(family: &str, n: usize) -> Result<FamilyParams, String> {
    let family: Family = family
        .parse()
        .map_err(|e: capstab_core::CapstabError| e.to_string())?;
    if n < 2 {
        return Err(format!("n = {n} must be at least 2"));
    }
    Ok(FamilyParams::new(family, n))
}

fn grid_or_default(grid: usize) -> usize {
    if grid == 0 {
        DEMO_GRID
    } else {
        grid
    }
}

#[derive(Serialize)]
struct ProfileOut<'a> {
    x: &'a [f64],
    z: &'a [f64],
    length: f64,
    lateral_area: f64,
    volume: f64,
    mean_curvature: f64,
}

/// Sampled profile of one family member.
pub fn profile_json(family: &str, n: usize, param: f64, grid: usize) -> Result<String, String> {
    let s = params(family, n)?
        .surface(param, grid_or_default(grid))
        .map_err(|e| e.to_string())?;
    let a = areas(&s).map_err(|e| e.to_string())?;
    let out = ProfileOut {
        x: &s.profile.x,
        z: &s.profile.z,
        length: s.profile.length(),
        lateral_area: a.lateral_area,
        volume: a.enclosed_volume,
        mean_curvature: s.mean_curvature(),
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Single-grid stability report.
pub fn stability_json(family: &str, n: usize, param: f64, grid: usize) -> Result<String, String> {
    let s = params(family, n)?
        .surface(param, grid_or_default(grid))
        .map_err(|e| e.to_string())?;
    let report =
        classify_stability(&s, &StabilityTolerances::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// Verdicts over `count` values in `[min, max]`; failed points carry their error.
pub fn scan_json(
    family: &str,
    n: usize,
    min: f64,
    max: f64,
    count: usize,
    grid: usize,
) -> Result<String, String> {
    let settings = SweepSettings {
        grid: grid_or_default(grid),
        refine: false,
        identities: false,
        ..SweepSettings::default()
    };
    let records = run_sweep(
        &params(family, n)?,
        &ParamRange::new(min, max, count),
        &settings,
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&records).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn profile(family: &str, n: usize, param: f64, grid: usize) -> Result<String, JsError> {
    profile_json(family, n, param, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn stability(family: &str, n: usize, param: f64, grid: usize) -> Result<String, JsError> {
    stability_json(family, n, param, grid).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn scan(
    family: &str,
    n: usize,
    min: f64,
    max: f64,
    count: usize,
    grid: usize,
) -> Result<String, JsError> {
    scan_json(family, n, min, max, count, grid).map_err(|e| JsError::new(&e))
}
