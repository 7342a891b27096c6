use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use capstab_core::delaunay::residuals;
use capstab_core::geometry::{areas, Areas, EndpointKind, RevolutionSurface};
use capstab_core::identity::{
    first_variation_check, identity_suite, FirstVariationReport, ResidualReport,
};
use capstab_core::stability::{classify_stability, classify_stability_refined, StabilityReport};
use capstab_core::sweep::{error_kind, first_flip, run_point, SweepRecord};
use capstab_core::testfn::{
    check_phi_identities, eval_phi, eval_u_rotational, eval_v_family, eval_w, IdentityResidual,
    ScaledPart, TestFunctionReport, VFamilyReport,
};
use capstab_core::{CapstabError, Result as CoreResult};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Defaults, Format, RunConfig, SCHEMA_VERSION};
use crate::error::CliError;

/// Common wrapper of every output document.
#[derive(Serialize)]
struct Envelope<'a, T> {
    schema_version: u32,
    kind: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    defaults: Defaults,
    records: Vec<T>,
}

fn envelope<'a, T>(cfg: &'a RunConfig, kind: &'a str, records: Vec<T>) -> Envelope<'a, T> {
    Envelope {
        schema_version: SCHEMA_VERSION,
        kind,
        config_hash: cfg.hash(),
        config: cfg,
        defaults: Defaults::table(),
        records,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn out_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&cfg.out)?;
    Ok(&cfg.out)
}

/// Evaluates `f` at every parameter value in parallel, keeping the order.
fn per_param<T: Send>(cfg: &RunConfig, f: impl Fn(usize, f64) -> T + Sync) -> Vec<T> {
    let values = cfg.param.values();
    values
        .par_iter()
        .enumerate()
        .map(|(i, &p)| f(i, p))
        .collect()
}

fn build(cfg: &RunConfig, param: f64) -> CoreResult<RevolutionSurface> {
    cfg.family_params().surface(param, cfg.grid)
}

/// Error text and tag of a failed record.
#[derive(Debug, Clone, Serialize)]
struct Failure {
    error: String,
    error_kind: &'static str,
}

impl From<&CapstabError> for Failure {
    fn from(e: &CapstabError) -> Self {
        Failure {
            error: e.to_string(),
            error_kind: error_kind(e),
        }
    }
}

/// Fails with the first error when no record succeeded.
fn require_success<T>(records: &[(T, Option<Failure>)]) -> Result<(), CliError> {
    if let Some((_, Some(first))) = records.first() {
        if records.iter().all(|(_, f)| f.is_some()) {
            return Err(CliError::AllFailed {
                count: records.len(),
                first: first.error.clone(),
            });
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- generate

#[derive(Serialize)]
struct ProfileMeta {
    index: usize,
    param: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    files: Vec<String>,
    #[serde(flatten)]
    detail: Option<SurfaceMeta>,
    #[serde(flatten)]
    failure: Option<Failure>,
}

#[derive(Serialize)]
struct SurfaceMeta {
    surface_hash: String,
    samples: usize,
    length: f64,
    start: EndpointKind,
    finish: EndpointKind,
    mean_curvature: f64,
    areas: Areas,
    wall_residuals: Vec<f64>,
    angle_residuals: Vec<f64>,
}

#[derive(Serialize)]
struct ProfileJson<'a> {
    meta: &'a SurfaceMeta,
    s: &'a [f64],
    x: &'a [f64],
    z: &'a [f64],
    alpha: &'a [f64],
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let built = per_param(
        cfg,
        |_, p| -> CoreResult<(RevolutionSurface, SurfaceMeta)> {
            let s = build(cfg, p)?;
            let res = residuals(&s)?;
            let meta = SurfaceMeta {
                surface_hash: capstab_core::geometry::surface_hash(&s),
                samples: s.profile.len(),
                length: s.profile.length(),
                start: s.start,
                finish: s.finish,
                mean_curvature: s.mean_curvature(),
                areas: areas(&s)?,
                wall_residuals: res.wall,
                angle_residuals: res.angle,
            };
            Ok((s, meta))
        },
    );
    let stem = cfg.family.as_str();
    let mut entries = Vec::new();
    for (i, (p, result)) in cfg.param.values().into_iter().zip(built).enumerate() {
        let entry = match result {
            Ok((s, meta)) => {
                let mut files = Vec::new();
                if cfg.wants(Format::Csv) {
                    let name = format!("{stem}_{i:03}.csv");
                    fs::write(dir.join(&name), s.profile.to_csv_string())?;
                    files.push(name);
                }
                if cfg.wants(Format::Json) {
                    let name = format!("{stem}_{i:03}.json");
                    let pr = &s.profile;
                    write_json(
                        &dir.join(&name),
                        &ProfileJson {
                            meta: &meta,
                            s: &pr.s,
                            x: &pr.x,
                            z: &pr.z,
                            alpha: &pr.alpha,
                        },
                    )?;
                    files.push(name);
                }
                (
                    ProfileMeta {
                        index: i,
                        param: p,
                        files,
                        detail: Some(meta),
                        failure: None,
                    },
                    None,
                )
            }
            Err(e) => {
                let f = Failure::from(&e);
                (
                    ProfileMeta {
                        index: i,
                        param: p,
                        files: Vec::new(),
                        detail: None,
                        failure: Some(f.clone()),
                    },
                    Some(f),
                )
            }
        };
        entries.push(entry);
    }
    require_success(&entries)?;
    let ok = entries.iter().filter(|(_, f)| f.is_none()).count();
    let records: Vec<ProfileMeta> = entries.into_iter().map(|(m, _)| m).collect();
    write_json(
        &dir.join("manifest.json"),
        &envelope(cfg, "manifest", records),
    )?;
    println!(
        "generate: {ok} of {} profiles written to {}",
        cfg.param.count,
        dir.display()
    );
    Ok(())
}

// -------------------------------------------------------- check-identities

#[derive(Serialize)]
struct IdentityRecord {
    index: usize,
    param: f64,
    surface_hash: Option<String>,
    identities: Vec<ResidualReport>,
    first_variation: Option<FirstVariationReport>,
    #[serde(flatten)]
    failure: Option<Failure>,
}

#[derive(Serialize)]
struct IdentityRow<'a> {
    index: usize,
    param: f64,
    identity: &'a str,
    grid: usize,
    max_residual: f64,
    integral_rel: f64,
    order: Option<f64>,
    exact: bool,
}

pub fn check_identities(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let delta = cfg.first_variation_delta;
    let records: Vec<(IdentityRecord, Option<Failure>)> = per_param(cfg, |i, p| {
        let mut rec = IdentityRecord {
            index: i,
            param: p,
            surface_hash: None,
            identities: Vec::new(),
            first_variation: None,
            failure: None,
        };
        let outcome = (|| -> CoreResult<()> {
            let s = build(cfg, p)?;
            rec.surface_hash = Some(capstab_core::geometry::surface_hash(&s));
            rec.identities = identity_suite(&s)?;
            let f = |_s: f64, q: [f64; 3]| 1.0 + 0.3 * q[1].sin();
            rec.first_variation = Some(first_variation_check(&s, &f, delta)?);
            Ok(())
        })();
        let failure = outcome.err().map(|e| Failure::from(&e));
        rec.failure = failure.clone();
        (rec, failure)
    });
    require_success(&records)?;
    let records: Vec<IdentityRecord> = records.into_iter().map(|(r, _)| r).collect();
    if cfg.wants(Format::Csv) {
        let mut rows = Vec::new();
        for r in &records {
            let fv = r
                .first_variation
                .as_ref()
                .map(|f| f.as_residual_report(cfg.grid));
            for rep in r.identities.iter().chain(fv.as_ref()) {
                rows.push(IdentityRow {
                    index: r.index,
                    param: r.param,
                    identity: rep.id.as_str(),
                    grid: rep.grid,
                    max_residual: rep.max_residual,
                    integral_rel: rep.integral_rel,
                    order: rep.order,
                    exact: rep.exact,
                });
            }
        }
        write_csv(&dir.join("identities.csv"), &rows)?;
    }
    if cfg.wants(Format::Json) {
        write_json(
            &dir.join("identities.json"),
            &envelope(cfg, "identities", records),
        )?;
    }
    println!("check-identities: wrote {}", dir.display());
    Ok(())
}

// --------------------------------------------------------------- stability

#[derive(Serialize)]
struct StabilityRecord {
    index: usize,
    param: f64,
    report: Option<StabilityReport>,
    #[serde(flatten)]
    failure: Option<Failure>,
}

#[derive(Serialize)]
struct ModeRow {
    index: usize,
    param: f64,
    l: usize,
    lambda_min: f64,
    lambda_next: Option<f64>,
    constrained: bool,
    translation: bool,
    error_estimate: Option<f64>,
    verdict: String,
}

fn classify(cfg: &RunConfig, s: &RevolutionSurface) -> CoreResult<StabilityReport> {
    if cfg.refine {
        classify_stability_refined(s, &cfg.tolerances())
    } else {
        classify_stability(s, &cfg.tolerances())
    }
}

pub fn stability(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let records = per_param(cfg, |i, p| {
        match build(cfg, p).and_then(|s| classify(cfg, &s)) {
            Ok(r) => (
                StabilityRecord {
                    index: i,
                    param: p,
                    report: Some(r),
                    failure: None,
                },
                None,
            ),
            Err(e) => {
                let f = Failure::from(&e);
                (
                    StabilityRecord {
                        index: i,
                        param: p,
                        report: None,
                        failure: Some(f.clone()),
                    },
                    Some(f),
                )
            }
        }
    });
    require_success(&records)?;
    let records: Vec<StabilityRecord> = records.into_iter().map(|(r, _)| r).collect();
    if cfg.wants(Format::Csv) {
        let mut rows = Vec::new();
        for r in &records {
            let Some(rep) = &r.report else { continue };
            let verdict = serde_json::to_value(rep.verdict)?
                .as_str()
                .unwrap_or_default()
                .to_string();
            for m in &rep.modes {
                rows.push(ModeRow {
                    index: r.index,
                    param: r.param,
                    l: m.l,
                    lambda_min: m.lambda_min,
                    lambda_next: m.lambda_next,
                    constrained: m.constrained,
                    translation: m.translation,
                    error_estimate: m.error_estimate,
                    verdict: verdict.clone(),
                });
            }
        }
        write_csv(&dir.join("stability.csv"), &rows)?;
    }
    if cfg.wants(Format::Json) {
        write_json(
            &dir.join("stability.json"),
            &envelope(cfg, "stability", records),
        )?;
    }
    println!("stability: wrote {}", dir.display());
    Ok(())
}

// ----------------------------------------------------------------- testfn

#[derive(Serialize, Default)]
struct TestFnRecord {
    index: usize,
    param: f64,
    phi: Option<TestFunctionReport>,
    phi_identities: Option<Vec<IdentityResidual>>,
    v_family: Option<VFamilyReport>,
    w: Option<TestFunctionReport>,
    u_rotational: Option<TestFunctionReport>,
    /// Functions that do not apply to this surface, with the reason.
    skipped: BTreeMap<String, String>,
    #[serde(flatten)]
    failure: Option<Failure>,
}

#[derive(Serialize)]
struct TestFnRow<'a> {
    index: usize,
    param: f64,
    function: &'a str,
    mean: f64,
    max_abs: f64,
    index_value: f64,
    balance: Option<f64>,
}

fn keep<T>(skipped: &mut BTreeMap<String, String>, name: &str, r: CoreResult<T>) -> Option<T> {
    r.map_err(|e| skipped.insert(name.to_string(), e.to_string()))
        .ok()
}

pub fn testfn(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let records = per_param(cfg, |i, p| {
        let mut rec = TestFnRecord {
            index: i,
            param: p,
            ..TestFnRecord::default()
        };
        match build(cfg, p) {
            Ok(s) => {
                let sk = &mut rec.skipped;
                rec.phi = keep(sk, "phi", eval_phi(&s));
                rec.phi_identities = keep(sk, "phi_identities", check_phi_identities(&s));
                let part = if s.problem.theta_lower > std::f64::consts::FRAC_PI_2 {
                    ScaledPart::Minus
                } else {
                    ScaledPart::Plus
                };
                rec.v_family = keep(sk, "v", eval_v_family(&s, part));
                rec.w = keep(sk, "w", eval_w(&s));
                rec.u_rotational = keep(sk, "u_rotational", eval_u_rotational(&s));
                (rec, None)
            }
            Err(e) => {
                let f = Failure::from(&e);
                rec.failure = Some(f.clone());
                (rec, Some(f))
            }
        }
    });
    require_success(&records)?;
    let records: Vec<TestFnRecord> = records.into_iter().map(|(r, _)| r).collect();
    if cfg.wants(Format::Csv) {
        let mut rows = Vec::new();
        for r in &records {
            let mut push = |name: &'static str, t: &TestFunctionReport| {
                rows.push(TestFnRow {
                    index: r.index,
                    param: r.param,
                    function: name,
                    mean: t.mean,
                    max_abs: t.max_abs,
                    index_value: t.index_value,
                    balance: t.balance,
                })
            };
            if let Some(t) = &r.phi {
                push("phi", t);
            }
            if let Some(v) = &r.v_family {
                push("v", &v.v);
                push("v_plus", &v.v_plus);
                push("v_minus", &v.v_minus);
                if let Some(b) = &v.balanced {
                    push("v_balanced", b);
                }
            }
            if let Some(t) = &r.w {
                push("w", t);
            }
            if let Some(t) = &r.u_rotational {
                push("u_rotational", t);
            }
        }
        write_csv(&dir.join("testfn.csv"), &rows)?;
    }
    if cfg.wants(Format::Json) {
        write_json(&dir.join("testfn.json"), &envelope(cfg, "testfn", records))?;
    }
    println!("testfn: wrote {}", dir.display());
    Ok(())
}

// ------------------------------------------------------------------ sweep

/// A sweep record stamped with the hash of the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashedRecord {
    #[serde(flatten)]
    pub record: SweepRecord,
    pub config_hash: String,
}

#[derive(Serialize)]
struct SweepRow<'a> {
    index: usize,
    param: f64,
    verdict: &'a str,
    worst_lambda: Option<f64>,
    worst_l: Option<usize>,
    constrained_l0: Option<f64>,
    identity_max: Option<f64>,
    error_kind: Option<&'a str>,
}

#[derive(Serialize)]
struct DiagramRow<'a> {
    n: usize,
    param: f64,
    verdict: &'a str,
    worst_lambda: Option<f64>,
}

#[derive(Serialize)]
struct Timing {
    started_unix: u64,
    threads: usize,
    total_seconds: f64,
    per_record_seconds: Vec<f64>,
}

fn verdict_str(r: &SweepRecord) -> &'static str {
    use capstab_core::stability::Verdict;
    match r.verdict {
        Some(Verdict::Stable) => "stable",
        Some(Verdict::Marginal) => "marginal",
        Some(Verdict::Unstable) => "unstable",
        None => "failed",
    }
}

pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let params = cfg.family_params();
    let settings = cfg.sweep_settings();
    let timed = per_param(cfg, |i, p| {
        let t = Instant::now();
        let rec = run_point(&params, &settings, i, p);
        (rec, t.elapsed().as_secs_f64())
    });
    let hash = cfg.hash();
    let (records, per_record_seconds): (Vec<SweepRecord>, Vec<f64>) = timed.into_iter().unzip();
    let ok = records.iter().filter(|r| r.ok()).count();
    if ok == 0 {
        let first = records
            .first()
            .and_then(|r| r.error.clone())
            .unwrap_or_default();
        return Err(CliError::AllFailed {
            count: records.len(),
            first,
        });
    }

    if cfg.wants(Format::Csv) {
        let rows: Vec<SweepRow> = records
            .iter()
            .map(|r| SweepRow {
                index: r.index,
                param: r.param,
                verdict: verdict_str(r),
                worst_lambda: r.worst_lambda,
                worst_l: r.worst_l,
                constrained_l0: r.constrained_l0,
                identity_max: r.identity_max,
                error_kind: r.error_kind.as_deref(),
            })
            .collect();
        write_csv(&dir.join("sweep.csv"), &rows)?;
    }
    let diagram: Vec<DiagramRow> = records
        .iter()
        .map(|r| DiagramRow {
            n: r.n,
            param: r.param,
            verdict: verdict_str(r),
            worst_lambda: r.worst_lambda,
        })
        .collect();
    write_csv(&dir.join("diagram.csv"), &diagram)?;

    let flip = first_flip(&records);
    let stamped: Vec<HashedRecord> = records
        .into_iter()
        .map(|record| HashedRecord {
            record,
            config_hash: hash.clone(),
        })
        .collect();
    if cfg.wants(Format::Json) {
        write_json(&dir.join("sweep.json"), &envelope(cfg, "sweep", stamped))?;
    }
    write_json(
        &dir.join("timing.json"),
        &Timing {
            started_unix,
            threads: rayon::current_num_threads(),
            total_seconds: started.elapsed().as_secs_f64(),
            per_record_seconds,
        },
    )?;
    match flip {
        Some((a, b)) => println!(
            "sweep: {ok} of {} records ok, verdict flips in [{a}, {b}]",
            cfg.param.count
        ),
        None => println!(
            "sweep: {ok} of {} records ok, no verdict flip",
            cfg.param.count
        ),
    }
    Ok(())
}

// ----------------------------------------------------------------- report

#[derive(Deserialize)]
struct SweepFile {
    schema_version: u32,
    config_hash: String,
    records: Vec<HashedRecord>,
}

#[derive(Debug, Default, Serialize, PartialEq)]
pub struct Summary {
    pub total: usize,
    pub ok: usize,
    pub failed: usize,
    pub verdicts: BTreeMap<String, usize>,
    pub failures: BTreeMap<String, usize>,
}

#[derive(Serialize)]
struct Report {
    schema_version: u32,
    kind: &'static str,
    config_hash: Option<String>,
    sources: Vec<String>,
    summary: Summary,
    records: Vec<HashedRecord>,
}

fn json_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            json_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(())
}

pub fn summarize(records: &[HashedRecord]) -> Summary {
    let mut s = Summary {
        total: records.len(),
        ..Summary::default()
    };
    for r in records {
        let r = &r.record;
        if r.ok() {
            s.ok += 1;
            *s.verdicts.entry(verdict_str(r).to_string()).or_default() += 1;
        } else {
            s.failed += 1;
            let kind = r.error_kind.clone().unwrap_or_else(|| "unknown".into());
            *s.failures.entry(kind).or_default() += 1;
        }
    }
    s
}

/// Merges every sweep file below the output directory into `report.json`.
pub fn report(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.out;
    if !dir.is_dir() {
        return Err(CliError::Config(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    let mut paths = Vec::new();
    json_files(dir, &mut paths)?;
    paths.sort();

    let mut hash: Option<String> = None;
    let mut sources = Vec::new();
    let mut records = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path)?;
        let Ok(value) = serde_json::from_str::<serde_json::Value>(&text) else {
            continue;
        };
        if value.get("kind").and_then(|k| k.as_str()) != Some("sweep") {
            continue;
        }
        let file: SweepFile = serde_json::from_value(value)
            .map_err(|e| CliError::SchemaMismatch(format!("{}: {e}", path.display())))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::SchemaMismatch(format!(
                "{} has schema_version {}, expected {SCHEMA_VERSION}",
                path.display(),
                file.schema_version
            )));
        }
        for r in &file.records {
            if r.config_hash != file.config_hash {
                return Err(CliError::SchemaMismatch(format!(
                    "{}: record hash differs from file hash",
                    path.display()
                )));
            }
        }
        match &hash {
            None => hash = Some(file.config_hash.clone()),
            Some(h) if *h != file.config_hash => {
                return Err(CliError::SchemaMismatch(format!(
                    "{} was produced by config {}, others by {h}",
                    path.display(),
                    file.config_hash
                )));
            }
            Some(_) => {}
        }
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        sources.push(rel.to_string_lossy().replace('\\', "/"));
        records.extend(file.records);
    }
    let summary = summarize(&records);
    println!(
        "report: {} records from {} files, {} failed",
        summary.total,
        sources.len(),
        summary.failed
    );
    let report = Report {
        schema_version: SCHEMA_VERSION,
        kind: "report",
        config_hash: hash,
        sources,
        summary,
        records,
    };
    write_json(&dir.join("report.json"), &report)
}
