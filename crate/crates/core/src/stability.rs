//! Mode-by-mode discretization of the index form
//!
//! ```text
//! I(f, f) = ∫ |∇f|² − |σ|² f²  −  ∮ q f²
//! ```
//!
//! with `f = g(s) Y_ℓ(ω)` and linear finite elements in `s`, and the
//! volume-constrained eigenvalue problem that decides capillary stability.

use serde::{Deserialize, Serialize};

use crate::error::{CapstabError, Result};
use crate::geometry::{
    curvature_data, robin_coefficient, surface_hash, End, EndpointKind, RevolutionSurface,
};
use crate::numerics::{count_below, dot, solve_shifted, unit_sphere_area, SymTridiagonal};

/// Default stability threshold.
pub const EPS_STAB: f64 = 1e-7;
/// Largest mode examined before giving up on the monotone stop.
pub const MAX_MODE: usize = 64;
/// An ℓ = 1 eigenvalue this close to zero is tested for being a translation.
pub const TRANSLATION_TOL: f64 = 1e-5;
/// Relative L² distance below which an eigenfunction counts as `sin α`.
pub const TRANSLATION_SHAPE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Wall endpoint; contributes `−q g² x_b^{n−1}`.
    Robin { q: f64 },
    /// Axis endpoint for ℓ = 0, or a free cut.
    Natural,
    /// Axis endpoint for ℓ ≥ 1: the node is removed.
    Dirichlet,
}

/// Discretized index form and mass form for one azimuthal mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePencil {
    pub mode: usize,
    pub n: usize,
    /// Arclength nodes, including any removed Dirichlet nodes.
    pub nodes: Vec<f64>,
    /// Indices into `nodes` of the unknowns.
    pub dofs: Vec<usize>,
    pub stiffness: SymTridiagonal,
    pub mass: SymTridiagonal,
    /// `c_i = ∫ φ_i x^{n−1}`; only for ℓ = 0.
    pub constraint: Option<Vec<f64>>,
    pub start_bc: BoundaryCondition,
    pub finish_bc: BoundaryCondition,
}

impl ModePencil {
    /// Expands a vector on the unknowns to all nodes (zero at removed nodes).
    pub fn expand(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nodes.len()];
        for (k, &i) in self.dofs.iter().enumerate() {
            out[i] = g[k];
        }
        out
    }

    /// Restricts a nodal vector to the unknowns.
    pub fn restrict(&self, g: &[f64]) -> Vec<f64> {
        self.dofs.iter().map(|&i| g[i]).collect()
    }

    /// `gᵀ A g` for a nodal vector.
    pub fn quadratic(&self, g: &[f64]) -> f64 {
        let r = self.restrict(g);
        self.stiffness.bilinear(&r, &r)
    }

    pub fn mass_norm_sq(&self, g: &[f64]) -> f64 {
        let r = self.restrict(g);
        self.mass.bilinear(&r, &r)
    }
}

/// Gauss–Legendre 3-point rule on `[0, 1]`.
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Assembles the pencil on arbitrary increasing nodes with nodal values of
/// `x` and `|σ|²` (both interpolated linearly inside elements).
pub fn assemble_on_nodes(
    n: usize,
    mode: usize,
    nodes: &[f64],
    x: &[f64],
    sigma_sq: &[f64],
    start_bc: BoundaryCondition,
    finish_bc: BoundaryCondition,
) -> ModePencil {
    let m = nodes.len();
    let lap = (mode * (mode + n - 2)) as f64;
    let pw = n as i32 - 1;
    let mut a = SymTridiagonal::zeros(m);
    let mut b = SymTridiagonal::zeros(m);
    for e in 0..m - 1 {
        let h = nodes[e + 1] - nodes[e];
        let mut kw = 0.0;
        let mut mm = [0.0; 3];
        let mut pp = [0.0; 3];
        for &(t, wq) in &GAUSS3 {
            let xt = x[e] + t * (x[e + 1] - x[e]);
            let st = sigma_sq[e] + t * (sigma_sq[e + 1] - sigma_sq[e]);
            let w = xt.powi(pw);
            let pot = if lap > 0.0 { lap / (xt * xt) - st } else { -st } * w;
            let phi = [1.0 - t, t];
            kw += wq * w;
            let pairs = [(0, 0), (0, 1), (1, 1)];
            for (k, &(i, j)) in pairs.iter().enumerate() {
                mm[k] += wq * w * phi[i] * phi[j] * h;
                pp[k] += wq * pot * phi[i] * phi[j] * h;
            }
        }
        let k = kw / h;
        a.diag[e] += k + pp[0];
        a.diag[e + 1] += k + pp[2];
        a.off[e] += -k + pp[1];
        b.diag[e] += mm[0];
        b.diag[e + 1] += mm[2];
        b.off[e] += mm[1];
    }
    for (bc, i) in [(start_bc, 0), (finish_bc, m - 1)] {
        if let BoundaryCondition::Robin { q } = bc {
            a.diag[i] -= q * x[i].powi(pw);
        }
    }
    let constraint = (mode == 0).then(|| {
        (0..m)
            .map(|i| {
                let mut c = b.diag[i];
                if i > 0 {
                    c += b.off[i - 1];
                }
                if i + 1 < m {
                    c += b.off[i];
                }
                c
            })
            .collect::<Vec<f64>>()
    });
    let drop_start = start_bc == BoundaryCondition::Dirichlet;
    let drop_finish = finish_bc == BoundaryCondition::Dirichlet;
    let lo = usize::from(drop_start);
    let hi = if drop_finish { m - 1 } else { m };
    let dofs: Vec<usize> = (lo..hi).collect();
    let cut = |t: &SymTridiagonal| SymTridiagonal {
        diag: t.diag[lo..hi].to_vec(),
        off: t.off[lo..hi - 1].to_vec(),
    };
    ModePencil {
        mode,
        n,
        nodes: nodes.to_vec(),
        stiffness: cut(&a),
        mass: cut(&b),
        constraint: constraint.map(|c| c[lo..hi].to_vec()),
        start_bc,
        finish_bc,
        dofs,
    }
}

pub(crate) fn endpoint_bc(
    surface: &RevolutionSurface,
    end: End,
    mode: usize,
) -> Result<BoundaryCondition> {
    Ok(match surface.endpoint(end) {
        EndpointKind::Wall(_) => BoundaryCondition::Robin {
            q: robin_coefficient(surface, end)?,
        },
        EndpointKind::Axis if mode == 0 => BoundaryCondition::Natural,
        EndpointKind::Axis => BoundaryCondition::Dirichlet,
        EndpointKind::Cut => BoundaryCondition::Natural,
    })
}

/// Pencil of mode `ℓ` on the profile grid of `surface`.
pub fn assemble_mode(surface: &RevolutionSurface, mode: usize) -> Result<ModePencil> {
    let curv = curvature_data(surface)?;
    let p = &surface.profile;
    Ok(assemble_on_nodes(
        surface.n(),
        mode,
        &p.s,
        &p.x,
        &curv.sigma_sq,
        endpoint_bc(surface, End::Start, mode)?,
        endpoint_bc(surface, End::Finish, mode)?,
    ))
}

/// `k`-th smallest eigenvalue (`k ≥ 1`) of the pencil `(a, b)` by Sturm bisection.
pub fn kth_eigenvalue(a: &SymTridiagonal, b: &SymTridiagonal, k: usize) -> Result<f64> {
    let dim = a.dim();
    if k == 0 || k > dim {
        return Err(CapstabError::SolverFailure(format!(
            "eigenvalue index {k} out of 1..={dim}"
        )));
    }
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let mut guard = 0;
    while count_below(a, b, lo) >= k {
        lo *= 2.0;
        guard += 1;
        if guard > 2000 || !lo.is_finite() {
            return Err(CapstabError::SolverFailure("no lower bracket".into()));
        }
    }
    while count_below(a, b, hi) < k {
        hi *= 2.0;
        guard += 1;
        if guard > 2000 || !hi.is_finite() {
            return Err(CapstabError::SolverFailure("no upper bracket".into()));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if count_below(a, b, mid) >= k {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            return Ok(0.5 * (lo + hi));
        }
    }
    if hi - lo > 1e-10 * (1.0 + hi.abs()) {
        return Err(CapstabError::SolverFailure(format!(
            "bisection stalled on [{lo}, {hi}]"
        )));
    }
    Ok(0.5 * (lo + hi))
}

/// Eigenvector for an eigenvalue by inverse iteration, normalized to `gᵀ M g = 1`.
pub fn eigenvector(a: &SymTridiagonal, b: &SymTridiagonal, lambda: f64) -> Vec<f64> {
    let dim = a.dim();
    let mut v: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.3 * ((i as f64) * 0.7).sin())
        .collect();
    // A slight offset keeps the shifted matrix off exact singularity.
    let shift = lambda + 1e-13 * (1.0 + lambda.abs());
    for _ in 0..4 {
        let rhs = b.mul_vec(&v);
        v = solve_shifted(a, b, shift, &rhs);
        normalize(b, &mut v);
    }
    fix_sign(&mut v);
    v
}

fn normalize(b: &SymTridiagonal, v: &mut [f64]) {
    let nrm = b.bilinear(v, v).sqrt();
    if nrm > 0.0 {
        v.iter_mut().for_each(|x| *x /= nrm);
    }
}

/// Makes the entry of largest magnitude positive.
fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .fold(0.0_f64, |m, &x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Smallest eigenvalue and nodal eigenfunction (`∫ g² x^{n−1} = 1`). With
/// `constrained`, minimizes over `∫ g x^{n−1} = 0` (ℓ = 0 only).
pub fn min_eigenvalue(pencil: &ModePencil, constrained: bool) -> Result<(f64, Vec<f64>)> {
    let (a, b) = (&pencil.stiffness, &pencil.mass);
    if !constrained || pencil.constraint.is_none() {
        let lam = kth_eigenvalue(a, b, 1)?;
        let v = eigenvector(a, b, lam);
        return Ok((lam, pencil.expand(&v)));
    }
    let c = pencil.constraint.as_ref().expect("checked above");
    let (lam, g) = constrained_min(a, b, c)?;
    Ok((lam, pencil.expand(&g)))
}

/// Projects `g` onto `{cᵀg = 0}` along `M⁻¹c = 𝟙`, then normalizes.
fn project_out(b: &SymTridiagonal, c: &[f64], g: &mut [f64]) {
    let total: f64 = c.iter().sum();
    let beta = dot(c, g) / total;
    g.iter_mut().for_each(|x| *x -= beta);
    normalize(b, g);
    fix_sign(g);
}

/// Minimizes the Rayleigh quotient over `cᵀg = 0` by locating the root of the
/// secular function `f(σ) = cᵀ (A − σM)⁻¹ c` between the first two eigenvalues.
fn constrained_min(a: &SymTridiagonal, b: &SymTridiagonal, c: &[f64]) -> Result<(f64, Vec<f64>)> {
    let l1 = kth_eigenvalue(a, b, 1)?;
    let u1 = eigenvector(a, b, l1);
    let c_norm = c.iter().sum::<f64>().sqrt();
    if a.dim() < 2 {
        return Err(CapstabError::SolverFailure(
            "constrained problem has no room".into(),
        ));
    }
    let l2 = kth_eigenvalue(a, b, 2)?;
    if (dot(c, &u1) / c_norm).abs() < 1e-12 {
        let mut g = u1;
        project_out(b, c, &mut g);
        return Ok((l1, g));
    }
    let secular = |sigma: f64| dot(c, &solve_shifted(a, b, sigma, c));
    let gap = l2 - l1;
    // λ₁ and λ₂ are only known to bisection accuracy, so the bracket edges sit
    // a fixed fraction of the gap inside them rather than at roundoff distance.
    let edge = 1e-9 * gap;
    if gap <= 1e-12 * (1.0 + l1.abs().max(l2.abs())) {
        let mut g = u1;
        project_out(b, c, &mut g);
        return Ok((l1, g));
    }
    let (mut lo, mut hi) = (l1 + edge, l2 - edge);
    if secular(hi) < 0.0 {
        // Root lies at or beyond λ₂: the second eigenvector already satisfies the constraint.
        let mut g = eigenvector(a, b, l2);
        project_out(b, c, &mut g);
        return Ok((l2, g));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if secular(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    if hi - lo > 1e-10 * (1.0 + hi.abs()) {
        return Err(CapstabError::SolverFailure(format!(
            "secular bisection stalled on [{lo}, {hi}]"
        )));
    }
    let lam = 0.5 * (lo + hi);
    let mut g = solve_shifted(a, b, lam, c);
    project_out(b, c, &mut g);
    Ok((lam, g))
}

/// The `count` smallest unconstrained eigenvalues of a pencil.
pub fn smallest_eigenvalues(pencil: &ModePencil, count: usize) -> Result<Vec<f64>> {
    (1..=count)
        .map(|k| kth_eigenvalue(&pencil.stiffness, &pencil.mass, k))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub l: usize,
    pub lambda_min: f64,
    pub constrained: bool,
    /// Set when the lowest eigenvalue is a horizontal translation; then
    /// `lambda_next` is what enters the verdict.
    pub translation: bool,
    pub lambda_next: Option<f64>,
    /// Estimated discretization error of the unextrapolated value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_estimate: Option<f64>,
}

impl ModeResult {
    /// Eigenvalue that decides the verdict for this mode.
    pub fn effective(&self) -> f64 {
        if self.translation {
            self.lambda_next.unwrap_or(self.lambda_min)
        } else {
            self.lambda_min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityTolerances {
    pub eps_stab: f64,
    pub translation_tol: f64,
    pub translation_shape_tol: f64,
    pub max_mode: usize,
}

impl Default for StabilityTolerances {
    fn default() -> Self {
        Self {
            eps_stab: EPS_STAB,
            translation_tol: TRANSLATION_TOL,
            translation_shape_tol: TRANSLATION_SHAPE_TOL,
            max_mode: MAX_MODE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub modes: Vec<ModeResult>,
    pub constrained_l0: f64,
    pub verdict: Verdict,
    pub l_stop: usize,
    /// `λ_min(ℓ+1) ≥ λ_min(ℓ) − 1e−10` held for all computed ℓ ≥ 1.
    pub monotone: bool,
    pub worst_lambda: f64,
    pub worst_l: usize,
    pub grid: usize,
    /// Eigenvalues are Richardson extrapolations from two grids.
    #[serde(default)]
    pub extrapolated: bool,
    pub tolerances: StabilityTolerances,
    pub surface_hash: String,
}

/// Relative weighted L² distance between `g` and `±sin α` (both normalized).
pub fn translation_mismatch(surface: &RevolutionSurface, pencil: &ModePencil, g: &[f64]) -> f64 {
    let t: Vec<f64> = surface.profile.alpha.iter().map(|a| a.sin()).collect();
    let nt = pencil.mass_norm_sq(&t).sqrt();
    let ng = pencil.mass_norm_sq(g).sqrt();
    if nt == 0.0 || ng == 0.0 {
        return f64::INFINITY;
    }
    let cross = {
        let (rt, rg) = (pencil.restrict(&t), pencil.restrict(g));
        pencil.mass.bilinear(&rt, &rg)
    };
    let sign = if cross >= 0.0 { 1.0 } else { -1.0 };
    let d: Vec<f64> = g
        .iter()
        .zip(&t)
        .map(|(gi, ti)| gi / ng - sign * ti / nt)
        .collect();
    pencil.mass_norm_sq(&d).sqrt()
}

/// Constrained ℓ = 0 eigenvalue followed by ℓ = 1, 2, … until the lowest
/// eigenvalue exceeds `eps_stab`.
pub fn classify_stability(
    surface: &RevolutionSurface,
    tol: &StabilityTolerances,
) -> Result<StabilityReport> {
    classify(surface, None, tol)
}

/// Like [`classify_stability`], but every eigenvalue is the Richardson
/// extrapolation `(4λ_f − λ_c)/3` from the surface resampled on `2m − 1` and
/// `m = ⌈M/2⌉` samples. The verdict uses the extrapolated values; each mode
/// carries `|λ_f − λ_c|/3` as an error estimate for the fine-grid value.
pub fn classify_stability_refined(
    surface: &RevolutionSurface,
    tol: &StabilityTolerances,
) -> Result<StabilityReport> {
    let mc = surface.profile.len().div_ceil(2);
    let coarse = surface.resampled(mc)?;
    let fine = surface.resampled(2 * mc - 1)?;
    let mut report = classify(&fine, Some(&coarse), tol)?;
    report.surface_hash = surface_hash(surface);
    Ok(report)
}

/// Lowest eigenvalue of one mode on `fine`, extrapolated against `coarse`
/// when given. Returns the value, its error estimate and the fine pencil with
/// its eigenfunction.
fn mode_min(
    fine: &RevolutionSurface,
    coarse: Option<&RevolutionSurface>,
    l: usize,
) -> Result<(f64, Option<f64>, ModePencil, Vec<f64>)> {
    let pencil = assemble_mode(fine, l)?;
    let (lam, g) = min_eigenvalue(&pencil, l == 0)?;
    match coarse {
        None => Ok((lam, None, pencil, g)),
        Some(c) => {
            let (lc, _) = min_eigenvalue(&assemble_mode(c, l)?, l == 0)?;
            Ok((richardson(lam, lc), Some((lam - lc).abs() / 3.0), pencil, g))
        }
    }
}

fn richardson(fine: f64, coarse: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

fn classify(
    surface: &RevolutionSurface,
    coarse: Option<&RevolutionSurface>,
    tol: &StabilityTolerances,
) -> Result<StabilityReport> {
    let (l0, err0, _, _) = mode_min(surface, coarse, 0)?;
    let mut modes = vec![ModeResult {
        l: 0,
        lambda_min: l0,
        constrained: true,
        translation: false,
        lambda_next: None,
        error_estimate: err0,
    }];
    let mut l_stop = 0;
    let mut monotone = true;
    let mut prev: Option<f64> = None;
    for l in 1..=tol.max_mode {
        let (lam, err, pencil, g) = mode_min(surface, coarse, l)?;
        let mut result = ModeResult {
            l,
            lambda_min: lam,
            constrained: false,
            translation: false,
            lambda_next: None,
            error_estimate: err,
        };
        if l == 1
            && lam.abs() <= tol.translation_tol
            && translation_mismatch(surface, &pencil, &g) <= tol.translation_shape_tol
        {
            result.translation = true;
            let next = kth_eigenvalue(&pencil.stiffness, &pencil.mass, 2)?;
            result.lambda_next = Some(match coarse {
                Some(c) => {
                    let pc = assemble_mode(c, 1)?;
                    richardson(next, kth_eigenvalue(&pc.stiffness, &pc.mass, 2)?)
                }
                None => next,
            });
        }
        if let Some(pv) = prev {
            if lam < pv - 1e-10 {
                monotone = false;
            }
        }
        prev = Some(lam);
        modes.push(result);
        l_stop = l;
        if lam >= tol.eps_stab {
            break;
        }
    }
    let (worst_l, worst_lambda) =
        modes
            .iter()
            .map(|m| (m.l, m.effective()))
            .fold(
                (0, f64::INFINITY),
                |acc, (l, v)| if v < acc.1 { (l, v) } else { acc },
            );
    let eps = tol.eps_stab;
    let verdict = if modes.iter().any(|m| m.effective() < -eps) {
        Verdict::Unstable
    } else if modes.iter().any(|m| m.effective().abs() <= eps) {
        Verdict::Marginal
    } else {
        Verdict::Stable
    };
    Ok(StabilityReport {
        modes,
        constrained_l0: l0,
        verdict,
        l_stop,
        monotone,
        worst_lambda,
        worst_l,
        grid: surface.profile.len(),
        extrapolated: coarse.is_some(),
        tolerances: tol.clone(),
        surface_hash: surface_hash(surface),
    })
}

/// `I(f, f)` for `f = Σ g_ℓ(s) Y_ℓ(ω)`, each term with its own harmonic of
/// unit mean square on the sphere. `g` is given at the profile samples.
pub fn index_value(surface: &RevolutionSurface, terms: &[(usize, Vec<f64>)]) -> Result<f64> {
    let omega = unit_sphere_area(surface.n());
    let mut total = 0.0;
    for (l, g) in terms {
        if g.len() != surface.profile.len() {
            return Err(CapstabError::InvalidInput(format!(
                "mode {l} function has {} samples, profile has {}",
                g.len(),
                surface.profile.len()
            )));
        }
        let pencil = assemble_mode(surface, *l)?;
        total += pencil.quadratic(g);
    }
    Ok(omega * total)
}
