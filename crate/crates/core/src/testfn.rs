//! The explicit test functions of the rigidity arguments, evaluated as ℓ = 0
//! profile functions, and the identities their proofs rely on.
//!
//! All integrals over `Σ` carry the factor `ω_{n−1} x^{n−1}`; index values and
//! means use the same P1 discretization as the stability engine so that a
//! negative `I(f, f)` here is directly comparable to its eigenvalues.

use serde::{Deserialize, Serialize};

use crate::error::{CapstabError, Result};
use crate::geometry::{cot, curvature_data, Domain, End, RevolutionSurface, Wall};
use crate::identity::{mode_laplacian, support_function, IdentityId, ResidualReport};
use crate::numerics::{self, unit_sphere_area};
use crate::stability::{assemble_on_nodes, endpoint_bc, ModePencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunctionId {
    URot,
    V,
    VPlus,
    VMinus,
    W,
    Phi,
}

impl TestFunctionId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestFunctionId::URot => "u_rot",
            TestFunctionId::V => "v",
            TestFunctionId::VPlus => "v_plus",
            TestFunctionId::VMinus => "v_minus",
            TestFunctionId::W => "w",
            TestFunctionId::Phi => "phi",
        }
    }
}

/// One identity evaluated on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub id: IdentityId,
    pub lhs: f64,
    pub rhs: f64,
    pub abs: f64,
    /// `abs / max(|lhs|, |rhs|, 1)`: relative for large sides, absolute for small ones.
    pub rel: f64,
}

impl IdentityResidual {
    pub fn new(id: IdentityId, lhs: f64, rhs: f64) -> Self {
        Self::with_abs(id, lhs, rhs, (lhs - rhs).abs())
    }

    fn with_abs(id: IdentityId, lhs: f64, rhs: f64, abs: f64) -> Self {
        Self {
            id,
            lhs,
            rhs,
            abs,
            rel: abs / lhs.abs().max(rhs.abs()).max(1.0),
        }
    }

    pub fn to_report(&self, grid: usize) -> ResidualReport {
        ResidualReport {
            id: self.id,
            grid,
            max_residual: self.abs,
            integral_abs: self.abs,
            integral_rel: self.rel,
            order: None,
            order_grids: None,
            exact: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionReport {
    pub id: TestFunctionId,
    pub grid: usize,
    /// Arclength nodes; sign changes of `v` are inserted as extra nodes.
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫ f dΣ`.
    pub mean: f64,
    pub max_abs: f64,
    /// `I(f, f)`.
    pub index_value: f64,
    pub checks: Vec<IdentityResidual>,
    /// `α` for `w`, `a` for the slab combination.
    pub balance: Option<f64>,
}

/// The profile with `x`, `|σ|²` and the function values on a node set.
struct NodalData {
    nodes: Vec<f64>,
    x: Vec<f64>,
    sigma_sq: Vec<f64>,
    values: Vec<f64>,
}

impl NodalData {
    fn on_profile(surface: &RevolutionSurface, values: Vec<f64>) -> Result<Self> {
        let curv = curvature_data(surface)?;
        Ok(Self {
            nodes: surface.profile.s.clone(),
            x: surface.profile.x.clone(),
            sigma_sq: curv.sigma_sq,
            values,
        })
    }

    fn pencil(&self, surface: &RevolutionSurface) -> Result<ModePencil> {
        Ok(assemble_on_nodes(
            surface.n(),
            0,
            &self.nodes,
            &self.x,
            &self.sigma_sq,
            endpoint_bc(surface, End::Start, 0)?,
            endpoint_bc(surface, End::Finish, 0)?,
        ))
    }
}

/// `ω ∫ f x^{n−1}` and `ω gᵀ A f` on a pencil (no Dirichlet nodes at ℓ = 0).
fn integral(p: &ModePencil, f: &[f64], omega: f64) -> f64 {
    let c = p
        .constraint
        .as_ref()
        .expect("ℓ = 0 pencil has a constraint row");
    omega * numerics::dot(c, f)
}

fn index(p: &ModePencil, f: &[f64], g: &[f64], omega: f64) -> f64 {
    omega * p.stiffness.bilinear(f, g)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn report(
    id: TestFunctionId,
    surface: &RevolutionSurface,
    data: &NodalData,
    pencil: &ModePencil,
    values: Vec<f64>,
) -> TestFunctionReport {
    let omega = unit_sphere_area(surface.n());
    TestFunctionReport {
        id,
        grid: surface.profile.len(),
        nodes: data.nodes.clone(),
        mean: integral(pencil, &values, omega),
        max_abs: max_abs(&values),
        index_value: index(pencil, &values, &values, omega),
        values,
        checks: Vec::new(),
        balance: None,
    }
}

/// Lower-wall endpoints, the only place the half-space identities live.
fn lower_wall_ends(surface: &RevolutionSurface) -> Vec<End> {
    surface
        .wall_ends()
        .into_iter()
        .filter(|(_, w)| *w == Wall::Lower)
        .map(|(e, _)| e)
        .collect()
}

fn require_halfspace(surface: &RevolutionSurface) -> Result<()> {
    if surface.problem.domain != Domain::Halfspace || surface.wall_ends().is_empty() {
        return Err(CapstabError::InvalidInput(
            "needs a half-space surface with boundary on the wall".into(),
        ));
    }
    Ok(())
}

/// `φ = 1 + H⟨ψ, N⟩ + cos θ ⟨N, e_{n+1}⟩` on the profile samples, with θ the
/// lower-wall contact angle.
pub fn phi_values(surface: &RevolutionSurface) -> Vec<f64> {
    let h = surface.mean_curvature();
    let ct = surface.problem.theta_lower.cos();
    support_function(surface)
        .iter()
        .zip(&surface.profile.alpha)
        .map(|(u, a)| 1.0 + h * u + ct * a.cos())
        .collect()
}

/// Evaluates `φ`, its mean and `I(φ, φ)` on a half-space capillary surface.
pub fn eval_phi(surface: &RevolutionSurface) -> Result<TestFunctionReport> {
    require_halfspace(surface)?;
    let data = NodalData::on_profile(surface, phi_values(surface))?;
    let pencil = data.pencil(surface)?;
    let mut rep = report(
        TestFunctionId::Phi,
        surface,
        &data,
        &pencil,
        data.values.clone(),
    );
    rep.checks
        .push(IdentityResidual::new(IdentityId::PhiMean, rep.mean, 0.0));
    Ok(rep)
}

/// Evaluates both sides of the boundary and interior identities used with `φ`.
///
/// Needs at least one endpoint on the lower wall. The volume relation is
/// checked in its two-wall form on slab surfaces; the closed form of
/// `I(φ, φ)` only on half-space surfaces.
pub fn check_phi_identities(surface: &RevolutionSurface) -> Result<Vec<IdentityResidual>> {
    let ends = lower_wall_ends(surface);
    if ends.is_empty() {
        return Err(CapstabError::InvalidInput(
            "no endpoint on the lower wall".into(),
        ));
    }
    let nn = surface.n();
    let n = nn as f64;
    let h = surface.mean_curvature();
    let omega = unit_sphere_area(nn);
    let theta = surface.problem.theta_lower;
    let (st, ct) = theta.sin_cos();
    let p = &surface.profile;
    let curv = curvature_data(surface)?;
    let phi = phi_values(surface);
    let dphi = numerics::derivative(&phi, p.step());
    let vol = |i: usize| omega * p.x[i].powi(nn as i32 - 1);
    let mut out = Vec::new();

    // σ(ν, ν) = nH + (n−1) sin θ H_∂Σ and ∂φ/∂ν = cot θ σ(ν, ν) φ, worst end.
    let mut sigma: Option<IdentityResidual> = None;
    let mut normal: Option<IdentityResidual> = None;
    let mut boundary_h = 0.0;
    let mut boundary_vol = 0.0;
    for &end in &ends {
        let i = surface.end_index(end);
        let frame = surface.boundary_frame(end)?;
        let h_bd = frame.boundary_mean_curvature();
        boundary_h += h_bd * vol(i);
        boundary_vol += vol(i);
        let s_nn = curv.kappa1[i];
        let r = IdentityResidual::new(
            IdentityId::BoundarySigma,
            s_nn,
            n * h + (n - 1.0) * st * h_bd,
        );
        if sigma.is_none_or(|old| r.abs > old.abs) {
            sigma = Some(r);
        }
        let sign = if end == End::Start { -1.0 } else { 1.0 };
        let r = IdentityResidual::new(
            IdentityId::PhiNormalDerivative,
            sign * dphi[i],
            cot(theta) * s_nn * phi[i],
        );
        if normal.is_none_or(|old| r.abs > old.abs) {
            normal = Some(r);
        }
    }
    out.extend(sigma);
    out.extend(normal);

    // φΔφ + |σ|²φ² = (|σ|² − nH²)φ, pointwise.
    let lap = mode_laplacian(surface, &phi, 0);
    let (mut worst, mut lhs_max, mut rhs_max) = (0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..p.len() {
        if let Some(l) = lap[i] {
            let lhs = phi[i] * l + curv.sigma_sq[i] * phi[i] * phi[i];
            let rhs = (curv.sigma_sq[i] - n * h * h) * phi[i];
            worst = worst.max((lhs - rhs).abs());
            lhs_max = lhs_max.max(lhs.abs());
            rhs_max = rhs_max.max(rhs.abs());
        }
    }
    out.push(IdentityResidual::with_abs(
        IdentityId::PhiInterior,
        lhs_max,
        rhs_max,
        worst,
    ));

    // Σ_walls ⟨ν, e_{n+1}⟩ vol(∂Σ) = nH ∫ ⟨N, e_{n+1}⟩.
    let v: Vec<f64> = p.alpha.iter().map(|a| a.cos()).collect();
    let w: Vec<f64> = (0..p.len())
        .map(|i| v[i] * p.x[i].powi(nn as i32 - 1))
        .collect();
    let int_v = omega * numerics::trapezoid(&w, p.step());
    let mut lhs = -st * boundary_vol;
    for (end, wall) in surface.wall_ends() {
        if wall == Wall::Upper {
            lhs += surface.problem.theta_upper.sin() * vol(surface.end_index(end));
        }
    }
    out.push(IdentityResidual::new(
        IdentityId::BoundaryVolume,
        lhs,
        n * h * int_v,
    ));

    if surface.problem.domain == Domain::Halfspace {
        let data = NodalData::on_profile(surface, phi.clone())?;
        let pencil = data.pencil(surface)?;
        let i_phi = index(&pencil, &phi, &phi, omega);
        let excess: Vec<f64> = (0..p.len())
            .map(|i| (curv.sigma_sq[i] - n * h * h) * p.x[i].powi(nn as i32 - 1))
            .collect();
        let closed = -omega * numerics::trapezoid(&excess, p.step())
            + (n - 1.0) * st * ct * (h * boundary_vol + st * boundary_h);
        out.push(IdentityResidual::new(
            IdentityId::PhiIndexForm,
            i_phi,
            closed,
        ));
    }
    Ok(out)
}

/// Which half of `v` the balancing coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaledPart {
    Plus,
    Minus,
}

/// `v`, its positive and negative parts, and the mean-zero combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VFamilyReport {
    pub v: TestFunctionReport,
    pub v_plus: TestFunctionReport,
    pub v_minus: TestFunctionReport,
    /// `I(v₊, v₋)`; zero when the supports only meet at crossings.
    pub cross_index: f64,
    /// Arclengths where `v` changes sign.
    pub crossings: Vec<f64>,
    /// `v₊ + a v₋` or `v₋ + a v₊`; absent without a sign change.
    pub balanced: Option<TestFunctionReport>,
    pub sign_change: bool,
}

/// `v = ⟨N, e_{n+1}⟩` with every sign change inserted as a node where the
/// linear interpolant vanishes.
fn split_v(surface: &RevolutionSurface) -> Result<(NodalData, Vec<f64>)> {
    let p = &surface.profile;
    let curv = curvature_data(surface)?;
    let v: Vec<f64> = p.alpha.iter().map(|a| a.cos()).collect();
    let mut d = NodalData {
        nodes: Vec::with_capacity(p.len() + 8),
        x: Vec::with_capacity(p.len() + 8),
        sigma_sq: Vec::with_capacity(p.len() + 8),
        values: Vec::with_capacity(p.len() + 8),
    };
    let mut crossings = Vec::new();
    let tiny = 1e-14;
    for i in 0..p.len() {
        d.nodes.push(p.s[i]);
        d.x.push(p.x[i]);
        d.sigma_sq.push(curv.sigma_sq[i]);
        d.values.push(if v[i].abs() < tiny { 0.0 } else { v[i] });
        if i + 1 < p.len() && v[i].abs() >= tiny && v[i + 1].abs() >= tiny && v[i] * v[i + 1] < 0.0
        {
            let t = v[i] / (v[i] - v[i + 1]);
            let lerp = |a: f64, b: f64| a + t * (b - a);
            let s = lerp(p.s[i], p.s[i + 1]);
            crossings.push(s);
            d.nodes.push(s);
            d.x.push(lerp(p.x[i], p.x[i + 1]));
            d.sigma_sq
                .push(lerp(curv.sigma_sq[i], curv.sigma_sq[i + 1]));
            d.values.push(0.0);
        } else if i + 1 < p.len() && v[i].abs() < tiny && i > 0 && v[i - 1] * v[i + 1] < 0.0 {
            crossings.push(p.s[i]);
        }
    }
    Ok((d, crossings))
}

/// `−Σ cot θ σ(ν, ν) vol` over the wall circles on which `v` has sign `sign`.
fn boundary_index(surface: &RevolutionSurface, sign: f64) -> Result<f64> {
    let p = &surface.profile;
    let curv = curvature_data(surface)?;
    let omega = unit_sphere_area(surface.n());
    let mut total = 0.0;
    for (end, wall) in surface.wall_ends() {
        let i = surface.end_index(end);
        let v = p.alpha[i].cos();
        if v * sign > 0.0 {
            let theta = surface.problem.theta(wall);
            total -= cot(theta) * curv.kappa1[i] * omega * p.x[i].powi(surface.n() as i32 - 1);
        }
    }
    Ok(total)
}

/// Mean-zero combination `fixed + a·scaled`. Shared by the slab and the
/// half-space constructions, which only differ in which part is scaled.
fn balance(
    pencil: &ModePencil,
    fixed: &[f64],
    scaled: &[f64],
    omega: f64,
) -> Result<(f64, Vec<f64>)> {
    let m_scaled = integral(pencil, scaled, omega);
    if m_scaled == 0.0 || max_abs(scaled) == 0.0 {
        return Err(CapstabError::NoSignChange);
    }
    let a = -integral(pencil, fixed, omega) / m_scaled;
    Ok((
        a,
        fixed.iter().zip(scaled).map(|(f, s)| f + a * s).collect(),
    ))
}

/// Evaluates `v`, `v₊`, `v₋` and the balanced combination. Checks
/// `I(v±, v±) = −Σ cot θ σ(ν, ν) vol` over the wall circles where `v` has
/// that sign (zero on free-boundary walls), `I(v₊, v₋) = 0` and that the
/// combination is mean-zero. Without a sign change the report has
/// `sign_change = false` and checks the degenerate identity for `v` itself.
pub fn eval_v_family(surface: &RevolutionSurface, scaled: ScaledPart) -> Result<VFamilyReport> {
    let (data, crossings) = split_v(surface)?;
    let pencil = data.pencil(surface)?;
    let omega = unit_sphere_area(surface.n());
    let plus: Vec<f64> = data.values.iter().map(|v| v.max(0.0)).collect();
    let minus: Vec<f64> = data.values.iter().map(|v| v.min(0.0)).collect();
    let mut v = report(
        TestFunctionId::V,
        surface,
        &data,
        &pencil,
        data.values.clone(),
    );
    let mut v_plus = report(TestFunctionId::VPlus, surface, &data, &pencil, plus.clone());
    let mut v_minus = report(
        TestFunctionId::VMinus,
        surface,
        &data,
        &pencil,
        minus.clone(),
    );
    let expect_plus = boundary_index(surface, 1.0)?;
    let expect_minus = boundary_index(surface, -1.0)?;
    v_plus.checks.push(IdentityResidual::new(
        IdentityId::WallIndex,
        v_plus.index_value,
        expect_plus,
    ));
    v_minus.checks.push(IdentityResidual::new(
        IdentityId::WallIndex,
        v_minus.index_value,
        expect_minus,
    ));
    v.checks.push(IdentityResidual::new(
        IdentityId::WallIndex,
        v.index_value,
        expect_plus + expect_minus,
    ));
    let cross_index = index(&pencil, &plus, &minus, omega);
    let sign_change = max_abs(&plus) > 0.0 && max_abs(&minus) > 0.0;
    let balanced = if sign_change {
        let (fixed, other) = match scaled {
            ScaledPart::Minus => (&plus, &minus),
            ScaledPart::Plus => (&minus, &plus),
        };
        let (a, combo) = balance(&pencil, fixed, other, omega)?;
        let mut rep = report(TestFunctionId::W, surface, &data, &pencil, combo);
        rep.balance = Some(a);
        rep.checks
            .push(IdentityResidual::new(IdentityId::PhiMean, rep.mean, 0.0));
        Some(rep)
    } else {
        None
    };
    Ok(VFamilyReport {
        v,
        v_plus,
        v_minus,
        cross_index,
        crossings,
        balanced,
        sign_change,
    })
}

/// `w = v_b + α v_o` on a half-space surface, where `v_b` is the part of `v`
/// carrying the boundary values and `α` makes `∫ w = 0`, compared with
/// `I(w, w) = −nH cot θ vol(∂Σ) − (n−1) cos θ ∫ H_∂Σ`.
///
/// For `θ < π/2` this is `w = v₋ + α v₊`; for `θ > π/2` the roles swap.
pub fn eval_w(surface: &RevolutionSurface) -> Result<TestFunctionReport> {
    require_halfspace(surface)?;
    let theta = surface.problem.theta_lower;
    if (theta - std::f64::consts::FRAC_PI_2).abs() < 1e-12 {
        return Err(CapstabError::InvalidInput("w needs θ ≠ π/2".into()));
    }
    // Boundary value of v is −cos θ.
    let scaled = if theta < std::f64::consts::FRAC_PI_2 {
        ScaledPart::Plus
    } else {
        ScaledPart::Minus
    };
    let fam = eval_v_family(surface, scaled)?;
    let mut w = fam.balanced.ok_or(CapstabError::NoSignChange)?;
    let nn = surface.n();
    let n = nn as f64;
    let h = surface.mean_curvature();
    let omega = unit_sphere_area(nn);
    let p = &surface.profile;
    let mut vol = 0.0;
    let mut int_h = 0.0;
    for end in lower_wall_ends(surface) {
        let i = surface.end_index(end);
        let dv = omega * p.x[i].powi(nn as i32 - 1);
        vol += dv;
        int_h += surface.boundary_frame(end)?.boundary_mean_curvature() * dv;
    }
    let closed = -n * h * cot(theta) * vol - (n - 1.0) * theta.cos() * int_h;
    w.checks.push(IdentityResidual::new(
        IdentityId::WIndexForm,
        w.index_value,
        closed,
    ));
    Ok(w)
}

/// The rotation field `⟨ψ ∧ e₃, N⟩` for `n = 2`. It vanishes identically on
/// a surface of revolution about `e₃`, so its Jacobi system holds trivially.
pub fn eval_u_rotational(surface: &RevolutionSurface) -> Result<TestFunctionReport> {
    if surface.n() != 2 {
        return Err(CapstabError::DimensionUnsupported(surface.n()));
    }
    let p = &surface.profile;
    // ψ ∧ e₃ is horizontal and tangent to the parallels; N lies in the meridian plane.
    let zeros = vec![0.0; p.len()];
    let data = NodalData::on_profile(surface, zeros.clone())?;
    let pencil = data.pencil(surface)?;
    let mut rep = report(TestFunctionId::URot, surface, &data, &pencil, zeros);
    rep.checks
        .push(IdentityResidual::new(IdentityId::PhiMean, rep.mean, 0.0));
    Ok(rep)
}
