//! Quadrature and finite-difference checks of the classical identities for
//! hypersurfaces in Euclidean space, specialised to surfaces of revolution:
//!
//! * `Δψ = nH N`
//! * `Δ⟨ψ,N⟩ + |σ|²⟨ψ,N⟩ = −nH`
//! * `ΔN + |σ|² N = 0`
//! * `div(ψ − ⟨ψ,N⟩N) = n + nH⟨ψ,N⟩` and `div(a − ⟨a,N⟩N) = nH⟨a,N⟩`
//! * `n∫N = ∮ ⟨ψ,ν⟩N − ⟨ψ,N⟩ν`
//!
//! plus a finite-difference check of the first variation of energy and volume.
//!
//! A function `g(s) Y_ℓ(ω)` has Laplacian `(g″ + (n−1)(x′/x) g′ − ℓ(ℓ+n−2) g/x²) Y_ℓ`;
//! at an axis sample the ℓ = 0 part tends to `n g″`.

use serde::{Deserialize, Serialize};

use crate::error::{CapstabError, Result};
use crate::geometry::{curvature_data, End, EndpointKind, RevolutionSurface};
use crate::numerics::{self, composite_gauss, unit_ball_volume, unit_sphere_area};
use crate::ode::CmcOde;

/// Fraction of the arclength next to an axis endpoint excluded from ℓ = 1 checks,
/// where `g′/x` and `g/x²` amplify the stencil error.
pub const AXIS_MARGIN: f64 = 0.15;
/// A residual within this multiple of the roundoff floor counts as exact.
pub const FLOOR_FACTOR: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityId {
    PositionLaplacian,
    SupportEquation,
    GaussEquation,
    DivergenceIdentities,
    NormalIntegral,
    FirstVariation,
    PhiInterior,
    PhiNormalDerivative,
    BoundarySigma,
    BoundaryVolume,
    PhiIndexForm,
    PhiMean,
    WallIndex,
    WIndexForm,
}

impl IdentityId {
    pub fn as_str(&self) -> &'static str {
        match self {
            IdentityId::PositionLaplacian => "position_laplacian",
            IdentityId::SupportEquation => "support_equation",
            IdentityId::GaussEquation => "gauss_equation",
            IdentityId::DivergenceIdentities => "divergence_identities",
            IdentityId::NormalIntegral => "normal_integral",
            IdentityId::FirstVariation => "first_variation",
            IdentityId::PhiInterior => "phi_interior",
            IdentityId::PhiNormalDerivative => "phi_normal_derivative",
            IdentityId::BoundarySigma => "boundary_sigma",
            IdentityId::BoundaryVolume => "boundary_volume",
            IdentityId::PhiIndexForm => "phi_index_form",
            IdentityId::PhiMean => "phi_mean",
            IdentityId::WallIndex => "wall_index",
            IdentityId::WIndexForm => "w_index_form",
        }
    }
}

/// Residual of one identity on one grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub max_pointwise: f64,
    pub integral_abs: f64,
    pub integral_rel: f64,
    /// Roundoff level below which the residual carries no information.
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub id: IdentityId,
    pub grid: usize,
    pub max_residual: f64,
    pub integral_abs: f64,
    pub integral_rel: f64,
    /// Observed order from a coarse/fine pair; only set when two grids were used
    /// and the coarse residual is above the roundoff floor.
    pub order: Option<f64>,
    pub order_grids: Option<(usize, usize)>,
    /// Both grids were at the roundoff floor: the identity holds exactly in
    /// the discretization.
    pub exact: bool,
}

impl ResidualReport {
    fn single(id: IdentityId, grid: usize, r: Residual) -> Self {
        Self {
            id,
            grid,
            max_residual: r.max_pointwise,
            integral_abs: r.integral_abs,
            integral_rel: r.integral_rel,
            order: None,
            order_grids: None,
            exact: false,
        }
    }

    /// Order is acceptable if it lies in `[lo, hi]` or the identity is exact.
    pub fn order_ok(&self, lo: f64, hi: f64) -> bool {
        self.exact || self.order.is_some_and(|p| p >= lo && p <= hi)
    }
}

type CheckFn = fn(&RevolutionSurface) -> Result<Residual>;

fn run(id: IdentityId, f: CheckFn, surface: &RevolutionSurface) -> Result<ResidualReport> {
    Ok(ResidualReport::single(
        id,
        surface.profile.len(),
        f(surface)?,
    ))
}

/// Runs `check` on `surface` and estimates the order from the grids
/// `m_c` and `2 m_c − 1` with `m_c = ⌈M/2⌉`, resampled from the shape model.
pub fn with_order(id: IdentityId, surface: &RevolutionSurface) -> Result<ResidualReport> {
    let f = check_fn(id)?;
    let mut rep = run(id, f, surface)?;
    let mc = surface.profile.len().div_ceil(2);
    let coarse = f(&surface.resampled(mc)?)?;
    let fine = f(&surface.resampled(2 * mc - 1)?)?;
    rep.order_grids = Some((mc, 2 * mc - 1));
    let at_floor = |r: &Residual| r.max_pointwise <= FLOOR_FACTOR * r.floor;
    if at_floor(&coarse) {
        rep.exact = at_floor(&fine);
    } else {
        rep.order = Some(numerics::observed_order(
            coarse.max_pointwise,
            fine.max_pointwise,
        ));
    }
    Ok(rep)
}

fn check_fn(id: IdentityId) -> Result<CheckFn> {
    Ok(match id {
        IdentityId::PositionLaplacian => position_laplacian,
        IdentityId::SupportEquation => support_equation,
        IdentityId::GaussEquation => gauss_equation,
        IdentityId::DivergenceIdentities => divergence_identities,
        IdentityId::NormalIntegral => normal_integral,
        other => {
            return Err(CapstabError::InvalidInput(format!(
                "{} has no grid-refinement check",
                other.as_str()
            )))
        }
    })
}

pub fn check_position_laplacian(surface: &RevolutionSurface) -> Result<ResidualReport> {
    run(IdentityId::PositionLaplacian, position_laplacian, surface)
}

pub fn check_support_equation(surface: &RevolutionSurface) -> Result<ResidualReport> {
    run(IdentityId::SupportEquation, support_equation, surface)
}

pub fn check_gauss_equation(surface: &RevolutionSurface) -> Result<ResidualReport> {
    run(IdentityId::GaussEquation, gauss_equation, surface)
}

pub fn check_divergence_identities(surface: &RevolutionSurface) -> Result<ResidualReport> {
    run(
        IdentityId::DivergenceIdentities,
        divergence_identities,
        surface,
    )
}

pub fn check_normal_integral(surface: &RevolutionSurface) -> Result<ResidualReport> {
    run(IdentityId::NormalIntegral, normal_integral, surface)
}

/// The five grid identities, each with an order estimate.
pub fn identity_suite(surface: &RevolutionSurface) -> Result<Vec<ResidualReport>> {
    [
        IdentityId::PositionLaplacian,
        IdentityId::SupportEquation,
        IdentityId::GaussEquation,
        IdentityId::DivergenceIdentities,
        IdentityId::NormalIntegral,
    ]
    .into_iter()
    .map(|id| with_order(id, surface))
    .collect()
}

/// Applies the separated Laplacian of mode `l` to nodal values `g`.
/// Returns `None` at samples that are excluded (axis samples for ℓ ≥ 1 and
/// the axis margin).
pub(crate) fn mode_laplacian(surface: &RevolutionSurface, g: &[f64], l: usize) -> Vec<Option<f64>> {
    let p = &surface.profile;
    let m = p.len();
    let n = surface.n() as f64;
    let ds = p.step();
    let d1 = numerics::derivative(g, ds);
    let d2 = numerics::second_derivative(g, ds);
    let lap = (l * (l + surface.n() - 2)) as f64;
    let len = p.length();
    let near_axis = |i: usize| {
        let from_start = p.s[i] - p.s[0];
        let from_finish = p.s[m - 1] - p.s[i];
        (surface.start == EndpointKind::Axis && from_start < AXIS_MARGIN * len)
            || (surface.finish == EndpointKind::Axis && from_finish < AXIS_MARGIN * len)
    };
    (0..m)
        .map(|i| {
            if surface.is_axis_sample(i) {
                return (l == 0).then(|| n * d2[i]);
            }
            if l > 0 && near_axis(i) {
                return None;
            }
            let x = p.x[i];
            Some(d2[i] + (n - 1.0) * p.alpha[i].cos() / x * d1[i] - lap * g[i] / (x * x))
        })
        .collect()
}

/// Roundoff level of a second difference of values of size `scale`.
fn stencil_floor(scale: f64, ds: f64) -> f64 {
    4.0 * f64::EPSILON * scale.max(1.0) / (ds * ds)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Folds pointwise residuals `lhs − rhs` into a [`Residual`].
fn pointwise(
    surface: &RevolutionSurface,
    res: &[Option<f64>],
    mag: &[f64],
    floor: f64,
) -> Residual {
    let p = &surface.profile;
    let n = surface.n() as i32;
    let ds = p.step();
    let mut max_pointwise = 0.0_f64;
    let mut signed = vec![0.0; p.len()];
    let mut sizes = vec![0.0; p.len()];
    for i in 0..p.len() {
        if let Some(r) = res[i] {
            max_pointwise = max_pointwise.max(r.abs());
            let w = p.x[i].powi(n - 1);
            signed[i] = r * w;
            sizes[i] = mag[i].abs() * w;
        }
    }
    let integral_abs = numerics::trapezoid(&signed, ds).abs();
    let scale = numerics::trapezoid(&sizes, ds);
    Residual {
        max_pointwise,
        integral_abs,
        integral_rel: if scale > 0.0 {
            integral_abs / scale
        } else {
            integral_abs
        },
        floor,
    }
}

fn position_laplacian(surface: &RevolutionSurface) -> Result<Residual> {
    let p = &surface.profile;
    let n = surface.n() as f64;
    let h = surface.mean_curvature();
    let lz = mode_laplacian(surface, &p.z, 0);
    let lx = mode_laplacian(surface, &p.x, 1);
    let mut res = vec![None; p.len()];
    let mut mag = vec![0.0; p.len()];
    for i in 0..p.len() {
        let (sa, ca) = p.alpha[i].sin_cos();
        let rz = lz[i].map(|v| v - n * h * ca);
        let rx = lx[i].map(|v| v + n * h * sa);
        res[i] = match (rz, rx) {
            (Some(a), Some(b)) => Some(if a.abs() > b.abs() { a } else { b }),
            (a, b) => a.or(b),
        };
        mag[i] = n * h;
    }
    let scale = max_abs(&p.x).max(max_abs(&p.z));
    Ok(pointwise(
        surface,
        &res,
        &mag,
        stencil_floor(scale, p.step()),
    ))
}

/// `⟨ψ, N⟩` per sample.
pub fn support_function(surface: &RevolutionSurface) -> Vec<f64> {
    let p = &surface.profile;
    (0..p.len())
        .map(|i| -p.x[i] * p.alpha[i].sin() + p.z[i] * p.alpha[i].cos())
        .collect()
}

fn support_equation(surface: &RevolutionSurface) -> Result<Residual> {
    let p = &surface.profile;
    let n = surface.n() as f64;
    let h = surface.mean_curvature();
    let curv = curvature_data(surface)?;
    let u = support_function(surface);
    let lu = mode_laplacian(surface, &u, 0);
    let res: Vec<Option<f64>> = (0..p.len())
        .map(|i| lu[i].map(|v| v + curv.sigma_sq[i] * u[i] + n * h))
        .collect();
    let mag: Vec<f64> = vec![n * h; p.len()];
    Ok(pointwise(
        surface,
        &res,
        &mag,
        stencil_floor(max_abs(&u), p.step()),
    ))
}

fn gauss_equation(surface: &RevolutionSurface) -> Result<Residual> {
    let p = &surface.profile;
    let curv = curvature_data(surface)?;
    let v: Vec<f64> = p.alpha.iter().map(|a| a.cos()).collect();
    let w: Vec<f64> = p.alpha.iter().map(|a| -a.sin()).collect();
    let lv = mode_laplacian(surface, &v, 0);
    let lw = mode_laplacian(surface, &w, 1);
    let mut res = vec![None; p.len()];
    let mut mag = vec![0.0; p.len()];
    for i in 0..p.len() {
        let a = lv[i].map(|l| l + curv.sigma_sq[i] * v[i]);
        let b = lw[i].map(|l| l + curv.sigma_sq[i] * w[i]);
        res[i] = match (a, b) {
            (Some(a), Some(b)) => Some(if a.abs() > b.abs() { a } else { b }),
            (a, b) => a.or(b),
        };
        mag[i] = curv.sigma_sq[i];
    }
    Ok(pointwise(surface, &res, &mag, stencil_floor(1.0, p.step())))
}

/// Both divergence identities integrated over the middle band (samples
/// `M/4 ..= 3M/4`, symmetric about the middle) and over the whole profile. The residual is the largest
/// absolute mismatch; the relative one is scaled by the larger side.
fn divergence_identities(surface: &RevolutionSurface) -> Result<Residual> {
    let p = &surface.profile;
    let m = p.len();
    let nn = surface.n();
    let n = nn as f64;
    let h = surface.mean_curvature();
    let omega = unit_sphere_area(nn);
    let ds = p.step();
    let u = support_function(surface);
    let w: Vec<f64> = p.x.iter().map(|x| x.powi(nn as i32 - 1)).collect();
    let div_psi: Vec<f64> = (0..m).map(|i| (n + n * h * u[i]) * w[i]).collect();
    let div_a: Vec<f64> = (0..m).map(|i| n * h * p.alpha[i].cos() * w[i]).collect();
    // Boundary fluxes ⟨ψ, T⟩ x^{n−1} and ⟨e_{n+1}, T⟩ x^{n−1}.
    let flux_psi = |i: usize| w[i] * (p.x[i] * p.alpha[i].cos() + p.z[i] * p.alpha[i].sin());
    let flux_a = |i: usize| w[i] * p.alpha[i].sin();
    let mut worst_abs = 0.0_f64;
    let radius = (0..m).map(|i| p.x[i].hypot(p.z[i])).fold(1.0, f64::max);
    let mut scale = omega * n * radius * max_abs(&w) * p.length();
    let quarter = (m - 1) / 4;
    for (i0, i1) in [(quarter, m - 1 - quarter), (0, m - 1)] {
        let rows = [
            (
                omega * (flux_psi(i1) - flux_psi(i0)),
                omega * numerics::trapezoid_range(&div_psi, ds, i0, i1),
            ),
            (
                omega * (flux_a(i1) - flux_a(i0)),
                omega * numerics::trapezoid_range(&div_a, ds, i0, i1),
            ),
        ];
        for (lhs, rhs) in rows {
            worst_abs = worst_abs.max((lhs - rhs).abs());
            scale = scale.max(lhs.abs()).max(rhs.abs());
        }
    }
    Ok(Residual {
        max_pointwise: worst_abs,
        integral_abs: worst_abs,
        integral_rel: worst_abs / scale,
        floor: 64.0 * f64::EPSILON * scale,
    })
}

/// Boundary side of the normal-integral identity (vertical component),
/// summed over non-axis endpoints.
pub fn normal_integral_boundary(surface: &RevolutionSurface) -> f64 {
    let p = &surface.profile;
    let nn = surface.n();
    let omega = unit_sphere_area(nn);
    let mut total = 0.0;
    for end in [End::Start, End::Finish] {
        if surface.endpoint(end) == EndpointKind::Axis {
            continue;
        }
        let i = surface.end_index(end);
        let a = p.alpha[i];
        let (t, nrm) = ([a.cos(), a.sin()], [-a.sin(), a.cos()]);
        let nu = match end {
            End::Start => [-t[0], -t[1]],
            End::Finish => t,
        };
        let psi = [p.x[i], p.z[i]];
        let psi_nu = psi[0] * nu[0] + psi[1] * nu[1];
        let psi_n = psi[0] * nrm[0] + psi[1] * nrm[1];
        total += omega * p.x[i].powi(nn as i32 - 1) * (psi_nu * nrm[1] - psi_n * nu[1]);
    }
    total
}

/// `n ∫ ⟨N, e_{n+1}⟩ dΣ` by the trapezoid rule.
pub fn normal_integral_surface(surface: &RevolutionSurface) -> f64 {
    let p = &surface.profile;
    let nn = surface.n();
    let f: Vec<f64> = (0..p.len())
        .map(|i| p.alpha[i].cos() * p.x[i].powi(nn as i32 - 1))
        .collect();
    nn as f64 * unit_sphere_area(nn) * numerics::trapezoid(&f, p.step())
}

/// Half-space form of the boundary side, `−(1/cos θ) ∮ ⟨ψ, ν⟩`, when every
/// boundary endpoint is on the lower wall and `cos θ ≠ 0`.
pub fn normal_integral_halfspace(surface: &RevolutionSurface) -> Option<f64> {
    let walls = surface.wall_ends();
    let ct = surface.problem.theta_lower.cos();
    if walls.is_empty() || ct.abs() < 1e-12 {
        return None;
    }
    if surface.start == EndpointKind::Cut || surface.finish == EndpointKind::Cut {
        return None;
    }
    let p = &surface.profile;
    let nn = surface.n();
    let mut total = 0.0;
    for (end, wall) in walls {
        if wall != crate::geometry::Wall::Lower {
            return None;
        }
        let f = surface.boundary_frame(end).ok()?;
        let i = surface.end_index(end);
        let psi_nu = p.x[i] * f.conormal[0] + p.z[i] * f.conormal[1];
        total += unit_sphere_area(nn) * p.x[i].powi(nn as i32 - 1) * psi_nu;
    }
    Some(-total / ct)
}

fn normal_integral(surface: &RevolutionSurface) -> Result<Residual> {
    let lhs = normal_integral_surface(surface);
    let rhs = normal_integral_boundary(surface);
    let mut d = (lhs - rhs).abs();
    if let Some(alt) = normal_integral_halfspace(surface) {
        d = d.max((lhs - alt).abs());
    }
    let area = crate::geometry::areas(surface)?.lateral_area;
    let scale = lhs.abs().max(rhs.abs()).max(area);
    Ok(Residual {
        max_pointwise: d,
        integral_abs: d,
        integral_rel: d / scale,
        floor: 64.0 * f64::EPSILON * area.max(1.0) * surface.n() as f64,
    })
}

/// Result of the first-variation finite-difference check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstVariationReport {
    pub delta: f64,
    /// Centered differences at `δ` and `2δ`.
    pub energy_fd: [f64; 2],
    pub volume_fd: [f64; 2],
    pub energy_formula: f64,
    pub volume_formula: f64,
    pub energy_defects: [f64; 2],
    pub volume_defects: [f64; 2],
    /// `defect(2δ) / defect(δ)`; about 4 for an `O(δ²)` defect.
    pub energy_ratio: f64,
    pub volume_ratio: f64,
    /// Both defects are at the roundoff floor (the function is quadratic in `t`).
    pub energy_exact: bool,
    pub volume_exact: bool,
    /// `E′(0) + nH V′(0)` from the formulas.
    pub lagrange_defect: f64,
}

impl FirstVariationReport {
    pub fn ratios_ok(&self, lo: f64, hi: f64) -> bool {
        let ok = |r: f64, exact: bool| exact || (r >= lo && r <= hi);
        ok(self.energy_ratio, self.energy_exact) && ok(self.volume_ratio, self.volume_exact)
    }

    /// Summary in the common report shape. `order` is the order in `δ`
    /// (`log₂` of the worse non-exact halving ratio), not a grid order.
    pub fn as_residual_report(&self, grid: usize) -> ResidualReport {
        let d = self.energy_defects[0].max(self.volume_defects[0]);
        let orders: Vec<f64> = [
            (self.energy_ratio, self.energy_exact),
            (self.volume_ratio, self.volume_exact),
        ]
        .into_iter()
        .filter(|(_, exact)| !exact)
        .map(|(r, _)| r.log2())
        .collect();
        let order = orders.into_iter().reduce(|a, b| {
            if (a - 2.0).abs() > (b - 2.0).abs() {
                a
            } else {
                b
            }
        });
        ResidualReport {
            id: IdentityId::FirstVariation,
            grid,
            max_residual: d,
            integral_abs: d,
            integral_rel: d / self
                .energy_formula
                .abs()
                .max(self.volume_formula.abs())
                .max(1e-300),
            order,
            order_grids: None,
            exact: self.energy_exact && self.volume_exact,
        }
    }
}

/// Normal variation `ψ + t (f N + c T)` with the tangential correction `c`
/// interpolated linearly between the values that keep wall endpoints on
/// their walls (and axis endpoints on the axis).
pub struct Variation<'a> {
    surface: &'a RevolutionSurface,
    f: &'a dyn Fn(f64, [f64; 3]) -> f64,
    ode: CmcOde,
    c0: f64,
    c1: f64,
    s0: f64,
    len: f64,
    fd_step: f64,
}

impl<'a> Variation<'a> {
    pub fn new(surface: &'a RevolutionSurface, f: &'a dyn Fn(f64, [f64; 3]) -> f64) -> Self {
        let p = &surface.profile;
        let s0 = p.s[0];
        let len = p.length();
        let corr = |end: End| -> f64 {
            let i = surface.end_index(end);
            let y = [p.x[i], p.z[i], p.alpha[i]];
            match surface.endpoint(end) {
                EndpointKind::Wall(_) => -f(p.s[i], y) * y[2].cos() / y[2].sin(),
                _ => 0.0,
            }
        };
        Self {
            surface,
            f,
            ode: CmcOde::new(surface.n(), surface.mean_curvature()),
            c0: corr(End::Start),
            c1: corr(End::Finish),
            s0,
            len,
            fd_step: 1e-3 * len,
        }
    }

    fn f_at(&self, s: f64) -> f64 {
        (self.f)(s, self.surface.state_at(s))
    }

    /// Eighth-order central difference of `f` along the profile.
    fn f_prime(&self, s: f64) -> f64 {
        const C: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
        let h = self.fd_step;
        let mut d = 0.0;
        for (k, c) in C.iter().enumerate() {
            let j = (k + 1) as f64;
            d += c * (self.f_at(s + j * h) - self.f_at(s - j * h));
        }
        d / h
    }

    fn c_at(&self, s: f64) -> f64 {
        let t = (s - self.s0) / self.len;
        self.c0 * (1.0 - t) + self.c1 * t
    }

    /// Position `(X, Z)` and velocity `(X′, Z′)` of the varied profile.
    fn point(&self, s: f64, t: f64) -> ([f64; 2], [f64; 2]) {
        let y = self.surface.state_at(s);
        let (sa, ca) = y[2].sin_cos();
        let tan = [ca, sa];
        let nrm = [-sa, ca];
        let f = self.f_at(s);
        let fp = self.f_prime(s);
        let c = self.c_at(s);
        let cp = (self.c1 - self.c0) / self.len;
        let k1 = self.curvature(y);
        let pos = [
            y[0] + t * (f * nrm[0] + c * tan[0]),
            y[1] + t * (f * nrm[1] + c * tan[1]),
        ];
        let a = 1.0 - t * f * k1 + t * cp;
        let b = t * fp + t * c * k1;
        let vel = [a * tan[0] + b * nrm[0], a * tan[1] + b * nrm[1]];
        (pos, vel)
    }

    fn curvature(&self, y: [f64; 3]) -> f64 {
        match self.surface.shape {
            crate::geometry::ShapeModel::Circle { radius, .. } => 1.0 / radius,
            crate::geometry::ShapeModel::Line { .. } => 0.0,
            crate::geometry::ShapeModel::Delaunay => self.ode.rhs(y)[2],
        }
    }

    /// Energy `A − Σ cos θ_i W_i` and enclosed volume of the varied surface.
    pub fn energy_volume(&self, t: f64) -> Result<(f64, f64)> {
        let nn = self.surface.n();
        let pw = nn as i32;
        let omega = unit_sphere_area(nn);
        let (pts, wts) = composite_gauss(self.s0, self.s0 + self.len, 64, 10);
        let mut area = 0.0;
        let mut vol = 0.0;
        for (s, w) in pts.iter().zip(&wts) {
            let (pos, vel) = self.point(*s, t);
            if !(pos[0] > 0.0) {
                return Err(CapstabError::PerturbationTooLarge { t });
            }
            area += w * pos[0].powi(pw - 1) * (vel[0] * vel[0] + vel[1] * vel[1]).sqrt();
            vol += w * pos[0].powi(pw) * vel[1];
        }
        let mut energy = omega * area;
        for (end, wall) in self.surface.wall_ends() {
            let frame = self.surface.boundary_frame(end)?;
            let s = self.surface.profile.s[self.surface.end_index(end)];
            let (pos, _) = self.point(s, t);
            let theta = self.surface.problem.theta(wall);
            let wetted = frame.orientation * unit_ball_volume(nn) * pos[0].powi(pw);
            energy -= theta.cos() * wetted;
        }
        Ok((energy, unit_ball_volume(nn) * vol))
    }

    /// `−nH ∫ f + Σ ∮ ⟨ξ, ν − cos θ ν̄⟩` and `∫ f`.
    pub fn formulas(&self) -> Result<(f64, f64)> {
        let nn = self.surface.n();
        let omega = unit_sphere_area(nn);
        let (pts, wts) = composite_gauss(self.s0, self.s0 + self.len, 64, 10);
        let mut int_f = 0.0;
        for (s, w) in pts.iter().zip(&wts) {
            let y = self.surface.state_at(*s);
            int_f += w * self.f_at(*s) * y[0].powi(nn as i32 - 1);
        }
        int_f *= omega;
        let mut boundary = 0.0;
        for end in [End::Start, End::Finish] {
            let kind = self.surface.endpoint(end);
            if kind == EndpointKind::Axis {
                continue;
            }
            let p = &self.surface.profile;
            let i = self.surface.end_index(end);
            let a = p.alpha[i];
            let (tan, nrm) = ([a.cos(), a.sin()], [-a.sin(), a.cos()]);
            let f = self.f_at(p.s[i]);
            let c = self.c_at(p.s[i]);
            let xi = [f * nrm[0] + c * tan[0], f * nrm[1] + c * tan[1]];
            let nu = match end {
                End::Start => [-tan[0], -tan[1]],
                End::Finish => tan,
            };
            let mut dir = nu;
            if let EndpointKind::Wall(wall) = kind {
                let frame = self.surface.boundary_frame(end)?;
                let ct = self.surface.problem.theta(wall).cos();
                dir = [
                    nu[0] - ct * frame.wall_conormal[0],
                    nu[1] - ct * frame.wall_conormal[1],
                ];
            }
            boundary += omega * p.x[i].powi(nn as i32 - 1) * (xi[0] * dir[0] + xi[1] * dir[1]);
        }
        let h = self.surface.mean_curvature();
        Ok((-(nn as f64) * h * int_f + boundary, int_f))
    }
}

/// Compares centered differences of `E(t)` and `V(t)` at `t = ±δ, ±2δ` with
/// the first-variation formulas. `f` receives `(s, (x, z, α))`.
pub fn first_variation_check(
    surface: &RevolutionSurface,
    f: &dyn Fn(f64, [f64; 3]) -> f64,
    delta: f64,
) -> Result<FirstVariationReport> {
    if !(delta > 0.0) {
        return Err(CapstabError::InvalidInput(format!(
            "step δ = {delta} must be positive"
        )));
    }
    let var = Variation::new(surface, f);
    let (e0, v0) = var.energy_volume(0.0)?;
    let mut e_fd = [0.0; 2];
    let mut v_fd = [0.0; 2];
    for (k, d) in [delta, 2.0 * delta].into_iter().enumerate() {
        let (ep, vp) = var.energy_volume(d)?;
        let (em, vm) = var.energy_volume(-d)?;
        e_fd[k] = (ep - em) / (2.0 * d);
        // N points into the enclosed region, so moving along N shrinks it.
        v_fd[k] = -(vp - vm) / (2.0 * d);
    }
    let (e_formula, v_formula) = var.formulas()?;
    let e_def = [(e_fd[0] - e_formula).abs(), (e_fd[1] - e_formula).abs()];
    let v_def = [(v_fd[0] - v_formula).abs(), (v_fd[1] - v_formula).abs()];
    // Roundoff in a centered difference of values of size |E| with step δ.
    let floor = |size: f64| 1e3 * f64::EPSILON * size.abs().max(1.0) / delta;
    let e_floor = floor(e0);
    let v_floor = floor(v0);
    let h = surface.mean_curvature();
    Ok(FirstVariationReport {
        delta,
        energy_fd: e_fd,
        volume_fd: v_fd,
        energy_formula: e_formula,
        volume_formula: v_formula,
        energy_ratio: e_def[1] / e_def[0],
        volume_ratio: v_def[1] / v_def[0],
        energy_exact: e_def[0] <= e_floor && e_def[1] <= e_floor,
        volume_exact: v_def[0] <= v_floor && v_def[1] <= v_floor,
        energy_defects: e_def,
        volume_defects: v_def,
        lagrange_defect: e_formula + surface.n() as f64 * h * v_formula,
    })
}
