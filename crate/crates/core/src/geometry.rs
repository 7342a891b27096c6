//! Hypersurfaces of revolution in `R^{n+1}` given by a planar generating curve
//! `(x(s), z(s))` with tangent angle `α(s)`, together with the capillary data
//! (walls, contact angles, mean curvature) that turn them into test cases.
//!
//! Orientation: the unit normal is `N = (-sin α · ω, cos α)` for `ω` on the unit
//! `(n-1)`-sphere, which makes `κ₁ = α′`, `κ₂ = sin α / x` and `Δψ = nH N`.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CapstabError, Result};
use crate::numerics::{self, unit_ball_volume, unit_sphere_area};
use crate::ode;

/// Smallest admissible sample count on a profile.
pub const MIN_SAMPLES: usize = 16;
/// Wall-membership tolerance for endpoints.
pub const WALL_TOL: f64 = 1e-8;
/// Contact-angle tolerance used when validating a surface.
pub const ANGLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Halfspace,
    Slab { height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapillaryProblem {
    pub n: usize,
    pub domain: Domain,
    pub theta_lower: f64,
    /// Ignored in the half-space.
    pub theta_upper: f64,
    pub mean_curvature: f64,
}

impl CapillaryProblem {
    pub fn halfspace(n: usize, theta: f64, mean_curvature: f64) -> Self {
        Self {
            n,
            domain: Domain::Halfspace,
            theta_lower: theta,
            theta_upper: theta,
            mean_curvature,
        }
    }

    pub fn slab(
        n: usize,
        height: f64,
        theta_lower: f64,
        theta_upper: f64,
        mean_curvature: f64,
    ) -> Self {
        Self {
            n,
            domain: Domain::Slab { height },
            theta_lower,
            theta_upper,
            mean_curvature,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CapstabError::InvalidInput(format!(
                "dimension n = {} < 2",
                self.n
            )));
        }
        let angle_ok = |t: f64| t > 0.0 && t < PI;
        if !angle_ok(self.theta_lower) {
            return Err(CapstabError::InvalidInput(format!(
                "contact angle {} outside (0, π)",
                self.theta_lower
            )));
        }
        if let Domain::Slab { height } = self.domain {
            if !(height > 0.0) {
                return Err(CapstabError::InvalidInput(format!(
                    "slab height {height} must be positive"
                )));
            }
            if !angle_ok(self.theta_upper) {
                return Err(CapstabError::InvalidInput(format!(
                    "contact angle {} outside (0, π)",
                    self.theta_upper
                )));
            }
        }
        if !(self.mean_curvature >= 0.0) {
            return Err(CapstabError::InvalidInput(format!(
                "mean curvature {} must be non-negative",
                self.mean_curvature
            )));
        }
        Ok(())
    }

    pub fn wall_height(&self, wall: Wall) -> Result<f64> {
        match (wall, self.domain) {
            (Wall::Lower, _) => Ok(0.0),
            (Wall::Upper, Domain::Slab { height }) => Ok(height),
            (Wall::Upper, Domain::Halfspace) => Err(CapstabError::InvalidSurface(
                "the half-space has no upper wall".into(),
            )),
        }
    }

    pub fn theta(&self, wall: Wall) -> f64 {
        match wall {
            Wall::Lower => self.theta_lower,
            Wall::Upper => self.theta_upper,
        }
    }
}

/// Arclength-sampled generating curve on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub s: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ProfileRow {
    s: f64,
    x: f64,
    z: f64,
    alpha: f64,
}

impl ProfileCurve {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    pub fn length(&self) -> f64 {
        self.s[self.len() - 1] - self.s[0]
    }

    /// Checks sample count and grid uniformity.
    pub fn check_grid(&self) -> Result<()> {
        let m = self.len();
        if m < MIN_SAMPLES {
            return Err(CapstabError::GridTooCoarse(m));
        }
        if self.x.len() != m || self.z.len() != m || self.alpha.len() != m {
            return Err(CapstabError::InvalidInput(
                "profile columns differ in length".into(),
            ));
        }
        let ds = self.step();
        if !(ds > 0.0) {
            return Err(CapstabError::NonUniformGrid(1));
        }
        for i in 1..m {
            let d = self.s[i] - self.s[i - 1];
            if (d - ds).abs() > 1e-9 * ds.max(self.s[i].abs() * 1e-3) {
                return Err(CapstabError::NonUniformGrid(i));
            }
        }
        Ok(())
    }

    /// Writes `s,x,z,alpha` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CapstabError::Io(e.to_string());
        w.write_record(["s", "x", "z", "alpha"]).map_err(io)?;
        for i in 0..self.len() {
            let row = [self.s[i], self.x[i], self.z[i], self.alpha[i]].map(|v| format!("{v:.16e}"));
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CapstabError::Io(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut p = ProfileCurve {
            s: vec![],
            x: vec![],
            z: vec![],
            alpha: vec![],
        };
        for row in r.deserialize::<ProfileRow>() {
            let row = row.map_err(|e| CapstabError::Io(e.to_string()))?;
            p.s.push(row.s);
            p.x.push(row.x);
            p.z.push(row.z);
            p.alpha.push(row.alpha);
        }
        Ok(p)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is ascii")
    }

    /// Reverses the direction of travel: `s ↦ L - s`, `α ↦ α + π`.
    /// This flips the normal and hence the sign of every curvature.
    pub fn reversed(&self) -> Self {
        let m = self.len();
        let s0 = self.s[0];
        let l = self.length();
        ProfileCurve {
            s: (0..m).map(|i| s0 + l - (self.s[m - 1 - i] - s0)).collect(),
            x: self.x.iter().rev().copied().collect(),
            z: self.z.iter().rev().copied().collect(),
            alpha: self.alpha.iter().rev().map(|a| a + PI).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wall {
    Lower,
    Upper,
}

impl Wall {
    /// Exterior unit normal of the wall, vertical component.
    pub fn normal_sign(self) -> f64 {
        match self {
            Wall::Lower => -1.0,
            Wall::Upper => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointKind {
    /// The profile meets the axis of revolution (`x = 0`).
    Axis,
    Wall(Wall),
    /// A free cut with no boundary condition; only for verification surfaces.
    Cut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    Start,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Disk,
    Annulus,
    Sphere,
    Open,
}

/// Exact description of the profile used to evaluate it off the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeModel {
    /// `α = α₀ + s/R`, `x = R sin α`, `z = z_c − R cos α`.
    Circle {
        radius: f64,
        alpha0: f64,
        z_center: f64,
    },
    /// Straight segment `x = x₀ + s cos α`, `z = z₀ + s sin α`.
    Line { x0: f64, z0: f64, alpha: f64 },
    /// Solution of the rotational CMC equation through the samples.
    Delaunay,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevolutionSurface {
    pub profile: ProfileCurve,
    pub problem: CapillaryProblem,
    pub start: EndpointKind,
    pub finish: EndpointKind,
    pub shape: ShapeModel,
}

/// Per-sample curvature data.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureData {
    pub kappa1: Vec<f64>,
    pub kappa2: Vec<f64>,
    pub sigma_sq: Vec<f64>,
    pub h_check: Vec<f64>,
}

/// Boundary frame in the (radial, vertical) half-plane at a wall endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryFrame {
    pub normal: [f64; 2],
    pub conormal: [f64; 2],
    pub wall_conormal: [f64; 2],
    pub wall_normal: [f64; 2],
    /// Measured contact angle.
    pub theta: f64,
    /// `±1`: `wall_conormal = orientation · (radial unit vector)`.
    pub orientation: f64,
    pub radius: f64,
    pub height: f64,
}

impl BoundaryFrame {
    /// Residuals of `cosθ N + sinθ ν = N̄` and `ν = cosθ ν̄ + sinθ N̄`.
    pub fn relation_residuals(&self) -> (f64, f64) {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let r1 = (0..2)
            .map(|k| (c * self.normal[k] + s * self.conormal[k] - self.wall_normal[k]).abs())
            .fold(0.0, f64::max);
        let r2 = (0..2)
            .map(|k| (c * self.wall_conormal[k] + s * self.wall_normal[k] - self.conormal[k]).abs())
            .fold(0.0, f64::max);
        (r1, r2)
    }

    /// Mean curvature of the boundary sphere inside the wall with respect to
    /// the wall conormal.
    pub fn boundary_mean_curvature(&self) -> f64 {
        -self.orientation / self.radius
    }

    /// `σ(ν, e)` for a unit vector `e` tangent to the boundary sphere.
    /// Rotational symmetry makes `D_e ν` a multiple of `e`, so only the
    /// projection onto the normal is computed.
    pub fn mixed_entry(&self) -> f64 {
        // In (x, y, z) coordinates at the boundary point (x_b, 0, z_b), e = ∂_y.
        let d_e_nu = [0.0, self.conormal[0] / self.radius, 0.0];
        let n3 = [self.normal[0], 0.0, self.normal[1]];
        d_e_nu.iter().zip(&n3).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Areas {
    pub lateral_area: f64,
    /// Signed wetted area per wall endpoint, in (start, finish) order.
    pub wetted_areas: Vec<(Wall, f64)>,
    pub enclosed_volume: f64,
}

impl RevolutionSurface {
    /// Builds and validates a surface.
    pub fn new(
        profile: ProfileCurve,
        problem: CapillaryProblem,
        start: EndpointKind,
        finish: EndpointKind,
        shape: ShapeModel,
    ) -> Result<Self> {
        let surf = Self {
            profile,
            problem,
            start,
            finish,
            shape,
        };
        surf.validate()?;
        Ok(surf)
    }

    pub fn n(&self) -> usize {
        self.problem.n
    }

    pub fn mean_curvature(&self) -> f64 {
        self.problem.mean_curvature
    }

    pub fn endpoint(&self, end: End) -> EndpointKind {
        match end {
            End::Start => self.start,
            End::Finish => self.finish,
        }
    }

    pub fn end_index(&self, end: End) -> usize {
        match end {
            End::Start => 0,
            End::Finish => self.profile.len() - 1,
        }
    }

    pub fn topology(&self) -> Topology {
        use EndpointKind::*;
        match (self.start, self.finish) {
            (Axis, Axis) => Topology::Sphere,
            (Axis, Wall(_)) | (Wall(_), Axis) => Topology::Disk,
            (Wall(_), Wall(_)) => Topology::Annulus,
            _ => Topology::Open,
        }
    }

    /// Wall endpoints in (start, finish) order.
    pub fn wall_ends(&self) -> Vec<(End, Wall)> {
        let mut out = Vec::new();
        for end in [End::Start, End::Finish] {
            if let EndpointKind::Wall(w) = self.endpoint(end) {
                out.push((end, w));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        let p = &self.profile;
        p.check_grid()?;
        let m = p.len();
        for i in 0..m {
            let is_axis = (i == 0 && self.start == EndpointKind::Axis)
                || (i == m - 1 && self.finish == EndpointKind::Axis);
            if is_axis {
                if p.x[i].abs() > WALL_TOL {
                    return Err(CapstabError::InvalidSurface(format!(
                        "axis endpoint at x = {}",
                        p.x[i]
                    )));
                }
            } else if !(p.x[i] > 0.0) {
                return Err(CapstabError::NonPositiveRadius {
                    index: i,
                    x: p.x[i],
                });
            }
        }
        for (end, wall) in self.wall_ends() {
            let zw = self.problem.wall_height(wall)?;
            let i = self.end_index(end);
            if (p.z[i] - zw).abs() > WALL_TOL {
                return Err(CapstabError::InvalidSurface(format!(
                    "{end:?} endpoint at z = {} is off the {wall:?} wall z = {zw}",
                    p.z[i]
                )));
            }
            let frame = self.boundary_frame(end)?;
            let target = self.problem.theta(wall);
            if !(frame.theta > 0.0 && frame.theta < PI) || (frame.theta - target).abs() > ANGLE_TOL
            {
                return Err(CapstabError::InvalidSurface(format!(
                    "{end:?} contact angle {} differs from prescribed {target}",
                    frame.theta
                )));
            }
        }
        Ok(())
    }

    /// Profile state `(x, z, α)` at arclength `s` from the exact shape.
    pub fn state_at(&self, s: f64) -> [f64; 3] {
        let p = &self.profile;
        match self.shape {
            ShapeModel::Circle {
                radius,
                alpha0,
                z_center,
            } => {
                let a = alpha0 + (s - p.s[0]) / radius;
                [radius * a.sin(), z_center - radius * a.cos(), a]
            }
            ShapeModel::Line { x0, z0, alpha } => {
                let t = s - p.s[0];
                [x0 + t * alpha.cos(), z0 + t * alpha.sin(), alpha]
            }
            ShapeModel::Delaunay => {
                let ds = p.step();
                let i = (((s - p.s[0]) / ds).round().max(0.0) as usize).min(p.len() - 1);
                let y0 = [p.x[i], p.z[i], p.alpha[i]];
                let params = ode::CmcOde::new(self.n(), self.mean_curvature());
                let span = s - p.s[i];
                let steps = ((span.abs() / ds) * 8.0).ceil().max(1.0) as usize;
                let mut y = y0;
                let h = span / steps as f64;
                for _ in 0..steps {
                    y = params.rk4(y, h);
                }
                y
            }
        }
    }
}

/// Per-sample principal curvatures, `|σ|²` and the recomputed mean curvature.
pub fn curvature_data(surface: &RevolutionSurface) -> Result<CurvatureData> {
    let p = &surface.profile;
    p.check_grid()?;
    let m = p.len();
    let n = surface.n() as f64;
    let kappa1 = numerics::derivative(&p.alpha, p.step());
    let mut kappa2 = vec![0.0; m];
    for i in 0..m {
        let axis = (i == 0 && surface.start == EndpointKind::Axis)
            || (i == m - 1 && surface.finish == EndpointKind::Axis);
        if axis {
            kappa2[i] = kappa1[i];
        } else if p.x[i] > 0.0 {
            kappa2[i] = p.alpha[i].sin() / p.x[i];
        } else {
            return Err(CapstabError::NonPositiveRadius {
                index: i,
                x: p.x[i],
            });
        }
    }
    let sigma_sq = kappa1
        .iter()
        .zip(&kappa2)
        .map(|(a, b)| a * a + (n - 1.0) * b * b)
        .collect();
    let h_check = kappa1
        .iter()
        .zip(&kappa2)
        .map(|(a, b)| (a + (n - 1.0) * b) / n)
        .collect();
    Ok(CurvatureData {
        kappa1,
        kappa2,
        sigma_sq,
        h_check,
    })
}

/// Unit tangent, normal and wall frame at a wall endpoint.
pub fn boundary_frame(surface: &RevolutionSurface, end: End) -> Result<BoundaryFrame> {
    surface.boundary_frame(end)
}

impl RevolutionSurface {
    pub fn boundary_frame(&self, end: End) -> Result<BoundaryFrame> {
        let wall = match self.endpoint(end) {
            EndpointKind::Wall(w) => w,
            EndpointKind::Axis => return Err(CapstabError::AxisEndpoint),
            EndpointKind::Cut => return Err(CapstabError::NotAWallEndpoint),
        };
        let i = self.end_index(end);
        let a = self.profile.alpha[i];
        let tangent = [a.cos(), a.sin()];
        let normal = [-a.sin(), a.cos()];
        let conormal = match end {
            End::Start => [-tangent[0], -tangent[1]],
            End::Finish => tangent,
        };
        let wall_normal = [0.0, wall.normal_sign()];
        let cos_t = normal[1] * wall_normal[1];
        let sin_t = conormal[1] * wall_normal[1];
        let theta = sin_t.atan2(cos_t);
        let st = theta.sin();
        let ct = theta.cos();
        let wall_conormal = if st.abs() > 1e-300 {
            [
                (ct * wall_normal[0] - normal[0]) / st,
                (ct * wall_normal[1] - normal[1]) / st,
            ]
        } else {
            [0.0, 0.0]
        };
        let orientation = if wall_conormal[0] >= 0.0 { 1.0 } else { -1.0 };
        Ok(BoundaryFrame {
            normal,
            conormal,
            wall_conormal,
            wall_normal,
            theta,
            orientation,
            radius: self.profile.x[i],
            height: self.profile.z[i],
        })
    }
}

/// Robin coefficient `q = cot θ · σ(ν, ν)` at a wall endpoint; `σ(ν, ν) = κ₁`
/// because the conormal is the profile direction.
pub fn robin_coefficient(surface: &RevolutionSurface, end: End) -> Result<f64> {
    let frame = surface.boundary_frame(end)?;
    let curv = curvature_data(surface)?;
    let k1 = curv.kappa1[surface.end_index(end)];
    Ok(cot(frame.theta) * k1)
}

pub fn cot(t: f64) -> f64 {
    t.cos() / t.sin()
}

/// Lateral area, signed wetted areas and enclosed volume.
pub fn areas(surface: &RevolutionSurface) -> Result<Areas> {
    let p = &surface.profile;
    let n = surface.n();
    let omega = unit_sphere_area(n);
    let ds = p.step();
    let w: Vec<f64> = p.x.iter().map(|x| x.powi(n as i32 - 1)).collect();
    let lateral_area = omega * numerics::trapezoid(&w, ds);
    let vol: Vec<f64> =
        p.x.iter()
            .zip(&p.alpha)
            .map(|(x, a)| x.powi(n as i32) * a.sin())
            .collect();
    let enclosed_volume = unit_ball_volume(n) * numerics::trapezoid(&vol, ds);
    let mut wetted_areas = Vec::new();
    for (end, wall) in surface.wall_ends() {
        let f = surface.boundary_frame(end)?;
        wetted_areas.push((
            wall,
            f.orientation * unit_ball_volume(n) * f.radius.powi(n as i32),
        ));
    }
    Ok(Areas {
        lateral_area,
        wetted_areas,
        enclosed_volume,
    })
}

/// Hex SHA-256 of the surface data, used to tie reports to their input.
pub fn surface_hash(surface: &RevolutionSurface) -> String {
    let mut h = Sha256::new();
    let pr = &surface.problem;
    h.update((pr.n as u64).to_le_bytes());
    h.update(pr.theta_lower.to_le_bytes());
    h.update(pr.theta_upper.to_le_bytes());
    h.update(pr.mean_curvature.to_le_bytes());
    if let Domain::Slab { height } = pr.domain {
        h.update(height.to_le_bytes());
    }
    h.update(format!("{:?}{:?}", surface.start, surface.finish).as_bytes());
    for col in [
        &surface.profile.s,
        &surface.profile.x,
        &surface.profile.z,
        &surface.profile.alpha,
    ] {
        for v in col.iter() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl CapillaryProblem {
    /// Slab height, or `None` in the half-space.
    pub fn domain_height(&self) -> Option<f64> {
        match self.domain {
            Domain::Slab { height } => Some(height),
            Domain::Halfspace => None,
        }
    }
}

impl RevolutionSurface {
    /// Same surface on a uniform grid of `m` samples, evaluated from the
    /// shape model. Endpoints keep their exact wall heights and axis radii.
    pub fn resampled(&self, m: usize) -> Result<Self> {
        if m < MIN_SAMPLES {
            return Err(CapstabError::GridTooCoarse(m));
        }
        let p = &self.profile;
        let (s0, l) = (p.s[0], p.length());
        let mut out = ProfileCurve {
            s: Vec::with_capacity(m),
            x: Vec::with_capacity(m),
            z: Vec::with_capacity(m),
            alpha: Vec::with_capacity(m),
        };
        for i in 0..m {
            let s = s0 + l * i as f64 / (m - 1) as f64;
            let y = if i == 0 {
                [p.x[0], p.z[0], p.alpha[0]]
            } else if i == m - 1 {
                let k = p.len() - 1;
                [p.x[k], p.z[k], p.alpha[k]]
            } else {
                self.state_at(s)
            };
            out.s.push(s);
            out.x.push(y[0]);
            out.z.push(y[1]);
            out.alpha.push(y[2]);
        }
        Self::new(out, self.problem, self.start, self.finish, self.shape)
    }

    /// Is sample `i` an axis endpoint?
    pub fn is_axis_sample(&self, i: usize) -> bool {
        (i == 0 && self.start == EndpointKind::Axis)
            || (i + 1 == self.profile.len() && self.finish == EndpointKind::Axis)
    }
}
