//! The rotational CMC profile equation
//!
//! ```text
//! x′ = cos α,   z′ = sin α,   α′ = nH − (n−1) sin α / x
//! ```
//!
//! integrated with classical RK4. The march locates the stopping event; the
//! returned curve is then recomputed on a uniform grid with enough substeps
//! per cell to meet the requested tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{CapstabError, Result};
use crate::geometry::ProfileCurve;

/// Radius below which an interior point counts as having hit the axis.
const AXIS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmcOde {
    pub n: usize,
    pub h: f64,
}

impl CmcOde {
    pub fn new(n: usize, h: f64) -> Self {
        Self { n, h }
    }

    pub fn rhs(&self, y: [f64; 3]) -> [f64; 3] {
        let (sa, ca) = y[2].sin_cos();
        let n = self.n as f64;
        [ca, sa, n * self.h - (n - 1.0) * sa / y[0]]
    }

    pub fn rk4(&self, y: [f64; 3], h: f64) -> [f64; 3] {
        let add =
            |a: [f64; 3], b: [f64; 3], t: f64| [a[0] + t * b[0], a[1] + t * b[1], a[2] + t * b[2]];
        let k1 = self.rhs(y);
        let k2 = self.rhs(add(y, k1, 0.5 * h));
        let k3 = self.rhs(add(y, k2, 0.5 * h));
        let k4 = self.rhs(add(y, k3, h));
        let mut out = y;
        for i in 0..3 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }

    /// First integral `x^{n−1} sin α − H xⁿ`.
    pub fn flux(&self, y: [f64; 3]) -> f64 {
        let x = y[0];
        x.powi(self.n as i32 - 1) * y[2].sin() - self.h * x.powi(self.n as i32)
    }

    /// Radius at which a profile with flux `phi` is vertical. For positive
    /// flux this returns the neck (the smaller root).
    pub fn vertical_radius(&self, phi: f64) -> Result<f64> {
        let n = self.n as f64;
        let f = |x: f64| x.powf(n - 1.0) - self.h * x.powf(n) - phi;
        let (lo, hi) = if phi > 0.0 {
            if self.h <= 0.0 {
                (0.0, phi.powf(1.0 / (n - 1.0)) * 2.0 + 1.0)
            } else {
                let xc = (n - 1.0) / (n * self.h);
                if f(xc) < 0.0 {
                    return Err(CapstabError::InvalidInput(format!(
                        "flux {phi} exceeds the cylinder value {}",
                        f(xc) + phi
                    )));
                }
                (0.0, xc)
            }
        } else if phi < 0.0 && self.h > 0.0 {
            let mut hi = 2.0 / self.h;
            while f(hi) > 0.0 {
                hi *= 2.0;
            }
            (1.0 / self.h, hi)
        } else {
            return Err(CapstabError::InvalidInput(format!(
                "no vertical point for flux {phi} at H = {}",
                self.h
            )));
        };
        let (mut a, mut b) = (lo, hi);
        let fa = f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) > 0.0) == (fa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// How the starting point of a profile is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StartMode {
    /// Regular start on the axis with `α = 0`, `α′(0) = H`.
    Axis {
        z0: f64,
    },
    Point {
        x0: f64,
        z0: f64,
        alpha0: f64,
    },
    /// Vertical start (`α = π/2`) at the radius selected by the flux.
    Flux {
        phi: f64,
        z0: f64,
    },
}

/// When to end the integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopRule {
    Length(f64),
    /// First crossing of the horizontal level `z = level`.
    ZLevel(f64),
    /// The `count`-th crossing of `α = target`, not counting the start.
    Alpha {
        target: f64,
        count: usize,
    },
}

/// Default per-cell integrator tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingSpec {
    pub n: usize,
    pub mean_curvature: f64,
    pub start: StartMode,
    pub stop: StopRule,
    pub tolerance: f64,
    pub max_length: f64,
    pub samples: usize,
}

impl ShootingSpec {
    pub fn new(n: usize, mean_curvature: f64, start: StartMode, stop: StopRule) -> Self {
        Self {
            n,
            mean_curvature,
            start,
            stop,
            tolerance: DEFAULT_TOLERANCE,
            max_length: 1e3,
            samples: 2000,
        }
    }

    pub fn with_samples(mut self, m: usize) -> Self {
        self.samples = m;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(CapstabError::InvalidInput(format!(
                "dimension n = {} < 2",
                self.n
            )));
        }
        if !(self.tolerance > 1e-14 && self.tolerance < 1e-4) {
            return Err(CapstabError::InvalidInput(format!(
                "tolerance {} outside (1e-14, 1e-4)",
                self.tolerance
            )));
        }
        if !(self.mean_curvature >= 0.0) {
            return Err(CapstabError::InvalidInput(
                "mean curvature must be non-negative".into(),
            ));
        }
        if self.samples < crate::geometry::MIN_SAMPLES {
            return Err(CapstabError::GridTooCoarse(self.samples));
        }
        if let StartMode::Point { x0, .. } = self.start {
            if !(x0 > 0.0) {
                return Err(CapstabError::InvalidInput(format!(
                    "start radius {x0} must be positive"
                )));
            }
        }
        Ok(())
    }

    pub fn ode(&self) -> CmcOde {
        CmcOde::new(self.n, self.mean_curvature)
    }

    /// Initial state `(x, z, α)`.
    pub fn initial_state(&self) -> Result<[f64; 3]> {
        Ok(match self.start {
            StartMode::Axis { z0 } => [0.0, z0, 0.0],
            StartMode::Point { x0, z0, alpha0 } => [x0, z0, alpha0],
            StartMode::Flux { phi, z0 } => [
                self.ode().vertical_radius(phi)?,
                z0,
                std::f64::consts::FRAC_PI_2,
            ],
        })
    }
}

/// Result of [`integrate_profile`].
#[derive(Debug, Clone, PartialEq)]
pub struct Integrated {
    pub profile: ProfileCurve,
    /// Substeps per grid cell that met the tolerance.
    pub substeps: usize,
    pub flux_drift: f64,
}

fn event_value(stop: &StopRule, s: f64, y: &[f64; 3]) -> f64 {
    match *stop {
        StopRule::Length(l) => s - l,
        StopRule::ZLevel(level) => y[1] - level,
        StopRule::Alpha { target, .. } => y[2] - target,
    }
}

/// Marches until the stop event and returns its arclength.
pub fn locate_event(spec: &ShootingSpec) -> Result<f64> {
    let ode = spec.ode();
    let mut y = spec.initial_state()?;
    if let StopRule::Length(l) = spec.stop {
        if l > spec.max_length {
            return Err(CapstabError::MaxLengthExceeded(spec.max_length));
        }
        if !(l > 0.0) {
            return Err(CapstabError::InvalidInput(format!(
                "profile length {l} must be positive"
            )));
        }
        // Still march to detect axis hits.
        march(&ode, &mut y, l, spec.max_length, |_, _| false)?;
        return Ok(l);
    }
    let needed = match spec.stop {
        StopRule::Alpha { count, .. } => count.max(1),
        _ => 1,
    };
    refine_event(spec, needed)
}

/// Local march step: a fixed fraction of the radius, so that `h κ₂` stays small.
fn march_step(ode: &CmcOde, y: &[f64; 3]) -> f64 {
    let n = ode.n as f64;
    let scale = if ode.h > 0.0 {
        1.0 / (n * ode.h)
    } else {
        f64::INFINITY
    };
    (2e-3 * y[0].abs().max(1e-6)).min(2e-3 * scale).min(5e-3)
}

fn march<F: FnMut(f64, &[f64; 3]) -> bool>(
    ode: &CmcOde,
    y: &mut [f64; 3],
    until: f64,
    max_length: f64,
    mut on_step: F,
) -> Result<f64> {
    let mut s = 0.0;
    let axis_start = y[0] == 0.0;
    while s < until {
        let mut h = march_step(ode, y);
        if s + h > until {
            h = until - s;
        }
        let next = if axis_start && s < 1e-300 {
            axis_step(ode, *y, h)
        } else {
            ode.rk4(*y, h)
        };
        s += h;
        if !(next[0] > AXIS_EPS) || !next.iter().all(|v| v.is_finite()) {
            return Err(CapstabError::IntegrationBlowup { s });
        }
        *y = next;
        if on_step(s, y) {
            return Ok(s);
        }
    }
    if until >= max_length {
        return Err(CapstabError::MaxLengthExceeded(max_length));
    }
    Ok(s)
}

/// Exact step off the axis: regular axis solutions are circles of radius
/// `1/H` (a line when `H = 0`).
fn axis_step(ode: &CmcOde, y: [f64; 3], h: f64) -> [f64; 3] {
    if ode.h == 0.0 {
        return [h, y[1], 0.0];
    }
    let r = 1.0 / ode.h;
    let a = h / r;
    [r * a.sin(), y[1] + r * (1.0 - a.cos()), a]
}

/// Re-marches recording states and refines the crossing by regula falsi on
/// single RK4 steps from the last state before it.
fn refine_event(spec: &ShootingSpec, needed: usize) -> Result<f64> {
    let ode = spec.ode();
    let mut y = spec.initial_state()?;
    let mut crossings = 0usize;
    let mut prev_sign: Option<bool> = None;
    let mut bracket = None;
    let stop = spec.stop;
    let mut last = (0.0, y);
    march(&ode, &mut y, spec.max_length, spec.max_length, |s, yy| {
        let g = event_value(&stop, s, yy);
        let result = if g == 0.0 && prev_sign.is_none() {
            false
        } else {
            let sign = g > 0.0;
            let mut hit = false;
            if let Some(p) = prev_sign {
                if p != sign {
                    crossings += 1;
                    if crossings == needed {
                        bracket = Some((last, (s, *yy)));
                        hit = true;
                    }
                }
            }
            prev_sign = Some(sign);
            hit
        };
        last = (s, *yy);
        result
    })?;
    let ((s0, y0), (s1, y1)) = bracket.ok_or(CapstabError::MaxLengthExceeded(spec.max_length))?;
    let g = |tau: f64| -> f64 {
        let yt = if tau == 0.0 { y0 } else { ode.rk4(y0, tau) };
        event_value(&stop, s0 + tau, &yt)
    };
    let (mut a, mut b) = (0.0, s1 - s0);
    let (mut ga, mut gb) = (g(a), event_value(&stop, s1, &y1));
    if ga == 0.0 {
        return Ok(s0);
    }
    let mut side = 0i32;
    for _ in 0..200 {
        let c = (a * gb - b * ga) / (gb - ga);
        let gc = g(c);
        if gc == 0.0 || (b - a).abs() < 1e-15 * (1.0 + s0.abs()) {
            return Ok(s0 + c);
        }
        if (gc > 0.0) == (gb > 0.0) {
            b = c;
            gb = gc;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            ga = gc;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        }
    }
    Ok(s0 + 0.5 * (a + b))
}

/// Integrates on the uniform grid `s_i = i L / (M−1)` with `k` RK4 substeps per cell.
fn integrate_grid(
    ode: &CmcOde,
    y0: [f64; 3],
    length: f64,
    m: usize,
    k: usize,
) -> Result<ProfileCurve> {
    let ds = length / (m - 1) as f64;
    let h = ds / k as f64;
    let mut p = ProfileCurve {
        s: Vec::with_capacity(m),
        x: Vec::with_capacity(m),
        z: Vec::with_capacity(m),
        alpha: Vec::with_capacity(m),
    };
    let mut y = y0;
    let axis_start = y0[0] == 0.0;
    for i in 0..m {
        if i > 0 {
            for j in 0..k {
                y = if axis_start && i == 1 && j == 0 {
                    axis_step(ode, y, h)
                } else {
                    ode.rk4(y, h)
                };
            }
            if !(y[0] > AXIS_EPS) || !y.iter().all(|v| v.is_finite()) {
                return Err(CapstabError::IntegrationBlowup { s: i as f64 * ds });
            }
        }
        p.s.push(i as f64 * ds);
        p.x.push(y[0]);
        p.z.push(y[1]);
        p.alpha.push(y[2]);
    }
    Ok(p)
}

/// Integrates the profile described by `spec` and resamples it on a uniform grid.
pub fn integrate_profile(spec: &ShootingSpec) -> Result<Integrated> {
    spec.validate()?;
    let length = locate_event(spec)?;
    let ode = spec.ode();
    let y0 = spec.initial_state()?;
    let m = spec.samples;
    let mut k = 1usize;
    let mut coarse = integrate_grid(&ode, y0, length, m, k)?;
    let profile = loop {
        let fine = integrate_grid(&ode, y0, length, m, 2 * k)?;
        let diff = coarse
            .x
            .iter()
            .zip(&fine.x)
            .chain(coarse.z.iter().zip(&fine.z))
            .chain(coarse.alpha.iter().zip(&fine.alpha))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        k *= 2;
        if diff <= spec.tolerance || k >= 1 << 12 {
            break fine;
        }
        coarse = fine;
    };
    let flux_drift = flux_drift(&ode, &profile);
    Ok(Integrated {
        profile,
        substeps: k,
        flux_drift,
    })
}

/// `max |Φ(s) − Φ(0)|` along a profile.
pub fn flux_drift(ode: &CmcOde, p: &ProfileCurve) -> f64 {
    let f0 = ode.flux([p.x[0], p.z[0], p.alpha[0]]);
    (0..p.len())
        .map(|i| (ode.flux([p.x[i], p.z[i], p.alpha[i]]) - f0).abs())
        .fold(0.0, f64::max)
}
