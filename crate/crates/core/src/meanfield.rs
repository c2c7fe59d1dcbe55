//! Dissipative mean-field dynamics on the unit Bloch sphere.
//!
//! Components are `s = 2<S>/N`, so `|s| = 1` for the maximum-spin sector.
//! The exact-diagonalization order parameter `<S_x>/N` is half of `s_x`.

use std::cmp::Ordering;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-9;
pub const RHS_TOL: f64 = 1e-9;
pub const DEFAULT_ZERO_TOL: f64 = 1e-7;
pub const DEFAULT_DT: f64 = 2.5e-4;
/// Largest admissible `dt * max|rhs|` for a single integration step.
pub const MAX_STEP_PRODUCT: f64 = 0.1;

const ROOT_IM_TOL: f64 = 1e-9;
const ROOT_RANGE_TOL: f64 = 1e-12;
/// Roots with an imaginary part below this are still offered to real Newton
/// polishing; near coalescence the companion eigenvalues split into a
/// conjugate pair of size ~sqrt(eps).
const ROOT_POLISH_IM_TOL: f64 = 1e-6;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochVector {
    pub s_x: f64,
    pub s_y: f64,
    pub s_z: f64,
}

impl BlochVector {
    pub fn new(s_x: f64, s_y: f64, s_z: f64) -> Result<Self> {
        let v = Self { s_x, s_y, s_z };
        let drift = (v.norm() - 1.0).abs();
        if !drift.is_finite() || drift > NORM_TOL {
            return Err(Error::InvariantViolation(format!(
                "Bloch vector ({s_x}, {s_y}, {s_z}) is off the unit sphere by {drift:.3e}"
            )));
        }
        Ok(v)
    }

    /// Projects any non-zero vector onto the sphere.
    pub fn normalized(s_x: f64, s_y: f64, s_z: f64) -> Result<Self> {
        let n = Vector3::new(s_x, s_y, s_z).norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "cannot normalize ({s_x}, {s_y}, {s_z})"
            )));
        }
        Ok(Self {
            s_x: s_x / n,
            s_y: s_y / n,
            s_z: s_z / n,
        })
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.s_x, self.s_y, self.s_z)
    }

    pub fn norm(&self) -> f64 {
        self.as_vector().norm()
    }

    pub fn distance(&self, other: &BlochVector) -> f64 {
        (self.as_vector() - other.as_vector()).norm()
    }

    fn from_vector(v: Vector3<f64>) -> Self {
        Self {
            s_x: v.x,
            s_y: v.y,
            s_z: v.z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanFieldParams {
    pub h: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub delta_a: f64,
}

impl MeanFieldParams {
    pub fn new(h: f64, lambda: f64, gamma: f64, delta_a: f64) -> Result<Self> {
        let p = Self {
            h,
            lambda,
            gamma,
            delta_a,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.h, self.lambda, self.gamma, self.delta_a]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidArgument(
                "mean-field parameters must be finite".into(),
            ));
        }
        if self.lambda <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    pub fn with_h(&self, h: f64) -> Self {
        Self { h, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    SxZero,
    SzZero,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::SxZero => "sx_zero",
            Branch::SzZero => "sz_zero",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

impl fmt::Display for Stability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Marginal => "marginal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixedPoint {
    pub point: BlochVector,
    pub branch: Branch,
    /// Radial (conserved-norm) eigenvalue first, then the transverse pair
    /// ordered by real then imaginary part.
    pub jacobian_eigs: [Complex64; 3],
    pub stability: Stability,
    pub energy_density: f64,
}

impl FixedPoint {
    pub fn transverse_eigs(&self) -> [Complex64; 2] {
        [self.jacobian_eigs[1], self.jacobian_eigs[2]]
    }
}

fn field(s: &Vector3<f64>, p: &MeanFieldParams) -> Vector3<f64> {
    let (x, y, z) = (s.x, s.y, s.z);
    Vector3::new(
        -p.delta_a * y - p.gamma * z * x,
        p.delta_a * x + p.h * z - p.lambda * z * x - p.gamma * z * y,
        -p.h * y + p.lambda * y * x + p.gamma * (x * x + y * y),
    )
}

/// Right-hand side of the mean-field equations of motion.
pub fn bloch_rhs(s: &BlochVector, p: &MeanFieldParams) -> [f64; 3] {
    field(&s.as_vector(), p).into()
}

fn jacobian_at(s: &Vector3<f64>, p: &MeanFieldParams) -> Matrix3<f64> {
    let (x, y, z) = (s.x, s.y, s.z);
    let (h, l, g, d) = (p.h, p.lambda, p.gamma, p.delta_a);
    Matrix3::new(
        -g * z,
        -d,
        -g * x,
        d - l * z,
        -g * z,
        h - l * x - g * y,
        l * y + 2.0 * g * x,
        -h + l * x + 2.0 * g * y,
        0.0,
    )
}

pub fn jacobian(s: &BlochVector, p: &MeanFieldParams) -> Matrix3<f64> {
    jacobian_at(&s.as_vector(), p)
}

/// `E = -h s_x - lambda (s_y^2 + s_z^2)`, in units of hbar * kappa.
pub fn energy_density(s: &BlochVector, p: &MeanFieldParams) -> f64 {
    -p.h * s.s_x - p.lambda * (s.s_y * s.s_y + s.s_z * s.s_z)
}

fn zero_threshold(eigs: &[Complex64], zero_tol: f64) -> f64 {
    let radius = eigs.iter().map(|e| e.norm()).fold(0.0, f64::max);
    zero_tol * radius.max(1.0)
}

/// Eigenvalues of the Jacobian with the radial one (smallest modulus) first.
pub fn ordered_eigenvalues(j: &Matrix3<f64>) -> [Complex64; 3] {
    let mut eigs: Vec<Complex64> = j.complex_eigenvalues().iter().copied().collect();
    let radial = (0..3)
        .min_by(|&a, &b| eigs[a].norm().total_cmp(&eigs[b].norm()))
        .unwrap();
    let r = eigs.remove(radial);
    eigs.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    [r, eigs[0], eigs[1]]
}

/// Number of eigenvalues with modulus below the scaled zero tolerance.
pub fn count_near_zero(eigs: &[Complex64; 3], zero_tol: f64) -> usize {
    let tol = zero_threshold(eigs, zero_tol);
    eigs.iter().filter(|e| e.norm() < tol).count()
}

/// Classifies using the two transverse eigenvalues of `eigs` as ordered by
/// [`ordered_eigenvalues`].
pub fn classify_stability(eigs: &[Complex64; 3], zero_tol: f64) -> Stability {
    let tol = zero_threshold(eigs, zero_tol);
    let transverse = &eigs[1..];
    if transverse.iter().all(|e| e.re < -tol) {
        Stability::Stable
    } else if transverse.iter().any(|e| e.re > tol) {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

fn make_fixed_point(point: BlochVector, branch: Branch, p: &MeanFieldParams) -> FixedPoint {
    let eigs = ordered_eigenvalues(&jacobian(&point, p));
    FixedPoint {
        point,
        branch,
        jacobian_eigs: eigs,
        stability: classify_stability(&eigs, DEFAULT_ZERO_TOL),
        energy_density: energy_density(&point, p),
    }
}

fn verified(point: &BlochVector, p: &MeanFieldParams) -> bool {
    Vector3::from(bloch_rhs(point, p)).norm() < RHS_TOL
}

/// Fixed points with `s_x = 0`: `s_y = h/gamma`, `s_z = +/- sqrt(1 - s_y^2)`,
/// for `|h| < gamma`.
pub fn fixed_points_sx_zero(p: &MeanFieldParams) -> Result<Vec<FixedPoint>> {
    p.validate()?;
    if p.gamma == 0.0 {
        return Err(Error::InvalidArgument(
            "the s_x = 0 branch needs gamma > 0".into(),
        ));
    }
    if p.h.abs() >= p.gamma {
        return Ok(Vec::new());
    }
    let s_y = p.h / p.gamma;
    let s_z = (1.0 - s_y * s_y).sqrt();
    let mut out = Vec::new();
    for z in [s_z, -s_z] {
        let point = BlochVector {
            s_x: 0.0,
            s_y,
            s_z: z,
        };
        if verified(&point, p) {
            out.push(make_fixed_point(point, Branch::SxZero, p));
        }
    }
    Ok(out)
}

fn quartic_coefficients(p: &MeanFieldParams) -> [f64; 4] {
    // y^4 + c3 y^3 + c2 y^2 + c1 y + c0, with s_z = 0 and
    // y (lambda x - h) + gamma = 0 on the unit circle.
    let (h, l, g) = (p.h, p.lambda, p.gamma);
    [
        g * g / (l * l),
        -2.0 * h * g / (l * l),
        -(1.0 - h * h / (l * l)),
        0.0,
    ]
}

fn quartic_roots(c: &[f64; 4]) -> Vec<Complex64> {
    #[rustfmt::skip]
    let companion = Matrix4::new(
        0.0, 0.0, 0.0, -c[0],
        1.0, 0.0, 0.0, -c[1],
        0.0, 1.0, 0.0, -c[2],
        0.0, 0.0, 1.0, -c[3],
    );
    companion.complex_eigenvalues().iter().copied().collect()
}

fn polish(c: &[f64; 4], mut y: f64) -> f64 {
    for _ in 0..50 {
        let f = (((y + c[3]) * y + c[2]) * y + c[1]) * y + c[0];
        let df = ((4.0 * y + 3.0 * c[3]) * y + 2.0 * c[2]) * y + c[1];
        if df == 0.0 {
            break;
        }
        let step = f / df;
        y -= step;
        if step.abs() <= 1e-16 * y.abs().max(1.0) {
            break;
        }
    }
    y
}

/// Fixed points with `s_z = 0` from the real roots of the `s_y` quartic.
pub fn fixed_points_sz_zero(p: &MeanFieldParams) -> Result<Vec<FixedPoint>> {
    p.validate()?;
    let c = quartic_coefficients(p);
    let mut points: Vec<BlochVector> = Vec::new();
    for root in quartic_roots(&c) {
        if root.im.abs() >= ROOT_POLISH_IM_TOL {
            continue;
        }
        let y0 = if root.im.abs() < ROOT_IM_TOL {
            root.re
        } else {
            polish(&c, root.re)
        };
        if y0.abs() > 1.0 + ROOT_RANGE_TOL && root.im.abs() < ROOT_IM_TOL {
            continue;
        }
        let y = polish(&c, y0.clamp(-1.0, 1.0)).clamp(-1.0, 1.0);
        let x_abs = (1.0 - y * y).max(0.0).sqrt();
        for x in [x_abs, -x_abs] {
            let point = BlochVector {
                s_x: x,
                s_y: y,
                s_z: 0.0,
            };
            if verified(&point, p) && !points.iter().any(|q| q.distance(&point) < DEDUP_TOL) {
                points.push(point);
            }
        }
    }
    Ok(points
        .into_iter()
        .map(|pt| make_fixed_point(pt, Branch::SzZero, p))
        .collect())
}

fn point_order(a: &FixedPoint, b: &FixedPoint) -> Ordering {
    a.branch
        .cmp(&b.branch)
        .then(a.point.s_x.total_cmp(&b.point.s_x))
        .then(a.point.s_y.total_cmp(&b.point.s_y))
        .then(a.point.s_z.total_cmp(&b.point.s_z))
}

/// All fixed points of both branches, ordered by branch then `s_x`.
pub fn all_fixed_points(p: &MeanFieldParams) -> Result<Vec<FixedPoint>> {
    let mut out = if p.gamma > 0.0 {
        fixed_points_sx_zero(p)?
    } else {
        Vec::new()
    };
    out.extend(fixed_points_sz_zero(p)?);
    out.sort_by(point_order);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub h: f64,
    pub fixed_points: Vec<FixedPoint>,
}

/// Fixed points over an h grid. `base.h` is ignored.
pub fn bifurcation_sweep(h_grid: &[f64], base: &MeanFieldParams) -> Result<Vec<SweepPoint>> {
    base.validate()?;
    if h_grid.is_empty() {
        return Err(Error::InvalidArgument("empty h grid".into()));
    }
    let increasing = h_grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = h_grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument(
            "h grid must be strictly monotone".into(),
        ));
    }
    h_grid
        .par_iter()
        .map(|&h| {
            all_fixed_points(&base.with_h(h)).map(|fixed_points| SweepPoint { h, fixed_points })
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryOptions {
    pub dt: f64,
    /// Record every `sample_every`-th step (the final state is always kept).
    pub sample_every: usize,
    pub renormalize: bool,
}

impl Default for TrajectoryOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            sample_every: 400,
            renormalize: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BlochVector>,
    pub max_norm_drift: f64,
    pub renormalized: bool,
}

impl Trajectory {
    pub fn last(&self) -> &BlochVector {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }
}

/// Fixed-step classical Runge-Kutta integration.
pub fn integrate_trajectory(
    s0: &BlochVector,
    p: &MeanFieldParams,
    t_final: f64,
    opts: &TrajectoryOptions,
) -> Result<Trajectory> {
    p.validate()?;
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "dt must be positive, got {}",
            opts.dt
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_final must be >= 0, got {t_final}"
        )));
    }
    let sample_every = opts.sample_every.max(1);
    let steps = (t_final / opts.dt).round() as usize;
    let dt = if steps > 0 {
        t_final / steps as f64
    } else {
        opts.dt
    };

    let mut s = s0.as_vector();
    let mut times = vec![0.0];
    let mut states = vec![*s0];
    let mut max_drift = (s.norm() - 1.0).abs();
    for step in 1..=steps {
        let k1 = field(&s, p);
        let product = dt * k1.amax();
        if product > MAX_STEP_PRODUCT {
            return Err(Error::StepTooLarge { dt, product });
        }
        let k2 = field(&(s + k1 * (dt / 2.0)), p);
        let k3 = field(&(s + k2 * (dt / 2.0)), p);
        let k4 = field(&(s + k3 * dt), p);
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        max_drift = max_drift.max((s.norm() - 1.0).abs());
        if opts.renormalize {
            s /= s.norm();
        }
        if !s.iter().all(|v| v.is_finite()) {
            return Err(Error::NonConvergence(format!(
                "trajectory diverged at step {step}"
            )));
        }
        if step % sample_every == 0 || step == steps {
            times.push(step as f64 * dt);
            states.push(BlochVector::from_vector(s));
        }
    }
    Ok(Trajectory {
        times,
        states,
        max_norm_drift: max_drift,
        renormalized: opts.renormalize,
    })
}
