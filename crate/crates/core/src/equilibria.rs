//! Constant-curvature interfaces meeting two walls at right angles.
//!
//! Curves are written in the chart `X(s, w) = (x_L(w)(1 - s/l) + x_R(w) s/l, w)`
//! with `w = m + u(s)`, where `x_L`, `x_R` are the wall positions at height
//! `w` and `u` has zero grid mean. Walls are lines or circles; the fluid
//! domain lies outside every circular wall.

use crate::error::{Error, Result};
use crate::forms::min_form_meanfree;
use crate::model::quadrature::gauss_legendre;
use crate::model::{Grid1D, HeightField, ModelParams};
use crate::output::{csv_error, csv_writer, float};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc as Shared;

type Point = [f64; 2];

fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Wall {
    Line { point: Point, direction: Point },
    Circle { center: Point, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
}

impl Wall {
    /// Line through `point`; `direction` is normalized and must not be
    /// horizontal.
    pub fn line(point: Point, direction: Point) -> Result<Self> {
        let n = dot(direction, direction).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("line direction must be nonzero".into()));
        }
        let mut d = [direction[0] / n, direction[1] / n];
        if d[1] < 0.0 {
            d = [-d[0], -d[1]];
        }
        if d[1] < 1e-12 {
            return Err(Error::UnsupportedWalls("horizontal wall".into()));
        }
        Ok(Wall::Line { point, direction: d })
    }

    pub fn circle(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::NonPositiveLength {
                what: "radius",
                value: radius,
            });
        }
        Ok(Wall::Circle { center, radius })
    }

    /// Wall curvature parameter at a contact point: zero for lines and
    /// `-1/r` for a circle bulging into the domain.
    pub fn omega(&self) -> f64 {
        match self {
            Wall::Line { .. } => 0.0,
            Wall::Circle { radius, .. } => -1.0 / radius,
        }
    }

    fn height_range(&self) -> (f64, f64) {
        match self {
            Wall::Line { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Wall::Circle { center, radius } => (center[1] - radius, center[1] + radius),
        }
    }

    /// `x(w)` and its first two derivatives on the branch facing the domain.
    fn chart(&self, w: f64, side: Side) -> Option<(f64, f64, f64)> {
        match *self {
            Wall::Line { point, direction } => {
                let slope = direction[0] / direction[1];
                Some((point[0] + (w - point[1]) * slope, slope, 0.0))
            }
            Wall::Circle { center, radius } => {
                let z = w - center[1];
                let s = radius * radius - z * z;
                if !(s > 0.0) {
                    return None;
                }
                let root = s.sqrt();
                let sign = if side == Side::Left { 1.0 } else { -1.0 };
                Some((
                    center[0] + sign * root,
                    -sign * z / root,
                    -sign * radius * radius / (root * s),
                ))
            }
        }
    }

    /// Unit tangent at `p` with nonnegative vertical component.
    fn tangent_up(&self, p: Point) -> Point {
        let t = match *self {
            Wall::Line { direction, .. } => direction,
            Wall::Circle { center, radius } => {
                let r = sub(p, center);
                [-r[1] / radius, r[0] / radius]
            }
        };
        if t[1] < 0.0 {
            [-t[0], -t[1]]
        } else {
            t
        }
    }
}

/// Left and right walls of the chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Walls {
    pub left: Wall,
    pub right: Wall,
}

/// Chart point, its `s`-derivative factors and the Jacobian pieces.
struct ChartEval {
    x: f64,
    /// `dX/dsigma`
    xs: f64,
    /// `dX/dw`
    xw: f64,
    /// `d2X/dsigma dw`
    xsw: f64,
    /// `d2X/dw2`
    xww: f64,
}

impl Walls {
    pub fn new(left: Wall, right: Wall) -> Self {
        Self { left, right }
    }

    /// Heights where both walls have a chart branch.
    fn height_range(&self) -> (f64, f64) {
        let (a, b) = self.left.height_range();
        let (c, d) = self.right.height_range();
        (a.max(c), b.min(d))
    }

    fn chart(&self, sigma: f64, w: f64) -> Option<ChartEval> {
        let (xl, dl, ddl) = self.left.chart(w, Side::Left)?;
        let (xr, dr, ddr) = self.right.chart(w, Side::Right)?;
        Some(ChartEval {
            x: xl * (1.0 - sigma) + xr * sigma,
            xs: xr - xl,
            xw: dl * (1.0 - sigma) + dr * sigma,
            xsw: dr - dl,
            xww: ddl * (1.0 - sigma) + ddr * sigma,
        })
    }

    fn wall(&self, side: Side) -> &Wall {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

/// Circles orthogonal to both walls have centers `p0 + t e` and radius
/// `R^2 = P + t^2`; `t -> infinity` is the straight member through `p0`
/// normal to `e`. Two parallel lines give a translation family instead.
#[derive(Debug, Clone, Copy)]
enum Family {
    Pencil { p0: Point, e: Point, power: f64 },
    Parallel { p0: Point, e: Point },
}

fn upward(v: Point) -> Point {
    if v[1] < 0.0 {
        [-v[0], -v[1]]
    } else {
        v
    }
}

fn family(walls: &Walls) -> Result<Family> {
    use Wall::*;
    let unit = |v: Point| {
        let n = dot(v, v).sqrt();
        [v[0] / n, v[1] / n]
    };
    match (walls.left, walls.right) {
        (Circle { center: a1, radius: r1 }, Circle { center: a2, radius: r2 }) => {
            let u = sub(a2, a1);
            let d = dot(u, u).sqrt();
            if !(d > r1 + r2) {
                return Err(Error::UnsupportedWalls("circular walls must be disjoint".into()));
            }
            let e = upward(unit([-u[1], u[0]]));
            if e[1] < 1e-12 {
                return Err(Error::UnsupportedWalls("wall centers vertically aligned".into()));
            }
            let lambda = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            let p0 = [a1[0] + lambda * u[0] / d, a1[1] + lambda * u[1] / d];
            Ok(Family::Pencil {
                p0,
                e,
                power: lambda * lambda - r1 * r1,
            })
        }
        (Line { point, direction }, Circle { center, radius })
        | (Circle { center, radius }, Line { point, direction }) => {
            let p0 = {
                let t = dot(sub(center, point), direction);
                [point[0] + t * direction[0], point[1] + t * direction[1]]
            };
            let q = sub(p0, center);
            Ok(Family::Pencil {
                p0,
                e: direction,
                power: dot(q, q) - radius * radius,
            })
        }
        (Line { point, direction: d1 }, Line { direction: d2, .. }) => {
            if (d1[0] * d2[1] - d1[1] * d2[0]).abs() > 1e-12 {
                return Err(Error::UnsupportedWalls("intersecting line walls".into()));
            }
            Ok(Family::Parallel { p0: point, e: d1 })
        }
    }
}

/// One member of the orthogonal family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    /// Signed curvature, positive when the curve bends upward.
    pub curvature: f64,
    /// `None` for straight members.
    pub center: Option<Point>,
    pub radius: f64,
    pub left: Point,
    pub right: Point,
    /// Mean chart height.
    pub m: f64,
    walls: Walls,
    param: f64,
}

impl Arc {
    /// Chart heights `w(sigma)` at the given fractions of the interval.
    pub fn heights(&self, sigmas: &[f64]) -> Result<Vec<f64>> {
        let fam = family(&self.walls)?;
        sigmas
            .iter()
            .map(|&s| chart_height(&self.walls, fam, self.param, s))
            .collect()
    }

    /// `u = w - m` on the nodes of `grid`.
    pub fn chart_field(&self, grid: &Shared<Grid1D>) -> Result<HeightField> {
        let l = grid.l();
        let sig: Vec<f64> = grid.nodes().iter().map(|s| s / l).collect();
        let w = self.heights(&sig)?;
        HeightField::new(
            grid.clone(),
            DVector::from_iterator(w.len(), w.iter().map(|w| w - self.m)),
        )
    }

    /// `|d^2 - r^2 - R^2|` against each circular wall, where `d` is the
    /// distance between centers.
    pub fn orthogonality_defects(&self) -> Vec<f64> {
        let Some(c) = self.center else { return Vec::new() };
        [self.walls.left, self.walls.right]
            .iter()
            .filter_map(|w| match *w {
                Wall::Circle { center, radius } => {
                    let d = sub(c, center);
                    Some((dot(d, d) - radius * radius - self.radius * self.radius).abs())
                }
                Wall::Line { .. } => None,
            })
            .collect()
    }

    pub fn length(&self) -> f64 {
        match self.center {
            Some(c) => {
                let a = sub(self.left, c);
                let b = sub(self.right, c);
                let angle = (a[0] * b[1] - a[1] * b[0]).atan2(dot(a, b)).abs();
                self.radius * angle
            }
            None => {
                let d = sub(self.right, self.left);
                dot(d, d).sqrt()
            }
        }
    }
}

/// Function whose zero set in the plane is the family member with parameter
/// `param`: signed curvature for a pencil, offset for parallel lines.
fn level(fam: Family, param: f64, p: Point) -> Result<f64> {
    match fam {
        Family::Pencil { p0, e, power } => {
            let q = sub(p, p0);
            let disc = 1.0 - power * param * param;
            if !(disc > 0.0) {
                return Err(Error::NoAdmissibleArc {
                    m: f64::NAN,
                    reason: format!("curvature {param} exceeds the family's range"),
                });
            }
            let beta = param / (2.0 * disc.sqrt());
            Ok(dot(q, e) - beta * (dot(q, q) - power))
        }
        Family::Parallel { p0, e } => Ok(dot(sub(p, p0), e) - param),
    }
}

fn reference_height(fam: Family) -> f64 {
    match fam {
        Family::Pencil { p0, .. } | Family::Parallel { p0, .. } => p0[1],
    }
}

/// Height where the chart line `sigma = const` meets the member, taking
/// the crossing nearest the reference height.
fn chart_height(walls: &Walls, fam: Family, param: f64, sigma: f64) -> Result<f64> {
    let no_arc = |reason: String| Error::NoAdmissibleArc { m: f64::NAN, reason };
    let (lo, hi) = walls.height_range();
    let w_ref = reference_height(fam);
    let width = walls
        .chart(0.0, w_ref.clamp(lo, hi))
        .map(|c| c.xs.abs())
        .filter(|w| *w > 0.0)
        .unwrap_or(1.0);
    let span = if hi.is_finite() && lo.is_finite() {
        hi - lo
    } else {
        1e3 * width
    };
    let (lo, hi) = if lo.is_finite() {
        (lo, hi)
    } else {
        (w_ref - span, w_ref + span)
    };
    let start = w_ref.clamp(lo + 1e-9 * span, hi - 1e-9 * span);
    let f = |w: f64| -> Result<Option<f64>> {
        match walls.chart(sigma, w) {
            Some(c) => level(fam, param, [c.x, w]).map(Some),
            None => Ok(None),
        }
    };
    let f0 = f(start)?.ok_or_else(|| no_arc("chart undefined at the reference height".into()))?;
    if f0 == 0.0 {
        return Ok(start);
    }
    let steps = 4096;
    let h = span / steps as f64;
    let mut bracket = None;
    'search: for i in 1..=steps {
        for dir in [-1.0, 1.0] {
            let a = start + dir * (i - 1) as f64 * h;
            let b = start + dir * i as f64 * h;
            if b <= lo || b >= hi {
                continue;
            }
            let (Some(fa), Some(fb)) = (f(a)?, f(b)?) else { continue };
            if fa == 0.0 {
                return Ok(a);
            }
            if fa.signum() != fb.signum() {
                bracket = Some(if a < b { (a, b, fa) } else { (b, a, fb) });
                break 'search;
            }
        }
    }
    let (mut a, mut b, mut fa) =
        bracket.ok_or_else(|| no_arc(format!("member does not cross the chart at sigma = {sigma}")))?;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid)?.ok_or_else(|| no_arc("chart lost inside bracket".into()))?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

const MEAN_NODES: usize = 48;

fn mean_height(walls: &Walls, fam: Family, param: f64) -> Result<f64> {
    let (x, w) = gauss_legendre(MEAN_NODES, 1.0);
    let mut m = 0.0;
    for (s, wt) in x.iter().zip(&w) {
        m += wt * chart_height(walls, fam, param, *s)?;
    }
    Ok(m)
}

fn build_arc(walls: &Walls, fam: Family, param: f64, m: f64) -> Result<Arc> {
    let endpoint = |sigma: f64| -> Result<Point> {
        let w = chart_height(walls, fam, param, sigma)?;
        let c = walls.chart(sigma, w).ok_or_else(|| Error::NoAdmissibleArc {
            m,
            reason: "endpoint outside the chart".into(),
        })?;
        Ok([c.x, w])
    };
    let (curvature, center, radius) = match fam {
        Family::Pencil { p0, e, power } if param != 0.0 => {
            let radius = 1.0 / param.abs();
            let t = param.signum() * (radius * radius - power).sqrt();
            (param, Some([p0[0] + t * e[0], p0[1] + t * e[1]]), radius)
        }
        _ => (0.0, None, f64::INFINITY),
    };
    Ok(Arc {
        curvature,
        center,
        radius,
        left: endpoint(0.0)?,
        right: endpoint(1.0)?,
        m,
        walls: *walls,
        param,
    })
}

/// The member of the orthogonal family whose mean chart height is `m`.
pub fn orthogonal_arc(left: Wall, right: Wall, m: f64) -> Result<Arc> {
    let walls = Walls::new(left, right);
    let fam = family(&walls)?;
    let with_m = |e: Error| match e {
        Error::NoAdmissibleArc { reason, .. } => Error::NoAdmissibleArc { m, reason },
        e => e,
    };
    let g = |p: f64| mean_height(&walls, fam, p).map(|v| v - m);
    let g0 = g(0.0).map_err(with_m)?;
    if g0 == 0.0 {
        return build_arc(&walls, fam, 0.0, m).map_err(with_m);
    }
    let scale = walls
        .chart(
            0.5,
            reference_height(fam).clamp(walls.height_range().0, walls.height_range().1),
        )
        .map(|c| c.xs.abs())
        .unwrap_or(1.0);
    // expand away from the straight member until the sign changes
    let probe = 1e-3 / scale;
    let gp = g(probe).map_err(with_m)?;
    let dir = if (gp - g0).signum() == -g0.signum() { 1.0 } else { -1.0 };
    let (mut a, mut fa) = (0.0, g0);
    let mut step = probe;
    let (mut b, mut fb);
    loop {
        b = a + dir * step;
        fb = match g(b) {
            Ok(v) => v,
            Err(Error::NoAdmissibleArc { reason, .. }) => {
                return Err(Error::NoAdmissibleArc {
                    m,
                    reason: format!("outside the window: {reason}"),
                })
            }
            Err(e) => return Err(e),
        };
        if fb.signum() != fa.signum() {
            break;
        }
        if step > 1e6 / scale {
            return Err(Error::NoAdmissibleArc {
                m,
                reason: "no member reaches this height".into(),
            });
        }
        a = b;
        fa = fb;
        step *= 2.0;
    }
    // Illinois variant of regula falsi
    let tol = 1e-15 * scale.max(m.abs());
    let mut side = 0;
    for _ in 0..200 {
        let c = (a * fb - b * fa) / (fb - fa);
        let fc = g(c).map_err(with_m)?;
        if fc.abs() <= tol || (b - a).abs() <= 1e-16 * a.abs().max(b.abs()) {
            return build_arc(&walls, fam, c, m).map_err(with_m);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    let c = (a * fb - b * fa) / (fb - fa);
    build_arc(&walls, fam, c, m).map_err(with_m)
}

/// Discrete equilibrium residual.
#[derive(Debug, Clone)]
pub struct Residual {
    /// Curvature minus its arclength mean.
    pub r1: HeightField,
    /// Angle deviation from a right angle at the right wall.
    pub a_plus: f64,
    /// Angle deviation from a right angle at the left wall.
    pub a_minus: f64,
    /// Arclength mean of the curvature.
    pub mean_curvature: f64,
}

impl Residual {
    pub fn max_abs(&self) -> f64 {
        self.r1.values.amax().max(self.a_plus.abs()).max(self.a_minus.abs())
    }
}

struct Geometry {
    curvature: DVector<f64>,
    speed: DVector<f64>,
    a_plus: f64,
    a_minus: f64,
}

fn geometry(m: f64, u: &DVector<f64>, walls: &Walls, grid: &Grid1D) -> Result<Geometry> {
    let n = grid.n();
    let l = grid.l();
    let d = grid.diff();
    let du = d * u;
    let ddu = d * &du;
    let mut curvature = DVector::zeros(n);
    let mut speed = DVector::zeros(n);
    let mut tangent = [[0.0; 2]; 2];
    let mut point = [[0.0; 2]; 2];
    for i in 0..n {
        let sigma = grid.nodes()[i] / l;
        let w = m + u[i];
        let c = walls
            .chart(sigma, w)
            .ok_or_else(|| Error::NotAGraph(format!("height {w} at s = {} is off the walls", grid.nodes()[i])))?;
        let (w1, w2) = (du[i], ddu[i]);
        let x1 = c.xs / l + c.xw * w1;
        let x2 = 2.0 * c.xsw / l * w1 + c.xww * w1 * w1 + c.xw * w2;
        if !(x1 > 0.0) || !w1.is_finite() || w1.abs() > 1e8 * x1 {
            return Err(Error::NotAGraph(format!("chart breaks at s = {}", grid.nodes()[i])));
        }
        let v = (x1 * x1 + w1 * w1).sqrt();
        curvature[i] = (x1 * w2 - w1 * x2) / (v * v * v);
        speed[i] = v;
        if i == 0 || i == n - 1 {
            let k = usize::from(i != 0);
            tangent[k] = [x1 / v, w1 / v];
            point[k] = [c.x, w];
        }
    }
    let angle = |side: Side, k: usize| {
        let tw = walls.wall(side).tangent_up(point[k]);
        dot(tangent[k], tw).clamp(-1.0, 1.0).asin()
    };
    Ok(Geometry {
        curvature,
        speed,
        a_minus: angle(Side::Left, 0),
        a_plus: angle(Side::Right, 1),
    })
}

/// Curvature deviation and contact-angle deviations of the curve `m + u`.
pub fn equilibrium_residual(m: f64, u: &HeightField, walls: &Walls, grid: &Shared<Grid1D>) -> Result<Residual> {
    if u.grid.n() != grid.n() {
        return Err(Error::InvalidGrid("field and grid sizes differ".into()));
    }
    let g = geometry(m, &u.values, walls, grid)?;
    let ks = g.curvature.component_mul(&g.speed);
    let mean = grid.integrate(ks.as_slice()) / grid.integrate(g.speed.as_slice());
    Ok(Residual {
        r1: HeightField::new(grid.clone(), g.curvature.add_scalar(-mean))?,
        a_plus: g.a_plus,
        a_minus: g.a_minus,
        mean_curvature: mean,
    })
}

/// Newton system: interior curvatures equal `K`, both angles right, zero
/// grid mean. Unknowns are the nodal `u` followed by `K`.
fn newton_system(m: f64, z: &DVector<f64>, walls: &Walls, grid: &Grid1D) -> Result<DVector<f64>> {
    let n = grid.n();
    let u = z.rows(0, n).into_owned();
    let k = z[n];
    let g = geometry(m, &u, walls, grid)?;
    let mut f = DVector::zeros(n + 1);
    for i in 1..n - 1 {
        f[i - 1] = g.curvature[i] - k;
    }
    f[n - 2] = g.a_minus;
    f[n - 1] = g.a_plus;
    f[n] = grid.mean(u.as_slice());
    Ok(f)
}

fn fd_jacobian(
    f: impl Fn(&DVector<f64>) -> Result<DVector<f64>>,
    z: &DVector<f64>,
    rows: usize,
) -> Result<DMatrix<f64>> {
    let mut j = DMatrix::zeros(rows, z.len());
    for c in 0..z.len() {
        let h = 1e-6 * z[c].abs().max(1.0);
        let mut zp = z.clone();
        let mut zm = z.clone();
        zp[c] += h;
        zm[c] -= h;
        let col = (f(&zp)? - f(&zm)?) / (2.0 * h);
        j.set_column(c, &col);
    }
    Ok(j)
}

/// One point of the traced manifold.
#[derive(Debug, Clone)]
pub struct ManifoldPoint {
    pub m: f64,
    pub u: HeightField,
    pub curvature: f64,
    /// Largest entry of [`equilibrium_residual`] at the solution.
    pub residual: f64,
    pub iterations: usize,
}

/// Traced manifold; rows stop at the first Newton failure.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub points: Vec<ManifoldPoint>,
    /// Why continuation stopped early, if it did.
    pub stopped: Option<String>,
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITER: usize = 50;

/// Newton solve of the equilibrium system at height `m` from `(u, K)`.
pub fn solve_equilibrium(
    m: f64,
    u0: &HeightField,
    k0: f64,
    walls: &Walls,
    grid: &Shared<Grid1D>,
) -> Result<ManifoldPoint> {
    let n = grid.n();
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&u0.values);
    z[n] = k0;
    let f = |z: &DVector<f64>| newton_system(m, z, walls, grid);
    let mut fz = f(&z)?;
    let mut iterations = 0;
    while fz.amax() > NEWTON_TOL {
        if iterations == NEWTON_MAX_ITER {
            return Err(Error::NewtonDivergence {
                m,
                iterations,
                residual: fz.amax(),
            });
        }
        iterations += 1;
        let j = fd_jacobian(f, &z, n + 1)?;
        let step = j.lu().solve(&(-&fz)).ok_or(Error::NewtonDivergence {
            m,
            iterations,
            residual: fz.amax(),
        })?;
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=10 {
            let trial = &z + &step * alpha;
            if let Ok(ft) = f(&trial) {
                if ft.amax() < fz.amax() {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((zn, fn_)) = accepted else {
            return Err(Error::NewtonDivergence {
                m,
                iterations,
                residual: fz.amax(),
            });
        };
        z = zn;
        fz = fn_;
    }
    let u = HeightField::new(grid.clone(), z.rows(0, n).into_owned())?;
    let residual = equilibrium_residual(m, &u, walls, grid)?.max_abs();
    Ok(ManifoldPoint {
        m,
        u,
        curvature: z[n],
        residual,
        iterations,
    })
}

/// Linearized parameters at the family member of height `m`: arc length,
/// wall curvatures and arc curvature, over a bulk of half-depth `depth`.
pub fn params_from_walls(walls: &Walls, m: f64, depth: f64) -> Result<ModelParams> {
    let arc = orthogonal_arc(walls.left, walls.right, m)?;
    ModelParams::new(
        arc.length(),
        depth,
        walls.left.omega(),
        walls.right.omega(),
        arc.curvature,
    )
}

/// Continuation in `m`: each solve starts from the previous solution.
pub fn newton_trace_manifold(walls: &Walls, m_values: &[f64], grid: &Shared<Grid1D>) -> Result<Manifold> {
    let Some(&m0) = m_values.first() else {
        return Ok(Manifold {
            points: Vec::new(),
            stopped: None,
        });
    };
    let p = params_from_walls(walls, m0, 1.0)?;
    let check = Shared::new(Grid1D::chebyshev(33, p.l)?);
    let (mu, _) = min_form_meanfree(&p, &check)?;
    if !(mu > 0.0) {
        return Err(Error::IStarNotPositive { mu_min: mu });
    }
    let mut points: Vec<ManifoldPoint> = Vec::with_capacity(m_values.len());
    let mut stopped = None;
    for &m in m_values {
        let (u0, k0) = match points.last() {
            Some(p) => (p.u.clone(), p.curvature),
            None => (HeightField::zeros(grid.clone()), 0.0),
        };
        match solve_equilibrium(m, &u0, k0, walls, grid) {
            Ok(p) => points.push(p),
            Err(e) if !points.is_empty() => {
                stopped = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Manifold { points, stopped })
}

/// Jacobian of the Newton system in `(u, K)` at a point, by central
/// differences.
pub fn residual_jacobian(point: &ManifoldPoint, walls: &Walls, grid: &Shared<Grid1D>) -> Result<DMatrix<f64>> {
    let n = grid.n();
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(&point.u.values);
    z[n] = point.curvature;
    fd_jacobian(|z| newton_system(point.m, z, walls, grid), &z, n + 1)
}

/// Ratio of extreme singular values of [`residual_jacobian`].
pub fn condition_number(j: &DMatrix<f64>) -> f64 {
    let sv = j.singular_values();
    sv.max() / sv.min()
}

/// Dimension of the solution set near `point`: the nullity of the Jacobian
/// of `(m, u, K) -> (F(m, u, K), mean(u + m) - m)`. The last row pins the
/// mean of `u` only, so `m` is a free direction when `F_u` is invertible.
pub fn tangent_dimension(point: &ManifoldPoint, walls: &Walls, grid: &Shared<Grid1D>) -> Result<usize> {
    let n = grid.n();
    let mut z = DVector::zeros(n + 2);
    z[0] = point.m;
    z.rows_mut(1, n).copy_from(&point.u.values);
    z[n + 1] = point.curvature;
    let f = |z: &DVector<f64>| {
        // in absolute heights: w = z[1..=n], m is the mean of w
        let w = z.rows(1, n);
        let mean_w = grid.mean(w.as_slice());
        let mut inner = DVector::zeros(n + 1);
        inner.rows_mut(0, n).copy_from(&w.add_scalar(-mean_w));
        inner[n] = z[n + 1];
        let mut out = newton_system(mean_w, &inner, walls, grid)?;
        out[n] = mean_w - z[0];
        Ok(out)
    };
    let mut zw = z.clone();
    for i in 0..n {
        zw[1 + i] += point.m;
    }
    let j = fd_jacobian(f, &zw, n + 1)?;
    let sv = j.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-7 * smax).count();
    Ok(n + 2 - rank)
}

/// CSV with header `m,u_node_0,...,u_node_{n-1},residual`.
pub fn write_manifold_csv<W: Write>(manifold: &Manifold, n: usize, out: W) -> Result<()> {
    let mut header = vec!["m".to_string()];
    header.extend((0..n).map(|i| format!("u_node_{i}")));
    header.push("residual".into());
    let mut w = csv_writer(out, &header)?;
    for p in &manifold.points {
        if p.u.len() != n {
            return Err(Error::InvalidGrid(format!("row has {} nodes, header {n}", p.u.len())));
        }
        let mut row = vec![float(p.m)];
        row.extend(p.u.values.iter().map(|&v| float(v)));
        row.push(float(p.residual));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn circles() -> Walls {
        Walls::new(
            Wall::circle([-2.0, 0.0], 1.0).unwrap(),
            Wall::circle([2.0, 0.0], 1.0).unwrap(),
        )
    }

    fn vertical(a: f64, b: f64) -> Walls {
        Walls::new(
            Wall::line([a, 0.0], [0.0, 1.0]).unwrap(),
            Wall::line([b, 0.0], [0.0, 1.0]).unwrap(),
        )
    }

    fn grid(n: usize, l: f64) -> Shared<Grid1D> {
        Shared::new(Grid1D::chebyshev(n, l).unwrap())
    }

    #[test]
    fn parallel_lines_give_horizontal_segments() {
        let w = vertical(-1.0, 1.5);
        let arc = orthogonal_arc(w.left, w.right, 0.37).unwrap();
        assert_eq!(arc.curvature, 0.0);
        assert!((arc.left[1] - 0.37).abs() < 1e-13 && (arc.right[1] - 0.37).abs() < 1e-13);
        assert_eq!(arc.left[0], -1.0);
    }

    #[test]
    fn circle_family_is_orthogonal_and_hits_the_height() {
        let w = circles();
        for m in [-0.3, -0.05, 0.0, 0.1, 0.25] {
            let arc = orthogonal_arc(w.left, w.right, m).unwrap();
            for d in arc.orthogonality_defects() {
                assert!(d <= 1e-12 * 4.0, "defect {d}");
            }
            let (x, wt) = gauss_legendre(64, 1.0);
            let h = arc.heights(&x).unwrap();
            let mean: f64 = h.iter().zip(&wt).map(|(a, b)| a * b).sum();
            assert!((mean - m).abs() < 1e-12);
            // endpoints on the walls
            for (p, c) in [(arc.left, [-2.0, 0.0]), (arc.right, [2.0, 0.0])] {
                let r = sub(p, c);
                assert!((dot(r, r).sqrt() - 1.0).abs() < 1e-12);
            }
            // curvature sign: bends upward when below the center line
            assert_eq!(arc.curvature > 0.0, m < 0.0);
        }
        let a = orthogonal_arc(w.left, w.right, 0.1).unwrap();
        let b = orthogonal_arc(w.left, w.right, 0.1 + 1e-6).unwrap();
        assert!(((b.m - a.m) - 1e-6).abs() < 1e-8);
        assert!(matches!(
            orthogonal_arc(w.left, w.right, 5.0),
            Err(Error::NoAdmissibleArc { .. })
        ));
    }

    #[test]
    fn brute_force_orthogonal_circle() {
        // orthogonality to both walls fixes the center on x = 0 with
        // R^2 = 3 + c^2; the arc through (0, y0) then has c - R = y0
        let w = circles();
        let arc = orthogonal_arc(w.left, w.right, -0.2).unwrap();
        let c = arc.center.unwrap();
        assert!(c[0].abs() < 1e-12);
        assert!((arc.radius * arc.radius - 3.0 - c[1] * c[1]).abs() < 1e-11);
    }

    #[test]
    fn straight_walls_flat_curve_has_zero_residual() {
        let w = vertical(0.0, 1.0);
        let g = grid(17, 1.0);
        let u = HeightField::zeros(g.clone());
        let r = equilibrium_residual(0.3, &u, &w, &g).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn sine_bump_linearization() {
        let l = 1.0;
        let w = vertical(0.0, l);
        let g = grid(33, l);
        let eps = 1e-2;
        let q = PI / l;
        let u = HeightField::from_fn(g.clone(), |s| eps * (q * s).sin());
        let r = equilibrium_residual(0.0, &u, &w, &g).unwrap();
        // exact angles are atan(u') at the ends; linear values to O((eps q)^2)
        assert!((r.a_plus + (eps * q).atan()).abs() < 1e-12);
        assert!((r.a_minus - (eps * q).atan()).abs() < 1e-12);
        assert!((r.a_plus + eps * q).abs() < 1e-3 * eps * q);
        for (s, v) in g.nodes().iter().zip(r.r1.values.iter()) {
            let lin = -eps * q * q * ((q * s).sin() - 2.0 / PI);
            assert!((v - lin).abs() < 1e-3 * eps * q * q);
        }
    }

    #[test]
    fn analytic_arcs_zero_the_residual() {
        let w = circles();
        let g = grid(33, 2.0);
        for m in [-0.2, 0.15] {
            let arc = orthogonal_arc(w.left, w.right, m).unwrap();
            let u = arc.chart_field(&g).unwrap();
            let r = equilibrium_residual(m, &u, &w, &g).unwrap();
            assert!(r.max_abs() < 1e-8, "{}", r.max_abs());
            assert!((r.mean_curvature - arc.curvature).abs() < 1e-8);
        }
    }

    #[test]
    fn traced_manifold_matches_family() {
        let w = circles();
        let g = grid(33, 2.0);
        let ms: Vec<f64> = (0..7).map(|i| -0.15 + 0.05 * i as f64).collect();
        let man = newton_trace_manifold(&w, &ms, &g).unwrap();
        assert!(man.stopped.is_none());
        for p in &man.points {
            let exact = orthogonal_arc(w.left, w.right, p.m).unwrap().chart_field(&g).unwrap();
            assert!((&p.u.values - &exact.values).amax() < 1e-8);
            assert!(p.residual < 1e-8);
        }
        assert_eq!(tangent_dimension(&man.points[3], &w, &g).unwrap(), 1);
        let j = residual_jacobian(&man.points[3], &w, &g).unwrap();
        assert!(condition_number(&j).is_finite());
    }

    #[test]
    fn straight_manifold_is_zero() {
        let w = vertical(0.0, 1.0);
        let g = grid(17, 1.0);
        let man = newton_trace_manifold(&w, &[-0.5, 0.0, 0.5], &g).unwrap();
        for p in &man.points {
            assert!(p.u.values.amax() == 0.0);
            assert_eq!(p.iterations, 0);
        }
    }

    #[test]
    fn unsupported_geometry() {
        let w = Walls::new(
            Wall::line([0.0, 0.0], [1.0, 1.0]).unwrap(),
            Wall::line([1.0, 0.0], [-1.0, 1.0]).unwrap(),
        );
        assert!(matches!(
            orthogonal_arc(w.left, w.right, 0.0),
            Err(Error::UnsupportedWalls(_))
        ));
        assert!(Wall::line([0.0, 0.0], [1.0, 0.0]).is_err());
    }
}
