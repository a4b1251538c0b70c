//! Axisymmetric radial graphs over `S^n` inside `S^{n+1}`.
//!
//! A hypersurface is stored as the geodesic distance `u(theta)` from a
//! center point, sampled on `theta_j = j pi / N`. Symmetry about the axis
//! reduces the shape operator to two eigenvalues: the profile curvature and
//! the orbit curvature (multiplicity `n - 1`). Both poles are grid nodes and
//! derivatives there use ghost values from even reflection.

use std::cell::RefCell;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::curvfun::{FunctionSpec, MAX_DIM};
use crate::error::{Error, Result};

/// Default gap `gamma` kept between a graph and the antipode of its center.
pub const HEMISPHERE_MARGIN: f64 = 0.05;

/// Reference radius `r_2` in `phi = log tan(u/2) - log tan(r_2/2)`.
pub const PHI_REFERENCE_RADIUS: f64 = 1.0;

/// Uniform polar-angle grid on `[0, pi]`, both poles included.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AxiGrid {
    intervals: usize,
    dim: usize,
}

impl AxiGrid {
    pub fn new(intervals: usize, dim: usize) -> Result<Self> {
        if intervals < 32 || !intervals.is_multiple_of(2) {
            return Err(Error::Argument(format!(
                "grid needs an even number of intervals >= 32, got {intervals}"
            )));
        }
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Argument(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        Ok(AxiGrid { intervals, dim })
    }

    /// Number of intervals `N`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// Hypersurface dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.intervals + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        PI / self.intervals as f64
    }

    pub fn theta(&self, j: usize) -> f64 {
        if j == self.intervals {
            PI
        } else {
            j as f64 * self.h()
        }
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.len()).map(|j| self.theta(j)).collect()
    }

    /// The same dimension on a grid with twice as many intervals.
    pub fn refined(&self) -> AxiGrid {
        AxiGrid {
            intervals: 2 * self.intervals,
            dim: self.dim,
        }
    }

    /// Value at `index` of an array extended by even reflection about both poles.
    #[inline]
    fn reflect(&self, f: &[f64], index: isize) -> f64 {
        let n = self.intervals as isize;
        let i = if index < 0 {
            -index
        } else if index > n {
            2 * n - index
        } else {
            index
        };
        f[i as usize]
    }
}

/// Identifies the center of the polar coordinate system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Center {
    /// The base point `x_0`.
    Origin,
    /// Its antipode `-x_0`.
    Antipode,
}

impl Center {
    pub fn antipode(self) -> Center {
        match self {
            Center::Origin => Center::Antipode,
            Center::Antipode => Center::Origin,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Center::Origin => "x0",
            Center::Antipode => "-x0",
        }
    }

    fn parse(s: &str) -> Result<Center> {
        match s {
            "x0" => Ok(Center::Origin),
            "-x0" => Ok(Center::Antipode),
            other => Err(Error::Argument(format!("unknown center label {other:?}"))),
        }
    }
}

/// Radial graph `u(theta)` of an axisymmetric hypersurface.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFunction {
    grid: AxiGrid,
    u: Vec<f64>,
    center: Center,
}

impl GraphFunction {
    /// Validates `0 < u_j < pi - gamma` at every node.
    pub fn new(grid: AxiGrid, u: Vec<f64>, center: Center) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::Argument(format!(
                "graph has {} values, grid has {} nodes",
                u.len(),
                grid.len()
            )));
        }
        if let Some((node, &value)) = u
            .iter()
            .enumerate()
            .find(|(_, u)| !(u.is_finite() && **u > 0.0 && **u < PI - HEMISPHERE_MARGIN))
        {
            return Err(Error::Hemisphere { node, value });
        }
        Ok(GraphFunction { grid, u, center })
    }

    pub fn grid(&self) -> &AxiGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn center(&self) -> Center {
        self.center
    }

    pub fn u_min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn u_max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Max-norm distance to another graph on the same grid.
    pub fn max_distance(&self, other: &GraphFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Argument("graphs live on different grids".into()));
        }
        Ok(self
            .u
            .iter()
            .zip(&other.u)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Plain-text form: a header `n N center`, then `theta u` per node with
    /// 17 significant digits.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{} {} {}\n",
            self.grid.dim,
            self.grid.intervals,
            self.center.label()
        );
        for (j, u) in self.u.iter().enumerate() {
            let _ = writeln!(s, "{} {}", fmt17(self.grid.theta(j)), fmt17(*u));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Argument("empty graph file".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Argument(format!("bad header {header:?}")));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Argument(format!("bad header field {s:?}: {e}")))
        };
        let grid = AxiGrid::new(parse_usize(fields[1])?, parse_usize(fields[0])?)?;
        let center = Center::parse(fields[2])?;
        let mut u = Vec::with_capacity(grid.len());
        for line in lines {
            let mut it = line.split_whitespace();
            let (_theta, value) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => return Err(Error::Argument(format!("bad data line {line:?}"))),
            };
            u.push(
                value
                    .parse::<f64>()
                    .map_err(|e| Error::Argument(format!("bad value {value:?}: {e}")))?,
            );
        }
        GraphFunction::new(grid, u, center)
    }
}

/// Formats with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Geometry of a graph, evaluated nodewise.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometryFields {
    pub phi: Vec<f64>,
    pub phi_d1: Vec<f64>,
    pub phi_d2: Vec<f64>,
    pub v: Vec<f64>,
    pub kappa_profile: Vec<f64>,
    /// Curvature of the `SO(n)` orbits; multiplicity `n - 1`.
    pub kappa_orbit: Vec<f64>,
    pub mean_curvature: Vec<f64>,
    pub norm_a2: Vec<f64>,
    pub f: Vec<f64>,
    pub f_grad: Vec<Vec<f64>>,
    dim: usize,
}

impl GeometryFields {
    /// The full curvature vector at node `j`, profile direction first.
    pub fn kappa_at(&self, j: usize) -> Vec<f64> {
        curvature_vector(self.dim, self.kappa_profile[j], self.kappa_orbit[j])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Smallest and largest principal curvature over all nodes and directions.
    pub fn kappa_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..self.len() {
            let mut consider = |k: f64| {
                lo = lo.min(k);
                hi = hi.max(k);
            };
            consider(self.kappa_profile[j]);
            if self.dim > 1 {
                consider(self.kappa_orbit[j]);
            }
        }
        (lo, hi)
    }
}

pub(crate) fn curvature_vector(dim: usize, profile: f64, orbit: f64) -> Vec<f64> {
    let mut k = vec![orbit; dim];
    k[0] = profile;
    k
}

/// Geodesic sphere of radius `r` about the center.
pub fn sphere(grid: AxiGrid, r: f64) -> Result<GraphFunction> {
    if !(r > 0.0 && r < FRAC_PI_2) {
        return Err(Error::Argument(format!(
            "sphere radius {r} outside (0, pi/2)"
        )));
    }
    GraphFunction::new(grid, vec![r; grid.len()], Center::Origin)
}

/// `u(theta) = r + amp cos(mode theta)`, checked for strict convexity.
pub fn perturbed_sphere(grid: AxiGrid, r: f64, amp: f64, mode: usize) -> Result<GraphFunction> {
    if mode == 0 {
        return Err(Error::Argument("perturbation mode must be >= 1".into()));
    }
    if !(r > 0.0 && r < FRAC_PI_2) {
        return Err(Error::Argument(format!(
            "base radius {r} outside (0, pi/2)"
        )));
    }
    let u: Vec<f64> = grid
        .thetas()
        .iter()
        .map(|t| r + amp * (mode as f64 * t).cos())
        .collect();
    let g = GraphFunction::new(grid, u, Center::Origin)?;
    match shape_operator(&g, &FunctionSpec::MeanNormalized) {
        Ok(_) => Ok(g),
        Err(Error::ConvexityLoss { node, value }) => Err(Error::Construction { node, value }),
        Err(e) => Err(e),
    }
}

/// `phi = log tan(u/2) - log tan(r_2/2)`, so that `phi' = u' / sin u`.
pub fn phi_from_u(g: &GraphFunction) -> Vec<f64> {
    let offset = (PHI_REFERENCE_RADIUS / 2.0).tan().ln();
    g.u.iter().map(|u| (u / 2.0).tan().ln() - offset).collect()
}

/// Fourth-order central differences with even-reflection ghost nodes. Fails
/// if the data has a visible odd component at either pole.
pub fn derivatives(grid: &AxiGrid, f: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if f.len() != grid.len() {
        return Err(Error::Argument(format!(
            "array has {} entries, grid has {} nodes",
            f.len(),
            grid.len()
        )));
    }
    check_parity(grid, f)?;
    Ok(derivatives_unchecked(grid, f))
}

fn check_parity(grid: &AxiGrid, f: &[f64]) -> Result<()> {
    let h = grid.h();
    let n = grid.intervals;
    let scale = 1.0 + f.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let curvature = (1..n)
        .map(|j| (f[j + 1] - 2.0 * f[j] + f[j - 1]).abs() / (h * h))
        .fold(0.0f64, f64::max);
    let tol = h * h * (1.0 + curvature) * scale;
    // second-order one-sided slopes; an even function leaves O(h^3) here
    let left = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    let right = (3.0 * f[n] - 4.0 * f[n - 1] + f[n - 2]) / (2.0 * h);
    for (pole, slope) in [("theta = 0", left), ("theta = pi", right)] {
        if slope.abs() > tol {
            return Err(Error::Precondition(format!(
                "data is not even about the pole {pole}: one-sided slope {slope:e}"
            )));
        }
    }
    Ok(())
}

pub(crate) fn derivatives_unchecked(grid: &AxiGrid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = grid.h();
    let m = grid.len();
    let mut d1 = vec![0.0; m];
    let mut d2 = vec![0.0; m];
    for j in 0..m {
        let i = j as isize;
        let f0 = f[j];
        let fm2 = grid.reflect(f, i - 2) - f0;
        let fm1 = grid.reflect(f, i - 1) - f0;
        let fp1 = grid.reflect(f, i + 1) - f0;
        let fp2 = grid.reflect(f, i + 2) - f0;
        d1[j] = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
        d2[j] = (-fm2 + 16.0 * fm1 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    }
    (d1, d2)
}

/// Principal curvatures and the gradient factor `v`, without a curvature
/// function.
pub(crate) struct Curvatures {
    pub phi: Vec<f64>,
    pub phi_d1: Vec<f64>,
    pub phi_d2: Vec<f64>,
    pub v: Vec<f64>,
    pub sin_u: Vec<f64>,
    pub profile: Vec<f64>,
    pub orbit: Vec<f64>,
}

thread_local! {
    static COTANGENTS: RefCell<(usize, Rc<Vec<f64>>)> = RefCell::new((0, Rc::new(Vec::new())));
}

/// `cot theta_j` at the interior nodes (zero at the poles), cached per grid.
fn cotangents(grid: &AxiGrid) -> Rc<Vec<f64>> {
    COTANGENTS.with(|cache| {
        let mut cache = cache.borrow_mut();
        if cache.0 != grid.intervals {
            let n = grid.intervals;
            let cot = (0..=n)
                .map(|j| {
                    if j == 0 || j == n {
                        0.0
                    } else {
                        let t = grid.theta(j);
                        t.cos() / t.sin()
                    }
                })
                .collect();
            *cache = (n, Rc::new(cot));
        }
        Rc::clone(&cache.1)
    })
}

pub(crate) fn curvatures(g: &GraphFunction) -> Result<Curvatures> {
    let grid = &g.grid;
    let n = grid.intervals;
    let phi = phi_from_u(g);
    let (phi_d1, phi_d2) = derivatives_unchecked(grid, &phi);
    let m = grid.len();
    let cot = cotangents(grid);
    let mut v = vec![1.0; m];
    let mut sin_u = vec![0.0; m];
    let mut profile = vec![0.0; m];
    let mut orbit = vec![0.0; m];
    for j in 0..m {
        let (s, c) = g.u[j].sin_cos();
        sin_u[j] = s;
        let p1 = phi_d1[j];
        let v2 = 1.0 + p1 * p1;
        let vj = v2.sqrt();
        v[j] = vj;
        profile[j] = (-phi_d2[j] + v2 * c) / (v2 * vj * s);
        orbit[j] = if j == 0 || j == n {
            profile[j]
        } else {
            (-cot[j] * p1 + c) / (vj * s)
        };
    }
    for j in 0..m {
        for value in [profile[j], orbit[j]] {
            if !(value > 0.0) {
                return Err(Error::ConvexityLoss { node: j, value });
            }
        }
    }
    Ok(Curvatures {
        phi,
        phi_d1,
        phi_d2,
        v,
        sin_u,
        profile,
        orbit,
    })
}

/// Full nodewise geometry, including `F` and its gradient.
pub fn shape_operator(g: &GraphFunction, spec: &FunctionSpec) -> Result<GeometryFields> {
    let dim = g.grid.dim;
    let spec = spec.canonical();
    spec.validate(dim)?;
    let c = curvatures(g)?;
    let m = g.grid.len();
    let mut mean_curvature = Vec::with_capacity(m);
    let mut norm_a2 = Vec::with_capacity(m);
    let mut f = Vec::with_capacity(m);
    let mut f_grad = Vec::with_capacity(m);
    let orbit_mult = (dim - 1) as f64;
    for j in 0..m {
        let (kp, ko) = (c.profile[j], c.orbit[j]);
        mean_curvature.push(kp + orbit_mult * ko);
        norm_a2.push(kp * kp + orbit_mult * ko * ko);
        let (value, grad) = spec.value_and_gradient(&curvature_vector(dim, kp, ko));
        f.push(value);
        f_grad.push(grad);
    }
    Ok(GeometryFields {
        phi: c.phi,
        phi_d1: c.phi_d1,
        phi_d2: c.phi_d2,
        v: c.v,
        kappa_profile: c.profile,
        kappa_orbit: c.orbit,
        mean_curvature,
        norm_a2,
        f,
        f_grad,
        dim,
    })
}

/// The profile curve in the plane spanned by `e_0` (toward the center) and
/// two orthonormal directions of the tangent space at the center.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedProfile {
    pub x: Vec<[f64; 3]>,
    /// Outward unit normal, as a vector of `R^{n+2}` (the Gauss map).
    pub xt: Vec<[f64; 3]>,
}

/// Unit vectors of increasing `u` and increasing `theta` at `(u, theta)`.
pub(crate) fn polar_frame(u: f64, theta: f64) -> ([f64; 3], [f64; 3]) {
    let (su, cu) = u.sin_cos();
    let (st, ct) = theta.sin_cos();
    ([-su, cu * ct, cu * st], [0.0, -st, ct])
}

pub(crate) fn point(u: f64, theta: f64) -> [f64; 3] {
    let (su, cu) = u.sin_cos();
    let (st, ct) = theta.sin_cos();
    [cu, su * ct, su * st]
}

pub(crate) fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Embeds the profile and its Gauss map into the profile plane.
pub fn embed(g: &GraphFunction) -> Result<EmbeddedProfile> {
    let grid = &g.grid;
    let (u_d1, _) = derivatives_unchecked(grid, &g.u);
    let mut x = Vec::with_capacity(grid.len());
    let mut xt = Vec::with_capacity(grid.len());
    for (j, &u) in g.u.iter().enumerate() {
        let theta = grid.theta(j);
        let s = u.sin();
        let norm = (s * s + u_d1[j] * u_d1[j]).sqrt();
        if norm < 1e-14 {
            return Err(Error::Numeric(format!(
                "degenerate profile tangent at node {j}"
            )));
        }
        let (eu, et) = polar_frame(u, theta);
        // unit normal within the tangent plane of the sphere: (sin u e_u - u' e_theta) / norm
        let a = s / norm;
        let b = -u_d1[j] / norm;
        x.push(point(u, theta));
        xt.push([
            a * eu[0] + b * et[0],
            a * eu[1] + b * et[1],
            a * eu[2] + b * et[2],
        ]);
    }
    Ok(EmbeddedProfile { x, xt })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn grid(n: usize) -> AxiGrid {
        AxiGrid::new(n, 2).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(AxiGrid::new(30, 2).is_err());
        assert!(AxiGrid::new(33, 2).is_err());
        assert!(AxiGrid::new(32, 0).is_err());
        assert!(AxiGrid::new(32, 9).is_err());
        let g = grid(64);
        assert_eq!(g.len(), 65);
        assert_eq!(g.theta(64), PI);
    }

    #[test]
    fn sphere_is_constant() {
        let s = sphere(grid(64), FRAC_PI_4).unwrap();
        assert!(s.values().iter().all(|u| *u == FRAC_PI_4));
        assert!(sphere(grid(64), 0.0).is_err());
        assert!(sphere(grid(64), FRAC_PI_2).is_err());
    }

    #[test]
    fn sphere_curvatures_are_exact() {
        for (r, expect) in [(FRAC_PI_4, 1.0), (PI / 6.0, 3f64.sqrt())] {
            let geo =
                shape_operator(&sphere(grid(64), r).unwrap(), &FunctionSpec::SigmaK(2)).unwrap();
            for j in 0..geo.len() {
                assert!((geo.kappa_profile[j] - expect).abs() <= 1e-12 * expect);
                assert!((geo.kappa_orbit[j] - expect).abs() <= 1e-12 * expect);
                assert_eq!(geo.v[j], 1.0);
            }
        }
        let r = PI / 3.0;
        let geo = shape_operator(
            &sphere(grid(64), r).unwrap(),
            &FunctionSpec::SigmaK(2).inverse(),
        )
        .unwrap();
        assert!(geo.f.iter().all(|f| (f - 1.0 / r.tan()).abs() < 1e-14));
    }

    #[test]
    fn perturbed_sphere_endpoints_and_convexity() {
        let g = perturbed_sphere(grid(64), FRAC_PI_4, 0.1, 2).unwrap();
        assert!((g.values()[0] - (FRAC_PI_4 + 0.1)).abs() < 1e-15);
        assert!((g.values()[64] - (FRAC_PI_4 + 0.1)).abs() < 1e-15);
        let geo = shape_operator(&g, &FunctionSpec::MeanNormalized).unwrap();
        assert!(geo
            .kappa_profile
            .iter()
            .chain(&geo.kappa_orbit)
            .all(|k| *k > 0.0));
        assert_eq!(
            perturbed_sphere(grid(64), FRAC_PI_4, 0.0, 2).unwrap(),
            sphere(grid(64), FRAC_PI_4).unwrap()
        );
        assert!(matches!(
            perturbed_sphere(grid(64), FRAC_PI_4, 0.4, 6),
            Err(Error::Construction { .. })
        ));
        assert!(perturbed_sphere(grid(64), FRAC_PI_4, 0.1, 0).is_err());
    }

    #[test]
    fn phi_examples() {
        let g = sphere(grid(64), PHI_REFERENCE_RADIUS).unwrap();
        assert!(phi_from_u(&g).iter().all(|p| p.abs() < 1e-15));
        let g = GraphFunction::new(grid(64), vec![FRAC_PI_2 - 1e-9; 65], Center::Origin).unwrap();
        let expect = -(0.5f64).tan().ln();
        assert!((phi_from_u(&g)[3] - expect).abs() < 1e-8);
        assert!((expect - 0.604_582_4).abs() < 1e-7);
    }

    #[test]
    fn phi_chain_rule() {
        let gr = grid(256);
        let u: Vec<f64> = gr
            .thetas()
            .iter()
            .map(|t| FRAC_PI_4 + 0.1 * t.cos())
            .collect();
        let g = GraphFunction::new(gr, u, Center::Origin).unwrap();
        let (d1, _) = derivatives(&gr, &phi_from_u(&g)).unwrap();
        let j = 128;
        let expect = -0.1 / FRAC_PI_4.sin();
        assert!((d1[j] - expect).abs() < 1e-8, "{} vs {expect}", d1[j]);
        assert!((expect + 0.14142).abs() < 1e-5);
    }

    #[test]
    fn derivative_examples() {
        let gr = grid(256);
        let (d1, d2) = derivatives(&gr, &vec![2.5; 257]).unwrap();
        assert!(d1.iter().chain(&d2).all(|d| *d == 0.0));

        let f: Vec<f64> = gr.thetas().iter().map(|t| t.cos()).collect();
        let (_, d2) = derivatives(&gr, &f).unwrap();
        let err = d2
            .iter()
            .zip(&f)
            .fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(err <= 1e-8, "max err {err}");
    }

    #[test]
    fn derivative_order_is_four() {
        let err = |n: usize| {
            let gr = grid(n);
            let f: Vec<f64> = gr.thetas().iter().map(|t| (2.0 * t).cos()).collect();
            let (d1, d2) = derivatives(&gr, &f).unwrap();
            gr.thetas().iter().enumerate().fold(0.0f64, |m, (j, t)| {
                m.max((d2[j] + 4.0 * (2.0 * t).cos()).abs())
                    .max((d1[j] + 2.0 * (2.0 * t).sin()).abs())
            })
        };
        let ratio = err(64) / err(128);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn odd_data_is_rejected() {
        let gr = grid(256);
        let f: Vec<f64> = gr.thetas().iter().map(|t| 1.0 + t).collect();
        assert!(matches!(derivatives(&gr, &f), Err(Error::Precondition(_))));
        let f: Vec<f64> = gr.thetas().iter().map(|t| (t - PI).powi(3)).collect();
        assert!(matches!(derivatives(&gr, &f), Err(Error::Precondition(_))));
    }

    #[test]
    fn v_is_one_at_poles_and_at_least_one() {
        let g = perturbed_sphere(grid(128), FRAC_PI_4, 0.05, 2).unwrap();
        let geo = shape_operator(&g, &FunctionSpec::SigmaK(2)).unwrap();
        assert_eq!(geo.v[0], 1.0);
        assert_eq!(geo.v[128], 1.0);
        assert!(geo.v.iter().all(|v| *v >= 1.0));
        assert_eq!(geo.kappa_orbit[0], geo.kappa_profile[0]);
        for j in 0..geo.len() {
            let (kp, ko) = (geo.kappa_profile[j], geo.kappa_orbit[j]);
            assert!((geo.mean_curvature[j] - (kp + ko)).abs() < 1e-14);
            assert!((geo.norm_a2[j] - (kp * kp + ko * ko)).abs() < 1e-13);
        }
    }

    #[test]
    fn embedding_of_sphere() {
        let r = 0.6;
        let g = sphere(grid(64), r).unwrap();
        let e = embed(&g).unwrap();
        for j in 0..g.grid().len() {
            let t = g.grid().theta(j);
            let expect = [-r.sin(), r.cos() * t.cos(), r.cos() * t.sin()];
            for c in 0..3 {
                assert!((e.xt[j][c] - expect[c]).abs() < 1e-15);
            }
            let dual_radius = (-e.xt[j][0]).acos();
            assert!((dual_radius - (FRAC_PI_2 - r)).abs() < 1e-14);
        }
    }

    #[test]
    fn embedding_is_orthonormal() {
        let g = perturbed_sphere(grid(128), 0.7, 0.02, 3).unwrap();
        let e = embed(&g).unwrap();
        for j in 0..e.x.len() {
            assert!((dot(&e.x[j], &e.x[j]) - 1.0).abs() < 1e-12);
            assert!((dot(&e.xt[j], &e.xt[j]) - 1.0).abs() < 1e-12);
            assert!(dot(&e.x[j], &e.xt[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn serialization_round_trip() {
        let g = perturbed_sphere(grid(32), 0.7, 0.05, 2).unwrap();
        let text = g.to_text();
        assert!(text.starts_with("2 32 x0\n"));
        assert_eq!(text.lines().count(), 34);
        assert_eq!(GraphFunction::from_text(&text).unwrap(), g);
        assert!(GraphFunction::from_text("2 32 y0\n").is_err());
        assert!(GraphFunction::from_text("").is_err());
    }

    #[test]
    fn graph_rejects_out_of_range_values() {
        let gr = grid(32);
        assert!(GraphFunction::new(gr, vec![0.5; 32], Center::Origin).is_err());
        let mut u = vec![0.5; 33];
        u[7] = PI - 0.01;
        assert!(matches!(
            GraphFunction::new(gr, u, Center::Origin),
            Err(Error::Hemisphere { node: 7, .. })
        ));
    }
}
