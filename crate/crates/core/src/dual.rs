//! Polar duality through the Gauss map.
//!
//! A strictly convex graph around `x_0` inside the open hemisphere has a
//! Gauss map image that is again strictly convex and is a graph around
//! `-x_0`. Both graphs are stored in a local frame where their own center is
//! `e_0`, so the dual of the dual is computed by the same routine.

use std::f64::consts::FRAC_PI_2;

use crate::curvfun::FunctionSpec;
use crate::error::{Error, Result};
use crate::hypersurface::{
    curvature_vector, curvatures, derivatives_unchecked, dot, polar_frame, AxiGrid, GraphFunction,
};

/// Correspondence between primal polar angles and dual polar angles.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeMap {
    /// `theta*` of the Gauss map image of each primal node; strictly increasing.
    pub theta_star: Vec<f64>,
    /// For each dual grid node, the primal angle it came from.
    pub preimage: Vec<f64>,
    /// For each dual grid node, the index `i` with
    /// `theta_star[i] <= theta*_j <= theta_star[i + 1]`.
    pub interval: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualPair {
    pub primal: GraphFunction,
    pub dual: GraphFunction,
    pub node_map: NodeMap,
}

/// Reciprocity defects between a primal graph and its dual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualCurvatureCheck {
    /// `max |k~_i k_i - 1|`.
    pub reciprocity: f64,
    /// `max |F(k) F~(k~) - 1|`.
    pub function: f64,
}

impl DualCurvatureCheck {
    pub fn max_error(&self) -> f64 {
        self.reciprocity.max(self.function)
    }
}

fn hermite(t: f64, a: f64, b: f64, ya: f64, yb: f64, ma: f64, mb: f64) -> f64 {
    let d = b - a;
    let s = (t - a) / d;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * ya
        + (s3 - 2.0 * s2 + s) * d * ma
        + (-2.0 * s3 + 3.0 * s2) * yb
        + (s3 - s2) * d * mb
}

/// Computes the polar dual and resamples it on the primal's grid.
///
/// Each primal node is sent to `(theta*, u*)` with `u* = arccos <x~, -e_0>`;
/// the values are then interpolated in `theta*` by cubic Hermite segments
/// whose slopes come from the Weingarten relation `x~_theta = k_p x_theta`,
/// so the resampled dual is exact up to the fourth-order node data.
pub fn polar_dual(g: &GraphFunction) -> Result<DualPair> {
    let grid: AxiGrid = *g.grid();
    let u = g.values();
    if let Some((node, &value)) = u.iter().enumerate().find(|(_, u)| **u >= FRAC_PI_2) {
        return Err(Error::Hemisphere { node, value });
    }
    let curv = curvatures(g)?;
    let (u_d1, _) = derivatives_unchecked(&grid, u);
    let m = grid.len();
    let last = grid.intervals();

    let mut theta_star = Vec::with_capacity(m);
    let mut u_star = Vec::with_capacity(m);
    // d u*/d theta* and d theta / d theta* at each primal node
    let mut slope_u = Vec::with_capacity(m);
    let mut slope_pre = Vec::with_capacity(m);
    for j in 0..m {
        let theta = grid.theta(j);
        let (eu, et) = polar_frame(u[j], theta);
        let s = u[j].sin();
        let norm = (s * s + u_d1[j] * u_d1[j]).sqrt();
        let (a, b) = (s / norm, -u_d1[j] / norm);
        let xt = [
            a * eu[0] + b * et[0],
            a * eu[1] + b * et[1],
            a * eu[2] + b * et[2],
        ];
        // reflect e_0 so the dual's center is e_0 of its own frame
        let y = [-xt[0], xt[1], xt[2]];
        let us = y[0].clamp(-1.0, 1.0).acos();
        let ts = if j == 0 {
            0.0
        } else if j == last {
            std::f64::consts::PI
        } else {
            y[2].atan2(y[1])
        };
        let tangent = [
            -(u_d1[j] * eu[0] + s * et[0]),
            u_d1[j] * eu[1] + s * et[1],
            u_d1[j] * eu[2] + s * et[2],
        ];
        let (eus, ets) = polar_frame(us, ts);
        let along = dot(&tangent, &ets);
        let radial = dot(&tangent, &eus);
        let dts_dtheta = curv.profile[j] * along / us.sin();
        theta_star.push(ts);
        u_star.push(us);
        slope_u.push(radial * us.sin() / along);
        slope_pre.push(1.0 / dts_dtheta);
    }
    for i in 0..last {
        if !(theta_star[i + 1] > theta_star[i]) {
            return Err(Error::ConvexityLoss {
                node: i + 1,
                value: theta_star[i + 1] - theta_star[i],
            });
        }
    }

    let mut dual_u = Vec::with_capacity(m);
    let mut preimage = Vec::with_capacity(m);
    let mut interval = Vec::with_capacity(m);
    let mut i = 0;
    for j in 0..m {
        let target = grid.theta(j);
        while i + 1 < last && theta_star[i + 1] < target {
            i += 1;
        }
        let (a, b) = (theta_star[i], theta_star[i + 1]);
        dual_u.push(hermite(
            target,
            a,
            b,
            u_star[i],
            u_star[i + 1],
            slope_u[i],
            slope_u[i + 1],
        ));
        preimage.push(hermite(
            target,
            a,
            b,
            grid.theta(i),
            grid.theta(i + 1),
            slope_pre[i],
            slope_pre[i + 1],
        ));
        interval.push(i);
    }
    let dual = GraphFunction::new(grid, dual_u, g.center().antipode())?;
    Ok(DualPair {
        primal: g.clone(),
        dual,
        node_map: NodeMap {
            theta_star,
            preimage,
            interval,
        },
    })
}

/// Four-point Lagrange interpolation on the uniform grid, with even
/// reflection past the poles.
fn interpolate_even(grid: &AxiGrid, f: &[f64], theta: f64) -> f64 {
    let h = grid.h();
    let n = grid.intervals() as isize;
    let base = ((theta / h).floor() as isize).clamp(0, n - 1);
    let s = theta / h - base as f64;
    let at = |i: isize| {
        let k = if i < 0 {
            -i
        } else if i > n {
            2 * n - i
        } else {
            i
        };
        f[k as usize]
    };
    let (fm, f0, f1, f2) = (at(base - 1), at(base), at(base + 1), at(base + 2));
    let w_m = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w_0 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w_1 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w_2 = (s + 1.0) * s * (s - 1.0) / 6.0;
    w_m * fm + w_0 * f0 + w_1 * f1 + w_2 * f2
}

/// Compares dual curvatures with reciprocals of the primal ones transported
/// along the node map, and `F(k) F~(k~)` with one.
pub fn check_dual_curvatures(p: &DualPair, spec: &FunctionSpec) -> Result<DualCurvatureCheck> {
    let grid = *p.primal.grid();
    let dim = grid.dim();
    let spec = spec.canonical();
    spec.validate(dim)?;
    let inverse = spec.clone().inverse();
    let primal = curvatures(&p.primal)?;
    let dual = curvatures(&p.dual)?;
    let mut reciprocity = 0.0f64;
    let mut function = 0.0f64;
    for j in 0..grid.len() {
        let theta = p.node_map.preimage[j];
        let kp = interpolate_even(&grid, &primal.profile, theta);
        let ko = interpolate_even(&grid, &primal.orbit, theta);
        reciprocity = reciprocity.max((dual.profile[j] * kp - 1.0).abs());
        if dim > 1 {
            reciprocity = reciprocity.max((dual.orbit[j] * ko - 1.0).abs());
        }
        let f = spec.value(&curvature_vector(dim, kp, ko));
        let ft = inverse.value(&curvature_vector(dim, dual.profile[j], dual.orbit[j]));
        function = function.max((f * ft - 1.0).abs());
    }
    Ok(DualCurvatureCheck {
        reciprocity,
        function,
    })
}

/// `(u_max + u*_min - pi/2, u_min + u*_max - pi/2)`.
pub fn support_bracket(p: &DualPair) -> (f64, f64) {
    (
        p.primal.u_max() + p.dual.u_min() - FRAC_PI_2,
        p.primal.u_min() + p.dual.u_max() - FRAC_PI_2,
    )
}
