//! Rescaled-flow observables and exponential decay fits.
//!
//! Along a contracting flow the hypersurfaces shrink like the comparison
//! sphere `Theta(t, T*)`. Quantities are rescaled by `Theta` and tracked in
//! the time `tau = -log Theta`, in which convergence to the round sphere is
//! exponential.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::curvfun::FunctionSpec;
use crate::error::{Error, Result};
use crate::flow::{spherical_theta, Direction, Trajectory};
use crate::hypersurface::{derivatives_unchecked, shape_operator, GraphFunction};

/// Default exponents for `f_sigma`.
pub const DEFAULT_SIGMAS: [f64; 2] = [0.0, 0.1];

const GOLDEN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub tau: f64,
    pub theta: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Largest over smallest principal curvature, over all nodes.
    pub pinch_ratio: f64,
    /// `min_j kappa_min / H` (with `H` the sum of the curvatures).
    pub pinch_min: f64,
    /// `max_j |A|^2 - H^2/n`.
    pub tracefree: f64,
    /// `(sigma, max_j F^{sigma-2} (|A|^2 - n F^2))`.
    pub f_sigma: Vec<(f64, f64)>,
    /// Range of the rescaled speed function `F Theta`.
    pub ftilde_min: f64,
    pub ftilde_max: f64,
    /// Largest `|d(F Theta)/d theta|` over the grid.
    pub ftilde_grad_max: f64,
    pub u_rescaled_dev: f64,
    /// `(pi/2 - u*) / Theta`, expanding flows only.
    pub w_min: Option<f64>,
    pub w_max: Option<f64>,
    pub v_max: f64,
    /// `exp(cot(u*_min) (u*_max - u*_min))`, expanding flows only.
    pub v_bound: Option<f64>,
    pub rho_minus: f64,
    pub rho_plus: f64,
}

impl DiagnosticsRecord {
    pub fn ftilde_range(&self) -> f64 {
        self.ftilde_max - self.ftilde_min
    }

    /// `max |F Theta - 1|`.
    pub fn ftilde_dev(&self) -> f64 {
        (self.ftilde_max - 1.0)
            .abs()
            .max((1.0 - self.ftilde_min).abs())
    }

    /// `tracefree * Theta^2`, the trace-free norm of the rescaled curvatures.
    pub fn tracefree_rescaled(&self) -> f64 {
        self.tracefree * self.theta * self.theta
    }

    pub fn f_sigma_for(&self, sigma: f64) -> Option<f64> {
        self.f_sigma
            .iter()
            .find(|(s, _)| *s == sigma)
            .map(|(_, f)| *f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS of the residuals of the log-linear fit.
    pub residual: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// `(|A|^2 - H^2/n, (1/n) sum_{i<j} (k_i - k_j)^2)`.
pub fn tracefree_identity(kappa: &[f64]) -> (f64, f64) {
    let n = kappa.len() as f64;
    let a2: f64 = kappa.iter().map(|k| k * k).sum();
    let h: f64 = kappa.iter().sum();
    let mut pairs = 0.0;
    for i in 0..kappa.len() {
        for j in (i + 1)..kappa.len() {
            pairs += (kappa[i] - kappa[j]).powi(2);
        }
    }
    (a2 - h * h / n, pairs / n)
}

/// Observables of one snapshot. `spec` is the `F` of the contracting flow;
/// on an expanding hypersurface the rescaled speed is `Theta / F~`, which is
/// the rescaled `F` of the corresponding contracting hypersurface.
pub fn snapshot_diagnostics(
    g: &GraphFunction,
    spec: &FunctionSpec,
    t: f64,
    tstar: f64,
    direction: Direction,
    sigmas: &[f64],
) -> Result<DiagnosticsRecord> {
    let theta = spherical_theta(t, tstar)?;
    let own = match direction {
        Direction::Contracting => spec.canonical(),
        Direction::Expanding => spec.canonical().inverse(),
    };
    let geo = shape_operator(g, &own)?;
    let n = g.grid().dim() as f64;
    let u = g.values();
    let (kmin, kmax) = geo.kappa_range();

    let mut pinch_min = f64::INFINITY;
    let mut tracefree = 0.0f64;
    let mut f_sigma: Vec<(f64, f64)> = sigmas.iter().map(|s| (*s, f64::NEG_INFINITY)).collect();
    let mut ftilde = Vec::with_capacity(u.len());
    for j in 0..geo.len() {
        let kappa = geo.kappa_at(j);
        let local_min = kappa.iter().copied().fold(f64::INFINITY, f64::min);
        pinch_min = pinch_min.min(local_min / geo.mean_curvature[j]);
        tracefree = tracefree.max(tracefree_identity(&kappa).0);
        let f = geo.f[j];
        let excess = geo.norm_a2[j] - n * f * f;
        for (sigma, value) in f_sigma.iter_mut() {
            *value = value.max(f.powf(*sigma - 2.0) * excess);
        }
        ftilde.push(match direction {
            Direction::Contracting => f * theta,
            Direction::Expanding => theta / f,
        });
    }
    let (ftilde_d1, _) = derivatives_unchecked(g.grid(), &ftilde);
    let ftilde_grad_max = ftilde_d1.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let ftilde_min = ftilde.iter().copied().fold(f64::INFINITY, f64::min);
    let ftilde_max = ftilde.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let rescaled = |x: f64| match direction {
        Direction::Contracting => x / theta,
        Direction::Expanding => (FRAC_PI_2 - x) / theta,
    };
    let u_rescaled_dev = u
        .iter()
        .fold(0.0f64, |m, x| m.max((rescaled(*x) - 1.0).abs()));
    let (w_min, w_max, v_bound) = match direction {
        Direction::Contracting => (None, None, None),
        Direction::Expanding => {
            let w: Vec<f64> = u.iter().map(|x| rescaled(*x)).collect();
            let kbar = 1.0 / g.u_min().tan();
            (
                Some(w.iter().copied().fold(f64::INFINITY, f64::min)),
                Some(w.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                Some((kbar * (g.u_max() - g.u_min())).exp()),
            )
        }
    };
    let v_max = geo.v.iter().copied().fold(1.0, f64::max);
    let (rho_minus, rho_plus) = radii_estimates(g);
    Ok(DiagnosticsRecord {
        t,
        tau: -theta.ln(),
        theta,
        u_min: g.u_min(),
        u_max: g.u_max(),
        pinch_ratio: kmax / kmin,
        pinch_min,
        tracefree,
        f_sigma,
        ftilde_min,
        ftilde_max,
        ftilde_grad_max,
        u_rescaled_dev,
        w_min,
        w_max,
        v_max,
        v_bound,
        rho_minus,
        rho_plus,
    })
}

/// Diagnostics of every snapshot of a trajectory, with `Theta` referred to
/// the trajectory's own extinction estimate.
pub fn trajectory_diagnostics(
    traj: &Trajectory,
    spec: &FunctionSpec,
    sigmas: &[f64],
) -> Result<Vec<DiagnosticsRecord>> {
    traj.snapshots
        .iter()
        .map(|s| snapshot_diagnostics(&s.graph, spec, s.t, traj.tstar_est, traj.direction, sigmas))
        .collect()
}

/// Observables whose exponential decay in `tau` is fitted for every run.
pub const DECAY_QUANTITIES: [&str; 5] = [
    "tracefree_rescaled",
    "ftilde_range",
    "ftilde_dev",
    "u_rescaled_dev",
    "ftilde_grad",
];

/// `(tau, value)` pairs of one of [`DECAY_QUANTITIES`].
pub fn decay_series(records: &[DiagnosticsRecord], quantity: &str) -> Result<Vec<(f64, f64)>> {
    let pick: fn(&DiagnosticsRecord) -> f64 = match quantity {
        "tracefree_rescaled" => DiagnosticsRecord::tracefree_rescaled,
        "ftilde_range" => DiagnosticsRecord::ftilde_range,
        "ftilde_dev" => DiagnosticsRecord::ftilde_dev,
        "u_rescaled_dev" => |r| r.u_rescaled_dev,
        "ftilde_grad" => |r| r.ftilde_grad_max,
        other => return Err(Error::Argument(format!("unknown decay quantity {other:?}"))),
    };
    Ok(records.iter().map(|r| (r.tau, pick(r))).collect())
}

/// Ordinary least squares of `log value` against `tau` over the points with
/// `tau` in `window`; the rate is minus the slope.
pub fn fit_decay(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Argument(format!("empty fit window [{lo}, {hi}]")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(tau, _)| *tau >= lo && *tau <= hi)
        .collect();
    if pts.len() < 8 {
        return Err(Error::Argument(format!(
            "decay fit needs at least 8 points in the window, got {}",
            pts.len()
        )));
    }
    if let Some((tau, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(Error::Argument(format!(
            "nonpositive value {v} at tau = {tau}"
        )));
    }
    let m = pts.len() as f64;
    let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = pts
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1.ln() - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::Argument("all fit points share one tau".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual = (pts
        .iter()
        .map(|p| (p.1.ln() - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        residual,
        window,
        points: pts.len(),
    })
}

/// The last 60% of the `tau` range spanned by values above `1e3` machine
/// epsilon.
pub fn default_window(series: &[(f64, f64)]) -> Option<(f64, f64)> {
    let floor = 1e3 * f64::EPSILON;
    let taus = series.iter().filter(|(_, v)| *v > floor).map(|(t, _)| *t);
    let (lo, hi) = taus.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| {
        (a.min(t), b.max(t))
    });
    (lo < hi).then_some((lo + 0.4 * (hi - lo), hi))
}

/// Fits over [`default_window`], after discarding values at the noise floor.
pub fn fit_decay_default(series: &[(f64, f64)]) -> Result<DecayFit> {
    let window = default_window(series)
        .ok_or_else(|| Error::Argument("series has no usable tau range".into()))?;
    let floor = 1e3 * f64::EPSILON;
    let kept: Vec<(f64, f64)> = series.iter().copied().filter(|(_, v)| *v > floor).collect();
    fit_decay(&kept, window)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b))
}

/// Inradius and circumradius, with candidate centers restricted to the
/// symmetry axis. A center at signed arc length `s` from the coordinate
/// center toward `theta = 0` has distance
/// `arccos(cos s cos u + sin s sin u cos theta)` to the node `(u, theta)`.
pub fn radii_estimates(g: &GraphFunction) -> (f64, f64) {
    let grid = g.grid();
    let u = g.values();
    let nodes: Vec<(f64, f64)> = (0..grid.len())
        .map(|j| {
            let (s, c) = u[j].sin_cos();
            (c, s * grid.theta(j).cos())
        })
        .collect();
    let extreme = |s: f64, init: f64, pick: fn(f64, f64) -> f64| {
        let (ss, cs) = s.sin_cos();
        nodes.iter().fold(init, |m, (cu, su_ct)| {
            pick(m, (cs * cu + ss * su_ct).clamp(-1.0, 1.0).acos())
        })
    };
    let lo = -u[grid.intervals()];
    let hi = u[0];
    let rho_minus = golden_max(|s| extreme(s, f64::INFINITY, f64::min), lo, hi);
    let rho_plus = -golden_max(|s| -extreme(s, f64::NEG_INFINITY, f64::max), lo, hi);
    (rho_minus, rho_plus)
}
