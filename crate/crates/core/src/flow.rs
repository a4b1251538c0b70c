//! Method-of-lines integration of the contracting and expanding flows.
//!
//! The contracting flow moves the graph with normal speed `-F`, which for a
//! radial graph reads `du/dt = -F v`. The expanding flow uses speed `1 / F~`,
//! `du/dt = v / F~`. Spheres follow `Theta' = -cot Theta` with the closed
//! form `Theta(t) = arccos exp(t - T*)`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::curvfun::{FunctionSpec, MAX_DIM};
use crate::dual::polar_dual;
use crate::error::{Error, Result};
use crate::hypersurface::{curvatures, GraphFunction};

pub const MIN_DT: f64 = 1e-12;
pub const MAX_DT: f64 = 1e-2;
const MAX_STEPS: u64 = 20_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Contracting,
    Expanding,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Contracting => "contracting",
            Direction::Expanding => "expanding",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    MinRadiusBelow(f64),
    MaxRadiusAbove(f64),
    TimeReached(f64),
    PinchRatioAbove(f64),
}

impl StopRule {
    pub fn validate(&self, direction: Direction) -> Result<()> {
        let value = match *self {
            StopRule::MinRadiusBelow(v)
            | StopRule::MaxRadiusAbove(v)
            | StopRule::TimeReached(v)
            | StopRule::PinchRatioAbove(v) => v,
        };
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Argument(format!(
                "stop threshold must be positive, got {value}"
            )));
        }
        if let (StopRule::MaxRadiusAbove(v), Direction::Expanding) = (self, direction) {
            if *v >= FRAC_PI_2 {
                return Err(Error::Argument(format!(
                    "expanding flows stay inside the hemisphere; threshold {v} >= pi/2"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub direction: Direction,
    /// `F`. Expanding flows move with speed `1 / F~`, `F~` the inverse of `F`.
    pub curvature: FunctionSpec,
    pub cfl: f64,
    pub snapshot_stride: usize,
    pub stop: StopRule,
}

impl FlowSpec {
    pub fn new(direction: Direction, curvature: FunctionSpec, stop: StopRule) -> Self {
        FlowSpec {
            direction,
            curvature,
            cfl: 0.2,
            snapshot_stride: 100,
            stop,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.curvature.validate(n)?;
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Argument(format!(
                "cfl {} outside (0, 0.5]",
                self.cfl
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Argument("snapshot stride must be >= 1".into()));
        }
        self.stop.validate(self.direction)
    }

    /// The function whose value sets the normal speed.
    pub fn speed_function(&self) -> FunctionSpec {
        match self.direction {
            Direction::Contracting => self.curvature.canonical(),
            Direction::Expanding => self.curvature.canonical().inverse(),
        }
    }
}

/// Right-hand side plus the data the step-size rule needs, evaluated once
/// per accepted state.
#[derive(Clone, Debug, PartialEq)]
struct Evaluation {
    rhs: Vec<f64>,
    /// `min_j sin^2 u_j / (lambda_j v_j)`.
    stiffness_scale: f64,
    pinch_ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub u: GraphFunction,
    pub last_dt: f64,
    pub step_count: u64,
    eval: Evaluation,
}

impl FlowState {
    /// Validates `g` for the flow and caches its right-hand side.
    pub fn new(g: GraphFunction, spec: &FlowSpec) -> Result<Self> {
        let eval = evaluate(&g, spec)?;
        Ok(FlowState {
            t: 0.0,
            u: g,
            last_dt: 0.0,
            step_count: 0,
            eval,
        })
    }
}

fn check_hemisphere(g: &GraphFunction) -> Result<()> {
    match g
        .values()
        .iter()
        .enumerate()
        .find(|(_, u)| **u >= FRAC_PI_2)
    {
        Some((node, &value)) => Err(Error::Hemisphere { node, value }),
        None => Ok(()),
    }
}

fn evaluate(g: &GraphFunction, spec: &FlowSpec) -> Result<Evaluation> {
    let dim = g.grid().dim();
    let speed_fn = spec.speed_function();
    if spec.direction == Direction::Expanding {
        check_hemisphere(g)?;
    }
    let c = curvatures(g)?;
    let u = g.values();
    let mut rhs = Vec::with_capacity(u.len());
    let mut stiffness_scale = f64::INFINITY;
    let mut kmin = f64::INFINITY;
    let mut kmax = 0.0f64;
    let mut kappa = [0.0; MAX_DIM];
    let mut grad = [0.0; MAX_DIM];
    for j in 0..u.len() {
        let (kp, ko) = (c.profile[j], c.orbit[j]);
        kappa[0] = kp;
        kappa[1..dim].fill(ko);
        kmin = kmin.min(kp);
        kmax = kmax.max(kp);
        if dim > 1 {
            kmin = kmin.min(ko);
            kmax = kmax.max(ko);
        }
        let f = speed_fn.value_and_gradient_into(&kappa[..dim], &mut grad[..dim]);
        let gmax = grad[..dim].iter().fold(0.0f64, |m, g| m.max(*g));
        let v = c.v[j];
        let (speed, lambda) = match spec.direction {
            Direction::Contracting => (-f * v, gmax),
            Direction::Expanding => {
                if !(f > 0.0 && f.is_finite()) {
                    return Err(Error::Numeric(format!("F~ = {f} at node {j}")));
                }
                (v / f, gmax / (f * f))
            }
        };
        rhs.push(speed);
        let s = c.sin_u[j];
        stiffness_scale = stiffness_scale.min(s * s / (lambda * v));
    }
    Ok(Evaluation {
        rhs,
        stiffness_scale,
        pinch_ratio: kmax / kmin,
    })
}

/// `du/dt = -F(k) v` nodewise.
pub fn rhs_contracting(g: &GraphFunction, spec: &FunctionSpec) -> Result<Vec<f64>> {
    let fs = FlowSpec::new(
        Direction::Contracting,
        spec.clone(),
        StopRule::TimeReached(1.0),
    );
    spec.validate(g.grid().dim())?;
    Ok(evaluate(g, &fs)?.rhs)
}

/// `du/dt = v / F~(k)` nodewise, with `ftilde` the function evaluated on
/// the expanding hypersurface.
pub fn rhs_expanding(g: &GraphFunction, ftilde: &FunctionSpec) -> Result<Vec<f64>> {
    ftilde.validate(g.grid().dim())?;
    let fs = FlowSpec::new(
        Direction::Expanding,
        ftilde.canonical().inverse(),
        StopRule::TimeReached(1.0),
    );
    Ok(evaluate(g, &fs)?.rhs)
}

/// `dt = cfl h^2 min_j sin^2 u_j / (lambda_j v_j)`, clamped to
/// `[MIN_DT, MAX_DT]`. `lambda_j` is the largest derivative of the speed
/// with respect to a principal curvature.
pub fn adaptive_dt(state: &FlowState, spec: &FlowSpec) -> f64 {
    let h = state.u.grid().h();
    (spec.cfl * h * h * state.eval.stiffness_scale).clamp(MIN_DT, MAX_DT)
}

fn axpy(base: &[f64], dt: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(u, k)| u + dt * k).collect()
}

/// One classical Runge-Kutta step. The new state is validated (convexity,
/// hemisphere) by evaluating its right-hand side; any failure rejects the
/// step.
pub fn step_rk4(state: &FlowState, spec: &FlowSpec, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!(
            "time step must be positive, got {dt}"
        )));
    }
    let grid = *state.u.grid();
    let center = state.u.center();
    let u0 = state.u.values();
    let stage = |u: Vec<f64>| -> Result<Vec<f64>> {
        let g = GraphFunction::new(grid, u, center)?;
        Ok(evaluate(&g, spec)?.rhs)
    };
    let k1 = &state.eval.rhs;
    let k2 = stage(axpy(u0, 0.5 * dt, k1))?;
    let k3 = stage(axpy(u0, 0.5 * dt, &k2))?;
    let k4 = stage(axpy(u0, dt, &k3))?;
    let u1: Vec<f64> = (0..u0.len())
        .map(|j| u0[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect();
    let g = GraphFunction::new(grid, u1, center)?;
    let eval = evaluate(&g, spec)?;
    Ok(FlowState {
        t: state.t + dt,
        u: g,
        last_dt: dt,
        step_count: state.step_count + 1,
        eval,
    })
}

/// `Theta(t) = arccos exp(t - T*)`.
pub fn spherical_theta(t: f64, tstar: f64) -> Result<f64> {
    if !(t < tstar) {
        return Err(Error::Domain(format!(
            "t = {t} is not before extinction T* = {tstar}"
        )));
    }
    Ok((t - tstar).exp().acos())
}

/// Extinction time of the sphere of radius `r0`, `-log cos r0`.
pub fn spherical_tstar(r0: f64) -> f64 {
    -r0.cos().ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub graph: GraphFunction,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub direction: Direction,
    /// Strictly increasing in `t`; the first is the initial data, the last
    /// the final state.
    pub snapshots: Vec<Snapshot>,
    pub tstar_bracket: (f64, f64),
    pub tstar_est: f64,
    /// Accepted step sizes, in order.
    pub dts: Vec<f64>,
    /// `u_max` strictly decreasing (contracting) or `u_min` strictly
    /// increasing (expanding) over every accepted step.
    pub monotone: bool,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.snapshots.last().map_or(0.0, |s| s.t)
    }
}

/// Extinction bracket from the comparison spheres at time `t`:
/// `u_min <= Theta(t, T*) <= u_max` gives `T*` between `t - log cos u_min`
/// and `t - log cos u_max`. For an expanding hypersurface the dual radii
/// `pi/2 - u*` take the place of `u`.
pub fn tstar_bracket(g: &GraphFunction, t: f64, direction: Direction) -> (f64, f64) {
    match direction {
        Direction::Contracting => (t - g.u_min().cos().ln(), t - g.u_max().cos().ln()),
        Direction::Expanding => (t - g.u_max().sin().ln(), t - g.u_min().sin().ln()),
    }
}

fn stop_fired(state: &FlowState, stop: &StopRule) -> bool {
    match *stop {
        StopRule::MinRadiusBelow(eps) => state.u.u_min() < eps,
        StopRule::MaxRadiusAbove(val) => state.u.u_max() > val,
        StopRule::TimeReached(t) => state.t >= t,
        StopRule::PinchRatioAbove(val) => state.eval.pinch_ratio > val,
    }
}

fn advanced(previous: &GraphFunction, next: &GraphFunction, direction: Direction) -> bool {
    match direction {
        Direction::Contracting => next.u_max() < previous.u_max(),
        Direction::Expanding => next.u_min() > previous.u_min(),
    }
}

struct Recorder {
    direction: Direction,
    stride: usize,
    snapshots: Vec<Snapshot>,
    dts: Vec<f64>,
    monotone: bool,
}

impl Recorder {
    fn new(state: &FlowState, direction: Direction, stride: usize) -> Self {
        Recorder {
            direction,
            stride,
            snapshots: vec![Snapshot {
                t: state.t,
                graph: state.u.clone(),
            }],
            dts: Vec::new(),
            monotone: true,
        }
    }

    fn accept(&mut self, previous: &FlowState, next: &FlowState) {
        self.dts.push(next.last_dt);
        self.monotone &= advanced(&previous.u, &next.u, self.direction);
        if next.step_count.is_multiple_of(self.stride as u64) {
            self.snapshots.push(Snapshot {
                t: next.t,
                graph: next.u.clone(),
            });
        }
    }

    fn finish(mut self, state: &FlowState) -> Trajectory {
        if self.snapshots.last().map(|s| s.t) != Some(state.t) {
            self.snapshots.push(Snapshot {
                t: state.t,
                graph: state.u.clone(),
            });
        }
        let bracket = tstar_bracket(&state.u, state.t, self.direction);
        let (lo, hi) = (bracket.0.min(bracket.1), bracket.0.max(bracket.1));
        Trajectory {
            direction: self.direction,
            snapshots: self.snapshots,
            tstar_bracket: (lo, hi),
            tstar_est: 0.5 * (lo + hi),
            dts: self.dts,
            monotone: self.monotone,
        }
    }
}

/// Integrates until the stop rule fires, returning the trajectory recorded
/// so far together with the error that ended it early, if any.
pub fn run_partial(spec: &FlowSpec, g0: GraphFunction) -> (Option<Trajectory>, Option<Error>) {
    if let Err(e) = spec.validate(g0.grid().dim()) {
        return (None, Some(e));
    }
    let mut state = match FlowState::new(g0, spec) {
        Ok(s) => s,
        Err(e) => return (None, Some(e)),
    };
    let mut rec = Recorder::new(&state, spec.direction, spec.snapshot_stride);
    let mut failure = None;
    while !stop_fired(&state, &spec.stop) {
        if state.step_count >= MAX_STEPS {
            failure = Some(Error::Integrator {
                t: state.t,
                reason: format!("step budget of {MAX_STEPS} exhausted"),
            });
            break;
        }
        let mut dt = adaptive_dt(&state, spec);
        if let StopRule::TimeReached(t_end) = spec.stop {
            dt = dt.min(t_end - state.t);
        }
        let next = loop {
            match step_rk4(&state, spec, dt) {
                Ok(next) => break Ok(next),
                Err(e) => {
                    dt *= 0.5;
                    if dt < MIN_DT {
                        break Err(Error::Integrator {
                            t: state.t,
                            reason: format!("step rejected down to dt < {MIN_DT:e}: {e}"),
                        });
                    }
                }
            }
        };
        match next {
            Ok(next) => {
                rec.accept(&state, &next);
                state = next;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    (Some(rec.finish(&state)), failure)
}

/// Integrates with adaptive steps until the stop rule fires.
pub fn run(spec: &FlowSpec, g0: GraphFunction) -> Result<Trajectory> {
    match run_partial(spec, g0) {
        (Some(traj), None) => Ok(traj),
        (_, Some(e)) => Err(e),
        (None, None) => unreachable!("run_partial returns a trajectory or an error"),
    }
}

/// Integrates with a prescribed step sequence, snapshotting every
/// `spec.snapshot_stride` steps and at the end. The stop rule is ignored.
pub fn replay(spec: &FlowSpec, g0: GraphFunction, dts: &[f64]) -> Result<Trajectory> {
    spec.validate(g0.grid().dim())?;
    let mut state = FlowState::new(g0, spec)?;
    let mut rec = Recorder::new(&state, spec.direction, spec.snapshot_stride);
    for &dt in dts {
        let next = step_rk4(&state, spec, dt)?;
        rec.accept(&state, &next);
        state = next;
    }
    Ok(rec.finish(&state))
}

/// Outcome of running a contracting flow and the expanding flow of its
/// polar dual on the same time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DualReport {
    pub times: Vec<f64>,
    /// `max_theta |polar(M(t)) - M~(t)|` at each time.
    pub distances: Vec<f64>,
    pub max_d: f64,
    pub contracting: Trajectory,
    pub expanding: Trajectory,
}

fn tagged(flow: &'static str, t: f64) -> impl Fn(Error) -> Error {
    move |e| Error::Flow {
        flow,
        t,
        source: Box::new(e),
    }
}

/// Runs the contracting flow from `g0` under `spec.curvature` and the
/// expanding flow from its polar dual under speed `1 / F~`, replaying the
/// contracting step sequence, and measures how far the dual of the
/// contracting solution is from the expanding solution.
pub fn dual_run(spec: &FlowSpec, g0: GraphFunction) -> Result<DualReport> {
    if spec.direction != Direction::Contracting {
        return Err(Error::Argument(
            "dual_run starts from a contracting flow".into(),
        ));
    }
    let contracting = run(spec, g0.clone()).map_err(|e| match e {
        Error::Integrator { t, .. } | Error::Flow { t, .. } => tagged("contracting", t)(e),
        e => tagged("contracting", 0.0)(e),
    })?;
    let dual0 = polar_dual(&g0).map_err(tagged("dual", 0.0))?.dual;
    let expanding_spec = FlowSpec {
        direction: Direction::Expanding,
        ..spec.clone()
    };
    let expanding = replay(&expanding_spec, dual0, &contracting.dts).map_err(|e| {
        let t = match &e {
            Error::Integrator { t, .. } => *t,
            _ => f64::NAN,
        };
        tagged("expanding", t)(e)
    })?;
    if expanding.snapshots.len() != contracting.snapshots.len() {
        return Err(Error::Numeric(
            "snapshot grids of the two flows differ".into(),
        ));
    }
    let mut times = Vec::with_capacity(contracting.snapshots.len());
    let mut distances = Vec::with_capacity(contracting.snapshots.len());
    for (a, b) in contracting.snapshots.iter().zip(&expanding.snapshots) {
        let d = polar_dual(&a.graph)
            .and_then(|p| p.dual.max_distance(&b.graph))
            .map_err(tagged("dual", a.t))?;
        times.push(a.t);
        distances.push(d);
    }
    let max_d = distances.iter().copied().fold(0.0, f64::max);
    Ok(DualReport {
        times,
        distances,
        max_d,
        contracting,
        expanding,
    })
}
