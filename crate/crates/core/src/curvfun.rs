//! Symmetric curvature functions on the positive cone.
//!
//! Every function here is symmetric, monotone and homogeneous of degree one,
//! normalized so that `F(1, ..., 1) = 1`. Values, gradients and Hessians are
//! exact: derivatives of the elementary symmetric polynomials come from the
//! deleted-variable recurrence `dE_k/dk_i = E_{k-1}(k | i)`, and the
//! composite functions (roots, quotients, inverses) are differentiated by the
//! chain rule.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::AuditRng;

/// Largest supported hypersurface dimension.
pub const MAX_DIM: usize = 8;

/// Null band for the strict concavity classification, relative to the
/// spectral radius of the Hessian.
pub const CONCAVITY_TOL: f64 = 1e-8;

/// Sample count for the pinching constant calibration.
pub const PINCH_CALIBRATION_SAMPLES: usize = 10_000;

/// A point of the positive cone: principal curvatures, all strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureVector(Vec<f64>);

impl CurvatureVector {
    pub fn new(kappa: Vec<f64>) -> Result<Self> {
        if kappa.is_empty() || kappa.len() > MAX_DIM {
            return Err(Error::Argument(format!(
                "dimension {} outside 1..={MAX_DIM}",
                kappa.len()
            )));
        }
        if let Some((i, &k)) = kappa
            .iter()
            .enumerate()
            .find(|(_, k)| !(k.is_finite() && **k > 0.0))
        {
            return Err(Error::Domain(format!(
                "kappa[{i}] = {k} is not inside the positive cone"
            )));
        }
        Ok(CurvatureVector(kappa))
    }

    pub fn from_slice(kappa: &[f64]) -> Result<Self> {
        Self::new(kappa.to_vec())
    }

    /// The umbilic point `(c, ..., c)`.
    pub fn umbilic(n: usize, c: f64) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|k| k * lambda).collect())
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn norm2(&self) -> f64 {
        self.0.iter().map(|k| k * k).sum()
    }
}

/// Declarative description of a curvature function.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionSpec {
    /// `H / n`.
    MeanNormalized,
    /// `sigma_k = H_k^{1/k}` with normalized `H_k`.
    SigmaK(usize),
    /// `Q_k = H_{k+1} / H_k`.
    QuotientQ(usize),
    /// `F~(k) = 1 / F(1/k)`.
    Inverse(Box<FunctionSpec>),
}

impl FunctionSpec {
    /// The inverse function. Inverting an inverse returns the inner function.
    pub fn inverse(self) -> FunctionSpec {
        match self {
            FunctionSpec::Inverse(inner) => *inner,
            other => FunctionSpec::Inverse(Box::new(other)),
        }
    }

    /// Collapses nested inverses so that at most one level remains.
    pub fn canonical(&self) -> FunctionSpec {
        match self {
            FunctionSpec::Inverse(inner) => match inner.canonical() {
                FunctionSpec::Inverse(f) => *f,
                f => FunctionSpec::Inverse(Box::new(f)),
            },
            f => f.clone(),
        }
    }

    pub fn is_inverse(&self) -> bool {
        matches!(self.canonical(), FunctionSpec::Inverse(_))
    }

    /// Checks the order parameter against the ambient dimension.
    pub fn validate(&self, n: usize) -> Result<()> {
        if n == 0 || n > MAX_DIM {
            return Err(Error::Argument(format!(
                "dimension {n} outside 1..={MAX_DIM}"
            )));
        }
        match self {
            FunctionSpec::MeanNormalized => Ok(()),
            FunctionSpec::SigmaK(k) if (2..=n).contains(k) => Ok(()),
            FunctionSpec::SigmaK(k) => Err(Error::Argument(format!(
                "sigma_{k} needs 2 <= k <= n = {n}"
            ))),
            FunctionSpec::QuotientQ(k) if *k >= 1 && *k < n => Ok(()),
            FunctionSpec::QuotientQ(k) => Err(Error::Argument(format!(
                "Q_{k} needs 1 <= k <= n - 1 = {}",
                n as i64 - 1
            ))),
            FunctionSpec::Inverse(inner) => inner.validate(n),
        }
    }

    /// Value only. No validation: callers on hot paths have already checked
    /// the spec and the cone membership.
    pub fn value(&self, kappa: &[f64]) -> f64 {
        match self {
            FunctionSpec::MeanNormalized => kappa.iter().sum::<f64>() / kappa.len() as f64,
            FunctionSpec::SigmaK(k) => {
                let hk = elem_sym_raw(kappa, *k, &[]) / binomial(kappa.len(), *k);
                hk.powf(1.0 / *k as f64)
            }
            FunctionSpec::QuotientQ(k) => {
                let n = kappa.len();
                let num = elem_sym_raw(kappa, k + 1, &[]) / binomial(n, k + 1);
                let den = elem_sym_raw(kappa, *k, &[]) / binomial(n, *k);
                num / den
            }
            FunctionSpec::Inverse(inner) => {
                let y: Vec<f64> = kappa.iter().map(|k| 1.0 / k).collect();
                1.0 / inner.value(&y)
            }
        }
    }

    /// Value and gradient, without the Hessian.
    pub fn value_and_gradient(&self, kappa: &[f64]) -> (f64, Vec<f64>) {
        let mut grad = vec![0.0; kappa.len()];
        let value = self.value_and_gradient_into(kappa, &mut grad);
        (value, grad)
    }

    /// As [`FunctionSpec::value_and_gradient`], writing the gradient into
    /// `grad` (of the same length as `kappa`) without allocating.
    pub fn value_and_gradient_into(&self, kappa: &[f64], grad: &mut [f64]) -> f64 {
        let n = kappa.len();
        match self {
            FunctionSpec::MeanNormalized => {
                grad.fill(1.0 / n as f64);
                kappa.iter().sum::<f64>() / n as f64
            }
            FunctionSpec::SigmaK(k) => {
                let h = hk_value_gradient(kappa, *k, grad);
                let p = 1.0 / *k as f64;
                let value = if *k == 2 { h.sqrt() } else { h.powf(p) };
                let scale = p * value / h;
                grad.iter_mut().for_each(|g| *g *= scale);
                value
            }
            FunctionSpec::QuotientQ(k) => {
                let mut bot_grad = [0.0; MAX_DIM];
                let top = hk_value_gradient(kappa, k + 1, grad);
                let bot = hk_value_gradient(kappa, *k, &mut bot_grad[..n]);
                let value = top / bot;
                for i in 0..n {
                    grad[i] = (grad[i] - value * bot_grad[i]) / bot;
                }
                value
            }
            FunctionSpec::Inverse(inner) => {
                let mut y = [0.0; MAX_DIM];
                for i in 0..n {
                    y[i] = 1.0 / kappa[i];
                }
                let value = 1.0 / inner.value_and_gradient_into(&y[..n], grad);
                let v2 = value * value;
                for i in 0..n {
                    grad[i] *= y[i] * y[i] * v2;
                }
                value
            }
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FunctionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionSpec::MeanNormalized => write!(f, "mean"),
            FunctionSpec::SigmaK(k) => write!(f, "sigma{k}"),
            FunctionSpec::QuotientQ(k) => write!(f, "quotient{k}"),
            FunctionSpec::Inverse(inner) => write!(f, "inv_{inner}"),
        }
    }
}

/// Exact value, gradient and Hessian of a curvature function at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

/// Eigen-structure of the Hessian at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcavityVerdict {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub null_multiplicity: usize,
    pub is_strictly_concave_at_point: bool,
    /// `kappa / |kappa|`, the direction homogeneity forces into the kernel.
    pub null_direction: Vec<f64>,
    /// `|D^2F kappa| / (|D^2F| |kappa|)`.
    pub null_residual: f64,
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Unnormalized elementary symmetric polynomial of order `k` over the
/// variables whose indices are not in `excluded`.
fn elem_sym_raw(kappa: &[f64], k: usize, excluded: &[usize]) -> f64 {
    let skip_a = excluded.first().copied().unwrap_or(usize::MAX);
    let skip_b = excluded.get(1).copied().unwrap_or(usize::MAX);
    let mut e = [0.0f64; MAX_DIM + 1];
    e[0] = 1.0;
    let mut count = 0;
    for (i, &x) in kappa.iter().enumerate() {
        if i == skip_a || i == skip_b {
            continue;
        }
        count += 1;
        for j in (1..=count.min(k)).rev() {
            e[j] += x * e[j - 1];
        }
    }
    if k > count {
        0.0
    } else {
        e[k]
    }
}

/// Normalized elementary symmetric polynomial `H_k = E_k / C(n, k)`.
pub fn elem_sym(kappa: &CurvatureVector, k: usize) -> Result<f64> {
    let n = kappa.dim();
    if k > n {
        return Err(Error::Argument(format!("order {k} exceeds dimension {n}")));
    }
    Ok(elem_sym_raw(kappa.as_slice(), k, &[]) / binomial(n, k))
}

/// Unnormalized elementary symmetric polynomial of order `k` in the
/// variables that remain after deleting `excluded` (at most two indices).
pub fn elem_sym_deleted(kappa: &CurvatureVector, k: usize, excluded: &[usize]) -> Result<f64> {
    let n = kappa.dim();
    if excluded.len() > 2 {
        return Err(Error::Argument(format!(
            "at most two deleted indices, got {}",
            excluded.len()
        )));
    }
    if let Some(i) = excluded.iter().find(|&&i| i >= n) {
        return Err(Error::Argument(format!(
            "index {i} out of range for n = {n}"
        )));
    }
    if excluded.len() == 2 && excluded[0] == excluded[1] {
        return Err(Error::Argument("deleted indices must be distinct".into()));
    }
    if k > n {
        return Err(Error::Argument(format!("order {k} exceeds dimension {n}")));
    }
    Ok(elem_sym_raw(kappa.as_slice(), k, excluded))
}

/// Fills the upper triangle from `entry` and mirrors it.
fn symmetric(n: usize, mut entry: impl FnMut(usize, usize) -> f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let e = entry(i, j);
            m[(i, j)] = e;
            m[(j, i)] = e;
        }
    }
    m
}

struct Jet {
    value: f64,
    gradient: Vec<f64>,
    hessian: Option<DMatrix<f64>>,
}

fn hk_value_gradient(kappa: &[f64], k: usize, grad: &mut [f64]) -> f64 {
    let c = binomial(kappa.len(), k);
    for (i, g) in grad.iter_mut().enumerate() {
        *g = if k == 0 {
            0.0
        } else {
            elem_sym_raw(kappa, k - 1, &[i]) / c
        };
    }
    elem_sym_raw(kappa, k, &[]) / c
}

/// Normalized `H_k` with exact derivatives.
fn hk_jet(kappa: &[f64], k: usize, want_hessian: bool) -> Jet {
    let n = kappa.len();
    let c = binomial(n, k);
    let value = elem_sym_raw(kappa, k, &[]) / c;
    let gradient = if k == 0 {
        vec![0.0; n]
    } else {
        (0..n)
            .map(|i| elem_sym_raw(kappa, k - 1, &[i]) / c)
            .collect()
    };
    let hessian = want_hessian.then(|| {
        let mut h = DMatrix::zeros(n, n);
        if k >= 2 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let e = elem_sym_raw(kappa, k - 2, &[i, j]) / c;
                    h[(i, j)] = e;
                    h[(j, i)] = e;
                }
            }
        }
        h
    });
    Jet {
        value,
        gradient,
        hessian,
    }
}

fn jet(spec: &FunctionSpec, kappa: &[f64], want_hessian: bool) -> Jet {
    let n = kappa.len();
    match spec {
        FunctionSpec::MeanNormalized => Jet {
            value: kappa.iter().sum::<f64>() / n as f64,
            gradient: vec![1.0 / n as f64; n],
            hessian: want_hessian.then(|| DMatrix::zeros(n, n)),
        },
        FunctionSpec::SigmaK(k) => {
            let h = hk_jet(kappa, *k, want_hessian);
            let p = 1.0 / *k as f64;
            let value = h.value.powf(p);
            // d(H^p) = p H^{p-1} dH
            let scale = p * value / h.value;
            let gradient: Vec<f64> = h.gradient.iter().map(|g| scale * g).collect();
            let hessian = h.hessian.map(|hh| {
                let q = (p - 1.0) / h.value;
                symmetric(n, |i, j| {
                    scale * (hh[(i, j)] + q * h.gradient[i] * h.gradient[j])
                })
            });
            Jet {
                value,
                gradient,
                hessian,
            }
        }
        FunctionSpec::QuotientQ(k) => {
            let top = hk_jet(kappa, k + 1, want_hessian);
            let bot = hk_jet(kappa, *k, want_hessian);
            let value = top.value / bot.value;
            let gradient: Vec<f64> = (0..n)
                .map(|i| (top.gradient[i] - value * bot.gradient[i]) / bot.value)
                .collect();
            let hessian = match (top.hessian, bot.hessian) {
                (Some(ht), Some(hb)) => Some(symmetric(n, |i, j| {
                    (ht[(i, j)]
                        - value * hb[(i, j)]
                        - gradient[i] * bot.gradient[j]
                        - bot.gradient[i] * gradient[j])
                        / bot.value
                })),
                _ => None,
            };
            Jet {
                value,
                gradient,
                hessian,
            }
        }
        FunctionSpec::Inverse(inner) => {
            let y: Vec<f64> = kappa.iter().map(|k| 1.0 / k).collect();
            let f = jet(inner, &y, want_hessian);
            let value = 1.0 / f.value;
            let v2 = value * value;
            // G_i = F_i(y) y_i^2 / F^2
            let gradient: Vec<f64> = (0..n).map(|i| f.gradient[i] * y[i] * y[i] * v2).collect();
            let hessian = f.hessian.map(|fh| {
                symmetric(n, |i, j| {
                    let yy = y[i] * y[i] * y[j] * y[j];
                    let mut g = 2.0 * v2 * value * f.gradient[i] * f.gradient[j] * yy
                        - v2 * fh[(i, j)] * yy;
                    if i == j {
                        g -= 2.0 * v2 * f.gradient[i] * y[i] * y[i] * y[i];
                    }
                    g
                })
            });
            Jet {
                value,
                gradient,
                hessian,
            }
        }
    }
}

/// Exact value, gradient and Hessian.
pub fn evaluate(spec: &FunctionSpec, kappa: &CurvatureVector) -> Result<EvalResult> {
    let spec = spec.canonical();
    spec.validate(kappa.dim())?;
    let j = jet(&spec, kappa.as_slice(), true);
    if !j.value.is_finite() || j.value <= 0.0 {
        return Err(Error::Numeric(format!("{spec} evaluated to {}", j.value)));
    }
    Ok(EvalResult {
        value: j.value,
        gradient: j.gradient,
        hessian: j.hessian.expect("hessian requested"),
    })
}

fn spectral_radius(eigenvalues: &[f64]) -> f64 {
    eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()))
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = m
        .clone()
        .try_symmetric_eigen(1e-15, 10_000)
        .ok_or_else(|| Error::Numeric("symmetric eigensolver did not converge".into()))?;
    let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if ev.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Classifies the Hessian spectrum. An eigenvalue is null when
/// `|lambda| <= tol * spectral radius`; strict concavity means exactly one
/// null eigenvalue and all others below `-tol * spectral radius`.
pub fn check_strict_concavity(
    spec: &FunctionSpec,
    kappa: &CurvatureVector,
    tol: f64,
) -> Result<ConcavityVerdict> {
    if !(tol > 0.0) {
        return Err(Error::Argument(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let eval = evaluate(spec, kappa)?;
    let eigenvalues = sorted_eigenvalues(&eval.hessian)?;
    let band = tol * spectral_radius(&eigenvalues);
    let null_multiplicity = eigenvalues.iter().filter(|e| e.abs() <= band).count();
    let others_negative = eigenvalues
        .iter()
        .filter(|e| e.abs() > band)
        .all(|&e| e < -band);
    let norm = kappa.norm2().sqrt();
    let null_direction: Vec<f64> = kappa.as_slice().iter().map(|k| k / norm).collect();
    let hk = &eval.hessian * nalgebra::DVector::from_column_slice(kappa.as_slice());
    let hnorm = eval.hessian.norm();
    let null_residual = if hnorm > 0.0 {
        hk.norm() / (hnorm * norm)
    } else {
        0.0
    };
    Ok(ConcavityVerdict {
        eigenvalues,
        null_multiplicity,
        is_strictly_concave_at_point: null_multiplicity == 1 && others_negative,
        null_direction,
        null_residual,
    })
}

/// Residual of the concavity inequality for `H_{k+1}`:
/// `(1 - 1/(k+1)) H^{-1} (DH . xi)^2 - xi^T D^2H xi`, nonnegative, and
/// positive unless `xi` is parallel to `kappa` (for `k >= 1`).
pub fn check_ineq_371(kappa: &CurvatureVector, k: usize, xi: &[f64]) -> Result<f64> {
    let n = kappa.dim();
    if k + 1 > n {
        return Err(Error::Argument(format!(
            "order k + 1 = {} exceeds n = {n}",
            k + 1
        )));
    }
    if xi.len() != n {
        return Err(Error::Argument(format!(
            "xi has length {}, expected {n}",
            xi.len()
        )));
    }
    if xi.iter().all(|x| *x == 0.0) {
        return Err(Error::Argument("xi must be nonzero".into()));
    }
    let m = k + 1;
    let h = hk_jet(kappa.as_slice(), m, true);
    let hess = h.hessian.expect("hessian requested");
    let d: f64 = h.gradient.iter().zip(xi).map(|(g, x)| g * x).sum();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += hess[(i, j)] * xi[i] * xi[j];
        }
    }
    Ok((1.0 - 1.0 / m as f64) * d * d / h.value - quad)
}

/// The class-(K) defect matrix `F^{-1} F_i F_j - F_i / kappa_j delta_ij - F_ij`,
/// positive semidefinite for inverse functions.
#[allow(non_snake_case)]
pub fn check_classK_bound(spec: &FunctionSpec, kappa: &CurvatureVector) -> Result<DMatrix<f64>> {
    let spec = spec.canonical();
    match &spec {
        FunctionSpec::Inverse(inner)
            if matches!(
                **inner,
                FunctionSpec::SigmaK(_) | FunctionSpec::MeanNormalized
            ) => {}
        other => {
            return Err(Error::Argument(format!(
                "class (K) bound is only asserted for inverse sigma_k, got {other}"
            )))
        }
    }
    let eval = evaluate(&spec, kappa)?;
    let n = kappa.dim();
    let k = kappa.as_slice();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut v = eval.gradient[i] * eval.gradient[j] / eval.value - eval.hessian[(i, j)];
            if i == j {
                v -= eval.gradient[i] / k[j];
            }
            m[(i, j)] = v;
        }
    }
    // exact symmetrization; the two halves differ only by rounding
    let mt = m.transpose();
    Ok((m + mt) * 0.5)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    Ok(sorted_eigenvalues(m)?[0])
}

/// `Z = F tr(A^3) - |A|^2 F^{ij} h_ki h^k_j` in the diagonal frame.
pub fn pinch_z(spec: &FunctionSpec, kappa: &[f64]) -> f64 {
    let (f, grad) = spec.canonical().value_and_gradient(kappa);
    let cube: f64 = kappa.iter().map(|k| k * k * k).sum();
    let a2: f64 = kappa.iter().map(|k| k * k).sum();
    let weighted: f64 = grad.iter().zip(kappa).map(|(g, k)| g * k * k).sum();
    f * cube - a2 * weighted
}

/// `H^2 sum_{i<j} (k_i - k_j)^2`.
fn pinch_scale(kappa: &[f64]) -> f64 {
    let h: f64 = kappa.iter().sum();
    let mut s = 0.0;
    for i in 0..kappa.len() {
        for j in (i + 1)..kappa.len() {
            s += (kappa[i] - kappa[j]).powi(2);
        }
    }
    h * h * s
}

fn is_pinched(kappa: &[f64], eps0: f64) -> bool {
    let h: f64 = kappa.iter().sum();
    kappa.iter().all(|k| *k >= eps0 * h)
}

type CalibrationKey = (FunctionSpec, usize, u64);

fn calibration_cache() -> &'static Mutex<HashMap<CalibrationKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<CalibrationKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `eps^2` for the pinching estimate `Z >= 2 eps^2 H^2 sum (k_i - k_j)^2`,
/// taken as a quarter of the smallest sampled ratio over the pinched set.
pub fn pinch_epsilon_sq(spec: &FunctionSpec, n: usize, eps0: f64) -> Result<f64> {
    let spec = spec.canonical();
    spec.validate(n)?;
    if !(eps0 > 0.0) || eps0 * n as f64 >= 1.0 {
        return Err(Error::Argument(format!(
            "pinching constant {eps0} must lie in (0, 1/n)"
        )));
    }
    let key = (spec.clone(), n, eps0.to_bits());
    let mut cache = calibration_cache()
        .lock()
        .expect("calibration cache poisoned");
    if let Some(e) = cache.get(&key) {
        return Ok(*e);
    }
    let mut rng = AuditRng::seeded(0x5eed_c0de ^ n as u64);
    let mut min_ratio = f64::INFINITY;
    for _ in 0..PINCH_CALIBRATION_SAMPLES {
        let kappa = rng.pinched(n, eps0);
        let scale = pinch_scale(&kappa);
        if scale <= 1e-12 {
            continue;
        }
        min_ratio = min_ratio.min(pinch_z(&spec, &kappa) / scale);
    }
    if !min_ratio.is_finite() || min_ratio <= 0.0 {
        return Err(Error::Numeric(format!(
            "pinching calibration for {spec} produced {min_ratio}"
        )));
    }
    let eps_sq = 0.25 * min_ratio;
    cache.insert(key, eps_sq);
    Ok(eps_sq)
}

/// Returns `(Z, 2 eps^2 H^2 sum_{i<j} (k_i - k_j)^2)` at a pinched point.
#[allow(non_snake_case)]
pub fn check_pinch_Z(
    spec: &FunctionSpec,
    kappa: &CurvatureVector,
    eps0: f64,
) -> Result<(f64, f64)> {
    let k = kappa.as_slice();
    if !is_pinched(k, eps0) {
        return Err(Error::Precondition(format!(
            "curvatures {k:?} are not pinched with eps0 = {eps0}"
        )));
    }
    let eps_sq = pinch_epsilon_sq(spec, kappa.dim(), eps0)?;
    Ok((pinch_z(spec, k), 2.0 * eps_sq * pinch_scale(k)))
}

/// `(|A|^2 - n F^2) / (|A|^2 - H^2/n)`; `None` at umbilic points.
pub fn reverse_pinch_ratio(spec: &FunctionSpec, kappa: &CurvatureVector) -> Option<f64> {
    let k = kappa.as_slice();
    let n = k.len() as f64;
    let f = spec.canonical().value(k);
    let a2 = kappa.norm2();
    let h: f64 = k.iter().sum();
    let tracefree = a2 - h * h / n;
    (tracefree > 1e-12 * a2).then(|| (a2 - n * f * f) / tracefree)
}

/// `sum_i (k_i - n F F_i)^2 / sum_{i<j} (k_i - k_j)^2`; `None` at umbilic
/// points.
pub fn weingarten_deviation_ratio(spec: &FunctionSpec, kappa: &CurvatureVector) -> Option<f64> {
    let k = kappa.as_slice();
    let n = k.len() as f64;
    let (f, grad) = spec.canonical().value_and_gradient(k);
    let num: f64 = k
        .iter()
        .zip(&grad)
        .map(|(ki, gi)| (ki - n * f * gi).powi(2))
        .sum();
    let mut den = 0.0;
    for i in 0..k.len() {
        for j in (i + 1)..k.len() {
            den += (k[i] - k[j]).powi(2);
        }
    }
    (den > 1e-12 * kappa.norm2()).then(|| num / den)
}

const FD1: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
const FD2: [(f64, f64); 5] = [
    (-2.0, -1.0),
    (-1.0, 16.0),
    (0.0, -30.0),
    (1.0, 16.0),
    (2.0, -1.0),
];

/// Fourth-order central finite differences of the value alone. Test oracle
/// for [`evaluate`].
pub fn fd_oracle(spec: &FunctionSpec, kappa: &CurvatureVector, h: f64) -> Result<EvalResult> {
    let spec = spec.canonical();
    spec.validate(kappa.dim())?;
    let k = kappa.as_slice();
    let n = k.len();
    if !(h > 0.0) || k.iter().any(|x| *x <= 2.0 * h) {
        return Err(Error::Domain(format!(
            "stencil of width 2h = {} leaves the positive cone at {k:?}",
            2.0 * h
        )));
    }
    let f = |p: &[f64]| spec.value(p);
    let shifted = |moves: &[(usize, f64)]| {
        let mut p = k.to_vec();
        for &(i, d) in moves {
            p[i] += d;
        }
        f(&p)
    };
    let gradient: Vec<f64> = (0..n)
        .map(|i| {
            FD1.iter()
                .map(|&(s, c)| c * shifted(&[(i, s * h)]))
                .sum::<f64>()
                / (12.0 * h)
        })
        .collect();
    let mut hessian = DMatrix::zeros(n, n);
    for i in 0..n {
        hessian[(i, i)] = FD2
            .iter()
            .map(|&(s, c)| c * shifted(&[(i, s * h)]))
            .sum::<f64>()
            / (12.0 * h * h);
        for j in (i + 1)..n {
            let mut acc = 0.0;
            for &(si, ci) in &FD1 {
                for &(sj, cj) in &FD1 {
                    acc += ci * cj * shifted(&[(i, si * h), (j, sj * h)]);
                }
            }
            let v = acc / (144.0 * h * h);
            hessian[(i, j)] = v;
            hessian[(j, i)] = v;
        }
    }
    Ok(EvalResult {
        value: f(k),
        gradient,
        hessian,
    })
}
