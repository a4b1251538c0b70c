//! Seeded sampling for audits.
//!
//! The generator is xoshiro256++ seeded through splitmix64, so a seed gives
//! the same stream on every platform and toolchain.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

pub struct AuditRng(Xoshiro256PlusPlus);

impl AuditRng {
    pub fn seeded(seed: u64) -> Self {
        AuditRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.gen::<f64>()
    }

    /// `n` values log-uniform in `[lo, hi]`.
    pub fn log_uniform(&mut self, n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let (a, b) = (lo.ln(), hi.ln());
        (0..n).map(|_| self.uniform(a, b).exp()).collect()
    }

    /// Standard normal by Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1: f64 = 1.0 - self.0.gen::<f64>();
        let u2: f64 = self.0.gen::<f64>();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// A point with `sum k = 1` and `k_i >= eps0`, uniform on that simplex.
    pub fn pinched(&mut self, n: usize, eps0: f64) -> Vec<f64> {
        let w: Vec<f64> = (0..n).map(|_| -(1.0 - self.0.gen::<f64>()).ln()).collect();
        let s: f64 = w.iter().sum();
        let free = 1.0 - n as f64 * eps0;
        w.iter().map(|x| eps0 + free * x / s).collect()
    }
}
