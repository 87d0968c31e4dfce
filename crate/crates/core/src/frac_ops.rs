//! Riemann–Liouville and Caputo derivatives of order `β ∈ (0, 1)`, plain
//! and tempered, on uniformly sampled functions.
//!
//! The scheme is product integration against the piecewise-linear
//! interpolant of the samples (the L1 scheme). For an interpolant `ĝ`
//!
//! ```text
//! RL[ĝ](t_n) = ĝ(0) t_n^{−β}/Γ(1−β) + dt^{−β}/Γ(2−β) Σ_{i=1}^{n} b_{n−i} (g_i − g_{i−1}),
//! b_j = (j+1)^{1−β} − j^{1−β},
//! ```
//!
//! so Caputo = RL − g(0) t^{−β}/Γ(1−β) holds exactly on the grid. Solutions
//! of order-β problems carry a `t^β` singularity at the origin that limits L1
//! to first order near `t = 0`; [`L1Scheme::with_singular_exponents`] adds
//! starting weights that make the scheme exact on `t^σ` for the listed `σ`.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{invalid, require_positive, Result};
use crate::special_fn::{check_beta, levy_tail, TemperedParams};

/// Samples `values[i] = g(i·dt)` on a uniform grid starting at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    dt: f64,
    values: Vec<f64>,
    value_at_zero: Option<f64>,
}

impl SampledFunction {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        require_positive("dt", dt)?;
        if values.len() < 3 {
            return Err(invalid(
                "values",
                format!("need at least 3 samples, got {}", values.len()),
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("values", format!("sample {i} is not finite")));
        }
        Ok(Self {
            dt,
            values,
            value_at_zero: None,
        })
    }

    /// Samples `g` at `0, dt, …, (n−1)·dt`.
    pub fn from_fn<F: Fn(f64) -> f64>(dt: f64, n: usize, g: F) -> Result<Self> {
        Self::new(dt, (0..n).map(|i| g(i as f64 * dt)).collect())
    }

    /// Overrides `g(0)` in the Caputo initial-value term (defaults to `values[0]`).
    pub fn with_value_at_zero(mut self, g0: f64) -> Self {
        self.value_at_zero = Some(g0);
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn initial_value(&self) -> f64 {
        self.value_at_zero.unwrap_or(self.values[0])
    }

    fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }
}

/// Derivative values at nodes `1..n` (the origin is excluded).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeResult {
    pub dt: f64,
    pub values: Vec<f64>,
    pub scheme_order: f64,
}

impl DerivativeResult {
    /// Time of `values[k]`, i.e. `(k + 1)·dt`.
    pub fn time(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dt
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|k| self.time(k))
    }
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// L1 product-integration scheme for order `β`, optionally corrected for
/// singular exponents.
#[derive(Debug, Clone)]
pub struct L1Scheme {
    beta: f64,
    exponents: Vec<f64>,
}

impl L1Scheme {
    pub fn new(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(Self {
            beta,
            exponents: Vec::new(),
        })
    }

    /// Adds starting weights that make the RL operator exact on `t^σ` for
    /// each listed `σ > 0`. Keep the list short (three or fewer); the weights
    /// come from a Vandermonde-type solve.
    pub fn with_singular_exponents(mut self, exponents: &[f64]) -> Result<Self> {
        for &s in exponents {
            if !(s > 0.0 && s.is_finite()) {
                return Err(invalid("singular_exponents", format!("must be > 0, got {s}")));
            }
        }
        self.exponents = exponents.to_vec();
        Ok(self)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn weights(&self, n: usize) -> Vec<f64> {
        (0..n)
            .map(|j| {
                let j = j as f64;
                (j + 1.0).powf(1.0 - self.beta) - j.powf(1.0 - self.beta)
            })
            .collect()
    }

    /// Dimensionless starting weights `ω[k][j]` for node `k` and sample `j+1`.
    fn starting_weights(&self, n: usize, b: &[f64]) -> Vec<Vec<f64>> {
        let m = self.exponents.len();
        if m == 0 {
            return vec![Vec::new(); n];
        }
        let beta = self.beta;
        let g2 = gamma(2.0 - beta);
        let powers: Vec<Vec<f64>> = self
            .exponents
            .iter()
            .map(|&s| (0..n).map(|i| (i as f64).powf(s)).collect())
            .collect();
        (0..n)
            .into_par_iter()
            .map(|k| {
                if k == 0 {
                    return Vec::new();
                }
                let used = m.min(k);
                let mut rhs = vec![0.0; used];
                for (q, &s) in self.exponents.iter().take(used).enumerate() {
                    let p = &powers[q];
                    let mut acc = CompensatedSum::default();
                    for i in 1..=k {
                        acc.add(b[k - i] * (p[i] - p[i - 1]));
                    }
                    let exact = gamma(1.0 + s) / gamma(1.0 + s - beta) * (k as f64).powf(s - beta);
                    rhs[q] = exact - acc.value() / g2;
                }
                let mut mat: Vec<Vec<f64>> = (0..used).map(|q| (1..=used).map(|j| powers[q][j]).collect()).collect();
                solve_dense(&mut mat, &mut rhs);
                rhs
            })
            .collect()
    }

    /// RL derivative of `t ↦ e^{−λ(t_n − s)} g(s)` evaluated at every node `t_n`,
    /// i.e. `e^{−λt} D^β[e^{λs} g](t)` without forming `e^{λs}`.
    fn tilted_rl(&self, g: &SampledFunction, lambda: f64) -> Vec<f64> {
        let n = g.len();
        let beta = self.beta;
        let dt = g.dt;
        let b = self.weights(n);
        let omega = self.starting_weights(n, &b);
        let decay: Vec<f64> = (0..n).map(|m| (-lambda * dt * m as f64).exp()).collect();
        let (g1, g2) = (gamma(1.0 - beta), gamma(2.0 - beta));
        let scale = dt.powf(-beta);
        let v = &g.values;
        let g0 = g.initial_value();
        (1..n)
            .into_par_iter()
            .map(|k| {
                // G_i = e^{−λ(t_k − t_i)} g_i
                let tilt = |i: usize| decay[k - i] * v[i];
                let mut acc = CompensatedSum::default();
                for i in 1..=k {
                    acc.add(b[k - i] * (tilt(i) - tilt(i - 1)));
                }
                let mut corr = CompensatedSum::default();
                for (j, w) in omega[k].iter().enumerate() {
                    corr.add(w * (tilt(j + 1) - tilt(0)));
                }
                let t = g.time(k);
                let head = decay[k] * g0 * t.powf(-beta) / g1;
                head + scale * (acc.value() / g2 + corr.value())
            })
            .collect()
    }

    fn result(&self, g: &SampledFunction, values: Vec<f64>) -> DerivativeResult {
        DerivativeResult {
            dt: g.dt,
            values,
            scheme_order: 2.0 - self.beta,
        }
    }

    pub fn rl_derivative(&self, g: &SampledFunction) -> DerivativeResult {
        let v = self.tilted_rl(g, 0.0);
        self.result(g, v)
    }

    pub fn caputo_derivative(&self, g: &SampledFunction) -> DerivativeResult {
        let g1 = gamma(1.0 - self.beta);
        let g0 = g.initial_value();
        let v = self
            .tilted_rl(g, 0.0)
            .into_iter()
            .enumerate()
            .map(|(k, rl)| rl - g0 * g.time(k + 1).powf(-self.beta) / g1)
            .collect();
        self.result(g, v)
    }

    pub fn rl_tempered(&self, g: &SampledFunction, lambda: f64) -> Result<DerivativeResult> {
        let params = TemperedParams::new(self.beta, lambda)?;
        let lb = params.lambda_pow_beta();
        let v = self
            .tilted_rl(g, lambda)
            .into_iter()
            .enumerate()
            .map(|(k, rl)| rl - lb * g.values[k + 1])
            .collect();
        Ok(self.result(g, v))
    }

    pub fn caputo_tempered(&self, g: &SampledFunction, lambda: f64) -> Result<DerivativeResult> {
        let params = TemperedParams::new(self.beta, lambda)?;
        let g0 = g.initial_value();
        let mut out = self.rl_tempered(g, lambda)?;
        for (k, v) in out.values.iter_mut().enumerate() {
            *v -= g0 * levy_tail(&params, g.time(k + 1))?;
        }
        Ok(out)
    }
}

/// Gaussian elimination with partial pivoting; overwrites `rhs` with the solution.
fn solve_dense(mat: &mut [Vec<f64>], rhs: &mut [f64]) {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))
            .unwrap_or(col);
        mat.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..n {
            let f = mat[row][col] / mat[col][col];
            let (top, bottom) = mat.split_at_mut(row);
            for (r, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *r -= f * p;
            }
            rhs[row] -= f * rhs[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = rhs[col];
        for c in col + 1..n {
            s -= mat[col][c] * rhs[c];
        }
        rhs[col] = s / mat[col][col];
    }
}

/// Plain-L1 Riemann–Liouville derivative of order `beta`.
pub fn rl_derivative(g: &SampledFunction, beta: f64) -> Result<DerivativeResult> {
    Ok(L1Scheme::new(beta)?.rl_derivative(g))
}

/// Plain-L1 Caputo derivative, computed as RL minus the initial-value term.
pub fn caputo_derivative(g: &SampledFunction, beta: f64) -> Result<DerivativeResult> {
    Ok(L1Scheme::new(beta)?.caputo_derivative(g))
}

/// `e^{−λt} D^β[e^{λs} g(s)](t) − λ^β g(t)`.
pub fn rl_tempered(g: &SampledFunction, params: &TemperedParams) -> Result<DerivativeResult> {
    L1Scheme::new(params.beta())?.rl_tempered(g, params.lambda())
}

/// Tempered RL derivative minus `g(0) φ_λ(t, ∞)`.
pub fn caputo_tempered(g: &SampledFunction, params: &TemperedParams) -> Result<DerivativeResult> {
    L1Scheme::new(params.beta())?.caputo_tempered(g, params.lambda())
}
