//! Sampling of stable and tempered stable subordinators, first-passage
//! inversion for `E_λ(t) = inf{x > 0 : D_λ(x) > t}`, and the density of
//! `E_λ(t)` by quadrature.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01};
use serde::Serialize;

use crate::error::{require_nonnegative, require_positive, Error, Result};
use rayon::prelude::*;

use crate::quad::{composite_rule, integrate_breaks, Tolerance};
use crate::rng::{stream_rng, StreamRole};
use crate::special_fn::{check_beta, kanter_a, levy_tail, tempered_density, TemperedParams};

/// Proposals allowed for one tempered sub-increment before giving up.
const PROPOSAL_BUDGET: u64 = 1_000_000;
/// Default cap on the number of increments in a stored path.
pub const DEFAULT_MAX_STEPS: usize = 50_000_000;

/// One draw of `D(dx)` for the standard `β`-stable subordinator
/// (`E[e^{−sD(dx)}] = e^{−dx s^β}`), by Kanter's representation
/// `(A(πU)/E)^{(1−β)/β}` scaled by `dx^{1/β}`.
pub fn sample_stable_increment<R: Rng + ?Sized>(beta: f64, dx: f64, rng: &mut R) -> Result<f64> {
    check_beta(beta)?;
    require_positive("dx", dx)?;
    Ok(stable_draw(beta, dx.powf(1.0 / beta), rng))
}

#[inline]
fn stable_draw<R: Rng + ?Sized>(beta: f64, scale: f64, rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    let e: f64 = Exp1.sample(rng);
    scale * (kanter_a(beta, PI * u) / e).powf((1.0 - beta) / beta)
}

/// Running counts of the exponential-rejection sampler.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn merge(&mut self, other: &RejectionStats) {
        self.proposals += other.proposals;
        self.accepted += other.accepted;
    }
}

/// Draws increments `D_λ(dx)` by proposing stable increments and keeping
/// each with probability `e^{−λS}`. When `e^{−dx λ^β} < 0.1` the step is cut
/// into equal sub-steps, each with acceptance at least 0.1, and the accepted
/// sub-draws are summed.
#[derive(Debug, Clone, Copy)]
pub struct TemperedSampler {
    params: TemperedParams,
    dx: f64,
    sub_steps: usize,
    sub_scale: f64,
}

impl TemperedSampler {
    pub fn new(params: TemperedParams, dx: f64) -> Result<Self> {
        require_positive("dx", dx)?;
        let load = dx * params.lambda_pow_beta();
        let sub_steps = ((load / std::f64::consts::LN_10).ceil() as usize).max(1);
        let sub_dx = dx / sub_steps as f64;
        Ok(Self {
            params,
            dx,
            sub_steps,
            sub_scale: sub_dx.powf(1.0 / params.beta()),
        })
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn params(&self) -> &TemperedParams {
        &self.params
    }

    pub fn sub_steps(&self) -> usize {
        self.sub_steps
    }

    /// Acceptance probability of a single proposal, `e^{−(dx/sub_steps) λ^β}`.
    pub fn expected_acceptance(&self) -> f64 {
        (-(self.dx / self.sub_steps as f64) * self.params.lambda_pow_beta()).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, stats: &mut RejectionStats) -> Result<f64> {
        let (beta, lambda) = (self.params.beta(), self.params.lambda());
        let mut total = 0.0;
        for _ in 0..self.sub_steps {
            let mut tries = 0;
            loop {
                let s = stable_draw(beta, self.sub_scale, rng);
                stats.proposals += 1;
                tries += 1;
                let keep = lambda == 0.0 || rng.random::<f64>() < (-lambda * s).exp();
                if keep {
                    stats.accepted += 1;
                    total += s;
                    break;
                }
                if tries >= PROPOSAL_BUDGET {
                    return Err(Error::ProposalBudget { proposals: tries });
                }
            }
        }
        Ok(total)
    }
}

/// One draw of `D_λ(dx)`; see [`TemperedSampler`].
pub fn sample_tempered_increment<R: Rng + ?Sized>(params: &TemperedParams, dx: f64, rng: &mut R) -> Result<f64> {
    TemperedSampler::new(*params, dx)?.sample(rng, &mut RejectionStats::default())
}

/// Record `levels[k] = D_λ(k·dx)` of one subordinator path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubordinatorPath {
    pub dx: f64,
    pub levels: Vec<f64>,
    pub params: TemperedParams,
    pub seed: u64,
    pub stats: RejectionStats,
}

/// First-passage bracket of `E_λ(t)` on the path grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InverseSample {
    pub t: f64,
    pub e_lower: f64,
    pub e_upper: f64,
}

impl InverseSample {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.e_lower + self.e_upper)
    }
}

/// Operational-time midpoint `(k − ½)·dx` for first-passage index `k`. Shared
/// by every consumer so that comparisons against it are exact.
#[inline]
pub fn midpoint_of_index(k: usize, dx: f64) -> f64 {
    (k as f64 - 0.5) * dx
}

impl SubordinatorPath {
    pub fn last_level(&self) -> f64 {
        *self.levels.last().expect("path has at least one level")
    }

    /// Smallest `k` with `levels[k] > t`.
    pub fn first_passage_index(&self, t: f64) -> Result<usize> {
        let k = self.levels.partition_point(|&l| l <= t);
        if k >= self.levels.len() {
            return Err(Error::HorizonExceeded {
                t,
                last: self.last_level(),
            });
        }
        Ok(k)
    }

    pub fn inverse_at(&self, t: f64) -> Result<InverseSample> {
        require_nonnegative("t", t)?;
        let k = self.first_passage_index(t)?;
        Ok(InverseSample {
            t,
            e_lower: (k - 1) as f64 * self.dx,
            e_upper: k as f64 * self.dx,
        })
    }

    /// Writes the path as CSV with header `x,D_lambda_of_x`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,D_lambda_of_x")?;
        for (k, level) in self.levels.iter().enumerate() {
            writeln!(out, "{},{}", k as f64 * self.dx, level)?;
        }
        Ok(())
    }
}

/// Sums increments until the level first exceeds `t_horizon`; returns the
/// first-passage index. Levels are appended to `record` when given.
pub fn run_to_passage<R: Rng + ?Sized>(
    sampler: &TemperedSampler,
    t_horizon: f64,
    rng: &mut R,
    stats: &mut RejectionStats,
    mut record: Option<&mut Vec<f64>>,
    max_steps: usize,
) -> Result<usize> {
    let mut level = 0.0;
    if let Some(r) = record.as_deref_mut() {
        r.push(0.0);
    }
    let mut k = 0;
    while level <= t_horizon {
        if k >= max_steps {
            return Err(Error::StepCap(max_steps));
        }
        level += sampler.sample(rng, stats)?;
        k += 1;
        if let Some(r) = record.as_deref_mut() {
            r.push(level);
        }
    }
    Ok(k)
}

/// Builds path `path_index` of the family keyed by `seed`, until its last
/// level exceeds `t_horizon`.
pub fn build_path(
    params: &TemperedParams,
    dx: f64,
    t_horizon: f64,
    seed: u64,
    path_index: u64,
) -> Result<SubordinatorPath> {
    build_path_capped(params, dx, t_horizon, seed, path_index, DEFAULT_MAX_STEPS)
}

pub fn build_path_capped(
    params: &TemperedParams,
    dx: f64,
    t_horizon: f64,
    seed: u64,
    path_index: u64,
    max_steps: usize,
) -> Result<SubordinatorPath> {
    require_positive("t_horizon", t_horizon)?;
    let sampler = TemperedSampler::new(*params, dx)?;
    let mut rng = stream_rng(seed, path_index, StreamRole::Subordinator);
    let mut stats = RejectionStats::default();
    let mut levels = Vec::new();
    run_to_passage(&sampler, t_horizon, &mut rng, &mut stats, Some(&mut levels), max_steps)?;
    Ok(SubordinatorPath {
        dx,
        levels,
        params: *params,
        seed,
        stats,
    })
}

/// Density `g_λ(t, x) = ∫_0^t φ_λ(t − y, ∞) q_λ(y, x) dy` of `E_λ(t)` at `x`.
pub fn inverse_density_quadrature(params: &TemperedParams, t: f64, x: f64) -> Result<f64> {
    require_positive("t", t)?;
    require_positive("x", x)?;
    let mut failure = None;
    let mut product = |w: f64, y: f64| match (levy_tail(params, w), tempered_density(params, x, y)) {
        (Ok(a), Ok(b)) => a * b,
        (Err(e), _) | (_, Err(e)) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let half = 0.5 * t;
    let tol = Tolerance::new(1e-12, 1e-10).with_max_subdivisions(4000);

    // Near y = 0, q_λ(·, x) lives on the scale x^{1/β}.
    let scale = x.powf(1.0 / params.beta());
    let mut breaks = vec![0.0];
    breaks.extend(
        [0.02, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0]
            .iter()
            .map(|f| f * scale)
            .filter(|&y| y < half),
    );
    breaks.push(half);
    let head = integrate_breaks(|y| if y > 0.0 { product(t - y, y) } else { 0.0 }, &breaks, tol);

    // Near y = t, write t − y = v^p with p = 1/(1 − β) so the Jacobian
    // p v^{p−1} absorbs the (t − y)^{−β} singularity of φ_λ.
    let p = 1.0 / (1.0 - params.beta());
    let tail = integrate_breaks(
        |v| {
            let w = v.powf(p);
            if v > 0.0 {
                product(w, t - w) * p * v.powf(p - 1.0)
            } else {
                0.0
            }
        },
        &[0.0, half.powf(1.0 / p)],
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((head?.value + tail?.value).max(0.0))
}

/// Geometric panel breaks `[0, a, ra, r²a, …, b]`.
fn graded_breaks(a: f64, b: f64, ratio: f64) -> Vec<f64> {
    let mut breaks = vec![0.0, a];
    while *breaks.last().unwrap() * ratio < b {
        let next = breaks.last().unwrap() * ratio;
        breaks.push(next);
    }
    breaks.push(b);
    breaks
}

/// `∫_0^∞ ∫_0^∞ e^{−st−μx} g_λ(t, x) dx dt` for every pair in `s_values ×
/// mu_values` (row-major in `s`), by tensor Gauss quadrature of
/// [`inverse_density_quadrature`]. The x-rule at each t node is scaled to the
/// spread of `E_λ(t)`, and each density value is shared by all pairs.
pub fn double_laplace_of_density(params: &TemperedParams, s_values: &[f64], mu_values: &[f64]) -> Result<Vec<f64>> {
    for &s in s_values {
        require_positive("s", s)?;
    }
    for &mu in mu_values {
        require_positive("mu", mu)?;
    }
    let s_min = s_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mu_min = mu_values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !s_min.is_finite() || !mu_min.is_finite() {
        return Ok(Vec::new());
    }
    const ORDER: usize = 8;
    const CUTOFF: f64 = 36.0;
    let t_rule = composite_rule(&graded_breaks(1e-6, CUTOFF / s_min, 4.0), ORDER);
    let beta = params.beta();
    let rate = params.mean_rate();
    let rows = t_rule
        .par_iter()
        .map(|&(t, wt)| {
            // typical size of E_λ(t): t^β at short times, t/E[D_λ(1)] at long ones
            let spread = t.powf(beta) + if rate.is_finite() { t / rate } else { 0.0 };
            let x_max = (30.0 * spread).min(CUTOFF / mu_min);
            let x_rule = composite_rule(&graded_breaks(x_max / 2048.0, x_max, 2.0), ORDER);
            let mut inner = vec![0.0; mu_values.len()];
            for &(x, wx) in &x_rule {
                let g = inverse_density_quadrature(params, t, x)?;
                for (acc, &mu) in inner.iter_mut().zip(mu_values) {
                    *acc += wx * (-mu * x).exp() * g;
                }
            }
            Ok((t, wt, inner))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0; s_values.len() * mu_values.len()];
    for (i, &s) in s_values.iter().enumerate() {
        for (t, wt, inner) in &rows {
            let w = wt * (-s * t).exp();
            for (j, v) in inner.iter().enumerate() {
                out[i * mu_values.len() + j] += w * v;
            }
        }
    }
    Ok(out)
}
