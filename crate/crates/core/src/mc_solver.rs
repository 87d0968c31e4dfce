//! Monte Carlo solution `u(t, x) = E_x[f(X(E_λ(t))) I(τ_D(X) > E_λ(t))]`:
//! a killed diffusion with generator `Δ`, run for an operational time drawn
//! from an independent inverse tempered stable subordinator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Result};
use crate::pde_series::{IntervalDomain, SolutionEstimate};
use crate::rng::{stream_rng, StreamRole};
use crate::special_fn::TemperedParams;
use crate::subordinator::{midpoint_of_index, run_to_passage, RejectionStats, TemperedSampler, DEFAULT_MAX_STEPS};

/// Paths per deterministic reduction block.
const BLOCK: u64 = 1024;
/// Above this value of `d₁d₂/ds` the bridge exit probability is below `e^{−40}`.
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: u64,
    pub dx_subordinator: f64,
    pub ds_diffusion: f64,
    pub seed: u64,
    #[serde(default = "default_bridge")]
    pub bridge_correction: bool,
}

fn default_bridge() -> bool {
    true
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dx_subordinator: 1e-3,
            ds_diffusion: 1e-4,
            seed: 0,
            bridge_correction: true,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 {
            return Err(invalid("n_paths", "must be at least 1"));
        }
        require_positive("dx_subordinator", self.dx_subordinator)?;
        require_positive("ds_diffusion", self.ds_diffusion)
    }
}

/// End state of one killed diffusion path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KilledPathOutcome {
    /// `None` when the path was killed.
    pub terminal_position: Option<Vec<f64>>,
    /// Operational time at which the walk stopped (the kill time or the horizon).
    pub operational_time_used: f64,
}

impl KilledPathOutcome {
    pub fn killed(&self) -> bool {
        self.terminal_position.is_none()
    }
}

/// Euler walk with `N(0, 2h)` increments per axis over `[0, horizon]`, step
/// `ds` (the last step may be shorter). A path dies at the first step that
/// lands outside the closed domain, or with the Brownian-bridge probability
/// `exp(−d₁d₂/h)` per wall when `bridge_correction` is on.
pub fn simulate_killed_path<R: Rng + ?Sized>(
    x0: &[f64],
    domain: &IntervalDomain,
    horizon: f64,
    cfg: &McConfig,
    rng: &mut R,
) -> Result<KilledPathOutcome> {
    if !domain.contains_open(x0) {
        return Err(invalid("x0", format!("{x0:?} is not strictly inside the domain")));
    }
    require_nonnegative("horizon", horizon)?;
    require_positive("ds_diffusion", cfg.ds_diffusion)?;
    let mut x = x0.to_vec();
    let steps = (horizon / cfg.ds_diffusion).ceil() as u64;
    for i in 0..steps {
        let h = if i + 1 == steps {
            horizon - (steps - 1) as f64 * cfg.ds_diffusion
        } else {
            cfg.ds_diffusion
        };
        let sd = (2.0 * h).sqrt();
        let mut alive = true;
        for (xi, &m) in x.iter_mut().zip(domain.lengths()) {
            let z: f64 = rng.sample(StandardNormal);
            let next = *xi + sd * z;
            if next <= 0.0 || next >= m {
                alive = false;
            } else if cfg.bridge_correction {
                let lo = *xi * next / h;
                let hi = (m - *xi) * (m - next) / h;
                let survive = if lo < BRIDGE_CUTOFF { -(-lo).exp_m1() } else { 1.0 }
                    * if hi < BRIDGE_CUTOFF { -(-hi).exp_m1() } else { 1.0 };
                if survive < 1.0 && rng.random::<f64>() >= survive {
                    alive = false;
                }
            }
            *xi = next;
        }
        if !alive {
            let elapsed = if i + 1 == steps {
                horizon
            } else {
                ((i + 1) as f64 * cfg.ds_diffusion).min(horizon)
            };
            return Ok(KilledPathOutcome {
                terminal_position: None,
                operational_time_used: elapsed,
            });
        }
    }
    Ok(KilledPathOutcome {
        terminal_position: Some(x),
        operational_time_used: horizon,
    })
}

/// The clock driving the diffusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeChange {
    /// `E_λ(t)`, simulated by first passage of a tempered stable subordinator.
    Inverse(TemperedParams),
    /// `E(t) = t`, the classical killed heat semigroup.
    Identity,
}

/// Estimate plus diagnostics from [`estimate_u_detailed`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub estimate: SolutionEstimate,
    pub n_paths: u64,
    pub survived: u64,
    /// Paths where `I(τ_D(X) > E_λ(t))` and `I(τ_D(X(E_λ)) > t)` disagree.
    pub indicator_mismatches: u64,
    pub mean_operational_time: f64,
    pub rejection: RejectionStats,
}

#[derive(Default, Clone, Copy)]
struct Block {
    sum: f64,
    sum_sq: f64,
    survived: u64,
    mismatches: u64,
    clock: f64,
    rejection: RejectionStats,
}

impl Block {
    fn absorb(&mut self, other: &Block) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self.survived += other.survived;
        self.mismatches += other.mismatches;
        self.clock += other.clock;
        self.rejection.merge(&other.rejection);
    }
}

/// Monte Carlo estimate of `u(t, x0)` with standard error.
pub fn estimate_u<F>(
    f: F,
    x0: &[f64],
    t: f64,
    time_change: TimeChange,
    domain: &IntervalDomain,
    cfg: &McConfig,
) -> Result<SolutionEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    estimate_u_detailed(f, x0, t, time_change, domain, cfg).map(|r| r.estimate)
}

/// As [`estimate_u`], also reporting survival counts, the per-path check of
/// the two indicator forms, and sampler statistics. Paths are reduced in
/// fixed blocks in index order, so results do not depend on thread count.
pub fn estimate_u_detailed<F>(
    f: F,
    x0: &[f64],
    t: f64,
    time_change: TimeChange,
    domain: &IntervalDomain,
    cfg: &McConfig,
) -> Result<McReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    require_positive("t", t)?;
    if !domain.contains_open(x0) {
        return Err(invalid("x0", format!("{x0:?} is not strictly inside the domain")));
    }
    let sampler = match time_change {
        TimeChange::Inverse(p) => Some(TemperedSampler::new(p, cfg.dx_subordinator)?),
        TimeChange::Identity => None,
    };
    let n_blocks = cfg.n_paths.div_ceil(BLOCK);
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Block::default();
            let mut levels = Vec::new();
            for path in b * BLOCK..((b + 1) * BLOCK).min(cfg.n_paths) {
                let (score, survived, mismatch, clock) = one_path(
                    &f,
                    x0,
                    t,
                    sampler.as_ref(),
                    domain,
                    cfg,
                    path,
                    &mut levels,
                    &mut acc.rejection,
                )?;
                acc.sum += score;
                acc.sum_sq += score * score;
                acc.survived += survived as u64;
                acc.mismatches += mismatch as u64;
                acc.clock += clock;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<Block>>>()?;
    let mut total = Block::default();
    for b in &blocks {
        total.absorb(b);
    }
    let n = cfg.n_paths as f64;
    let mean = total.sum / n;
    let var = if cfg.n_paths > 1 {
        ((total.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McReport {
        estimate: SolutionEstimate::monte_carlo(mean, (var / n).sqrt()),
        n_paths: cfg.n_paths,
        survived: total.survived,
        indicator_mismatches: total.mismatches,
        mean_operational_time: total.clock / n,
        rejection: total.rejection,
    })
}

#[allow(clippy::too_many_arguments)]
fn one_path<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    t: f64,
    sampler: Option<&TemperedSampler>,
    domain: &IntervalDomain,
    cfg: &McConfig,
    path: u64,
    levels: &mut Vec<f64>,
    stats: &mut RejectionStats,
) -> Result<(f64, bool, bool, f64)> {
    let (clock, k) = match sampler {
        Some(s) => {
            let mut rng = stream_rng(cfg.seed, path, StreamRole::Subordinator);
            levels.clear();
            let k = run_to_passage(s, t, &mut rng, stats, Some(levels), DEFAULT_MAX_STEPS)?;
            (midpoint_of_index(k, cfg.dx_subordinator), k)
        }
        None => (t, 0),
    };
    let mut rng = stream_rng(cfg.seed, path, StreamRole::Diffusion);
    let outcome = simulate_killed_path(x0, domain, clock, cfg, &mut rng)?;
    let survived = !outcome.killed();

    // Clock-time form: the time-changed path exits at the first clock time
    // whose operational midpoint reaches the kill time.
    let survived_clock = match (sampler, outcome.killed()) {
        (Some(_), true) => {
            let s_kill = outcome.operational_time_used;
            let k_star = (1..=k)
                .find(|&j| midpoint_of_index(j, cfg.dx_subordinator) >= s_kill)
                .unwrap_or(k + 1);
            levels.get(k_star - 1).is_some_and(|&exit_clock| exit_clock > t)
        }
        (None, killed) => !killed,
        (Some(_), false) => true,
    };
    let score = outcome.terminal_position.as_deref().map_or(0.0, f);
    Ok((score, survived, survived != survived_clock, clock))
}
