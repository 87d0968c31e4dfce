//! Scalar special functions of the tempered stable model: Laplace symbol,
//! Lévy tail, stable and tempered-stable densities, the relaxation function
//! `ǧ_λ(t, μ) = E[exp(-μ E_λ(t))]` with its time derivative, and a
//! Mittag-Leffler evaluator for the untempered case.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur, ln_gamma};

use crate::error::{invalid, require_nonnegative, require_positive, Error, Result};
use crate::laplace::{talbot_invert, DEFAULT_NODES};
use crate::quad::{integrate_breaks, integrate_to_infinity, Tolerance};

/// Order `β ∈ (0, 1)` and tempering rate `λ ≥ 0` of the tempered stable
/// subordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTemperedParams")]
pub struct TemperedParams {
    beta: f64,
    lambda: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTemperedParams {
    beta: f64,
    lambda: f64,
}

impl TryFrom<RawTemperedParams> for TemperedParams {
    type Error = Error;
    fn try_from(raw: RawTemperedParams) -> Result<Self> {
        TemperedParams::new(raw.beta, raw.lambda)
    }
}

impl TemperedParams {
    pub fn new(beta: f64, lambda: f64) -> Result<Self> {
        check_beta(beta)?;
        require_nonnegative("lambda", lambda)?;
        Ok(Self { beta, lambda })
    }

    pub fn untempered(beta: f64) -> Result<Self> {
        Self::new(beta, 0.0)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `λ^β`, zero in the untempered case.
    pub fn lambda_pow_beta(&self) -> f64 {
        if self.lambda == 0.0 {
            0.0
        } else {
            self.lambda.powf(self.beta)
        }
    }

    /// Mean of `D_λ(1)`, i.e. `ψ_λ'(0) = β λ^{β-1}`; infinite when `λ = 0`.
    pub fn mean_rate(&self) -> f64 {
        if self.lambda == 0.0 {
            f64::INFINITY
        } else {
            self.beta * self.lambda.powf(self.beta - 1.0)
        }
    }
}

pub(crate) fn check_beta(beta: f64) -> Result<()> {
    if beta.is_finite() && beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(invalid("beta", format!("must lie in (0, 1), got {beta}")))
    }
}

/// Arguments of the relaxation function `ǧ_λ(t, μ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationQuery {
    pub params: TemperedParams,
    pub mu: f64,
    pub t: f64,
}

impl RelaxationQuery {
    pub fn new(params: TemperedParams, mu: f64, t: f64) -> Result<Self> {
        require_positive("mu", mu)?;
        require_nonnegative("t", t)?;
        Ok(Self { params, mu, t })
    }

    pub fn at_time(&self, t: f64) -> Result<Self> {
        Self::new(self.params, self.mu, t)
    }

    /// False when `μ = λ^β` (to a relative 1e-12), where the cut integral and
    /// the pole residue merge. Values there are still computed by continuity.
    pub fn is_off_critical_rate(&self) -> bool {
        let lb = self.params.lambda_pow_beta();
        (self.mu - lb).abs() > 1e-12 * self.mu.max(lb)
    }
}

/// `ψ_λ(s) = (s + λ)^β − λ^β`.
pub fn laplace_symbol(params: &TemperedParams, s: f64) -> Result<f64> {
    require_nonnegative("s", s)?;
    let (b, l) = (params.beta, params.lambda);
    if l == 0.0 {
        return Ok(s.powf(b));
    }
    // λ^β ((1 + s/λ)^β − 1) without cancellation for small s.
    Ok(l.powf(b) * (b * (s / l).ln_1p()).exp_m1())
}

/// Principal-branch symbol for complex `s`; used by Laplace-domain oracles.
pub fn laplace_symbol_complex(params: &TemperedParams, s: Complex64) -> Complex64 {
    (s + params.lambda).powf(params.beta) - params.lambda_pow_beta()
}

/// Tail `φ_λ(t, ∞) = Γ(1−β)^{-1} ∫_t^∞ e^{−λr} β r^{−β−1} dr` of the Lévy measure.
pub fn levy_tail(params: &TemperedParams, t: f64) -> Result<f64> {
    require_positive("t", t)?;
    let (b, l) = (params.beta, params.lambda);
    let g1 = gamma(1.0 - b);
    if l == 0.0 {
        return Ok(t.powf(-b) / g1);
    }
    let x = l * t;
    if x <= 1.0 {
        // β λ^β Γ(−β, x) = λ^β (x^{−β} e^{−x} − Γ(1−β, x))
        Ok(t.powf(-b) * (-x).exp() / g1 - l.powf(b) * gamma_ur(1.0 - b, x))
    } else {
        Ok(b * l.powf(b) * upper_gamma_cf(-b, x)? / g1)
    }
}

/// Γ(a, x) for x > 1 by the Lentz continued fraction; valid for negative `a`.
fn upper_gamma_cf(a: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok((-x + a * x.ln()).exp() * h);
        }
    }
    Err(Error::NonConvergence {
        what: "incomplete gamma continued fraction",
        detail: format!("a={a}, x={x}"),
    })
}

/// `k(t) = e^{−λt} t^{β−1} Γ(1−β) / (π sin βπ)`, the envelope of `|∂_t ǧ| / μ`.
pub fn kernel_bound(params: &TemperedParams, t: f64) -> Result<f64> {
    require_positive("t", t)?;
    let b = params.beta;
    Ok((-t * params.lambda).exp() * t.powf(b - 1.0) * gamma(1.0 - b) / (PI * (b * PI).sin()))
}

fn check_density_args(beta: f64, x: f64, t: f64) -> Result<()> {
    check_beta(beta)?;
    require_positive("x", x)?;
    require_positive("t", t)
}

/// Density at `t` of `D(x)`, the standard `β`-stable subordinator at
/// operational time `x` (Laplace transform `exp(−x s^β)`).
pub fn stable_density(beta: f64, x: f64, t: f64) -> Result<f64> {
    check_density_args(beta, x, t)?;
    let scale = x.powf(-1.0 / beta);
    let z = t * scale;
    let f1 = if beta == 0.5 {
        levy_half_density(z)
    } else {
        standard_stable_density_integral(beta, z)?
    };
    Ok(scale * f1)
}

/// Closed form of the standardized density for `β = 1/2`.
pub fn levy_half_density(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    z.powf(-1.5) * (-0.25 / z).exp() / (2.0 * PI.sqrt())
}

fn kanter_log_a(beta: f64, theta: f64) -> f64 {
    let p = beta / (1.0 - beta);
    p * (beta * theta).sin().ln() + ((1.0 - beta) * theta).sin().ln() - ((theta).sin().ln()) / (1.0 - beta)
}

/// Kanter's function `A(θ) = sin(βθ)^{β/(1−β)} sin((1−β)θ) / sin(θ)^{1/(1−β)}`,
/// increasing on `(0, π)`.
pub fn kanter_a(beta: f64, theta: f64) -> f64 {
    kanter_log_a(beta, theta).exp()
}

/// Standardized one-sided stable density `f_1(z)` through the single-integral
/// representation `f_1(z) = (β/(1−β)) z^{−1/(1−β)} π^{−1} ∫_0^π A(θ) exp(−A(θ) z^{−β/(1−β)}) dθ`.
pub fn standard_stable_density_integral(beta: f64, z: f64) -> Result<f64> {
    check_beta(beta)?;
    if !z.is_finite() || z <= 0.0 {
        return Ok(0.0);
    }
    if let Some(v) = stable_upper_tail_series(beta, z) {
        return Ok(v);
    }
    let p = beta / (1.0 - beta);
    let ln_w = -p * z.ln();
    let w = ln_w.exp();
    let ln_pref = (beta / (1.0 - beta)).ln() - z.ln() / (1.0 - beta) - PI.ln();
    let integrand = |theta: f64| {
        let ln_a = kanter_log_a(beta, theta);
        let arg = ln_pref + ln_a - w * ln_a.exp();
        if arg < -745.0 {
            0.0
        } else {
            arg.exp()
        }
    };
    // The integrand peaks where A(θ) w = 1; split there.
    // Otherwise it is largest at θ = 0 and decays once A(θ) w exceeds A(0) w by
    // a few units.
    let solve = |target: f64| {
        let (mut lo, mut hi) = (1e-12, PI - 1e-12);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if kanter_log_a(beta, mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let ln_a0 = kanter_log_a(beta, 1e-12);
    let mut breaks = vec![0.0];
    if ln_a0 < -ln_w {
        breaks.push(solve(-ln_w));
    } else {
        let cut = solve((ln_a0.exp() + 40.0 / w).ln());
        breaks.extend([cut / 16.0, cut / 4.0, cut]);
    }
    breaks.retain(|&b| b == 0.0 || (b > 1e-9 && b < PI - 1e-9));
    breaks.push(PI);
    let value = match integrate_breaks(integrand, &breaks, Tolerance::new(1e-300, 1e-11)) {
        Ok(r) => r.value,
        // Far tails lose a few digits to roundoff in the exponent.
        Err(Error::Quadrature { estimate, error, .. }) if error <= 1e-6 * estimate.abs() => estimate,
        Err(e) => return Err(e),
    };
    Ok(value.max(0.0))
}

/// Convergent expansion `f_1(z) = π^{-1} Σ_{k≥1} (−1)^{k+1} Γ(βk+1)/k! sin(πβk) z^{−βk−1}`,
/// used where `z^{−β} < 0.05` so a handful of terms suffice.
fn stable_upper_tail_series(beta: f64, z: f64) -> Option<f64> {
    let u = z.powf(-beta);
    if u >= 0.05 {
        return None;
    }
    let mut sum = 0.0;
    let mut upow = 1.0;
    for k in 1..60 {
        upow *= u;
        let kf = k as f64;
        let mag = (ln_gamma(beta * kf + 1.0) - ln_gamma(kf + 1.0)).exp() * upow;
        let term = mag * (PI * beta * kf).sin();
        sum += if k % 2 == 1 { term } else { -term };
        if mag < 1e-17 * sum.abs() {
            return Some(sum / (PI * z));
        }
    }
    None
}

/// Density `q_λ(t, x) = f_x(t) e^{−λt + xλ^β}` of the tempered subordinator `D_λ(x)`.
pub fn tempered_density(params: &TemperedParams, x: f64, t: f64) -> Result<f64> {
    let f = stable_density(params.beta, x, t)?;
    if params.lambda == 0.0 || f == 0.0 {
        return Ok(f);
    }
    Ok((f.ln() - params.lambda * t + x * params.lambda_pow_beta()).exp())
}

/// `Φ(r, 1)` of the real-line representation of `ǧ_λ`.
pub fn phi_integrand(query: &RelaxationQuery, r: f64) -> Result<f64> {
    require_positive("r", r)?;
    Ok(phi_raw(query.params.beta, query.mu - query.params.lambda_pow_beta(), r))
}

#[inline]
fn phi_raw(beta: f64, shift: f64, r: f64) -> f64 {
    let (s, c) = (beta * PI).sin_cos();
    let rb = r.powf(beta);
    let im = rb * s;
    let re = shift + rb * c;
    im / (im * im + re * re)
}

/// Decomposition of `ǧ_λ(t, μ)` into its branch-cut integral and the pole
/// residue that appears when `μ < λ^β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxationParts {
    pub value: f64,
    pub cut_integral: f64,
    pub pole_residue: f64,
    pub abs_error: f64,
}

const RELAX_ABS_TOL: f64 = 1e-9;

/// Real pole of `G_λ(s, μ)` in `(−λ, 0)`, present iff `μ < λ^β`.
fn real_pole(params: &TemperedParams, mu: f64) -> Option<f64> {
    let shift = mu - params.lambda_pow_beta();
    (shift < 0.0).then(|| (-shift).powf(1.0 / params.beta) - params.lambda)
}

fn pole_residue(params: &TemperedParams, mu: f64, t: f64) -> f64 {
    match real_pole(params, mu) {
        Some(s0) if s0 < 0.0 => {
            mu * (s0 * t).exp() * (s0 + params.lambda).powf(1.0 - params.beta) / (params.beta * -s0)
        }
        _ => 0.0,
    }
}

/// Integrates `weight(r) Φ(r)` over `(0, ∞)` with the split at
/// `r* = max(1, 1/t)`. `weight` receives `r`.
fn cut_integral<W: Fn(f64) -> f64>(query: &RelaxationQuery, weight: W, abs_tol: f64) -> Result<(f64, f64)> {
    let b = query.params.beta;
    let l = query.params.lambda;
    let t = query.t;
    let shift = query.mu - query.params.lambda_pow_beta();
    let r_split = 1.0f64.max(1.0 / t);
    let mut breaks = vec![0.0];
    let c = (b * PI).cos();
    if shift != 0.0 && c != 0.0 && shift.signum() != c.signum() {
        let peak = (shift.abs() / c.abs()).powf(1.0 / b);
        if peak < r_split {
            breaks.push(peak);
        }
    }
    if shift.abs() < 1e-3 {
        // Near μ = λ^β the integrand behaves like r^{−β} close to the origin.
        let knee = (shift.abs().max(1e-12)).powf(1.0 / b);
        if knee < breaks[breaks.len() - 1].max(r_split) && knee > 0.0 {
            breaks.insert(1, knee);
        }
    }
    breaks.push(r_split);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let tol = Tolerance::new(0.5 * abs_tol, 1e-13).with_max_subdivisions(4000);
    let inner = integrate_breaks(|r| weight(r) * phi_raw(b, shift, r), &breaks, tol)?;
    // Tail in u = t (r + λ): the integrand carries e^{−u}.
    let u0 = t * (r_split + l);
    let tail = integrate_to_infinity(
        |u| {
            let r = u / t - l;
            weight(r) * phi_raw(b, shift, r) / t
        },
        u0,
        tol,
    )?;
    Ok((inner.value + tail.value, inner.abs_error + tail.abs_error))
}

/// `ǧ_λ(t, μ)` with its components.
pub fn relaxation_parts(query: &RelaxationQuery) -> Result<RelaxationParts> {
    if query.t == 0.0 {
        return Ok(RelaxationParts {
            value: 1.0,
            cut_integral: 1.0 - pole_residue(&query.params, query.mu, 0.0),
            pole_residue: pole_residue(&query.params, query.mu, 0.0),
            abs_error: 0.0,
        });
    }
    let (l, t, mu) = (query.params.lambda, query.t, query.mu);
    let scale = mu / PI;
    let (cut, err) = cut_integral(query, |r| (-t * (r + l)).exp() / (r + l), RELAX_ABS_TOL / scale)?;
    let residue = pole_residue(&query.params, mu, t);
    let value = (scale * cut + residue).clamp(0.0, 1.0);
    Ok(RelaxationParts {
        value,
        cut_integral: scale * cut,
        pole_residue: residue,
        abs_error: scale * err,
    })
}

/// `ǧ_λ(t, μ) = E[exp(−μ E_λ(t))]`, the temporal eigenfunction of the
/// Caputo tempered derivative. Clamped to `[0, 1]`.
pub fn relaxation(query: &RelaxationQuery) -> Result<f64> {
    Ok(relaxation_parts(query)?.value)
}

/// `∂_t ǧ_λ(t, μ)` by differentiating under the integral; `t = 0` is rejected.
pub fn relaxation_dt(query: &RelaxationQuery) -> Result<f64> {
    require_positive("t", query.t)?;
    let (l, t, mu) = (query.params.lambda, query.t, query.mu);
    let scale = mu / PI;
    // Tolerance relative to the envelope μ k(t).
    let envelope = mu * kernel_bound(&query.params, t)?;
    let tol = (1e-10 * envelope).max(1e-300) / scale;
    let (cut, _) = cut_integral(query, |r| (-t * (r + l)).exp(), tol)?;
    let residue_dt = match real_pole(&query.params, mu) {
        Some(s0) if s0 < 0.0 => s0 * pole_residue(&query.params, mu, t),
        _ => 0.0,
    };
    Ok(-scale * cut + residue_dt)
}

/// Laplace transform `G_λ(s, μ) = ψ_λ(s) / (s (μ + ψ_λ(s)))` of `t ↦ ǧ_λ(t, μ)`.
pub fn relaxation_transform(params: &TemperedParams, mu: f64, s: f64) -> Result<f64> {
    require_positive("s", s)?;
    let psi = laplace_symbol(params, s)?;
    Ok(psi / (s * (mu + psi)))
}

/// Mittag-Leffler function `E_β(z) = Σ z^n / Γ(1 + βn)` on the non-positive
/// real axis, `β ∈ (0, 1]`.
pub fn mittag_leffler(beta: f64, z: f64) -> Result<f64> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(invalid("beta", format!("must lie in (0, 1], got {beta}")));
    }
    if !z.is_finite() || z > 0.0 {
        return Err(invalid("z", format!("must be finite and <= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if beta == 1.0 {
        return Ok(z.exp());
    }
    if -z <= 5.0 {
        if let Some(v) = ml_series(beta, z) {
            return Ok(v);
        }
    }
    let x = -z;
    let v = talbot_invert(|s| s.powf(beta - 1.0) / (s.powf(beta) + x), 1.0, DEFAULT_NODES);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonConvergence {
            what: "Mittag-Leffler contour inversion",
            detail: format!("beta={beta}, z={z}"),
        })
    }
}

/// Power series, used only when its largest term stays below 1e4 (bounded
/// cancellation) and it converges within 200 terms.
fn ml_series(beta: f64, z: f64) -> Option<f64> {
    const MAX_TERMS: usize = 200;
    let ln_x = (-z).ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for n in 0..MAX_TERMS {
        let ln_term = n as f64 * ln_x - ln_gamma(1.0 + beta * n as f64);
        if ln_term > 4.0 * std::f64::consts::LN_10 {
            return None;
        }
        let mag = ln_term.exp();
        let term = if n % 2 == 0 { mag } else { -mag };
        // Neumaier summation
        let tsum = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - tsum) + term;
        } else {
            comp += (term - tsum) + sum;
        }
        sum = tsum;
        // Past the peak the terms decay super-geometrically; the next term
        // bounds the remainder once the ratio drops below 1/2.
        let ln_next = (n + 1) as f64 * ln_x - ln_gamma(1.0 + beta * (n + 1) as f64);
        if ln_next < ln_term - LN_2 && ln_next.exp() < 1e-17 {
            return Some(sum + comp);
        }
    }
    None
}

const LN_2: f64 = std::f64::consts::LN_2;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(beta: f64, lambda: f64) -> TemperedParams {
        TemperedParams::new(beta, lambda).unwrap()
    }

    #[test]
    fn params_reject_boundaries() {
        assert!(TemperedParams::new(0.0, 1.0).is_err());
        assert!(TemperedParams::new(1.0, 1.0).is_err());
        assert!(TemperedParams::new(0.5, -1.0).is_err());
        assert!(TemperedParams::new(0.5, 0.0).is_ok());
    }

    #[test]
    fn params_deserialize_validates() {
        let ok: TemperedParams = serde_json::from_str(r#"{"beta":0.4,"lambda":1}"#).unwrap();
        assert_eq!(ok.beta(), 0.4);
        assert!(serde_json::from_str::<TemperedParams>(r#"{"beta":1.4,"lambda":1}"#).is_err());
    }

    #[test]
    fn laplace_symbol_examples() {
        assert_abs_diff_eq!(laplace_symbol(&p(0.5, 1.0), 3.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(laplace_symbol(&p(0.3, 2.0), 0.0).unwrap(), 0.0);
        // 2^0.7 = exp(0.7 ln 2)
        assert_abs_diff_eq!(
            laplace_symbol(&p(0.7, 0.0), 2.0).unwrap(),
            1.624_504_792_712_471,
            epsilon = 1e-14
        );
        assert!(laplace_symbol(&p(0.5, 1.0), -1.0).is_err());
    }

    #[test]
    fn levy_tail_untempered_closed_form() {
        let q = p(0.5, 0.0);
        assert_abs_diff_eq!(levy_tail(&q, 1.0).unwrap(), 1.0 / PI.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(levy_tail(&q, 4.0).unwrap(), 0.5 / PI.sqrt(), epsilon = 1e-14);
        assert!(levy_tail(&q, 0.0).is_err());
    }

    #[test]
    fn levy_tail_matches_direct_quadrature() {
        for &(b, l) in &[(0.5, 1.0), (0.3, 2.0), (0.8, 0.5)] {
            let q = p(b, l);
            for &t in &[0.05, 0.7, 1.0, 3.0, 12.0] {
                let direct = crate::quad::integrate_to_infinity(
                    |r| (-l * r).exp() * b * r.powf(-b - 1.0),
                    t,
                    Tolerance::new(1e-300, 1e-12),
                )
                .unwrap()
                .value
                    / gamma(1.0 - b);
                let v = levy_tail(&q, t).unwrap();
                assert!(
                    (v - direct).abs() <= 1e-10 * direct,
                    "b={b} l={l} t={t}: {v} vs {direct}"
                );
            }
        }
        let v = levy_tail(&p(0.5, 1.0), 1.0).unwrap();
        assert!(v > 0.0 && v < 1.0 / PI.sqrt());
    }

    #[test]
    fn kernel_bound_examples() {
        let k0 = 1.0 / PI.sqrt();
        assert_abs_diff_eq!(kernel_bound(&p(0.5, 0.0), 1.0).unwrap(), k0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            kernel_bound(&p(0.5, 1.0), 1.0).unwrap(),
            k0 * (-1.0f64).exp(),
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(kernel_bound(&p(0.5, 0.0), 4.0).unwrap(), k0 / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn stable_density_half_closed_form() {
        let v = stable_density(0.5, 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, (-0.25f64).exp() / (2.0 * PI.sqrt()), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.219_695_644_733_861, epsilon = 1e-12);
        let v2 = stable_density(0.5, 2.0, 1.0).unwrap();
        assert_abs_diff_eq!(v2, 2.0 * (-1.0f64).exp() / (2.0 * PI.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn zolotarev_integral_matches_half_closed_form() {
        for &z in &[0.01, 0.1, 0.5, 1.0, 3.0, 40.0, 1e3, 1e6] {
            let a = standard_stable_density_integral(0.5, z).unwrap();
            let b = levy_half_density(z);
            assert!((a - b).abs() <= 1e-9 * b + 1e-300, "z={z}: {a} vs {b}");
        }
    }

    #[test]
    fn stable_density_integrates_to_one() {
        for &b in &[0.3, 0.5, 0.8] {
            let r = crate::quad::integrate_breaks(
                |t| stable_density(b, 1.0, t).unwrap(),
                &[0.0, 0.1, 1.0, 10.0],
                Tolerance::new(1e-11, 1e-11),
            )
            .unwrap()
            .value
                + integrate_to_infinity(
                    |t| stable_density(b, 1.0, t).unwrap(),
                    10.0,
                    Tolerance::new(1e-11, 1e-11),
                )
                .unwrap()
                .value;
            assert!((r - 1.0).abs() < 1e-7, "beta={b}: {r}");
        }
    }

    #[test]
    fn tempered_density_tilts() {
        assert_eq!(
            tempered_density(&p(0.5, 0.0), 1.0, 1.0).unwrap(),
            stable_density(0.5, 1.0, 1.0).unwrap()
        );
        assert_abs_diff_eq!(
            tempered_density(&p(0.5, 1.0), 1.0, 1.0).unwrap(),
            stable_density(0.5, 1.0, 1.0).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn tempered_density_laplace_transform() {
        for &(b, l, x, s) in &[(0.5, 1.0, 1.0, 1.0), (0.7, 2.0, 0.5, 0.3), (0.3, 0.5, 2.0, 2.0)] {
            let q = p(b, l);
            let f = |t: f64| (-s * t).exp() * tempered_density(&q, x, t).unwrap();
            let tol = Tolerance::new(1e-12, 1e-12);
            let v = crate::quad::integrate_breaks(f, &[0.0, 0.01, 0.1, 1.0, 10.0], tol)
                .unwrap()
                .value
                + integrate_to_infinity(f, 10.0, tol).unwrap().value;
            let expect = (-x * laplace_symbol(&q, s).unwrap()).exp();
            assert!((v - expect).abs() < 1e-6, "{b} {l} {x} {s}: {v} vs {expect}");
        }
    }

    #[test]
    fn phi_examples_and_bound() {
        let q = RelaxationQuery::new(p(0.5, 0.0), 1.0, 1.0).unwrap();
        assert_abs_diff_eq!(phi_integrand(&q, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        // β=0.7, λ=1, μ=2, r=0.5 by direct arithmetic
        let q = RelaxationQuery::new(p(0.7, 1.0), 2.0, 1.0).unwrap();
        let (s, c) = ((0.7 * PI).sin(), (0.7 * PI).cos());
        let rb = 0.5f64.powf(0.7);
        let expect = rb * s / (rb * rb * s * s + (2.0 - 1.0 + rb * c).powi(2));
        assert_abs_diff_eq!(phi_integrand(&q, 0.5).unwrap(), expect, epsilon = 1e-15);
        assert!(phi_integrand(&q, 0.0).is_err());
    }

    #[test]
    fn relaxation_is_one_at_origin() {
        for &(b, l, mu) in &[(0.5, 1.0, 2.0), (0.3, 2.0, 0.7), (0.8, 0.0, 5.0)] {
            let q = RelaxationQuery::new(p(b, l), mu, 0.0).unwrap();
            assert_eq!(relaxation(&q).unwrap(), 1.0);
        }
    }

    #[test]
    fn relaxation_untempered_is_mittag_leffler() {
        let q = RelaxationQuery::new(p(0.5, 0.0), 1.0, 1.0).unwrap();
        let v = relaxation(&q).unwrap();
        assert_abs_diff_eq!(v, 0.427_583_576_155_807, epsilon = 1e-9);
    }

    #[test]
    fn relaxation_matches_contour_inversion() {
        // Includes μ < λ^β, where the pole residue is required.
        for &(b, l, mu) in &[
            (0.5, 1.0, 2.0),
            (0.5, 1.0, 0.5),
            (0.8, 2.0, 0.7),
            (0.3, 0.5, 0.7),
            (0.6, 2.0, 3.0),
        ] {
            let q = p(b, l);
            for &t in &[0.01, 0.5, 2.0] {
                let v = relaxation(&RelaxationQuery::new(q, mu, t).unwrap()).unwrap();
                let oracle = talbot_invert(
                    |s| {
                        let psi = laplace_symbol_complex(&q, s);
                        psi / (s * (psi + mu))
                    },
                    t,
                    DEFAULT_NODES,
                );
                assert!((v - oracle).abs() < 1e-8, "b={b} l={l} mu={mu} t={t}: {v} vs {oracle}");
            }
        }
    }

    #[test]
    fn relaxation_at_excluded_point_is_continuous() {
        let q = p(0.5, 1.0);
        let at = relaxation(&RelaxationQuery::new(q, 1.0, 0.7).unwrap()).unwrap();
        let below = relaxation(&RelaxationQuery::new(q, 1.0 - 1e-7, 0.7).unwrap()).unwrap();
        let above = relaxation(&RelaxationQuery::new(q, 1.0 + 1e-7, 0.7).unwrap()).unwrap();
        assert!((at - below).abs() < 1e-6 && (at - above).abs() < 1e-6);
        assert!(!RelaxationQuery::new(q, 1.0, 0.7).unwrap().is_off_critical_rate());
    }

    #[test]
    fn relaxation_dt_matches_central_difference() {
        for &(b, l, mu) in &[(0.5, 0.0, 1.0), (0.5, 1.0, 2.0), (0.8, 2.0, 0.7)] {
            let q = RelaxationQuery::new(p(b, l), mu, 1.0).unwrap();
            let h = 1e-4;
            let fd = (relaxation(&q.at_time(1.0 + h).unwrap()).unwrap()
                - relaxation(&q.at_time(1.0 - h).unwrap()).unwrap())
                / (2.0 * h);
            let d = relaxation_dt(&q).unwrap();
            assert!((d - fd).abs() < 1e-5, "{b} {l} {mu}: {d} vs {fd}");
            assert!(d <= 0.0);
        }
        let q = RelaxationQuery::new(p(0.5, 0.0), 1.0, 0.0).unwrap();
        assert!(relaxation_dt(&q).is_err());
    }

    #[test]
    fn derivative_bound_holds_without_pole() {
        for &(b, l, mu) in &[(0.3, 0.5, 1.0), (0.5, 1.0, 2.0), (0.8, 2.0, 5.0), (0.5, 0.0, 0.7)] {
            for &t in &[0.01, 0.3, 1.0, 5.0, 20.0] {
                let q = RelaxationQuery::new(p(b, l), mu, t).unwrap();
                let d = relaxation_dt(&q).unwrap().abs();
                let bound = mu * kernel_bound(&q.params, t).unwrap();
                assert!(d <= bound, "{b} {l} {mu} {t}: {d} > {bound}");
            }
        }
    }

    #[test]
    fn derivative_bound_fails_below_pole_threshold() {
        // μ < λ^β: the residue decays like e^{s0 t} with s0 > −λ, outrunning k(t).
        let q = RelaxationQuery::new(p(0.5, 2.0), 0.7, 2.0).unwrap();
        let d = relaxation_dt(&q).unwrap().abs();
        assert!(d > q.mu * kernel_bound(&q.params, 2.0).unwrap());
    }

    #[test]
    fn relaxation_laplace_identity() {
        let q = p(0.6, 1.5);
        let mu = 2.0;
        for &s in &[0.5, 1.0, 2.0, 5.0] {
            let f = |t: f64| (-s * t).exp() * relaxation(&RelaxationQuery::new(q, mu, t).unwrap()).unwrap();
            let tol = Tolerance::new(1e-10, 1e-10);
            let v = crate::quad::integrate_breaks(f, &[0.0, 0.1, 1.0, 10.0], tol)
                .unwrap()
                .value
                + integrate_to_infinity(f, 10.0, tol).unwrap().value;
            let expect = relaxation_transform(&q, mu, s).unwrap();
            assert!((v - expect).abs() <= 1e-5 * expect, "s={s}: {v} vs {expect}");
        }
    }

    #[test]
    fn mittag_leffler_examples() {
        assert_eq!(mittag_leffler(0.3, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(mittag_leffler(1.0, -2.0).unwrap(), (-2.0f64).exp(), epsilon = 1e-15);
        // direct summation of Σ (−1)^n / Γ(1 + n/2)
        let direct: f64 = (0..80).map(|n| (-1.0f64).powi(n) / gamma(1.0 + 0.5 * n as f64)).sum();
        assert_abs_diff_eq!(mittag_leffler(0.5, -1.0).unwrap(), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(
            mittag_leffler(0.5, -1.0).unwrap(),
            0.427_583_576_155_807,
            epsilon = 1e-12
        );
        assert!(mittag_leffler(0.5, 1.0).is_err());
        assert!(mittag_leffler(1.5, -1.0).is_err());
    }

    #[test]
    fn mittag_leffler_half_identity_across_branches() {
        // E_{1/2}(−x) = e^{x²} erfc(x), via the scaled complementary error function.
        for &x in &[0.1, 0.9, 2.0, 4.9, 5.1, 8.0, 20.0, 100.0] {
            let v = mittag_leffler(0.5, -x).unwrap();
            let expect = scaled_erfc(x);
            assert!((v - expect).abs() < 1e-11, "x={x}: {v} vs {expect}");
        }
    }

    // erfcx(x) = e^{x²} erfc(x): Taylor series of erf below 2.5, continued
    // fraction above.
    fn scaled_erfc(x: f64) -> f64 {
        if x < 2.5 {
            let mut term = x;
            let mut erf = x;
            for n in 1..120 {
                term *= -x * x / n as f64;
                erf += term / (2 * n + 1) as f64;
            }
            return (x * x).exp() * (1.0 - 2.0 / PI.sqrt() * erf);
        }
        let mut f = 0.0;
        for k in (1..200).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        1.0 / (PI.sqrt() * (x + f))
    }

    #[test]
    fn mittag_leffler_asymptotic_tail() {
        // E_β(−x) ≈ Σ_{k=1}^{3} (−1)^{k+1} x^{−k}/Γ(1−βk) for large x
        for &b in &[0.3, 0.8, 0.95] {
            let x = 1e4;
            let v = mittag_leffler(b, -x).unwrap();
            let asym: f64 = (1..=3)
                .map(|k| {
                    let g = gamma(1.0 - b * k as f64);
                    (if k % 2 == 1 { 1.0 } else { -1.0 }) * x.powi(-k) / g
                })
                .sum();
            assert!((v - asym).abs() < 1e-8 * asym.abs(), "b={b}: {v} vs {asym}");
        }
    }
}
