//! Deterministic solvers on the interval `(0, M)` and on boxes
//! `(0, M_1) × … × (0, M_d)`: Dirichlet eigenpairs of the Laplacian, spectral
//! projection, the killed heat semigroup, and the tempered fractional
//! solution by eigenfunction series and by subordination.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, require_nonnegative, require_positive, Error, Result};
use crate::quad::{composite_rule, integrate, integrate_to_infinity, Tolerance};
use crate::special_fn::{relaxation, RelaxationQuery, TemperedParams};
use crate::subordinator::inverse_density_quadrature;

/// Dimensions above this are rejected: tensor expansions grow as `N^d`.
pub const MAX_DIMS: usize = 3;
pub const DEFAULT_MODES: usize = 64;
/// Relative size of the last retained modes at which doubling stops.
pub const TRUNCATION_RTOL: f64 = 1e-8;
const MAX_TOTAL_MODES: usize = 1 << 16;

/// The interval `(0, M)` or a box with per-axis lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain")]
pub struct IntervalDomain {
    lengths: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lengths: Vec<f64>,
}

impl TryFrom<RawDomain> for IntervalDomain {
    type Error = Error;
    fn try_from(raw: RawDomain) -> Result<Self> {
        Self::boxed(&raw.lengths)
    }
}

impl IntervalDomain {
    pub fn interval(m: f64) -> Result<Self> {
        Self::boxed(&[m])
    }

    pub fn boxed(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > MAX_DIMS {
            return Err(invalid(
                "lengths",
                format!("need 1 to {MAX_DIMS} axes, got {}", lengths.len()),
            ));
        }
        for &m in lengths {
            require_positive("m", m)?;
        }
        Ok(Self {
            lengths: lengths.to_vec(),
        })
    }

    pub fn dims(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Length of the first axis.
    pub fn m(&self) -> f64 {
        self.lengths[0]
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.lengths).all(|(&xi, &m)| (0.0..=m).contains(&xi))
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.len() == self.dims() && x.iter().zip(&self.lengths).all(|(&xi, &m)| xi > 0.0 && xi < m)
    }

    pub fn on_boundary(&self, x: &[f64]) -> bool {
        self.contains_closed(x) && !self.contains_open(x)
    }

    /// `sup |ψ_n| = Π √(2/M_i)`.
    pub fn eigenfunction_sup(&self) -> f64 {
        self.lengths.iter().map(|m| (2.0 / m).sqrt()).product()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.contains_closed(x) {
            Ok(())
        } else {
            Err(invalid(
                "x",
                format!("{x:?} is not in the closed domain {:?}", self.lengths),
            ))
        }
    }
}

fn axis_eigenvalue(m: f64, n: usize) -> f64 {
    (n as f64 * PI / m).powi(2)
}

fn axis_eigenfunction(m: f64, n: usize, x: f64) -> f64 {
    if x <= 0.0 || x >= m {
        return 0.0;
    }
    (2.0 / m).sqrt() * (n as f64 * PI * x / m).sin()
}

/// One Dirichlet eigenpair `(η, ψ)` of `−Δ`, indexed per axis from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub eta: f64,
    index: Vec<usize>,
    lengths: Vec<f64>,
}

impl Eigenpair {
    pub fn index(&self) -> &[usize] {
        &self.index
    }

    /// `ψ(x)`; exactly zero on the boundary.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.index
            .iter()
            .zip(&self.lengths)
            .zip(x)
            .map(|((&n, &m), &xi)| axis_eigenfunction(m, n, xi))
            .product()
    }
}

/// `η = Σ (n_i π / M_i)²` and `ψ = Π √(2/M_i) sin(n_i π x_i / M_i)`.
pub fn eigenpairs(domain: &IntervalDomain, index: &[usize]) -> Result<Eigenpair> {
    if index.len() != domain.dims() {
        return Err(invalid(
            "n",
            format!("expected {} indices, got {}", domain.dims(), index.len()),
        ));
    }
    if index.iter().any(|&n| n < 1) {
        return Err(invalid("n", "mode indices start at 1"));
    }
    let eta = index
        .iter()
        .zip(&domain.lengths)
        .map(|(&n, &m)| axis_eigenvalue(m, n))
        .sum();
    Ok(Eigenpair {
        eta,
        index: index.to_vec(),
        lengths: domain.lengths.clone(),
    })
}

/// Coefficients `f̄(n)` of a function in the eigenbasis, truncated at `n_max`
/// modes per axis and stored row-major over the multi-index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenExpansion {
    pub domain: IntervalDomain,
    pub n_max: usize,
    pub coeffs: Vec<f64>,
    /// `‖f‖₂² − Σ f̄(n)²` when the projection came from a function.
    pub parseval_defect: Option<f64>,
}

impl EigenExpansion {
    pub fn from_coeffs(domain: IntervalDomain, n_max: usize, coeffs: Vec<f64>) -> Result<Self> {
        if n_max < 1 {
            return Err(invalid("n_max", "must be at least 1"));
        }
        let expected = n_max.pow(domain.dims() as u32);
        if coeffs.len() != expected {
            return Err(invalid(
                "coeffs",
                format!("expected {expected} coefficients, got {}", coeffs.len()),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coeffs", "must be finite"));
        }
        Ok(Self {
            domain,
            n_max,
            coeffs,
            parseval_defect: None,
        })
    }

    /// Multi-index (1-based) of flat position `k`.
    pub fn index_of(&self, mut k: usize) -> Vec<usize> {
        let d = self.domain.dims();
        let mut idx = vec![0; d];
        for slot in idx.iter_mut().rev() {
            *slot = k % self.n_max + 1;
            k /= self.n_max;
        }
        idx
    }

    pub fn eta(&self, k: usize) -> f64 {
        self.index_of(k)
            .iter()
            .zip(&self.domain.lengths)
            .map(|(&n, &m)| axis_eigenvalue(m, n))
            .sum()
    }

    /// `Σ f̄(n)²`, the squared L² norm of the truncated expansion.
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Largest `|f̄(n)|` among modes with some index in `{N − 1, N}`.
    pub fn tail_coefficient(&self) -> f64 {
        let lo = self.n_max.saturating_sub(1).max(1);
        (0..self.coeffs.len())
            .filter(|&k| self.index_of(k).iter().any(|&n| n >= lo))
            .map(|k| self.coeffs[k].abs())
            .fold(0.0, f64::max)
    }

    /// `Σ f̄(n) ψ_n(x)`.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.domain.check_point(x)?;
        if self.domain.on_boundary(x) {
            return Ok(0.0);
        }
        let tables: Vec<Vec<f64>> = self
            .domain
            .lengths
            .iter()
            .zip(x)
            .map(|(&m, &xi)| (1..=self.n_max).map(|n| axis_eigenfunction(m, n, xi)).collect())
            .collect();
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let psi: f64 = self.index_of(k).iter().zip(&tables).map(|(&n, t)| t[n - 1]).product();
            acc += c * psi;
        }
        Ok(acc)
    }

    /// The expansion with each coefficient multiplied by `factor(η_n)`.
    pub fn map_modes<F: Fn(f64) -> f64>(&self, factor: F) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, &c)| if c == 0.0 { 0.0 } else { c * factor(self.eta(k)) })
            .collect();
        Self {
            coeffs,
            parseval_defect: None,
            ..self.clone()
        }
    }
}

/// Projects `f` onto the first `n_max` modes per axis. On the interval each
/// coefficient is an adaptive quadrature; on boxes a tensor Gauss rule
/// resolving `n_max` half-waves per axis is used.
pub fn project<F>(f: F, domain: &IntervalDomain, n_max: usize) -> Result<EigenExpansion>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if n_max < 1 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    if n_max.pow(domain.dims() as u32) > MAX_TOTAL_MODES {
        return Err(invalid(
            "n_max",
            format!("{n_max}^{} modes exceeds {MAX_TOTAL_MODES}", domain.dims()),
        ));
    }
    let tol = Tolerance::new(1e-13, 1e-12).with_max_subdivisions(4000);
    let (coeffs, norm_sq) = if domain.dims() == 1 {
        let m = domain.m();
        let breaks: Vec<f64> = (0..=n_max.div_ceil(4).max(1))
            .map(|i| m * i as f64 / n_max.div_ceil(4).max(1) as f64)
            .collect();
        let coeffs = (1..=n_max)
            .into_par_iter()
            .map(|n| {
                crate::quad::integrate_breaks(|x| f(&[x]) * axis_eigenfunction(m, n, x), &breaks, tol).map(|r| r.value)
            })
            .collect::<Result<Vec<_>>>()?;
        let norm_sq = integrate(|x| f(&[x]).powi(2), 0.0, m, tol)?.value;
        (coeffs, norm_sq)
    } else {
        tensor_projection(&f, domain, n_max)
    };
    let mut exp = EigenExpansion::from_coeffs(domain.clone(), n_max, coeffs)?;
    exp.parseval_defect = Some(norm_sq - exp.norm_squared());
    Ok(exp)
}

fn tensor_projection<F: Fn(&[f64]) -> f64 + Sync>(f: &F, domain: &IntervalDomain, n_max: usize) -> (Vec<f64>, f64) {
    let panels = n_max / 2 + 4;
    let rules: Vec<Vec<(f64, f64)>> = domain
        .lengths
        .iter()
        .map(|&m| {
            let breaks: Vec<f64> = (0..=panels).map(|i| m * i as f64 / panels as f64).collect();
            composite_rule(&breaks, 16)
        })
        .collect();
    // Sample f once on the tensor grid, then contract one axis at a time.
    let shape: Vec<usize> = rules.iter().map(Vec::len).collect();
    let total: usize = shape.iter().product();
    let samples: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut k| {
            let mut x = vec![0.0; shape.len()];
            for (axis, slot) in x.iter_mut().enumerate().rev() {
                *slot = rules[axis][k % shape[axis]].0;
                k /= shape[axis];
            }
            f(&x)
        })
        .collect();
    let weight = |k: usize| {
        let mut w = 1.0;
        let mut k = k;
        for axis in (0..shape.len()).rev() {
            w *= rules[axis][k % shape[axis]].1;
            k /= shape[axis];
        }
        w
    };
    let norm_sq = (0..total).map(|k| weight(k) * samples[k] * samples[k]).sum();

    let mut data = samples;
    let mut dims = shape.clone();
    for axis in 0..dims.len() {
        let m = domain.lengths[axis];
        let basis: Vec<Vec<f64>> = (1..=n_max)
            .map(|n| {
                rules[axis]
                    .iter()
                    .map(|&(x, w)| w * axis_eigenfunction(m, n, x))
                    .collect()
            })
            .collect();
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let len = dims[axis];
        let mut next = vec![0.0; outer * n_max * inner];
        for o in 0..outer {
            for (n, b) in basis.iter().enumerate() {
                for i in 0..inner {
                    let mut acc = 0.0;
                    for q in 0..len {
                        acc += b[q] * data[(o * len + q) * inner + i];
                    }
                    next[(o * n_max + n) * inner + i] = acc;
                }
            }
        }
        data = next;
        dims[axis] = n_max;
    }
    (data, norm_sq)
}

/// Projects with `n_max` starting at 64 and doubling until the last retained
/// modes fall below `1e−8 ‖f‖₂` or the mode budget is reached.
pub fn project_adaptive<F>(f: F, domain: &IntervalDomain) -> Result<EigenExpansion>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut n = DEFAULT_MODES;
    loop {
        let exp = project(&f, domain, n)?;
        let norm = (exp.norm_squared() + exp.parseval_defect.unwrap_or(0.0).max(0.0)).sqrt();
        let next_fits = (2 * n).pow(domain.dims() as u32) <= MAX_TOTAL_MODES;
        if exp.tail_coefficient() <= TRUNCATION_RTOL * norm || !next_fits {
            return Ok(exp);
        }
        n *= 2;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Series,
    Subordination,
    MonteCarlo,
    ClassicalHeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionEstimate {
    pub value: f64,
    pub method: Method,
    pub std_error: Option<f64>,
    pub truncation_error: Option<f64>,
}

impl SolutionEstimate {
    pub fn deterministic(value: f64, method: Method, truncation_error: Option<f64>) -> Self {
        Self {
            value,
            method,
            std_error: None,
            truncation_error,
        }
    }

    pub fn monte_carlo(value: f64, std_error: f64) -> Self {
        Self {
            value,
            method: Method::MonteCarlo,
            std_error: Some(std_error),
            truncation_error: None,
        }
    }
}

/// Coefficients of `T_D(t) f`: `e^{−η_n t} f̄(n)`.
pub fn heat_coefficients(exp: &EigenExpansion, t: f64) -> Result<EigenExpansion> {
    require_nonnegative("t", t)?;
    Ok(exp.map_modes(|eta| (-eta * t).exp()))
}

/// Bound on the omitted modes, assuming `|f̄(n)| ≤ |f̄(N)|` beyond the cut
/// and temporal factors `decay(η)` non-increasing in `η`.
fn tail_bound<F: Fn(f64) -> f64>(exp: &EigenExpansion, decay: F) -> f64 {
    let c = exp.tail_coefficient();
    if c == 0.0 {
        return 0.0;
    }
    let m = exp.domain.lengths.iter().cloned().fold(0.0, f64::max);
    let sum: f64 = (exp.n_max + 1..exp.n_max + 4096)
        .map(|n| decay(axis_eigenvalue(m, n)))
        .take_while(|&v| v > 0.0)
        .sum();
    c * exp.domain.eigenfunction_sup() * sum * exp.domain.dims() as f64
}

/// `u(t, x) = Σ e^{−η_n t} ψ_n(x) f̄(n)`, the killed heat semigroup.
pub fn heat_solution(exp: &EigenExpansion, t: f64, x: &[f64]) -> Result<SolutionEstimate> {
    let value = heat_coefficients(exp, t)?.evaluate(x)?;
    let trunc = if t > 0.0 {
        Some(tail_bound(exp, |eta| (-eta * t).exp()))
    } else {
        None
    };
    Ok(SolutionEstimate::deterministic(value, Method::ClassicalHeat, trunc))
}

/// `p_D(t, x, y) = Σ e^{−η_n t} ψ_n(x) ψ_n(y)`, summed per axis until the
/// terms fall below machine precision and multiplied across axes.
pub fn heat_kernel(domain: &IntervalDomain, t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    require_positive("t", t)?;
    domain.check_point(x)?;
    domain.check_point(y)?;
    let mut value = 1.0;
    for ((&m, &xi), &yi) in domain.lengths.iter().zip(x).zip(y) {
        let mut acc = 0.0;
        let mut n = 1;
        loop {
            let decay = (-axis_eigenvalue(m, n) * t).exp();
            acc += decay * (axis_eigenfunction(m, n, xi) * axis_eigenfunction(m, n, yi));
            if decay < 1e-18 * (2.0 / m) || n > 1_000_000 {
                break;
            }
            n += 1;
        }
        value *= acc;
    }
    Ok(value)
}

/// Coefficients `ǧ_λ(t, η_n) f̄(n)` of the tempered fractional solution.
pub fn tempered_coefficients(exp: &EigenExpansion, params: &TemperedParams, t: f64) -> Result<EigenExpansion> {
    require_nonnegative("t", t)?;
    let coeffs = exp
        .coeffs
        .par_iter()
        .enumerate()
        .map(|(k, &c)| {
            if c == 0.0 {
                return Ok(0.0);
            }
            RelaxationQuery::new(*params, exp.eta(k), t)
                .and_then(|q| relaxation(&q))
                .map(|g| c * g)
                .map_err(|e| Error::Mode {
                    mode: k + 1,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EigenExpansion {
        coeffs,
        parseval_defect: None,
        ..exp.clone()
    })
}

/// `u(t, x) = Σ f̄(n) ǧ_λ(t, η_n) ψ_n(x)`.
pub fn tempered_solution_series(
    exp: &EigenExpansion,
    params: &TemperedParams,
    t: f64,
    x: &[f64],
) -> Result<SolutionEstimate> {
    let value = tempered_coefficients(exp, params, t)?.evaluate(x)?;
    let trunc = if t > 0.0 {
        let m = exp.domain.lengths.iter().cloned().fold(0.0, f64::max);
        let g_cut = RelaxationQuery::new(*params, axis_eigenvalue(m, exp.n_max), t).and_then(|q| relaxation(&q))?;
        // ǧ_λ(t, η) decays like 1/η, so the tail is about N·ǧ_λ(t, η_N)
        Some(exp.tail_coefficient() * exp.domain.eigenfunction_sup() * g_cut * exp.n_max as f64)
    } else {
        None
    };
    Ok(SolutionEstimate::deterministic(value, Method::Series, trunc))
}

/// `u(t, x) = ∫_0^∞ T_D(l) f(x) g_λ(t, l) dl` by adaptive quadrature in `l`.
pub fn tempered_solution_subordination(
    exp: &EigenExpansion,
    params: &TemperedParams,
    t: f64,
    x: &[f64],
) -> Result<SolutionEstimate> {
    require_positive("t", t)?;
    exp.domain.check_point(x)?;
    if exp.domain.on_boundary(x) {
        return Ok(SolutionEstimate::deterministic(0.0, Method::Subordination, Some(0.0)));
    }
    let modes: Vec<(f64, f64)> = exp
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| {
            (
                exp.eta(k),
                c * eigenpairs(&exp.domain, &exp.index_of(k))
                    .map(|p| p.eval(x))
                    .unwrap_or(0.0),
            )
        })
        .collect();
    let mut failure = None;
    let integrand = |l: f64| {
        if l <= 0.0 {
            return 0.0;
        }
        let heat: f64 = modes.iter().map(|&(eta, w)| w * (-eta * l).exp()).sum();
        if heat == 0.0 {
            return 0.0;
        }
        match inverse_density_quadrature(params, t, l) {
            Ok(g) => heat * g,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let r = integrate_to_infinity(integrand, 0.0, Tolerance::new(1e-10, 1e-9).with_max_subdivisions(500));
    if let Some(e) = failure {
        return Err(e);
    }
    let r = r?;
    Ok(SolutionEstimate::deterministic(
        r.value,
        Method::Subordination,
        Some(r.abs_error),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frac_ops::{L1Scheme, SampledFunction};
    use crate::special_fn::mittag_leffler;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pi_interval() -> IntervalDomain {
        IntervalDomain::interval(PI).unwrap()
    }

    fn single_mode(domain: &IntervalDomain, n: usize, n_max: usize) -> EigenExpansion {
        let mut c = vec![0.0; n_max];
        c[n - 1] = 1.0;
        EigenExpansion::from_coeffs(domain.clone(), n_max, c).unwrap()
    }

    #[test]
    fn eigenpair_examples() {
        let d = pi_interval();
        let p1 = eigenpairs(&d, &[1]).unwrap();
        assert_abs_diff_eq!(p1.eta, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p1.eval(&[PI / 2.0]), 0.797_884_560_802_865_4, epsilon = 1e-15);
        assert_abs_diff_eq!(eigenpairs(&d, &[3]).unwrap().eta, 9.0, epsilon = 1e-13);
        assert_eq!(p1.eval(&[0.0]), 0.0);
        assert_eq!(p1.eval(&[PI]), 0.0);
        assert!(eigenpairs(&d, &[0]).is_err());
        let b = IntervalDomain::boxed(&[1.0, 2.0]).unwrap();
        let p = eigenpairs(&b, &[1, 2]).unwrap();
        assert_abs_diff_eq!(p.eta, 2.0 * PI * PI, epsilon = 1e-12);
    }

    #[test]
    fn orthonormality() {
        let d = pi_interval();
        for m in 1..6 {
            for n in 1..6 {
                let (a, b) = (eigenpairs(&d, &[m]).unwrap(), eigenpairs(&d, &[n]).unwrap());
                let v = integrate(|x| a.eval(&[x]) * b.eval(&[x]), 0.0, PI, Tolerance::new(1e-13, 1e-13))
                    .unwrap()
                    .value;
                assert_abs_diff_eq!(v, if m == n { 1.0 } else { 0.0 }, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn projection_of_mode_and_parabola() {
        let d = pi_interval();
        let psi2 = eigenpairs(&d, &[2]).unwrap();
        let e = project(|x| psi2.eval(x), &d, 8).unwrap();
        for (k, c) in e.coeffs.iter().enumerate() {
            assert_abs_diff_eq!(*c, if k == 1 { 1.0 } else { 0.0 }, epsilon = 1e-12);
        }
        let e = project(|x| x[0] * (PI - x[0]), &d, 32).unwrap();
        for (k, c) in e.coeffs.iter().enumerate() {
            let n = (k + 1) as f64;
            let expect = if k % 2 == 0 {
                (2.0 / PI).sqrt() * 4.0 / n.powi(3)
            } else {
                0.0
            };
            assert_abs_diff_eq!(*c, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn parseval_defect_decreases() {
        let d = pi_interval();
        let f = |x: &[f64]| if x[0] < 1.0 { 1.0 } else { 0.5 };
        let defects: Vec<f64> = [4, 8, 16, 32]
            .iter()
            .map(|&n| project(f, &d, n).unwrap().parseval_defect.unwrap())
            .collect();
        assert!(defects.windows(2).all(|w| w[1] < w[0]), "{defects:?}");
        assert!(defects.iter().all(|&v| v > -1e-12));
    }

    #[test]
    fn adaptive_projection_stops_on_small_tail() {
        let d = pi_interval();
        let e = project_adaptive(|x| x[0] * (PI - x[0]), &d).unwrap();
        let norm = e.norm_squared().sqrt();
        assert!(e.tail_coefficient() <= TRUNCATION_RTOL * norm * 1.0001);
        assert!(e.n_max > DEFAULT_MODES);
    }

    #[test]
    fn box_projection_matches_product() {
        let d = IntervalDomain::boxed(&[PI, 2.0]).unwrap();
        let f = |x: &[f64]| x[0] * (PI - x[0]) * (x[1] * (2.0 - x[1]));
        let e = project(f, &d, 6).unwrap();
        let d1 = pi_interval();
        let d2 = IntervalDomain::interval(2.0).unwrap();
        let a = project(|x| x[0] * (PI - x[0]), &d1, 6).unwrap();
        let b = project(|x| x[0] * (2.0 - x[0]), &d2, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_abs_diff_eq!(e.coeffs[i * 6 + j], a.coeffs[i] * b.coeffs[j], epsilon = 1e-11);
            }
        }
        let x = [1.0, 0.7];
        assert_abs_diff_eq!(e.evaluate(&x).unwrap(), f(&x), epsilon = 1e-2);
    }

    #[test]
    fn heat_single_mode_and_boundary() {
        let d = pi_interval();
        let e = single_mode(&d, 1, 4);
        for &t in &[0.0, 0.3, 2.0] {
            let u = heat_solution(&e, t, &[1.1]).unwrap();
            assert_abs_diff_eq!(
                u.value,
                (-t).exp() * eigenpairs(&d, &[1]).unwrap().eval(&[1.1]),
                epsilon = 1e-14
            );
            assert_eq!(heat_solution(&e, t, &[0.0]).unwrap().value, 0.0);
            assert_eq!(heat_solution(&e, t, &[PI]).unwrap().value, 0.0);
        }
        assert!(heat_solution(&e, -1.0, &[1.0]).is_err());
        assert!(heat_solution(&e, 1.0, &[4.0]).is_err());
    }

    #[test]
    fn heat_kernel_values() {
        let d = pi_interval();
        let v = heat_kernel(&d, 1.0, &[PI / 2.0], &[PI / 2.0]).unwrap();
        let oracle: f64 = (1..40)
            .map(|n| 2.0 / PI * (-(n * n) as f64).exp() * (n as f64 * PI / 2.0).sin().powi(2))
            .sum();
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.234_278, epsilon = 1e-6);
        assert!(heat_kernel(&d, 0.0, &[1.0], &[1.0]).is_err());
        let mass = integrate(
            |y| heat_kernel(&d, 0.5, &[1.0], &[y]).unwrap(),
            0.0,
            PI,
            Tolerance::new(1e-12, 1e-12),
        )
        .unwrap();
        assert!(mass.value <= 1.0 && mass.value > 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn heat_kernel_symmetric(t in 0.01f64..2.0, x in 0.0f64..PI, y in 0.0f64..PI) {
            let d = pi_interval();
            prop_assert_eq!(heat_kernel(&d, t, &[x], &[y]).unwrap(), heat_kernel(&d, t, &[y], &[x]).unwrap());
            prop_assert!(heat_kernel(&d, t, &[x], &[y]).unwrap() > -1e-12);
        }
    }

    #[test]
    fn tempered_single_mode_and_untempered() {
        let d = pi_interval();
        let e = single_mode(&d, 1, 4);
        let psi = eigenpairs(&d, &[1]).unwrap();
        let q = TemperedParams::new(0.5, 1.0).unwrap();
        let u = tempered_solution_series(&e, &q, 0.7, &[1.0]).unwrap();
        let g = relaxation(&RelaxationQuery::new(q, 1.0, 0.7).unwrap()).unwrap();
        assert_abs_diff_eq!(u.value, g * psi.eval(&[1.0]), epsilon = 1e-14);
        assert_eq!(u.truncation_error, Some(0.0));

        let q0 = TemperedParams::untempered(0.5).unwrap();
        let u = tempered_solution_series(&e, &q0, 1.0, &[PI / 2.0]).unwrap();
        let ml = mittag_leffler(0.5, -1.0).unwrap();
        assert_abs_diff_eq!(u.value, ml * psi.eval(&[PI / 2.0]), epsilon = 1e-7);
        assert_abs_diff_eq!(u.value, 0.341_17, epsilon = 1e-5);
    }

    #[test]
    fn tempered_recovers_initial_data() {
        let d = pi_interval();
        let q = TemperedParams::new(0.6, 0.5).unwrap();
        let e = project(|x| x[0] * (PI - x[0]), &d, 32).unwrap();
        let u0 = tempered_solution_series(&e, &q, 0.0, &[1.2]).unwrap();
        assert_abs_diff_eq!(u0.value, 1.2 * (PI - 1.2), epsilon = 1e-4);
    }

    #[test]
    fn l2_contraction_and_recovery() {
        let d = pi_interval();
        let e = project(|x| (x[0] * (PI - x[0])).powi(2) + x[0], &d, 24).unwrap();
        for &(b, l) in &[(0.5, 1.0), (0.8, 0.0), (0.3, 2.0)] {
            let q = TemperedParams::new(b, l).unwrap();
            let norm = e.norm_squared().sqrt();
            for &t in &[0.05, 0.5, 2.0] {
                let ut = tempered_coefficients(&e, &q, t).unwrap();
                let g1 = relaxation(&RelaxationQuery::new(q, e.eta(0), t).unwrap()).unwrap();
                assert!(ut.norm_squared().sqrt() <= g1 * norm * (1.0 + 1e-12));
            }
            let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-6, 1e-8]
                .iter()
                .map(|&t| {
                    let ut = tempered_coefficients(&e, &q, t).unwrap();
                    ut.coeffs
                        .iter()
                        .zip(&e.coeffs)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect();
            assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
            assert!(gaps[5] < 0.1 * gaps[0], "{gaps:?}");
        }
    }

    #[test]
    fn subordination_route_single_mode() {
        let d = pi_interval();
        let e = single_mode(&d, 1, 2);
        let q = TemperedParams::new(0.5, 1.0).unwrap();
        for &t in &[0.1, 1.0] {
            let a = tempered_solution_series(&e, &q, t, &[PI / 4.0]).unwrap().value;
            let b = tempered_solution_subordination(&e, &q, t, &[PI / 4.0]).unwrap().value;
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
        assert_eq!(tempered_solution_subordination(&e, &q, 1.0, &[0.0]).unwrap().value, 0.0);
    }

    #[test]
    fn pde_residual_of_series_solution() {
        // Tempered Caputo derivative in t of u(t, x) equals Δu(t, x).
        let d = pi_interval();
        let mut c = vec![0.0; 3];
        c[0] = 1.0;
        c[2] = 0.5;
        let e = EigenExpansion::from_coeffs(d, 3, c).unwrap();
        let q = TemperedParams::new(0.5, 1.0).unwrap();
        let x = [1.0];
        let dt = 2e-3;
        let n = 500;
        let u = |t: f64| tempered_solution_series(&e, &q, t, &x).unwrap().value;
        let g = SampledFunction::from_fn(dt, n, u).unwrap().with_value_at_zero(u(0.0));
        let scheme = L1Scheme::new(0.5).unwrap().with_singular_exponents(&[0.5]).unwrap();
        let der = scheme.caputo_tempered(&g, 1.0).unwrap();
        for k in (99..n - 1).step_by(100) {
            let t = der.time(k);
            let lap = -tempered_coefficients(&e, &q, t)
                .unwrap()
                .map_modes(|eta| eta)
                .evaluate(&x)
                .unwrap();
            assert!(
                (der.values[k] - lap).abs() < 2e-2 * lap.abs().max(0.1),
                "t={t}: {} vs {lap}",
                der.values[k]
            );
        }
    }
}
