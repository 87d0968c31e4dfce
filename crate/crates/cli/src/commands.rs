use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use tfd_core::frac_ops::{L1Scheme, SampledFunction};
use tfd_core::mc_solver::{estimate_u, TimeChange};
use tfd_core::pde_series::{
    eigenpairs, project, project_adaptive, tempered_solution_series, tempered_solution_subordination, EigenExpansion,
    IntervalDomain, Method,
};
use tfd_core::special_fn::{kernel_bound, mittag_leffler, relaxation, relaxation_dt};
use tfd_core::subordinator::{build_path, RejectionStats, TemperedSampler};
use tfd_core::validate::{run_validation, Profile};
use tfd_core::{RelaxationQuery, TemperedParams};

use crate::config::{self, DerivativeConfig, DerivativeKind, InitialData, RelaxConfig, SimulateConfig, SolveConfig};
use crate::CliError;

/// Shortest round-trip decimal; non-finite values are refused.
fn num(v: f64) -> Result<String, CliError> {
    if v.is_finite() {
        Ok(serde_json::to_string(&v).expect("finite floats serialize"))
    } else {
        Err(CliError::Run(format!("non-finite value {v} in output")))
    }
}

fn opt(v: Option<f64>) -> Result<String, CliError> {
    v.map_or(Ok(String::new()), num)
}

/// CSV sink on a file or stdout.
struct Table {
    writer: csv::Writer<Box<dyn Write>>,
}

impl Table {
    fn create(out: Option<&Path>, header: &[&str]) -> Result<Self, CliError> {
        let sink: Box<dyn Write> = match out {
            Some(p) => Box::new(
                std::fs::File::create(p).map_err(|e| CliError::Run(format!("cannot create {}: {e}", p.display())))?,
            ),
            None => Box::new(std::io::stdout()),
        };
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(header).map_err(io)?;
        Ok(Self { writer })
    }

    fn row(&mut self, fields: &[String]) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(io)
    }

    fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::Run(e.to_string()))
    }
}

fn io(e: csv::Error) -> CliError {
    CliError::Run(e.to_string())
}

pub fn relax(cfg_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg: RelaxConfig = config::load(cfg_path)?;
    let mut table = Table::create(
        out,
        &[
            "beta",
            "lambda",
            "mu",
            "t",
            "g_check",
            "dg_dt",
            "bound_mu_k_t",
            "mittag_leffler",
        ],
    )?;
    for &beta in &cfg.beta {
        for &lambda in &cfg.lambda {
            let params = TemperedParams::new(beta, lambda)?;
            for &mu in &cfg.mu {
                for &t in &cfg.t {
                    let q = RelaxationQuery::new(params, mu, t)?;
                    let g = relaxation(&q)?;
                    let (dg, bound) = if t > 0.0 {
                        (Some(relaxation_dt(&q)?), Some(mu * kernel_bound(&params, t)?))
                    } else {
                        (None, None)
                    };
                    let ml = if lambda == 0.0 {
                        Some(mittag_leffler(beta, -mu * t.powf(beta))?)
                    } else {
                        None
                    };
                    table.row(&[
                        num(beta)?,
                        num(lambda)?,
                        num(mu)?,
                        num(t)?,
                        num(g)?,
                        opt(dg)?,
                        opt(bound)?,
                        opt(ml)?,
                    ])?;
                }
            }
        }
    }
    table.finish()
}

fn read_samples(path: &Path) -> Result<SampledFunction, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != ["t", "value"] {
        return Err(bad(format!(
            "expected header `t,value`, got `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| {
            rec.get(i)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| bad(format!("row {}: field {} is not a number", line + 2, i + 1)))
        };
        ts.push(parse(0)?);
        vs.push(parse(1)?);
    }
    if ts.len() < 3 {
        return Err(bad("need at least 3 samples".into()));
    }
    let dt = ts[1] - ts[0];
    let uniform = ts
        .iter()
        .enumerate()
        .all(|(i, &t)| (t - i as f64 * dt).abs() <= 1e-9 * dt.max(t.abs()));
    if ts[0] != 0.0 || !uniform {
        return Err(bad("samples must lie on a uniform grid starting at t = 0".into()));
    }
    Ok(SampledFunction::new(dt, vs)?)
}

pub fn derivative(cfg_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let cfg: DerivativeConfig = config::load(cfg_path)?;
    let input = if cfg.input.is_relative() {
        cfg_path.parent().unwrap_or(Path::new(".")).join(&cfg.input)
    } else {
        cfg.input.clone()
    };
    let g = read_samples(&input)?;
    let scheme = L1Scheme::new(cfg.beta)?.with_singular_exponents(&cfg.singular_exponents)?;
    let result = match (cfg.kind, cfg.lambda > 0.0) {
        (DerivativeKind::Rl, false) => scheme.rl_derivative(&g),
        (DerivativeKind::Caputo, false) => scheme.caputo_derivative(&g),
        (DerivativeKind::Rl, true) => scheme.rl_tempered(&g, cfg.lambda)?,
        (DerivativeKind::Caputo, true) => scheme.caputo_tempered(&g, cfg.lambda)?,
    };
    let mut table = Table::create(out, &["t", "derivative"])?;
    for (t, v) in result.times().zip(&result.values) {
        table.row(&[num(t)?, num(*v)?])?;
    }
    table.finish()
}

type Datum = Box<dyn Fn(&[f64]) -> f64 + Sync>;

/// The initial datum as a function on the closed domain.
fn initial_function(init: &InitialData, domain: &IntervalDomain) -> Result<Datum, CliError> {
    let lengths = domain.lengths().to_vec();
    Ok(match init.clone() {
        InitialData::Mode { index } => {
            let pair = eigenpairs(domain, &index)?;
            Box::new(move |x| pair.eval(x))
        }
        InitialData::PolynomialBump => Box::new(move |x| {
            x.iter()
                .zip(&lengths)
                .map(|(&xi, &m)| 4.0 * xi * (m - xi) / (m * m))
                .product()
        }),
        InitialData::SmoothedIndicator { a, b, width } => {
            if !(width.is_finite() && width > 0.0 && a.is_finite() && b.is_finite() && a < b) {
                return Err(CliError::Config("smoothed_indicator needs a < b and width > 0".into()));
            }
            Box::new(move |x| {
                x.iter()
                    .map(|&xi| 0.5 * (((xi - a) / width).tanh() - ((xi - b) / width).tanh()))
                    .product()
            })
        }
        InitialData::Samples { values } => {
            if domain.dims() != 1 || values.len() < 2 || values.iter().any(|v| !v.is_finite()) {
                return Err(CliError::Config(
                    "samples need an interval domain and at least 2 finite values".into(),
                ));
            }
            let h = lengths[0] / (values.len() - 1) as f64;
            Box::new(move |x| {
                let s = (x[0] / h).clamp(0.0, (values.len() - 1) as f64);
                let i = (s.floor() as usize).min(values.len() - 2);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            })
        }
    })
}

fn expansion(cfg: &SolveConfig, f: &(dyn Fn(&[f64]) -> f64 + Sync)) -> Result<EigenExpansion, CliError> {
    if let InitialData::Mode { index } = &cfg.initial {
        let top = index.iter().copied().max().unwrap_or(1);
        let n = cfg.n_max.unwrap_or(top).max(top);
        let probe = EigenExpansion::from_coeffs(cfg.domain.clone(), n, vec![0.0; n.pow(cfg.domain.dims() as u32)])?;
        let mut coeffs = probe.coeffs.clone();
        let k = (0..coeffs.len())
            .find(|&k| probe.index_of(k) == *index)
            .ok_or_else(|| CliError::Config(format!("mode index {index:?} does not match the domain dimension")))?;
        coeffs[k] = 1.0;
        return Ok(EigenExpansion::from_coeffs(cfg.domain.clone(), n, coeffs)?);
    }
    Ok(match cfg.n_max {
        Some(n) => project(f, &cfg.domain, n)?,
        None => project_adaptive(f, &cfg.domain)?,
    })
}

pub fn solve(cfg_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let cfg: SolveConfig = config::load(cfg_path)?;
    let dims = cfg.domain.dims();
    let points: Vec<Vec<f64>> = cfg.x.iter().map(|p| p.coords()).collect();
    for p in &points {
        if !cfg.domain.contains_closed(p) {
            return Err(CliError::Config(format!("point {p:?} lies outside the domain")));
        }
    }
    for &t in &cfg.t {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::Config(format!("times must be finite and >= 0, got {t}")));
        }
    }
    if cfg.methods.contains(&Method::ClassicalHeat) {
        return Err(CliError::Config(
            "method `classical_heat` is not available in solve".into(),
        ));
    }
    let want = |m| cfg.methods.contains(&m);
    let mut mc = cfg.mc.unwrap_or_default();
    if let Some(s) = seed {
        mc.seed = s;
    }
    mc.validate()?;
    let f = initial_function(&cfg.initial, &cfg.domain)?;
    let exp = expansion(&cfg, f.as_ref())?;
    let exact = matches!(cfg.initial, InitialData::Mode { .. });

    let mut header = vec!["t".to_string()];
    if dims == 1 {
        header.push("x".into());
    } else {
        header.extend((1..=dims).map(|i| format!("x{i}")));
    }
    header.extend(
        [
            "u_series",
            "u_subordination",
            "u_mc",
            "std_error",
            "truncation_error",
            "mc_within_tolerance",
        ]
        .map(String::from),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::create(out, &header_refs)?;
    for &t in &cfg.t {
        for x in &points {
            let series = if want(Method::Series) {
                Some(tempered_solution_series(&exp, &cfg.params, t, x)?)
            } else {
                None
            };
            let sub = if want(Method::Subordination) && t > 0.0 {
                Some(tempered_solution_subordination(&exp, &cfg.params, t, x)?.value)
            } else {
                None
            };
            let mc_est = if !want(Method::MonteCarlo) {
                None
            } else if cfg.domain.on_boundary(x) {
                Some((0.0, 0.0))
            } else if t == 0.0 {
                Some((f(x), 0.0))
            } else {
                let e = estimate_u(f.as_ref(), x, t, TimeChange::Inverse(cfg.params), &cfg.domain, &mc)?;
                Some((e.value, e.std_error.unwrap_or(0.0)))
            };
            let flag = match (&series, mc_est) {
                (Some(s), Some((u, se))) => {
                    Some(((s.value - u).abs() <= 3.0 * se + cfg.mc_bias_allowance) as u8 as f64)
                }
                _ => None,
            };
            let mut row = vec![num(t)?];
            for &xi in x {
                row.push(num(xi)?);
            }
            row.push(opt(series.map(|s| s.value))?);
            row.push(opt(sub)?);
            row.push(opt(mc_est.map(|m| m.0))?);
            row.push(opt(mc_est.map(|m| m.1))?);
            // a single mode is represented exactly
            let trunc = if exact {
                series.map(|_| 0.0)
            } else {
                series.and_then(|s| s.truncation_error)
            };
            row.push(opt(trunc)?);
            row.push(opt(flag)?);
            table.row(&row)?;
        }
    }
    table.finish()
}

pub fn simulate(cfg_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), CliError> {
    let cfg: SimulateConfig = config::load(cfg_path)?;
    let dir: PathBuf = out
        .ok_or_else(|| CliError::Usage("simulate needs --out DIR".into()))?
        .to_path_buf();
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    let seed = seed.unwrap_or(cfg.seed);
    if cfg.n_paths < 1 || cfg.t_query.is_empty() {
        return Err(CliError::Config("need n_paths >= 1 and at least one query time".into()));
    }
    if let Some(t) = cfg.t_query.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(CliError::Config(format!(
            "query times must be finite and >= 0, got {t}"
        )));
    }
    let t_max = cfg.t_query.iter().cloned().fold(0.0, f64::max);
    let horizon = cfg.t_horizon.unwrap_or(t_max).max(t_max);
    let horizon = if horizon > 0.0 { horizon } else { cfg.dx };
    let sampler = TemperedSampler::new(cfg.params, cfg.dx)?;

    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| build_path(&cfg.params, cfg.dx, horizon, seed, i))
        .collect::<Result<Vec<_>, _>>()?;

    let mut inverse = Table::create(
        Some(&dir.join("inverse.csv")),
        &["path", "t", "e_lower", "e_upper", "e_mid"],
    )?;
    let mut stats = RejectionStats::default();
    for (i, path) in paths.iter().enumerate() {
        stats.merge(&path.stats);
        for &t in &cfg.t_query {
            let s = path.inverse_at(t)?;
            inverse.row(&[
                i.to_string(),
                num(t)?,
                num(s.e_lower)?,
                num(s.e_upper)?,
                num(s.midpoint())?,
            ])?;
        }
    }
    inverse.finish()?;

    if cfg.dump_paths {
        let mut dump = Table::create(Some(&dir.join("paths.csv")), &["path", "x", "D_lambda_of_x"])?;
        for (i, path) in paths.iter().enumerate() {
            for (k, level) in path.levels.iter().enumerate() {
                dump.row(&[i.to_string(), num(k as f64 * path.dx)?, num(*level)?])?;
            }
        }
        dump.finish()?;
    }

    let pa = sampler.expected_acceptance();
    let se = (pa * (1.0 - pa) / stats.proposals.max(1) as f64).sqrt();
    let mut summary = Table::create(
        Some(&dir.join("summary.csv")),
        &[
            "n_paths",
            "dx",
            "sub_steps",
            "proposals",
            "accepted",
            "acceptance_rate",
            "expected_acceptance",
            "acceptance_std_error",
        ],
    )?;
    summary.row(&[
        cfg.n_paths.to_string(),
        num(cfg.dx)?,
        sampler.sub_steps().to_string(),
        stats.proposals.to_string(),
        stats.accepted.to_string(),
        num(stats.acceptance_rate())?,
        num(pa)?,
        num(se)?,
    ])?;
    summary.finish()
}

pub fn validate(
    cfg_path: Option<&Path>,
    out: Option<&Path>,
    seed: Option<u64>,
    profile: Option<&str>,
) -> Result<(), CliError> {
    let cfg: config::ValidateConfig = match cfg_path {
        Some(p) => config::load(p)?,
        None => Default::default(),
    };
    let profile: Profile = profile.or(cfg.profile.as_deref()).unwrap_or("fast").parse()?;
    let seed = seed.or(cfg.seed).unwrap_or(0);
    let report = run_validation(profile, seed);
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Run(e.to_string()))?;
    json.push('\n');
    match out {
        Some(p) => std::fs::write(p, &json).map_err(|e| CliError::Run(format!("cannot write {}: {e}", p.display())))?,
        None => print!("{json}"),
    }
    if report.passed() {
        Ok(())
    } else {
        let names: Vec<String> = report.failures().map(|c| c.check_name.clone()).collect();
        Err(CliError::Validation(names))
    }
}
