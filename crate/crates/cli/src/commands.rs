//! Command execution. Each command writes CSV or `key=value` text and
//! reports whether the underlying iteration converged.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use bethe_gauss_core::bp::{run, BpOptions, BpStatus};
use bethe_gauss_core::energy::{f_alpha_constrained, induced_marginals, AlphaAssignment};
use bethe_gauss_core::gmrf::{
    classify_boundedness, exact_marginals_with_guard, generate_model, partition_potentials, spectral_analysis,
    BoundednessClass, EdgePartition, GmrfModel, LinearTerm, ModelSpec, PartitionStrategy, SignMode, Structure,
    DEFAULT_DENSE_GUARD,
};
use bethe_gauss_core::kregular::{build_k_regular, critical_alpha, critical_r, r_valid, KRegularSpec};
use bethe_gauss_core::newton::{log_grid, newton_minimize, symmetric_profile, MinOptions, MinStatus};
use bethe_gauss_core::stability::{damped_radius, is_local_minimum, jacobian_spectra, MinimumVerdict};
use bethe_gauss_core::MomentMarginals;

use crate::cli::*;
use crate::model_io::{load_model, save_model, InputError, LoadedModel};
use crate::sweep::{sigma_error, sweep_alpha, SweepSettings};

pub const DENSE_GUARD_ENV: &str = "BETHE_GAUSS_DENSE_GUARD";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The iteration ended with this status; output was still written.
    NotConverged(String),
}

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error("{0}")]
    Input(#[from] InputError),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

fn usage(msg: impl std::fmt::Display) -> CommandError {
    CommandError::Usage(msg.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Context {
    pub dense_guard: usize,
}

impl Default for Context {
    fn default() -> Self {
        Self { dense_guard: DEFAULT_DENSE_GUARD }
    }
}

impl Context {
    /// Reads the dense guard override from the environment.
    pub fn from_env() -> Result<Self, CommandError> {
        match std::env::var(DENSE_GUARD_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map(|dense_guard| Self { dense_guard })
                .map_err(|_| usage(format!("{DENSE_GUARD_ENV}: expected a node count, got '{s}'"))),
            Err(_) => Ok(Self::default()),
        }
    }
}

/// Shortest decimal that rounds to `x` at six places: `1.0800000000000003`
/// prints as `1.08`.
pub fn trim_number(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

/// `LO:HI:COUNT` (log-spaced) or a comma-separated list of positive values.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let values = if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, count] = parts[..] else {
            return Err(format!("grid '{s}' is not LO:HI:COUNT"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad grid start '{lo}'"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad grid end '{hi}'"))?;
        let count: usize = count.trim().parse().map_err(|_| format!("bad grid count '{count}'"))?;
        if !(lo > 0.0 && hi >= lo) || count == 0 {
            return Err(format!("grid '{s}' needs 0 < LO <= HI and COUNT >= 1"));
        }
        log_grid(lo, hi, count)
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad grid value '{t}'")))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(format!("grid '{s}' must hold positive finite values"));
    }
    Ok(values)
}

fn class_name(class: BoundednessClass) -> &'static str {
    match class {
        BoundednessClass::BoundedAll => "BoundedAll",
        BoundednessClass::UnboundedAll => "UnboundedAll",
        BoundednessClass::Boundary { bounded: true } => "Boundary(bounded)",
        BoundednessClass::Boundary { bounded: false } => "Boundary(unbounded)",
    }
}

fn sink<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>, CommandError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| InputError::new(p, None, e.to_string()))?)),
        None => Box::new(stdout),
    })
}

fn csv_file(path: &Path) -> Result<csv::Writer<File>, CommandError> {
    Ok(csv::Writer::from_writer(File::create(path).map_err(|e| InputError::new(path, None, e.to_string()))?))
}

fn check_alpha(alpha: f64) -> Result<(), CommandError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(usage(format!("--alpha must be positive, got {alpha}")))
    }
}

fn choose_partition(
    model: &GmrfModel,
    arg: Option<PartitionArg>,
) -> Result<(EdgePartition, &'static str), CommandError> {
    let spectral = spectral_analysis(model).ok();
    let strategy = match arg {
        Some(PartitionArg::Symmetric) => PartitionStrategy::Symmetric,
        Some(PartitionArg::Pairwise) => PartitionStrategy::PairwiseNormalizable,
        None => spectral.as_ref().map(PartitionStrategy::auto).unwrap_or(PartitionStrategy::Symmetric),
    };
    let name = match strategy {
        PartitionStrategy::Symmetric => "symmetric",
        PartitionStrategy::PairwiseNormalizable => "pairwise",
    };
    let p = partition_potentials(model, strategy, spectral.as_ref())
        .map_err(|e| usage(format!("--init-partition {name}: {e}")))?;
    Ok((p, name))
}

fn oracle(lm: &LoadedModel, ctx: &Context) -> Option<MomentMarginals> {
    exact_marginals_with_guard(&lm.model, ctx.dense_guard).ok()
}

fn inf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

fn write_marginals(path: &Path, m: &[f64], v: &[f64], exact: Option<&MomentMarginals>) -> Result<(), CommandError> {
    let mut w = csv_file(path)?;
    w.write_record(["node", "m", "v", "m_exact", "v_exact"])?;
    for k in 0..m.len() {
        let (me, ve) = exact.map(|e| (num(e.m()[k]), num(e.v()[k]))).unwrap_or_default();
        w.write_record([k.to_string(), num(m[k]), num(v[k]), me, ve])?;
    }
    w.flush()?;
    Ok(())
}

pub fn execute(cli: &Cli, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    match &cli.command {
        Command::Analyze(a) => analyze(a, ctx, stdout),
        Command::Oracle(a) => oracle_cmd(a, ctx, stdout),
        Command::Bp(a) => bp(a, ctx, stdout),
        Command::Minimize(a) => minimize(a, ctx, stdout),
        Command::Profile(a) => profile(a, ctx, stdout),
        Command::SweepAlpha(a) => sweep(a, ctx, stdout),
        Command::Kregular(a) => kregular(a, stdout),
        Command::Gen(a) => gen(a, stdout),
    }
}

fn analysis_line(model: &GmrfModel, alpha: f64) -> Result<String, CommandError> {
    let b = classify_boundedness(model, &AlphaAssignment::Uniform(alpha)).map_err(usage)?;
    Ok(format!(
        "lambda_max={} class={} pairwise_normalizable={}",
        trim_number(b.lambda_max),
        class_name(b.class),
        b.lambda_max < 1.0
    ))
}

fn analyze(args: &AnalyzeArgs, ctx: &Context, out: &mut dyn Write) -> Result<Outcome, CommandError> {
    check_alpha(args.alpha)?;
    for path in &args.models {
        let lm = load_model(path, ctx.dense_guard)?;
        let model = &lm.model;
        if args.models.len() > 1 {
            writeln!(out, "# {}", path.display())?;
        }
        writeln!(out, "{}", analysis_line(model, args.alpha)?)?;
        writeln!(out, "connected={} n={} edges={}", model.is_connected(), model.n(), model.edge_count())?;
        match spectral_analysis(model) {
            Ok(s) => {
                let u: Vec<String> = s.u_max.iter().map(|&x| trim_number(x)).collect();
                writeln!(out, "u_max={}", u.join(","))?;
            }
            Err(e) => writeln!(out, "u_max= ({e})")?,
        }
    }
    Ok(Outcome::Success)
}

fn oracle_cmd(args: &OracleArgs, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    let lm = load_model(&args.model, ctx.dense_guard)?;
    let exact = exact_marginals_with_guard(&lm.model, ctx.dense_guard).map_err(usage)?;
    let exact = lm.unscale(&exact);
    let mut w = csv::Writer::from_writer(sink(&args.out.out, stdout)?);
    w.write_record(["node", "m", "v"])?;
    for k in 0..lm.model.n() {
        w.write_record([k.to_string(), num(exact.m()[k]), num(exact.v()[k])])?;
    }
    w.flush()?;
    if let Some(path) = &args.edges {
        let mut w = csv_file(path)?;
        w.write_record(["i", "j", "v_ij"])?;
        for (e, c) in lm.model.edges().iter().zip(exact.v_edge()) {
            w.write_record([e.i.to_string(), e.j.to_string(), num(*c)])?;
        }
        w.flush()?;
    }
    Ok(Outcome::Success)
}

fn bp(args: &BpArgs, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    let lm = load_model(&args.model, ctx.dense_guard)?;
    let model = &lm.model;
    let opts = BpOptions {
        alpha: args.alpha,
        epsilon: args.flags.epsilon,
        tol: args.flags.tol,
        max_iters: args.flags.max_iters,
        ..BpOptions::default()
    };
    opts.validate().map_err(usage)?;
    let (partition, pname) = choose_partition(model, args.flags.init_partition)?;
    let res = run(model, &partition, &opts).map_err(usage)?;
    let exact = oracle(&lm, ctx).map(|e| lm.unscale(&e));

    let mut fields = vec![
        res.status.as_str().to_string(),
        res.iterations.to_string(),
        num(args.alpha),
        num(args.flags.epsilon),
        pname.to_string(),
    ];
    let mut node_values = None;
    let (mut f, mut mean_err, mut var_err, mut sigma_err) = (None, None, None, None);
    let mut stability = vec![String::new(); 7];
    if let Some(mg) = &res.marginals {
        f = f_alpha_constrained(model, &mg.m, &mg.v, &AlphaAssignment::Uniform(args.alpha)).ok().map(|e| e.value);
        let (m, v) = lm.unscale_nodes(&mg.m, &mg.v);
        if let Some(e) = &exact {
            mean_err = Some(inf_diff(&m, e.m()));
            var_err = Some(inf_diff(&v, e.v()));
            sigma_err = Some(sigma_error(&v, e.v()));
        }
        if res.status == BpStatus::Converged {
            if let Ok(rep) = jacobian_spectra(model, mg, args.alpha) {
                let damped = damped_radius(model, &mg.v, args.alpha, args.flags.epsilon).unwrap_or(f64::NAN);
                stability = vec![
                    num(rep.rho_eta),
                    num(rep.rho_lambda),
                    flag(rep.eta_active),
                    num(damped),
                    flag(rep.stable),
                    flag(rep.hessian_pd),
                    num(rep.sigma_min_m),
                ];
            }
        }
        node_values = Some((m, v));
    }
    fields.extend([opt(f), opt(mean_err), opt(var_err), opt(sigma_err)]);
    fields.extend(stability);

    let mut w = csv::Writer::from_writer(sink(&args.out.out, stdout)?);
    w.write_record([
        "status",
        "iterations",
        "alpha",
        "epsilon",
        "partition",
        "f_alpha",
        "mean_err_inf",
        "var_err_inf",
        "sigma_err",
        "rho_eta",
        "rho_lambda",
        "eta_active",
        "rho_damped",
        "stable",
        "hessian_pd",
        "sigma_min_m",
    ])?;
    w.write_record(&fields)?;
    w.flush()?;

    if let Some(path) = &args.trace {
        let mut t = csv_file(path)?;
        t.write_record(["iter", "max_delta_eta", "max_delta_lambda", "f_alpha_c", "normalizable"])?;
        for row in &res.trace {
            t.write_record([
                row.iter.to_string(),
                num(row.max_delta_eta),
                num(row.max_delta_lambda),
                opt(row.f_alpha_c),
                flag(row.normalizable),
            ])?;
        }
        t.flush()?;
    }
    if let (Some(path), Some((m, v))) = (&args.marginals, &node_values) {
        write_marginals(path, m, v, exact.as_ref())?;
    }
    Ok(match res.status {
        BpStatus::Converged => Outcome::Success,
        s => Outcome::NotConverged(s.as_str().into()),
    })
}

fn minimize(args: &MinimizeArgs, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    let lm = load_model(&args.model, ctx.dense_guard)?;
    let model = &lm.model;
    check_alpha(args.alpha)?;
    let v0 = match (args.v0, args.v0_perron) {
        (Some(c), _) => Some(vec![c; model.n()]),
        (None, Some(t)) => {
            let s = spectral_analysis(model).map_err(|e| usage(format!("--v0-perron: {e}")))?;
            Some(s.u_max.iter().map(|u| t * t * u * u).collect())
        }
        (None, None) => None,
    };
    let opts = MinOptions { v0, tol_grad: args.tol, max_iters: args.max_iters, ..MinOptions::default() };
    let alpha = AlphaAssignment::Uniform(args.alpha);
    let res = newton_minimize(model, &alpha, &opts).map_err(usage)?;
    let exact = oracle(&lm, ctx).map(|e| lm.unscale(&e));
    let (m, v) = lm.unscale_nodes(&res.m, &res.v);

    let verdict = if res.status == MinStatus::Converged {
        induced_marginals(model, res.m.clone(), res.v.clone(), &alpha)
            .and_then(|mm| is_local_minimum(model, &mm, &alpha))
            .map(|v| match v {
                MinimumVerdict::Minimum => "Minimum",
                MinimumVerdict::SaddleOrMax => "SaddleOrMax",
                MinimumVerdict::Indeterminate => "Indeterminate",
            })
            .unwrap_or("")
    } else {
        ""
    };
    let finite = v.iter().all(|x| x.is_finite() && *x > 0.0);
    let (var_err, sigma_err) = match (&exact, finite) {
        (Some(e), true) => (Some(inf_diff(&v, e.v())), Some(sigma_error(&v, e.v()))),
        _ => (None, None),
    };
    let mut w = csv::Writer::from_writer(sink(&args.out.out, stdout)?);
    w.write_record([
        "status",
        "iterations",
        "alpha",
        "f",
        "grad_inf",
        "hessian_pd",
        "verdict",
        "min_v",
        "max_v",
        "var_err_inf",
        "sigma_err",
    ])?;
    w.write_record([
        res.status.as_str().to_string(),
        res.iterations.to_string(),
        num(args.alpha),
        num(res.f),
        num(res.grad_norm),
        flag(res.hessian_pd),
        verdict.to_string(),
        num(v.iter().copied().fold(f64::INFINITY, f64::min)),
        num(v.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        opt(var_err),
        opt(sigma_err),
    ])?;
    w.flush()?;
    if let Some(path) = &args.trace {
        let mut t = csv_file(path)?;
        t.write_record(["iter", "f", "grad_inf", "step_size", "min_v"])?;
        for row in &res.trace {
            t.write_record([row.iter.to_string(), num(row.f), num(row.grad_inf), num(row.step_size), num(row.min_v)])?;
        }
        t.flush()?;
    }
    if let Some(path) = &args.marginals {
        write_marginals(path, &m, &v, exact.as_ref())?;
    }
    Ok(match res.status {
        MinStatus::Converged => Outcome::Success,
        s => Outcome::NotConverged(s.as_str().into()),
    })
}

fn profile(args: &ProfileArgs, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    let lm = load_model(&args.model, ctx.dense_guard)?;
    check_alpha(args.alpha)?;
    let grid = parse_grid(&args.sigma_grid).map_err(|e| usage(format!("--sigma-grid: {e}")))?;
    let s = spectral_analysis(&lm.model).map_err(|e| usage(format!("profile direction: {e}")))?;
    let prof = symmetric_profile(&lm.model, &AlphaAssignment::Uniform(args.alpha), &grid, &s.u_max).map_err(usage)?;
    let mut w = csv::Writer::from_writer(sink(&args.out.out, stdout)?);
    w.write_record(["sigma", "f", "interior_min"])?;
    for (k, &(sigma, f)) in prof.points.iter().enumerate() {
        w.write_record([num(sigma), num(f), flag(prof.interior_minima.contains(&k))])?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

fn sweep(args: &SweepArgs, ctx: &Context, stdout: &mut dyn Write) -> Result<Outcome, CommandError> {
    let lm = load_model(&args.model, ctx.dense_guard)?;
    let alphas = parse_grid(&args.alphas).map_err(|e| usage(format!("--alphas: {e}")))?;
    let settings = SweepSettings {
        epsilon: args.flags.epsilon,
        tol: args.flags.tol,
        max_iters: args.flags.max_iters,
        newton: !args.no_newton,
    };
    BpOptions { epsilon: settings.epsilon, tol: settings.tol, max_iters: settings.max_iters, ..BpOptions::default() }
        .validate()
        .map_err(usage)?;
    let (partition, _) = choose_partition(&lm.model, args.flags.init_partition)?;
    let exact = exact_marginals_with_guard(&lm.model, ctx.dense_guard).ok();
    let rows = sweep_alpha(&lm.model, &partition, &alphas, &settings, exact.as_ref().map(|e| e.v()));
    let mut w = csv::Writer::from_writer(sink(&args.out.out, stdout)?);
    w.write_record([
        "alpha",
        "bp_status",
        "bp_iterations",
        "bp_f",
        "bp_sigma_err",
        "newton_status",
        "newton_f",
        "newton_sigma_err",
    ])?;
    for r in rows {
        w.write_record([
            num(r.alpha),
            r.bp_status.as_str().to_string(),
            r.bp_iterations.to_string(),
            opt(r.bp_f),
            opt(r.bp_sigma_err),
            r.newton_status.map(|s| s.as_str().to_string()).unwrap_or_default(),
            opt(r.newton_f),
            opt(r.newton_sigma_err),
        ])?;
    }
    w.flush()?;
    Ok(Outcome::Success)
}

fn kregular(args: &KregularArgs, out: &mut dyn Write) -> Result<Outcome, CommandError> {
    let spec = KRegularSpec { n: args.n, k: args.k, r: args.r };
    let model = build_k_regular(&spec).map_err(|e| usage(format!("n={} k={} r={}: {e}", args.n, args.k, args.r)))?;
    writeln!(out, "n={} k={} r={}", args.n, args.k, args.r)?;
    writeln!(out, "{}", analysis_line(&model, args.alpha)?)?;
    writeln!(out, "r_valid={}", trim_number(r_valid(args.n, args.k).map_err(usage)?))?;
    let rc = critical_r(args.k, args.alpha).map(trim_number).unwrap_or_else(|_| "none".into());
    writeln!(out, "r_c={rc} alpha={}", args.alpha)?;
    let ac = critical_alpha(args.k, args.r).map(trim_number).unwrap_or_else(|_| "none".into());
    writeln!(out, "alpha_c={ac}")?;
    if let Some(prefix) = &args.out {
        let comment = format!("circulant C_{}(1..{}) with r = {}", args.n, args.k / 2, args.r);
        let (mtx, h) =
            save_model(prefix, &model, Some(&comment)).map_err(|e| InputError::new(prefix, None, e.to_string()))?;
        writeln!(out, "wrote {} {}", mtx.display(), h.display())?;
    }
    Ok(Outcome::Success)
}

fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<Outcome, CommandError> {
    let spec = ModelSpec {
        n: args.n,
        structure: match args.structure {
            StructureArg::Random => Structure::Random { density: args.density },
            StructureArg::Ring => Structure::Ring,
            StructureArg::Path => Structure::Path,
            StructureArg::Complete => Structure::Complete,
        },
        target_lambda_max: args.lambda_max,
        sign_mode: match args.signs {
            SignArg::Positive => SignMode::Positive,
            SignArg::Negative => SignMode::Negative,
            SignArg::Mixed => SignMode::Mixed,
        },
        linear_term: match args.field {
            FieldArg::Zero => LinearTerm::Zero,
            FieldArg::Uniform => LinearTerm::Uniform,
        },
        seed: args.seed,
    };
    let model = generate_model(&spec).map_err(usage)?;
    let comment = format!("generated: n = {}, lambda_max = {}, seed = {}", args.n, args.lambda_max, args.seed);
    let (mtx, h) =
        save_model(&args.out, &model, Some(&comment)).map_err(|e| InputError::new(&args.out, None, e.to_string()))?;
    writeln!(out, "{}", analysis_line(&model, 1.0)?)?;
    writeln!(out, "wrote {} {}", mtx.display(), h.display())?;
    Ok(Outcome::Success)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trimmed_numbers() {
        assert_eq!(trim_number(1.0800000000000003), "1.08");
        assert_eq!(trim_number(0.0), "0");
        assert_eq!(trim_number(-1e-9), "0");
        assert_eq!(trim_number(2.0), "2");
        assert_eq!(trim_number(0.2886751345948129), "0.288675");
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        let g = parse_grid("0.01:100:5").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[2] - 1.0).abs() < 1e-12);
        for bad in ["", "0:1:3", "1:2", "a,b", "1,-1", "2:1:3"] {
            assert!(parse_grid(bad).is_err(), "{bad}");
        }
    }
}
