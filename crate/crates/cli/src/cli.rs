//! Command-line definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bethe-gauss",
    version,
    about = "Fractional Gaussian belief propagation, Bethe free energies and their diagnostics",
    after_help = "Models are read from NAME.mtx (Matrix Market, coordinate, real or integer, symmetric or general) \
                  with h in NAME.h.txt, one value per line. Models with a non-unit diagonal are rescaled; \
                  marginals are reported in the original variables.\n\n\
                  Environment: BETHE_GAUSS_DENSE_GUARD overrides the size limit for dense exact inference.\n\
                  Exit codes: 0 success, 1 non-convergence, 2 input error."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral radius of |R|, boundedness class and pairwise normalizability.
    #[command(
        after_help = "Prints, per model:\n  lambda_max=.. class=.. pairwise_normalizable=..\n  connected=.. n=.. edges=..\n  u_max=.."
    )]
    Analyze(AnalyzeArgs),
    /// Exact marginals from a dense solve.
    #[command(after_help = "CSV columns: node,m,v\nEdge CSV (--edges): i,j,v_ij")]
    Oracle(OracleArgs),
    /// Fractional message passing from zero messages.
    #[command(after_help = "Summary CSV columns: status,iterations,alpha,epsilon,partition,f_alpha,mean_err_inf,\
                            var_err_inf,sigma_err,rho_eta,rho_lambda,eta_active,rho_damped,stable,hessian_pd,sigma_min_m\n\
                            rho_damped is max |1 - epsilon + epsilon*beta| over the Jacobian eigenvalues; stable \
                            ignores rho_eta when h = 0.\n\
                            Trace CSV (--trace): iter,max_delta_eta,max_delta_lambda,f_alpha_c,normalizable\n\
                            Marginals CSV (--marginals): node,m,v,m_exact,v_exact\n\
                            Empty fields are unavailable values.")]
    Bp(BpArgs),
    /// Newton minimization of the constrained fractional Bethe free energy.
    #[command(after_help = "Summary CSV columns: status,iterations,alpha,f,grad_inf,hessian_pd,verdict,min_v,max_v,\
                            var_err_inf,sigma_err\n\
                            Trace CSV (--trace): iter,f,grad_inf,step_size,min_v\n\
                            Marginals CSV (--marginals): node,m,v,m_exact,v_exact")]
    Minimize(MinimizeArgs),
    /// Energy along the ray sqrt(v) = sigma * u_max.
    #[command(after_help = "CSV columns: sigma,f,interior_min")]
    Profile(ProfileArgs),
    /// Convergence of message passing and Newton over a grid of alpha.
    #[command(after_help = "CSV columns: alpha,bp_status,bp_iterations,bp_f,bp_sigma_err,newton_status,newton_f,\
                            newton_sigma_err\nsigma_err is the 2-norm error of the standard deviations against \
                            the exact ones. Empty fields mark non-convergence.")]
    SweepAlpha(SweepArgs),
    /// Circulant K-regular model and its critical constants.
    Kregular(KregularArgs),
    /// Random or structured model with a prescribed lambda_max(|R|).
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PartitionArg {
    Symmetric,
    Pairwise,
}

#[derive(Debug, Args)]
pub struct OutArg {
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    /// Uniform alpha for the boundary case.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub model: PathBuf,
    #[command(flatten)]
    pub out: OutArg,
    /// Also write edge covariances here.
    #[arg(long)]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BpFlags {
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    /// Potential partition; default is pairwise when lambda_max < 1, symmetric otherwise.
    #[arg(long, value_enum)]
    pub init_partition: Option<PartitionArg>,
}

#[derive(Debug, Args)]
pub struct BpArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub flags: BpFlags,
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub marginals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MinimizeArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Constant starting variance.
    #[arg(long, conflicts_with = "v0_perron")]
    pub v0: Option<f64>,
    /// Start at v = t^2 u_max^2.
    #[arg(long, value_name = "T")]
    pub v0_perron: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[command(flatten)]
    pub out: OutArg,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub marginals: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    pub model: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// LO:HI:COUNT for a log-spaced grid, or a comma-separated list.
    #[arg(long, default_value = "0.01:100:401")]
    pub sigma_grid: String,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub model: PathBuf,
    /// LO:HI:COUNT for a log-spaced grid, or a comma-separated list.
    #[arg(long, default_value = "0.01:100:41")]
    pub alphas: String,
    #[command(flatten)]
    pub flags: BpFlags,
    /// Skip the Newton columns.
    #[arg(long)]
    pub no_newton: bool,
    #[command(flatten)]
    pub out: OutArg,
}

#[derive(Debug, Args)]
pub struct KregularArgs {
    #[arg(long)]
    pub n: usize,
    /// Even degree below n.
    #[arg(long)]
    pub k: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub r: f64,
    /// Alpha for the critical coupling.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Write PREFIX.mtx and PREFIX.h.txt.
    #[arg(long, value_name = "PREFIX")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StructureArg {
    Random,
    Ring,
    Path,
    Complete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SignArg {
    Positive,
    Negative,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Zero,
    Uniform,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = StructureArg::Random)]
    pub structure: StructureArg,
    /// Extra-edge probability for the random structure.
    #[arg(long, default_value_t = 0.3)]
    pub density: f64,
    #[arg(long)]
    pub lambda_max: f64,
    #[arg(long, value_enum, default_value_t = SignArg::Mixed)]
    pub signs: SignArg,
    #[arg(long, value_enum, default_value_t = FieldArg::Uniform)]
    pub field: FieldArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write PREFIX.mtx and PREFIX.h.txt.
    #[arg(long, value_name = "PREFIX")]
    pub out: PathBuf,
}
