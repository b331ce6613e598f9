use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lmmse_lab::dataset_io::{
    center_dataset, center_with_mean, load_idx_images, synthetic_image_dataset, ImageDataset,
};
use lmmse_lab::experiments::{
    run_denoise_experiment, run_gaussian_experiment, wishart_trace_experiment, ExperimentConfig,
    TailReport,
};
use lmmse_lab::matio::{read_matrix, write_matrix, MatrixDoc};
use lmmse_lab::model::{build_model, solve_lmmse};
use lmmse_lab::planner::{
    as_sample_count, n_expected_gaussian, n_tail_gaussian, n_tail_gaussian_simplified,
};
use lmmse_lab::sampling::experiment_stream;
use lmmse_lab::tail_bounds;
use lmmse_lab::{GramStats, LabError, Result, SeedSpec};
use serde::Serialize;

use crate::out::{csv_f64, Format, OutCtx};

#[derive(Parser)]
#[command(
    name = "lmmse-lab",
    version,
    about = "LMMSE estimation lab: sample-size planning, tail bounds, exact solves, and Monte Carlo campaigns"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample-size rules n0, n1, n2 for a target tolerance.
    Plan(PlanArgs),
    /// Solve a concrete model: Θ*, C_EE, trace(C_EE), C_YY.
    Lmmse(LmmseArgs),
    /// Evaluate a named tail bound from explicit statistics.
    Bounds(BoundsArgs),
    /// Tail campaign for the random Gaussian model.
    GaussianExp(GaussianArgs),
    /// Tail campaign for image denoising.
    DenoiseExp(DenoiseArgs),
    /// Wishart trace experiment behind the expected-excess law.
    Wishart(WishartArgs),
}

#[derive(Args)]
struct OutputArgs {
    /// Directory for result files and the metadata sidecar.
    #[arg(long, default_value = ".", global = true)]
    out: PathBuf,
    /// Encoding of the result files (the sidecar is always JSON).
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan(args) => cmd_plan(args),
        Command::Lmmse(args) => cmd_lmmse(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::GaussianExp(args) => cmd_gaussian_exp(args),
        Command::DenoiseExp(args) => cmd_denoise_exp(args),
        Command::Wishart(args) => cmd_wishart(args),
    }
}

#[derive(Args)]
struct PlanArgs {
    /// Data dimension M.
    #[arg(long = "M")]
    m: usize,
    /// Relative excess tolerance ε.
    #[arg(long)]
    eps: f64,
    /// Failure probability δ for the tail rules.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Spectral ratio ν = ‖C_EE‖₂/trace(C_EE); 1 is the worst case.
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    /// Sub-Gaussian parameter ρ, echoed for the general tail rule.
    #[arg(long)]
    rho: Option<f64>,
    /// Absolute constant c, echoed for the general tail rule.
    #[arg(long = "c")]
    c_abs: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct PlanTable {
    m: usize,
    eps: f64,
    delta: f64,
    nu: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    c_abs: Option<f64>,
    n0: u64,
    n1: f64,
    n1_ceil: u64,
    n2: f64,
    n2_ceil: u64,
}

fn cmd_plan(args: PlanArgs) -> Result<()> {
    let n0 = n_expected_gaussian(args.m, args.eps)?;
    let n1 = n_tail_gaussian(args.m, args.eps, args.delta, args.nu)?;
    let n2 = n_tail_gaussian_simplified(args.m, args.eps, args.delta)?;
    let table = PlanTable {
        m: args.m,
        eps: args.eps,
        delta: args.delta,
        nu: args.nu,
        rho: args.rho,
        c_abs: args.c_abs,
        n0,
        n1,
        n1_ceil: as_sample_count(n1)?,
        n2,
        n2_ceil: as_sample_count(n2)?,
    };
    println!("n0 = {}", table.n0);
    println!("n1 = {:.3} (ceil {})", table.n1, table.n1_ceil);
    println!("n2 = {:.3} (ceil {})", table.n2, table.n2_ceil);
    if let (Some(rho), Some(c_abs)) = (args.rho, args.c_abs) {
        println!("general-rule inputs: rho = {rho}, c = {c_abs}");
    }
    let mut ctx = OutCtx::new(&args.output.out, args.output.format)?;
    let stem = format!("plan_{}", args.eps);
    match ctx.format {
        Format::Json => {
            ctx.write_json(&format!("{stem}.json"), &table)?;
        }
        Format::Csv => {
            let csv = format!(
                "n0,n1,n1_ceil,n2,n2_ceil\n{},{},{},{},{}\n",
                table.n0,
                csv_f64(table.n1),
                table.n1_ceil,
                csv_f64(table.n2),
                table.n2_ceil
            );
            ctx.write_text(&format!("{stem}.csv"), &csv)?;
        }
    }
    ctx.sidecar(&format!("{stem}.meta.json"), "plan", &table)
}

#[derive(Args)]
struct LmmseArgs {
    /// Forward operator A (matrix file, header `rows cols`).
    #[arg(long)]
    a: PathBuf,
    /// Prior covariance Cxx (matrix file).
    #[arg(long)]
    cxx: PathBuf,
    /// Noise covariance Czz (matrix file).
    #[arg(long)]
    czz: PathBuf,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct LmmseSummary {
    a: String,
    cxx: String,
    czz: String,
    trace_cee: f64,
    form_gap: f64,
}

fn cmd_lmmse(args: LmmseArgs) -> Result<()> {
    let a = read_matrix(&args.a)?;
    let cxx = read_matrix(&args.cxx)?;
    let czz = read_matrix(&args.czz)?;
    let model = build_model(a, cxx, czz)?;
    let sol = solve_lmmse(&model)?;
    let mut ctx = OutCtx::new(&args.output.out, args.output.format)?;
    let matrices = [
        ("lmmse_theta_star", &sol.theta_star),
        ("lmmse_cee", &sol.cee),
        ("lmmse_cyy", &sol.cyy),
    ];
    for (name, matrix) in matrices {
        match ctx.format {
            Format::Csv => {
                let file = format!("{name}.txt");
                write_matrix(&ctx.path(&file), matrix)?;
                ctx.note_file(&file);
            }
            Format::Json => {
                ctx.write_json(&format!("{name}.json"), &MatrixDoc::from_matrix(matrix))?;
            }
        }
    }
    let summary = LmmseSummary {
        a: args.a.display().to_string(),
        cxx: args.cxx.display().to_string(),
        czz: args.czz.display().to_string(),
        trace_cee: sol.mse,
        form_gap: sol.form_gap,
    };
    match ctx.format {
        Format::Json => {
            ctx.write_json("lmmse_summary.json", &summary)?;
        }
        Format::Csv => {
            let csv = format!(
                "trace_cee,form_gap\n{},{}\n",
                csv_f64(summary.trace_cee),
                csv_f64(summary.form_gap)
            );
            ctx.write_text("lmmse_summary.csv", &csv)?;
        }
    }
    println!("trace(C_EE) = {:.6}", sol.mse);
    ctx.sidecar("lmmse.meta.json", "lmmse", &summary)
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    output: OutputArgs,
    #[command(subcommand)]
    which: BoundCmd,
}

#[derive(Args)]
struct TOpt {
    /// Deviation parameter t; defaults to ln(3/δ).
    #[arg(long)]
    t: Option<f64>,
    /// Failure probability δ used when --t is absent.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

impl TOpt {
    fn resolve(&self) -> Result<f64> {
        match self.t {
            Some(t) => Ok(t),
            None => {
                if !(self.delta > 0.0 && self.delta < 3.0) {
                    return Err(LabError::invalid(
                        "delta",
                        format!("need delta in (0,3), got {}", self.delta),
                    ));
                }
                Ok((3.0 / self.delta).ln())
            }
        }
    }
}

#[derive(Subcommand)]
enum BoundCmd {
    /// σ-sub-Gaussian vector through a fixed quadratic form.
    QuadraticForm {
        /// trace(Σ).
        #[arg(long)]
        trace: f64,
        /// trace(Σ²).
        #[arg(long)]
        trace2: f64,
        /// ‖Σ‖₂.
        #[arg(long)]
        norm: f64,
        #[arg(long)]
        sigma: f64,
        /// ‖Hμ‖² of the mean.
        #[arg(long, default_value_t = 0.0)]
        mean: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Normalized sum of i.i.d. centered σ-sub-Gaussian vectors in R^M.
    Sum {
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Sub-Gaussian parameter of a product V·W with |W| ≤ b.
    ProductParam {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        b: f64,
    },
    /// Normalized sum weighted by factors bounded by b.
    WeightedSum {
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        b: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Matrix with 1-sub-Gaussian whitened rows through a quadratic form.
    MatrixQuadratic {
        /// trace(C) of the row companion matrix.
        #[arg(long)]
        trace_c: f64,
        #[arg(long)]
        trace_c2: f64,
        #[arg(long)]
        norm_c: f64,
        /// trace(Σ) of the fixed form.
        #[arg(long)]
        trace_s: f64,
        #[arg(long)]
        trace_s2: f64,
        #[arg(long)]
        norm_s: f64,
        /// ‖E[V]H‖_F² of the mean part.
        #[arg(long, default_value_t = 0.0)]
        mean: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Extreme singular values of an n×M isotropic sub-Gaussian matrix.
    SingularValues {
        #[arg(long)]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long = "c", default_value_t = 1.0)]
        c_abs: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Conditional excess-MSE bounds given the design's Gram statistics.
    Conditional {
        /// Design matrix file; its Gram statistics are computed here.
        #[arg(long, conflicts_with_all = ["trace_inv", "trace_inv2", "norm_inv", "lambda_max"])]
        gram: Option<PathBuf>,
        /// trace((GᵀG)⁻¹), if --gram is not given.
        #[arg(long, requires_all = ["trace_inv2", "norm_inv", "lambda_max"])]
        trace_inv: Option<f64>,
        /// trace((GᵀG)⁻²).
        #[arg(long)]
        trace_inv2: Option<f64>,
        /// ‖(GᵀG)⁻¹‖₂.
        #[arg(long)]
        norm_inv: Option<f64>,
        /// Largest Gram eigenvalue.
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long = "M")]
        m: usize,
        /// trace(C) of the error companion matrix.
        #[arg(long)]
        trace_c: f64,
        #[arg(long)]
        trace_c2: f64,
        #[arg(long)]
        norm_c: f64,
        /// ‖(GᵀG)⁻¹GᵀM‖_F² of the conditional-mean part.
        #[arg(long, default_value_t = 0.0)]
        mean_proj: f64,
        #[command(flatten)]
        t: TOpt,
    },
    /// Unconditional excess-MSE tail bound from companion statistics.
    ApproxTail {
        /// trace(C).
        #[arg(long)]
        trace: f64,
        /// trace(C²).
        #[arg(long)]
        trace2: f64,
        /// ‖C‖₂.
        #[arg(long)]
        norm: f64,
        /// ‖μ‖₂² of the componentwise conditional-mean bound.
        #[arg(long, default_value_t = 0.0)]
        mu_norm_sq: f64,
        /// Ambient dimension N (enters the probability floor).
        #[arg(long = "N")]
        n_dim: usize,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        #[arg(long = "c", default_value_t = 1.0)]
        c_abs: f64,
        /// Sample count n.
        #[arg(long)]
        n: usize,
        #[arg(long = "M")]
        m: usize,
        /// Union-bound parameter s; defaults to t + ln N.
        #[arg(long)]
        s: Option<f64>,
        #[command(flatten)]
        t: TOpt,
    },
    /// Sub-Gaussian parameter of a uniform variable on [a,b].
    ParamUniform {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
    /// Sub-Gaussian parameter of any variable supported on [a,b].
    ParamBounded {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
    },
}

#[derive(Serialize)]
struct BoundReport {
    bound: &'static str,
    inputs: serde_json::Value,
    values: serde_json::Map<String, serde_json::Value>,
    /// Lower bound on the probability that the bound holds; absent for
    /// deterministic parameter computations.
    #[serde(skip_serializing_if = "Option::is_none")]
    probability_floor: Option<f64>,
}

type BoundEval = (&'static str, serde_json::Value, Vec<(&'static str, f64)>, Option<f64>);

fn evaluate_bound(cmd: &BoundCmd) -> Result<BoundEval> {
    use serde_json::json;
    match cmd {
        BoundCmd::QuadraticForm { trace, trace2, norm, sigma, mean, t } => {
            let t = t.resolve()?;
            let value = tail_bounds::quadratic_form_bound(*trace, *trace2, *norm, *sigma, *mean, t)?;
            Ok((
                "quadratic-form",
                json!({"trace": trace, "trace2": trace2, "norm": norm, "sigma": sigma, "mean": mean, "t": t}),
                vec![("bound", value)],
                Some(1.0 - (-t).exp()),
            ))
        }
        BoundCmd::Sum { m, sigma, t } => {
            let t = t.resolve()?;
            let value = tail_bounds::sum_subgaussian_bound(*m, *sigma, t)?;
            Ok((
                "sum",
                json!({"M": m, "sigma": sigma, "t": t}),
                vec![("bound", value)],
                Some(1.0 - (-t).exp()),
            ))
        }
        BoundCmd::ProductParam { sigma, b } => {
            let value = tail_bounds::product_subgaussian_param(*sigma, *b)?;
            Ok((
                "product-param",
                json!({"sigma": sigma, "b": b}),
                vec![("parameter", value)],
                None,
            ))
        }
        BoundCmd::WeightedSum { m, sigma, b, t } => {
            let t = t.resolve()?;
            let value = tail_bounds::weighted_sum_bound(*m, *sigma, *b, t)?;
            Ok((
                "weighted-sum",
                json!({"M": m, "sigma": sigma, "b": b, "t": t}),
                vec![("bound", value)],
                Some(1.0 - (-t).exp()),
            ))
        }
        BoundCmd::MatrixQuadratic {
            trace_c, trace_c2, norm_c, trace_s, trace_s2, norm_s, mean, t,
        } => {
            let t = t.resolve()?;
            let value = tail_bounds::matrix_quadratic_bound(
                *trace_c, *trace_c2, *norm_c, *trace_s, *trace_s2, *norm_s, *mean, t,
            )?;
            Ok((
                "matrix-quadratic",
                json!({
                    "trace_c": trace_c, "trace_c2": trace_c2, "norm_c": norm_c,
                    "trace_s": trace_s, "trace_s2": trace_s2, "norm_s": norm_s,
                    "mean": mean, "t": t
                }),
                vec![("bound", value)],
                Some(1.0 - (-t).exp()),
            ))
        }
        BoundCmd::SingularValues { n, m, rho, c_abs, t } => {
            let t = t.resolve()?;
            let (lo, hi) = tail_bounds::singular_value_bounds(*n, *m, *rho, *c_abs, t)?;
            Ok((
                "singular-values",
                json!({"n": n, "M": m, "rho": rho, "c": c_abs, "t": t}),
                vec![("lower", lo), ("upper", hi)],
                Some(1.0 - 2.0 * (-t).exp()),
            ))
        }
        BoundCmd::Conditional {
            gram, trace_inv, trace_inv2, norm_inv, lambda_max,
            m, trace_c, trace_c2, norm_c, mean_proj, t,
        } => {
            let t = t.resolve()?;
            let stats = match gram {
                Some(path) => tail_bounds::gram_stats(&read_matrix(path)?)?,
                None => {
                    let (Some(trace_inv), Some(trace_inv2), Some(norm_inv), Some(lambda_max)) =
                        (*trace_inv, *trace_inv2, *norm_inv, *lambda_max)
                    else {
                        return Err(LabError::invalid(
                            "gram",
                            "give --gram FILE or all of --trace-inv --trace-inv2 --norm-inv --lambda-max",
                        ));
                    };
                    if !(norm_inv > 0.0) {
                        return Err(LabError::invalid("norm_inv", "need norm_inv > 0"));
                    }
                    GramStats {
                        trace_inv,
                        trace_inv2,
                        norm_inv,
                        lambda_min: 1.0 / norm_inv,
                        lambda_max,
                    }
                }
            };
            let (eps_err, eps_bias) = tail_bounds::conditional_error_bounds(
                &stats,
                *m,
                (*trace_c, *trace_c2, *norm_c),
                *mean_proj,
                t,
            )?;
            Ok((
                "conditional",
                json!({
                    "trace_inv": stats.trace_inv, "trace_inv2": stats.trace_inv2,
                    "norm_inv": stats.norm_inv, "lambda_max": stats.lambda_max,
                    "M": m, "trace_c": trace_c, "trace_c2": trace_c2, "norm_c": norm_c,
                    "mean_proj": mean_proj, "t": t
                }),
                vec![("eps_err", eps_err), ("eps_bias", eps_bias)],
                Some(1.0 - (-t).exp()),
            ))
        }
        BoundCmd::ApproxTail {
            trace, trace2, norm, mu_norm_sq, n_dim, rho, c_abs, n, m, s, t,
        } => {
            let t = t.resolve()?;
            let s = s.unwrap_or(t + (*n_dim as f64).max(1.0).ln());
            let (eps_err, eps_bias, floor) = tail_bounds::approx_error_tail_bound_from_stats(
                *trace, *trace2, *norm, *mu_norm_sq, *n_dim, *rho, *c_abs, *n, *m, t, s,
            )?;
            Ok((
                "approx-tail",
                json!({
                    "trace": trace, "trace2": trace2, "norm": norm,
                    "mu_norm_sq": mu_norm_sq, "N": n_dim, "rho": rho, "c": c_abs,
                    "n": n, "M": m, "t": t, "s": s
                }),
                vec![("eps_err", eps_err), ("eps_bias", eps_bias)],
                Some(floor),
            ))
        }
        BoundCmd::ParamUniform { a, b } => {
            let value = tail_bounds::subgaussian_param_uniform(*a, *b)?;
            Ok(("param-uniform", json!({"a": a, "b": b}), vec![("parameter", value)], None))
        }
        BoundCmd::ParamBounded { a, b } => {
            let value = tail_bounds::subgaussian_param_bounded(*a, *b)?;
            Ok(("param-bounded", json!({"a": a, "b": b}), vec![("parameter", value)], None))
        }
    }
}

fn cmd_bounds(args: BoundsArgs) -> Result<()> {
    let (name, inputs, vals, floor) = evaluate_bound(&args.which)?;
    for (key, value) in &vals {
        println!("{key} = {value}");
    }
    if let Some(floor) = floor {
        println!("probability floor = {floor:.6}");
    }
    let mut values = serde_json::Map::new();
    for (key, value) in &vals {
        values.insert((*key).to_string(), serde_json::json!(value));
    }
    let report = BoundReport { bound: name, inputs, values, probability_floor: floor };
    let mut ctx = OutCtx::new(&args.output.out, args.output.format)?;
    let stem = format!("bounds_{name}");
    match ctx.format {
        Format::Json => {
            ctx.write_json(&format!("{stem}.json"), &report)?;
        }
        Format::Csv => {
            let mut csv = String::from("key,value\n");
            for (key, value) in &vals {
                csv.push_str(&format!("{key},{}\n", csv_f64(*value)));
            }
            if let Some(floor) = floor {
                csv.push_str(&format!("probability_floor,{}\n", csv_f64(floor)));
            }
            ctx.write_text(&format!("{stem}.csv"), &csv)?;
        }
    }
    ctx.sidecar(&format!("{stem}.meta.json"), "bounds", &report)
}

#[derive(Args)]
struct CampaignArgs {
    /// Tolerances ε, one report per value.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0625, 0.25, 0.5, 1.0])]
    eps: Vec<f64>,
    /// Replications per ε.
    #[arg(long, default_value_t = 300)]
    reps: usize,
    /// Master seed; reruns with the same seed are byte-identical.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the replication loop.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Exceedance thresholds τ; empty picks 64 log-spaced points.
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
}

impl CampaignArgs {
    fn config(&self, m: usize, n_dim: usize, sigma: f64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(m, n_dim);
        cfg.eps_list = self.eps.clone();
        cfg.replications = self.reps;
        cfg.master_seed = self.seed;
        cfg.parallel_workers = self.workers;
        cfg.tau_grid = self.tau.clone();
        cfg.sigma = sigma;
        cfg
    }
}

#[derive(Args)]
struct GaussianArgs {
    /// Data dimension M.
    #[arg(long = "M")]
    m: usize,
    /// Signal dimension N.
    #[arg(long = "N")]
    n_dim: usize,
    #[command(flatten)]
    campaign: CampaignArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Serialize)]
struct CellMeta {
    eps: f64,
    n: usize,
    trace_cee: f64,
    reference_expected: f64,
    reference_asymptotic: f64,
    retries: usize,
}

#[derive(Serialize)]
struct CampaignMeta<'a> {
    config: &'a ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset: Option<&'a str>,
    cells: Vec<CellMeta>,
}

fn write_campaign(
    output: &OutputArgs,
    prefix: &str,
    cfg: &ExperimentConfig,
    dataset: Option<&str>,
    reports: &[TailReport],
) -> Result<()> {
    let mut ctx = OutCtx::new(&output.out, output.format)?;
    for report in reports {
        let stem = format!("{prefix}_{}_{}", report.eps, cfg.master_seed);
        match ctx.format {
            Format::Json => {
                ctx.write_json(&format!("{stem}.json"), report)?;
            }
            Format::Csv => {
                let mut tail = String::from("tau,exceed_fraction\n");
                for (tau, frac) in report.tau_grid.iter().zip(&report.exceed_fractions) {
                    tail.push_str(&format!("{},{}\n", csv_f64(*tau), csv_f64(*frac)));
                }
                ctx.write_text(&format!("{stem}.csv"), &tail)?;
                let mut raw = String::from("replication,mse,test_mse\n");
                for (r, mse) in report.mse_values.iter().enumerate() {
                    let test = report
                        .test_values
                        .as_ref()
                        .map(|v| csv_f64(v[r]))
                        .unwrap_or_default();
                    raw.push_str(&format!("{r},{},{}\n", csv_f64(*mse), test));
                }
                ctx.write_text(&format!("{stem}_raw.csv"), &raw)?;
            }
        }
        println!(
            "eps = {}: n = {}, trace(C_EE) = {:.6}, mean mse = {:.6}, expected ref = {:.6}",
            report.eps,
            report.n,
            report.trace_cee,
            report.mse_values.iter().sum::<f64>() / report.mse_values.len() as f64,
            report.reference_expected,
        );
    }
    let meta = CampaignMeta {
        config: cfg,
        dataset,
        cells: reports
            .iter()
            .map(|r| CellMeta {
                eps: r.eps,
                n: r.n,
                trace_cee: r.trace_cee,
                reference_expected: r.reference_expected,
                reference_asymptotic: r.reference_asymptotic,
                retries: r.retries,
            })
            .collect(),
    };
    ctx.sidecar(&format!("{prefix}_{}.meta.json", cfg.master_seed), prefix, &meta)
}

fn cmd_gaussian_exp(args: GaussianArgs) -> Result<()> {
    let cfg = args.campaign.config(args.m, args.n_dim, 0.1);
    let reports = run_gaussian_experiment(&cfg)?;
    write_campaign(&args.output, "gaussian-exp", &cfg, None, &reports)
}

#[derive(Args)]
struct DenoiseArgs {
    /// Synthetic dataset as N,COUNT or N,COUNT,TEST (default TEST = 2·COUNT/5).
    #[arg(long, value_parser = parse_synthetic, conflicts_with = "data_dir")]
    synthetic: Option<SyntheticSpec>,
    /// Directory with train-images-idx3-ubyte and t10k-images-idx3-ubyte;
    /// falls back to LMMSE_LAB_DATA_DIR.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Noise level σ (noise is uniform with this standard deviation).
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[command(flatten)]
    campaign: CampaignArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy)]
struct SyntheticSpec {
    n_dim: usize,
    count: usize,
    test: usize,
}

fn parse_synthetic(s: &str) -> std::result::Result<SyntheticSpec, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if !(parts.len() == 2 || parts.len() == 3) {
        return Err("expected N,COUNT or N,COUNT,TEST".into());
    }
    let field = |i: usize, name: &str| -> std::result::Result<usize, String> {
        parts[i]
            .trim()
            .parse::<usize>()
            .map_err(|e| format!("bad {name} in --synthetic: {e}"))
    };
    let n_dim = field(0, "N")?;
    let count = field(1, "COUNT")?;
    let test = if parts.len() == 3 { field(2, "TEST")? } else { 2 * count / 5 };
    if n_dim == 0 || count == 0 || test == 0 {
        return Err("N, COUNT, and TEST must all be positive".into());
    }
    Ok(SyntheticSpec { n_dim, count, test })
}

fn load_denoise_datasets(args: &DenoiseArgs) -> Result<(ImageDataset, ImageDataset, String)> {
    if let Some(spec) = args.synthetic {
        // Train and test are one draw centered by their combined mean,
        // then split, so both halves share the same affine frame.
        let seed = SeedSpec::new(args.campaign.seed, experiment_stream(0, 0));
        let all = synthetic_image_dataset(spec.n_dim, spec.count + spec.test, seed)?;
        let (train, test) = all.split_at(spec.count)?;
        let tag = format!("synthetic N={} train={} test={}", spec.n_dim, spec.count, spec.test);
        return Ok((train, test, tag));
    }
    let dir = match &args.data_dir {
        Some(dir) => dir.clone(),
        None => match std::env::var_os("LMMSE_LAB_DATA_DIR") {
            Some(dir) => PathBuf::from(dir),
            None => {
                return Err(LabError::invalid(
                    "data",
                    "give --synthetic N,COUNT, --data-dir DIR, or set LMMSE_LAB_DATA_DIR",
                ))
            }
        },
    };
    let train_raw = load_idx_images(&dir.join("train-images-idx3-ubyte"))?;
    let test_raw = load_idx_images(&dir.join("t10k-images-idx3-ubyte"))?;
    let train = center_dataset(&train_raw);
    // Test images are shifted by the train mean so the fitted map sees
    // the frame it was trained in.
    let test = center_with_mean(&test_raw, &train.mean_vector)?;
    let tag = format!("idx dir={} train={} test={}", dir.display(), train.count(), test.count());
    Ok((train, test, tag))
}

fn cmd_denoise_exp(args: DenoiseArgs) -> Result<()> {
    let (train, test, tag) = load_denoise_datasets(&args)?;
    let dim = train.dim();
    let cfg = args.campaign.config(dim, dim, args.sigma);
    let reports = run_denoise_experiment(&cfg, &train, &test)?;
    write_campaign(&args.output, "denoise-exp", &cfg, Some(&tag), &reports)
}

#[derive(Args)]
struct WishartArgs {
    /// Matrix dimension M.
    #[arg(long = "M")]
    m: usize,
    /// Rows per draw; needs n > M+1.
    #[arg(long)]
    n: usize,
    /// Number of draws.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn cmd_wishart(args: WishartArgs) -> Result<()> {
    let summary = wishart_trace_experiment(args.m, args.n, args.reps, args.seed)?;
    println!(
        "mean trace((ZᵀZ)⁻¹) = {:.6} over {} draws (exact {:.6}, lower bound {:.6})",
        summary.mean_trace, summary.replications, summary.reference_wishart, summary.reference_lower,
    );
    let mut ctx = OutCtx::new(&args.output.out, args.output.format)?;
    let stem = format!("wishart_{}", args.seed);
    match ctx.format {
        Format::Json => {
            ctx.write_json(&format!("{stem}.json"), &summary)?;
        }
        Format::Csv => {
            let csv = format!(
                "m,n,replications,mean_trace,sd,reference_wishart,reference_lower\n{},{},{},{},{},{},{}\n",
                summary.m,
                summary.n,
                summary.replications,
                csv_f64(summary.mean_trace),
                csv_f64(summary.sd),
                csv_f64(summary.reference_wishart),
                csv_f64(summary.reference_lower),
            );
            ctx.write_text(&format!("{stem}.csv"), &csv)?;
        }
    }
    ctx.sidecar(&format!("{stem}.meta.json"), "wishart", &summary)
}
