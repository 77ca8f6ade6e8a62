//! `ernot` command line: geometry self-tests, discrete Sinkhorn solves,
//! potential training, full benchmarks, the scaling study, and transport
//! map extraction from saved plans.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use ernot::extract::{self, ExtractMode};
use ernot::geometry::checks::{check_all, check_manifold, ManifoldCheckReport};
use ernot::semidual::GibbsPlan;
use ernot::sinkhorn;
use ernot::{ManifoldKind, Mat};
use ernot_cli::bench::{
    self, build_benchmark, build_supports, extractor_settings, median_cost_epsilon,
    run_sinkhorn_reference,
};
use ernot_cli::checkpoint::save_checkpoint;
use ernot_cli::config::{ExtractorOpt, RunOptions};
use ernot_cli::report::{self, PlanFile};
use ernot_cli::scaling::{parse_sizes, run_scaling_study};

#[derive(Parser)]
#[command(
    name = "ernot",
    about = "Entropic Riemannian neural optimal transport benchmarks",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the randomized geometry invariant suite.
    CheckGeometry {
        /// Restrict to one manifold tag (s2, so3, spd3, spd3le, se3, h2).
        #[arg(long)]
        manifold: Option<String>,
        /// Random draws per invariant.
        #[arg(long, default_value_t = 1000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve one entropic OT problem with the log-domain solver.
    Sinkhorn {
        /// CSV cost matrix (uniform marginals are assumed).
        #[arg(long, conflicts_with = "bench")]
        cost: Option<PathBuf>,
        /// Named benchmark instance to build and solve intrinsically.
        #[arg(long)]
        bench: Option<String>,
        /// Override the median-heuristic ε.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plan output: JSON (with geometry) for --bench, CSV for --cost.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Flat key=value overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a potential network on a benchmark and save a checkpoint.
    Train {
        #[arg(long)]
        bench: String,
        /// Checkpoint output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Benchmark operations.
    Bench {
        #[command(subcommand)]
        action: BenchCmd,
    },
    /// Support-size scaling study (neural vs discrete Sinkhorn).
    Scaling {
        #[arg(long)]
        manifold: String,
        /// Either "128..4096" (doubling, inclusive) or "512,1024,4096".
        #[arg(long)]
        sizes: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Extract a transport map from a saved plan JSON.
    Extract {
        #[arg(long)]
        plan: PathBuf,
        /// Extractor: "heat" or "bary".
        #[arg(long)]
        mode: String,
        /// Output CSV of mapped points (flat coordinates); stdout summary
        /// only when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Run a named benchmark end to end and write the metrics table.
    Run {
        #[arg(long)]
        bench: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metrics CSV output path.
        #[arg(long)]
        out: PathBuf,
        /// Optional full-result JSON (spec and config echo, timings).
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_options(config: Option<&Path>) -> Result<RunOptions> {
    let mut options = RunOptions::default();
    if let Some(path) = config {
        options.apply_file(path).context("phase: config")?;
    }
    Ok(options)
}

fn run() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::CheckGeometry {
            manifold,
            draws,
            seed,
        } => cmd_check_geometry(manifold.as_deref(), draws, seed),
        Cmd::Sinkhorn {
            cost,
            bench,
            epsilon,
            seed,
            out,
            config,
        } => cmd_sinkhorn(
            cost.as_deref(),
            bench.as_deref(),
            epsilon,
            seed,
            out.as_deref(),
            config.as_deref(),
        ),
        Cmd::Train {
            bench,
            out,
            seed,
            config,
        } => cmd_train(&bench, &out, seed, config.as_deref()),
        Cmd::Bench {
            action:
                BenchCmd::Run {
                    bench,
                    seed,
                    out,
                    json,
                    config,
                },
        } => cmd_bench_run(&bench, seed, &out, json.as_deref(), config.as_deref()),
        Cmd::Scaling {
            manifold,
            sizes,
            out,
            seed,
            config,
        } => cmd_scaling(&manifold, &sizes, &out, seed, config.as_deref()),
        Cmd::Extract {
            plan,
            mode,
            out,
            config,
        } => cmd_extract(&plan, &mode, out.as_deref(), config.as_deref()),
    }
}

fn print_check_report(report: &ManifoldCheckReport) {
    println!(
        "{:7} draws={} worst={:.3e} | roundtrip tangent {:.2e} point {:.2e} | \
         norm-vs-dist {:.2e} | self-dist {:.2e} sym {:.2e} triangle {:.2e} | \
         constraint {:.2e} sign {:.2e} affine {:.2e}",
        report.kind.tag(),
        report.samples,
        report.worst(),
        report.tangent_roundtrip,
        report.point_roundtrip,
        report.norm_vs_distance,
        report.self_distance,
        report.symmetry,
        report.triangle,
        report.constraint,
        report.sign_invariance,
        report.affine_invariance,
    );
}

/// Residual ceilings for the self-test verdict: round-trips and metric
/// identities at 1e-8, exact symmetries at 1e-12, triangle slack at 1e-9.
fn check_report_passes(report: &ManifoldCheckReport) -> bool {
    report.tangent_roundtrip <= 1e-8
        && report.point_roundtrip <= 1e-8
        && report.norm_vs_distance <= 1e-8
        && report.self_distance <= 1e-7
        && report.symmetry <= 1e-12
        && report.triangle <= 1e-9
        && report.constraint <= 1e-9
        && report.sign_invariance <= 1e-12
        && report.affine_invariance <= 1e-8
}

fn cmd_check_geometry(manifold: Option<&str>, draws: usize, seed: u64) -> Result<()> {
    let reports = match manifold {
        Some(tag) => {
            let kind = ManifoldKind::from_tag(tag)
                .ok_or_else(|| anyhow!("unknown manifold tag {tag:?}"))?;
            vec![check_manifold(kind, draws, seed).context("phase: geometry checks")?]
        }
        None => check_all(draws, seed).context("phase: geometry checks")?,
    };
    let mut all_ok = true;
    for report in &reports {
        print_check_report(report);
        all_ok &= check_report_passes(report);
    }
    if !all_ok {
        bail!("geometry invariants exceeded their residual ceilings");
    }
    println!("all geometry invariants hold");
    Ok(())
}

fn cmd_sinkhorn(
    cost: Option<&Path>,
    bench_name: Option<&str>,
    epsilon: Option<f64>,
    seed: u64,
    out: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    let options = load_options(config)?;
    let opts = sinkhorn::SinkhornOptions {
        max_iters: options.sinkhorn_iters,
        tol: options.sinkhorn_tol,
        record_history: false,
    };
    match (cost, bench_name) {
        (Some(path), None) => {
            let cost_m = report::read_matrix_csv(path).context("phase: cost input")?;
            let eps = match epsilon {
                Some(e) => e,
                None => sinkhorn::median_epsilon(&cost_m, options.epsilon_scale)
                    .context("phase: epsilon")?,
            };
            let (n, m) = (cost_m.rows(), cost_m.cols());
            let mu = vec![1.0 / n as f64; n];
            let nu = vec![1.0 / m as f64; m];
            let result = sinkhorn::sinkhorn_log_domain(&cost_m, &mu, &nu, eps, &opts)
                .context("phase: sinkhorn")?;
            println!(
                "sinkhorn on {n}x{m} cost: value {:.9} epsilon {:.6e} iterations {} marginal error {:.3e}",
                result.value, eps, result.iterations, result.marginal_error
            );
            if let Some(out) = out {
                report::write_matrix_csv(out, &result.plan).context("phase: output")?;
                println!("plan matrix written to {}", out.display());
            }
        }
        (None, Some(name)) => {
            let mut spec = build_benchmark(name, seed).context("phase: benchmark spec")?;
            spec.apply_options(&options);
            let (source, target) = build_supports(&spec).context("phase: supports")?;
            let eps = match epsilon {
                Some(e) => e,
                None => median_cost_epsilon(&source, &target, spec.epsilon_scale, seed)
                    .context("phase: epsilon")?,
            };
            let (result, plan) = run_sinkhorn_reference(&source, &target, eps, &options)
                .context("phase: reference")?;
            println!(
                "sinkhorn on {name} ({}x{}): value {:.9} epsilon {:.6e} iterations {} marginal error {:.3e}",
                source.len(),
                target.len(),
                result.value,
                eps,
                result.iterations,
                result.marginal_error
            );
            if let Some(out) = out {
                PlanFile::from_plan(&plan).write(out).context("phase: output")?;
                println!("plan JSON written to {}", out.display());
            }
        }
        _ => bail!("exactly one of --cost FILE or --bench NAME is required"),
    }
    Ok(())
}

fn cmd_train(bench_name: &str, out: &Path, seed: u64, config: Option<&Path>) -> Result<()> {
    let options = load_options(config)?;
    let mut spec = build_benchmark(bench_name, seed).context("phase: benchmark spec")?;
    spec.apply_options(&options);
    let (source, target) = build_supports(&spec).context("phase: supports")?;
    let epsilon = median_cost_epsilon(&source, &target, spec.epsilon_scale, seed)
        .context("phase: epsilon")?;
    let (state, phi) = bench::train_potential(&spec, &options, &source, &target, epsilon, true)
        .context("phase: train")?;
    let trailing = state
        .trailing_objective_mean(20)
        .ok_or_else(|| anyhow!("training produced no objective history"))?;
    save_checkpoint(out, &state.net, seed).context("phase: output")?;
    println!(
        "trained {bench_name} for {} steps: epsilon {:.6e}, feature dim {}, trailing objective {:.6}",
        state.step,
        epsilon,
        phi.dim(),
        trailing
    );
    println!("checkpoint written to {}", out.display());
    Ok(())
}

fn cmd_bench_run(
    bench_name: &str,
    seed: u64,
    out: &Path,
    json: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    let options = load_options(config)?;
    let mut spec = build_benchmark(bench_name, seed).context("phase: benchmark spec")?;
    spec.apply_options(&options);
    let result = bench::run_benchmark(&spec, &options)?;
    println!(
        "benchmark {bench_name} seed {seed}: epsilon {:.6e}, reference marginal error {:.3e}",
        result.epsilon, result.reference_marginal_error
    );
    println!(
        "{:<20} {:>12} {:>12} {:>12} {:>12}",
        "method", "plan_kl", "cond_w1", "map_l2", "endpoint"
    );
    for r in &result.reports {
        println!(
            "{:<20} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.method, r.plan_kl, r.conditional_w1, r.map_l2, r.endpoint_error
        );
    }
    for (phase, seconds) in &result.timings {
        println!("  {phase}: {seconds:.3}s");
    }
    report::write_csv(out, &result.csv_rows()).context("phase: output")?;
    println!("metrics written to {}", out.display());
    if let Some(json_path) = json {
        let text = serde_json::to_string_pretty(&result.to_json())
            .context("phase: output")?;
        std::fs::write(json_path, text)
            .with_context(|| format!("writing {}", json_path.display()))?;
        println!("full result written to {}", json_path.display());
    }
    Ok(())
}

fn cmd_scaling(
    manifold: &str,
    sizes: &str,
    out: &Path,
    seed: u64,
    config: Option<&Path>,
) -> Result<()> {
    let options = load_options(config)?;
    let sizes = parse_sizes(sizes).context("phase: sizes")?;
    let rows = run_scaling_study(manifold, &sizes, seed, &options)?;
    for row in &rows {
        println!(
            "{} N={:<6} {:<9} {:>9.3}s {:>14} bytes{}",
            row.manifold,
            row.n,
            row.method,
            row.seconds,
            row.bytes,
            if row.feasible { "" } else { "  (infeasible)" }
        );
    }
    report::write_csv(out, &rows).context("phase: output")?;
    println!("scaling table written to {}", out.display());
    Ok(())
}

fn cmd_extract(
    plan_path: &Path,
    mode: &str,
    out: Option<&Path>,
    config: Option<&Path>,
) -> Result<()> {
    let options = load_options(config)?;
    let plan_file = PlanFile::read(plan_path).context("phase: plan input")?;
    let plan: GibbsPlan = plan_file.into_plan().context("phase: plan input")?;
    let choice = ExtractorOpt::from_label(mode)
        .ok_or_else(|| anyhow!("unknown extractor mode {mode:?} (heat|bary)"))?;
    let spec_choice = match choice {
        ExtractorOpt::Heat => bench::ExtractorChoice::HeatMode { time: None },
        ExtractorOpt::Barycenter => bench::ExtractorChoice::Barycenter,
    };
    let (extract_mode, cfg) = extractor_settings(spec_choice, plan.epsilon(), &options);
    let extraction =
        extract::extract_map_rowwise(&plan, extract_mode, &cfg).context("phase: extract")?;
    println!(
        "extracted {} rows with the {} extractor (heat time {:.6e})",
        extraction.points.len(),
        match extract_mode {
            ExtractMode::HeatMode => "heat-smoothed mode",
            ExtractMode::Barycenter => "barycenter",
        },
        cfg.heat_time,
    );
    if extract_mode == ExtractMode::Barycenter {
        println!("worst stationarity residual {:.3e}", extraction.max_residual);
    }
    for (label, flag) in [
        ("nonuniqueness warning", extraction.nonuniqueness_warning),
        ("cut-locus atoms skipped", extraction.cut_locus_skipped),
        ("underflow fallback", extraction.underflow_fallback),
        ("monotonicity violation", extraction.monotonicity_violation),
    ] {
        if flag {
            println!("note: {label}");
        }
    }
    if let Some(out) = out {
        let dim = plan.col_support().kind().ambient_dim();
        let mut data = Vec::with_capacity(extraction.points.len() * dim);
        for p in &extraction.points {
            data.extend(p.to_flat());
        }
        let mat = Mat::from_vec(extraction.points.len(), dim, data);
        report::write_matrix_csv(out, &mat).context("phase: output")?;
        println!("mapped points written to {}", out.display());
    } else if let Some(first) = extraction.points.first() {
        println!("first mapped point: {:?}", first.to_flat());
    }
    Ok(())
}
