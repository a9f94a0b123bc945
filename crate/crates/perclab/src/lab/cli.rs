//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on invalid input (including unknown flags),
//! 2 on resource-limit errors. All deterministic output goes to the `--out`
//! file or stdout; timing goes to stderr.

use super::experiments::{
    default_distance_schedule, render_edge_list, run_block_renorm, run_cluster_fraction,
    run_complete_graph_check, run_dense_density, run_distance_scaling, run_hierarchy_audit,
    ExperimentConfig,
};
use super::report::{Report, ReportFormat};
use crate::bondspace::{BondModel, ConnectionProfile};
use crate::error::{Error, Result};
use crate::lattice::{BoxSpec, Point};
use crate::theory;
use clap::{Args, Parser, Subcommand};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Environment variable supplying the default master seed.
pub const SEED_ENV_VAR: &str = "PERCLAB_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "perclab",
    version,
    about = "Long-range percolation laboratory",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Lattice dimension d.
    #[arg(long, default_value_t = 1)]
    dim: usize,
    /// Decay exponent s of the connection profile.
    #[arg(long, default_value_t = 1.5)]
    s: f64,
    /// Profile amplitude.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Independent nearest-neighbor overlay probability.
    #[arg(long = "nn-prob", default_value_t = 0.0)]
    nn_prob: f64,
    /// Connection profile: shifted-power or pure-power.
    #[arg(long, default_value = "shifted-power")]
    profile: String,
    /// Norm: euclidean, sup or taxicab.
    #[arg(long, default_value = "euclidean")]
    norm: String,
}

impl ModelArgs {
    fn build(&self) -> Result<BondModel> {
        let profile = match self.profile.as_str() {
            "shifted-power" => ConnectionProfile::shifted_power(self.beta, self.s),
            "pure-power" => ConnectionProfile::pure_power(self.beta, self.s),
            other => {
                return Err(Error::invalid(format!(
                    "unknown profile {other:?} (custom tables are a library-level feature)"
                )))
            }
        };
        BondModel::new(self.dim, profile, self.nn_prob, self.norm.parse()?)
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Single box side; shorthand for --sides with one entry.
    #[arg(long)]
    side: Option<u64>,
    /// Box sides, ascending.
    #[arg(long, value_delimiter = ',')]
    sides: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Master seed; defaults to $PERCLAB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Density / fraction threshold rho.
    #[arg(long, default_value_t = 0.3)]
    rho: f64,
    /// Block occupancy threshold delta.
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Local window side ell (odd).
    #[arg(long, default_value_t = 9)]
    ell: u64,
    /// Hierarchy scale exponent gamma.
    #[arg(long, default_value_t = 0.8)]
    gamma: f64,
    /// Comparison-curve exponent s'.
    #[arg(long, default_value_t = 1.75)]
    sprime: f64,
    /// Sample-box side per unit of pair distance (scaling and audits).
    #[arg(long = "box-factor", default_value_t = 4)]
    box_factor: u64,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

impl RunArgs {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or_else(|| {
            std::env::var(SEED_ENV_VAR)
                .ok()
                .and_then(|v| v.parse().ok())
                .unwrap_or(0)
        })
    }

    fn sides(&self, fallback: &[u64]) -> Vec<u64> {
        if !self.sides.is_empty() {
            self.sides.clone()
        } else if let Some(s) = self.side {
            vec![s]
        } else {
            fallback.to_vec()
        }
    }

    fn config(&self, model: BondModel, fallback_sides: &[u64]) -> ExperimentConfig {
        ExperimentConfig {
            model,
            sides: self.sides(fallback_sides),
            trials: self.trials,
            seed: self.seed(),
            rho: self.rho,
            delta: self.delta,
            ell: self.ell,
            gamma: self.gamma,
            s_prime: self.sprime,
            box_factor: self.box_factor,
            threads: self.threads,
        }
    }

    fn format(&self) -> Result<ReportFormat> {
        self.format.parse()
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one bond configuration and print its edge list.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 64)]
        side: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest-component fraction tails across box sides.
    ClusterFraction {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Chemical-distance medians and the log-log slope.
    DistanceScaling {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Pair distances; defaults to the dyadic schedule.
        #[arg(long, value_delimiter = ',')]
        distances: Vec<u64>,
    },
    /// Dense-site density tails.
    DenseDensity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Complete-graph site-bond tail versus the closed-form bound.
    CompleteGraph {
        #[arg(long, default_value_t = 100)]
        n: u64,
        #[arg(long, default_value_t = 0.9)]
        r: f64,
        #[arg(long, default_value_t = 0.3)]
        p: f64,
        #[arg(long, default_value_t = 0.7)]
        rprime: f64,
        #[arg(long, default_value_t = 0.15)]
        pprime: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "json")]
        format: String,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Block renormalization: occupancy and connection decay.
    BlockRenorm {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Block side K (odd; box sides must be multiples).
        #[arg(long = "block-side", default_value_t = 9)]
        block_side: u64,
    },
    /// Hierarchy extraction audits over sampled pairs.
    HierarchyAudit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',')]
        distances: Vec<u64>,
    },
    /// Print closed-form tables: Delta, Chernoff rates, scale ladder.
    Theory {
        #[arg(long, default_value_t = 1.5)]
        s: f64,
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[arg(long, default_value_t = 1.75)]
        sprime: f64,
        #[arg(long, default_value_t = 64)]
        ell0: u64,
        #[arg(long, default_value_t = 10)]
        n0: u64,
        #[arg(long, default_value_t = 0.25)]
        rho0: f64,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_report(report: &Report, out: Option<&PathBuf>, format: ReportFormat) -> Result<()> {
    eprintln!(
        "# {}: {} rows in {:?}",
        report.experiment,
        report.rows.len(),
        report.wall_clock
    );
    emit(&report.render(format), out)
}

fn theory_text(
    s: f64,
    dim: u32,
    sprime: f64,
    ell0: u64,
    n0: u64,
    rho0: f64,
    depth: u32,
) -> Result<String> {
    let mut out = String::new();
    let d = theory::delta(s, dim)?;
    let _ = writeln!(out, "Delta(s={s}, d={dim}) = {d:.6}");
    let _ = writeln!(out, "depth K(N, gamma):");
    for (n, gamma) in [(1e4, 0.75), (1e6, 0.75), (1e6, 0.9)] {
        let _ = writeln!(
            out,
            "  N={n:.0e} gamma={gamma}: K = {:.4}",
            theory::depth_k(n, gamma)?
        );
    }
    let _ = writeln!(out, "chernoff rate psi(q', q):");
    for (qp, q) in [(0.25, 0.5), (0.5, 0.9), (0.7, 0.9), (0.0, 0.5)] {
        let _ = writeln!(out, "  psi({qp}, {q}) = {:.6}", theory::chernoff_rate(qp, q)?);
    }
    if sprime > s && sprime < 2.0 * dim as f64 {
        let seq = theory::make_scale_sequence(ell0, n0, s, sprime, dim, rho0, depth)?;
        let _ = writeln!(
            out,
            "scale ladder (ell0={ell0}, N0={n0}, s'={sprime}, rho0={rho0}): a = {:.6}, c0 = {:.6}",
            seq.a, seq.c0
        );
        let _ = writeln!(out, "  n  ell_n  N_n  r_n  p_n  rho_n");
        for k in 1..=seq.depth() {
            let _ = writeln!(
                out,
                "  {k}  {}  {}  {:.6}  {:.6}  {:.6}",
                seq.ell_at(k),
                seq.n_at(k),
                seq.r[k as usize - 1],
                seq.p[k as usize - 1],
                seq.rho[k as usize]
            );
        }
    } else {
        let _ = writeln!(out, "scale ladder skipped: s' = {sprime} outside (s, 2d)");
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sample {
            model,
            side,
            seed,
            out,
        } => {
            let m = model.build()?;
            let seed = seed.unwrap_or_else(|| {
                std::env::var(SEED_ENV_VAR)
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0)
            });
            let bx = BoxSpec::cornered(Point::origin(m.dim()), side)?;
            let g = m.sample_graph(&bx, seed)?;
            emit(&render_edge_list(&g), out.as_ref())
        }
        Command::ClusterFraction { model, run } => {
            let cfg = run.config(model.build()?, &[256, 512, 1024]);
            let rep = run_cluster_fraction(&cfg)?;
            emit_report(&rep, run.out.as_ref(), run.format()?)
        }
        Command::DistanceScaling {
            model,
            run,
            distances,
        } => {
            let m = model.build()?;
            let schedule = if distances.is_empty() {
                default_distance_schedule(m.dim())
            } else {
                distances
            };
            let cfg = run.config(m, &[]);
            let (rep, est) = run_distance_scaling(&cfg, &schedule)?;
            eprintln!(
                "# slope = {:.4}, reference Delta = {:.4}",
                est.slope, est.reference_delta
            );
            emit_report(&rep, run.out.as_ref(), run.format()?)
        }
        Command::DenseDensity { model, run } => {
            let cfg = run.config(model.build()?, &[128, 256, 512]);
            let rep = run_dense_density(&cfg)?;
            emit_report(&rep, run.out.as_ref(), run.format()?)
        }
        Command::CompleteGraph {
            n,
            r,
            p,
            rprime,
            pprime,
            trials,
            seed,
            out,
            format,
            threads,
        } => {
            let params = theory::CompleteGraphParams::new(n, r, p, rprime, pprime)?;
            let seed = seed.unwrap_or_else(|| {
                std::env::var(SEED_ENV_VAR)
                    .ok()
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0)
            });
            let rep = run_complete_graph_check(&params, trials, seed, threads)?;
            emit_report(&rep, out.as_ref(), format.parse()?)
        }
        Command::BlockRenorm {
            model,
            run,
            block_side,
        } => {
            let delta = run.delta;
            let cfg = run.config(model.build()?, &[243]);
            let rep = run_block_renorm(&cfg, block_side, delta)?;
            emit_report(&rep, run.out.as_ref(), run.format()?)
        }
        Command::HierarchyAudit {
            model,
            run,
            distances,
        } => {
            let schedule = if distances.is_empty() {
                vec![256, 512, 1024]
            } else {
                distances
            };
            let cfg = run.config(model.build()?, &[]);
            let rep = run_hierarchy_audit(&cfg, &schedule)?;
            emit_report(&rep, run.out.as_ref(), run.format()?)
        }
        Command::Theory {
            s,
            dim,
            sprime,
            ell0,
            n0,
            rho0,
            depth,
            out,
        } => {
            let text = theory_text(s, dim, sprime, ell0, n0, rho0, depth)?;
            emit(&text, out.as_ref())
        }
    }
}

/// Entry point shared by `main` and the tests. Returns the process exit
/// status instead of exiting, so it can be driven in-process.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}
