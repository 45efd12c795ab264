//! `uplink-sim`: Monte Carlo campaigns, validations and analytic reports for
//! multi-cell massive MIMO uplink interference.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use uplink_core::analytics::{self, AnalyticReport};
use uplink_core::output;
use uplink_core::runner::{self, FadingReport, KappaScan, MomentReport};
use uplink_core::{table2_default, SystemConfig};

#[derive(Parser)]
#[command(
    name = "uplink-sim",
    version,
    about = "Uplink interference in multi-cell massive MIMO: simulation and closed forms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spatial Monte Carlo: component CDFs for MRC and ZF.
    SimulateCdf {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also dump the geometry of the first N trials.
        #[arg(long, value_name = "N")]
        layouts: Option<u64>,
    },
    /// Compare spatial means and variances with the closed forms.
    ValidateMoments {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the per-realization closed forms against explicit fading draws.
    /// Defaults to M = 32, K = 4 unless --m/--k or a config file say otherwise.
    ValidateFading {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Keep at most this many (strongest) UEs per reuse group.
        #[arg(long, default_value_t = 10)]
        max_outer: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fixed load factor K/M across array sizes.
    KappaScan {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        kappa: f64,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
        m_list: Vec<usize>,
        /// Also estimate the limiting constants and print the predictions.
        #[arg(long)]
        limits: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form moments, bounds, thresholds and the shadowing crossing as JSON.
    AnalyticReport {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the CSV bundle behind one figure.
    Figures {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        which: u8,
        #[arg(long)]
        out: PathBuf,
        /// Shadowing levels simulated for figures 3 and 4.
        #[arg(long, value_delimiter = ',', default_value = "0,2,4,6,8")]
        empirical_sigmas: Vec<f64>,
        /// Step of the analytic shadowing grid for figures 3 and 4.
        #[arg(long, default_value_t = 0.25)]
        sigma_step: f64,
    },
}

/// Config file plus flag overrides. Flags win over the file.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// JSON config; keys as in the serialized config (R, d0, A0, gamma, ...).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma_db: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Close-in path loss in dB.
    #[arg(long, allow_hyphen_values = true)]
    a0_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho_p_db: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    rho_r_db: Option<f64>,
    /// Keep the 1/rho noise terms instead of the interference-limited model.
    #[arg(long)]
    noise: bool,
    #[arg(long)]
    trunc_factor: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Spatial trials.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    fading_trials: Option<usize>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ConfigArgs {
    fn base(&self) -> Result<SystemConfig> {
        match &self.config {
            Some(path) => {
                SystemConfig::from_path(path).with_context(|| format!("reading {}", path.display()))
            }
            None => Ok(table2_default()),
        }
    }

    fn apply(&self, mut c: SystemConfig) -> Result<SystemConfig> {
        if let Some(v) = self.sigma_db {
            c.shadowing_db = v;
        }
        if let Some(v) = self.m {
            c.antennas = v;
        }
        if let Some(v) = self.k {
            c.pilots = v;
        }
        if let Some(v) = self.gamma {
            c.path_loss_exponent = v;
        }
        if let Some(v) = self.a0_db {
            c.ref_path_loss = from_db(v);
        }
        if let Some(v) = self.rho_p_db {
            c.rho_p = from_db(v);
        }
        if let Some(v) = self.rho_r_db {
            c.rho_r = from_db(v);
        }
        if self.noise {
            c.interference_limited = false;
        }
        if let Some(v) = self.trunc_factor {
            c.trunc_factor = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.trials {
            c.n_spatial_trials = v;
        }
        if let Some(v) = self.fading_trials {
            c.n_fading_trials = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn resolve(&self) -> Result<SystemConfig> {
        self.apply(self.base()?)
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn simulate_cdf(
    c: &SystemConfig,
    out: &Path,
    layouts: Option<u64>,
    workers: usize,
) -> Result<bool> {
    let run = runner::run_cdf_campaign(c, workers)?;
    let files = output::write_campaign(out, &run)?;
    if let Some(n) = layouts {
        output::write_layouts(&out.join("layout.csv"), c, n)?;
    }
    eprintln!(
        "{} trials at sigma = {} dB in {:.1?}; wrote {} files to {}",
        run.records.len(),
        c.shadowing_db,
        run.elapsed,
        files.len(),
        out.display()
    );
    for (rx, d) in [("mrc", &run.mrc), ("zf", &run.zf)] {
        for (name, dist) in d.components() {
            println!(
                "{rx:>3} {name:<5} mean {:.4e}  median {:8.2} dB",
                dist.mean,
                output::to_db(dist.median())
            );
        }
    }
    let o = &run.ordering;
    println!(
        "ordering held on {}/{} trials ({} with every reuse group non-empty)",
        o.holds, o.trials, o.non_empty_groups
    );
    Ok(o.all_hold())
}

fn print_moments(r: &MomentReport) {
    println!(
        "{} trials, sigma = {} dB, mean floor {:.3}%",
        r.trials,
        r.sigma_db,
        100.0 * r.mean_rel_floor
    );
    for c in r.means.iter().chain(&r.variances) {
        let status = match c.pass {
            Some(p) => verdict(p),
            None => "info",
        };
        println!(
            "{:<14} empirical {:.5e} +- {:.2e}  analytic {:.5e}  rel.err {:.3}%  {status}",
            c.quantity,
            c.empirical,
            c.stderr,
            c.analytic,
            100.0 * c.relative_error()
        );
    }
    if let Some(z) = &r.zf_bounds {
        println!(
            "zf bounds [{:.4e}, {:.4e}]: intra {:.4e}, inter {:.4e}  {}",
            z.lower,
            z.upper,
            z.intra.value,
            z.inter.value,
            verdict(z.pass)
        );
    }
    println!("ordering violations: {}", r.ordering.violations.len());
    println!("{}", verdict(r.pass));
}

fn print_fading(r: &FadingReport) {
    println!(
        "M = {}, K = {}, outer UEs per group {:?}, {} draws",
        r.antennas, r.pilots, r.outer_per_group, r.draws
    );
    for check in [&r.mrc, &r.zf] {
        let names = uplink_core::fading::COMPONENT_NAMES;
        let errs = check.relative_error.as_array();
        let line: Vec<String> = names
            .iter()
            .zip(errs)
            .map(|(n, e)| format!("{n} {:.3}%", 100.0 * e))
            .collect();
        println!(
            "{:>3}: {}  (tolerance {}%, discarded {})  {}",
            check.expected.receiver.as_str(),
            line.join(", "),
            100.0 * check.tolerance,
            check.measured.discarded,
            verdict(check.pass)
        );
    }
    println!(
        "zf SINR identity max rel. error {:.2e}",
        r.sinr_identity_error
    );
    println!(
        "wishart ratio {:.4} +- {:.4}",
        r.wishart_ratio, r.wishart_stderr
    );
    println!("{}", verdict(r.pass));
}

fn print_kappa(s: &KappaScan) {
    println!("kappa = {}", s.kappa);
    println!(
        "{:>5} {:>4} {:>14} {:>14}",
        "M", "K", "zf_normalized", "mrc_normalized"
    );
    for r in &s.rows {
        println!(
            "{:>5} {:>4} {:>14.5e} {:>14.5e}",
            r.antennas, r.pilots, r.zf_normalized, r.mrc_normalized
        );
    }
    println!(
        "spread zf {:.2}%, mrc {:.2}% (limit {}%)  {}",
        100.0 * s.zf_spread,
        100.0 * s.mrc_spread,
        100.0 * s.spread_limit,
        verdict(s.pass)
    );
}

fn figures(
    c: &SystemConfig,
    which: u8,
    out: &Path,
    empirical: &[f64],
    step: f64,
    workers: usize,
) -> Result<bool> {
    let dir = out.join(format!("fig{which}"));
    match which {
        1 | 2 => {
            let sigma = if which == 1 { 0.0 } else { 8.0 };
            simulate_cdf(&c.with_sigma_db(sigma), &dir, None, workers)
        }
        _ => {
            if step.is_nan() || step <= 0.0 {
                bail!("--sigma-step must be positive");
            }
            let grid: Vec<f64> = (0..)
                .map(|i| i as f64 * step)
                .take_while(|&s| s <= 12.0 + 1e-9)
                .collect();
            let sweep = runner::run_sigma_sweep(c, &grid, empirical, workers)?;
            let files = output::write_sweep(&dir, c, &sweep)?;
            output::write_json(
                &dir.join("analytic_report.json"),
                c,
                "analytic-report",
                &analytics::analytic_report(c)?,
            )?;
            match sweep.sigma_crossing_db {
                Some(s) => println!("mean inter-cell and contamination powers cross at {s:.2} dB"),
                None => println!("no crossing in [0, 12] dB"),
            }
            eprintln!("wrote {} files to {}", files.len() + 1, dir.display());
            Ok(true)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SimulateCdf { cfg, out, layouts } => {
            simulate_cdf(&cfg.resolve()?, &out, layouts, cfg.workers)
        }
        Command::ValidateMoments { cfg, out } => {
            let c = cfg.resolve()?;
            let report = runner::run_moment_validation(&c, cfg.workers)?;
            print_moments(&report);
            if let Some(path) = out {
                output::write_json(&path, &c, "moment-validation", &report)?;
            }
            Ok(report.pass)
        }
        Command::ValidateFading {
            cfg,
            max_outer,
            out,
        } => {
            let mut base = cfg.base()?;
            if cfg.config.is_none() {
                base.antennas = 32;
                base.pilots = 4;
            }
            let c = cfg.apply(base)?;
            let report = runner::run_fading_validation(&c, max_outer, cfg.workers)?;
            print_fading(&report);
            if let Some(path) = out {
                output::write_json(&path, &c, "fading-validation", &report)?;
            }
            Ok(report.pass)
        }
        Command::KappaScan {
            cfg,
            kappa,
            m_list,
            limits,
            out,
        } => {
            let c = cfg.resolve()?;
            let scan = runner::run_kappa_scan(&c, kappa, &m_list, cfg.workers)?;
            print_kappa(&scan);
            if limits {
                let a = analytics::asymptotic_constants(&c, 0.02, cfg.workers)?;
                println!(
                    "limits from {} trials: zf inter {:.5e}, mrc inter {:.5e} (normalized: B2 = {:.5e}, B2_mrc = {:.5e})",
                    a.trials,
                    a.zf_inter_limit(kappa),
                    a.mrc_inter_limit(kappa),
                    a.b2.value,
                    a.b2_mrc.value
                );
            }
            if let Some(dir) = out {
                output::write_kappa_csv(&dir.join("kappa_scan.csv"), &c, &scan)?;
                output::write_json(&dir.join("kappa_scan.json"), &c, "kappa-scan", &scan)?;
            }
            Ok(scan.pass)
        }
        Command::AnalyticReport { cfg, out } => {
            let c = cfg.resolve()?;
            let report: AnalyticReport = analytics::analytic_report(&c)?;
            if let Some(w) = &report.truncation.warning {
                eprintln!("warning: {w}");
            }
            match out {
                Some(path) => output::write_json(&path, &c, "analytic-report", &report)?,
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
            Ok(true)
        }
        Command::Figures {
            cfg,
            which,
            out,
            empirical_sigmas,
            sigma_step,
        } => figures(
            &cfg.resolve()?,
            which,
            &out,
            &empirical_sigmas,
            sigma_step,
            cfg.workers,
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
