//! CSV and JSON artifacts. Every file opens with the config hash and seed:
//! CSVs as a `#` comment line, JSON as envelope fields.
//!
//! Floats are written in Rust's shortest round-trip form, so identical inputs
//! give byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SystemConfig;
use crate::interference::Receiver;
use crate::propagation::build_large_scale;
use crate::runner::{CampaignResult, KappaScan, SigmaSweep, TrialRecord};
use crate::spatial::{sample_layout, write_layout_rows, LAYOUT_CSV_HEADER};
use crate::stats::EmpiricalDistribution;
use crate::streams::TrialStreams;
use crate::Result;

pub const CDF_CSV_HEADER: &str = "value_linear,value_dB,cdf";
pub const SAMPLES_CSV_HEADER: &str =
    "trial,receiver,k,S,I_intra,I_inter,I_cont,sir,S_dB,I_intra_dB,I_inter_dB,I_cont_dB,sir_dB";

pub fn header_line(config: &SystemConfig) -> String {
    format!("# config_hash={} seed={}", config.hash_hex(), config.seed)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn cdf_file_name(receiver: Receiver, component: &str) -> String {
    format!("cdf_{}_{component}.csv", receiver.as_str())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

/// One row per sample: the ECDF evaluated at its jump points.
pub fn write_cdf<W: Write>(
    out: &mut W,
    header: &str,
    dist: &EmpiricalDistribution,
) -> std::io::Result<()> {
    writeln!(out, "{header}")?;
    writeln!(out, "{CDF_CSV_HEADER}")?;
    for (x, p) in dist.steps() {
        writeln!(out, "{x:e},{:.6},{p}", to_db(x))?;
    }
    Ok(())
}

pub fn write_samples<W: Write>(
    out: &mut W,
    header: &str,
    records: &[TrialRecord],
) -> std::io::Result<()> {
    writeln!(out, "{header}")?;
    writeln!(out, "{SAMPLES_CSV_HEADER}")?;
    for r in records {
        for s in [&r.mrc, &r.zf] {
            let v = [s.signal, s.intra, s.inter, s.cont, s.sir];
            write!(out, "{},{},{}", r.trial, s.receiver.as_str(), s.pilot + 1)?;
            for x in v {
                write!(out, ",{x:e}")?;
            }
            for x in v {
                write!(out, ",{:.6}", to_db(x))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Headline statistics of a distribution, without the samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub variance: f64,
    pub variance_stderr: f64,
    pub p01: f64,
    pub median: f64,
    pub p99: f64,
}

impl From<&EmpiricalDistribution> for DistributionSummary {
    fn from(d: &EmpiricalDistribution) -> Self {
        Self {
            n: d.n,
            mean: d.mean,
            stderr: d.stderr,
            variance: d.variance,
            variance_stderr: d.variance_stderr,
            p01: d.quantile(0.01),
            median: d.median(),
            p99: d.quantile(0.99),
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config_hash: String,
    seed: u64,
    kind: &'a str,
    data: &'a T,
}

pub fn write_json<T: Serialize>(
    path: &Path,
    config: &SystemConfig,
    kind: &str,
    data: &T,
) -> Result<()> {
    let mut out = create(path)?;
    let env = Envelope {
        config_hash: config.hash_hex(),
        seed: config.seed,
        kind,
        data,
    };
    serde_json::to_writer_pretty(&mut out, &env)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReceiverSummary {
    intra: DistributionSummary,
    inter: DistributionSummary,
    cont: DistributionSummary,
    sir: DistributionSummary,
}

#[derive(Serialize)]
struct CampaignSummary<'a> {
    config: &'a SystemConfig,
    trials: usize,
    /// One-based, as in the CSVs.
    probe_pilot: usize,
    mrc: ReceiverSummary,
    zf: ReceiverSummary,
    analytic: &'a crate::analytics::AnalyticMoments,
    ordering: &'a crate::runner::OrderingSummary,
}

/// Writes the six component CDFs, the per-trial samples and a JSON summary
/// into `dir`. Returns the paths written.
pub fn write_campaign(dir: &Path, campaign: &CampaignResult) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let header = header_line(&campaign.config);
    let mut written = Vec::new();
    for rx in Receiver::ALL {
        for (name, dist) in campaign.distributions(rx).components() {
            let path = dir.join(cdf_file_name(rx, name));
            let mut out = create(&path)?;
            write_cdf(&mut out, &header, dist)?;
            out.flush()?;
            written.push(path);
        }
    }
    let path = dir.join("samples.csv");
    let mut out = create(&path)?;
    write_samples(&mut out, &header, &campaign.records)?;
    out.flush()?;
    written.push(path);

    let summarize = |rx| {
        let d = campaign.distributions(rx);
        ReceiverSummary {
            intra: (&d.intra).into(),
            inter: (&d.inter).into(),
            cont: (&d.cont).into(),
            sir: (&d.sir).into(),
        }
    };
    let summary = CampaignSummary {
        config: &campaign.config,
        trials: campaign.records.len(),
        probe_pilot: campaign.probe_pilot + 1,
        mrc: summarize(Receiver::Mrc),
        zf: summarize(Receiver::Zf),
        analytic: &campaign.analytic,
        ordering: &campaign.ordering,
    };
    let path = dir.join("summary.json");
    write_json(&path, &campaign.config, "cdf-campaign", &summary)?;
    written.push(path);
    Ok(written)
}

/// Dumps the geometry of the first `trials` spatial trials, with each UE's
/// large-scale gain `beta` as a trailing column.
pub fn write_layouts(path: &Path, config: &SystemConfig, trials: u64) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", header_line(config))?;
    writeln!(out, "{LAYOUT_CSV_HEADER},beta_linear")?;
    for t in 0..trials {
        let streams = TrialStreams::new(config.seed, t);
        let layout = sample_layout(config, &streams);
        let state = build_large_scale(&layout, config, &streams);
        let betas: Vec<f64> = state.iter().map(|g| g.beta).collect();
        write_layout_rows(&mut out, t, &layout, Some(&betas))?;
    }
    out.flush()?;
    Ok(())
}

/// `analytic.csv` and `empirical.csv` of a shadowing sweep. Normalized
/// variances are `var / mean^2`.
pub fn write_sweep(dir: &Path, config: &SystemConfig, sweep: &SigmaSweep) -> Result<Vec<PathBuf>> {
    let header = header_line(config);
    let analytic_path = dir.join("analytic.csv");
    let mut out = create(&analytic_path)?;
    writeln!(out, "{header}")?;
    writeln!(
        out,
        "sigma_dB,mean_intra,mean_inter,mean_cont,mean_intra_dB,mean_inter_dB,mean_cont_dB,var_inter,var_cont,nvar_inter,nvar_cont"
    )?;
    for p in &sweep.analytic {
        let m = p.mean;
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:.6},{:.6},{:.6},{:e},{:e},{:e},{:e}",
            p.sigma_db,
            m.intra,
            m.inter,
            m.cont,
            to_db(m.intra),
            to_db(m.inter),
            to_db(m.cont),
            p.var.inter,
            p.var.cont,
            p.var.inter / (m.inter * m.inter),
            p.var.cont / (m.cont * m.cont),
        )?;
    }
    out.flush()?;

    let empirical_path = dir.join("empirical.csv");
    let mut out = create(&empirical_path)?;
    writeln!(out, "{header}")?;
    writeln!(
        out,
        "sigma_dB,trials,mean_intra,se_intra,mean_inter,se_inter,mean_cont,se_cont,var_inter,se_var_inter,var_cont,se_var_cont,nvar_inter,nvar_cont"
    )?;
    for p in &sweep.empirical {
        writeln!(
            out,
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            p.sigma_db,
            p.trials,
            p.mean_intra.value,
            p.mean_intra.stderr,
            p.mean_inter.value,
            p.mean_inter.stderr,
            p.mean_cont.value,
            p.mean_cont.stderr,
            p.var_inter.value,
            p.var_inter.stderr,
            p.var_cont.value,
            p.var_cont.stderr,
            p.var_inter.value / p.mean_inter.value.powi(2),
            p.var_cont.value / p.mean_cont.value.powi(2),
        )?;
    }
    out.flush()?;
    Ok(vec![analytic_path, empirical_path])
}

pub fn write_kappa_csv(path: &Path, config: &SystemConfig, scan: &KappaScan) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{}", header_line(config))?;
    writeln!(
        out,
        "M,K,trials,zf_intra,zf_inter,se_zf_inter,mrc_intra,mrc_inter,se_mrc_inter,zf_normalized,mrc_normalized"
    )?;
    for r in &scan.rows {
        writeln!(
            out,
            "{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            r.antennas,
            r.pilots,
            r.trials,
            r.zf_intra.value,
            r.zf_inter.value,
            r.zf_inter.stderr,
            r.mrc_intra.value,
            r.mrc_inter.value,
            r.mrc_inter.stderr,
            r.zf_normalized,
            r.mrc_normalized,
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table2_default;
    use crate::runner::run_cdf_campaign;

    fn small() -> SystemConfig {
        let mut c = table2_default().with_sigma_db(8.0);
        c.pilots = 4;
        c.n_spatial_trials = 40;
        c
    }

    #[test]
    fn cdf_rows_monotone_and_complete() {
        let d = EmpiricalDistribution::from_samples(vec![1e-9, 1e-10, 1e-8]);
        let mut buf = Vec::new();
        write_cdf(&mut buf, "# h", &d).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# h");
        assert_eq!(lines[1], CDF_CSV_HEADER);
        assert_eq!(lines[2], "1e-10,-100.000000,0.3333333333333333");
        assert_eq!(lines.last().unwrap(), &"1e-8,-80.000000,1");
    }

    #[test]
    fn campaign_files_and_headers() {
        let c = small();
        let run = run_cdf_campaign(&c, 0).unwrap();
        let dir = tempdir();
        let files = write_campaign(&dir, &run).unwrap();
        assert_eq!(files.len(), 8);
        let head = header_line(&c);
        for f in &files {
            let text = fs::read_to_string(f).unwrap();
            if f.extension().unwrap() == "csv" {
                assert_eq!(text.lines().next().unwrap(), head);
            } else {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["config_hash"], c.hash_hex());
                assert_eq!(v["data"]["trials"], 40);
            }
        }
        let cdf = fs::read_to_string(dir.join("cdf_mrc_cont.csv")).unwrap();
        assert_eq!(cdf.lines().count(), 42);
        let samples = fs::read_to_string(dir.join("samples.csv")).unwrap();
        assert_eq!(samples.lines().count(), 2 + 80);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn layout_dump() {
        let c = small();
        let dir = tempdir();
        let path = dir.join("layout.csv");
        write_layouts(&path, &c, 2).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().skip(2).collect();
        assert!(rows.iter().filter(|r| r.contains(",intra,")).count() == 8);
        assert!(rows.iter().all(|r| r.split(',').count() == 6));
        fs::remove_dir_all(&dir).unwrap();
    }

    fn tempdir() -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "uplink-output-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }
}
