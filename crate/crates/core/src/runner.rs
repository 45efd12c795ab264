//! Monte Carlo campaigns over spatial realizations and their comparison with
//! the closed forms.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::analytics::{self, AnalyticMoments, Estimate};
use crate::config::SystemConfig;
use crate::fading::{self, ComponentStats, FadingMeasurement};
use crate::interference::{
    mrc_components, mrc_from_summary, ordering_of, zf_components, zf_from_summary,
    InterferenceSample, OrderingCheck, Receiver,
};
use crate::propagation::{build_large_scale, summarize_trial, LargeScaleState};
use crate::spatial::sample_layout;
use crate::stats::EmpiricalDistribution;
use crate::streams::{run_trials, TrialStreams};
use crate::{Error, Result};

/// The probed uplink. Intra-cell UEs are exchangeable, so any index would do.
pub const PROBE_PILOT: usize = 0;

/// Relative floor on mean tolerances, covering rounding of long sums and the
/// bias left by truncating the Poisson window.
pub const MEAN_REL_FLOOR: f64 = 0.002;

/// Variances are only checked up to this shadowing level; heavier tails make
/// the sample variance converge too slowly.
pub const VARIANCE_SIGMA_LIMIT_DB: f64 = 4.0;

pub const KAPPA_SPREAD_LIMIT: f64 = 0.1;

pub const FADING_TOLERANCE_MRC: f64 = 0.01;
pub const FADING_TOLERANCE_ZF: f64 = 0.02;
pub const SINR_IDENTITY_TOLERANCE: f64 = 1e-8;
pub const WISHART_TOLERANCE: f64 = 0.02;

thread_local! {
    /// Per-worker buffer for the gains of one reuse group.
    static SCRATCH: std::cell::RefCell<Vec<f64>> = const { std::cell::RefCell::new(Vec::new()) };
}

/// Large-scale state of one spatial trial.
pub fn trial_state(config: &SystemConfig, trial: u64) -> LargeScaleState {
    let streams = TrialStreams::new(config.seed, trial);
    let layout = sample_layout(config, &streams);
    build_large_scale(&layout, config, &streams)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub mrc: InterferenceSample,
    pub zf: InterferenceSample,
    pub ordering: OrderingCheck,
}

/// Runs one spatial trial through the streaming summary path; `scratch` is
/// reused between trials.
pub fn run_trial(config: &SystemConfig, trial: u64, scratch: &mut Vec<f64>) -> Result<TrialRecord> {
    let state = summarize_trial(config, &TrialStreams::new(config.seed, trial), scratch);
    let mrc = mrc_from_summary(&state, PROBE_PILOT, config)?;
    let zf = zf_from_summary(&state, PROBE_PILOT, config)?;
    Ok(TrialRecord {
        trial,
        ordering: ordering_of(&state, &mrc, &zf, config),
        mrc,
        zf,
    })
}

/// Distributions of the three interference components and the SIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentDistributions {
    pub intra: EmpiricalDistribution,
    pub inter: EmpiricalDistribution,
    pub cont: EmpiricalDistribution,
    pub sir: EmpiricalDistribution,
}

impl ComponentDistributions {
    fn collect(samples: impl Iterator<Item = InterferenceSample> + Clone) -> Self {
        let column = |f: fn(&InterferenceSample) -> f64| {
            EmpiricalDistribution::from_samples(samples.clone().map(|s| f(&s)).collect())
        };
        Self {
            intra: column(|s| s.intra),
            inter: column(|s| s.inter),
            cont: column(|s| s.cont),
            sir: column(|s| s.sir),
        }
    }

    /// `(name, distribution)` for the three interference components.
    pub fn components(&self) -> [(&'static str, &EmpiricalDistribution); 3] {
        [
            ("intra", &self.intra),
            ("inter", &self.inter),
            ("cont", &self.cont),
        ]
    }
}

/// Tally of the per-trial ordering check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderingSummary {
    pub trials: usize,
    /// Trials in which every reuse group was non-empty.
    pub non_empty_groups: usize,
    pub holds: usize,
    pub holds_with_non_empty_groups: usize,
    pub violations: Vec<u64>,
}

impl OrderingSummary {
    fn tally(records: &[TrialRecord]) -> Self {
        let mut s = OrderingSummary {
            trials: records.len(),
            ..Default::default()
        };
        for r in records {
            let ok = r.ordering.holds();
            s.holds += ok as usize;
            if r.ordering.groups_non_empty {
                s.non_empty_groups += 1;
                s.holds_with_non_empty_groups += ok as usize;
            }
            if !ok {
                s.violations.push(r.trial);
            }
        }
        s
    }

    pub fn all_hold(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignResult {
    pub config: SystemConfig,
    pub config_hash: String,
    pub seed: u64,
    pub probe_pilot: usize,
    pub records: Vec<TrialRecord>,
    pub mrc: ComponentDistributions,
    pub zf: ComponentDistributions,
    pub analytic: AnalyticMoments,
    pub ordering: OrderingSummary,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CampaignResult {
    pub fn distributions(&self, receiver: Receiver) -> &ComponentDistributions {
        match receiver {
            Receiver::Mrc => &self.mrc,
            Receiver::Zf => &self.zf,
        }
    }
}

/// Runs `config.n_spatial_trials` spatial trials, probing pilot
/// [`PROBE_PILOT`] with both receivers and checking the ordering on each.
pub fn run_cdf_campaign(config: &SystemConfig, workers: usize) -> Result<CampaignResult> {
    config.validate()?;
    let analytic = analytics::analytic_moments(config)?;
    let start = Instant::now();
    let records = run_trials(config.n_spatial_trials, workers, |t| {
        SCRATCH.with_borrow_mut(|scratch| run_trial(config, t, scratch))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mrc = ComponentDistributions::collect(records.iter().map(|r| r.mrc));
    let zf = ComponentDistributions::collect(records.iter().map(|r| r.zf));
    Ok(CampaignResult {
        config: config.clone(),
        config_hash: config.hash_hex(),
        seed: config.seed,
        probe_pilot: PROBE_PILOT,
        ordering: OrderingSummary::tally(&records),
        records,
        mrc,
        zf,
        analytic,
        elapsed: start.elapsed(),
    })
}

/// One empirical-versus-analytic comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub quantity: String,
    pub empirical: f64,
    pub stderr: f64,
    pub analytic: f64,
    pub tolerance: f64,
    /// `None` when the comparison is reported but not enforced.
    pub pass: Option<bool>,
}

impl Comparison {
    fn new(
        quantity: &str,
        empirical: f64,
        stderr: f64,
        analytic: f64,
        tolerance: f64,
        enforced: bool,
    ) -> Self {
        Self {
            quantity: quantity.to_string(),
            empirical,
            stderr,
            analytic,
            tolerance,
            pass: enforced.then(|| (empirical - analytic).abs() <= tolerance),
        }
    }

    pub fn relative_error(&self) -> f64 {
        ((self.empirical - self.analytic) / self.analytic).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub config_hash: String,
    pub seed: u64,
    pub trials: usize,
    pub sigma_db: f64,
    pub mean_rel_floor: f64,
    pub means: Vec<Comparison>,
    pub variances: Vec<Comparison>,
    /// Without shadowing: the empirical ZF means against the bounds.
    pub zf_bounds: Option<ZfBoundCheck>,
    pub ordering: OrderingSummary,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZfBoundCheck {
    pub lower: f64,
    pub upper: f64,
    pub intra: Estimate,
    pub inter: Estimate,
    pub pass: bool,
}

/// Compares campaign moments with the closed forms: means within
/// `max(3 stderr, floor |analytic|)`, variances of the inter-cell and
/// contamination terms within 3 standard errors when shadowing is mild.
pub fn moment_report(campaign: &CampaignResult) -> Result<MomentReport> {
    let config = &campaign.config;
    let trunc = analytics::truncation_bound(config)?;
    let floor = MEAN_REL_FLOOR.max(trunc.p_o_tail);
    let a = &campaign.analytic;
    let mean_check = |name: &str, d: &EmpiricalDistribution, analytic: f64| {
        let tol = (3.0 * d.stderr).max(floor * analytic.abs());
        Comparison::new(name, d.mean, d.stderr, analytic, tol, true)
    };
    let means = vec![
        mean_check("mean_intra_mrc", &campaign.mrc.intra, a.mean_mrc.intra),
        mean_check("mean_inter_mrc", &campaign.mrc.inter, a.mean_mrc.inter),
        mean_check("mean_cont_mrc", &campaign.mrc.cont, a.mean_mrc.cont),
    ];
    let enforce_var = config.shadowing_db <= VARIANCE_SIGMA_LIMIT_DB;
    let var_check = |name: &str, d: &EmpiricalDistribution, analytic: f64| {
        Comparison::new(
            name,
            d.variance,
            d.variance_stderr,
            analytic,
            3.0 * d.variance_stderr,
            enforce_var,
        )
    };
    let variances = vec![
        var_check("var_inter_mrc", &campaign.mrc.inter, a.var_mrc.inter),
        var_check("var_cont_mrc", &campaign.mrc.cont, a.var_mrc.cont),
    ];
    let zf_bounds = a.zf.lower.map(|lower| {
        let est = |d: &EmpiricalDistribution| Estimate {
            value: d.mean,
            stderr: d.stderr,
        };
        let (intra, inter) = (est(&campaign.zf.intra), est(&campaign.zf.inter));
        ZfBoundCheck {
            lower,
            upper: a.zf.upper,
            pass: lower <= intra.value + 3.0 * intra.stderr
                && intra.value - 3.0 * intra.stderr <= a.zf.upper
                && inter.value - 3.0 * inter.stderr <= a.zf.upper,
            intra,
            inter,
        }
    });
    let pass = means
        .iter()
        .chain(&variances)
        .all(|c| c.pass != Some(false))
        && zf_bounds.as_ref().is_none_or(|z| z.pass)
        && campaign.ordering.all_hold();
    Ok(MomentReport {
        config_hash: campaign.config_hash.clone(),
        seed: campaign.seed,
        trials: campaign.records.len(),
        sigma_db: config.shadowing_db,
        mean_rel_floor: floor,
        means,
        variances,
        zf_bounds,
        ordering: campaign.ordering.clone(),
        pass,
    })
}

pub fn run_moment_validation(config: &SystemConfig, workers: usize) -> Result<MomentReport> {
    moment_report(&run_cdf_campaign(config, workers)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRow {
    pub antennas: usize,
    pub pilots: usize,
    pub trials: usize,
    pub zf_intra: Estimate,
    pub zf_inter: Estimate,
    pub mrc_intra: Estimate,
    pub mrc_inter: Estimate,
    /// `E[I_inter^ZF] (1-kappa)/kappa`.
    pub zf_normalized: f64,
    /// `E[I_inter^MRC] / kappa`.
    pub mrc_normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaScan {
    pub kappa: f64,
    pub seed: u64,
    pub rows: Vec<KappaRow>,
    /// `max |x - mean| / mean` of each normalized column.
    pub zf_spread: f64,
    pub mrc_spread: f64,
    pub spread_limit: f64,
    pub pass: bool,
}

fn spread(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    xs.map(|x| ((x - mean) / mean).abs()).fold(0.0, f64::max)
}

/// Runs `base.n_spatial_trials` trials at each `M` with `K = kappa M`.
pub fn run_kappa_scan(
    base: &SystemConfig,
    kappa: f64,
    antennas: &[usize],
    workers: usize,
) -> Result<KappaScan> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "kappa must lie in (0, 1), got {kappa}"
        )));
    }
    if antennas.is_empty() {
        return Err(Error::InvalidArgument("no antenna counts given".into()));
    }
    let mut rows = Vec::with_capacity(antennas.len());
    for &m in antennas {
        let k = kappa * m as f64;
        if (k - k.round()).abs() > 1e-9 || k.round() < 1.0 {
            return Err(Error::InvalidArgument(format!(
                "kappa * M = {k} is not a positive integer for M = {m}"
            )));
        }
        let mut config = base.clone();
        config.antennas = m;
        config.pilots = k.round() as usize;
        config.validate()?;
        let records = run_trials(config.n_spatial_trials, workers, |t| {
            SCRATCH.with_borrow_mut(|scratch| {
                let state = summarize_trial(&config, &TrialStreams::new(config.seed, t), scratch);
                Ok::<_, Error>((
                    mrc_from_summary(&state, PROBE_PILOT, &config)?,
                    zf_from_summary(&state, PROBE_PILOT, &config)?,
                ))
            })
        })?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let est = |f: &dyn Fn(&(InterferenceSample, InterferenceSample)) -> f64| {
            let d = EmpiricalDistribution::from_samples(records.iter().map(f).collect());
            Estimate {
                value: d.mean,
                stderr: d.stderr,
            }
        };
        let zf_inter = est(&|r| r.1.inter);
        let mrc_inter = est(&|r| r.0.inter);
        rows.push(KappaRow {
            antennas: m,
            pilots: config.pilots,
            trials: records.len(),
            zf_intra: est(&|r| r.1.intra),
            mrc_intra: est(&|r| r.0.intra),
            zf_normalized: zf_inter.value * (1.0 - kappa) / kappa,
            mrc_normalized: mrc_inter.value / kappa,
            zf_inter,
            mrc_inter,
        });
    }
    let zf_spread = spread(rows.iter().map(|r| r.zf_normalized));
    let mrc_spread = spread(rows.iter().map(|r| r.mrc_normalized));
    Ok(KappaScan {
        kappa,
        seed: base.seed,
        pass: zf_spread <= KAPPA_SPREAD_LIMIT && mrc_spread <= KAPPA_SPREAD_LIMIT,
        zf_spread,
        mrc_spread,
        spread_limit: KAPPA_SPREAD_LIMIT,
        rows,
    })
}

/// Fixed geometry for the fading check: spatial trial 0, with each reuse
/// group cut down to its `max_outer` strongest members.
pub fn fading_instance(config: &SystemConfig, max_outer: usize) -> LargeScaleState {
    let full = trial_state(config, 0);
    let intra: Vec<(f64, f64)> = full
        .intra
        .iter()
        .map(|g| (g.path_loss, g.shadowing))
        .collect();
    let outer: Vec<Vec<(f64, f64)>> = full
        .outer
        .iter()
        .map(|group| {
            let mut members = group.clone();
            members.sort_by(|a, b| b.beta.total_cmp(&a.beta));
            members.truncate(max_outer);
            members.iter().map(|g| (g.path_loss, g.shadowing)).collect()
        })
        .collect();
    LargeScaleState::from_parts(&intra, &outer, full.training_noise)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReceiverCheck {
    pub expected: InterferenceSample,
    pub measured: FadingMeasurement,
    pub relative_error: ComponentStats,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FadingReport {
    pub config_hash: String,
    pub seed: u64,
    pub antennas: usize,
    pub pilots: usize,
    pub outer_per_group: Vec<usize>,
    pub draws: usize,
    pub mrc: ReceiverCheck,
    pub zf: ReceiverCheck,
    pub sinr_identity_error: f64,
    pub wishart_ratio: f64,
    pub wishart_stderr: f64,
    pub pass: bool,
}

/// Measures both receivers on a fixed small geometry with
/// `config.n_fading_trials` draws and compares with the per-realization
/// closed forms.
pub fn run_fading_validation(
    config: &SystemConfig,
    max_outer: usize,
    workers: usize,
) -> Result<FadingReport> {
    config.validate()?;
    let state = fading_instance(config, max_outer);
    let draws = config.n_fading_trials;
    let mut measured =
        fading::measure(&state, PROBE_PILOT, &Receiver::ALL, config, draws, workers)?;
    let zf_m = measured.pop().expect("two receivers");
    let mrc_m = measured.pop().expect("two receivers");
    let check = |measured: FadingMeasurement, expected: InterferenceSample, tolerance: f64| {
        let relative_error = measured.relative_errors(&expected);
        ReceiverCheck {
            pass: relative_error.as_array().iter().all(|&e| e <= tolerance),
            expected,
            measured,
            relative_error,
            tolerance,
        }
    };
    let mrc = check(
        mrc_m,
        mrc_components(&state, PROBE_PILOT, config)?,
        FADING_TOLERANCE_MRC,
    );
    let zf = check(
        zf_m,
        zf_components(&state, PROBE_PILOT, config)?,
        FADING_TOLERANCE_ZF,
    );
    let sinr_identity_error = zf.measured.max_sinr_identity_error.unwrap_or(f64::NAN);
    let wishart_ratio = zf.measured.wishart_ratio.unwrap_or(f64::NAN);
    let wishart_stderr = zf.measured.wishart_stderr.unwrap_or(f64::NAN);
    Ok(FadingReport {
        config_hash: config.hash_hex(),
        seed: config.seed,
        antennas: config.antennas,
        pilots: config.pilots,
        outer_per_group: state.outer.iter().map(Vec::len).collect(),
        draws,
        pass: mrc.pass
            && zf.pass
            && sinr_identity_error <= SINR_IDENTITY_TOLERANCE
            && (wishart_ratio - 1.0).abs() <= WISHART_TOLERANCE,
        mrc,
        zf,
        sinr_identity_error,
        wishart_ratio,
        wishart_stderr,
    })
}

/// Closed-form MRC moments at one shadowing level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticPoint {
    pub sigma_db: f64,
    pub mean: analytics::MrcMeans,
    pub var: analytics::MrcVariances,
}

/// Monte Carlo MRC moments at one shadowing level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPoint {
    pub sigma_db: f64,
    pub trials: usize,
    pub mean_intra: Estimate,
    pub mean_inter: Estimate,
    pub mean_cont: Estimate,
    pub var_inter: Estimate,
    pub var_cont: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaSweep {
    pub analytic: Vec<AnalyticPoint>,
    pub empirical: Vec<EmpiricalPoint>,
    pub sigma_crossing_db: Option<f64>,
}

/// Closed forms on `analytic_sigmas` and campaigns of
/// `base.n_spatial_trials` trials on `empirical_sigmas`.
pub fn run_sigma_sweep(
    base: &SystemConfig,
    analytic_sigmas: &[f64],
    empirical_sigmas: &[f64],
    workers: usize,
) -> Result<SigmaSweep> {
    base.validate()?;
    let analytic = analytic_sigmas
        .iter()
        .map(|&s| {
            let c = base.with_sigma_db(s);
            AnalyticPoint {
                sigma_db: s,
                mean: analytics::mean_mrc_closed(&c),
                var: analytics::var_mrc(&c),
            }
        })
        .collect();
    let mut empirical = Vec::with_capacity(empirical_sigmas.len());
    for &s in empirical_sigmas {
        let run = run_cdf_campaign(&base.with_sigma_db(s), workers)?;
        let mean = |d: &EmpiricalDistribution| Estimate {
            value: d.mean,
            stderr: d.stderr,
        };
        let var = |d: &EmpiricalDistribution| Estimate {
            value: d.variance,
            stderr: d.variance_stderr,
        };
        empirical.push(EmpiricalPoint {
            sigma_db: s,
            trials: run.records.len(),
            mean_intra: mean(&run.mrc.intra),
            mean_inter: mean(&run.mrc.inter),
            mean_cont: mean(&run.mrc.cont),
            var_inter: var(&run.mrc.inter),
            var_cont: var(&run.mrc.cont),
        });
    }
    Ok(SigmaSweep {
        analytic,
        empirical,
        sigma_crossing_db: analytics::sigma_crossing(base),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table2_default;

    fn quick(sigma: f64, trials: usize) -> SystemConfig {
        let mut c = table2_default().with_sigma_db(sigma);
        c.pilots = 10;
        c.n_spatial_trials = trials;
        c
    }

    #[test]
    fn streaming_matches_full_pipeline() {
        for sigma in [0.0, 8.0] {
            let c = quick(sigma, 1);
            let mut scratch = Vec::new();
            for t in 0..20 {
                let rec = run_trial(&c, t, &mut scratch).unwrap();
                let state = trial_state(&c, t);
                assert_eq!(rec.mrc, mrc_components(&state, PROBE_PILOT, &c).unwrap());
                assert_eq!(rec.zf, zf_components(&state, PROBE_PILOT, &c).unwrap());
                assert_eq!(
                    rec.ordering,
                    crate::interference::prop1_check(&state, PROBE_PILOT, &c).unwrap()
                );
            }
        }
    }

    #[test]
    fn campaign_is_worker_independent() {
        let c = quick(8.0, 300);
        let a = run_cdf_campaign(&c, 1).unwrap();
        let b = run_cdf_campaign(&c, 3).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.mrc, b.mrc);
        assert_eq!(a.records.len(), 300);
        assert_eq!(a.mrc.intra.n, 300);
        assert!(a.ordering.all_hold());
        assert_eq!(a.ordering.trials, 300);
    }

    #[test]
    fn distributions_match_records() {
        let c = quick(3.0, 200);
        let r = run_cdf_campaign(&c, 0).unwrap();
        let mean = r.records.iter().map(|t| t.zf.cont).sum::<f64>() / 200.0;
        assert!((r.zf.cont.mean - mean).abs() <= 1e-12 * mean);
        for d in [&r.mrc.intra, &r.zf.sir] {
            assert_eq!(d.cdf(*d.sorted().last().unwrap()), 1.0);
        }
        // ZF contamination is the M -> infinity limit of the MRC term.
        for t in &r.records {
            assert!(
                (t.mrc.cont - t.zf.cont * 127.0 / 128.0).abs() <= 1e-12 * t.zf.cont.max(1e-300)
            );
        }
    }

    #[test]
    fn moment_report_small_run() {
        let c = quick(0.0, 2_000);
        let rep = run_moment_validation(&c, 0).unwrap();
        assert_eq!(rep.means.len(), 3);
        assert!(rep.variances.iter().all(|v| v.pass.is_some()));
        assert!(rep.zf_bounds.is_some());
        for m in &rep.means {
            // Loose: 2000 trials only.
            assert!(m.relative_error() < 0.1, "{m:?}");
        }
        let shadowed = run_moment_validation(&quick(8.0, 300), 0).unwrap();
        assert!(shadowed.variances.iter().all(|v| v.pass.is_none()));
        assert!(shadowed.zf_bounds.is_none());
    }

    #[test]
    fn kappa_scan_rejects_bad_inputs() {
        let c = quick(0.0, 10);
        assert!(run_kappa_scan(&c, 0.3, &[64], 0).is_err());
        assert!(run_kappa_scan(&c, 1.0, &[64], 0).is_err());
        assert!(run_kappa_scan(&c, 0.25, &[], 0).is_err());
        let s = run_kappa_scan(&c, 1.0 / 64.0, &[64], 0).unwrap();
        assert_eq!(s.rows[0].pilots, 1);
        assert!(s.rows[0].zf_normalized > 0.0 && s.rows[0].mrc_normalized.is_finite());
        assert_eq!(s.zf_spread, 0.0);
    }

    #[test]
    fn sweep_shapes() {
        let c = quick(0.0, 50);
        let sw = run_sigma_sweep(&c, &[0.0, 4.0, 8.0], &[0.0, 8.0], 0).unwrap();
        assert_eq!(sw.analytic.len(), 3);
        assert_eq!(sw.empirical.len(), 2);
        assert_eq!(sw.empirical[1].trials, 50);
        assert!(sw.analytic[2].mean.cont > sw.analytic[0].mean.cont);
    }

    #[test]
    fn fading_instance_caps_groups() {
        let mut c = quick(3.0, 1);
        c.antennas = 32;
        c.pilots = 4;
        let s = fading_instance(&c, 5);
        assert!(s.outer.iter().all(|g| g.len() <= 5));
        let full = trial_state(&c, 0);
        let strongest = full.outer[0].iter().map(|g| g.beta).fold(0.0, f64::max);
        assert_eq!(
            s.outer[0].iter().map(|g| g.beta).fold(0.0, f64::max),
            strongest
        );
        assert_eq!(s.intra[0].beta, full.intra[0].beta);
    }
}
