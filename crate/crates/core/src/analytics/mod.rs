//! Closed-form statistics of the spatially averaged interference.
//!
//! All formulas assume the interference-limited regime: noise terms are
//! dropped, so only the geometry, path loss and shadowing enter.

pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::config::{shadowing_mu, SystemConfig};
use crate::propagation::build_large_scale;
use crate::spatial::sample_layout;
use crate::stats::RunningMoments;
use crate::streams::{run_trials, TrialStreams};
use crate::{Error, Result};

/// Quadrature tolerances, absolute and relative, on the normalized integrands.
const QUAD_TOL: f64 = 1e-12;

/// Tail fraction above which the truncated window is flagged as too small.
const TAIL_WARNING: f64 = 0.01;

/// First two moments of the shadowing factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowMoments {
    pub mean: f64,
    pub second: f64,
}

impl ShadowMoments {
    /// Log-normal with dB standard deviation `sigma_db`: `E eta = mu^(1/2)`,
    /// `E eta^2 = mu^2`.
    pub fn lognormal(sigma_db: f64) -> Self {
        let mu = shadowing_mu(sigma_db);
        Self {
            mean: mu.sqrt(),
            second: mu * mu,
        }
    }
}

/// Radial integrals of the path-loss profile: `p_i` over the cell disk,
/// `p_o` and `p_o2` (of `p^2`) over its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryIntegrals {
    pub p_i: f64,
    pub p_o: f64,
    pub p_o2: f64,
    /// Reuse intensity `1/(pi R^2)`.
    pub lambda: f64,
}

impl GeometryIntegrals {
    /// `lambda * (p_i, p_o, p_o2)`: per-UE means over the cell and the
    /// expected outer sums per pilot group.
    pub fn scaled(&self) -> [f64; 3] {
        [
            self.lambda * self.p_i,
            self.lambda * self.p_o,
            self.lambda * self.p_o2,
        ]
    }

    pub fn max_relative_difference(&self, other: &GeometryIntegrals) -> f64 {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        rel(self.p_i, other.p_i)
            .max(rel(self.p_o, other.p_o))
            .max(rel(self.p_o2, other.p_o2))
    }
}

fn require_decay(gamma: f64) -> Result<()> {
    if gamma > 2.0 {
        Ok(())
    } else {
        Err(Error::Divergent(format!(
            "outer path-loss integral diverges for gamma = {gamma} <= 2"
        )))
    }
}

pub fn geometry_integrals(config: &SystemConfig) -> Result<GeometryIntegrals> {
    let g = config.path_loss_exponent;
    require_decay(g)?;
    let d = config.derived();
    let (l, a0) = (d.l, config.ref_path_loss);
    let area = 1.0 / d.lambda;
    Ok(GeometryIntegrals {
        p_i: area * a0 * l * l * (g - 2.0 * l.powf(g - 2.0)) / (g - 2.0),
        p_o: area * 2.0 * a0 * l.powf(g) / (g - 2.0),
        p_o2: area * a0 * a0 * l.powf(2.0 * g) / (g - 1.0),
        lambda: d.lambda,
    })
}

/// The same integrals by adaptive quadrature in `t = r/R`, over the window
/// `[1, trunc_factor]` plus the analytic tail beyond it.
pub fn geometry_integrals_quadrature(config: &SystemConfig) -> Result<GeometryIntegrals> {
    let g = config.path_loss_exponent;
    require_decay(g)?;
    let d = config.derived();
    let (l, a0, big_t) = (d.l, config.ref_path_loss, config.trunc_factor);
    let area = 1.0 / d.lambda;
    // Integrands divided by (A0 l^g)^n, so they read t^(1 - n g) beyond d0.
    let outer = |n: f64| {
        let e = n * g;
        let body = quadrature::integrate(|t| t.powf(1.0 - e), 1.0, big_t, QUAD_TOL, QUAD_TOL);
        let tail = big_t.powf(2.0 - e) / (e - 2.0);
        2.0 * area * (a0 * l.powf(g)).powf(n) * (body + tail)
    };
    let flat = quadrature::integrate(|t| t * l.powf(-g), 0.0, l, QUAD_TOL, QUAD_TOL);
    let decaying = quadrature::integrate(|t| t.powf(1.0 - g), l, 1.0, QUAD_TOL, QUAD_TOL);
    Ok(GeometryIntegrals {
        p_i: 2.0 * area * a0 * l.powf(g) * (flat + decaying),
        p_o: outer(1.0),
        p_o2: outer(2.0),
        lambda: d.lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrcMeans {
    pub intra: f64,
    pub inter: f64,
    pub cont: f64,
}

impl MrcMeans {
    pub fn as_array(&self) -> [f64; 3] {
        [self.intra, self.inter, self.cont]
    }
}

/// Means from the integrals and arbitrary shadowing moments. The reuse-group
/// self term is weighted by `E eta^2`, the exact second moment.
pub fn mean_mrc_from(
    integrals: &GeometryIntegrals,
    shadow: ShadowMoments,
    antennas: usize,
    pilots: usize,
) -> MrcMeans {
    let (m, k) = (antennas as f64, pilots as f64);
    let [pi, po, po2] = integrals.scaled();
    let e2 = shadow.mean * shadow.mean;
    MrcMeans {
        intra: e2 * pi * ((k - 1.0) * pi + k * po) / m,
        inter: (e2 * (k * pi * po + k * po * po) + shadow.second * po2) / m,
        cont: (m - 1.0) / m * shadow.second * po2,
    }
}

/// MRC means from quadrature integrals and log-normal shadowing.
pub fn mean_mrc_general(config: &SystemConfig) -> Result<MrcMeans> {
    let integrals = geometry_integrals_quadrature(config)?;
    Ok(mean_mrc_from(
        &integrals,
        ShadowMoments::lognormal(config.shadowing_db),
        config.antennas,
        config.pilots,
    ))
}

/// MRC means in closed form for the bounded power-law path loss.
pub fn mean_mrc_closed(config: &SystemConfig) -> MrcMeans {
    let (g, a0) = (config.path_loss_exponent, config.ref_path_loss);
    let d = config.derived();
    let (l, mu) = (d.l, d.mu);
    let (m, k) = (config.antennas as f64, config.pilots as f64);
    let lg2 = l.powf(g - 2.0);
    let cont_core = l.powf(2.0 * g) * a0 * a0 * mu * mu / (g - 1.0);
    MrcMeans {
        intra: l.powi(4) * a0 * a0 * mu / (m * (g - 2.0).powi(2))
            * (g - 2.0 * lg2)
            * ((k - 1.0) * g + 2.0 * lg2),
        inter: 2.0 * k * g * l.powf(g + 2.0) * a0 * a0 * mu / (m * (g - 2.0).powi(2))
            + cont_core / m,
        cont: (m - 1.0) / m * cont_core,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MrcVariances {
    pub inter: f64,
    pub cont: f64,
}

pub fn var_mrc(config: &SystemConfig) -> MrcVariances {
    let (g, a0) = (config.path_loss_exponent, config.ref_path_loss);
    let d = config.derived();
    let (l, mu) = (d.l, d.mu);
    let (m, k) = (config.antennas as f64, config.pilots as f64);
    let a = g * l.powf(2.0 - g);
    let b = g * l.powf(2.0 - 2.0 * g);
    let bracket = mu.powi(6) / (2.0 * g - 1.0)
        + 4.0 * (a + 2.0 * k) * mu.powi(3) / ((3.0 * g - 2.0) * (g - 2.0))
        + (k * b + 1.0) * mu * mu / (g - 1.0).powi(2)
        + 4.0 * k * (2.0 * a + k * b - 1.0) * mu / ((g - 1.0) * (g - 2.0).powi(2))
        - 4.0 * k * k * (a - 2.0).powi(2) / (g - 2.0).powi(4);
    let scale = l.powf(4.0 * g) * a0.powi(4) / (m * m);
    MrcVariances {
        inter: scale * mu * mu * bracket,
        cont: scale * (m - 1.0).powi(2) * mu.powi(8) / (2.0 * g - 1.0),
    }
}

fn zf_prefactor(config: &SystemConfig) -> Result<f64> {
    let (m, k) = (config.antennas, config.pilots);
    if m <= k {
        return Err(Error::TooFewAntennas {
            antennas: m,
            pilots: k,
        });
    }
    let (g, a0, l) = (
        config.path_loss_exponent,
        config.ref_path_loss,
        config.derived().l,
    );
    Ok(2.0 * k as f64 * g * l.powf(g + 2.0) * a0 * a0 / ((m - k) as f64 * (g - 2.0).powi(2)))
}

/// Lower bound on the mean ZF intra-cell interference. Only derived without
/// shadowing.
pub fn zf_lower_bound(config: &SystemConfig) -> Result<f64> {
    if config.shadowing_db != 0.0 {
        return Err(Error::UnsupportedRegime(format!(
            "ZF lower bound holds only without shadowing, got sigma = {} dB",
            config.shadowing_db
        )));
    }
    let pre = zf_prefactor(config)?;
    let (g, l, k) = (
        config.path_loss_exponent,
        config.derived().l,
        config.pilots as f64,
    );
    let bracket = 1.0
        - 2.0 * l.powf(g - 2.0) / (k * g)
        - (k - 1.0) / (2.0 * k * (g + 2.0))
            * (2.0 + g * l.powf(g + 2.0))
            * ((g - 2.0) / (g - 1.0) + 4.0 / (g - 2.0));
    Ok(pre * bracket)
}

/// Upper bound on the mean ZF intra- and inter-cell interference; valid with
/// shadowing.
pub fn zf_upper_bound(config: &SystemConfig) -> Result<f64> {
    let pre = zf_prefactor(config)?;
    let d = config.derived();
    let (g, a0) = (config.path_loss_exponent, config.ref_path_loss);
    let mk = (config.antennas - config.pilots) as f64;
    Ok(pre * d.mu + d.l.powf(2.0 * g) * a0 * a0 * d.mu * d.mu / (mk * (g - 1.0)))
}

/// Mean ZF pilot-contamination power `mu^2 l^(2 gamma) A0^2 / (gamma - 1)`.
pub fn zf_cont_mean(config: &SystemConfig) -> f64 {
    let d = config.derived();
    let g = config.path_loss_exponent;
    d.mu * d.mu * d.l.powf(2.0 * g) * config.ref_path_loss.powi(2) / (g - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZfBounds {
    /// `None` when shadowing is present.
    pub lower: Option<f64>,
    pub upper: f64,
    pub cont: f64,
}

pub fn zf_bounds(config: &SystemConfig) -> Result<ZfBounds> {
    let lower = match zf_lower_bound(config) {
        Ok(v) => Some(v),
        Err(Error::UnsupportedRegime(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(ZfBounds {
        lower,
        upper: zf_upper_bound(config)?,
        cont: zf_cont_mean(config),
    })
}

/// `M/K` at which the approximate ratio `E[I_cont]/E[I_intra]` for MRC
/// reaches one.
pub fn dominance_threshold(config: &SystemConfig) -> f64 {
    let g = config.path_loss_exponent;
    let d = config.derived();
    g * g * (g - 1.0) * d.l.powf(4.0 - 2.0 * g) / ((g - 2.0).powi(2) * d.mu)
}

/// Shadowing level in `[0, 12]` dB where the mean MRC inter-cell and
/// contamination powers coincide, to 0.01 dB. `None` without a sign change.
pub fn sigma_crossing(config: &SystemConfig) -> Option<f64> {
    let gap = |s: f64| {
        let m = mean_mrc_closed(&config.with_sigma_db(s));
        m.inter - m.cont
    };
    let (mut lo, mut hi) = (0.0, 12.0);
    let f_lo = gap(lo);
    if f_lo.signum() == gap(hi).signum() {
        return None;
    }
    while hi - lo > 0.01 {
        let mid = 0.5 * (lo + hi);
        if gap(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationBound {
    /// Share of `p_o` lying beyond the simulation window.
    pub p_o_tail: f64,
    pub p_o2_tail: f64,
    pub warning: Option<String>,
}

pub fn truncation_bound(config: &SystemConfig) -> Result<TruncationBound> {
    let g = config.path_loss_exponent;
    require_decay(g)?;
    let t = config.trunc_factor;
    let p_o_tail = t.powf(2.0 - g);
    let warning = (p_o_tail > TAIL_WARNING).then(|| {
        format!(
            "window of {t} cell radii drops {:.1}% of the mean outer path loss",
            100.0 * p_o_tail
        )
    });
    Ok(TruncationBound {
        p_o_tail,
        p_o2_tail: t.powf(2.0 - 2.0 * g),
        warning,
    })
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn relative_stderr(&self) -> f64 {
        (self.stderr / self.value).abs()
    }
}

/// Spatial expectations behind the fixed-load-factor limits. `a*` are the
/// own-group terms, `b*` the cross-group products of means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticConstants {
    pub trials: usize,
    /// `E{alpha (1-C_x) beta_x}`.
    pub a1: Estimate,
    /// `E{alpha} E{(1-C_x) beta_x}`.
    pub b1: Estimate,
    /// `E{alpha sum_{Phi_k} (1-C_y) beta_y}`.
    pub a2: Estimate,
    /// `E{alpha} E{sum_{Phi_k} (1-C_y) beta_y}`.
    pub b2: Estimate,
    /// `E{alpha} E{beta_x}`.
    pub b1_mrc: Estimate,
    /// `E{alpha sum_{Phi_k} beta_y}`.
    pub a2_mrc: Estimate,
    /// `E{alpha} E{sum_{Phi_k} beta_y}`.
    pub b2_mrc: Estimate,
}

impl AsymptoticConstants {
    /// `kappa/(1-kappa) B1`, the limiting mean ZF intra-cell interference.
    pub fn zf_intra_limit(&self, kappa: f64) -> f64 {
        kappa / (1.0 - kappa) * self.b1.value
    }

    pub fn zf_inter_limit(&self, kappa: f64) -> f64 {
        kappa / (1.0 - kappa) * self.b2.value
    }

    pub fn mrc_intra_limit(&self, kappa: f64) -> f64 {
        kappa * self.b1_mrc.value
    }

    pub fn mrc_inter_limit(&self, kappa: f64) -> f64 {
        kappa * self.b2_mrc.value
    }

    /// Finite-size mean `(A2 + (K-1) B2)/(M-K)` of the ZF inter-cell term.
    pub fn zf_inter_mean(&self, antennas: usize, pilots: usize) -> f64 {
        (self.a2.value + (pilots as f64 - 1.0) * self.b2.value) / (antennas - pilots) as f64
    }

    pub fn mrc_inter_mean(&self, antennas: usize, pilots: usize) -> f64 {
        (self.a2_mrc.value + (pilots as f64 - 1.0) * self.b2_mrc.value) / antennas as f64
    }

    fn worst_relative_stderr(&self) -> f64 {
        [
            self.a1,
            self.b1,
            self.a2,
            self.b2,
            self.b1_mrc,
            self.a2_mrc,
            self.b2_mrc,
        ]
        .iter()
        .map(Estimate::relative_stderr)
        .fold(0.0, f64::max)
    }
}

/// Per-trial large-scale quantities of one pilot group.
#[derive(Debug, Clone, Copy)]
struct GroupDraw {
    alpha: f64,
    beta_x: f64,
    err_x: f64,
    beta_sum: f64,
    err_sum: f64,
}

fn mean_of(n: usize, f: impl Fn(usize) -> f64) -> Estimate {
    let acc: RunningMoments = (0..n).map(f).collect();
    Estimate {
        value: acc.mean,
        stderr: acc.stderr(),
    }
}

/// Product of two sample means from the same trials, delta-method error.
fn product_of_means(xs: &[f64], ys: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cxy += (x - mx) * (y - my);
    }
    let norm = n - 1.0;
    let var = (my * my * vx + mx * mx * vy + 2.0 * mx * my * cxy) / norm / n;
    Estimate {
        value: mx * my,
        stderr: var.max(0.0).sqrt(),
    }
}

/// Smallest and largest spatial sample sizes tried when estimating the
/// asymptotic constants.
pub const ASYMPTOTIC_MIN_TRIALS: usize = 4_096;
pub const ASYMPTOTIC_MAX_TRIALS: usize = 1 << 20;

/// Estimates the constants by spatial Monte Carlo on a single pilot group,
/// doubling the sample until every relative standard error is below
/// `target_rel_stderr` or `ASYMPTOTIC_MAX_TRIALS` is reached.
pub fn asymptotic_constants(
    config: &SystemConfig,
    target_rel_stderr: f64,
    workers: usize,
) -> Result<AsymptoticConstants> {
    config.validate()?;
    let mut single = config.clone();
    single.pilots = 1;
    single.antennas = single.antennas.max(2);
    let draw = |trial: u64| {
        let streams = TrialStreams::new(single.seed, trial);
        let layout = sample_layout(&single, &streams);
        let state = build_large_scale(&layout, &single, &streams);
        let group = &state.outer[0];
        GroupDraw {
            alpha: state.alpha[0],
            beta_x: state.intra[0].beta,
            err_x: state.intra[0].error_variance,
            beta_sum: group.iter().map(|g| g.beta).sum(),
            err_sum: group.iter().map(|g| g.error_variance).sum(),
        }
    };
    let mut draws: Vec<GroupDraw> = Vec::new();
    let mut n = ASYMPTOTIC_MIN_TRIALS;
    loop {
        let start = draws.len() as u64;
        draws.extend(run_trials(n - draws.len(), workers, |i| draw(start + i))?);
        let column = |f: fn(&GroupDraw) -> f64| draws.iter().map(f).collect::<Vec<f64>>();
        let alpha = column(|d| d.alpha);
        let consts = AsymptoticConstants {
            trials: n,
            a1: mean_of(n, |i| draws[i].alpha * draws[i].err_x),
            b1: product_of_means(&alpha, &column(|d| d.err_x)),
            a2: mean_of(n, |i| draws[i].alpha * draws[i].err_sum),
            b2: product_of_means(&alpha, &column(|d| d.err_sum)),
            b1_mrc: product_of_means(&alpha, &column(|d| d.beta_x)),
            a2_mrc: mean_of(n, |i| draws[i].alpha * draws[i].beta_sum),
            b2_mrc: product_of_means(&alpha, &column(|d| d.beta_sum)),
        };
        if consts.worst_relative_stderr() <= target_rel_stderr || n >= ASYMPTOTIC_MAX_TRIALS {
            return Ok(consts);
        }
        n *= 2;
    }
}

/// Everything the closed forms say about one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticMoments {
    pub integrals: GeometryIntegrals,
    pub mean_mrc: MrcMeans,
    pub var_mrc: MrcVariances,
    pub zf: ZfBounds,
}

pub fn analytic_moments(config: &SystemConfig) -> Result<AnalyticMoments> {
    config.validate()?;
    Ok(AnalyticMoments {
        integrals: geometry_integrals(config)?,
        mean_mrc: mean_mrc_closed(config),
        var_mrc: var_mrc(config),
        zf: zf_bounds(config)?,
    })
}

/// Ratios quoted as sanity checkpoints alongside the moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRatios {
    pub mrc_inter_over_cont: f64,
    pub mrc_var_inter_over_cont: f64,
    pub mrc_var_ratio_limit: f64,
    pub zf_upper_over_lower: Option<f64>,
    pub zf_cont_over_lower: Option<f64>,
    pub zf_cont_over_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub config: SystemConfig,
    pub moments: AnalyticMoments,
    /// Same integrals by quadrature, and the largest relative gap to the
    /// closed forms.
    pub quadrature_integrals: GeometryIntegrals,
    pub quadrature_max_rel_diff: f64,
    pub ratios: DerivedRatios,
    pub dominance_threshold: f64,
    pub sigma_crossing_db: Option<f64>,
    pub truncation: TruncationBound,
}

pub fn analytic_report(config: &SystemConfig) -> Result<AnalyticReport> {
    let moments = analytic_moments(config)?;
    let quadrature_integrals = geometry_integrals_quadrature(config)?;
    let m = config.antennas as f64;
    let ratios = DerivedRatios {
        mrc_inter_over_cont: moments.mean_mrc.inter / moments.mean_mrc.cont,
        mrc_var_inter_over_cont: moments.var_mrc.inter / moments.var_mrc.cont,
        mrc_var_ratio_limit: 1.0 / ((m - 1.0) * (m - 1.0)),
        zf_upper_over_lower: moments.zf.lower.map(|lo| moments.zf.upper / lo),
        zf_cont_over_lower: moments.zf.lower.map(|lo| moments.zf.cont / lo),
        zf_cont_over_upper: moments.zf.cont / moments.zf.upper,
    };
    Ok(AnalyticReport {
        config: config.clone(),
        quadrature_max_rel_diff: quadrature_integrals.max_relative_difference(&moments.integrals),
        quadrature_integrals,
        moments,
        ratios,
        dominance_threshold: dominance_threshold(config),
        sigma_crossing_db: sigma_crossing(config),
        truncation: truncation_bound(config)?,
    })
}
