//! Small-scale fading Monte Carlo.
//!
//! Draws i.i.d. Rayleigh channels for every UE of a fixed large-scale state,
//! runs the pilot-based linear MMSE estimator, forms the MRC or ZF receive
//! vector for the probed user and measures the power arriving from each
//! origin. Averages over many draws are the reference for the closed-form
//! per-realization components in [`crate::interference`].
//!
//! Power bookkeeping per draw, for receive vector `w`:
//!
//! * MRC: contamination is the reuse-group power in excess of what the same
//!   UEs would deliver through channels independent of `w`
//!   (`|w|^2 sum_{Phi_k} beta`); that independent part is inter-cell.
//! * ZF: powers are scaled by `beta_{x_k}^2` so the desired term is
//!   `beta_{x_k}^2`. Contamination is the projection onto the reuse group's
//!   channel estimates; their estimation errors count as inter-cell.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::interference::{InterferenceSample, Receiver};
use crate::propagation::LargeScaleState;
use crate::stats::RunningMoments;
use crate::streams::{run_trials, Lane, TrialStreams};
use crate::{Error, Result};

pub type C64 = Complex<f64>;

const CHUNK: usize = 1000;
/// Reject a Gram factor whose diagonal spread exceeds this ratio.
const SINGULAR_RATIO: f64 = 1e-12;

fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// `antennas x users` matrix of i.i.d. CN(0, 1) entries.
pub fn draw_fading<R: Rng + ?Sized>(antennas: usize, users: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(antennas, users, |_, _| complex_normal(rng))
}

/// Column layout of a state: intra-cell users `0..K`, then each reuse group
/// in pilot order.
#[derive(Debug, Clone)]
pub struct UeColumns {
    pub pilot: Vec<usize>,
    pub intra: Vec<bool>,
    pub beta: Vec<f64>,
    pub mmse_weight: Vec<f64>,
    pub error_variance: Vec<f64>,
}

impl UeColumns {
    pub fn new(state: &LargeScaleState) -> Self {
        let k = state.pilots();
        let mut cols = UeColumns {
            pilot: (0..k).collect(),
            intra: vec![true; k],
            beta: Vec::new(),
            mmse_weight: Vec::new(),
            error_variance: Vec::new(),
        };
        for (pilot, group) in state.outer.iter().enumerate() {
            cols.pilot.extend(std::iter::repeat_n(pilot, group.len()));
            cols.intra.extend(std::iter::repeat_n(false, group.len()));
        }
        for g in state.iter() {
            cols.beta.push(g.beta);
            cols.mmse_weight.push(g.mmse_weight);
            cols.error_variance.push(g.error_variance);
        }
        cols
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

/// True channels, their MMSE estimates and the estimation errors, one column
/// per UE in [`UeColumns`] order.
#[derive(Debug, Clone)]
pub struct ChannelEstimates {
    pub channels: DMatrix<C64>,
    pub estimates: DMatrix<C64>,
    pub errors: DMatrix<C64>,
    pub pilots: usize,
}

impl ChannelEstimates {
    /// The `M x K` estimate matrix of the in-cell users.
    pub fn intra_estimates(&self) -> DMatrix<C64> {
        self.estimates.columns(0, self.pilots).into_owned()
    }
}

/// Linear MMSE estimation from one training phase. `fading` supplies the
/// small-scale vectors; training noise is drawn from `rng` only when the state
/// carries a noise term.
pub fn estimate_channels<R: Rng + ?Sized>(
    state: &LargeScaleState,
    columns: &UeColumns,
    fading: DMatrix<C64>,
    rng: &mut R,
) -> ChannelEstimates {
    let (m, n) = fading.shape();
    assert_eq!(n, columns.len(), "one fading column per UE");
    let k = state.pilots();
    let mut channels = fading;
    for (j, &b) in columns.beta.iter().enumerate() {
        channels.column_mut(j).scale_mut(b.sqrt());
    }

    // Correlated pilot observation of each group.
    let mut observations = DMatrix::<C64>::zeros(m, k);
    for j in 0..n {
        let mut obs = observations.column_mut(columns.pilot[j]);
        obs += channels.column(j);
    }
    if state.training_noise > 0.0 {
        let scale = state.training_noise.sqrt();
        for z in observations.iter_mut() {
            *z += complex_normal(rng) * scale;
        }
    }

    let mut estimates = DMatrix::<C64>::zeros(m, n);
    for j in 0..n {
        let weight = columns.mmse_weight[j];
        estimates
            .column_mut(j)
            .copy_from(&(observations.column(columns.pilot[j]) * C64::from(weight)));
    }
    let errors = &channels - &estimates;
    ChannelEstimates {
        channels,
        estimates,
        errors,
        pilots: k,
    }
}

/// `sqrt(alpha_k / M) * g_hat / |g_hat|`.
pub fn mrc_receiver(estimate: &DVector<C64>, alpha: f64, antennas: usize) -> Result<DVector<C64>> {
    let norm = estimate.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Degenerate("MRC on a zero channel estimate".into()));
    }
    Ok(estimate * C64::from((alpha / antennas as f64).sqrt() / norm))
}

#[derive(Debug, Clone)]
pub struct ZfReceiver {
    pub weights: DVector<C64>,
    /// `[(G_hat^H G_hat)^{-1}]_{kk}`, which equals `|w|^2`.
    pub inv_gram_kk: f64,
}

/// Column `k` of `G_hat (G_hat^H G_hat)^{-1}`, via a thin QR factorization:
/// with `G_hat = QR`, `w = Q R^{-H} e_k` and `[Gram^{-1}]_{kk} = |R^{-H} e_k|^2`.
pub fn zf_receiver(intra_estimates: &DMatrix<C64>, k: usize) -> Result<ZfReceiver> {
    let (m, kk) = intra_estimates.shape();
    if m <= kk {
        return Err(Error::TooFewAntennas {
            antennas: m,
            pilots: kk,
        });
    }
    if k >= kk {
        return Err(Error::PilotOutOfRange {
            index: k,
            pilots: kk,
        });
    }
    let qr = intra_estimates.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..kk).map(|i| r[(i, i)].norm()).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    if max.is_nan() || max <= 0.0 || min <= SINGULAR_RATIO * max {
        return Err(Error::Degenerate("numerically singular Gram matrix".into()));
    }
    let mut e = DVector::<C64>::zeros(kk);
    e[k] = C64::from(1.0);
    let v = r
        .ad_solve_upper_triangular(&e)
        .ok_or_else(|| Error::Degenerate("triangular solve failed".into()))?;
    Ok(ZfReceiver {
        weights: qr.q() * &v,
        inv_gram_kk: v.norm_squared(),
    })
}

/// Powers seen by one receive vector on one draw, split by origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinrSample {
    /// `|w^H g_hat_{x_k}|^2`.
    pub desired: f64,
    /// Other in-cell users through their true channels.
    pub intra: f64,
    /// The probed user's own estimation error.
    pub own_error: f64,
    /// Out-of-cell users that do not share pilot `k`.
    pub other_cell: f64,
    /// Reuse group `Phi_k` through its true channels.
    pub reuse: f64,
    pub reuse_estimate: f64,
    pub reuse_error: f64,
    /// `sum_{y != x_k} |w^H g_hat_y|^2` over all UEs.
    pub estimate_leak: f64,
    pub w_norm_sq: f64,
    /// Estimation-error-plus-noise power `P_eps`.
    pub p_eps: f64,
    /// Post-processing SINR from the generic linear-receiver expression.
    pub sinr: f64,
    /// ZF only: the simplified closed form of the same SINR.
    pub sinr_zf_closed: Option<f64>,
    pub inv_gram_kk: Option<f64>,
}

impl SinrSample {
    /// `(S, I_intra, I_inter, I_cont)` under the bookkeeping in the module docs.
    pub fn components(&self, receiver: Receiver, probe_beta: f64, reuse_beta_sum: f64) -> [f64; 4] {
        match receiver {
            Receiver::Mrc => {
                let incoherent = self.w_norm_sq * reuse_beta_sum;
                [
                    self.desired,
                    self.intra + self.own_error,
                    self.other_cell + incoherent,
                    self.reuse - incoherent,
                ]
            }
            Receiver::Zf => {
                let s = probe_beta * probe_beta;
                [
                    s * self.desired,
                    s * (self.intra + self.own_error),
                    s * (self.other_cell + self.reuse_error),
                    s * self.reuse_estimate,
                ]
            }
        }
    }
}

fn projected_powers(w: &DVector<C64>, m: &DMatrix<C64>) -> Vec<f64> {
    (w.adjoint() * m).iter().map(|z| z.norm_sqr()).collect()
}

/// Measures one receive vector against one set of channel estimates.
pub fn measure_draw(
    w: &DVector<C64>,
    est: &ChannelEstimates,
    columns: &UeColumns,
    k: usize,
    p_eps: f64,
) -> SinrSample {
    let true_p = projected_powers(w, &est.channels);
    let hat_p = projected_powers(w, &est.estimates);
    let err_p = projected_powers(w, &est.errors);
    let mut s = SinrSample {
        desired: hat_p[k],
        intra: 0.0,
        own_error: err_p[k],
        other_cell: 0.0,
        reuse: 0.0,
        reuse_estimate: 0.0,
        reuse_error: 0.0,
        estimate_leak: 0.0,
        w_norm_sq: w.norm_squared(),
        p_eps,
        sinr: 0.0,
        sinr_zf_closed: None,
        inv_gram_kk: None,
    };
    for j in 0..columns.len() {
        if j != k {
            s.estimate_leak += hat_p[j];
        }
        match (columns.intra[j], columns.pilot[j] == k) {
            (true, true) => {}
            (true, false) => s.intra += true_p[j],
            (false, true) => {
                s.reuse += true_p[j];
                s.reuse_estimate += hat_p[j];
                s.reuse_error += err_p[j];
            }
            (false, false) => s.other_cell += true_p[j],
        }
    }
    s.sinr = s.desired / (s.estimate_leak + p_eps * s.w_norm_sq);
    s
}

/// Mean and standard error of each Table-1 component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentStats {
    pub signal: f64,
    pub intra: f64,
    pub inter: f64,
    pub cont: f64,
}

impl ComponentStats {
    pub fn as_array(&self) -> [f64; 4] {
        [self.signal, self.intra, self.inter, self.cont]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            signal: a[0],
            intra: a[1],
            inter: a[2],
            cont: a[3],
        }
    }
}

pub const COMPONENT_NAMES: [&str; 4] = ["S", "I_intra", "I_inter", "I_cont"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FadingMeasurement {
    pub receiver: Receiver,
    pub pilot: usize,
    pub draws: usize,
    pub discarded: usize,
    pub mean: ComponentStats,
    pub stderr: ComponentStats,
    pub mean_sinr: f64,
    /// ZF: mean of `[Gram^{-1}]_kk (M-K) beta_{x_k}^2 / alpha_k`, expected 1.
    pub wishart_ratio: Option<f64>,
    pub wishart_stderr: Option<f64>,
    /// ZF: worst relative gap between the generic and simplified SINR.
    pub max_sinr_identity_error: Option<f64>,
}

impl FadingMeasurement {
    pub fn discard_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.discarded as f64 / self.draws as f64
        }
    }

    /// Relative error of each measured mean against `expected`. A zero
    /// expectation is compared in absolute terms.
    pub fn relative_errors(&self, expected: &InterferenceSample) -> ComponentStats {
        let want = [
            expected.signal,
            expected.intra,
            expected.inter,
            expected.cont,
        ];
        let got = self.mean.as_array();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = if want[i] != 0.0 {
                (got[i] - want[i]).abs() / want[i].abs()
            } else {
                got[i].abs()
            };
        }
        ComponentStats::from_array(out)
    }
}

#[derive(Clone, Default)]
struct Accumulator {
    comps: [RunningMoments; 4],
    sinr: RunningMoments,
    wishart: RunningMoments,
    max_identity_err: f64,
    draws: usize,
    discarded: usize,
}

impl Accumulator {
    fn merge(&mut self, other: &Accumulator) {
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            a.merge(b);
        }
        self.sinr.merge(&other.sinr);
        self.wishart.merge(&other.wishart);
        self.max_identity_err = self.max_identity_err.max(other.max_identity_err);
        self.draws += other.draws;
        self.discarded += other.discarded;
    }
}

/// Runs `draws` fading realizations on one large-scale state and measures
/// every requested receiver on the same channel draws.
pub fn measure(
    state: &LargeScaleState,
    k: usize,
    receivers: &[Receiver],
    config: &SystemConfig,
    draws: usize,
    workers: usize,
) -> Result<Vec<FadingMeasurement>> {
    if draws == 0 {
        return Err(Error::InvalidArgument(
            "at least one fading draw is required".into(),
        ));
    }
    if k >= state.pilots() {
        return Err(Error::PilotOutOfRange {
            index: k,
            pilots: state.pilots(),
        });
    }
    let m = config.antennas;
    let kk = state.pilots();
    if receivers.contains(&Receiver::Zf) && m <= kk {
        return Err(Error::TooFewAntennas {
            antennas: m,
            pilots: kk,
        });
    }
    let columns = UeColumns::new(state);
    let p_eps: f64 = columns.error_variance.iter().sum::<f64>() + config.data_noise();
    let probe_beta = state.intra[k].beta;
    let reuse_beta_sum: f64 = state.outer[k].iter().map(|g| g.beta).sum();
    let reuse_sq_sum: f64 = state.outer[k].iter().map(|g| g.beta * g.beta).sum();
    let alpha = state.alpha[k];

    let chunks = draws.div_ceil(CHUNK);
    let per_chunk = run_trials(chunks, workers, |c| -> Result<Vec<Accumulator>> {
        let n = CHUNK.min(draws - c as usize * CHUNK);
        let mut rng = TrialStreams::new(config.seed, c).rng(Lane::Fading);
        let mut accs = vec![Accumulator::default(); receivers.len()];
        for _ in 0..n {
            let h = draw_fading(m, columns.len(), &mut rng);
            let est = estimate_channels(state, &columns, h, &mut rng);
            for (acc, &rx) in accs.iter_mut().zip(receivers) {
                acc.draws += 1;
                let (w, zf) = match rx {
                    Receiver::Mrc => (
                        mrc_receiver(&est.estimates.column(k).into_owned(), alpha, m)?,
                        None,
                    ),
                    Receiver::Zf => match zf_receiver(&est.intra_estimates(), k) {
                        Ok(z) => (z.weights.clone(), Some(z)),
                        Err(Error::Degenerate(_)) => {
                            acc.discarded += 1;
                            continue;
                        }
                        Err(e) => return Err(e),
                    },
                };
                let mut s = measure_draw(&w, &est, &columns, k, p_eps);
                if let Some(z) = zf {
                    let b2 = probe_beta * probe_beta;
                    let closed = b2 / (reuse_sq_sum + b2 * p_eps * z.inv_gram_kk);
                    s.sinr_zf_closed = Some(closed);
                    s.inv_gram_kk = Some(z.inv_gram_kk);
                    acc.max_identity_err =
                        acc.max_identity_err.max((s.sinr - closed).abs() / closed);
                    acc.wishart
                        .push(z.inv_gram_kk * (m - kk) as f64 * b2 / alpha);
                }
                let comps = s.components(rx, probe_beta, reuse_beta_sum);
                for (a, v) in acc.comps.iter_mut().zip(comps) {
                    a.push(v);
                }
                acc.sinr.push(s.sinr);
            }
        }
        Ok(accs)
    })?;

    let mut totals = vec![Accumulator::default(); receivers.len()];
    for chunk in per_chunk {
        for (t, a) in totals.iter_mut().zip(chunk?) {
            t.merge(&a);
        }
    }
    Ok(receivers
        .iter()
        .zip(totals)
        .map(|(&rx, t)| {
            let zf = rx == Receiver::Zf;
            FadingMeasurement {
                receiver: rx,
                pilot: k,
                draws: t.draws,
                discarded: t.discarded,
                mean: ComponentStats::from_array(t.comps.map(|c| c.mean)),
                stderr: ComponentStats::from_array(t.comps.map(|c| c.stderr())),
                mean_sinr: t.sinr.mean,
                wishart_ratio: zf.then_some(t.wishart.mean),
                wishart_stderr: zf.then_some(t.wishart.stderr()),
                max_sinr_identity_error: zf.then_some(t.max_identity_err),
            }
        })
        .collect())
}

pub fn measure_components(
    state: &LargeScaleState,
    k: usize,
    receiver: Receiver,
    config: &SystemConfig,
    draws: usize,
    workers: usize,
) -> Result<FadingMeasurement> {
    Ok(measure(state, k, &[receiver], config, draws, workers)?.remove(0))
}
