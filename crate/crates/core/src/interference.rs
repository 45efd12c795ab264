//! Interference components of one uplink, averaged over small-scale fading.
//!
//! For MRC the power that reuse-group UEs would contribute through an
//! independent channel, `(alpha_k/M) sum_{Phi_k} beta`, is booked as
//! inter-cell interference; what remains, `((M-1)/M) sum_{Phi_k} beta^2`, is
//! the pilot-contamination term that survives `M -> infinity`.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::propagation::{LargeScaleState, StateSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Mrc,
    Zf,
}

impl Receiver {
    pub const ALL: [Receiver; 2] = [Receiver::Mrc, Receiver::Zf];

    pub fn as_str(self) -> &'static str {
        match self {
            Receiver::Mrc => "mrc",
            Receiver::Zf => "zf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferenceSample {
    pub receiver: Receiver,
    /// Zero-based pilot index of the probed uplink.
    pub pilot: usize,
    pub signal: f64,
    pub intra: f64,
    pub inter: f64,
    pub cont: f64,
    /// `signal / (intra + inter + cont)`; infinite when interference-free.
    pub sir: f64,
}

impl InterferenceSample {
    fn new(
        receiver: Receiver,
        pilot: usize,
        signal: f64,
        intra: f64,
        inter: f64,
        cont: f64,
    ) -> Self {
        let total = intra + inter + cont;
        let sir = if total > 0.0 {
            signal / total
        } else {
            f64::INFINITY
        };
        Self {
            receiver,
            pilot,
            signal,
            intra,
            inter,
            cont,
            sir,
        }
    }

    pub fn total(&self) -> f64 {
        self.intra + self.inter + self.cont
    }
}

fn check_pilot(pilots: usize, k: usize) -> Result<()> {
    if k >= pilots {
        return Err(Error::PilotOutOfRange { index: k, pilots });
    }
    Ok(())
}

pub fn mrc_components(
    state: &LargeScaleState,
    k: usize,
    config: &SystemConfig,
) -> Result<InterferenceSample> {
    mrc_from_summary(&state.summary(), k, config)
}

pub fn zf_components(
    state: &LargeScaleState,
    k: usize,
    config: &SystemConfig,
) -> Result<InterferenceSample> {
    zf_from_summary(&state.summary(), k, config)
}

pub fn mrc_from_summary(
    state: &StateSummary,
    k: usize,
    config: &SystemConfig,
) -> Result<InterferenceSample> {
    check_pilot(state.pilots(), k)?;
    let m = config.antennas as f64;
    let probe = state.intra[k];
    let scale = state.alpha[k] / m;

    // sum_{Phi_0} beta - C_{x_k} beta_{x_k}, without cancelling the probe term.
    let others: f64 = state
        .intra
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != k)
        .map(|(_, g)| g.beta)
        .sum();
    let intra = scale * (others + probe.error_variance);
    let inter = scale * state.groups.iter().map(|g| g.beta_sum).sum::<f64>();
    let cont = (m - 1.0) / m * state.groups[k].beta_sq_sum;
    Ok(InterferenceSample::new(
        Receiver::Mrc,
        k,
        probe.beta * probe.beta,
        intra,
        inter,
        cont,
    ))
}

pub fn zf_from_summary(
    state: &StateSummary,
    k: usize,
    config: &SystemConfig,
) -> Result<InterferenceSample> {
    check_pilot(state.pilots(), k)?;
    let (m, kk) = (config.antennas, state.pilots());
    if m <= kk {
        return Err(Error::TooFewAntennas {
            antennas: m,
            pilots: kk,
        });
    }
    let scale = state.alpha[k] / (m - kk) as f64;
    let probe = state.intra[k];
    let intra = scale * state.intra.iter().map(|g| g.error_variance).sum::<f64>();
    let inter = scale * state.groups.iter().map(|g| g.error_sum).sum::<f64>();
    let cont = state.groups[k].beta_sq_sum;
    Ok(InterferenceSample::new(
        Receiver::Zf,
        k,
        probe.beta * probe.beta,
        intra,
        inter,
        cont,
    ))
}

/// Ordering `I_intra^ZF < I_inter^ZF < M/(M-K) I_inter^MRC` on one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub zf_intra: f64,
    pub zf_inter: f64,
    /// `M/(M-K) I_inter^MRC`, the upper bound of both ZF terms.
    pub zf_upper: f64,
    pub strict: bool,
    pub non_strict: bool,
    /// Every reuse group holds at least one UE.
    pub groups_non_empty: bool,
    /// Every reuse group holds at least two UEs, the condition for strictness.
    pub groups_multiple: bool,
}

impl OrderingCheck {
    /// Whether the ordering holds to the strength the geometry guarantees.
    pub fn holds(&self) -> bool {
        if self.groups_multiple {
            self.strict
        } else {
            self.non_strict
        }
    }
}

pub fn prop1_check(
    state: &LargeScaleState,
    k: usize,
    config: &SystemConfig,
) -> Result<OrderingCheck> {
    let summary = state.summary();
    let zf = zf_from_summary(&summary, k, config)?;
    let mrc = mrc_from_summary(&summary, k, config)?;
    Ok(ordering_of(&summary, &mrc, &zf, config))
}

/// The ordering check from components already computed for `state`.
pub fn ordering_of(
    state: &StateSummary,
    mrc: &InterferenceSample,
    zf: &InterferenceSample,
    config: &SystemConfig,
) -> OrderingCheck {
    let m = config.antennas as f64;
    let upper = m / (m - state.pilots() as f64) * mrc.inter;
    OrderingCheck {
        zf_intra: zf.intra,
        zf_inter: zf.inter,
        zf_upper: upper,
        strict: zf.intra < zf.inter && zf.inter < upper,
        non_strict: zf.intra <= zf.inter && zf.inter <= upper,
        groups_non_empty: state.groups.iter().all(|g| g.members > 0),
        groups_multiple: state.groups.iter().all(|g| g.members >= 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table2_default;
    use crate::propagation::build_large_scale;
    use crate::spatial::sample_layout;
    use crate::streams::TrialStreams;
    use proptest::prelude::*;

    fn small_cfg(m: usize, k: usize) -> SystemConfig {
        SystemConfig {
            antennas: m,
            pilots: k,
            ..table2_default()
        }
    }

    #[test]
    fn single_user_is_interference_free() {
        let s = LargeScaleState::from_betas(&[3e-5], &[vec![]], 0.0);
        let cfg = small_cfg(8, 1);
        let mrc = mrc_components(&s, 0, &cfg).unwrap();
        assert_eq!((mrc.intra, mrc.inter, mrc.cont), (0.0, 0.0, 0.0));
        assert_eq!(mrc.signal, 9e-10);
        assert!(mrc.sir.is_infinite());
        let zf = zf_components(&s, 0, &cfg).unwrap();
        assert_eq!((zf.intra, zf.inter, zf.cont), (0.0, 0.0, 0.0));
    }

    #[test]
    fn zf_nulls_everything_with_perfect_csi() {
        let s = LargeScaleState::from_betas(&[1.0, 2.0, 3.0], &[vec![], vec![], vec![]], 0.0);
        let zf = zf_components(&s, 1, &small_cfg(8, 3)).unwrap();
        assert_eq!((zf.intra, zf.inter, zf.cont), (0.0, 0.0, 0.0));
        let mrc = mrc_components(&s, 1, &small_cfg(8, 3)).unwrap();
        assert_eq!(mrc.intra, 2.0 / 8.0 * 4.0);
    }

    #[test]
    fn hand_computed_table_entries() {
        // K = 2, probe k = 0, beta_x = (1, 2), Phi_0 = {1, 1}, Phi_1 = {2}.
        let s = LargeScaleState::from_betas(&[1.0, 2.0], &[vec![1.0, 1.0], vec![2.0]], 0.0);
        let cfg = small_cfg(10, 2);
        let mrc = mrc_components(&s, 0, &cfg).unwrap();
        // alpha_0 = 3, C_x0 = 1/3.
        assert!((mrc.intra - 0.3 * (3.0 - 1.0 / 3.0)).abs() < 1e-15);
        assert!((mrc.inter - 0.3 * 4.0).abs() < 1e-15);
        assert!((mrc.cont - 0.9 * 2.0).abs() < 1e-15);
        let zf = zf_components(&s, 0, &cfg).unwrap();
        // (1-C)beta: intra x0: 2/3, x1: 2*2/4 = 1; outer group0: 1*2/3 each; group1: 2*2/4 = 1.
        assert!((zf.intra - 3.0 / 8.0 * (2.0 / 3.0 + 1.0)).abs() < 1e-15);
        assert!((zf.inter - 3.0 / 8.0 * (4.0 / 3.0 + 1.0)).abs() < 1e-15);
        assert_eq!(zf.cont, 2.0);
    }

    #[test]
    fn zf_refuses_m_le_k() {
        let s = LargeScaleState::from_betas(&[1.0, 1.0], &[vec![], vec![]], 0.0);
        let cfg = SystemConfig {
            antennas: 2,
            pilots: 2,
            ..table2_default()
        };
        assert!(matches!(
            zf_components(&s, 0, &cfg),
            Err(Error::TooFewAntennas { .. })
        ));
        assert!(matches!(
            mrc_components(&s, 2, &small_cfg(8, 2)),
            Err(Error::PilotOutOfRange { .. })
        ));
    }

    #[test]
    fn large_array_limit() {
        let s = LargeScaleState::from_betas(&[1.0, 0.5], &[vec![0.3, 0.2], vec![0.1]], 0.0);
        let mrc = mrc_components(&s, 0, &small_cfg(1_000_000_000, 2)).unwrap();
        assert!(mrc.intra < 1e-8 && mrc.inter < 1e-8);
        assert!((mrc.cont - 0.13).abs() < 1e-9);
    }

    #[test]
    fn upper_bound_factor() {
        let m = 128.0_f64;
        assert!((m / (m - 30.0) - 1.306).abs() < 1e-3);
    }

    #[test]
    fn ordering_on_sampled_table2_realizations() {
        for sigma in [0.0, 8.0] {
            let cfg = table2_default().with_sigma_db(sigma);
            for t in 0..20 {
                let streams = TrialStreams::new(77, t);
                let state = build_large_scale(&sample_layout(&cfg, &streams), &cfg, &streams);
                let check = prop1_check(&state, 0, &cfg).unwrap();
                assert!(check.groups_multiple && check.strict, "{check:?}");
            }
        }
    }

    #[test]
    fn ordering_degenerates_with_empty_groups() {
        let s = LargeScaleState::from_betas(&[1.0, 2.0], &[vec![], vec![]], 0.0);
        let check = prop1_check(&s, 0, &small_cfg(8, 2)).unwrap();
        assert_eq!(
            (check.zf_intra, check.zf_inter, check.zf_upper),
            (0.0, 0.0, 0.0)
        );
        assert!(check.non_strict && !check.strict && check.holds());
        // One reuser per group: the per-group inequality becomes an equality.
        let s = LargeScaleState::from_betas(&[1.0, 2.0], &[vec![0.5], vec![0.25]], 0.0);
        let check = prop1_check(&s, 0, &small_cfg(8, 2)).unwrap();
        assert!((check.zf_intra - check.zf_inter).abs() < 1e-15);
        assert!(check.holds());
    }

    fn state_strategy() -> impl Strategy<Value = LargeScaleState> {
        (1usize..5)
            .prop_flat_map(|k| {
                (
                    prop::collection::vec(1e-8f64..1e-3, k),
                    prop::collection::vec(prop::collection::vec(1e-10f64..1e-4, 2..8), k),
                )
            })
            .prop_map(|(intra, outer)| LargeScaleState::from_betas(&intra, &outer, 0.0))
    }

    proptest! {
        #[test]
        fn cont_ratio_and_sir_identity(state in state_strategy(), m in 8usize..300) {
            let cfg = small_cfg(m, state.pilots());
            let mrc = mrc_components(&state, 0, &cfg).unwrap();
            let zf = zf_components(&state, 0, &cfg).unwrap();
            let ratio = (m as f64 - 1.0) / m as f64;
            prop_assert!((mrc.cont - ratio * zf.cont).abs() <= 1e-14 * zf.cont);
            for s in [mrc, zf] {
                prop_assert!(s.intra >= 0.0 && s.inter >= 0.0 && s.cont > 0.0);
                prop_assert!((s.sir * s.total() - s.signal).abs() <= 1e-12 * s.signal);
            }
        }

        #[test]
        fn strict_ordering_with_two_or_more_reusers(state in state_strategy(), m in 8usize..300) {
            let cfg = small_cfg(m, state.pilots());
            let check = prop1_check(&state, 0, &cfg).unwrap();
            prop_assert!(check.groups_multiple);
            prop_assert!(check.strict, "{:?}", check);
        }

        #[test]
        fn scaling_betas(state in state_strategy(), c in 0.01f64..100.0) {
            let cfg = small_cfg(64, state.pilots());
            let intra: Vec<f64> = state.intra.iter().map(|g| c * g.beta).collect();
            let outer: Vec<Vec<f64>> = state.outer.iter().map(|g| g.iter().map(|u| c * u.beta).collect()).collect();
            let scaled = LargeScaleState::from_betas(&intra, &outer, 0.0);
            for (f, name) in [(mrc_components as fn(&_, _, &_) -> _, "mrc"), (zf_components, "zf")] {
                let a: InterferenceSample = f(&state, 0, &cfg).unwrap();
                let b: InterferenceSample = f(&scaled, 0, &cfg).unwrap();
                let c2 = c * c;
                for (x, y) in [(a.signal, b.signal), (a.intra, b.intra), (a.inter, b.inter), (a.cont, b.cont)] {
                    prop_assert!((y - c2 * x).abs() <= 1e-12 * (c2 * x).abs().max(1e-300), "{}", name);
                }
                prop_assert!((a.sir - b.sir).abs() <= 1e-10 * a.sir);
            }
        }

        #[test]
        fn mrc_intra_ignores_other_pilot_labels(state in state_strategy()) {
            prop_assume!(state.pilots() >= 3);
            let cfg = small_cfg(64, state.pilots());
            let intra: Vec<f64> = state.intra.iter().map(|g| g.beta).collect();
            let outer: Vec<Vec<f64>> = state.outer.iter().map(|g| g.iter().map(|u| u.beta).collect()).collect();
            let (mut i2, mut o2) = (intra.clone(), outer.clone());
            i2.swap(1, 2);
            o2.swap(1, 2);
            let swapped = LargeScaleState::from_betas(&i2, &o2, 0.0);
            let a = mrc_components(&state, 0, &cfg).unwrap();
            let b = mrc_components(&swapped, 0, &cfg).unwrap();
            prop_assert!((a.intra - b.intra).abs() <= 1e-14 * a.intra);
        }
    }
}
