//! Large-scale channel state: path loss, log-normal shadowing, and the MMSE
//! training quantities per pilot group.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{SystemConfig, XI};
use crate::spatial::{sample_intra, visit_ppp_annulus, PointLayout, UePoint};
use crate::streams::{Lane, TrialStreams};

/// Bounded close-in model: `A0` inside `d0`, `A0 (d/d0)^-gamma` beyond.
pub fn path_loss(distance: f64, config: &SystemConfig) -> f64 {
    let d0 = config.ref_distance;
    if distance < d0 {
        config.ref_path_loss
    } else {
        config.ref_path_loss * (distance / d0).powf(-config.path_loss_exponent)
    }
}

/// `10^(g/10)` with `g ~ N(0, sigma_db^2)`. Consumes no randomness when
/// `sigma_db == 0`.
pub fn sample_shadowing<R: Rng + ?Sized>(sigma_db: f64, rng: &mut R) -> f64 {
    if sigma_db == 0.0 {
        return 1.0;
    }
    let z: f64 = rng.sample(StandardNormal);
    (sigma_db / XI * z).exp()
}

/// Large-scale quantities of one UE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeGain {
    pub path_loss: f64,
    pub shadowing: f64,
    /// `path_loss * shadowing`.
    pub beta: f64,
    /// MMSE weight `C_y = beta / alpha_k` of the UE's pilot group.
    pub mmse_weight: f64,
    /// `(1 - C_y) beta`, the per-antenna estimation-error variance.
    pub error_variance: f64,
}

/// Per-UE gains plus the per-group totals `alpha_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeScaleState {
    pub intra: Vec<UeGain>,
    pub outer: Vec<Vec<UeGain>>,
    /// `alpha_k = beta_{x_k} + sum_{Phi_k} beta + 1/rho_p`.
    pub alpha: Vec<f64>,
    pub training_noise: f64,
}

/// `alpha_k` and the probe's error variance for one group.
fn group_alpha(beta_x: f64, outer_sum: f64, noise: f64) -> (f64, f64) {
    let alpha = beta_x + outer_sum + noise;
    (alpha, beta_x * (outer_sum + noise) / alpha)
}

/// `(1 - C_y) beta_y`, with `alpha - beta_y` formed without subtracting
/// from `alpha`.
fn member_error(beta_x: f64, outer_sum: f64, beta: f64, alpha: f64, noise: f64) -> f64 {
    let rest = beta_x + (outer_sum - beta).max(0.0) + noise;
    beta * rest / alpha
}

impl UeGain {
    fn unweighted(path_loss: f64, shadowing: f64) -> Self {
        Self {
            path_loss,
            shadowing,
            beta: path_loss * shadowing,
            mmse_weight: 0.0,
            error_variance: 0.0,
        }
    }
}

impl LargeScaleState {
    fn with_capacity(pilots: usize, training_noise: f64) -> Self {
        LargeScaleState {
            intra: Vec::with_capacity(pilots),
            outer: Vec::with_capacity(pilots),
            alpha: Vec::with_capacity(pilots),
            training_noise,
        }
    }

    /// Appends one pilot group and fills in its MMSE quantities.
    fn push_group(&mut self, mut probe: UeGain, mut members: Vec<UeGain>) {
        let outer_sum: f64 = members.iter().map(|g| g.beta).sum();
        let (alpha, probe_error) = group_alpha(probe.beta, outer_sum, self.training_noise);
        for g in &mut members {
            g.mmse_weight = g.beta / alpha;
            g.error_variance =
                member_error(probe.beta, outer_sum, g.beta, alpha, self.training_noise);
        }
        probe.mmse_weight = probe.beta / alpha;
        probe.error_variance = probe_error;
        self.intra.push(probe);
        self.outer.push(members);
        self.alpha.push(alpha);
    }

    /// Builds the state from raw per-UE path loss and shadowing, group by group.
    pub fn from_parts(
        intra: &[(f64, f64)],
        outer: &[Vec<(f64, f64)>],
        training_noise: f64,
    ) -> Self {
        assert_eq!(intra.len(), outer.len(), "one reuse group per pilot");
        let mut state = Self::with_capacity(intra.len(), training_noise);
        for (&(p, eta), group) in intra.iter().zip(outer) {
            let members = group
                .iter()
                .map(|&(p, eta)| UeGain::unweighted(p, eta))
                .collect();
            state.push_group(UeGain::unweighted(p, eta), members);
        }
        state
    }

    /// Convenience constructor for hand-built instances (no shadowing split).
    pub fn from_betas(intra: &[f64], outer: &[Vec<f64>], training_noise: f64) -> Self {
        let intra: Vec<_> = intra.iter().map(|&b| (b, 1.0)).collect();
        let outer: Vec<Vec<_>> = outer
            .iter()
            .map(|g| g.iter().map(|&b| (b, 1.0)).collect())
            .collect();
        Self::from_parts(&intra, &outer, training_noise)
    }

    pub fn pilots(&self) -> usize {
        self.intra.len()
    }

    /// Every UE gain, intra-cell first, then groups in pilot order; matches
    /// `PointLayout::iter`.
    pub fn iter(&self) -> impl Iterator<Item = &UeGain> {
        self.intra.iter().chain(self.outer.iter().flatten())
    }
}

/// What the interference components need from one reuse group.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupTotals {
    pub members: usize,
    pub beta_sum: f64,
    pub beta_sq_sum: f64,
    /// `sum (1 - C_y) beta_y`.
    pub error_sum: f64,
}

/// Per-group totals of a large-scale state: enough for every
/// fading-averaged component, without the per-UE detail.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSummary {
    pub intra: Vec<UeGain>,
    pub alpha: Vec<f64>,
    pub groups: Vec<GroupTotals>,
}

impl StateSummary {
    pub fn pilots(&self) -> usize {
        self.intra.len()
    }

    fn with_capacity(pilots: usize) -> Self {
        Self {
            intra: Vec::with_capacity(pilots),
            alpha: Vec::with_capacity(pilots),
            groups: Vec::with_capacity(pilots),
        }
    }

    /// Appends a group from its members' gains, in the same arithmetic as
    /// the full state.
    fn push_group(&mut self, mut probe: UeGain, betas: &[f64], noise: f64) {
        let outer_sum: f64 = betas.iter().sum();
        let (alpha, probe_error) = group_alpha(probe.beta, outer_sum, noise);
        probe.mmse_weight = probe.beta / alpha;
        probe.error_variance = probe_error;
        let mut totals = GroupTotals {
            members: betas.len(),
            beta_sum: outer_sum,
            ..Default::default()
        };
        for &b in betas {
            totals.beta_sq_sum += b * b;
            totals.error_sum += member_error(probe.beta, outer_sum, b, alpha, noise);
        }
        self.intra.push(probe);
        self.alpha.push(alpha);
        self.groups.push(totals);
    }
}

impl LargeScaleState {
    pub fn summary(&self) -> StateSummary {
        let mut s = StateSummary::with_capacity(self.pilots());
        let mut betas = Vec::new();
        for (probe, group) in self.intra.iter().zip(&self.outer) {
            betas.clear();
            betas.extend(group.iter().map(|g| g.beta));
            s.push_group(*probe, &betas, self.training_noise);
        }
        s
    }
}

/// Samples one trial straight into its [`StateSummary`]. Draws and
/// arithmetic match `sample_layout` followed by [`build_large_scale`], so
/// the result equals `build_large_scale(..).summary()` exactly.
pub fn summarize_trial(
    config: &SystemConfig,
    streams: &TrialStreams,
    scratch: &mut Vec<f64>,
) -> StateSummary {
    let sigma = config.shadowing_db;
    let (r, window) = (config.cell_radius, config.window_outer_radius());
    let lambda = config.derived().lambda;
    let noise = config.training_noise();
    let mut shadow = streams.rng(Lane::IntraShadowing);
    let intra: Vec<UeGain> = sample_intra(config.pilots, r, &mut streams.rng(Lane::IntraPositions))
        .iter()
        .map(|p| {
            UeGain::unweighted(
                path_loss(p.radius, config),
                sample_shadowing(sigma, &mut shadow),
            )
        })
        .collect();
    let mut summary = StateSummary::with_capacity(intra.len());
    for (k, probe) in intra.into_iter().enumerate() {
        scratch.clear();
        let mut shadow = streams.rng(Lane::OuterShadowing(k));
        visit_ppp_annulus(
            lambda,
            r,
            window,
            &mut streams.rng(Lane::OuterPositions(k)),
            |p| {
                scratch.push(path_loss(p.radius, config) * sample_shadowing(sigma, &mut shadow));
            },
        );
        summary.push_group(probe, scratch, noise);
    }
    summary
}

/// Samples shadowing for every UE and assembles the large-scale state.
/// Shadowing is i.i.d. per UE and independent of position.
pub fn build_large_scale(
    layout: &PointLayout,
    config: &SystemConfig,
    streams: &TrialStreams,
) -> LargeScaleState {
    let sigma = config.shadowing_db;
    let gains = |points: &[UePoint], lane: Lane| -> Vec<UeGain> {
        let mut rng = streams.rng(lane);
        points
            .iter()
            .map(|p| {
                UeGain::unweighted(
                    path_loss(p.position.radius, config),
                    sample_shadowing(sigma, &mut rng),
                )
            })
            .collect()
    };
    let intra = gains(&layout.intra, Lane::IntraShadowing);
    let mut state = LargeScaleState::with_capacity(intra.len(), config.training_noise());
    for (k, (probe, group)) in intra.into_iter().zip(&layout.outer).enumerate() {
        state.push_group(probe, gains(group, Lane::OuterShadowing(k)));
    }
    state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table2_default;
    use crate::spatial::sample_layout;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn path_loss_branches() {
        let c = table2_default();
        assert_eq!(path_loss(50.0, &c), 1e-3);
        assert_eq!(path_loss(100.0, &c), 1e-3);
        // 1e-3 * 2^-3.76 evaluated independently: 7.3812041e-5.
        assert!((path_loss(200.0, &c) - 7.381_204_133_9e-5).abs() < 1e-14);
        let below = path_loss(100.0 - 1e-9, &c);
        let at = path_loss(100.0, &c);
        assert!((below - at).abs() < 1e-15);
    }

    #[test]
    fn shadowing_degenerate_at_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..100).all(|_| sample_shadowing(0.0, &mut rng) == 1.0));
    }

    #[test]
    fn shadowing_lognormal_moments() {
        // E[eta] = exp(s^2/2), E[eta^2] = exp(2 s^2) with s = sigma/xi.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_shadowing(8.0, &mut rng)).collect();
        let s2 = (8.0 / XI).powi(2);
        let check = |vals: Vec<f64>, target: f64| {
            let m = vals.iter().sum::<f64>() / n as f64;
            let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            let se = (v / n as f64).sqrt();
            assert!(
                (m - target).abs() < 3.0 * se,
                "mean {m} target {target} se {se}"
            );
        };
        let e1 = (s2 / 2.0).exp();
        assert!((e1 - 5.4554).abs() < 1e-3);
        check(draws.clone(), e1);
        let e2 = (2.0 * s2).exp();
        assert!((e2 - 885.745).abs() < 1e-2);
        check(draws.iter().map(|x| x * x).collect(), e2);
    }

    #[test]
    fn empty_group_gives_unit_weight() {
        let s = LargeScaleState::from_betas(&[2e-5, 3e-6], &[vec![], vec![1e-9]], 0.0);
        assert_eq!(s.intra[0].mmse_weight, 1.0);
        assert_eq!(s.alpha[0], 2e-5);
        assert_eq!(s.intra[0].error_variance, 0.0);
        assert!(s.intra[1].mmse_weight < 1.0);
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let s = LargeScaleState::from_betas(&[4.0], &[vec![4.0]], 0.0);
        assert_eq!(s.intra[0].mmse_weight, 0.5);
        assert_eq!(s.outer[0][0].mmse_weight, 0.5);
    }

    #[test]
    fn training_noise_enters_alpha() {
        let s = LargeScaleState::from_betas(&[1.0], &[vec![1.0]], 2.0);
        assert_eq!(s.alpha[0], 4.0);
        assert_eq!(s.intra[0].mmse_weight, 0.25);
        assert_eq!(s.intra[0].error_variance, 0.75);
    }

    #[test]
    fn sampled_state_invariants() {
        let cfg = table2_default().with_sigma_db(8.0);
        let streams = TrialStreams::new(5, 0);
        let layout = sample_layout(&cfg, &streams);
        let state = build_large_scale(&layout, &cfg, &streams);
        assert_eq!(state.iter().count(), layout.iter().count());
        for (k, g) in state.intra.iter().enumerate() {
            let members = &state.outer[k];
            let group_sum: f64 = g.mmse_weight + members.iter().map(|m| m.mmse_weight).sum::<f64>();
            assert!((group_sum - 1.0).abs() < 1e-12);
            let a = g.beta + members.iter().map(|m| m.beta).sum::<f64>();
            assert!((a - state.alpha[k]).abs() <= 1e-12 * a);
        }
        for (g, p) in state.iter().zip(layout.iter()) {
            assert!(g.beta > 0.0 && g.mmse_weight > 0.0 && g.mmse_weight <= 1.0);
            assert_eq!(g.path_loss, path_loss(p.position.radius, &cfg));
            assert!((g.beta - g.path_loss * g.shadowing).abs() <= 1e-15 * g.beta);
        }
        let again = build_large_scale(&layout, &cfg, &streams);
        assert_eq!(state, again);
    }

    fn group_strategy() -> impl Strategy<Value = (f64, Vec<f64>)> {
        (1e-9f64..1e-3, prop::collection::vec(1e-12f64..1e-4, 0..12))
    }

    proptest! {
        #[test]
        fn mmse_weights_partition_unity((bx, outer) in group_strategy()) {
            let s = LargeScaleState::from_betas(&[bx], std::slice::from_ref(&outer), 0.0);
            let total: f64 = s.intra[0].mmse_weight + s.outer[0].iter().map(|g| g.mmse_weight).sum::<f64>();
            prop_assert!((total - 1.0).abs() < 1e-12);
            for g in s.iter() {
                prop_assert!((g.mmse_weight * s.alpha[0] - g.beta).abs() <= 1e-12 * g.beta);
                // estimate + error variance recovers beta
                let split = g.mmse_weight * g.beta + g.error_variance;
                prop_assert!((split - g.beta).abs() <= 1e-12 * g.beta);
            }
        }

        #[test]
        fn extra_reuser_lowers_weight((bx, outer) in group_strategy(), extra in 1e-12f64..1e-4) {
            let before = LargeScaleState::from_betas(&[bx], std::slice::from_ref(&outer), 0.0);
            let mut more = outer.clone();
            more.push(extra);
            let after = LargeScaleState::from_betas(&[bx], &[more], 0.0);
            prop_assert!(after.intra[0].mmse_weight < before.intra[0].mmse_weight);
        }
    }
}
