//! UE placement: uniform users inside the typical cell and one homogeneous
//! Poisson point process per pilot outside it, truncated at a finite window.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::config::SystemConfig;
use crate::streams::{Lane, TrialStreams};

/// Position in polar form. Only the radius enters the propagation model, so
/// the Cartesian form is computed on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Polar {
    pub radius: f64,
    pub angle: f64,
}

impl Polar {
    pub fn to_cartesian(self) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [self.radius * c, self.radius * s]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tier {
    IntraCell,
    Outer,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::IntraCell => "intra",
            Tier::Outer => "outer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UePoint {
    pub position: Polar,
    /// Zero-based pilot index.
    pub pilot: usize,
    pub tier: Tier,
}

/// One draw of the UE geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLayout {
    /// `intra[k]` is the in-cell user holding pilot `k`.
    pub intra: Vec<UePoint>,
    /// `outer[k]` is the reuse set of pilot `k`.
    pub outer: Vec<Vec<UePoint>>,
    pub cell_radius: f64,
    pub window_outer_radius: f64,
}

impl PointLayout {
    pub fn pilots(&self) -> usize {
        self.intra.len()
    }

    pub fn outer_count(&self) -> usize {
        self.outer.iter().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &UePoint> {
        self.intra.iter().chain(self.outer.iter().flatten())
    }
}

/// `count` points uniform on the disk of radius `radius`.
pub fn sample_intra<R: Rng + ?Sized>(count: usize, radius: f64, rng: &mut R) -> Vec<Polar> {
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            Polar {
                radius: radius * u.sqrt(),
                angle: 2.0 * PI * rng.random::<f64>(),
            }
        })
        .collect()
}

/// A homogeneous PPP of the given intensity on the annulus `(inner, outer]`:
/// Poisson count, then i.i.d. uniform placement.
pub fn sample_ppp_annulus<R: Rng + ?Sized>(
    intensity: f64,
    inner: f64,
    outer: f64,
    rng: &mut R,
) -> Vec<Polar> {
    let mut points = Vec::new();
    visit_ppp_annulus(intensity, inner, outer, rng, |p| points.push(p));
    points
}

/// Streams the points [`sample_ppp_annulus`] would return, in the same order
/// and from the same draws, without collecting them.
pub fn visit_ppp_annulus<R: Rng + ?Sized, F: FnMut(Polar)>(
    intensity: f64,
    inner: f64,
    outer: f64,
    rng: &mut R,
    mut visit: F,
) {
    let (in2, out2) = (inner * inner, outer * outer);
    let mean = intensity * PI * (out2 - in2);
    if mean.is_nan() || mean <= 0.0 {
        return;
    }
    let count = Poisson::new(mean)
        .expect("positive finite mean")
        .sample(rng) as usize;
    let span = out2 - in2;
    for _ in 0..count {
        // 1 - u lies in (0, 1], keeping the radius strictly above `inner`.
        let u = 1.0 - rng.random::<f64>();
        visit(Polar {
            radius: (in2 + u * span).sqrt().max(inner.next_up()),
            angle: 2.0 * PI * rng.random::<f64>(),
        });
    }
}

pub fn sample_layout(config: &SystemConfig, streams: &TrialStreams) -> PointLayout {
    let k = config.pilots;
    let r = config.cell_radius;
    let window = config.window_outer_radius();
    let lambda = config.derived().lambda;

    let intra = sample_intra(k, r, &mut streams.rng(Lane::IntraPositions))
        .into_iter()
        .enumerate()
        .map(|(pilot, position)| UePoint {
            position,
            pilot,
            tier: Tier::IntraCell,
        })
        .collect();
    let outer = (0..k)
        .map(|pilot| {
            let mut rng = streams.rng(Lane::OuterPositions(pilot));
            sample_ppp_annulus(lambda, r, window, &mut rng)
                .into_iter()
                .map(|position| UePoint {
                    position,
                    pilot,
                    tier: Tier::Outer,
                })
                .collect()
        })
        .collect();
    PointLayout {
        intra,
        outer,
        cell_radius: r,
        window_outer_radius: window,
    }
}

pub const LAYOUT_CSV_HEADER: &str = "trial,tier,pilot_index,x_m,y_m";

/// Appends one layout as CSV rows (pilot indices one-based). `extra` supplies
/// optional trailing columns per point, in `layout.iter()` order.
pub fn write_layout_rows<W: Write>(
    out: &mut W,
    trial: u64,
    layout: &PointLayout,
    extra: Option<&[f64]>,
) -> std::io::Result<()> {
    for (i, p) in layout.iter().enumerate() {
        let [x, y] = p.position.to_cartesian();
        write!(
            out,
            "{trial},{},{},{x:.3},{y:.3}",
            p.tier.as_str(),
            p.pilot + 1
        )?;
        if let Some(extra) = extra {
            write!(out, ",{:e}", extra[i])?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::table2_default;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intra_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = 500.0;
        let pts = sample_intra(1_000_000, r, &mut rng);
        assert!(pts.iter().all(|p| p.radius <= r));
        let n = pts.len() as f64;
        // E[r^2]/R^2 = 1/2 for the uniform disk.
        let m2 = pts.iter().map(|p| (p.radius / r).powi(2)).sum::<f64>() / n;
        assert!((m2 - 0.5).abs() < 0.002, "{m2}");
        // Area ratio (d0/R)^2.
        let inner = pts.iter().filter(|p| p.radius < 100.0).count() as f64 / n;
        assert!((inner - 0.04).abs() < 0.001, "{inner}");
    }

    #[test]
    fn single_intra_point_in_disk() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = sample_intra(1, 500.0, &mut rng);
        assert_eq!(p.len(), 1);
        assert!(p[0].radius <= 500.0);
    }

    #[test]
    fn annulus_support_and_poisson_dispersion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (inner, outer) = (1.0, 2.0);
        let intensity = 20.0 / (PI * 3.0);
        let counts: Vec<f64> = (0..100_000)
            .map(|_| {
                let pts = sample_ppp_annulus(intensity, inner, outer, &mut rng);
                assert!(pts.iter().all(|p| p.radius > inner && p.radius <= outer));
                pts.len() as f64
            })
            .collect();
        let n = counts.len() as f64;
        let mean = counts.iter().sum::<f64>() / n;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 20.0).abs() < 0.1, "{mean}");
        assert!((var / mean - 1.0).abs() < 0.02, "{}", var / mean);
    }

    #[test]
    fn vanishing_annulus_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let empty = (0..1000)
            .filter(|_| sample_ppp_annulus(1e-6, 500.0, 500.0 + 1e-9, &mut rng).is_empty())
            .count();
        assert_eq!(empty, 1000);
        assert!(sample_ppp_annulus(1.0, 2.0, 2.0, &mut rng).is_empty());
    }

    #[test]
    fn poisson_chi_square() {
        // Mean 5; bins {0-1, 2, ..., 8, >=9}, 8 bins, 7 dof, 1% critical value 18.475.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mean = 5.0;
        let trials = 20_000;
        let mut observed = [0.0f64; 9];
        for _ in 0..trials {
            let n = sample_ppp_annulus(mean / (PI * 3.0), 1.0, 2.0, &mut rng).len();
            let bin = match n {
                0 | 1 => 0,
                9.. => 8,
                n => n - 1,
            };
            observed[bin] += 1.0;
        }
        let pmf =
            |j: u32| (-mean).exp() * mean.powi(j as i32) / (1..=j).map(f64::from).product::<f64>();
        let mut expected = [0.0f64; 9];
        expected[0] = pmf(0) + pmf(1);
        for j in 2..=8u32 {
            expected[j as usize - 1] = pmf(j);
        }
        expected[8] = 1.0 - expected[..8].iter().sum::<f64>();
        let chi2: f64 = observed
            .iter()
            .zip(expected.iter())
            .map(|(o, e)| (o - e * trials as f64).powi(2) / (e * trials as f64))
            .sum();
        assert!(chi2 < 18.475, "chi2 = {chi2}");
    }

    #[test]
    fn layout_shape_and_determinism() {
        let cfg = table2_default();
        let a = sample_layout(&cfg, &TrialStreams::new(cfg.seed, 0));
        assert_eq!(a.intra.len(), 30);
        assert_eq!(a.outer.len(), 30);
        for (k, p) in a.intra.iter().enumerate() {
            assert_eq!(p.pilot, k);
            assert!(p.position.radius <= 500.0);
        }
        for (k, g) in a.outer.iter().enumerate() {
            assert!(g.iter().all(|p| p.pilot == k
                && p.position.radius > 500.0
                && p.position.radius <= 25_500.0));
        }
        let b = sample_layout(&cfg, &TrialStreams::new(cfg.seed, 0));
        assert_eq!(a, b);
        assert_ne!(a, sample_layout(&cfg, &TrialStreams::new(cfg.seed, 1)));
    }

    #[test]
    fn outer_intensity_matches_lambda() {
        // K = 1, window 51R: expected 51^2 - 1 = 2600 points; also check a sub-annulus.
        let cfg = SystemConfig {
            pilots: 1,
            antennas: 2,
            ..table2_default()
        };
        let trials = 2000;
        let (mut total, mut sub) = (0usize, 0usize);
        for t in 0..trials {
            let layout = sample_layout(&cfg, &TrialStreams::new(9, t));
            total += layout.outer_count();
            sub += layout.outer[0]
                .iter()
                .filter(|p| p.position.radius > 2.0 * 500.0 && p.position.radius <= 3.0 * 500.0)
                .count();
        }
        let per_trial = total as f64 / trials as f64;
        let se = (2600.0 / trials as f64).sqrt();
        assert!((per_trial - 2600.0).abs() < 3.0 * se, "{per_trial}");
        let sub_mean = sub as f64 / trials as f64;
        let sub_se = (5.0 / trials as f64).sqrt();
        assert!((sub_mean - 5.0).abs() < 3.0 * sub_se, "{sub_mean}");
    }

    #[test]
    fn layout_csv_rows() {
        let cfg = SystemConfig {
            pilots: 2,
            trunc_factor: 1.5,
            ..table2_default()
        };
        let layout = sample_layout(&cfg, &TrialStreams::new(1, 0));
        let mut buf = Vec::new();
        write_layout_rows(&mut buf, 0, &layout, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2 + layout.outer_count());
        assert!(text.starts_with("0,intra,1,"));
    }
}
