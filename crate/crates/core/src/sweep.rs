//! Ray sampling grids, tolerances and the boundedness trend test.
//!
//! Samples are taken on rays `θ_k` at log-spaced radii descending from
//! `rho_max` to `rho_min`. The Poincaré scale used throughout is
//! `λ(t) = -log|t|²`, which is positive on the punctured disc.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_RAYS: usize = 16;
pub const DEFAULT_RHO_MIN: f64 = 1e-8;
pub const DEFAULT_RHO_MAX: f64 = 0.5;
pub const DEFAULT_POINTS_PER_DECADE: u32 = 8;

/// `λ = -log|t|²`.
pub fn poincare_scale(t: Complex64) -> f64 {
    -2.0 * t.norm().ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Symbolic-versus-finite-difference relative tolerance.
    pub fd_rel: f64,
    /// Exact-identity relative tolerance.
    pub exact_rel: f64,
    /// Allowed growth of the running maximum over the last two decades, in percent.
    pub trend_pct: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { fd_rel: 1e-5, exact_rel: 1e-10, trend_pct: 5.0 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        if self.fd_rel > 0.0 && self.exact_rel > 0.0 && self.trend_pct > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidSweep("tolerances must be positive".into()))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub ray: usize,
    pub rho: f64,
    pub theta: f64,
}

impl Sample {
    pub fn point(&self) -> Complex64 {
        Complex64::from_polar(self.rho, self.theta)
    }
}

/// Sampling grid: ray angles times log-spaced radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub angles: Vec<f64>,
    pub rho_min: f64,
    pub rho_max: f64,
    pub points_per_decade: u32,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep::with_rays(DEFAULT_RAYS)
    }
}

impl Sweep {
    /// `n` equally spaced rays with the default radial grid.
    pub fn with_rays(n: usize) -> Self {
        Sweep {
            angles: equally_spaced_angles(n),
            rho_min: DEFAULT_RHO_MIN,
            rho_max: DEFAULT_RHO_MAX,
            points_per_decade: DEFAULT_POINTS_PER_DECADE,
        }
    }

    pub fn radial(mut self, rho_min: f64, rho_max: f64, points_per_decade: u32) -> Self {
        self.rho_min = rho_min;
        self.rho_max = rho_max;
        self.points_per_decade = points_per_decade;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if !(self.rho_min > 0.0 && self.rho_min < self.rho_max && self.rho_max < 1.0) {
            return Err(Error::InvalidSweep(format!(
                "need 0 < rho_min < rho_max < 1, got rho_min = {}, rho_max = {}",
                self.rho_min, self.rho_max
            )));
        }
        if self.points_per_decade < 4 {
            return Err(Error::InvalidSweep(format!(
                "points_per_decade must be at least 4, got {}",
                self.points_per_decade
            )));
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidSweep("ray angles must be finite".into()));
        }
        Ok(())
    }

    /// Radii from `rho_max` down to `rho_min`, both included.
    pub fn radii(&self) -> Vec<f64> {
        let decades = (self.rho_max / self.rho_min).log10();
        let steps = (decades * f64::from(self.points_per_decade)).ceil().max(1.0) as usize;
        let (lo, hi) = (self.rho_min.ln(), self.rho_max.ln());
        (0..=steps)
            .map(|k| {
                if k == 0 {
                    self.rho_max
                } else if k == steps {
                    self.rho_min
                } else {
                    (hi + (lo - hi) * k as f64 / steps as f64).exp()
                }
            })
            .collect()
    }

    /// All samples, grouped by ray, radii descending within each ray.
    pub fn samples(&self) -> Result<Vec<Sample>> {
        self.validate()?;
        let radii = self.radii();
        Ok(self
            .angles
            .iter()
            .enumerate()
            .flat_map(|(ray, &theta)| radii.iter().map(move |&rho| Sample { ray, rho, theta }))
            .collect())
    }
}

pub fn equally_spaced_angles(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / n as f64)
        .collect()
}

/// The sample at which a reported maximum was attained.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub rho: f64,
    pub theta: f64,
    pub value: f64,
}

impl Witness {
    pub fn at(sample: &Sample, value: f64) -> Self {
        Witness { rho: sample.rho, theta: sample.theta, value }
    }
}

/// Running maximum of `values`, keeping the first sample attaining it.
///
/// Samples are reduced in their given order so the witness is deterministic.
pub fn max_with_witness(samples: &[Sample], values: &[f64]) -> Option<Witness> {
    samples
        .iter()
        .zip(values)
        .fold(None, |best: Option<Witness>, (s, &v)| match best {
            Some(b) if b.value >= v || v.is_nan() => Some(b),
            _ => Some(Witness::at(s, v)),
        })
}

pub fn min_with_witness(samples: &[Sample], values: &[f64]) -> Option<Witness> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    max_with_witness(samples, &negated).map(|w| Witness { value: -w.value, ..w })
}

/// Outcome of the boundedness trend test on one ray.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub ray: usize,
    /// Running maximum before the last two decades.
    pub max_before: f64,
    /// Running maximum over the whole ray.
    pub max_all: f64,
    /// Relative increase `max_all / max_before - 1`, zero when nothing grew.
    pub growth: f64,
    pub ok: bool,
}

/// Running-max trend test per ray: the maximum over the whole ray must not
/// exceed the maximum attained before the last two radius decades by more
/// than `trend_pct` percent. Maxima below `floor` count as zero.
pub fn trend_test(samples: &[Sample], values: &[f64], trend_pct: f64) -> Vec<TrendVerdict> {
    trend_test_with_floor(samples, values, trend_pct, NOISE_FLOOR)
}

/// Values at or below this magnitude are treated as numerical zero by [`trend_test`].
pub const NOISE_FLOOR: f64 = 1e-10;

pub fn trend_test_with_floor(
    samples: &[Sample],
    values: &[f64],
    trend_pct: f64,
    floor: f64,
) -> Vec<TrendVerdict> {
    let mut rays: Vec<usize> = samples.iter().map(|s| s.ray).collect();
    rays.dedup();
    rays.sort_unstable();
    rays.dedup();
    rays.into_iter()
        .map(|ray| {
            let on_ray: Vec<(f64, f64)> = samples
                .iter()
                .zip(values)
                .filter(|(s, _)| s.ray == ray)
                .map(|(s, &v)| (s.rho, v.abs()))
                .collect();
            let rho_floor = on_ray.iter().map(|(r, _)| *r).fold(f64::INFINITY, f64::min);
            let cutoff = rho_floor * 100.0 * (1.0 - 1e-9);
            let max_before = on_ray
                .iter()
                .filter(|(r, _)| *r >= cutoff)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            let max_all = on_ray.iter().map(|(_, v)| *v).fold(0.0, f64::max);
            let growth = if max_all <= max_before || max_all <= floor {
                0.0
            } else if max_before > 0.0 {
                max_all / max_before - 1.0
            } else {
                f64::INFINITY
            };
            let finite = on_ray.iter().all(|(_, v)| v.is_finite());
            TrendVerdict {
                ray,
                max_before,
                max_all,
                growth,
                ok: finite && growth <= trend_pct / 100.0,
            }
        })
        .collect()
}

pub fn all_ok(verdicts: &[TrendVerdict]) -> bool {
    verdicts.iter().all(|v| v.ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_span_the_requested_range() {
        let s = Sweep::default();
        let r = s.radii();
        assert_eq!(r[0], 0.5);
        assert_eq!(*r.last().unwrap(), 1e-8);
        assert!(r.windows(2).all(|w| w[0] > w[1]));
        // log10(0.5 / 1e-8) ≈ 7.7 decades at 8 per decade
        assert_eq!(r.len(), 63);
    }

    #[test]
    fn validation_rejects_bad_grids() {
        assert!(Sweep::default().radial(0.6, 0.5, 8).validate().is_err());
        assert!(Sweep::default().radial(1e-8, 1.0, 8).validate().is_err());
        assert!(Sweep::default().radial(1e-8, 0.5, 3).validate().is_err());
        assert!(matches!(Sweep::with_rays(0).samples(), Err(Error::EmptyGrid)));
    }

    #[test]
    fn trend_test_flags_growth_in_last_decades() {
        let sweep = Sweep::with_rays(1).radial(1e-6, 0.1, 4);
        let samples = sweep.samples().unwrap();
        let flat: Vec<f64> = samples.iter().map(|_| 1.0).collect();
        assert!(all_ok(&trend_test(&samples, &flat, 5.0)));

        let growing: Vec<f64> = samples.iter().map(|s| poincare_scale(s.point())).collect();
        let v = trend_test(&samples, &growing, 5.0);
        assert!(!v[0].ok);
        assert!(v[0].growth > 0.05);

        let decaying: Vec<f64> = samples.iter().map(|s| 1.0 / poincare_scale(s.point())).collect();
        assert!(all_ok(&trend_test(&samples, &decaying, 5.0)));
    }

    #[test]
    fn witness_is_first_maximum() {
        let samples = Sweep::with_rays(2).radial(1e-2, 0.1, 4).samples().unwrap();
        let values: Vec<f64> = samples.iter().map(|s| if s.ray == 0 { 1.0 } else { 3.0 }).collect();
        let w = max_with_witness(&samples, &values).unwrap();
        assert_eq!(w.value, 3.0);
        assert_eq!(w.rho, 0.1);
        let m = min_with_witness(&samples, &values).unwrap();
        assert_eq!(m.value, 1.0);
    }
}
