//! Synthetic exogenous signals for the simulated zone.
//!
//! Every continuous signal is an offset plus a sum of sinusoids, optionally
//! clipped from below, so its spectrum has a known, countable set of lines.
//! Occupancy follows a periodic duty cycle whose absence window is jittered
//! per period from the seed. All signals are pure functions of time, which
//! lets a controller read the future schedule exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    /// Frequency in cycles per day.
    pub freq_per_day: f64,
    pub amplitude: f64,
    /// Phase in radians.
    pub phase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalRecipe {
    pub offset: f64,
    pub components: Vec<Sinusoid>,
    /// Lower clip applied after summation (e.g. 0 for solar gain).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl SignalRecipe {
    pub fn constant(value: f64) -> Self {
        Self {
            offset: value,
            components: Vec::new(),
            floor: None,
        }
    }

    pub fn eval(&self, t_hours: f64) -> f64 {
        let days = t_hours / 24.0;
        let v = self.components.iter().fold(self.offset, |acc, c| {
            acc + c.amplitude * (std::f64::consts::TAU * c.freq_per_day * days + c.phase).sin()
        });
        match self.floor {
            Some(f) => v.max(f),
            None => v,
        }
    }

    fn distinct_frequencies(&self) -> usize {
        let mut f: Vec<f64> = self.components.iter().map(|c| c.freq_per_day).collect();
        f.sort_by(|a, b| a.total_cmp(b));
        f.dedup();
        f.len()
    }

    fn validate(&self, name: &str, min_lines: usize) -> Result<()> {
        if !self.offset.is_finite() {
            return Err(Error::invalid(format!("{name}.offset"), "must be finite"));
        }
        for c in &self.components {
            if !(c.freq_per_day.is_finite() && c.freq_per_day >= 0.0) {
                return Err(Error::invalid(
                    format!("{name}.components"),
                    "frequencies must be finite and >= 0",
                ));
            }
            if !(c.amplitude.is_finite() && c.phase.is_finite()) {
                return Err(Error::invalid(
                    format!("{name}.components"),
                    "amplitude and phase must be finite",
                ));
            }
        }
        if self.distinct_frequencies() < min_lines {
            return Err(Error::invalid(
                format!("{name}.components"),
                format!(
                    "needs at least {min_lines} distinct frequencies, got {}",
                    self.distinct_frequencies()
                ),
            ));
        }
        Ok(())
    }
}

/// Periodic presence pattern: one absence window per period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancySchedule {
    pub period_h: f64,
    /// Fraction of each period during which someone is present.
    pub occupied_fraction: f64,
    /// Nominal start of the absence window within the period, h.
    pub absence_start_h: f64,
    /// Half-width of the uniform jitter applied to the absence start, h.
    pub jitter_h: f64,
}

impl OccupancySchedule {
    pub fn always() -> Self {
        Self {
            period_h: 24.0,
            occupied_fraction: 1.0,
            absence_start_h: 0.0,
            jitter_h: 0.0,
        }
    }

    pub fn never() -> Self {
        Self {
            period_h: 24.0,
            occupied_fraction: 0.0,
            absence_start_h: 0.0,
            jitter_h: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.period_h.is_finite() && self.period_h > 0.0) {
            return Err(Error::invalid("occupancy.period_h", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.occupied_fraction) {
            return Err(Error::invalid("occupancy.occupied_fraction", "must lie in [0, 1]"));
        }
        if !(self.jitter_h.is_finite() && self.jitter_h >= 0.0) {
            return Err(Error::invalid("occupancy.jitter_h", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    /// Outdoor temperature; also the first neighbour temperature.
    pub outdoor: SignalRecipe,
    /// Temperatures of any further neighbours, in separator order.
    #[serde(default)]
    pub extra_neighbors: Vec<SignalRecipe>,
    /// Solar gain into the zone, W.
    pub solar: SignalRecipe,
    /// Internal gain while occupied, W.
    pub internal_gain_w: f64,
    /// Ventilation inlet temperature, °C.
    pub air_inlet: SignalRecipe,
    /// Ventilation volume flow, m³/s.
    pub air_flow: SignalRecipe,
    pub occupancy: OccupancySchedule,
}

/// Minimum number of distinct sinusoid frequencies per continuous signal.
pub const MIN_SIGNAL_LINES: usize = 3;

impl DisturbanceSpec {
    pub fn n_neighbors(&self) -> usize {
        1 + self.extra_neighbors.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.outdoor.validate("disturbances.outdoor", MIN_SIGNAL_LINES)?;
        for (j, n) in self.extra_neighbors.iter().enumerate() {
            n.validate(&format!("disturbances.extra_neighbors[{j}]"), MIN_SIGNAL_LINES)?;
        }
        self.solar.validate("disturbances.solar", MIN_SIGNAL_LINES)?;
        self.air_inlet.validate("disturbances.air_inlet", MIN_SIGNAL_LINES)?;
        self.air_flow.validate("disturbances.air_flow", MIN_SIGNAL_LINES)?;
        if !self.internal_gain_w.is_finite() {
            return Err(Error::invalid("disturbances.internal_gain_w", "must be finite"));
        }
        if let Some(f) = self.air_flow.floor {
            if f < 0.0 {
                return Err(Error::invalid(
                    "disturbances.air_flow.floor",
                    "air flow cannot be negative",
                ));
            }
        } else {
            return Err(Error::invalid(
                "disturbances.air_flow.floor",
                "air flow needs a floor >= 0",
            ));
        }
        self.occupancy.validate()
    }

    /// A spec whose signals are all constant; used for equilibrium checks.
    /// It does not pass [`DisturbanceSpec::validate`].
    pub fn constant(t_out: f64, n_neighbors: usize, t_a_in: f64, vdot_a: f64) -> Self {
        Self {
            outdoor: SignalRecipe::constant(t_out),
            extra_neighbors: vec![SignalRecipe::constant(t_out); n_neighbors.saturating_sub(1)],
            solar: SignalRecipe::constant(0.0),
            internal_gain_w: 0.0,
            air_inlet: SignalRecipe::constant(t_a_in),
            air_flow: SignalRecipe {
                floor: Some(0.0),
                ..SignalRecipe::constant(vdot_a)
            },
            occupancy: OccupancySchedule::never(),
        }
    }
}

/// Exogenous values at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct ExogenousSample {
    pub t_neighbors: Vec<f64>,
    pub q_ext: f64,
    pub t_a_in: f64,
    pub vdot_a: f64,
    pub occupied: bool,
}

/// A [`DisturbanceSpec`] bound to a seed.
#[derive(Clone, Debug)]
pub struct DisturbanceSchedule {
    spec: DisturbanceSpec,
    seed: u64,
}

impl DisturbanceSchedule {
    pub fn new(spec: DisturbanceSpec, seed: u64) -> Self {
        Self { spec, seed }
    }

    pub fn spec(&self) -> &DisturbanceSpec {
        &self.spec
    }

    fn absence_window(&self, period: i64) -> (f64, f64) {
        let occ = &self.spec.occupancy;
        let jitter = if occ.jitter_h > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (period as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            rng.random_range(-occ.jitter_h..=occ.jitter_h)
        } else {
            0.0
        };
        let start = period as f64 * occ.period_h + occ.absence_start_h + jitter;
        (start, start + (1.0 - occ.occupied_fraction) * occ.period_h)
    }

    pub fn occupied(&self, t_hours: f64) -> bool {
        let occ = &self.spec.occupancy;
        if occ.occupied_fraction >= 1.0 {
            return true;
        }
        if occ.occupied_fraction <= 0.0 {
            return false;
        }
        let p = (t_hours / occ.period_h).floor() as i64;
        // a jittered window may spill into the neighbouring period
        (p - 1..=p + 1).all(|q| {
            let (a, b) = self.absence_window(q);
            !(t_hours >= a && t_hours < b)
        })
    }

    pub fn at(&self, t_hours: f64) -> ExogenousSample {
        let s = &self.spec;
        let occupied = self.occupied(t_hours);
        let mut t_neighbors = Vec::with_capacity(s.n_neighbors());
        t_neighbors.push(s.outdoor.eval(t_hours));
        t_neighbors.extend(s.extra_neighbors.iter().map(|r| r.eval(t_hours)));
        let internal = if occupied { s.internal_gain_w } else { 0.0 };
        ExogenousSample {
            t_neighbors,
            q_ext: s.solar.eval(t_hours) + internal,
            t_a_in: s.air_inlet.eval(t_hours),
            vdot_a: s.air_flow.eval(t_hours),
            occupied,
        }
    }

    /// Outdoor temperature (first neighbour).
    pub fn outdoor(&self, t_hours: f64) -> f64 {
        self.spec.outdoor.eval(t_hours)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_tone(offset: f64) -> SignalRecipe {
        SignalRecipe {
            offset,
            components: vec![
                Sinusoid {
                    freq_per_day: 1.0,
                    amplitude: 1.0,
                    phase: 0.0,
                },
                Sinusoid {
                    freq_per_day: 0.5,
                    amplitude: 0.5,
                    phase: 0.3,
                },
                Sinusoid {
                    freq_per_day: 3.0,
                    amplitude: 0.2,
                    phase: 1.0,
                },
            ],
            floor: None,
        }
    }

    #[test]
    fn recipe_needs_three_frequencies() {
        let mut r = three_tone(1.0);
        assert!(r.validate("x", 3).is_ok());
        r.components[2].freq_per_day = 1.0;
        assert!(r.validate("x", 3).is_err());
    }

    #[test]
    fn floor_clips() {
        let r = SignalRecipe {
            floor: Some(0.0),
            ..three_tone(-10.0)
        };
        assert_eq!(r.eval(5.0), 0.0);
    }

    #[test]
    fn occupancy_fraction_is_respected() {
        let sched = DisturbanceSchedule::new(
            DisturbanceSpec {
                occupancy: OccupancySchedule {
                    period_h: 24.0,
                    occupied_fraction: 0.75,
                    absence_start_h: 8.0,
                    jitter_h: 1.0,
                },
                ..DisturbanceSpec::constant(0.0, 1, 0.0, 0.0)
            },
            7,
        );
        let n = 24 * 60 * 20;
        let occupied = (0..n).filter(|i| sched.occupied(*i as f64 / 60.0)).count();
        let frac = occupied as f64 / n as f64;
        assert!((frac - 0.75).abs() < 0.01, "fraction {frac}");
    }

    #[test]
    fn schedule_is_deterministic_per_seed() {
        let spec = DisturbanceSpec {
            occupancy: OccupancySchedule {
                period_h: 24.0,
                occupied_fraction: 0.6,
                absence_start_h: 9.0,
                jitter_h: 2.0,
            },
            ..DisturbanceSpec::constant(0.0, 1, 0.0, 0.0)
        };
        let a = DisturbanceSchedule::new(spec.clone(), 1);
        let b = DisturbanceSchedule::new(spec.clone(), 1);
        let c = DisturbanceSchedule::new(spec, 2);
        let trace = |s: &DisturbanceSchedule| (0..2000).map(|i| s.occupied(i as f64 * 0.25)).collect::<Vec<_>>();
        assert_eq!(trace(&a), trace(&b));
        assert_ne!(trace(&a), trace(&c));
    }
}
