//! Ground-truth plant: RK4 integration of the zone model under a
//! hysteresis water-flow controller and an outdoor-compensated inlet
//! temperature, with noisy logging of the measured outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeriesDataset;
use crate::disturbance::{DisturbanceSchedule, DisturbanceSpec};
use crate::error::{Error, Result};
use crate::thermal::{derivative, ControlInput, Disturbance, PlantState, StateRate, ZoneParams};

pub const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HysteresisSettings {
    /// Set temperature, °C.
    pub t_set: f64,
    /// Band below the set point, °C.
    pub delta_t: f64,
    /// Water flow while heating, kg/s.
    pub vdot_max: f64,
}

impl Default for HysteresisSettings {
    fn default() -> Self {
        Self {
            t_set: 21.0,
            delta_t: 0.1,
            vdot_max: 0.0787,
        }
    }
}

/// Inlet temperature schedule `rho0 + rho1 (t_set - t_out)^zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatingCurveParams {
    pub rho0: f64,
    pub rho1: f64,
    pub zeta: f64,
}

impl Default for HeatingCurveParams {
    fn default() -> Self {
        Self {
            rho0: 29.30,
            rho1: 0.80,
            zeta: 0.97,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Sampling period, h.
    pub epsilon: f64,
    /// Experiment length, h.
    pub duration: f64,
    /// Standard deviation of the additive measurement noise on T_r and T_w, °C.
    pub noise_std: f64,
    /// RK4 sub-steps per sampling period.
    pub substeps: usize,
    /// Simulation clock at sample 0, h.
    pub start_h: f64,
    /// Initial room temperature; walls start between room and neighbour.
    pub initial_t_r: f64,
    pub initial_t_w: f64,
    pub seed: u64,
    pub hysteresis: HysteresisSettings,
    pub heating_curve: HeatingCurveParams,
    pub disturbances: DisturbanceSpec,
}

impl SimConfig {
    pub fn n_samples(&self) -> usize {
        (self.duration / self.epsilon + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::invalid("sim.epsilon", "must be > 0"));
        }
        if !(self.duration.is_finite() && self.duration >= self.epsilon) {
            return Err(Error::invalid("sim.duration", "must be >= epsilon"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::invalid("sim.noise_std", "must be >= 0"));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("sim.substeps", "must be >= 1"));
        }
        let h = &self.hysteresis;
        if !(h.delta_t > 0.0 && h.vdot_max > 0.0) {
            return Err(Error::invalid("sim.hysteresis", "delta_t and vdot_max must be > 0"));
        }
        let c = &self.heating_curve;
        if !(c.rho0 > 0.0 && c.rho1 > 0.0 && c.zeta > 0.0) {
            return Err(Error::invalid("sim.heating_curve", "rho0, rho1 and zeta must be > 0"));
        }
        self.disturbances.validate()
    }
}

fn axpy(x: &PlantState, h: f64, r: &StateRate) -> PlantState {
    PlantState {
        t_r: x.t_r + h * r.t_r,
        t_s: x.t_s.iter().zip(&r.t_s).map(|(a, b)| a + h * b).collect(),
        t_w: x.t_w + h * r.t_w,
    }
}

/// One classical RK4 step of length `epsilon` hours with `u` and `d` held.
pub fn step(
    params: &ZoneParams,
    x: &PlantState,
    u: &ControlInput,
    d: &Disturbance,
    epsilon: f64,
) -> Result<PlantState> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::invalid("epsilon", "must be > 0"));
    }
    let h = epsilon * SECONDS_PER_HOUR;
    let k1 = derivative(params, x, u, d)?;
    let k2 = derivative(params, &axpy(x, h / 2.0, &k1), u, d)?;
    let k3 = derivative(params, &axpy(x, h / 2.0, &k2), u, d)?;
    let k4 = derivative(params, &axpy(x, h, &k3), u, d)?;
    let comb = |a: f64, b: f64, c: f64, e: f64| h / 6.0 * (a + 2.0 * b + 2.0 * c + e);
    let next = PlantState {
        t_r: x.t_r + comb(k1.t_r, k2.t_r, k3.t_r, k4.t_r),
        t_s: (0..x.t_s.len())
            .map(|j| x.t_s[j] + comb(k1.t_s[j], k2.t_s[j], k3.t_s[j], k4.t_s[j]))
            .collect(),
        t_w: x.t_w + comb(k1.t_w, k2.t_w, k3.t_w, k4.t_w),
    };
    if let Some((state, value)) = next.first_non_finite() {
        return Err(Error::Divergence {
            state,
            value,
            t_hours: f64::NAN,
        });
    }
    Ok(next)
}

/// Advances over one sampling period using `substeps` RK4 steps.
pub fn advance(
    params: &ZoneParams,
    x: &PlantState,
    u: &ControlInput,
    d: &Disturbance,
    epsilon: f64,
    substeps: usize,
) -> Result<PlantState> {
    let n = substeps.max(1);
    let mut x = x.clone();
    for _ in 0..n {
        x = step(params, &x, u, d, epsilon / n as f64)?;
    }
    Ok(x)
}

/// Water flow of the hysteresis law, applied literally: heat at full flow
/// when occupied and either below the band or at/above it and not falling.
pub fn hysteresis_control(t_r_now: f64, t_r_prev: f64, occupied: bool, s: &HysteresisSettings) -> f64 {
    let lower = s.t_set - s.delta_t;
    let heat = occupied && (t_r_now < lower || (t_r_now >= lower && t_r_prev <= t_r_now));
    if heat {
        s.vdot_max
    } else {
        0.0
    }
}

pub fn heating_curve(t_set: f64, t_out: f64, p: &HeatingCurveParams) -> f64 {
    if t_set > t_out {
        p.rho0 + p.rho1 * (t_set - t_out).powf(p.zeta)
    } else {
        p.rho0
    }
}

/// Initial state: room and water as configured, each separator halfway
/// between the room and its neighbour.
pub fn initial_state(cfg: &SimConfig, t_neighbors: &[f64]) -> PlantState {
    PlantState {
        t_r: cfg.initial_t_r,
        t_s: t_neighbors.iter().map(|t| 0.5 * (cfg.initial_t_r + t)).collect(),
        t_w: cfg.initial_t_w,
    }
}

/// Closed-loop data-generation run.
pub fn run_experiment(params: &ZoneParams, cfg: &SimConfig) -> Result<TimeSeriesDataset> {
    run_experiment_with_truth(params, cfg).map(|(ds, _)| ds)
}

/// Like [`run_experiment`], also returning the noise-free state at every sample.
pub fn run_experiment_with_truth(params: &ZoneParams, cfg: &SimConfig) -> Result<(TimeSeriesDataset, Vec<PlantState>)> {
    params.validate()?;
    cfg.validate()?;
    if cfg.disturbances.n_neighbors() != params.n_neighbors() {
        return Err(Error::Config(format!(
            "disturbances define {} neighbours, plant has {}",
            cfg.disturbances.n_neighbors(),
            params.n_neighbors()
        )));
    }

    let sched = DisturbanceSchedule::new(cfg.disturbances.clone(), cfg.seed);
    let n = cfg.n_samples();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid("sim.noise_std", e.to_string()))?;
    let mut measure = |v: f64| {
        if cfg.noise_std > 0.0 {
            v + noise.sample(&mut rng)
        } else {
            v
        }
    };

    let mut ds = TimeSeriesDataset::with_capacity(cfg.epsilon, params.n_neighbors(), n);
    let mut truth = Vec::with_capacity(n);
    let mut x = initial_state(cfg, &sched.at(cfg.start_h).t_neighbors);
    let mut prev_meas: Option<f64> = None;

    for k in 0..n {
        let t = cfg.start_h + k as f64 * cfg.epsilon;
        let exo = sched.at(t);
        let y_r = measure(x.t_r);
        let y_w = measure(x.t_w);

        let vdot_w = hysteresis_control(y_r, prev_meas.unwrap_or(y_r), exo.occupied, &cfg.hysteresis);
        let t_w_in = heating_curve(cfg.hysteresis.t_set, exo.t_neighbors[0], &cfg.heating_curve);
        prev_meas = Some(y_r);

        ds.t_hours.push(t);
        ds.t_r.push(y_r);
        for (col, v) in ds.t_rj.iter_mut().zip(&exo.t_neighbors) {
            col.push(*v);
        }
        ds.t_w.push(y_w);
        ds.tw_in.push(t_w_in);
        ds.ta_in.push(exo.t_a_in);
        ds.vw.push(vdot_w);
        ds.va.push(exo.vdot_a);
        ds.qext.push(exo.q_ext);
        ds.occ.push(if exo.occupied { 1.0 } else { 0.0 });
        truth.push(x.clone());

        let u = ControlInput {
            vdot_w,
            vdot_a: exo.vdot_a,
        };
        let d = Disturbance {
            t_w_in,
            t_a_in: exo.t_a_in,
            t_neighbors: exo.t_neighbors,
            q_ext: exo.q_ext,
        };
        x = advance(params, &x, &u, &d, cfg.epsilon, cfg.substeps).map_err(|e| match e {
            Error::Divergence { state, value, .. } => Error::Divergence {
                state,
                value,
                t_hours: t,
            },
            other => other,
        })?;
    }
    Ok((ds, truth))
}
