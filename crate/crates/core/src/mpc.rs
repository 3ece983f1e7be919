//! Receding-horizon control of the radiator loop by exhaustive enumeration
//! of piecewise-constant plans, and closed-loop episodes against the plant.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::fmt_f64;
use crate::disturbance::DisturbanceSchedule;
use crate::error::{Error, Result};
use crate::identify::ThetaVector;
use crate::regressors::{LaggedHistory, MeasuredSample, RegressorLayout, RegressorSpec, Structure};
use crate::sim::{advance, heating_curve, hysteresis_control, initial_state, SimConfig};
use crate::thermal::{ControlInput, Disturbance, PlantState, ZoneParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Comfort weight.
    pub alpha: f64,
    /// Heating weight, kW/(°C h).
    pub beta: f64,
    /// Pump weight, kW s/(h m³).
    pub gamma: f64,
    /// Sampling period, h.
    pub t_sam: f64,
    /// Control hold period, h.
    pub t_opt: f64,
    /// Horizon, h.
    pub t_hor: f64,
    /// Admissible inlet temperatures, °C.
    pub inlet_set: Vec<f64>,
    /// Admissible water flows, kg/s.
    pub flow_set: Vec<f64>,
    pub t_set: f64,
    pub heating_cost_gated_by_flow: bool,
    /// Refuse to enumerate more plans than this.
    pub max_plans: usize,
    /// Hysteresis-controlled lead-in before the episode, h.
    pub warmup_h: f64,
    /// Controlled episode length, h.
    pub episode_h: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            alpha: 1e6,
            beta: 0.3333,
            gamma: 0.5278e3,
            t_sam: 1.0 / 12.0,
            t_opt: 1.0,
            t_hor: 5.0,
            inlet_set: vec![40.0, 45.0],
            flow_set: vec![0.0, 0.0787],
            t_set: 21.0,
            heating_cost_gated_by_flow: false,
            max_plans: 1 << 16,
            warmup_h: 24.0,
            episode_h: 168.0,
        }
    }
}

fn ratio(a: f64, b: f64, name: &str) -> Result<usize> {
    let r = a / b;
    let n = r.round();
    if !(r.is_finite() && n >= 1.0 && (r - n).abs() < 1e-6 * n.max(1.0)) {
        return Err(Error::invalid(name, format!("{a} is not a positive multiple of {b}")));
    }
    Ok(n as usize)
}

impl MpcConfig {
    /// Samples per control period.
    pub fn samples_per_period(&self) -> Result<usize> {
        ratio(self.t_opt, self.t_sam, "mpc.t_opt")
    }

    pub fn n_periods(&self) -> Result<usize> {
        ratio(self.t_hor, self.t_opt, "mpc.t_hor")
    }

    /// Horizon length in samples.
    pub fn n_hor(&self) -> Result<usize> {
        Ok(self.samples_per_period()? * self.n_periods()?)
    }

    pub fn choices(&self) -> usize {
        self.inlet_set.len() * self.flow_set.len()
    }

    /// Number of admissible plans, `None` on overflow.
    pub fn plan_count(&self) -> Result<Option<usize>> {
        let n = u32::try_from(self.n_periods()?).map_err(|_| Error::invalid("mpc.t_hor", "too many periods"))?;
        Ok(self.choices().checked_pow(n))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mpc.alpha", self.alpha),
            ("mpc.beta", self.beta),
            ("mpc.gamma", self.gamma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, "must be finite and >= 0"));
            }
        }
        if !(self.t_sam.is_finite() && self.t_sam > 0.0) {
            return Err(Error::invalid("mpc.t_sam", "must be > 0"));
        }
        self.n_hor()?;
        if self.inlet_set.is_empty() || self.inlet_set.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mpc.inlet_set", "needs at least one finite value"));
        }
        if self.flow_set.is_empty() || self.flow_set.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("mpc.flow_set", "needs at least one finite value >= 0"));
        }
        if !(self.warmup_h >= 0.0 && self.episode_h > 0.0) {
            return Err(Error::invalid("mpc.episode_h", "episode must be > 0 and warm-up >= 0"));
        }
        Ok(())
    }
}

/// Per-period `(inlet, flow)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlPlan {
    pub index: usize,
    pub periods: Vec<(f64, f64)>,
    pub samples_per_period: usize,
}

impl ControlPlan {
    /// Plan number `index`: base-`|inlet| * |flow|` digits, earliest period
    /// most significant; each digit is `inlet_idx * |flow| + flow_idx`.
    pub fn from_index(index: usize, cfg: &MpcConfig) -> Result<Self> {
        let n = cfg.n_periods()?;
        let base = cfg.choices();
        let nf = cfg.flow_set.len();
        let mut digits = vec![0usize; n];
        let mut rest = index;
        for d in digits.iter_mut().rev() {
            *d = rest % base;
            rest /= base;
        }
        if rest != 0 {
            return Err(Error::invalid("plan index", format!("{index} out of range")));
        }
        Ok(Self {
            index,
            periods: digits
                .iter()
                .map(|c| (cfg.inlet_set[c / nf], cfg.flow_set[c % nf]))
                .collect(),
            samples_per_period: cfg.samples_per_period()?,
        })
    }

    /// Zero-order-hold expansion to one `(inlet, flow)` per sample.
    pub fn expand(&self) -> Vec<(f64, f64)> {
        self.periods
            .iter()
            .flat_map(|p| std::iter::repeat_n(*p, self.samples_per_period))
            .collect()
    }
}

/// Exogenous values over the horizon, from the current sample `k0` to
/// `k0 + n` inclusive (`n + 1` entries per field).
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonForecast {
    pub occupancy: Vec<f64>,
    /// Neighbour temperatures, one vector per sample.
    pub t_neighbors: Vec<Vec<f64>>,
    pub q_ext: Vec<f64>,
    pub t_a_in: Vec<f64>,
    pub vdot_a: Vec<f64>,
}

impl HorizonForecast {
    /// Reads the schedule exactly, from `t0` in steps of `t_sam`.
    pub fn from_schedule(sched: &DisturbanceSchedule, t0: f64, t_sam: f64, n: usize) -> Self {
        let mut f = Self {
            occupancy: Vec::with_capacity(n + 1),
            t_neighbors: Vec::with_capacity(n + 1),
            q_ext: Vec::with_capacity(n + 1),
            t_a_in: Vec::with_capacity(n + 1),
            vdot_a: Vec::with_capacity(n + 1),
        };
        for j in 0..=n {
            let s = sched.at(t0 + j as f64 * t_sam);
            f.occupancy.push(if s.occupied { 1.0 } else { 0.0 });
            f.t_neighbors.push(s.t_neighbors);
            f.q_ext.push(s.q_ext);
            f.t_a_in.push(s.t_a_in);
            f.vdot_a.push(s.vdot_a);
        }
        f
    }

    /// Horizon length `n`.
    pub fn horizon(&self) -> usize {
        self.occupancy.len().saturating_sub(1)
    }
}

/// Predicted room temperature (`n + 1` values, index 0 is the current
/// measurement) and radiator water temperature (`n` values, index 0 is the
/// current measurement).
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonTraces {
    pub t_r: Vec<f64>,
    pub t_w: Vec<f64>,
}

/// Models used by the controller.
#[derive(Clone, Debug)]
pub struct Predictor {
    zone: RegressorLayout,
    rh: RegressorLayout,
    theta_r: ThetaVector,
    theta_w: ThetaVector,
}

impl Predictor {
    pub fn new(spec: RegressorSpec, theta_r: ThetaVector, theta_w: ThetaVector) -> Result<Self> {
        if spec.structure == Structure::NrmFiRh {
            return Err(Error::Config("the zone model cannot be the radiator model".into()));
        }
        let zone = RegressorLayout::new(spec);
        let rh = RegressorLayout::new(RegressorSpec::new(Structure::NrmFiRh, spec.n_neighbors)?);
        for (what, layout, theta) in [("theta_r", &zone, &theta_r), ("theta_w", &rh, &theta_w)] {
            if theta.len() != layout.len() {
                return Err(Error::Shape {
                    what,
                    expected: layout.len(),
                    got: theta.len(),
                });
            }
        }
        Ok(Self {
            zone,
            rh,
            theta_r,
            theta_w,
        })
    }

    pub fn spec(&self) -> &RegressorSpec {
        self.zone.spec()
    }

    /// Samples of history the rollout reads, the current one included.
    pub fn depth(&self) -> usize {
        self.zone.max_lag().max(self.rh.max_lag()) + 1
    }

    /// Trailing window of `hist` with past outputs anchored at the
    /// measurements.
    pub fn anchor(&self, hist: &LaggedHistory) -> Result<LaggedHistory> {
        let n = hist.len();
        if n < self.depth() {
            return Err(Error::Underflow {
                index: n.saturating_sub(1),
                lag: self.depth() - 1,
            });
        }
        let mut w = hist.window(n - self.depth(), n);
        w.yhat = w.t_r.clone();
        w.yhat_w = w.t_w.clone();
        Ok(w)
    }

    /// Rolls both models forward under `controls` (one `(inlet, flow)` per
    /// sample). The last sample of `anchored` is the current one; its control
    /// and disturbance entries are overwritten.
    #[allow(clippy::needless_range_loop)]
    pub fn rollout(
        &self,
        anchored: &LaggedHistory,
        controls: &[(f64, f64)],
        forecast: &HorizonForecast,
    ) -> Result<HorizonTraces> {
        let n = controls.len();
        if forecast.horizon() < n {
            return Err(Error::Shape {
                what: "forecast",
                expected: n + 1,
                got: forecast.occupancy.len(),
            });
        }
        let mut h = anchored.clone();
        let k0 = h.len() - 1;
        let mut t_r = Vec::with_capacity(n + 1);
        let mut t_w = Vec::with_capacity(n);
        t_r.push(h.t_r[k0]);
        if n == 0 {
            return Ok(HorizonTraces { t_r: Vec::new(), t_w });
        }
        let mut phi = Vec::with_capacity(self.zone.len());
        for j in 0..n {
            let k = k0 + j;
            t_w.push(h.t_w[k]);
            let (inlet, flow) = controls[j];
            h.vw[k] = flow;
            h.tw_in[k] = inlet;
            h.va[k] = forecast.vdot_a[j];
            h.ta_in[k] = forecast.t_a_in[j];
            h.qext[k] = forecast.q_ext[j];
            for (c, v) in h.t_rj.iter_mut().zip(&forecast.t_neighbors[j]) {
                c[k] = *v;
            }

            // placeholders for sample k + 1, overwritten next iteration
            h.push(&MeasuredSample {
                t_r: 0.0,
                t_rj: forecast.t_neighbors[j + 1].clone(),
                t_w: 0.0,
                tw_in: 0.0,
                ta_in: 0.0,
                vw: 0.0,
                va: 0.0,
                qext: 0.0,
            })?;
            // the radiator model's own output is the water temperature
            std::mem::swap(&mut h.yhat, &mut h.yhat_w);
            let built = self.rh.build_into(&h, k + 1, &mut phi);
            std::mem::swap(&mut h.yhat, &mut h.yhat_w);
            built?;
            let tw = self.theta_w.dot(&phi);
            self.zone.build_into(&h, k + 1, &mut phi)?;
            let tr = self.theta_r.dot(&phi);
            if !(tr.is_finite() && tw.is_finite()) {
                return Err(Error::Divergence {
                    state: if tr.is_finite() { "T_w" } else { "T_r" }.into(),
                    value: if tr.is_finite() { tw } else { tr },
                    t_hours: f64::NAN,
                });
            }
            h.t_r[k + 1] = tr;
            h.t_w[k + 1] = tw;
            h.yhat.push(tr);
            h.yhat_w.push(tw);
            t_r.push(tr);
        }
        Ok(HorizonTraces { t_r, t_w })
    }
}

/// Multi-step prediction of room and water temperature under `plan`.
/// `hist` ends at the current sample.
pub fn predict_horizon(
    predictor: &Predictor,
    hist: &LaggedHistory,
    plan: &ControlPlan,
    forecast: &HorizonForecast,
) -> Result<HorizonTraces> {
    predictor.rollout(&predictor.anchor(hist)?, &plan.expand(), forecast)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PlanCost {
    pub total: f64,
    pub comfort: f64,
    pub heating: f64,
    pub pump: f64,
}

/// Comfort, heating and pump terms of a predicted trajectory.
pub fn plan_cost(
    traces: &HorizonTraces,
    controls: &[(f64, f64)],
    forecast: &HorizonForecast,
    cfg: &MpcConfig,
) -> PlanCost {
    let n = controls.len();
    if n == 0 {
        return PlanCost::default();
    }
    let mut comfort = 0.0;
    for k in 0..=n {
        let d = traces.t_r[k] - cfg.t_set;
        comfort += forecast.occupancy[k] * d * d;
    }
    comfort *= cfg.alpha / n as f64;
    let mut heating = 0.0;
    let mut pump = 0.0;
    for (k, &(inlet, flow)) in controls.iter().enumerate() {
        let gate = if cfg.heating_cost_gated_by_flow && flow <= 0.0 {
            0.0
        } else {
            1.0
        };
        heating += gate * cfg.beta * cfg.t_sam * (inlet - traces.t_w[k]);
        pump += cfg.gamma * cfg.t_sam * flow;
    }
    PlanCost {
        total: comfort + heating + pump,
        comfort,
        heating,
        pump,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub plan: ControlPlan,
    pub cost: PlanCost,
    pub traces: HorizonTraces,
}

/// Evaluates every admissible plan and returns the cheapest; ties go to
/// the smallest plan index. Plans whose rollout diverges are skipped.
pub fn solve(
    predictor: &Predictor,
    hist: &LaggedHistory,
    forecast: &HorizonForecast,
    cfg: &MpcConfig,
) -> Result<Solution> {
    let count = cfg
        .plan_count()?
        .filter(|c| *c <= cfg.max_plans)
        .ok_or_else(|| Error::Config(format!("plan enumeration exceeds mpc.max_plans = {}", cfg.max_plans)))?;
    let anchored = predictor.anchor(hist)?;
    let best = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let plan = ControlPlan::from_index(i, cfg).ok()?;
            let controls = plan.expand();
            let traces = predictor.rollout(&anchored, &controls, forecast).ok()?;
            let cost = plan_cost(&traces, &controls, forecast, cfg);
            cost.total.is_finite().then_some((cost.total, i))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let (_, index) = best.ok_or_else(|| Error::Numerical {
        step: hist.len().saturating_sub(1),
        reason: "every candidate plan diverged".into(),
    })?;
    let plan = ControlPlan::from_index(index, cfg)?;
    let controls = plan.expand();
    let traces = predictor.rollout(&anchored, &controls, forecast)?;
    let cost = plan_cost(&traces, &controls, forecast, cfg);
    Ok(Solution { plan, cost, traces })
}

/// One logged sample of a closed-loop episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRow {
    pub t_hours: f64,
    pub t_r_plant: f64,
    pub t_w_plant: f64,
    pub plan_inlet: f64,
    pub plan_flow: f64,
    pub occupied: bool,
    pub run_avg_comfort: f64,
    pub run_avg_heating: f64,
    pub run_avg_pump: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeReport {
    pub controller: String,
    pub rows: Vec<EpisodeRow>,
    pub solves: usize,
}

impl EpisodeReport {
    pub fn final_costs(&self) -> (f64, f64, f64) {
        self.rows
            .last()
            .map(|r| (r.run_avg_comfort, r.run_avg_heating, r.run_avg_pump))
            .unwrap_or((0.0, 0.0, 0.0))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record([
            "t_hours",
            "T_r_plant",
            "plan_inlet",
            "plan_flow",
            "run_avg_comfort",
            "run_avg_heating",
            "run_avg_pump",
        ])
        .map_err(csv_err)?;
        for r in &self.rows {
            wr.write_record(
                [
                    r.t_hours,
                    r.t_r_plant,
                    r.plan_inlet,
                    r.plan_flow,
                    r.run_avg_comfort,
                    r.run_avg_heating,
                    r.run_avg_pump,
                ]
                .map(fmt_f64),
            )
            .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// Controller driving the episode after warm-up.
pub enum Controller<'a> {
    /// Hysteresis flow with heating-curve inlet, decided every sample.
    Hysteresis,
    /// Receding-horizon enumeration, re-solved every control period.
    Mpc(&'a Predictor),
}

/// Warm-up under hysteresis, then `cfg.episode_h` hours under `controller`.
/// Costs are computed on the noise-free plant state and averaged per sample
/// over the episode.
pub fn closed_loop_run(
    params: &ZoneParams,
    sim: &SimConfig,
    cfg: &MpcConfig,
    controller: Controller<'_>,
) -> Result<EpisodeReport> {
    params.validate()?;
    sim.validate()?;
    cfg.validate()?;
    if (sim.epsilon - cfg.t_sam).abs() > 1e-9 * cfg.t_sam {
        return Err(Error::Config(format!(
            "sim.epsilon ({}) and mpc.t_sam ({}) differ",
            sim.epsilon, cfg.t_sam
        )));
    }
    let n_hor = cfg.n_hor()?;
    let per_period = cfg.samples_per_period()?;
    let sched = DisturbanceSchedule::new(sim.disturbances.clone(), sim.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let noise = Normal::new(0.0, sim.noise_std).map_err(|e| Error::invalid("sim.noise_std", e.to_string()))?;
    let mut measure = |v: f64| {
        if sim.noise_std > 0.0 {
            v + noise.sample(&mut rng)
        } else {
            v
        }
    };

    let warm = (cfg.warmup_h / sim.epsilon).round() as usize;
    let episode = (cfg.episode_h / sim.epsilon).round() as usize;
    let (name, predictor) = match controller {
        Controller::Hysteresis => ("hysteresis".to_string(), None),
        Controller::Mpc(p) => {
            if warm < p.depth() {
                return Err(Error::invalid(
                    "mpc.warmup_h",
                    "shorter than the predictor's history depth",
                ));
            }
            (format!("mpc:{}", p.spec().structure), Some(p))
        }
    };

    let mut hist = LaggedHistory::new(params.n_neighbors());
    let mut x: PlantState = initial_state(sim, &sched.at(sim.start_h).t_neighbors);
    let mut prev_meas: Option<f64> = None;
    let mut rows = Vec::with_capacity(episode);
    let mut solves = 0;
    let mut current: Option<ControlPlan> = None;
    let (mut sum_c, mut sum_h, mut sum_p) = (0.0, 0.0, 0.0);

    for k in 0..warm + episode {
        let t = sim.start_h + k as f64 * sim.epsilon;
        let exo = sched.at(t);
        let y_r = measure(x.t_r);
        let y_w = measure(x.t_w);
        hist.push(&MeasuredSample {
            t_r: y_r,
            t_rj: exo.t_neighbors.clone(),
            t_w: y_w,
            tw_in: 0.0,
            ta_in: exo.t_a_in,
            vw: 0.0,
            va: exo.vdot_a,
            qext: exo.q_ext,
        })?;

        let in_episode = k >= warm;
        let (inlet, flow) = match (predictor, in_episode) {
            (Some(p), true) => {
                let j = k - warm;
                if j.is_multiple_of(per_period) {
                    let fc = HorizonForecast::from_schedule(&sched, t, sim.epsilon, n_hor);
                    current = Some(solve(p, &hist, &fc, cfg)?.plan);
                    solves += 1;
                }
                let plan = current.as_ref().expect("plan set at period start");
                plan.periods[0]
            }
            _ => (
                heating_curve(sim.hysteresis.t_set, exo.t_neighbors[0], &sim.heating_curve),
                hysteresis_control(y_r, prev_meas.unwrap_or(y_r), exo.occupied, &sim.hysteresis),
            ),
        };
        prev_meas = Some(y_r);
        let last = hist.len() - 1;
        hist.tw_in[last] = inlet;
        hist.vw[last] = flow;

        if in_episode {
            let p = if exo.occupied { 1.0 } else { 0.0 };
            let gate = if cfg.heating_cost_gated_by_flow && flow <= 0.0 {
                0.0
            } else {
                1.0
            };
            sum_c += cfg.alpha * p * (x.t_r - cfg.t_set).powi(2);
            sum_h += gate * cfg.beta * cfg.t_sam * (inlet - x.t_w);
            sum_p += cfg.gamma * cfg.t_sam * flow;
            let m = (k - warm + 1) as f64;
            rows.push(EpisodeRow {
                t_hours: t,
                t_r_plant: x.t_r,
                t_w_plant: x.t_w,
                plan_inlet: inlet,
                plan_flow: flow,
                occupied: exo.occupied,
                run_avg_comfort: sum_c / m,
                run_avg_heating: sum_h / m,
                run_avg_pump: sum_p / m,
            });
        }

        let u = ControlInput {
            vdot_w: flow,
            vdot_a: exo.vdot_a,
        };
        let d = Disturbance {
            t_w_in: inlet,
            t_a_in: exo.t_a_in,
            t_neighbors: exo.t_neighbors,
            q_ext: exo.q_ext,
        };
        x = advance(params, &x, &u, &d, sim.epsilon, sim.substeps).map_err(|e| match e {
            Error::Divergence { state, value, .. } => Error::Divergence {
                state,
                value,
                t_hours: t,
            },
            other => other,
        })?;
    }

    Ok(EpisodeReport {
        controller: name,
        rows,
        solves,
    })
}
