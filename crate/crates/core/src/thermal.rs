//! Lumped RC model of a single thermal zone.
//!
//! The zone exchanges heat with each neighbour through a separator (two
//! resistances around one capacitance), receives heat from a hydronic
//! radiator loop and from ventilation air, and absorbs external gains.
//! The resulting dynamics are bilinear: linear in the temperatures for a
//! fixed pair of flows, with the flows multiplying state and inlet
//! temperatures.
//!
//! Flow convention: the water flow is a mass flow in kg/s, so the radiator
//! restrictor conductance is `c_w * m_dot`. Air flow stays volumetric
//! (m³/s) with conductance `rho_a * c_a * V_dot`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wall or partition between the zone and one neighbour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatorParams {
    /// Label of the neighbour on the far side (e.g. `"outdoor"`).
    pub id: String,
    /// Inside resistance (zone side), K/W.
    pub r_plus: f64,
    /// Outside resistance (neighbour side), K/W.
    pub r_minus: f64,
    /// Separator capacitance, J/K.
    pub c_s: f64,
}

/// Radiant (hydronic) heating loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RhParams {
    /// Specific heat of the medium, J/(kg K).
    pub c_w_medium: f64,
    /// Density of the medium, kg/m³.
    pub rho_w: f64,
    /// Medium volume inside the radiator loop, m³.
    pub v_w_volume: f64,
    /// Radiator-to-room convection resistance, K/W.
    pub r_c: f64,
}

impl RhParams {
    /// Thermal capacitance of the medium, J/K.
    pub fn capacitance(&self) -> f64 {
        self.c_w_medium * self.rho_w * self.v_w_volume
    }
}

/// Ventilation air properties.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HvacParams {
    /// Specific heat of air at constant pressure, J/(kg K).
    pub c_a: f64,
    /// Air density, kg/m³.
    pub rho_a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZoneParams {
    /// Zone capacitance, J/K.
    pub c_r: f64,
    pub separators: Vec<SeparatorParams>,
    pub rh: RhParams,
    pub hvac: HvacParams,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(name, format!("must be finite, got {v}")));
    }
    if v <= 0.0 {
        return Err(Error::invalid(name, format!("must be > 0, got {v}")));
    }
    Ok(())
}

impl ZoneParams {
    pub fn n_neighbors(&self) -> usize {
        self.separators.len()
    }

    pub fn validate(&self) -> Result<()> {
        positive("plant.c_r", self.c_r)?;
        if self.separators.is_empty() {
            return Err(Error::invalid("plant.separators", "at least one neighbour is required"));
        }
        for s in &self.separators {
            positive(&format!("plant.separators[{}].r_plus", s.id), s.r_plus)?;
            positive(&format!("plant.separators[{}].r_minus", s.id), s.r_minus)?;
            positive(&format!("plant.separators[{}].c_s", s.id), s.c_s)?;
        }
        positive("plant.rh.c_w_medium", self.rh.c_w_medium)?;
        positive("plant.rh.rho_w", self.rh.rho_w)?;
        positive("plant.rh.v_w_volume", self.rh.v_w_volume)?;
        positive("plant.rh.r_c", self.rh.r_c)?;
        positive("plant.hvac.c_a", self.hvac.c_a)?;
        positive("plant.hvac.rho_a", self.hvac.rho_a)?;
        Ok(())
    }
}

/// Zone state: room temperature, one internal temperature per separator,
/// and the radiator water temperature (all °C).
#[derive(Clone, Debug, PartialEq)]
pub struct PlantState {
    pub t_r: f64,
    pub t_s: Vec<f64>,
    pub t_w: f64,
}

impl PlantState {
    pub fn uniform(t: f64, n_neighbors: usize) -> Self {
        Self {
            t_r: t,
            t_s: vec![t; n_neighbors],
            t_w: t,
        }
    }

    /// First non-finite component, if any, as `(name, value)`.
    pub fn first_non_finite(&self) -> Option<(String, f64)> {
        if !self.t_r.is_finite() {
            return Some(("t_r".into(), self.t_r));
        }
        if let Some((j, v)) = self.t_s.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Some((format!("t_s[{j}]"), *v));
        }
        if !self.t_w.is_finite() {
            return Some(("t_w".into(), self.t_w));
        }
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlInput {
    /// Water mass flow, kg/s.
    pub vdot_w: f64,
    /// Air volume flow, m³/s.
    pub vdot_a: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Disturbance {
    /// Radiator inlet water temperature, °C.
    pub t_w_in: f64,
    /// Ventilation inlet air temperature, °C.
    pub t_a_in: f64,
    /// Neighbour temperatures, °C, ordered like `ZoneParams::separators`.
    pub t_neighbors: Vec<f64>,
    /// Aggregate external heat gain, W.
    pub q_ext: f64,
}

/// Time derivative of a [`PlantState`], K/s per component.
#[derive(Clone, Debug, PartialEq)]
pub struct StateRate {
    pub t_r: f64,
    pub t_s: Vec<f64>,
    pub t_w: f64,
}

/// Entries of the state and disturbance matrices for one flow pair (1/s).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub a_r: f64,
    pub a_rs_plus: Vec<f64>,
    pub a_rw: f64,
    pub a_ra: f64,
    pub a_ext: f64,
    pub a_s_plus: Vec<f64>,
    pub a_s_minus: Vec<f64>,
    pub a_s: Vec<f64>,
    pub a_w: f64,
    pub a_ww: f64,
    pub a_wc: f64,
    /// Restrictor conductance of the water loop, 1/R_w = c_w * m_dot (W/K).
    pub g_w: f64,
    /// Restrictor conductance of the air path, 1/R_a = rho_a c_a V_dot (W/K).
    pub g_a: f64,
}

fn check_flows(u: &ControlInput) -> Result<()> {
    for (name, v) in [("vdot_w", u.vdot_w), ("vdot_a", u.vdot_a)] {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(name, format!("flow must be finite and >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Water-loop conductance for a mass flow.
pub fn water_conductance(rh: &RhParams, vdot_w: f64) -> f64 {
    rh.c_w_medium * vdot_w
}

/// Air-path conductance for a volume flow.
pub fn air_conductance(hvac: &HvacParams, vdot_a: f64) -> f64 {
    hvac.rho_a * hvac.c_a * vdot_a
}

pub fn coefficients(params: &ZoneParams, u: &ControlInput) -> Result<CoefficientSet> {
    params.validate()?;
    check_flows(u)?;

    let c_r = params.c_r;
    let c_w = params.rh.capacitance();
    let g_w = water_conductance(&params.rh, u.vdot_w);
    let g_a = air_conductance(&params.hvac, u.vdot_a);

    let a_rs_plus: Vec<f64> = params.separators.iter().map(|s| 1.0 / (c_r * s.r_plus)).collect();
    let a_s_plus: Vec<f64> = params.separators.iter().map(|s| 1.0 / (s.c_s * s.r_plus)).collect();
    let a_s_minus: Vec<f64> = params.separators.iter().map(|s| 1.0 / (s.c_s * s.r_minus)).collect();
    let a_s = a_s_plus.iter().zip(&a_s_minus).map(|(p, m)| -p - m).collect();

    let a_rw = 1.0 / (c_r * params.rh.r_c);
    let a_ra = g_a / c_r;
    let a_r = -a_rs_plus.iter().sum::<f64>() - a_rw - a_ra;
    let a_w = 1.0 / (c_w * params.rh.r_c);
    let a_ww = g_w / c_w;

    Ok(CoefficientSet {
        a_r,
        a_rs_plus,
        a_rw,
        a_ra,
        a_ext: 1.0 / c_r,
        a_s_plus,
        a_s_minus,
        a_s,
        a_w,
        a_ww,
        a_wc: -a_w - a_ww,
        g_w,
        g_a,
    })
}

/// `a_wc` of the radiator loop as a function of water mass flow.
pub fn a_wc(params: &ZoneParams, vdot_w: f64) -> f64 {
    let c_w = params.rh.capacitance();
    -1.0 / (c_w * params.rh.r_c) - water_conductance(&params.rh, vdot_w) / c_w
}

/// Right-hand side of the zone dynamics, assembled from the individual
/// heat flows (separators, radiator, ventilation, external gain).
pub fn derivative(params: &ZoneParams, x: &PlantState, u: &ControlInput, d: &Disturbance) -> Result<StateRate> {
    let n = params.n_neighbors();
    if x.t_s.len() != n {
        return Err(Error::Shape {
            what: "state.t_s",
            expected: n,
            got: x.t_s.len(),
        });
    }
    if d.t_neighbors.len() != n {
        return Err(Error::Shape {
            what: "disturbance.t_neighbors",
            expected: n,
            got: d.t_neighbors.len(),
        });
    }
    check_flows(u)?;

    let mut q_into_zone = d.q_ext;
    let mut t_s_rate = Vec::with_capacity(n);
    for ((sep, &t_s), &t_j) in params.separators.iter().zip(&x.t_s).zip(&d.t_neighbors) {
        let q_plus = (t_s - x.t_r) / sep.r_plus;
        let q_minus = (t_j - t_s) / sep.r_minus;
        t_s_rate.push((q_minus - q_plus) / sep.c_s);
        q_into_zone += q_plus;
    }

    let q_rad = (x.t_w - x.t_r) / params.rh.r_c;
    let q_loop = water_conductance(&params.rh, u.vdot_w) * (d.t_w_in - x.t_w);
    let q_hvac = air_conductance(&params.hvac, u.vdot_a) * (d.t_a_in - x.t_r);
    q_into_zone += q_rad + q_hvac;

    Ok(StateRate {
        t_r: q_into_zone / params.c_r,
        t_s: t_s_rate,
        t_w: (q_loop - q_rad) / params.rh.capacitance(),
    })
}
