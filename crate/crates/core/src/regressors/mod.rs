//! Regression vectors for output-error predictors of the zone.
//!
//! Five structures are supported:
//!
//! | structure     | target | information | lags per block   |
//! |---------------|--------|-------------|------------------|
//! | `LRM`         | T_r    | MI          | `n + 2`          |
//! | `NRM_FI_ZONE` | T_r    | FI          | `n + 1`          |
//! | `NRM_FI_RH`   | T_w    | FI          | 1                |
//! | `NRM_MI`      | T_r    | MI          | `n + 2`          |
//! | `NRM_LI`      | T_r    | LI          | `n + 2`          |
//!
//! where `n` is the number of neighbours. Every layout is a table of
//! [`Block`]s: a product of at most three lagged signals, evaluated over a
//! contiguous range of lags. Past outputs always enter through the stored
//! predictions, never through the measured output.

pub mod operators;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataset::TimeSeriesDataset;
use crate::error::{Error, Result};

pub use operators::{
    apply_chain, apply_op, property_2_correction, verify_property_1, verify_property_2, verify_property_3, Coefficient,
    DelayPolynomialOp, Expansion,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "LRM")]
    Lrm,
    #[serde(rename = "NRM_FI_ZONE")]
    NrmFiZone,
    #[serde(rename = "NRM_FI_RH")]
    NrmFiRh,
    #[serde(rename = "NRM_MI")]
    NrmMi,
    #[serde(rename = "NRM_LI")]
    NrmLi,
}

impl Structure {
    pub const ALL: [Structure; 5] = [
        Structure::Lrm,
        Structure::NrmFiZone,
        Structure::NrmFiRh,
        Structure::NrmMi,
        Structure::NrmLi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Lrm => "LRM",
            Structure::NrmFiZone => "NRM_FI_ZONE",
            Structure::NrmFiRh => "NRM_FI_RH",
            Structure::NrmMi => "NRM_MI",
            Structure::NrmLi => "NRM_LI",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Structure::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown model structure `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegressorSpec {
    pub structure: Structure,
    pub n_neighbors: usize,
}

impl RegressorSpec {
    pub fn new(structure: Structure, n_neighbors: usize) -> Result<Self> {
        if n_neighbors == 0 {
            return Err(Error::Config("a zone needs at least one neighbour".into()));
        }
        Ok(Self { structure, n_neighbors })
    }

    /// Which measured column the model predicts.
    pub fn target(&self) -> Target {
        match self.structure {
            Structure::NrmFiRh => Target::WaterTemp,
            _ => Target::RoomTemp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    RoomTemp,
    WaterTemp,
}

/// A lagged quantity that can appear in a regressor entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Signal {
    /// Stored prediction of the model's own target.
    Output,
    /// Stored prediction of the radiator water temperature (FI zone model).
    RhOutput,
    /// Measured room temperature.
    RoomTemp,
    /// Temperature of neighbour `j` (0-based).
    Neighbor(usize),
    WaterFlow,
    AirFlow,
    WaterInlet,
    AirInlet,
    ExternalGain,
    /// Constant 1; stands in for unmeasured inlet temperatures.
    Unity,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Factor {
    pub signal: Signal,
    /// Extra delay on top of the block lag `m`.
    pub shift: usize,
}

/// `col{ prod_f f.signal(k - m - f.shift) }` for `m` in `lags`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub factors: Vec<Factor>,
    pub lag_min: usize,
    pub lag_max: usize,
}

impl Block {
    pub fn len(&self) -> usize {
        self.lag_max + 1 - self.lag_min
    }

    pub fn is_empty(&self) -> bool {
        self.lag_max < self.lag_min
    }

    pub fn deepest_lag(&self) -> usize {
        self.lag_max + self.factors.iter().map(|f| f.shift).max().unwrap_or(0)
    }
}

fn block(signals: &[Signal], lag_min: usize, lag_max: usize) -> Block {
    Block {
        factors: signals.iter().map(|&signal| Factor { signal, shift: 0 }).collect(),
        lag_min,
        lag_max,
    }
}

/// Declarative layout of the regression vector.
pub fn blocks(spec: &RegressorSpec) -> Vec<Block> {
    use Signal::*;
    let n = spec.n_neighbors;
    let neighbours = |lo: usize, hi: usize| (0..n).map(move |j| block(&[Neighbor(j)], lo, hi));
    match spec.structure {
        Structure::Lrm => {
            let l = n + 2;
            let mut b = vec![block(&[Output], 1, l)];
            b.extend(neighbours(1, l));
            b.extend([
                block(&[AirFlow], 1, l),
                block(&[AirInlet], 1, l),
                block(&[WaterFlow], 1, l),
                block(&[WaterInlet], 1, l),
                block(&[ExternalGain], 1, l),
            ]);
            b
        }
        Structure::NrmFiZone => {
            let l = n + 1;
            let mut b = vec![block(&[Output], 1, l)];
            b.extend(neighbours(2, l));
            b.extend([
                block(&[AirFlow, Output], 1, l),
                block(&[AirFlow, AirInlet], 1, l),
                block(&[RhOutput], 1, l),
                block(&[ExternalGain], 1, l),
            ]);
            b
        }
        Structure::NrmFiRh => vec![
            block(&[Output], 1, 1),
            block(&[WaterFlow, Output], 1, 1),
            block(&[WaterFlow, WaterInlet], 1, 1),
            block(&[RoomTemp], 1, 1),
        ],
        Structure::NrmMi | Structure::NrmLi => {
            let (ta, tw) = if spec.structure == Structure::NrmMi {
                (AirInlet, WaterInlet)
            } else {
                (Unity, Unity)
            };
            let l = n + 2;
            let mut b = vec![block(&[Output], 1, l)];
            b.extend(neighbours(2, l));
            b.extend([
                block(&[AirFlow, Output], 1, l),
                block(&[AirFlow, ta], 1, l),
                block(&[AirFlow, WaterFlow, ta], 2, l),
                Block {
                    factors: vec![
                        Factor {
                            signal: WaterFlow,
                            shift: 1,
                        },
                        Factor {
                            signal: Output,
                            shift: 0,
                        },
                    ],
                    lag_min: 1,
                    lag_max: n + 1,
                },
                block(&[WaterFlow, Output], 2, l),
                block(&[WaterFlow, AirFlow, Output], 2, l),
                block(&[WaterFlow, tw], 2, l),
                block(&[ExternalGain], 1, l),
                block(&[WaterFlow, ExternalGain], 2, l),
            ]);
            b
        }
    }
}

/// Dimension of the regression vector, in closed form.
pub fn regressor_length(spec: &RegressorSpec) -> usize {
    let n = spec.n_neighbors;
    match spec.structure {
        Structure::Lrm => (n + 2) * (n + 6),
        Structure::NrmFiZone => 5 * (n + 1) + n * n,
        Structure::NrmFiRh => 4,
        Structure::NrmMi | Structure::NrmLi => 4 * (n + 2) + 6 * (n + 1) + n * (n + 1),
    }
}

/// Deepest delay referenced by the layout.
pub fn max_lag(spec: &RegressorSpec) -> usize {
    blocks(spec).iter().map(Block::deepest_lag).max().unwrap_or(0)
}

/// Human-readable label of every regressor entry, in layout order.
pub fn entry_labels(spec: &RegressorSpec) -> Vec<String> {
    let name = |f: &Factor, m: usize| {
        let s = match f.signal {
            Signal::Output => "yhat".to_string(),
            Signal::RhOutput => "Tw_hat".into(),
            Signal::RoomTemp => "T_r".into(),
            Signal::Neighbor(j) => format!("T_rj_{}", j + 1),
            Signal::WaterFlow => "Vw".into(),
            Signal::AirFlow => "Va".into(),
            Signal::WaterInlet => "Tw_in".into(),
            Signal::AirInlet => "Ta_in".into(),
            Signal::ExternalGain => "Qext".into(),
            Signal::Unity => return "1".to_string(),
        };
        format!("{s}(k-{})", m + f.shift)
    };
    blocks(spec)
        .iter()
        .flat_map(|b| {
            (b.lag_min..=b.lag_max).map(move |m| b.factors.iter().map(|f| name(f, m)).collect::<Vec<_>>().join("*"))
        })
        .collect()
}

/// Measured columns plus the predictions generated so far.
///
/// Columns are indexed by absolute sample number. `yhat[k]` is the stored
/// prediction of the model's target at sample `k` (or the measured value
/// during warm-up); `yhat_w` plays the same role for the radiator water
/// temperature in the full-information zone model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LaggedHistory {
    pub t_r: Vec<f64>,
    pub t_rj: Vec<Vec<f64>>,
    pub t_w: Vec<f64>,
    pub tw_in: Vec<f64>,
    pub ta_in: Vec<f64>,
    pub vw: Vec<f64>,
    pub va: Vec<f64>,
    pub qext: Vec<f64>,
    pub yhat: Vec<f64>,
    pub yhat_w: Vec<f64>,
}

/// Measured values at one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasuredSample {
    pub t_r: f64,
    pub t_rj: Vec<f64>,
    pub t_w: f64,
    pub tw_in: f64,
    pub ta_in: f64,
    pub vw: f64,
    pub va: f64,
    pub qext: f64,
}

impl LaggedHistory {
    pub fn new(n_neighbors: usize) -> Self {
        Self {
            t_rj: vec![Vec::new(); n_neighbors],
            ..Default::default()
        }
    }

    /// Copies the measured columns of `ds`; no predictions yet.
    pub fn from_dataset(ds: &TimeSeriesDataset) -> Self {
        Self {
            t_r: ds.t_r.clone(),
            t_rj: ds.t_rj.clone(),
            t_w: ds.t_w.clone(),
            tw_in: ds.tw_in.clone(),
            ta_in: ds.ta_in.clone(),
            vw: ds.vw.clone(),
            va: ds.va.clone(),
            qext: ds.qext.clone(),
            yhat: Vec::new(),
            yhat_w: Vec::new(),
        }
    }

    /// Copy of samples `from..to`, predictions included where present.
    pub fn window(&self, from: usize, to: usize) -> Self {
        let cut = |v: &Vec<f64>| v[from.min(v.len())..to.min(v.len())].to_vec();
        Self {
            t_r: cut(&self.t_r),
            t_rj: self.t_rj.iter().map(cut).collect(),
            t_w: cut(&self.t_w),
            tw_in: cut(&self.tw_in),
            ta_in: cut(&self.ta_in),
            vw: cut(&self.vw),
            va: cut(&self.va),
            qext: cut(&self.qext),
            yhat: cut(&self.yhat),
            yhat_w: cut(&self.yhat_w),
        }
    }

    pub fn len(&self) -> usize {
        self.t_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_r.is_empty()
    }

    pub fn n_neighbors(&self) -> usize {
        self.t_rj.len()
    }

    pub fn push(&mut self, s: &MeasuredSample) -> Result<()> {
        if s.t_rj.len() != self.t_rj.len() {
            return Err(Error::Shape {
                what: "sample.t_rj",
                expected: self.t_rj.len(),
                got: s.t_rj.len(),
            });
        }
        self.t_r.push(s.t_r);
        for (c, v) in self.t_rj.iter_mut().zip(&s.t_rj) {
            c.push(*v);
        }
        self.t_w.push(s.t_w);
        self.tw_in.push(s.tw_in);
        self.ta_in.push(s.ta_in);
        self.vw.push(s.vw);
        self.va.push(s.va);
        self.qext.push(s.qext);
        Ok(())
    }

    /// Measured target column for `spec`.
    pub fn target(&self, target: Target) -> &[f64] {
        match target {
            Target::RoomTemp => &self.t_r,
            Target::WaterTemp => &self.t_w,
        }
    }

    fn column(&self, signal: Signal) -> &[f64] {
        match signal {
            Signal::Output => &self.yhat,
            Signal::RhOutput => &self.yhat_w,
            Signal::RoomTemp => &self.t_r,
            Signal::Neighbor(j) => &self.t_rj[j],
            Signal::WaterFlow => &self.vw,
            Signal::AirFlow => &self.va,
            Signal::WaterInlet => &self.tw_in,
            Signal::AirInlet => &self.ta_in,
            Signal::ExternalGain => &self.qext,
            Signal::Unity => &[],
        }
    }

    fn value(&self, signal: Signal, k: usize, lag: usize) -> Result<f64> {
        if signal == Signal::Unity {
            return Ok(1.0);
        }
        let idx = k.checked_sub(lag).ok_or(Error::Underflow { index: k, lag })?;
        self.column(signal)
            .get(idx)
            .copied()
            .ok_or(Error::Underflow { index: k, lag })
    }
}

/// Precomputed block table for repeated regressor construction.
#[derive(Clone, Debug)]
pub struct RegressorLayout {
    spec: RegressorSpec,
    blocks: Vec<Block>,
    len: usize,
    max_lag: usize,
}

impl RegressorLayout {
    pub fn new(spec: RegressorSpec) -> Self {
        let blocks = blocks(&spec);
        let len = blocks.iter().map(Block::len).sum();
        let max_lag = blocks.iter().map(Block::deepest_lag).max().unwrap_or(0);
        Self {
            spec,
            blocks,
            len,
            max_lag,
        }
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    /// Fills `out` with the regression vector at sample `k`.
    pub fn build_into(&self, hist: &LaggedHistory, k: usize, out: &mut Vec<f64>) -> Result<()> {
        if hist.n_neighbors() != self.spec.n_neighbors {
            return Err(Error::Shape {
                what: "history neighbours",
                expected: self.spec.n_neighbors,
                got: hist.n_neighbors(),
            });
        }
        if k < self.max_lag {
            return Err(Error::Underflow {
                index: k,
                lag: self.max_lag,
            });
        }
        out.clear();
        for b in &self.blocks {
            for m in b.lag_min..=b.lag_max {
                let mut v = 1.0;
                for f in &b.factors {
                    v *= hist.value(f.signal, k, m + f.shift)?;
                }
                out.push(v);
            }
        }
        Ok(())
    }

    pub fn build(&self, hist: &LaggedHistory, k: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.len);
        self.build_into(hist, k, &mut out)?;
        Ok(out)
    }
}

/// Regression vector of `spec` at sample `k`.
pub fn build_regressor(spec: &RegressorSpec, hist: &LaggedHistory, k: usize) -> Result<Vec<f64>> {
    RegressorLayout::new(*spec).build(hist, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(s: Structure, n: usize) -> RegressorSpec {
        RegressorSpec::new(s, n).unwrap()
    }

    #[test]
    fn fi_rh_layout() {
        let s = spec(Structure::NrmFiRh, 1);
        assert_eq!(regressor_length(&s), 4);
        let mut h = LaggedHistory::new(1);
        for k in 0..3 {
            h.push(&MeasuredSample {
                t_r: 20.0 + k as f64,
                t_rj: vec![0.0],
                t_w: 30.0 + k as f64,
                tw_in: 40.0 + k as f64,
                ta_in: 15.0,
                vw: 0.05 * (k + 1) as f64,
                va: 0.01,
                qext: 100.0,
            })
            .unwrap();
            h.yhat.push(31.0 + k as f64);
        }
        let phi = build_regressor(&s, &h, 2).unwrap();
        // (yhat(k-1), Vw(k-1) yhat(k-1), Vw(k-1) Tw_in(k-1), T_r(k-1))
        assert_eq!(phi, vec![32.0, 0.1 * 32.0, 0.1 * 41.0, 21.0]);
    }

    #[test]
    fn known_lengths() {
        assert_eq!(regressor_length(&spec(Structure::Lrm, 1)), 21);
        assert_eq!(regressor_length(&spec(Structure::NrmMi, 1)), 26);
        assert_eq!(regressor_length(&spec(Structure::NrmLi, 1)), 26);
        assert_eq!(regressor_length(&spec(Structure::NrmFiZone, 1)), 11);
    }

    #[test]
    fn mi_block_lengths() {
        let lens: Vec<usize> = blocks(&spec(Structure::NrmMi, 1)).iter().map(Block::len).collect();
        assert_eq!(lens, vec![3, 2, 3, 3, 2, 2, 2, 2, 2, 3, 2]);
    }

    #[test]
    fn fi_zone_block_lengths() {
        let lens: Vec<usize> = blocks(&spec(Structure::NrmFiZone, 1)).iter().map(Block::len).collect();
        assert_eq!(lens, vec![2, 1, 2, 2, 2, 2]);
    }

    #[test]
    fn max_lags() {
        assert_eq!(max_lag(&spec(Structure::NrmFiRh, 3)), 1);
        assert_eq!(max_lag(&spec(Structure::NrmFiZone, 1)), 2);
        assert_eq!(max_lag(&spec(Structure::Lrm, 1)), 3);
        assert_eq!(max_lag(&spec(Structure::NrmMi, 2)), 4);
    }

    #[test]
    fn parse_structure_names() {
        for s in Structure::ALL {
            assert_eq!(s.name().parse::<Structure>().unwrap(), s);
        }
        assert!("ARMAX".parse::<Structure>().is_err());
    }

    #[test]
    fn shallow_history_underflows() {
        let s = spec(Structure::Lrm, 1);
        let h = LaggedHistory::new(1);
        assert!(matches!(build_regressor(&s, &h, 2), Err(Error::Underflow { .. })));
        assert!(matches!(build_regressor(&s, &h, 3), Err(Error::Underflow { .. })));
    }

    #[test]
    fn labels_match_length() {
        for st in Structure::ALL {
            for n in 1..4 {
                let s = spec(st, n);
                assert_eq!(entry_labels(&s).len(), regressor_length(&s));
            }
        }
        assert_eq!(entry_labels(&spec(Structure::NrmMi, 1))[13], "Vw(k-2)*yhat(k-1)");
    }
}
