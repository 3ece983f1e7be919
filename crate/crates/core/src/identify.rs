//! Output-error prediction and recursive least-squares training.

use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{fmt_f64, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::regressors::{LaggedHistory, RegressorLayout, RegressorSpec, Structure, Target};
use crate::sim::SECONDS_PER_HOUR;
use crate::thermal::ZoneParams;

/// Dense parameter vector, ordered like the regressor layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: i,
                reason: "non-finite parameter".into(),
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, phi: &[f64]) -> f64 {
        self.0.iter().zip(phi).map(|(a, b)| a * b).sum()
    }

    /// `||self - other|| / ||other||` in the Euclidean norm.
    pub fn relative_error(&self, other: &ThetaVector) -> f64 {
        let num: f64 = self.0.iter().zip(&other.0).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = other.0.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for v in &self.0 {
            writeln!(w, "{v:.17e}").map_err(|e| Error::Csv(e.to_string()))?;
        }
        Ok(())
    }

    pub fn read_text<R: Read>(r: R) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line.map_err(|e| Error::Csv(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            values.push(
                line.parse::<f64>()
                    .map_err(|e| Error::Csv(format!("theta line {}: {e}", i + 1)))?,
            );
        }
        Self::new(values)
    }
}

/// Which prediction is stored for later regressors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feedback {
    /// `phi(k)' theta(k-1)`, the prediction before the update.
    Prior,
    /// `phi(k)' theta(k)`, recomputed after the update.
    #[default]
    Posterior,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlsConfig {
    /// Forgetting factor in (0, 1].
    pub forgetting: f64,
    /// Initial covariance scale.
    pub reg_init: f64,
    /// Rolling-RMSE window, samples.
    pub window: usize,
    pub passes: usize,
    pub feedback: Feedback,
}

impl Default for RlsConfig {
    fn default() -> Self {
        Self {
            forgetting: 0.999,
            reg_init: 1e3,
            window: 2016,
            passes: 3,
            feedback: Feedback::Posterior,
        }
    }
}

impl RlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.forgetting > 0.0 && self.forgetting <= 1.0) {
            return Err(Error::invalid("model.rls.forgetting", "must lie in (0, 1]"));
        }
        if !(self.reg_init.is_finite() && self.reg_init > 0.0) {
            return Err(Error::invalid("model.rls.reg_init", "must be > 0"));
        }
        if self.window < 2 {
            return Err(Error::invalid("model.rls.window", "must be >= 2"));
        }
        Ok(())
    }
}

/// Exponentially weighted RLS state. The covariance is kept in factored
/// form `P = U D U'` (unit upper-triangular `U`, diagonal `D >= 0`), which
/// keeps it symmetric positive semi-definite under rounding.
#[derive(Clone, Debug, PartialEq)]
pub struct RlsState {
    pub theta: DVector<f64>,
    /// Row-major `n x n` unit upper-triangular factor.
    u: Vec<f64>,
    d: Vec<f64>,
    pub forgetting: f64,
    pub reg_init: f64,
    /// Number of updates applied so far.
    pub k: usize,
    scratch: Vec<f64>,
}

impl RlsState {
    pub fn new(theta0: &ThetaVector, forgetting: f64, reg_init: f64) -> Self {
        let n = theta0.len();
        let mut u = vec![0.0; n * n];
        for i in 0..n {
            u[i * n + i] = 1.0;
        }
        Self {
            theta: DVector::from_column_slice(theta0.as_slice()),
            u,
            d: vec![reg_init; n],
            forgetting,
            reg_init,
            k: 0,
            scratch: vec![0.0; 3 * n],
        }
    }

    pub fn theta(&self) -> ThetaVector {
        ThetaVector(self.theta.as_slice().to_vec())
    }

    pub fn predict(&self, phi: &[f64]) -> f64 {
        self.theta.iter().zip(phi).map(|(a, b)| a * b).sum()
    }

    /// Covariance `P = U D U'`.
    pub fn p_matrix(&self) -> DMatrix<f64> {
        let n = self.d.len();
        let u = DMatrix::from_row_slice(n, n, &self.u);
        &u * DMatrix::from_diagonal(&DVector::from_column_slice(&self.d)) * u.transpose()
    }
}

/// One exponentially weighted RLS step on `(phi, y)`:
/// `g = P phi / (lambda + phi' P phi)`, `theta += g e`,
/// `P = (P - g phi' P) / lambda`, evaluated with Bierman's factored update.
/// Returns the a-priori error `e = y - phi' theta`.
#[allow(clippy::needless_range_loop)]
pub fn rls_update(s: &mut RlsState, phi: &[f64], y: f64) -> Result<f64> {
    let n = s.theta.len();
    if phi.len() != n {
        return Err(Error::Shape {
            what: "regressor",
            expected: n,
            got: phi.len(),
        });
    }
    let step = s.k;
    s.k += 1;
    let e = y - s.predict(phi);
    if !e.is_finite() {
        return Err(Error::Numerical {
            step,
            reason: format!("non-finite prediction error {e}"),
        });
    }
    if phi.iter().all(|v| *v == 0.0) {
        return Ok(e);
    }

    let lambda = s.forgetting;
    let (f, rest) = s.scratch.split_at_mut(n);
    let (v, gain) = rest.split_at_mut(n);
    // f = U' phi, v = D f
    for j in 0..n {
        let mut acc = phi[j];
        for i in 0..j {
            acc += s.u[i * n + j] * phi[i];
        }
        f[j] = acc;
        v[j] = s.d[j] * acc;
    }
    let mut beta = lambda;
    for j in 0..n {
        let beta_prev = beta;
        beta += f[j] * v[j];
        s.d[j] *= beta_prev / (beta * lambda);
        let mu = -f[j] / beta_prev;
        for i in 0..j {
            let uij = s.u[i * n + j];
            s.u[i * n + j] = uij + gain[i] * mu;
            gain[i] += uij * v[j];
        }
        gain[j] = v[j];
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Numerical {
            step,
            reason: format!("RLS denominator {beta}"),
        });
    }
    let scale = e / beta;
    for (t, g) in s.theta.iter_mut().zip(gain.iter()) {
        *t += g * scale;
    }
    if s.theta.iter().any(|v| !v.is_finite()) || s.d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            step,
            reason: "non-finite RLS state".into(),
        });
    }
    Ok(e)
}

/// Seeds the prediction column with measured values for the warm-up samples.
fn warm_up(hist: &mut LaggedHistory, target: Target, warm: usize) {
    let y = hist.target(target);
    let seed = y[..warm.min(y.len())].to_vec();
    hist.yhat.clear();
    hist.yhat.extend(seed);
}

/// Fills the radiator-prediction column with the measured water temperature
/// when no model predictions were supplied.
fn ensure_rh_column(hist: &mut LaggedHistory) {
    if hist.yhat_w.len() < hist.len() {
        hist.yhat_w = hist.t_w.clone();
    }
}

/// `phi(k, theta)' theta`; past outputs come from `hist.yhat`.
pub fn oe_predict(theta: &ThetaVector, spec: &RegressorSpec, hist: &LaggedHistory, k: usize) -> Result<f64> {
    let layout = RegressorLayout::new(*spec);
    check_theta(theta, &layout)?;
    let phi = layout.build(hist, k)?;
    Ok(theta.dot(&phi))
}

fn check_theta(theta: &ThetaVector, layout: &RegressorLayout) -> Result<()> {
    if theta.len() != layout.len() {
        return Err(Error::Shape {
            what: "theta",
            expected: layout.len(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// Free-run output-error simulation over the whole history: measured outputs
/// for the warm-up samples, then predictions fed back. Returns the
/// prediction column (also left in `hist.yhat`).
pub fn oe_simulate(theta: &ThetaVector, spec: &RegressorSpec, hist: &mut LaggedHistory) -> Result<Vec<f64>> {
    let layout = RegressorLayout::new(*spec);
    check_theta(theta, &layout)?;
    if spec.structure == Structure::NrmFiZone {
        ensure_rh_column(hist);
    }
    let n = hist.len();
    warm_up(hist, spec.target(), layout.max_lag());
    let mut phi = Vec::with_capacity(layout.len());
    for k in layout.max_lag()..n {
        layout.build_into(hist, k, &mut phi)?;
        let y = theta.dot(&phi);
        if !y.is_finite() {
            return Err(Error::Numerical {
                step: k,
                reason: "non-finite output-error prediction".into(),
            });
        }
        hist.yhat.push(y);
    }
    Ok(hist.yhat.clone())
}

/// Outcome of [`train`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub spec: RegressorSpec,
    /// Sample indices of the final pass that entered the loss.
    pub k: Vec<usize>,
    /// A-priori one-step errors `y(k) - phi(k)' theta(k-1)` of the final pass.
    pub errors: Vec<f64>,
    pub rolling_rmse: Vec<f64>,
    /// RMSE of the a-priori errors over each whole pass.
    pub pass_rmse: Vec<f64>,
    pub window: usize,
    pub theta: ThetaVector,
    pub rls: Option<RlsState>,
}

impl TrainReport {
    /// Last value of the rolling RMSE, or `NaN` if no sample was scored.
    pub fn final_rmse(&self) -> f64 {
        self.rolling_rmse.last().copied().unwrap_or(f64::NAN)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(["k", "e", "rolling_rmse"]).map_err(csv_err)?;
        for i in 0..self.errors.len() {
            wr.write_record([
                self.k[i].to_string(),
                fmt_f64(self.errors[i]),
                fmt_f64(self.rolling_rmse[i]),
            ])
            .map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

/// RMSE over a trailing window of `window` samples (shorter at the start).
pub fn rolling_rmse(errors: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(errors.len());
    let mut acc = 0.0;
    for (i, e) in errors.iter().enumerate() {
        acc += e * e;
        if i >= window {
            acc -= errors[i - window] * errors[i - window];
        }
        let n = (i + 1).min(window);
        out.push((acc.max(0.0) / n as f64).sqrt());
    }
    out
}

/// Sequential RLS over `ds`, repeated `cfg.passes` times, starting at zero.
pub fn train(ds: &TimeSeriesDataset, spec: &RegressorSpec, cfg: &RlsConfig) -> Result<TrainReport> {
    let hist = LaggedHistory::from_dataset(ds);
    let theta0 = ThetaVector::zeros(RegressorLayout::new(*spec).len());
    train_history(hist, spec, cfg, &theta0)
}

/// [`train`] on a prepared history and initial parameters. If the spec uses
/// predicted radiator temperatures and `hist.yhat_w` is empty, the measured
/// water temperature is used instead.
pub fn train_history(
    mut hist: LaggedHistory,
    spec: &RegressorSpec,
    cfg: &RlsConfig,
    theta0: &ThetaVector,
) -> Result<TrainReport> {
    cfg.validate()?;
    let layout = RegressorLayout::new(*spec);
    check_theta(theta0, &layout)?;
    if hist.n_neighbors() != spec.n_neighbors {
        return Err(Error::Shape {
            what: "dataset neighbours",
            expected: spec.n_neighbors,
            got: hist.n_neighbors(),
        });
    }
    if spec.structure == Structure::NrmFiZone {
        ensure_rh_column(&mut hist);
    }
    let target = spec.target();
    let warm = layout.max_lag();
    let y: Vec<f64> = hist.target(target).to_vec();

    let mut state = RlsState::new(theta0, cfg.forgetting, cfg.reg_init);
    let mut errors = Vec::new();
    let mut ks = Vec::new();
    let mut pass_rmse = Vec::with_capacity(cfg.passes);
    let mut phi = Vec::with_capacity(layout.len());

    for _ in 0..cfg.passes {
        warm_up(&mut hist, target, warm);
        errors.clear();
        ks.clear();
        for (k, &yk) in y.iter().enumerate().skip(warm) {
            layout.build_into(&hist, k, &mut phi)?;
            let e = rls_update(&mut state, &phi, yk)?;
            let yhat = match cfg.feedback {
                Feedback::Prior => yk - e,
                Feedback::Posterior => state.predict(&phi),
            };
            if !yhat.is_finite() {
                return Err(Error::Numerical {
                    step: k,
                    reason: "non-finite output-error prediction".into(),
                });
            }
            hist.yhat.push(yhat);
            errors.push(e);
            ks.push(k);
        }
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / errors.len().max(1) as f64;
        pass_rmse.push(mse.sqrt());
    }

    Ok(TrainReport {
        spec: *spec,
        rolling_rmse: rolling_rmse(&errors, cfg.window),
        k: ks,
        errors,
        pass_rmse,
        window: cfg.window,
        theta: state.theta(),
        rls: (cfg.passes > 0).then_some(state),
    })
}

/// `sum_k phi(k) phi(k)'` over the scored samples, with outputs taken from
/// `hist.yhat`.
pub fn information_matrix(spec: &RegressorSpec, hist: &LaggedHistory) -> Result<DMatrix<f64>> {
    let layout = RegressorLayout::new(*spec);
    let n = layout.len();
    let mut m = DMatrix::zeros(n, n);
    let mut phi = Vec::with_capacity(n);
    for k in layout.max_lag()..hist.yhat.len().min(hist.len()) {
        layout.build_into(hist, k, &mut phi)?;
        let v = DVector::from_column_slice(&phi);
        m.ger(1.0, &v, &v, 1.0);
    }
    Ok(m)
}

/// Radiator-loop parameters implied by the plant, first-order in `epsilon`
/// (hours), ordered like the `NRM_FI_RH` regressor.
pub fn physical_rh_theta(params: &ZoneParams, epsilon: f64) -> ThetaVector {
    let eps = epsilon * SECONDS_PER_HOUR;
    let c_w = params.rh.capacitance();
    let a_w = 1.0 / (c_w * params.rh.r_c);
    let b = params.rh.c_w_medium / c_w;
    ThetaVector(vec![1.0 - eps * a_w, -eps * b, eps * b, eps * a_w])
}
