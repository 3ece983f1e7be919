//! Delay-operator algebra on sampled signals.
//!
//! An operator is a finite polynomial `c_0 + c_1 q^-1 + ... + c_n q^-n` in
//! the one-step delay `q^-1`, whose coefficients may vary with time. For a
//! time-varying coefficient the value used at output index `k` is taken
//! from a trace (for instance `a_wc` evaluated on the water flow).
//! Composition follows the operand: in `A{B{x}}(k) = sum_m a_m(k) B{x}(k-m)`
//! the inner operator sees the shifted index `k - m`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Const(f64),
    /// Value at output index `k` is `values[k - lag]`.
    Varying {
        values: Vec<f64>,
        lag: usize,
    },
}

impl Coefficient {
    fn at(&self, k: usize) -> Result<f64> {
        match self {
            Coefficient::Const(c) => Ok(*c),
            Coefficient::Varying { values, lag } => {
                let i = k.checked_sub(*lag).ok_or(Error::Underflow { index: k, lag: *lag })?;
                values.get(i).copied().ok_or(Error::Shape {
                    what: "coefficient trace",
                    expected: i + 1,
                    got: values.len(),
                })
            }
        }
    }

    fn is_const(&self) -> bool {
        matches!(self, Coefficient::Const(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DelayPolynomialOp {
    coeffs: Vec<Coefficient>,
}

impl DelayPolynomialOp {
    pub fn new(coeffs: Vec<Coefficient>) -> Self {
        assert!(!coeffs.is_empty(), "operator needs at least one coefficient");
        Self { coeffs }
    }

    pub fn identity() -> Self {
        Self::constant(&[1.0])
    }

    pub fn constant(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|c| Coefficient::Const(*c)).collect())
    }

    /// `Q_s = 1 - (1 + eps a_s) q^-1` for a separator.
    pub fn separator(eps: f64, a_s: f64) -> Self {
        Self::constant(&[1.0, -(1.0 + eps * a_s)])
    }

    /// `P = (1 + eps a) q^-1`.
    pub fn shift_gain(eps: f64, a: f64) -> Self {
        Self::constant(&[0.0, 1.0 + eps * a])
    }

    /// `Q_wc = 1 - (1 + eps a_wc(k - lag)) q^-1` for the radiator loop,
    /// with `a_wc` given as a trace over sample indices.
    pub fn water(eps: f64, a_wc: &[f64], lag: usize) -> Self {
        Self::new(vec![
            Coefficient::Const(1.0),
            Coefficient::Varying {
                values: a_wc.iter().map(|a| -(1.0 + eps * a)).collect(),
                lag,
            },
        ])
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_time_invariant(&self) -> bool {
        self.coeffs.iter().all(Coefficient::is_const)
    }

    /// Constant coefficients, if the operator is time-invariant.
    pub fn constant_coefficients(&self) -> Option<Vec<f64>> {
        self.coeffs
            .iter()
            .map(|c| match c {
                Coefficient::Const(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    pub fn coefficient(&self, m: usize, k: usize) -> Result<f64> {
        self.coeffs[m].at(k)
    }
}

/// Applies `op` to `signal` at index `k`.
pub fn apply_op(op: &DelayPolynomialOp, signal: &[f64], k: usize) -> Result<f64> {
    apply_chain(&[op], signal, k)
}

/// `ops[0]{ops[1]{ ... {x} }}(k)`.
pub fn apply_chain(ops: &[&DelayPolynomialOp], signal: &[f64], k: usize) -> Result<f64> {
    let depth: usize = ops.iter().map(|o| o.order()).sum();
    if k < depth {
        return Err(Error::Underflow { index: k, lag: depth });
    }
    if k >= signal.len() {
        return Err(Error::Shape {
            what: "signal",
            expected: k + 1,
            got: signal.len(),
        });
    }
    chain_unchecked(ops, signal, k)
}

fn chain_unchecked(ops: &[&DelayPolynomialOp], signal: &[f64], k: usize) -> Result<f64> {
    let Some((outer, rest)) = ops.split_first() else {
        return Ok(signal[k]);
    };
    let mut acc = 0.0;
    for m in 0..=outer.order() {
        let c = outer.coefficient(m, k)?;
        if c != 0.0 {
            acc += c * chain_unchecked(rest, signal, k - m)?;
        }
    }
    Ok(acc)
}

/// Largest `|A{B{x}}(k) - B{A{x}}(k)|` over all admissible `k`.
pub fn verify_property_1(a: &DelayPolynomialOp, b: &DelayPolynomialOp, signal: &[f64]) -> Result<f64> {
    let start = a.order() + b.order();
    let mut worst = 0.0f64;
    for k in start..signal.len() {
        let ab = apply_chain(&[a, b], signal, k)?;
        let ba = apply_chain(&[b, a], signal, k)?;
        worst = worst.max((ab - ba).abs());
    }
    Ok(worst)
}

/// Commutator correction `(1 + eps a_s) eps (a_wc(k-lag) - a_wc(k-1-lag)) x(k-2)`.
pub fn property_2_correction(a_wc: &[f64], a_s: f64, eps: f64, signal: &[f64], lag: usize, k: usize) -> Result<f64> {
    if k < lag + 2 {
        return Err(Error::Underflow { index: k, lag: lag + 2 });
    }
    let now = a_wc[k - lag];
    let before = a_wc[k - 1 - lag];
    Ok((1.0 + eps * a_s) * eps * (now - before) * signal[k - 2])
}

/// Largest `|Q_s Q_wc{x} - (Q_wc Q_s{x} - correction)|`, where `Q_wc` reads
/// its coefficient from `a_wc[k - lag]`.
pub fn verify_property_2(a_wc: &[f64], a_s: f64, eps: f64, signal: &[f64], lag: usize) -> Result<f64> {
    if signal.len() < 4 {
        return Err(Error::Shape {
            what: "signal",
            expected: 4,
            got: signal.len(),
        });
    }
    let qs = DelayPolynomialOp::separator(eps, a_s);
    let qwc = DelayPolynomialOp::water(eps, a_wc, lag);
    let mut worst = 0.0f64;
    for k in (lag + 2)..signal.len() {
        let lhs = apply_chain(&[&qs, &qwc], signal, k)?;
        let rhs = apply_chain(&[&qwc, &qs], signal, k)? - property_2_correction(a_wc, a_s, eps, signal, lag, k)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Result of expanding a product of separator operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    /// `alpha[0]` multiplies `x(k)`; `alpha[m]` multiplies `x(k-m)`.
    pub alpha: Vec<f64>,
    /// Largest deviation between the chained operators and the expansion.
    pub residual: f64,
}

/// Recovers the constants of `prod Q_s{x}(k) = x(k) + sum_m alpha_m x(k-m)`
/// from unit impulses, then checks the expansion against the chained
/// operators on `signal`.
pub fn verify_property_3(ops: &[DelayPolynomialOp], signal: &[f64]) -> Result<Expansion> {
    let refs: Vec<&DelayPolynomialOp> = ops.iter().collect();
    let depth: usize = ops.iter().map(|o| o.order()).sum();
    let alpha = (0..=depth)
        .map(|m| {
            let mut impulse = vec![0.0; depth + 1];
            impulse[depth - m] = 1.0;
            apply_chain(&refs, &impulse, depth)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut residual = 0.0f64;
    for k in depth..signal.len() {
        let direct = apply_chain(&refs, signal, k)?;
        let expanded: f64 = alpha.iter().enumerate().map(|(m, a)| a * signal[k - m]).sum();
        residual = residual.max((direct - expanded).abs());
    }
    Ok(Expansion { alpha, residual })
}
