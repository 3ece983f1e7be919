//! Periodograms and persistence-of-excitation order of sampled signals.

use std::io::Write;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::dataset::{fmt_f64, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::regressors::{RegressorSpec, Structure};

/// Default line-detection threshold, relative to the strongest bin.
pub const DEFAULT_REL_THRESHOLD: f64 = 1e-4;

/// Shortest signal [`spectrum`] accepts.
pub const MIN_SIGNAL_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralLine {
    pub bin: usize,
    /// Cycles per sample.
    pub freq: f64,
    pub power: f64,
}

/// One-sided periodogram over `[0, 1/2]` cycles per sample, scaled so that
/// the powers add up to the signal energy `sum x^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub freq: Vec<f64>,
    pub power: Vec<f64>,
    pub lines: Vec<SpectralLine>,
    /// Threshold relative to the strongest bin.
    pub rel_threshold: f64,
    pub n_samples: usize,
}

impl SpectrumReport {
    pub fn has_dc(&self) -> bool {
        self.lines.first().is_some_and(|l| l.bin == 0)
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    /// Frequency grid in cycles per hour for sampling period `epsilon` hours.
    pub fn freq_per_hour(&self, epsilon: f64) -> Vec<f64> {
        self.freq.iter().map(|f| f / epsilon).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(["freq", "power"]).map_err(csv_err)?;
        for (f, p) in self.freq.iter().zip(&self.power) {
            wr.write_record([fmt_f64(*f), fmt_f64(*p)]).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))
    }
}

pub fn spectrum(signal: &[f64]) -> Result<SpectrumReport> {
    spectrum_with(signal, DEFAULT_REL_THRESHOLD)
}

/// Periodogram with lines detected above `rel_threshold * max power`.
///
/// Bins above the threshold form runs; each local maximum inside a run is
/// one line, so leakage skirts around a peak do not count separately.
pub fn spectrum_with(signal: &[f64], rel_threshold: f64) -> Result<SpectrumReport> {
    let n = signal.len();
    if n < MIN_SIGNAL_LEN {
        return Err(Error::Shape {
            what: "spectrum signal",
            expected: MIN_SIGNAL_LEN,
            got: n,
        });
    }
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::invalid("rel_threshold", "must lie in (0, 1)"));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical {
            step: 0,
            reason: "non-finite sample in spectrum input".into(),
        });
    }

    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let power: Vec<f64> = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / n as f64;
            if k == 0 || (n.is_multiple_of(2) && k == half) {
                p
            } else {
                2.0 * p
            }
        })
        .collect();
    let freq: Vec<f64> = (0..=half).map(|k| k as f64 / n as f64).collect();

    let max = power.iter().cloned().fold(0.0, f64::max);
    let mut lines = Vec::new();
    if max > 0.0 {
        let thr = rel_threshold * max;
        let above = |i: usize| power[i] > thr;
        for i in 0..power.len() {
            if !above(i) {
                continue;
            }
            let rising = i == 0 || !above(i - 1) || power[i] > power[i - 1];
            let peak = i + 1 == power.len() || !above(i + 1) || power[i] >= power[i + 1];
            if rising && peak {
                lines.push(SpectralLine {
                    bin: i,
                    freq: freq[i],
                    power: power[i],
                });
            }
        }
    }

    Ok(SpectrumReport {
        freq,
        power,
        lines,
        rel_threshold,
        n_samples: n,
    })
}

/// `2 * lines - 1` if a line sits at DC, else `2 * lines`.
pub fn pe_order(report: &SpectrumReport) -> usize {
    let n = 2 * report.line_count();
    if report.has_dc() {
        n - 1
    } else {
        n
    }
}

/// Order required for a model with `n_neighbors` neighbours.
pub fn required_order(n_neighbors: usize, has_dc: bool) -> usize {
    2 * (n_neighbors + 2) - usize::from(has_dc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnCheck {
    pub column: String,
    pub lines: usize,
    pub has_dc: bool,
    pub order: usize,
    pub required: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InformativityReport {
    pub columns: Vec<ColumnCheck>,
    pub pass: bool,
}

/// Input and disturbance columns the structure's regressor reads.
pub fn relevant_columns(spec: &RegressorSpec) -> Vec<String> {
    let neighbours = (1..=spec.n_neighbors).map(|j| format!("T_rj_{j}"));
    let fixed: &[&str] = match spec.structure {
        Structure::Lrm | Structure::NrmMi => &["Vw", "Va", "Tw_in", "Ta_in", "Qext"],
        Structure::NrmLi => &["Vw", "Va", "Qext"],
        Structure::NrmFiZone => &["Va", "Ta_in", "Qext"],
        Structure::NrmFiRh => return vec!["Vw".into(), "Tw_in".into()],
    };
    neighbours.chain(fixed.iter().map(|s| s.to_string())).collect()
}

pub fn informativity_check(ds: &TimeSeriesDataset, spec: &RegressorSpec) -> Result<InformativityReport> {
    informativity_check_with(ds, spec, DEFAULT_REL_THRESHOLD)
}

pub fn informativity_check_with(
    ds: &TimeSeriesDataset,
    spec: &RegressorSpec,
    rel_threshold: f64,
) -> Result<InformativityReport> {
    if ds.is_empty() {
        return Err(Error::Shape {
            what: "dataset",
            expected: 1,
            got: 0,
        });
    }
    let mut columns = Vec::new();
    for name in relevant_columns(spec) {
        let col = ds
            .column(&name)
            .ok_or_else(|| Error::Config(format!("dataset has no column {name}")))?;
        let rep = spectrum_with(col, rel_threshold)?;
        let order = pe_order(&rep);
        let required = required_order(spec.n_neighbors, rep.has_dc());
        columns.push(ColumnCheck {
            column: name,
            lines: rep.line_count(),
            has_dc: rep.has_dc(),
            order,
            required,
            pass: order >= required,
        });
    }
    let pass = columns.iter().all(|c| c.pass);
    Ok(InformativityReport { columns, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(n: usize, bin: f64, amp: f64) -> Vec<f64> {
        (0..n)
            .map(|k| amp * (2.0 * PI * bin * k as f64 / n as f64).sin())
            .collect()
    }

    #[test]
    fn too_short() {
        assert!(spectrum(&[1.0; 7]).is_err());
    }

    #[test]
    fn zero_signal_has_no_lines() {
        let r = spectrum(&[0.0; 64]).unwrap();
        assert_eq!(r.line_count(), 0);
        assert_eq!(pe_order(&r), 0);
    }

    #[test]
    fn bin_tone_is_one_line() {
        let r = spectrum(&tone(256, 10.0, 1.0)).unwrap();
        assert_eq!(r.line_count(), 1);
        assert_eq!(r.lines[0].bin, 10);
        assert!(!r.has_dc());
    }

    #[test]
    fn off_bin_tone_leakage_is_one_line() {
        let r = spectrum(&tone(500, 17.37, 2.0)).unwrap();
        assert_eq!(r.line_count(), 1);
    }

    #[test]
    fn odd_length_parseval() {
        let x: Vec<f64> = (0..101).map(|k| (k as f64 * 0.37).sin() + 0.2).collect();
        let r = spectrum(&x).unwrap();
        let e: f64 = x.iter().map(|v| v * v).sum();
        assert!((r.power.iter().sum::<f64>() - e).abs() < 1e-9 * e);
    }
}
