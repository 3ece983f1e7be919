//! Sampled records of a zone experiment and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// One column per measured quantity, indexed by sample `k`.
///
/// The column set is the full-information sensor set: everything except
/// the separator temperatures. Reduced information structures only look
/// at a subset of the columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesDataset {
    /// Sampling period, h.
    pub epsilon: f64,
    pub t_hours: Vec<f64>,
    pub t_r: Vec<f64>,
    /// One column per neighbour.
    pub t_rj: Vec<Vec<f64>>,
    pub t_w: Vec<f64>,
    pub tw_in: Vec<f64>,
    pub ta_in: Vec<f64>,
    pub vw: Vec<f64>,
    pub va: Vec<f64>,
    pub qext: Vec<f64>,
    pub occ: Vec<f64>,
}

/// Format used for every floating-point CSV field: 9 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

impl TimeSeriesDataset {
    pub fn with_capacity(epsilon: f64, n_neighbors: usize, cap: usize) -> Self {
        let col = || Vec::with_capacity(cap);
        Self {
            epsilon,
            t_hours: col(),
            t_r: col(),
            t_rj: (0..n_neighbors).map(|_| col()).collect(),
            t_w: col(),
            tw_in: col(),
            ta_in: col(),
            vw: col(),
            va: col(),
            qext: col(),
            occ: col(),
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

    pub fn column_names(n_neighbors: usize) -> Vec<String> {
        let mut names = vec!["k".to_string(), "t_hours".into(), "T_r".into()];
        names.extend((1..=n_neighbors).map(|j| format!("T_rj_{j}")));
        names.extend(
            ["T_w", "Tw_in", "Ta_in", "Vw", "Va", "Qext", "occ"]
                .iter()
                .map(|s| s.to_string()),
        );
        names
    }

    /// Named view of a column, using the CSV header names.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let c = match name {
            "t_hours" => &self.t_hours,
            "T_r" => &self.t_r,
            "T_w" => &self.t_w,
            "Tw_in" => &self.tw_in,
            "Ta_in" => &self.ta_in,
            "Vw" => &self.vw,
            "Va" => &self.va,
            "Qext" => &self.qext,
            "occ" => &self.occ,
            other => {
                let j: usize = other.strip_prefix("T_rj_")?.parse().ok()?;
                return self.t_rj.get(j.checked_sub(1)?).map(Vec::as_slice);
            }
        };
        Some(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let mut cols: Vec<(&str, usize)> = vec![
            ("t_hours", self.t_hours.len()),
            ("T_w", self.t_w.len()),
            ("Tw_in", self.tw_in.len()),
            ("Ta_in", self.ta_in.len()),
            ("Vw", self.vw.len()),
            ("Va", self.va.len()),
            ("Qext", self.qext.len()),
            ("occ", self.occ.len()),
        ];
        cols.extend(self.t_rj.iter().map(|c| ("T_rj", c.len())));
        for (what, len) in cols {
            if len != n {
                return Err(Error::Csv(format!("column {what} has {len} rows, T_r has {n}")));
            }
        }
        if self.t_hours.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Csv("time index is not strictly increasing".into()));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        wr.write_record(Self::column_names(self.n_neighbors()))
            .map_err(csv_err)?;
        for k in 0..self.len() {
            let mut rec = vec![k.to_string(), fmt_f64(self.t_hours[k]), fmt_f64(self.t_r[k])];
            rec.extend(self.t_rj.iter().map(|c| fmt_f64(c[k])));
            for c in [
                &self.t_w,
                &self.tw_in,
                &self.ta_in,
                &self.vw,
                &self.va,
                &self.qext,
                &self.occ,
            ] {
                rec.push(fmt_f64(c[k]));
            }
            wr.write_record(&rec).map_err(csv_err)?;
        }
        wr.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let n_neighbors = header.iter().filter(|h| h.starts_with("T_rj_")).count();
        let expected = Self::column_names(n_neighbors);
        if header != expected {
            return Err(Error::Csv(format!(
                "unexpected header {header:?}, expected {expected:?}"
            )));
        }
        let mut ds = Self::with_capacity(0.0, n_neighbors, 0);
        for (row, rec) in rd.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let field = |i: usize| -> Result<f64> {
                rec[i]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {row}, column {}: {e}", expected[i])))
            };
            ds.t_hours.push(field(1)?);
            ds.t_r.push(field(2)?);
            for j in 0..n_neighbors {
                ds.t_rj[j].push(field(3 + j)?);
            }
            let base = 3 + n_neighbors;
            ds.t_w.push(field(base)?);
            ds.tw_in.push(field(base + 1)?);
            ds.ta_in.push(field(base + 2)?);
            ds.vw.push(field(base + 3)?);
            ds.va.push(field(base + 4)?);
            ds.qext.push(field(base + 5)?);
            ds.occ.push(field(base + 6)?);
        }
        if let (Some(first), Some(last)) = (ds.t_hours.first(), ds.t_hours.last()) {
            if ds.t_hours.len() >= 2 {
                ds.epsilon = (last - first) / (ds.t_hours.len() - 1) as f64;
            }
        }
        ds.validate()?;
        Ok(ds)
    }
}
