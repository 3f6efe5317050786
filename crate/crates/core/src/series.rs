//! Time-series containers, time augmentation and the median heuristic.

use std::fmt::Write as _;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered sequence of `d`-dimensional observations with strictly
/// increasing timestamps. Values are stored row-major, one row per time step.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

impl TimeSeries {
    /// Builds a series from timestamps and row-major values.
    pub fn from_flat(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSeries("zero channels".into()));
        }
        if times.is_empty() {
            return Err(Error::InvalidSeries("empty series".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidSeries(format!(
                "{} values do not fill {} steps of {} channels",
                values.len(),
                times.len(),
                dim
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries("non-finite entry".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSeries("times must be strictly increasing".into()));
        }
        Ok(Self { times, values, dim })
    }

    pub fn new(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidSeries("ragged rows".into()));
        }
        Self::from_flat(times, rows.concat(), dim)
    }

    /// Series on the regular grid `0, 1, …, n-1`.
    pub fn regular(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new((0..rows.len()).map(|i| i as f64).collect(), rows)
    }

    /// One-channel series on the regular grid.
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::from_flat((0..values.len()).map(|i| i as f64).collect(), values.to_vec(), 1)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.rows().map(|r| r[c]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Writes one row per time step: `time,ch0,ch1,…`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for c in 0..self.dim {
            let _ = write!(out, ",ch{c}");
        }
        out.push('\n');
        for (t, row) in self.times.iter().zip(self.rows()) {
            let _ = write!(out, "{t}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
        let dim = header.split(',').count().saturating_sub(1);
        let mut times = Vec::new();
        let mut values = Vec::new();
        for line in lines {
            let mut fields = line.split(',').map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("{f:?}: {e}")))
            });
            times.push(fields.next().ok_or_else(|| Error::Parse("missing time".into()))??);
            let row = fields.collect::<Result<Vec<_>>>()?;
            if row.len() != dim {
                return Err(Error::Parse(format!("expected {dim} channels, got {}", row.len())));
            }
            values.extend(row);
        }
        Self::from_flat(times, values, dim)
    }
}

/// A parameter point θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Simulated corpus of `(x, θ)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub entries: Vec<(TimeSeries, ParameterVector)>,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    theta: Vec<f64>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DatasetJson {
    seed: u64,
    entries: Vec<EntryJson>,
}

impl Dataset {
    pub fn new(entries: Vec<(TimeSeries, ParameterVector)>, seed: u64) -> Result<Self> {
        if let Some((x0, t0)) = entries.first() {
            for (x, t) in &entries {
                if x.dim() != x0.dim() {
                    return Err(Error::InvalidDataset("channel dimensions differ".into()));
                }
                if t.len() != t0.len() {
                    return Err(Error::InvalidDataset("parameter dimensions differ".into()));
                }
            }
        }
        Ok(Self { entries, seed })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn series(&self, i: usize) -> &TimeSeries {
        &self.entries[i].0
    }

    pub fn theta(&self, i: usize) -> &ParameterVector {
        &self.entries[i].1
    }

    pub fn to_json(&self) -> Result<String> {
        let json = DatasetJson {
            seed: self.seed,
            entries: self
                .entries
                .iter()
                .map(|(x, t)| EntryJson {
                    theta: t.0.clone(),
                    times: x.times().to_vec(),
                    values: x.to_rows(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&json)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: DatasetJson = serde_json::from_str(text)?;
        let entries = json
            .entries
            .into_iter()
            .map(|e| Ok((TimeSeries::new(e.times, &e.values)?, ParameterVector(e.theta))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries, json.seed)
    }
}

/// Prepends a time channel rescaled to `[0, 1]`.
pub fn time_augment(s: &TimeSeries) -> TimeSeries {
    let t0 = s.times[0];
    let span = s.times[s.len() - 1] - t0;
    let d = s.dim + 1;
    let mut values = Vec::with_capacity(s.len() * d);
    for (t, row) in s.times.iter().zip(s.rows()) {
        values.push(if span > 0.0 { (t - t0) / span } else { 0.0 });
        values.extend_from_slice(row);
    }
    TimeSeries {
        times: s.times.clone(),
        values,
        dim: d,
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median of squared Euclidean distances over unordered pairs `i < j`.
pub fn median_pairwise_sq_dist(s: &TimeSeries) -> Result<f64> {
    let n = s.len();
    if n < 2 {
        return Err(Error::TooFewPoints(n));
    }
    let mut d = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(s.row(i), s.row(j)));
        }
    }
    let m = median(&mut d);
    if m > 0.0 {
        Ok(m)
    } else if d.iter().all(|&v| v == 0.0) {
        Err(Error::DegenerateScale)
    } else {
        // more than half the pairs coincide; fall back to the smallest positive gap
        Ok(d.into_iter().find(|&v| v > 0.0).unwrap_or(f64::MIN_POSITIVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn augment_two_points() {
        let s = TimeSeries::new(vec![0.0, 1.0], &[vec![5.0], vec![7.0]]).unwrap();
        let a = time_augment(&s);
        assert_eq!(a.to_rows(), vec![vec![0.0, 5.0], vec![1.0, 7.0]]);
    }

    #[test]
    fn augment_rescales_grid() {
        let s = TimeSeries::new(vec![2.0, 4.0, 6.0], &[vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        let a = time_augment(&s);
        assert_eq!(a.dim(), 2);
        assert_eq!(a.channel(0), vec![0.0, 0.5, 1.0]);
        let aa = time_augment(&a);
        assert_eq!(aa.dim(), 3);
        assert_eq!(aa.channel(0), aa.channel(1));
        assert_eq!(aa.len(), 3);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_pairwise_sq_dist(&TimeSeries::scalar(&[0.0, 3.0]).unwrap()).unwrap(), 9.0);
        assert_eq!(
            median_pairwise_sq_dist(&TimeSeries::scalar(&[0.0, 1.0, 2.0]).unwrap()).unwrap(),
            1.0
        );
        assert_eq!(
            median_pairwise_sq_dist(&TimeSeries::scalar(&[2.0, 2.0, 2.0]).unwrap()),
            Err(Error::DegenerateScale)
        );
    }

    #[test]
    fn rejects_bad_times() {
        assert!(TimeSeries::new(vec![0.0, 0.0], &[vec![1.0], vec![2.0]]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], &[vec![f64::NAN], vec![2.0]]).is_err());
    }

    #[test]
    fn csv_and_json_roundtrip() {
        let s = TimeSeries::new(vec![0.0, 0.5, 1.5], &[vec![1.0, -2.0], vec![0.25, 3.0], vec![9.0, 1e-3]])
            .unwrap();
        assert_eq!(TimeSeries::from_csv(&s.to_csv()).unwrap(), s);
        let d = Dataset::new(vec![(s.clone(), ParameterVector(vec![0.1, 0.2]))], 7).unwrap();
        assert_eq!(Dataset::from_json(&d.to_json().unwrap()).unwrap(), d);
    }

    #[test]
    fn dataset_rejects_mixed_dims() {
        let a = TimeSeries::scalar(&[0.0, 1.0]).unwrap();
        let b = TimeSeries::regular(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let r = Dataset::new(
            vec![(a, ParameterVector(vec![0.0])), (b, ParameterVector(vec![0.0]))],
            0,
        );
        assert!(r.is_err());
    }
}
