//! Sample files: one row per draw, columns `theta_0..theta_{d-1}` and an
//! optional trailing `weight`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use sigre_core::ParameterVector;

/// Weighted sample set; `weights` is `None` for equally weighted draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub points: Vec<ParameterVector>,
    pub weights: Option<Vec<f64>>,
}

impl Samples {
    pub fn uniform(points: Vec<ParameterVector>) -> Self {
        Self { points, weights: None }
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }

    /// Weights, with equal weights filled in when absent.
    pub fn weights_or_uniform(&self) -> Vec<f64> {
        self.weights
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.points.len() as f64; self.points.len()])
    }

    pub fn mean(&self) -> Vec<f64> {
        let w = self.weights_or_uniform();
        let total: f64 = w.iter().sum();
        let mut m = vec![0.0; self.dim()];
        for (p, wi) in self.points.iter().zip(&w) {
            for (acc, v) in m.iter_mut().zip(p.iter()) {
                *acc += wi * v / total;
            }
        }
        m
    }
}

pub fn write_samples(path: &Path, samples: &Samples) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header: Vec<String> = (0..samples.dim()).map(|i| format!("theta_{i}")).collect();
    if samples.weights.is_some() {
        header.push("weight".into());
    }
    w.write_record(&header)?;
    for (i, p) in samples.points.iter().enumerate() {
        let mut row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        if let Some(ws) = &samples.weights {
            row.push(format!("{:?}", ws[i]));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples(path: &Path) -> Result<Samples> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let weighted = header.iter().next_back() == Some("weight");
    let d = header.len() - usize::from(weighted);
    if d == 0 {
        bail!("{} has no parameter columns", path.display());
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("parsing {}", path.display()))?;
        points.push(ParameterVector(vals[..d].to_vec()));
        if weighted {
            weights.push(vals[d]);
        }
    }
    if points.is_empty() {
        bail!("{} holds no samples", path.display());
    }
    Ok(Samples {
        points,
        weights: weighted.then_some(weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_and_without_weights() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![ParameterVector(vec![0.1, 1.0 / 3.0]), ParameterVector(vec![-2.5, 7.0])];
        for weights in [None, Some(vec![0.25, 0.75])] {
            let s = Samples {
                points: pts.clone(),
                weights,
            };
            let path = dir.path().join("s.csv");
            write_samples(&path, &s).unwrap();
            assert_eq!(read_samples(&path).unwrap(), s);
        }
    }

    #[test]
    fn weighted_mean() {
        let s = Samples {
            points: vec![ParameterVector(vec![0.0]), ParameterVector(vec![4.0])],
            weights: Some(vec![3.0, 1.0]),
        };
        assert_eq!(s.mean(), vec![1.0]);
    }
}
