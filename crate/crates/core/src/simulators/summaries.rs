use super::ModelKind;
use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Log-variance reported for a zero-variance channel.
pub const LOG_VARIANCE_FLOOR: f64 = -27.631021115928547; // ln(1e-12)

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

/// Lag-`k` autocorrelation; 0 for a constant channel.
fn acf(v: &[f64], k: usize) -> f64 {
    let m = mean(v);
    let denom: f64 = v.iter().map(|x| (x - m) * (x - m)).sum();
    if denom <= 0.0 || v.len() <= k {
        return 0.0;
    }
    v.iter().zip(&v[k..]).map(|(a, b)| (a - m) * (b - m)).sum::<f64>() / denom
}

fn log_variance(v: &[f64]) -> f64 {
    let var = variance(v);
    if var > 0.0 {
        var.ln()
    } else {
        LOG_VARIANCE_FLOOR
    }
}

fn crosscorr(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let sab: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let saa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let sbb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Least-squares fit of `x_t` on `x_{t-1}`: `(intercept, slope)`.
fn lag_regression(v: &[f64]) -> (f64, f64) {
    let prev = &v[..v.len() - 1];
    let next = &v[1..];
    let (mp, mn) = (mean(prev), mean(next));
    let sxx: f64 = prev.iter().map(|x| (x - mp) * (x - mp)).sum();
    if sxx <= 0.0 {
        return (mn, 0.0);
    }
    let sxy: f64 = prev.iter().zip(next).map(|(x, y)| (x - mp) * (y - mn)).sum();
    let slope = sxy / sxx;
    (mn - slope * mp, slope)
}

/// Hand-crafted summaries per model:
/// OU `(intercept, slope, mean)`, MA(2) `(variance, acf1, acf2)`, and for the
/// epidemic `mean(X), mean(Y), logvar(X), logvar(Y), acf1(X), acf1(Y),
/// acf2(X), acf2(Y), corr(X, Y)`.
pub fn bespoke_summaries(x: &TimeSeries, model: ModelKind) -> Result<Vec<f64>> {
    let want = match model {
        ModelKind::Ou | ModelKind::Ma2 => 1,
        ModelKind::Gse => 2,
    };
    if x.dim() != want {
        return Err(Error::DimensionMismatch {
            expected: want,
            got: x.dim(),
        });
    }
    if x.len() < 3 {
        return Err(Error::TooFewPoints(x.len()));
    }
    Ok(match model {
        ModelKind::Ou => {
            let v = x.values();
            let (b, s) = lag_regression(v);
            vec![b, s, mean(v)]
        }
        ModelKind::Ma2 => {
            let v = x.values();
            vec![variance(v), acf(v, 1), acf(v, 2)]
        }
        ModelKind::Gse => {
            let (s, i) = (x.channel(0), x.channel(1));
            vec![
                mean(&s),
                mean(&i),
                log_variance(&s),
                log_variance(&i),
                acf(&s, 1),
                acf(&i, 1),
                acf(&s, 2),
                acf(&i, 2),
                crosscorr(&s, &i),
            ]
        }
    })
}
