use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalFit {
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
}

/// Moment matching in log space: `mu` is the mean of the logs and `sigma`
/// their sample standard deviation.
pub fn fit_lognormal(values: &[f64]) -> Result<LognormalFit> {
    if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Data(format!("value #{} is not a positive number: {v}", i + 1)));
    }
    let n = values.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("need at least two values, got {n}")));
    }
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mu = logs.iter().sum::<f64>() / n as f64;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if var <= 0.0 {
        return Err(Error::InsufficientData("all values are identical; log-variance is zero".into()));
    }
    Ok(LognormalFit { mu, sigma: var.sqrt(), n })
}

/// Reads a single-column CSV of bids. A non-numeric first row is taken as
/// the header; blank rows are ignored.
pub fn read_bids<R: std::io::Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        if record.len() > 1 {
            return Err(Error::Data(format!("row {} has {} columns, expected 1", row + 1, record.len())));
        }
        let field = record.get(0).unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if row == 0 => continue,
            Err(_) => return Err(Error::Data(format!("row {}: `{field}` is not a number", row + 1))),
        }
    }
    Ok(values)
}

pub fn read_bids_file(path: &Path) -> Result<Vec<f64>> {
    read_bids(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::ValueDistribution;
    use crate::numerics::RandomStream;

    #[test]
    fn exact_logs() {
        let e = std::f64::consts::E;
        let fit = fit_lognormal(&[e, e * e, e * e * e]).unwrap();
        assert!((fit.mu - 2.0).abs() < 1e-14);
        assert!((fit.sigma - 1.0).abs() < 1e-14);
    }

    #[test]
    fn recovers_example_parameters() {
        let d = ValueDistribution::lognormal(2.18, 1.0).unwrap();
        let xs = d.sample(&mut RandomStream::new(2024).rng(), 100_000);
        let fit = fit_lognormal(&xs).unwrap();
        assert!((fit.mu - 2.18).abs() < 0.01, "{fit:?}");
        assert!((fit.sigma - 1.0).abs() < 0.01, "{fit:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_lognormal(&[1.0, 0.0]), Err(Error::Data(_))));
        assert!(matches!(fit_lognormal(&[1.0, -2.0]), Err(Error::Data(_))));
        assert!(matches!(fit_lognormal(&[1.0]), Err(Error::InsufficientData(_))));
        assert!(matches!(fit_lognormal(&[3.0, 3.0]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn csv_with_and_without_header() {
        assert_eq!(read_bids("bid\n1.5\n2\n\n3e0\n".as_bytes()).unwrap(), vec![1.5, 2.0, 3.0]);
        assert_eq!(read_bids("1.5\n2\n".as_bytes()).unwrap(), vec![1.5, 2.0]);
        assert!(read_bids("1.5\nabc\n".as_bytes()).is_err());
        assert!(read_bids("1.5,2\n".as_bytes()).is_err());
    }
}
