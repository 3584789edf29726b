//! CSV tables for fit inputs and plot-data outputs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Parses every record of a headed CSV file.
pub fn read_rows<T: DeserializeOwned>(bytes: &[u8], origin: &Path) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let rows = rdr
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::input(origin, e))?;
    if rows.is_empty() {
        return Err(CliError::input(origin, "no data rows"));
    }
    Ok(rows)
}

/// Serialises rows with a header taken from the field names.
pub fn write_rows<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory CSV");
    }
    w.into_inner().expect("in-memory CSV")
}

/// `n` evenly spaced points on [lo, hi].
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Row {
        power_uw: f64,
        rate: f64,
        sigma: Option<f64>,
    }

    #[test]
    fn optional_column_roundtrip() {
        let rows = vec![Row { power_uw: 1.0, rate: 0.5, sigma: Some(0.1) }, Row { power_uw: 2.0, rate: 2.0, sigma: None }];
        let bytes = write_rows(&rows);
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), "power_uw,rate,sigma\n1.0,0.5,0.1\n2.0,2.0,\n");
        assert_eq!(read_rows::<Row>(&bytes, Path::new("t")).unwrap(), rows);
    }

    #[test]
    fn missing_optional_column_reads_as_none() {
        let rows: Vec<Row> = read_rows(b"power_uw,rate\n1, 2\n", Path::new("t")).unwrap();
        assert_eq!(rows, vec![Row { power_uw: 1.0, rate: 2.0, sigma: None }]);
    }

    #[test]
    fn grid_endpoints() {
        assert_eq!(grid(1.0, 3.0, 3), vec![1.0, 2.0, 3.0]);
    }
}
