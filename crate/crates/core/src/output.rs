//! Shared CSV formatting: floats as `{:.12e}` so output is byte-stable and
//! parses back exactly enough for regression checks.

use crate::error::{Error, Result};
use std::io::Write;

pub fn float(v: f64) -> String {
    format!("{v:.12e}")
}

pub(crate) fn csv_writer<W: Write>(out: W, header: &[String]) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_error)?;
    Ok(w)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    #[test]
    fn float_format() {
        assert_eq!(super::float(2.0), "2.000000000000e0");
        assert_eq!(super::float(-0.00125), "-1.250000000000e-3");
        let v = 1.0 / 3.0;
        assert!((super::float(v).parse::<f64>().unwrap() - v).abs() < 1e-12 * v);
    }
}
