//! CSV output and number formatting.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// Format with 15 significant digits: positional notation for moderate
/// magnitudes, scientific otherwise.
pub fn fmt15(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (14 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // A carry can add a digit (9.99… → 10.0…); re-round if so.
        let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
        if digits > 15 && decimals > 0 {
            let d = decimals - 1;
            return format!("{x:.d$}");
        }
        s
    } else {
        format!("{x:.14e}")
    }
}

/// CSV writer over standard output or a file.
pub struct CsvOut {
    writer: csv::Writer<Box<dyn Write>>,
}

impl CsvOut {
    pub fn stdout() -> Self {
        CsvOut { writer: csv::Writer::from_writer(Box::new(io::stdout().lock())) }
    }

    pub fn file(path: &Path) -> io::Result<Self> {
        let f = File::create(path)?;
        Ok(CsvOut { writer: csv::Writer::from_writer(Box::new(io::BufWriter::new(f))) })
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) -> csv::Result<()> {
        self.writer.write_record(fields.iter().map(|s| s.as_ref()))
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.writer.flush()
    }
}
