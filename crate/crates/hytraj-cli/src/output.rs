//! Deterministic file output: fixed 17-significant-digit float formatting
//! and atomic writes (temp file + rename).

use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits; round-trip exact for f64.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_atomic(path: &Path, content: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let tmp: PathBuf = path.with_extension("tmp");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)
}

/// Builds a CSV document with a fixed header and 17-digit floats.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            buf: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[CsvCell]) {
        assert_eq!(cells.len(), self.columns, "csv row width");
        let mut first = true;
        for cell in cells {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match cell {
                CsvCell::F(x) => self.buf.push_str(&fmt(*x)),
                CsvCell::U(u) => self.buf.push_str(&u.to_string()),
            }
        }
        self.buf.push('\n');
    }

    pub fn write(self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, &self.buf)
    }
}

pub enum CsvCell {
    F(f64),
    U(usize),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.0, 1.0, -9.81, 2.0387359836901138, 1e-300, f64::MAX] {
            let s = fmt(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
    }

    #[test]
    fn csv_layout_is_stable() {
        let mut csv = Csv::new(&["t", "j", "x1"]);
        csv.row(&[CsvCell::F(0.5), CsvCell::U(1), CsvCell::F(-2.0)]);
        assert_eq!(
            csv.buf,
            "t,j,x1\n5.0000000000000000e-1,1,-2.0000000000000000e0\n"
        );
    }
}
