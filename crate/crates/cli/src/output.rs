//! Deterministic artifact writing: CSV with 17 significant digits so
//! doubles round-trip losslessly, and chunked symbol strings.

use std::fmt::Write as _;
use std::path::Path;

/// Lossless decimal rendering of a double (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        let mut buf = String::new();
        buf.push_str(header);
        buf.push('\n');
        Csv { buf }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.buf, "{}", fields.join(","));
    }

    pub fn write(self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.buf)
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Symbol string chunked into fixed-width lines.
pub fn chunked_symbols(text: &str, width: usize) -> String {
    let mut out = String::with_capacity(text.len() + text.len() / width + 1);
    let bytes = text.as_bytes();
    for chunk in bytes.chunks(width) {
        out.push_str(std::str::from_utf8(chunk).unwrap());
        out.push('\n');
    }
    out
}
