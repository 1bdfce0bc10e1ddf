//! Plain-text table writers shared by the analysis modules.
//!
//! CSV: comma separated, header row, LF line endings, floats with 17
//! significant digits so every value round-trips.

use std::fmt::Write as _;

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    format!("{x:.16e}")
}

/// A CSV table under construction.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
    rows: usize,
}

/// One CSV cell.
pub enum Cell<'a> {
    F(f64),
    I(i64),
    U(u64),
    S(&'a str),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Csv { text, rows: 0 }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(x) => self.text.push_str(&fmt_f64(*x)),
                Cell::I(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::U(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::S(s) => self.text.push_str(s),
            }
        }
        self.text.push('\n');
        self.rows += 1;
    }

    /// Data rows written so far, excluding the header.
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn into_string(self) -> String {
        self.text
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}
