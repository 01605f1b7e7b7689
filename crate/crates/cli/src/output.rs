use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array1;

use crate::CliError;

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Nine significant digits, fixed notation for moderate exponents and
/// scientific otherwise (like C's `%.9g`).
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let fixed = format!("{x:.*}", (8 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

pub fn num_list(xs: &[f64]) -> String {
    xs.iter().map(|&x| num(x)).collect::<Vec<_>>().join(",")
}

/// Line-oriented `key = value` report.
#[derive(Debug, Default)]
pub struct Report {
    text: String,
}

impl Report {
    pub fn line(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        writeln!(self.text, "{key} = {value}").expect("writing to a String");
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    sgcca::lab::write_text(path, text).map_err(CliError::from)
}

/// One coefficient per line under a single header.
pub fn write_vector(path: &Path, header: &str, v: &Array1<f64>) -> Result<(), CliError> {
    let mut text = format!("{header}\n");
    for &x in v {
        text.push_str(&num(x));
        text.push('\n');
    }
    write(path, &text)
}
