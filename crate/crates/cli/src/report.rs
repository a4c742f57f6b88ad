//! Report records and their JSON / CSV serializations.
//!
//! Output is hand-written so key order and number formatting are fixed:
//! reals carry 17 significant digits, complex values are `"re,im"` strings.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use covlab_core::{Complex64, EnsembleConfig};

use crate::args::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Null,
    Int(u64),
    Real(f64),
    Complex(Complex64),
    Text(String),
}

impl Field {
    pub fn real(x: f64) -> Self {
        Field::Real(x)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Field::Text(s.into())
    }
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::Real(x)
    }
}

impl From<Complex64> for Field {
    fn from(z: Complex64) -> Self {
        Field::Complex(z)
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Null, Field::Real)
    }
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any double.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_complex(z: Complex64) -> String {
    format!("{},{}", fmt_real(z.re), fmt_real(z.im))
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl Field {
    fn json(&self) -> String {
        match self {
            Field::Null => "null".into(),
            Field::Int(i) => i.to_string(),
            Field::Real(x) if x.is_finite() => fmt_real(*x),
            Field::Real(_) => "null".into(),
            Field::Complex(z) if z.re.is_finite() && z.im.is_finite() => {
                json_string(&fmt_complex(*z))
            }
            Field::Complex(_) => "null".into(),
            Field::Text(s) => json_string(s),
        }
    }

    fn csv(&self) -> String {
        match self {
            Field::Null => String::new(),
            Field::Int(i) => i.to_string(),
            Field::Real(x) if x.is_finite() => fmt_real(*x),
            Field::Real(_) => String::new(),
            Field::Complex(z) if z.re.is_finite() && z.im.is_finite() => {
                format!("\"{}\"", fmt_complex(*z))
            }
            Field::Complex(_) => String::new(),
            Field::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Field::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    /// The `z` or `phi` (or check name) the row is about.
    pub key: Field,
    pub predicted: Field,
    pub estimate: Field,
    pub stderr: Field,
    pub residuals: Vec<Field>,
    pub pass: bool,
    /// Verb-specific columns, identical names on every row of a report.
    pub extra: Vec<(&'static str, Field)>,
}

impl Row {
    pub fn new(key: Field) -> Self {
        Self {
            key,
            predicted: Field::Null,
            estimate: Field::Null,
            stderr: Field::Null,
            residuals: Vec::new(),
            pass: true,
            extra: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSummary {
    pub n: usize,
    pub m: usize,
    pub dist: String,
    pub kappa4: f64,
    pub replicas: usize,
    pub seed: u64,
    pub truncation_t: Option<f64>,
}

impl ConfigSummary {
    pub fn of(cfg: &EnsembleConfig, t: Option<f64>) -> Self {
        Self {
            n: cfg.n,
            m: cfg.m,
            dist: cfg.dist.to_string(),
            kappa4: cfg.dist.kappa4(),
            replicas: cfg.replicas,
            seed: cfg.seed,
            truncation_t: t,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: String,
    pub config: ConfigSummary,
    /// Column name of [`Row::key`]: `"z"`, `"phi"` or `"check"`.
    pub key_name: &'static str,
    pub results: Vec<Row>,
    pub runtime_seconds: Option<f64>,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        s.push_str("{\n");
        let _ = writeln!(s, "  \"command\": {},", json_string(&self.command));
        let _ = writeln!(
            s,
            "  \"config\": {{\"n\": {}, \"m\": {}, \"dist\": {}, \"kappa4\": {}, \"replicas\": {}, \"seed\": {}, \"truncation_t\": {}}},",
            c.n,
            c.m,
            json_string(&c.dist),
            Field::Real(c.kappa4).json(),
            c.replicas,
            c.seed,
            Field::from(c.truncation_t).json()
        );
        s.push_str("  \"results\": [");
        for (i, row) in self.results.iter().enumerate() {
            s.push_str(if i == 0 { "\n" } else { ",\n" });
            let residuals: Vec<String> = row.residuals.iter().map(Field::json).collect();
            let _ = write!(
                s,
                "    {{{}: {}, \"predicted\": {}, \"estimate\": {}, \"stderr\": {}, \"residuals\": [{}], \"verdict\": \"{}\"",
                json_string(self.key_name),
                row.key.json(),
                row.predicted.json(),
                row.estimate.json(),
                row.stderr.json(),
                residuals.join(", "),
                verdict(row.pass)
            );
            for (name, value) in &row.extra {
                let _ = write!(s, ", {}: {}", json_string(name), value.json());
            }
            s.push('}');
        }
        s.push_str(if self.results.is_empty() {
            "],\n"
        } else {
            "\n  ],\n"
        });
        let _ = writeln!(
            s,
            "  \"runtime_seconds\": {}",
            Field::from(self.runtime_seconds).json()
        );
        s.push_str("}\n");
        s
    }

    pub fn to_csv(&self) -> String {
        let width = self
            .results
            .iter()
            .map(|r| r.residuals.len())
            .max()
            .unwrap_or(0);
        let mut header = vec![
            self.key_name.to_string(),
            "predicted".into(),
            "estimate".into(),
            "stderr".into(),
        ];
        header.extend((0..width).map(|i| format!("residual_{i}")));
        header.push("verdict".into());
        if let Some(first) = self.results.first() {
            header.extend(first.extra.iter().map(|(k, _)| k.to_string()));
        }
        let mut s = header.join(",");
        s.push('\n');
        for row in &self.results {
            let mut cols = vec![
                row.key.csv(),
                row.predicted.csv(),
                row.estimate.csv(),
                row.stderr.csv(),
            ];
            cols.extend((0..width).map(|i| row.residuals.get(i).map_or(String::new(), Field::csv)));
            cols.push(verdict(row.pass).into());
            cols.extend(row.extra.iter().map(|(_, v)| v.csv()));
            s.push_str(&cols.join(","));
            s.push('\n');
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Writes `report` to `out`, or to standard output when `out` is `None`.
pub fn emit_report(report: &Report, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = report.render(format);
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut row = Row::new(Field::text("x2"));
        row.predicted = Field::real(4.0);
        row.estimate = Field::real(3.9);
        row.stderr = Field::real(0.1);
        row.residuals = vec![Field::real(-0.1)];
        row.extra = vec![("z_point", Field::Complex(Complex64::new(0.0, 2.0)))];
        Report {
            command: "clt".into(),
            config: ConfigSummary {
                n: 64,
                m: 4096,
                dist: "gaussian".into(),
                kappa4: 0.0,
                replicas: 4000,
                seed: 42,
                truncation_t: None,
            },
            key_name: "phi",
            results: vec![row],
            runtime_seconds: None,
        }
    }

    #[test]
    fn reals_have_seventeen_significant_digits() {
        assert_eq!(fmt_real(4.0), "4.0000000000000000e0");
        let x = 0.1 + 0.2;
        assert_eq!(fmt_real(x).parse::<f64>().unwrap(), x);
        assert_eq!(fmt_real(x).split('e').next().unwrap().len(), 18);
    }

    #[test]
    fn json_layout() {
        let j = sample().to_json();
        assert!(j.contains("\"phi\": \"x2\", \"predicted\": 4.0000000000000000e0"));
        assert!(j.contains("\"verdict\": \"pass\""));
        assert!(j.contains("\"z_point\": \"0.0000000000000000e0,2.0000000000000000e0\""));
        assert!(j.contains("\"truncation_t\": null"));
        let keys = [
            "\"command\"",
            "\"config\"",
            "\"results\"",
            "\"runtime_seconds\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| j.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn csv_layout() {
        let c = sample().to_csv();
        let mut lines = c.lines();
        assert_eq!(
            lines.next().unwrap(),
            "phi,predicted,estimate,stderr,residual_0,verdict,z_point"
        );
        assert_eq!(
            lines.next().unwrap(),
            "x2,4.0000000000000000e0,3.8999999999999999e0,1.0000000000000001e-1,-1.0000000000000001e-1,pass,\"0.0000000000000000e0,2.0000000000000000e0\""
        );
    }

    #[test]
    fn non_finite_values_become_null() {
        assert_eq!(Field::Real(f64::NAN).json(), "null");
        assert_eq!(Field::Real(f64::INFINITY).csv(), "");
    }

    #[test]
    fn text_with_separators_is_quoted() {
        assert_eq!(Field::text("a,b").csv(), "\"a,b\"");
        assert_eq!(Field::text("say \"hi\"").json(), "\"say \\\"hi\\\"\"");
    }
}
