//! Deterministic table output.

use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Markdown,
    Csv,
    Tsv,
}

pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Markdown => {
                let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
                out += &line(&self.headers);
                out += &line(&vec!["---".to_owned(); self.headers.len()]);
                for row in &self.rows {
                    out += &line(row);
                }
            }
            Format::Csv | Format::Tsv => {
                let sep = if format == Format::Csv { "," } else { "\t" };
                let cell = |c: &String| match format {
                    Format::Csv if c.contains([',', '"', '\n']) => {
                        format!("\"{}\"", c.replace('"', "\"\""))
                    }
                    Format::Tsv => c.replace(['\t', '\n'], " "),
                    _ => c.clone(),
                };
                for row in std::iter::once(&self.headers).chain(&self.rows) {
                    out += &row.iter().map(cell).collect::<Vec<_>>().join(sep);
                    out.push('\n');
                }
            }
        }
        out
    }
}

/// Three decimals with trailing zeros dropped: `3.7798 -> 3.78`, `2.0 -> 2`.
///
/// `{:.3}` rounds the exact binary value, and exact midpoints go to even.
pub fn decimal(x: f64) -> String {
    let s = format!("{x:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

/// `{a,b}` in the given order; `{}` when empty.
pub fn set<T: std::fmt::Display>(items: &[T]) -> String {
    let inner: Vec<String> = items.iter().map(ToString::to_string).collect();
    format!("{{{}}}", inner.join(","))
}

pub fn sequence<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}
