//! Plain comma-separated tables with `#` comment lines on top.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! table read back and rewritten is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(comments: &[String], header: &[&str]) -> Self {
        Table {
            comments: comments.to_vec(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            writeln!(out, "# {c}").unwrap();
        }
        writeln!(out, "{}", self.header.join(",")).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", r.join(",")).unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut table = Table::default();
        let mut lines = text.lines();
        let header = loop {
            match lines.next() {
                Some(l) if l.starts_with('#') => {
                    table.comments.push(l.strip_prefix("# ").unwrap_or(&l[1..]).to_string());
                }
                Some(l) => break l,
                None => return Err("missing header line".into()),
            }
        };
        table.header = header.split(',').map(str::to_string).collect();
        for (n, l) in lines.enumerate() {
            let row: Vec<String> = l.split(',').map(str::to_string).collect();
            if row.len() != table.header.len() {
                return Err(format!("row {} has {} fields, header has {}", n + 1, row.len(), table.header.len()));
            }
            table.rows.push(row);
        }
        Ok(table)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Table::parse(&text).map_err(|d| Error::format(path, d))
    }
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_f64_table<I>(path: impl AsRef<Path>, comments: &[String], header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<f64>>,
{
    let mut t = Table::new(comments, header);
    for r in rows {
        t.push(r.into_iter().map(fmt_f64).collect());
    }
    t.write(path)
}

pub fn read_f64_table(path: impl AsRef<Path>, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let t = Table::read(path)?;
    if t.header != header {
        return Err(Error::format(path, format!("expected header {header:?}, found {:?}", t.header)));
    }
    t.rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| v.parse::<f64>().map_err(|e| Error::format(path, format!("{v:?}: {e}"))))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn f64_tables_round_trip_bytes(rows in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 3), 0..20)) {
            let mut t = Table::new(&["seed=1".into()], &["a", "b", "c"]);
            for r in &rows {
                t.push(r.iter().copied().map(fmt_f64).collect());
            }
            let text = t.render();
            let back = Table::parse(&text).unwrap();
            prop_assert_eq!(back.render(), text);
            for (r, parsed) in rows.iter().zip(&back.rows) {
                for (v, s) in r.iter().zip(parsed) {
                    prop_assert_eq!(v.to_bits(), s.parse::<f64>().unwrap().to_bits());
                }
            }
        }
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(Table::parse("a,b\n1,2\n3\n").is_err());
        assert!(Table::parse("# only comments\n").is_err());
    }
}
