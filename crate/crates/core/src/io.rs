//! Comma-separated text tables with a `# key = value` header.
//!
//! Numbers are written with `{:e}`, the shortest representation that reads
//! back to the same `f64`, so files round-trip bitwise.

use std::io::Write;
use std::path::Path;

use crate::simulate::SimulationOutput;
use crate::{Error, Result, C64};

pub fn fmt_f64(x: f64) -> String {
    format!("{x:e}")
}

pub fn write_header<W: Write>(w: &mut W, header: &[(String, String)]) -> Result<()> {
    for (k, v) in header {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Parsed table: leading `# key = value` lines, one column row, data rows,
/// and any comment lines after the column row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub trailing_comments: Vec<String>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column by name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("no column `{name}` (have {})", self.columns.join(", "))))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row.get(i)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("row {}: column `{name}` is not a number", r + 1)))
            })
            .collect()
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_table(text: &str) -> Result<Table> {
    let mut t = Table::default();
    let mut seen_columns = false;
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            let c = c.trim();
            if seen_columns {
                t.trailing_comments.push(c.to_string());
            } else if let Some((k, v)) = c.split_once(" = ") {
                t.header.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if !seen_columns {
            t.columns = cells;
            seen_columns = true;
        } else {
            if cells.len() != t.columns.len() {
                return Err(Error::Config(format!(
                    "line {}: {} fields, expected {}",
                    n + 1,
                    cells.len(),
                    t.columns.len()
                )));
            }
            t.rows.push(cells);
        }
    }
    if !seen_columns {
        return Err(Error::Config("table has no column row".into()));
    }
    Ok(t)
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path)?;
    parse_table(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Trajectory dump: `t`, `P_1 .. P_N`, `P_tot` (unless `populations` is
/// off), then optional `entropy` and `concurrence` columns.
pub fn write_trajectory<W: Write>(
    w: &mut W,
    header: &[(String, String)],
    out: &SimulationOutput,
    populations: bool,
) -> Result<()> {
    write_header(w, header)?;
    let mut cols = vec!["t".to_string()];
    if populations {
        cols.extend((1..=out.populations.len()).map(|j| format!("P_{j}")));
        cols.push("P_tot".into());
    }
    if out.entropy.is_some() {
        cols.push("entropy".into());
    }
    if out.concurrence.is_some() {
        cols.push("concurrence".into());
    }
    writeln!(w, "{}", cols.join(","))?;
    for (i, &t) in out.t_grid.iter().enumerate() {
        let mut row = vec![fmt_f64(t)];
        if populations {
            row.extend(out.populations.iter().map(|p| fmt_f64(p[i])));
            row.push(fmt_f64(out.total[i]));
        }
        if let Some(s) = &out.entropy {
            row.push(fmt_f64(s[i]));
        }
        if let Some(c) = &out.concurrence {
            row.push(fmt_f64(c[i]));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Kernel dump: `t`, `re`, `im`.
pub fn write_kernel<W: Write>(w: &mut W, header: &[(String, String)], t: &[f64], alpha: &[C64]) -> Result<()> {
    if t.len() != alpha.len() {
        return Err(Error::DimensionMismatch(format!("{} times, {} kernel values", t.len(), alpha.len())));
    }
    write_header(w, header)?;
    writeln!(w, "t,re,im")?;
    for (t, a) in t.iter().zip(alpha) {
        writeln!(w, "{},{},{}", fmt_f64(*t), fmt_f64(a.re), fmt_f64(a.im))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(fmt_f64(f64::NAN).parse::<f64>().map(|v| v.is_nan()), Ok(true));
    }

    #[test]
    fn table_round_trip() {
        let mut buf = Vec::new();
        write_header(&mut buf, &[("solver".into(), "ed".into()), ("M".into(), "400".into())]).unwrap();
        writeln!(buf, "t,P_1\n0e0,1e0\n1e-1,9.5e-1\n# note").unwrap();
        let t = parse_table(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(t.header_value("M"), Some("400"));
        assert_eq!(t.column("P_1").unwrap(), vec![1.0, 0.95]);
        assert_eq!(t.trailing_comments, vec!["note".to_string()]);
        assert!(t.column("P_2").is_err());
        assert!(parse_table("a,b\n1\n").is_err());
    }
}
