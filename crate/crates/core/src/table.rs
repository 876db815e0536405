//! Line-based tabular files: comma-separated, one header line of column
//! names, one line of units, then data rows.
//!
//! Units drive validation on ingest. `counts` columns must hold
//! non-negative integers, `label` columns hold free text without commas, and
//! every other unit marks a numeric column (`NaN` allowed for missing values).

use std::fmt::Write as _;
use std::path::Path;

use crate::detection::{CountRecord, Peak};
use crate::error::{Error, Result};
use crate::mode::Band;

pub const UNIT_COUNTS: &str = "counts";
pub const UNIT_LABEL: &str = "label";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<String>,
    units: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

impl Table {
    pub fn new(schema: &[(&str, &str)]) -> Self {
        Self {
            columns: schema.iter().map(|c| c.0.to_string()).collect(),
            units: schema.iter().map(|c| c.1.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn units(&self) -> &[String] {
        &self.units
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Appends a row; panics if its width does not match the header.
    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width does not match header"
        );
        self.rows.push(row);
    }

    pub fn push_f64(&mut self, row: &[f64]) {
        self.push(row.iter().map(|&x| fmt_f64(x)).collect());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| Error::Schema {
            line: 1,
            message: format!("missing column `{name}`"),
        })
    }

    pub fn f64_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.require(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[idx].parse::<f64>().map_err(|_| Error::Schema {
                    line: i + 3,
                    message: format!("`{}` is not a number in column `{name}`", row[idx]),
                })
            })
            .collect()
    }

    pub fn str_column(&self, name: &str) -> Result<Vec<&str>> {
        let idx = self.require(name)?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.columns.join(","));
        let _ = writeln!(out, "{}", self.units.join(","));
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    /// Parses and validates a table. Errors carry 1-based line numbers.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
        let schema_err = |line, message: String| Error::Schema { line, message };

        let (_, header) = lines
            .next()
            .filter(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| schema_err(1, "empty file: expected a header line".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        if let Some(pos) = columns.iter().position(|c| c.is_empty()) {
            return Err(schema_err(
                1,
                format!("column {} has an empty name", pos + 1),
            ));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(schema_err(1, format!("duplicate column `{c}`")));
            }
        }

        let (_, unit_line) = lines
            .next()
            .ok_or_else(|| schema_err(2, "missing units line".into()))?;
        let units: Vec<String> = unit_line.split(',').map(|c| c.trim().to_string()).collect();
        if units.len() != columns.len() {
            return Err(schema_err(
                2,
                format!("{} units for {} columns", units.len(), columns.len()),
            ));
        }
        if let Some(pos) = units.iter().position(|u| u.is_empty()) {
            return Err(schema_err(
                2,
                format!("column `{}` has no unit", columns[pos]),
            ));
        }

        let mut rows = Vec::new();
        for (line, raw) in lines {
            if raw.trim().is_empty() {
                continue;
            }
            let cells: Vec<String> = raw.split(',').map(|c| c.trim().to_string()).collect();
            if cells.len() != columns.len() {
                return Err(schema_err(
                    line,
                    format!("{} fields, expected {}", cells.len(), columns.len()),
                ));
            }
            for ((cell, unit), name) in cells.iter().zip(&units).zip(&columns) {
                match unit.as_str() {
                    UNIT_LABEL => {
                        if cell.is_empty() {
                            return Err(schema_err(
                                line,
                                format!("empty label in column `{name}`"),
                            ));
                        }
                    }
                    UNIT_COUNTS => {
                        if cell.parse::<u64>().is_err() {
                            let why = match cell.parse::<f64>() {
                                Ok(x) if x < 0.0 => "negative count",
                                _ => "count is not a non-negative integer",
                            };
                            return Err(schema_err(
                                line,
                                format!("{why} `{cell}` in column `{name}`"),
                            ));
                        }
                    }
                    _ => {
                        if cell.parse::<f64>().is_err() {
                            return Err(schema_err(
                                line,
                                format!("`{cell}` is not a number in column `{name}`"),
                            ));
                        }
                    }
                }
            }
            rows.push(cells);
        }
        Ok(Self {
            columns,
            units,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub const RECORD_SCHEMA: [(&str, &str); 4] = [
    ("detector", UNIT_LABEL),
    ("peak", UNIT_LABEL),
    ("duration_s", "s"),
    ("counts", UNIT_COUNTS),
];

pub fn records_to_table(records: &[CountRecord]) -> Table {
    let mut t = Table::new(&RECORD_SCHEMA);
    for r in records {
        t.push(vec![
            r.detector.as_str().to_string(),
            r.peak.as_str().to_string(),
            fmt_f64(r.duration_s),
            r.counts.to_string(),
        ]);
    }
    t
}

pub fn records_from_table(table: &Table) -> Result<Vec<CountRecord>> {
    let detectors = table.str_column("detector")?;
    let peaks = table.str_column("peak")?;
    let durations = table.f64_column("duration_s")?;
    let counts = table.str_column("counts")?;
    (0..table.len())
        .map(|i| {
            let line = i + 3;
            let detector = match detectors[i] {
                "visible" => Band::Visible,
                "telecom" => Band::Telecom,
                other => {
                    return Err(Error::Schema {
                        line,
                        message: format!("unknown detector `{other}`"),
                    })
                }
            };
            let peak = Peak::parse(peaks[i]).ok_or_else(|| Error::Schema {
                line,
                message: format!("unknown peak `{}`", peaks[i]),
            })?;
            if !(durations[i] > 0.0) {
                return Err(Error::Schema {
                    line,
                    message: format!("duration must be positive, got {}", durations[i]),
                });
            }
            let counts = counts[i].parse::<u64>().map_err(|_| Error::Schema {
                line,
                message: format!("bad count `{}`", counts[i]),
            })?;
            Ok(CountRecord {
                detector,
                peak,
                duration_s: durations[i],
                counts,
            })
        })
        .collect()
}

/// Pump-sweep counts: `(P_mw, visible_counts, telecom_counts)` rows.
pub fn conversion_counts_from_table(table: &Table) -> Result<Vec<(f64, f64, f64)>> {
    let pumps = table.f64_column("pump_power_mw")?;
    let visible = table.f64_column("visible_counts")?;
    let telecom = table.f64_column("telecom_counts")?;
    if pumps.is_empty() {
        return Err(Error::Schema {
            line: 3,
            message: "no data rows".into(),
        });
    }
    for (i, &p) in pumps.iter().enumerate() {
        if !(p >= 0.0) {
            return Err(Error::Schema {
                line: i + 3,
                message: format!("pump power must be non-negative, got {p}"),
            });
        }
    }
    Ok(pumps
        .into_iter()
        .zip(visible)
        .zip(telecom)
        .map(|((p, v), t)| (p, v, t))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_file_is_a_schema_error() {
        assert!(matches!(
            Table::parse(""),
            Err(Error::Schema { line: 1, .. })
        ));
        assert!(matches!(
            Table::parse("\n\n"),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn missing_units_line() {
        assert!(matches!(
            Table::parse("a,b\n"),
            Err(Error::Schema { line: 2, .. })
        ));
        assert!(matches!(
            Table::parse("a,b\nmW\n"),
            Err(Error::Schema { line: 2, .. })
        ));
    }

    #[test]
    fn negative_count_reports_its_line() {
        let text = "pump_power_mw,visible_counts\nmW,counts\n0,100\n10,-4\n";
        match Table::parse(text) {
            Err(Error::Schema { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("negative"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_and_bad_number() {
        assert!(matches!(
            Table::parse("a,b\n1,1\n1\n"),
            Err(Error::Schema { line: 3, .. })
        ));
        assert!(matches!(
            Table::parse("a,b\nmW,1\n1,x\n"),
            Err(Error::Schema { line: 3, .. })
        ));
        assert!(matches!(
            Table::parse("a,a\n1,1\n"),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn record_table_round_trip() {
        let recs = vec![
            CountRecord {
                detector: Band::Visible,
                peak: Peak::Middle,
                duration_s: 1.0,
                counts: 1423,
            },
            CountRecord {
                detector: Band::Telecom,
                peak: Peak::Background,
                duration_s: 0.25,
                counts: 0,
            },
        ];
        let text = records_to_table(&recs).to_csv();
        assert!(text.starts_with("detector,peak,duration_s,counts\nlabel,label,s,counts\n"));
        let back = records_from_table(&Table::parse(&text).unwrap()).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn conversion_counts_need_columns() {
        let t = Table::parse("pump_power_mw,visible_counts\nmW,counts\n0,1\n").unwrap();
        assert!(matches!(
            conversion_counts_from_table(&t),
            Err(Error::Schema { line: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn numeric_tables_reingest_losslessly(
            rows in proptest::collection::vec((any::<f64>(), 0u64..u64::MAX), 0..20)
        ) {
            let mut t = Table::new(&[("x", "mW"), ("n", UNIT_COUNTS)]);
            for (x, n) in &rows {
                t.push(vec![fmt_f64(*x), n.to_string()]);
            }
            let back = Table::parse(&t.to_csv()).unwrap();
            prop_assert_eq!(back.to_csv(), t.to_csv());
            let xs = back.f64_column("x").unwrap();
            for (a, (b, _)) in xs.iter().zip(&rows) {
                prop_assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
            }
        }
    }
}
