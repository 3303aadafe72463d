//! Recorded simulation output and its CSV form.
//!
//! The CSV starts with `#` lines (`# key: value` metadata, `# event: t text`)
//! followed by a header row and one row per sample. Floats are written in
//! shortest round-trip form, so reading a file back reproduces the series
//! exactly.

use std::io::{BufRead, Write};

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub events: Vec<(f64, String)>,
    pub meta: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeriesError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed series: {0}")]
    Malformed(String),
}

impl TimeSeries {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
            events: Vec::new(),
            meta: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn time(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r[0]).collect()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), SeriesError> {
        for (k, v) in &self.meta {
            writeln!(w, "# {k}: {v}")?;
        }
        for (t, e) in &self.events {
            writeln!(w, "# event: {t} {e}")?;
        }
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(&self.columns)?;
        let mut buf = Vec::with_capacity(self.columns.len());
        for row in &self.rows {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            cw.write_record(&buf)?;
        }
        cw.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, SeriesError> {
        let mut meta = Vec::new();
        let mut events = Vec::new();
        let mut body = String::new();
        for line in r.lines() {
            let line = line?;
            match line.strip_prefix("# ") {
                Some(rest) => {
                    let (k, v) = rest
                        .split_once(": ")
                        .ok_or_else(|| SeriesError::Malformed(format!("comment line `{line}`")))?;
                    if k == "event" {
                        let (t, e) = v
                            .split_once(' ')
                            .ok_or_else(|| SeriesError::Malformed(format!("event line `{line}`")))?;
                        let t = t.parse().map_err(|_| SeriesError::Malformed(format!("event time `{t}`")))?;
                        events.push((t, e.to_string()));
                    } else {
                        meta.push((k.to_string(), v.to_string()));
                    }
                }
                None => {
                    body.push_str(&line);
                    body.push('\n');
                }
            }
        }
        let mut cr = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = cr.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for rec in cr.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| SeriesError::Malformed(format!("value `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if row.len() != columns.len() {
                return Err(SeriesError::Malformed("row width differs from header".into()));
            }
            rows.push(row);
        }
        Ok(Self {
            columns,
            rows,
            events,
            meta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_round_trip(rows in prop::collection::vec(prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 3), 0..20)) {
            let mut ts = TimeSeries::new(vec!["t".into(), "a".into(), "b".into()]);
            ts.meta.push(("scenario".into(), "x y".into()));
            ts.events.push((1.25, "load -> 1.2 pu".into()));
            for r in rows {
                ts.push(r);
            }
            let mut buf = Vec::new();
            ts.write_csv(&mut buf).unwrap();
            let back = TimeSeries::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, ts);
        }
    }

    #[test]
    fn column_lookup() {
        let mut ts = TimeSeries::new(vec!["t".into(), "v".into()]);
        ts.push(vec![0.0, 1.0]);
        ts.push(vec![0.5, 2.0]);
        assert_eq!(ts.column("v").unwrap(), vec![1.0, 2.0]);
        assert_eq!(ts.time(), vec![0.0, 0.5]);
        assert!(ts.column("w").is_none());
    }
}
