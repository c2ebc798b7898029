//! CSV ingestion: an index column (ISO-8601 `date` or integer `t`) followed
//! by one numeric column per series.

use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::Serialize;

use crate::config::InputKind;
use crate::CliError;

const NA_TOKENS: [&str; 7] = ["", "NA", "N/A", "NaN", "nan", "null", "."];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub names: Vec<String>,
    pub index: Vec<String>,
    /// One vector per series.
    pub columns: Vec<Vec<f64>>,
    /// Rows removed because a selected value was missing.
    pub dropped: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.columns[0]
            .iter()
            .copied()
            .zip(self.columns[1].iter().copied())
            .collect()
    }
}

fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

#[derive(PartialEq, PartialOrd)]
enum Key {
    Int(i64),
    Time(NaiveDateTime),
}

fn parse_key(raw: &str, integer: bool) -> Option<Key> {
    let s = raw.trim();
    if integer {
        return s.parse().ok().map(Key::Int);
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0).map(Key::Time);
    }
    if let Ok(d) = DateTime::parse_from_rfc3339(s) {
        return Some(Key::Time(d.naive_utc()));
    }
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S")
        .ok()
        .map(Key::Time)
}

pub fn ingest_csv(path: &Path, kind: InputKind, select: &[String], min_series: usize) -> Result<Dataset, CliError> {
    let file = std::fs::File::open(path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    read_csv(file, kind, select, min_series).map_err(|e| match e {
        CliError::Input(m) => input_err(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_csv<R: Read>(src: R, kind: InputKind, select: &[String], min_series: usize) -> Result<Dataset, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(src);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| input_err(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 2 {
        return Err(input_err("need an index column and at least one series"));
    }
    let integer = header[0].eq_ignore_ascii_case("t");
    if !integer && !header[0].eq_ignore_ascii_case("date") {
        return Err(input_err(format!(
            "first column must be 'date' or 't', got '{}'",
            header[0]
        )));
    }
    let picked: Vec<usize> = if select.is_empty() {
        (1..header.len()).collect()
    } else {
        select
            .iter()
            .map(|name| {
                header[1..]
                    .iter()
                    .position(|h| h == name)
                    .map(|i| i + 1)
                    .ok_or_else(|| input_err(format!("no column named '{name}'")))
            })
            .collect::<Result<_, _>>()?
    };
    if picked.len() < min_series {
        return Err(input_err(format!(
            "model needs {min_series} series, input provides {}",
            picked.len()
        )));
    }
    let mut index = Vec::new();
    let mut columns = vec![Vec::new(); picked.len()];
    let mut dropped = 0;
    let mut last: Option<Key> = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| input_err(format!("line {line}: {e}")))?;
        let key = parse_key(&rec[0], integer)
            .ok_or_else(|| input_err(format!("line {line}: cannot parse index '{}'", &rec[0])))?;
        if let Some(prev) = &last {
            if key == *prev {
                return Err(input_err(format!("line {line}: duplicate index '{}'", &rec[0])));
            }
            if key < *prev {
                return Err(input_err(format!("line {line}: index '{}' is not increasing", &rec[0])));
            }
        }
        last = Some(key);
        let mut row = Vec::with_capacity(picked.len());
        let mut missing = false;
        for &j in &picked {
            let cell = &rec[j];
            if NA_TOKENS.contains(&cell) {
                missing = true;
                continue;
            }
            let v: f64 = cell
                .parse()
                .map_err(|_| input_err(format!("line {line}: '{cell}' is not a number")))?;
            if !v.is_finite() {
                return Err(input_err(format!("line {line}: non-finite value")));
            }
            row.push(v);
        }
        if missing {
            dropped += 1;
            continue;
        }
        index.push(rec[0].to_string());
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} row(s) with missing values");
    }
    let names: Vec<String> = picked.iter().map(|&j| header[j].clone()).collect();
    match kind {
        InputKind::Prices => {
            if index.len() < 2 {
                return Err(input_err("need at least two price rows"));
            }
            for (n, c) in names.iter().zip(&columns) {
                if let Some(p) = c.iter().find(|&&p| p <= 0.0) {
                    return Err(input_err(format!("series {n}: non-positive price {p}")));
                }
            }
            let columns = columns
                .iter()
                .map(|c| c.windows(2).map(|w| w[1].ln() - w[0].ln()).collect())
                .collect();
            index.remove(0);
            Ok(Dataset {
                names,
                index,
                columns,
                dropped,
            })
        }
        InputKind::Returns => Ok(Dataset {
            names,
            index,
            columns,
            dropped,
        }),
        InputKind::Uniform => {
            for (n, c) in names.iter().zip(&columns) {
                if let Some(u) = c.iter().find(|&&u| !(u > 0.0 && u < 1.0)) {
                    return Err(input_err(format!("series {n}: {u} is outside (0,1)")));
                }
            }
            Ok(Dataset {
                names,
                index,
                columns,
                dropped,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, kind: InputKind, min: usize) -> Result<Dataset, CliError> {
        read_csv(text.as_bytes(), kind, &[], min)
    }

    #[test]
    fn prices_to_log_returns() {
        let d = read(
            "date,SPX\n2020-01-02,100\n2020-01-03,101\n2020-01-06,99.5\n",
            InputKind::Prices,
            1,
        )
        .unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.columns[0][0], 101f64.ln() - 100f64.ln());
        assert_eq!(d.columns[0][1], 99.5f64.ln() - 101f64.ln());
        assert_eq!(d.index, vec!["2020-01-03", "2020-01-06"]);
    }

    #[test]
    fn na_row_dropped_and_counted() {
        let d = read(
            "date,a,b\n2020-01-01,0.1,0.2\n2020-01-02,NA,0.3\n2020-01-03,0.0,-0.1\n",
            InputKind::Returns,
            2,
        )
        .unwrap();
        assert_eq!(d.dropped, 1);
        assert_eq!(d.columns[1], vec![0.2, -0.1]);
    }

    #[test]
    fn duplicate_and_decreasing_dates_rejected() {
        let dup = read("date,a\n2020-01-01,1\n2020-01-01,2\n", InputKind::Returns, 1).unwrap_err();
        assert!(dup.to_string().contains("duplicate"));
        let back = read("date,a\n2020-01-02,1\n2020-01-01,2\n", InputKind::Returns, 1).unwrap_err();
        assert!(back.to_string().contains("not increasing"));
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(read("date,a\n2020-01-01,1\n2020-01-02,abc\n", InputKind::Returns, 1).is_err());
        assert!(read("date,a\n2020-01-01,1,2\n", InputKind::Returns, 1).is_err());
        assert!(read("date,a\n01/02/2020,1\n", InputKind::Returns, 1).is_err());
    }

    #[test]
    fn bivariate_needs_two_series() {
        let e = read("date,a\n2020-01-01,1\n", InputKind::Returns, 2).unwrap_err();
        assert!(matches!(e, CliError::Input(_)));
    }

    #[test]
    fn column_selection_and_integer_index() {
        let d = read_csv(
            "t,x,y,z\n1,0.5,0.2,0.9\n2,0.4,0.3,0.1\n".as_bytes(),
            InputKind::Uniform,
            &["z".into(), "x".into()],
            2,
        )
        .unwrap();
        assert_eq!(d.names, vec!["z", "x"]);
        assert_eq!(d.pairs(), vec![(0.9, 0.5), (0.1, 0.4)]);
        assert!(read("t,u\n1,1.0\n", InputKind::Uniform, 1).is_err());
    }
}
