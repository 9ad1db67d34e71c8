//! File formats shared by the command-line tool and the pipeline.
//!
//! JSON documents carry a top-level `schema_version`; CSV files have a
//! header row and use the shortest round-tripping float representation so
//! reruns are byte-identical.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::deconv::DensityEstimate;
use crate::ecf::EcfGrid;
use crate::error::{Error, Result};
use crate::ingest::ReturnSeries;
use crate::jumps::{JumpClassification, MixtureDensities};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Versioned<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&Versioned {
        schema_version: SCHEMA_VERSION,
        body: value,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_json_string(value)?).map_err(|e| Error::io(path, e))
}

/// Reads a versioned document, rejecting unknown schema versions.
pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json_str(&text)
}

pub fn from_json_str<T: DeserializeOwned>(text: &str) -> Result<T> {
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Parse {
            row: 0,
            reason: "expected a JSON object".into(),
        })?;
    match obj.remove("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::Parse {
                row: 0,
                reason: format!("unsupported schema_version {v}"),
            })
        }
        None => {
            return Err(Error::Parse {
                row: 0,
                reason: "missing schema_version".into(),
            })
        }
    }
    Ok(serde_json::from_value(value)?)
}

/// Writes `header` then `rows` as CSV.
pub fn write_table(path: impl AsRef<Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))?;
    Ok(())
}

fn date_string(dates: Option<&[NaiveDate]>, k: usize) -> String {
    dates.map(|d| d[k].format("%Y-%m-%d").to_string()).unwrap_or_default()
}

/// Columns `index,date,return`, 1-based index, empty date when unknown.
pub fn write_returns(path: impl AsRef<Path>, series: &ReturnSeries) -> Result<()> {
    let dates = series.dates();
    write_table(
        path,
        &["index", "date", "return"],
        series
            .returns()
            .iter()
            .enumerate()
            .map(|(k, r)| vec![(k + 1).to_string(), date_string(dates, k), r.to_string()]),
    )
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

fn optional_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h == name)
}

fn parse_f64(field: &str, row: usize, what: &str) -> Result<f64> {
    field.parse::<f64>().map_err(|e| Error::Parse {
        row,
        reason: format!("{what} `{field}`: {e}"),
    })
}

/// Reads a returns file written by [`write_returns`]; only `return` is
/// required.
pub fn read_returns(path: impl AsRef<Path>, delta: f64) -> Result<ReturnSeries> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let ret = column(&headers, "return")?;
    let date = optional_column(&headers, "date");
    let mut returns = Vec::new();
    let mut dates = Vec::new();
    let mut all_dated = date.is_some();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        returns.push(parse_f64(rec.get(ret).unwrap_or(""), row, "return")?);
        if let Some(c) = date {
            match rec.get(c).unwrap_or("") {
                "" => all_dated = false,
                s => dates.push(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Parse {
                    row,
                    reason: format!("date `{s}`: {e}"),
                })?),
            }
        }
    }
    let series = ReturnSeries::new(delta, returns)?;
    if all_dated {
        series.with_dates(dates)
    } else {
        Ok(series)
    }
}

/// Columns `u,re,im,modulus,usable`: the normalized log-ECF and the raw
/// ECF modulus.
pub fn write_ecf(path: impl AsRef<Path>, grid: &EcfGrid) -> Result<()> {
    write_table(
        path,
        &["u", "re", "im", "modulus", "usable"],
        (0..grid.u.len()).map(|i| {
            vec![
                grid.u[i].to_string(),
                grid.phi_hat[i].re.to_string(),
                grid.phi_hat[i].im.to_string(),
                grid.modulus[i].to_string(),
                grid.usable[i].to_string(),
            ]
        }),
    )
}

pub fn write_density(path: impl AsRef<Path>, density: &DensityEstimate) -> Result<()> {
    write_table(
        path,
        &["x", "p_hat"],
        density
            .x
            .iter()
            .zip(&density.p_hat)
            .map(|(x, p)| vec![x.to_string(), p.to_string()]),
    )
}

pub fn read_density(path: impl AsRef<Path>) -> Result<DensityEstimate> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let cx = column(&headers, "x")?;
    let cp = column(&headers, "p_hat")?;
    let (mut x, mut p) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        x.push(parse_f64(rec.get(cx).unwrap_or(""), i + 1, "x")?);
        p.push(parse_f64(rec.get(cp).unwrap_or(""), i + 1, "p_hat")?);
    }
    DensityEstimate::tabulated(x, p)
}

/// Columns `index,date,return,J_k`.
pub fn write_jumps(path: impl AsRef<Path>, series: &ReturnSeries, cls: &JumpClassification) -> Result<()> {
    let flags = cls.indicators();
    let dates = series.dates();
    write_table(
        path,
        &["index", "date", "return", "J_k"],
        series.returns().iter().enumerate().map(|(k, r)| {
            vec![
                (k + 1).to_string(),
                date_string(dates, k),
                r.to_string(),
                u8::from(flags[k]).to_string(),
            ]
        }),
    )
}

/// Jump indicators and, if every row carries one, the dates.
pub fn read_jumps(path: impl AsRef<Path>) -> Result<(Vec<bool>, Option<Vec<NaiveDate>>)> {
    let path = path.as_ref();
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers()?.clone();
    let cj = column(&headers, "J_k")?;
    let cd = optional_column(&headers, "date");
    let mut flags = Vec::new();
    let mut dates = Vec::new();
    let mut all_dated = cd.is_some();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        flags.push(match rec.get(cj).unwrap_or("") {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parse {
                    row,
                    reason: format!("J_k must be 0 or 1, got `{other}`"),
                })
            }
        });
        if let Some(c) = cd {
            match rec.get(c).unwrap_or("") {
                "" => all_dated = false,
                s => dates.push(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::Parse {
                    row,
                    reason: format!("date `{s}`: {e}"),
                })?),
            }
        }
    }
    Ok((flags, all_dated.then_some(dates)))
}

/// Columns `x,f0,f1`.
pub fn write_mixture(path: impl AsRef<Path>, mix: &MixtureDensities) -> Result<()> {
    write_table(
        path,
        &["x", "f0", "f1"],
        (0..mix.x.len()).map(|i| vec![mix.x[i].to_string(), mix.f0[i].to_string(), mix.f1[i].to_string()]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jumps::classify;

    #[test]
    fn returns_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let d = |s: &str| NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap();
        let s = ReturnSeries::new(1.0, vec![0.1, -0.25, 1e-17])
            .unwrap()
            .with_dates(vec![d("2020-01-02"), d("2020-01-03"), d("2020-01-04")])
            .unwrap();
        write_returns(&path, &s).unwrap();
        assert_eq!(read_returns(&path, 1.0).unwrap(), s);

        let bare = ReturnSeries::new(0.5, vec![0.3, 0.1]).unwrap();
        write_returns(&path, &bare).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "index,date,return\n1,,0.3\n2,,0.1\n");
        assert_eq!(read_returns(&path, 0.5).unwrap(), bare);
    }

    #[test]
    fn missing_return_column() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, "date,value\n2020-01-01,3\n").unwrap();
        assert!(matches!(read_returns(&path, 1.0), Err(Error::MissingColumn(c)) if c == "return"));
    }

    #[test]
    fn jumps_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.csv");
        let s = ReturnSeries::new(1.0, vec![0.0, 0.5, -0.5]).unwrap();
        let c = classify(&s, -0.1, 0.1).unwrap();
        write_jumps(&path, &s, &c).unwrap();
        let (flags, dates) = read_jumps(&path).unwrap();
        assert_eq!(flags, vec![false, true, true]);
        assert!(dates.is_none());
    }

    #[test]
    fn versioned_json() {
        #[derive(Serialize, serde::Deserialize, PartialEq, Debug)]
        struct Doc {
            a: f64,
        }
        let s = to_json_string(&Doc { a: 1.5 }).unwrap();
        assert!(s.contains("\"schema_version\": 1"));
        assert_eq!(from_json_str::<Doc>(&s).unwrap(), Doc { a: 1.5 });
        assert!(from_json_str::<Doc>("{\"a\": 1.0}").is_err());
        assert!(from_json_str::<Doc>("{\"schema_version\": 9, \"a\": 1.0}").is_err());
    }

    #[test]
    fn density_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let d = DensityEstimate::tabulated(vec![0.0, 0.5, 1.0], vec![0.25, 1.0, 0.25]).unwrap();
        write_density(&path, &d).unwrap();
        let back = read_density(&path).unwrap();
        assert_eq!(back.x, d.x);
        assert_eq!(back.p_hat, d.p_hat);
    }
}
