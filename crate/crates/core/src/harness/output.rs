use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AesnrRow, HarnessError, MseRow, SweepResult};

pub const MSE_FILE: &str = "mse.csv";
pub const AESNR_FILE: &str = "aesnr.csv";

const MSE_HEADER: [&str; 6] = [
    "snr_db",
    "method",
    "mse_bl",
    "mse_al_coeff",
    "mse_al_time",
    "ml_singular_count",
];
const AESNR_HEADER: [&str; 4] = ["snr_db", "restorer", "aesnr_emp", "aesnr_theory"];

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_mse_csv<W: Write>(out: W, rows: &[MseRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MSE_HEADER)?;
    for r in rows {
        w.write_record([
            real(r.snr_db),
            r.method.to_string(),
            real(r.mse_bl),
            real(r.mse_al_coeff),
            real(r.mse_al_time),
            r.ml_singular_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aesnr_csv<W: Write>(out: W, rows: &[AesnrRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(AESNR_HEADER)?;
    for r in rows {
        w.write_record([
            real(r.snr_db),
            r.restorer.to_string(),
            real(r.aesnr_emp),
            real(r.aesnr_theory),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `mse.csv` and `aesnr.csv` into `dir`, creating it if needed.
pub fn emit_csv(result: &SweepResult, dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir)?;
    write_mse_csv(File::create(dir.join(MSE_FILE))?, &result.mse)?;
    write_aesnr_csv(File::create(dir.join(AESNR_FILE))?, &result.aesnr)?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, HarnessError> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse()
        .map_err(|_| HarnessError::Parse(format!("bad field {i} `{raw}` in {rec:?}")))
}

fn reader<R: Read>(input: R, header: &[&str]) -> Result<csv::Reader<R>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()? != header {
        return Err(HarnessError::Parse(format!(
            "expected header {}",
            header.join(",")
        )));
    }
    Ok(r)
}

pub(crate) fn parse_mse<R: Read>(input: R) -> Result<Vec<MseRow>, HarnessError> {
    let mut r = reader(input, &MSE_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(MseRow {
                snr_db: field(&rec, 0)?,
                method: rec[1].parse().map_err(HarnessError::Parse)?,
                mse_bl: field(&rec, 2)?,
                mse_al_coeff: field(&rec, 3)?,
                mse_al_time: field(&rec, 4)?,
                ml_singular_count: field(&rec, 5)?,
            })
        })
        .collect()
}

pub(crate) fn parse_aesnr<R: Read>(input: R) -> Result<Vec<AesnrRow>, HarnessError> {
    let mut r = reader(input, &AESNR_HEADER)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(AesnrRow {
                snr_db: field(&rec, 0)?,
                restorer: rec[1].parse().map_err(HarnessError::Parse)?,
                aesnr_emp: field(&rec, 2)?,
                aesnr_theory: field(&rec, 3)?,
            })
        })
        .collect()
}

/// Reads back the two files written by [`emit_csv`].
pub fn read_csv(dir: &Path) -> Result<SweepResult, HarnessError> {
    Ok(SweepResult {
        mse: parse_mse(File::open(dir.join(MSE_FILE))?)?,
        aesnr: parse_aesnr(File::open(dir.join(AESNR_FILE))?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Method, Restorer};

    #[test]
    fn empty_result_is_header_only() {
        let mut buf = Vec::new();
        write_mse_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,method,mse_bl,mse_al_coeff,mse_al_time,ml_singular_count\n"
        );
        let mut buf = Vec::new();
        write_aesnr_csv(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "snr_db,restorer,aesnr_emp,aesnr_theory\n"
        );
    }

    #[test]
    fn awkward_values_round_trip() {
        let rows = vec![
            MseRow {
                snr_db: -2.5,
                method: Method::Ml,
                mse_bl: 0.1 + 0.2,
                mse_al_coeff: f64::INFINITY,
                mse_al_time: 5e-324,
                ml_singular_count: 3,
            },
            MseRow {
                snr_db: 1.0 / 3.0,
                method: Method::Map,
                mse_bl: 1.2345678901234567e300,
                mse_al_coeff: 0.0,
                mse_al_time: std::f64::consts::PI,
                ml_singular_count: 0,
            },
        ];
        let mut buf = Vec::new();
        write_mse_csv(&mut buf, &rows).unwrap();
        assert!(!buf.contains(&b'\r'));
        assert_eq!(parse_mse(buf.as_slice()).unwrap(), rows);

        let rows = vec![AesnrRow {
            snr_db: 30.0,
            restorer: Restorer::Owa,
            aesnr_emp: 123.456,
            aesnr_theory: 0.7 * 3.0,
        }];
        let mut buf = Vec::new();
        write_aesnr_csv(&mut buf, &rows).unwrap();
        assert_eq!(parse_aesnr(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(parse_mse("a,b\n1,2\n".as_bytes()).is_err());
        let bad = "snr_db,restorer,aesnr_emp,aesnr_theory\n0,owa,x,1\n";
        assert!(parse_aesnr(bad.as_bytes()).is_err());
    }
}
