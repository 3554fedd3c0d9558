//! Headerless CSV datasets: one sample per row, one real per column.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{GmmError, Result};
use crate::model::Dataset;

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut n_dims = None;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match n_dims {
            None => n_dims = Some(record.len()),
            Some(d) if d != record.len() => {
                return Err(GmmError::Format {
                    line: row + 1,
                    reason: format!("expected {d} columns, found {}", record.len()),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            match field.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(GmmError::Format {
                        line: row + 1,
                        reason: format!("bad real {field:?}"),
                    })
                }
            }
        }
    }
    let Some(n_dims) = n_dims else {
        return Err(GmmError::Format {
            line: 0,
            reason: "no samples".into(),
        });
    };
    Dataset::from_flat(data, n_dims)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| GmmError::io(path, e))?;
    read_csv(std::io::BufReader::new(file))
}

/// Writes the shortest decimal form of each value, which parses back exactly.
pub fn write_csv<W: Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut row = Vec::with_capacity(data.n_dims());
    for x in data.samples() {
        row.clear();
        row.extend(x.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| GmmError::io("<csv output>", e))?;
    Ok(())
}

pub fn save_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| GmmError::io(path, e))?;
    write_csv(data, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let d = Dataset::from_rows(&[[0.1, 1.0 / 3.0], [-2.5e-300, 7e22]]).unwrap();
        let mut buf = Vec::new();
        write_csv(&d, &mut buf).unwrap();
        assert_eq!(read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn rejects_ragged_and_bad_values() {
        assert!(matches!(read_csv("1,2\n3\n".as_bytes()), Err(_)));
        assert!(matches!(read_csv("1,x\n".as_bytes()), Err(GmmError::Format { line: 1, .. })));
        assert!(matches!(read_csv("1,NaN\n".as_bytes()), Err(GmmError::Format { .. })));
        assert!(matches!(read_csv("".as_bytes()), Err(GmmError::Format { .. })));
    }

    #[test]
    fn tolerates_spaces() {
        let d = read_csv(" 1, 2\n3 ,4\n".as_bytes()).unwrap();
        assert_eq!(d.as_flat(), &[1.0, 2.0, 3.0, 4.0]);
    }
}
