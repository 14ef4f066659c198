use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::schema::FeatureSchema;
use super::EventDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

const TRAILER: [&str; 3] = ["label", "process_id", "weight"];

/// Writes the dataset with a `features…,label,process_id,weight` header.
/// Floats use Rust's shortest round-trip formatting.
pub fn write_csv<W: Write>(ds: &EventDataset, mut w: W) -> std::io::Result<()> {
    let mut header = ds.feature_names();
    header.extend(TRAILER.iter().map(|s| s.to_string()));
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for (r, row) in ds.features.row_iter().enumerate() {
        line.clear();
        for v in row {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&format!(
            "{},{},{}",
            ds.labels[r], ds.process_ids[r], ds.weights[r]
        ));
        writeln!(w, "{line}")?;
    }
    w.flush()
}

pub fn save_csv(ds: &EventDataset, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

/// Reads a dataset written by [`save_csv`], checking the header against `schema`.
///
/// Row numbers in errors are 1-based file lines (the header is line 1);
/// column numbers are 1-based.
pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<EventDataset> {
    let file = File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingInput(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut records = rdr.records();
    let header = match records.next() {
        None => {
            return Err(Error::Csv {
                row: 1,
                col: 1,
                msg: "no header".into(),
            })
        }
        Some(h) => h.map_err(|e| csv_error(1, e))?,
    };
    let mut expected = schema.names();
    expected.extend(TRAILER.iter().map(|s| s.to_string()));
    for (c, want) in expected.iter().enumerate() {
        match header.get(c) {
            Some(got) if got == want => {}
            Some(got) => {
                return Err(Error::Csv {
                    row: 1,
                    col: c + 1,
                    msg: format!("header mismatch: expected {want:?}, found {got:?}"),
                })
            }
            None => {
                return Err(Error::Csv {
                    row: 1,
                    col: c + 1,
                    msg: format!("missing column {want:?}"),
                })
            }
        }
    }
    if header.len() > expected.len() {
        return Err(Error::Csv {
            row: 1,
            col: expected.len() + 1,
            msg: format!("unexpected extra column {:?}", &header[expected.len()]),
        });
    }

    let d = schema.len();
    let width = expected.len();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut process_ids = Vec::new();
    let mut weights = Vec::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(line, e))?;
        if rec.len() != width {
            return Err(Error::Csv {
                row: line,
                col: rec.len().min(width) + 1,
                msg: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for c in 0..d {
            data.push(parse_f64(&rec[c], line, c + 1)?);
        }
        let label: u8 = rec[d].trim().parse().map_err(|_| Error::Csv {
            row: line,
            col: d + 1,
            msg: format!("invalid label {:?}", &rec[d]),
        })?;
        if label > 1 {
            return Err(Error::Csv {
                row: line,
                col: d + 1,
                msg: format!("label must be 0 or 1, found {label}"),
            });
        }
        let pid: u16 = rec[d + 1].trim().parse().map_err(|_| Error::Csv {
            row: line,
            col: d + 2,
            msg: format!("invalid process id {:?}", &rec[d + 1]),
        })?;
        let w = parse_f64(&rec[d + 2], line, d + 3)?;
        labels.push(label);
        process_ids.push(pid);
        weights.push(w);
    }
    let n = labels.len();
    EventDataset::new(
        Matrix::from_vec(n, d, data)?,
        labels,
        process_ids,
        weights,
        schema.clone(),
    )
}

fn parse_f64(cell: &str, row: usize, col: usize) -> Result<f64> {
    match cell.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Csv {
            row,
            col,
            msg: format!("not a finite number: {cell:?}"),
        }),
    }
}

fn csv_error(row: usize, e: csv::Error) -> Error {
    Error::Csv {
        row,
        col: 0,
        msg: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{default_processes, default_schema, generate};

    #[test]
    fn round_trip_is_exact() {
        let schema = default_schema();
        let ds = generate(&default_processes(), &schema, 1000, 12).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        save_csv(&ds, &p).unwrap();
        let back = load_csv(&p, &schema).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn extra_column_rejected() {
        let schema = FeatureSchema::from_names(&["a"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "a,label,process_id,weight,zzz\n1,0,0,1,5\n").unwrap();
        let err = load_csv(&p, &schema).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 1, col: 5, .. }), "{err}");
    }

    #[test]
    fn empty_file_has_no_header() {
        let schema = FeatureSchema::from_names(&["a"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "").unwrap();
        let err = load_csv(&p, &schema).unwrap_err();
        assert!(err.to_string().contains("no header"));
    }

    #[test]
    fn bad_cell_reports_position() {
        let schema = FeatureSchema::from_names(&["a", "b"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        fs::write(&p, "a,b,label,process_id,weight\n1,2,0,0,1\n1,x,1,0,1\n").unwrap();
        let err = load_csv(&p, &schema).unwrap_err();
        assert!(matches!(err, Error::Csv { row: 3, col: 2, .. }), "{err}");

        fs::write(&p, "a,b,label,process_id,weight\n1,2,0\n").unwrap();
        assert!(matches!(load_csv(&p, &schema), Err(Error::Csv { row: 2, .. })));

        fs::write(&p, "a,c,label,process_id,weight\n").unwrap();
        assert!(matches!(load_csv(&p, &schema), Err(Error::Csv { row: 1, col: 2, .. })));
    }
}
