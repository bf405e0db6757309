use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// A CSV file read as strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("missing CSV column {name:?}")))
    }

    /// Column parsed as floats.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[c]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Schema(format!("row {}: {name} = {:?} is not a number", r + 1, row[c])))
            })
            .collect()
    }
}

/// Comma-separated with a header row and LF line endings. Floats should be
/// formatted with `{}` (shortest round-trip form) by the caller.
pub fn write_csv<I, R>(path: &Path, headers: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(File::create(path)?);
    w.write_record(headers)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let rows = vec![vec![format!("{}", 0.1), "a".into()], vec![format!("{}", 0.0025), "b".into()]];
        write_csv(&p, &["x", "name"], rows).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "x,name\n0.1,a\n0.0025,b\n");
        let t = read_csv(&p).unwrap();
        assert_eq!(t.floats("x").unwrap(), vec![0.1, 0.0025]);
        assert!(t.floats("y").is_err());
        assert!(t.floats("name").is_err());
    }
}
