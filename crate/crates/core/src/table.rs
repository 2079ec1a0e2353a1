//! Tab-separated tables with a header row; `#` lines are comments.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Header plus data rows of a tab-separated table, `#` lines skipped.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Schema(format!("{}: no header row", path.display())))?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, l) in lines.enumerate() {
        let f: Vec<String> = l.split('\t').map(str::to_string).collect();
        if f.len() != header.len() {
            return Err(Error::Format(format!(
                "{}: data row {} has {} fields, header has {}",
                path.display(),
                k + 1,
                f.len(),
                header.len()
            )));
        }
        rows.push(f);
    }
    Ok((header, rows))
}

pub fn column(header: &[String], name: &str, path: &Path) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Schema(format!("{}: missing column {name}", path.display())))
}

pub fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("{}: '{s}' is not a number", path.display())))
}

/// (FID, IID) pair identifying a sample.
pub type SampleKey = (String, String);

/// One numeric column keyed by (FID, IID). `name = None` takes the first
/// column after FID and IID. `NA` values are dropped.
pub fn read_sample_column(path: &Path, name: Option<&str>) -> Result<BTreeMap<SampleKey, f64>> {
    let (h, rows) = read_table(path)?;
    let fid = column(&h, "FID", path)?;
    let iid = column(&h, "IID", path)?;
    let c = match name {
        Some(n) => column(&h, n, path)?,
        None => (0..h.len())
            .find(|&k| k != fid && k != iid)
            .ok_or_else(|| Error::Schema(format!("{}: no value column", path.display())))?,
    };
    let mut out = BTreeMap::new();
    for r in rows {
        if r[c] == "NA" {
            continue;
        }
        let v = parse_f64(&r[c], path)?;
        if out.insert((r[fid].clone(), r[iid].clone()), v).is_some() {
            return Err(Error::Format(format!("{}: duplicate sample {} {}", path.display(), r[fid], r[iid])));
        }
    }
    Ok(out)
}

/// Sample keys listed in a file with FID and IID columns (header optional:
/// a file whose first row is not `FID IID` is read as bare pairs).
pub fn read_sample_ids(path: &Path) -> Result<Vec<SampleKey>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, l) in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 2 {
            return Err(Error::Format(format!("{}: line {} needs FID and IID", path.display(), k + 1)));
        }
        if k == 0 && f[0] == "FID" && f[1] == "IID" {
            continue;
        }
        out.push((f[0].to_string(), f[1].to_string()));
    }
    Ok(out)
}
