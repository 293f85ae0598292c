//! File formats: point-cloud and embedding CSV, sidecar JSON, diagram JSON.
//!
//! CSV rows are points in index order. A single header row is accepted on
//! input when any of its fields is not a number; nothing else may be
//! non-numeric.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embedding::{Embedding, EmbeddingMethod, EmbeddingParams};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::persistence::PersistenceDiagram;

fn parse_row(record: &csv::StringRecord) -> Option<Vec<f64>> {
    record.iter().map(|f| f.trim().parse::<f64>().ok()).collect()
}

/// Reads a point cloud from CSV.
pub fn read_point_cloud<R: Read>(reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        match parse_row(&record) {
            Some(row) => {
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parse(format!("row {}: non-finite coordinate", line + 1)));
                }
                rows.push(row);
            }
            None if line == 0 => {}
            None => return Err(Error::Parse(format!("row {}: non-numeric field", line + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    let dim = rows[0].len();
    if let Some(i) = rows.iter().position(|r| r.len() != dim) {
        return Err(Error::Parse(format!("row {} has {} columns, expected {dim}", i + 1, rows[i].len())));
    }
    PointCloud::from_rows(&rows)
}

pub fn read_point_cloud_file(path: impl AsRef<Path>) -> Result<PointCloud> {
    read_point_cloud(BufReader::new(File::open(path)?))
}

/// Writes one row per point with shortest round-trip decimal formatting.
pub fn write_point_cloud<W: Write>(writer: W, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let mut line = String::new();
    for p in cloud.points() {
        line.clear();
        for (i, x) in p.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            // -0.0 prints as "-0"; normalize for stable diffs.
            let x = if *x == 0.0 { 0.0 } else { *x };
            line.push_str(&format!("{x}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_point_cloud_file(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    write_point_cloud(File::create(path)?, cloud)
}

/// Reads a scalar signal: every numeric field of the CSV in row-major order,
/// after an optional header row.
pub fn read_signal<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        match parse_row(&record) {
            Some(row) => out.extend(row),
            None if line == 0 => {}
            None => return Err(Error::Parse(format!("row {}: non-numeric field", line + 1))),
        }
    }
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parse(format!("sample {i} is not finite")));
    }
    Ok(out)
}

/// Sidecar JSON stored next to an embedding CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMeta {
    pub method: EmbeddingMethod,
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub landmarks: Option<Vec<usize>>,
    #[serde(default)]
    pub params: EmbeddingParams,
}

impl EmbeddingMeta {
    pub fn of(emb: &Embedding) -> Self {
        Self {
            method: emb.method,
            n: emb.len(),
            d: emb.dim(),
            landmarks: emb.landmarks.clone(),
            params: emb.params.clone(),
        }
    }
}

/// `out.csv` → `out.json`; other names get `.json` appended.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    if csv_path.extension().is_some_and(|e| e == "csv") {
        csv_path.with_extension("json")
    } else {
        let mut s = csv_path.as_os_str().to_owned();
        s.push(".json");
        s.into()
    }
}

/// Writes the coordinates to `csv_path` and the metadata to its sidecar.
pub fn write_embedding_files(csv_path: &Path, emb: &Embedding) -> Result<()> {
    write_point_cloud_file(csv_path, &emb.coords)?;
    write_json_file(sidecar_path(csv_path), &EmbeddingMeta::of(emb))
}

/// Reads an embedding CSV; the sidecar is used when present, otherwise the
/// coordinates are tagged as a linear projection with no parameters.
pub fn read_embedding_files(csv_path: &Path) -> Result<Embedding> {
    let coords = read_point_cloud_file(csv_path)?;
    let side = sidecar_path(csv_path);
    let meta: Option<EmbeddingMeta> = if side.exists() { Some(read_json_file(&side)?) } else { None };
    match meta {
        Some(m) => {
            if m.n != coords.len() || m.d != coords.dim() {
                return Err(Error::DimensionMismatch(format!(
                    "sidecar says {}x{}, CSV has {}x{}",
                    m.n,
                    m.d,
                    coords.len(),
                    coords.dim()
                )));
            }
            Ok(Embedding { coords, method: m.method, landmarks: m.landmarks, params: m.params })
        }
        None => Ok(Embedding {
            coords,
            method: EmbeddingMethod::LinearProjection,
            landmarks: None,
            params: EmbeddingParams::default(),
        }),
    }
}

/// Pretty JSON with object keys sorted, so equal values give equal bytes.
pub fn to_sorted_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    // serde_json::Value keeps objects in a BTreeMap.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json_file<T: Serialize + ?Sized>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    std::fs::write(path, to_sorted_json(value)?)?;
    Ok(())
}

pub fn read_json_file<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// A diagram file holds either one diagram or an array of them.
pub fn parse_diagrams(text: &str) -> Result<Vec<PersistenceDiagram>> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    if v.is_array() {
        Ok(serde_json::from_value(v)?)
    } else {
        Ok(vec![serde_json::from_value(v)?])
    }
}

pub fn read_diagrams_file(path: impl AsRef<Path>) -> Result<Vec<PersistenceDiagram>> {
    parse_diagrams(&std::fs::read_to_string(path)?)
}

/// Picks the diagram of homology dimension `dim` from a file's contents.
pub fn select_diagram(diagrams: &[PersistenceDiagram], dim: usize) -> Result<&PersistenceDiagram> {
    diagrams
        .iter()
        .find(|d| d.dim == dim)
        .ok_or_else(|| Error::DimensionMismatch(format!("no dimension-{dim} diagram in input")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_optional() {
        let a = read_point_cloud("x,y\n1,2\n3,4\n".as_bytes()).unwrap();
        let b = read_point_cloud("1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert_eq!(a.point(1), &[3.0, 4.0]);
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(read_point_cloud("1,2\nx,4\n".as_bytes()).is_err());
        assert!(read_point_cloud("1,2\n3\n".as_bytes()).is_err());
        assert!(read_point_cloud("a,b\n".as_bytes()).is_err());
        assert!(read_point_cloud("1,NaN\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let cloud = PointCloud::from_rows(&[[0.1, -2.5e-17, 1.0 / 3.0], [-0.0, 1e300, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_point_cloud(&mut buf, &cloud).unwrap();
        let back = read_point_cloud(buf.as_slice()).unwrap();
        assert_eq!(back.point(0), cloud.point(0));
        assert_eq!(back.point(1)[1], 1e300);
        assert!(!String::from_utf8(buf).unwrap().contains("-0,"));
    }

    #[test]
    fn signal_reads_column_or_row() {
        assert_eq!(read_signal("v\n1\n2\n3\n".as_bytes()).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(read_signal("1,2,3\n".as_bytes()).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagrams_single_or_array() {
        let one = r#"{"dim":1,"scale_cap":null,"pairs":[[0.0,1.0],[0.5,null]]}"#;
        let d = parse_diagrams(one).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].pairs[1].1, f64::INFINITY);
        let both = format!("[{{\"dim\":0,\"scale_cap\":2.0,\"pairs\":[]}},{one}]");
        let d = parse_diagrams(&both).unwrap();
        assert_eq!(select_diagram(&d, 1).unwrap().len(), 2);
        assert!(select_diagram(&d, 2).is_err());
    }

    #[test]
    fn sorted_json_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = to_sorted_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
    }

    #[test]
    fn sidecar_names() {
        assert_eq!(sidecar_path(Path::new("a/b.csv")), Path::new("a/b.json"));
        assert_eq!(sidecar_path(Path::new("a/b.txt")), Path::new("a/b.txt.json"));
    }
}
