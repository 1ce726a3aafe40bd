//! CSV formats for concepts, representations, labels and features.
//!
//! * concepts: header `c_1,…,c_k`, one integer per cell;
//! * representations: header `r_<i>_<j>` (concept `i`, dimension `j`, both
//!   1-based), listed concept-major;
//! * labels: one integer per line, optionally under a `y` header;
//! * features: any header, real cells.
//!
//! Row numbers in errors count data rows from 1.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, Array3, ArrayView2};

use crate::data::{ConceptDataset, RepresentationSet};
use crate::error::{Error, Result};

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?)
}

fn malformed_header(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn cell_error(path: &Path, row: usize, reason: impl Into<String>) -> Error {
    Error::MalformedCell {
        path: path.to_path_buf(),
        row,
        reason: reason.into(),
    }
}

fn read_rows<T>(
    path: &Path,
    width: usize,
    mut parse: impl FnMut(usize, &str) -> Result<T>,
) -> Result<(Vec<T>, usize)> {
    let mut rdr = reader(path)?;
    let mut cells = Vec::new();
    let mut rows = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != width {
            return Err(cell_error(path, row, format!("expected {width} cells, found {}", record.len())));
        }
        for field in record.iter() {
            cells.push(parse(row, field)?);
        }
        rows += 1;
    }
    Ok((cells, rows))
}

fn header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = reader(path)?;
    Ok(rdr.headers()?.iter().map(str::to_owned).collect())
}

/// Reads a concept table. With `binary` set, any value other than 0/1 is
/// rejected.
pub fn read_concepts(path: &Path, binary: bool) -> Result<ConceptDataset> {
    let names = header(path)?;
    if names.is_empty() {
        return Err(malformed_header(path, "no columns"));
    }
    for (j, name) in names.iter().enumerate() {
        if *name != format!("c_{}", j + 1) {
            return Err(malformed_header(path, format!("column {} is `{name}`, expected `c_{}`", j + 1, j + 1)));
        }
    }
    let (cells, rows) = read_rows(path, names.len(), |row, field| {
        let v: u32 = field
            .parse()
            .map_err(|_| cell_error(path, row, format!("`{field}` is not a non-negative integer")))?;
        if binary && v > 1 {
            return Err(Error::NonBinaryConcept {
                path: path.to_path_buf(),
                row,
                value: field.to_owned(),
            });
        }
        Ok(v)
    })?;
    let concepts = Array2::from_shape_vec((rows, names.len()), cells).expect("rectangular table");
    if binary {
        ConceptDataset::new(concepts)
    } else {
        ConceptDataset::new_multiclass(concepts)
    }
}

fn parse_rep_name(name: &str) -> Option<(usize, usize)> {
    let rest = name.strip_prefix("r_")?;
    let (i, j) = rest.split_once('_')?;
    Some((i.parse().ok()?, j.parse().ok()?))
}

/// Reads a representation table. Columns must cover every `(i, j)` with
/// `1 ≤ i ≤ k′`, `1 ≤ j ≤ d` in concept-major order. The result is marked
/// aligned (column block `i` belongs to concept `i`).
pub fn read_reps(path: &Path) -> Result<RepresentationSet> {
    let names = header(path)?;
    let parsed = names
        .iter()
        .map(|n| parse_rep_name(n).ok_or_else(|| malformed_header(path, format!("`{n}` is not of the form r_<i>_<j>"))))
        .collect::<Result<Vec<_>>>()?;
    let d = parsed.iter().take_while(|(i, _)| *i == 1).count();
    if d == 0 || parsed.len() % d != 0 {
        return Err(malformed_header(path, "representation blocks must share one width"));
    }
    let kp = parsed.len() / d;
    for (pos, &(i, j)) in parsed.iter().enumerate() {
        if (i, j) != (pos / d + 1, pos % d + 1) {
            return Err(malformed_header(
                path,
                format!("column {} is `{}`, expected `r_{}_{}`", pos + 1, names[pos], pos / d + 1, pos % d + 1),
            ));
        }
    }
    let (cells, rows) = read_rows(path, names.len(), |row, field| {
        let v: f64 = field
            .parse()
            .map_err(|_| cell_error(path, row, format!("`{field}` is not a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(cell_error(path, row, format!("`{field}` is not finite")))
        }
    })?;
    let reps = Array3::from_shape_vec((rows, kp, d), cells).expect("rectangular table");
    Ok(RepresentationSet::new(reps, true)?.with_provenance(path.display().to_string()))
}

pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut row = 0;
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (line_no == 0 && line == "y") {
            continue;
        }
        row += 1;
        labels.push(
            line.parse()
                .map_err(|_| cell_error(path, row, format!("`{line}` is not a non-negative integer")))?,
        );
    }
    Ok(labels)
}

pub fn read_features(path: &Path) -> Result<Array2<f64>> {
    let width = header(path)?.len();
    let (cells, rows) = read_rows(path, width, |row, field| {
        field
            .parse::<f64>()
            .map_err(|_| cell_error(path, row, format!("`{field}` is not a number")))
    })?;
    Ok(Array2::from_shape_vec((rows, width), cells).expect("rectangular table"))
}

fn row_check(left: &Path, left_rows: usize, right: &Path, right_rows: usize) -> Result<()> {
    if left_rows != right_rows {
        return Err(Error::RowCountMismatch {
            left: left.to_path_buf(),
            left_rows,
            right: right.to_path_buf(),
            right_rows,
        });
    }
    Ok(())
}

/// Loads binary concepts and representations, plus optional labels and
/// features, checking that every table has the same number of rows.
pub fn load_tables(
    concepts_path: &Path,
    reps_path: &Path,
    labels_path: Option<&Path>,
    features_path: Option<&Path>,
) -> Result<(ConceptDataset, RepresentationSet)> {
    let mut concepts = read_concepts(concepts_path, true)?;
    let reps = read_reps(reps_path)?;
    row_check(concepts_path, concepts.n(), reps_path, reps.n())?;
    if let Some(path) = labels_path {
        let labels = read_labels(path)?;
        row_check(concepts_path, concepts.n(), path, labels.len())?;
        concepts = concepts.with_labels(labels)?;
    }
    if let Some(path) = features_path {
        let features = read_features(path)?;
        row_check(concepts_path, concepts.n(), path, features.nrows())?;
        concepts = concepts.with_features(features)?;
    }
    Ok((concepts, reps))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_table<T: std::fmt::Display>(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<T>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(ToString::to_string))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_concepts(path: &Path, data: &ConceptDataset) -> Result<()> {
    let header: Vec<String> = (1..=data.k()).map(|j| format!("c_{j}")).collect();
    write_table(path, &header, data.concepts().rows().into_iter().map(|r| r.to_vec()))
}

/// Writes representations with full round-trip precision.
pub fn write_reps(path: &Path, reps: &RepresentationSet) -> Result<()> {
    let header: Vec<String> = (1..=reps.n_concepts())
        .flat_map(|i| (1..=reps.dim()).map(move |j| format!("r_{i}_{j}")))
        .collect();
    let flat = reps.flatten();
    write_table(path, &header, flat.rows().into_iter().map(|r| r.to_vec()))
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "y")?;
    for y in labels {
        writeln!(w, "{y}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_features(path: &Path, features: ArrayView2<'_, f64>) -> Result<()> {
    let header: Vec<String> = (1..=features.ncols()).map(|j| format!("x_{j}")).collect();
    write_table(path, &header, features.rows().into_iter().map(|r| r.to_vec()))
}

/// Square-or-rectangular matrix with six decimals; `None` becomes an empty
/// cell. Columns are headed `c_1,…`.
pub fn write_matrix_csv(path: &Path, values: ArrayView2<'_, Option<f64>>) -> Result<()> {
    let header: Vec<String> = (1..=values.ncols()).map(|j| format!("c_{j}")).collect();
    let rows = values.rows().into_iter().map(|r| {
        r.iter()
            .map(|v| v.map_or_else(String::new, |v| format!("{v:.6}")))
            .collect::<Vec<_>>()
    });
    write_table(path, &header, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_correlated_concepts, gen_impure_reps};
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn loads_small_tables() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "c_1,c_2\n0,1\n1,1\n0,0\n");
        let r = write(dir.path(), "r.csv", "r_1_1,r_2_1\n0.1,0.9\n0.8,0.7\n0.2,0.1\n");
        let (d, reps) = load_tables(&c, &r, None, None).unwrap();
        assert_eq!((d.n(), d.k()), (3, 2));
        assert_eq!((reps.n(), reps.n_concepts(), reps.dim()), (3, 2, 1));
        assert_eq!(reps.scalar(1), vec![0.9, 0.7, 0.1]);
    }

    #[test]
    fn row_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "c_1\n0\n1\n0\n");
        let r = write(dir.path(), "r.csv", "r_1_1\n0.1\n0.8\n0.2\n0.3\n");
        match load_tables(&c, &r, None, None) {
            Err(Error::RowCountMismatch { left_rows: 3, right_rows: 4, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_binary_value_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "c_1,c_2\n0,1\n1,2\n");
        match read_concepts(&c, true) {
            Err(Error::NonBinaryConcept { row: 2, value, .. }) => assert_eq!(value, "2"),
            other => panic!("{other:?}"),
        }
        assert_eq!(read_concepts(&c, false).unwrap().classes(1), 3);
    }

    #[test]
    fn bad_headers() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(dir.path(), "c.csv", "c_1,c_3\n0,1\n");
        assert!(matches!(read_concepts(&c, true), Err(Error::MalformedHeader { .. })));
        let r = write(dir.path(), "r.csv", "r_1_1,r_1_2,r_2_1\n0,0,0\n");
        assert!(matches!(read_reps(&r), Err(Error::MalformedHeader { .. })));
        let r = write(dir.path(), "r2.csv", "r_1_1,x\n0,0\n");
        assert!(matches!(read_reps(&r), Err(Error::MalformedHeader { .. })));
        let r = write(dir.path(), "r3.csv", "r_2_1,r_1_1\n0,0\n");
        assert!(matches!(read_reps(&r), Err(Error::MalformedHeader { .. })));
    }

    #[test]
    fn bad_cells() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "r.csv", "r_1_1\n0.5\nabc\n");
        assert!(matches!(read_reps(&r), Err(Error::MalformedCell { row: 2, .. })));
        let y = write(dir.path(), "y.csv", "y\n1\n-1\n");
        assert!(matches!(read_labels(&y), Err(Error::MalformedCell { row: 2, .. })));
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = gen_correlated_concepts(50, 4, 0.25, 3).unwrap();
        let reps = gen_impure_reps(&d, 3).unwrap();
        let (cp, rp) = (dir.path().join("c.csv"), dir.path().join("r.csv"));
        write_concepts(&cp, &d).unwrap();
        write_reps(&rp, &reps).unwrap();
        let (d2, reps2) = load_tables(&cp, &rp, None, None).unwrap();
        assert_eq!(d2.concepts(), d.concepts());
        assert_eq!(reps2.values(), reps.values());

        let labels: Vec<u32> = (0..50).map(|r| r % 2).collect();
        let features = Array2::from_shape_fn((50, 3), |(r, c)| (r as f64).sin() * (c as f64 + 0.1));
        let (yp, fp) = (dir.path().join("y.csv"), dir.path().join("x.csv"));
        write_labels(&yp, &labels).unwrap();
        write_features(&fp, features.view()).unwrap();
        let (d3, _) = load_tables(&cp, &rp, Some(&yp), Some(&fp)).unwrap();
        assert_eq!(d3.labels().unwrap(), &labels[..]);
        assert_eq!(d3.features().unwrap(), features.view());
    }

    #[test]
    fn multi_dimensional_reps() {
        let dir = tempfile::tempdir().unwrap();
        let r = write(dir.path(), "r.csv", "r_1_1,r_1_2,r_2_1,r_2_2\n1,2,3,4\n5,6,7,8\n");
        let reps = read_reps(&r).unwrap();
        assert_eq!(reps.dim(), 2);
        assert_eq!(reps.concept(1).row(1).to_vec(), vec![7.0, 8.0]);
    }

    #[test]
    fn matrix_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = ndarray::array![[Some(1.0), Some(0.123_456_789)], [None, Some(0.5)]];
        write_matrix_csv(&p, m.view()).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "c_1,c_2\n1.000000,0.123457\n,0.500000\n");
    }
}
