//! Matrix file formats: NIST Matrix Market (array and coordinate) and a raw
//! little-endian binary format for large fixtures.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mat::{AnyMat, Mat};

/// Densified matrices are capped at 10^8 entries.
pub const MAX_ENTRIES: u64 = 100_000_000;

const BINARY_MAGIC: &[u8; 8] = b"CURMAT01";

/// Read a matrix from disk, dispatching on content: the raw binary magic or
/// a Matrix Market banner.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<AnyMat> {
    let path = path.as_ref();
    let mut file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut magic = [0u8; 8];
    let n_read = file
        .read(&mut magic)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    drop(file);
    if n_read == 8 && &magic == BINARY_MAGIC {
        read_binary(path)
    } else {
        let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        parse_matrix_market(BufReader::new(file))
    }
}

// ---------------------------------------------------------------------------
// Matrix Market
// ---------------------------------------------------------------------------

#[derive(PartialEq, Clone, Copy)]
enum MmFormat {
    Array,
    Coordinate,
}

#[derive(PartialEq, Clone, Copy)]
enum MmField {
    Real,
    Integer,
    Complex,
    Pattern,
}

#[derive(PartialEq, Clone, Copy)]
enum MmSymmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

/// Parse a Matrix Market stream into a dense matrix. Coordinate input is
/// densified; duplicate coordinate entries are summed per the format
/// convention; symmetric/hermitian storage is expanded.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<AnyMat> {
    let mut lines = reader.lines().enumerate();

    let banner_line = match lines.next() {
        Some((_, Ok(line))) => line,
        Some((_, Err(e))) => return Err(Error::parse("line 1", e.to_string())),
        None => return Err(Error::parse("line 1", "empty file")),
    };
    let tokens: Vec<&str> = banner_line.split_whitespace().collect();
    if tokens.len() < 5 || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(Error::parse(
            "line 1",
            "expected banner %%MatrixMarket matrix <format> <field> <symmetry>",
        ));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix") {
        return Err(Error::parse(
            "line 1",
            "only the 'matrix' object is supported",
        ));
    }
    let format = match tokens[2].to_ascii_lowercase().as_str() {
        "array" => MmFormat::Array,
        "coordinate" => MmFormat::Coordinate,
        other => return Err(Error::parse("line 1", format!("unknown format '{other}'"))),
    };
    let field = match tokens[3].to_ascii_lowercase().as_str() {
        "real" => MmField::Real,
        "integer" => MmField::Integer,
        "complex" => MmField::Complex,
        "pattern" => MmField::Pattern,
        other => return Err(Error::parse("line 1", format!("unknown field '{other}'"))),
    };
    let symmetry = match tokens[4].to_ascii_lowercase().as_str() {
        "general" => MmSymmetry::General,
        "symmetric" => MmSymmetry::Symmetric,
        "skew-symmetric" => MmSymmetry::SkewSymmetric,
        "hermitian" => MmSymmetry::Hermitian,
        other => {
            return Err(Error::parse(
                "line 1",
                format!("unknown symmetry '{other}'"),
            ))
        }
    };
    if format == MmFormat::Array && field == MmField::Pattern {
        return Err(Error::parse(
            "line 1",
            "pattern field requires coordinate format",
        ));
    }

    // Size line: first non-comment, non-blank line.
    let mut size_line = None;
    for (idx, line) in lines.by_ref() {
        let line = line.map_err(|e| Error::parse(format!("line {}", idx + 1), e.to_string()))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some((idx + 1, trimmed.to_string()));
        break;
    }
    let (size_lineno, size_line) =
        size_line.ok_or_else(|| Error::parse("end of file", "missing size line"))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();

    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::parse(format!("line {size_lineno}"), format!("bad {what} '{s}'")))
    };

    let (m, n, nnz) = match format {
        MmFormat::Array => {
            if dims.len() != 2 {
                return Err(Error::parse(
                    format!("line {size_lineno}"),
                    "array size line must be 'm n'",
                ));
            }
            (
                parse_dim(dims[0], "row count")?,
                parse_dim(dims[1], "column count")?,
                0usize,
            )
        }
        MmFormat::Coordinate => {
            if dims.len() != 3 {
                return Err(Error::parse(
                    format!("line {size_lineno}"),
                    "coordinate size line must be 'm n nnz'",
                ));
            }
            (
                parse_dim(dims[0], "row count")?,
                parse_dim(dims[1], "column count")?,
                parse_dim(dims[2], "nonzero count")?,
            )
        }
    };
    if m == 0 || n == 0 {
        return Err(Error::parse(
            format!("line {size_lineno}"),
            "zero dimension",
        ));
    }
    if (m as u64) * (n as u64) > MAX_ENTRIES {
        return Err(Error::invalid(format!(
            "matrix of {m} x {n} entries exceeds the {MAX_ENTRIES}-entry densification guard"
        )));
    }

    let complex = field == MmField::Complex;
    let mut re = Mat::<f64>::zeros(m, n);
    let mut im = if complex {
        Some(Mat::<f64>::zeros(m, n))
    } else {
        None
    };

    let mut data_lines = lines.filter_map(|(idx, line)| match line {
        Ok(l) => {
            let t = l.trim().to_string();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((idx + 1, t)))
            }
        }
        Err(e) => Some(Err(Error::parse(
            format!("line {}", idx + 1),
            e.to_string(),
        ))),
    });

    match format {
        MmFormat::Array => {
            // Array data is listed column-major.
            let total = m * n;
            let mut count = 0usize;
            while count < total {
                let (lineno, line) = data_lines.next().ok_or_else(|| {
                    Error::parse(
                        "end of file",
                        format!("expected {total} entries, got {count}"),
                    )
                })??;
                let parts: Vec<&str> = line.split_whitespace().collect();
                let vals: Vec<f64> = parts
                    .iter()
                    .map(|p| {
                        p.parse::<f64>().map_err(|_| {
                            Error::parse(format!("line {lineno}"), format!("bad number '{p}'"))
                        })
                    })
                    .collect::<Result<_>>()?;
                let per_entry = if complex { 2 } else { 1 };
                if vals.is_empty() || !vals.len().is_multiple_of(per_entry) {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        "value count does not match the entry field",
                    ));
                }
                for chunk in vals.chunks(per_entry) {
                    if count >= total {
                        return Err(Error::parse(format!("line {lineno}"), "too many entries"));
                    }
                    let j = count / m;
                    let i = count % m;
                    re[(i, j)] = chunk[0];
                    if let Some(imm) = im.as_mut() {
                        imm[(i, j)] = chunk[1];
                    }
                    count += 1;
                }
            }
        }
        MmFormat::Coordinate => {
            for _ in 0..nnz {
                let (lineno, line) = data_lines.next().ok_or_else(|| {
                    Error::parse("end of file", format!("expected {nnz} entries"))
                })??;
                let parts: Vec<&str> = line.split_whitespace().collect();
                let expected = match field {
                    MmField::Pattern => 2,
                    MmField::Complex => 4,
                    _ => 3,
                };
                if parts.len() != expected {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        format!("expected {expected} tokens, found {}", parts.len()),
                    ));
                }
                let i: usize = parts[0].parse().map_err(|_| {
                    Error::parse(
                        format!("line {lineno}"),
                        format!("bad row index '{}'", parts[0]),
                    )
                })?;
                let j: usize = parts[1].parse().map_err(|_| {
                    Error::parse(
                        format!("line {lineno}"),
                        format!("bad column index '{}'", parts[1]),
                    )
                })?;
                if i == 0 || j == 0 || i > m || j > n {
                    return Err(Error::parse(
                        format!("line {lineno}"),
                        format!("index ({i}, {j}) outside 1..={m} x 1..={n}"),
                    ));
                }
                let (vr, vi) = match field {
                    MmField::Pattern => (1.0, 0.0),
                    MmField::Complex => {
                        let vr: f64 = parts[2].parse().map_err(|_| {
                            Error::parse(
                                format!("line {lineno}"),
                                format!("bad number '{}'", parts[2]),
                            )
                        })?;
                        let vi: f64 = parts[3].parse().map_err(|_| {
                            Error::parse(
                                format!("line {lineno}"),
                                format!("bad number '{}'", parts[3]),
                            )
                        })?;
                        (vr, vi)
                    }
                    _ => {
                        let vr: f64 = parts[2].parse().map_err(|_| {
                            Error::parse(
                                format!("line {lineno}"),
                                format!("bad number '{}'", parts[2]),
                            )
                        })?;
                        (vr, 0.0)
                    }
                };
                // Duplicates are summed (Matrix Market convention).
                let (i, j) = (i - 1, j - 1);
                re[(i, j)] += vr;
                if let Some(imm) = im.as_mut() {
                    imm[(i, j)] += vi;
                }
                if symmetry != MmSymmetry::General && i != j {
                    let (sr, si) = match symmetry {
                        MmSymmetry::Symmetric => (vr, vi),
                        MmSymmetry::SkewSymmetric => (-vr, -vi),
                        MmSymmetry::Hermitian => (vr, -vi),
                        MmSymmetry::General => unreachable!(),
                    };
                    re[(j, i)] += sr;
                    if let Some(imm) = im.as_mut() {
                        imm[(j, i)] += si;
                    }
                }
            }
        }
    }

    // Array-format symmetric storage holds the lower triangle only.
    if format == MmFormat::Array && symmetry != MmSymmetry::General {
        for i in 0..m {
            for j in (i + 1)..n.min(m) {
                let vr = re[(j, i)];
                let vi = im.as_ref().map(|imm| imm[(j, i)]).unwrap_or(0.0);
                let (sr, si) = match symmetry {
                    MmSymmetry::Symmetric => (vr, vi),
                    MmSymmetry::SkewSymmetric => (-vr, -vi),
                    MmSymmetry::Hermitian => (vr, -vi),
                    MmSymmetry::General => unreachable!(),
                };
                re[(i, j)] = sr;
                if let Some(imm) = im.as_mut() {
                    imm[(i, j)] = si;
                }
            }
        }
    }

    let out = match im {
        None => AnyMat::Real(re),
        Some(imm) => AnyMat::Complex(Mat::from_fn(m, n, |i, j| {
            Complex64::new(re[(i, j)], imm[(i, j)])
        })),
    };
    ensure_finite(&out)?;
    Ok(out)
}

fn ensure_finite(mat: &AnyMat) -> Result<()> {
    let finite = match mat {
        AnyMat::Real(a) => a.all_finite(),
        AnyMat::Complex(a) => a.all_finite(),
    };
    if finite {
        Ok(())
    } else {
        Err(Error::invalid("matrix contains non-finite entries"))
    }
}

fn open_writer(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// Write dense array format (data column-major, per the NIST spec).
pub fn write_matrix_market_array(path: impl AsRef<Path>, mat: &AnyMat) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let (m, n) = mat.shape();
    match mat {
        AnyMat::Real(a) => {
            writeln!(w, "%%MatrixMarket matrix array real general").map_err(io_err)?;
            writeln!(w, "{m} {n}").map_err(io_err)?;
            for j in 0..n {
                for i in 0..m {
                    writeln!(w, "{:.17e}", a[(i, j)]).map_err(io_err)?;
                }
            }
        }
        AnyMat::Complex(a) => {
            writeln!(w, "%%MatrixMarket matrix array complex general").map_err(io_err)?;
            writeln!(w, "{m} {n}").map_err(io_err)?;
            for j in 0..n {
                for i in 0..m {
                    writeln!(w, "{:.17e} {:.17e}", a[(i, j)].re, a[(i, j)].im).map_err(io_err)?;
                }
            }
        }
    }
    w.flush().map_err(io_err)
}

/// Write coordinate format with all structurally nonzero entries.
pub fn write_matrix_market_coordinate(path: impl AsRef<Path>, mat: &AnyMat) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let (m, n) = mat.shape();
    match mat {
        AnyMat::Real(a) => {
            let nnz = (0..m)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| a[(i, j)] != 0.0)
                .count();
            writeln!(w, "%%MatrixMarket matrix coordinate real general").map_err(io_err)?;
            writeln!(w, "{m} {n} {nnz}").map_err(io_err)?;
            for i in 0..m {
                for j in 0..n {
                    if a[(i, j)] != 0.0 {
                        writeln!(w, "{} {} {:.17e}", i + 1, j + 1, a[(i, j)]).map_err(io_err)?;
                    }
                }
            }
        }
        AnyMat::Complex(a) => {
            let zero = Complex64::new(0.0, 0.0);
            let nnz = (0..m)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| a[(i, j)] != zero)
                .count();
            writeln!(w, "%%MatrixMarket matrix coordinate complex general").map_err(io_err)?;
            writeln!(w, "{m} {n} {nnz}").map_err(io_err)?;
            for i in 0..m {
                for j in 0..n {
                    let v = a[(i, j)];
                    if v != zero {
                        writeln!(w, "{} {} {:.17e} {:.17e}", i + 1, j + 1, v.re, v.im)
                            .map_err(io_err)?;
                    }
                }
            }
        }
    }
    w.flush().map_err(io_err)
}

/// Raw binary: magic, u64 rows, u64 cols, u8 field tag (0 real / 1 complex),
/// then row-major little-endian doubles (re, im pairs when complex).
pub fn write_binary(path: impl AsRef<Path>, mat: &AnyMat) -> Result<()> {
    let path = path.as_ref();
    let mut w = open_writer(path)?;
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let (m, n) = mat.shape();
    w.write_all(BINARY_MAGIC).map_err(io_err)?;
    w.write_all(&(m as u64).to_le_bytes()).map_err(io_err)?;
    w.write_all(&(n as u64).to_le_bytes()).map_err(io_err)?;
    match mat {
        AnyMat::Real(a) => {
            w.write_all(&[0u8]).map_err(io_err)?;
            for i in 0..m {
                for j in 0..n {
                    w.write_all(&a[(i, j)].to_le_bytes()).map_err(io_err)?;
                }
            }
        }
        AnyMat::Complex(a) => {
            w.write_all(&[1u8]).map_err(io_err)?;
            for i in 0..m {
                for j in 0..n {
                    w.write_all(&a[(i, j)].re.to_le_bytes()).map_err(io_err)?;
                    w.write_all(&a[(i, j)].im.to_le_bytes()).map_err(io_err)?;
                }
            }
        }
    }
    w.flush().map_err(io_err)
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<AnyMat> {
    let path = path.as_ref();
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let mut r = BufReader::new(File::open(path).map_err(io_err)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::parse(path.display().to_string(), "bad binary magic"));
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8).map_err(io_err)?;
    let m = u64::from_le_bytes(buf8);
    r.read_exact(&mut buf8).map_err(io_err)?;
    let n = u64::from_le_bytes(buf8);
    if m == 0 || n == 0 {
        return Err(Error::parse(path.display().to_string(), "zero dimension"));
    }
    if m * n > MAX_ENTRIES {
        return Err(Error::invalid(format!(
            "matrix of {m} x {n} entries exceeds the {MAX_ENTRIES}-entry guard"
        )));
    }
    let (m, n) = (m as usize, n as usize);
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag).map_err(io_err)?;
    fn read_f64(r: &mut BufReader<File>, path: &Path) -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Ok(f64::from_le_bytes(b))
    }
    let out = match tag[0] {
        0 => {
            let mut a = Mat::<f64>::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    a[(i, j)] = read_f64(&mut r, path)?;
                }
            }
            AnyMat::Real(a)
        }
        1 => {
            let mut a = Mat::<Complex64>::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    let re = read_f64(&mut r, path)?;
                    let im = read_f64(&mut r, path)?;
                    a[(i, j)] = Complex64::new(re, im);
                }
            }
            AnyMat::Complex(a)
        }
        t => {
            return Err(Error::parse(
                path.display().to_string(),
                format!("unknown field tag {t}"),
            ))
        }
    };
    ensure_finite(&out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse_str(s: &str) -> Result<AnyMat> {
        parse_matrix_market(Cursor::new(s.as_bytes()))
    }

    #[test]
    fn array_format_exact_entries() {
        let src =
            "%%MatrixMarket matrix array real general\n% a comment\n2 2\n1.0\n3.0\n2.0\n4.0\n";
        let m = parse_str(src).unwrap().expect_real().unwrap();
        // Column-major data order.
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(m[(0, 1)], 2.0);
        assert_eq!(m[(1, 1)], 4.0);
    }

    #[test]
    fn coordinate_duplicates_sum() {
        let src =
            "%%MatrixMarket matrix coordinate real general\n2 2 3\n1 1 1.5\n1 1 2.5\n2 2 1.0\n";
        let m = parse_str(src).unwrap().expect_real().unwrap();
        assert_eq!(m[(0, 0)], 4.0);
        assert_eq!(m[(1, 1)], 1.0);
        assert_eq!(m[(0, 1)], 0.0);
    }

    #[test]
    fn symmetric_coordinate_expands() {
        let src = "%%MatrixMarket matrix coordinate real symmetric\n3 3 2\n2 1 5.0\n3 3 1.0\n";
        let m = parse_str(src).unwrap().expect_real().unwrap();
        assert_eq!(m[(1, 0)], 5.0);
        assert_eq!(m[(0, 1)], 5.0);
        assert_eq!(m[(2, 2)], 1.0);
    }

    #[test]
    fn non_finite_entries_rejected() {
        let src = "%%MatrixMarket matrix array real general\n1 2\n1.0\nnan\n";
        let err = parse_str(src).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{err}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let src = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 5 3.0\n";
        let err = parse_str(src).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");

        let src = "%%MatrixMarket matrix array real general\n2 2\n1.0\nnot_a_number\n";
        let err = parse_str(src).unwrap_err();
        assert!(err.to_string().contains("line 4"), "{err}");
    }

    #[test]
    fn roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let a = Mat::from_rows(vec![vec![1.0, 0.0, -2.5], vec![0.0, 3.25, 4.0]]);
        let any = AnyMat::Real(a.clone());

        let p1 = dir.path().join("m.mtx");
        write_matrix_market_array(&p1, &any).unwrap();
        let back = read_matrix(&p1).unwrap().expect_real().unwrap();
        assert_eq!(back, a);

        let p2 = dir.path().join("m_coord.mtx");
        write_matrix_market_coordinate(&p2, &any).unwrap();
        let back = read_matrix(&p2).unwrap().expect_real().unwrap();
        assert_eq!(back, a);

        let p3 = dir.path().join("m.bin");
        write_binary(&p3, &any).unwrap();
        let back = read_matrix(&p3).unwrap().expect_real().unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn complex_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = Mat::from_fn(2, 3, |i, j| Complex64::new(i as f64, j as f64 - 1.0));
        let any = AnyMat::Complex(a.clone());
        let p = dir.path().join("c.mtx");
        write_matrix_market_array(&p, &any).unwrap();
        match read_matrix(&p).unwrap() {
            AnyMat::Complex(b) => assert_eq!(a, b),
            _ => panic!("expected complex"),
        }
        let p = dir.path().join("c.bin");
        write_binary(&p, &any).unwrap();
        match read_matrix(&p).unwrap() {
            AnyMat::Complex(b) => assert_eq!(a, b),
            _ => panic!("expected complex"),
        }
    }
}
