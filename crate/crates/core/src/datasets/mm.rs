//! Matrix Market reader and writer (`coordinate` and `array`, real general).
//!
//! Indices are 1-based on disk. Sketches are written as coordinate files with
//! a `% samples <s>` comment so the sample count survives a round trip.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseSketch, Triple};

const SAMPLES_TAG: &str = "samples";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Field {
    Real,
    Integer,
    Pattern,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
}

struct Header {
    layout: Layout,
    field: Field,
    symmetry: Symmetry,
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        reason: reason.into(),
    }
}

fn parse_header(text: &str, line: usize) -> Result<Header> {
    let words: Vec<String> = text.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(line, format!("malformed header `{}`", text.trim())));
    }
    let layout = match words[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => return Err(parse_err(line, format!("unsupported format `{other}`"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "pattern" if layout == Layout::Coordinate => Field::Pattern,
        other => return Err(parse_err(line, format!("unsupported field `{other}`"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(parse_err(line, format!("unsupported symmetry `{other}`"))),
    };
    Ok(Header {
        layout,
        field,
        symmetry,
    })
}

fn parse_usize(tok: Option<&str>, line: usize, what: &str) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

fn parse_value(tok: Option<&str>, line: usize) -> Result<f64> {
    let v: f64 = tok
        .ok_or_else(|| parse_err(line, "missing value"))?
        .parse()
        .map_err(|_| parse_err(line, "bad value"))?;
    if !v.is_finite() {
        return Err(parse_err(line, "non-finite value"));
    }
    Ok(v)
}

/// Line-oriented reader over the body of a Matrix Market file.
struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
    samples: Option<usize>,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Self {
            inner: reader.lines(),
            line: 0,
            samples: None,
        }
    }

    fn raw(&mut self) -> Result<Option<String>> {
        match self.inner.next() {
            None => Ok(None),
            Some(l) => {
                self.line += 1;
                Ok(Some(l?))
            }
        }
    }

    /// Next non-blank, non-comment line.
    fn data(&mut self) -> Result<Option<String>> {
        while let Some(l) = self.raw()? {
            let t = l.trim();
            if let Some(c) = t.strip_prefix('%') {
                let mut w = c.split_whitespace();
                if w.next() == Some(SAMPLES_TAG) {
                    self.samples = w.next().and_then(|s| s.parse().ok());
                }
                continue;
            }
            if !t.is_empty() {
                return Ok(Some(l));
            }
        }
        Ok(None)
    }
}

/// Entries of a coordinate file, 0-based, in file order.
pub struct CoordinateStream<R> {
    lines: Lines<R>,
    rows: usize,
    cols: usize,
    declared: usize,
    read: usize,
    field: Field,
    symmetry: Symmetry,
    pending: Option<Triple>,
}

impl CoordinateStream<BufReader<File>> {
    pub fn open(path: &Path) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> CoordinateStream<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut lines = Lines::new(reader);
        let first = lines.raw()?.ok_or_else(|| parse_err(1, "empty file"))?;
        let header = parse_header(&first, 1)?;
        if header.layout != Layout::Coordinate {
            return Err(parse_err(1, "expected a coordinate file"));
        }
        let size = lines.data()?.ok_or_else(|| parse_err(lines.line + 1, "missing size line"))?;
        let line = lines.line;
        let mut tok = size.split_whitespace();
        let rows = parse_usize(tok.next(), line, "row count")?;
        let cols = parse_usize(tok.next(), line, "column count")?;
        let declared = parse_usize(tok.next(), line, "entry count")?;
        Ok(Self {
            lines,
            rows,
            cols,
            declared,
            read: 0,
            field: header.field,
            symmetry: header.symmetry,
            pending: None,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn declared_entries(&self) -> usize {
        self.declared
    }

    /// Value of a `% samples` comment seen so far.
    pub fn samples(&self) -> Option<usize> {
        self.lines.samples
    }

    fn next_entry(&mut self) -> Result<Option<Triple>> {
        if let Some(t) = self.pending.take() {
            return Ok(Some(t));
        }
        let Some(l) = self.lines.data()? else {
            if self.read != self.declared {
                return Err(parse_err(
                    self.lines.line,
                    format!("expected {} entries, found {}", self.declared, self.read),
                ));
            }
            return Ok(None);
        };
        let line = self.lines.line;
        self.read += 1;
        if self.read > self.declared {
            return Err(parse_err(line, format!("more than {} entries", self.declared)));
        }
        let mut tok = l.split_whitespace();
        let i = parse_usize(tok.next(), line, "row index")?;
        let j = parse_usize(tok.next(), line, "column index")?;
        if i == 0 || j == 0 || i > self.rows || j > self.cols {
            return Err(parse_err(line, format!("index ({i}, {j}) outside {}x{}", self.rows, self.cols)));
        }
        let v = match self.field {
            Field::Pattern => 1.0,
            _ => parse_value(tok.next(), line)?,
        };
        if tok.next().is_some() {
            return Err(parse_err(line, "trailing tokens"));
        }
        let t = Triple::new(i - 1, j - 1, v);
        if self.symmetry == Symmetry::Symmetric && i != j {
            self.pending = Some(Triple::new(j - 1, i - 1, v));
        }
        Ok(Some(t))
    }

    /// Line number of the most recently read entry.
    pub fn line(&self) -> usize {
        self.lines.line
    }
}

impl<R: BufRead> Iterator for CoordinateStream<R> {
    type Item = Result<Triple>;

    fn next(&mut self) -> Option<Result<Triple>> {
        self.next_entry().transpose()
    }
}

struct Parsed {
    rows: usize,
    cols: usize,
    entries: Vec<Triple>,
    samples: Option<usize>,
    layout: Layout,
}

fn parse<R: BufRead>(reader: R) -> Result<Parsed> {
    let mut reader = reader;
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let header = parse_header(&first, 1)?;
    let chained = std::io::Read::chain(std::io::Cursor::new(first.into_bytes()), reader);
    match header.layout {
        Layout::Coordinate => {
            let mut stream = CoordinateStream::new(chained)?;
            let mut seen = HashSet::new();
            let mut entries = Vec::with_capacity(stream.declared_entries());
            while let Some(t) = stream.next_entry()? {
                if !seen.insert((t.row, t.col)) {
                    return Err(parse_err(
                        stream.line(),
                        format!("duplicate entry ({}, {})", t.row + 1, t.col + 1),
                    ));
                }
                entries.push(t);
            }
            let (rows, cols) = stream.shape();
            Ok(Parsed {
                rows,
                cols,
                entries,
                samples: stream.samples(),
                layout: Layout::Coordinate,
            })
        }
        Layout::Array => {
            let mut lines = Lines::new(chained);
            lines.raw()?;
            let size = lines.data()?.ok_or_else(|| parse_err(lines.line + 1, "missing size line"))?;
            let line = lines.line;
            let mut tok = size.split_whitespace();
            let rows = parse_usize(tok.next(), line, "row count")?;
            let cols = parse_usize(tok.next(), line, "column count")?;
            let mut data = vec![0.0; rows * cols];
            let symmetric = header.symmetry == Symmetry::Symmetric;
            if symmetric && rows != cols {
                return Err(parse_err(line, "symmetric array must be square"));
            }
            // Column-major; symmetric files store only the lower triangle.
            let slots: Vec<(usize, usize)> = (0..cols)
                .flat_map(|j| (if symmetric { j } else { 0 }..rows).map(move |i| (i, j)))
                .collect();
            for &(i, j) in &slots {
                let l = lines
                    .data()?
                    .ok_or_else(|| parse_err(lines.line + 1, format!("expected {} values", slots.len())))?;
                let mut tok = l.split_whitespace();
                let v = parse_value(tok.next(), lines.line)?;
                if tok.next().is_some() {
                    return Err(parse_err(lines.line, "trailing tokens"));
                }
                data[i * cols + j] = v;
                if symmetric {
                    data[j * cols + i] = v;
                }
            }
            if lines.data()?.is_some() {
                return Err(parse_err(lines.line, "trailing data after array values"));
            }
            let entries = (0..rows)
                .flat_map(|i| (0..cols).map(move |j| (i, j)))
                .filter(|&(i, j)| data[i * cols + j] != 0.0)
                .map(|(i, j)| Triple::new(i, j, data[i * cols + j]))
                .collect();
            Ok(Parsed {
                rows,
                cols,
                entries,
                samples: None,
                layout: Layout::Array,
            })
        }
    }
}

/// Reads either format into a dense matrix.
pub fn read_matrix_market(path: &Path) -> Result<Matrix> {
    let p = parse(BufReader::new(File::open(path)?))?;
    let mut a = Matrix::zeros(p.rows, p.cols);
    for t in &p.entries {
        a.set(t.row, t.col, t.value);
    }
    a.validate()
}

/// Reads a coordinate file as a sketch. The sample count comes from the
/// `% samples` comment, or defaults to the entry count.
pub fn read_sketch(path: &Path) -> Result<SparseSketch> {
    let p = parse(BufReader::new(File::open(path)?))?;
    if p.layout != Layout::Coordinate {
        return Err(parse_err(1, "sketches must be coordinate files"));
    }
    let samples = p.samples.unwrap_or(p.entries.len().max(1));
    SparseSketch::from_triples(p.rows, p.cols, samples, p.entries)
}

/// Writes a dense matrix in array format.
pub fn write_matrix_market(path: &Path, a: &Matrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", a.rows(), a.cols())?;
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            writeln!(w, "{:e}", a.get(i, j))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a sketch in coordinate format.
pub fn write_sketch(path: &Path, sketch: &SparseSketch) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "% {SAMPLES_TAG} {}", sketch.samples())?;
    writeln!(w, "{} {} {}", sketch.rows(), sketch.cols(), sketch.nnz())?;
    for t in sketch.entries() {
        writeln!(w, "{} {} {:e}", t.row + 1, t.col + 1, t.value)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_text(dir: &tempfile::TempDir, text: &str) -> std::path::PathBuf {
        let p = dir.path().join("m.mtx");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_coordinate_and_array() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_text(
            &dir,
            "%%MatrixMarket matrix coordinate real general\n% note\n2 3 2\n1 1 1.5\n2 3 -2\n",
        );
        let a = read_matrix_market(&p).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[1.5, 0.0, 0.0], [0.0, 0.0, -2.0]]).unwrap());
        let p = write_text(&dir, "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n");
        let a = read_matrix_market(&p).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[1.0, 3.0], [2.0, 4.0]]).unwrap());
        let p = write_text(&dir, "%%MatrixMarket matrix coordinate pattern symmetric\n2 2 1\n2 1\n");
        let a = read_matrix_market(&p).unwrap();
        assert_eq!(a, Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let cases = [
            ("%%MatrixMarket tensor coordinate real general\n1 1 0\n", 1),
            ("garbage\n", 1),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n", 4),
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1\n", 3),
            ("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n", 3),
            ("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n", 3),
            ("%%MatrixMarket matrix array real general\n1 2\n1\n", 4),
        ];
        for (text, line) in cases {
            let p = write_text(&dir, text);
            match read_matrix_market(&p) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        assert!(matches!(
            read_matrix_market(&dir.path().join("missing.mtx")),
            Err(Error::Io(_))
        ));
    }

    #[test]
    fn stream_yields_zero_based_entries() {
        let text = "%%MatrixMarket matrix coordinate real general\n3 3 2\n1 2 4\n3 3 5\n";
        let s = CoordinateStream::new(std::io::Cursor::new(text)).unwrap();
        assert_eq!(s.shape(), (3, 3));
        let v: Vec<Triple> = s.map(|t| t.unwrap()).collect();
        assert_eq!(v, vec![Triple::new(0, 1, 4.0), Triple::new(2, 2, 5.0)]);
    }

    proptest! {
        #[test]
        fn sketch_round_trip(
            (m, n, cells) in (1usize..6, 1usize..6).prop_flat_map(|(m, n)| {
                (Just(m), Just(n), proptest::collection::btree_map((0..m, 0..n), -1e6f64..1e6, 1..(m * n + 1)))
            }),
            extra in 0usize..10,
        ) {
            let dir = tempfile::tempdir().unwrap();
            let triples: Vec<Triple> = cells
                .into_iter()
                .filter(|(_, v)| *v != 0.0)
                .map(|((i, j), v)| Triple::new(i, j, v))
                .collect();
            prop_assume!(!triples.is_empty());
            let s = triples.len() + extra;
            let sk = SparseSketch::from_triples(m, n, s, triples).unwrap();
            let p = dir.path().join("s.mtx");
            write_sketch(&p, &sk).unwrap();
            let back = read_sketch(&p).unwrap();
            prop_assert_eq!(back, sk.clone());
            let q = dir.path().join("d.mtx");
            write_matrix_market(&q, &sk.densify()).unwrap();
            prop_assert_eq!(read_matrix_market(&q).unwrap(), sk.densify());
        }
    }
}
