//! Symmetric sparsity patterns and their lower-triangle vectorization.
//!
//! A symmetric matrix is stored through its lower triangle only.  The
//! canonical entry order is column-major over the lower triangle: ascending
//! column, then ascending row within the column.  [`TrilIndexMap`] connects
//! each compressed entry to the one or two positions it occupies in the
//! column-major vectorization of the full matrix; that correspondence is what
//! the solver uses to avoid ever materializing Kronecker products.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::numfmt::format_g17;

/// Relative tolerance above which `compress` rejects an asymmetric input.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum SparseError {
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("non-finite value at entry ({i}, {j})")]
    NonFinite { i: usize, j: usize },
    #[error("input is not symmetric: |A - A'| reaches {deviation:e} against scale {scale:e}")]
    Asymmetric { deviation: f64, scale: f64 },
    #[error("matrix is not diagonal: nonzero at ({i}, {j})")]
    NotDiagonal { i: usize, j: usize },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Sparsity pattern of a symmetric matrix; the diagonal is always present.
///
/// Entries are `(row, col)` pairs with `row >= col`, sorted ascending by
/// column and then by row.  That order is the canonical compressed layout
/// used everywhere downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymPattern {
    n: usize,
    entries: Vec<(usize, usize)>,
}

impl SymPattern {
    /// Builds a pattern from undirected edges; the full diagonal is added
    /// unconditionally and duplicate edges collapse.
    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, SparseError> {
        let mut set = BTreeSet::new();
        for d in 0..n {
            set.insert((d, d));
        }
        for (a, b) in edges {
            for v in [a, b] {
                if v >= n {
                    return Err(SparseError::IndexOutOfRange { index: v, n });
                }
            }
            set.insert((a.max(b), a.min(b)));
        }
        let mut entries: Vec<_> = set.into_iter().collect();
        entries.sort_unstable_by_key(|&(i, j)| (j, i));
        Ok(SymPattern { n, entries })
    }

    /// Diagonal-only pattern.
    pub fn diagonal(n: usize) -> Self {
        Self::from_edges(n, []).expect("diagonal pattern")
    }

    /// Dense lower-triangle pattern.
    pub fn full(n: usize) -> Self {
        let edges = (0..n).flat_map(|i| (0..i).map(move |j| (i, j)));
        Self::from_edges(n, edges).expect("full pattern")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Lower-triangle entries in canonical order.
    pub fn entries(&self) -> &[(usize, usize)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Compressed index of `(i, j)`, if present.  Arguments may be given in
    /// either order.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let key = (i.max(j), i.min(j));
        self.entries
            .binary_search_by_key(&(key.1, key.0), |&(r, c)| (c, r))
            .ok()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.position(i, j).is_some()
    }

    /// Off-diagonal neighbor lists, sorted ascending.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.entries {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Pattern of all vertex pairs at graph distance at most `r`.
    pub fn power(&self, r: usize) -> SymPattern {
        let adj = self.adjacency();
        let mut edges = Vec::new();
        let mut dist = vec![usize::MAX; self.n];
        for start in 0..self.n {
            // BFS truncated at depth r.
            let mut frontier = vec![start];
            dist[start] = 0;
            let mut seen = vec![start];
            let mut depth = 0;
            while depth < r && !frontier.is_empty() {
                depth += 1;
                let mut next = Vec::new();
                for &v in &frontier {
                    for &w in &adj[v] {
                        if dist[w] == usize::MAX {
                            dist[w] = depth;
                            seen.push(w);
                            next.push(w);
                        }
                    }
                }
                frontier = next;
            }
            for &v in &seen {
                if v < start {
                    edges.push((start, v));
                }
                dist[v] = usize::MAX;
            }
        }
        SymPattern::from_edges(self.n, edges).expect("power pattern")
    }

    pub fn is_subset_of(&self, other: &SymPattern) -> bool {
        self.n == other.n && self.entries.iter().all(|&(i, j)| other.contains(i, j))
    }
}

/// Where a compressed entry lives inside the column-major vectorization of
/// the full `n x n` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Breadth {
    /// Diagonal entry: a single position.
    Diagonal(usize),
    /// Off-diagonal entry: lower-triangle position, then its mirror.
    OffDiagonal(usize, usize),
}

impl Breadth {
    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        match *self {
            Breadth::Diagonal(p) => vec![p].into_iter(),
            Breadth::OffDiagonal(p, q) => vec![p, q].into_iter(),
        }
    }

    pub fn count(&self) -> usize {
        match self {
            Breadth::Diagonal(_) => 1,
            Breadth::OffDiagonal(..) => 2,
        }
    }
}

/// Two-way map between a pattern's compressed lower-triangle layout and the
/// column-major vectorization of the full symmetric matrix.
#[derive(Clone, Debug)]
pub struct TrilIndexMap {
    pattern: SymPattern,
    breadth: Vec<Breadth>,
}

impl TrilIndexMap {
    pub fn new(pattern: SymPattern) -> Self {
        let n = pattern.n;
        let breadth = pattern
            .entries
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    Breadth::Diagonal(j * n + i)
                } else {
                    Breadth::OffDiagonal(j * n + i, i * n + j)
                }
            })
            .collect();
        TrilIndexMap { pattern, breadth }
    }

    pub fn pattern(&self) -> &SymPattern {
        &self.pattern
    }

    /// Number of compressed entries.
    pub fn len(&self) -> usize {
        self.breadth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breadth.is_empty()
    }

    /// Compressed index for a pair inside the pattern.
    pub fn forward(&self, i: usize, j: usize) -> Option<usize> {
        self.pattern.position(i, j)
    }

    pub fn breadth(&self, a: usize) -> Breadth {
        self.breadth[a]
    }

    pub fn breadths(&self) -> &[Breadth] {
        &self.breadth
    }

    /// Scatters compressed values into a dense symmetric matrix.
    pub fn expand(&self, x: &[f64]) -> DMatrix<f64> {
        assert_eq!(x.len(), self.len(), "compressed length mismatch");
        let n = self.pattern.n;
        let mut m = DMatrix::zeros(n, n);
        for (a, &(i, j)) in self.pattern.entries.iter().enumerate() {
            m[(i, j)] = x[a];
            m[(j, i)] = x[a];
        }
        m
    }

    /// Gathers the lower triangle of a symmetric dense matrix into compressed
    /// form.  Entries outside the pattern are ignored; asymmetry beyond
    /// [`SYMMETRY_TOL`] (relative to the largest magnitude) is rejected.
    pub fn compress(&self, m: &DMatrix<f64>) -> Result<Vec<f64>, SparseError> {
        let n = self.pattern.n;
        assert_eq!(m.nrows(), n, "matrix dimension mismatch");
        assert_eq!(m.ncols(), n, "matrix dimension mismatch");
        let mut scale: f64 = 0.0;
        let mut deviation: f64 = 0.0;
        for j in 0..n {
            for i in j..n {
                scale = scale.max(m[(i, j)].abs()).max(m[(j, i)].abs());
                deviation = deviation.max((m[(i, j)] - m[(j, i)]).abs());
            }
        }
        if deviation > SYMMETRY_TOL * scale {
            return Err(SparseError::Asymmetric { deviation, scale });
        }
        Ok(self
            .pattern
            .entries
            .iter()
            .map(|&(i, j)| m[(i, j)])
            .collect())
    }
}

/// Symmetric sparse matrix: a pattern plus one value per compressed entry.
#[derive(Clone, Debug, PartialEq)]
pub struct SymSparse {
    pattern: SymPattern,
    values: Vec<f64>,
}

impl SymSparse {
    pub fn new(pattern: SymPattern, values: Vec<f64>) -> Result<Self, SparseError> {
        if values.len() != pattern.len() {
            return Err(SparseError::LengthMismatch {
                expected: pattern.len(),
                got: values.len(),
            });
        }
        for (a, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                let (i, j) = pattern.entries[a];
                return Err(SparseError::NonFinite { i, j });
            }
        }
        Ok(SymSparse { pattern, values })
    }

    /// All-zero matrix on the given pattern.
    pub fn zeros(pattern: SymPattern) -> Self {
        let values = vec![0.0; pattern.len()];
        SymSparse { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &SymPattern {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |a| self.values[a])
    }

    /// Dense symmetric expansion.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.pattern.n;
        let mut m = DMatrix::zeros(n, n);
        for (a, &(i, j)) in self.pattern.entries.iter().enumerate() {
            m[(i, j)] = self.values[a];
            m[(j, i)] = self.values[a];
        }
        m
    }

    /// Symmetric matrix-vector product.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n(), "vector length mismatch");
        let mut y = vec![0.0; self.n()];
        for (a, &(i, j)) in self.pattern.entries.iter().enumerate() {
            let v = self.values[a];
            y[i] += v * x[j];
            if i != j {
                y[j] += v * x[i];
            }
        }
        y
    }

    /// Diagonal values, provided every off-diagonal entry is exactly zero.
    pub fn diagonal_values(&self) -> Result<Vec<f64>, SparseError> {
        let mut diag = vec![0.0; self.n()];
        for (a, &(i, j)) in self.pattern.entries.iter().enumerate() {
            if i == j {
                diag[i] = self.values[a];
            } else if self.values[a] != 0.0 {
                return Err(SparseError::NotDiagonal { i, j });
            }
        }
        Ok(diag)
    }

    /// Diagonal matrix from explicit diagonal values.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self, SparseError> {
        SymSparse::new(SymPattern::diagonal(diag.len()), diag.to_vec())
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Reads a Matrix Market coordinate file.  Only real symmetric matrices
    /// are accepted; upper-triangle entries are mirrored into the lower
    /// triangle, duplicates are summed, and missing diagonal entries come
    /// back as explicit zeros.
    pub fn mm_read(path: impl AsRef<Path>) -> Result<Self, SparseError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::mm_parse(std::io::BufReader::new(file), &path.display().to_string())
    }

    fn mm_parse(reader: impl BufRead, path: &str) -> Result<Self, SparseError> {
        let parse_err = |line: usize, msg: String| SparseError::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();
        let (lineno, header) = match lines.next() {
            Some((k, line)) => (k + 1, line?),
            None => return Err(parse_err(1, "empty file".into())),
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.first() != Some(&"%%MatrixMarket") {
            return Err(parse_err(lineno, "missing MatrixMarket banner".into()));
        }
        let lower: Vec<String> = fields[1..].iter().map(|s| s.to_lowercase()).collect();
        if lower != ["matrix", "coordinate", "real", "symmetric"] {
            return Err(parse_err(
                lineno,
                format!(
                    "unsupported header '{}': expected 'matrix coordinate real symmetric'",
                    fields[1..].join(" ")
                ),
            ));
        }
        let mut size: Option<(usize, usize)> = None;
        let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
        for (k, line) in lines {
            let lineno = k + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('%') {
                continue;
            }
            let tokens: Vec<&str> = text.split_whitespace().collect();
            match size {
                None => {
                    if tokens.len() != 3 {
                        return Err(parse_err(lineno, "malformed size line".into()));
                    }
                    let rows: usize = tokens[0]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad row count".into()))?;
                    let cols: usize = tokens[1]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad column count".into()))?;
                    let nnz: usize = tokens[2]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad entry count".into()))?;
                    if rows != cols {
                        return Err(parse_err(
                            lineno,
                            format!("matrix must be square, got {rows} x {cols}"),
                        ));
                    }
                    size = Some((rows, nnz));
                    triplets.reserve(nnz);
                }
                Some((n, nnz)) => {
                    if tokens.len() != 3 {
                        return Err(parse_err(lineno, "malformed entry line".into()));
                    }
                    let i: usize = tokens[0]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad row index".into()))?;
                    let j: usize = tokens[1]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad column index".into()))?;
                    let v: f64 = tokens[2]
                        .parse()
                        .map_err(|_| parse_err(lineno, "bad value".into()))?;
                    if i < 1 || i > n || j < 1 || j > n {
                        return Err(parse_err(
                            lineno,
                            format!("index ({i}, {j}) out of range for dimension {n}"),
                        ));
                    }
                    if !v.is_finite() {
                        return Err(parse_err(lineno, "non-finite value".into()));
                    }
                    if triplets.len() == nnz {
                        return Err(parse_err(lineno, "more entries than declared".into()));
                    }
                    // 1-based on disk; canonicalize to lower triangle.
                    let (i, j) = (i - 1, j - 1);
                    triplets.push((i.max(j), i.min(j), v));
                }
            }
        }
        let (n, nnz) = size.ok_or_else(|| parse_err(0, "missing size line".into()))?;
        if triplets.len() != nnz {
            return Err(parse_err(
                0,
                format!("declared {} entries, found {}", nnz, triplets.len()),
            ));
        }
        let pattern = SymPattern::from_edges(n, triplets.iter().map(|&(i, j, _)| (i, j)))
            .map_err(|e| parse_err(0, e.to_string()))?;
        let mut values = vec![0.0; pattern.len()];
        for &(i, j, v) in &triplets {
            values[pattern.position(i, j).expect("entry in pattern")] += v;
        }
        SymSparse::new(pattern, values)
    }

    /// Writes the matrix in Matrix Market coordinate format: 1-based lower
    /// triangle in canonical order, values formatted so they round-trip
    /// bit-exactly.
    pub fn mm_write(&self, path: impl AsRef<Path>) -> Result<(), SparseError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.mm_emit(&mut out)?;
        out.flush()?;
        Ok(())
    }

    fn mm_emit(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(out, "{} {} {}", self.n(), self.n(), self.pattern.len())?;
        for (a, &(i, j)) in self.pattern.entries.iter().enumerate() {
            writeln!(out, "{} {} {}", i + 1, j + 1, format_g17(self.values[a]))?;
        }
        Ok(())
    }
}
