//! Dense item × attribute utility matrices.
//!
//! Both latent utilities `W` and observed utilities `Ŵ` are stored as a
//! [`UtilityMatrix`]. Entries are finite and nonnegative; the constructor
//! rejects anything else.
//!
//! On disk a matrix is a CSV file with header `item,a1,...,am` and one row
//! per item. Item ids in files are 1-based.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct UtilityMatrix {
    n: usize,
    m: usize,
    entries: Vec<f64>,
}

impl UtilityMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(n: usize, m: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * m {
            return Err(Error::input(format!(
                "expected {} entries for a {n}x{m} matrix, got {}",
                n * m,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::input(format!(
                "entry ({}, {}) = {} is not a finite nonnegative real",
                pos / m.max(1),
                pos % m.max(1),
                entries[pos]
            )));
        }
        Ok(Self { n, m, entries })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            entries: vec![0.0; n * m],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::input("rows have differing lengths"));
        }
        Self::new(rows.len(), m, rows.concat())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, item: usize, attr: usize) -> f64 {
        self.entries[item * self.m + attr]
    }

    /// Sets one entry. Panics on negative or non-finite values, which would
    /// break the matrix invariant.
    pub fn set(&mut self, item: usize, attr: usize, value: f64) {
        assert!(
            value.is_finite() && value >= 0.0,
            "utility entries must be finite and nonnegative, got {value}"
        );
        self.entries[item * self.m + attr] = value;
    }

    #[inline]
    pub fn row(&self, item: usize) -> &[f64] {
        &self.entries[item * self.m..(item + 1) * self.m]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest `τ` candidate for the range condition: every nonzero entry
    /// lies in `(τ, 1/τ)` for all `τ` strictly below this value. `None` when
    /// the matrix has no positive entry.
    pub fn tau_bound(&self) -> Option<f64> {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &v in self.entries.iter().filter(|v| **v > 0.0) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi == 0.0 {
            None
        } else {
            Some(lo.min(1.0 / hi))
        }
    }

    /// Whether every nonzero entry lies strictly inside `(tau, 1/tau)`.
    pub fn within_tau(&self, tau: f64) -> bool {
        tau > 0.0
            && self
                .entries
                .iter()
                .filter(|v| **v > 0.0)
                .all(|&v| v > tau && v < 1.0 / tau)
    }

    /// Copy with only the listed rows kept (in the given order).
    pub fn select_rows(&self, items: &[usize]) -> UtilityMatrix {
        let mut entries = Vec::with_capacity(items.len() * self.m);
        for &i in items {
            entries.extend_from_slice(self.row(i));
        }
        UtilityMatrix {
            n: items.len(),
            m: self.m,
            entries,
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file, path)
    }

    pub fn read_csv_from<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::format(path, e.to_string()))?
            .clone();
        let m = headers.len().saturating_sub(1);
        let expected: Vec<String> = std::iter::once("item".to_string())
            .chain((1..=m).map(|j| format!("a{j}")))
            .collect();
        if headers.is_empty() || headers.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::format(
                path,
                format!(
                    "header must be `{}`, found `{}`",
                    expected.join(","),
                    headers.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e.to_string()))?;
            let bad = |what: &str| Error::format(path, format!("row {}: {what}", line + 2));
            let item: usize = rec[0].parse().map_err(|_| bad("item id is not an integer"))?;
            let vals = (1..=m)
                .map(|j| rec[j].parse::<f64>().map_err(|_| bad("utility is not a real")))
                .collect::<Result<Vec<_>>>()?;
            rows.push((item, vals));
        }
        let n = rows.len();
        let mut entries = vec![f64::NAN; n * m];
        let mut seen = vec![false; n];
        for (item, vals) in rows {
            if item == 0 || item > n || seen[item - 1] {
                return Err(Error::format(
                    path,
                    format!("item ids must be a permutation of 1..={n}; offending id {item}"),
                ));
            }
            seen[item - 1] = true;
            entries[(item - 1) * m..item * m].copy_from_slice(&vals);
        }
        Self::new(n, m, entries).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file).map_err(|e| Error::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, writer: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = std::iter::once("item".to_string())
            .chain((1..=self.m).map(|j| format!("a{j}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.n {
            let rec: Vec<String> = std::iter::once((i + 1).to_string())
                .chain(self.row(i).iter().map(|v| format!("{v:?}")))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()
    }
}
