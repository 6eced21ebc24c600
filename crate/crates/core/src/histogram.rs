//! Detected-count records and their joint tallies.

use crate::dist::{Distribution1D, JointDistribution, Level};
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// One detection event: counts on the signal and idler detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ShotRecord {
    pub m_s: u64,
    pub m_i: u64,
}

impl ShotRecord {
    pub fn new(m_s: u64, m_i: u64) -> Self {
        Self { m_s, m_i }
    }
}

/// Tally of shots by `(m_s, m_i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointHistogram {
    counts: Array2<u64>,
    shots: u64,
}

impl JointHistogram {
    pub fn new() -> Self {
        Self {
            counts: Array2::zeros((0, 0)),
            shots: 0,
        }
    }

    /// Builds a histogram from explicit tallies; `shots` is their sum.
    pub fn from_counts(counts: Array2<u64>) -> Self {
        let shots = counts.iter().sum();
        Self { counts, shots }
    }

    pub fn from_records<'a, I: IntoIterator<Item = &'a ShotRecord>>(records: I) -> Self {
        let mut h = Self::new();
        for r in records {
            h.add(*r);
        }
        h
    }

    pub fn add(&mut self, r: ShotRecord) {
        self.add_count(r.m_s as usize, r.m_i as usize, 1);
    }

    pub fn add_count(&mut self, ms: usize, mi: usize, n: u64) {
        let (rows, cols) = self.counts.dim();
        if ms >= rows || mi >= cols {
            self.grow(rows.max(ms + 1), cols.max(mi + 1));
        }
        self.counts[[ms, mi]] += n;
        self.shots += n;
    }

    fn grow(&mut self, rows: usize, cols: usize) {
        let mut c = Array2::zeros((rows, cols));
        c.slice_mut(ndarray::s![..self.counts.nrows(), ..self.counts.ncols()])
            .assign(&self.counts);
        self.counts = c;
    }

    /// Adds all tallies of `other`.
    pub fn merge(&mut self, other: &JointHistogram) {
        let (r, c) = other.counts.dim();
        let (rows, cols) = self.counts.dim();
        if r > rows || c > cols {
            self.grow(rows.max(r), cols.max(c));
        }
        for ((a, b), &n) in other.counts.indexed_iter() {
            self.counts[[a, b]] += n;
        }
        self.shots += other.shots;
    }

    pub fn counts(&self) -> &Array2<u64> {
        &self.counts
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn dim(&self) -> (usize, usize) {
        self.counts.dim()
    }

    pub fn get(&self, ms: usize, mi: usize) -> u64 {
        self.counts.get((ms, mi)).copied().unwrap_or(0)
    }

    /// Histogram with the two arms exchanged.
    pub fn transposed(&self) -> Self {
        Self {
            counts: self.counts.t().to_owned(),
            shots: self.shots,
        }
    }

    /// Drops trailing all-zero rows and columns.
    pub fn trimmed(&self) -> Self {
        let rows = (0..self.counts.nrows())
            .rev()
            .find(|&a| self.counts.row(a).iter().any(|&n| n > 0))
            .map_or(0, |a| a + 1);
        let cols = (0..self.counts.ncols())
            .rev()
            .find(|&b| self.counts.column(b).iter().any(|&n| n > 0))
            .map_or(0, |b| b + 1);
        Self {
            counts: self.counts.slice(ndarray::s![..rows, ..cols]).to_owned(),
            shots: self.shots,
        }
    }

    /// Relative frequencies as a detected-level distribution.
    pub fn normalized(&self) -> Result<JointDistribution<f64>> {
        if self.shots == 0 {
            return Err(Error::EmptyHistogram);
        }
        let n = self.shots as f64;
        Ok(JointDistribution::new(
            self.counts.mapv(|c| c as f64 / n),
            Level::Detected,
        ))
    }

    pub fn signal_frequencies(&self) -> Result<Distribution1D<f64>> {
        Ok(crate::dist::signal_marginal(&self.normalized()?))
    }

    pub fn idler_frequencies(&self) -> Result<Distribution1D<f64>> {
        Ok(crate::dist::idler_marginal(&self.normalized()?))
    }

    /// Expands the tallies back into one record per shot, in row-major order.
    pub fn records(&self) -> Vec<ShotRecord> {
        let mut out = Vec::with_capacity(self.shots as usize);
        for ((a, b), &n) in self.counts.indexed_iter() {
            for _ in 0..n {
                out.push(ShotRecord::new(a as u64, b as u64));
            }
        }
        out
    }
}

impl Default for JointHistogram {
    fn default() -> Self {
        Self::new()
    }
}
