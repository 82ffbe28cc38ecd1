//! Binned measurement records, consecutive-outcome pairs and outcome regions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub index: u64,
    /// Bright outcomes in the bin.
    pub n: u32,
    /// Shots in the bin.
    pub k: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub bins: Vec<Bin>,
    /// Targeted P1 state of the first bin, e.g. "+1D".
    pub target: Option<String>,
}

impl MeasurementRecord {
    pub fn new(bins: Vec<Bin>, target: Option<String>) -> Result<Self> {
        if let Some(b) = bins.iter().find(|b| b.n > b.k || b.k == 0) {
            return Err(Error::InvalidInput(format!("bin {}: N = {} with K = {}", b.index, b.n, b.k)));
        }
        Ok(Self { bins, target })
    }

    pub fn from_counts(counts: &[u32], k: u32) -> Result<Self> {
        let bins = counts.iter().enumerate().map(|(i, &n)| Bin { index: i as u64, n, k }).collect();
        Self::new(bins, None)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn counts(&self) -> Vec<u32> {
        self.bins.iter().map(|b| b.n).collect()
    }

    /// The common bin size, if all bins share one.
    pub fn uniform_bin_size(&self) -> Option<u32> {
        let k = self.bins.first()?.k;
        self.bins.iter().all(|b| b.k == k).then_some(k)
    }

    /// Delimited text: header `bin_index,N,K`, one bin per line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_index,N,K\n");
        for b in &self.bins {
            s.push_str(&format!("{},{},{}\n", b.index, b.n, b.k));
        }
        s
    }

    /// Parses `to_csv` output; comma, tab or whitespace separated, `#`
    /// comments and a non-numeric header line are skipped.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut bins = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
            if bins.is_empty() && fields.first().is_some_and(|f| f.parse::<u64>().is_err()) {
                continue;
            }
            if fields.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected bin_index,N,K", ln + 1)));
            }
            let p = |f: &str| f.parse::<u64>().map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)));
            let (index, n, k) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
            let (n, k) = (u32::try_from(n), u32::try_from(k));
            match (n, k) {
                (Ok(n), Ok(k)) => bins.push(Bin { index, n, k }),
                _ => return Err(Error::Parse(format!("line {}: count too large", ln + 1))),
            }
        }
        Self::new(bins, None)
    }
}

/// Consecutive outcome pairs (N(k), N(k+1)), possibly with different bin
/// sizes for the first (heralding) and second (readout) measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomePairs {
    pub k_first: u32,
    pub k_second: u32,
    pub pairs: Vec<(u32, u32)>,
}

impl OutcomePairs {
    pub fn new(k_first: u32, k_second: u32, pairs: Vec<(u32, u32)>) -> Result<Self> {
        if pairs.iter().any(|&(a, b)| a > k_first || b > k_second) {
            return Err(Error::InvalidInput("pair outcome exceeds its bin size".into()));
        }
        Ok(Self { k_first, k_second, pairs })
    }

    /// Every bin with its successor: (N(0), N(1)), (N(1), N(2)), ...
    pub fn sliding(record: &MeasurementRecord) -> Result<Self> {
        let k = record
            .uniform_bin_size()
            .ok_or_else(|| Error::InvalidInput("sliding pairs need a uniform bin size".into()))?;
        let c = record.counts();
        Self::new(k, k, c.windows(2).map(|w| (w[0], w[1])).collect())
    }

    /// Disjoint pairs (N(0), N(1)), (N(2), N(3)), ...; used when bins
    /// alternate between two targets or bin sizes.
    pub fn alternating(record: &MeasurementRecord) -> Result<Self> {
        let b = &record.bins;
        if b.len() < 2 {
            return Err(Error::EmptySample("fewer than two bins".into()));
        }
        let (k1, k2) = (b[0].k, b[1].k);
        if b.chunks_exact(2).any(|c| c[0].k != k1 || c[1].k != k2) {
            return Err(Error::InvalidInput("alternating pairs need a fixed bin-size pattern".into()));
        }
        Self::new(k1, k2, b.chunks_exact(2).map(|c| (c[0].n, c[1].n)).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Inclusive outcome interval [min, max].
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRange {
    pub min: u32,
    pub max: u32,
}

impl OutcomeRange {
    pub fn new(min: u32, max: u32, k: u32) -> Result<Self> {
        if min > max || max > k {
            return Err(Error::InvalidInput(format!("range [{min}, {max}] invalid for K = {k}")));
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, n: u32) -> bool {
        (self.min..=self.max).contains(&n)
    }
}

/// Rectangle in the (first, second) outcome plane with its (i, j) index.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub index: (usize, usize),
    pub first: OutcomeRange,
    pub second: OutcomeRange,
}

impl RegionSpec {
    pub fn new(index: (usize, usize), first: OutcomeRange, second: OutcomeRange) -> Self {
        Self { index, first, second }
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        format!(
            "i = {}\nj = {}\nfirst_min = {}\nfirst_max = {}\nsecond_min = {}\nsecond_max = {}\n",
            self.index.0, self.index.1, self.first.min, self.first.max, self.second.min, self.second.max
        )
    }
}
