//! Assignment of input items to sites.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Disjoint item sets `A_1, ..., A_s`; items are indices into the input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    sites: Vec<Vec<usize>>,
}

impl Partition {
    /// Checks disjointness and that the union is exactly `0..n`.
    pub fn new(sites: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidParameter("a partition needs at least one site".into()));
        }
        let mut seen = vec![false; n];
        for site in &sites {
            for &j in site {
                if j >= n {
                    return Err(Error::InvalidPoint { index: j, len: n });
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InconsistentInput(format!("item {j} is held by two sites")));
                }
            }
        }
        if let Some(j) = seen.iter().position(|&s| !s) {
            return Err(Error::InconsistentInput(format!("item {j} is held by no site")));
        }
        Ok(Self { sites })
    }

    /// Item `j` goes to site `j mod s`.
    pub fn round_robin(n: usize, s: usize) -> Result<Self> {
        check_sites(s)?;
        let mut sites = vec![Vec::new(); s];
        for j in 0..n {
            sites[j % s].push(j);
        }
        Self::new(sites, n)
    }

    /// Consecutive blocks whose sizes differ by at most one.
    pub fn contiguous(n: usize, s: usize) -> Result<Self> {
        check_sites(s)?;
        let (base, extra) = (n / s, n % s);
        let mut sites = Vec::with_capacity(s);
        let mut start = 0;
        for i in 0..s {
            let len = base + usize::from(i < extra);
            sites.push((start..start + len).collect());
            start += len;
        }
        Self::new(sites, n)
    }

    /// Site of each item given explicitly; sites are numbered `0..=max`.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let s = labels.iter().copied().max().map_or(1, |m| m + 1);
        let mut sites = vec![Vec::new(); s];
        for (j, &l) in labels.iter().enumerate() {
            sites[l].push(j);
        }
        Self::new(sites, labels.len())
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, i: usize) -> &[usize] {
        &self.sites[i]
    }

    pub fn sites(&self) -> &[Vec<usize>] {
        &self.sites
    }

    pub fn num_items(&self) -> usize {
        self.sites.iter().map(Vec::len).sum()
    }
}

fn check_sites(s: usize) -> Result<()> {
    if s == 0 {
        Err(Error::InvalidParameter("number of sites must be positive".into()))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors() {
        let p = Partition::round_robin(5, 2).unwrap();
        assert_eq!(p.sites(), &[vec![0, 2, 4], vec![1, 3]]);
        let p = Partition::contiguous(5, 2).unwrap();
        assert_eq!(p.sites(), &[vec![0, 1, 2], vec![3, 4]]);
        let p = Partition::from_labels(&[1, 0, 1]).unwrap();
        assert_eq!(p.sites(), &[vec![1], vec![0, 2]]);
        assert_eq!(p.num_items(), 3);
    }

    #[test]
    fn rejects_overlap_and_gaps() {
        assert!(Partition::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(Partition::new(vec![vec![0]], 2).is_err());
        assert!(Partition::round_robin(3, 0).is_err());
    }
}
