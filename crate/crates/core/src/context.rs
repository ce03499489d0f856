//! Item / negotiator-pair contexts and bid vectors.

use crate::error::{check_index, check_len, Error, Result};
use alloc::vec::Vec;

/// How a [`BidVector`] encodes a proposal over the item pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Encoding {
    /// One one-hot block per issue.
    MultiIssue,
    /// First half: items we take per category; second half: minus the items
    /// left to the counterpart.
    Allocation,
    /// First half: items we give (positive); second half: items we seek (negative).
    Trading,
}

/// Integer proposal vector over the item pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct BidVector {
    entries: Vec<i32>,
    encoding: Encoding,
}

impl BidVector {
    pub fn new(entries: Vec<i32>, encoding: Encoding) -> Self {
        Self { entries, encoding }
    }

    pub fn entries(&self) -> &[i32] {
        &self.entries
    }

    pub fn encoding(&self) -> Encoding {
        self.encoding
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of nonzero entries.
    pub fn support(&self) -> usize {
        self.entries.iter().filter(|&&e| e != 0).count()
    }

    /// Checks the one-hot-per-block layout for the given issue sizes.
    pub fn is_valid_multi_issue(&self, sizes: &[usize]) -> bool {
        if self.entries.len() != sizes.iter().sum::<usize>() {
            return false;
        }
        let mut offset = 0;
        sizes.iter().all(|&s| {
            let block = &self.entries[offset..offset + s];
            offset += s;
            block.iter().all(|&e| e == 0 || e == 1) && block.iter().filter(|&&e| e == 1).count() == 1
        })
    }

    /// Checks the signed take/leave split for the given category counts.
    pub fn is_valid_allocation(&self, counts: &[usize]) -> bool {
        let c = counts.len();
        if self.entries.len() != 2 * c {
            return false;
        }
        counts.iter().enumerate().all(|(i, &n)| {
            let ours = self.entries[i];
            let theirs = self.entries[c + i];
            ours >= 0 && theirs <= 0 && (ours - theirs) as usize == n
        })
    }

    /// Checks the give/seek layout: gives in the first half are positive,
    /// seeks in the second half are negative, at most `gamma` items involved.
    pub fn is_valid_trading(&self, gamma: usize) -> bool {
        if self.entries.len() % 2 != 0 {
            return false;
        }
        let n = self.entries.len() / 2;
        let involved: i64 = self.entries.iter().map(|&e| i64::from(e.unsigned_abs())).sum();
        self.entries[..n].iter().all(|&e| e >= 0)
            && self.entries[n..].iter().all(|&e| e <= 0)
            && involved as usize <= gamma
    }
}

impl core::ops::Add for &BidVector {
    type Output = BidVector;

    fn add(self, rhs: &BidVector) -> BidVector {
        BidVector {
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a + b).collect(),
            encoding: self.encoding,
        }
    }
}

/// Scales `v` to unit l2 norm in place; the zero vector passes through.
pub fn normalize(v: &mut [f64]) {
    let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Item context matrix `Y` (one row per item slot of a bid vector) and
/// negotiator-pair context matrix `X` (one row per counterpart).
#[derive(Debug, Clone)]
pub struct ContextSet {
    items: Vec<Vec<f64>>,
    pairs: Vec<Vec<f64>>,
    item_dim: usize,
    normalized: bool,
}

impl ContextSet {
    /// Builds a context set; when `normalized` is set, pair rows are scaled to
    /// unit norm here and bid contexts are scaled on extraction.
    pub fn new(items: Vec<Vec<f64>>, mut pairs: Vec<Vec<f64>>, normalized: bool) -> Result<Self> {
        let item_dim = items.first().map_or(0, Vec::len);
        for row in &items {
            check_len(item_dim, row.len())?;
        }
        let pair_dim = pairs.first().map_or(0, Vec::len);
        for row in &pairs {
            check_len(pair_dim, row.len())?;
        }
        if pairs.is_empty() {
            return Err(Error::Argument("at least one negotiator pair is required".into()));
        }
        if normalized {
            pairs.iter_mut().for_each(|r| normalize(r));
        }
        Ok(Self { items, pairs, item_dim, normalized })
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn item_dim(&self) -> usize {
        self.item_dim
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair_dim(&self) -> usize {
        self.pairs[0].len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn item(&self, w: usize) -> &[f64] {
        &self.items[w]
    }

    pub fn pair_context(&self, pair: usize) -> Result<&[f64]> {
        check_index(pair, self.pairs.len())?;
        Ok(&self.pairs[pair])
    }

    /// `Y^T b^T` before any normalization.
    pub fn raw_bid_context(&self, bid: &BidVector) -> Result<Vec<f64>> {
        check_len(self.items.len(), bid.len())?;
        let mut out = alloc::vec![0.0; self.item_dim];
        for (row, &b) in self.items.iter().zip(bid.entries()) {
            if b != 0 {
                let b = f64::from(b);
                out.iter_mut().zip(row).for_each(|(o, y)| *o += b * y);
            }
        }
        Ok(out)
    }

    /// Bid context fed to the kernels: `Y^T b^T`, unit-normalized when the set
    /// is normalized.
    pub fn bid_context(&self, bid: &BidVector) -> Result<Vec<f64>> {
        let mut v = self.raw_bid_context(bid)?;
        if self.normalized {
            normalize(&mut v);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn fruit_items() -> Vec<Vec<f64>> {
        vec![
            vec![2.0, 1.0],
            vec![1.0, 3.0],
            vec![5.0, 4.0],
            vec![2.0, 1.0],
            vec![1.0, 3.0],
            vec![5.0, 4.0],
        ]
    }

    #[test]
    fn hand_multiplied_bid_context() {
        let ctx = ContextSet::new(fruit_items(), vec![vec![1.0]], false).unwrap();
        let b = BidVector::new(vec![1, 1, 2, -3, -1, -3], Encoding::Allocation);
        assert_eq!(ctx.bid_context(&b).unwrap(), vec![-9.0, -6.0]);
        assert!(b.is_valid_allocation(&[4, 2, 5]));
    }

    #[test]
    fn zero_and_unit_bids() {
        let ctx = ContextSet::new(fruit_items(), vec![vec![1.0]], true).unwrap();
        let zero = BidVector::new(vec![0; 6], Encoding::Allocation);
        assert_eq!(ctx.bid_context(&zero).unwrap(), vec![0.0, 0.0]);
        let raw = ContextSet::new(fruit_items(), vec![vec![1.0]], false).unwrap();
        let e2 = BidVector::new(vec![0, 0, 1, 0, 0, 0], Encoding::Allocation);
        assert_eq!(raw.bid_context(&e2).unwrap(), vec![5.0, 4.0]);
    }

    #[test]
    fn normalization_of_rows() {
        let ctx = ContextSet::new(fruit_items(), vec![vec![3.0, 4.0], vec![0.0, 0.0]], true).unwrap();
        assert_eq!(ctx.pair_context(0).unwrap(), &[0.6, 0.8]);
        assert_eq!(ctx.pair_context(1).unwrap(), &[0.0, 0.0]);
        let b = BidVector::new(vec![1, 1, 2, -3, -1, -3], Encoding::Allocation);
        let psi = ctx.bid_context(&b).unwrap();
        assert!((psi[0] * psi[0] + psi[1] * psi[1] - 1.0).abs() < 1e-15);
        assert!(ctx.pair_context(2).is_err());
    }

    #[test]
    fn length_mismatch() {
        let ctx = ContextSet::new(fruit_items(), vec![vec![1.0]], false).unwrap();
        assert!(ctx.bid_context(&BidVector::new(vec![1, 0], Encoding::Trading)).is_err());
    }

    #[test]
    fn multi_issue_and_trading_validity() {
        let b = BidVector::new(vec![0, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0], Encoding::MultiIssue);
        assert!(b.is_valid_multi_issue(&[4, 2, 2, 3]));
        assert!(!b.is_valid_multi_issue(&[4, 2, 2, 2]));
        let t = BidVector::new(vec![1, 1, 0, 0, 0, -1], Encoding::Trading);
        assert!(t.is_valid_trading(3));
        assert!(!t.is_valid_trading(2));
    }

    proptest! {
        #[test]
        fn bid_context_is_additive(a in prop::collection::vec(-5i32..6, 6), b in prop::collection::vec(-5i32..6, 6)) {
            let ctx = ContextSet::new(fruit_items(), vec![vec![1.0]], false).unwrap();
            let ba = BidVector::new(a, Encoding::Allocation);
            let bb = BidVector::new(b, Encoding::Allocation);
            let sum = ctx.bid_context(&(&ba + &bb)).unwrap();
            let pa = ctx.bid_context(&ba).unwrap();
            let pb = ctx.bid_context(&bb).unwrap();
            for i in 0..2 {
                prop_assert!((sum[i] - pa[i] - pb[i]).abs() <= 1e-9);
            }
        }
    }
}
