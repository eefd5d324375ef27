//! Bundles of items as bitmasks.
//!
//! Items are indexed from 0 internally; item `j` occupies bit `j`. Display
//! uses 1-based item names, so `Bundle(0b101)` prints as `{1,3}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITEMS: usize = 16;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bundle(pub u32);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub fn grand(m: usize) -> Bundle {
        Bundle(((1u64 << m) - 1) as u32)
    }

    pub fn singleton(j: usize) -> Bundle {
        Bundle(1 << j)
    }

    pub fn of(items: &[usize]) -> Bundle {
        Bundle(items.iter().fold(0, |acc, &j| acc | (1 << j)))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, j: usize) -> bool {
        self.0 >> j & 1 == 1
    }

    pub fn with(self, j: usize) -> Bundle {
        Bundle(self.0 | (1 << j))
    }

    pub fn without(self, j: usize) -> Bundle {
        Bundle(self.0 & !(1 << j))
    }

    pub fn union(self, o: Bundle) -> Bundle {
        Bundle(self.0 | o.0)
    }

    pub fn intersection(self, o: Bundle) -> Bundle {
        Bundle(self.0 & o.0)
    }

    pub fn minus(self, o: Bundle) -> Bundle {
        Bundle(self.0 & !o.0)
    }

    pub fn complement(self, m: usize) -> Bundle {
        Bundle(!self.0 & Bundle::grand(m).0)
    }

    pub fn is_subset(self, o: Bundle) -> bool {
        self.0 & !o.0 == 0
    }

    pub fn is_strict_subset(self, o: Bundle) -> bool {
        self.is_subset(o) && self != o
    }

    pub fn is_disjoint(self, o: Bundle) -> bool {
        self.0 & o.0 == 0
    }

    pub fn fits(self, m: usize) -> bool {
        self.is_subset(Bundle::grand(m))
    }

    /// Items in ascending order.
    pub fn items(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let j = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(j)
            }
        })
    }

    /// All `2^m` bundles in ascending mask order.
    pub fn all(m: usize) -> impl Iterator<Item = Bundle> {
        (0..(1u32 << m)).map(Bundle)
    }

    /// All bundles of size `k` in ascending mask order.
    pub fn of_size(m: usize, k: usize) -> impl Iterator<Item = Bundle> {
        Bundle::all(m).filter(move |b| b.len() == k)
    }

    /// All subsets of `self`, ascending.
    pub fn subsets(self) -> impl Iterator<Item = Bundle> {
        let full = self.0;
        let mut next = Some(0u32);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(Bundle(cur))
        })
    }

    /// Bitstring of length `m`, item 1 first.
    pub fn to_bitstring(self, m: usize) -> String {
        (0..m).map(|j| if self.contains(j) { '1' } else { '0' }).collect()
    }

    pub fn check_items(m: usize) -> Result<()> {
        if m > MAX_ITEMS {
            Err(Error::Capacity(format!("m = {m} exceeds {MAX_ITEMS} items")))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.items().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
