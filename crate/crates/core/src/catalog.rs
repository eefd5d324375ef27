use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::valuation::Valuation;
use crate::Rat;

/// A finite, ordered list of valuations for one player. Entries keep their
/// insertion order; ids are positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Catalog<T: Scalar = Rat> {
    m: usize,
    entries: Vec<Valuation<T>>,
}

impl<T: Scalar> Catalog<T> {
    pub fn new(entries: Vec<Valuation<T>>) -> Result<Self> {
        let m = entries.first().map(|v| v.m()).ok_or_else(|| Error::Domain("empty catalog".into()))?;
        if entries.iter().any(|v| v.m() != m) {
            return Err(Error::Domain("catalog entries disagree on m".into()));
        }
        Ok(Catalog { m, entries })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> &Valuation<T> {
        &self.entries[id]
    }

    pub fn entries(&self) -> &[Valuation<T>] {
        &self.entries
    }
}

/// Mixed-radix enumeration of index tuples, first coordinate fastest.
pub fn index_tuples(sizes: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut code| {
        sizes
            .iter()
            .map(|&s| {
                let d = code % s;
                code /= s;
                d
            })
            .collect()
    })
}
