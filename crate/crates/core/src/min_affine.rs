use std::collections::BTreeMap;

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::oracle::bundle_cost;
use crate::scalar::{Price, Scalar};
use crate::Rat;

/// `price(S) = min_k (sum_{j in S} p^k_j + r^k)`, overridden on a finite
/// set of exception bundles. The empty bundle is always free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinAffineMenu<T: Scalar = Rat> {
    m: usize,
    vectors: Vec<Vec<Price<T>>>,
    offsets: Vec<T>,
    exceptions: BTreeMap<Bundle, Price<T>>,
}

impl<T: Scalar> MinAffineMenu<T> {
    pub fn new(
        m: usize,
        vectors: Vec<Vec<Price<T>>>,
        offsets: Vec<T>,
        exceptions: BTreeMap<Bundle, Price<T>>,
    ) -> Result<Self> {
        Bundle::check_items(m)?;
        if vectors.len() != offsets.len() {
            return Err(Error::Domain(format!("{} vectors but {} offsets", vectors.len(), offsets.len())));
        }
        if vectors.iter().any(|p| p.len() != m) {
            return Err(Error::Domain(format!("price vectors must have {m} entries")));
        }
        if vectors.iter().flatten().any(|p| matches!(p, Price::Finite(x) if x.is_negative())) {
            return Err(Error::Domain("negative item price".into()));
        }
        if offsets.iter().any(|r| r.is_negative()) {
            return Err(Error::Domain("negative offset".into()));
        }
        if let Some(s) = exceptions.keys().find(|s| !s.fits(m)) {
            return Err(Error::Domain(format!("exception bundle {s} does not fit {m} items")));
        }
        Ok(MinAffineMenu { m, vectors, offsets, exceptions })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn vectors(&self) -> &[Vec<Price<T>>] {
        &self.vectors
    }

    pub fn offsets(&self) -> &[T] {
        &self.offsets
    }

    pub fn exceptions(&self) -> &BTreeMap<Bundle, Price<T>> {
        &self.exceptions
    }

    pub fn alpha(&self) -> usize {
        self.vectors.len()
    }

    pub fn beta(&self) -> usize {
        self.exceptions.len()
    }

    /// Price from the affine part only, ignoring exceptions.
    pub fn affine_eval(&self, s: Bundle) -> Price<T> {
        self.vectors
            .iter()
            .zip(&self.offsets)
            .map(|(p, r)| bundle_cost(p, s).add(&Price::Finite(r.clone())))
            .min()
            .unwrap_or(Price::Infinite)
    }

    pub fn eval(&self, s: Bundle) -> Price<T> {
        if s.is_empty() {
            return Price::zero();
        }
        match self.exceptions.get(&s) {
            Some(p) => p.clone(),
            None => self.affine_eval(s),
        }
    }

    pub fn to_menu(&self) -> Menu<T> {
        Menu::from_fn(self.m, |s| self.eval(s)).expect("valid menu")
    }
}
