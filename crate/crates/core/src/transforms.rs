//! Mechanism transformations for two players.
//!
//! [`DominantSetup`] runs a truthful mechanism inside a wrapper where each
//! player first names the menu its valuation presents to the other, then
//! the bundle it wants from the menu it was named, and finally plays the
//! original mechanism. A player whose messages fit no catalog valuation
//! loses everything; the other player buys the bundle it named. Truthful
//! play then becomes dominant over the audited deviations.
//!
//! [`SimultaneousTable`] turns a precise mechanism into a one-round
//! protocol where both players only announce menu indices.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::catalog::{index_tuples, Catalog};
use crate::error::{Error, Result};
use crate::menu::{best_bundle, profit_argmax_set, Menu};
use crate::protocol::{menu_catalog, run_mechanism, Mechanism, MenuCatalog, Outcome};
use crate::rng;
use crate::scalar::{Price, Scalar};
use crate::valuation::Valuation;

/// A non-truthful play in the wrapped mechanism.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DeviationStrategy {
    /// Menu index announced for the other player; may be out of range.
    pub menu_index: usize,
    pub bundle: Bundle,
    /// Catalog entry whose truthful program plays the inner mechanism.
    pub inner: usize,
}

impl DeviationStrategy {
    pub fn label(&self) -> String {
        format!("menu={};bundle={};inner={}", self.menu_index, self.bundle.mask(), self.inner)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    /// Truthful play of catalog entry `id`.
    Truthful(usize),
    Deviate(DeviationStrategy),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DominantRun<T: Scalar> {
    pub outcome: Outcome<T>,
    /// Player caught with messages no catalog valuation would send.
    pub inconsistent: Option<usize>,
    pub announce_bits: usize,
    pub bundle_bits: usize,
    pub inner_bits: usize,
}

impl<T: Scalar> DominantRun<T> {
    pub fn bits(&self) -> usize {
        self.announce_bits + self.bundle_bits + self.inner_bits
    }
}

type Sequence = Vec<(bool, u8)>;

/// Precomputed menus and reference transcripts for the wrapper.
pub struct DominantSetup<'a, T: Scalar> {
    mech: &'a dyn Mechanism<T>,
    catalogs: &'a [Catalog<T>],
    /// `menus[k]`: menus presented to player `k`.
    pub menus: [MenuCatalog<T>; 2],
    references: Vec<Sequence>,
    cc: usize,
}

fn push_uint(seq: &mut Sequence, sender: u8, value: usize, width: u32) {
    for b in (0..width).rev() {
        seq.push(((value >> b) & 1 == 1, sender));
    }
}

fn two_players<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<()> {
    if mech.players() != 2 || catalogs.len() != 2 {
        return Err(Error::Domain(format!("{} has {} players, the transformation needs 2", mech.name(), mech.players())));
    }
    Ok(())
}

impl<'a, T: Scalar> DominantSetup<'a, T> {
    pub fn new(mech: &'a dyn Mechanism<T>, catalogs: &'a [Catalog<T>]) -> Result<Self> {
        two_players(mech, catalogs)?;
        let menus = [menu_catalog(mech, catalogs, 0)?, menu_catalog(mech, catalogs, 1)?];
        let mut setup = DominantSetup { mech, catalogs, menus, references: Vec::new(), cc: 0 };
        let tuples: Vec<Vec<usize>> = index_tuples(&[catalogs[0].len(), catalogs[1].len()]).collect();
        let refs: Vec<(Sequence, usize)> = tuples
            .par_iter()
            .map(|ids| {
                let mut seq = setup.announcements(ids[0], ids[1]);
                let run = run_mechanism(mech, &[catalogs[0].get(ids[0]).clone(), catalogs[1].get(ids[1]).clone()])?;
                seq.extend(run.transcript.bits().iter().zip(run.transcript.senders()).map(|(&b, &s)| (b, s)));
                Ok((seq, run.transcript.len()))
            })
            .collect::<Result<_>>()?;
        setup.cc = refs.iter().map(|r| r.1).max().unwrap_or(0);
        setup.references = refs.into_iter().map(|r| r.0).collect();
        Ok(setup)
    }

    /// Width of the index player `k` announces (a menu presented to the other).
    pub fn index_bits(&self, k: usize) -> u32 {
        self.menus[1 - k].bits()
    }

    /// Longest transcript of the inner mechanism on catalog profiles.
    pub fn inner_cc(&self) -> usize {
        self.cc
    }

    /// Menu index that entry `x` of player `k` presents to the other player.
    pub fn presented_index(&self, k: usize, x: usize) -> usize {
        let mut ids = [0, 0];
        ids[k] = x;
        self.menus[1 - k].menu_index(&ids)
    }

    fn announcements(&self, x0: usize, x1: usize) -> Sequence {
        let mut seq = Vec::new();
        push_uint(&mut seq, 0, self.presented_index(0, x0), self.index_bits(0));
        push_uint(&mut seq, 1, self.presented_index(1, x1), self.index_bits(1));
        seq
    }

    /// Sender of the last bit of the shortest prefix that no catalog
    /// profile produces.
    fn inconsistent_player(&self, seq: &Sequence) -> Option<usize> {
        let mut alive: Vec<&Sequence> = self.references.iter().collect();
        for (pos, bit) in seq.iter().enumerate() {
            alive.retain(|r| r.get(pos) == Some(bit));
            if alive.is_empty() {
                return Some(bit.1 as usize);
            }
        }
        None
    }

    /// Plays the wrapper with the given strategies.
    pub fn run(&self, strategies: [Strategy; 2]) -> Result<DominantRun<T>> {
        let m = self.mech.items();
        let mut index = [0usize; 2];
        let mut inner = [0usize; 2];
        for k in 0..2 {
            match strategies[k] {
                Strategy::Truthful(x) => {
                    index[k] = self.presented_index(k, x);
                    inner[k] = x;
                }
                Strategy::Deviate(d) => {
                    if d.menu_index >> self.index_bits(k) != 0 {
                        return Err(Error::Domain(format!("menu index {} does not fit in {} bits", d.menu_index, self.index_bits(k))));
                    }
                    index[k] = d.menu_index;
                    inner[k] = d.inner;
                }
            }
            if inner[k] >= self.catalogs[k].len() {
                return Err(Error::Domain(format!("catalog entry {} out of range", inner[k])));
            }
        }
        // menu each player was told about, if the index names one
        let named = |k: usize| -> Option<&Menu<T>> { self.menus[k].menus.get(index[1 - k]) };
        let mut bundles = [Bundle::EMPTY; 2];
        for k in 0..2 {
            bundles[k] = match strategies[k] {
                Strategy::Truthful(x) => match named(k) {
                    Some(menu) => best_bundle(menu, self.catalogs[k].get(x))?.0,
                    None => Bundle::EMPTY,
                },
                Strategy::Deviate(d) => d.bundle,
            };
            if !bundles[k].fits(m) {
                return Err(Error::Domain(format!("bundle {} out of range", bundles[k])));
            }
        }
        let mut seq = Vec::new();
        push_uint(&mut seq, 0, index[0], self.index_bits(0));
        push_uint(&mut seq, 1, index[1], self.index_bits(1));
        let profile = [self.catalogs[0].get(inner[0]).clone(), self.catalogs[1].get(inner[1]).clone()];
        let run = run_mechanism(self.mech, &profile)?;
        seq.extend(run.transcript.bits().iter().zip(run.transcript.senders()).map(|(&b, &s)| (b, s)));
        let inconsistent = self.inconsistent_player(&seq);
        let outcome = match inconsistent {
            None => run.outcome.clone(),
            Some(bad) => {
                let good = 1 - bad;
                let mut out = Outcome::nobody(2);
                if let Some(menu) = named(good) {
                    if let Price::Finite(p) = menu.price(bundles[good]) {
                        out.allocation[good] = bundles[good];
                        out.payments[good] = p.clone();
                    }
                }
                out
            }
        };
        Ok(DominantRun {
            outcome,
            inconsistent,
            announce_bits: (self.index_bits(0) + self.index_bits(1)) as usize,
            bundle_bits: 2 * m,
            inner_bits: run.transcript.len(),
        })
    }

    /// Every deviation available to player `k`.
    pub fn deviations(&self, k: usize) -> Vec<DeviationStrategy> {
        let m = self.mech.items();
        let mut out = Vec::new();
        for menu_index in 0..(1usize << self.index_bits(k)) {
            for bundle in Bundle::all(m) {
                for inner in 0..self.catalogs[k].len() {
                    out.push(DeviationStrategy { menu_index, bundle, inner });
                }
            }
        }
        out
    }
}

/// One line of the dominance audit: the worst opponent for a given true
/// valuation and deviation.
#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub mechanism: String,
    pub player: usize,
    pub valuation: usize,
    pub deviation: String,
    pub truthful: String,
    pub deviating: String,
    pub gap: String,
}

#[derive(Clone, Debug)]
pub struct AuditReport<T: Scalar> {
    pub rows: Vec<AuditRow>,
    pub cases: usize,
    /// Largest `deviating - truthful` utility; positive means a violation.
    pub max_gap: T,
    pub worst: Option<AuditRow>,
}

impl<T: Scalar> AuditReport<T> {
    pub fn passed(&self) -> bool {
        !self.max_gap.is_positive()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mechanism,player,valuation,deviation,truthful,deviating,gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "\"{}\",{},{},{},{},{},{}\n",
                r.mechanism.replace('"', "\"\""),
                r.player,
                r.valuation,
                r.deviation,
                r.truthful,
                r.deviating,
                r.gap
            ));
        }
        out
    }
}

/// Checks that no audited deviation beats truthful play, for every true
/// catalog valuation and every opponent strategy.
pub fn deviation_audit<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<AuditReport<T>> {
    let setup = DominantSetup::new(mech, catalogs)?;
    let mut rows = Vec::new();
    let mut cases = 0;
    let mut max_gap: Option<T> = None;
    let mut worst = None;
    for k in 0..2 {
        let j = 1 - k;
        let mut opponents: Vec<Strategy> = (0..catalogs[j].len()).map(Strategy::Truthful).collect();
        opponents.extend(setup.deviations(j).into_iter().map(Strategy::Deviate));
        let own = setup.deviations(k);
        let place = |mine: Strategy, theirs: Strategy| if k == 0 { [mine, theirs] } else { [theirs, mine] };
        for x in 0..catalogs[k].len() {
            let v = catalogs[k].get(x);
            let truthful: Vec<T> = opponents
                .par_iter()
                .map(|&o| Ok(setup.run(place(Strategy::Truthful(x), o))?.outcome.utility(k, v)))
                .collect::<Result<_>>()?;
            let results: Vec<(T, T, T, usize)> = own
                .par_iter()
                .map(|&d| {
                    let mut best: Option<(T, T, T, usize)> = None;
                    for (oi, &o) in opponents.iter().enumerate() {
                        let u = setup.run(place(Strategy::Deviate(d), o))?.outcome.utility(k, v);
                        let gap = u.clone() - truthful[oi].clone();
                        if best.as_ref().is_none_or(|b| gap > b.2) {
                            best = Some((truthful[oi].clone(), u, gap, oi));
                        }
                    }
                    Ok(best.expect("at least one opponent strategy"))
                })
                .collect::<Result<_>>()?;
            cases += own.len() * opponents.len();
            for (d, (tu, du, gap, _)) in own.iter().zip(results) {
                let row = AuditRow {
                    mechanism: mech.id(),
                    player: k,
                    valuation: x,
                    deviation: d.label(),
                    truthful: tu.to_exact_string(),
                    deviating: du.to_exact_string(),
                    gap: gap.to_exact_string(),
                };
                if max_gap.as_ref().is_none_or(|g| gap > *g) {
                    max_gap = Some(gap);
                    worst = Some(row.clone());
                }
                rows.push(row);
            }
        }
    }
    Ok(AuditReport { rows, cases, max_gap: max_gap.unwrap_or_else(T::zero), worst })
}

/// Adds `eps |S| / (2m)` to every bundle.
pub fn tilt<T: Scalar>(v: &Valuation<T>, eps: &T) -> Result<Valuation<T>> {
    let m = v.m();
    let step = eps.clone() / T::int(2 * m as i64);
    Valuation::from_fn(m, |s| v.value(s).clone() + step.clone() * T::int(s.len() as i64))
}

/// Tilt plus independent noise on every nonempty bundle, drawn uniformly
/// from `grid_l` evenly spaced points of `[0, eps/(2m)]`.
pub fn strictify<T: Scalar>(v: &Valuation<T>, eps: &T, grid_l: u64, seed: u64) -> Result<Valuation<T>> {
    if !eps.is_positive() {
        return Err(Error::Config(format!("strictify needs a positive epsilon, got {eps}")));
    }
    if grid_l < 2 {
        return Err(Error::Config(format!("strictify needs a grid of at least 2 points, got {grid_l}")));
    }
    let m = v.m();
    let tilted = tilt(v, eps)?;
    let unit = eps.clone() / T::int(2 * m as i64) / T::from_u64(grid_l - 1).ok_or_else(|| Error::Config("grid too large".into()))?;
    let mut r = rng::stream(seed, "strictify", 0);
    let table: Vec<T> = Bundle::all(m)
        .map(|s| {
            let base = tilted.value(s).clone();
            if s.is_empty() {
                base
            } else {
                base + unit.clone() * T::from_u64(r.random_range(0..grid_l)).expect("grid point")
            }
        })
        .collect();
    Valuation::new(m, table)
}

/// True when `v` has a single profit-maximizing bundle in every menu.
pub fn is_precise_for<T: Scalar>(v: &Valuation<T>, menus: &[Menu<T>]) -> Result<bool> {
    for menu in menus {
        if profit_argmax_set(menu, v)?.len() != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strictifies `v` until its argmax is unique against every given menu.
/// Returns the valuation and the number of resamples used.
pub fn strictify_for_menus<T: Scalar>(
    v: &Valuation<T>,
    menus: &[Menu<T>],
    eps: &T,
    grid_l: u64,
    seed: u64,
    attempts: u64,
) -> Result<(Valuation<T>, u64)> {
    for a in 0..attempts.max(1) {
        let out = strictify(v, eps, grid_l, seed.wrapping_mul(1_000_003).wrapping_add(a))?;
        if is_precise_for(&out, menus)? {
            return Ok((out, a));
        }
    }
    Err(Error::Sampling(format!("argmax still tied after {attempts} resamples")))
}

/// Default epsilon `1 / (4 max value)`, or `1/4` for all-zero catalogs.
pub fn default_epsilon<T: Scalar>(catalogs: &[Catalog<T>]) -> T {
    let top = catalogs
        .iter()
        .flat_map(|c| c.entries())
        .map(|v| v.max_value().clone())
        .max()
        .unwrap_or_else(T::zero);
    if top.is_positive() {
        T::one() / (T::int(4) * top)
    } else {
        T::ratio(1, 4)
    }
}

/// Default grid size `2^(2m + tax) + 1`.
pub fn default_grid(m: usize, tax: u32) -> u64 {
    (1u64 << (2 * m as u32 + tax).min(62)) + 1
}

/// Strictifies every catalog entry until the mechanism is precise on the
/// catalogs. Entries outside the mechanism's domain after perturbation
/// keep their original values.
pub fn strictify_catalogs<T: Scalar>(
    mech: &dyn Mechanism<T>,
    catalogs: &[Catalog<T>],
    eps: &T,
    seed: u64,
    rounds: u64,
) -> Result<Vec<Catalog<T>>> {
    two_players(mech, catalogs)?;
    let m = mech.items();
    let tax = (0..2).map(|k| menu_catalog(mech, catalogs, k).map(|c| c.bits())).collect::<Result<Vec<_>>>()?;
    let grid = default_grid(m, tax.into_iter().max().unwrap_or(0));
    for round in 0..rounds.max(1) {
        let cats: Vec<Catalog<T>> = catalogs
            .iter()
            .enumerate()
            .map(|(k, cat)| {
                let entries = cat
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(x, v)| {
                        let s = rng::stream(seed, "strictify_catalogs", round).random::<u64>() ^ ((k as u64) << 32 | x as u64);
                        let w = strictify(v, eps, grid, s)?;
                        Ok(if mech.check_domain(k, &w).is_ok() { w } else { v.clone() })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Catalog::new(entries)
            })
            .collect::<Result<_>>()?;
        if check_precise(mech, &cats).is_ok() {
            return Ok(cats);
        }
    }
    Err(Error::Sampling(format!("catalogs still imprecise after {rounds} rounds")))
}

/// Errors naming the first catalog valuation and menu with a tied argmax.
pub fn check_precise<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<[MenuCatalog<T>; 2]> {
    two_players(mech, catalogs)?;
    let menus = [menu_catalog(mech, catalogs, 0)?, menu_catalog(mech, catalogs, 1)?];
    for k in 0..2 {
        for (x, v) in catalogs[k].entries().iter().enumerate() {
            for (mi, menu) in menus[k].menus.iter().enumerate() {
                let set = profit_argmax_set(menu, v)?;
                if set.len() != 1 {
                    return Err(Error::Contract(format!(
                        "player {k} valuation {x} ties {} bundles in menu {mi}",
                        set.len()
                    )));
                }
            }
        }
    }
    Ok(menus)
}

/// `table[a][b]`: bundle for player 0 when player 0 faces menu `a` of
/// `menus[0]` and presents menu `b` of `menus[1]`.
#[derive(Clone, Debug)]
pub struct SimultaneousTable<T: Scalar> {
    pub m: usize,
    pub menus: [MenuCatalog<T>; 2],
    pub table: Vec<Vec<Bundle>>,
    presented: [Vec<usize>; 2],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimultaneousRun {
    pub allocation: [Bundle; 2],
    pub bits: usize,
}

impl<T: Scalar> SimultaneousTable<T> {
    /// Width of one message: indices are padded to `tax` bits.
    pub fn tax(&self) -> usize {
        self.menus[0].bits().max(self.menus[1].bits()) as usize
    }

    pub fn bits(&self) -> usize {
        2 * self.tax()
    }

    /// Both players announce the menu their valuation presents to the other.
    pub fn run(&self, ids: [usize; 2]) -> SimultaneousRun {
        let b = self.presented[0][ids[0]];
        let a = self.presented[1][ids[1]];
        let s = self.table[a][b];
        SimultaneousRun { allocation: [s, s.complement(self.m)], bits: self.bits() }
    }
}

/// Builds the simultaneous table of a precise two-player mechanism.
pub fn to_simultaneous<T: Scalar>(mech: &dyn Mechanism<T>, catalogs: &[Catalog<T>]) -> Result<SimultaneousTable<T>> {
    let menus = check_precise(mech, catalogs)?;
    let presented: [Vec<usize>; 2] = [
        (0..catalogs[0].len()).map(|x| menus[1].menu_index(&[x, 0])).collect(),
        (0..catalogs[1].len()).map(|y| menus[0].menu_index(&[0, y])).collect(),
    ];
    // valuations of player 0 grouped by the menu they present
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (x, &b) in presented[0].iter().enumerate() {
        groups.entry(b).or_default().push(x);
    }
    let mut table = vec![vec![Bundle::EMPTY; menus[1].len()]; menus[0].len()];
    for (a, menu) in menus[0].menus.iter().enumerate() {
        for (&b, members) in &groups {
            let mut s = Bundle::EMPTY;
            for &x in members {
                s = s.union(best_bundle(menu, catalogs[0].get(x))?.0);
            }
            table[a][b] = s;
        }
    }
    Ok(SimultaneousTable { m: mech.items(), menus, table, presented })
}
