//! Menu reconstruction with general communication.
//!
//! The players other than `i` shrink a set of live candidate menus until one
//! remains. A step either checks one bundle whose price is spread out over
//! the live menus, or reduces "does the true menu disagree with the most
//! frequent prices somewhere in P" to promise z-disjointness, where every
//! bit is a possible transcript of the price protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use fixedbitset::FixedBitSet;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::Bundle;
use crate::catalog::{index_tuples, Catalog};
use crate::disjointness::{max_common, solve_z_disjointness, Verdict, ZDisjointnessInstance};
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::protocol::{menu_catalog, run_price_protocol, MenuCatalog, PriceRun};
use crate::protocol::{Mechanism, Transcript};
use crate::rng;
use crate::scalar::{ceil_log2, Price, Scalar};
use crate::valuation::Valuation;

/// Resampling budget for a representation set.
pub const SAMPLING_ATTEMPTS: u64 = 64;

/// Most frequent price of every bundle over the given menus; ties go to the
/// smaller price, with infinity last. Returns the price and its frequency.
pub fn frequent_prices<T: Scalar>(m: usize, menus: &[&Menu<T>]) -> Vec<(Price<T>, usize)> {
    Bundle::all(m)
        .map(|s| {
            let mut counts: BTreeMap<&Price<T>, usize> = BTreeMap::new();
            for menu in menus {
                *counts.entry(menu.price(s)).or_default() += 1;
            }
            let mut best: Option<(&Price<T>, usize)> = None;
            for (p, c) in counts {
                if best.is_none_or(|(_, b)| c > b) {
                    best = Some((p, c));
                }
            }
            best.map_or((Price::zero(), 0), |(p, c)| (p.clone(), c))
        })
        .collect()
}

/// Bundles where a menu disagrees with the frequent prices.
pub fn witnesses<T: Scalar>(menu: &Menu<T>, frequent: &[(Price<T>, usize)]) -> Vec<Bundle> {
    Bundle::all(menu.m()).filter(|s| *menu.price(*s) != frequent[s.index()].0).collect()
}

fn log_size(n: usize) -> f64 {
    (n as f64).log2().max(1.0)
}

/// Samples a set of bundles that hits every witness set in `band` and no
/// witness set of `all` more than `8 log2 |all|` times.
pub fn representation_set(
    m: usize,
    all: &[Vec<Bundle>],
    band: &[usize],
    t: usize,
    seed: u64,
    tag: u64,
) -> Result<BTreeSet<Bundle>> {
    if band.is_empty() {
        return Err(Error::Domain("representation set for an empty band".into()));
    }
    let log = log_size(all.len());
    let q = (4.0 * log / t.max(1) as f64).min(1.0);
    let cap = 8.0 * log;
    for attempt in 0..SAMPLING_ATTEMPTS {
        let mut r = rng::stream(seed, "representation_set", tag.wrapping_mul(SAMPLING_ATTEMPTS) + attempt);
        let p: BTreeSet<Bundle> = Bundle::all(m).filter(|_| q >= 1.0 || r.random_bool(q)).collect();
        let covers = band.iter().all(|&k| all[k].iter().any(|s| p.contains(s)));
        let sparse = all.iter().all(|w| (w.iter().filter(|s| p.contains(s)).count() as f64) <= cap);
        if covers && sparse {
            return Ok(p);
        }
    }
    Err(Error::Sampling(format!("no representation set after {SAMPLING_ATTEMPTS} attempts")))
}

/// Shared state for reconstructing the menus of player `i`: the menu
/// catalog, every profile of the others and cached price-protocol runs.
pub struct CommSetup<'a, T: Scalar> {
    mech: &'a dyn Mechanism<T>,
    catalogs: &'a [Catalog<T>],
    i: usize,
    pub menus: MenuCatalog<T>,
    profiles: Vec<Vec<usize>>,
    profile_menu: Vec<usize>,
    runs: RwLock<BTreeMap<Bundle, Arc<Vec<PriceRun<T>>>>>,
}

/// A built disjointness instance with its block layout.
#[derive(Clone, Debug)]
pub struct BuiltInstance {
    pub instance: ZDisjointnessInstance,
    /// Bundle and price-protocol transcript behind each bit.
    pub blocks: Vec<(Bundle, Transcript)>,
    /// `8 log2 |Z'|` rounded up.
    pub promise: usize,
    pub measured: usize,
    pub widened: bool,
}

impl BuiltInstance {
    /// Largest number of intersecting bits inside one block, over all
    /// profiles of allowed strings.
    pub fn max_block_hits(&self) -> Result<usize> {
        let mut owner: BTreeMap<Bundle, Vec<usize>> = BTreeMap::new();
        for (k, (s, _)) in self.blocks.iter().enumerate() {
            owner.entry(*s).or_default().push(k);
        }
        let allowed = self.instance.allowed();
        let mut worst = 0;
        for ids in index_tuples(&allowed.iter().map(Vec::len).collect::<Vec<_>>()) {
            let mut acc = allowed[0][ids[0]].clone();
            for (set, &k) in allowed.iter().zip(&ids).skip(1) {
                acc.intersect_with(&set[k]);
            }
            for bits in owner.values() {
                worst = worst.max(bits.iter().filter(|&&b| acc.contains(b)).count());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BandRecord {
    pub t: usize,
    pub band: usize,
    pub live: usize,
    pub sample: usize,
    pub l: usize,
    pub promise: usize,
    pub measured: usize,
    pub widened: bool,
    pub intersect: bool,
    pub bits: usize,
    /// Most intersecting bits in one block over all allowed profiles.
    pub block_hits: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub live_before: usize,
    pub live_after: usize,
    pub direct: bool,
    pub queried: Option<String>,
    pub price_bits: usize,
    pub disjointness_bits: usize,
    pub bookkeeping_bits: usize,
    pub bands: Vec<BandRecord>,
}

#[derive(Clone, Debug)]
pub struct CommReconstruction<T: Scalar> {
    pub menu: Menu<T>,
    pub menu_index: usize,
    pub steps: Vec<StepRecord>,
    pub price_bits: usize,
    pub disjointness_bits: usize,
    pub bookkeeping_bits: usize,
}

impl<T: Scalar> CommReconstruction<T> {
    pub fn bits(&self) -> usize {
        self.price_bits + self.disjointness_bits + self.bookkeeping_bits
    }
}

impl<'a, T: Scalar> CommSetup<'a, T> {
    pub fn new(mech: &'a dyn Mechanism<T>, catalogs: &'a [Catalog<T>], i: usize) -> Result<Self> {
        let menus = menu_catalog(mech, catalogs, i)?;
        let sizes: Vec<usize> = catalogs.iter().enumerate().map(|(k, c)| if k == i { 1 } else { c.len() }).collect();
        let profiles: Vec<Vec<usize>> = index_tuples(&sizes).collect();
        let profile_menu = profiles.iter().map(|ids| menus.menu_index(ids)).collect();
        Ok(CommSetup { mech, catalogs, i, menus, profiles, profile_menu, runs: RwLock::new(BTreeMap::new()) })
    }

    pub fn player(&self) -> usize {
        self.i
    }

    fn profile(&self, ids: &[usize]) -> Vec<Valuation<T>> {
        ids.iter().zip(self.catalogs).map(|(&k, c)| c.get(k).clone()).collect()
    }

    /// Price-protocol runs for `s` over every profile of the others.
    fn price_runs(&self, s: Bundle) -> Result<Arc<Vec<PriceRun<T>>>> {
        if let Some(r) = self.runs.read().expect("cache lock").get(&s) {
            return Ok(r.clone());
        }
        let runs: Vec<PriceRun<T>> = self
            .profiles
            .par_iter()
            .zip(&self.profile_menu)
            .map(|(ids, &k)| {
                let run = run_price_protocol(self.mech, self.i, &self.profile(ids), s)?;
                if run.price != *self.menus.menus[k].price(s) {
                    return Err(Error::Characterization {
                        bundle: s,
                        detail: format!("price protocol says {}, menu says {}", run.price, self.menus.menus[k].price(s)),
                    });
                }
                Ok(run)
            })
            .collect::<Result<_>>()?;
        let runs = Arc::new(runs);
        self.runs.write().expect("cache lock").insert(s, runs.clone());
        Ok(runs)
    }

    /// Builds the disjointness instance for sample `sample`, using only the
    /// profiles whose menu is in `live`. `truth` is the actual profile.
    pub fn build_disjointness_instance(
        &self,
        sample: &BTreeSet<Bundle>,
        frequent: &[(Price<T>, usize)],
        live: &BTreeSet<usize>,
        truth: &[usize],
    ) -> Result<BuiltInstance> {
        let others: Vec<usize> = (0..self.catalogs.len()).filter(|&k| k != self.i).collect();
        let live_profiles: Vec<usize> = (0..self.profiles.len()).filter(|&p| live.contains(&self.profile_menu[p])).collect();
        // bit layout: (bundle, transcript) for transcripts whose price differs
        // from the frequent price; other transcripts can never carry a 1
        let mut blocks: Vec<(Bundle, Transcript)> = Vec::new();
        let mut holders: Vec<BTreeMap<usize, BTreeSet<usize>>> = vec![BTreeMap::new(); others.len()];
        for &s in sample {
            let runs = self.price_runs(s)?;
            let mut local: BTreeMap<&Transcript, usize> = BTreeMap::new();
            for &p in &live_profiles {
                let run = &runs[p];
                if run.price == frequent[s.index()].0 {
                    continue;
                }
                let bit = *local.entry(&run.transcript).or_insert_with(|| {
                    blocks.push((s, run.transcript.clone()));
                    blocks.len() - 1
                });
                for (slot, &k) in others.iter().enumerate() {
                    holders[slot].entry(self.profiles[p][k]).or_default().insert(bit);
                }
            }
        }
        let l = blocks.len();
        let mut allowed: Vec<Vec<FixedBitSet>> = vec![Vec::new(); others.len()];
        let mut inputs = Vec::new();
        for (slot, &k) in others.iter().enumerate() {
            let ids: BTreeSet<usize> = live_profiles.iter().map(|&p| self.profiles[p][k]).collect();
            if !ids.contains(&truth[k]) {
                return Err(Error::Soundness(format!("true valuation of player {k} is no longer live")));
            }
            let string = |id: usize| {
                let mut b = FixedBitSet::with_capacity(l);
                for &bit in holders[slot].get(&id).into_iter().flatten() {
                    b.insert(bit);
                }
                b
            };
            let mut set: Vec<FixedBitSet> = Vec::new();
            for &id in &ids {
                let b = string(id);
                if !set.contains(&b) {
                    set.push(b);
                }
            }
            inputs.push(string(truth[k]));
            allowed[slot] = set;
        }
        let zprime = live.len();
        let promise = (8.0 * log_size(zprime)).ceil() as usize;
        let measured = max_common(&allowed)?;
        let instance = ZDisjointnessInstance::new(others.len(), l, allowed, inputs, measured)?;
        Ok(BuiltInstance { instance, blocks, promise, measured, widened: measured > promise })
    }

    /// Recovers the menu presented to player `i` when the others hold the
    /// catalog entries in `truth` (the entry at `i` is ignored).
    pub fn reconstruct(&self, truth: &[usize], seed: u64) -> Result<CommReconstruction<T>> {
        let m = self.mech.items();
        let true_profile = self.profile(truth);
        let mut live: BTreeSet<usize> = (0..self.menus.len()).collect();
        let mut steps = Vec::new();
        let bookkeeping = ceil_log2(m as u128 + 2) as usize;
        while live.len() > 1 {
            let before = live.len();
            let menus: Vec<&Menu<T>> = live.iter().map(|&k| &self.menus.menus[k]).collect();
            let frequent = frequent_prices(m, &menus);
            let mut step = StepRecord {
                live_before: before,
                live_after: before,
                direct: false,
                queried: None,
                price_bits: 0,
                disjointness_bits: 0,
                bookkeeping_bits: bookkeeping,
                bands: Vec::new(),
            };
            let spread = Bundle::all(m).find(|s| 2 * frequent[s.index()].1 < before);
            let query = |s: Bundle, live: &mut BTreeSet<usize>, step: &mut StepRecord| -> Result<()> {
                let run = run_price_protocol(self.mech, self.i, &true_profile, s)?;
                step.price_bits += run.transcript.len();
                step.queried = Some(s.to_string());
                live.retain(|&k| *self.menus.menus[k].price(s) == run.price);
                Ok(())
            };
            if let Some(s) = spread {
                step.direct = true;
                query(s, &mut live, &mut step)?;
            } else {
                let wit: BTreeMap<usize, Vec<Bundle>> =
                    live.iter().map(|&k| (k, witnesses(&self.menus.menus[k], &frequent))).collect();
                let mut t = 1usize << m;
                let mut found = false;
                while t >= 1 {
                    let zprime: Vec<usize> = live.iter().copied().filter(|k| wit[k].len() <= t).collect();
                    let band: Vec<usize> =
                        (0..zprime.len()).filter(|&x| 2 * wit[&zprime[x]].len() >= t).collect();
                    if !band.is_empty() {
                        let all: Vec<Vec<Bundle>> = zprime.iter().map(|k| wit[k].clone()).collect();
                        let tag = ((steps.len() as u64) << 20) | t as u64;
                        let sample = representation_set(m, &all, &band, t, seed, tag)?;
                        let zset: BTreeSet<usize> = zprime.iter().copied().collect();
                        let built = self.build_disjointness_instance(&sample, &frequent, &zset, truth)?;
                        let run = solve_z_disjointness(&built.instance)?;
                        step.disjointness_bits += run.bits;
                        step.bands.push(BandRecord {
                            t,
                            band: band.len(),
                            live: zprime.len(),
                            sample: sample.len(),
                            l: built.instance.l(),
                            promise: built.promise,
                            measured: built.measured,
                            widened: built.widened,
                            intersect: run.verdict.intersects(),
                            bits: run.bits,
                            block_hits: built.max_block_hits()?,
                        });
                        if let Verdict::Intersect(bit) = run.verdict {
                            query(built.blocks[bit].0, &mut live, &mut step)?;
                            found = true;
                            break;
                        }
                        for &x in &band {
                            live.remove(&zprime[x]);
                        }
                    }
                    t /= 2;
                }
                if !found {
                    live.retain(|k| wit[k].is_empty());
                }
            }
            step.live_after = live.len();
            if live.is_empty() {
                return Err(Error::Soundness("every candidate menu was eliminated".into()));
            }
            if 2 * step.live_after > before {
                return Err(Error::Soundness(format!("step kept {} of {} menus", step.live_after, before)));
            }
            steps.push(step);
        }
        let k = *live.iter().next().ok_or_else(|| Error::Soundness("no candidate menus".into()))?;
        let (price_bits, disjointness_bits, bookkeeping_bits) = steps.iter().fold((0, 0, 0), |acc, s| {
            (acc.0 + s.price_bits, acc.1 + s.disjointness_bits, acc.2 + s.bookkeeping_bits)
        });
        Ok(CommReconstruction {
            menu: self.menus.menus[k].clone(),
            menu_index: k,
            steps,
            price_bits,
            disjointness_bits,
            bookkeeping_bits,
        })
    }
}

/// One-shot reconstruction for a single profile.
pub fn reconstruct_menu_comm<T: Scalar>(
    mech: &dyn Mechanism<T>,
    catalogs: &[Catalog<T>],
    i: usize,
    truth: &[usize],
    seed: u64,
) -> Result<CommReconstruction<T>> {
    CommSetup::new(mech, catalogs, i)?.reconstruct(truth, seed)
}
