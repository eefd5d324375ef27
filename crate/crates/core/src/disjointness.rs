//! Promise z-disjointness.
//!
//! Every player holds a bit string drawn from a publicly known allowed set,
//! and every profile of allowed strings shares at most `z` common 1-bits.
//! The solver decides whether the actual inputs share a 1-bit and counts
//! every bit written on the blackboard.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::ceil_log2;

/// Largest number of allowed profiles checked when validating the promise.
pub const PROFILE_CAP: usize = 1 << 22;
/// Largest z-product universe materialized at one level.
pub const UNIVERSE_CAP: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZDisjointnessInstance {
    n: usize,
    l: usize,
    allowed: Vec<Vec<FixedBitSet>>,
    inputs: Vec<FixedBitSet>,
    z: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Disjoint,
    /// A commonly-1 bit of the inputs.
    Intersect(usize),
}

impl Verdict {
    pub fn intersects(self) -> bool {
        matches!(self, Verdict::Intersect(_))
    }
}

/// One announcement round of the 1-disjointness protocol.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Round {
    pub live_before: usize,
    pub live_after: usize,
    pub announcer: Option<usize>,
    pub bits: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Level {
    pub z: usize,
    pub universe: usize,
    pub bits: usize,
    pub rounds: Vec<Round>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DisjointnessRun {
    pub verdict: Verdict,
    pub bits: usize,
    pub levels: Vec<Level>,
}

impl DisjointnessRun {
    /// `bits / (z^2 n^2 log2 l)`, with each factor floored at 1.
    pub fn empirical_constant(&self, n: usize, l: usize, z: usize) -> f64 {
        let log_l = (l.max(2) as f64).log2();
        let denom = (z.max(1) * z.max(1) * n.max(1) * n.max(1)) as f64 * log_l;
        self.bits as f64 / denom
    }
}

#[derive(Deserialize, Serialize)]
struct InstanceJson {
    n: usize,
    l: usize,
    allowed: Vec<Vec<String>>,
    inputs: Vec<String>,
    z: usize,
}

pub fn parse_bits(s: &str, l: usize) -> Result<FixedBitSet> {
    if s.len() != l {
        return Err(Error::Parse(format!("bit string {s:?} should have length {l}")));
    }
    let mut out = FixedBitSet::with_capacity(l);
    for (k, c) in s.chars().enumerate() {
        match c {
            '0' => {}
            '1' => out.insert(k),
            _ => return Err(Error::Parse(format!("bad character {c:?} in bit string"))),
        }
    }
    Ok(out)
}

pub fn format_bits(b: &FixedBitSet) -> String {
    (0..b.len()).map(|k| if b.contains(k) { '1' } else { '0' }).collect()
}

fn common(strings: &[&FixedBitSet]) -> FixedBitSet {
    let mut acc = strings[0].clone();
    for s in &strings[1..] {
        acc.intersect_with(s);
    }
    acc
}

/// Visits every profile of the given per-player lists, first player fastest.
fn for_each_profile<T>(lists: &[Vec<T>], mut f: impl FnMut(&[&T]) -> Result<()>) -> Result<()> {
    let total = lists.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len()));
    match total {
        Some(t) if t <= PROFILE_CAP => {}
        _ => return Err(Error::Capacity(format!("more than {PROFILE_CAP} allowed profiles"))),
    }
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(());
    }
    let mut idx = vec![0usize; lists.len()];
    loop {
        let profile: Vec<&T> = idx.iter().zip(lists).map(|(&k, l)| &l[k]).collect();
        f(&profile)?;
        let mut p = 0;
        loop {
            if p == lists.len() {
                return Ok(());
            }
            idx[p] += 1;
            if idx[p] < lists[p].len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Largest number of common 1-bits over all profiles of the lists.
pub fn max_common(lists: &[Vec<FixedBitSet>]) -> Result<usize> {
    let mut best = 0;
    for_each_profile(lists, |p| {
        best = best.max(common(p).count_ones(..));
        Ok(())
    })?;
    Ok(best)
}

impl ZDisjointnessInstance {
    pub fn new(n: usize, l: usize, allowed: Vec<Vec<FixedBitSet>>, inputs: Vec<FixedBitSet>, z: usize) -> Result<Self> {
        if n == 0 || allowed.len() != n || inputs.len() != n {
            return Err(Error::Domain(format!("expected {n} allowed sets and inputs")));
        }
        for (i, (set, a)) in allowed.iter().zip(&inputs).enumerate() {
            if set.iter().chain(std::iter::once(a)).any(|s| s.len() != l) {
                return Err(Error::Domain(format!("player {i} has a string of the wrong length")));
            }
            if !set.contains(a) {
                return Err(Error::Domain(format!("input of player {i} is not allowed")));
            }
        }
        let worst = max_common(&allowed)?;
        if worst > z {
            return Err(Error::Promise(format!("an allowed profile has {worst} common bits, promise is {z}")));
        }
        Ok(ZDisjointnessInstance { n, l, allowed, inputs, z })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn allowed(&self) -> &[Vec<FixedBitSet>] {
        &self.allowed
    }

    pub fn inputs(&self) -> &[FixedBitSet] {
        &self.inputs
    }

    /// Common 1-bits of the inputs.
    pub fn brute_force(&self) -> Vec<usize> {
        let refs: Vec<&FixedBitSet> = self.inputs.iter().collect();
        common(&refs).ones().collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: InstanceJson = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let allowed = raw
            .allowed
            .iter()
            .map(|set| set.iter().map(|s| parse_bits(s, raw.l)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let inputs = raw.inputs.iter().map(|s| parse_bits(s, raw.l)).collect::<Result<Vec<_>>>()?;
        ZDisjointnessInstance::new(raw.n, raw.l, allowed, inputs, raw.z)
    }

    pub fn to_json(&self) -> String {
        let raw = InstanceJson {
            n: self.n,
            l: self.l,
            allowed: self.allowed.iter().map(|s| s.iter().map(format_bits).collect()).collect(),
            inputs: self.inputs.iter().map(format_bits).collect(),
            z: self.z,
        };
        serde_json::to_string(&raw).expect("instance serializes")
    }
}

/// 1-disjointness over explicit string lists. `inputs[i]` indexes into
/// `strings[i]`. Returns the verdict, the rounds, the bit count and, per
/// player, the indices of strings consistent with the transcript.
struct OneRun {
    verdict: Verdict,
    rounds: Vec<Round>,
    bits: usize,
    consistent: Vec<Vec<usize>>,
}

fn one_disjointness(width: usize, strings: &[Vec<FixedBitSet>], inputs: &[usize]) -> Result<OneRun> {
    let n = strings.len();
    let mut live = FixedBitSet::with_capacity(width);
    live.insert_range(..);
    let mut consistent: Vec<Vec<usize>> = strings.iter().map(|s| (0..s.len()).collect()).collect();
    let mut rounds = Vec::new();
    let mut bits = 0usize;

    // the announcement a string would make against the current live set
    let announce = |i: usize, a: &FixedBitSet, live: &FixedBitSet, cons: &[usize]| -> Option<(usize, FixedBitSet)> {
        let r = live.count_ones(..);
        for k in a.intersection(live) {
            let mut nb = FixedBitSet::with_capacity(width);
            for &c in cons {
                let b = &strings[i][c];
                if b.contains(k) {
                    nb.union_with(b);
                }
            }
            nb.intersect_with(live);
            // |N| <= (1 - 1/(2n)) r, kept in integers
            if 2 * n * nb.count_ones(..) <= (2 * n - 1) * r {
                return Some((k, nb));
            }
        }
        None
    };

    loop {
        let r = live.count_ones(..);
        if r <= 2 * n {
            bits += n * r;
            let mut hit: Option<FixedBitSet> = None;
            for i in 0..n {
                let mut own = strings[i][inputs[i]].clone();
                own.intersect_with(&live);
                consistent[i].retain(|&c| {
                    let mut b = strings[i][c].clone();
                    b.intersect_with(&live);
                    b == own
                });
                hit = Some(match hit {
                    None => own,
                    Some(mut h) => {
                        h.intersect_with(&own);
                        h
                    }
                });
            }
            let hit = hit.unwrap_or_default();
            let ones: Vec<usize> = hit.ones().collect();
            if ones.len() > 1 {
                return Err(Error::Promise(format!("inputs share {} bits", ones.len())));
            }
            let verdict = ones.first().map_or(Verdict::Disjoint, |&k| Verdict::Intersect(k));
            return Ok(OneRun { verdict, rounds, bits, consistent });
        }
        let msg = ceil_log2(r as u128 + 1) as usize;
        let mut round = Round { live_before: r, live_after: r, announcer: None, bits: 0 };
        let mut next = None;
        for i in 0..n {
            round.bits += msg;
            let said = announce(i, &strings[i][inputs[i]], &live, &consistent[i]);
            let label = said.as_ref().map(|(k, _)| *k);
            let cons_now = consistent[i].clone();
            consistent[i].retain(|&c| announce(i, &strings[i][c], &live, &cons_now).map(|(k, _)| k) == label);
            if let Some((k, nb)) = said {
                round.announcer = Some(i);
                next = Some((k, nb));
                break;
            }
        }
        bits += round.bits;
        match next {
            None => {
                rounds.push(round);
                return Ok(OneRun { verdict: Verdict::Disjoint, rounds, bits, consistent });
            }
            Some((_, nb)) => {
                live = nb;
                round.live_after = live.count_ones(..);
                debug_assert!(2 * n * (r - round.live_after) >= r);
                rounds.push(round);
            }
        }
    }
}

/// Solves an instance whose promise is `z = 1`.
pub fn solve_one_disjointness(inst: &ZDisjointnessInstance) -> Result<DisjointnessRun> {
    if inst.z > 1 {
        return Err(Error::Promise(format!("1-disjointness needs z <= 1, got {}", inst.z)));
    }
    let inputs = input_indices(inst);
    let run = one_disjointness(inst.l, &inst.allowed, &inputs)?;
    let level = Level { z: 1, universe: inst.l, bits: run.bits, rounds: run.rounds, verdict: run.verdict };
    Ok(DisjointnessRun { verdict: run.verdict, bits: run.bits, levels: vec![level] })
}

fn input_indices(inst: &ZDisjointnessInstance) -> Vec<usize> {
    inst.allowed
        .iter()
        .zip(&inst.inputs)
        .map(|(set, a)| set.iter().position(|s| s == a).expect("validated"))
        .collect()
}

fn subsets_of_size(items: &[usize], z: usize, out: &mut Vec<Vec<usize>>, cap: usize) -> Result<()> {
    fn go(items: &[usize], z: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, cap: usize) -> Result<()> {
        if cur.len() == z {
            if out.len() >= cap {
                return Err(Error::Capacity(format!("z-product exceeds {cap} tuples")));
            }
            out.push(cur.clone());
            return Ok(());
        }
        for k in start..items.len() {
            if items.len() - k < z - cur.len() {
                break;
            }
            cur.push(items[k]);
            go(items, z, k + 1, cur, out, cap)?;
            cur.pop();
        }
        Ok(())
    }
    go(items, z, 0, &mut Vec::new(), out, cap)
}

/// z-tuples that every player can cover with one of its strings. Other
/// tuples can never be commonly 1 and are left out of the product.
fn product_universe(strings: &[Vec<FixedBitSet>], z: usize) -> Result<Vec<Vec<usize>>> {
    let mut seen: BTreeMap<Vec<usize>, ()> = BTreeMap::new();
    for s in &strings[0] {
        let ones: Vec<usize> = s.ones().collect();
        let mut tuples = Vec::new();
        subsets_of_size(&ones, z, &mut tuples, UNIVERSE_CAP)?;
        for t in tuples {
            seen.insert(t, ());
            if seen.len() > UNIVERSE_CAP {
                return Err(Error::Capacity(format!("z-product exceeds {UNIVERSE_CAP} tuples")));
            }
        }
    }
    Ok(seen
        .into_keys()
        .filter(|t| strings[1..].iter().all(|set| set.iter().any(|s| t.iter().all(|&k| s.contains(k)))))
        .collect())
}

fn product_string(s: &FixedBitSet, universe: &[Vec<usize>]) -> FixedBitSet {
    let mut out = FixedBitSet::with_capacity(universe.len());
    for (u, t) in universe.iter().enumerate() {
        if t.iter().all(|&k| s.contains(k)) {
            out.insert(u);
        }
    }
    out
}

/// Solves a promise-z instance by descending through z-products.
pub fn solve_z_disjointness(inst: &ZDisjointnessInstance) -> Result<DisjointnessRun> {
    let mut alive: Vec<Vec<usize>> = inst.allowed.iter().map(|s| (0..s.len()).collect()).collect();
    let inputs = input_indices(inst);
    let mut levels = Vec::new();
    let mut bits = 0usize;
    for z in (1..=inst.z).rev() {
        let current: Vec<Vec<FixedBitSet>> =
            alive.iter().enumerate().map(|(i, ids)| ids.iter().map(|&c| inst.allowed[i][c].clone()).collect()).collect();
        let local_inputs: Vec<usize> =
            alive.iter().zip(&inputs).map(|(ids, a)| ids.iter().position(|c| c == a).expect("input stays consistent")).collect();
        let universe = if z == 1 { (0..inst.l).map(|k| vec![k]).collect() } else { product_universe(&current, z)? };
        let products: Vec<Vec<FixedBitSet>> =
            current.iter().map(|set| set.iter().map(|s| product_string(s, &universe)).collect()).collect();
        let run = one_disjointness(universe.len(), &products, &local_inputs)?;
        bits += run.bits;
        let verdict = match run.verdict {
            Verdict::Intersect(u) => Verdict::Intersect(universe[u][0]),
            Verdict::Disjoint => Verdict::Disjoint,
        };
        levels.push(Level { z, universe: universe.len(), bits: run.bits, rounds: run.rounds, verdict });
        if verdict.intersects() {
            return Ok(DisjointnessRun { verdict, bits, levels });
        }
        alive = alive.iter().zip(&run.consistent).map(|(ids, keep)| keep.iter().map(|&k| ids[k]).collect()).collect();
    }
    Ok(DisjointnessRun { verdict: Verdict::Disjoint, bits, levels })
}
