#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use fixedbitset::FixedBitSet;
use taxlab::disjointness::{max_common, ZDisjointnessInstance};
use taxlab::menu::normalize_menu;
use taxlab::verify::BaseFunction;
use taxlab::{Bundle, Menu, Price, Rat, Scalar, Valuation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random monotone normalized valuation with integer values in `0..=top`.
pub fn random_valuation(rng: &mut impl Rng, m: usize, top: i64) -> Valuation<Rat> {
    let mut table = vec![0i64; 1 << m];
    for s in Bundle::all(m).skip(1) {
        let floor = s.items().map(|j| table[s.without(j).index()]).max().unwrap_or(0);
        table[s.index()] = if floor >= top { top } else { rng.random_range(floor..=top) };
    }
    Valuation::new(m, table.into_iter().map(Rat::int).collect()).unwrap()
}

/// Random normalized menu; each raw price is an integer in `1..=top` or infinite.
pub fn random_menu(rng: &mut impl Rng, m: usize, top: i64, inf_weight: f64) -> Menu<Rat> {
    let prices = Bundle::all(m)
        .map(|s| {
            if s.is_empty() {
                Price::zero()
            } else if rng.random_bool(inf_weight) {
                Price::Infinite
            } else {
                Price::Finite(Rat::int(rng.random_range(1..=top)))
            }
        })
        .collect();
    let raw = Menu::new(m, prices).unwrap();
    normalize_menu(&raw).unwrap()
}

pub fn price(n: i64) -> Price<Rat> {
    Price::Finite(Rat::int(n))
}

/// Default catalogs topped up with random valuations inside each player's
/// domain, up to `size` entries per player.
pub fn rich_catalogs(mech: &dyn taxlab::Mechanism<Rat>, r: &mut impl Rng, size: usize, top: i64) -> Vec<taxlab::Catalog<Rat>> {
    let base = taxlab::protocol::library::default_catalogs(mech).unwrap();
    base.iter()
        .enumerate()
        .map(|(i, cat)| {
            let mut entries: Vec<Valuation<Rat>> = cat.entries().iter().take(size).cloned().collect();
            for _ in 0..(size * 20) {
                if entries.len() >= size {
                    break;
                }
                let v = random_valuation(r, mech.items(), top);
                if mech.check_domain(i, &v).is_ok() && !entries.contains(&v) {
                    entries.push(v);
                }
            }
            taxlab::Catalog::new(entries).unwrap()
        })
        .collect()
}

/// Library mechanisms at the given item count, with small parameters.
pub fn library(m: usize) -> Vec<taxlab::MechanismSpec<Rat>> {
    taxlab::protocol::library::library_at(m).unwrap()
}

/// Monotone closure from below: `f(S) = max over T ⊆ S of raw(T)`, with `f(∅) = 0`.
fn close(m: usize, raw: &[Price<Rat>]) -> Vec<Price<Rat>> {
    let mut f = raw.to_vec();
    f[0] = Price::zero();
    for s in Bundle::all(m) {
        for j in s.items() {
            let sub = f[s.without(j).index()].clone();
            if sub > f[s.index()] {
                f[s.index()] = sub;
            }
        }
    }
    f
}

/// Random base function near `menu`: below it everywhere, and pushed above
/// it at one bundle half of the time.
pub fn random_base(r: &mut impl Rng, menu: &Menu<Rat>, bound: Rat) -> BaseFunction<Rat> {
    let m = menu.m();
    let quarter = bound / Rat::int(4);
    let mut raw: Vec<Price<Rat>> = Bundle::all(m)
        .map(|s| match menu.price(s) {
            Price::Infinite if r.random_bool(0.5) => Price::Infinite,
            Price::Infinite => Price::Finite(bound),
            Price::Finite(x) => {
                let drop = quarter * Rat::int(r.random_range(0..3));
                Price::Finite(if *x > drop { *x - drop } else { Rat::int(0) })
            }
        })
        .collect();
    if r.random_bool(0.5) {
        let s = Bundle(r.random_range(1..(1u32 << m)));
        raw[s.index()] = match menu.price(s) {
            Price::Finite(x) if *x + quarter <= bound => Price::Finite(*x + quarter),
            Price::Finite(_) => Price::Infinite,
            Price::Infinite => Price::Infinite,
        };
    }
    BaseFunction::new(m, close(m, &raw), &bound).unwrap()
}

fn random_string(r: &mut impl Rng, l: usize, density: f64) -> FixedBitSet {
    let mut s = FixedBitSet::with_capacity(l);
    for k in 0..l {
        if r.random_bool(density) {
            s.insert(k);
        }
    }
    s
}

/// Grows allowed sets one string at a time, keeping the promise.
pub fn random_instance(r: &mut impl Rng) -> ZDisjointnessInstance {
    let n = r.random_range(1..=4);
    let l = r.random_range(1..=16);
    let z = r.random_range(1..=3);
    let density = r.random_range(0.2..0.7);
    let mut allowed: Vec<Vec<FixedBitSet>> = vec![vec![FixedBitSet::with_capacity(l)]; n];
    for _ in 0..(n * 5) {
        let i = r.random_range(0..n);
        let cand = random_string(r, l, density);
        if allowed[i].contains(&cand) {
            continue;
        }
        allowed[i].push(cand);
        if max_common(&allowed).unwrap() > z {
            allowed[i].pop();
        }
    }
    let inputs = allowed.iter().map(|set| set[r.random_range(0..set.len())].clone()).collect();
    ZDisjointnessInstance::new(n, l, allowed, inputs, z).unwrap()
}

