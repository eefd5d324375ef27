//! The built-in mechanisms.

use std::sync::Arc;

use serde_json::{json, Value};

use super::{width_for, AccessMode, Mechanism, MechanismSpec, Outcome, Protocol};
use crate::bundle::Bundle;
use crate::catalog::Catalog;
use crate::demand_menus::{gadget_batches, gadget_first_query, gadget_price_check, min_affine_argmax, mt_menu};
use crate::error::{Error, Result};
use crate::menu::{normalize_menu, Menu};
use crate::min_affine::MinAffineMenu;
use crate::oracle::QueryAccess;
use crate::scalar::{Price, Scalar};
use crate::valuation::Valuation;

const ITEM_A: usize = 0;
const ITEM_B: usize = 1;

/// Nearest integer to `x` (halves round up), clamped to `lo..=hi`.
fn round_clamp<T: Scalar>(x: &T, lo: i64, hi: i64) -> i64 {
    let shifted = -(x.clone() + T::ratio(1, 2));
    (-shifted.ceil_i64()).clamp(lo, hi)
}

fn price_vec_sum<T: Scalar>(prices: &[Price<T>], s: Bundle) -> Price<T> {
    crate::oracle::bundle_cost(prices, s)
}

/// Bundles of size `m/2`, ascending by mask. Position is the coordinate
/// used by the disjointness encodings.
pub fn half_bundles(m: usize) -> Vec<Bundle> {
    Bundle::of_size(m, m / 2).collect()
}

fn only_empty<T: Scalar>(s: Bundle) -> Price<T> {
    if s.is_empty() {
        Price::zero()
    } else {
        Price::Infinite
    }
}

// ---------------------------------------------------------------- warm-up

/// Alice rounds her value for item `a` to `t` in `1..=2^c` and sends it;
/// Bob buys `{a}` at price `t` iff his value for `a` is at least `t`.
#[derive(Clone, Debug)]
pub struct Warmup {
    pub c: u32,
    pub m: usize,
}

impl Warmup {
    pub fn new(c: u32, m: usize) -> Result<Self> {
        if c == 0 || c > 20 {
            return Err(Error::Construction(format!("warm-up needs 1 <= c <= 20 (got {c})")));
        }
        if m == 0 || m > crate::bundle::MAX_ITEMS {
            return Err(Error::Construction(format!("warm-up needs 1..=16 items (got {m})")));
        }
        Ok(Warmup { c, m })
    }

    fn levels(&self) -> i64 {
        1 << self.c
    }

    fn send_t<T: Scalar>(&self, proto: &mut Protocol<'_, T>) -> Result<i64> {
        let hi = self.levels();
        let code = proto.send_uint(0, self.c, |view| {
            let x = view.value(Bundle::singleton(ITEM_A))?;
            Ok((round_clamp(&x, 1, hi) - 1) as u64)
        })?;
        Ok(code as i64 + 1)
    }
}

impl<T: Scalar> Mechanism<T> for Warmup {
    fn name(&self) -> &'static str {
        "warmup"
    }
    fn params(&self) -> Value {
        json!({"c": self.c, "m": self.m})
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        T::int(self.levels())
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Value
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let t = T::int(self.send_t(proto)?);
        let accept = proto.send_bit(1, |view| Ok(view.value(Bundle::singleton(ITEM_A))? >= t))?;
        let mut out = Outcome::nobody(2);
        if accept {
            out.allocation[1] = Bundle::singleton(ITEM_A);
            out.payments[1] = t;
        }
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player == 0 || s != Bundle::singleton(ITEM_A) {
            return Some(Ok(only_empty(s)));
        }
        Some(self.send_t(proto).map(|t| Price::Finite(T::int(t))))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let a = Bundle::singleton(ITEM_A);
        let price = menus[1].price(a).clone();
        Some(proto.send_bit(1, |view| Ok(price.cmp_value(&view.value(a)?).is_le())).map(|accept| {
            vec![Bundle::EMPTY, if accept { a } else { Bundle::EMPTY }]
        }))
    }
}

// ------------------------------------------------------- value tightness

/// Bob chooses among a fixed antichain `T_1..T_c` priced `|T_k|`, except
/// that `T_t` costs `|T_t| + 1/2`, where `t` is Alice's rounded value for
/// item `a`. One value query by Alice and `c` by Bob.
#[derive(Clone, Debug)]
pub struct ValueTightness {
    pub m: usize,
    pub bundles: Vec<Bundle>,
}

impl ValueTightness {
    pub fn new(m: usize, bundles: Vec<Bundle>) -> Result<Self> {
        Bundle::check_items(m).map_err(|e| Error::Construction(e.to_string()))?;
        if bundles.is_empty() {
            return Err(Error::Construction("need at least one bundle".into()));
        }
        for (k, s) in bundles.iter().enumerate() {
            if s.is_empty() || !s.fits(m) {
                return Err(Error::Construction(format!("bundle {s} is empty or does not fit {m} items")));
            }
            if bundles[..k].iter().any(|t| t.is_subset(*s) || s.is_subset(*t)) {
                return Err(Error::Construction(format!("bundle {s} is comparable with another bundle")));
            }
        }
        Ok(ValueTightness { m, bundles })
    }

    /// `T_k = {k}` for `k = 1..c` over `c` items.
    pub fn singletons(c: usize) -> Result<Self> {
        ValueTightness::new(c, (0..c).map(Bundle::singleton).collect())
    }

    fn c(&self) -> usize {
        self.bundles.len()
    }

    fn raw_price<T: Scalar>(&self, k: usize, t: usize) -> T {
        let base = T::int(self.bundles[k].len() as i64);
        if k + 1 == t {
            base + T::ratio(1, 2)
        } else {
            base
        }
    }

    fn send_t<T: Scalar>(&self, proto: &mut Protocol<'_, T>) -> Result<usize> {
        let c = self.c() as i64;
        let code = proto.send_uint(0, width_for(self.c()), |view| {
            let x = view.value(Bundle::singleton(ITEM_A))?;
            Ok((round_clamp(&x, 1, c) - 1) as u64)
        })?;
        let t = code as usize + 1;
        if t > self.c() {
            return Err(Error::Mechanism(format!("rounded value {t} out of range")));
        }
        Ok(t)
    }

    /// Bob's choice given the prices of `T_1..T_c`; `c` means nothing.
    fn choose<T: Scalar, A: QueryAccess<T>>(&self, view: &mut A, price: impl Fn(usize) -> T) -> Result<usize> {
        let mut best = self.c();
        let mut best_key: Option<(T, Bundle)> = None;
        for k in 0..self.c() {
            let p = view.value(self.bundles[k])? - price(k);
            let better = match &best_key {
                None => true,
                Some((bp, bs)) => p > *bp || (p == *bp && self.bundles[k] < *bs),
            };
            if better {
                best_key = Some((p, self.bundles[k]));
                best = k;
            }
        }
        match best_key {
            Some((p, _)) if !p.is_negative() => Ok(best),
            _ => Ok(self.c()),
        }
    }
}

impl<T: Scalar> Mechanism<T> for ValueTightness {
    fn name(&self) -> &'static str {
        "value_tightness"
    }
    fn params(&self) -> Value {
        json!({"m": self.m, "bundles": self.bundles.iter().map(|b| b.mask()).collect::<Vec<_>>()})
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        let big = self.bundles.iter().map(|b| b.len()).max().unwrap_or(0);
        T::int(big as i64) + T::ratio(1, 2)
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Value
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let t = self.send_t(proto)?;
        let width = width_for(self.c() + 1);
        let k = proto.send_uint(1, width, |view| Ok(self.choose(view, |k| self.raw_price(k, t))? as u64))? as usize;
        let mut out = Outcome::nobody(2);
        if k < self.c() {
            out.allocation[1] = self.bundles[k];
            out.payments[1] = self.raw_price(k, t);
        } else if k > self.c() {
            return Err(Error::Mechanism(format!("choice {k} out of range")));
        }
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player == 0 || s.is_empty() || !self.bundles.iter().any(|b| s.is_subset(*b)) {
            return Some(Ok(only_empty(s)));
        }
        Some(self.send_t(proto).map(|t| {
            (0..self.c())
                .filter(|&k| s.is_subset(self.bundles[k]))
                .map(|k| Price::Finite(self.raw_price(k, t)))
                .min()
                .expect("some superset")
        }))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let menu = menus[1].clone();
        let width = width_for(self.c() + 1);
        let run = proto.send_uint(1, width, |view| {
            let k = self.choose(view, |k| menu.price(self.bundles[k]).finite().cloned().unwrap_or_else(T::zero))?;
            Ok(k as u64)
        });
        Some(run.map(|k| {
            let k = k as usize;
            vec![Bundle::EMPTY, if k < self.c() { self.bundles[k] } else { Bundle::EMPTY }]
        }))
    }
}

// ------------------------------------------------------ demand tightness

/// Alice's rounded value for item `a` selects one of `K` min-affine menus;
/// Bob finds his profit-maximizing bundle with one demand query per price
/// vector (plus one value query per exception).
#[derive(Clone, Debug)]
pub struct DemandTightness<T: Scalar> {
    pub m: usize,
    pub menus: Vec<MinAffineMenu<T>>,
    normalized: Vec<Menu<T>>,
    bound: T,
}

impl<T: Scalar> DemandTightness<T> {
    pub fn new(m: usize, menus: Vec<MinAffineMenu<T>>) -> Result<Self> {
        if menus.is_empty() {
            return Err(Error::Construction("need at least one menu".into()));
        }
        let mut normalized: Vec<Menu<T>> = Vec::new();
        for (t, menu) in menus.iter().enumerate() {
            if menu.m() != m {
                return Err(Error::Construction(format!("menu {t} is over {} items", menu.m())));
            }
            if menu.eval(Bundle::EMPTY) != Price::zero() {
                return Err(Error::Construction(format!("menu {t} does not price the empty bundle at 0")));
            }
            for (s, p) in menu.exceptions() {
                if p > &menu.affine_eval(*s) {
                    return Err(Error::Construction(format!("menu {t} raises the price of {s} above its affine price")));
                }
            }
            let norm = normalize_menu(&menu.to_menu()).map_err(|e| Error::Construction(e.to_string()))?;
            if normalized.contains(&norm) {
                return Err(Error::Construction(format!("menu {t} repeats an earlier menu")));
            }
            normalized.push(norm);
        }
        let bound = normalized
            .iter()
            .filter_map(|n| n.max_finite_price())
            .max()
            .filter(|b| b.is_positive())
            .unwrap_or_else(T::one);
        Ok(DemandTightness { m, menus, normalized, bound })
    }

    /// `2^c` menus with `alpha` price vectors each. Menu `t` prices item
    /// `j` at `t + 1 + ((j + k) mod alpha)` in vector `k`, with offset `k`.
    pub fn family(m: usize, alpha: usize, c: u32) -> Result<Self> {
        if alpha == 0 {
            return Err(Error::Construction("alpha must be positive".into()));
        }
        let menus = (0..(1usize << c))
            .map(|t| {
                let vectors = (0..alpha)
                    .map(|k| (0..m).map(|j| Price::Finite(T::int((t + 1 + (j + k) % alpha) as i64))).collect())
                    .collect();
                let offsets = (0..alpha).map(|k| T::int(k as i64)).collect();
                MinAffineMenu::new(m, vectors, offsets, Default::default())
            })
            .collect::<Result<Vec<_>>>()?;
        DemandTightness::new(m, menus)
    }

    fn send_t(&self, proto: &mut Protocol<'_, T>) -> Result<usize> {
        let k = self.menus.len() as i64;
        let code = proto.send_uint(0, width_for(self.menus.len()), |view| {
            let x = view.value(Bundle::singleton(ITEM_A))?;
            Ok((round_clamp(&x, 1, k) - 1) as u64)
        })?;
        let t = code as usize;
        if t >= self.menus.len() {
            return Err(Error::Mechanism(format!("menu index {t} out of range")));
        }
        Ok(t)
    }
}

impl<T: Scalar> Mechanism<T> for DemandTightness<T> {
    fn name(&self) -> &'static str {
        "demand_tightness"
    }
    fn params(&self) -> Value {
        json!({
            "m": self.m,
            "menus": self.menus.iter().map(crate::json::min_affine_to_json).collect::<Vec<_>>(),
        })
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        self.bound.clone()
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Demand
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let t = self.send_t(proto)?;
        let menu = &self.menus[t];
        let s = proto.send_bundle(1, |view| min_affine_argmax(menu, view))?;
        let mut out = Outcome::nobody(2);
        out.allocation[1] = s;
        out.payments[1] = menu
            .eval(s)
            .finite()
            .cloned()
            .ok_or_else(|| Error::Mechanism(format!("chose {s} at infinite price")))?;
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player == 0 || s.is_empty() {
            return Some(Ok(only_empty(s)));
        }
        Some(self.send_t(proto).map(|t| self.normalized[t].price(s).clone()))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let Some(t) = self.normalized.iter().position(|n| n == &menus[1]) else {
            return Some(Err(Error::Mechanism("menu not produced by this mechanism".into())));
        };
        let menu = &self.menus[t];
        Some(proto.send_bundle(1, |view| min_affine_argmax(menu, view)).map(|s| vec![Bundle::EMPTY, s]))
    }
}

// ------------------------------------------------------------ M_T gadget

/// Player 1 (index 0) encodes a target `T` of size `m/2` by valuing it at
/// `1/4`; player 2 buys from `M_T` using at most `m + 1` demand queries,
/// with one demand-query price check answered by player 1.
#[derive(Clone, Debug)]
pub struct MtGadget {
    pub m: usize,
}

impl MtGadget {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m % 2 != 0 || m > crate::bundle::MAX_ITEMS {
            return Err(Error::Construction(format!("the gadget needs an even m in 2..=16 (got {m})")));
        }
        Ok(MtGadget { m })
    }

    fn price_for<T: Scalar>(&self, s: Bundle, is_target: bool) -> T {
        let base = T::int(s.len() as i64);
        if is_target {
            base + T::ratio(1, 2)
        } else {
            base
        }
    }
}

impl<T: Scalar> Mechanism<T> for MtGadget {
    fn name(&self) -> &'static str {
        "mt_gadget"
    }
    fn params(&self) -> Value {
        json!({"m": self.m})
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        T::int(self.m as i64)
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Demand
    }

    fn check_domain(&self, player: usize, v: &Valuation<T>) -> Result<()> {
        if player == 0 {
            let quarter = T::ratio(1, 4);
            let hits = Bundle::of_size(self.m, self.m / 2).filter(|s| v.value(*s) == &quarter).count();
            if hits > 1 {
                return Err(Error::Domain(format!("player 1 values {hits} half-size bundles at 1/4")));
            }
        }
        Ok(())
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        // Bob keeps the value of his first answer for his second message
        let mut bob_memory: Option<T> = None;
        let s0 = proto.send_bundle(1, |view| {
            let (s0, v0) = gadget_first_query(view)?;
            bob_memory = Some(v0);
            Ok(s0)
        })?;
        let is_target = s0.len() == self.m / 2 && proto.send_bit(0, |view| gadget_price_check(view, s0))?;
        let s = if is_target {
            let v0 = bob_memory.take().expect("set by the first message");
            proto.send_bundle(1, |view| gadget_batches(view, s0, v0))?
        } else {
            s0
        };
        let mut out = Outcome::nobody(2);
        out.allocation[1] = s;
        out.payments[1] = self.price_for(s, is_target && s == s0);
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player == 0 {
            return Some(Ok(only_empty(s)));
        }
        if s.len() != self.m / 2 {
            return Some(Ok(Price::Finite(self.price_for(s, false))));
        }
        Some(proto.send_bit(0, |view| gadget_price_check(view, s)).map(|hit| Price::Finite(self.price_for(s, hit))))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let menu = menus[1].clone();
        let run = proto.send_bundle(1, |view| {
            let (s0, v0) = gadget_first_query(view)?;
            let hit = s0.len() == self.m / 2 && menu.price(s0) != &Price::Finite(self.price_for(s0, false));
            if hit {
                gadget_batches(view, s0, v0)
            } else {
                Ok(s0)
            }
        });
        Some(run.map(|s| vec![Bundle::EMPTY, s]))
    }
}

/// The menu player 2 faces under the gadget when player 1 encodes `t`.
pub fn gadget_menu<T: Scalar>(m: usize, t: Bundle) -> Result<Menu<T>> {
    mt_menu(m, t)
}

// ------------------------------------------------------------- drop tie

/// Player 2 receives item `a` or item `b` for free; the choice on ties in
/// `v_2(a) = v_2(b)` hides an intersection test on half-size bundles.
#[derive(Clone, Debug)]
pub struct DropTie {
    pub m: usize,
}

fn check_even(m: usize) -> Result<()> {
    if m < 2 || m % 2 != 0 || m > crate::bundle::MAX_ITEMS {
        Err(Error::Construction(format!("needs an even m in 2..=16 (got {m})")))
    } else {
        Ok(())
    }
}

fn is_binary<T: Scalar>(v: &Valuation<T>) -> bool {
    v.table().iter().all(|x| x.is_zero() || x.is_one())
}

impl DropTie {
    pub fn new(m: usize) -> Result<Self> {
        check_even(m)?;
        Ok(DropTie { m })
    }

    fn decide<T: Scalar>(&self, proto: &mut Protocol<'_, T>) -> Result<Bundle> {
        let (a, b) = (Bundle::singleton(ITEM_A), Bundle::singleton(ITEM_B));
        let cmp = proto.send_uint(1, 2, |view| {
            let (va, vb) = (view.value(a)?, view.value(b)?);
            Ok(match va.cmp(&vb) {
                std::cmp::Ordering::Greater => 0,
                std::cmp::Ordering::Less => 1,
                std::cmp::Ordering::Equal => 2,
            })
        })?;
        match cmp {
            0 => return Ok(a),
            1 => return Ok(b),
            2 => {}
            _ => return Err(Error::Mechanism("bad comparison code".into())),
        }
        let alice_binary = proto.send_bit(0, |view| Ok(is_binary(&view.read_all()?)))?;
        let bob_binary = proto.send_bit(1, |view| Ok(is_binary(&view.read_all()?)))?;
        if !(alice_binary && bob_binary) {
            return Ok(a);
        }
        let half = half_bundles(self.m);
        let ones = proto.send_bits(0, half.len(), |view| {
            half.iter().map(|s| Ok(view.value(*s)?.is_one())).collect()
        })?;
        let meet = proto.send_bit(1, |view| {
            for (s, &one) in half.iter().zip(&ones) {
                if one && view.value(*s)?.is_one() {
                    return Ok(true);
                }
            }
            Ok(false)
        })?;
        Ok(if meet { a } else { b })
    }
}

impl<T: Scalar> Mechanism<T> for DropTie {
    fn name(&self) -> &'static str {
        "drop_tie"
    }
    fn params(&self) -> Value {
        json!({"m": self.m})
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        T::one()
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Bits
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let s = self.decide(proto)?;
        let mut out = Outcome::nobody(2);
        out.allocation[1] = s;
        Ok(out)
    }

    fn price_protocol(&self, _proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        let free = player == 1 && (s == Bundle::singleton(ITEM_A) || s == Bundle::singleton(ITEM_B));
        Some(Ok(if free { Price::zero() } else { only_empty(s) }))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, _menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        Some(self.decide(proto).map(|s| vec![Bundle::EMPTY, s]))
    }
}

// -------------------------------------------------------------- drop tax

/// Player 2 buys, at price 1, his highest-value half-size bundle among
/// those both players value at least 1 (smallest mask on ties).
#[derive(Clone, Debug)]
pub struct DropTax {
    pub m: usize,
}

impl DropTax {
    pub fn new(m: usize) -> Result<Self> {
        check_even(m)?;
        Ok(DropTax { m })
    }

    fn choose<T: Scalar, A: QueryAccess<T>>(
        &self,
        view: &mut A,
        available: impl Fn(Bundle) -> bool,
    ) -> Result<Bundle> {
        let mut best: Option<(T, Bundle)> = None;
        for s in half_bundles(self.m) {
            if !available(s) {
                continue;
            }
            let v = view.value(s)?;
            if v < T::one() {
                continue;
            }
            if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                best = Some((v, s));
            }
        }
        Ok(best.map(|(_, s)| s).unwrap_or(Bundle::EMPTY))
    }
}

impl<T: Scalar> Mechanism<T> for DropTax {
    fn name(&self) -> &'static str {
        "drop_tax"
    }
    fn params(&self) -> Value {
        json!({"m": self.m})
    }
    fn players(&self) -> usize {
        2
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        T::one()
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Bits
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let half = half_bundles(self.m);
        let avail = proto.send_bits(0, half.len(), |view| {
            half.iter().map(|s| Ok(view.value(*s)? >= T::one())).collect()
        })?;
        let s = proto.send_bundle(1, |view| {
            self.choose(view, |s| half.iter().position(|h| *h == s).is_some_and(|k| avail[k]))
        })?;
        let mut out = Outcome::nobody(2);
        if !s.is_empty() {
            out.allocation[1] = s;
            out.payments[1] = T::one();
        }
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player == 0 || s.is_empty() || s.len() > self.m / 2 {
            return Some(Ok(only_empty(s)));
        }
        let m = self.m;
        Some(
            proto
                .send_bit(0, |view| {
                    for t in half_bundles(m) {
                        if s.is_subset(t) && view.value(t)? >= T::one() {
                            return Ok(true);
                        }
                    }
                    Ok(false)
                })
                .map(|hit| if hit { Price::Finite(T::one()) } else { Price::Infinite }),
        )
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let menu = menus[1].clone();
        Some(
            proto
                .send_bundle(1, |view| self.choose(view, |s| menu.price(s).is_finite()))
                .map(|s| vec![Bundle::EMPTY, s]),
        )
    }
}

// ------------------------------------------------------------ drop price

/// Player 3 may buy item `a`; its price is 1 if players 1 and 2 both value
/// some half-size bundle at exactly 1, and 2 otherwise.
#[derive(Clone, Debug)]
pub struct DropPrice {
    pub m: usize,
}

impl DropPrice {
    pub fn new(m: usize) -> Result<Self> {
        check_even(m)?;
        Ok(DropPrice { m })
    }

    fn send_price<T: Scalar>(&self, proto: &mut Protocol<'_, T>) -> Result<T> {
        let half = half_bundles(self.m);
        let ones = proto.send_bits(0, half.len(), |view| {
            half.iter().map(|s| Ok(view.value(*s)?.is_one())).collect()
        })?;
        let meet = proto.send_bit(1, |view| {
            for (s, &one) in half.iter().zip(&ones) {
                if one && view.value(*s)?.is_one() {
                    return Ok(true);
                }
            }
            Ok(false)
        })?;
        Ok(if meet { T::one() } else { T::int(2) })
    }
}

impl<T: Scalar> Mechanism<T> for DropPrice {
    fn name(&self) -> &'static str {
        "drop_price"
    }
    fn params(&self) -> Value {
        json!({"m": self.m})
    }
    fn players(&self) -> usize {
        3
    }
    fn items(&self) -> usize {
        self.m
    }
    fn bound(&self) -> T {
        T::int(2)
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Bits
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let price = self.send_price(proto)?;
        let a = Bundle::singleton(ITEM_A);
        let buy = proto.send_bit(2, |view| Ok(view.value(a)? >= price))?;
        let mut out = Outcome::nobody(3);
        if buy {
            out.allocation[2] = a;
            out.payments[2] = price;
        }
        Ok(out)
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if player != 2 || s != Bundle::singleton(ITEM_A) {
            return Some(Ok(only_empty(s)));
        }
        Some(self.send_price(proto).map(Price::Finite))
    }

    fn tie_protocol(&self, proto: &mut Protocol<'_, T>, menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        let a = Bundle::singleton(ITEM_A);
        let price = menus[2].price(a).clone();
        Some(proto.send_bit(2, |view| Ok(price.cmp_value(&view.value(a)?).is_le())).map(|buy| {
            vec![Bundle::EMPTY, Bundle::EMPTY, if buy { a } else { Bundle::EMPTY }]
        }))
    }
}

// --------------------------------------------------------- posted prices

/// Players arrive in order and each buys its demanded bundle at fixed item
/// prices among the items still available.
#[derive(Clone, Debug)]
pub struct PostedPrices<T: Scalar> {
    pub prices: Vec<Price<T>>,
    pub n: usize,
}

impl<T: Scalar> PostedPrices<T> {
    pub fn new(prices: Vec<Price<T>>, n: usize) -> Result<Self> {
        if prices.is_empty() || prices.len() > crate::bundle::MAX_ITEMS {
            return Err(Error::Construction("posted prices need 1..=16 items".into()));
        }
        if n == 0 {
            return Err(Error::Construction("need at least one player".into()));
        }
        if prices.iter().any(|p| matches!(p, Price::Finite(x) if x.is_negative())) {
            return Err(Error::Construction("negative posted price".into()));
        }
        Ok(PostedPrices { prices, n })
    }

    fn current(&self, taken: Bundle) -> Vec<Price<T>> {
        self.prices
            .iter()
            .enumerate()
            .map(|(j, p)| if taken.contains(j) { Price::Infinite } else { p.clone() })
            .collect()
    }

    fn announce_until(&self, proto: &mut Protocol<'_, T>, upto: usize) -> Result<(Vec<Bundle>, Bundle)> {
        let mut taken = Bundle::EMPTY;
        let mut alloc = Vec::new();
        for k in 0..upto {
            let prices = self.current(taken);
            let s = proto.send_bundle(k, |view| Ok(view.demand(&prices)?.0))?;
            if !s.is_disjoint(taken) {
                return Err(Error::Mechanism(format!("player {k} demanded a taken item")));
            }
            taken = taken.union(s);
            alloc.push(s);
        }
        Ok((alloc, taken))
    }
}

impl<T: Scalar> Mechanism<T> for PostedPrices<T> {
    fn name(&self) -> &'static str {
        "posted_prices"
    }
    fn params(&self) -> Value {
        json!({
            "prices": self.prices.iter().map(|p| p.to_exact_string()).collect::<Vec<_>>(),
            "players": self.n,
        })
    }
    fn players(&self) -> usize {
        self.n
    }
    fn items(&self) -> usize {
        self.prices.len()
    }
    fn bound(&self) -> T {
        let total = self.prices.iter().filter_map(|p| p.finite().cloned()).fold(T::zero(), |a, b| a + b);
        if total.is_positive() {
            total
        } else {
            T::one()
        }
    }
    fn mode(&self) -> AccessMode {
        AccessMode::Demand
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>> {
        let (alloc, _) = self.announce_until(proto, self.n)?;
        let payments = alloc
            .iter()
            .map(|s| price_vec_sum(&self.prices, *s).finite().cloned().expect("demanded items are finite"))
            .collect();
        Ok(Outcome { allocation: alloc, payments })
    }

    fn price_protocol(&self, proto: &mut Protocol<'_, T>, player: usize, s: Bundle) -> Option<Result<Price<T>>> {
        if s.is_empty() {
            return Some(Ok(Price::zero()));
        }
        Some(self.announce_until(proto, player).map(|(_, taken)| price_vec_sum(&self.current(taken), s)))
    }
}

// ------------------------------------------------------------ construction

fn param_usize(params: &Value, key: &str) -> Result<Option<usize>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|x| Some(x as usize))
            .ok_or_else(|| Error::Config(format!("parameter {key:?} must be a non-negative integer"))),
    }
}

fn need_usize(params: &Value, key: &str, id: &str) -> Result<usize> {
    param_usize(params, key)?.ok_or_else(|| Error::Config(format!("{id} needs parameter {key:?}")))
}

/// Builds a library mechanism from its id and JSON parameters.
pub fn make_example<T: Scalar>(id: &str, params: &Value) -> Result<MechanismSpec<T>> {
    let params = if params.is_null() { &json!({}) } else { params };
    if !params.is_object() {
        return Err(Error::Config("mechanism params must be an object".into()));
    }
    let cfg = |e: Error| match e {
        Error::Construction(msg) => Error::Config(msg),
        other => other,
    };
    let spec: MechanismSpec<T> = match id {
        "warmup" => {
            let c = need_usize(params, "c", id)?;
            let m = param_usize(params, "m")?.unwrap_or(2);
            Arc::new(Warmup::new(c as u32, m).map_err(cfg)?)
        }
        "value_tightness" => {
            if let Some(list) = params.get("bundles") {
                let masks: Vec<u32> = serde_json::from_value(list.clone())
                    .map_err(|e| Error::Config(format!("bundles: {e}")))?;
                let m = need_usize(params, "m", id)?;
                Arc::new(ValueTightness::new(m, masks.into_iter().map(Bundle).collect()).map_err(cfg)?)
            } else {
                Arc::new(ValueTightness::singletons(need_usize(params, "c", id)?).map_err(cfg)?)
            }
        }
        "demand_tightness" => {
            let m = need_usize(params, "m", id)?;
            if let Some(list) = params.get("menus") {
                let arr = list.as_array().ok_or_else(|| Error::Config("menus must be a list".into()))?;
                let menus = arr
                    .iter()
                    .map(|v| crate::json::min_affine_from_json(m, v))
                    .collect::<Result<Vec<_>>>()?;
                Arc::new(DemandTightness::new(m, menus).map_err(cfg)?)
            } else {
                let alpha = param_usize(params, "alpha")?.unwrap_or(1);
                let c = param_usize(params, "c")?.unwrap_or(1);
                Arc::new(DemandTightness::family(m, alpha, c as u32).map_err(cfg)?)
            }
        }
        "mt_gadget" => Arc::new(MtGadget::new(need_usize(params, "m", id)?).map_err(cfg)?),
        "drop_tie" => Arc::new(DropTie::new(need_usize(params, "m", id)?).map_err(cfg)?),
        "drop_tax" => Arc::new(DropTax::new(need_usize(params, "m", id)?).map_err(cfg)?),
        "drop_price" => Arc::new(DropPrice::new(need_usize(params, "m", id)?).map_err(cfg)?),
        "posted_prices" => {
            let list = params.get("prices").ok_or_else(|| Error::Config("posted_prices needs \"prices\"".into()))?;
            let strs: Vec<String> =
                serde_json::from_value(list.clone()).map_err(|e| Error::Config(format!("prices: {e}")))?;
            let prices = strs
                .iter()
                .map(|s| Price::parse_exact(s).ok_or_else(|| Error::Config(format!("bad price {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let n = param_usize(params, "players")?.unwrap_or(1);
            Arc::new(PostedPrices::new(prices, n).map_err(cfg)?)
        }
        other => return Err(Error::Config(format!("unknown mechanism {other:?}"))),
    };
    Ok(spec)
}

/// Every library mechanism that exists at `m` items, with small default
/// parameters. The warm-up and value-tightness mechanisms only appear at
/// `m = 2`; the half-bundle mechanisms need even `m`.
pub fn library_at<T: Scalar>(m: usize) -> Result<Vec<MechanismSpec<T>>> {
    let mut out = Vec::new();
    for id in LIBRARY {
        let params = match id {
            "warmup" | "value_tightness" if m != 2 => continue,
            "warmup" => json!({"c": 2}),
            "value_tightness" => json!({"c": 3}),
            "mt_gadget" | "drop_tie" | "drop_tax" | "drop_price" if m % 2 == 1 => continue,
            "posted_prices" => json!({"prices": (0..m).map(|j| (j % 3 + 1).to_string()).collect::<Vec<_>>(), "players": 2}),
            "demand_tightness" => json!({"m": m, "alpha": 2, "c": 2}),
            _ => json!({"m": m}),
        };
        out.push(make_example(id, &params)?);
    }
    Ok(out)
}

pub const LIBRARY: [&str; 8] = [
    "warmup",
    "value_tightness",
    "demand_tightness",
    "mt_gadget",
    "drop_tie",
    "drop_tax",
    "drop_price",
    "posted_prices",
];

// ------------------------------------------------------------- catalogs

/// `v(S) = x` if `a ∈ S`, else 0.
pub fn item_a_valuation<T: Scalar>(m: usize, x: T) -> Result<Valuation<T>> {
    Valuation::from_fn(m, |s| if s.contains(ITEM_A) { x.clone() } else { T::zero() })
}

/// The half-size encoding of a bit string: 0 below `m/2`, `high` above,
/// and `high * bits[k]` on the `k`-th half-size bundle.
pub fn disjointness_valuation<T: Scalar>(m: usize, bits: &[bool], high: T) -> Result<Valuation<T>> {
    let half = half_bundles(m);
    if bits.len() != half.len() {
        return Err(Error::Domain(format!("need {} bits, got {}", half.len(), bits.len())));
    }
    Valuation::from_fn(m, |s| {
        if s.len() > m / 2 {
            high.clone()
        } else if s.len() == m / 2 {
            let k = half.iter().position(|h| *h == s).expect("half bundle");
            if bits[k] {
                high.clone()
            } else {
                T::zero()
            }
        } else {
            T::zero()
        }
    })
}

/// A small mixed family: zero, several additive valuations, unit demand
/// and pure complements.
pub fn standard_family<T: Scalar>(m: usize) -> Result<Vec<Valuation<T>>> {
    let mut out = vec![Valuation::zero(m)];
    for (n, d) in [(1, 1), (3, 2), (2, 1)] {
        out.push(Valuation::additive(&vec![T::ratio(n, d); m])?);
    }
    out.push(Valuation::from_fn(m, |s| if s.is_empty() { T::zero() } else { T::int(2) })?);
    out.push(Valuation::from_fn(m, |s| if s.len() == m { T::int(m as i64 + 1) } else { T::zero() })?);
    for k in 0..m {
        let vals: Vec<T> = (0..m).map(|j| if j == k { T::int(3) } else { T::ratio(1, 2) }).collect();
        out.push(Valuation::additive(&vals)?);
    }
    Ok(out)
}

/// Deterministic catalogs used by the CLI and the tests when none are given.
pub fn default_catalogs<T: Scalar>(mech: &dyn Mechanism<T>) -> Result<Vec<Catalog<T>>> {
    let m = mech.items();
    let params = mech.params();
    let family = || -> Result<Catalog<T>> { Catalog::new(standard_family(m)?) };
    let item_a_range = |lo: i64, hi: i64| -> Result<Catalog<T>> {
        Catalog::new((lo..=hi).map(|x| item_a_valuation(m, T::int(x))).collect::<Result<Vec<_>>>()?)
    };
    let strings = |count: usize| -> Vec<Vec<bool>> {
        let h = half_bundles(m).len();
        (0..count).map(|k| (0..h).map(|b| (k >> (b % 8)) & 1 == 1 || (b >= 8 && k % 3 == 0)).collect()).collect()
    };
    match mech.name() {
        "warmup" => {
            let c = params["c"].as_i64().unwrap_or(1);
            Ok(vec![item_a_range(1, 1 << c)?, item_a_range(0, (1 << c) + 1)?])
        }
        "value_tightness" => {
            let c = params["bundles"].as_array().map(|a| a.len()).unwrap_or(1) as i64;
            Ok(vec![item_a_range(1, c)?, family()?])
        }
        "demand_tightness" => {
            let k = params["menus"].as_array().map(|a| a.len()).unwrap_or(1) as i64;
            Ok(vec![item_a_range(1, k)?, family()?])
        }
        "mt_gadget" => {
            let mut alice = vec![Valuation::zero(m)];
            for t in half_bundles(m) {
                alice.push(crate::demand_menus::gadget_valuation(m, t)?);
            }
            Ok(vec![Catalog::new(alice)?, family()?])
        }
        "drop_tie" | "drop_tax" | "drop_price" => {
            let high = if mech.name() == "drop_tax" { T::int(2) } else { T::one() };
            let enc = |count: usize, high: T| -> Result<Vec<Valuation<T>>> {
                strings(count).iter().map(|b| disjointness_valuation(m, b, high.clone())).collect()
            };
            let mut first = enc(4, T::one())?;
            first.push(Valuation::additive(&vec![T::one(); m])?);
            let mut second = enc(4, high)?;
            second.push(item_a_valuation(m, T::int(3))?);
            second.push(Valuation::additive(&(0..m).map(|j| T::int(j as i64 % 2 + 1)).collect::<Vec<_>>())?);
            let mut cats = vec![Catalog::new(first)?, Catalog::new(second)?];
            if mech.name() == "drop_price" {
                let third = [0, 1, 3, 5].iter().map(|&x| item_a_valuation(m, T::ratio(x, 2))).collect::<Result<_>>()?;
                cats.push(Catalog::new(third)?);
            }
            Ok(cats)
        }
        _ => (0..mech.players()).map(|_| family()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::run_mechanism;
    use crate::Rat;

    fn warm(c: u32) -> Warmup {
        Warmup::new(c, 2).unwrap()
    }

    #[test]
    fn rounding_is_nearest_with_halves_up() {
        assert_eq!(round_clamp(&Rat::ratio(5, 2), 1, 4), 3);
        assert_eq!(round_clamp(&Rat::ratio(12, 5), 1, 4), 2);
        assert_eq!(round_clamp(&Rat::int(0), 1, 4), 1);
        assert_eq!(round_clamp(&Rat::int(9), 1, 4), 4);
    }

    #[test]
    fn warmup_sale_and_no_sale() {
        let mech = warm(2);
        let alice = item_a_valuation(2, Rat::int(3)).unwrap();
        let bob = item_a_valuation(2, Rat::int(5)).unwrap();
        let run = run_mechanism::<Rat>(&mech, &[alice.clone(), bob]).unwrap();
        assert_eq!(run.outcome.allocation[1], Bundle::singleton(0));
        assert_eq!(run.outcome.payments[1], Rat::int(3));
        assert_eq!(run.transcript.len(), 3);
        let poor = item_a_valuation(2, Rat::int(2)).unwrap();
        let run = run_mechanism::<Rat>(&mech, &[alice, poor]).unwrap();
        assert_eq!(run.outcome.allocation[1], Bundle::EMPTY);
    }

    #[test]
    fn gadget_rejects_two_targets() {
        let mech = MtGadget::new(4).unwrap();
        let v = Valuation::from_fn(4, |s| {
            if s.len() > 2 {
                Rat::int(1)
            } else if s == Bundle::of(&[0, 1]) || s == Bundle::of(&[2, 3]) {
                Rat::ratio(1, 4)
            } else {
                Rat::int(0)
            }
        })
        .unwrap();
        let res = run_mechanism::<Rat>(&mech, &[v, Valuation::zero(4)]);
        assert!(matches!(res, Err(Error::Domain(_))));
    }

    #[test]
    fn gadget_with_zero_buyer_sells_nothing() {
        let mech = MtGadget::new(4).unwrap();
        let alice = crate::demand_menus::gadget_valuation(4, Bundle::of(&[0, 1])).unwrap();
        let run = run_mechanism::<Rat>(&mech, &[alice, Valuation::zero(4)]).unwrap();
        assert_eq!(run.outcome.allocation[1], Bundle::EMPTY);
    }

    #[test]
    fn make_example_validates() {
        assert!(make_example::<Rat>("warmup", &json!({"c": 2})).is_ok());
        assert!(matches!(make_example::<Rat>("warmup", &json!({})), Err(Error::Config(_))));
        assert!(matches!(make_example::<Rat>("nope", &json!({})), Err(Error::Config(_))));
        assert!(matches!(make_example::<Rat>("drop_tie", &json!({"m": 3})), Err(Error::Config(_))));
        let pp = make_example::<Rat>("posted_prices", &json!({"prices": ["1/1", "inf"], "players": 2})).unwrap();
        assert_eq!(pp.players(), 2);
        for id in LIBRARY {
            let params = match id {
                "warmup" => json!({"c": 1}),
                "value_tightness" => json!({"c": 2}),
                "posted_prices" => json!({"prices": ["1", "2"]}),
                _ => json!({"m": 4}),
            };
            let mech = make_example::<Rat>(id, &params).unwrap();
            assert_eq!(mech.name(), id);
            let cats = default_catalogs(mech.as_ref()).unwrap();
            assert_eq!(cats.len(), mech.players());
        }
    }

    #[test]
    fn demand_tightness_family_is_distinct() {
        let d = DemandTightness::<Rat>::family(3, 2, 2).unwrap();
        assert_eq!(d.menus.len(), 4);
    }
}
