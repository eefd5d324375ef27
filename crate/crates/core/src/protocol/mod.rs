//! Mechanisms as communication protocols.
//!
//! A mechanism talks only through [`Protocol::send_bits`] and friends. Each
//! message is computed by a closure that sees the sender's own valuation and
//! the public history, never another player's input. Outcomes must be a
//! function of the returned messages. This keeps every library mechanism a
//! genuine protocol, which the rectangle arguments in `comm_reconstruct` and
//! `transforms` rely on.

mod extract;
pub mod library;
mod measure;

use std::fmt;
use std::sync::Arc;

pub use extract::{extract_menu, extract_menu_raw, probe_valuation, run_price_protocol, PriceRun};
pub use library::make_example;
pub use measure::{measure_complexities, ComplexityReport, MenuCatalog, menu_catalog};

use crate::bundle::Bundle;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::oracle::{demand_query, value_query, QueryAccess, QueryLog, QueryRecord};
use crate::scalar::{Price, Scalar};
use crate::valuation::Valuation;
use crate::Rat;

/// Which oracle model a mechanism is written for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Bits,
    Value,
    Demand,
}

/// Public record of a run: one entry per bit with its sender.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transcript {
    bits: Vec<bool>,
    senders: Vec<u8>,
}

impl Transcript {
    pub fn new() -> Self {
        Transcript::default()
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn senders(&self) -> &[u8] {
        &self.senders
    }

    pub fn push(&mut self, sender: usize, bit: bool) {
        self.bits.push(bit);
        self.senders.push(sender as u8);
    }

    pub fn extend(&mut self, other: &Transcript) {
        self.bits.extend_from_slice(&other.bits);
        self.senders.extend_from_slice(&other.senders);
    }

    pub fn is_prefix_of(&self, other: &Transcript) -> bool {
        other.bits.starts_with(&self.bits) && other.senders.starts_with(&self.senders)
    }

    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl fmt::Debug for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Transcript({})", self.to_bitstring())
    }
}

/// Allocation and payments, indexed by player.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Outcome<T: Scalar = Rat> {
    pub allocation: Vec<Bundle>,
    pub payments: Vec<T>,
}

impl<T: Scalar> Outcome<T> {
    pub fn nobody(n: usize) -> Self {
        Outcome { allocation: vec![Bundle::EMPTY; n], payments: vec![T::zero(); n] }
    }

    pub fn utility(&self, player: usize, v: &Valuation<T>) -> T {
        v.value(self.allocation[player]).clone() - self.payments[player].clone()
    }
}

/// Everything a single run produces.
#[derive(Clone, Debug)]
pub struct RunResult<T: Scalar = Rat> {
    pub outcome: Outcome<T>,
    pub transcript: Transcript,
    pub log: QueryLog<T>,
}

/// What a message closure may see: its own valuation (through counted
/// queries) and the public history.
pub struct PlayerView<'p, T: Scalar> {
    player: usize,
    valuation: &'p Valuation<T>,
    log: &'p mut QueryLog<T>,
    history: &'p Transcript,
}

impl<T: Scalar> PlayerView<'_, T> {
    pub fn player(&self) -> usize {
        self.player
    }

    pub fn history(&self) -> &Transcript {
        self.history
    }

    /// Reads the whole table through `2^m` counted value queries.
    pub fn read_all(&mut self) -> Result<Valuation<T>> {
        let m = self.m();
        let mut table = Vec::with_capacity(1 << m);
        for s in Bundle::all(m) {
            table.push(self.value(s)?);
        }
        Valuation::new(m, table)
    }
}

impl<T: Scalar> QueryAccess<T> for PlayerView<'_, T> {
    fn m(&self) -> usize {
        self.valuation.m()
    }

    fn value(&mut self, s: Bundle) -> Result<T> {
        let answer = value_query(self.valuation, s)?;
        self.log.records.push(QueryRecord::Value { player: self.player, bundle: s, answer: answer.clone() });
        Ok(answer)
    }

    fn demand(&mut self, prices: &[Price<T>]) -> Result<(Bundle, T)> {
        let (answer, value) = demand_query(self.valuation, prices)?;
        self.log.records.push(QueryRecord::Demand {
            player: self.player,
            prices: prices.to_vec(),
            answer,
            value: value.clone(),
        });
        Ok((answer, value))
    }
}

/// A running protocol over a fixed profile.
pub struct Protocol<'a, T: Scalar> {
    profile: &'a [Valuation<T>],
    transcript: Transcript,
    log: QueryLog<T>,
    max_bits: usize,
}

impl<'a, T: Scalar> Protocol<'a, T> {
    pub fn new(profile: &'a [Valuation<T>]) -> Self {
        Protocol { profile, transcript: Transcript::new(), log: QueryLog::new(), max_bits: 1 << 20 }
    }

    pub fn players(&self) -> usize {
        self.profile.len()
    }

    pub fn m(&self) -> usize {
        self.profile[0].m()
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_parts(self) -> (Transcript, QueryLog<T>) {
        (self.transcript, self.log)
    }

    /// Player `player` computes and sends exactly `width` bits.
    pub fn send_bits(
        &mut self,
        player: usize,
        width: usize,
        f: impl FnOnce(&mut PlayerView<'_, T>) -> Result<Vec<bool>>,
    ) -> Result<Vec<bool>> {
        if player >= self.profile.len() {
            return Err(Error::Mechanism(format!("no player {player}")));
        }
        let bits = {
            let mut view = PlayerView {
                player,
                valuation: &self.profile[player],
                log: &mut self.log,
                history: &self.transcript,
            };
            f(&mut view)?
        };
        if bits.len() != width {
            return Err(Error::Mechanism(format!("player {player} sent {} bits, expected {width}", bits.len())));
        }
        if self.transcript.len() + width > self.max_bits {
            return Err(Error::Capacity("transcript too long".into()));
        }
        for &b in &bits {
            self.transcript.push(player, b);
        }
        Ok(bits)
    }

    /// Sends `x < 2^width`, most significant bit first.
    pub fn send_uint(
        &mut self,
        player: usize,
        width: u32,
        f: impl FnOnce(&mut PlayerView<'_, T>) -> Result<u64>,
    ) -> Result<u64> {
        let bits = self.send_bits(player, width as usize, |view| {
            let x = f(view)?;
            if width < 64 && x >> width != 0 {
                return Err(Error::Mechanism(format!("{x} does not fit in {width} bits")));
            }
            Ok((0..width).rev().map(|k| x >> k & 1 == 1).collect())
        })?;
        Ok(bits.iter().fold(0u64, |acc, &b| acc << 1 | b as u64))
    }

    pub fn send_bit(&mut self, player: usize, f: impl FnOnce(&mut PlayerView<'_, T>) -> Result<bool>) -> Result<bool> {
        Ok(self.send_bits(player, 1, |view| Ok(vec![f(view)?]))?[0])
    }

    /// Sends a bundle as an `m`-bit mask.
    pub fn send_bundle(
        &mut self,
        player: usize,
        f: impl FnOnce(&mut PlayerView<'_, T>) -> Result<Bundle>,
    ) -> Result<Bundle> {
        let m = self.m();
        let bits = self.send_bits(player, m, |view| {
            let s = f(view)?;
            if !s.fits(m) {
                return Err(Error::Mechanism(format!("bundle {s} does not fit {m} items")));
            }
            Ok((0..m).map(|j| s.contains(j)).collect())
        })?;
        Ok(Bundle(bits.iter().enumerate().fold(0, |acc, (j, &b)| acc | ((b as u32) << j))))
    }
}

/// A deterministic mechanism written as a protocol.
pub trait Mechanism<T: Scalar>: Send + Sync {
    /// Library name, e.g. `"warmup"`.
    fn name(&self) -> &'static str;
    /// Parameters as JSON, used in reports.
    fn params(&self) -> serde_json::Value;
    fn players(&self) -> usize;
    fn items(&self) -> usize;
    /// Declared bound on every finite menu price.
    fn bound(&self) -> T;
    fn mode(&self) -> AccessMode;

    /// Rejects valuations the mechanism is not defined for.
    fn check_domain(&self, _player: usize, _v: &Valuation<T>) -> Result<()> {
        Ok(())
    }

    fn execute(&self, proto: &mut Protocol<'_, T>) -> Result<Outcome<T>>;

    /// Declared protocol computing the normalized price of `bundle` in the
    /// menu presented to `player`. The player's own entry of the profile is
    /// a placeholder and must not be consulted.
    fn price_protocol(&self, _proto: &mut Protocol<'_, T>, _player: usize, _bundle: Bundle) -> Option<Result<Price<T>>> {
        None
    }

    /// Declared protocol that finds the allocation when every player
    /// already knows its menu.
    fn tie_protocol(&self, _proto: &mut Protocol<'_, T>, _menus: &[Menu<T>]) -> Option<Result<Vec<Bundle>>> {
        None
    }

    fn id(&self) -> String {
        format!("{}({})", self.name(), self.params())
    }
}

pub type MechanismSpec<T = Rat> = Arc<dyn Mechanism<T>>;

fn check_profile<T: Scalar>(mech: &dyn Mechanism<T>, profile: &[Valuation<T>]) -> Result<()> {
    if profile.len() != mech.players() {
        return Err(Error::Domain(format!("{} valuations for {} players", profile.len(), mech.players())));
    }
    if let Some(v) = profile.iter().find(|v| v.m() != mech.items()) {
        return Err(Error::Domain(format!("valuation over {} items, mechanism has {}", v.m(), mech.items())));
    }
    Ok(())
}

/// Runs the mechanism on a full profile and validates the outcome.
pub fn run_mechanism<T: Scalar>(mech: &dyn Mechanism<T>, profile: &[Valuation<T>]) -> Result<RunResult<T>> {
    check_profile(mech, profile)?;
    for (i, v) in profile.iter().enumerate() {
        mech.check_domain(i, v)?;
    }
    let mut proto = Protocol::new(profile);
    let outcome = mech.execute(&mut proto)?;
    validate_outcome(mech, &outcome)?;
    let (transcript, log) = proto.into_parts();
    Ok(RunResult { outcome, transcript, log })
}

fn validate_outcome<T: Scalar>(mech: &dyn Mechanism<T>, out: &Outcome<T>) -> Result<()> {
    let n = mech.players();
    if out.allocation.len() != n || out.payments.len() != n {
        return Err(Error::Mechanism("outcome has the wrong number of players".into()));
    }
    let mut used = Bundle::EMPTY;
    for s in &out.allocation {
        if !s.fits(mech.items()) || !s.is_disjoint(used) {
            return Err(Error::Mechanism(format!("infeasible allocation {:?}", out.allocation)));
        }
        used = used.union(*s);
    }
    if out.payments.iter().any(|p| p.is_negative()) {
        return Err(Error::Mechanism("negative payment".into()));
    }
    Ok(())
}

/// Runs the declared tie protocol, or the fallback where every player
/// announces its bundle (computed from the menu, smallest mask on ties).
pub fn run_tie_protocol<T: Scalar>(
    mech: &dyn Mechanism<T>,
    profile: &[Valuation<T>],
    menus: &[Menu<T>],
) -> Result<(Vec<Bundle>, Transcript)> {
    check_profile(mech, profile)?;
    let mut proto = Protocol::new(profile);
    let alloc = match mech.tie_protocol(&mut proto, menus) {
        Some(r) => r?,
        None => {
            let mut alloc = Vec::with_capacity(profile.len());
            for (i, menu) in menus.iter().enumerate() {
                let s = proto.send_bundle(i, |view| {
                    let v = view.read_all()?;
                    Ok(crate::menu::best_bundle(menu, &v)?.0)
                })?;
                alloc.push(s);
            }
            alloc
        }
    };
    Ok((alloc, proto.into_parts().0))
}

/// Bit width needed to name one of `n` alternatives.
pub fn width_for(n: usize) -> u32 {
    crate::scalar::ceil_log2(n as u128)
}
