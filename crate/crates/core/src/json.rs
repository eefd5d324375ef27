//! JSON encodings.
//!
//! * valuation: `{"m": 2, "values": {"0": "0/1", "1": "3/2", ...}}`, every mask present
//! * XOS valuation: `{"m": 2, "clauses": [["1/1", "0/1"], ...]}`
//! * menu: `{"m": 2, "prices": {"0": "0/1", "3": "inf", ...}}`
//! * min-affine menu: `{"m": 2, "vectors": [[...]], "offsets": [...], "exceptions": {"3": "inf"}}`

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use crate::bundle::Bundle;
use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::menu::Menu;
use crate::min_affine::MinAffineMenu;
use crate::scalar::{Price, Scalar};
use crate::valuation::{Valuation, XosClauses};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn get_m(v: &Value) -> Result<usize> {
    let m = v.get("m").and_then(Value::as_u64).ok_or_else(|| parse_err("missing integer field \"m\""))? as usize;
    Bundle::check_items(m)?;
    Ok(m)
}

fn scalar<T: Scalar>(v: &Value) -> Result<T> {
    match v {
        Value::String(s) => T::parse_exact(s).ok_or_else(|| parse_err(format!("bad number {s:?}"))),
        Value::Number(n) if n.is_i64() => Ok(T::int(n.as_i64().expect("i64"))),
        other => Err(parse_err(format!("expected \"n/d\", got {other}"))),
    }
}

fn price<T: Scalar>(v: &Value) -> Result<Price<T>> {
    match v {
        Value::String(s) => Price::parse_exact(s).ok_or_else(|| parse_err(format!("bad price {s:?}"))),
        other => scalar(other).map(Price::Finite),
    }
}

fn mask_table<X>(m: usize, obj: &Value, what: &str, f: impl Fn(&Value) -> Result<X>) -> Result<Vec<X>> {
    let map = obj.as_object().ok_or_else(|| parse_err(format!("\"{what}\" must be an object")))?;
    let mut table: Vec<Option<X>> = (0..1usize << m).map(|_| None).collect();
    for (k, v) in map {
        let mask: usize = k.parse().map_err(|_| parse_err(format!("bad mask key {k:?}")))?;
        if mask >= table.len() {
            return Err(parse_err(format!("mask {mask} out of range for m = {m}")));
        }
        table[mask] = Some(f(v)?);
    }
    table
        .into_iter()
        .enumerate()
        .map(|(mask, x)| x.ok_or_else(|| parse_err(format!("missing mask {mask}"))))
        .collect()
}

pub fn valuation_to_json<T: Scalar>(v: &Valuation<T>) -> Value {
    if let Some(c) = v.clauses() {
        return json!({
            "m": v.m(),
            "clauses": c.clauses().iter().map(|row| row.iter().map(|x| x.to_exact_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        });
    }
    let values: Map<String, Value> =
        Bundle::all(v.m()).map(|s| (s.mask().to_string(), Value::String(v.value(s).to_exact_string()))).collect();
    json!({"m": v.m(), "values": values})
}

pub fn valuation_from_json<T: Scalar>(v: &Value) -> Result<Valuation<T>> {
    let m = get_m(v)?;
    if let Some(clauses) = v.get("clauses") {
        let rows = clauses.as_array().ok_or_else(|| parse_err("\"clauses\" must be a list"))?;
        let rows = rows
            .iter()
            .map(|row| {
                row.as_array()
                    .ok_or_else(|| parse_err("each clause must be a list"))?
                    .iter()
                    .map(scalar)
                    .collect::<Result<Vec<T>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        return XosClauses::new(m, rows)?.to_valuation();
    }
    let values = v.get("values").ok_or_else(|| parse_err("missing \"values\""))?;
    Valuation::new(m, mask_table(m, values, "values", scalar)?)
}

pub fn catalog_from_json<T: Scalar>(v: &Value) -> Result<Catalog<T>> {
    let arr = v.as_array().ok_or_else(|| parse_err("a catalog is a list of valuations"))?;
    Catalog::new(arr.iter().map(valuation_from_json).collect::<Result<_>>()?)
}

pub fn menu_to_json<T: Scalar>(menu: &Menu<T>) -> Value {
    let prices: Map<String, Value> = Bundle::all(menu.m())
        .map(|s| (s.mask().to_string(), Value::String(menu.price(s).to_exact_string())))
        .collect();
    json!({"m": menu.m(), "prices": prices})
}

pub fn menu_from_json<T: Scalar>(v: &Value) -> Result<Menu<T>> {
    let m = get_m(v)?;
    let prices = v.get("prices").or_else(|| v.get("values")).ok_or_else(|| parse_err("missing \"prices\""))?;
    Menu::new(m, mask_table(m, prices, "prices", price)?)
}

pub fn min_affine_to_json<T: Scalar>(menu: &MinAffineMenu<T>) -> Value {
    let exceptions: Map<String, Value> = menu
        .exceptions()
        .iter()
        .map(|(s, p)| (s.mask().to_string(), Value::String(p.to_exact_string())))
        .collect();
    json!({
        "m": menu.m(),
        "vectors": menu.vectors().iter().map(|p| p.iter().map(|x| x.to_exact_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "offsets": menu.offsets().iter().map(|x| x.to_exact_string()).collect::<Vec<_>>(),
        "exceptions": exceptions,
    })
}

pub fn min_affine_from_json<T: Scalar>(m: usize, v: &Value) -> Result<MinAffineMenu<T>> {
    let vectors = v
        .get("vectors")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing list \"vectors\""))?
        .iter()
        .map(|row| row.as_array().ok_or_else(|| parse_err("vector must be a list"))?.iter().map(price).collect())
        .collect::<Result<Vec<Vec<Price<T>>>>>()?;
    let offsets = v
        .get("offsets")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_err("missing list \"offsets\""))?
        .iter()
        .map(scalar)
        .collect::<Result<Vec<T>>>()?;
    let mut exceptions = BTreeMap::new();
    if let Some(obj) = v.get("exceptions") {
        let map = obj.as_object().ok_or_else(|| parse_err("\"exceptions\" must be an object"))?;
        for (k, p) in map {
            let mask: u32 = k.parse().map_err(|_| parse_err(format!("bad mask key {k:?}")))?;
            exceptions.insert(Bundle(mask), price(p)?);
        }
    }
    MinAffineMenu::new(m, vectors, offsets, exceptions)
}
