//! Suite runners. Each returns its failures and the artifacts it wants
//! written; nothing here touches the filesystem.

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use taxlab::catalog::index_tuples;
use taxlab::comm_reconstruct::CommSetup;
use taxlab::demand_menus::extract_min_affine;
use taxlab::disjointness::{solve_z_disjointness, Verdict, ZDisjointnessInstance};
use taxlab::json::{menu_to_json, min_affine_to_json};
use taxlab::protocol::{extract_menu, menu_catalog, run_mechanism, AccessMode};
use taxlab::transforms::{
    default_epsilon, deviation_audit, is_precise_for, strictify_catalogs, to_simultaneous, DominantSetup, Strategy,
};
use taxlab::value_reconstruct::{reconstruct_menu_value, ProtocolPriceOracle};
use taxlab::verify::{exceeds_somewhere, verify_menu, BaseFunction};
use taxlab::{
    menu_complexity, measure_complexities, rng, Bundle, Catalog, ComplexityReport, Menu, Price, Rat, Scalar, Valuation,
    ValuationClass,
};

use crate::config::{Config, Experiment};
use crate::report::report_csv;

#[derive(Default)]
pub struct SuiteResult {
    pub failures: Vec<String>,
    pub artifacts: Vec<(String, String)>,
    pub lines: Vec<String>,
}

impl SuiteResult {
    fn fail(&mut self, msg: String) {
        self.failures.push(msg);
    }

    fn json(&mut self, name: &str, value: &Value) {
        let text = serde_json::to_string_pretty(value).expect("json values serialize");
        self.artifacts.push((name.to_string(), text + "\n"));
    }
}

type Profile = Vec<Valuation<Rat>>;

fn profiles(cats: &[Catalog<Rat>]) -> Vec<(Vec<usize>, Profile)> {
    let sizes: Vec<usize> = cats.iter().map(Catalog::len).collect();
    index_tuples(&sizes)
        .map(|ids| {
            let p = ids.iter().zip(cats).map(|(&k, c)| c.get(k).clone()).collect();
            (ids, p)
        })
        .collect()
}

/// Measured reports, sorted by (mechanism, m, n) and then parameters.
pub fn measure_all(cfg: &Config) -> Result<Vec<ComplexityReport>, String> {
    let mut reports = cfg
        .experiments
        .iter()
        .map(|e| measure_complexities(e.mechanism.as_ref(), &e.catalogs).map_err(|err| format!("{}: {err}", e.mechanism.id())))
        .collect::<Result<Vec<_>, _>>()?;
    reports.sort_by(|a, b| {
        (&a.mechanism, a.m, a.n, a.params.to_string()).cmp(&(&b.mechanism, b.m, b.n, b.params.to_string()))
    });
    Ok(reports)
}

pub fn measure(reports: &[ComplexityReport]) -> SuiteResult {
    let mut out = SuiteResult::default();
    for r in reports {
        if !r.valid {
            let first = r.violations.first().cloned().unwrap_or_default();
            out.fail(format!("{}: taxation principle violated ({first})", r.mechanism));
        }
    }
    out.artifacts.push(("report.csv".into(), report_csv(reports)));
    out.json("report.json", &serde_json::to_value(reports).expect("reports serialize"));
    out
}

pub fn theorem_check(reports: &[ComplexityReport]) -> SuiteResult {
    let mut out = SuiteResult::default();
    for r in reports {
        let witness = format!(
            "tax={} cc={} price={} tie={} mc={} val={} dem={}",
            r.tax, r.cc, r.price, r.tie, r.mc, r.val, r.dem
        );
        let mut checks = vec![("taxation".to_string(), r.valid)];
        checks.extend(r.checks.iter().cloned());
        for (name, ok) in checks {
            let line = if ok {
                format!("{} {name}: PASS", r.mechanism)
            } else {
                out.fail(format!("{} {name} ({witness})", r.mechanism));
                format!("{} {name}: FAIL ({witness})", r.mechanism)
            };
            out.lines.push(line);
        }
        if r.mechanism == "value_tightness" {
            // the verbatim in-menu count includes the empty bundle
            out.lines.push(format!("{} note: verbatim mc = {} counts the empty bundle", r.mechanism, r.mc));
        }
    }
    let text: String = out.lines.iter().map(|l| format!("{l}\n")).collect();
    out.artifacts.push(("theorems.txt".into(), text));
    out
}

pub fn reconstruct_value(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut traces = Vec::new();
    for e in &cfg.experiments {
        let mech = e.mechanism.as_ref();
        if mech.mode() != AccessMode::Value {
            traces.push(json!({"mechanism": mech.id(), "skipped": "not a value-query mechanism"}));
            continue;
        }
        let mut runs = Vec::new();
        for (ids, profile) in profiles(&e.catalogs) {
            for i in 0..mech.players() {
                let res = (|| {
                    let truth = extract_menu(mech, i, &profile)?;
                    let (mc, _) = menu_complexity(&truth)?;
                    let mut oracle = ProtocolPriceOracle::new(mech, i, &profile);
                    Ok::<_, taxlab::Error>((truth, reconstruct_menu_value(&mut oracle, mc.max(1))?))
                })();
                match res {
                    Ok((truth, rec)) => {
                        if rec.menu != truth {
                            out.fail(format!("{} player {i} profile {ids:?}: wrong menu", mech.id()));
                        }
                        runs.push(json!({
                            "player": i,
                            "profile": ids,
                            "exact": rec.menu == truth,
                            "steps": rec.steps.iter().map(|s| json!({
                                "threshold": s.threshold.to_exact_string(),
                                "useless": s.useless.iter().map(Bundle::to_string).collect::<Vec<_>>(),
                                "price_calls": s.price_calls,
                            })).collect::<Vec<_>>(),
                            "price_calls": rec.price_calls,
                        }));
                    }
                    Err(err) => out.fail(format!("{} player {i} profile {ids:?}: {err}", mech.id())),
                }
            }
        }
        traces.push(json!({"mechanism": mech.id(), "runs": runs}));
    }
    out.json("reconstruct_value.json", &Value::Array(traces));
    out
}

pub fn reconstruct_comm(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut traces = Vec::new();
    for e in &cfg.experiments {
        let mech = e.mechanism.as_ref();
        for i in 0..mech.players() {
            let setup = match CommSetup::new(mech, &e.catalogs, i) {
                Ok(s) => s,
                Err(err) => {
                    out.fail(format!("{} player {i}: {err}", mech.id()));
                    continue;
                }
            };
            let sizes: Vec<usize> =
                e.catalogs.iter().enumerate().map(|(k, c)| if k == i { 1 } else { c.len() }).collect();
            let tuples: Vec<Vec<usize>> = index_tuples(&sizes).collect();
            let results: Vec<Result<Value, String>> = tuples
                .par_iter()
                .map(|ids| {
                    let profile: Profile = ids.iter().zip(&e.catalogs).map(|(&k, c)| c.get(k).clone()).collect();
                    let tag = |err: taxlab::Error| format!("{} player {i} profile {ids:?}: {err}", mech.id());
                    let truth = extract_menu(mech, i, &profile).map_err(tag)?;
                    let rec = setup.reconstruct(ids, cfg.seed).map_err(tag)?;
                    if rec.menu != truth {
                        return Err(format!("{} player {i} profile {ids:?}: wrong menu", mech.id()));
                    }
                    if let Some(s) = rec.steps.iter().find(|s| 2 * s.live_after > s.live_before) {
                        return Err(format!("{} player {i}: step kept {} of {}", mech.id(), s.live_after, s.live_before));
                    }
                    if rec.steps.iter().flat_map(|s| &s.bands).any(|b| b.block_hits > 1) {
                        return Err(format!("{} player {i}: a block carries two intersecting bits", mech.id()));
                    }
                    Ok(json!({
                        "player": i,
                        "profile": ids,
                        "menu_index": rec.menu_index,
                        "bits": rec.bits(),
                        "price_bits": rec.price_bits,
                        "disjointness_bits": rec.disjointness_bits,
                        "bookkeeping_bits": rec.bookkeeping_bits,
                        "steps": rec.steps,
                    }))
                })
                .collect();
            let mut runs = Vec::new();
            for r in results {
                match r {
                    Ok(v) => runs.push(v),
                    Err(msg) => out.fail(msg),
                }
            }
            traces.push(json!({"mechanism": mech.id(), "player": i, "menus": setup.menus.len(), "runs": runs}));
        }
    }
    out.json("reconstruct_comm.json", &Value::Array(traces));
    out
}

pub fn extract_min_affine_suite(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut traces = Vec::new();
    for e in &cfg.experiments {
        let mech = e.mechanism.as_ref();
        if mech.mode() != AccessMode::Demand {
            traces.push(json!({"mechanism": mech.id(), "skipped": "not a demand-query mechanism"}));
            continue;
        }
        let mut menus = Vec::new();
        for (ids, profile) in profiles(&e.catalogs) {
            for i in 0..mech.players() {
                let ex = match extract_min_affine(mech, i, &profile) {
                    Ok(ex) => ex,
                    Err(err) => {
                        out.fail(format!("{} player {i} profile {ids:?}: {err}", mech.id()));
                        continue;
                    }
                };
                if let Some(s) = Bundle::all(mech.items()).find(|&s| &ex.menu.eval(s) != ex.truth.price(s)) {
                    out.fail(format!("{} player {i} profile {ids:?}: disagrees at {s}", mech.id()));
                }
                if ex.menu.alpha() > ex.demand_queries || ex.menu.beta() > ex.value_queries {
                    out.fail(format!("{} player {i} profile {ids:?}: alpha or beta above the query count", mech.id()));
                }
                menus.push(json!({
                    "player": i,
                    "profile": ids,
                    "alpha": ex.menu.alpha(),
                    "beta": ex.menu.beta(),
                    "demand_queries": ex.demand_queries,
                    "value_queries": ex.value_queries,
                    "menu": min_affine_to_json(&ex.menu),
                }));
            }
        }
        traces.push(json!({"mechanism": mech.id(), "menus": menus}));
    }
    out.json("min_affine.json", &Value::Array(traces));
    out
}

/// Smallest nondecreasing function above `raw` that vanishes on the empty bundle.
fn close(m: usize, mut f: Vec<Price<Rat>>) -> Vec<Price<Rat>> {
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

/// Candidate base functions for `menu`: the menu itself (never exceeds) and
/// copies raised at random bundles (always exceed).
fn candidates(menu: &Menu<Rat>, bound: Rat, trials: usize, r: &mut impl Rng) -> Vec<BaseFunction<Rat>> {
    let m = menu.m();
    let capped: Vec<Price<Rat>> = menu
        .prices()
        .iter()
        .map(|p| match p {
            Price::Finite(x) if *x > bound => Price::Infinite,
            other => other.clone(),
        })
        .collect();
    let mut out = Vec::new();
    if let Ok(f) = BaseFunction::new(m, close(m, capped.clone()), &bound) {
        out.push(f);
    }
    let step = bound / Rat::int(4);
    for _ in 1..trials.max(1) {
        let s = Bundle(r.random_range(1..(1u32 << m)));
        let mut raw = capped.clone();
        raw[s.index()] = match &raw[s.index()] {
            Price::Finite(x) if *x + step <= bound => Price::Finite(*x + step),
            _ => Price::Infinite,
        };
        if let Ok(f) = BaseFunction::new(m, close(m, raw), &bound) {
            out.push(f);
        }
    }
    out
}

pub fn verify(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut rows = Vec::new();
    for (x, e) in cfg.experiments.iter().enumerate() {
        let mech = e.mechanism.as_ref();
        let bound = mech.bound();
        let mut r = rng::stream(cfg.seed, "verify", x as u64);
        for class in ValuationClass::ALL {
            let (mut agree, mut total, mut bits) = (0usize, 0usize, 0usize);
            let mut skipped = None;
            'profiles: for (ids, profile) in profiles(&e.catalogs) {
                for i in 0..mech.players() {
                    let menu = match extract_menu(mech, i, &profile) {
                        Ok(m) => m,
                        Err(err) => {
                            out.fail(format!("{} player {i} profile {ids:?}: {err}", mech.id()));
                            continue;
                        }
                    };
                    for f in candidates(&menu, bound, cfg.verify_trials, &mut r) {
                        match verify_menu(mech, i, &profile, &f, class) {
                            Ok(res) => {
                                total += 1;
                                bits = bits.max(res.bits);
                                if res.bit == exceeds_somewhere(&f, &menu) {
                                    agree += 1;
                                } else {
                                    out.fail(format!("{} player {i} {}: wrong answer", mech.id(), class.name()));
                                }
                            }
                            // probes outside a restricted domain: the class does not apply
                            Err(taxlab::Error::Contract(msg)) => {
                                skipped = Some(msg);
                                break 'profiles;
                            }
                            Err(err) => out.fail(format!("{} player {i} {}: {err}", mech.id(), class.name())),
                        }
                    }
                }
            }
            rows.push(json!({
                "mechanism": mech.id(),
                "class": class.name(),
                "checked": total,
                "agree": agree,
                "max_bits": bits,
                "skipped": skipped,
            }));
        }
    }
    out.json("verify.json", &Value::Array(rows));
    out
}

pub fn disjointness(instances: &[ZDisjointnessInstance]) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut rows = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        match solve_z_disjointness(inst) {
            Ok(run) => {
                let truth = inst.brute_force();
                let ok = match run.verdict {
                    Verdict::Disjoint => truth.is_empty(),
                    Verdict::Intersect(b) => truth.contains(&b),
                };
                if !ok {
                    out.fail(format!("instance {k}: verdict {:?}, common bits {truth:?}", run.verdict));
                }
                rows.push(json!({
                    "instance": k,
                    "n": inst.n(),
                    "l": inst.l(),
                    "z": inst.z(),
                    "correct": ok,
                    "constant": run.empirical_constant(inst.n(), inst.l(), inst.z()),
                    "run": run,
                }));
            }
            Err(err) => out.fail(format!("instance {k}: {err}")),
        }
    }
    out.json("disjointness.json", &Value::Array(rows));
    out
}

fn trimmed(cats: &[Catalog<Rat>], size: Option<usize>) -> taxlab::Result<Vec<Catalog<Rat>>> {
    match size {
        None => Ok(cats.to_vec()),
        Some(n) => cats.iter().map(|c| Catalog::new(c.entries().iter().take(n.max(1)).cloned().collect())).collect(),
    }
}

fn two_player(cfg: &Config) -> impl Iterator<Item = &Experiment> {
    cfg.experiments.iter().filter(|e| e.mechanism.players() == 2)
}

pub fn transform(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut summary = Vec::new();
    for (x, e) in two_player(cfg).enumerate() {
        let mech = e.mechanism.as_ref();
        let res = (|| -> taxlab::Result<Value> {
            let setup = DominantSetup::new(mech, &e.catalogs)?;
            let tax = setup.index_bits(0).max(setup.index_bits(1)) as usize;
            let mut worst_bits = 0;
            for (ids, profile) in profiles(&e.catalogs) {
                let run = setup.run([Strategy::Truthful(ids[0]), Strategy::Truthful(ids[1])])?;
                let direct = run_mechanism(mech, &profile)?;
                if run.outcome != direct.outcome {
                    out.fail(format!("{} profile {ids:?}: truthful outcome differs", mech.id()));
                }
                worst_bits = worst_bits.max(run.bits());
            }
            let audit = deviation_audit(mech, &trimmed(&e.catalogs, cfg.audit_catalog_size)?)?;
            if !audit.passed() {
                out.fail(format!("{}: deviation gains {} ({:?})", mech.id(), audit.max_gap, audit.worst));
            }
            let name = format!("audit_{x:02}_{}.csv", mech.name());
            out.artifacts.push((name.clone(), audit.to_csv()));
            Ok(json!({
                "mechanism": mech.id(),
                "tax": tax,
                "inner_cc": setup.inner_cc(),
                "max_bits": worst_bits,
                "envelope_with_inner_run": 2 * (tax + mech.items()) + setup.inner_cc(),
                "audit_cases": audit.cases,
                "max_gap": audit.max_gap.to_exact_string(),
                "audit": name,
            }))
        })();
        match res {
            Ok(v) => summary.push(v),
            Err(err) => out.fail(format!("{}: {err}", mech.id())),
        }
    }
    out.json("transform.json", &Value::Array(summary));
    out
}

pub fn simultaneous(cfg: &Config) -> SuiteResult {
    let mut out = SuiteResult::default();
    let mut summary = Vec::new();
    for (x, e) in two_player(cfg).enumerate() {
        let mech = e.mechanism.as_ref();
        let res = (|| -> taxlab::Result<Value> {
            let eps = default_epsilon(&e.catalogs);
            let seed = cfg.seed.wrapping_add(x as u64);
            let strict = strictify_catalogs(mech, &e.catalogs, &eps, seed, 32)?;
            let table = to_simultaneous(mech, &strict)?;
            let menus = [menu_catalog(mech, &strict, 0)?, menu_catalog(mech, &strict, 1)?];
            for k in 0..2 {
                for (y, v) in strict[k].entries().iter().enumerate() {
                    if !is_precise_for(v, &menus[k].menus)? {
                        out.fail(format!("{} player {k} entry {y}: tie after strictifying", mech.id()));
                    }
                }
            }
            let mut contained = 0;
            for (ids, profile) in profiles(&strict) {
                let run = run_mechanism(mech, &profile)?;
                let sim = table.run([ids[0], ids[1]]);
                if (0..2).all(|k| run.outcome.allocation[k].is_subset(sim.allocation[k])) {
                    contained += 1;
                } else {
                    out.fail(format!("{} profile {ids:?}: allocation not contained", mech.id()));
                }
            }
            Ok(json!({
                "mechanism": mech.id(),
                "epsilon": eps.to_exact_string(),
                "tax": table.tax(),
                "bits": table.bits(),
                "profiles": contained,
                "menus": [menus[0].menus.iter().map(menu_to_json).collect::<Vec<_>>(), menus[1].menus.iter().map(menu_to_json).collect::<Vec<_>>()],
            }))
        })();
        match res {
            Ok(v) => summary.push(v),
            Err(err) => out.fail(format!("{}: {err}", mech.id())),
        }
    }
    out.json("simultaneous.json", &Value::Array(summary));
    out
}
