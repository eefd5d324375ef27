//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints one PASS or FAIL line; exits nonzero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use common::*;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;
use taxlab::catalog::index_tuples;
use taxlab::comm_reconstruct::CommSetup;
use taxlab::demand_menus::{demand_cover, extract_min_affine, gadget_valuation, mt_gadget_argmax, mt_menu};
use taxlab::disjointness::{solve_z_disjointness, Verdict};
use taxlab::menu::menu_complexity;
use taxlab::oracle::{demand_query, LoggedOracle};
use taxlab::protocol::library::{
    default_catalogs, disjointness_valuation, half_bundles, item_a_valuation, DropPrice, DropTax, DropTie,
};
use taxlab::protocol::{extract_menu, menu_catalog, run_mechanism, AccessMode};
use taxlab::transforms::{
    default_epsilon, deviation_audit, is_precise_for, strictify_catalogs, to_simultaneous, DominantSetup, Strategy,
};
use taxlab::value_reconstruct::{learn_useless, reconstruct_menu_value, ProtocolPriceOracle, UselessSearch};
use taxlab::verify::{build_probe, exceeds_somewhere, verify_menu};
use taxlab::{
    make_example, measure_complexities, profit_argmax_set, Bundle, Catalog, Mechanism, MechanismSpec, Price, Rat,
    Scalar, Valuation, ValuationClass,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lift<T>(r: taxlab::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn profile_of(cats: &[Catalog<Rat>], ids: &[usize]) -> Vec<Valuation<Rat>> {
    ids.iter().zip(cats).map(|(&k, c)| c.get(k).clone()).collect()
}

fn all_profiles(cats: &[Catalog<Rat>]) -> Vec<Vec<usize>> {
    index_tuples(&cats.iter().map(Catalog::len).collect::<Vec<_>>()).collect()
}

fn warmup_tightness() -> Outcome {
    for c in 1..=4usize {
        let mech = lift(make_example::<Rat>("warmup", &json!({"c": c})))?;
        let rep = lift(measure_complexities(mech.as_ref(), &lift(default_catalogs(mech.as_ref()))?))?;
        ensure(rep.tax as usize == c && rep.cc == c + 1, || format!("c={c}: tax={} cc={}", rep.tax, rep.cc))?;
        ensure(rep.valid, || format!("c={c}: {:?}", rep.violations))?;
    }
    Ok("tax=c, cc=c+1 for c=1..4".into())
}

fn tax_versus_cc() -> Outcome {
    let mut r = rng(1002);
    let mut reports = 0;
    for m in 2..=6usize {
        for mech in library(m) {
            let size = if mech.players() > 2 { 6 } else { 10 };
            for cats in [lift(default_catalogs(mech.as_ref()))?, rich_catalogs(mech.as_ref(), &mut r, size, 4)] {
                let rep = lift(measure_complexities(mech.as_ref(), &cats))?;
                ensure(rep.valid, || format!("{}: {:?}", mech.id(), rep.violations))?;
                for name in ["tax<=cc", "tax<=cc+1"] {
                    ensure(rep.check(name) == Some(true), || format!("{} m={m} fails {name}", mech.id()))?;
                }
                reports += 1;
            }
        }
    }
    Ok(format!("{reports} reports, n<=3, m<=6"))
}

fn menu_verification() -> Outcome {
    const PER_CLASS: usize = 500;
    let mut cases = Vec::new();
    for m in [2usize, 3, 4] {
        for mech in library(m) {
            for i in 0..mech.players() {
                // the gadget's first player only accepts marked valuations
                if mech.name() == "mt_gadget" && i == 0 {
                    continue;
                }
                for class in ValuationClass::ALL {
                    cases.push((mech.clone(), i, class));
                }
            }
        }
    }
    let results: Vec<Result<(String, ValuationClass, usize, usize), String>> = cases
        .par_iter()
        .enumerate()
        .map(|(k, (mech, i, class))| {
            let mut r = rng(3000 + k as u64);
            let cats = lift(default_catalogs(mech.as_ref()))?;
            let bound = mech.bound();
            let mut probes = 0;
            for trial in 0..PER_CLASS {
                let profile: Vec<_> = cats.iter().map(|c| c.get(r.random_range(0..c.len())).clone()).collect();
                let menu = lift(extract_menu(mech.as_ref(), *i, &profile))?;
                let f = random_base(&mut r, &menu, bound);
                let got = lift(verify_menu(mech.as_ref(), *i, &profile, &f, *class))?;
                ensure(got.bit == exceeds_somewhere(&f, &menu), || {
                    format!("{} player {i} {} trial {trial}", mech.id(), class.name())
                })?;
                if *class == ValuationClass::Submodular {
                    for p in lift(build_probe(*class, &f, &bound))? {
                        ensure(p.valuation.is_submodular(), || format!("{}: probe not submodular", mech.id()))?;
                        probes += 1;
                    }
                }
            }
            Ok((mech.id(), *class, PER_CLASS, probes))
        })
        .collect();
    let mut per: BTreeMap<(String, &str), usize> = BTreeMap::new();
    let mut probes = 0;
    for res in results {
        let (id, class, n, p) = res?;
        *per.entry((id, class.name())).or_default() += n;
        probes += p;
    }
    let least = per.values().min().copied().unwrap_or(0);
    ensure(least >= PER_CLASS, || format!("only {least} samples for some class"))?;
    Ok(format!("{} mechanism-class pairs, >= {least} each, {probes} submodular probes", per.len()))
}

fn value_mechanisms() -> Result<Vec<MechanismSpec<Rat>>, String> {
    let mut out = Vec::new();
    for c in 1..=4 {
        out.push(lift(make_example("warmup", &json!({"c": c})))?);
        out.push(lift(make_example("value_tightness", &json!({"c": c})))?);
    }
    out.push(lift(make_example("value_tightness", &json!({"m": 6, "bundles": [3, 12, 48]})))?);
    out.push(lift(make_example("value_tightness", &json!({"m": 5, "bundles": [7, 25, 14, 28]})))?);
    for m in 2..=6 {
        out.extend(library(m).into_iter().filter(|x| x.mode() == AccessMode::Value));
    }
    Ok(out)
}

fn useless_brute_force(m: usize, v: &dyn Fn(Bundle) -> bool) -> BTreeSet<Bundle> {
    Bundle::all(m).filter(|&s| !v(s) && (0..m).filter(|&j| !s.contains(j)).all(|j| v(s.with(j)))).collect()
}

fn value_ladder() -> Outcome {
    let mut menus = 0;
    for mech in value_mechanisms()? {
        let cats = lift(default_catalogs(mech.as_ref()))?;
        for ids in all_profiles(&cats) {
            let profile = profile_of(&cats, &ids);
            for i in 0..mech.players() {
                let truth = lift(extract_menu(mech.as_ref(), i, &profile))?;
                let (mc, _) = lift(menu_complexity(&truth))?;
                let mut oracle = ProtocolPriceOracle::new(mech.as_ref(), i, &profile);
                let rec = lift(reconstruct_menu_value(&mut oracle, mc.max(1)))?;
                ensure(rec.menu == truth, || format!("{} player {i} {ids:?}", mech.id()))?;
                menus += 1;
            }
        }
    }
    let mut r = rng(1004);
    let mut instances = 0;
    let mut worst = 0.0f64;
    while instances < 500 {
        let m = r.random_range(1..=8);
        let gens: Vec<Bundle> = (0..r.random_range(1..=4)).map(|_| Bundle(r.random_range(0..(1u32 << m)))).collect();
        let v = |s: Bundle| gens.iter().any(|g| g.is_subset(s));
        let want = useless_brute_force(m, &v);
        let k = want.len();
        if k == 0 || k > 8 {
            continue;
        }
        let res = lift(learn_useless(m, k, &mut |s| Ok(v(s))))?;
        ensure(res.useless == want, || format!("wrong useless set, m={m} k={k}"))?;
        let bound = UselessSearch::query_bound(m, k);
        ensure(res.queries <= bound, || format!("{} queries > {bound}", res.queries))?;
        worst = worst.max(res.queries as f64 / bound as f64);
        instances += 1;
    }
    Ok(format!("{menus} menus exact; {instances} useless instances, worst queries/bound {worst:.3}"))
}

fn mc_versus_val() -> Outcome {
    let mut r = rng(1005);
    let mut reports = 0;
    for mech in value_mechanisms()? {
        for cats in [lift(default_catalogs(mech.as_ref()))?, rich_catalogs(mech.as_ref(), &mut r, 8, 4)] {
            let rep = lift(measure_complexities(mech.as_ref(), &cats))?;
            ensure(rep.mc <= rep.val + 2, || format!("{}: mc={} val={}", mech.id(), rep.mc, rep.val))?;
            reports += 1;
        }
    }
    for c in 1..=4usize {
        let mech = lift(make_example::<Rat>("value_tightness", &json!({"c": c})))?;
        let rep = lift(measure_complexities(mech.as_ref(), &lift(default_catalogs(mech.as_ref()))?))?;
        ensure(rep.val == c + 1 && rep.mc == c + 1, || format!("c={c}: val={} mc={}", rep.val, rep.mc))?;
    }
    Ok(format!("{reports} reports; tightness val=mc=c+1 for c=1..4"))
}

fn min_affine() -> Outcome {
    let mut r = rng(1006);
    let mut checked = 0;
    for m in [2usize, 3, 4, 5, 6] {
        for mech in library(m).into_iter().filter(|x| x.mode() == AccessMode::Demand) {
            for cats in [lift(default_catalogs(mech.as_ref()))?, rich_catalogs(mech.as_ref(), &mut r, 10, 4)] {
                for ids in all_profiles(&cats) {
                    let profile = profile_of(&cats, &ids);
                    for i in 0..mech.players() {
                        let ex = lift(extract_min_affine(mech.as_ref(), i, &profile))?;
                        for s in Bundle::all(m) {
                            ensure(&ex.menu.eval(s) == ex.truth.price(s), || {
                                format!("{} player {i} {ids:?} bundle {s}", mech.id())
                            })?;
                        }
                        ensure(ex.menu.alpha() <= ex.demand_queries && ex.menu.beta() <= ex.value_queries, || {
                            format!("{}: alpha/beta exceed the query counts", mech.id())
                        })?;
                        checked += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{checked} menus match on every bundle"))
}

fn gadget() -> Outcome {
    let mut r = rng(1007);
    let mut worst = 0;
    for m in [4usize, 6] {
        let half = half_bundles(m);
        for trial in 0..1000 {
            let v = random_valuation(&mut r, m, 12).map_scalar(|x| *x / Rat::int(4));
            let target = half[r.random_range(0..half.len())];
            let menu = lift(mt_menu::<Rat>(m, target))?;
            let mut oracle = LoggedOracle::new(1, &v);
            let mut checks = 0;
            let got = lift(mt_gadget_argmax(&mut oracle, |s| {
                checks += 1;
                Ok(s == target)
            }))?;
            ensure(lift(profit_argmax_set(&menu, &v))?.contains(&got), || format!("m={m} trial {trial}"))?;
            let used = oracle.log.demand_count() + checks;
            ensure(used <= m + 2, || format!("m={m} trial {trial}: {used} queries"))?;
            worst = worst.max(used);
        }
    }
    let m = 6;
    let grid = [Rat::int(0), Rat::new(1, 8), Rat::new(1, 4), Rat::new(1, 2), Rat::int(1)];
    let half = half_bundles(m);
    let gadgets: Vec<Valuation<Rat>> = half.iter().map(|&t| gadget_valuation(m, t)).collect::<taxlab::Result<_>>().map_err(|e| e.to_string())?;
    let mut vectors = 0;
    for code in 0..grid.len().pow(m as u32) {
        let mut c = code;
        let prices: Vec<Price<Rat>> = (0..m)
            .map(|_| {
                let p = grid[c % grid.len()];
                c /= grid.len();
                Price::Finite(p)
            })
            .collect();
        let mut brute = Vec::new();
        for (t, v) in half.iter().zip(&gadgets) {
            if lift(demand_query(v, &prices))?.0 == *t {
                brute.push(*t);
            }
        }
        let got = lift(demand_cover(m, &prices))?;
        ensure(got.len() <= 1 && got == brute, || format!("cover {got:?} vs {brute:?}"))?;
        vectors += 1;
    }
    ensure(vectors >= 10_000, || format!("only {vectors} price vectors"))?;
    Ok(format!("2000 valuations, worst {worst} queries; {vectors} price vectors"))
}

fn disjointness() -> Outcome {
    let mut r = rng(1008);
    let mut c: f64 = 0.0;
    let mut hits = 0;
    let mut runs = Vec::new();
    for trial in 0..1000 {
        let inst = random_instance(&mut r);
        let run = lift(solve_z_disjointness(&inst))?;
        let truth = inst.brute_force();
        match run.verdict {
            Verdict::Disjoint => ensure(truth.is_empty(), || format!("trial {trial}: missed {truth:?}"))?,
            Verdict::Intersect(k) => {
                ensure(truth.contains(&k), || format!("trial {trial}: bad witness {k}"))?;
                hits += 1;
            }
        }
        c = c.max(run.empirical_constant(inst.n(), inst.l(), inst.z()));
        runs.push((run.bits, inst.n(), inst.l(), inst.z()));
    }
    for (bits, n, l, z) in runs {
        let envelope = c * (z * z * n * n) as f64 * (l as f64).log2().max(1.0);
        ensure(bits as f64 <= envelope + 1e-9, || format!("{bits} bits above the envelope"))?;
    }
    ensure(hits > 0, || "no intersecting instance".into())?;
    Ok(format!("1000 instances, {hits} intersecting, empirical C = {c:.3}"))
}

fn comm_reconstruction() -> Outcome {
    let mut r = rng(1009);
    let mut runs = 0;
    let mut dsteps = 0;
    for m in 2..=6usize {
        for mech in library(m) {
            let size = if mech.players() > 2 { 12 } else { 32 };
            let cats = rich_catalogs(mech.as_ref(), &mut r, size, 4);
            for i in 0..cats.len() {
                let setup = lift(CommSetup::new(mech.as_ref(), &cats, i))?;
                let sizes: Vec<usize> =
                    cats.iter().enumerate().map(|(k, c)| if k == i { 1 } else { c.len() }).collect();
                let tuples: Vec<Vec<usize>> = index_tuples(&sizes).collect();
                let res: Vec<Result<usize, String>> = tuples
                    .par_iter()
                    .map(|ids| {
                        let truth = lift(extract_menu(mech.as_ref(), i, &profile_of(&cats, ids)))?;
                        let rec = lift(setup.reconstruct(ids, 9))?;
                        ensure(rec.menu == truth, || format!("{} player {i} {ids:?}", mech.id()))?;
                        for s in &rec.steps {
                            ensure(2 * s.live_after <= s.live_before, || format!("{}: step did not halve", mech.id()))?;
                            ensure(s.bands.iter().all(|b| b.block_hits <= 1), || {
                                format!("{}: block with two intersecting bits", mech.id())
                            })?;
                        }
                        Ok(rec.steps.iter().filter(|s| !s.direct).count())
                    })
                    .collect();
                for x in res {
                    dsteps += x?;
                    runs += 1;
                }
            }
        }
    }
    Ok(format!("{runs} reconstructions exact, {dsteps} steps via disjointness"))
}

fn two_player(m: usize) -> Vec<MechanismSpec<Rat>> {
    library(m).into_iter().filter(|x| x.players() == 2).collect()
}

fn trim(cats: Vec<Catalog<Rat>>, size: usize) -> Result<Vec<Catalog<Rat>>, String> {
    cats.into_iter().map(|c| lift(Catalog::new(c.entries().iter().take(size).cloned().collect()))).collect()
}

fn transformation() -> Outcome {
    let mut profiles = 0;
    let mut audited = 0;
    let mut worst_gap = Rat::int(0);
    for m in [2usize, 4] {
        for mech in two_player(m) {
            let cats = lift(default_catalogs(mech.as_ref()))?;
            let setup = lift(DominantSetup::new(mech.as_ref(), &cats))?;
            for ids in all_profiles(&cats) {
                let run = lift(setup.run([Strategy::Truthful(ids[0]), Strategy::Truthful(ids[1])]))?;
                let direct = lift(run_mechanism(mech.as_ref(), &profile_of(&cats, &ids)))?;
                ensure(run.outcome == direct.outcome, || format!("{} {ids:?}", mech.id()))?;
                profiles += 1;
            }
            let small = trim(cats, if m == 2 { 6 } else { 4 })?;
            let report = lift(deviation_audit(mech.as_ref(), &small))?;
            ensure(report.passed(), || format!("{}: {:?}", mech.id(), report.worst))?;
            audited += report.cases;
            worst_gap = worst_gap.max(report.max_gap);
        }
    }
    Ok(format!("{profiles} truthful profiles equal; {audited} audited deviations, max gap {worst_gap}"))
}

fn simultaneous() -> Outcome {
    let mut profiles = 0;
    for m in [2usize, 4] {
        for mech in two_player(m) {
            let cats = trim(lift(default_catalogs(mech.as_ref()))?, 8)?;
            let eps = default_epsilon(&cats);
            let strict = lift(strictify_catalogs(mech.as_ref(), &cats, &eps, 5, 32))?;
            let table = lift(to_simultaneous(mech.as_ref(), &strict))?;
            let menus = [lift(menu_catalog(mech.as_ref(), &strict, 0))?, lift(menu_catalog(mech.as_ref(), &strict, 1))?];
            let tax = menus[0].bits().max(menus[1].bits()) as usize;
            for k in 0..2 {
                for v in strict[k].entries() {
                    ensure(lift(is_precise_for(v, &menus[k].menus))?, || format!("{}: tie for player {k}", mech.id()))?;
                }
            }
            for ids in all_profiles(&strict) {
                let run = lift(run_mechanism(mech.as_ref(), &profile_of(&strict, &ids)))?;
                let sim = table.run([ids[0], ids[1]]);
                ensure(sim.bits == 2 * tax, || format!("{}: {} bits, tax {tax}", mech.id(), sim.bits))?;
                for k in 0..2 {
                    ensure(run.outcome.allocation[k].is_subset(sim.allocation[k]), || {
                        format!("{} {ids:?}: player {k} not contained", mech.id())
                    })?;
                }
                profiles += 1;
            }
        }
    }
    Ok(format!("{profiles} strictified profiles contained, bits = 2 tax"))
}

fn random_bits(r: &mut impl Rng, h: usize) -> Vec<bool> {
    let p = (0.7 / h as f64).sqrt().min(0.9);
    (0..h).map(|_| r.random_bool(p)).collect()
}

fn reductions() -> Outcome {
    let mut r = rng(1012);
    let enc = |m: usize, bits: &[bool], high: i64| lift(disjointness_valuation(m, bits, Rat::int(high)));
    for m in [4usize, 6, 8] {
        let h = half_bundles(m).len();
        let (tie, tax, price) = (lift(DropTie::new(m))?, lift(DropTax::new(m))?, lift(DropPrice::new(m))?);
        let carol = lift(item_a_valuation(m, Rat::new(3, 2)))?;
        for _ in 0..200 {
            let (a, b) = (random_bits(&mut r, h), random_bits(&mut r, h));
            let want = a.iter().zip(&b).any(|(x, y)| *x && *y);
            let out = lift(run_mechanism::<Rat>(&tie, &[enc(m, &a, 1)?, enc(m, &b, 1)?]))?.outcome;
            ensure((out.allocation[1] == Bundle::singleton(0)) == want, || format!("drop_tie m={m}"))?;
            let out = lift(run_mechanism::<Rat>(&tax, &[enc(m, &a, 1)?, enc(m, &b, 2)?]))?.outcome;
            ensure(!out.allocation[1].is_empty() == want, || format!("drop_tax m={m}"))?;
            let out = lift(run_mechanism::<Rat>(&price, &[enc(m, &a, 1)?, enc(m, &b, 1)?, carol.clone()]))?.outcome;
            ensure(!out.allocation[2].is_empty() == want, || format!("drop_price m={m}"))?;
        }
    }
    let mut shapes = Vec::new();
    for m in [4usize, 6] {
        let tie = lift(DropTie::new(m))?;
        let rep_tie = lift(measure_complexities::<Rat>(&tie, &lift(default_catalogs(&tie))?))?;
        let tax = lift(DropTax::new(m))?;
        let rep_tax = lift(measure_complexities::<Rat>(&tax, &lift(default_catalogs(&tax))?))?;
        let price = lift(DropPrice::new(m))?;
        let rep_price = lift(measure_complexities::<Rat>(&price, &lift(default_catalogs(&price))?))?;
        let most = |c: &[usize]| c.iter().max().copied().unwrap_or(0);
        ensure(most(&rep_tie.menu_counts) == 1, || format!("drop_tie m={m}: {:?} menus", rep_tie.menu_counts))?;
        ensure(rep_tax.price == 1, || format!("drop_tax m={m}: price {}", rep_tax.price))?;
        ensure(most(&rep_price.menu_counts) == 2, || format!("drop_price m={m}: {:?} menus", rep_price.menu_counts))?;
        ensure(Mechanism::<Rat>::players(&price) == 3, || "drop_price needs three players".into())?;
        shapes.push(format!(
            "m={m}: drop_tie menus=1 (log-tax {}), drop_tax price=1, drop_price menus=2 (log-tax {}, tie {})",
            rep_tie.tax, rep_price.tax, rep_price.tie
        ));
    }
    Ok(format!("600 strings per mechanism decoded; {}", shapes.join("; ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("warm-up tightness", warmup_tightness),
        ("tax <= cc and tax <= cc+1", tax_versus_cc),
        ("menu verification", menu_verification),
        ("value-query ladder", value_ladder),
        ("mc <= val+2", mc_versus_val),
        ("min-affine characterization", min_affine),
        ("gadget optimizer and price cover", gadget),
        ("z-disjointness", disjointness),
        ("menu reconstruction", comm_reconstruction),
        ("dominant-strategy transformation", transformation),
        ("simultaneous compiler", simultaneous),
        ("disjointness reductions", reductions),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail}; {secs:.1}s)", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({why}; {secs:.1}s)", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
