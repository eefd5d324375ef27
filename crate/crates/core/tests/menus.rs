mod common;

use common::*;
use proptest::prelude::*;
use taxlab::menu::best_bundle;
use taxlab::valuation::optimal_welfare;
use taxlab::{menu_complexity, normalize_menu, profit_argmax_set, Bundle, Menu, Price, Rat, Scalar, Valuation};

fn price_strategy() -> impl Strategy<Value = Price<Rat>> {
    prop_oneof![4 => (0i64..6).prop_map(|x| Price::Finite(Rat::int(x))), 1 => Just(Price::Infinite)]
}

fn raw_menu(m: usize) -> impl Strategy<Value = Menu<Rat>> {
    (0i64..3, proptest::collection::vec(price_strategy(), (1 << m) - 1)).prop_map(move |(base, rest)| {
        let mut prices = vec![Price::Finite(Rat::int(base))];
        prices.extend(rest.into_iter().map(|p| match p {
            Price::Finite(x) => Price::Finite(x + Rat::int(base)),
            inf => inf,
        }));
        Menu::new(m, prices).unwrap()
    })
}

fn monotone_valuation(m: usize, strict: bool) -> impl Strategy<Value = Valuation<Rat>> {
    proptest::collection::vec(0i64..5, 1 << m).prop_map(move |inc| {
        let mut t = vec![Rat::int(0); 1 << m];
        for s in Bundle::all(m).skip(1) {
            let floor = s.items().map(|j| t[s.without(j).index()]).max().unwrap();
            let step = Rat::new(inc[s.index()] as i128, 2) + if strict { Rat::new(1, 8) } else { Rat::int(0) };
            t[s.index()] = floor + step;
        }
        Valuation::new(m, t).unwrap()
    })
}

fn max_profit(menu: &Menu<Rat>, v: &Valuation<Rat>) -> Rat {
    Bundle::all(menu.m())
        .filter_map(|s| menu.price(s).finite().map(|p| *v.value(s) - *p))
        .max()
        .unwrap()
}

proptest! {
    #[test]
    fn normalizing_keeps_the_best_profit(menu in raw_menu(3), v in monotone_valuation(3, false)) {
        let norm = normalize_menu(&menu).unwrap();
        prop_assert!(norm.is_normalized());
        let base = *menu.price(Bundle::EMPTY).finite().unwrap();
        prop_assert_eq!(max_profit(&norm, &v), max_profit(&menu, &v) + base);
        let raw = profit_argmax_set(&menu, &v).unwrap();
        let normed = profit_argmax_set(&norm, &v).unwrap();
        prop_assert!(raw.iter().all(|s| normed.contains(s)));
    }

    #[test]
    fn normalizing_keeps_argmax_for_strict_valuations(menu in raw_menu(3), v in monotone_valuation(3, true)) {
        let norm = normalize_menu(&menu).unwrap();
        prop_assert_eq!(profit_argmax_set(&menu, &v).unwrap(), profit_argmax_set(&norm, &v).unwrap());
    }

    #[test]
    fn best_bundle_is_the_smallest_maximizer(menu in raw_menu(3), v in monotone_valuation(3, false)) {
        let (s, p) = best_bundle(&menu, &v).unwrap();
        let set = profit_argmax_set(&menu, &v).unwrap();
        prop_assert_eq!(Some(&s), set.first());
        prop_assert_eq!(p, max_profit(&menu, &v));
    }

    #[test]
    fn welfare_beats_every_assignment(v1 in monotone_valuation(3, false), v2 in monotone_valuation(3, false)) {
        let (alloc, w) = optimal_welfare(&[v1.clone(), v2.clone()]).unwrap();
        prop_assert!(alloc[0].is_disjoint(alloc[1]));
        for s in Bundle::all(3) {
            prop_assert!(*v1.value(s) + *v2.value(s.complement(3)) <= w);
        }
    }
}

/// Bundles that are the unique maximizer for some strictly monotone
/// valuation on a fine grid.
fn uniquely_chosen(menu: &Menu<Rat>) -> Vec<Bundle> {
    let mut out = Vec::new();
    let q = |k: i64| Rat::new(k as i128, 4);
    for a in 1..=16 {
        for b in 1..=16 {
            for top in (a.max(b) + 1)..=40 {
                let v = Valuation::new(2, vec![Rat::int(0), q(a), q(b), q(top)]).unwrap();
                let set = profit_argmax_set(menu, &v).unwrap();
                if set.len() == 1 && !out.contains(&set[0]) {
                    out.push(set[0]);
                }
            }
        }
    }
    // the empty bundle with the smallest values
    let tiny = Valuation::new(2, vec![Rat::int(0), Rat::new(1, 100), Rat::new(1, 100), Rat::new(1, 50)]).unwrap();
    let set = profit_argmax_set(menu, &tiny).unwrap();
    if set.len() == 1 && !out.contains(&set[0]) {
        out.push(set[0]);
    }
    out.sort();
    out
}

#[test]
fn menu_complexity_counts_uniquely_chosen_bundles() {
    let options = [Price::Finite(Rat::int(1)), Price::Finite(Rat::int(2)), Price::Finite(Rat::int(3)), Price::Infinite];
    let mut checked = 0;
    for x in &options {
        for y in &options {
            for z in &options {
                let raw = Menu::new(2, vec![Price::zero(), x.clone(), y.clone(), z.clone()]).unwrap();
                let menu = normalize_menu(&raw).unwrap();
                let (count, mut bundles) = menu_complexity(&menu).unwrap();
                bundles.sort();
                assert_eq!(bundles, uniquely_chosen(&menu), "{menu:?}");
                assert_eq!(count, bundles.len());
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 64);
}

#[test]
fn menu_complexity_of_random_menus_is_bounded() {
    let mut r = rng(81);
    for _ in 0..200 {
        let m = 4;
        let menu = random_menu(&mut r, m, 5, 0.3);
        let (count, bundles) = menu_complexity(&menu).unwrap();
        assert!(count >= 1 && count <= 1 << m);
        assert!(bundles.iter().all(|s| menu.price(*s).is_finite()));
    }
}
