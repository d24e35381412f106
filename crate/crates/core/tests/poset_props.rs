//! Order-theoretic properties of the sample space, checked exhaustively on
//! small spaces and by property testing against an independent enumeration.

mod common;

use app_core::poset::{join, leq, subsets_up_to};
use app_core::{ParamDomain, PosetState, SampleSpace};
use common::{enumerate_states, plain, plain_leq};
use proptest::prelude::*;

fn binom(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

#[test]
fn state_list_matches_enumeration() {
    for d in 1..=4 {
        for m in 1..=5 {
            let sp = SampleSpace::new(d, m, 1.0).unwrap();
            let got: Vec<_> = sp.states().iter().map(plain).collect();
            assert_eq!(got, enumerate_states(d, m), "D={d} M={m}");
            for (i, s) in sp.states().iter().enumerate() {
                assert_eq!(sp.index_of(s).unwrap(), i);
            }
        }
    }
}

#[test]
fn partial_order_axioms_exhaustive() {
    let sp = SampleSpace::new(3, 3, 1.0).unwrap();
    let st = sp.states();
    for a in st {
        assert!(leq(a, a));
        for b in st {
            assert_eq!(leq(a, b), plain_leq(&plain(a), &plain(b)));
            if leq(a, b) && leq(b, a) {
                assert_eq!(a, b);
            }
            for c in st {
                if leq(a, b) && leq(b, c) {
                    assert!(leq(a, c));
                }
            }
        }
    }
}

#[test]
fn upsets_match_brute_force_and_size_formula() {
    for (d, m) in [(1, 4), (2, 3), (3, 2), (3, 4)] {
        let sp = SampleSpace::new(d, m, 1.0).unwrap();
        let plain_states = enumerate_states(d, m);
        for s in sp.states() {
            let want: Vec<usize> = plain_states
                .iter()
                .enumerate()
                .filter(|(_, w)| plain_leq(&plain(s), w))
                .map(|(i, _)| i)
                .collect();
            let got = sp.upset_indices(s);
            assert_eq!(got, want);
            if !s.is_bottom() {
                let free = d - s.subset().len();
                assert_eq!(got.len(), (1 << free) * (m - s.bin() + 1));
            }
        }
    }
}

#[test]
fn domain_sizes_follow_binomials() {
    for d in 1..=4 {
        for k in 1..=d {
            let sp = SampleSpace::new(d, 3, 1.0).unwrap();
            let dom = ParamDomain::new(&sp, k).unwrap();
            let subsets: usize = (1..=k).map(|i| binom(d, i)).sum();
            assert_eq!(subsets_up_to(d, k), subsets);
            assert_eq!(dom.len(), 3 * subsets);
            assert!(dom.members().iter().all(|s| !s.is_bottom() && s.subset().len() <= k));
        }
    }
}

fn state(d: usize, m: usize) -> impl Strategy<Value = PosetState> {
    (1u32..(1 << d), 1..=m).prop_map(|(mask, bin)| PosetState::new(app_core::Subset::from_mask(mask), bin).unwrap())
}

fn pair_in_space() -> impl Strategy<Value = (usize, usize, PosetState, PosetState)> {
    (1usize..=5, 1usize..=6).prop_flat_map(|(d, m)| (Just(d), Just(m), state(d, m), state(d, m)))
}

proptest! {
    #[test]
    fn join_is_least_upper_bound((d, m, a, b) in pair_in_space()) {
        let sp = SampleSpace::new(d, m, 1.0).unwrap();
        let j = join(&a, &b).unwrap();
        prop_assert!(leq(&a, &j) && leq(&b, &j));
        for w in sp.states() {
            if leq(&a, w) && leq(&b, w) {
                prop_assert!(leq(&j, w));
            }
        }
        prop_assert_eq!(join(&a, &b).unwrap(), join(&b, &a).unwrap());
    }

    #[test]
    fn upset_intersection_is_upset_of_join((d, m, a, b) in pair_in_space()) {
        let sp = SampleSpace::new(d, m, 1.0).unwrap();
        let ua = sp.upset_indices(&a);
        let both: Vec<usize> = sp.upset_indices(&b).into_iter().filter(|i| ua.contains(i)).collect();
        prop_assert_eq!(both, sp.upset_indices(&join(&a, &b).unwrap()));
    }

    #[test]
    fn keys_round_trip((_d, _m, a, _b) in pair_in_space()) {
        prop_assert_eq!(PosetState::parse_key(&a.key()).unwrap(), a);
    }
}
