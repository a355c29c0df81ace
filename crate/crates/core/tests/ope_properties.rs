use chiral_core::fock::systems::{fermion_pairs, free_boson, two_bosons_two_fermions};
use chiral_core::fock::{apply_mode, apply_word, enumerate_basis, normal_order_word, EnumOptions};
use chiral_core::ope::{check_locality, singular_ope, wick_oracle, OpeEngine};
use chiral_core::rational::{q, q_frac};
use chiral_core::{GeneratorSystem, ModeSymbol, Monomial, Q, State};
use proptest::prelude::*;

fn basis(sys: &GeneratorSystem, cutoff: i64) -> Vec<Monomial> {
    enumerate_basis(sys, &q(cutoff), &sys.zero_sector(), &EnumOptions::default()).unwrap()
}

fn combination(basis: &[Monomial], picks: &[(usize, i64, i64)]) -> State {
    let mut s = State::zero();
    for (i, n, d) in picks {
        s.add_term(basis[i % basis.len()].clone(), q_frac(*n, *d));
    }
    s
}

fn picks() -> impl Strategy<Value = Vec<(usize, i64, i64)>> {
    prop::collection::vec((0usize..1000, -9i64..=9, 1i64..=5), 1..4)
}

/// Homogeneous-parity combination: keeps only even or only odd monomials.
fn with_parity(sys: &GeneratorSystem, s: &State, odd: bool) -> State {
    let mut out = State::zero();
    for (m, c) in s.terms() {
        if sys.monomial_parity(m).is_odd() == odd {
            out.add_term(m.clone(), c.clone());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mode_product_is_bilinear(pa in picks(), pb in picks(), pc in picks(), j in -2i64..4, n in -5i64..=5) {
        let sys = two_bosons_two_fermions();
        let b2 = basis(&sys, 2);
        let engine = OpeEngine::new(&sys);
        let a = combination(&b2, &pa);
        let b = combination(&b2, &pb);
        let c = combination(&b2, &pc);
        let k = q(n);
        let lhs = engine.mode(&a, j, &b.plus(&c.scaled(&k)));
        let rhs = engine.mode(&a, j, &b).plus(&engine.mode(&a, j, &c).scaled(&k));
        prop_assert_eq!(lhs, rhs);
        let lhs = engine.mode(&a.plus(&c.scaled(&k)), j, &b);
        let rhs = engine.mode(&a, j, &b).plus(&engine.mode(&c, j, &b).scaled(&k));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn normal_ordering_is_canonical(word_ix in prop::collection::vec(0usize..8, 1..6), swap in 0usize..5) {
        let sys = two_bosons_two_fermions();
        let creators: Vec<ModeSymbol> = (0..4u16).flat_map(|g| [ModeSymbol::new(g, -1), ModeSymbol::new(g, -2)]).collect();
        let word: Vec<ModeSymbol> = word_ix.iter().map(|i| creators[*i]).collect();
        let vac = sys.vacuum();
        let ordered = normal_order_word(&sys, &word, &sys.zero_sector()).unwrap();
        prop_assert_eq!(&ordered, &apply_word(&sys, &word, &vac).unwrap());
        // creators supercommute, so swapping adjacent ones only changes the sign for two fermions
        if word.len() >= 2 {
            let i = swap % (word.len() - 1);
            let mut swapped = word.clone();
            swapped.swap(i, i + 1);
            let sign = if sys.mode_parity(word[i]).is_odd() && sys.mode_parity(word[i + 1]).is_odd() { q(-1) } else { q(1) };
            prop_assert_eq!(normal_order_word(&sys, &swapped, &sys.zero_sector()).unwrap(), ordered.scaled(&sign));
        }
        let as_monomials: Vec<&Monomial> = ordered.terms().map(|(m, _)| m).collect();
        prop_assert!(as_monomials.len() <= 1);
    }

    #[test]
    fn brackets_match_contractions(target in picks(), x in 0usize..4, y in 0usize..4, mx in -3i64..=3, my in -3i64..=3) {
        let sys = two_bosons_two_fermions();
        let b2 = basis(&sys, 2);
        let v = combination(&b2, &target);
        let names = ["d1", "d2", "phi", "psi"];
        let shift = |g: &str| if g.starts_with('p') { q_frac(1, 2) } else { q(0) };
        let kx = q(mx) + shift(names[x]);
        let ky = q(my) + shift(names[y]);
        let a = sys.mode(names[x], &kx).unwrap();
        let b = sys.mode(names[y], &ky).unwrap();
        let ab = apply_mode(&sys, a, &apply_mode(&sys, b, &v).unwrap()).unwrap();
        let ba = apply_mode(&sys, b, &apply_mode(&sys, a, &v).unwrap()).unwrap();
        let both_odd = sys.mode_parity(a).is_odd() && sys.mode_parity(b).is_odd();
        let bracket = if both_odd { ab.plus(&ba) } else { ab.minus(&ba) };
        // oracle: [d_i[m], d_j[n]] = m delta_ij delta_{m+n}, {phi[r], psi[s]} = delta_{r+s}
        let expected: Q = if (&kx + &ky) != q(0) {
            q(0)
        } else {
            match (names[x], names[y]) {
                ("d1", "d1") | ("d2", "d2") => kx.clone(),
                ("phi", "psi") | ("psi", "phi") => q(1),
                _ => q(0),
            }
        };
        prop_assert_eq!(bracket, v.scaled(&expected));
    }

    #[test]
    fn borcherds_matches_wick_on_random_pairs(pa in picks(), pb in picks(), oa in any::<bool>(), ob in any::<bool>()) {
        let sys = two_bosons_two_fermions();
        let b2 = basis(&sys, 2);
        let a = with_parity(&sys, &combination(&b2, &pa), oa);
        let b = with_parity(&sys, &combination(&b2, &pb), ob);
        prop_assert_eq!(wick_oracle(&sys, &a, &b).unwrap().coefficients, singular_ope(&sys, &a, &b).coefficients);
    }
}

#[test]
fn borcherds_matches_wick_on_all_weight_two_pairs() {
    let sys = two_bosons_two_fermions();
    let b2 = basis(&sys, 2);
    for x in &b2 {
        for y in &b2 {
            let a = State::from_monomial(x.clone());
            let b = State::from_monomial(y.clone());
            assert_eq!(wick_oracle(&sys, &a, &b).unwrap().coefficients, singular_ope(&sys, &a, &b).coefficients, "{x:?} {y:?}");
        }
    }
}

#[test]
fn fermion_bilinears_are_local() {
    let sys = fermion_pairs(2);
    let b = basis(&sys, 1);
    for x in b.iter().filter(|m| m.degree() == 2) {
        for y in b.iter().filter(|m| m.degree() == 2) {
            let a = State::from_monomial(x.clone());
            let c = State::from_monomial(y.clone());
            assert!(check_locality(&sys, &a, &c, &q(2)).unwrap());
        }
    }
}

#[test]
fn boson_heisenberg_identity() {
    let sys = free_boson();
    let v = sys.vacuum();
    let d = |k: i64| sys.mode("d", &q(k)).unwrap();
    let s = apply_word(&sys, &[d(-1), d(-1), d(-2)], &v).unwrap();
    let lowered = apply_mode(&sys, d(1), &s).unwrap();
    assert_eq!(lowered, apply_word(&sys, &[d(-1), d(-2)], &v).unwrap().scaled(&q(2)));
    let lowered = apply_mode(&sys, d(2), &s).unwrap();
    assert_eq!(lowered, apply_word(&sys, &[d(-1), d(-1)], &v).unwrap().scaled(&q(2)));
}
