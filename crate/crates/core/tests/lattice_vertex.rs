use std::sync::Arc;

use chiral_core::fock::{enumerate_basis, EnumOptions};
use chiral_core::lattice::{base, build_cy_n2, lattice_system, lattice_system_with, mirror_swap};
use chiral_core::ope::{check_locality_on, singular_ope, OpeEngine};
use chiral_core::rational::q;
use chiral_core::toric::{extend_fan, Fan};
use chiral_core::{GeneratorSystem, Monomial, Sector, State};

const SECTORS: [([i64; 2], [i64; 2]); 6] = [
    ([0, 0], [0, 0]),
    ([1, 0], [0, 0]),
    ([0, 0], [1, 1]),
    ([-1, 1], [0, 1]),
    ([1, 1], [-1, 1]),
    ([0, -1], [1, 0]),
];

fn p1_fan() -> Arc<Fan> {
    let f = Fan::new(vec![vec![1], vec![-1]], &[vec![0], vec![1]]).unwrap();
    Arc::new(extend_fan(&f, 1))
}

/// Base vectors plus their first excitations in each sample sector.
fn sample_basis(sys: &GeneratorSystem) -> Vec<Monomial> {
    let mut out = Vec::new();
    for (m, n) in SECTORS {
        let s = Sector::from_parts(&m, &n);
        let cutoff = sys.sector_weight(&s) + q(1);
        if cutoff < q(0) {
            out.push(Monomial::base(s));
            continue;
        }
        out.extend(enumerate_basis(sys, &cutoff, &s, &EnumOptions::default()).unwrap());
    }
    out
}

fn sample_states(sys: &GeneratorSystem) -> Vec<State> {
    let mut out: Vec<State> = SECTORS.iter().map(|(m, n)| base(sys, m, n)).collect();
    let f = build_cy_n2(sys);
    out.extend([f.j, f.gplus, f.gminus]);
    out
}

#[test]
fn lattice_vertex_operators_are_local() {
    let sys = lattice_system(2);
    let engine = OpeEngine::new(&sys);
    let basis = sample_basis(&sys);
    let states = sample_states(&sys);
    for a in &states[..4] {
        for b in &states[..4] {
            assert!(check_locality_on(&engine, a, b, &basis, 2).unwrap());
        }
    }
}

#[test]
fn deformed_products_agree_or_vanish() {
    let full = lattice_system(2);
    let fan = p1_fan();
    let deformed = lattice_system_with(2, Some(fan.clone()));
    let ef = OpeEngine::new(&full);
    let ed = OpeEngine::new(&deformed);
    let mut agreed = 0;
    let mut vanished = 0;
    for (ma, na) in SECTORS {
        let a = base(&full, &ma, &na);
        for v in sample_basis(&full) {
            let b = State::from_monomial(v.clone());
            let modes: Vec<(State, State)> = (-3..=3).map(|j| (ef.mode(&a, j, &b), ed.mode(&a, j, &b))).collect();
            let n1 = &v.sector.0[2..];
            if fan.in_common_cone(&na, n1) {
                assert!(modes.iter().all(|(x, y)| x == y));
                agreed += 1;
            } else {
                assert!(modes.iter().all(|(_, y)| y.is_zero()));
                vanished += 1;
            }
        }
    }
    assert!(agreed > 0 && vanished > 0);
}

#[test]
fn deformed_product_is_local_within_a_cone() {
    let deformed = lattice_system_with(2, Some(p1_fan()));
    let engine = OpeEngine::new(&deformed);
    let basis = sample_basis(&deformed);
    let a = base(&deformed, &[0, 0], &[1, 1]);
    let b = base(&deformed, &[1, 0], &[0, 1]);
    assert!(check_locality_on(&engine, &a, &b, &basis, 2).unwrap());
}

#[test]
fn pole_order_is_pairing() {
    let sys = lattice_system(2);
    for (m, n) in SECTORS {
        for (m1, n1) in SECTORS {
            let a = base(&sys, &m, &n);
            let b = base(&sys, &m1, &n1);
            let pairing: i64 = (0..2).map(|i| m[i] * n1[i] + m1[i] * n[i]).sum();
            assert_eq!(singular_ope(&sys, &a, &b).leading_order, pairing, "{m:?} {n:?} | {m1:?} {n1:?}");
        }
    }
}

#[test]
fn mirror_swap_is_an_involution() {
    let sys = lattice_system(2);
    for s in sample_states(&sys) {
        assert_eq!(mirror_swap(&sys, &mirror_swap(&sys, &s)), s);
    }
}
