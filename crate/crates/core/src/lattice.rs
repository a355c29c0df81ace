//! The lattice vertex algebra `Fock_{M+N}` and its fan-deformed variant.
//!
//! Generators: bosons `A_i`, `B_i` with `[A_i(k), B_j(l)] = k delta_ij delta_{k+l}`,
//! fermions `Phi_i`, `Psi_i` with `{Phi_i, Psi_j} = delta_ij`. On the sector
//! `|m, n>` the zero mode of `A_i` acts by `m_i` and that of `B_i` by `n_i`.
//!
//! `Y(|m,n>, z) = gamma_{m,n} (-1)^{m.n1} E^-(z) E^+(z) z^{m.n1 + n.m1}` on the
//! sector `(m1, n1)`, where `E^{-+}` are the exponentials of the nonzero modes
//! of `h = m.B + n.A`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Zero};

use crate::fock::{
    apply_combination, apply_word, dot, Convention, GenId, GeneratorSystem, ModeSymbol, Monomial, Sector, State,
};
use crate::rational::{floor_i64, half, q, Q};
use crate::superconf::N2Fields;
use crate::toric::Fan;

/// Which sector-shift operator is used by the vertex operators.
#[derive(Clone, Debug)]
pub enum Variant {
    Full,
    SigmaDeformed(Arc<Fan>),
}

/// `Fock_{M+N}` of rank `r = rank(M)` with `deg = deg* = e_r`.
pub fn lattice_system(rank: usize) -> GeneratorSystem {
    lattice_system_with(rank, None)
}

pub fn lattice_system_with(rank: usize, fan: Option<Arc<Fan>>) -> GeneratorSystem {
    assert!(rank >= 1, "lattice rank must be positive");
    let unit = |i: usize| {
        let mut v = vec![0i64; 2 * rank];
        v[i] = 1;
        v
    };
    let mut b = GeneratorSystem::builder(&format!("lattice({rank})"));
    for i in 0..rank {
        b = b.generator_with_momentum(&format!("A{}", i + 1), Convention::BosonStandard, q(1), unit(i));
    }
    for i in 0..rank {
        b = b.generator_with_momentum(&format!("B{}", i + 1), Convention::BosonStandard, q(1), unit(rank + i));
    }
    for i in 0..rank {
        b = b.generator(&format!("Phi{}", i + 1), Convention::Fermion, half());
    }
    for i in 0..rank {
        b = b.generator(&format!("Psi{}", i + 1), Convention::Fermion, half());
    }
    for i in 1..=rank {
        b = b
            .pair(&format!("A{i}"), &format!("B{i}"), q(1))
            .pair(&format!("Phi{i}"), &format!("Psi{i}"), q(1));
    }
    let mut deg = vec![0i64; rank];
    deg[rank - 1] = 1;
    let sys = b.lattice(rank, deg.clone(), deg).build().expect("lattice system");
    sys.with_deformation(fan)
}

/// Generator ids of `A_i`, `B_i`, `Phi_i`, `Psi_i` (0-based `i`).
pub fn gen_a(i: usize) -> GenId {
    i as GenId
}

pub fn gen_b(rank: usize, i: usize) -> GenId {
    (rank + i) as GenId
}

pub fn gen_phi(rank: usize, i: usize) -> GenId {
    (2 * rank + i) as GenId
}

pub fn gen_psi(rank: usize, i: usize) -> GenId {
    (3 * rank + i) as GenId
}

pub fn cocycle_sign(m: &[i64], n1: &[i64]) -> i64 {
    if dot(m, n1).rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// The sector shift `gamma_{m,n}`; in the deformed variant a term in sector
/// `(m1, n1)` survives only when `n` and `n1` lie in a common cone.
pub fn gamma(sys: &GeneratorSystem, m: &[i64], n: &[i64], variant: &Variant, s: &State) -> State {
    let by = Sector::from_parts(m, n);
    let rank = sys.lattice().expect("lattice system").rank;
    let mut out = State::zero();
    for (mono, c) in s.terms() {
        if let Variant::SigmaDeformed(fan) = variant {
            let n1 = &mono.sector.0[rank..];
            if !fan.in_common_cone(n, n1) {
                continue;
            }
        }
        out.add_term(mono.with_sector(mono.sector.shifted(&by)), c.clone());
    }
    out
}

/// The modes of `h = m.B + n.A` at index `k` as a linear combination.
fn h_modes(rank: usize, m: &[i64], n: &[i64], k: i64) -> Vec<(ModeSymbol, Q)> {
    let mut out = Vec::new();
    for i in 0..rank {
        if m[i] != 0 {
            out.push((ModeSymbol::new(gen_b(rank, i), k), q(m[i])));
        }
        if n[i] != 0 {
            out.push((ModeSymbol::new(gen_a(i), k), q(n[i])));
        }
    }
    out
}

/// `|lambda>_(j) v`: the mode of `Y(|lambda>, z)` multiplying `z^{-j-1}`.
pub fn vertex_operator_mode(sys: &GeneratorSystem, lambda: &Sector, j: i64, v: &Monomial) -> State {
    vertex_operator_modes(sys, lambda, v, j, j).pop().unwrap_or_else(State::zero)
}

/// `|lambda>_(j) v` for `j_lo <= j <= j_hi`, sharing the expansion of `E^+(z) v`.
pub fn vertex_operator_modes(sys: &GeneratorSystem, lambda: &Sector, v: &Monomial, j_lo: i64, j_hi: i64) -> Vec<State> {
    let len = (j_hi - j_lo + 1).max(0) as usize;
    let lat = sys.lattice().expect("lattice vertex operator needs a lattice system");
    let rank = lat.rank;
    let (m, n) = lat.split(lambda);
    let (m1, n1) = lat.split(&v.sector);
    if let Some(fan) = &lat.deformation {
        if !lambda.is_zero() && !fan.in_common_cone(n, n1) {
            return vec![State::zero(); len];
        }
    }
    let p = dot(m, n1) + dot(n, m1);
    let sign = q(cocycle_sign(m, n1));
    let spare = sys.monomial_weight(v) - sys.sector_weight(&v.sector);
    let smax = floor_i64(&spare);
    // U_s: coefficient of z^{-s} in E^+(z) v.
    let mut us: Vec<State> = vec![State::from_monomial(v.clone())];
    for s in 1..=smax.max(0) {
        let mut acc = State::zero();
        for k in 1..=s {
            let prev = &us[(s - k) as usize];
            if prev.is_zero() {
                continue;
            }
            acc.add_state(&apply_combination(sys, &h_modes(rank, m, n, k), prev));
        }
        us.push(acc.scaled(&(-Q::one() / q(s))));
    }
    // |lambda>_(j) v = sum_s [z^{s-j-1-p}] E^-(z) U_s
    let target = v.sector.shifted(lambda);
    let rtop = -j_lo - 1 - p + us.len() as i64 - 1;
    let mut out = vec![State::zero(); len];
    if rtop < 0 {
        return out;
    }
    let series = creator_series(rank, m, n, rtop as usize);
    for (s, u) in us.iter().enumerate() {
        for (mono, c) in u.terms() {
            let c = c * &sign;
            for (idx, slot) in out.iter_mut().enumerate() {
                let r = -(j_lo + idx as i64) - 1 - p + s as i64;
                if r < 0 {
                    continue;
                }
                for (f, cf) in &series[r as usize] {
                    slot.add_term(Monomial::from_sorted(mul_factors(mono.factors(), f), target.clone()), &c * cf);
                }
            }
        }
    }
    out
}

type Factors = Vec<(ModeSymbol, u32)>;

/// Product of two canonical words of commuting creators.
fn mul_factors(a: &[(ModeSymbol, u32)], b: &[(ModeSymbol, u32)]) -> Factors {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i >= a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            out.push((a[i].0, a[i].1 + b[j].1));
            i += 1;
            j += 1;
        }
    }
    out
}

type Series = Arc<Vec<Vec<(Factors, Q)>>>;

thread_local! {
    static SERIES: RefCell<HashMap<(usize, Vec<i64>), Series>> = RefCell::new(HashMap::new());
}

/// Coefficients of `z^r`, `r <= rmax`, in `E^-(z) = exp(sum_k h_(-k) z^k / k)`
/// as polynomials in the (commuting) creators `A_(-k)`, `B_(-k)`.
fn creator_series(rank: usize, m: &[i64], n: &[i64], rmax: usize) -> Series {
    let key = (rank, [m, n].concat());
    if let Some(hit) = SERIES.with(|c| c.borrow().get(&key).cloned()) {
        if hit.len() > rmax {
            return hit;
        }
    }
    let mut polys: Vec<BTreeMap<Factors, Q>> = vec![BTreeMap::from([(Vec::new(), Q::one())])];
    for t in 1..=rmax {
        let mut acc: BTreeMap<Factors, Q> = BTreeMap::new();
        for k in 1..=t {
            for (sym, coeff) in h_modes(rank, m, n, -(k as i64)) {
                for (f, c) in &polys[t - k] {
                    let prod = mul_factors(f, &[(sym, 1)]);
                    *acc.entry(prod).or_insert_with(Q::zero) += c * &coeff;
                }
            }
        }
        let scale = Q::one() / q(t as i64);
        acc.retain(|_, c| !c.is_zero());
        for c in acc.values_mut() {
            *c *= &scale;
        }
        polys.push(acc);
    }
    let series: Series = Arc::new(polys.into_iter().map(|p| p.into_iter().collect()).collect());
    SERIES.with(|c| c.borrow_mut().insert(key, series.clone()));
    series
}

/// `L_CY[0]` eigenvalue of `|m, n>`.
pub fn sector_weight(sys: &GeneratorSystem, m: &[i64], n: &[i64]) -> Q {
    sys.sector_weight(&Sector::from_parts(m, n))
}

/// `J_CY[0]` eigenvalue of `|m, n>`: `deg.n - deg*.m`.
pub fn sector_charge(sys: &GeneratorSystem, s: &Sector) -> Q {
    let lat = sys.lattice().expect("lattice system");
    let (m, n) = lat.split(s);
    q(dot(&lat.deg, n) - dot(&lat.deg_star, m))
}

fn word_state(sys: &GeneratorSystem, word: &[ModeSymbol]) -> State {
    apply_word(sys, word, &sys.vacuum()).expect("lattice word")
}

/// The Calabi-Yau N=2 fields over the sector `(0, 0)`.
pub fn build_cy_n2(sys: &GeneratorSystem) -> N2Fields {
    let lat = sys.lattice().expect("lattice system");
    let r = lat.rank;
    assert!(r >= 2, "rank(M) must be at least 2");
    let md = |g: GenId, k: i64| ModeSymbol::new(g, k);
    let last = r - 1;
    let mut gp = State::zero();
    let mut gm = State::zero();
    let mut j = State::zero();
    let mut l = State::zero();
    let h = half();
    for i in 0..r {
        gp.add_state(&word_state(sys, &[md(gen_a(i), -1), md(gen_phi(r, i), -1)]));
        gm.add_state(&word_state(sys, &[md(gen_b(r, i), -1), md(gen_psi(r, i), -1)]));
        j.add_state(&word_state(sys, &[md(gen_phi(r, i), -1), md(gen_psi(r, i), -1)]));
        l.add_state(&word_state(sys, &[md(gen_b(r, i), -1), md(gen_a(i), -1)]));
        l.add_scaled(&word_state(sys, &[md(gen_phi(r, i), -2), md(gen_psi(r, i), -1)]), &h);
        l.add_scaled(&word_state(sys, &[md(gen_phi(r, i), -1), md(gen_psi(r, i), -2)]), &-h.clone());
    }
    gp.add_scaled(&word_state(sys, &[md(gen_phi(r, last), -2)]), &-Q::one());
    gm.add_scaled(&word_state(sys, &[md(gen_psi(r, last), -2)]), &-Q::one());
    j.add_state(&word_state(sys, &[md(gen_b(r, last), -1)]));
    j.add_scaled(&word_state(sys, &[md(gen_a(last), -1)]), &-Q::one());
    l.add_scaled(&word_state(sys, &[md(gen_a(last), -2)]), &-h.clone());
    l.add_scaled(&word_state(sys, &[md(gen_b(r, last), -2)]), &-h);
    N2Fields {
        gplus: gp,
        gminus: gm,
        j,
        l,
        c_hat: q(r as i64 - 2),
    }
}

/// Exchanges the roles of `M` and `N`: `A <-> B`, `Phi <-> Psi`, `(m, n) -> (n, m)`.
pub fn mirror_swap(sys: &GeneratorSystem, s: &State) -> State {
    let rank = sys.lattice().expect("lattice system").rank;
    let swap_gen = |g: GenId| -> GenId {
        let g = g as usize;
        let (block, i) = (g / rank, g % rank);
        let nb = match block {
            0 => 1,
            1 => 0,
            2 => 3,
            _ => 2,
        };
        (nb * rank + i) as GenId
    };
    let mut out = State::zero();
    for (mono, c) in s.terms() {
        let word: Vec<ModeSymbol> = mono
            .word()
            .into_iter()
            .map(|x| ModeSymbol::new(swap_gen(x.generator), x.index))
            .collect();
        let (m, n) = mono.sector.0.split_at(rank);
        let base = Sector::from_parts(n, m);
        let st = apply_word(sys, &word, &State::from_monomial(Monomial::base(base))).expect("swapped word");
        out.add_scaled(&st, c);
    }
    out
}

/// Lattice base vector `|m, n>`.
pub fn base(sys: &GeneratorSystem, m: &[i64], n: &[i64]) -> State {
    sys.base_state(Sector::from_parts(m, n)).expect("sector shape")
}

/// Whether a state has support only in sector `(0, 0)`.
pub fn in_vacuum_sector(s: &State) -> bool {
    s.terms().all(|(m, _)| m.sector.is_zero())
}
