//! Products `a_(j) b`, singular OPE parts, axiom checks and a Wick oracle.
//!
//! `a_(j) b` is computed by peeling the leftmost creator off `a`:
//! for `a = x_(n) a'` the Borcherds identity gives
//!
//! ```text
//! (x_(n) a')_(j) v = sum_{i>=0} (-1)^i C(n,i) [ x_(n-i) a'_(j+i) v
//!                                   - p(x,a') (-1)^n a'_(n+j-i) x_(i) v ]
//! ```
//!
//! and both sums are finite because weights in each sector are bounded below.
//! Base cases are the vacuum (identity field) and lattice base vectors.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::fock::{
    apply_mode, enumerate_basis, render_state, EnumOptions, FockError, GeneratorSystem, ModeSymbol, Monomial,
    Parity, State,
};
use crate::lattice;
use crate::rational::{binom_q, floor_i64, q, sign_q, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpeError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("state has mixed parity")]
    MixedParity,
    #[error("no conformal vector registered for system `{0}`")]
    NoConformal(String),
    #[error("the Wick oracle only handles free fields on the vacuum sector")]
    NotFreeField,
}

pub type Result<T> = std::result::Result<T, OpeError>;

/// Memoizing evaluator of `a_(j) v` for a fixed system.
pub struct OpeEngine<'a> {
    sys: &'a GeneratorSystem,
    cache: RefCell<HashMap<(Monomial, i64, Monomial), State>>,
}

impl<'a> OpeEngine<'a> {
    pub fn new(sys: &'a GeneratorSystem) -> Self {
        OpeEngine {
            sys,
            cache: RefCell::new(HashMap::new()),
        }
    }

    pub fn system(&self) -> &'a GeneratorSystem {
        self.sys
    }

    /// `a_(j) b` for arbitrary states.
    pub fn mode(&self, a: &State, j: i64, b: &State) -> State {
        let mut out = State::zero();
        for (ma, ca) in a.terms() {
            for (mb, cb) in b.terms() {
                let r = self.monomial_mode(ma, j, mb);
                out.add_scaled(&r, &(ca * cb));
            }
        }
        out
    }

    pub fn monomial_mode(&self, a: &Monomial, j: i64, v: &Monomial) -> State {
        let key = (a.clone(), j, v.clone());
        if let Some(hit) = self.cache.borrow().get(&key) {
            return hit.clone();
        }
        let r = self.compute(a, j, v);
        self.cache.borrow_mut().insert(key, r.clone());
        r
    }

    fn compute(&self, a: &Monomial, j: i64, v: &Monomial) -> State {
        let sys = self.sys;
        let Some((x, rest)) = a.split_first() else {
            if a.sector.is_zero() {
                return if j == -1 {
                    State::from_monomial(v.clone())
                } else {
                    State::zero()
                };
            }
            return lattice::vertex_operator_mode(sys, &a.sector, j, v);
        };
        let n = x.index;
        let gx = &sys.generators()[x.generator as usize];
        let wt_rest = sys.monomial_weight(&rest);
        let wt_v = sys.monomial_weight(v);
        let joint = rest.sector.shifted(&v.sector);
        let min_joint = sys.sector_weight(&joint);
        let mut out = State::zero();

        let bound1 = &wt_rest + &wt_v - q(1 + j) - &min_joint;
        if !bound1.is_negative() {
            for i in 0..=floor_i64(&bound1) {
                let inner = self.monomial_mode(&rest, j + i, v);
                if inner.is_zero() {
                    continue;
                }
                let c = sign_q(i % 2 != 0) * binom_q(n, i);
                let moved = apply_mode(sys, ModeSymbol::new(x.generator, n - i), &inner).expect("registered mode");
                out.add_scaled(&moved, &c);
            }
        }

        let min_v = sys.sector_weight(&v.sector);
        let bound2 = &wt_v - &min_v + &gx.weight - Q::one();
        if !bound2.is_negative() {
            let both_odd = gx.parity().is_odd() && sys.monomial_parity(&rest).is_odd();
            let vs = State::from_monomial(v.clone());
            for i in 0..=floor_i64(&bound2) {
                let w = apply_mode(sys, ModeSymbol::new(x.generator, i), &vs).expect("registered mode");
                if w.is_zero() {
                    continue;
                }
                let negative = (i % 2 != 0) ^ both_odd ^ (n % 2 != 0);
                // overall minus sign in front of the second sum
                let c = -sign_q(negative) * binom_q(n, i);
                for (mw, cw) in w.terms() {
                    let r = self.monomial_mode(&rest, n + j - i, mw);
                    out.add_scaled(&r, &(&c * cw));
                }
            }
        }
        out
    }

    /// `T v = v_(-2)|0>`.
    pub fn translate(&self, v: &State) -> State {
        let vac = self.sys.vacuum();
        self.mode(v, -2, &vac)
    }
}

/// `a_(j) b`.
pub fn field_mode_apply(sys: &GeneratorSystem, a: &State, j: i64, b: &State) -> State {
    OpeEngine::new(sys).mode(a, j, b)
}

/// Singular part of `Y(a,z) Y(b,w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct OpeResult {
    /// `coefficients[j] = a_(j) b`, multiplying `(z-w)^{-j-1}`; trailing zeros trimmed.
    pub coefficients: Vec<State>,
    /// Exponent of the leading power of `(z-w)`; positive means a zero of that order.
    pub leading_order: i64,
}

impl OpeResult {
    pub fn is_regular(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficient(&self, j: usize) -> State {
        self.coefficients.get(j).cloned().unwrap_or_default()
    }

    /// `1/(z-w)^{j+1} * <state>` lines, most singular first.
    pub fn render(&self, sys: &GeneratorSystem) -> String {
        let mut out = String::new();
        if self.coefficients.is_empty() {
            let _ = writeln!(out, "regular (leading order {})", self.leading_order);
            return out;
        }
        for (j, c) in self.coefficients.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let _ = writeln!(out, "1/(z-w)^{} * ({})", j + 1, render_inline(sys, c));
        }
        out
    }
}

pub fn render_inline(sys: &GeneratorSystem, s: &State) -> String {
    render_state(sys, s).trim_end().replace('\n', " + ")
}

fn state_weight_bound(sys: &GeneratorSystem, s: &State) -> Option<Q> {
    s.terms().map(|(m, _)| sys.monomial_weight(m)).max()
}

/// Largest `j` for which `a_(j) b` can be nonzero.
fn pole_bound(sys: &GeneratorSystem, a: &State, b: &State) -> Option<i64> {
    let mut best: Option<i64> = None;
    for (ma, _) in a.terms() {
        for (mb, _) in b.terms() {
            let joint = ma.sector.shifted(&mb.sector);
            let bound = sys.monomial_weight(ma) + sys.monomial_weight(mb) - Q::one() - sys.sector_weight(&joint);
            let f = floor_i64(&bound);
            best = Some(best.map_or(f, |x: i64| x.max(f)));
        }
    }
    best
}

/// How far below `j = -1` the leading-order scan looks for a nonzero product.
const REGULAR_SCAN: i64 = 32;

pub fn singular_ope_with(engine: &OpeEngine<'_>, a: &State, b: &State) -> OpeResult {
    let sys = engine.system();
    let Some(bound) = pole_bound(sys, a, b) else {
        return OpeResult {
            coefficients: Vec::new(),
            leading_order: 0,
        };
    };
    let mut coefficients = Vec::new();
    for j in 0..=bound.max(-1) {
        coefficients.push(engine.mode(a, j, b));
    }
    while coefficients.last().is_some_and(State::is_zero) {
        coefficients.pop();
    }
    let leading_order = if coefficients.is_empty() {
        let mut found = 0;
        let top = bound.min(-1);
        for j in (top - REGULAR_SCAN..=top).rev() {
            if !engine.mode(a, j, b).is_zero() {
                found = -(j + 1);
                break;
            }
        }
        found
    } else {
        -(coefficients.len() as i64)
    };
    OpeResult {
        coefficients,
        leading_order,
    }
}

pub fn singular_ope(sys: &GeneratorSystem, a: &State, b: &State) -> OpeResult {
    singular_ope_with(&OpeEngine::new(sys), a, b)
}

fn parity_of(sys: &GeneratorSystem, s: &State) -> Result<Parity> {
    if s.is_zero() {
        return Ok(Parity::Even);
    }
    s.parity(sys).ok_or(OpeError::MixedParity)
}

/// Mode window used by the axiom checks: indices `-w..=w` around each field's weight.
pub const DEFAULT_MODE_WINDOW: i64 = 4;

/// Locality via the commutator formula on a truncation:
/// `a_(m) b_(n) v - p b_(n) a_(m) v = sum_j C(m,j) (a_(j) b)_(m+n-j) v`.
pub fn check_locality_on(
    engine: &OpeEngine<'_>,
    a: &State,
    b: &State,
    basis: &[Monomial],
    window: i64,
) -> Result<bool> {
    let sys = engine.system();
    let pa = parity_of(sys, a)?;
    let pb = parity_of(sys, b)?;
    let p = if pa.is_odd() && pb.is_odd() { -Q::one() } else { Q::one() };
    let ope = singular_ope_with(engine, a, b);
    let centre = |s: &State| state_weight_bound(sys, s).map_or(0, |w| floor_i64(&w));
    let (ca, cb) = (centre(a), centre(b));
    for v in basis {
        let vs = State::from_monomial(v.clone());
        for m in ca - window..=ca + window {
            let am_v = engine.mode(a, m, &vs);
            for n in cb - window..=cb + window {
                let bn_v = engine.mode(b, n, &vs);
                let mut lhs = engine.mode(a, m, &bn_v);
                lhs.add_scaled(&engine.mode(b, n, &am_v), &-p.clone());
                let mut rhs = State::zero();
                for (j, c) in ope.coefficients.iter().enumerate() {
                    let j = j as i64;
                    let bin = binom_q(m, j);
                    if bin.is_zero() || c.is_zero() {
                        continue;
                    }
                    rhs.add_scaled(&engine.mode(c, m + n - j, &vs), &bin);
                }
                if lhs != rhs {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Locality on the vacuum-sector truncation of weight `<= cutoff`.
pub fn check_locality(sys: &GeneratorSystem, a: &State, b: &State, cutoff: &Q) -> Result<bool> {
    let basis = enumerate_basis(sys, cutoff, &sys.zero_sector(), &EnumOptions::default())?;
    check_locality_on(&OpeEngine::new(sys), a, b, &basis, DEFAULT_MODE_WINDOW)
}

/// Translation covariance: `[L_(0), a_(n)] = -n a_(n-1)` and
/// `(a_(-2)|0>)_(n) = -n a_(n-1)` on the weight `<= cutoff` truncation.
pub fn check_translation(sys: &GeneratorSystem, a: &State, cutoff: &Q) -> Result<bool> {
    let l = sys
        .conformal()
        .ok_or_else(|| OpeError::NoConformal(sys.name.clone()))?
        .clone();
    let engine = OpeEngine::new(sys);
    let basis = enumerate_basis(sys, cutoff, &sys.zero_sector(), &EnumOptions::default())?;
    let ta = engine.translate(a);
    if engine.mode(&l, 0, a) != ta {
        return Ok(false);
    }
    let centre = state_weight_bound(sys, a).map_or(0, |w| floor_i64(&w));
    for v in &basis {
        let vs = State::from_monomial(v.clone());
        let tv = engine.mode(&l, 0, &vs);
        for n in centre - DEFAULT_MODE_WINDOW..=centre + DEFAULT_MODE_WINDOW {
            let an_v = engine.mode(a, n, &vs);
            let lhs = engine.mode(&l, 0, &an_v).minus(&engine.mode(a, n, &tv));
            let rhs = engine.mode(a, n - 1, &vs).scaled(&q(-n));
            if lhs != rhs || engine.mode(&ta, n, &vs) != rhs {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// A factor `d^k x / k!` of a normally ordered free-field word.
#[derive(Clone, Copy)]
struct WickField {
    generator: u16,
    derivative: i64,
}

fn wick_fields(m: &Monomial) -> Vec<WickField> {
    m.word()
        .into_iter()
        .map(|s| WickField {
            generator: s.generator,
            derivative: -s.index - 1,
        })
        .collect()
}

/// Independent singular OPE by summing over all partial contractions
/// between the normally ordered words of `a` and `b`.
pub fn wick_oracle(sys: &GeneratorSystem, a: &State, b: &State) -> Result<OpeResult> {
    if sys.lattice().is_some()
        || a.terms().chain(b.terms()).any(|(m, _)| !m.sector.0.is_empty())
    {
        return Err(OpeError::NotFreeField);
    }
    let mut poles: Vec<State> = Vec::new();
    for (ma, ca) in a.terms() {
        let fa = wick_fields(ma);
        for (mb, cb) in b.terms() {
            let fb = wick_fields(mb);
            let mut matched: Vec<Option<usize>> = vec![None; fa.len()];
            let mut used = vec![false; fb.len()];
            wick_rec(sys, &fa, &fb, 0, &mut matched, &mut used, &(ca * cb), &mut poles);
        }
    }
    while poles.last().is_some_and(State::is_zero) {
        poles.pop();
    }
    let leading_order = -(poles.len() as i64);
    Ok(OpeResult {
        coefficients: poles,
        leading_order,
    })
}

#[allow(clippy::too_many_arguments)]
fn wick_rec(
    sys: &GeneratorSystem,
    fa: &[WickField],
    fb: &[WickField],
    i: usize,
    matched: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    coeff: &Q,
    poles: &mut Vec<State>,
) {
    if i == fa.len() {
        wick_term(sys, fa, fb, matched, coeff, poles);
        return;
    }
    matched[i] = None;
    wick_rec(sys, fa, fb, i + 1, matched, used, coeff, poles);
    for k in 0..fb.len() {
        if used[k] || sys.contraction(fa[i].generator, fb[k].generator).is_none() {
            continue;
        }
        used[k] = true;
        matched[i] = Some(k);
        wick_rec(sys, fa, fb, i + 1, matched, used, coeff, poles);
        matched[i] = None;
        used[k] = false;
    }
}

fn is_odd_gen(sys: &GeneratorSystem, g: u16) -> bool {
    sys.generators()[g as usize].parity().is_odd()
}

/// Koszul sign of moving the contracted `b` fields next to their partners,
/// with uncontracted `a` fields kept before uncontracted `b` fields.
fn wick_sign(sys: &GeneratorSystem, fa: &[WickField], fb: &[WickField], matched: &[Option<usize>]) -> bool {
    // Sequence of odd items in original order (a's then b's), labelled by target position.
    let mut target = Vec::new();
    let mut slot = 0usize;
    let mut b_slot = vec![usize::MAX; fb.len()];
    let mut a_slot = vec![usize::MAX; fa.len()];
    for (i, m) in matched.iter().enumerate() {
        if let Some(k) = m {
            a_slot[i] = slot;
            b_slot[*k] = slot + 1;
            slot += 2;
        }
    }
    for (i, m) in matched.iter().enumerate() {
        if m.is_none() {
            a_slot[i] = slot;
            slot += 1;
        }
    }
    for s in b_slot.iter_mut() {
        if *s == usize::MAX {
            *s = slot;
            slot += 1;
        }
    }
    for (i, f) in fa.iter().enumerate() {
        if is_odd_gen(sys, f.generator) {
            target.push(a_slot[i]);
        }
    }
    for (k, f) in fb.iter().enumerate() {
        if is_odd_gen(sys, f.generator) {
            target.push(b_slot[k]);
        }
    }
    let mut inversions = 0usize;
    for x in 0..target.len() {
        for y in x + 1..target.len() {
            if target[x] > target[y] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 1
}

fn wick_term(
    sys: &GeneratorSystem,
    fa: &[WickField],
    fb: &[WickField],
    matched: &[Option<usize>],
    coeff: &Q,
    poles: &mut Vec<State>,
) {
    // Product of contracted two-point functions: scalar * (z-w)^{-order}.
    let mut scalar = coeff.clone();
    let mut order = 0i64;
    let mut b_used = vec![false; fb.len()];
    for (i, m) in matched.iter().enumerate() {
        if let Some(k) = m {
            let (x, y) = (fa[i], fb[*k]);
            let ct = sys.contraction(x.generator, y.generator).expect("contracted pair");
            let p = ct.order + 1;
            let (kd, ld) = (x.derivative, y.derivative);
            scalar *= &ct.coeff * sign_q(kd % 2 != 0) * binom_q(p + kd - 1, kd) * binom_q(p + kd + ld - 1, ld);
            order += p + kd + ld;
            b_used[*k] = true;
        }
    }
    if order == 0 {
        return;
    }
    if wick_sign(sys, fa, fb, matched) {
        scalar = -scalar;
    }
    let free_a: Vec<WickField> = fa
        .iter()
        .zip(matched)
        .filter(|(_, m)| m.is_none())
        .map(|(f, _)| *f)
        .collect();
    let free_b: Vec<WickField> = fb
        .iter()
        .zip(&b_used)
        .filter(|(_, u)| !**u)
        .map(|(f, _)| *f)
        .collect();
    // Taylor shifts t_i of the remaining a-fields; only powers that stay singular matter.
    let mut shifts = vec![0i64; free_a.len()];
    taylor_rec(sys, &free_a, &free_b, 0, order, &mut shifts, &scalar, poles);
}

#[allow(clippy::too_many_arguments)]
fn taylor_rec(
    sys: &GeneratorSystem,
    free_a: &[WickField],
    free_b: &[WickField],
    i: usize,
    remaining: i64,
    shifts: &mut Vec<i64>,
    scalar: &Q,
    poles: &mut Vec<State>,
) {
    if i == free_a.len() {
        // term multiplies (z-w)^{-remaining}; pole index j = remaining - 1
        let j = (remaining - 1) as usize;
        let mut c = scalar.clone();
        let mut word = Vec::new();
        for (f, t) in free_a.iter().zip(shifts.iter()) {
            c *= binom_q(f.derivative + t, *t);
            word.push(ModeSymbol::new(f.generator, -(f.derivative + t) - 1));
        }
        for f in free_b {
            word.push(ModeSymbol::new(f.generator, -f.derivative - 1));
        }
        let st = crate::fock::apply_word(sys, &word, &sys.vacuum()).expect("free-field word");
        while poles.len() <= j {
            poles.push(State::zero());
        }
        poles[j].add_scaled(&st, &c);
        return;
    }
    for t in 0..remaining {
        shifts[i] = t;
        taylor_rec(sys, free_a, free_b, i + 1, remaining - t, shifts, scalar, poles);
    }
    shifts[i] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::systems::*;
    use crate::fock::parse_state;
    use crate::rational::q_frac;

    fn d1(sys: &GeneratorSystem) -> State {
        parse_state(sys, "1 * d[-1] |0>").unwrap()
    }

    #[test]
    fn boson_two_point() {
        let sys = free_boson();
        let a = d1(&sys);
        assert_eq!(field_mode_apply(&sys, &a, 1, &a), sys.vacuum());
        let ope = singular_ope(&sys, &a, &a);
        assert_eq!(ope.leading_order, -2);
        assert!(ope.coefficients[0].is_zero());
        assert_eq!(ope.coefficients[1], sys.vacuum());
        assert_eq!(wick_oracle(&sys, &a, &a).unwrap(), ope);
    }

    #[test]
    fn vacuum_axiom() {
        let sys = free_boson();
        let b = parse_state(&sys, "2 * d[-1]^2 d[-3] |0>").unwrap();
        let vac = sys.vacuum();
        assert_eq!(field_mode_apply(&sys, &vac, -1, &b), b);
        assert!(field_mode_apply(&sys, &vac, 0, &b).is_zero());
        assert_eq!(field_mode_apply(&sys, &b, -1, &vac), b);
        assert!(field_mode_apply(&sys, &b, 2, &vac).is_zero());
    }

    #[test]
    fn virasoro_quartic_pole() {
        let sys = free_boson();
        let l = parse_state(&sys, "1/2 * d[-1]^2 |0>").unwrap();
        assert_eq!(field_mode_apply(&sys, &l, 3, &l), sys.vacuum().scaled(&q_frac(1, 2)));
        let wick = wick_oracle(&sys, &l, &l).unwrap();
        assert_eq!(wick, singular_ope(&sys, &l, &l));
        assert_eq!(wick.coefficients[1], l.scaled(&q(2)));
    }

    #[test]
    fn fermion_opes() {
        let sys = fermion_pairs(1);
        let phi = parse_state(&sys, "1 * phi1[-1/2] |0>").unwrap();
        let psi = parse_state(&sys, "1 * psi1[-1/2] |0>").unwrap();
        assert!(singular_ope(&sys, &phi, &phi).is_regular());
        let ope = singular_ope(&sys, &phi, &psi);
        assert_eq!(ope.leading_order, -1);
        assert_eq!(ope.coefficients, vec![sys.vacuum()]);
        assert_eq!(wick_oracle(&sys, &phi, &psi).unwrap(), ope);
    }

    #[test]
    fn locality_and_translation() {
        let mut sys = free_boson();
        let a = d1(&sys);
        assert!(check_locality(&sys, &a, &a, &q(5)).unwrap());
        assert!(check_locality(&sys, &sys.vacuum(), &a, &q(3)).unwrap());
        assert!(matches!(check_translation(&sys, &a, &q(3)), Err(OpeError::NoConformal(_))));
        sys.set_conformal(parse_state(&sys, "1/2 * d[-1]^2 |0>").unwrap());
        assert!(check_translation(&sys, &a, &q(4)).unwrap());
        assert!(check_translation(&sys, &sys.vacuum(), &q(4)).unwrap());
        let d2 = parse_state(&sys, "1 * d[-2] |0>").unwrap();
        assert!(check_translation(&sys, &d2, &q(4)).unwrap());
    }

    #[test]
    fn derivative_field_ope() {
        let sys = free_boson();
        let a = d1(&sys);
        let b = parse_state(&sys, "1 * d[-2] |0>").unwrap();
        let ope = singular_ope(&sys, &a, &b);
        assert_eq!(ope.leading_order, -3);
        assert_eq!(ope.coefficients[2], sys.vacuum().scaled(&q(2)));
        assert_eq!(wick_oracle(&sys, &a, &b).unwrap(), ope);
        assert!(check_locality(&sys, &a, &b, &q(3)).unwrap());
    }
}
