//! Fock spaces of free bosons and fermions, optionally tensored with a
//! group algebra of lattice charges.
//!
//! Every field is indexed uniformly by `Y(x, z) = sum_n x_(n) z^{-n-1}`. With
//! that indexing the creators are exactly the modes `x_(n)` with `n < 0`, for
//! standard bosons, MSV bosons and fermions alike. The bracketed index
//! `x[k]` of the weight-graded notation is only a display layer:
//! `x[k] = x_(k + h - 1)` where `h` is the declared weight of `x`.
//!
//! Two generators `x, y` of a free system have a single contraction
//! `x_(j) y = kappa |0>`, where `j = h_x + h_y - 1`. The mode brackets follow:
//! `[x_(m), y_(n)]_{-+} = kappa * C(m, j) * delta_{m + n - j, -1}`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{binom_q, floor_i64, fmt_q, half, parse_q, q, Q};
use crate::toric::Fan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("generator id {0} is not registered")]
    UnknownGeneratorId(usize),
    #[error("index {index} has the wrong integrality for generator `{generator}`")]
    WrongIntegrality { generator: String, index: String },
    #[error("state is not homogeneous: weights {0} and {1}")]
    NonHomogeneous(String, String),
    #[error("zero state has no weight")]
    ZeroState,
    #[error("weight cutoff must be non-negative, got {0}")]
    NegativeCutoff(String),
    #[error("sector has length {got}, system expects {expected}")]
    SectorShape { expected: usize, got: usize },
    #[error("inconsistent pairing: {0}")]
    BadPairing(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, FockError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn is_odd(self) -> bool {
        matches!(self, Parity::Odd)
    }

    pub fn add(self, other: Parity) -> Parity {
        if self.is_odd() ^ other.is_odd() {
            Parity::Odd
        } else {
            Parity::Even
        }
    }
}

/// Mode convention of a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `[x[m], y[n]] = m (x.y) delta_{m+n}`, all `x[n>=0]` annihilate.
    BosonStandard,
    /// `[a[m], b[n]] = (a.b) delta_{m+n}`, `b[0]` is a creator.
    BosonMsv,
    /// `{x[m], y[n]} = (x.y) delta_{m+n}`, half-integer bracket indices.
    Fermion,
}

impl Convention {
    pub fn parity(self) -> Parity {
        match self {
            Convention::Fermion => Parity::Odd,
            _ => Parity::Even,
        }
    }
}

pub type GenId = u16;

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    pub name: String,
    pub convention: Convention,
    /// Conformal weight used for the bracket display and for the grading.
    pub weight: Q,
    /// Zero-mode action on a lattice sector: `x_(0)|s> = <momentum, s> |s>`.
    /// Empty when the zero mode annihilates every base vector.
    pub momentum: Vec<i64>,
}

impl Generator {
    pub fn parity(&self) -> Parity {
        self.convention.parity()
    }
}

/// `x_(order) y = coeff |0>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Contraction {
    pub order: i64,
    pub coeff: Q,
}

/// Lattice data for `Fock_{M+N}`: sectors are `(m, n)` stored as one vector
/// `m ++ n`, each half of length `rank`.
#[derive(Clone, Debug)]
pub struct LatticeStructure {
    pub rank: usize,
    pub deg: Vec<i64>,
    pub deg_star: Vec<i64>,
    /// Extended fan of the deformed product; `None` for the undeformed algebra.
    pub deformation: Option<Arc<Fan>>,
}

impl LatticeStructure {
    pub fn split<'a>(&self, s: &'a Sector) -> (&'a [i64], &'a [i64]) {
        s.0.split_at(self.rank)
    }

    /// `L_CY[0]` eigenvalue of `|m, n>`: `m.n + (deg*.m)/2 + (deg.n)/2`.
    pub fn sector_weight(&self, s: &Sector) -> Q {
        let (m, n) = self.split(s);
        let mn = dot(m, n);
        let lin = dot(&self.deg_star, m) + dot(&self.deg, n);
        q(mn) + q(lin) * half()
    }
}

pub fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A registered family of free generators with their pairing.
#[derive(Clone, Debug)]
pub struct GeneratorSystem {
    pub name: String,
    gens: Vec<Generator>,
    contractions: Vec<Vec<Option<Contraction>>>,
    lattice: Option<LatticeStructure>,
    conformal: Option<State>,
}

impl GeneratorSystem {
    pub fn builder(name: &str) -> SystemBuilder {
        SystemBuilder {
            name: name.to_string(),
            gens: Vec::new(),
            pairs: Vec::new(),
            lattice: None,
        }
    }

    pub fn generators(&self) -> &[Generator] {
        &self.gens
    }

    pub fn generator(&self, id: GenId) -> Result<&Generator> {
        self.gens
            .get(id as usize)
            .ok_or(FockError::UnknownGeneratorId(id as usize))
    }

    pub fn gen_id(&self, name: &str) -> Result<GenId> {
        self.gens
            .iter()
            .position(|g| g.name == name)
            .map(|i| i as GenId)
            .ok_or_else(|| FockError::UnknownGenerator(name.to_string()))
    }

    pub fn contraction(&self, x: GenId, y: GenId) -> Option<&Contraction> {
        self.contractions[x as usize][y as usize].as_ref()
    }

    pub fn lattice(&self) -> Option<&LatticeStructure> {
        self.lattice.as_ref()
    }

    pub fn sector_len(&self) -> usize {
        self.lattice.as_ref().map_or(0, |l| 2 * l.rank)
    }

    pub fn zero_sector(&self) -> Sector {
        Sector(vec![0; self.sector_len()])
    }

    pub fn conformal(&self) -> Option<&State> {
        self.conformal.as_ref()
    }

    pub fn set_conformal(&mut self, l: State) {
        self.conformal = Some(l);
    }

    /// The same system with the fan-deformed lattice product.
    pub fn with_deformation(&self, fan: Option<Arc<Fan>>) -> GeneratorSystem {
        let mut out = self.clone();
        if let Some(l) = out.lattice.as_mut() {
            l.deformation = fan;
        }
        out
    }

    pub fn check_sector(&self, s: &Sector) -> Result<()> {
        if s.0.len() != self.sector_len() {
            return Err(FockError::SectorShape {
                expected: self.sector_len(),
                got: s.0.len(),
            });
        }
        Ok(())
    }

    /// Lowest weight in a sector; creators never lower the weight.
    pub fn sector_weight(&self, s: &Sector) -> Q {
        match &self.lattice {
            Some(l) if !s.0.is_empty() => l.sector_weight(s),
            _ => Q::zero(),
        }
    }

    /// Weight added by the creator `x_(n)`: `h_x - n - 1`.
    pub fn mode_weight(&self, mode: ModeSymbol) -> Q {
        &self.gens[mode.generator as usize].weight - q(mode.index + 1)
    }

    pub fn mode_parity(&self, mode: ModeSymbol) -> Parity {
        self.gens[mode.generator as usize].parity()
    }

    /// Converts a bracket index `x[k]` to the uniform mode `x_(k + h - 1)`.
    pub fn mode(&self, name: &str, bracket_index: &Q) -> Result<ModeSymbol> {
        let id = self.gen_id(name)?;
        let shifted = bracket_index + &self.gens[id as usize].weight - Q::one();
        if !shifted.is_integer() {
            return Err(FockError::WrongIntegrality {
                generator: name.to_string(),
                index: fmt_q(bracket_index),
            });
        }
        Ok(ModeSymbol {
            index: floor_i64(&shifted),
            generator: id,
        })
    }

    /// Bracket index `k` of `x_(n)`, i.e. `n - h + 1`.
    pub fn bracket_index(&self, mode: ModeSymbol) -> Q {
        q(mode.index + 1) - &self.gens[mode.generator as usize].weight
    }

    pub fn monomial_weight(&self, m: &Monomial) -> Q {
        let mut w = self.sector_weight(&m.sector);
        for (s, e) in &m.factors {
            w += self.mode_weight(*s) * q(*e as i64);
        }
        w
    }

    pub fn monomial_parity(&self, m: &Monomial) -> Parity {
        let odd = m
            .factors
            .iter()
            .filter(|(s, e)| self.mode_parity(*s).is_odd() && e % 2 == 1)
            .count();
        if odd % 2 == 1 {
            Parity::Odd
        } else {
            Parity::Even
        }
    }

    pub fn vacuum(&self) -> State {
        State::from_monomial(Monomial::base(self.zero_sector()))
    }

    pub fn base_state(&self, sector: Sector) -> Result<State> {
        self.check_sector(&sector)?;
        Ok(State::from_monomial(Monomial::base(sector)))
    }

    /// `x_(n)` applied to the monomial, accumulated into `out` with weight `coeff`.
    pub(crate) fn apply_mode_monomial(
        &self,
        mode: ModeSymbol,
        mono: &Monomial,
        coeff: &Q,
        out: &mut State,
    ) {
        let x = mode.generator as usize;
        let x_odd = self.gens[x].parity().is_odd();
        if mode.index < 0 {
            // Creators (anti)commute with each other: insert at the canonical slot.
            let pos = mono.factors.partition_point(|(s, _)| *s < mode);
            let odd_before = mono.factors[..pos]
                .iter()
                .filter(|(s, _)| self.mode_parity(*s).is_odd())
                .count();
            let mut factors = mono.factors.clone();
            if pos < factors.len() && factors[pos].0 == mode {
                if x_odd {
                    return;
                }
                factors[pos].1 += 1;
            } else {
                factors.insert(pos, (mode, 1));
            }
            let c = if x_odd && odd_before % 2 == 1 {
                -coeff.clone()
            } else {
                coeff.clone()
            };
            out.add_term(
                Monomial {
                    factors,
                    sector: mono.sector.clone(),
                },
                c,
            );
            return;
        }
        // Annihilator or zero mode: move right, collecting central brackets.
        let mut negative = false;
        for (i, (y, e)) in mono.factors.iter().enumerate() {
            if let Some(ct) = self.contractions[x][y.generator as usize].as_ref() {
                if mode.index + y.index - ct.order == -1 {
                    let b = binom_q(mode.index, ct.order);
                    if !b.is_zero() {
                        let mut factors = mono.factors.clone();
                        if *e == 1 {
                            factors.remove(i);
                        } else {
                            factors[i].1 -= 1;
                        }
                        let mut c = coeff * &ct.coeff * b * q(*e as i64);
                        if negative {
                            c = -c;
                        }
                        out.add_term(
                            Monomial {
                                factors,
                                sector: mono.sector.clone(),
                            },
                            c,
                        );
                    }
                }
            }
            if x_odd && self.mode_parity(*y).is_odd() && e % 2 == 1 {
                negative = !negative;
            }
        }
        if mode.index == 0 && !self.gens[x].momentum.is_empty() && !mono.sector.0.is_empty() {
            let p = dot(&self.gens[x].momentum, &mono.sector.0);
            if p != 0 {
                let mut c = coeff * q(p);
                if negative {
                    c = -c;
                }
                out.add_term(mono.clone(), c);
            }
        }
    }

    pub(crate) fn check_mode(&self, mode: ModeSymbol) -> Result<()> {
        if (mode.generator as usize) < self.gens.len() {
            Ok(())
        } else {
            Err(FockError::UnknownGeneratorId(mode.generator as usize))
        }
    }
}

pub struct SystemBuilder {
    name: String,
    gens: Vec<Generator>,
    pairs: Vec<(GenId, GenId, Q)>,
    lattice: Option<LatticeStructure>,
}

impl SystemBuilder {
    pub fn generator(mut self, name: &str, convention: Convention, weight: Q) -> Self {
        self.gens.push(Generator {
            name: name.to_string(),
            convention,
            weight,
            momentum: Vec::new(),
        });
        self
    }

    pub fn generator_with_momentum(
        mut self,
        name: &str,
        convention: Convention,
        weight: Q,
        momentum: Vec<i64>,
    ) -> Self {
        self.gens.push(Generator {
            name: name.to_string(),
            convention,
            weight,
            momentum,
        });
        self
    }

    /// Declares `x_(j) y = kappa |0>`; the reversed contraction follows by
    /// skew-symmetry.
    pub fn pair(mut self, x: &str, y: &str, kappa: Q) -> Self {
        let xi = self.gens.iter().position(|g| g.name == x).expect("pair: unknown x") as GenId;
        let yi = self.gens.iter().position(|g| g.name == y).expect("pair: unknown y") as GenId;
        self.pairs.push((xi, yi, kappa));
        self
    }

    pub fn lattice(mut self, rank: usize, deg: Vec<i64>, deg_star: Vec<i64>) -> Self {
        self.lattice = Some(LatticeStructure {
            rank,
            deg,
            deg_star,
            deformation: None,
        });
        self
    }

    pub fn build(self) -> Result<GeneratorSystem> {
        let n = self.gens.len();
        let mut table: Vec<Vec<Option<Contraction>>> = vec![vec![None; n]; n];
        for (x, y, kappa) in self.pairs {
            let gx = &self.gens[x as usize];
            let gy = &self.gens[y as usize];
            if gx.parity() != gy.parity() {
                return Err(FockError::BadPairing(format!(
                    "{} and {} have different parity",
                    gx.name, gy.name
                )));
            }
            let order = &gx.weight + &gy.weight - Q::one();
            if !order.is_integer() || order.is_negative() {
                return Err(FockError::BadPairing(format!(
                    "{} and {} have no integral pole order",
                    gx.name, gy.name
                )));
            }
            let j = floor_i64(&order);
            // y_(j) x = p(x,y) (-1)^{j+1} x_(j) y
            let both_odd = gx.parity().is_odd() && gy.parity().is_odd();
            let flip = both_odd ^ ((j + 1) % 2 != 0);
            let reverse = if flip { -kappa.clone() } else { kappa.clone() };
            let fwd = Contraction {
                order: j,
                coeff: kappa.clone(),
            };
            let rev = Contraction {
                order: j,
                coeff: reverse,
            };
            if x == y && fwd != rev {
                return Err(FockError::BadPairing(format!(
                    "self-pairing of {} violates skew-symmetry",
                    gx.name
                )));
            }
            table[x as usize][y as usize] = Some(fwd);
            table[y as usize][x as usize] = Some(rev);
        }
        Ok(GeneratorSystem {
            name: self.name,
            gens: self.gens,
            contractions: table,
            lattice: self.lattice,
            conformal: None,
        })
    }
}

/// A uniform-index mode `x_(index)`. Derived ordering is the canonical
/// creator order: index ascending, then generator id ascending.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeSymbol {
    pub index: i64,
    pub generator: GenId,
}

impl ModeSymbol {
    pub fn new(generator: GenId, index: i64) -> Self {
        ModeSymbol { index, generator }
    }

    pub fn is_creator(self) -> bool {
        self.index < 0
    }
}

/// Lattice charge `m ++ n`; empty for systems without lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Sector(pub Vec<i64>);

impl Sector {
    pub fn from_parts(m: &[i64], n: &[i64]) -> Sector {
        let mut v = m.to_vec();
        v.extend_from_slice(n);
        Sector(v)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| *x == 0)
    }

    pub fn shifted(&self, by: &Sector) -> Sector {
        Sector(self.0.iter().zip(&by.0).map(|(a, b)| a + b).collect())
    }
}

/// Canonically ordered creator word applied to a base vector `|sector>`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    factors: Vec<(ModeSymbol, u32)>,
    pub sector: Sector,
}

impl Monomial {
    pub fn base(sector: Sector) -> Monomial {
        Monomial {
            factors: Vec::new(),
            sector,
        }
    }

    pub fn factors(&self) -> &[(ModeSymbol, u32)] {
        &self.factors
    }

    pub fn is_base(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    /// Splits off the leftmost creator: `self = first * rest` with coefficient one.
    pub fn split_first(&self) -> Option<(ModeSymbol, Monomial)> {
        let (first, e) = *self.factors.first()?;
        let mut rest = self.clone();
        if e == 1 {
            rest.factors.remove(0);
        } else {
            rest.factors[0].1 -= 1;
        }
        Some((first, rest))
    }

    pub fn from_sorted(factors: Vec<(ModeSymbol, u32)>, sector: Sector) -> Monomial {
        Monomial { factors, sector }
    }

    pub fn with_sector(&self, sector: Sector) -> Monomial {
        Monomial {
            factors: self.factors.clone(),
            sector,
        }
    }

    /// Word of single modes, leftmost first.
    pub fn word(&self) -> Vec<ModeSymbol> {
        let mut w = Vec::new();
        for (s, e) in &self.factors {
            for _ in 0..*e {
                w.push(*s);
            }
        }
        w
    }
}

/// Finite linear combination of monomials with exact rational coefficients.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct State {
    terms: BTreeMap<Monomial, Q>,
}

impl State {
    pub fn zero() -> State {
        State::default()
    }

    pub fn from_monomial(m: Monomial) -> State {
        let mut s = State::zero();
        s.terms.insert(m, Q::one());
        s
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: &Monomial) -> Q {
        self.terms.get(m).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add_term(&mut self, m: Monomial, c: Q) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &State, c: &Q) {
        if c.is_zero() {
            return;
        }
        for (m, x) in &other.terms {
            self.add_term(m.clone(), x * c);
        }
    }

    pub fn add_state(&mut self, other: &State) {
        for (m, x) in &other.terms {
            self.add_term(m.clone(), x.clone());
        }
    }

    pub fn scaled(&self, c: &Q) -> State {
        let mut out = State::zero();
        out.add_scaled(self, c);
        out
    }

    pub fn plus(&self, other: &State) -> State {
        let mut out = self.clone();
        out.add_state(other);
        out
    }

    pub fn minus(&self, other: &State) -> State {
        let mut out = self.clone();
        out.add_scaled(other, &-Q::one());
        out
    }

    pub fn map_sectors(&self, f: impl Fn(&Sector) -> Sector) -> State {
        let mut out = State::zero();
        for (m, c) in &self.terms {
            out.add_term(m.with_sector(f(&m.sector)), c.clone());
        }
        out
    }

    /// If `self = c * other` for a scalar `c`, returns `c`.
    pub fn ratio_to(&self, other: &State) -> Option<Q> {
        if other.is_zero() {
            return if self.is_zero() { Some(Q::zero()) } else { None };
        }
        let (m0, c0) = other.terms.iter().next()?;
        let r = self.coeff(m0) / c0;
        if *self == other.scaled(&r) {
            Some(r)
        } else {
            None
        }
    }

    pub fn parity(&self, sys: &GeneratorSystem) -> Option<Parity> {
        let mut it = self.terms.keys().map(|m| sys.monomial_parity(m));
        let first = it.next()?;
        if it.all(|p| p == first) {
            Some(first)
        } else {
            None
        }
    }
}

/// Applies one mode to a state, reducing with the convention's brackets.
pub fn apply_mode(sys: &GeneratorSystem, mode: ModeSymbol, s: &State) -> Result<State> {
    sys.check_mode(mode)?;
    let mut out = State::zero();
    for (m, c) in s.terms() {
        sys.apply_mode_monomial(mode, m, c, &mut out);
    }
    Ok(out)
}

/// Applies a linear combination of modes `sum c_i x_i` to a state.
pub fn apply_combination(sys: &GeneratorSystem, modes: &[(ModeSymbol, Q)], s: &State) -> State {
    let mut out = State::zero();
    for (mode, k) in modes {
        if k.is_zero() {
            continue;
        }
        for (m, c) in s.terms() {
            sys.apply_mode_monomial(*mode, m, &(c * k), &mut out);
        }
    }
    out
}

/// Applies a word of modes, rightmost first.
pub fn apply_word(sys: &GeneratorSystem, word: &[ModeSymbol], s: &State) -> Result<State> {
    let mut cur = s.clone();
    for mode in word.iter().rev() {
        cur = apply_mode(sys, *mode, &cur)?;
        if cur.is_zero() {
            break;
        }
    }
    Ok(cur)
}

/// Normally ordered product of a word on `|base>`: creators moved left,
/// annihilators right (stably), with the Koszul sign of the odd transpositions.
pub fn normal_order_word(sys: &GeneratorSystem, word: &[ModeSymbol], base: &Sector) -> Result<State> {
    sys.check_sector(base)?;
    for m in word {
        sys.check_mode(*m)?;
    }
    let (creators, annihilators): (Vec<_>, Vec<_>) = word.iter().partition(|m| m.is_creator());
    // Count odd-odd inversions: an odd annihilator that moves right past odd creators.
    let mut sign_negative = false;
    let mut odd_ann_seen = 0usize;
    for m in word {
        if !sys.mode_parity(*m).is_odd() {
            continue;
        }
        if m.is_creator() {
            if odd_ann_seen % 2 == 1 {
                sign_negative = !sign_negative;
            }
        } else {
            odd_ann_seen += 1;
        }
    }
    let mut ordered: Vec<ModeSymbol> = creators.into_iter().copied().collect();
    ordered.extend(annihilators.into_iter().copied());
    let out = apply_word(sys, &ordered, &State::from_monomial(Monomial::base(base.clone())))?;
    Ok(if sign_negative {
        out.scaled(&-Q::one())
    } else {
        out
    })
}

/// Koszul sign of normally ordering a word, without applying it.
pub fn normal_order_sign(sys: &GeneratorSystem, word: &[ModeSymbol]) -> Q {
    let mut negative = false;
    let mut odd_ann_seen = 0usize;
    for m in word {
        if !sys.mode_parity(*m).is_odd() {
            continue;
        }
        if m.is_creator() {
            if odd_ann_seen % 2 == 1 {
                negative = !negative;
            }
        } else {
            odd_ann_seen += 1;
        }
    }
    if negative {
        -Q::one()
    } else {
        Q::one()
    }
}

#[derive(Clone, Debug)]
pub struct EnumOptions {
    /// Maximum total exponent of weight-zero creators (MSV `b[0]`), which
    /// would otherwise make every weight space infinite.
    pub zero_weight_cap: u32,
}

impl Default for EnumOptions {
    fn default() -> Self {
        EnumOptions { zero_weight_cap: 2 }
    }
}

/// All canonical monomials over `base` with weight `<= cutoff`.
pub fn enumerate_basis(
    sys: &GeneratorSystem,
    cutoff: &Q,
    base: &Sector,
    opts: &EnumOptions,
) -> Result<Vec<Monomial>> {
    if cutoff.is_negative() {
        return Err(FockError::NegativeCutoff(fmt_q(cutoff)));
    }
    sys.check_sector(base)?;
    let budget = cutoff - sys.sector_weight(base);
    let mut out = Vec::new();
    if budget.is_negative() {
        return Ok(out);
    }
    let mut creators: Vec<ModeSymbol> = Vec::new();
    for (id, g) in sys.generators().iter().enumerate() {
        let mut n = -1i64;
        loop {
            let w = &g.weight - q(n + 1);
            if w > budget {
                break;
            }
            creators.push(ModeSymbol::new(id as GenId, n));
            n -= 1;
        }
    }
    creators.sort();
    let mut current: Vec<(ModeSymbol, u32)> = Vec::new();
    enumerate_rec(sys, &creators, 0, &budget, 0, opts, &mut current, base, &mut out);
    out.sort();
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    sys: &GeneratorSystem,
    creators: &[ModeSymbol],
    start: usize,
    budget: &Q,
    zero_used: u32,
    opts: &EnumOptions,
    current: &mut Vec<(ModeSymbol, u32)>,
    base: &Sector,
    out: &mut Vec<Monomial>,
) {
    out.push(Monomial::from_sorted(current.clone(), base.clone()));
    for i in start..creators.len() {
        let mode = creators[i];
        let w = sys.mode_weight(mode);
        let odd = sys.mode_parity(mode).is_odd();
        let max_e = if odd { 1 } else { u32::MAX };
        let mut e = 1u32;
        loop {
            if e > max_e {
                break;
            }
            let used = &w * q(e as i64);
            if &used > budget {
                break;
            }
            let zu = if w.is_zero() { zero_used + e } else { zero_used };
            if zu > opts.zero_weight_cap {
                break;
            }
            current.push((mode, e));
            let rest = budget - &used;
            enumerate_rec(sys, creators, i + 1, &rest, zu, opts, current, base, out);
            current.pop();
            e += 1;
        }
    }
}

/// Common weight of a homogeneous state.
pub fn weight_of(sys: &GeneratorSystem, s: &State) -> Result<Q> {
    let mut it = s.terms().map(|(m, _)| sys.monomial_weight(m));
    let first = it.next().ok_or(FockError::ZeroState)?;
    for w in it {
        if w != first {
            return Err(FockError::NonHomogeneous(fmt_q(&first), fmt_q(&w)));
        }
    }
    Ok(first)
}

/// Text form: one `coeff * gen[idx]^e ... |sector>` line per term.
pub fn render_state(sys: &GeneratorSystem, s: &State) -> String {
    if s.is_zero() {
        return "0\n".to_string();
    }
    let mut out = String::new();
    for (m, c) in s.terms() {
        out.push_str(&fmt_q(c));
        out.push_str(" *");
        for (mode, e) in m.factors() {
            let g = &sys.generators()[mode.generator as usize];
            out.push(' ');
            out.push_str(&g.name);
            out.push('[');
            out.push_str(&fmt_q(&sys.bracket_index(*mode)));
            out.push(']');
            if *e > 1 {
                out.push_str(&format!("^{e}"));
            }
        }
        out.push(' ');
        out.push_str(&render_sector(sys, &m.sector));
        out.push('\n');
    }
    out
}

pub fn render_sector(sys: &GeneratorSystem, s: &Sector) -> String {
    match sys.lattice() {
        None => "|0>".to_string(),
        Some(l) => {
            let (m, n) = l.split(s);
            let j = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            format!("|{};{}>", j(m), j(n))
        }
    }
}

/// Inverse of [`render_state`].
pub fn parse_state(sys: &GeneratorSystem, text: &str) -> Result<State> {
    let mut out = State::zero();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if line == "0" {
            continue;
        }
        let (coeff, rest) = line
            .split_once(" * ")
            .or_else(|| line.split_once(" *"))
            .ok_or_else(|| FockError::Parse(format!("missing `*` in `{line}`")))?;
        let c = parse_q(coeff).ok_or_else(|| FockError::Parse(format!("bad coefficient `{coeff}`")))?;
        let mut tokens: Vec<&str> = rest.split_whitespace().collect();
        let sector_tok = tokens
            .pop()
            .ok_or_else(|| FockError::Parse(format!("missing base vector in `{line}`")))?;
        let sector = parse_sector(sys, sector_tok)?;
        let mut word = Vec::new();
        for tok in tokens {
            let (name, rest) = tok
                .split_once('[')
                .ok_or_else(|| FockError::Parse(format!("bad mode `{tok}`")))?;
            let (idx, exp) = rest
                .split_once(']')
                .ok_or_else(|| FockError::Parse(format!("bad mode `{tok}`")))?;
            let idx = parse_q(idx).ok_or_else(|| FockError::Parse(format!("bad index `{idx}`")))?;
            let e: u32 = match exp.strip_prefix('^') {
                Some(e) => e.parse().map_err(|_| FockError::Parse(format!("bad exponent `{exp}`")))?,
                None if exp.is_empty() => 1,
                None => return Err(FockError::Parse(format!("bad mode `{tok}`"))),
            };
            let mode = sys.mode(name, &idx)?;
            for _ in 0..e {
                word.push(mode);
            }
        }
        let st = apply_word(sys, &word, &State::from_monomial(Monomial::base(sector)))?;
        out.add_scaled(&st, &c);
    }
    Ok(out)
}

fn parse_sector(sys: &GeneratorSystem, tok: &str) -> Result<Sector> {
    let inner = tok
        .strip_prefix('|')
        .and_then(|t| t.strip_suffix('>'))
        .ok_or_else(|| FockError::Parse(format!("bad base vector `{tok}`")))?;
    match sys.lattice() {
        None => {
            if inner == "0" {
                Ok(Sector::default())
            } else {
                Err(FockError::Parse(format!("system has no lattice sectors: `{tok}`")))
            }
        }
        Some(l) => {
            let (m, n) = inner
                .split_once(';')
                .ok_or_else(|| FockError::Parse(format!("bad sector `{tok}`")))?;
            let parse = |s: &str| -> Result<Vec<i64>> {
                s.split(',')
                    .map(|x| x.trim().parse::<i64>().map_err(|_| FockError::Parse(format!("bad sector `{tok}`"))))
                    .collect()
            };
            let (m, n) = (parse(m)?, parse(n)?);
            if m.len() != l.rank || n.len() != l.rank {
                return Err(FockError::SectorShape {
                    expected: 2 * l.rank,
                    got: m.len() + n.len(),
                });
            }
            Ok(Sector::from_parts(&m, &n))
        }
    }
}

impl fmt::Display for Parity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Parity::Even => write!(f, "even"),
            Parity::Odd => write!(f, "odd"),
        }
    }
}

/// Free-field systems used throughout the crate.
pub mod systems {
    use super::*;

    /// One free boson `d` with `[d[m], d[n]] = m delta_{m+n}`.
    pub fn free_boson() -> GeneratorSystem {
        free_bosons(1)
    }

    /// `r` orthonormal standard bosons `d1..dr` (named `d` when `r = 1`).
    pub fn free_bosons(r: usize) -> GeneratorSystem {
        let mut b = GeneratorSystem::builder(&format!("bosons({r})"));
        let names: Vec<String> = if r == 1 {
            vec!["d".into()]
        } else {
            (1..=r).map(|i| format!("d{i}")).collect()
        };
        for n in &names {
            b = b.generator(n, Convention::BosonStandard, q(1));
        }
        for n in &names {
            b = b.pair(n, n, q(1));
        }
        b.build().expect("free bosons")
    }

    /// `r` pairs of fermions `phi_i, psi_i` with `phi_i . psi_i = 1`.
    pub fn fermion_pairs(r: usize) -> GeneratorSystem {
        let mut b = GeneratorSystem::builder(&format!("fermions({r})"));
        for i in 1..=r {
            b = b
                .generator(&format!("phi{i}"), Convention::Fermion, half())
                .generator(&format!("psi{i}"), Convention::Fermion, half());
        }
        for i in 1..=r {
            b = b.pair(&format!("phi{i}"), &format!("psi{i}"), q(1));
        }
        b.build().expect("fermion pairs")
    }

    /// `r` standard boson pairs `a_i, b_i` (`a.b = 1`) and `r` fermion pairs.
    pub fn bc_beta_gamma(r: usize) -> GeneratorSystem {
        let mut b = GeneratorSystem::builder(&format!("bcbg({r})"));
        for i in 1..=r {
            b = b
                .generator(&format!("a{i}"), Convention::BosonStandard, q(1))
                .generator(&format!("b{i}"), Convention::BosonStandard, q(1));
        }
        for i in 1..=r {
            b = b
                .generator(&format!("phi{i}"), Convention::Fermion, half())
                .generator(&format!("psi{i}"), Convention::Fermion, half());
        }
        for i in 1..=r {
            b = b
                .pair(&format!("a{i}"), &format!("b{i}"), q(1))
                .pair(&format!("phi{i}"), &format!("psi{i}"), q(1));
        }
        b.build().expect("bc-beta-gamma")
    }

    /// MSV convention: `a_i` of weight 1, `b_i` of weight 0 with
    /// `[a[m], b[n]] = delta_{m+n}`, plus `r` fermion pairs.
    pub fn msv(r: usize) -> GeneratorSystem {
        let mut b = GeneratorSystem::builder(&format!("msv({r})"));
        for i in 1..=r {
            b = b
                .generator(&format!("a{i}"), Convention::BosonMsv, q(1))
                .generator(&format!("b{i}"), Convention::BosonMsv, Q::zero());
        }
        for i in 1..=r {
            b = b
                .generator(&format!("phi{i}"), Convention::Fermion, half())
                .generator(&format!("psi{i}"), Convention::Fermion, half());
        }
        for i in 1..=r {
            b = b
                .pair(&format!("a{i}"), &format!("b{i}"), q(1))
                .pair(&format!("phi{i}"), &format!("psi{i}"), q(1));
        }
        b.build().expect("msv")
    }

    /// Two orthonormal bosons and one fermion pair.
    pub fn two_bosons_two_fermions() -> GeneratorSystem {
        GeneratorSystem::builder("2b2f")
            .generator("d1", Convention::BosonStandard, q(1))
            .generator("d2", Convention::BosonStandard, q(1))
            .generator("phi", Convention::Fermion, half())
            .generator("psi", Convention::Fermion, half())
            .pair("d1", "d1", q(1))
            .pair("d2", "d2", q(1))
            .pair("phi", "psi", q(1))
            .build()
            .expect("2b2f")
    }
}
