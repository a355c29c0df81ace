//! BRST operator of a reflexive pair and exact graded cohomology on finite
//! sector regions of the fan-deformed lattice algebra.
//!
//! The BRST zero mode preserves the `L_CY[0]` weight `w` and the `J_CY[0]`
//! charge `j`, and raises the degree `k = deg*.m + deg.n` by one. Blocks are
//! indexed by `(w, j, k)`; the complex in a fixed `(w, j)` is the chain of
//! maps `k -> k + 1`.
//!
//! Sector regions are `m` in the shifted cone `K_R = {m : <m, y> >= -R for
//! every vertex y of Delta*}` and `n` in `K*` (optionally a chart cone). Both
//! are closed under the shifts by `Delta` and `Delta*`, so each region spans a
//! subcomplex with finite-dimensional blocks.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::fock::{enumerate_basis, EnumOptions, GeneratorSystem, ModeSymbol, Monomial, Sector, State};
use crate::fock::apply_mode;
use crate::lattice::{
    build_cy_n2, gen_phi, gen_psi, lattice_system_with, sector_charge, vertex_operator_modes,
};
use crate::linalg::{integer_row, sparse_kernel, Echelon, IntRow};
use crate::ope::OpeEngine;
use crate::rational::{floor_i64, fmt_q, half, q, Q};
use crate::superconf::{CharacterTable, N2Fields};
use crate::toric::{generic_coefficients, lattice_points, CoefficientMap, Fan, ReflexiveData};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BrstError {
    #[error("coefficient domain does not match the lattice points of {0}")]
    DomainMismatch(&'static str),
    #[error("coefficient for {0:?} is zero")]
    ZeroCoefficient(Vec<i64>),
    #[error("cone {0:?} is not in the fan")]
    UnknownCone(Vec<usize>),
    #[error("image left the enumerated region: {0}")]
    Closure(String),
    #[error("mirror data missing: the polytope file has no mirror fan")]
    MissingMirrorFan,
    #[error("stable region does not contain the region: {0}")]
    RegionsNotNested(String),
}

pub type Result<T> = std::result::Result<T, BrstError>;

fn check_domain(map: &BTreeMap<Vec<i64>, Q>, points: &[Vec<i64>], name: &'static str) -> Result<()> {
    let keys: Vec<&Vec<i64>> = map.keys().collect();
    let mut pts: Vec<&Vec<i64>> = points.iter().collect();
    pts.sort();
    if keys != pts {
        return Err(BrstError::DomainMismatch(name));
    }
    if let Some((p, _)) = map.iter().find(|(_, c)| c.is_zero()) {
        return Err(BrstError::ZeroCoefficient(p.clone()));
    }
    Ok(())
}

/// `sum_m f_m (m.Phi)_(-1)|m,0> + sum_n g_n (n.Psi)_(-1)|0,n>`, whose zero mode is the BRST operator.
pub fn build_brst_state(
    sys: &GeneratorSystem,
    data: &ReflexiveData,
    coeffs: &CoefficientMap,
) -> Result<State> {
    check_domain(&coeffs.f, &data.delta_points(), "Delta")?;
    check_domain(&coeffs.g, &data.delta_star_points(), "Delta*")?;
    Ok(brst_state_unchecked(sys, &coeffs.f, &coeffs.g))
}

/// Same construction without domain checks (used for partial operators and controls).
pub fn brst_state_unchecked(
    sys: &GeneratorSystem,
    f: &BTreeMap<Vec<i64>, Q>,
    g: &BTreeMap<Vec<i64>, Q>,
) -> State {
    let rank = sys.lattice().expect("lattice system").rank;
    let zero = vec![0i64; rank];
    let mut out = State::zero();
    for (m, c) in f {
        let base = State::from_monomial(Monomial::base(Sector::from_parts(m, &zero)));
        for (i, mi) in m.iter().enumerate() {
            if *mi == 0 {
                continue;
            }
            let t = apply_mode(sys, ModeSymbol::new(gen_phi(rank, i), -1), &base).expect("Phi mode");
            out.add_scaled(&t, &(c * q(*mi)));
        }
    }
    for (n, c) in g {
        let base = State::from_monomial(Monomial::base(Sector::from_parts(&zero, n)));
        for (i, ni) in n.iter().enumerate() {
            if *ni == 0 {
                continue;
            }
            let t = apply_mode(sys, ModeSymbol::new(gen_psi(rank, i), -1), &base).expect("Psi mode");
            out.add_scaled(&t, &(c * q(*ni)));
        }
    }
    out
}

/// Zero mode of a sum of states `c x_(-1)|lambda>` with `x` a free fermion
/// (one creator on a base vector), evaluated by the normally ordered product
/// formula `sum_i x_(-1-i) V_(i) + V_(-1-i) x_(i)`. Lattice vertex operators
/// only touch the bosonic part of a monomial, so their action is cached per
/// bosonic monomial.
#[derive(Debug)]
pub struct ZeroModeOperator {
    terms: Vec<(ModeSymbol, Sector, Q)>,
    cache: RefCell<HashMap<(usize, Monomial), Arc<Vec<State>>>>,
    max_fermion_index: Cell<i64>,
}

const CACHE_LIMIT: usize = 100_000;

/// Splits a monomial into its fermionic and bosonic factors.
fn split_parity(sys: &GeneratorSystem, v: &Monomial) -> (Monomial, Monomial) {
    let (odd, even): (Vec<_>, Vec<_>) = v.factors().iter().partition(|(s, _)| sys.mode_parity(*s).is_odd());
    (
        Monomial::from_sorted(odd, v.sector.clone()),
        Monomial::from_sorted(even, v.sector.clone()),
    )
}

/// Product of a fermionic and a bosonic monomial; they commute, so the
/// merged canonical word carries no sign.
fn merge(f: &Monomial, b: &Monomial) -> Monomial {
    let mut out = Vec::with_capacity(f.factors().len() + b.factors().len());
    let (mut i, mut j) = (0, 0);
    let (x, y) = (f.factors(), b.factors());
    while i < x.len() || j < y.len() {
        if j >= y.len() || (i < x.len() && x[i].0 < y[j].0) {
            out.push(x[i]);
            i += 1;
        } else {
            out.push(y[j]);
            j += 1;
        }
    }
    Monomial::from_sorted(out, b.sector.clone())
}

impl ZeroModeOperator {
    /// `None` unless every monomial is `x_(-1)|lambda>` with `x` odd and of weight 1/2.
    pub fn from_state(sys: &GeneratorSystem, state: &State) -> Option<ZeroModeOperator> {
        let mut terms = Vec::new();
        for (mono, c) in state.terms() {
            match mono.factors() {
                [(x, 1)]
                    if x.index == -1
                        && sys.mode_parity(*x).is_odd()
                        && sys.generators()[x.generator as usize].weight == half() =>
                {
                    terms.push((*x, mono.sector.clone(), c.clone()))
                }
                _ => return None,
            }
        }
        Some(ZeroModeOperator {
            terms,
            cache: RefCell::new(HashMap::new()),
            max_fermion_index: Cell::new(0),
        })
    }

    /// `|lambda_t>_(j) b` for `j` from `-1 - spare(b)` upward, bosonic `b`.
    fn vertex_modes(&self, sys: &GeneratorSystem, t: usize, b: &Monomial) -> Arc<Vec<State>> {
        let key = (t, b.clone());
        if let Some(hit) = self.cache.borrow().get(&key) {
            return hit.clone();
        }
        let lambda = &self.terms[t].1;
        let wt = sys.monomial_weight(b);
        let target = lambda.shifted(&b.sector);
        let bound = &wt + sys.sector_weight(lambda) - Q::one() - sys.sector_weight(&target);
        let lo = -1 - self.max_fermion_index.get();
        let hi = if bound.is_negative() { -1 } else { floor_i64(&bound) };
        let out = vertex_operator_modes(sys, lambda, b, lo, hi);
        let arc = Arc::new(out);
        let mut cache = self.cache.borrow_mut();
        if cache.len() >= CACHE_LIMIT {
            cache.clear();
        }
        cache.insert(key, arc.clone());
        arc
    }


    pub fn apply(&self, sys: &GeneratorSystem, v: &Monomial) -> State {
        let (fer, bos) = split_parity(sys, v);
        let fs = State::from_monomial(fer.clone());
        let spare_f = sys.monomial_weight(&fer) - sys.sector_weight(&fer.sector);
        let imax_f = floor_i64(&spare_f);
        if imax_f > self.max_fermion_index.get() {
            self.max_fermion_index.set(imax_f);
            self.cache.borrow_mut().clear();
        }
        let mut out = State::zero();
        for (t, (x, _, c)) in self.terms.iter().enumerate() {
            let modes = self.vertex_modes(sys, t, &bos);
            let lo = -1 - self.max_fermion_index.get();
            let at = |j: i64| -> Option<&State> {
                if j < lo {
                    return None;
                }
                modes.get((j - lo) as usize)
            };
            // sum_i x_(-1-i) V_(i)
            let mut i = 0;
            while let Some(vi) = at(i) {
                if !vi.is_zero() {
                    let xf = apply_mode(sys, ModeSymbol::new(x.generator, -1 - i), &fs).expect("registered mode");
                    for (fm, fc) in xf.terms() {
                        for (bm, bc) in vi.terms() {
                            out.add_term(merge(fm, bm), c * fc * bc);
                        }
                    }
                }
                i += 1;
            }
            // sum_i V_(-1-i) x_(i)
            for i in 0..=imax_f {
                let xf = apply_mode(sys, ModeSymbol::new(x.generator, i), &fs).expect("registered mode");
                if xf.is_zero() {
                    continue;
                }
                let Some(vi) = at(-1 - i) else { continue };
                for (fm, fc) in xf.terms() {
                    for (bm, bc) in vi.terms() {
                        out.add_term(merge(fm, bm), c * fc * bc);
                    }
                }
            }
        }
        out
    }
}

/// An odd operator given as the zero mode of a state.
pub enum Operator<'a> {
    Fast(&'a GeneratorSystem, ZeroModeOperator),
    General(OpeEngine<'a>, State),
}

impl<'a> Operator<'a> {
    pub fn zero_mode(sys: &'a GeneratorSystem, state: &State) -> Operator<'a> {
        match ZeroModeOperator::from_state(sys, state) {
            Some(z) => Operator::Fast(sys, z),
            None => Operator::General(OpeEngine::new(sys), state.clone()),
        }
    }

    pub fn apply(&self, v: &Monomial) -> State {
        match self {
            Operator::Fast(sys, z) => z.apply(sys, v),
            Operator::General(e, s) => e.mode(s, 0, &State::from_monomial(v.clone())),
        }
    }

    pub fn apply_state(&self, v: &State) -> State {
        let mut out = State::zero();
        for (m, c) in v.terms() {
            out.add_scaled(&self.apply(m), c);
        }
        out
    }
}

/// Which sectors enter the complex.
#[derive(Clone, Debug)]
pub struct SectorRegion {
    /// `R` in `m in K_R`; zero gives `K`.
    pub m_slack: i64,
    /// Restrict `n` to the chart cone `cone(C1, deg*)` of this cone of `Sigma1`.
    pub chart: Option<Vec<usize>>,
    /// Optional lower bound on `deg*.m`.
    pub s_floor: Option<i64>,
    /// Further points `g`; the region for `m` becomes `K_R` together with every `g + K`.
    pub extra_generators: Vec<Vec<i64>>,
}

impl Default for SectorRegion {
    fn default() -> Self {
        SectorRegion {
            m_slack: 0,
            chart: None,
            s_floor: None,
            extra_generators: Vec::new(),
        }
    }
}

/// Grading of a block: `L_CY[0]` weight, `J_CY[0]` charge and degree.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockKey {
    pub weight: Q,
    pub j: Q,
    pub k: i64,
}

impl BlockKey {
    /// Weight under the twisted Virasoro field `L + 1/2 dJ`, i.e. `w - j/2`.
    pub fn twisted_weight(&self) -> Q {
        &self.weight - &self.j * half()
    }

    pub fn parity_odd(&self) -> bool {
        // fermion number = j - (t - s) and s + t = k, so parity = j + k mod 2
        let jk = &self.j + q(self.k);
        !(jk / q(2)).is_integer()
    }
}

/// Everything needed to run the complex for one reflexive pair.
pub struct BrstProblem {
    pub data: ReflexiveData,
    pub coeffs: CoefficientMap,
    pub sys: GeneratorSystem,
    pub brst: State,
    pub n2: N2Fields,
    pub region: SectorRegion,
    fan: Arc<Fan>,
    chart_cone: Option<crate::toric::Cone>,
}

impl BrstProblem {
    pub fn new(data: &ReflexiveData, coeffs: &CoefficientMap, region: SectorRegion) -> Result<BrstProblem> {
        let fan = Arc::new(data.extended_fan());
        let sys = lattice_system_with(data.rank(), Some(fan.clone()));
        let mut coeffs = coeffs.clone();
        let chart_cone = match &region.chart {
            None => None,
            Some(c1) => {
                data.fan1.cone(c1).map_err(|_| BrstError::UnknownCone(c1.clone()))?;
                let top = data.fan1.rays().len();
                let mut rays = c1.clone();
                rays.push(top);
                let cone = fan.cone(&rays).map_err(|_| BrstError::UnknownCone(c1.clone()))?.clone();
                // BRST terms with n outside the chart are ignored
                let kept: BTreeMap<Vec<i64>, Q> =
                    coeffs.g.iter().filter(|(n, _)| cone.contains(n)).map(|(n, c)| (n.clone(), c.clone())).collect();
                check_domain(&coeffs.f, &data.delta_points(), "Delta")?;
                check_domain(&coeffs.g, &data.delta_star_points(), "Delta*")?;
                coeffs.g = kept;
                Some(cone)
            }
        };
        let brst = if chart_cone.is_some() {
            brst_state_unchecked(&sys, &coeffs.f, &coeffs.g)
        } else {
            build_brst_state(&sys, data, &coeffs)?
        };
        let n2 = build_cy_n2(&sys);
        Ok(BrstProblem {
            data: data.clone(),
            coeffs,
            sys,
            brst,
            n2,
            region,
            fan,
            chart_cone,
        })
    }

    pub fn fan(&self) -> &Fan {
        &self.fan
    }

    pub fn rank(&self) -> usize {
        self.data.rank()
    }

    fn n_allowed(&self, n: &[i64]) -> bool {
        match &self.chart_cone {
            Some(c) => c.contains(n),
            None => true,
        }
    }

    fn m_generators(&self) -> Vec<Vec<i64>> {
        let mut g = vec![0; self.rank()];
        *g.last_mut().unwrap() = -self.region.m_slack;
        let mut out = vec![g];
        out.extend(self.region.extra_generators.iter().cloned());
        out
    }

    fn min_degree(&self) -> i64 {
        let low = self.m_generators().iter().map(|g| *g.last().unwrap()).min().unwrap();
        self.region.s_floor.map_or(low, |f| f.max(low))
    }

    /// Sectors `(m, n)` of the region with `deg*.m = s`, `deg.n = t`.
    pub fn sectors(&self, s: i64, t: i64) -> Vec<Sector> {
        if t < 0 || s < self.min_degree() {
            return Vec::new();
        }
        let mut ms = std::collections::BTreeSet::new();
        for g in self.m_generators() {
            let gs = *g.last().unwrap();
            for mut m in scaled_points(&self.data.delta1, s - gs, s) {
                for (x, y) in m.iter_mut().zip(&g).take(g.len() - 1) {
                    *x += y;
                }
                ms.insert(m);
            }
        }
        let ns = scaled_points(&self.data.delta1_star, t, t);
        let mut out = Vec::new();
        for m in &ms {
            for n in &ns {
                if self.n_allowed(n) {
                    out.push(Sector::from_parts(m, n));
                }
            }
        }
        out
    }

    /// Basis of the block: monomials of exact weight and charge over the region's sectors.
    pub fn block_basis(&self, key: &BlockKey, creators: &mut CreatorCache) -> Vec<Monomial> {
        let mut out = Vec::new();
        for s in self.min_degree()..=key.k {
            let t = key.k - s;
            for sector in self.sectors(s, t) {
                let sw = self.sys.sector_weight(&sector);
                let budget = &key.weight - &sw;
                if budget.is_negative() {
                    continue;
                }
                let need_f = &key.j - sector_charge(&self.sys, &sector);
                if !need_f.is_integer() {
                    continue;
                }
                let need_f: i64 = need_f.to_integer().try_into().expect("small charge");
                for mono in creators.words(&self.sys, &budget, need_f) {
                    out.push(mono.with_sector(sector.clone()));
                }
            }
        }
        out.sort();
        out
    }

    /// Matrix of the BRST zero mode from block `key` to block `(w, j, k+1)`,
    /// as sparse columns over the target basis.
    pub fn brst_matrix(&self, op: &Operator<'_>, source: &[Monomial], target: &[Monomial]) -> Result<Vec<Vec<(usize, Q)>>> {
        let index: HashMap<&Monomial, usize> = target.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut cols = Vec::with_capacity(source.len());
        for v in source {
            let img = op.apply(v);
            let mut col = Vec::with_capacity(img.len());
            for (m, c) in img.terms() {
                let i = index.get(m).ok_or_else(|| {
                    BrstError::Closure(crate::fock::render_state(&self.sys, &State::from_monomial(m.clone())))
                })?;
                col.push((*i, c.clone()));
            }
            col.sort_by_key(|(i, _)| *i);
            cols.push(col);
        }
        Ok(cols)
    }
}

/// Points of `level * P` carried to degree `degree` (the last coordinate).
fn scaled_points(vertices: &[Vec<i64>], level: i64, degree: i64) -> Vec<Vec<i64>> {
    if level < 0 {
        return Vec::new();
    }
    let pts = if level == 0 {
        vec![{
            let mut v = vec![0; vertices[0].len()];
            v.push(0);
            v
        }]
    } else {
        lattice_points(vertices, level).expect("valid polytope")
    };
    pts.into_iter()
        .map(|mut p| {
            *p.last_mut().unwrap() = degree;
            p
        })
        .collect()
}

/// Creator monomials over the zero sector bucketed by exact weight and fermion number.
#[derive(Default)]
pub struct CreatorCache {
    max: Option<Q>,
    buckets: HashMap<(Q, i64), Vec<Monomial>>,
}

impl CreatorCache {
    pub fn words(&mut self, sys: &GeneratorSystem, weight: &Q, fermions: i64) -> &[Monomial] {
        if self.max.as_ref().map_or(true, |m| m < weight) {
            self.fill(sys, weight);
        }
        self.buckets.get(&(weight.clone(), fermions)).map_or(&[], Vec::as_slice)
    }

    fn fill(&mut self, sys: &GeneratorSystem, max: &Q) {
        let rank = sys.lattice().expect("lattice system").rank;
        let basis = enumerate_basis(sys, max, &sys.zero_sector(), &EnumOptions::default()).expect("budget >= 0");
        self.buckets.clear();
        for m in basis {
            let w = sys.monomial_weight(&m);
            let f: i64 = m
                .factors()
                .iter()
                .map(|(s, e)| {
                    let g = s.generator as usize;
                    if (2 * rank..3 * rank).contains(&g) {
                        *e as i64
                    } else if g >= 3 * rank {
                        -(*e as i64)
                    } else {
                        0
                    }
                })
                .sum();
            self.buckets.entry((w, f)).or_default().push(m);
        }
        self.max = Some(max.clone());
    }
}

/// Per-block record of a cohomology computation.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockReport {
    pub key: BlockKey,
    pub dim_ambient: usize,
    pub rank_in: usize,
    pub rank_out: usize,
    pub dim_cohomology: usize,
    /// Image of this block's cohomology in a larger region, when computed.
    pub dim_stable: Option<usize>,
}

impl BlockReport {
    /// The stable dimension when available, otherwise the region's own.
    pub fn dim(&self) -> usize {
        self.dim_stable.unwrap_or(self.dim_cohomology)
    }
}

/// Settings of a cohomology run.
#[derive(Clone, Debug)]
pub struct CohomologyConfig {
    /// Largest `L_CY[0]` weight.
    pub cutoff: Q,
    /// Smallest weight scanned. Negative values witness that negative-weight
    /// states carry no cohomology.
    pub min_weight: Q,
    /// Closed range of twisted weights `w - j/2`.
    pub twisted: (Q, Q),
    pub k_range: (i64, i64),
    pub seed: u64,
    /// Second coefficient seed whose dimension table must agree.
    pub compare_seed: Option<u64>,
    pub region: SectorRegion,
    /// Larger region used to discard classes supported near the boundary.
    pub stable_region: Option<SectorRegion>,
    /// Basis vectors per block on which gradings and N=2 commutation are checked.
    pub check_samples: usize,
    /// Keep only gradings `(w, j)` whose mirror `(w, -j)` is also in range.
    pub j_symmetric: bool,
}

impl Default for CohomologyConfig {
    fn default() -> Self {
        CohomologyConfig {
            cutoff: Q::one(),
            min_weight: Q::zero(),
            twisted: (Q::zero(), Q::zero()),
            k_range: (-1, 3),
            seed: 1,
            compare_seed: None,
            region: SectorRegion {
                m_slack: 1,
                ..SectorRegion::default()
            },
            stable_region: None,
            check_samples: 4,
            j_symmetric: false,
        }
    }
}

impl CohomologyConfig {
    /// `(w, j)` pairs with `min_weight <= w <= cutoff` and twisted weight in range.
    pub fn gradings(&self) -> Vec<(Q, Q)> {
        let two = q(2);
        let ceil2 = |x: &Q| -> i64 { floor_i64(&-(x * &two)).checked_neg().expect("small weight") };
        let (t0, t1) = (ceil2(&self.twisted.0), floor_i64(&(&self.twisted.1 * &two)));
        let mut out = Vec::new();
        for w2 in ceil2(&self.min_weight)..=floor_i64(&(&self.cutoff * &two)) {
            for t2 in t0..=t1 {
                // twice the twisted weight of (w, -j)
                let mirror_t2 = 2 * w2 - t2;
                if self.j_symmetric && !(t0..=t1).contains(&mirror_t2) {
                    continue;
                }
                out.push((q(w2) * half(), q(w2 - t2)));
            }
        }
        out
    }
}

/// Exact cohomology on a set of `(w, j)` gradings.
#[derive(Clone, Debug, PartialEq)]
pub struct CohomologyReport {
    pub blocks: Vec<BlockReport>,
    pub seed: u64,
    pub cutoff: Q,
    pub m_slack: i64,
    pub stable_slack: Option<i64>,
    /// Consecutive BRST matrices compose to zero.
    pub square_zero_verified: bool,
    /// Sampled basis vectors are `L_CY[0]`, `J_CY[0]` eigenvectors with the
    /// block's labels; with closure of the matrices this gives commutation.
    pub gradings_verified: bool,
    pub n2_commutation_verified: bool,
    /// Set when the fan is not smooth and the identification with chiral de Rham cohomology is conjectural.
    pub conjectural: bool,
    pub seeds_compared: Option<(u64, u64, bool)>,
    /// Ambient states of negative weight in the scanned blocks.
    pub negative_weight_ambient: usize,
}

impl CohomologyReport {
    pub fn total_at_twisted_weight(&self, w: &Q) -> usize {
        self.blocks.iter().filter(|b| b.key.twisted_weight() == *w).map(|b| b.dim()).sum()
    }

    pub fn total_at_weight(&self, w: &Q) -> usize {
        self.blocks.iter().filter(|b| b.key.weight == *w).map(|b| b.dim()).sum()
    }

    pub fn nonzero(&self) -> Vec<&BlockReport> {
        self.blocks.iter().filter(|b| b.dim() > 0).collect()
    }

    pub fn dimension_table(&self) -> BTreeMap<BlockKey, usize> {
        self.blocks.iter().map(|b| (b.key.clone(), b.dim())).collect()
    }

    /// Supertrace `sum (-1)^F dim y^j q^w` over the cohomology.
    pub fn character(&self) -> CharacterTable {
        supertrace(&self.dimension_table())
    }

    /// Whether every verification flag holds.
    pub fn verified(&self) -> bool {
        self.square_zero_verified
            && self.gradings_verified
            && self.n2_commutation_verified
            && self.seeds_compared.is_none_or(|(_, _, same)| same)
            && self.blocks.iter().all(|b| b.key.weight >= Q::zero() || b.dim() == 0)
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "seed {} cutoff {} m_slack {} stable_slack {}\n",
            self.seed,
            fmt_q(&self.cutoff),
            self.m_slack,
            self.stable_slack.map_or("none".to_string(), |r| r.to_string())
        );
        out.push_str(&format!(
            "square_zero {} gradings {} n2_commutation {} conjectural {}\n",
            self.square_zero_verified, self.gradings_verified, self.n2_commutation_verified, self.conjectural
        ));
        if let Some((a, b, same)) = self.seeds_compared {
            out.push_str(&format!("seeds {a} {b} agree {same}\n"));
        }
        out.push_str(&format!("negative_weight_ambient {}\n", self.negative_weight_ambient));
        out.push_str(&self.render_tsv());
        out
    }

    pub fn render_tsv(&self) -> String {
        let mut out = String::from("weight\tj\tk\ttwisted_weight\tdim_ambient\trank_in\trank_out\tdim_region\tdim_cohomology\n");
        for b in &self.blocks {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                fmt_q(&b.key.weight),
                fmt_q(&b.key.j),
                b.key.k,
                fmt_q(&b.key.twisted_weight()),
                b.dim_ambient,
                b.rank_in,
                b.rank_out,
                b.dim_cohomology,
                b.dim()
            ));
        }
        out
    }
}

/// Runs the complex of `data` with coefficients drawn from `config.seed`.
pub fn cohomology(data: &ReflexiveData, config: &CohomologyConfig) -> Result<CohomologyReport> {
    let mut report = cohomology_for_seed(data, config, config.seed)?;
    if let Some(other) = config.compare_seed {
        let second = cohomology_for_seed(data, config, other)?;
        let same = report.dimension_table() == second.dimension_table();
        report.seeds_compared = Some((config.seed, other, same));
    }
    Ok(report)
}

/// A cohomology run on a reflexive pair and on its mirror, compared under `j -> -j`.
#[derive(Clone, Debug)]
pub struct MirrorComparison {
    pub original: CohomologyReport,
    pub mirror: CohomologyReport,
    /// Blocks whose image under `j -> -j` lies in the scanned window.
    pub blocks_compared: usize,
    pub tables_agree: bool,
    /// Supertraces agree under `y -> 1/y`.
    pub characters_agree: bool,
}

impl MirrorComparison {
    pub fn ok(&self) -> bool {
        self.blocks_compared > 0
            && self.tables_agree
            && self.characters_agree
            && self.original.verified()
            && self.mirror.verified()
    }
}

pub fn mirror_compare(data: &ReflexiveData, config: &CohomologyConfig) -> Result<MirrorComparison> {
    let swapped = data.swapped().ok_or(BrstError::MissingMirrorFan)?;
    let config = CohomologyConfig {
        j_symmetric: true,
        ..config.clone()
    };
    let original = cohomology(data, &config)?;
    let mirror = cohomology(&swapped, &config)?;
    let in_window = |w: &Q, j: &Q| {
        let tw = w - j * half();
        tw >= config.twisted.0 && tw <= config.twisted.1
    };
    let table = |t: &CohomologyReport, flip: bool| -> BTreeMap<BlockKey, usize> {
        t.blocks
            .iter()
            .filter(|x| in_window(&x.key.weight, &x.key.j) && in_window(&x.key.weight, &-x.key.j.clone()))
            .map(|x| {
                let j = if flip { -x.key.j.clone() } else { x.key.j.clone() };
                (BlockKey { j, ..x.key.clone() }, x.dim())
            })
            .collect()
    };
    let (ta, tb) = (table(&original, false), table(&mirror, true));
    Ok(MirrorComparison {
        blocks_compared: ta.len(),
        tables_agree: ta == tb,
        characters_agree: supertrace(&ta) == supertrace(&tb),
        original,
        mirror,
    })
}

/// `sum (-1)^parity dim y^j q^w` over a dimension table.
pub fn supertrace(table: &BTreeMap<BlockKey, usize>) -> CharacterTable {
    let mut out = CharacterTable::new();
    for (key, d) in table {
        let sign = if key.parity_odd() { -1 } else { 1 };
        *out.entry((key.j.clone(), key.weight.clone())).or_insert(0) += sign * *d as i64;
    }
    out.retain(|_, c| *c != 0);
    out
}

fn cohomology_for_seed(data: &ReflexiveData, config: &CohomologyConfig, seed: u64) -> Result<CohomologyReport> {
    let coeffs = generic_coefficients(&data.delta_points(), &data.delta_star_points(), seed);
    let inner = BrstProblem::new(data, &coeffs, config.region.clone())?;
    let outer = match &config.stable_region {
        Some(r) => {
            let outer = BrstProblem::new(data, &coeffs, r.clone())?;
            check_nested(&inner, &outer)?;
            Some(outer)
        }
        None => None,
    };
    let run = run_gradings(&inner, outer.as_ref(), &config.gradings(), config.k_range)?;
    let engine = OpeEngine::new(&inner.sys);
    let op = Operator::zero_mode(&inner.sys, &inner.brst);
    let mut gradings_ok = true;
    let mut n2_ok = true;
    for (key, basis) in &run.bases {
        let sample: Vec<Monomial> = sample(basis, config.check_samples);
        for v in &sample {
            let vs = State::from_monomial(v.clone());
            let w = engine.mode(&inner.n2.l, 1, &vs);
            let j = engine.mode(&inner.n2.j, 0, &vs);
            if w != vs.scaled(&key.weight) || j != vs.scaled(&key.j) {
                gradings_ok = false;
            }
        }
        if !check_n2_commutation_on(&engine, &op, &inner.n2, &sample) {
            n2_ok = false;
        }
    }
    Ok(CohomologyReport {
        negative_weight_ambient: run.blocks.iter().filter(|b| b.key.weight.is_negative()).map(|b| b.dim_ambient).sum(),
        blocks: run.blocks,
        seed,
        cutoff: config.cutoff.clone(),
        m_slack: config.region.m_slack,
        stable_slack: config.stable_region.as_ref().map(|r| r.m_slack),
        square_zero_verified: run.square_zero,
        gradings_verified: gradings_ok,
        n2_commutation_verified: n2_ok,
        conjectural: !data.is_smooth(),
        seeds_compared: None,
    })
}

/// Every generator of the inner `m` region must lie in the outer one, and the
/// outer floor must not cut off inner sectors.
fn check_nested(inner: &BrstProblem, outer: &BrstProblem) -> Result<()> {
    if inner.region.chart != outer.region.chart {
        return Err(BrstError::RegionsNotNested("different charts".into()));
    }
    if outer.min_degree() > inner.min_degree() {
        return Err(BrstError::RegionsNotNested(format!(
            "floor {} above lowest inner degree {}",
            outer.min_degree(),
            inner.min_degree()
        )));
    }
    for g in inner.m_generators() {
        let s = *g.last().unwrap();
        if !outer.sectors(s, 0).iter().any(|sec| sec.0[..g.len()] == g[..]) {
            return Err(BrstError::RegionsNotNested(format!("generator {g:?}")));
        }
    }
    Ok(())
}

/// Evenly spaced deterministic sample of at most `n` elements.
fn sample<T: Clone>(xs: &[T], n: usize) -> Vec<T> {
    if xs.len() <= n {
        return xs.to_vec();
    }
    (0..n).map(|i| xs[i * xs.len() / n].clone()).collect()
}

fn rank_of(cols: &[Vec<(usize, Q)>]) -> usize {
    let mut e = Echelon::new();
    for c in cols {
        e.insert(integer_row(c));
    }
    e.rank()
}

/// Computes blocks `(w, j, k)`, `k0 <= k <= k1`, for the requested `(w, j)` gradings.
pub fn cohomology_blocks(problem: &BrstProblem, gradings: &[(Q, Q)], k_range: (i64, i64)) -> Result<Vec<BlockReport>> {
    Ok(run_gradings(problem, None, gradings, k_range)?.blocks)
}

/// Cohomology of `inner` together with the dimension of its image in the
/// cohomology of the larger region `outer`.
///
/// Classes supported near the boundary of a finite region can be exact in a
/// larger one; the image `H(inner) -> H(outer)` discards them. It equals
/// `rank [D | Z] - rank D` where `D` is the incoming map of the outer block
/// and `Z` spans the inner cocycles.
pub fn stable_cohomology_blocks(
    inner: &BrstProblem,
    outer: &BrstProblem,
    gradings: &[(Q, Q)],
    k_range: (i64, i64),
) -> Result<Vec<BlockReport>> {
    Ok(run_gradings(inner, Some(outer), gradings, k_range)?.blocks)
}

struct GradingRun {
    blocks: Vec<BlockReport>,
    /// Consecutive BRST matrices compose to zero.
    square_zero: bool,
    /// Bases of the computed blocks, for further checks.
    bases: Vec<(BlockKey, Vec<Monomial>)>,
}

fn run_gradings(
    inner: &BrstProblem,
    outer: Option<&BrstProblem>,
    gradings: &[(Q, Q)],
    (k0, k1): (i64, i64),
) -> Result<GradingRun> {
    let op = Operator::zero_mode(&inner.sys, &inner.brst);
    let op_out = outer.map(|o| Operator::zero_mode(&o.sys, &o.brst));
    let mut creators = CreatorCache::default();
    let mut creators_out = CreatorCache::default();
    let mut run = GradingRun {
        blocks: Vec::new(),
        square_zero: true,
        bases: Vec::new(),
    };
    for (w, j) in gradings {
        let key = |k| BlockKey {
            weight: w.clone(),
            j: j.clone(),
            k,
        };
        let bases: Vec<Vec<Monomial>> = (k0 - 1..=k1 + 1).map(|k| inner.block_basis(&key(k), &mut creators)).collect();
        let mut maps = Vec::new();
        let mut ranks = Vec::new();
        for i in 0..bases.len() - 1 {
            let cols = if bases[i].is_empty() || bases[i + 1].is_empty() {
                vec![Vec::new(); bases[i].len()]
            } else {
                inner.brst_matrix(&op, &bases[i], &bases[i + 1])?
            };
            ranks.push(rank_of(&cols));
            maps.push(cols);
        }
        for pair in maps.windows(2) {
            if !composes_to_zero(&pair[0], &pair[1]) {
                run.square_zero = false;
            }
        }
        for (idx, k) in (k0..=k1).enumerate() {
            let dim = bases[idx + 1].len();
            if dim == 0 {
                continue;
            }
            let mut report = BlockReport {
                key: key(k),
                dim_ambient: dim,
                rank_in: ranks[idx],
                rank_out: ranks[idx + 1],
                dim_cohomology: dim - ranks[idx] - ranks[idx + 1],
                dim_stable: None,
            };
            if let (Some(outer), Some(op_out)) = (outer, &op_out) {
                report.dim_stable = Some(if report.dim_cohomology == 0 {
                    0
                } else {
                    let cocycles = sparse_kernel(&maps[idx + 1], bases[idx + 2].len());
                    surviving_classes(outer, op_out, &mut creators_out, &report.key, &bases[idx + 1], cocycles)
                });
            }
            run.blocks.push(report);
            run.bases.push((key(k), bases[idx + 1].clone()));
        }
    }
    run.blocks.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(run)
}

/// `rank [D | Z] - rank D` in the outer region, with the outer target block
/// indexed lazily by the monomials that occur.
fn surviving_classes(
    outer: &BrstProblem,
    op: &Operator<'_>,
    creators: &mut CreatorCache,
    key: &BlockKey,
    basis: &[Monomial],
    cocycles: Vec<IntRow>,
) -> usize {
    let source = outer.block_basis(&BlockKey { k: key.k - 1, ..key.clone() }, creators);
    let mut index: HashMap<Monomial, usize> = HashMap::new();
    let mut column = |terms: Vec<(Monomial, Q)>| -> IntRow {
        let mut col: Vec<(usize, Q)> = terms
            .into_iter()
            .map(|(m, c)| {
                let next = index.len();
                (*index.entry(m).or_insert(next), c)
            })
            .collect();
        col.sort_by_key(|(i, _)| *i);
        integer_row(&col)
    };
    let mut e = Echelon::new();
    for v in &source {
        let img = op.apply(v);
        e.insert(column(img.terms().map(|(m, c)| (m.clone(), c.clone())).collect()));
    }
    let boundaries = e.rank();
    for z in cocycles {
        let terms = z.into_iter().map(|(i, x)| (basis[i].clone(), Q::from_integer(x))).collect();
        e.insert(column(terms));
    }
    e.rank() - boundaries
}

/// `second * first == 0` for sparse column matrices.
fn composes_to_zero(first: &[Vec<(usize, Q)>], second: &[Vec<(usize, Q)>]) -> bool {
    first.iter().all(|col| {
        let mut acc: BTreeMap<usize, Q> = BTreeMap::new();
        for (i, x) in col {
            for (r, y) in &second[*i] {
                *acc.entry(*r).or_insert_with(Q::zero) += x * y;
            }
        }
        acc.values().all(Zero::is_zero)
    })
}

/// `Q^2 v = 0` on every basis vector.
pub fn check_square_zero_on(op: &Operator<'_>, basis: &[Monomial]) -> bool {
    basis.iter().all(|v| op.apply_state(&op.apply(v)).is_zero())
}

/// Supercommutators of the BRST zero mode with `L_(1)`, `J_(0)` and `G+-_(n)`, `-1 <= n <= 2`, vanish on the basis.
pub fn check_n2_commutation_on(engine: &OpeEngine<'_>, op: &Operator<'_>, n2: &N2Fields, basis: &[Monomial]) -> bool {
    basis.iter().all(|v| {
        let vs = State::from_monomial(v.clone());
        let qv = op.apply(v);
        for (x, k) in [(&n2.l, 1i64), (&n2.j, 0i64)] {
            if op.apply_state(&engine.mode(x, k, &vs)) != engine.mode(x, k, &qv) {
                return false;
            }
        }
        for g in [&n2.gplus, &n2.gminus] {
            for k in -1..=2 {
                let lhs = op.apply_state(&engine.mode(g, k, &vs));
                if !lhs.plus(&engine.mode(g, k, &qv)).is_zero() {
                    return false;
                }
            }
        }
        true
    })
}
