//! Reflexive polytopes, cones and fans.
//!
//! Points of `M = M1 + Z` and `N = N1 + Z` are integer vectors whose last
//! coordinate is the degree; `deg` and `deg*` are the last unit vectors.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{det_i64, inverse, rank_dense, solve};
use crate::rational::{q, q_frac, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToricError {
    #[error("polytope has no vertices")]
    Empty,
    #[error("vertices have inconsistent dimensions")]
    Dimension,
    #[error("polytope is not full-dimensional")]
    NotFullDimensional,
    #[error("origin is not an interior point")]
    OriginNotInterior,
    #[error("dual polytope has a non-lattice vertex")]
    NotReflexive,
    #[error("ray {0:?} is not primitive")]
    NonPrimitiveRay(Vec<i64>),
    #[error("cone references missing ray {0}")]
    BadRayIndex(usize),
    #[error("cone {0:?} is not in the fan")]
    UnknownCone(Vec<usize>),
    #[error("bad polytope file: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, ToricError>;

pub fn to_q(v: &[i64]) -> Vec<Q> {
    v.iter().map(|x| q(*x)).collect()
}

/// Scales a rational vector to the primitive integer vector on the same ray.
pub fn primitive(v: &[Q]) -> Vec<i64> {
    let mut l = BigInt::one();
    for x in v {
        l = l.lcm(x.denom());
    }
    let ints: Vec<BigInt> = v.iter().map(|x| x.numer() * (&l / x.denom())).collect();
    let mut g = BigInt::zero();
    for x in &ints {
        g = g.gcd(x);
    }
    if g.is_zero() {
        return vec![0; v.len()];
    }
    ints.iter()
        .map(|x| (x / &g).to_i64().expect("coordinate fits i64"))
        .collect()
}

fn dot_q(a: &[Q], b: &[Q]) -> Q {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extreme rays of the pointed cone `{x : A x >= 0}` by double description.
///
/// `A` must have full column rank.
pub fn cone_rays(constraints: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let dim = constraints.first().ok_or(ToricError::Empty)?.len();
    let a: Vec<Vec<Q>> = constraints.iter().map(|r| to_q(r)).collect();
    // Pick `dim` independent constraints to seed the iteration.
    let mut chosen: Vec<usize> = Vec::new();
    for i in 0..a.len() {
        let mut trial: Vec<Vec<Q>> = chosen.iter().map(|&k| a[k].clone()).collect();
        trial.push(a[i].clone());
        if rank_dense(&trial) == trial.len() {
            chosen.push(i);
            if chosen.len() == dim {
                break;
            }
        }
    }
    if chosen.len() < dim {
        return Err(ToricError::NotFullDimensional);
    }
    let basis: Vec<Vec<Q>> = chosen.iter().map(|&k| a[k].clone()).collect();
    let inv = inverse(&basis).expect("independent constraints");
    // Columns of the inverse are the rays of the simplicial seed cone.
    let mut rays: Vec<Vec<Q>> = (0..dim).map(|c| inv.iter().map(|row| row[c].clone()).collect()).collect();
    let mut processed: Vec<usize> = chosen.clone();
    for i in 0..a.len() {
        if chosen.contains(&i) {
            continue;
        }
        let vals: Vec<Q> = rays.iter().map(|r| dot_q(&a[i], r)).collect();
        let mut next: Vec<Vec<Q>> = Vec::new();
        for (r, v) in rays.iter().zip(&vals) {
            if !v.is_negative() {
                next.push(r.clone());
            }
        }
        for (pi, p) in rays.iter().enumerate() {
            if !vals[pi].is_positive() {
                continue;
            }
            for (ni, n) in rays.iter().enumerate() {
                if !vals[ni].is_negative() {
                    continue;
                }
                // adjacency: common active constraints have rank dim - 2
                let common: Vec<Vec<Q>> = processed
                    .iter()
                    .filter(|&&k| dot_q(&a[k], p).is_zero() && dot_q(&a[k], n).is_zero())
                    .map(|&k| a[k].clone())
                    .collect();
                if dim >= 2 && rank_dense(&common) != dim - 2 {
                    continue;
                }
                let new: Vec<Q> = p
                    .iter()
                    .zip(n)
                    .map(|(x, y)| x * -&vals[ni] + y * &vals[pi])
                    .collect();
                next.push(new);
            }
        }
        processed.push(i);
        rays = next;
    }
    let mut out: BTreeSet<Vec<i64>> = BTreeSet::new();
    for r in &rays {
        let p = primitive(r);
        if p.iter().any(|x| *x != 0) {
            out.insert(p);
        }
    }
    Ok(out.into_iter().collect())
}

fn check_vertices(vertices: &[Vec<i64>]) -> Result<usize> {
    let dim = vertices.first().ok_or(ToricError::Empty)?.len();
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(ToricError::Dimension);
    }
    Ok(dim)
}

/// Facet inequalities `<u, x> >= -c` of a lattice polytope, as `(u, c)` with
/// primitive integer `u`, from the rays of the dual of the cone over it.
pub fn facets(vertices: &[Vec<i64>]) -> Result<Vec<(Vec<i64>, i64)>> {
    let dim = check_vertices(vertices)?;
    let cone_gens: Vec<Vec<i64>> = vertices
        .iter()
        .map(|v| {
            let mut w = v.clone();
            w.push(1);
            w
        })
        .collect();
    let rays = cone_rays(&cone_gens)?;
    Ok(rays
        .into_iter()
        .filter(|r| r[..dim].iter().any(|x| *x != 0))
        .map(|r| (r[..dim].to_vec(), r[dim]))
        .collect())
}

/// Vertices of `{y : <x, y> >= -1 for all x in the polytope}`.
pub fn dual_polytope(delta1: &[Vec<i64>]) -> Result<Vec<Vec<i64>>> {
    let dim = check_vertices(delta1)?;
    // Dual cone of K = cone{(v, 1)}: constraints <(v,1), (y,s)> >= 0.
    let constraints: Vec<Vec<i64>> = delta1
        .iter()
        .map(|v| {
            let mut w = v.clone();
            w.push(1);
            w
        })
        .collect();
    let rays = cone_rays(&constraints)?;
    let mut out = Vec::new();
    for r in rays {
        let s = r[dim];
        if s <= 0 {
            // a ray with s = 0 means the origin lies on the boundary
            return Err(ToricError::OriginNotInterior);
        }
        if r[..dim].iter().any(|x| x % s != 0) {
            return Err(ToricError::NotReflexive);
        }
        out.push(r[..dim].iter().map(|x| x / s).collect::<Vec<i64>>());
    }
    out.sort();
    Ok(out)
}

pub fn is_reflexive_pair(delta1: &[Vec<i64>], delta1_star: &[Vec<i64>]) -> bool {
    let mut expected = delta1_star.to_vec();
    expected.sort();
    expected.dedup();
    match dual_polytope(delta1) {
        Ok(d) => d == expected,
        Err(_) => false,
    }
}

/// Lattice points of `degree * P` with the degree appended as last coordinate,
/// sorted lexicographically.
pub fn lattice_points(vertices: &[Vec<i64>], degree: i64) -> Result<Vec<Vec<i64>>> {
    let dim = check_vertices(vertices)?;
    let ineqs = facets(vertices)?;
    let lo: Vec<i64> = (0..dim).map(|i| vertices.iter().map(|v| v[i]).min().unwrap() * degree).collect();
    let hi: Vec<i64> = (0..dim).map(|i| vertices.iter().map(|v| v[i]).max().unwrap() * degree).collect();
    let (lo, hi): (Vec<i64>, Vec<i64>) = lo.iter().zip(&hi).map(|(a, b)| ((*a).min(*b), (*a).max(*b))).unzip();
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        if ineqs
            .iter()
            .all(|(u, c)| u.iter().zip(&cur).map(|(a, b)| a * b).sum::<i64>() >= -c * degree)
        {
            let mut p = cur.clone();
            p.push(degree);
            out.push(p);
        }
        let mut k = dim;
        loop {
            if k == 0 {
                out.sort();
                return Ok(out);
            }
            k -= 1;
            if cur[k] < hi[k] {
                cur[k] += 1;
                break;
            }
            cur[k] = lo[k];
        }
    }
}

/// A cone given by generators together with its inequality description.
#[derive(Clone, Debug)]
pub struct Cone {
    pub rays: Vec<usize>,
    generators: Vec<Vec<i64>>,
    /// `Some((ineqs, eqs))` when the generators are linearly independent.
    hrep: Option<(Vec<Vec<Q>>, Vec<Vec<Q>>)>,
}

impl Cone {
    fn new(rays: Vec<usize>, all_rays: &[Vec<i64>]) -> Cone {
        let generators: Vec<Vec<i64>> = rays.iter().map(|&i| all_rays[i].clone()).collect();
        let hrep = simplicial_hrep(&generators);
        Cone {
            rays,
            generators,
            hrep,
        }
    }

    pub fn generators(&self) -> &[Vec<i64>] {
        &self.generators
    }

    pub fn is_simplicial(&self) -> bool {
        self.hrep.is_some()
    }

    pub fn contains(&self, x: &[i64]) -> bool {
        if x.iter().all(|v| *v == 0) {
            return true;
        }
        let xq = to_q(x);
        match &self.hrep {
            Some((ineqs, eqs)) => {
                ineqs.iter().all(|u| !dot_q(u, &xq).is_negative()) && eqs.iter().all(|u| dot_q(u, &xq).is_zero())
            }
            None => caratheodory_contains(&self.generators, &xq),
        }
    }
}

/// Inequalities and equalities of a simplicial cone, via completing the
/// generators to a basis and inverting.
fn simplicial_hrep(gens: &[Vec<i64>]) -> Option<(Vec<Vec<Q>>, Vec<Vec<Q>>)> {
    if gens.is_empty() {
        return Some((Vec::new(), Vec::new()));
    }
    let dim = gens[0].len();
    let mut basis: Vec<Vec<Q>> = gens.iter().map(|g| to_q(g)).collect();
    if rank_dense(&basis) < gens.len() {
        return None;
    }
    for e in 0..dim {
        let mut unit = vec![Q::zero(); dim];
        unit[e] = Q::one();
        let mut trial = basis.clone();
        trial.push(unit);
        if rank_dense(&trial) == trial.len() {
            basis = trial;
        }
    }
    // Columns of `basis^T` are the basis vectors; coordinates = (basis^T)^{-1} x.
    let bt: Vec<Vec<Q>> = (0..dim).map(|r| basis.iter().map(|b| b[r].clone()).collect()).collect();
    let inv = inverse(&bt)?;
    let k = gens.len();
    Some((inv[..k].to_vec(), inv[k..].to_vec()))
}

fn subsets_up_to(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        let mut more = Vec::new();
        for s in &out {
            if s.len() < max {
                let mut t = s.clone();
                t.push(i);
                more.push(t);
            }
        }
        out.extend(more);
    }
    out
}

/// Membership in a non-simplicial cone: some independent subset of the
/// generators contains `x` with nonnegative coefficients.
fn caratheodory_contains(gens: &[Vec<i64>], x: &[Q]) -> bool {
    let dim = x.len();
    for subset in subsets_up_to(gens.len(), dim) {
        if subset.is_empty() {
            continue;
        }
        let cols: Vec<Vec<Q>> = subset.iter().map(|&i| to_q(&gens[i])).collect();
        if rank_dense(&cols) < cols.len() {
            continue;
        }
        let a: Vec<Vec<Q>> = (0..dim).map(|r| cols.iter().map(|c| c[r].clone()).collect()).collect();
        if let Some(sol) = solve(&a, x) {
            let check: Vec<Q> = (0..dim).map(|r| dot_q(&a[r], &sol)).collect();
            if check == x && sol.iter().all(|c| !c.is_negative()) {
                return true;
            }
        }
    }
    false
}

/// A fan: primitive rays and cones given by ray-index sets, closed under faces.
#[derive(Clone, Debug)]
pub struct Fan {
    rays: Vec<Vec<i64>>,
    cones: Vec<Cone>,
}

impl Fan {
    /// Builds a fan from maximal cones, adding all faces.
    pub fn new(rays: Vec<Vec<i64>>, maximal: &[Vec<usize>]) -> Result<Fan> {
        for r in &rays {
            let p = primitive(&to_q(r));
            if p != *r || r.iter().all(|x| *x == 0) {
                return Err(ToricError::NonPrimitiveRay(r.clone()));
            }
        }
        let mut all: BTreeSet<Vec<usize>> = BTreeSet::new();
        all.insert(Vec::new());
        for c in maximal {
            if let Some(bad) = c.iter().find(|&&i| i >= rays.len()) {
                return Err(ToricError::BadRayIndex(*bad));
            }
            let mut c = c.clone();
            c.sort();
            c.dedup();
            for s in subsets_up_to(c.len(), c.len()) {
                all.insert(s.iter().map(|&i| c[i]).collect());
            }
        }
        let cones = all.into_iter().map(|c| Cone::new(c, &rays)).collect();
        Ok(Fan { rays, cones })
    }

    pub fn rays(&self) -> &[Vec<i64>] {
        &self.rays
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn dim(&self) -> usize {
        self.rays.first().map_or(0, Vec::len)
    }

    pub fn cone(&self, rays: &[usize]) -> Result<&Cone> {
        let mut key = rays.to_vec();
        key.sort();
        self.cones
            .iter()
            .find(|c| c.rays == key)
            .ok_or(ToricError::UnknownCone(key))
    }

    /// Maximal cones (not a proper face of another cone).
    pub fn maximal_cones(&self) -> Vec<&Cone> {
        self.cones
            .iter()
            .filter(|c| {
                !self
                    .cones
                    .iter()
                    .any(|d| d.rays.len() > c.rays.len() && c.rays.iter().all(|r| d.rays.contains(r)))
            })
            .collect()
    }

    /// Whether some cone contains both `n` and `n1`.
    pub fn in_common_cone(&self, n: &[i64], n1: &[i64]) -> bool {
        self.maximal_cones().iter().any(|c| c.contains(n) && c.contains(n1))
            || (n.iter().all(|x| *x == 0) && n1.iter().all(|x| *x == 0))
    }

    pub fn in_support(&self, n: &[i64]) -> bool {
        self.in_common_cone(n, n)
    }
}

/// Every cone's generators extend to a lattice basis (all `k x k` minors have gcd 1).
pub fn is_smooth_fan(fan: &Fan) -> bool {
    fan.cones.iter().all(|c| is_unimodular(c.generators()))
}

pub fn is_unimodular(gens: &[Vec<i64>]) -> bool {
    let k = gens.len();
    if k == 0 {
        return true;
    }
    let dim = gens[0].len();
    let mut g = BigInt::zero();
    for cols in subsets_up_to(dim, k).into_iter().filter(|s| s.len() == k) {
        let minor: Vec<Vec<i64>> = gens.iter().map(|v| cols.iter().map(|&c| v[c]).collect()).collect();
        g = g.gcd(&det_i64(&minor));
        if g.is_one() {
            return true;
        }
    }
    false
}

/// `cone(C1 x {0}, deg*)` for every cone of a fan in `N1`.
pub fn extend_fan(fan1: &Fan, dim1: usize) -> Fan {
    let mut rays: Vec<Vec<i64>> = fan1
        .rays
        .iter()
        .map(|r| {
            let mut v = r.clone();
            v.push(0);
            v
        })
        .collect();
    let mut deg_star = vec![0; dim1];
    deg_star.push(1);
    let top = rays.len();
    rays.push(deg_star);
    let maximal: Vec<Vec<usize>> = fan1
        .maximal_cones()
        .iter()
        .map(|c| {
            let mut v = c.rays.clone();
            v.push(top);
            v
        })
        .collect();
    let maximal = if maximal.is_empty() { vec![vec![top]] } else { maximal };
    Fan::new(rays, &maximal).expect("extension of a valid fan")
}

/// Nonzero rational coefficients on the lattice points of `Delta` and `Delta*`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientMap {
    pub f: BTreeMap<Vec<i64>, Q>,
    pub g: BTreeMap<Vec<i64>, Q>,
    pub seed: u64,
}

fn random_nonzero(rng: &mut ChaCha8Rng) -> Q {
    let num: i64 = rng.gen_range(1..=97);
    let den: i64 = rng.gen_range(1..=97);
    let sign = if rng.gen_bool(0.5) { -1 } else { 1 };
    q_frac(sign * num, den)
}

pub fn generic_coefficients(delta: &[Vec<i64>], delta_star: &[Vec<i64>], seed: u64) -> CoefficientMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = delta.iter().map(|p| (p.clone(), random_nonzero(&mut rng))).collect();
    let g = delta_star.iter().map(|p| (p.clone(), random_nonzero(&mut rng))).collect();
    CoefficientMap { f, g, seed }
}

/// Input file layout.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolytopeFile {
    pub rank_d1: usize,
    pub delta1_vertices: Vec<Vec<i64>>,
    pub fan_cones: Vec<Vec<usize>>,
    pub rays: Vec<Vec<i64>>,
    #[serde(default)]
    pub mirror_fan_cones: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub mirror_rays: Option<Vec<Vec<i64>>>,
}

/// Reflexive pair with the fan `Sigma1` in `N1` (and optionally the fan on the
/// mirror side, in `M1`).
#[derive(Clone, Debug)]
pub struct ReflexiveData {
    pub rank_d1: usize,
    pub delta1: Vec<Vec<i64>>,
    pub delta1_star: Vec<Vec<i64>>,
    pub fan1: Fan,
    pub mirror_fan1: Option<Fan>,
}

impl ReflexiveData {
    pub fn new(delta1: Vec<Vec<i64>>, fan1: Fan, mirror_fan1: Option<Fan>) -> Result<ReflexiveData> {
        let rank_d1 = check_vertices(&delta1)?;
        let delta1_star = dual_polytope(&delta1)?;
        Ok(ReflexiveData {
            rank_d1,
            delta1,
            delta1_star,
            fan1,
            mirror_fan1,
        })
    }

    pub fn from_file(file: &PolytopeFile) -> Result<ReflexiveData> {
        if file.delta1_vertices.iter().any(|v| v.len() != file.rank_d1) {
            return Err(ToricError::Parse("vertex length differs from rank_d1".into()));
        }
        let fan1 = Fan::new(file.rays.clone(), &file.fan_cones)?;
        let mirror = match (&file.mirror_rays, &file.mirror_fan_cones) {
            (Some(r), Some(c)) => Some(Fan::new(r.clone(), c)?),
            (None, None) => None,
            _ => return Err(ToricError::Parse("mirror_rays and mirror_fan_cones go together".into())),
        };
        ReflexiveData::new(file.delta1_vertices.clone(), fan1, mirror)
    }

    pub fn from_json(text: &str) -> Result<ReflexiveData> {
        let file: PolytopeFile = serde_json::from_str(text).map_err(|e| ToricError::Parse(e.to_string()))?;
        ReflexiveData::from_file(&file)
    }

    /// `rank(M) = d + 2`.
    pub fn rank(&self) -> usize {
        self.rank_d1 + 1
    }

    pub fn d(&self) -> usize {
        self.rank_d1 - 1
    }

    pub fn delta_points(&self) -> Vec<Vec<i64>> {
        lattice_points(&self.delta1, 1).expect("valid polytope")
    }

    pub fn delta_star_points(&self) -> Vec<Vec<i64>> {
        lattice_points(&self.delta1_star, 1).expect("valid polytope")
    }

    pub fn extended_fan(&self) -> Fan {
        extend_fan(&self.fan1, self.rank_d1)
    }

    pub fn is_smooth(&self) -> bool {
        is_smooth_fan(&self.fan1)
    }

    /// The mirror data: roles of `M` and `N` exchanged.
    pub fn swapped(&self) -> Option<ReflexiveData> {
        let mirror = self.mirror_fan1.clone()?;
        Some(ReflexiveData {
            rank_d1: self.rank_d1,
            delta1: self.delta1_star.clone(),
            delta1_star: self.delta1.clone(),
            fan1: mirror,
            mirror_fan1: Some(self.fan1.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_is_self_dual() {
        let d = vec![vec![-1], vec![1]];
        assert_eq!(dual_polytope(&d).unwrap(), d);
        assert_eq!(lattice_points(&d, 1).unwrap(), vec![vec![-1, 1], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn triangle_dual() {
        let small = vec![vec![1, 0], vec![0, 1], vec![-1, -1]];
        let big = vec![vec![-1, -1], vec![-1, 2], vec![2, -1]];
        assert_eq!(dual_polytope(&small).unwrap(), big);
        assert_eq!(dual_polytope(&big).unwrap(), {
            let mut s = small.clone();
            s.sort();
            s
        });
        assert!(is_reflexive_pair(&small, &big));
        assert_eq!(lattice_points(&big, 1).unwrap().len(), 10);
        assert_eq!(lattice_points(&small, 1).unwrap().len(), 4);
        assert_eq!(lattice_points(&small, 2).unwrap().len(), 10);
    }

    #[test]
    fn non_reflexive_and_boundary_origin() {
        assert_eq!(dual_polytope(&[vec![0], vec![1]]), Err(ToricError::OriginNotInterior));
        assert_eq!(dual_polytope(&[vec![-1], vec![2]]), Err(ToricError::NotReflexive));
    }

    #[test]
    fn smoothness() {
        let p2 = Fan::new(vec![vec![1, 0], vec![0, 1], vec![-1, -1]], &[vec![0, 1], vec![1, 2], vec![0, 2]]).unwrap();
        assert!(is_smooth_fan(&p2));
        let bad = Fan::new(vec![vec![1, 0], vec![1, 2]], &[vec![0, 1]]).unwrap();
        assert!(!is_smooth_fan(&bad));
        let empty = Fan::new(vec![], &[]).unwrap();
        assert!(is_smooth_fan(&empty));
        assert!(Fan::new(vec![vec![2, 0]], &[vec![0]]).is_err());
        let ext = extend_fan(&p2, 2);
        assert_eq!(ext.maximal_cones().len(), 3);
        assert!(is_smooth_fan(&ext));
    }

    #[test]
    fn common_cones_p1() {
        let p1 = Fan::new(vec![vec![1], vec![-1]], &[vec![0], vec![1]]).unwrap();
        let ext = extend_fan(&p1, 1);
        assert_eq!(ext.maximal_cones().len(), 2);
        assert!(ext.in_common_cone(&[0, 0], &[0, 0]));
        assert!(!ext.in_common_cone(&[1, 1], &[-1, 1]));
        assert!(ext.in_common_cone(&[1, 1], &[0, 1]));
        let origin = extend_fan(&Fan::new(vec![], &[]).unwrap(), 1);
        assert_eq!(origin.rays(), &[vec![0, 1]]);
    }

    #[test]
    fn coefficients_are_deterministic_and_nonzero() {
        let big = vec![vec![-1, -1], vec![-1, 2], vec![2, -1]];
        let small = vec![vec![1, 0], vec![0, 1], vec![-1, -1]];
        let dp = lattice_points(&big, 1).unwrap();
        let ds = lattice_points(&small, 1).unwrap();
        assert_eq!(generic_coefficients(&dp, &ds, 7), generic_coefficients(&dp, &ds, 7));
        for seed in 1..=100 {
            let c = generic_coefficients(&dp, &ds, seed);
            assert!(c.f.values().chain(c.g.values()).all(|x| !x.is_zero()));
        }
        assert_ne!(generic_coefficients(&dp, &ds, 1), generic_coefficients(&dp, &ds, 2));
    }
}
