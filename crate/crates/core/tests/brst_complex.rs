use std::collections::BTreeMap;

use chiral_core::brst::{
    brst_state_unchecked, build_brst_state, check_square_zero_on, cohomology, BlockKey, BrstError, BrstProblem,
    CohomologyConfig, CreatorCache, Operator, SectorRegion,
};
use chiral_core::lattice::lattice_system;
use chiral_core::rational::{half, q, q_frac};
use chiral_core::toric::{generic_coefficients, ReflexiveData};
use chiral_core::{Monomial, Q};

fn fixture(name: &str) -> ReflexiveData {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    ReflexiveData::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn problem(data: &ReflexiveData, region: SectorRegion) -> BrstProblem {
    let coeffs = generic_coefficients(&data.delta_points(), &data.delta_star_points(), 1);
    BrstProblem::new(data, &coeffs, region).unwrap()
}

fn blocks(p: &BrstProblem, keys: &[BlockKey]) -> Vec<Monomial> {
    let mut cache = CreatorCache::default();
    keys.iter().flat_map(|k| p.block_basis(k, &mut cache)).collect()
}

fn low_keys() -> Vec<BlockKey> {
    let mut out = Vec::new();
    for (w, j) in [(q(0), q(0)), (half(), q(1)), (half(), q(0)), (q(1), q(1))] {
        for k in -1..=2 {
            out.push(BlockKey { weight: w.clone(), j: j.clone(), k });
        }
    }
    out
}

#[test]
fn brst_squares_to_zero_on_both_fixtures() {
    for name in ["p1.json", "p2.json"] {
        let data = fixture(name);
        let p = problem(&data, SectorRegion { m_slack: 1, ..SectorRegion::default() });
        let op = Operator::zero_mode(&p.sys, &p.brst);
        let basis = blocks(&p, &low_keys()[..8]);
        assert!(!basis.is_empty());
        assert!(check_square_zero_on(&op, &basis), "{name}");
    }
}

#[test]
fn partial_operators_square_to_zero() {
    let data = fixture("p2.json");
    let p = problem(&data, SectorRegion { m_slack: 1, ..SectorRegion::default() });
    let basis = blocks(&p, &low_keys()[..4]);
    let f_only = brst_state_unchecked(&p.sys, &p.coeffs.f, &BTreeMap::new());
    assert!(check_square_zero_on(&Operator::zero_mode(&p.sys, &f_only), &basis));
    let g_only = brst_state_unchecked(&p.sys, &BTreeMap::new(), &p.coeffs.g);
    assert!(check_square_zero_on(&Operator::zero_mode(&p.sys, &g_only), &basis));
}

#[test]
fn generic_odd_state_is_not_a_differential() {
    let data = fixture("p1.json");
    let p = problem(&data, SectorRegion { m_slack: 1, ..SectorRegion::default() });
    let basis = blocks(&p, &low_keys());
    // an f-term at m and a g-term at n with m.n < -1 fail to anticommute
    let f = BTreeMap::from([(vec![2, 1], q(1))]);
    let g = BTreeMap::from([(vec![-2, 1], q_frac(2, 3))]);
    let bad = brst_state_unchecked(&p.sys, &f, &g);
    assert!(!check_square_zero_on(&Operator::zero_mode(&p.sys, &bad), &basis));
}

#[test]
fn coefficient_domain_is_checked() {
    let data = fixture("p1.json");
    let sys = lattice_system(data.rank());
    let good = generic_coefficients(&data.delta_points(), &data.delta_star_points(), 3);
    assert!(build_brst_state(&sys, &data, &good).is_ok());

    let mut extra = good.clone();
    extra.f.insert(vec![5, 1], q(1));
    assert_eq!(build_brst_state(&sys, &data, &extra).unwrap_err(), BrstError::DomainMismatch("Delta"));

    let mut missing = good.clone();
    let first = missing.g.keys().next().unwrap().clone();
    missing.g.remove(&first);
    assert_eq!(build_brst_state(&sys, &data, &missing).unwrap_err(), BrstError::DomainMismatch("Delta*"));

    let mut zero = good.clone();
    let first = zero.f.keys().next().unwrap().clone();
    zero.f.insert(first.clone(), Q::from_integer(0.into()));
    assert_eq!(build_brst_state(&sys, &data, &zero).unwrap_err(), BrstError::ZeroCoefficient(first));
}

#[test]
fn chart_restricts_sectors_and_terms() {
    let data = fixture("p1.json");
    let coeffs = generic_coefficients(&data.delta_points(), &data.delta_star_points(), 1);
    let chart = BrstProblem::new(&data, &coeffs, SectorRegion { m_slack: 1, chart: Some(vec![0]), ..SectorRegion::default() }).unwrap();
    let cone = chart.fan().cone(&[0, 2]).unwrap().clone();
    for s in 0..3 {
        for t in 0..3 {
            for sector in chart.sectors(s, t) {
                assert!(cone.contains(&sector.0[2..]));
            }
        }
    }
    assert!(chart.coeffs.g.keys().all(|n| cone.contains(n)));
    assert!(chart.coeffs.g.len() < coeffs.g.len());
    let op = Operator::zero_mode(&chart.sys, &chart.brst);
    assert!(check_square_zero_on(&op, &blocks(&chart, &low_keys()[..8])));

    let unknown = BrstProblem::new(&data, &coeffs, SectorRegion { chart: Some(vec![0, 1]), ..SectorRegion::default() });
    assert!(matches!(unknown, Err(BrstError::UnknownCone(_))));
}

#[test]
fn two_point_cohomology_is_stable_and_seed_independent() {
    let data = fixture("p1.json");
    let config = CohomologyConfig {
        cutoff: half(),
        compare_seed: Some(2),
        stable_region: Some(SectorRegion {
            m_slack: 2,
            extra_generators: vec![vec![1, -2], vec![-1, -2]],
            ..SectorRegion::default()
        }),
        ..CohomologyConfig::default()
    };
    let report = cohomology(&data, &config).unwrap();
    let spurious = report.blocks.iter().find(|b| b.key == BlockKey { weight: half(), j: q(1), k: 0 }).unwrap();
    assert_eq!((spurious.dim_cohomology, spurious.dim()), (1, 0));
    assert!(report.verified());
    assert_eq!(report.total_at_twisted_weight(&q(0)), 2);
    let origin = report.blocks.iter().find(|b| b.key == BlockKey { weight: q(0), j: q(0), k: 0 }).unwrap();
    assert_eq!(origin.dim(), 2);
}

#[test]
fn brst_term_counts() {
    for (name, expected) in [("p1.json", 6), ("p2.json", 14)] {
        let data = fixture(name);
        let p = problem(&data, SectorRegion::default());
        assert_eq!(p.coeffs.f.len() + p.coeffs.g.len(), expected, "{name}");
        // every summand lives in its own sector
        let sectors: std::collections::BTreeSet<_> = p.brst.terms().map(|(m, _)| m.sector.clone()).collect();
        assert_eq!(sectors.len(), expected, "{name}");
    }
}

#[test]
fn stable_region_must_contain_the_region() {
    let data = fixture("p1.json");
    for outer in [
        SectorRegion { m_slack: 3, s_floor: Some(0), ..SectorRegion::default() },
        SectorRegion { m_slack: 0, ..SectorRegion::default() },
    ] {
        let config = CohomologyConfig { cutoff: q(0), stable_region: Some(outer), ..CohomologyConfig::default() };
        assert!(matches!(cohomology(&data, &config), Err(BrstError::RegionsNotNested(_))));
    }
}
