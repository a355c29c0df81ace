//! Virasoro and N=2 structures of the free-field systems, their verification,
//! the mirror involution, the topological twist and `(y, q)` supertraces.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::fock::{
    apply_word, enumerate_basis, systems, EnumOptions, FockError, GenId, GeneratorSystem, ModeSymbol, Monomial,
    State,
};
use crate::ope::{render_inline, singular_ope_with, OpeEngine};
use crate::rational::{fmt_q, half, q, Q};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SuperconfError {
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error("system `{0}` does not match the requested structure")]
    MismatchedSystem(String),
    #[error("relation failures: {}", .0.join("; "))]
    Relations(Vec<String>),
    #[error("q order {requested} exceeds the computed truncation {available}")]
    TruncationTooSmall { requested: String, available: String },
}

pub type Result<T> = std::result::Result<T, SuperconfError>;

/// The free-field systems with a built-in conformal structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemKind {
    Boson,
    FermionPairs(usize),
    BcBg(usize),
    Msv(usize),
}

impl SystemKind {
    pub fn system(self) -> GeneratorSystem {
        let mut sys = match self {
            SystemKind::Boson => systems::free_boson(),
            SystemKind::FermionPairs(r) => systems::fermion_pairs(r),
            SystemKind::BcBg(r) => systems::bc_beta_gamma(r),
            SystemKind::Msv(r) => systems::msv(r),
        };
        let l = build_virasoro(&sys, self).expect("matching system");
        sys.set_conformal(l);
        sys
    }

    /// Central charge of the built-in Virasoro element.
    pub fn expected_c(self) -> Q {
        match self {
            SystemKind::Boson => q(1),
            SystemKind::FermionPairs(r) => q(r as i64),
            SystemKind::BcBg(r) | SystemKind::Msv(r) => q(3 * r as i64),
        }
    }
}

fn id(sys: &GeneratorSystem, name: &str) -> Result<GenId> {
    sys.gen_id(name)
        .map_err(|_| SuperconfError::MismatchedSystem(sys.name.clone()))
}

fn word(sys: &GeneratorSystem, modes: &[(GenId, i64)]) -> State {
    let w: Vec<ModeSymbol> = modes.iter().map(|(g, k)| ModeSymbol::new(*g, *k)).collect();
    apply_word(sys, &w, &sys.vacuum()).expect("registered modes")
}

/// `1/2 (d psi . phi - psi . d phi)` summed over `r` fermion pairs.
fn fermion_virasoro(sys: &GeneratorSystem, r: usize) -> Result<State> {
    let mut l = State::zero();
    let h = half();
    for i in 1..=r {
        let phi = id(sys, &format!("phi{i}"))?;
        let psi = id(sys, &format!("psi{i}"))?;
        l.add_scaled(&word(sys, &[(psi, -2), (phi, -1)]), &h);
        l.add_scaled(&word(sys, &[(psi, -1), (phi, -2)]), &-h.clone());
    }
    Ok(l)
}

fn check_generator_count(sys: &GeneratorSystem, expected: usize) -> Result<()> {
    if sys.generators().len() != expected {
        return Err(SuperconfError::MismatchedSystem(sys.name.clone()));
    }
    Ok(())
}

pub fn build_virasoro(sys: &GeneratorSystem, kind: SystemKind) -> Result<State> {
    match kind {
        SystemKind::Boson => {
            check_generator_count(sys, 1)?;
            let d = id(sys, "d")?;
            Ok(word(sys, &[(d, -1), (d, -1)]).scaled(&half()))
        }
        SystemKind::FermionPairs(r) => {
            check_generator_count(sys, 2 * r)?;
            fermion_virasoro(sys, r)
        }
        SystemKind::BcBg(r) => {
            check_generator_count(sys, 4 * r)?;
            let mut l = fermion_virasoro(sys, r)?;
            for i in 1..=r {
                let a = id(sys, &format!("a{i}"))?;
                let b = id(sys, &format!("b{i}"))?;
                l.add_state(&word(sys, &[(a, -1), (b, -1)]));
            }
            Ok(l)
        }
        SystemKind::Msv(r) => {
            check_generator_count(sys, 4 * r)?;
            let mut l = fermion_virasoro(sys, r)?;
            for i in 1..=r {
                let a = id(sys, &format!("a{i}"))?;
                let b = id(sys, &format!("b{i}"))?;
                // a(z) d_z b(z): b[n] = b_(n-1), so d b corresponds to b_(-2)
                l.add_state(&word(sys, &[(a, -1), (b, -2)]));
            }
            Ok(l)
        }
    }
}

/// Central charge from `L_(3) L = (c/2)|0>` followed by the bracket check
/// `[L[m], L[n]] = (m-n) L[m+n] + c/12 (m^3-m) delta_{m+n}` for `|m|,|n| <= 4`
/// on every basis vector of weight `<= cutoff`.
pub fn verify_virasoro(sys: &GeneratorSystem, l: &State, cutoff: &Q) -> Result<Q> {
    let engine = OpeEngine::new(sys);
    let vac = sys.vacuum();
    let top = engine.mode(l, 3, l);
    let half_c = top
        .ratio_to(&vac)
        .ok_or_else(|| SuperconfError::Relations(vec![format!("L_(3)L = {} is not a vacuum multiple", render_inline(sys, &top))]))?;
    let c = half_c * q(2);
    let basis = enumerate_basis(sys, cutoff, &sys.zero_sector(), &EnumOptions::default())?;
    let failures = virasoro_bracket_failures(&engine, l, &c, &basis, 4);
    if failures.is_empty() {
        Ok(c)
    } else {
        Err(SuperconfError::Relations(failures))
    }
}

/// `L[m] = L_(m+1)`.
pub fn virasoro_bracket_failures(
    engine: &OpeEngine<'_>,
    l: &State,
    c: &Q,
    basis: &[Monomial],
    range: i64,
) -> Vec<String> {
    let sys = engine.system();
    let mut failures = Vec::new();
    for v in basis {
        let vs = State::from_monomial(v.clone());
        let lv: Vec<State> = (-range..=range).map(|m| engine.mode(l, m + 1, &vs)).collect();
        for m in -range..=range {
            for n in -range..=range {
                let ln_v = &lv[(n + range) as usize];
                let lm_v = &lv[(m + range) as usize];
                let lhs = engine.mode(l, m + 1, ln_v).minus(&engine.mode(l, n + 1, lm_v));
                let mut rhs = engine.mode(l, m + n + 1, &vs).scaled(&q(m - n));
                if m + n == 0 {
                    rhs.add_scaled(&vs, &(c * q(m * m * m - m) / q(12)));
                }
                if lhs != rhs {
                    failures.push(format!(
                        "[L[{m}],L[{n}]] on {}",
                        render_inline(sys, &vs)
                    ));
                    if failures.len() >= 8 {
                        return failures;
                    }
                }
            }
        }
    }
    failures
}

/// The four fields of an N=2 structure.
#[derive(Clone, Debug, PartialEq)]
pub struct N2Fields {
    pub gplus: State,
    pub gminus: State,
    pub j: State,
    pub l: State,
    pub c_hat: Q,
}

pub fn build_n2(sys: &GeneratorSystem, kind: SystemKind) -> Result<N2Fields> {
    let (r, msv) = match kind {
        SystemKind::BcBg(r) => (r, false),
        SystemKind::Msv(r) => (r, true),
        _ => return Err(SuperconfError::MismatchedSystem(sys.name.clone())),
    };
    check_generator_count(sys, 4 * r)?;
    let mut gp = State::zero();
    let mut gm = State::zero();
    let mut j = State::zero();
    for i in 1..=r {
        let a = id(sys, &format!("a{i}"))?;
        let b = id(sys, &format!("b{i}"))?;
        let phi = id(sys, &format!("phi{i}"))?;
        let psi = id(sys, &format!("psi{i}"))?;
        gp.add_state(&word(sys, &[(phi, -1), (a, -1)]));
        let b_index = if msv { -2 } else { -1 };
        gm.add_state(&word(sys, &[(psi, -1), (b, b_index)]));
        j.add_state(&word(sys, &[(phi, -1), (psi, -1)]));
    }
    Ok(N2Fields {
        gplus: gp,
        gminus: gm,
        j,
        l: build_virasoro(sys, kind)?,
        c_hat: q(r as i64),
    })
}

/// Outcome of [`verify_n2`].
#[derive(Clone, Debug, PartialEq)]
pub struct N2Check {
    pub c_hat: Q,
    /// `G+ G-` equals `lambda` times the standard right-hand side.
    pub lambda: Q,
}

/// Checks every OPE among `(G+, G-, J, L)` against the N=2 list, allowing one
/// overall normalization `lambda` of the `G+ G-` products, and checks that
/// the `L_(1)` grading agrees with monomial weights up to `cutoff`.
pub fn verify_n2(sys: &GeneratorSystem, f: &N2Fields, cutoff: &Q) -> Result<N2Check> {
    let engine = OpeEngine::new(sys);
    verify_n2_with(&engine, f, cutoff)
}

pub fn verify_n2_with(engine: &OpeEngine<'_>, f: &N2Fields, cutoff: &Q) -> Result<N2Check> {
    let sys = engine.system();
    let vac = sys.vacuum();
    let mut failures = Vec::new();
    let t = |s: &State| engine.translate(s);

    let l_top = engine.mode(&f.l, 3, &f.l);
    let c = match l_top.ratio_to(&vac) {
        Some(x) => x * q(2),
        None => {
            return Err(SuperconfError::Relations(vec!["L_(3)L is not a vacuum multiple".into()]));
        }
    };
    let g1 = engine.mode(&f.gplus, 1, &f.gminus);
    let two_j = f.j.scaled(&q(2));
    let lambda = match g1.ratio_to(&two_j) {
        Some(x) if !x.is_zero() => x,
        _ => {
            return Err(SuperconfError::Relations(vec![format!(
                "G+_(1)G- = {} is not a nonzero multiple of 2J",
                render_inline(sys, &g1)
            )]));
        }
    };
    let cv = |x: Q| vac.scaled(&x);
    let twoc3 = &c * q(2) / q(3);
    let relations: Vec<(&str, &State, &State, Vec<State>)> = vec![
        ("L L", &f.l, &f.l, vec![t(&f.l), f.l.scaled(&q(2)), State::zero(), cv(&c / q(2))]),
        ("L J", &f.l, &f.j, vec![t(&f.j), f.j.clone()]),
        ("L G+", &f.l, &f.gplus, vec![t(&f.gplus), f.gplus.scaled(&(q(3) / q(2)))]),
        ("L G-", &f.l, &f.gminus, vec![t(&f.gminus), f.gminus.scaled(&(q(3) / q(2)))]),
        ("J J", &f.j, &f.j, vec![State::zero(), cv(&c / q(3))]),
        ("J G+", &f.j, &f.gplus, vec![f.gplus.clone()]),
        ("J G-", &f.j, &f.gminus, vec![f.gminus.scaled(&-Q::one())]),
        (
            "G+ G-",
            &f.gplus,
            &f.gminus,
            vec![
                f.l.scaled(&q(2)).plus(&t(&f.j)).scaled(&lambda),
                two_j.scaled(&lambda),
                cv(&twoc3 * &lambda),
            ],
        ),
        (
            "G- G+",
            &f.gminus,
            &f.gplus,
            vec![
                f.l.scaled(&q(2)).minus(&t(&f.j)).scaled(&lambda),
                two_j.scaled(&-lambda.clone()),
                cv(&twoc3 * &lambda),
            ],
        ),
        ("G+ G+", &f.gplus, &f.gplus, vec![]),
        ("G- G-", &f.gminus, &f.gminus, vec![]),
    ];
    for (name, a, b, mut expected) in relations {
        while expected.last().is_some_and(State::is_zero) {
            expected.pop();
        }
        let got = singular_ope_with(engine, a, b).coefficients;
        if got != expected {
            let n = got.len().max(expected.len());
            for j in 0..n {
                let g = got.get(j).cloned().unwrap_or_default();
                let e = expected.get(j).cloned().unwrap_or_default();
                if g != e {
                    failures.push(format!(
                        "{name} at (z-w)^-{}: expected {} got {}",
                        j + 1,
                        render_inline(sys, &e),
                        render_inline(sys, &g)
                    ));
                }
            }
        }
    }
    // Weights under L itself.
    for (name, field, w) in [
        ("L", &f.l, q(2)),
        ("J", &f.j, q(1)),
        ("G+", &f.gplus, q(3) / q(2)),
        ("G-", &f.gminus, q(3) / q(2)),
    ] {
        if engine.mode(&f.l, 1, field) != field.scaled(&w) {
            failures.push(format!("{name} is not an L[0] eigenvector of weight {}", fmt_q(&w)));
        }
    }
    if sys.lattice().is_none() {
        let basis = enumerate_basis(sys, cutoff, &sys.zero_sector(), &EnumOptions::default())?;
        for v in &basis {
            let vs = State::from_monomial(v.clone());
            let w = sys.monomial_weight(v);
            if engine.mode(&f.l, 1, &vs) != vs.scaled(&w) {
                failures.push(format!("L[0] grading differs on {}", render_inline(sys, &vs)));
                break;
            }
        }
    }
    if !failures.is_empty() {
        return Err(SuperconfError::Relations(failures));
    }
    Ok(N2Check {
        c_hat: c / q(3),
        lambda,
    })
}

/// `(G-, G+, -J, L)`.
pub fn mirror_involution(f: &N2Fields) -> N2Fields {
    N2Fields {
        gplus: f.gminus.clone(),
        gminus: f.gplus.clone(),
        j: f.j.scaled(&-Q::one()),
        l: f.l.clone(),
        c_hat: f.c_hat.clone(),
    }
}

impl N2Fields {
    /// Rescales `G-` so that `G+ G-` has the standard normalization.
    pub fn normalized(&self, lambda: &Q) -> N2Fields {
        let mut out = self.clone();
        out.gminus = self.gminus.scaled(&(Q::one() / lambda));
        out
    }
}

/// `L_top = L + 1/2 T J`.
pub fn topological_twist(sys: &GeneratorSystem, f: &N2Fields) -> State {
    let engine = OpeEngine::new(sys);
    f.l.plus(&engine.translate(&f.j).scaled(&half()))
}

/// Supertrace table: `(J[0] eigenvalue, L[0] eigenvalue) -> sum of (-1)^parity`.
pub type CharacterTable = BTreeMap<(Q, Q), i64>;

/// Supertrace of `y^{J[0]} q^{L[0]}` over the vacuum-sector basis up to `q_order`.
///
/// `truncation` is the weight up to which the basis is complete; monomials
/// must be simultaneous eigenvectors of `J_(0)` and `L_(1)`.
pub fn character(
    sys: &GeneratorSystem,
    j: Option<&State>,
    q_order: &Q,
    truncation: &Q,
) -> Result<CharacterTable> {
    if q_order > truncation {
        return Err(SuperconfError::TruncationTooSmall {
            requested: fmt_q(q_order),
            available: fmt_q(truncation),
        });
    }
    let basis = enumerate_basis(sys, q_order, &sys.zero_sector(), &EnumOptions::default())?;
    let engine = OpeEngine::new(sys);
    let l = sys.conformal();
    let mut table = CharacterTable::new();
    for v in &basis {
        let vs = State::from_monomial(v.clone());
        let w = match l {
            Some(l) => eigenvalue(&engine, l, 1, &vs).ok_or_else(|| {
                SuperconfError::Relations(vec![format!("L[0] not diagonal on {}", render_inline(sys, &vs))])
            })?,
            None => sys.monomial_weight(v),
        };
        let charge = match j {
            Some(j) => eigenvalue(&engine, j, 0, &vs).ok_or_else(|| {
                SuperconfError::Relations(vec![format!("J[0] not diagonal on {}", render_inline(sys, &vs))])
            })?,
            None => Q::zero(),
        };
        let sign = if sys.monomial_parity(v).is_odd() { -1 } else { 1 };
        *table.entry((charge, w)).or_insert(0) += sign;
    }
    table.retain(|_, v| *v != 0);
    Ok(table)
}

/// `x` with `op_(k) v = x v`, if `v` is an eigenvector.
pub fn eigenvalue(engine: &OpeEngine<'_>, op: &State, k: i64, v: &State) -> Option<Q> {
    engine.mode(op, k, v).ratio_to(v)
}

/// TSV rendering: `y_exponent  q_exponent  coefficient`.
pub fn render_character_tsv(table: &CharacterTable) -> String {
    let mut out = String::from("y_exponent\tq_exponent\tcoefficient\n");
    for ((y, w), c) in table {
        out.push_str(&format!("{}\t{}\t{}\n", fmt_q(y), fmt_q(w), c));
    }
    out
}
