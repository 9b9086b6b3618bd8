//! Structural equivalence ≡ decided by breadth-first closure over the
//! four ES-permuting axioms (com, @r, [·], @l), α-invariant term
//! canonicalization, and the diamond probe that exhaustively explores all
//! external reductions of a term.

use std::collections::{HashMap, HashSet, VecDeque};
use std::rc::Rc;

use crate::syntax::{fv, rename_var, ves, vlam, Session, VarId, VscTerm};

use super::{enumerate_redexes, fire_redex, RedexClass, StepKind};

/// α-invariant fingerprint of a term: binders are numbered in traversal
/// order (kind-tagged so calc and crumb never match), free variables keep
/// their ids. Equal keys ⇔ α-equal terms.
pub type CanonKey = String;

pub fn canon_key(t: &Rc<VscTerm>) -> CanonKey {
    use std::fmt::Write;
    fn go(
        t: &VscTerm,
        env: &mut HashMap<VarId, u64>,
        next: &mut u64,
        out: &mut String,
    ) {
        match t {
            VscTerm::Var(v) => match env.get(v) {
                Some(i) => {
                    let _ = write!(out, "b{i};");
                }
                None => {
                    let _ = write!(out, "f{};", v.id());
                }
            },
            VscTerm::Lam(v, b) => {
                let _ = write!(out, "L{:?}", v.kind());
                let i = *next;
                *next += 1;
                let prev = env.insert(*v, i);
                go(b, env, next, out);
                restore(env, *v, prev);
            }
            VscTerm::App(f, a) => {
                out.push('A');
                go(f, env, next, out);
                go(a, env, next, out);
            }
            VscTerm::Es { body, var, def } => {
                let _ = write!(out, "S{:?}", var.kind());
                // ⋆ can never be α-renamed, so key it specially.
                if var.is_star() {
                    out.push('*');
                }
                go(def, env, next, out);
                let i = *next;
                *next += 1;
                let prev = env.insert(*var, i);
                go(body, env, next, out);
                restore(env, *var, prev);
            }
        }
    }
    fn restore(env: &mut HashMap<VarId, u64>, k: VarId, prev: Option<u64>) {
        match prev {
            Some(v) => {
                env.insert(k, v);
            }
            None => {
                env.remove(&k);
            }
        }
    }
    let mut out = String::new();
    go(t, &mut HashMap::new(), &mut 0, &mut out);
    out
}

/// All terms one ≡-axiom application away (both directions, any
/// position). Input binders are assumed pairwise distinct; the axioms
/// preserve that.
pub fn struct_equiv_neighbors(t: &Rc<VscTerm>) -> Vec<Rc<VscTerm>> {
    let mut out = Vec::new();
    local_rewrites(t, &mut out);
    match t.as_ref() {
        VscTerm::Var(_) => {}
        VscTerm::Lam(v, b) => {
            for b2 in struct_equiv_neighbors(b) {
                out.push(vlam(*v, b2));
            }
        }
        VscTerm::App(f, a) => {
            for f2 in struct_equiv_neighbors(f) {
                out.push(crate::syntax::vapp(f2, a.clone()));
            }
            for a2 in struct_equiv_neighbors(a) {
                out.push(crate::syntax::vapp(f.clone(), a2));
            }
        }
        VscTerm::Es { body, var, def } => {
            for b2 in struct_equiv_neighbors(body) {
                out.push(ves(b2, *var, def.clone()));
            }
            for d2 in struct_equiv_neighbors(def) {
                out.push(ves(body.clone(), *var, d2));
            }
        }
    }
    out
}

fn local_rewrites(t: &Rc<VscTerm>, out: &mut Vec<Rc<VscTerm>>) {
    match t.as_ref() {
        // Two ES stacked on a body.
        VscTerm::Es { body, var: x, def: u } => {
            if let VscTerm::Es {
                body: t0,
                var: y,
                def: p,
            } = body.as_ref()
            {
                // com: t[y←p][x←u] ≡ t[x←u][y←p] when y∉fv(u), x∉fv(p).
                if x != y && !fv(u).contains(y) && !fv(p).contains(x) {
                    out.push(ves(ves(t0.clone(), *x, u.clone()), *y, p.clone()));
                }
                // [·] backward: t[x←u][y←p] ≡ t[x←u[y←p]] when y∉fv(t).
                // Here the stacked pair is body=(t0[y... careful: match
                // shape Es{Es{t0,y,p}, x, u} = t0[y←p][x←u]; the [·]
                // axiom in this orientation reads t0[y←p][x←u] with the
                // roles x↔y swapped below.
            }
            // [·] forward: t[x←u[y←p]] ≡ t[x←u][y←p] when y∉fv(t).
            if let VscTerm::Es {
                body: u0,
                var: y,
                def: p,
            } = u.as_ref()
            {
                if x != y && !fv(body).contains(y) {
                    out.push(ves(
                        ves(body.clone(), *x, u0.clone()),
                        *y,
                        p.clone(),
                    ));
                }
            }
            // [·] backward and @r/@l backward all start from t[x←u] with a
            // compound body.
            match body.as_ref() {
                VscTerm::Es {
                    body: t0,
                    var: y,
                    def: p,
                } => {
                    // (t0[y←p])[x←u] ≡ t0[y←p[x←u]] when x∉fv(t0).
                    if x != y && !fv(t0).contains(x) {
                        out.push(ves(
                            t0.clone(),
                            *y,
                            ves(p.clone(), *x, u.clone()),
                        ));
                    }
                }
                VscTerm::App(f, a) => {
                    // @r backward: (f a)[x←u] ≡ f (a[x←u]) when x∉fv(f).
                    if !fv(f).contains(x) {
                        out.push(crate::syntax::vapp(
                            f.clone(),
                            ves(a.clone(), *x, u.clone()),
                        ));
                    }
                    // @l backward: (f a)[x←u] ≡ (f[x←u]) a when x∉fv(a).
                    if !fv(a).contains(x) {
                        out.push(crate::syntax::vapp(
                            ves(f.clone(), *x, u.clone()),
                            a.clone(),
                        ));
                    }
                }
                _ => {}
            }
        }
        VscTerm::App(f, a) => {
            // @r forward: f (a[x←u]) ≡ (f a)[x←u] when x∉fv(f).
            if let VscTerm::Es {
                body: a0,
                var: x,
                def: u,
            } = a.as_ref()
            {
                if !fv(f).contains(x) {
                    out.push(ves(
                        crate::syntax::vapp(f.clone(), a0.clone()),
                        *x,
                        u.clone(),
                    ));
                }
            }
            // @l forward: (f[x←u]) a ≡ (f a)[x←u] when x∉fv(a).
            if let VscTerm::Es {
                body: f0,
                var: x,
                def: u,
            } = f.as_ref()
            {
                if !fv(a).contains(x) {
                    out.push(ves(
                        crate::syntax::vapp(f0.clone(), a.clone()),
                        *x,
                        u.clone(),
                    ));
                }
            }
        }
        _ => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivOutcome {
    /// b is in the ≡-closure of a.
    Equivalent,
    /// The whole (finite) closure was explored and b is not in it.
    Distinct,
    /// The visit budget ran out first; inconclusive, never treated as a pass.
    BudgetExhausted,
}

/// Decides structural equivalence by BFS over the axiom closure of `a`,
/// up to α. `budget` caps the number of distinct terms visited.
pub fn struct_equiv(
    session: &mut Session,
    a: &Rc<VscTerm>,
    b: &Rc<VscTerm>,
    budget: usize,
) -> EquivOutcome {
    let target = canon_key(b);
    // Distinct binders keep the axiom side conditions α-safe.
    let a = well_name_vsc(session, a);
    let start = canon_key(&a);
    if start == target {
        return EquivOutcome::Equivalent;
    }
    let mut seen: HashSet<CanonKey> = HashSet::new();
    seen.insert(start);
    let mut frontier: VecDeque<Rc<VscTerm>> = VecDeque::new();
    frontier.push_back(a);
    while let Some(t) = frontier.pop_front() {
        for n in struct_equiv_neighbors(&t) {
            let k = canon_key(&n);
            if k == target {
                return EquivOutcome::Equivalent;
            }
            if seen.contains(&k) {
                continue;
            }
            if seen.len() >= budget {
                return EquivOutcome::BudgetExhausted;
            }
            seen.insert(k);
            frontier.push_back(n);
        }
    }
    EquivOutcome::Distinct
}

/// Renames every binder to a fresh id (VSC version of well-naming).
pub(crate) fn well_name_vsc(session: &mut Session, t: &Rc<VscTerm>) -> Rc<VscTerm> {
    match t.as_ref() {
        VscTerm::Var(_) => t.clone(),
        VscTerm::Lam(v, b) => {
            let v2 = fresh_like(session, *v);
            let b2 = well_name_vsc(session, &rename_var(b, *v, v2));
            vlam(v2, b2)
        }
        VscTerm::App(f, a) => {
            crate::syntax::vapp(well_name_vsc(session, f), well_name_vsc(session, a))
        }
        VscTerm::Es { body, var, def } => {
            let def2 = well_name_vsc(session, def);
            if var.is_star() {
                // ⋆ is never renamed.
                let b2 = well_name_vsc(session, body);
                return ves(b2, *var, def2);
            }
            let v2 = fresh_like(session, *var);
            let b2 = well_name_vsc(session, &rename_var(body, *var, v2));
            ves(b2, v2, def2)
        }
    }
}

fn fresh_like(session: &mut Session, v: VarId) -> VarId {
    match v.kind() {
        crate::syntax::VarKind::Calc => {
            let hint = session.name_of(v);
            session.fresh_calc(Some(&hint))
        }
        crate::syntax::VarKind::Crumb => session.fresh_crumb(),
        crate::syntax::VarKind::Star => v,
    }
}

/// Caps for the exhaustive exploration of →x reduction graphs.
#[derive(Debug, Clone, Copy)]
pub struct DiamondCaps {
    pub max_states: usize,
    pub max_depth: usize,
}

impl Default for DiamondCaps {
    fn default() -> Self {
        DiamondCaps {
            max_states: 100_000,
            max_depth: 2_000,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DiamondOutcome {
    /// Every maximal →x sequence reaches the same normal form (up to α)
    /// with the same number of m- and e-steps.
    Verified {
        nf: Rc<VscTerm>,
        m_steps: u64,
        e_steps: u64,
    },
    /// Two reduction orders disagreed; carries a description.
    Failed(String),
    /// Caps were hit before the exploration finished.
    Inconclusive,
}

/// Explores all →x reductions of `t`, checking the random-descent
/// consequences of the diamond property.
pub fn diamond_probe(session: &mut Session, t: &Rc<VscTerm>, caps: DiamondCaps) -> DiamondOutcome {
    struct Probe<'a> {
        session: &'a mut Session,
        // canon(term) → (canon(nf), representative nf, m, e)
        memo: HashMap<CanonKey, (CanonKey, Rc<VscTerm>, u64, u64)>,
        states: usize,
        caps: DiamondCaps,
    }
    enum Res {
        Done(CanonKey, Rc<VscTerm>, u64, u64),
        Stop(DiamondOutcome),
    }
    impl<'a> Probe<'a> {
        fn explore(&mut self, t: &Rc<VscTerm>, depth: usize) -> Res {
            let key = canon_key(t);
            if let Some((nk, nf, m, e)) = self.memo.get(&key) {
                return Res::Done(nk.clone(), nf.clone(), *m, *e);
            }
            if depth >= self.caps.max_depth || self.states >= self.caps.max_states {
                return Res::Stop(DiamondOutcome::Inconclusive);
            }
            self.states += 1;
            let redexes = enumerate_redexes(t, RedexClass::External);
            if redexes.is_empty() {
                let r = (key.clone(), t.clone(), 0, 0);
                self.memo.insert(key, r.clone());
                return Res::Done(r.0, r.1, r.2, r.3);
            }
            let mut agreed: Option<(CanonKey, Rc<VscTerm>, u64, u64)> = None;
            for r in redexes {
                let t2 = fire_redex(self.session, t, &r.path, r.kind);
                let (nk, nf, m, e) = match self.explore(&t2, depth + 1) {
                    Res::Done(nk, nf, m, e) => (nk, nf, m, e),
                    Res::Stop(o) => return Res::Stop(o),
                };
                let (m, e) = match r.kind {
                    StepKind::M => (m + 1, e),
                    StepKind::E => (m, e + 1),
                };
                match &agreed {
                    None => agreed = Some((nk, nf, m, e)),
                    Some((nk0, _, m0, e0)) => {
                        if *nk0 != nk || *m0 != m || *e0 != e {
                            return Res::Stop(DiamondOutcome::Failed(format!(
                                "disagreement below a term: ({m0},{e0}) vs ({m},{e}), nf equal: {}",
                                *nk0 == nk
                            )));
                        }
                    }
                }
            }
            let r = agreed.expect("at least one redex");
            self.memo.insert(key, r.clone());
            Res::Done(r.0, r.1, r.2, r.3)
        }
    }
    let mut p = Probe {
        session,
        memo: HashMap::new(),
        states: 0,
        caps,
    };
    match p.explore(t, 0) {
        Res::Done(_, nf, m, e) => DiamondOutcome::Verified {
            nf,
            m_steps: m,
            e_steps: e,
        },
        Res::Stop(o) => o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_vsc_term, Session};
    use crate::vsc::normalize_external;

    fn pv(s: &mut Session, text: &str) -> Rc<VscTerm> {
        parse_vsc_term(s, text).unwrap()
    }

    #[test]
    fn commutation_of_independent_es() {
        let mut s = Session::new();
        let a = pv(&mut s, "(t)[y<-p][x<-u]");
        let b = pv(&mut s, "(t)[x<-u][y<-p]");
        assert_eq!(
            struct_equiv(&mut s, &a, &b, 10_000),
            EquivOutcome::Equivalent
        );
    }

    #[test]
    fn alpha_variants_are_equivalent() {
        let mut s = Session::new();
        let a = pv(&mut s, r"\x. x[y<-z]");
        let b = pv(&mut s, r"\w. w[q<-z]");
        assert_eq!(
            struct_equiv(&mut s, &a, &b, 10_000),
            EquivOutcome::Equivalent
        );
    }

    #[test]
    fn equivalence_never_substitutes() {
        let mut s = Session::new();
        let a = pv(&mut s, "x[x<-y]");
        let b = pv(&mut s, "y");
        assert_eq!(struct_equiv(&mut s, &a, &b, 10_000), EquivOutcome::Distinct);
    }

    #[test]
    fn at_axioms_move_es_through_applications() {
        let mut s = Session::new();
        // t (p[x←u]) ≡ (t p)[x←u] when x ∉ fv(t).
        let a = pv(&mut s, "t (p[x<-u])");
        let b = pv(&mut s, "(t p)[x<-u]");
        assert_eq!(
            struct_equiv(&mut s, &a, &b, 10_000),
            EquivOutcome::Equivalent
        );
        // And through the left side.
        let c = pv(&mut s, "(t[x<-u]) p");
        assert_eq!(
            struct_equiv(&mut s, &c, &b, 10_000),
            EquivOutcome::Equivalent
        );
        // Nested-definition axiom.
        let d = pv(&mut s, "t[x<-u[y<-p]]");
        let e = pv(&mut s, "t[x<-u][y<-p]");
        assert_eq!(
            struct_equiv(&mut s, &d, &e, 10_000),
            EquivOutcome::Equivalent
        );
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let mut s = Session::new();
        let a = pv(&mut s, "(t)[a<-b][c<-d][e<-f][g<-h]");
        let b = pv(&mut s, "zzz");
        assert_eq!(
            struct_equiv(&mut s, &a, &b, 2),
            EquivOutcome::BudgetExhausted
        );
    }

    #[test]
    fn diamond_on_pi_pi() {
        let mut s = Session::new();
        let t = pv(&mut s, r"((\x. x) (\y. y)) ((\x. x) (\y. y))");
        // Both first steps commute; after both inner redexes the outer
        // application fires as well, so normalization takes 3 m + 3 e.
        match diamond_probe(&mut s, &t, DiamondCaps::default()) {
            DiamondOutcome::Verified { m_steps, e_steps, nf } => {
                assert_eq!(m_steps, 3);
                assert_eq!(e_steps, 3);
                let rep = normalize_external(&mut s, &t, 100);
                assert_eq!((rep.m_steps, rep.e_steps), (3, 3));
                assert!(crate::syntax::alpha_eq(&nf, &rep.result));
            }
            o => panic!("expected verification, got {o:?}"),
        }
    }

    #[test]
    fn diamond_counts_match_normalizer() {
        let mut s = Session::new();
        let samples = [
            r"(\x. y) (\z. z)",
            r"(\x. x x) (\y. y)",
            r"((\x. x) y) ((\w. w) z)",
            r"(x (\y. (\w. w) y))[x<-\q. q]",
        ];
        for txt in samples {
            let t = pv(&mut s, txt);
            let rep = normalize_external(&mut s, &t, 10_000);
            assert!(!rep.exhausted);
            match diamond_probe(&mut s, &t, DiamondCaps::default()) {
                DiamondOutcome::Verified { nf, m_steps, e_steps } => {
                    assert_eq!((m_steps, e_steps), (rep.m_steps, rep.e_steps), "{txt}");
                    assert!(crate::syntax::alpha_eq(&nf, &rep.result));
                }
                o => panic!("diamond probe failed on {txt}: {o:?}"),
            }
        }
    }

    #[test]
    fn normal_terms_are_vacuously_diamond() {
        let mut s = Session::new();
        let t = pv(&mut s, r"x (\z. z z)");
        match diamond_probe(&mut s, &t, DiamondCaps::default()) {
            DiamondOutcome::Verified { m_steps, e_steps, .. } => {
                assert_eq!((m_steps, e_steps), (0, 0));
            }
            o => panic!("unexpected {o:?}"),
        }
    }
}
