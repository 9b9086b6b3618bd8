//! Pure λ-terms and VSC terms: variables, parsing, printing, α-equality,
//! capture-avoiding substitution, well-naming.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

mod parse;
mod print;

pub use parse::{parse_term, parse_vsc_term, ParseError};
pub use print::{print_env_entry_style, print_term, print_vsc_term};

/// Term size: variables weigh 1, applications and abstractions add 1.
/// Explicit substitutions are sized like applications.
pub type SizeT = u64;

/// Which name space a variable lives in. Crumbling introduces its own
/// variables, disjoint from those of the calculus, plus the unique
/// sentinel `⋆` that the leftmost explicit substitution of a crumbled
/// environment binds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Calc,
    Crumb,
    Star,
}

/// A variable. Identity is the opaque `id`; the display name lives in the
/// [`Session`] and is only used for printing. `⋆` is the unique id 0.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId {
    id: u64,
    kind: VarKind,
}

/// The distinguished crumbling sentinel `⋆`. Never renamed, never occurs
/// in source text.
pub const STAR: VarId = VarId {
    id: 0,
    kind: VarKind::Star,
};

/// Ids at or above this bound are reserved for read-back-local fresh
/// names; sessions never hand them out, so the two supplies cannot clash.
pub(crate) const RESERVED_ID_BASE: u64 = 1 << 63;

impl VarId {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn is_star(&self) -> bool {
        self.kind == VarKind::Star
    }

    /// True for crumbling variables, `⋆` included (it lives in that space).
    pub fn in_crumb_space(&self) -> bool {
        self.kind != VarKind::Calc
    }

    pub(crate) fn new(id: u64, kind: VarKind) -> VarId {
        VarId { id, kind }
    }
}

impl std::fmt::Debug for VarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            VarKind::Star => write!(f, "*"),
            VarKind::Calc => write!(f, "x{}", self.id),
            VarKind::Crumb => write!(f, "k{}", self.id),
        }
    }
}

/// Owner of the fresh-name supply and of display names. A session's ids
/// are globally unique; concurrent evaluations must use separate sessions.
#[derive(Debug, Clone)]
pub struct Session {
    next: u64,
    names: HashMap<u64, String>,
    free_by_name: HashMap<String, VarId>,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

impl Session {
    pub fn new() -> Session {
        Session {
            next: 1,
            names: HashMap::new(),
            free_by_name: HashMap::new(),
        }
    }

    fn bump(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        assert!(self.next < RESERVED_ID_BASE, "session id space exhausted");
        id
    }

    /// Fresh calculus variable, optionally keeping a display hint.
    pub fn fresh_calc(&mut self, hint: Option<&str>) -> VarId {
        let id = self.bump();
        if let Some(h) = hint {
            self.names.insert(id, h.to_string());
        }
        VarId::new(id, VarKind::Calc)
    }

    /// Fresh crumbling variable.
    pub fn fresh_crumb(&mut self) -> VarId {
        let id = self.bump();
        VarId::new(id, VarKind::Crumb)
    }

    /// The free variable of the given surface name. Interned: parsing the
    /// same name twice in one session yields the same id, so α-equality
    /// across parses treats free names as expected.
    pub fn free_var(&mut self, name: &str) -> VarId {
        if let Some(v) = self.free_by_name.get(name) {
            return *v;
        }
        let v = self.fresh_calc(Some(name));
        self.free_by_name.insert(name.to_string(), v);
        v
    }

    /// Display name for a variable; synthesized when none was recorded.
    pub fn name_of(&self, v: VarId) -> String {
        match v.kind {
            VarKind::Star => "*".to_string(),
            _ => match self.names.get(&v.id) {
                Some(n) => n.clone(),
                None => match v.kind {
                    VarKind::Calc => format!("x{}", v.id),
                    VarKind::Crumb => format!("k{}", v.id),
                    VarKind::Star => unreachable!(),
                },
            },
        }
    }
}

/// Pure λ-term, the input language of both evaluators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Var(VarId),
    Lam(VarId, Rc<Term>),
    App(Rc<Term>, Rc<Term>),
}

/// VSC term: λ-term extended with explicit substitutions.
/// `Es { body, var, def }` denotes `body[var←def]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VscTerm {
    Var(VarId),
    Lam(VarId, Rc<VscTerm>),
    App(Rc<VscTerm>, Rc<VscTerm>),
    Es {
        body: Rc<VscTerm>,
        var: VarId,
        def: Rc<VscTerm>,
    },
}

pub fn var(v: VarId) -> Rc<Term> {
    Rc::new(Term::Var(v))
}

pub fn lam(v: VarId, b: Rc<Term>) -> Rc<Term> {
    Rc::new(Term::Lam(v, b))
}

pub fn app(f: Rc<Term>, a: Rc<Term>) -> Rc<Term> {
    Rc::new(Term::App(f, a))
}

pub fn vvar(v: VarId) -> Rc<VscTerm> {
    Rc::new(VscTerm::Var(v))
}

pub fn vlam(v: VarId, b: Rc<VscTerm>) -> Rc<VscTerm> {
    Rc::new(VscTerm::Lam(v, b))
}

pub fn vapp(f: Rc<VscTerm>, a: Rc<VscTerm>) -> Rc<VscTerm> {
    Rc::new(VscTerm::App(f, a))
}

pub fn ves(body: Rc<VscTerm>, v: VarId, def: Rc<VscTerm>) -> Rc<VscTerm> {
    Rc::new(VscTerm::Es {
        body,
        var: v,
        def,
    })
}

impl Term {
    pub fn to_vsc(&self) -> Rc<VscTerm> {
        match self {
            Term::Var(v) => vvar(*v),
            Term::Lam(v, b) => vlam(*v, b.to_vsc()),
            Term::App(f, a) => vapp(f.to_vsc(), a.to_vsc()),
        }
    }
}

impl VscTerm {
    /// Back to a pure term; `None` if any ES or `⋆` is left.
    pub fn to_pure(&self) -> Option<Rc<Term>> {
        match self {
            VscTerm::Var(v) if v.is_star() => None,
            VscTerm::Var(v) => Some(var(*v)),
            VscTerm::Lam(v, b) => Some(lam(*v, b.to_pure()?)),
            VscTerm::App(f, a) => Some(app(f.to_pure()?, a.to_pure()?)),
            VscTerm::Es { .. } => None,
        }
    }

    pub fn is_lam(&self) -> bool {
        matches!(self, VscTerm::Lam(..))
    }
}

pub fn term_size(t: &Term) -> SizeT {
    match t {
        Term::Var(_) => 1,
        Term::Lam(_, b) => term_size(b) + 1,
        Term::App(f, a) => term_size(f) + term_size(a) + 1,
    }
}

pub fn vsc_term_size(t: &VscTerm) -> SizeT {
    match t {
        VscTerm::Var(_) => 1,
        VscTerm::Lam(_, b) => vsc_term_size(b) + 1,
        VscTerm::App(f, a) => vsc_term_size(f) + vsc_term_size(a) + 1,
        VscTerm::Es { body, def, .. } => vsc_term_size(body) + vsc_term_size(def) + 1,
    }
}

pub fn fv_term(t: &Term) -> HashSet<VarId> {
    let mut out = HashSet::new();
    fn go(t: &Term, bound: &mut Vec<VarId>, out: &mut HashSet<VarId>) {
        match t {
            Term::Var(v) => {
                if !bound.contains(v) {
                    out.insert(*v);
                }
            }
            Term::Lam(v, b) => {
                bound.push(*v);
                go(b, bound, out);
                bound.pop();
            }
            Term::App(f, a) => {
                go(f, bound, out);
                go(a, bound, out);
            }
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

pub fn bv_term(t: &Term) -> HashSet<VarId> {
    let mut out = HashSet::new();
    fn go(t: &Term, out: &mut HashSet<VarId>) {
        match t {
            Term::Var(_) => {}
            Term::Lam(v, b) => {
                out.insert(*v);
                go(b, out);
            }
            Term::App(f, a) => {
                go(f, out);
                go(a, out);
            }
        }
    }
    go(t, &mut out);
    out
}

/// Free variables. In `body[var←def]` the variable scopes over `body` only.
pub fn fv(t: &VscTerm) -> HashSet<VarId> {
    let mut out = HashSet::new();
    fn go(t: &VscTerm, bound: &mut Vec<VarId>, out: &mut HashSet<VarId>) {
        match t {
            VscTerm::Var(v) => {
                if !bound.contains(v) {
                    out.insert(*v);
                }
            }
            VscTerm::Lam(v, b) => {
                bound.push(*v);
                go(b, bound, out);
                bound.pop();
            }
            VscTerm::App(f, a) => {
                go(f, bound, out);
                go(a, bound, out);
            }
            VscTerm::Es { body, var, def } => {
                bound.push(*var);
                go(body, bound, out);
                bound.pop();
                go(def, bound, out);
            }
        }
    }
    go(t, &mut Vec::new(), &mut out);
    out
}

pub fn bv(t: &VscTerm) -> HashSet<VarId> {
    let mut out = HashSet::new();
    fn go(t: &VscTerm, out: &mut HashSet<VarId>) {
        match t {
            VscTerm::Var(_) => {}
            VscTerm::Lam(v, b) => {
                out.insert(*v);
                go(b, out);
            }
            VscTerm::App(f, a) => {
                go(f, out);
                go(a, out);
            }
            VscTerm::Es { body, var, def } => {
                out.insert(*var);
                go(body, out);
                go(def, out);
            }
        }
    }
    go(t, &mut out);
    out
}

fn occurs_free(t: &VscTerm, x: VarId) -> bool {
    match t {
        VscTerm::Var(v) => *v == x,
        VscTerm::Lam(v, b) => *v != x && occurs_free(b, x),
        VscTerm::App(f, a) => occurs_free(f, x) || occurs_free(a, x),
        VscTerm::Es { body, var, def } => {
            (*var != x && occurs_free(body, x)) || occurs_free(def, x)
        }
    }
}

/// α-equality. Bound crumbling variables can only match bound crumbling
/// variables, calculus ones only calculus ones, and `⋆` only itself.
pub fn alpha_eq(a: &VscTerm, b: &VscTerm) -> bool {
    fn go(
        a: &VscTerm,
        b: &VscTerm,
        la: &mut HashMap<VarId, u64>,
        lb: &mut HashMap<VarId, u64>,
        depth: &mut u64,
    ) -> bool {
        match (a, b) {
            (VscTerm::Var(x), VscTerm::Var(y)) => match (la.get(x), lb.get(y)) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            },
            (VscTerm::Lam(x, s), VscTerm::Lam(y, t)) => {
                if !binders_match(*x, *y) {
                    return false;
                }
                *depth += 1;
                let d = *depth;
                let px = la.insert(*x, d);
                let py = lb.insert(*y, d);
                let r = go(s, t, la, lb, depth);
                restore(la, *x, px);
                restore(lb, *y, py);
                r
            }
            (VscTerm::App(f, u), VscTerm::App(g, v)) => {
                go(f, g, la, lb, depth) && go(u, v, la, lb, depth)
            }
            (
                VscTerm::Es {
                    body: s,
                    var: x,
                    def: d1,
                },
                VscTerm::Es {
                    body: t,
                    var: y,
                    def: d2,
                },
            ) => {
                if !binders_match(*x, *y) {
                    return false;
                }
                if !go(d1, d2, la, lb, depth) {
                    return false;
                }
                *depth += 1;
                let d = *depth;
                let px = la.insert(*x, d);
                let py = lb.insert(*y, d);
                let r = go(s, t, la, lb, depth);
                restore(la, *x, px);
                restore(lb, *y, py);
                r
            }
            _ => false,
        }
    }
    fn binders_match(x: VarId, y: VarId) -> bool {
        // ⋆ never renames; other kinds rename within their own space.
        if x.is_star() || y.is_star() {
            x == y
        } else {
            x.kind() == y.kind()
        }
    }
    fn restore(m: &mut HashMap<VarId, u64>, k: VarId, prev: Option<u64>) {
        match prev {
            Some(v) => {
                m.insert(k, v);
            }
            None => {
                m.remove(&k);
            }
        }
    }
    go(a, b, &mut HashMap::new(), &mut HashMap::new(), &mut 0)
}

pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    alpha_eq(&a.to_vsc(), &b.to_vsc())
}

/// Capture-avoiding substitution `t{x←u}`, renaming binders only when a
/// capture would actually happen. Fresh names come from the session.
pub fn subst_meta(session: &mut Session, t: &Rc<VscTerm>, x: VarId, u: &Rc<VscTerm>) -> Rc<VscTerm> {
    let mut fresh = |kind: VarKind, hint: Option<&str>| match kind {
        VarKind::Calc => session.fresh_calc(hint),
        VarKind::Crumb => session.fresh_crumb(),
        VarKind::Star => panic!("⋆ is never renamed"),
    };
    subst_with(t, x, u, &mut fresh)
}

/// Substitution core, parameterized over the fresh-name supply so that
/// read-back can use a reserved id band without a session.
pub(crate) fn subst_with(
    t: &Rc<VscTerm>,
    x: VarId,
    u: &Rc<VscTerm>,
    fresh: &mut dyn FnMut(VarKind, Option<&str>) -> VarId,
) -> Rc<VscTerm> {
    fn go(
        t: &Rc<VscTerm>,
        x: VarId,
        u: &Rc<VscTerm>,
        fvu: &HashSet<VarId>,
        fresh: &mut dyn FnMut(VarKind, Option<&str>) -> VarId,
    ) -> Rc<VscTerm> {
        match t.as_ref() {
            VscTerm::Var(v) => {
                if *v == x {
                    u.clone()
                } else {
                    t.clone()
                }
            }
            VscTerm::Lam(v, b) => {
                if *v == x || !occurs_free(t, x) {
                    return t.clone();
                }
                if fvu.contains(v) {
                    // The binder would capture a free variable of u.
                    let v2 = fresh(v.kind(), None);
                    let b2 = rename_var(b, *v, v2);
                    vlam(v2, go(&b2, x, u, fvu, fresh))
                } else {
                    vlam(*v, go(b, x, u, fvu, fresh))
                }
            }
            VscTerm::App(f, a) => {
                if !occurs_free(t, x) {
                    return t.clone();
                }
                vapp(go(f, x, u, fvu, fresh), go(a, x, u, fvu, fresh))
            }
            VscTerm::Es { body, var, def } => {
                if !occurs_free(t, x) {
                    return t.clone();
                }
                let def2 = go(def, x, u, fvu, fresh);
                if *var == x {
                    return ves(body.clone(), *var, def2);
                }
                if fvu.contains(var) && occurs_free(body, x) {
                    let v2 = fresh(var.kind(), None);
                    let b2 = rename_var(body, *var, v2);
                    ves(go(&b2, x, u, fvu, fresh), v2, def2)
                } else {
                    ves(go(body, x, u, fvu, fresh), *var, def2)
                }
            }
        }
    }
    let fvu: HashSet<VarId> = fv(u);
    go(t, x, u, &fvu, fresh)
}

/// Plain variable-for-variable renaming (no capture check; callers pick a
/// globally fresh target).
pub(crate) fn rename_var(t: &Rc<VscTerm>, from: VarId, to: VarId) -> Rc<VscTerm> {
    match t.as_ref() {
        VscTerm::Var(v) => {
            if *v == from {
                vvar(to)
            } else {
                t.clone()
            }
        }
        VscTerm::Lam(v, b) => {
            if *v == from {
                t.clone()
            } else {
                vlam(*v, rename_var(b, from, to))
            }
        }
        VscTerm::App(f, a) => vapp(rename_var(f, from, to), rename_var(a, from, to)),
        VscTerm::Es { body, var, def } => {
            let def2 = rename_var(def, from, to);
            if *var == from {
                ves(body.clone(), *var, def2)
            } else {
                ves(rename_var(body, from, to), *var, def2)
            }
        }
    }
}

/// Do all binders differ pairwise and from every free variable?
pub fn is_well_named(t: &Term) -> bool {
    let mut binders = HashSet::new();
    fn collect(t: &Term, binders: &mut HashSet<VarId>) -> bool {
        match t {
            Term::Var(_) => true,
            Term::Lam(v, b) => binders.insert(*v) && collect(b, binders),
            Term::App(f, a) => collect(f, binders) && collect(a, binders),
        }
    }
    if !collect(t, &mut binders) {
        return false;
    }
    fv_term(t).is_disjoint(&binders)
}

/// Rename binders so that the result is well-named. Already well-named
/// terms come back unchanged (same ids, shared structure).
pub fn rename_well_named(session: &mut Session, t: &Rc<Term>) -> Rc<Term> {
    if is_well_named(t) {
        return t.clone();
    }
    let free = fv_term(t);
    let mut used: HashSet<VarId> = free;
    fn go(
        session: &mut Session,
        t: &Rc<Term>,
        env: &mut HashMap<VarId, Vec<VarId>>,
        used: &mut HashSet<VarId>,
    ) -> Rc<Term> {
        match t.as_ref() {
            Term::Var(v) => match env.get(v).and_then(|s| s.last()) {
                Some(v2) => var(*v2),
                None => t.clone(),
            },
            Term::Lam(v, b) => {
                let target = if used.contains(v) {
                    let hint = session.name_of(*v);
                    session.fresh_calc(Some(&hint))
                } else {
                    *v
                };
                used.insert(target);
                env.entry(*v).or_default().push(target);
                let b2 = go(session, b, env, used);
                env.get_mut(v).unwrap().pop();
                lam(target, b2)
            }
            Term::App(f, a) => {
                let f2 = go(session, f, env, used);
                let a2 = go(session, a, env, used);
                app(f2, a2)
            }
        }
    }
    go(session, t, &mut HashMap::new(), &mut used)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s() -> Session {
        Session::new()
    }

    #[test]
    fn alpha_eq_identity_lambdas() {
        let mut se = s();
        let x = se.fresh_calc(Some("x"));
        let y = se.fresh_calc(Some("y"));
        let a = vlam(x, vvar(x));
        let b = vlam(y, vvar(y));
        assert!(alpha_eq(&a, &b));
        let c = vlam(x, vlam(y, vvar(x)));
        assert!(!alpha_eq(&a, &c));
    }

    #[test]
    fn alpha_eq_respects_free_vars() {
        let mut se = s();
        let x = se.free_var("x");
        let y = se.free_var("y");
        assert!(!alpha_eq(&vvar(x), &vvar(y)));
        assert!(alpha_eq(&vvar(x), &vvar(x)));
    }

    #[test]
    fn alpha_eq_kind_restriction() {
        let mut se = s();
        let c = se.fresh_calc(None);
        let k = se.fresh_crumb();
        // λ over a calc variable vs ES binder over a crumb one must not match.
        let a = ves(vvar(c), c, vvar(se.free_var("z")));
        let b = ves(vvar(k), k, vvar(se.free_var("z")));
        assert!(!alpha_eq(&a, &b));
    }

    #[test]
    fn subst_simple_and_identity() {
        let mut se = s();
        let x = se.free_var("x");
        let y = se.fresh_calc(Some("y"));
        // (x x){x←λy.y} duplicates the value.
        let t = vapp(vvar(x), vvar(x));
        let v = vlam(y, vvar(y));
        let r = subst_meta(&mut se, &t, x, &v);
        match r.as_ref() {
            VscTerm::App(f, a) => {
                assert!(alpha_eq(f, &v));
                assert!(alpha_eq(a, &v));
            }
            _ => panic!("expected application"),
        }
        // x ∉ fv(t) leaves t untouched (same allocation).
        let z = se.free_var("z");
        let t2 = vvar(z);
        let r2 = subst_meta(&mut se, &t2, x, &v);
        assert!(Rc::ptr_eq(&t2, &r2));
    }

    #[test]
    fn subst_avoids_capture() {
        let mut se = s();
        let x = se.free_var("x");
        let y = se.fresh_calc(Some("y"));
        // (λy.x){x←y} must rename the binder.
        let t = vlam(y, vvar(x));
        let r = subst_meta(&mut se, &t, x, &vvar(y));
        match r.as_ref() {
            VscTerm::Lam(b, body) => {
                assert_ne!(*b, y);
                assert!(matches!(body.as_ref(), VscTerm::Var(v) if *v == y));
            }
            _ => panic!("expected lambda"),
        }
    }

    #[test]
    fn fv_bv_basics() {
        let mut se = s();
        let x = se.fresh_calc(Some("x"));
        let y = se.free_var("y");
        assert!(fv(&vlam(x, vvar(x))).is_empty());
        let t = vapp(vvar(x), vvar(y));
        let f = fv(&t);
        assert!(f.contains(&x) && f.contains(&y) && f.len() == 2);
        // ES: binder scopes over the body only.
        let e = ves(vvar(x), x, vvar(x));
        assert_eq!(fv(&e), [x].into_iter().collect());
    }

    #[test]
    fn rename_well_named_forces_distinct_binders() {
        let mut se = s();
        let x = se.fresh_calc(Some("x"));
        let t = app(lam(x, var(x)), lam(x, var(x)));
        assert!(!is_well_named(&t));
        let r = rename_well_named(&mut se, &t);
        assert!(is_well_named(&r));
        assert!(alpha_eq_term(&t, &r));
        // Idempotent on already well-named input: same ids come back.
        let r2 = rename_well_named(&mut se, &r);
        assert_eq!(r, r2);
    }

    #[test]
    fn star_is_fixed_by_alpha() {
        let t1 = vvar(STAR);
        assert!(alpha_eq(&t1, &vvar(STAR)));
        assert!(STAR.is_star());
        assert_eq!(STAR.kind(), VarKind::Star);
    }
}
