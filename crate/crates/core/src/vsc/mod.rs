//! Reference interpreter for the value substitution calculus: rewriting
//! at a distance, the open and external strategies, normal-form
//! classifiers and structural equivalence. This is the oracle the
//! abstract machine is checked against, so everything here favors being
//! obviously right over being fast.

use std::collections::HashMap;
use std::rc::Rc;

use crate::syntax::{subst_meta, ves, vlam, Session, VarId, VscTerm};

mod equiv;

pub use equiv::{
    canon_key, diamond_probe, struct_equiv, struct_equiv_neighbors, CanonKey, DiamondCaps,
    DiamondOutcome, EquivOutcome,
};

/// Multiplicative (β-like, creates an ES) or exponential (substitutes a
/// value stored in an ES) step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    M,
    E,
}

/// Which contexts a redex is allowed to sit under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RedexClass {
    /// Open contexts: anywhere not under an abstraction.
    Open,
    /// External contexts composed with an open context.
    External,
    /// Unrestricted contexts.
    Full,
}

/// Path from the root to a redex: 0 = lambda body / application function /
/// ES body, 1 = application argument / ES definition.
pub type Path = Vec<u8>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redex {
    pub path: Path,
    pub kind: StepKind,
    pub class: RedexClass,
}

/// Outcome of [`normalize_external`].
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub result: Rc<VscTerm>,
    pub m_steps: u64,
    pub e_steps: u64,
    pub exhausted: bool,
}

// ---------------------------------------------------------------------
// Root rewrite rules, at a distance.

fn peel_es_chain(mut t: &Rc<VscTerm>) -> &Rc<VscTerm> {
    while let VscTerm::Es { body, .. } = t.as_ref() {
        t = body;
    }
    t
}

fn has_root_m(t: &VscTerm) -> bool {
    match t {
        VscTerm::App(f, _) => peel_es_chain(f).is_lam(),
        _ => false,
    }
}

fn has_root_e(t: &VscTerm) -> bool {
    match t {
        VscTerm::Es { def, .. } => peel_es_chain(def).is_lam(),
        _ => false,
    }
}

/// `L⟨λx.p⟩u ↦m L⟨p[x←u]⟩`. The substitution context L moves outside the
/// new ES; binders of L that would capture free variables of `u` are
/// freshened first (never needed on well-named input).
pub fn root_step_m(session: &mut Session, t: &Rc<VscTerm>) -> Option<Rc<VscTerm>> {
    let (f, u) = match t.as_ref() {
        VscTerm::App(f, u) => (f, u),
        _ => return None,
    };
    if !peel_es_chain(f).is_lam() {
        return None;
    }
    fn wrap(
        session: &mut Session,
        f: &Rc<VscTerm>,
        u: &Rc<VscTerm>,
        fvu: &std::collections::HashSet<VarId>,
    ) -> Rc<VscTerm> {
        match f.as_ref() {
            VscTerm::Lam(x, p) => ves(p.clone(), *x, u.clone()),
            VscTerm::Es { body, var, def } => {
                if fvu.contains(var) {
                    let v2 = match var.kind() {
                        crate::syntax::VarKind::Calc => session.fresh_calc(None),
                        crate::syntax::VarKind::Crumb => session.fresh_crumb(),
                        crate::syntax::VarKind::Star => panic!("⋆ cannot capture"),
                    };
                    let body2 = crate::syntax::rename_var(body, *var, v2);
                    ves(wrap(session, &body2, u, fvu), v2, def.clone())
                } else {
                    ves(wrap(session, body, u, fvu), *var, def.clone())
                }
            }
            _ => unreachable!("guarded by peel_es_chain"),
        }
    }
    let fvu = crate::syntax::fv(u);
    Some(wrap(session, f, u, &fvu))
}

/// `t[x←L⟨v⟩] ↦e L⟨t{x←v}⟩` for v an abstraction.
pub fn root_step_e(session: &mut Session, t: &Rc<VscTerm>) -> Option<Rc<VscTerm>> {
    let (body, x, def) = match t.as_ref() {
        VscTerm::Es { body, var, def } => (body, *var, def),
        _ => return None,
    };
    if !peel_es_chain(def).is_lam() {
        return None;
    }
    fn wrap(
        session: &mut Session,
        body: &Rc<VscTerm>,
        x: VarId,
        def: &Rc<VscTerm>,
        fvb: &std::collections::HashSet<VarId>,
    ) -> Rc<VscTerm> {
        match def.as_ref() {
            VscTerm::Lam(..) => subst_meta(session, body, x, def),
            VscTerm::Es {
                body: inner,
                var: y,
                def: d,
            } => {
                if fvb.contains(y) && *y != x {
                    let y2 = match y.kind() {
                        crate::syntax::VarKind::Calc => session.fresh_calc(None),
                        crate::syntax::VarKind::Crumb => session.fresh_crumb(),
                        crate::syntax::VarKind::Star => panic!("⋆ cannot capture"),
                    };
                    let inner2 = crate::syntax::rename_var(inner, *y, y2);
                    ves(wrap(session, body, x, &inner2, fvb), y2, d.clone())
                } else {
                    ves(wrap(session, body, x, inner, fvb), *y, d.clone())
                }
            }
            _ => unreachable!("guarded by peel_es_chain"),
        }
    }
    let fvb = crate::syntax::fv(body);
    Some(wrap(session, body, x, def, &fvb))
}

// ---------------------------------------------------------------------
// Normal-form classifiers.

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Cls {
    Inert,
    Fireball,
    StrongInert,
    StrongFireball,
    Rigid,
}

/// Pointer-memoized grammar membership so that classification of heavily
/// shared terms stays linear in the number of distinct nodes.
struct ClsMemo {
    map: HashMap<(usize, Cls), bool>,
}

impl ClsMemo {
    fn new() -> Self {
        ClsMemo {
            map: HashMap::new(),
        }
    }

    fn check(&mut self, t: &Rc<VscTerm>, c: Cls) -> bool {
        let key = (Rc::as_ptr(t) as usize, c);
        if let Some(v) = self.map.get(&key) {
            return *v;
        }
        let v = match c {
            Cls::Inert => match t.as_ref() {
                VscTerm::Var(_) => true,
                VscTerm::App(f, a) => self.check(f, Cls::Inert) && self.check(a, Cls::Fireball),
                VscTerm::Es { body, def, .. } => {
                    self.check(body, Cls::Inert) && self.check(def, Cls::Inert)
                }
                VscTerm::Lam(..) => false,
            },
            Cls::Fireball => match t.as_ref() {
                VscTerm::Lam(..) => true,
                VscTerm::Es { body, def, .. } => {
                    self.check(body, Cls::Fireball) && self.check(def, Cls::Inert)
                }
                _ => self.check(t, Cls::Inert),
            },
            Cls::StrongInert => match t.as_ref() {
                VscTerm::Var(_) => true,
                VscTerm::App(f, a) => {
                    self.check(f, Cls::StrongInert) && self.check(a, Cls::StrongFireball)
                }
                VscTerm::Es { body, def, .. } => {
                    self.check(body, Cls::StrongInert) && self.check(def, Cls::StrongInert)
                }
                VscTerm::Lam(..) => false,
            },
            Cls::StrongFireball => match t.as_ref() {
                VscTerm::Lam(_, b) => self.check(b, Cls::StrongFireball),
                VscTerm::Es { body, def, .. } => {
                    self.check(body, Cls::StrongFireball) && self.check(def, Cls::StrongInert)
                }
                _ => self.check(t, Cls::StrongInert),
            },
            Cls::Rigid => match t.as_ref() {
                VscTerm::Var(_) => true,
                VscTerm::App(f, _) => self.check(f, Cls::Rigid),
                VscTerm::Es { body, def, .. } => {
                    self.check(body, Cls::Rigid) && self.check(def, Cls::Rigid)
                }
                VscTerm::Lam(..) => false,
            },
        };
        self.map.insert(key, v);
        v
    }
}

pub fn is_inert(t: &Rc<VscTerm>) -> bool {
    ClsMemo::new().check(t, Cls::Inert)
}

pub fn is_fireball(t: &Rc<VscTerm>) -> bool {
    ClsMemo::new().check(t, Cls::Fireball)
}

pub fn is_strong_inert(t: &Rc<VscTerm>) -> bool {
    ClsMemo::new().check(t, Cls::StrongInert)
}

pub fn is_strong_value(t: &Rc<VscTerm>) -> bool {
    match t.as_ref() {
        VscTerm::Lam(_, b) => is_strong_fireball(b),
        _ => false,
    }
}

pub fn is_strong_fireball(t: &Rc<VscTerm>) -> bool {
    ClsMemo::new().check(t, Cls::StrongFireball)
}

pub fn is_rigid(t: &Rc<VscTerm>) -> bool {
    ClsMemo::new().check(t, Cls::Rigid)
}

// ---------------------------------------------------------------------
// Redex enumeration.
//
// External steps close open steps under external contexts, so a position
// fires externally exactly when the path from the root decomposes as
// E⟨O⟩. The walk tracks which grammar nonterminals can still derive the
// remaining context: E and O accept a hole, R cannot (it has no hole
// production and must exit through `rE`).

#[derive(Clone, Copy)]
struct StateSet {
    e: bool,
    r: bool,
    o: bool,
}

impl StateSet {
    fn accepts(&self) -> bool {
        self.e || self.o
    }

    fn dead(&self) -> bool {
        !(self.e || self.r || self.o)
    }
}

fn start_state(class: RedexClass) -> StateSet {
    match class {
        RedexClass::External => StateSet {
            e: true,
            r: false,
            o: false,
        },
        RedexClass::Open => StateSet {
            e: false,
            r: false,
            o: true,
        },
        RedexClass::Full => StateSet {
            e: true,
            r: false,
            o: true,
        },
    }
}

struct Walker<'a> {
    class: RedexClass,
    memo: ClsMemo,
    // Visitor returns false to stop the walk early.
    sink: &'a mut dyn FnMut(Redex) -> bool,
}

impl<'a> Walker<'a> {
    fn rigid(&mut self, t: &Rc<VscTerm>) -> bool {
        self.memo.check(t, Cls::Rigid)
    }

    /// Walks redexes in the deterministic order: a node before its
    /// children (outside-in), the right child before the left
    /// (right-to-left). Returns false when the sink stopped the walk.
    fn walk(&mut self, t: &Rc<VscTerm>, s: StateSet, path: &mut Path) -> bool {
        if self.class == RedexClass::Full {
            return self.walk_full(t, path);
        }
        if s.dead() {
            return true;
        }
        if s.accepts() {
            if has_root_m(t) && !self.emit(path, StepKind::M) {
                return false;
            }
            if has_root_e(t) && !self.emit(path, StepKind::E) {
                return false;
            }
        }
        match t.as_ref() {
            VscTerm::Var(_) => true,
            VscTerm::Lam(_, b) => {
                // Only the E nonterminal crosses a lambda.
                let s2 = StateSet {
                    e: s.e,
                    r: false,
                    o: false,
                };
                path.push(0);
                let cont = self.walk(b, s2, path);
                path.pop();
                cont
            }
            VscTerm::App(f, a) => {
                // Argument first (right-to-left).
                let fr = (s.e || s.r) && self.rigid(f);
                let s_arg = StateSet {
                    e: fr,
                    r: false,
                    o: s.o || s.e,
                };
                path.push(1);
                if !self.walk(a, s_arg, path) {
                    path.pop();
                    return false;
                }
                path.pop();
                let s_fun = StateSet {
                    e: false,
                    r: s.e || s.r,
                    o: s.o || s.e,
                };
                path.push(0);
                let cont = self.walk(f, s_fun, path);
                path.pop();
                cont
            }
            VscTerm::Es { body, def, .. } => {
                // Definition first (right-to-left).
                let br = self.rigid(body);
                let s_def = StateSet {
                    e: false,
                    r: s.e || (s.r && br),
                    o: s.o || s.e,
                };
                path.push(1);
                if !self.walk(def, s_def, path) {
                    path.pop();
                    return false;
                }
                path.pop();
                let dr = self.rigid(def);
                let s_body = StateSet {
                    e: s.e && dr,
                    r: (s.e || s.r) && dr,
                    o: s.o || s.e,
                };
                path.push(0);
                let cont = self.walk(body, s_body, path);
                path.pop();
                cont
            }
        }
    }

    fn walk_full(&mut self, t: &Rc<VscTerm>, path: &mut Path) -> bool {
        if has_root_m(t) && !self.emit(path, StepKind::M) {
            return false;
        }
        if has_root_e(t) && !self.emit(path, StepKind::E) {
            return false;
        }
        match t.as_ref() {
            VscTerm::Var(_) => true,
            VscTerm::Lam(_, b) => {
                path.push(0);
                let cont = self.walk_full(b, path);
                path.pop();
                cont
            }
            VscTerm::App(f, a) | VscTerm::Es { body: f, def: a, .. } => {
                path.push(1);
                if !self.walk_full(a, path) {
                    path.pop();
                    return false;
                }
                path.pop();
                path.push(0);
                let cont = self.walk_full(f, path);
                path.pop();
                cont
            }
        }
    }

    fn emit(&mut self, path: &Path, kind: StepKind) -> bool {
        (self.sink)(Redex {
            path: path.clone(),
            kind,
            class: self.class,
        })
    }
}

/// All redex positions of the given class, in the deterministic traversal
/// order (outside-in, right-to-left).
pub fn enumerate_redexes(t: &Rc<VscTerm>, class: RedexClass) -> Vec<Redex> {
    let mut out = Vec::new();
    let mut sink = |r: Redex| {
        out.push(r);
        true
    };
    let mut w = Walker {
        class,
        memo: ClsMemo::new(),
        sink: &mut sink,
    };
    w.walk(t, start_state(class), &mut Vec::new());
    out
}

fn first_redex(t: &Rc<VscTerm>, class: RedexClass) -> Option<Redex> {
    let mut found = None;
    let mut sink = |r: Redex| {
        found = Some(r);
        false
    };
    let mut w = Walker {
        class,
        memo: ClsMemo::new(),
        sink: &mut sink,
    };
    w.walk(t, start_state(class), &mut Vec::new());
    found
}

/// Fires the redex at `path` (must locate a node where the root rule of
/// the given kind applies).
pub fn fire_redex(
    session: &mut Session,
    t: &Rc<VscTerm>,
    path: &[u8],
    kind: StepKind,
) -> Rc<VscTerm> {
    match path.split_first() {
        None => match kind {
            StepKind::M => root_step_m(session, t).expect("path does not locate an m-redex"),
            StepKind::E => root_step_e(session, t).expect("path does not locate an e-redex"),
        },
        Some((&c, rest)) => match (t.as_ref(), c) {
            (VscTerm::Lam(v, b), 0) => vlam(*v, fire_redex(session, b, rest, kind)),
            (VscTerm::App(f, a), 0) => {
                crate::syntax::vapp(fire_redex(session, f, rest, kind), a.clone())
            }
            (VscTerm::App(f, a), 1) => {
                crate::syntax::vapp(f.clone(), fire_redex(session, a, rest, kind))
            }
            (VscTerm::Es { body, var, def }, 0) => {
                ves(fire_redex(session, body, rest, kind), *var, def.clone())
            }
            (VscTerm::Es { body, var, def }, 1) => {
                ves(body.clone(), *var, fire_redex(session, def, rest, kind))
            }
            _ => panic!("redex path does not match term shape"),
        },
    }
}

/// Repeatedly fires the first external redex of the deterministic
/// traversal until none remains or fuel runs out. The diamond property of
/// the external strategy makes the step counts independent of the order.
pub fn normalize_external(session: &mut Session, t: &Rc<VscTerm>, fuel: u64) -> EvalReport {
    normalize_class(session, t, fuel, RedexClass::External)
}

/// Same driver restricted to open (weak) reduction.
pub fn normalize_open(session: &mut Session, t: &Rc<VscTerm>, fuel: u64) -> EvalReport {
    normalize_class(session, t, fuel, RedexClass::Open)
}

fn normalize_class(
    session: &mut Session,
    t: &Rc<VscTerm>,
    fuel: u64,
    class: RedexClass,
) -> EvalReport {
    let mut cur = t.clone();
    let mut m_steps = 0;
    let mut e_steps = 0;
    let mut left = fuel;
    loop {
        let r = match first_redex(&cur, class) {
            None => {
                return EvalReport {
                    result: cur,
                    m_steps,
                    e_steps,
                    exhausted: false,
                }
            }
            Some(r) => r,
        };
        if left == 0 {
            return EvalReport {
                result: cur,
                m_steps,
                e_steps,
                exhausted: true,
            };
        }
        left -= 1;
        cur = fire_redex(session, &cur, &r.path, r.kind);
        match r.kind {
            StepKind::M => m_steps += 1,
            StepKind::E => e_steps += 1,
        }
    }
}

/// Fires only root-rule redexes of one fixed kind under arbitrary
/// contexts until none is left; `None` when fuel ran out. Used to observe
/// local termination of →m and →e taken separately.
pub fn iterate_single_rule(
    session: &mut Session,
    t: &Rc<VscTerm>,
    kind: StepKind,
    fuel: u64,
) -> Option<(Rc<VscTerm>, u64)> {
    let mut cur = t.clone();
    let mut steps = 0;
    loop {
        let redex = enumerate_redexes(&cur, RedexClass::Full)
            .into_iter()
            .find(|r| r.kind == kind);
        match redex {
            None => return Some((cur, steps)),
            Some(r) => {
                if steps >= fuel {
                    return None;
                }
                cur = fire_redex(session, &cur, &r.path, r.kind);
                steps += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, parse_vsc_term, print_vsc_term, Session};

    fn pv(s: &mut Session, text: &str) -> Rc<VscTerm> {
        parse_vsc_term(s, text).unwrap()
    }

    #[test]
    fn root_m_at_a_distance() {
        // (λx.t)[y←u]p →m t[x←p][y←u]
        let mut s = Session::new();
        let t = pv(&mut s, r"(\x. x a)[y<-u] p");
        let r = root_step_m(&mut s, &t).unwrap();
        let expect = pv(&mut s, r"((x a)[x<-p])[y<-u]");
        assert!(alpha_eq(&r, &expect), "got {}", print_vsc_term(&r, &s));
        // x y has no root m-redex.
        let n = pv(&mut s, "x y");
        assert!(root_step_m(&mut s, &n).is_none());
        // (λx.x)y → x[x←y]
        let b = pv(&mut s, r"(\x. x) y");
        let rb = root_step_m(&mut s, &b).unwrap();
        assert!(alpha_eq(&rb, &pv(&mut s, "x[x<-y]")));
    }

    #[test]
    fn root_e_at_a_distance() {
        let mut s = Session::new();
        let t = pv(&mut s, r"(x x)[x<-\y. y]");
        let r = root_step_e(&mut s, &t).unwrap();
        let expect = pv(&mut s, r"(\y. y) (\y. y)");
        assert!(alpha_eq(&r, &expect));
        // Argument not a value.
        let n = pv(&mut s, "t[x<-y z]");
        assert!(root_step_e(&mut s, &n).is_none());
        // x[x←λy.y] → λy.y
        let b = pv(&mut s, r"x[x<-\y. y]");
        let rb = root_step_e(&mut s, &b).unwrap();
        assert!(alpha_eq(&rb, &pv(&mut s, r"\y. y")));
        // t[x←L⟨v⟩] lifts L outside: t[x←v[y←u]] →e t{x←v}[y←u]
        let l = pv(&mut s, r"(x x)[x<-(\w. w)[y<-u u]]");
        let rl = root_step_e(&mut s, &l).unwrap();
        let expect2 = pv(&mut s, r"((\w. w) (\w. w))[y<-u u]");
        assert!(alpha_eq(&rl, &expect2), "got {}", print_vsc_term(&rl, &s));
    }

    #[test]
    fn fireball_and_inert_examples() {
        let mut s = Session::new();
        // λy.((λx.y)y) is a fireball (a value) but not a strong fireball.
        let t = pv(&mut s, r"\y. (\x. y) y");
        assert!(is_fireball(&t));
        assert!(!is_strong_fireball(&t));
        // x(λz.zz) is a strong inert term.
        let u = pv(&mut s, r"x (\z. z z)");
        assert!(is_strong_inert(&u));
        // y(δδ) is rigid but not inert.
        let v = pv(&mut s, r"y ((\x. x x) (\x. x x))");
        assert!(is_rigid(&v));
        assert!(!is_inert(&v));
        // x(λz.((λy.y)z)) is inert but not strong inert.
        let w = pv(&mut s, r"x (\z. (\y. y) z)");
        assert!(!is_strong_inert(&w));
        assert!(is_inert(&w));
    }

    #[test]
    fn external_excludes_applied_abstraction_bodies() {
        let mut s = Session::new();
        // (λx.t)p: the redex inside the applied value must not fire.
        let t = pv(&mut s, r"(\x. (\y. y) x) p");
        let ext = enumerate_redexes(&t, RedexClass::External);
        assert_eq!(ext.len(), 1);
        assert_eq!(ext[0].path, Vec::<u8>::new());
        assert_eq!(ext[0].kind, StepKind::M);
        // yp(λx.t) does enter the abstraction.
        let u = pv(&mut s, r"y p (\x. (\w. w) x)");
        let ext2 = enumerate_redexes(&u, RedexClass::External);
        assert_eq!(ext2.len(), 1);
        assert_eq!(ext2[0].path, vec![1, 0]);
    }

    #[test]
    fn external_forbids_substituted_value_bodies() {
        let mut s = Session::new();
        // (xx)[x←λy.t]: no external step inside the abstraction that will
        // be substituted.
        let t = pv(&mut s, r"(x x)[x<-\y. (\w. w) y]");
        let ext = enumerate_redexes(&t, RedexClass::External);
        assert_eq!(ext.len(), 1);
        assert_eq!(ext[0].path, Vec::<u8>::new());
        assert_eq!(ext[0].kind, StepKind::E);
        // p[x←y(λz.t)]: the abstraction sits under a rigid head, so its
        // body is external.
        let u = pv(&mut s, r"p[x<-y (\z. (\w. w) z)]");
        let ext2 = enumerate_redexes(&u, RedexClass::External);
        assert_eq!(ext2.len(), 1);
        assert_eq!(ext2[0].path, vec![1, 1, 0]);
    }

    #[test]
    fn open_redexes_on_both_application_sides() {
        let mut s = Session::new();
        let t = pv(&mut s, r"((\x. x) y) ((\x. x) y)");
        let open = enumerate_redexes(&t, RedexClass::Open);
        assert_eq!(open.len(), 2);
        // Right-to-left: the argument side comes first.
        assert_eq!(open[0].path, vec![1]);
        assert_eq!(open[1].path, vec![0]);
        // Open reduction never goes under lambda.
        let u = pv(&mut s, r"\x. (\y. y) x");
        assert!(enumerate_redexes(&u, RedexClass::Open).is_empty());
        assert_eq!(enumerate_redexes(&u, RedexClass::External).len(), 1);
    }

    #[test]
    fn normalize_simple() {
        let mut s = Session::new();
        // (λx.y)(λz.Ω) normalizes to y even though Ω diverges.
        let t = pv(&mut s, r"(\x. y) (\z. (\w. w w) (\w. w w))");
        let rep = normalize_external(&mut s, &t, 1000);
        assert!(!rep.exhausted);
        let y = pv(&mut s, "y");
        assert!(alpha_eq(&rep.result, &y));
        // Derived with this oracle and frozen: exactly one m and one e step.
        assert_eq!((rep.m_steps, rep.e_steps), (1, 1));
        assert!(is_strong_fireball(&rep.result));
    }

    #[test]
    fn normalize_diverges_on_rigid_omega() {
        let mut s = Session::new();
        let t = pv(&mut s, r"y (\z. (\w. w w) (\w. w w))");
        let rep = normalize_external(&mut s, &t, 10_000);
        assert!(rep.exhausted);
    }

    #[test]
    fn vsc_divergence_example() {
        // (λx.δ)(yy)δ diverges in the VSC though Plotkin-normal.
        let mut s = Session::new();
        let t = pv(&mut s, r"(\x. \w. w w) (y y) (\x. x x)");
        let rep = normalize_external(&mut s, &t, 5_000);
        assert!(rep.exhausted);
    }

    #[test]
    fn local_termination_of_single_rules() {
        let mut s = Session::new();
        let terms = [
            r"(\x. x x) (\y. y y)",
            r"(\x. (\y. y) (x x)) (\z. z z)",
            r"((x x)[x<-\y. y y]) ((\w. w) z)",
        ];
        for txt in terms {
            let t = pv(&mut s, txt);
            // Each rule alone is strongly normalizing; generous fuel must
            // never be exhausted.
            assert!(iterate_single_rule(&mut s, &t, StepKind::M, 10_000).is_some());
            assert!(iterate_single_rule(&mut s, &t, StepKind::E, 10_000).is_some());
        }
    }

    #[test]
    fn pi_pi_has_two_external_m_redexes() {
        // Both sides of (II)(II) reduce externally.
        let mut s = Session::new();
        let t = pv(&mut s, r"((\x. x) (\y. y)) ((\x. x) (\y. y))");
        let ms: Vec<_> = enumerate_redexes(&t, RedexClass::External)
            .into_iter()
            .filter(|r| r.kind == StepKind::M)
            .collect();
        assert_eq!(ms.len(), 2);
    }
}
