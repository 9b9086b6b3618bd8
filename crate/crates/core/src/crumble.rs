//! Crumbled environments: the compilation target of λ-terms and the data
//! structure the machine runs on.
//!
//! An environment is an ordered list of explicit substitutions over
//! bites. ES nodes live in a heap; the variable bound by a node is the
//! node itself, occurrences are links to the binding node, so environment
//! lookup is a pointer dereference. Nodes carry the machine bookkeeping:
//! a reference count of live occurrences, an optional back-link to the
//! unique occurrence (pristine code only), and the flag used by the
//! linear copy.

use std::collections::{HashMap, HashSet, VecDeque};
use std::rc::Rc;

use crate::syntax::{
    subst_with, Session, SizeT, Term, VarId, VarKind, VscTerm, RESERVED_ID_BASE, STAR,
};

/// Heap slot of an explicit substitution node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EsId(u32);

impl EsId {
    pub fn index(&self) -> usize {
        self.0 as usize
    }
}

/// A variable occurrence: either a variable with no binding ES (a global
/// free variable or one bound by an enclosing lambda), or a link to the
/// explicit substitution binding it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarRef {
    Free(VarId),
    Bound(EsId),
}

/// Where an occurrence sits inside the content of its host node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    VarPos,
    AppLeft,
    AppRight,
}

/// Occurrence site: the bite slot of `node` holding the occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccSite {
    pub node: EsId,
    pub slot: Slot,
}

/// Right-hand side of an explicit substitution.
#[derive(Debug, Clone)]
pub enum Bite {
    BVar(VarRef),
    BApp(VarRef, VarRef),
    /// The binder is a calculus variable and the body is non-empty.
    BLam(VarId, Env),
}

impl Bite {
    pub fn is_value(&self) -> bool {
        matches!(self, Bite::BLam(..))
    }
}

/// Ordered list of ES nodes (leftmost first) with a cached size so the
/// machine can move whole environments around in constant time.
#[derive(Debug, Clone, Default)]
pub struct Env {
    items: VecDeque<EsId>,
    size: SizeT,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// `|e|` per the size table: each entry weighs 1 plus its bite.
    pub fn size(&self) -> SizeT {
        self.size
    }

    pub fn iter(&self) -> impl Iterator<Item = EsId> + '_ {
        self.items.iter().copied()
    }

    pub fn front(&self) -> Option<EsId> {
        self.items.front().copied()
    }

    pub fn back(&self) -> Option<EsId> {
        self.items.back().copied()
    }

    pub fn push_back(&mut self, heap: &Heap, id: EsId) {
        self.size += heap.node_size(id);
        self.items.push_back(id);
    }

    pub fn push_front(&mut self, heap: &Heap, id: EsId) {
        self.size += heap.node_size(id);
        self.items.push_front(id);
    }

    pub fn pop_back(&mut self, heap: &Heap) -> Option<EsId> {
        let id = self.items.pop_back()?;
        self.size -= heap.node_size(id);
        Some(id)
    }

    pub fn pop_front(&mut self, heap: &Heap) -> Option<EsId> {
        let id = self.items.pop_front()?;
        self.size -= heap.node_size(id);
        Some(id)
    }

    pub fn append(&mut self, other: &mut Env) {
        self.size += other.size;
        self.items.append(&mut other.items);
        other.size = 0;
    }
}

/// One explicit substitution `[x←b]`.
#[derive(Debug, Clone)]
pub struct EsNode {
    /// Binder identity for printing and read-back; the node id is the
    /// physical identity.
    pub var: VarId,
    pub content: Bite,
    /// Occurrences of the binder across the whole state.
    pub rc: u32,
    /// Back-link to the unique occurrence, maintained while the binder is
    /// known to occur at most once (pristine code).
    pub occurs: Option<OccSite>,
    /// Set transiently by the linear copy; doubles as a re-entrancy guard.
    pub copying: bool,
}

/// Arena of ES nodes with a free list; freed slots report dangling
/// accesses instead of stale data.
#[derive(Debug, Default)]
pub struct Heap {
    slots: Vec<Option<EsNode>>,
    free: Vec<u32>,
}

impl Heap {
    pub fn new() -> Heap {
        Heap::default()
    }

    pub fn alloc(&mut self, var: VarId, content: Bite) -> EsId {
        let node = EsNode {
            var,
            content,
            rc: 0,
            occurs: None,
            copying: false,
        };
        match self.free.pop() {
            Some(i) => {
                self.slots[i as usize] = Some(node);
                EsId(i)
            }
            None => {
                self.slots.push(Some(node));
                EsId((self.slots.len() - 1) as u32)
            }
        }
    }

    pub fn free_node(&mut self, id: EsId) {
        assert!(
            self.slots[id.index()].is_some(),
            "double free of ES node {id:?}"
        );
        self.slots[id.index()] = None;
        self.free.push(id.0);
    }

    pub fn get(&self, id: EsId) -> &EsNode {
        self.slots[id.index()]
            .as_ref()
            .expect("dangling ES reference")
    }

    pub fn get_mut(&mut self, id: EsId) -> &mut EsNode {
        self.slots[id.index()]
            .as_mut()
            .expect("dangling ES reference")
    }

    pub fn is_live(&self, id: EsId) -> bool {
        self.slots
            .get(id.index())
            .map_or(false, |s| s.is_some())
    }

    pub fn live_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    /// `1 + |bite|`: the contribution of one ES to its environment size.
    pub fn node_size(&self, id: EsId) -> SizeT {
        1 + self.bite_size(&self.get(id).content)
    }

    pub fn bite_size(&self, b: &Bite) -> SizeT {
        match b {
            Bite::BVar(_) => 1,
            Bite::BApp(..) => 1,
            Bite::BLam(_, body) => 1 + body.size(),
        }
    }

    /// The variable an occurrence stands for.
    pub fn ref_var(&self, r: VarRef) -> VarId {
        match r {
            VarRef::Free(v) => v,
            VarRef::Bound(id) => self.get(id).var,
        }
    }

    /// Registers a fresh occurrence of `r` at `site`, updating rc and the
    /// occurs link (set when the occurrence is unique, dropped otherwise).
    pub fn add_occurrence(&mut self, r: VarRef, site: OccSite) {
        if let VarRef::Bound(id) = r {
            let n = self.get_mut(id);
            n.rc += 1;
            if n.rc == 1 {
                n.occurs = Some(site);
            } else {
                n.occurs = None;
            }
        }
    }

    pub fn drop_occurrence(&mut self, r: VarRef) {
        if let VarRef::Bound(id) = r {
            let n = self.get_mut(id);
            assert!(n.rc > 0, "reference count underflow on {id:?}");
            n.rc -= 1;
            n.occurs = None;
        }
    }
}

// ---------------------------------------------------------------------
// Crumbling (compilation).

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CrumbleError {
    #[error("crumbling requires a well-named term; rename it first")]
    NotWellNamed,
}

/// Crumbles a well-named λ-term into an environment whose leftmost ES
/// binds `⋆`. Every application becomes a variable-variable bite; fresh
/// crumbling variables name the shared pieces. The output is well-named
/// and pristine.
pub fn crumble(session: &mut Session, heap: &mut Heap, t: &Term) -> Result<Env, CrumbleError> {
    if !crate::syntax::is_well_named(t) {
        return Err(CrumbleError::NotWellNamed);
    }
    Ok(crumble_main(session, heap, t))
}

fn crumble_main(session: &mut Session, heap: &mut Heap, t: &Term) -> Env {
    match t {
        Term::Var(v) => {
            let star = heap.alloc(STAR, Bite::BVar(VarRef::Free(*v)));
            let mut e = Env::new();
            e.push_back(heap, star);
            e
        }
        Term::Lam(x, b) => {
            let body = crumble_main(session, heap, b);
            let star = heap.alloc(STAR, Bite::BLam(*x, body));
            let mut e = Env::new();
            e.push_back(heap, star);
            e
        }
        Term::App(f, a) => crumble_app(session, heap, f, a, None),
    }
}

/// Auxiliary crumbling: a variable stands for the term, plus the
/// environment binding what the variable abbreviates. Variables map to
/// themselves with an empty environment.
pub fn crumble_aux(session: &mut Session, heap: &mut Heap, t: &Term) -> (VarRef, Env) {
    match t {
        Term::Var(v) => (VarRef::Free(*v), Env::new()),
        Term::Lam(x, b) => {
            let body = crumble_main(session, heap, b);
            let z = session.fresh_crumb();
            let node = heap.alloc(z, Bite::BLam(*x, body));
            let mut e = Env::new();
            e.push_back(heap, node);
            (VarRef::Bound(node), e)
        }
        Term::App(f, a) => {
            let z = session.fresh_crumb();
            let e = crumble_app(session, heap, f, a, Some(z));
            let node = e.front().expect("application environment is non-empty");
            (VarRef::Bound(node), e)
        }
    }
}

/// Shared body of the main and auxiliary translations for applications:
/// `[z←xy] e e'` with the application bite leftmost. `binder` is `⋆` for
/// the main translation.
fn crumble_app(
    session: &mut Session,
    heap: &mut Heap,
    f: &Term,
    a: &Term,
    binder: Option<VarId>,
) -> Env {
    let (fr, mut fe) = crumble_aux(session, heap, f);
    let (ar, mut ae) = crumble_aux(session, heap, a);
    let head = heap.alloc(binder.unwrap_or(STAR), Bite::BApp(fr, ar));
    heap.add_occurrence(
        fr,
        OccSite {
            node: head,
            slot: Slot::AppLeft,
        },
    );
    heap.add_occurrence(
        ar,
        OccSite {
            node: head,
            slot: Slot::AppRight,
        },
    );
    let mut e = Env::new();
    e.push_back(heap, head);
    e.append(&mut fe);
    e.append(&mut ae);
    e
}

// ---------------------------------------------------------------------
// Read-back.

/// Fresh-name supply for the rare renamings read-back substitutions may
/// need; it draws from an id band sessions never touch, so results mix
/// freely with session-named terms under α.
pub(crate) struct ReadbackNames {
    next: u64,
}

impl ReadbackNames {
    pub(crate) fn new() -> Self {
        ReadbackNames {
            next: RESERVED_ID_BASE,
        }
    }

    pub(crate) fn fresh(&mut self, kind: VarKind) -> VarId {
        let id = self.next;
        self.next += 1;
        VarId::new(id, kind)
    }
}

pub fn readback_bite(heap: &Heap, b: &Bite) -> Rc<VscTerm> {
    let mut names = ReadbackNames::new();
    readback_bite_with(heap, b, &mut names)
}

pub(crate) fn readback_bite_named(
    heap: &Heap,
    b: &Bite,
    names: &mut ReadbackNames,
) -> Rc<VscTerm> {
    readback_bite_with(heap, b, names)
}

/// Substitution step of a read-back, drawing renames (never needed on
/// well-named states) from the reserved band.
pub(crate) fn subst_readback(
    t: &Rc<VscTerm>,
    var: VarId,
    content: &Rc<VscTerm>,
    names: &mut ReadbackNames,
) -> Rc<VscTerm> {
    let mut fresh = |kind: VarKind, _h: Option<&str>| names.fresh(kind);
    subst_with(t, var, content, &mut fresh)
}

fn readback_bite_with(heap: &Heap, b: &Bite, names: &mut ReadbackNames) -> Rc<VscTerm> {
    match b {
        Bite::BVar(r) => crate::syntax::vvar(heap.ref_var(*r)),
        Bite::BApp(f, a) => crate::syntax::vapp(
            crate::syntax::vvar(heap.ref_var(*f)),
            crate::syntax::vvar(heap.ref_var(*a)),
        ),
        Bite::BLam(x, body) => crate::syntax::vlam(*x, readback_env_with(heap, body, names)),
    }
}

/// Read-back of an environment: the empty environment is `⋆`, an ES
/// unfolds into a meta-substitution when its content is a value or its
/// binder is a crumbling variable, and stays an explicit substitution
/// otherwise.
pub fn readback_env(heap: &Heap, e: &Env) -> Rc<VscTerm> {
    let mut names = ReadbackNames::new();
    readback_env_with(heap, e, &mut names)
}

fn readback_env_with(heap: &Heap, e: &Env, names: &mut ReadbackNames) -> Rc<VscTerm> {
    let mut acc = crate::syntax::vvar(STAR);
    for id in e.iter() {
        acc = readback_extend(heap, acc, id, names);
    }
    acc
}

/// Folds one more ES (to the right of everything already read) into the
/// accumulated term.
fn readback_extend(
    heap: &Heap,
    acc: Rc<VscTerm>,
    id: EsId,
    names: &mut ReadbackNames,
) -> Rc<VscTerm> {
    let node = heap.get(id);
    let content = readback_bite_with(heap, &node.content, names);
    if node.content.is_value() || node.var.in_crumb_space() {
        let mut fresh = |kind: VarKind, _hint: Option<&str>| names.fresh(kind);
        subst_with(&acc, node.var, &content, &mut fresh)
    } else {
        crate::syntax::ves(acc, node.var, content)
    }
}

// ---------------------------------------------------------------------
// Induced substitution and substitution context.

/// The substitution induced by an environment: its unfolded ES, composed
/// left to right.
pub type InducedSubst = HashMap<VarId, Rc<VscTerm>>;

/// The substitution context induced by an environment: its non-unfolded
/// ES, innermost (leftmost) first.
pub type SubstCtx = Vec<(VarId, Rc<VscTerm>)>;

pub fn sigma(heap: &Heap, e: &Env) -> InducedSubst {
    sigma_of_ids(heap, e.iter())
}

pub(crate) fn sigma_of_ids(heap: &Heap, ids: impl Iterator<Item = EsId>) -> InducedSubst {
    let mut names = ReadbackNames::new();
    let mut out: InducedSubst = HashMap::new();
    for id in ids {
        let node = heap.get(id);
        if node.content.is_value() || node.var.in_crumb_space() {
            let content = readback_bite_with(heap, &node.content, &mut names);
            let mut fresh = |kind: VarKind, _h: Option<&str>| names.fresh(kind);
            for v in out.values_mut() {
                *v = subst_with(v, node.var, &content, &mut fresh);
            }
            out.insert(node.var, content);
        }
    }
    out
}

pub fn subst_ctx(heap: &Heap, e: &Env) -> SubstCtx {
    let mut names = ReadbackNames::new();
    let mut out: SubstCtx = Vec::new();
    for id in e.iter() {
        let node = heap.get(id);
        let content = readback_bite_with(heap, &node.content, &mut names);
        if node.content.is_value() || node.var.in_crumb_space() {
            let mut fresh = |kind: VarKind, _h: Option<&str>| names.fresh(kind);
            for (_, t) in out.iter_mut() {
                *t = subst_with(t, node.var, &content, &mut fresh);
            }
        } else {
            out.push((node.var, content));
        }
    }
    out
}

/// Applies a finite substitution to a term (order-independent domains).
pub fn apply_subst(t: &Rc<VscTerm>, s: &InducedSubst) -> Rc<VscTerm> {
    let mut names = ReadbackNames::new();
    let mut cur = t.clone();
    for (v, def) in s {
        let mut fresh = |kind: VarKind, _h: Option<&str>| names.fresh(kind);
        cur = subst_with(&cur, *v, def, &mut fresh);
    }
    cur
}

/// Plugs a term into a substitution context: entries wrap the hole
/// innermost-first.
pub fn plug_subst_ctx(ctx: &SubstCtx, t: Rc<VscTerm>) -> Rc<VscTerm> {
    let mut acc = t;
    for (v, def) in ctx {
        acc = crate::syntax::ves(acc, *v, def.clone());
    }
    acc
}

// ---------------------------------------------------------------------
// Environment variable accounting and checkers.

/// Free variables of an environment per the crumbled-form definition:
/// `fv(ϵ) = {⋆}`, each ES removes its binder and adds its content's.
pub fn env_fv(heap: &Heap, e: &Env) -> HashSet<VarId> {
    // fv(ϵ) = {⋆}; fv(e[x←b]) = fv(e)∖{x} ∪ fv(b). Folding left to right
    // lets each binder cancel the occurrences sitting to its left.
    let mut out: HashSet<VarId> = HashSet::new();
    out.insert(STAR);
    for id in e.iter() {
        let node = heap.get(id);
        out.remove(&node.var);
        bite_fv(heap, &node.content, &mut out);
    }
    out
}

pub fn bite_fv(heap: &Heap, b: &Bite, out: &mut HashSet<VarId>) {
    match b {
        Bite::BVar(r) => {
            out.insert(heap.ref_var(*r));
        }
        Bite::BApp(f, a) => {
            out.insert(heap.ref_var(*f));
            out.insert(heap.ref_var(*a));
        }
        Bite::BLam(x, body) => {
            let mut inner = env_fv(heap, body);
            inner.remove(x);
            inner.remove(&STAR);
            out.extend(inner);
        }
    }
}

pub fn env_bv(heap: &Heap, e: &Env) -> Vec<VarId> {
    let mut out = Vec::new();
    fn go(heap: &Heap, e: &Env, out: &mut Vec<VarId>) {
        for id in e.iter() {
            let node = heap.get(id);
            out.push(node.var);
            if let Bite::BLam(x, body) = &node.content {
                out.push(*x);
                go(heap, body, out);
            }
        }
    }
    go(heap, e, &mut out);
    out
}

pub fn env_dom(heap: &Heap, e: &Env) -> Vec<VarId> {
    e.iter().map(|id| heap.get(id).var).collect()
}

/// Well-named environment: bound variables pairwise distinct (except ⋆)
/// and disjoint from the free ones.
pub fn is_well_named_env(heap: &Heap, e: &Env) -> bool {
    let bv = env_bv(heap, e);
    let mut seen = HashSet::new();
    for v in &bv {
        if v.is_star() {
            continue;
        }
        if !seen.insert(*v) {
            return false;
        }
    }
    let fv = env_fv(heap, e);
    for v in fv {
        if !v.is_star() && seen.contains(&v) {
            return false;
        }
    }
    true
}

/// Environment size per the size table: `|ϵ| = 0`, `|e[x←b]| = 1+|e|+|b|`.
/// Recomputed from scratch; the cached [`Env::size`] must agree.
pub fn env_size(heap: &Heap, e: &Env) -> SizeT {
    let mut total = 0;
    for id in e.iter() {
        total += 1 + bite_size_slow(heap, &heap.get(id).content);
    }
    total
}

fn bite_size_slow(heap: &Heap, b: &Bite) -> SizeT {
    match b {
        Bite::BVar(_) | Bite::BApp(..) => 1,
        Bite::BLam(_, body) => 1 + env_size(heap, body),
    }
}

// ---------------------------------------------------------------------
// Pristine checking (read-back based; debug scale).

/// Pristine environment: every prefix `e'[x←b]` has a crumb-space binder
/// whose unique occurrence sits in open position in the read-back of
/// `e'`, and bites are recursively pristine.
pub fn is_pristine(heap: &Heap, e: &Env) -> bool {
    let ids: Vec<EsId> = e.iter().collect();
    for (i, id) in ids.iter().enumerate() {
        let node = heap.get(*id);
        if !node.var.in_crumb_space() {
            return false;
        }
        if !is_pristine_bite(heap, &node.content) {
            return false;
        }
        let mut prefix = Env::new();
        for p in &ids[..i] {
            prefix.push_back(heap, *p);
        }
        let rb = readback_env(heap, &prefix);
        if !occurs_once_in_open_position(&rb, node.var) {
            return false;
        }
    }
    true
}

pub fn is_pristine_bite(heap: &Heap, b: &Bite) -> bool {
    match b {
        Bite::BVar(_) | Bite::BApp(..) => true,
        Bite::BLam(_, body) => is_pristine(heap, body),
    }
}

/// `t = O⟨x⟩` for an open context O with `x ∉ vars(O)`: x occurs free
/// exactly once, not under any abstraction, and is bound nowhere in t.
fn occurs_once_in_open_position(t: &Rc<VscTerm>, x: VarId) -> bool {
    // (occurrences not under λ, occurrences under λ, binder sightings)
    fn count(t: &VscTerm, x: VarId, under_lam: bool, acc: &mut (u32, u32, u32)) {
        match t {
            VscTerm::Var(v) => {
                if *v == x {
                    if under_lam {
                        acc.1 += 1;
                    } else {
                        acc.0 += 1;
                    }
                }
            }
            VscTerm::Lam(v, b) => {
                if *v == x {
                    acc.2 += 1;
                    return;
                }
                count(b, x, true, acc);
            }
            VscTerm::App(f, a) => {
                count(f, x, under_lam, acc);
                count(a, x, under_lam, acc);
            }
            VscTerm::Es { body, var, def } => {
                if *var == x {
                    acc.2 += 1;
                } else {
                    count(body, x, under_lam, acc);
                }
                count(def, x, under_lam, acc);
            }
        }
    }
    let mut acc = (0, 0, 0);
    count(t, x, false, &mut acc);
    acc == (1, 0, 0)
}

// ---------------------------------------------------------------------
// α-equality of environments and printing.

/// α-equality of two environments living in the same heap: structural
/// walk with a binder correspondence, kinds respected, ⋆ fixed.
pub fn env_alpha_eq(heap: &Heap, a: &Env, b: &Env) -> bool {
    let mut map: HashMap<VarId, VarId> = HashMap::new();
    let mut rmap: HashMap<VarId, VarId> = HashMap::new();
    env_alpha_go(heap, a, b, &mut map, &mut rmap)
}

fn env_alpha_go(
    heap: &Heap,
    a: &Env,
    b: &Env,
    map: &mut HashMap<VarId, VarId>,
    rmap: &mut HashMap<VarId, VarId>,
) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let pairs: Vec<(EsId, EsId)> = a.iter().zip(b.iter()).collect();
    // Bind all entries first: occurrences may sit left of their binder.
    for (ia, ib) in &pairs {
        let (na, nb) = (heap.get(*ia), heap.get(*ib));
        if !bind(na.var, nb.var, map, rmap) {
            return false;
        }
    }
    for (ia, ib) in &pairs {
        let (na, nb) = (heap.get(*ia), heap.get(*ib));
        match (&na.content, &nb.content) {
            (Bite::BVar(x), Bite::BVar(y)) => {
                if !vars_match(heap, *x, *y, map) {
                    return false;
                }
            }
            (Bite::BApp(x1, y1), Bite::BApp(x2, y2)) => {
                if !vars_match(heap, *x1, *x2, map) || !vars_match(heap, *y1, *y2, map) {
                    return false;
                }
            }
            (Bite::BLam(x, ea), Bite::BLam(y, eb)) => {
                if !bind(*x, *y, map, rmap) {
                    return false;
                }
                if !env_alpha_go(heap, ea, eb, map, rmap) {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

fn bind(
    a: VarId,
    b: VarId,
    map: &mut HashMap<VarId, VarId>,
    rmap: &mut HashMap<VarId, VarId>,
) -> bool {
    if a.is_star() || b.is_star() {
        return a == b;
    }
    if a.kind() != b.kind() {
        return false;
    }
    map.insert(a, b);
    rmap.insert(b, a);
    true
}

fn vars_match(heap: &Heap, a: VarRef, b: VarRef, map: &HashMap<VarId, VarId>) -> bool {
    let (va, vb) = (heap.ref_var(a), heap.ref_var(b));
    match map.get(&va) {
        Some(t) => *t == vb,
        None => va == vb,
    }
}

/// Textual environment printer `[x<-b][y<-c]…` for traces.
pub fn print_env(heap: &Heap, e: &Env, session: &Session) -> String {
    let mut out = String::new();
    for id in e.iter() {
        let node = heap.get(id);
        out.push('[');
        out.push_str(&session.name_of(node.var));
        out.push_str("<-");
        out.push_str(&print_bite(heap, &node.content, session));
        out.push(']');
    }
    out
}

pub fn print_bite(heap: &Heap, b: &Bite, session: &Session) -> String {
    match b {
        Bite::BVar(r) => session.name_of(heap.ref_var(*r)),
        Bite::BApp(f, a) => format!(
            "{} {}",
            session.name_of(heap.ref_var(*f)),
            session.name_of(heap.ref_var(*a))
        ),
        Bite::BLam(x, body) => format!(
            "\\{}. {}",
            session.name_of(*x),
            print_env(heap, body, session)
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, parse_term, parse_vsc_term, print_vsc_term, Session};

    fn setup(text: &str) -> (Session, Heap, Env, Rc<Term>) {
        let mut s = Session::new();
        let t = parse_term(&mut s, text).unwrap();
        let mut heap = Heap::new();
        let e = crumble(&mut s, &mut heap, &t).unwrap();
        (s, heap, e, t)
    }

    #[test]
    fn crumble_variable() {
        let (_s, heap, e, _t) = setup("x");
        assert_eq!(e.len(), 1);
        let node = heap.get(e.front().unwrap());
        assert!(node.var.is_star());
        assert!(matches!(node.content, Bite::BVar(VarRef::Free(_))));
        // |[⋆←x]| = 2.
        assert_eq!(env_size(&heap, &e), 2);
        assert_eq!(e.size(), 2);
    }

    #[test]
    fn crumble_abstraction() {
        let (_s, heap, e, _t) = setup(r"\x. x");
        assert_eq!(e.len(), 1);
        let node = heap.get(e.front().unwrap());
        assert!(node.var.is_star());
        assert!(matches!(node.content, Bite::BLam(..)));
    }

    #[test]
    fn crumble_rejects_non_well_named() {
        let mut s = Session::new();
        let x = s.fresh_calc(Some("x"));
        let t = crate::syntax::app(
            crate::syntax::lam(x, crate::syntax::var(x)),
            crate::syntax::lam(x, crate::syntax::var(x)),
        );
        let mut heap = Heap::new();
        assert!(matches!(
            crumble(&mut s, &mut heap, &t),
            Err(CrumbleError::NotWellNamed)
        ));
    }

    #[test]
    fn crumble_ex_vii2_shape() {
        // (λx.(λy.y)(xx))(λz.zz) crumbles to
        // [⋆←k1 k2][k1←λx.[⋆←k3 k4][k3←λy.[⋆←y]][k4←x x]][k2←λz.[⋆←z z]]
        let (s, heap, e, _t) = setup(r"(\x. (\y. y) (x x)) (\z. z z)");
        assert_eq!(e.len(), 3);
        let ids: Vec<EsId> = e.iter().collect();
        let head = heap.get(ids[0]);
        assert!(head.var.is_star());
        match head.content {
            Bite::BApp(VarRef::Bound(l), VarRef::Bound(r)) => {
                assert_eq!(l, ids[1]);
                assert_eq!(r, ids[2]);
            }
            _ => panic!("head must be an application of the two shared values"),
        }
        // Left value: λx.[⋆←k3 k4][k3←λy.[⋆←y]][k4←x x]
        match &heap.get(ids[1]).content {
            Bite::BLam(_, body) => {
                assert_eq!(body.len(), 3);
                let bids: Vec<EsId> = body.iter().collect();
                assert!(heap.get(bids[0]).var.is_star());
                assert!(matches!(heap.get(bids[1]).content, Bite::BLam(..)));
                assert!(matches!(heap.get(bids[2]).content, Bite::BApp(..)));
            }
            _ => panic!("expected value"),
        }
        // rc bookkeeping: both shared values occur exactly once.
        assert_eq!(heap.get(ids[1]).rc, 1);
        assert_eq!(heap.get(ids[2]).rc, 1);
        assert!(heap.get(ids[1]).occurs.is_some());
        assert!(is_well_named_env(&heap, &e));
        assert!(is_pristine(&heap, &e));
        let mut s2 = s.clone();
        let expect = parse_vsc_term(&mut s2, r"(\x. (\y. y) (x x)) (\z. z z)").unwrap();
        assert!(alpha_eq(&readback_env(&heap, &e), &expect));
    }

    #[test]
    fn crumble_aux_on_samples() {
        let mut s = Session::new();
        let mut heap = Heap::new();
        // Variable: (x, ϵ).
        let x = parse_term(&mut s, "x").unwrap();
        let (r, e) = crumble_aux(&mut s, &mut heap, &x);
        assert!(matches!(r, VarRef::Free(_)));
        assert!(e.is_empty());
        // Abstraction: (z, [z←λz.[⋆←z z]]).
        let d = parse_term(&mut s, r"\z. z z").unwrap();
        let (r2, e2) = crumble_aux(&mut s, &mut heap, &d);
        assert_eq!(e2.len(), 1);
        match r2 {
            VarRef::Bound(id) => {
                assert_eq!(id, e2.front().unwrap());
                assert_eq!(heap.get(id).var.kind(), VarKind::Crumb);
            }
            _ => panic!("expected bound ref"),
        }
        // Application of two non-variables: 1 + |e| + |e'| entries.
        let a = parse_term(&mut s, r"(\x. x x) (\y. y y)").unwrap();
        let (_r3, e3) = crumble_aux(&mut s, &mut heap, &a);
        assert_eq!(e3.len(), 3);
    }

    #[test]
    fn readback_inverts_crumbling() {
        for text in [
            "x",
            r"\x. x",
            "x y z",
            r"(\x. (\y. y) (x x)) (\z. z z)",
            r"\f. \x. f (f (f x))",
            r"(\x. x (\y. y x)) (z w)",
        ] {
            let (s, heap, e, t) = setup(text);
            let rb = readback_env(&heap, &e);
            assert!(
                alpha_eq(&rb, &t.to_vsc()),
                "{text}: got {}",
                print_vsc_term(&rb, &s)
            );
            assert!(is_well_named_env(&heap, &e), "{text}");
            assert!(is_pristine(&heap, &e), "{text}");
        }
    }

    #[test]
    fn empty_env_reads_back_to_star() {
        let heap = Heap::new();
        let e = Env::new();
        let rb = readback_env(&heap, &e);
        assert!(matches!(rb.as_ref(), VscTerm::Var(v) if v.is_star()));
        assert_eq!(env_size(&heap, &e), 0);
    }

    #[test]
    fn sigma_of_empty_is_identity_and_modular_law_on_example() {
        let mut s = Session::new();
        let heap0 = Heap::new();
        assert!(sigma(&heap0, &Env::new()).is_empty());

        // Build [⋆←y][w←Ky][K←λz.[⋆←z z]] by hand: e = first entry,
        // e' = the remaining two; σ_{e'} maps K to λz.zz's read-back.
        let mut heap = Heap::new();
        let y = s.free_var("y");
        let z = s.fresh_calc(Some("z"));
        let w = s.fresh_calc(Some("w"));
        let kv = s.fresh_crumb();

        let mut lam_body = Env::new();
        let star_zz = heap.alloc(STAR, Bite::BApp(VarRef::Free(z), VarRef::Free(z)));
        lam_body.push_back(&heap, star_zz);
        let k_node = heap.alloc(kv, Bite::BLam(z, lam_body));
        let w_node = heap.alloc(w, Bite::BApp(VarRef::Bound(k_node), VarRef::Free(y)));
        heap.get_mut(k_node).rc = 1;
        let star_node = heap.alloc(STAR, Bite::BVar(VarRef::Free(y)));

        let mut e = Env::new();
        e.push_back(&heap, star_node);
        let mut e2 = Env::new();
        e2.push_back(&heap, w_node);
        e2.push_back(&heap, k_node);

        let sg = sigma(&heap, &e2);
        assert_eq!(sg.len(), 1);
        let lam_rb = parse_vsc_term(&mut s, r"\z. z z").unwrap();
        assert!(alpha_eq(sg.get(&kv).unwrap(), &lam_rb));

        // Modular read-back: (ee')↓ = L_{e'}⟨e↓ σ_{e'}⟩.
        let mut whole = Env::new();
        for id in e.iter().chain(e2.iter()) {
            whole.push_back(&heap, id);
        }
        let lhs = readback_env(&heap, &whole);
        let ctx = subst_ctx(&heap, &e2);
        let core = apply_subst(&readback_env(&heap, &e), &sg);
        let rhs = plug_subst_ctx(&ctx, core);
        assert!(
            alpha_eq(&lhs, &rhs),
            "lhs {} rhs {}",
            print_vsc_term(&lhs, &s),
            print_vsc_term(&rhs, &s)
        );
        // The full read-back is y[w←(λz.zz) y].
        let expect = parse_vsc_term(&mut s, r"y[w<-(\z. z z) y]").unwrap();
        assert!(alpha_eq(&lhs, &expect), "got {}", print_vsc_term(&lhs, &s));
    }

    #[test]
    fn pristine_rejects_unused_binder() {
        // [k←y][⋆←z] with k unused: k does not occur in the prefix ⋆… the
        // later star entry is irrelevant, the k entry itself fails.
        let mut s = Session::new();
        let mut heap = Heap::new();
        let y = s.free_var("y");
        let z = s.free_var("z");
        let k = s.fresh_crumb();
        let kn = heap.alloc(k, Bite::BVar(VarRef::Free(y)));
        let sn = heap.alloc(STAR, Bite::BVar(VarRef::Free(z)));
        let mut e = Env::new();
        e.push_back(&heap, kn);
        e.push_back(&heap, sn);
        assert!(!is_pristine(&heap, &e));
    }

    #[test]
    fn env_fv_matches_readback_fv_on_crumbled_terms() {
        // fv(t̲) = fv(t) (and equals the read-back's fv on pristine envs).
        for text in ["x y", r"\x. x y", r"(\x. x) (y z)"] {
            let (_s, heap, e, t) = setup(text);
            let from_env: HashSet<VarId> = env_fv(&heap, &e)
                .into_iter()
                .filter(|v| !v.is_star())
                .collect();
            let from_term = crate::syntax::fv_term(&t);
            assert_eq!(from_env, from_term, "{text}");
        }
    }

    #[test]
    fn linear_compilation_bound() {
        for text in [
            "x",
            r"\x. x",
            r"(\x. (\y. y) (x x)) (\z. z z)",
            r"\f. \x. f (f (f x))",
        ] {
            let (_s, heap, e, t) = setup(text);
            assert!(env_size(&heap, &e) <= 2 * crate::syntax::term_size(&t));
        }
    }

    #[test]
    fn env_alpha_eq_spots_differences() {
        let (mut s, mut heap, e1, t) = setup(r"(\x. x x) (\y. y)");
        let t2 = crate::syntax::rename_well_named(&mut s, &t);
        let e2 = crumble(&mut s, &mut heap, &t2).unwrap();
        assert!(env_alpha_eq(&heap, &e1, &e2));
        // Different shape in the same heap must not match.
        let other = parse_term(&mut s, r"(\q. q) (\r. r)").unwrap();
        let e_other = crumble(&mut s, &mut heap, &other).unwrap();
        assert!(!env_alpha_eq(&heap, &e1, &e_other));
    }
}
