//! The strong crumbling abstract machine.
//!
//! A state is `e ◁ K` or `e ▷ K`: a focused environment and a machine
//! context `K ::= ⟨·⟩e' | e[x←λy.K]e'` encoded as a stack of frames plus
//! the right environment adjacent to the hole. The open phase scans the
//! focus right to left firing β steps with useful sharing; the strong
//! phase scans the context left to right, garbage-collecting dead values
//! and entering live ones (implosive sharing). All nine transitions are
//! constant-time except the β copies and garbage collection, which are
//! linear in the moved structure.

use std::collections::HashMap;
use std::rc::Rc;

use crate::crumble::{crumble, Bite, Env, EsId, Heap, OccSite, ReadbackNames, Slot, VarRef};
use crate::syntax::{rename_well_named, Session, SizeT, Term, VarId, VscTerm, STAR};

mod check;
mod multictx;

pub use check::{DebugLevel, InvariantReport};
pub use multictx::{classify_multicontext, MultiClass, MultiCtx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `◁`: evaluating the focus right to left.
    Open,
    /// `▷`: searching the context left to right.
    Strong,
}

/// One entered abstraction: `left[x←λy.⟨·⟩]right` at the enclosing level.
/// The node `es` keeps its identity (occurrences of its binder stay
/// valid); its body is moved out into the focus while inside.
#[derive(Debug)]
pub struct Frame {
    pub left: Env,
    pub es: EsId,
    pub lam_var: VarId,
    pub right: Env,
}

/// Machine context: the hole-adjacent right environment plus the stack of
/// entered abstractions, innermost last.
#[derive(Debug, Default)]
pub struct Ctx {
    pub right: Env,
    pub frames: Vec<Frame>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    BetaV,
    BetaI,
    Ren,
    Sea1,
    Sea2,
    Sea3,
    Gc,
    Sea4,
    Sea5,
}

impl TransitionKind {
    pub fn is_beta(&self) -> bool {
        matches!(self, TransitionKind::BetaV | TransitionKind::BetaI)
    }

    pub fn name(&self) -> &'static str {
        match self {
            TransitionKind::BetaV => "beta_v",
            TransitionKind::BetaI => "beta_i",
            TransitionKind::Ren => "ren",
            TransitionKind::Sea1 => "sea1",
            TransitionKind::Sea2 => "sea2",
            TransitionKind::Sea3 => "sea3",
            TransitionKind::Gc => "gc",
            TransitionKind::Sea4 => "sea4",
            TransitionKind::Sea5 => "sea5",
        }
    }
}

pub const ALL_TRANSITIONS: [TransitionKind; 9] = [
    TransitionKind::BetaV,
    TransitionKind::BetaI,
    TransitionKind::Ren,
    TransitionKind::Sea1,
    TransitionKind::Sea2,
    TransitionKind::Sea3,
    TransitionKind::Gc,
    TransitionKind::Sea4,
    TransitionKind::Sea5,
];

/// Per-transition counts of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub beta_v: u64,
    pub beta_i: u64,
    pub ren: u64,
    pub sea1: u64,
    pub sea2: u64,
    pub sea3: u64,
    pub gc: u64,
    pub sea4: u64,
    pub sea5: u64,
}

impl Counters {
    pub fn beta_total(&self) -> u64 {
        self.beta_v + self.beta_i
    }

    pub fn overhead_total(&self) -> u64 {
        self.ren + self.sea1 + self.sea2 + self.sea3 + self.gc + self.sea4 + self.sea5
    }

    pub fn total(&self) -> u64 {
        self.beta_total() + self.overhead_total()
    }

    pub fn get(&self, k: TransitionKind) -> u64 {
        match k {
            TransitionKind::BetaV => self.beta_v,
            TransitionKind::BetaI => self.beta_i,
            TransitionKind::Ren => self.ren,
            TransitionKind::Sea1 => self.sea1,
            TransitionKind::Sea2 => self.sea2,
            TransitionKind::Sea3 => self.sea3,
            TransitionKind::Gc => self.gc,
            TransitionKind::Sea4 => self.sea4,
            TransitionKind::Sea5 => self.sea5,
        }
    }

    fn bump(&mut self, k: TransitionKind) {
        match k {
            TransitionKind::BetaV => self.beta_v += 1,
            TransitionKind::BetaI => self.beta_i += 1,
            TransitionKind::Ren => self.ren += 1,
            TransitionKind::Sea1 => self.sea1 += 1,
            TransitionKind::Sea2 => self.sea2 += 1,
            TransitionKind::Sea3 => self.sea3 += 1,
            TransitionKind::Gc => self.gc += 1,
            TransitionKind::Sea4 => self.sea4 += 1,
            TransitionKind::Sea5 => self.sea5 += 1,
        }
    }
}

/// Behavior switches. `appendix_j_ren` restricts the renaming transition
/// to targets whose binding holds a variable bite, mirroring a listing
/// variant; it can miss β-redexes behind renaming chains, so it stays off
/// outside experiments.
#[derive(Debug, Clone, Copy, Default)]
pub struct MachineOptions {
    pub appendix_j_ren: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum MachineError {
    #[error("internal machine invariant broken at transition {index}: {msg}")]
    Internal { index: u64, msg: String },
    #[error("debug invariant violation after transition {index} ({kind}):\n{report}")]
    Invariant {
        index: u64,
        kind: &'static str,
        report: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub exhausted: bool,
    pub transitions: u64,
}

enum OpenDecision {
    Sea2,
    Sea1(EsId),
    Ren(EsId, VarRef),
    BetaV(EsId, EsId, VarRef),
    BetaI(EsId, EsId, VarRef),
}

enum StrongDecision {
    Final,
    Sea4,
    Sea3(EsId),
    Gc(EsId),
    Sea5(EsId),
}

pub struct Machine {
    pub(crate) heap: Heap,
    pub(crate) session: Session,
    pub(crate) phase: Phase,
    pub(crate) focus: Env,
    pub(crate) ctx: Ctx,
    counters: Counters,
    /// `|crumble(t₀)|`, the bound of the size invariant.
    initial_size: SizeT,
    options: MachineOptions,
    steps_taken: u64,
}

impl Machine {
    /// `t° := t̲ ◁ ⟨·⟩` after an internal well-naming pass.
    pub fn compile(session: Session, t: &Rc<Term>) -> Machine {
        let mut session = session;
        let t = rename_well_named(&mut session, t);
        let mut heap = Heap::new();
        let focus = crumble(&mut session, &mut heap, &t).expect("renamed term is well-named");
        let initial_size = focus.size();
        Machine {
            heap,
            session,
            phase: Phase::Open,
            focus,
            ctx: Ctx::default(),
            counters: Counters::default(),
            initial_size,
            options: MachineOptions::default(),
            steps_taken: 0,
        }
    }

    pub fn set_options(&mut self, options: MachineOptions) {
        self.options = options;
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn initial_size(&self) -> SizeT {
        self.initial_size
    }

    pub fn focus_size(&self) -> SizeT {
        self.focus.size()
    }

    pub fn transitions_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn is_final(&self) -> bool {
        self.phase == Phase::Strong && self.ctx.right.is_empty() && self.ctx.frames.is_empty()
    }

    /// `‖e ◁ K‖ = |e| + ‖K‖`, `‖e ▷ K‖ = ‖K‖`; `‖K‖` sums the bite sizes
    /// of every right environment of the context.
    pub fn state_measure(&self) -> SizeT {
        let k: SizeT = env_bites(&self.ctx.right)
            + self
                .ctx
                .frames
                .iter()
                .map(|f| env_bites(&f.right))
                .sum::<SizeT>();
        match self.phase {
            Phase::Open => self.focus.size() + k,
            Phase::Strong => k,
        }
    }

    /// Content bound to an occurrence, if any. The variable-as-location
    /// representation makes environment lookup a pointer dereference;
    /// unbound (free or lambda-bound) variables have no binding.
    pub fn lookup(&self, r: VarRef) -> Option<&Bite> {
        match r {
            VarRef::Free(_) => None,
            VarRef::Bound(id) => Some(&self.heap.get(id).content),
        }
    }

    /// Reference lookup scanning `e_K` left to right for the leftmost
    /// binding; debug mode checks it against the pointer-based lookup.
    pub fn lookup_in_ek_slow(&self, v: VarId) -> Option<EsId> {
        self.ek_ids().into_iter().find(|id| self.heap.get(*id).var == v)
    }

    fn bound_value(&self, r: VarRef) -> Option<EsId> {
        match r {
            VarRef::Bound(id) if matches!(self.heap.get(id).content, Bite::BLam(..)) => Some(id),
            _ => None,
        }
    }

    fn internal(&self, msg: String) -> MachineError {
        MachineError::Internal {
            index: self.steps_taken,
            msg,
        }
    }

    /// Performs exactly one transition; `Ok(None)` on the final state
    /// `e ▷ ⟨·⟩`.
    pub fn step(&mut self) -> Result<Option<TransitionKind>, MachineError> {
        let kind = match self.phase {
            Phase::Open => {
                let d = self.decide_open();
                self.apply_open(d)?
            }
            Phase::Strong => {
                let d = self.decide_strong()?;
                match self.apply_strong(d)? {
                    Some(k) => k,
                    None => return Ok(None),
                }
            }
        };
        self.counters.bump(kind);
        self.steps_taken += 1;
        Ok(Some(kind))
    }

    fn decide_open(&self) -> OpenDecision {
        let n = match self.focus.back() {
            None => return OpenDecision::Sea2,
            Some(n) => n,
        };
        match &self.heap.get(n).content {
            Bite::BApp(yr, zr) => match self.bound_value(*yr) {
                Some(ey) => {
                    if self.bound_value(*zr).is_some() {
                        OpenDecision::BetaV(n, ey, *zr)
                    } else {
                        OpenDecision::BetaI(n, ey, *zr)
                    }
                }
                None => OpenDecision::Sea1(n),
            },
            Bite::BVar(yr) if !self.heap.get(n).var.is_star() && self.ren_applies(*yr) => {
                OpenDecision::Ren(n, *yr)
            }
            _ => OpenDecision::Sea1(n),
        }
    }

    fn apply_open(&mut self, d: OpenDecision) -> Result<TransitionKind, MachineError> {
        match d {
            OpenDecision::Sea2 => {
                self.phase = Phase::Strong;
                Ok(TransitionKind::Sea2)
            }
            OpenDecision::Sea1(n) => {
                self.sea1(n);
                Ok(TransitionKind::Sea1)
            }
            OpenDecision::Ren(n, yr) => {
                self.ren(n, yr)?;
                Ok(TransitionKind::Ren)
            }
            OpenDecision::BetaV(n, ey, zr) => {
                self.beta_v(n, ey, zr)?;
                Ok(TransitionKind::BetaV)
            }
            OpenDecision::BetaI(n, ey, zr) => {
                self.beta_i(n, ey, zr)?;
                Ok(TransitionKind::BetaI)
            }
        }
    }

    fn ren_applies(&self, yr: VarRef) -> bool {
        if !self.options.appendix_j_ren {
            return true;
        }
        match yr {
            VarRef::Free(_) => true,
            VarRef::Bound(id) => matches!(self.heap.get(id).content, Bite::BVar(_)),
        }
    }

    fn decide_strong(&self) -> Result<StrongDecision, MachineError> {
        let head = match self.ctx.right.front() {
            Some(h) => h,
            None => {
                return Ok(if self.ctx.frames.is_empty() {
                    StrongDecision::Final
                } else {
                    StrongDecision::Sea4
                });
            }
        };
        let node = self.heap.get(head);
        if !node.content.is_value() {
            return Ok(StrongDecision::Sea3(head));
        }
        if node.var.is_star() {
            if !self.focus.is_empty() {
                return Err(self.internal(
                    "⋆-bound entry reached in the strong phase with a non-empty focus".into(),
                ));
            }
            // fv(ϵ) = {⋆}: the ⋆-entry is never collected.
            return Ok(StrongDecision::Sea5(head));
        }
        if self.focus.is_empty() {
            return Err(self.internal(format!("non-⋆ head {head:?} with an empty strong focus")));
        }
        if node.rc == 0 {
            Ok(StrongDecision::Gc(head))
        } else {
            Ok(StrongDecision::Sea5(head))
        }
    }

    fn apply_strong(
        &mut self,
        d: StrongDecision,
    ) -> Result<Option<TransitionKind>, MachineError> {
        match d {
            StrongDecision::Final => Ok(None),
            StrongDecision::Sea4 => {
                let frame = self.ctx.frames.pop().expect("checked in decide_strong");
                self.sea4(frame)?;
                Ok(Some(TransitionKind::Sea4))
            }
            StrongDecision::Sea3(head) => {
                self.ctx.right.pop_front(&self.heap);
                self.focus.push_back(&self.heap, head);
                Ok(Some(TransitionKind::Sea3))
            }
            StrongDecision::Gc(head) => {
                self.ctx.right.pop_front(&self.heap);
                self.gc_node(head);
                Ok(Some(TransitionKind::Gc))
            }
            StrongDecision::Sea5(head) => {
                self.sea5(head)?;
                Ok(Some(TransitionKind::Sea5))
            }
        }
    }

    // -- open-phase transitions ------------------------------------------

    fn sea1(&mut self, n: EsId) {
        let popped = self.focus.pop_back(&self.heap);
        debug_assert_eq!(popped, Some(n));
        self.ctx.right.push_front(&self.heap, n);
    }

    /// `e[x←y] ◁ K ⇝ren e{x←y} ◁ K` (x ≠ ⋆): the unique occurrence of x,
    /// reached through the occurs link, is overwritten by y; the ES is
    /// reclaimed.
    fn ren(&mut self, n: EsId, yr: VarRef) -> Result<(), MachineError> {
        let node = self.heap.get(n);
        if node.rc != 1 {
            return Err(self.internal(format!(
                "ren on {n:?} with rc {}: pristine code must have exactly one occurrence",
                node.rc
            )));
        }
        let site = node
            .occurs
            .ok_or_else(|| self.internal(format!("ren on {n:?} without an occurs link")))?;
        if !self.site_holds(site, n) {
            return Err(self.internal(format!("stale occurs link on {n:?}")));
        }
        self.focus.pop_back(&self.heap);
        self.write_slot(site, yr);
        // rc of y is unchanged: one occurrence (the ES content) dies, one
        // (the rewritten site) is born. Keep the occurs link honest.
        if let VarRef::Bound(ey) = yr {
            let tn = self.heap.get_mut(ey);
            tn.occurs = if tn.rc == 1 { Some(site) } else { None };
        }
        self.heap.free_node(n);
        Ok(())
    }

    fn site_holds(&self, site: OccSite, expected: EsId) -> bool {
        if !self.heap.is_live(site.node) {
            return false;
        }
        let content = &self.heap.get(site.node).content;
        let r = match (content, site.slot) {
            (Bite::BVar(r), Slot::VarPos) => r,
            (Bite::BApp(r, _), Slot::AppLeft) => r,
            (Bite::BApp(_, r), Slot::AppRight) => r,
            _ => return false,
        };
        matches!(r, VarRef::Bound(id) if *id == expected)
    }

    fn write_slot(&mut self, site: OccSite, r: VarRef) {
        let content = &mut self.heap.get_mut(site.node).content;
        match (content, site.slot) {
            (Bite::BVar(slot), Slot::VarPos) => *slot = r,
            (Bite::BApp(slot, _), Slot::AppLeft) => *slot = r,
            (Bite::BApp(_, slot), Slot::AppRight) => *slot = r,
            _ => panic!("occurrence site does not match content shape"),
        }
    }

    /// `e[x←yz] ◁ K ⇝βv e([x←b]e'{w←z}) ◁ K` when both y and z are bound
    /// to values: fire the β, copying the function body with fresh names
    /// and renaming its parameter to z on the fly.
    fn beta_v(&mut self, n: EsId, ey: EsId, zr: VarRef) -> Result<(), MachineError> {
        self.focus.pop_back(&self.heap);
        self.heap.drop_occurrence(VarRef::Bound(ey));
        self.heap.drop_occurrence(zr);
        let mut rest = self.copy_value_body(ey, WTarget::Rename(zr), n)?;
        self.focus.push_back(&self.heap, n);
        self.focus.append(&mut rest);
        Ok(())
    }

    /// `e[x←yz] ◁ K ⇝βi e[x←b]e' ◁ K⟨⟨·⟩[w←z]⟩` when y is bound to a
    /// value and z is inert or unbound (unbound variables are treated as
    /// inert): the argument stays shared behind the new ES `[w←z]`.
    fn beta_i(&mut self, n: EsId, ey: EsId, zr: VarRef) -> Result<(), MachineError> {
        self.focus.pop_back(&self.heap);
        self.heap.drop_occurrence(VarRef::Bound(ey));
        let w = match &self.heap.get(ey).content {
            Bite::BLam(w, _) => *w,
            _ => unreachable!("guarded by bound_value"),
        };
        let hint = self.session.name_of(w);
        let w2 = self.session.fresh_calc(Some(&hint));
        // The argument occurrence moves from the application bite into
        // the new ES: rc is unchanged, the occurs link follows the site.
        let new_es = self.heap.alloc(w2, Bite::BVar(zr));
        if let VarRef::Bound(ez) = zr {
            let tn = self.heap.get_mut(ez);
            tn.occurs = if tn.rc == 1 {
                Some(OccSite {
                    node: new_es,
                    slot: Slot::VarPos,
                })
            } else {
                None
            };
        }
        let mut rest = self.copy_value_body(ey, WTarget::BindTo(new_es), n)?;
        self.focus.push_back(&self.heap, n);
        self.focus.append(&mut rest);
        self.ctx.right.push_front(&self.heap, new_es);
        Ok(())
    }

    /// Frees one ES and its value recursively, decrementing the reference
    /// counts of everything the reclaimed structure mentions. Internal
    /// references point rightwards, so a left-to-right sweep never reads
    /// a freed node.
    fn gc_node(&mut self, id: EsId) {
        let content = std::mem::replace(
            &mut self.heap.get_mut(id).content,
            Bite::BVar(VarRef::Free(STAR)),
        );
        match content {
            Bite::BVar(r) => self.heap.drop_occurrence(r),
            Bite::BApp(r1, r2) => {
                self.heap.drop_occurrence(r1);
                self.heap.drop_occurrence(r2);
            }
            Bite::BLam(_, body) => {
                for b in body.iter().collect::<Vec<_>>() {
                    self.gc_node(b);
                }
            }
        }
        self.heap.free_node(id);
    }

    fn sea5(&mut self, head: EsId) -> Result<(), MachineError> {
        self.ctx.right.pop_front(&self.heap);
        let (lam_var, body) = match &mut self.heap.get_mut(head).content {
            Bite::BLam(y, body) => {
                if body.is_empty() {
                    return Err(self.internal(format!("entering {head:?} twice")));
                }
                (*y, std::mem::take(body))
            }
            _ => unreachable!("sea5 fires on values only"),
        };
        let left = std::mem::take(&mut self.focus);
        let right = std::mem::take(&mut self.ctx.right);
        self.ctx.frames.push(Frame {
            left,
            es: head,
            lam_var,
            right,
        });
        self.focus = body;
        self.phase = Phase::Open;
        Ok(())
    }

    fn sea4(&mut self, frame: Frame) -> Result<(), MachineError> {
        let done = std::mem::take(&mut self.focus);
        if done.is_empty() {
            return Err(self.internal("abstraction body evaluated to an empty environment".into()));
        }
        match &mut self.heap.get_mut(frame.es).content {
            Bite::BLam(_, body) => {
                debug_assert!(body.is_empty());
                *body = done;
            }
            _ => unreachable!("frames hold abstractions"),
        }
        self.focus = frame.left;
        self.focus.push_back(&self.heap, frame.es);
        self.ctx.right = frame.right;
        Ok(())
    }

    // -- α-copy -----------------------------------------------------------

    /// Copies the body `[⋆←b]e'` of the value bound at `src`, giving every
    /// binder a fresh name and reusing `reuse` as the node for the copied
    /// leading (⋆-bound) entry. Occurrences of the lambda parameter are
    /// redirected per `w_target`. Returns the copy minus its leading
    /// entry, whose content is installed into `reuse`.
    fn copy_value_body(
        &mut self,
        src: EsId,
        w_target: WTarget,
        reuse: EsId,
    ) -> Result<Env, MachineError> {
        let (w, first, body_ids) = {
            let (w, body) = match &self.heap.get(src).content {
                Bite::BLam(w, body) => (*w, body),
                _ => return Err(self.internal(format!("β on non-value binding {src:?}"))),
            };
            if body.is_empty() {
                return Err(self.internal(format!(
                    "β would copy the body of {src:?} while it is being evaluated"
                )));
            }
            let first = body.front().expect("non-empty");
            (w, first, body.iter().collect::<Vec<_>>())
        };
        if !self.heap.get(first).var.is_star() {
            return Err(self.internal(format!(
                "value body of {src:?} does not start with a ⋆-bound entry"
            )));
        }
        let mut copier = Copier {
            node_map: HashMap::new(),
            var_map: HashMap::new(),
            w,
            w_target,
            visited: Vec::new(),
        };
        copier.node_map.insert(first, reuse);
        // Pass 1 allocates targets (binders renamed fresh), pass 2
        // translates contents; two passes because occurrences may sit to
        // the left of their binder.
        for id in &body_ids {
            copier.alloc_pass(&mut self.heap, &mut self.session, *id, *id == first)?;
        }
        let mut out = Env::new();
        for id in &body_ids {
            let new_id = copier.node_map[id];
            let content = copier.translate_content(&mut self.heap, *id, new_id);
            self.heap.get_mut(new_id).content = content;
            if *id != first {
                out.push_back(&self.heap, new_id);
            }
        }
        for id in copier.visited.drain(..) {
            self.heap.get_mut(id).copying = false;
        }
        Ok(out)
    }

    // -- read-back ---------------------------------------------------------

    /// `(e ⋈ K)↓ := K⟨e⟩↓`: reads back the plugged environment directly.
    pub fn readback_state(&self) -> Rc<VscTerm> {
        let mut names = ReadbackNames::new();
        self.readback_level_with(0, &mut names)
    }

    fn readback_level_with(&self, lvl: usize, names: &mut ReadbackNames) -> Rc<VscTerm> {
        let mut acc = crate::syntax::vvar(STAR);
        for entry in self.level_entries(lvl) {
            let node = self.heap.get(entry.id);
            let content = match entry.inner_level {
                Some(next) => crate::syntax::vlam(
                    node_lam_var(&node.content),
                    self.readback_level_with(next, names),
                ),
                None => crate::crumble::readback_bite_named(&self.heap, &node.content, names),
            };
            let is_value = entry.inner_level.is_some() || node.content.is_value();
            acc = if is_value || node.var.in_crumb_space() {
                crate::crumble::subst_readback(&acc, node.var, &content, names)
            } else {
                crate::syntax::ves(acc, node.var, content)
            };
        }
        acc
    }

    /// The entries of one nesting level in environment order. The frame
    /// entry of a level points at the level being evaluated inside it.
    pub(crate) fn level_entries(&self, lvl: usize) -> Vec<LevelEntry> {
        let mut out = Vec::new();
        if lvl < self.ctx.frames.len() {
            let f = &self.ctx.frames[lvl];
            for id in f.left.iter() {
                out.push(LevelEntry {
                    id,
                    inner_level: None,
                });
            }
            out.push(LevelEntry {
                id: f.es,
                inner_level: Some(lvl + 1),
            });
            for id in f.right.iter() {
                out.push(LevelEntry {
                    id,
                    inner_level: None,
                });
            }
        } else {
            for id in self.focus.iter().chain(self.ctx.right.iter()) {
                out.push(LevelEntry {
                    id,
                    inner_level: None,
                });
            }
        }
        out
    }

    /// `e_K`: the right environments from the hole outwards (Def. of the
    /// context-induced environment).
    pub fn ek_ids(&self) -> Vec<EsId> {
        let mut out: Vec<EsId> = self.ctx.right.iter().collect();
        for f in self.ctx.frames.iter().rev() {
            out.extend(f.right.iter());
        }
        out
    }

    /// Runs until final or out of fuel, optionally checking invariants
    /// after every transition (aborting with diagnostics on violation).
    pub fn run(&mut self, fuel: u64, debug: DebugLevel) -> Result<RunOutcome, MachineError> {
        self.run_with(fuel, debug, &mut |_, _| {})
    }

    /// Like [`Machine::run`], invoking `on_step` after every transition.
    pub fn run_with(
        &mut self,
        fuel: u64,
        debug: DebugLevel,
        on_step: &mut dyn FnMut(&Machine, TransitionKind),
    ) -> Result<RunOutcome, MachineError> {
        let mut taken = 0;
        while taken < fuel {
            let observer = if debug == DebugLevel::Off {
                None
            } else {
                Some(check::StepObserver::before(self, debug))
            };
            let kind = match self.step()? {
                None => {
                    return Ok(RunOutcome {
                        exhausted: false,
                        transitions: taken,
                    })
                }
                Some(k) => k,
            };
            taken += 1;
            if let Some(obs) = observer {
                obs.check_after(self, kind, debug)?;
            }
            on_step(self, kind);
        }
        Ok(RunOutcome {
            exhausted: !self.is_final(),
            transitions: taken,
        })
    }

    /// Pretty state printer for traces and diagnostics.
    pub fn print_state(&self) -> String {
        let mut out = String::new();
        for f in self.ctx.frames.iter() {
            out.push_str(&crate::crumble::print_env(&self.heap, &f.left, &self.session));
            out.push_str(&format!(
                "[{}<-\\{}. <",
                self.session.name_of(self.heap.get(f.es).var),
                self.session.name_of(f.lam_var)
            ));
        }
        out.push_str(&crate::crumble::print_env(&self.heap, &self.focus, &self.session));
        out.push_str(match self.phase {
            Phase::Open => " <| ",
            Phase::Strong => " |> ",
        });
        out.push_str(&crate::crumble::print_env(
            &self.heap,
            &self.ctx.right,
            &self.session,
        ));
        for f in self.ctx.frames.iter().rev() {
            out.push_str(">]");
            out.push_str(&crate::crumble::print_env(&self.heap, &f.right, &self.session));
        }
        out
    }
}

fn node_lam_var(b: &Bite) -> VarId {
    match b {
        Bite::BLam(v, _) => *v,
        _ => panic!("frame entry must hold an abstraction"),
    }
}

fn env_bites(e: &Env) -> SizeT {
    e.size() - e.len() as SizeT
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LevelEntry {
    pub id: EsId,
    pub inner_level: Option<usize>,
}

enum WTarget {
    /// βv: occurrences of the parameter become copies of the argument
    /// occurrence.
    Rename(VarRef),
    /// βi: occurrences of the parameter bind to the freshly created ES.
    BindTo(EsId),
}

struct Copier {
    node_map: HashMap<EsId, EsId>,
    var_map: HashMap<VarId, VarId>,
    w: VarId,
    w_target: WTarget,
    visited: Vec<EsId>,
}

impl Copier {
    fn mark(&mut self, heap: &mut Heap, id: EsId) -> Result<(), MachineError> {
        let n = heap.get_mut(id);
        if n.copying {
            return Err(MachineError::Internal {
                index: 0,
                msg: format!("copy re-entered node {id:?}"),
            });
        }
        n.copying = true;
        self.visited.push(id);
        Ok(())
    }

    /// Allocates a fresh node per copied entry (fresh binder labels keep
    /// the state well-named) and records lambda-binder renamings.
    fn alloc_pass(
        &mut self,
        heap: &mut Heap,
        session: &mut Session,
        id: EsId,
        is_first: bool,
    ) -> Result<(), MachineError> {
        self.mark(heap, id)?;
        if !is_first {
            let var = heap.get(id).var;
            let nv = if var.is_star() {
                STAR
            } else {
                fresh_like(session, var)
            };
            let placeholder = Bite::BVar(VarRef::Free(STAR));
            let new_id = heap.alloc(nv, placeholder);
            self.node_map.insert(id, new_id);
        }
        if let Bite::BLam(x, body) = &heap.get(id).content {
            let x = *x;
            let ids: Vec<EsId> = body.iter().collect();
            let x2 = fresh_like(session, x);
            self.var_map.insert(x, x2);
            for b in ids {
                self.alloc_pass(heap, session, b, false)?;
            }
        }
        Ok(())
    }

    fn translate_content(&mut self, heap: &mut Heap, old: EsId, new_id: EsId) -> Bite {
        match heap.get(old).content.clone() {
            Bite::BVar(r) => Bite::BVar(self.translate_ref(
                heap,
                r,
                OccSite {
                    node: new_id,
                    slot: Slot::VarPos,
                },
            )),
            Bite::BApp(r1, r2) => {
                let a = self.translate_ref(
                    heap,
                    r1,
                    OccSite {
                        node: new_id,
                        slot: Slot::AppLeft,
                    },
                );
                let b = self.translate_ref(
                    heap,
                    r2,
                    OccSite {
                        node: new_id,
                        slot: Slot::AppRight,
                    },
                );
                Bite::BApp(a, b)
            }
            Bite::BLam(x, body) => {
                let x2 = *self.var_map.get(&x).expect("lambda binder mapped in pass 1");
                let mut out = Env::new();
                for b in body.iter() {
                    let nb = self.node_map[&b];
                    let content = self.translate_content(heap, b, nb);
                    heap.get_mut(nb).content = content;
                    out.push_back(heap, nb);
                }
                Bite::BLam(x2, out)
            }
        }
    }

    fn translate_ref(&mut self, heap: &mut Heap, r: VarRef, site: OccSite) -> VarRef {
        let out = match r {
            VarRef::Free(v) if v == self.w => match &self.w_target {
                WTarget::Rename(zr) => *zr,
                WTarget::BindTo(es) => VarRef::Bound(*es),
            },
            VarRef::Free(v) => match self.var_map.get(&v) {
                Some(v2) => VarRef::Free(*v2),
                None => VarRef::Free(v),
            },
            VarRef::Bound(id) => match self.node_map.get(&id) {
                Some(new) => VarRef::Bound(*new),
                None => VarRef::Bound(id),
            },
        };
        heap.add_occurrence(out, site);
        out
    }
}

fn fresh_like(session: &mut Session, v: VarId) -> VarId {
    match v.kind() {
        crate::syntax::VarKind::Calc => {
            let hint = session.name_of(v);
            session.fresh_calc(Some(&hint))
        }
        crate::syntax::VarKind::Crumb => session.fresh_crumb(),
        crate::syntax::VarKind::Star => STAR,
    }
}
