//! Debug-mode invariant checkers: structural health (rc audit, occurs
//! links, dangling references), well-naming, the size invariant, the
//! measure discipline, and the read-back-based pristine / garbage-free /
//! well-crumbled / contextual-classification checks. Fast checks run on
//! every transition of a debug run; deep checks add the read-back-based
//! ones, gated to small states.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use crate::crumble::{is_pristine, is_pristine_bite, readback_env, Bite, Env, EsId, VarRef};
use crate::syntax::{alpha_eq, fv, SizeT, VarId, VscTerm, STAR};
use crate::vsc::{enumerate_redexes, fire_redex, struct_equiv, EquivOutcome, RedexClass, StepKind};

use super::{classify_multicontext, Machine, MachineError, MultiClass, TransitionKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DebugLevel {
    Off,
    Fast,
    Deep,
}

#[derive(Debug, Default, Clone)]
pub struct InvariantReport {
    pub violations: Vec<String>,
}

impl InvariantReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn note(&mut self, msg: String) {
        self.violations.push(msg);
    }
}

impl std::fmt::Display for InvariantReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Nodes whose read-back based checks are skipped beyond this many live
/// heap cells (they are exponential in principle).
const DEEP_SIZE_LIMIT: usize = 4000;

/// Search caps for the relaxed β-projection witness.
const PROJECTION_STEPS_CAP: usize = 8;
const PROJECTION_FRONTIER_CAP: usize = 400;
const EQUIV_BUDGET: usize = 50_000;

impl Machine {
    /// All ES nodes of the state, nested bodies included.
    fn state_nodes(&self) -> Vec<EsId> {
        let mut out = Vec::new();
        for lvl in 0..=self.ctx.frames.len() {
            for entry in self.level_entries(lvl) {
                out.push(entry.id);
                if entry.inner_level.is_none() {
                    if let Bite::BLam(_, body) = &self.heap.get(entry.id).content {
                        collect_env_nodes(self, body, &mut out);
                    }
                }
            }
        }
        out
    }

    /// Free variables of the plugged state, computed over the virtual
    /// level structure with the crumbled-form rules.
    fn state_fv(&self) -> HashSet<VarId> {
        self.level_fv(0)
    }

    fn level_fv(&self, lvl: usize) -> HashSet<VarId> {
        let mut acc: HashSet<VarId> = HashSet::new();
        acc.insert(STAR);
        for entry in self.level_entries(lvl) {
            let node = self.heap.get(entry.id);
            acc.remove(&node.var);
            match entry.inner_level {
                Some(next) => {
                    let mut inner = self.level_fv(next);
                    inner.remove(&super::node_lam_var(&node.content));
                    inner.remove(&STAR);
                    acc.extend(inner);
                }
                None => crate::crumble::bite_fv(&self.heap, &node.content, &mut acc),
            }
        }
        acc
    }

    /// Fast checks: structural health, rc/occurs audit, well-naming and
    /// the size invariant. Deep adds pristine, garbage-free,
    /// well-crumbled, the contextual classification and the agreement of
    /// the two read-back routes.
    pub fn check_invariants(&self, level: DebugLevel) -> InvariantReport {
        let mut rep = InvariantReport::default();
        if level == DebugLevel::Off {
            return rep;
        }
        let nodes = self.state_nodes();
        let node_set: HashSet<EsId> = nodes.iter().copied().collect();
        self.check_structure(&nodes, &node_set, &mut rep);
        self.check_rc(&nodes, &mut rep);
        self.check_well_named(&nodes, &mut rep);
        self.check_size_invariant(&mut rep);
        if level == DebugLevel::Deep && self.heap.live_count() <= DEEP_SIZE_LIMIT {
            self.check_pristine(&mut rep);
            self.check_garbage_free(&mut rep);
            self.check_well_crumbled(&mut rep);
            self.check_ctx_classification(&mut rep);
            self.check_readback_routes(&mut rep);
            self.check_rightmost_scoping(&node_set, &mut rep);
        }
        rep
    }

    fn check_structure(
        &self,
        nodes: &[EsId],
        node_set: &HashSet<EsId>,
        rep: &mut InvariantReport,
    ) {
        let mut seen = HashSet::new();
        for id in nodes {
            if !seen.insert(*id) {
                rep.note(format!("node {id:?} listed twice in the state"));
            }
            if !self.heap.is_live(*id) {
                rep.note(format!("node {id:?} in the state but freed"));
                continue;
            }
            for r in bite_refs(&self.heap.get(*id).content) {
                if let VarRef::Bound(target) = r {
                    if !self.heap.is_live(target) {
                        rep.note(format!("dangling occurrence {target:?} in node {id:?}"));
                    } else if !node_set.contains(&target) {
                        rep.note(format!(
                            "occurrence in {id:?} points at {target:?} outside the state"
                        ));
                    }
                }
            }
        }
        // Cached environment sizes must agree with a recount.
        let mut check_env = |name: &str, e: &Env| {
            let fresh = crate::crumble::env_size(&self.heap, e);
            if fresh != e.size() {
                rep.note(format!(
                    "cached size of {name} is {} but recounts to {fresh}",
                    e.size()
                ));
            }
        };
        check_env("focus", &self.focus);
        check_env("right", &self.ctx.right);
        for (i, f) in self.ctx.frames.iter().enumerate() {
            check_env(&format!("frame {i} left"), &f.left);
            check_env(&format!("frame {i} right"), &f.right);
            match &self.heap.get(f.es).content {
                Bite::BLam(_, body) if body.is_empty() => {}
                _ => rep.note(format!(
                    "frame {i} node {:?} does not hold an entered abstraction",
                    f.es
                )),
            }
        }
    }

    fn check_rc(&self, nodes: &[EsId], rep: &mut InvariantReport) {
        let mut counts: HashMap<EsId, u32> = HashMap::new();
        for id in nodes {
            for r in bite_refs(&self.heap.get(*id).content) {
                if let VarRef::Bound(target) = r {
                    *counts.entry(target).or_insert(0) += 1;
                }
            }
        }
        for id in nodes {
            let node = self.heap.get(*id);
            let actual = counts.get(id).copied().unwrap_or(0);
            if node.rc != actual {
                rep.note(format!(
                    "rc audit: node {id:?} ({:?}) has rc {} but {actual} occurrences",
                    node.var, node.rc
                ));
            }
            if let Some(site) = node.occurs {
                if !self.site_holds(site, *id) {
                    rep.note(format!("stale occurs link on {id:?}"));
                }
            }
            if node.copying {
                rep.note(format!("copy flag left set on {id:?}"));
            }
        }
    }

    fn check_well_named(&self, nodes: &[EsId], rep: &mut InvariantReport) {
        let mut binders: Vec<VarId> = Vec::new();
        for id in nodes {
            let node = self.heap.get(*id);
            binders.push(node.var);
            if let Bite::BLam(x, _) = node.content {
                binders.push(x);
            }
        }
        let mut seen = HashSet::new();
        for b in &binders {
            if b.is_star() {
                continue;
            }
            if !seen.insert(*b) {
                rep.note(format!("duplicate binder {b:?} in the state"));
            }
        }
        for v in self.state_fv() {
            if !v.is_star() && seen.contains(&v) {
                rep.note(format!("variable {v:?} both free and bound in the state"));
            }
        }
    }

    /// Every abstraction in the unevaluated parts (the focus in the open
    /// phase, plus `e_K`) fits in the initial crumbled size.
    fn check_size_invariant(&self, rep: &mut InvariantReport) {
        let mut offenders = Vec::new();
        if self.phase == super::Phase::Open {
            collect_oversized(self, &self.focus, self.initial_size(), &mut offenders);
        }
        for id in self.ek_ids() {
            if let Bite::BLam(_, body) = &self.heap.get(id).content {
                let sz = 1 + body.size();
                if sz > self.initial_size() {
                    offenders.push((id, sz));
                }
                collect_oversized(self, body, self.initial_size(), &mut offenders);
            }
        }
        for (id, sz) in offenders {
            rep.note(format!(
                "size invariant: value at {id:?} has size {sz} > initial {}",
                self.initial_size()
            ));
        }
    }

    fn check_pristine(&self, rep: &mut InvariantReport) {
        for id in self.ek_ids() {
            if let Bite::BLam(_, body) = &self.heap.get(id).content {
                if !is_pristine(&self.heap, body) {
                    rep.note(format!("body of {id:?} in e_K is not pristine"));
                }
            }
        }
        if self.phase == super::Phase::Open
            && !self.focus.is_empty()
            && !is_pristine(&self.heap, &self.focus)
        {
            rep.note("open-phase focus is not pristine".to_string());
        }
    }

    fn check_garbage_free(&self, rep: &mut InvariantReport) {
        for (i, f) in self.ctx.frames.iter().enumerate() {
            if !env_garbage_free(self, &f.left) {
                rep.note(format!("frame {i} left environment is not garbage-free"));
            }
            let x = self.heap.get(f.es).var;
            if !crate::crumble::env_fv(&self.heap, &f.left).contains(&x) {
                rep.note(format!(
                    "frame {i} binder {x:?} does not occur in its left environment"
                ));
            }
        }
        if self.phase == super::Phase::Strong && !env_garbage_free(self, &self.focus) {
            rep.note("strong-phase focus is not garbage-free".to_string());
        }
    }

    fn check_well_crumbled(&self, rep: &mut InvariantReport) {
        // Per level: crumb-bound non-value entries must occur in the
        // read-back of their level prefix (frame entries hold values, so
        // prefixes never need virtual bodies here: a frame entry in a
        // prefix would itself be a value and the condition is vacuous
        // for it, but entries after it need its read-back, handled by
        // an explicit skip gated below).
        for lvl in 0..=self.ctx.frames.len() {
            let entries = self.level_entries(lvl);
            for (i, entry) in entries.iter().enumerate() {
                let node = self.heap.get(entry.id);
                let is_value = entry.inner_level.is_some() || node.content.is_value();
                if is_value || !node.var.in_crumb_space() {
                    continue;
                }
                // Read back the prefix of this level.
                let mut names = crate::crumble::ReadbackNames::new();
                let mut acc = crate::syntax::vvar(STAR);
                let mut skip = false;
                for prev in &entries[..i] {
                    let pnode = self.heap.get(prev.id);
                    if prev.inner_level.is_some() {
                        // A frame below an unevaluated entry cannot occur
                        // (frames sit left of the hole, unevaluated
                        // entries right of it at the same level is
                        // impossible); be safe and skip.
                        skip = true;
                        break;
                    }
                    let content = crate::crumble::readback_bite_named(
                        &self.heap,
                        &pnode.content,
                        &mut names,
                    );
                    acc = if pnode.content.is_value() || pnode.var.in_crumb_space() {
                        crate::crumble::subst_readback(&acc, pnode.var, &content, &mut names)
                    } else {
                        crate::syntax::ves(acc, pnode.var, content)
                    };
                }
                if !skip && !fv(&acc).contains(&node.var) {
                    rep.note(format!(
                        "well-crumbled: binder {:?} of a non-value entry does not occur in its prefix",
                        node.var
                    ));
                }
            }
            // Nested bodies.
            for entry in &entries {
                if entry.inner_level.is_none() {
                    if let Bite::BLam(_, body) = &self.heap.get(entry.id).content {
                        check_well_crumbled_env(self, body, rep);
                    }
                }
            }
        }
    }

    fn check_ctx_classification(&self, rep: &mut InvariantReport) {
        let k = self.readback_ctx();
        let (class, proper) = classify_multicontext(&k);
        if !proper {
            rep.note("context read-back is not proper (no hole survives)".to_string());
        }
        if class == MultiClass::Neither {
            rep.note("context read-back is not an external multi context".to_string());
        }
    }

    fn check_readback_routes(&self, rep: &mut InvariantReport) {
        let direct = self.readback_state();
        let modular = self.readback_state_modular();
        if !alpha_eq(&direct, &modular) {
            rep.note("direct and modular state read-backs disagree".to_string());
        }
    }

    /// The rightmost focus entry of an open state may only mention
    /// variables bound in `e_K`, by enclosing lambdas, or free ones.
    fn check_rightmost_scoping(&self, _node_set: &HashSet<EsId>, rep: &mut InvariantReport) {
        if self.phase != super::Phase::Open {
            return;
        }
        let Some(n) = self.focus.back() else { return };
        let ek: HashSet<EsId> = self.ek_ids().into_iter().collect();
        for r in bite_refs(&self.heap.get(n).content) {
            match r {
                VarRef::Bound(target) if !ek.contains(&target) => {
                    rep.note(format!(
                        "rightmost focus entry references {target:?} outside e_K"
                    ));
                }
                VarRef::Bound(target) => {
                    // The pointer-based lookup must agree with a scan.
                    let v = self.heap.get(target).var;
                    if self.lookup_in_ek_slow(v) != Some(target) {
                        rep.note(format!(
                            "lookup disagreement for {v:?}: pointer {target:?}, scan {:?}",
                            self.lookup_in_ek_slow(v)
                        ));
                    }
                }
                VarRef::Free(_) => {}
            }
        }
    }
}

fn collect_env_nodes(m: &Machine, env: &Env, out: &mut Vec<EsId>) {
    for id in env.iter() {
        out.push(id);
        if let Bite::BLam(_, body) = &m.heap.get(id).content {
            collect_env_nodes(m, body, out);
        }
    }
}

fn collect_oversized(m: &Machine, env: &Env, bound: SizeT, out: &mut Vec<(EsId, SizeT)>) {
    for id in env.iter() {
        if let Bite::BLam(_, body) = &m.heap.get(id).content {
            let sz = 1 + body.size();
            if sz > bound {
                out.push((id, sz));
            }
            collect_oversized(m, body, bound, out);
        }
    }
}

fn check_well_crumbled_env(m: &Machine, env: &Env, rep: &mut InvariantReport) {
    let ids: Vec<EsId> = env.iter().collect();
    for (i, id) in ids.iter().enumerate() {
        let node = m.heap.get(*id);
        if !node.content.is_value() && node.var.in_crumb_space() {
            let mut prefix = Env::new();
            for p in &ids[..i] {
                prefix.push_back(&m.heap, *p);
            }
            let rb = readback_env(&m.heap, &prefix);
            if !fv(&rb).contains(&node.var) {
                rep.note(format!(
                    "well-crumbled (nested): binder {:?} missing from its prefix",
                    node.var
                ));
            }
        }
        if let Bite::BLam(_, body) = &node.content {
            check_well_crumbled_env(m, body, rep);
        }
    }
}

fn env_garbage_free(m: &Machine, env: &Env) -> bool {
    let rb = readback_env(&m.heap, env);
    let rb_fv = fv(&rb);
    crate::crumble::env_fv(&m.heap, env)
        .into_iter()
        .all(|v| v.is_star() || rb_fv.contains(&v))
}

fn bite_refs(b: &Bite) -> Vec<VarRef> {
    match b {
        Bite::BVar(r) => vec![*r],
        Bite::BApp(a, b) => vec![*a, *b],
        Bite::BLam(..) => Vec::new(),
    }
}

/// Snapshot taken before a transition in a debug run, checked against the
/// machine afterwards.
pub(crate) struct StepObserver {
    measure_before: SizeT,
    readback_before: Option<Rc<VscTerm>>,
}

impl StepObserver {
    pub(crate) fn before(m: &Machine, level: DebugLevel) -> StepObserver {
        let readback_before = if level == DebugLevel::Deep
            && m.heap.live_count() <= DEEP_SIZE_LIMIT
        {
            Some(m.readback_state())
        } else {
            None
        };
        StepObserver {
            measure_before: m.state_measure(),
            readback_before,
        }
    }

    pub(crate) fn check_after(
        self,
        m: &Machine,
        kind: TransitionKind,
        level: DebugLevel,
    ) -> Result<(), MachineError> {
        let mut rep = m.check_invariants(level);
        self.check_measure_rule(m, kind, &mut rep);
        if let Some(before) = &self.readback_before {
            if m.heap.live_count() <= DEEP_SIZE_LIMIT {
                check_projection(m, kind, before, &mut rep);
            }
        }
        if rep.is_ok() {
            Ok(())
        } else {
            Err(MachineError::Invariant {
                index: m.transitions_taken(),
                kind: kind.name(),
                report: format!("{rep}state: {}", m.print_state()),
            })
        }
    }

    /// Measure discipline: β grows by at most the initial size, ren and
    /// sea1 strictly decrease, the strong phase never increases.
    fn check_measure_rule(&self, m: &Machine, kind: TransitionKind, rep: &mut InvariantReport) {
        let after = m.state_measure();
        let before = self.measure_before;
        let ok = match kind {
            TransitionKind::BetaV | TransitionKind::BetaI => after <= before + m.initial_size(),
            TransitionKind::Ren | TransitionKind::Sea1 => after < before,
            TransitionKind::Sea2
            | TransitionKind::Sea3
            | TransitionKind::Gc
            | TransitionKind::Sea4
            | TransitionKind::Sea5 => after <= before,
        };
        if !ok {
            rep.note(format!(
                "measure rule broken by {}: {before} -> {after} (initial {})",
                kind.name(),
                m.initial_size()
            ));
        }
    }
}

/// Relaxed β-projection witness and overhead transparency: β transitions
/// project to nonempty external reductions (m·e pairs for βv, m-steps up
/// to ≡ for βi); every other transition leaves the read-back unchanged.
fn check_projection(
    m: &Machine,
    kind: TransitionKind,
    before: &Rc<VscTerm>,
    rep: &mut InvariantReport,
) {
    let after = m.readback_state();
    let mut session = m.session().clone();
    match kind {
        TransitionKind::BetaV => {
            if !projection_search(&mut session, before, &after, true) {
                rep.note("βv read-back is not reached by (→xm →xe)+ up to ≡".to_string());
            }
        }
        TransitionKind::BetaI => {
            if !projection_search(&mut session, before, &after, false) {
                rep.note("βi read-back is not reached by →xm+ up to ≡".to_string());
            }
        }
        _ => {
            // Search transitions keep the read-back on the nose; ren and
            // gc stay within ≡ (and in fact equal as well).
            if !alpha_eq(before, &after)
                && struct_equiv(&mut session, before, &after, EQUIV_BUDGET)
                    != EquivOutcome::Equivalent
            {
                rep.note(format!(
                    "overhead transition {} changed the read-back",
                    kind.name()
                ));
            }
        }
    }
}

fn terms_equiv(session: &mut crate::syntax::Session, a: &Rc<VscTerm>, b: &Rc<VscTerm>) -> bool {
    alpha_eq(a, b) || struct_equiv(session, a, b, EQUIV_BUDGET) == EquivOutcome::Equivalent
}

/// Bounded search for `before (→xm →xe)^k ≡ after` (paired) or
/// `before →xm^k ≡ after` (m_only = false means paired).
fn projection_search(
    session: &mut crate::syntax::Session,
    before: &Rc<VscTerm>,
    after: &Rc<VscTerm>,
    paired: bool,
) -> bool {
    let mut frontier: Vec<Rc<VscTerm>> = vec![before.clone()];
    for _k in 1..=PROJECTION_STEPS_CAP {
        let mut next: Vec<Rc<VscTerm>> = Vec::new();
        let mut seen: HashSet<crate::vsc::CanonKey> = HashSet::new();
        for t in &frontier {
            for r in enumerate_redexes(t, RedexClass::External) {
                if r.kind != StepKind::M {
                    continue;
                }
                let t1 = fire_redex(session, t, &r.path, r.kind);
                if paired {
                    for r2 in enumerate_redexes(&t1, RedexClass::External) {
                        if r2.kind != StepKind::E {
                            continue;
                        }
                        let t2 = fire_redex(session, &t1, &r2.path, r2.kind);
                        if seen.insert(crate::vsc::canon_key(&t2)) {
                            next.push(t2);
                        }
                    }
                } else if seen.insert(crate::vsc::canon_key(&t1)) {
                    next.push(t1);
                }
                if next.len() > PROJECTION_FRONTIER_CAP {
                    break;
                }
            }
        }
        for t in &next {
            if terms_equiv(session, t, after) {
                return true;
            }
        }
        if next.is_empty() {
            return false;
        }
        frontier = next;
    }
    false
}
