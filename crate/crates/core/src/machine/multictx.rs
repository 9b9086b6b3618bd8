//! Multi contexts: terms with zero or more holes, used to classify the
//! read-back of machine contexts. The read-back of `e[x←λy.K]e'`
//! substitutes the abstraction (holes included) for every occurrence of
//! x, which is how a single machine hole becomes many term holes under
//! implosive sharing.

use std::collections::HashMap;
use std::rc::Rc;

use crate::crumble::{Bite, ReadbackNames};
use crate::syntax::{VarId, VscTerm, STAR};
use crate::vsc::is_rigid;

use super::Machine;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MultiCtx {
    Hole,
    Var(VarId),
    Lam(VarId, Rc<MultiCtx>),
    App(Rc<MultiCtx>, Rc<MultiCtx>),
    Es {
        body: Rc<MultiCtx>,
        var: VarId,
        def: Rc<MultiCtx>,
    },
}

impl MultiCtx {
    pub fn from_term(t: &VscTerm) -> Rc<MultiCtx> {
        Rc::new(match t {
            VscTerm::Var(v) => MultiCtx::Var(*v),
            VscTerm::Lam(v, b) => MultiCtx::Lam(*v, MultiCtx::from_term(b)),
            VscTerm::App(f, a) => MultiCtx::App(MultiCtx::from_term(f), MultiCtx::from_term(a)),
            VscTerm::Es { body, var, def } => MultiCtx::Es {
                body: MultiCtx::from_term(body),
                var: *var,
                def: MultiCtx::from_term(def),
            },
        })
    }

    pub fn hole_count(&self) -> usize {
        match self {
            MultiCtx::Hole => 1,
            MultiCtx::Var(_) => 0,
            MultiCtx::Lam(_, b) => b.hole_count(),
            MultiCtx::App(f, a) => f.hole_count() + a.hole_count(),
            MultiCtx::Es { body, def, .. } => body.hole_count() + def.hole_count(),
        }
    }

    pub fn is_proper(&self) -> bool {
        self.hole_count() > 0
    }

    /// Plugs `t` into every hole (capturing, as contexts do).
    pub fn plug(&self, t: &Rc<VscTerm>) -> Rc<VscTerm> {
        match self {
            MultiCtx::Hole => t.clone(),
            MultiCtx::Var(v) => crate::syntax::vvar(*v),
            MultiCtx::Lam(v, b) => crate::syntax::vlam(*v, b.plug(t)),
            MultiCtx::App(f, a) => crate::syntax::vapp(f.plug(t), a.plug(t)),
            MultiCtx::Es { body, var, def } => {
                crate::syntax::ves(body.plug(t), *var, def.plug(t))
            }
        }
    }

    /// Hole-free multi contexts are terms.
    pub fn to_term(&self) -> Option<Rc<VscTerm>> {
        match self {
            MultiCtx::Hole => None,
            MultiCtx::Var(v) => Some(crate::syntax::vvar(*v)),
            MultiCtx::Lam(v, b) => Some(crate::syntax::vlam(*v, b.to_term()?)),
            MultiCtx::App(f, a) => Some(crate::syntax::vapp(f.to_term()?, a.to_term()?)),
            MultiCtx::Es { body, var, def } => {
                Some(crate::syntax::ves(body.to_term()?, *var, def.to_term()?))
            }
        }
    }

    /// Substitution over a multi context. Holes are untouched; contexts
    /// capture by design, so no renaming happens.
    pub fn subst(&self, x: VarId, v: &Rc<MultiCtx>) -> Rc<MultiCtx> {
        Rc::new(match self {
            MultiCtx::Hole => MultiCtx::Hole,
            MultiCtx::Var(w) => {
                if *w == x {
                    return v.clone();
                }
                MultiCtx::Var(*w)
            }
            MultiCtx::Lam(w, b) => {
                if *w == x {
                    MultiCtx::Lam(*w, b.clone())
                } else {
                    MultiCtx::Lam(*w, b.subst(x, v))
                }
            }
            MultiCtx::App(f, a) => MultiCtx::App(f.subst(x, v), a.subst(x, v)),
            MultiCtx::Es { body, var, def } => {
                let def2 = def.subst(x, v);
                if *var == x {
                    MultiCtx::Es {
                        body: body.clone(),
                        var: *var,
                        def: def2,
                    }
                } else {
                    MultiCtx::Es {
                        body: body.subst(x, v),
                        var: *var,
                        def: def2,
                    }
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiClass {
    /// Rigid (hence also external).
    Rigid,
    /// External but not rigid.
    External,
    Neither,
}

/// Grammar membership for the external/rigid multi-context grammars.
/// Hole-free multi contexts are terms: any term is external, rigid terms
/// are rigid.
pub fn classify_multicontext(c: &Rc<MultiCtx>) -> (MultiClass, bool) {
    let proper = c.is_proper();
    if is_rigid_mc(c) {
        (MultiClass::Rigid, proper)
    } else if is_external_mc(c) {
        (MultiClass::External, proper)
    } else {
        (MultiClass::Neither, proper)
    }
}

pub fn is_external_mc(c: &Rc<MultiCtx>) -> bool {
    if c.hole_count() == 0 {
        return true; // every term is an external multi context
    }
    match c.as_ref() {
        MultiCtx::Hole => true,
        MultiCtx::Var(_) => true,
        MultiCtx::Lam(_, b) => is_external_mc(b),
        MultiCtx::Es { body, def, .. } => is_external_mc(body) && is_rigid_mc(def),
        MultiCtx::App(..) => is_rigid_mc(c),
    }
}

pub fn is_rigid_mc(c: &Rc<MultiCtx>) -> bool {
    if c.hole_count() == 0 {
        // Hole-free rigid multi contexts are exactly the rigid terms.
        return is_rigid(&c.to_term().expect("hole-free"));
    }
    match c.as_ref() {
        MultiCtx::Hole => false,
        MultiCtx::Var(_) => true,
        MultiCtx::Lam(..) => false,
        MultiCtx::App(f, a) => is_rigid_mc(f) && is_external_mc(a),
        MultiCtx::Es { body, def, .. } => is_rigid_mc(body) && is_rigid_mc(def),
    }
}

impl Machine {
    /// Folds one ES into an accumulated multi context, per the read-back
    /// unfolding discipline.
    fn fold_mc_entry(
        &self,
        acc: Rc<MultiCtx>,
        id: crate::crumble::EsId,
        names: &mut ReadbackNames,
    ) -> Rc<MultiCtx> {
        let node = self.heap.get(id);
        let content = MultiCtx::from_term(&crate::crumble::readback_bite_named(
            &self.heap,
            &node.content,
            names,
        ));
        if node.content.is_value() || node.var.in_crumb_space() {
            acc.subst(node.var, &content)
        } else {
            Rc::new(MultiCtx::Es {
                body: acc,
                var: node.var,
                def: content,
            })
        }
    }

    /// `K↓` as a multi context: the hole sits where the focus would be,
    /// and entering `e[x←λy.K']e'` substitutes `λy.K'↓` (holes included)
    /// for the occurrences of x — that duplication is how one machine
    /// hole becomes many term holes under implosive sharing.
    pub fn readback_ctx(&self) -> Rc<MultiCtx> {
        let mut names = ReadbackNames::new();
        self.readback_ctx_with(&mut names)
    }

    fn readback_ctx_with(&self, names: &mut ReadbackNames) -> Rc<MultiCtx> {
        let mut kdown: Rc<MultiCtx> = Rc::new(MultiCtx::Hole);
        for id in self.ctx.right.iter() {
            kdown = self.fold_mc_entry(kdown, id, names);
        }
        for f in self.ctx.frames.iter().rev() {
            let mut acc: Rc<MultiCtx> = Rc::new(MultiCtx::Var(STAR));
            for id in f.left.iter() {
                acc = self.fold_mc_entry(acc, id, names);
            }
            let fnode = self.heap.get(f.es);
            let lam = Rc::new(MultiCtx::Lam(f.lam_var, kdown));
            acc = acc.subst(fnode.var, &lam);
            for id in f.right.iter() {
                acc = self.fold_mc_entry(acc, id, names);
            }
            kdown = acc;
        }
        kdown
    }

    /// Modular state read-back `K↓⟨e↓σ_{e_K}⟩`: the second route of the
    /// read-back equation, compared against [`Machine::readback_state`]
    /// in deep checks.
    pub fn readback_state_modular(&self) -> Rc<VscTerm> {
        let mut names = ReadbackNames::new();
        let kdown = self.readback_ctx_with(&mut names);
        let focus_rb = {
            let mut acc = crate::syntax::vvar(STAR);
            for id in self.focus.iter() {
                let node = self.heap.get(id);
                let content =
                    crate::crumble::readback_bite_named(&self.heap, &node.content, &mut names);
                acc = if node.content.is_value() || node.var.in_crumb_space() {
                    crate::crumble::subst_readback(&acc, node.var, &content, &mut names)
                } else {
                    crate::syntax::ves(acc, node.var, content)
                };
            }
            acc
        };
        let sg = crate::crumble::sigma_of_ids(&self.heap, self.ek_ids().into_iter());
        let plugged = crate::crumble::apply_subst(&focus_rb, &sg);
        kdown.plug(&plugged)
    }
}

/// α-respecting structural equality for multi contexts is not needed;
/// classification is name-insensitive apart from binder kinds.
#[allow(dead_code)]
fn _multictx_name_map() -> HashMap<VarId, VarId> {
    HashMap::new()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::Session;

    #[test]
    fn classify_basic_shapes() {
        let mut s = Session::new();
        let x = s.free_var("x");
        let y = s.fresh_calc(Some("y"));
        let hole = Rc::new(MultiCtx::Hole);
        assert_eq!(
            classify_multicontext(&hole),
            (MultiClass::External, true)
        );
        // x⟨·⟩ is rigid (hence external) and proper.
        let xh = Rc::new(MultiCtx::App(Rc::new(MultiCtx::Var(x)), hole.clone()));
        assert_eq!(classify_multicontext(&xh), (MultiClass::Rigid, true));
        // (λy.⟨·⟩)x is neither: the hole sits inside an applied value.
        let bad = Rc::new(MultiCtx::App(
            Rc::new(MultiCtx::Lam(y, hole.clone())),
            Rc::new(MultiCtx::Var(x)),
        ));
        assert_eq!(classify_multicontext(&bad), (MultiClass::Neither, true));
        // λy.⟨·⟩ alone is external.
        let lam = Rc::new(MultiCtx::Lam(y, hole));
        assert_eq!(classify_multicontext(&lam), (MultiClass::External, true));
    }

    #[test]
    fn hole_free_contexts_are_terms() {
        let mut s = Session::new();
        let x = s.free_var("x");
        let v = Rc::new(MultiCtx::Var(x));
        assert_eq!(classify_multicontext(&v), (MultiClass::Rigid, false));
        let lam = Rc::new(MultiCtx::Lam(s.fresh_calc(None), v));
        // A hole-free abstraction is a term: external, not rigid, improper.
        assert_eq!(classify_multicontext(&lam), (MultiClass::External, false));
    }

    #[test]
    fn plug_duplicates_into_all_holes() {
        let mut s = Session::new();
        let x = s.free_var("x");
        let two_holes = Rc::new(MultiCtx::App(
            Rc::new(MultiCtx::App(Rc::new(MultiCtx::Var(x)), Rc::new(MultiCtx::Hole))),
            Rc::new(MultiCtx::Hole),
        ));
        assert_eq!(two_holes.hole_count(), 2);
        let y = crate::syntax::vvar(s.free_var("y"));
        let t = two_holes.plug(&y);
        assert_eq!(crate::syntax::fv(&t).len(), 2);
    }
}
