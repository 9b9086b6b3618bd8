//! Term printers. Binder names are taken from the session and primed
//! until they clash neither with the names of free variables below them
//! nor with an enclosing binder still visible there, so the output parses
//! back to an α-equal term.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use super::{fv, Session, Term, VarId, VscTerm};

pub fn print_term(t: &Rc<Term>, session: &Session) -> String {
    print_vsc_term(&t.to_vsc(), session)
}

pub fn print_vsc_term(t: &Rc<VscTerm>, session: &Session) -> String {
    let mut out = String::new();
    let mut names: HashMap<VarId, String> = HashMap::new();
    go(t, session, &mut names, &mut out, Pos::Top);
    out
}

/// How a subterm sits in its parent, for parenthesization.
#[derive(Clone, Copy, PartialEq)]
enum Pos {
    Top,
    AppLeft,
    AppRight,
    EsBase,
}

fn needs_parens(t: &VscTerm, pos: Pos) -> bool {
    match t {
        VscTerm::Var(_) => false,
        VscTerm::Lam(..) => pos == Pos::AppLeft || pos == Pos::AppRight || pos == Pos::EsBase,
        VscTerm::App(..) => pos == Pos::AppRight || pos == Pos::EsBase,
        // An ES chain is an atom followed by suffixes; its base decides.
        VscTerm::Es { body, .. } => needs_parens(body, pos),
    }
}

fn go(
    t: &Rc<VscTerm>,
    session: &Session,
    names: &mut HashMap<VarId, String>,
    out: &mut String,
    pos: Pos,
) {
    let parens = needs_parens(t, pos);
    if parens {
        out.push('(');
    }
    match t.as_ref() {
        VscTerm::Var(v) => out.push_str(&display_name(*v, session, names)),
        VscTerm::Lam(v, b) => {
            let name = pick_binder_name(*v, b, session, names);
            out.push('\\');
            out.push_str(&name);
            out.push_str(". ");
            let prev = names.insert(*v, name);
            go(b, session, names, out, Pos::Top);
            restore(names, *v, prev);
        }
        VscTerm::App(f, a) => {
            go(f, session, names, out, Pos::AppLeft);
            out.push(' ');
            go(a, session, names, out, Pos::AppRight);
        }
        VscTerm::Es { body, var, def } => {
            let name = pick_binder_name(*var, body, session, names);
            let prev = names.insert(*var, name.clone());
            go(body, session, names, out, Pos::EsBase);
            restore(names, *var, prev);
            out.push('[');
            out.push_str(&name);
            out.push_str("<-");
            go(def, session, names, out, Pos::Top);
            out.push(']');
        }
    }
    if parens {
        out.push(')');
    }
}

fn display_name(v: VarId, session: &Session, names: &HashMap<VarId, String>) -> String {
    match names.get(&v) {
        Some(n) => n.clone(),
        None => session.name_of(v),
    }
}

/// A name for the binder that no variable free in `body` already renders
/// as; otherwise occurrences of those variables would be captured when
/// the output is re-parsed.
fn pick_binder_name(
    v: VarId,
    body: &Rc<VscTerm>,
    session: &Session,
    names: &HashMap<VarId, String>,
) -> String {
    let mut taken: HashSet<String> = HashSet::new();
    for w in fv(body) {
        if w != v {
            taken.insert(display_name(w, session, names));
        }
    }
    let mut name = session.name_of(v);
    if name == "*" {
        // ⋆ has no surface syntax; it can only show up when printing
        // read-back artifacts and never parses back.
        return name;
    }
    while taken.contains(&name) {
        name.push('\'');
    }
    name
}

fn restore(names: &mut HashMap<VarId, String>, k: VarId, prev: Option<String>) {
    match prev {
        Some(n) => {
            names.insert(k, n);
        }
        None => {
            names.remove(&k);
        }
    }
}

/// Environment-entry style printing used by trace output: `x<-b`.
pub fn print_env_entry_style(var: &str, content: &str) -> String {
    format!("[{var}<-{content}]")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{
        alpha_eq, lam, parse_term, parse_vsc_term, var, ves, vvar, Session,
    };

    #[test]
    fn prints_identity() {
        let mut s = Session::new();
        let x = s.fresh_calc(Some("x"));
        let t = lam(x, var(x));
        assert_eq!(print_term(&t, &s), r"\x. x");
    }

    #[test]
    fn prints_es() {
        let mut s = Session::new();
        let x = s.fresh_calc(Some("x"));
        let y = s.free_var("y");
        let z = s.free_var("z");
        let t = ves(vvar(y), x, vvar(z));
        assert_eq!(print_vsc_term(&t, &s), "y[x<-z]");
    }

    #[test]
    fn renames_clashing_binders_on_print() {
        let mut s = Session::new();
        // λx.x' where the binder's preferred name collides with a free var
        // named x: the printer must prime it.
        let free_x = s.free_var("x");
        let b = s.fresh_calc(Some("x"));
        let t = lam(b, crate::syntax::app(var(b), var(free_x)));
        let printed = print_term(&t, &s);
        let t2 = parse_term(&mut s, &printed).unwrap();
        assert!(crate::syntax::alpha_eq_term(&t, &t2));
    }

    #[test]
    fn es_chain_roundtrip() {
        let mut s = Session::new();
        let t = parse_vsc_term(&mut s, r"(x y)[x<-\w. w][y<-z z]").unwrap();
        let printed = print_vsc_term(&t, &s);
        let t2 = parse_vsc_term(&mut s, &printed).unwrap();
        assert!(alpha_eq(&t, &t2));
    }
}
