//! Parser for the concrete term grammar.
//!
//! Variables are `[a-zA-Z_][a-zA-Z0-9_']*`, abstraction is `\x. body` or
//! `λx. body` (body extends maximally to the right), application is
//! juxtaposition and associates to the left, parentheses group. When
//! parsing VSC terms, `t[x<-u]` is accepted as a postfix on atoms and
//! binds tighter than application.

use std::collections::HashMap;
use std::rc::Rc;

use super::{vapp, ves, vlam, vvar, Session, Term, VarId, VscTerm};

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
#[error("parse error at byte {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Lambda,
    Dot,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Arrow, // `<-`
    Eof,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src, pos: 0 }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Result<(Tok, usize), ParseError> {
        let save = self.pos;
        let t = self.next()?;
        self.pos = save;
        Ok(t)
    }

    /// Returns the token and the byte position where it starts.
    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let mut chars = rest.chars();
        let c = match chars.next() {
            None => return Ok((Tok::Eof, start)),
            Some(c) => c,
        };
        let tok = match c {
            '\\' | 'λ' => {
                self.pos += c.len_utf8();
                Tok::Lambda
            }
            '.' => {
                self.pos += 1;
                Tok::Dot
            }
            '(' => {
                self.pos += 1;
                Tok::LParen
            }
            ')' => {
                self.pos += 1;
                Tok::RParen
            }
            '[' => {
                self.pos += 1;
                Tok::LBracket
            }
            ']' => {
                self.pos += 1;
                Tok::RBracket
            }
            '<' => {
                if rest.starts_with("<-") {
                    self.pos += 2;
                    Tok::Arrow
                } else {
                    return Err(ParseError {
                        pos: start,
                        msg: "expected `<-`".to_string(),
                    });
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut end = self.pos + 1;
                for c2 in chars {
                    if c2.is_ascii_alphanumeric() || c2 == '_' || c2 == '\'' {
                        end += c2.len_utf8();
                    } else {
                        break;
                    }
                }
                let name = self.src[self.pos..end].to_string();
                self.pos = end;
                Tok::Ident(name)
            }
            _ => {
                return Err(ParseError {
                    pos: start,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        };
        Ok((tok, start))
    }
}

struct Parser<'a> {
    lx: Lexer<'a>,
    session: &'a mut Session,
    // Name → stack of binders in scope.
    scope: HashMap<String, Vec<VarId>>,
    allow_es: bool,
}

impl<'a> Parser<'a> {
    fn resolve(&mut self, name: &str) -> VarId {
        match self.scope.get(name).and_then(|s| s.last()) {
            Some(v) => *v,
            None => self.session.free_var(name),
        }
    }

    fn with_binder<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self, VarId) -> Result<T, ParseError>,
    ) -> Result<T, ParseError> {
        let v = self.session.fresh_calc(Some(name));
        self.scope.entry(name.to_string()).or_default().push(v);
        let r = f(self, v);
        self.scope.get_mut(name).unwrap().pop();
        r
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        let (t, pos) = self.lx.next()?;
        if t == want {
            Ok(())
        } else {
            Err(ParseError {
                pos,
                msg: format!("expected {what}, found {t:?}"),
            })
        }
    }

    fn term(&mut self) -> Result<Rc<VscTerm>, ParseError> {
        let (t, pos) = self.lx.peek()?;
        if t == Tok::Lambda {
            self.lx.next()?;
            let (t, pos) = self.lx.next()?;
            let name = match t {
                Tok::Ident(n) => n,
                _ => {
                    return Err(ParseError {
                        pos,
                        msg: "expected a variable after lambda".to_string(),
                    })
                }
            };
            self.expect(Tok::Dot, "`.` after lambda binder")?;
            return self.with_binder(&name, |p, v| Ok(vlam(v, p.term()?)));
        }
        let mut acc = match self.atom()? {
            Some(a) => a,
            None => {
                return Err(ParseError {
                    pos,
                    msg: "expected a term".to_string(),
                })
            }
        };
        loop {
            let (t, _) = self.lx.peek()?;
            if t == Tok::Lambda {
                // Trailing lambda argument: `f \x. b` applies f to the lambda.
                self.lx.next()?;
                let (t, pos) = self.lx.next()?;
                let name = match t {
                    Tok::Ident(n) => n,
                    _ => {
                        return Err(ParseError {
                            pos,
                            msg: "expected a variable after lambda".to_string(),
                        })
                    }
                };
                self.expect(Tok::Dot, "`.` after lambda binder")?;
                let body = self.with_binder(&name, |p, v| Ok(vlam(v, p.term()?)))?;
                acc = vapp(acc, body);
                return Ok(acc);
            }
            match self.atom()? {
                Some(a) => acc = vapp(acc, a),
                None => return Ok(acc),
            }
        }
    }

    /// One atom with its postfix ES suffixes, or None at a term boundary.
    fn atom(&mut self) -> Result<Option<Rc<VscTerm>>, ParseError> {
        let (t, pos) = self.lx.peek()?;
        let mut base = match t {
            Tok::Ident(name) => {
                self.lx.next()?;
                let v = self.resolve(&name);
                vvar(v)
            }
            Tok::LParen => {
                self.lx.next()?;
                let inner = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                inner
            }
            _ => return Ok(None),
        };
        loop {
            let (t, _) = self.lx.peek()?;
            if t != Tok::LBracket {
                return Ok(Some(base));
            }
            if !self.allow_es {
                return Err(ParseError {
                    pos,
                    msg: "explicit substitutions are not allowed in pure terms".to_string(),
                });
            }
            self.lx.next()?;
            let (t, pos2) = self.lx.next()?;
            let name = match t {
                Tok::Ident(n) => n,
                _ => {
                    return Err(ParseError {
                        pos: pos2,
                        msg: "expected a variable inside `[`".to_string(),
                    })
                }
            };
            self.expect(Tok::Arrow, "`<-`")?;
            let def = self.term()?;
            self.expect(Tok::RBracket, "`]`")?;
            // The ES binder scopes over the base term only.
            let v = self.session.fresh_calc(Some(&name));
            base = ves(rebind_free(&base, &name, v, self), v, def);
        }
    }
}

/// Rebind occurrences of `name` in an already-parsed subterm to the ES
/// binder `v`. Needed because in `t[x<-u]` the binder is seen only after
/// t has been parsed: occurrences in t resolved to the innermost
/// enclosing binder of that name (or to the interned free variable), and
/// the ES shadows both. `rename_var` stops at inner rebinders, which all
/// carry distinct ids, so shadowed occurrences inside t are untouched.
fn rebind_free(t: &Rc<VscTerm>, name: &str, v: VarId, p: &mut Parser<'_>) -> Rc<VscTerm> {
    let target = match p.scope.get(name).and_then(|s| s.last()) {
        Some(outer) => *outer,
        None => p.session.free_var(name),
    };
    super::rename_var(t, target, v)
}

fn run_parser(
    session: &mut Session,
    text: &str,
    allow_es: bool,
) -> Result<Rc<VscTerm>, ParseError> {
    let mut p = Parser {
        lx: Lexer::new(text),
        session,
        scope: HashMap::new(),
        allow_es,
    };
    let t = p.term()?;
    let (tok, pos) = p.lx.next()?;
    if tok != Tok::Eof {
        return Err(ParseError {
            pos,
            msg: format!("unexpected trailing {tok:?}"),
        });
    }
    Ok(t)
}

/// Parse a pure λ-term.
pub fn parse_term(session: &mut Session, text: &str) -> Result<Rc<Term>, ParseError> {
    let t = run_parser(session, text, false)?;
    Ok(t.to_pure().expect("pure parse cannot contain ES or ⋆"))
}

/// Parse a VSC term (`t[x<-u]` allowed).
pub fn parse_vsc_term(session: &mut Session, text: &str) -> Result<Rc<VscTerm>, ParseError> {
    run_parser(session, text, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, alpha_eq_term, fv, print_term, print_vsc_term};

    #[test]
    fn parses_identity() {
        let mut s = Session::new();
        let t = parse_term(&mut s, r"\x. x").unwrap();
        match t.as_ref() {
            Term::Lam(v, b) => assert!(matches!(b.as_ref(), Term::Var(w) if w == v)),
            _ => panic!("expected lambda"),
        }
    }

    #[test]
    fn application_is_left_associative() {
        let mut s = Session::new();
        let t = parse_term(&mut s, "x y z").unwrap();
        let u = parse_term(&mut s, "(x y) z").unwrap();
        assert_eq!(t, u);
        let w = parse_term(&mut s, "x (y z)").unwrap();
        assert_ne!(t, w);
    }

    #[test]
    fn lambda_body_extends_right() {
        let mut s = Session::new();
        let t = parse_term(&mut s, r"\x. x x").unwrap();
        let u = parse_term(&mut s, r"\x. (x x)").unwrap();
        assert!(alpha_eq_term(&t, &u));
    }

    #[test]
    fn parses_es_and_scopes_binder() {
        let mut s = Session::new();
        let t = parse_vsc_term(&mut s, "y[x<-z]").unwrap();
        match t.as_ref() {
            VscTerm::Es { body, var, def } => {
                assert!(matches!(body.as_ref(), VscTerm::Var(_)));
                assert!(matches!(def.as_ref(), VscTerm::Var(_)));
                assert!(!var.is_star());
            }
            _ => panic!("expected ES"),
        }
        // x in the body is bound by the ES.
        let t2 = parse_vsc_term(&mut s, "x[x<-z]").unwrap();
        let free = fv(&t2);
        assert_eq!(free.len(), 1);
        let z = s.free_var("z");
        assert!(free.contains(&z));
    }

    #[test]
    fn es_rejected_in_pure_terms() {
        let mut s = Session::new();
        assert!(parse_term(&mut s, "y[x<-z]").is_err());
    }

    #[test]
    fn error_carries_position() {
        let mut s = Session::new();
        let e = parse_term(&mut s, "x )").unwrap_err();
        assert_eq!(e.pos, 2);
    }

    #[test]
    fn ex_vii2_term_shape() {
        // (λx.(λy.y)(xx))(λz.zz)
        let mut s = Session::new();
        let t = parse_term(&mut s, r"(\x. (\y. y) (x x)) (\z. z z)").unwrap();
        match t.as_ref() {
            Term::App(f, a) => {
                assert!(matches!(f.as_ref(), Term::Lam(..)));
                assert!(matches!(a.as_ref(), Term::Lam(..)));
            }
            _ => panic!("expected application"),
        }
        let printed = print_term(&t, &s);
        let t2 = parse_term(&mut s, &printed).unwrap();
        assert!(alpha_eq_term(&t, &t2));
    }

    #[test]
    fn vsc_print_parse_roundtrip() {
        let mut s = Session::new();
        let t = parse_vsc_term(&mut s, r"(\x. x y)[y<-\z. z] w").unwrap();
        let printed = print_vsc_term(&t, &s);
        let t2 = parse_vsc_term(&mut s, &printed).unwrap();
        assert!(alpha_eq(&t, &t2));
    }
}
