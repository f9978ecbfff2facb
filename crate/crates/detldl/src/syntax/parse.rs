//! Recursive-descent parser for program files.
//!
//! ```text
//! module NAME(IN,.. ; OUT,..) { HEAD(x) <- ATOM, ATOM. ... }
//! prop NAME(IN,..) { <- ATOM, ATOM. ... }
//! let NAME = TERM
//! main: TERM
//! ```
//!
//! Term syntax: `;` composition, `<+` preferential union, `!a` anti-domain,
//! `~a` anti-image, `a^` maximum iterate, `a?` test, `conv(a)` converse,
//! `sel(X=Y, a)` / `sel(X!=Y, a)` selection, `eps M` choice, `fresh(X; Y,Z)`
//! freshness, `[a> f` / `<a] f` diamonds, plus the named forms `pow`, `dom`,
//! `dia`, `box`, `bdia`, `bbox`, `if`, `while`, `repeat`, `E`, `G`, `BE`,
//! `BG` and the constants `id`, `skip`, `fail`, `top`, `last`, `any`.

use super::{ModuleDecl, Program, RuleDecl, SyntaxError, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(usize),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LAngle,
    RAngle,
    Comma,
    Semi,
    Dot,
    Colon,
    Arrow,
    PrefU,
    Bang,
    Neq,
    Tilde,
    Caret,
    Question,
    Eq,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tok::Ident(n) => return write!(f, "`{n}`"),
            Tok::Int(n) => return write!(f, "`{n}`"),
            Tok::LParen => "`(`",
            Tok::RParen => "`)`",
            Tok::LBrace => "`{`",
            Tok::RBrace => "`}`",
            Tok::LBracket => "`[`",
            Tok::RBracket => "`]`",
            Tok::LAngle => "`<`",
            Tok::RAngle => "`>`",
            Tok::Comma => "`,`",
            Tok::Semi => "`;`",
            Tok::Dot => "`.`",
            Tok::Colon => "`:`",
            Tok::Arrow => "`<-`",
            Tok::PrefU => "`<+`",
            Tok::Bang => "`!`",
            Tok::Neq => "`!=`",
            Tok::Tilde => "`~`",
            Tok::Caret => "`^`",
            Tok::Question => "`?`",
            Tok::Eq => "`=`",
            Tok::Eof => "end of input",
        };
        f.write_str(s)
    }
}

struct Lexer<'a> {
    src: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.src.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.src.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            if self.src.peek() == Some(&'#') {
                while !matches!(self.src.peek(), None | Some('\n')) {
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let c = match self.bump() {
                None => {
                    out.push((Tok::Eof, line, col));
                    return Ok(out);
                }
                Some(c) => c,
            };
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '>' => Tok::RAngle,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '.' => Tok::Dot,
                ':' => Tok::Colon,
                '~' => Tok::Tilde,
                '^' => Tok::Caret,
                '?' => Tok::Question,
                '=' => Tok::Eq,
                '<' => match self.src.peek() {
                    Some('-') => {
                        self.bump();
                        Tok::Arrow
                    }
                    Some('+') => {
                        self.bump();
                        Tok::PrefU
                    }
                    _ => Tok::LAngle,
                },
                '!' => {
                    if self.src.peek() == Some(&'=') {
                        self.bump();
                        Tok::Neq
                    } else {
                        Tok::Bang
                    }
                }
                c if c.is_ascii_digit() => {
                    let mut n = String::from(c);
                    while matches!(self.src.peek(), Some(d) if d.is_ascii_digit()) {
                        n.push(self.bump().unwrap());
                    }
                    Tok::Int(n.parse().map_err(|_| {
                        SyntaxError::at(line, col, format!("integer `{n}` out of range"))
                    })?)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut n = String::from(c);
                    while matches!(self.src.peek(),
                        Some(d) if d.is_alphanumeric() || *d == '_' || *d == '\'')
                    {
                        n.push(self.bump().unwrap());
                    }
                    Tok::Ident(n)
                }
                other => {
                    return Err(SyntaxError::at(line, col, format!("unexpected character `{other}`")))
                }
            };
            out.push((tok, line, col));
        }
    }
}

const RESERVED: &[&str] = &[
    "module", "prop", "let", "main", "eps", "id", "skip", "fail", "top", "last", "any", "conv",
    "sel", "fresh", "pow", "dom", "dia", "box", "bdia", "bbox", "if", "while", "repeat", "E", "G",
    "BE", "BG",
];

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn here(&self) -> (usize, usize) {
        let (_, l, c) = self.toks[self.pos];
        (l, c)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> SyntaxError {
        let (l, c) = self.here();
        SyntaxError::at(l, c, msg)
    }

    fn expect(&mut self, tok: Tok) -> Result<(), SyntaxError> {
        if self.peek() == &tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(format!("expected {tok}, found {}", self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(n) => {
                self.bump();
                Ok(n)
            }
            other => Err(self.err(format!("expected {what}, found {other}"))),
        }
    }

    fn comma_idents(&mut self, stop: &Tok) -> Result<Vec<String>, SyntaxError> {
        let mut out = Vec::new();
        if self.peek() == stop {
            return Ok(out);
        }
        loop {
            out.push(self.ident("a symbol name")?);
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                return Ok(out);
            }
        }
    }

    // ---- program items ---------------------------------------------------

    fn program(&mut self) -> Result<Program, SyntaxError> {
        let mut modules = Vec::new();
        let mut lets = Vec::new();
        let mut main = None;
        loop {
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "module" || kw == "prop" => {
                    self.bump();
                    modules.push(self.module_decl(kw == "prop")?);
                }
                Tok::Ident(kw) if kw == "let" => {
                    self.bump();
                    let name = self.ident("a definition name")?;
                    if RESERVED.contains(&name.as_str()) {
                        return Err(self.err(format!("`{name}` is a reserved word")));
                    }
                    self.expect(Tok::Eq)?;
                    lets.push((name, self.term()?));
                }
                Tok::Ident(kw) if kw == "main" => {
                    self.bump();
                    self.expect(Tok::Colon)?;
                    if main.is_some() {
                        return Err(self.err("duplicate `main`"));
                    }
                    main = Some(self.term()?);
                }
                other => {
                    return Err(self.err(format!(
                        "expected `module`, `prop`, `let` or `main`, found {other}"
                    )))
                }
            }
        }
        let main = main.ok_or_else(|| self.err("program has no `main:` term"))?;
        let program = Program { modules, lets, main };
        validate(&program)?;
        Ok(program)
    }

    fn module_decl(&mut self, is_prop: bool) -> Result<ModuleDecl, SyntaxError> {
        let (l, c) = self.here();
        let name = self.ident("a module name")?;
        if RESERVED.contains(&name.as_str()) {
            return Err(SyntaxError::at(l, c, format!("`{name}` is a reserved word")));
        }
        self.expect(Tok::LParen)?;
        let stop = if is_prop { Tok::RParen } else { Tok::Semi };
        let inputs = self.comma_idents(&stop)?;
        let outputs = if is_prop {
            Vec::new()
        } else {
            self.expect(Tok::Semi)?;
            self.comma_idents(&Tok::RParen)?
        };
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let mut rules = Vec::new();
        while self.peek() != &Tok::RBrace {
            rules.push(self.rule(is_prop)?);
        }
        self.expect(Tok::RBrace)?;
        Ok(ModuleDecl { name, is_prop, inputs, outputs, rules })
    }

    fn rule(&mut self, is_prop: bool) -> Result<RuleDecl, SyntaxError> {
        let head = if is_prop {
            self.expect(Tok::Arrow)?;
            None
        } else {
            let sym = self.ident("a head symbol")?;
            self.expect(Tok::LParen)?;
            let var = self.ident("a head variable")?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Arrow)?;
            Some((sym, var))
        };
        let mut body = Vec::new();
        while self.peek() != &Tok::Dot {
            let sym = self.ident("a body atom")?;
            self.expect(Tok::LParen)?;
            let vars = self.comma_idents(&Tok::RParen)?;
            if vars.is_empty() {
                return Err(self.err("atoms need at least one variable"));
            }
            self.expect(Tok::RParen)?;
            body.push((sym, vars));
            if self.peek() == &Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::Dot)?;
        Ok(RuleDecl { head, body })
    }

    // ---- terms -----------------------------------------------------------

    fn term(&mut self) -> Result<Term, SyntaxError> {
        let mut t = self.seq()?;
        while self.peek() == &Tok::PrefU {
            self.bump();
            t = Term::PrefUnion(Box::new(t), Box::new(self.seq()?));
        }
        Ok(t)
    }

    fn seq(&mut self) -> Result<Term, SyntaxError> {
        let mut t = self.prefix()?;
        while self.peek() == &Tok::Semi {
            self.bump();
            t = Term::compose(t, self.prefix()?);
        }
        Ok(t)
    }

    fn prefix(&mut self) -> Result<Term, SyntaxError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Term::AntiDomain(Box::new(self.prefix()?)))
            }
            Tok::Tilde => {
                self.bump();
                Ok(Term::AntiImage(Box::new(self.prefix()?)))
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> Result<Term, SyntaxError> {
        let mut t = self.primary()?;
        loop {
            match self.peek() {
                Tok::Caret => {
                    self.bump();
                    t = Term::MaxIterate(Box::new(t));
                }
                Tok::Question => {
                    self.bump();
                    t = Term::Test(Box::new(t));
                }
                _ => return Ok(t),
            }
        }
    }

    fn paren_args2(&mut self) -> Result<(Term, Term), SyntaxError> {
        self.expect(Tok::LParen)?;
        let a = self.term()?;
        self.expect(Tok::Comma)?;
        let b = self.term()?;
        self.expect(Tok::RParen)?;
        Ok((a, b))
    }

    fn primary(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            // [a> f
            Tok::LBracket => {
                self.bump();
                let a = self.term()?;
                self.expect(Tok::RAngle)?;
                let f = self.prefix()?;
                Ok(Term::DiamondRight(Box::new(a), Box::new(f)))
            }
            // <a] f
            Tok::LAngle => {
                self.bump();
                let a = self.term()?;
                self.expect(Tok::RBracket)?;
                let f = self.prefix()?;
                Ok(Term::DiamondLeft(Box::new(a), Box::new(f)))
            }
            Tok::Ident(name) => {
                self.bump();
                self.named(name)
            }
            other => Err(self.err(format!("expected a term, found {other}"))),
        }
    }

    fn named(&mut self, name: String) -> Result<Term, SyntaxError> {
        match name.as_str() {
            "id" | "top" => Ok(Term::Id),
            "skip" => Ok(Term::Skip),
            "fail" => Ok(Term::Fail),
            "last" => Ok(Term::Last),
            "any" => Ok(Term::AnyM),
            "eps" => Ok(Term::Eps(self.ident("a module name")?)),
            "conv" => {
                self.expect(Tok::LParen)?;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Converse(Box::new(t)))
            }
            "dom" => {
                self.expect(Tok::LParen)?;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Dom(Box::new(t)))
            }
            "sel" => {
                self.expect(Tok::LParen)?;
                let x = self.ident("a register")?;
                let neq = match self.bump() {
                    Tok::Eq => false,
                    Tok::Neq => true,
                    other => return Err(self.err(format!("expected `=` or `!=`, found {other}"))),
                };
                let y = self.ident("a register")?;
                self.expect(Tok::Comma)?;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(if neq {
                    Term::SelectNeq(x, y, Box::new(t))
                } else {
                    Term::SelectEq(x, y, Box::new(t))
                })
            }
            "fresh" => {
                self.expect(Tok::LParen)?;
                let x = self.ident("a register")?;
                self.expect(Tok::Semi)?;
                let ys = self.comma_idents(&Tok::RParen)?;
                if ys.is_empty() {
                    return Err(self.err("fresh needs at least one register after `;`"));
                }
                self.expect(Tok::RParen)?;
                Ok(Term::Fresh(x, ys))
            }
            "pow" => {
                self.expect(Tok::LParen)?;
                let t = self.term()?;
                self.expect(Tok::Comma)?;
                let n = match self.bump() {
                    Tok::Int(n) => n,
                    other => return Err(self.err(format!("expected an exponent, found {other}"))),
                };
                self.expect(Tok::RParen)?;
                Ok(Term::Power(Box::new(t), n))
            }
            "dia" => {
                let (a, f) = self.paren_args2()?;
                Ok(Term::DiamondRight(Box::new(a), Box::new(f)))
            }
            "box" => {
                let (a, f) = self.paren_args2()?;
                Ok(Term::BoxRight(Box::new(a), Box::new(f)))
            }
            "bdia" => {
                let (a, f) = self.paren_args2()?;
                Ok(Term::DiamondLeft(Box::new(a), Box::new(f)))
            }
            "bbox" => {
                let (a, f) = self.paren_args2()?;
                Ok(Term::BoxLeft(Box::new(a), Box::new(f)))
            }
            "if" => {
                self.expect(Tok::LParen)?;
                let f = self.term()?;
                self.expect(Tok::Comma)?;
                let a = self.term()?;
                self.expect(Tok::Comma)?;
                let b = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::IfThenElse(Box::new(f), Box::new(a), Box::new(b)))
            }
            "while" => {
                let (f, a) = self.paren_args2()?;
                Ok(Term::While(Box::new(f), Box::new(a)))
            }
            "repeat" => {
                let (a, f) = self.paren_args2()?;
                Ok(Term::RepeatUntil(Box::new(a), Box::new(f)))
            }
            "E" if self.peek() == &Tok::LParen => {
                self.bump();
                let f = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Exists(Box::new(f)))
            }
            "G" if self.peek() == &Tok::LParen => {
                self.bump();
                let f = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::Globally(Box::new(f)))
            }
            "BE" if self.peek() == &Tok::LParen => {
                self.bump();
                let f = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::BackExists(Box::new(f)))
            }
            "BG" if self.peek() == &Tok::LParen => {
                self.bump();
                let f = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(Term::BackGlobally(Box::new(f)))
            }
            _ => Ok(Term::Ref(name)),
        }
    }
}

fn validate(p: &Program) -> Result<(), SyntaxError> {
    let mut names = std::collections::BTreeSet::new();
    for m in &p.modules {
        if !names.insert(m.name.clone()) {
            return Err(SyntaxError::Invalid(format!("module `{}` declared twice", m.name)));
        }
        if m.is_prop {
            if !m.outputs.is_empty() {
                return Err(SyntaxError::Invalid(format!(
                    "proposition `{}` cannot have outputs",
                    m.name
                )));
            }
        } else {
            if m.outputs.is_empty() {
                return Err(SyntaxError::Invalid(format!(
                    "action module `{}` needs at least one output",
                    m.name
                )));
            }
            let mut ruled = std::collections::BTreeSet::new();
            for r in &m.rules {
                let (head, var) = r.head.as_ref().expect("action rules have heads");
                if !m.outputs.contains(head) {
                    return Err(SyntaxError::Invalid(format!(
                        "rule head `{head}` is not among the outputs of `{}`",
                        m.name
                    )));
                }
                if !ruled.insert(head.clone()) {
                    return Err(SyntaxError::Invalid(format!(
                        "output `{head}` of `{}` has more than one rule",
                        m.name
                    )));
                }
                if !r.body.is_empty()
                    && !r.body.iter().any(|(_, vars)| vars.contains(var))
                {
                    return Err(SyntaxError::Invalid(format!(
                        "head variable `{var}` of `{}` does not occur in the rule body",
                        m.name
                    )));
                }
            }
            for out in &m.outputs {
                if !ruled.contains(out) {
                    return Err(SyntaxError::Invalid(format!(
                        "output `{out}` of `{}` has no rule",
                        m.name
                    )));
                }
            }
        }
    }
    let mut defs = std::collections::BTreeSet::new();
    for (name, _) in &p.lets {
        if names.contains(name) || !defs.insert(name.clone()) {
            return Err(SyntaxError::Invalid(format!("`{name}` defined twice")));
        }
    }
    Ok(())
}

pub fn parse_program(input: &str) -> Result<Program, SyntaxError> {
    let toks = Lexer::new(input).tokens()?;
    Parser { toks, pos: 0 }.program()
}

/// Parses a single term; used by tests and the trace verifier.
pub fn parse_term(input: &str) -> Result<Term, SyntaxError> {
    let toks = Lexer::new(input).tokens()?;
    let mut p = Parser { toks, pos: 0 };
    let t = p.term()?;
    p.expect(Tok::Eof)?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::super::Term;
    use super::*;

    #[test]
    fn parses_main_id() {
        let p = parse_program("main: id").unwrap();
        assert_eq!(p.main, Term::Id);
        assert!(p.modules.is_empty());
    }

    #[test]
    fn parses_guess_module_with_empty_body() {
        let p = parse_program("module GuessP(; P) { P(x) <- . }  main: eps GuessP").unwrap();
        assert_eq!(p.main, Term::Eps("GuessP".into()));
        let m = &p.modules[0];
        assert_eq!(m.outputs, vec!["P"]);
        assert_eq!(m.rules[0].head, Some(("P".into(), "x".into())));
        assert!(m.rules[0].body.is_empty());
    }

    #[test]
    fn unbalanced_paren_reports_position() {
        let err = parse_program("main: (A ; B").unwrap_err();
        match err {
            SyntaxError::Parse { line, col, .. } => {
                assert_eq!(line, 1);
                assert!(col > 1);
            }
            other => panic!("expected a positioned error, got {other}"),
        }
    }

    #[test]
    fn precedence_and_postfix() {
        let t = parse_term("a ; b <+ c ; d^").unwrap();
        match t {
            Term::PrefUnion(l, r) => {
                assert!(matches!(*l, Term::Compose(..)));
                match *r {
                    Term::Compose(_, d) => assert!(matches!(*d, Term::MaxIterate(..))),
                    other => panic!("unexpected {other:?}"),
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bracket_diamonds() {
        let t = parse_term("[a> p?").unwrap();
        assert!(matches!(t, Term::DiamondRight(..)));
        let t = parse_term("<a] p?").unwrap();
        assert!(matches!(t, Term::DiamondLeft(..)));
    }

    #[test]
    fn rejects_two_rules_for_one_output() {
        let err = parse_program("module M(A; B) { B(x) <- A(x). B(y) <- A(y). } main: id");
        assert!(err.is_err());
    }

    #[test]
    fn rejects_unbound_head_variable() {
        let err = parse_program("module M(A; B) { B(x) <- A(y). } main: id");
        assert!(err.is_err());
    }
}
