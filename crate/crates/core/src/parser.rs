//! Text formats: `.cpl` theories and `.story` branch listings.
//!
//! ```text
//! theory   = { law } ;
//! law      = [ "#" label ] head "<-" [ body ] "." ;
//! head     = [ disjunct { "|" disjunct } ] ;
//! disjunct = atom [ ":" prob ] ;
//! body     = literal { "," literal } ;
//! literal  = [ "~" ] atom ;
//! atom     = ident [ "(" ident { "," ident } ")" ] ;
//! prob     = decimal | integer "/" integer ;
//! ```
//!
//! `%` starts a comment that runs to the end of the line. A story is a
//! whitespace-separated list of `lawref:outcome` steps where `lawref` is a law
//! id or label and `outcome` is a 1-based disjunct index or `none`.

use std::sync::Arc;

use crate::error::{Error, Result, SourceDiagnostic};
use crate::kernel::{is_identifier, Atom, CpLaw, CpTheory, Disjunct, LawId, Literal, Outcome, Rational};
use crate::story::{self, Step, Story};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Variable(String),
    Number(String),
    Slash,
    Colon,
    Pipe,
    Arrow,
    Dot,
    Comma,
    Tilde,
    Hash,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Variable(s) | Tok::Number(s) => format!("`{s}`"),
            Tok::Slash => "`/`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Tilde => "`~`".into(),
            Tok::Hash => "`#`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Pos {
    line: usize,
    column: usize,
}

fn diag(pos: Pos, message: impl Into<String>) -> Error {
    Error::Syntax(SourceDiagnostic::new(pos.line, pos.column, message))
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);
    let advance = |i: &mut usize, line: &mut usize, column: &mut usize, c: char| {
        *i += 1;
        if c == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut column, c);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                let ch = chars[i];
                advance(&mut i, &mut line, &mut column, ch);
            }
            continue;
        }
        let single = match c {
            '/' => Some(Tok::Slash),
            ':' => Some(Tok::Colon),
            '|' => Some(Tok::Pipe),
            '.' => Some(Tok::Dot),
            ',' => Some(Tok::Comma),
            '~' => Some(Tok::Tilde),
            '#' => Some(Tok::Hash),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            advance(&mut i, &mut line, &mut column, c);
            out.push((tok, pos));
            continue;
        }
        if c == '<' {
            if chars.get(i + 1) == Some(&'-') {
                advance(&mut i, &mut line, &mut column, c);
                advance(&mut i, &mut line, &mut column, '-');
                out.push((Tok::Arrow, pos));
                continue;
            }
            return Err(diag(pos, "expected `<-`"));
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                s.push(chars[i]);
                let ch = chars[i];
                advance(&mut i, &mut line, &mut column, ch);
            }
            // a dot followed by a digit continues the numeral; otherwise it ends the law
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                s.push('.');
                advance(&mut i, &mut line, &mut column, '.');
                while i < chars.len() && chars[i].is_ascii_digit() {
                    s.push(chars[i]);
                    let ch = chars[i];
                    advance(&mut i, &mut line, &mut column, ch);
                }
            }
            out.push((Tok::Number(s), pos));
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '?' {
            let mut s = String::new();
            s.push(c);
            advance(&mut i, &mut line, &mut column, c);
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                s.push(chars[i]);
                let ch = chars[i];
                advance(&mut i, &mut line, &mut column, ch);
            }
            out.push((
                if c.is_alphabetic() {
                    Tok::Ident(s)
                } else {
                    Tok::Variable(s)
                },
                pos,
            ));
            continue;
        }
        return Err(diag(pos, format!("unexpected character `{c}`")));
    }
    out.push((Tok::Eof, Pos { line, column }));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    at: usize,
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        Ok(Parser {
            toks: lex(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, context: &str) -> Result<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            Err(diag(
                self.pos(),
                format!(
                    "expected {} {context}, found {}",
                    tok.describe(),
                    self.peek().describe()
                ),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(s) => Ok(s),
            Tok::Variable(v) => Err(diag(pos, format!("non-ground atom: `{v}` is a variable"))),
            other => Err(diag(pos, format!("expected {what}, found {}", other.describe()))),
        }
    }

    fn atom(&mut self) -> Result<Atom> {
        let pos = self.pos();
        let name = self.ident("an atom")?;
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.ident("a constant")?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "between arguments")?;
            }
        }
        Atom::new(name, args).map_err(|e| diag(pos, e.to_string()))
    }

    fn literal(&mut self) -> Result<Literal> {
        let positive = !self.eat(&Tok::Tilde);
        Ok(Literal {
            atom: self.atom()?,
            positive,
        })
    }

    fn prob(&mut self) -> Result<Rational> {
        let pos = self.pos();
        let Tok::Number(num) = self.bump() else {
            return Err(diag(pos, "expected a probability"));
        };
        let text = if self.eat(&Tok::Slash) {
            let p2 = self.pos();
            match self.bump() {
                Tok::Number(den) if !den.contains('.') && !num.contains('.') => format!("{num}/{den}"),
                _ => return Err(diag(p2, "expected an integer denominator")),
            }
        } else {
            num
        };
        Rational::parse_probability(&text).map_err(|e| diag(pos, e.to_string()))
    }

    fn law(&mut self, id: LawId) -> Result<(CpLaw, Pos)> {
        let start = self.pos();
        let label = if self.eat(&Tok::Hash) {
            Some(self.ident("a label")?)
        } else {
            None
        };
        let mut head = Vec::new();
        if self.peek() != &Tok::Arrow {
            loop {
                let atom = self.atom()?;
                let prob = if self.eat(&Tok::Colon) {
                    self.prob()?
                } else {
                    Rational::one()
                };
                head.push(Disjunct { atom, prob });
                if !self.eat(&Tok::Pipe) {
                    break;
                }
            }
        }
        self.expect(Tok::Arrow, "after the head")?;
        let mut body = Vec::new();
        if self.peek() != &Tok::Dot {
            loop {
                body.push(self.literal()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::Dot, "at the end of a law")?;
        Ok((CpLaw { id, label, head, body }, start))
    }
}

/// Parses and validates a theory. Laws get ids `1..=n` in source order.
pub fn parse_theory(text: &str) -> Result<CpTheory> {
    let mut p = Parser::new(text)?;
    let mut laws = Vec::new();
    let mut starts = Vec::new();
    while p.peek() != &Tok::Eof {
        let (law, start) = p.law(laws.len() as LawId + 1)?;
        laws.push(law);
        starts.push(start);
    }
    CpTheory::new(laws).map_err(|e| match e {
        Error::Theory { law: Some(id), message } => {
            let pos = starts[id as usize - 1];
            diag(pos, format!("law {id}: {message}"))
        }
        Error::Theory { law: None, message } => diag(Pos { line: 1, column: 1 }, message),
        other => other,
    })
}

/// Parses a single literal such as `~Throws(Suzy)`.
pub fn parse_literal(text: &str) -> Result<Literal> {
    let mut p = Parser::new(text)?;
    let lit = p.literal()?;
    p.expect(Tok::Eof, "after the literal")?;
    Ok(lit)
}

/// Parses a comma-separated conjunction of literals; empty text is the empty
/// conjunction.
pub fn parse_literals(text: &str) -> Result<Vec<Literal>> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    if p.peek() == &Tok::Eof {
        return Ok(out);
    }
    loop {
        out.push(p.literal()?);
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.expect(Tok::Eof, "after the literals")?;
    Ok(out)
}

pub fn parse_atom(text: &str) -> Result<Atom> {
    let mut p = Parser::new(text)?;
    let atom = p.atom()?;
    p.expect(Tok::Eof, "after the atom")?;
    Ok(atom)
}

fn format_prob(p: &Rational) -> String {
    match p.to_decimal() {
        (s, true) => s,
        _ => p.to_string(),
    }
}

/// Canonical one-law-per-line rendering of a single law.
pub fn format_law(law: &CpLaw) -> String {
    let mut s = String::new();
    if let Some(label) = &law.label {
        s.push('#');
        s.push_str(label);
        s.push(' ');
    }
    let head: Vec<String> = law
        .head
        .iter()
        .map(|d| {
            if d.prob.is_one() {
                d.atom.to_string()
            } else {
                format!("{}:{}", d.atom, format_prob(&d.prob))
            }
        })
        .collect();
    s.push_str(&head.join(" | "));
    if !head.is_empty() {
        s.push(' ');
    }
    s.push_str("<-");
    if law.body.is_empty() {
        s.push_str(" .");
    } else {
        let body: Vec<String> = law.body.iter().map(ToString::to_string).collect();
        s.push(' ');
        s.push_str(&body.join(", "));
        s.push('.');
    }
    s
}

pub fn format_theory(theory: &CpTheory) -> String {
    theory.laws().iter().map(|l| format_law(l) + "\n").collect()
}

/// Reads a story and validates it against `theory`.
pub fn parse_story(text: &str, theory: Arc<CpTheory>) -> Result<Story> {
    let steps = parse_steps(text, &theory)?;
    story::validate(theory, steps)
}

/// Resolves the step list of a story without replaying it.
pub fn parse_steps(text: &str, theory: &CpTheory) -> Result<Vec<Step>> {
    let mut steps = Vec::new();
    for raw in text
        .lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .flat_map(str::split_whitespace)
    {
        let (lawref, outcome) = raw
            .split_once(':')
            .ok_or_else(|| Error::Story(format!("step `{raw}` is not of the form lawref:outcome")))?;
        let law = match lawref.parse::<LawId>() {
            Ok(id) => theory.law(id).ok_or_else(|| Error::UnknownLaw(lawref.to_string()))?,
            Err(_) if is_identifier(lawref) => theory
                .law_by_label(lawref)
                .ok_or_else(|| Error::UnknownLaw(lawref.to_string()))?,
            Err(_) => return Err(Error::Story(format!("`{lawref}` is neither a law id nor a label"))),
        };
        let outcome = if outcome == "none" {
            Outcome::Nothing
        } else {
            match outcome.parse::<usize>() {
                Ok(k) if k >= 1 => Outcome::Disjunct(k - 1),
                _ => return Err(Error::Story(format!("`{outcome}` is not a disjunct index or `none`"))),
            }
        };
        steps.push(Step { law: law.id, outcome });
    }
    Ok(steps)
}

pub fn format_story(story: &Story) -> String {
    let steps: Vec<String> = story
        .steps()
        .iter()
        .map(|s| format!("{}:{}", s.law, s.outcome))
        .collect();
    steps.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    const SUZY: &str = "\
% Suzy and Billy
Throws(Suzy) <- .
Throws(Billy) <- .
Breaks:0.9 <- Throws(Suzy).
Breaks:0.8 <- Throws(Billy).
";

    #[test]
    fn parses_laws() {
        let t = parse_theory("Breaks:0.9 <- Throws(Suzy).").unwrap();
        let law = &t.laws()[0];
        assert_eq!(law.id, 1);
        assert_eq!(law.head.len(), 1);
        assert_eq!(law.head[0].atom, Atom::named("Breaks"));
        assert_eq!(law.head[0].prob, Rational::new(9, 10));
        assert_eq!(law.body, vec![Literal::pos(Atom::new("Throws", ["Suzy"]).unwrap())]);

        let t = parse_theory("Throws(Suzy) <- .").unwrap();
        assert!(t.laws()[0].is_deterministic());
        assert!(t.laws()[0].body.is_empty());
    }

    #[test]
    fn rejects_probability_overflow() {
        let err = parse_theory("X:0.6 | Y:0.7 <- .").unwrap_err();
        let Error::Syntax(d) = err else { panic!("{err:?}") };
        assert_eq!((d.line, d.column), (1, 1));
        assert!(d.message.contains("13/10"), "{}", d.message);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let err = parse_theory("A <- .\nB <- C,\n").unwrap_err();
        let Error::Syntax(d) = err else { panic!() };
        assert_eq!(d.line, 3);
        let err = parse_theory("A <- p(_X).").unwrap_err();
        let Error::Syntax(d) = err else { panic!() };
        assert!(d.message.contains("non-ground"), "{}", d.message);
        assert_eq!((d.line, d.column), (1, 8));
        let err = parse_theory("A:1.5 <- .").unwrap_err();
        assert!(err.to_string().contains("outside"));
        let err = parse_theory("A <- B").unwrap_err();
        assert!(err.to_string().contains("`.`"), "{err}");
        let err = parse_theory("P <- ~Q.\nQ <- ~P.").unwrap_err();
        let Error::Syntax(d) = err else { panic!() };
        assert!(d.message.contains("stratified"));
        assert!(parse_theory("A <- & .").is_err());
    }

    #[test]
    fn labels_fractions_and_empty_heads() {
        let t = parse_theory("#suzy Breaks:9/10 | Dent:1/20 <- Throws(Suzy).\n<- A.\n").unwrap();
        assert_eq!(t.laws()[0].label.as_deref(), Some("suzy"));
        assert_eq!(t.laws()[0].remainder(), Rational::new(1, 20));
        assert!(t.laws()[1].head.is_empty());
        assert_eq!(
            format_theory(&t),
            "#suzy Breaks:0.9 | Dent:0.05 <- Throws(Suzy).\n<- A.\n"
        );
    }

    #[test]
    fn canonical_listing() {
        let t = parse_theory(SUZY).unwrap();
        let text = format_theory(&t);
        assert_eq!(
            text,
            "Throws(Suzy) <- .\nThrows(Billy) <- .\nBreaks:0.9 <- Throws(Suzy).\nBreaks:0.8 <- Throws(Billy).\n"
        );
        assert_eq!(parse_theory(&text).unwrap(), t);
        assert_eq!(format_theory(&CpTheory::empty()), "");
        let thirds = parse_theory("A:1/3 <- ~B, C.").unwrap();
        assert_eq!(format_theory(&thirds), "A:1/3 <- ~B, C.\n");
    }

    #[test]
    fn stories() {
        let t = Arc::new(parse_theory(SUZY).unwrap());
        let s = parse_story("1:1 2:1 3:1 4:1", t.clone()).unwrap();
        assert_eq!(s.steps().len(), 4);
        assert_eq!(format_story(&s), "1:1 2:1 3:1 4:1");
        let s = parse_story("1:1 2:1 3:none 4:none", t.clone()).unwrap();
        assert_eq!(
            s.leaf_atoms(),
            [
                Atom::new("Throws", ["Suzy"]).unwrap(),
                Atom::new("Throws", ["Billy"]).unwrap()
            ]
            .into_iter()
            .collect()
        );
        let err = parse_story("1:1 1:1 2:1 3:1 4:1", t.clone()).unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
        assert!(matches!(parse_story("9:1", t.clone()), Err(Error::UnknownLaw(_))));
        assert!(parse_story("1:0", t.clone()).is_err());
        assert!(parse_story("1:2 2:1 3:1 4:1", t.clone()).is_err());
        assert!(parse_story("1-1", t).is_err());
    }

    #[test]
    fn labels_in_stories() {
        let t = Arc::new(parse_theory("#a A:1/2 <- .\n#b B <- A.").unwrap());
        let s = parse_story("a:1 b:1", t.clone()).unwrap();
        assert_eq!(format_story(&s), "1:1 2:1");
        assert!(parse_story("a:none", t).is_ok());
    }

    #[test]
    fn literal_helpers() {
        assert_eq!(parse_literal("~Throws(Suzy)").unwrap().to_string(), "~Throws(Suzy)");
        assert_eq!(parse_literals("A, ~B").unwrap().len(), 2);
        assert!(parse_literals("").unwrap().is_empty());
        assert!(parse_literal("A B").is_err());
        assert!(parse_atom("~A").is_err());
    }
}
