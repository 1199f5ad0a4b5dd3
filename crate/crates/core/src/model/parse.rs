//! Line-oriented model DSL.
//!
//! ```text
//! # comment
//! species S1 S2 S3
//! reaction bind: S1 + S2 -> S3 @ mass_action 0.1
//! reaction grow: S2 -> 2*S2 @ mass_action 0.3
//! reaction leak: 0 -> S1 @ polynomial 0.5 + 2*S1^2*S2
//! ```
//!
//! `0` denotes the empty complex. A reaction may only mention species that
//! were declared on an earlier line; species order is declaration order.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::{ModelError, Monomial, PropensitySpec, Reaction, ReactionNetwork};

const MAX_EXPONENT: u32 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("unexpected character `{0}`")]
    InvalidCharacter(char),
    #[error("expected {expected}, found {found}")]
    Unexpected {
        expected: &'static str,
        found: String,
    },
    #[error("unknown statement `{0}`")]
    UnknownStatement(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("species `{0}` declared twice")]
    DuplicateSpecies(String),
    #[error("reaction id `{0}` used twice")]
    DuplicateReaction(String),
    #[error("unknown propensity kind `{0}`")]
    UnknownPropensity(String),
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("negative rate constant {0}")]
    NegativeRate(f64),
    #[error("non-finite value `{0}`")]
    NonFinite(String),
    #[error("exponent {0} exceeds {MAX_EXPONENT}")]
    ExponentTooLarge(u64),
    #[error("{0}")]
    Model(ModelError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok<'a> {
    Ident(&'a str),
    Number(&'a str),
    Arrow,
    Plus,
    Minus,
    Star,
    Caret,
    Colon,
    At,
}

impl fmt::Display for Tok<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(s) => write!(f, "number `{s}`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::At => f.write_str("`@`"),
        }
    }
}

/// Token plus its 1-based column.
type Spanned<'a> = (Tok<'a>, usize);

fn lex(line: &str, line_no: usize) -> Result<Vec<Spanned<'_>>, ParseError> {
    let bytes = line.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let column = |byte: usize| line[..byte].chars().count() + 1;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b'#' => break,
            b' ' | b'\t' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => {
                toks.push((Tok::Plus, column(start)));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, column(start)));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, column(start)));
                i += 1;
            }
            b':' => {
                toks.push((Tok::Colon, column(start)));
                i += 1;
            }
            b'@' => {
                toks.push((Tok::At, column(start)));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    toks.push((Tok::Arrow, column(start)));
                    i += 2;
                } else {
                    toks.push((Tok::Minus, column(start)));
                    i += 1;
                }
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                toks.push((Tok::Number(&line[start..i]), column(start)));
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                toks.push((Tok::Ident(&line[start..i]), column(start)));
            }
            _ => {
                let ch = line[start..].chars().next().unwrap_or('\u{fffd}');
                return Err(ParseError {
                    line: line_no,
                    column: column(start),
                    kind: ParseErrorKind::InvalidCharacter(ch),
                });
            }
        }
    }
    Ok(toks)
}

struct Cursor<'t, 'a> {
    toks: &'t [Spanned<'a>],
    pos: usize,
    line: usize,
    end_column: usize,
}

impl<'t, 'a> Cursor<'t, 'a> {
    fn peek(&self) -> Option<&Tok<'a>> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn column(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|&(_, c)| c)
            .unwrap_or(self.end_column)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column(),
            kind,
        }
    }

    fn error_at(&self, column: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column,
            kind,
        }
    }

    fn unexpected(&self, expected: &'static str) -> ParseError {
        let found = match self.peek() {
            Some(t) => t.to_string(),
            None => "end of line".to_owned(),
        };
        self.error(ParseErrorKind::Unexpected { expected, found })
    }

    fn next(&mut self) -> Option<Spanned<'a>> {
        let t = self.toks.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok<'static>, what: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn ident(&mut self, what: &'static str) -> Result<(&'a str, usize), ParseError> {
        match self.peek() {
            Some(&Tok::Ident(s)) => {
                let col = self.column();
                self.pos += 1;
                Ok((s, col))
            }
            _ => Err(self.unexpected(what)),
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.at_end() {
            Ok(())
        } else {
            Err(self.unexpected("end of line"))
        }
    }
}

fn parse_real(text: &str, line: usize, column: usize) -> Result<f64, ParseError> {
    let v: f64 = text.parse().map_err(|_| ParseError {
        line,
        column,
        kind: ParseErrorKind::InvalidNumber(text.to_owned()),
    })?;
    if !v.is_finite() {
        return Err(ParseError {
            line,
            column,
            kind: ParseErrorKind::NonFinite(text.to_owned()),
        });
    }
    Ok(v)
}

fn parse_count(text: &str, line: usize, column: usize) -> Result<u32, ParseError> {
    text.parse::<u32>().map_err(|_| ParseError {
        line,
        column,
        kind: ParseErrorKind::InvalidNumber(text.to_owned()),
    })
}

struct Builder {
    species: Vec<String>,
    index: HashMap<String, usize>,
    reactions: Vec<Reaction>,
    reaction_ids: HashMap<String, usize>,
}

impl Builder {
    fn species_line(&mut self, cur: &mut Cursor<'_, '_>) -> Result<(), ParseError> {
        if cur.at_end() {
            return Err(cur.unexpected("species name"));
        }
        while !cur.at_end() {
            let (name, col) = cur.ident("species name")?;
            if self.index.contains_key(name) {
                return Err(
                    cur.error_at(col, ParseErrorKind::DuplicateSpecies(name.to_owned()))
                );
            }
            self.index.insert(name.to_owned(), self.species.len());
            self.species.push(name.to_owned());
        }
        Ok(())
    }

    fn lookup(&self, cur: &Cursor<'_, '_>, name: &str, col: usize) -> Result<usize, ParseError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| cur.error_at(col, ParseErrorKind::UnknownSpecies(name.to_owned())))
    }

    /// `0` or `[k*]sp + [k*]sp + ...`.
    fn complex(&self, cur: &mut Cursor<'_, '_>) -> Result<Vec<(usize, u32)>, ParseError> {
        if let Some(&Tok::Number("0")) = cur.peek() {
            cur.pos += 1;
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        loop {
            let mult = match cur.peek() {
                Some(&Tok::Number(n)) => {
                    let col = cur.column();
                    cur.pos += 1;
                    let m = parse_count(n, cur.line, col)?;
                    cur.expect(Tok::Star, "`*` after stoichiometric coefficient")?;
                    m
                }
                _ => 1,
            };
            let (name, col) = cur.ident("species name")?;
            let i = self.lookup(cur, name, col)?;
            out.push((i, mult));
            if cur.peek() == Some(&Tok::Plus) {
                cur.pos += 1;
            } else {
                break;
            }
        }
        Ok(out)
    }

    /// `term ((+|-) term)*`, `term = factor (* factor)*`, `factor = number | sp[^int]`.
    fn polynomial(&self, cur: &mut Cursor<'_, '_>) -> Result<Vec<Monomial>, ParseError> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if cur.peek() == Some(&Tok::Minus) {
            cur.pos += 1;
            sign = -1.0;
        } else if cur.peek() == Some(&Tok::Plus) {
            cur.pos += 1;
        }
        loop {
            let mut coeff = sign;
            let mut powers = Vec::new();
            loop {
                match cur.next() {
                    Some((Tok::Number(n), col)) => coeff *= parse_real(n, cur.line, col)?,
                    Some((Tok::Ident(name), col)) => {
                        let i = self.lookup(cur, name, col)?;
                        let mut e = 1u32;
                        if cur.peek() == Some(&Tok::Caret) {
                            cur.pos += 1;
                            match cur.next() {
                                Some((Tok::Number(n), col)) => {
                                    let v: u64 = n.parse().map_err(|_| {
                                        cur.error_at(
                                            col,
                                            ParseErrorKind::InvalidNumber(n.to_owned()),
                                        )
                                    })?;
                                    if v > MAX_EXPONENT as u64 {
                                        return Err(
                                            cur.error_at(col, ParseErrorKind::ExponentTooLarge(v))
                                        );
                                    }
                                    e = v as u32;
                                }
                                _ => {
                                    cur.pos = cur.pos.saturating_sub(1);
                                    return Err(cur.unexpected("integer exponent"));
                                }
                            }
                        }
                        powers.push((i, e));
                    }
                    _ => {
                        cur.pos = cur.pos.saturating_sub(1);
                        return Err(cur.unexpected("coefficient or species"));
                    }
                }
                if cur.peek() == Some(&Tok::Star) {
                    cur.pos += 1;
                } else {
                    break;
                }
            }
            if !coeff.is_finite() {
                return Err(cur.error(ParseErrorKind::NonFinite(coeff.to_string())));
            }
            terms.push(Monomial::new(coeff, powers));
            match cur.peek() {
                Some(Tok::Plus) => {
                    cur.pos += 1;
                    sign = 1.0;
                }
                Some(Tok::Minus) => {
                    cur.pos += 1;
                    sign = -1.0;
                }
                _ => break,
            }
        }
        Ok(terms)
    }

    fn reaction_line(&mut self, cur: &mut Cursor<'_, '_>) -> Result<(), ParseError> {
        let (id, id_col) = cur.ident("reaction id")?;
        if self.reaction_ids.contains_key(id) {
            return Err(cur.error_at(id_col, ParseErrorKind::DuplicateReaction(id.to_owned())));
        }
        cur.expect(Tok::Colon, "`:` after reaction id")?;
        let reactants = self.complex(cur)?;
        cur.expect(Tok::Arrow, "`->`")?;
        let products = self.complex(cur)?;
        cur.expect(Tok::At, "`@` before propensity")?;
        let (kind, kind_col) = cur.ident("propensity kind")?;
        let reaction = match kind {
            "mass_action" => {
                let col = cur.column();
                let negative = cur.peek() == Some(&Tok::Minus);
                if negative {
                    cur.pos += 1;
                }
                let rate = match cur.peek() {
                    Some(Tok::Number(_)) => match cur.next() {
                        Some((Tok::Number(n), c)) => parse_real(n, cur.line, c)?,
                        _ => unreachable!("peeked a number"),
                    },
                    _ => return Err(cur.unexpected("rate constant")),
                };
                if negative && rate != 0.0 {
                    return Err(cur.error_at(col, ParseErrorKind::NegativeRate(-rate)));
                }
                Reaction::mass_action(id, reactants, products, rate)
            }
            "polynomial" => {
                let terms = self.polynomial(cur)?;
                Reaction::new(id, reactants, products, PropensitySpec::polynomial(terms))
            }
            other => {
                return Err(
                    cur.error_at(kind_col, ParseErrorKind::UnknownPropensity(other.to_owned()))
                );
            }
        };
        cur.expect_end()?;
        // Structural checks (state change, overflow) with the id's position.
        let mut nu = vec![0i64; self.species.len()];
        for &(i, m) in &reaction.reactants {
            nu[i] -= m as i64;
        }
        for &(i, m) in &reaction.products {
            nu[i] += m as i64;
        }
        if nu.iter().all(|&v| v == 0) {
            return Err(cur.error_at(
                id_col,
                ParseErrorKind::Model(ModelError::NoStateChange(id.to_owned())),
            ));
        }
        self.reaction_ids.insert(id.to_owned(), self.reactions.len());
        self.reactions.push(reaction);
        Ok(())
    }
}

/// Parses a network from DSL source.
pub fn parse_network(text: &str) -> Result<ReactionNetwork, ParseError> {
    let mut builder = Builder {
        species: Vec::new(),
        index: HashMap::new(),
        reactions: Vec::new(),
        reaction_ids: HashMap::new(),
    };
    let mut last_line = 1;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        last_line = line_no;
        let toks = lex(raw, line_no)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor {
            toks: &toks,
            pos: 0,
            line: line_no,
            end_column: raw.chars().count() + 1,
        };
        let (keyword, col) = cur.ident("`species` or `reaction`")?;
        match keyword {
            "species" => builder.species_line(&mut cur)?,
            "reaction" => builder.reaction_line(&mut cur)?,
            other => {
                return Err(
                    cur.error_at(col, ParseErrorKind::UnknownStatement(other.to_owned()))
                );
            }
        }
    }
    ReactionNetwork::new(builder.species, builder.reactions).map_err(|e| ParseError {
        line: last_line,
        column: 1,
        kind: ParseErrorKind::Model(e),
    })
}
