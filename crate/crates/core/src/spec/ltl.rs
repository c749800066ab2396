//! Linear temporal logic: parser, printer and evaluation on lasso words.
//!
//! The core grammar is `true | p | !φ | φ | φ | X φ | φ U φ`. The derived
//! forms `false`, `F`, `G`, `&` and `->` are expanded while parsing.

use std::fmt;

use crate::mdp::LabelSet;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ltl {
    True,
    Atom(usize),
    Not(Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
}

impl Ltl {
    pub fn not(a: Ltl) -> Ltl {
        Ltl::Not(Box::new(a))
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::not(Ltl::or(Ltl::not(a), Ltl::not(b)))
    }

    pub fn implies(a: Ltl, b: Ltl) -> Ltl {
        Ltl::or(Ltl::not(a), b)
    }

    pub fn next(a: Ltl) -> Ltl {
        Ltl::Next(Box::new(a))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(a: Ltl) -> Ltl {
        Ltl::until(Ltl::True, a)
    }

    pub fn always(a: Ltl) -> Ltl {
        Ltl::not(Ltl::eventually(Ltl::not(a)))
    }

    pub fn is_propositional(&self) -> bool {
        match self {
            Ltl::True | Ltl::Atom(_) => true,
            Ltl::Not(a) => a.is_propositional(),
            Ltl::Or(a, b) => a.is_propositional() && b.is_propositional(),
            Ltl::Next(_) | Ltl::Until(..) => false,
        }
    }

    /// Truth value of a propositional formula on a single label.
    pub fn holds_on(&self, label: LabelSet) -> bool {
        match self {
            Ltl::True => true,
            Ltl::Atom(i) => label & (1 << i) != 0,
            Ltl::Not(a) => !a.holds_on(label),
            Ltl::Or(a, b) => a.holds_on(label) || b.holds_on(label),
            Ltl::Next(_) | Ltl::Until(..) => panic!("holds_on requires a propositional formula"),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Ltl::True | Ltl::Atom(_) => 0,
            Ltl::Not(a) | Ltl::Next(a) => 1 + a.depth(),
            Ltl::Or(a, b) | Ltl::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

/// A formula together with the proposition names its atoms index into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtlFormula {
    pub propositions: Vec<String>,
    pub root: Ltl,
}

/// Shapes with a built-in deterministic Büchi automaton; `p` is
/// propositional.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BuiltinLtl {
    /// `F p`
    Eventually(Ltl),
    /// `G p`
    Always(Ltl),
    /// `G F p`
    InfinitelyOften(Ltl),
}

impl LtlFormula {
    pub fn builtin(&self) -> Option<BuiltinLtl> {
        use Ltl::*;
        match &self.root {
            Until(t, p) if **t == True && p.is_propositional() => Some(BuiltinLtl::Eventually((**p).clone())),
            Not(inner) => match &**inner {
                Until(t, np) if **t == True => match &**np {
                    Not(p) if p.is_propositional() => Some(BuiltinLtl::Always((**p).clone())),
                    Not(f) => match &**f {
                        Until(t2, p) if **t2 == True && p.is_propositional() => {
                            Some(BuiltinLtl::InfinitelyOften((**p).clone()))
                        }
                        _ => None,
                    },
                    _ => None,
                },
                _ => None,
            },
            _ => None,
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &Ltl, props: &[String], f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match t {
                Ltl::True => write!(f, "true"),
                Ltl::Atom(i) => write!(f, "{}", props[*i]),
                Ltl::Not(a) => {
                    write!(f, "(!")?;
                    go(a, props, f)?;
                    write!(f, ")")
                }
                Ltl::Next(a) => {
                    write!(f, "(X ")?;
                    go(a, props, f)?;
                    write!(f, ")")
                }
                Ltl::Or(a, b) | Ltl::Until(a, b) => {
                    write!(f, "(")?;
                    go(a, props, f)?;
                    write!(f, "{}", if matches!(t, Ltl::Or(..)) { " | " } else { " U " })?;
                    go(b, props, f)?;
                    write!(f, ")")
                }
            }
        }
        go(&self.root, &self.propositions, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    UnknownProposition(String),
    UnbalancedParenthesis,
    UnexpectedToken(String),
    UnexpectedEnd,
}

/// A parse failure at a byte offset of the input.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at position {position}")]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::UnknownProposition(p) => write!(f, "unknown proposition `{p}`"),
            ParseErrorKind::UnbalancedParenthesis => write!(f, "unbalanced parenthesis"),
            ParseErrorKind::UnexpectedToken(t) => write!(f, "unexpected `{t}`"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    Or,
    And,
    Implies,
    Next,
    Until,
    Eventually,
    Always,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tok::Ident(s) => s.as_str(),
            Tok::True => "true",
            Tok::False => "false",
            Tok::Not => "!",
            Tok::Or => "|",
            Tok::And => "&",
            Tok::Implies => "->",
            Tok::Next => "X",
            Tok::Until => "U",
            Tok::Eventually => "F",
            Tok::Always => "G",
            Tok::LParen => "(",
            Tok::RParen => ")",
        };
        f.write_str(s)
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        let tok = match c {
            c if c.is_whitespace() => continue,
            '!' => Tok::Not,
            '|' => Tok::Or,
            '&' => Tok::And,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '-' => match chars.peek() {
                Some(&(_, '>')) => {
                    chars.next();
                    Tok::Implies
                }
                _ => return Err(ParseError { position: i, kind: ParseErrorKind::UnexpectedChar(c) }),
            },
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = c.to_string();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        word.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "X" => Tok::Next,
                    "U" => Tok::Until,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    _ => Tok::Ident(word),
                }
            }
            _ => return Err(ParseError { position: i, kind: ParseErrorKind::UnexpectedChar(c) }),
        };
        out.push((i, tok));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    props: &'a [String],
    open: Vec<usize>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err(&self, kind: ParseErrorKind) -> ParseError {
        ParseError { position: self.offset(), kind }
    }

    fn implication(&mut self) -> Result<Ltl, ParseError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            let rhs = self.implication()?;
            return Ok(Ltl::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Ltl, ParseError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = Ltl::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ltl, ParseError> {
        let mut lhs = self.until()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = Ltl::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Ltl, ParseError> {
        let lhs = self.unary()?;
        if self.peek() == Some(&Tok::Until) {
            self.pos += 1;
            let rhs = self.until()?;
            return Ok(Ltl::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ltl, ParseError> {
        let op = match self.peek() {
            Some(Tok::Not) => Ltl::not as fn(Ltl) -> Ltl,
            Some(Tok::Next) => Ltl::next,
            Some(Tok::Eventually) => Ltl::eventually,
            Some(Tok::Always) => Ltl::always,
            _ => return self.primary(),
        };
        self.pos += 1;
        Ok(op(self.unary()?))
    }

    fn primary(&mut self) -> Result<Ltl, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.err(ParseErrorKind::UnexpectedEnd));
        };
        let here = self.offset();
        self.pos += 1;
        match tok {
            Tok::True => Ok(Ltl::True),
            Tok::False => Ok(Ltl::not(Ltl::True)),
            Tok::Ident(name) => match self.props.iter().position(|p| *p == name) {
                Some(i) => Ok(Ltl::Atom(i)),
                None => Err(ParseError { position: here, kind: ParseErrorKind::UnknownProposition(name) }),
            },
            Tok::LParen => {
                self.open.push(here);
                let inner = self.implication()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        self.open.pop();
                        Ok(inner)
                    }
                    None => Err(ParseError { position: here, kind: ParseErrorKind::UnbalancedParenthesis }),
                    Some(t) => Err(self.err(ParseErrorKind::UnexpectedToken(t.to_string()))),
                }
            }
            Tok::RParen => {
                Err(ParseError { position: here, kind: ParseErrorKind::UnbalancedParenthesis })
            }
            t => Err(ParseError { position: here, kind: ParseErrorKind::UnexpectedToken(t.to_string()) }),
        }
    }
}

/// Parses `text` over the declared `propositions`.
///
/// Precedence, tightest first: `! X F G`, then `U` (right-associative),
/// `&`, `|`, `->` (right-associative).
pub fn parse_ltl<S: AsRef<str>>(text: &str, propositions: &[S]) -> Result<LtlFormula, ParseError> {
    let props: Vec<String> = propositions.iter().map(|p| p.as_ref().to_string()).collect();
    let toks = lex(text)?;
    let mut parser = Parser { toks, pos: 0, end: text.len(), props: &props, open: Vec::new() };
    let root = parser.implication()?;
    if let Some(tok) = parser.peek() {
        let kind = if *tok == Tok::RParen {
            ParseErrorKind::UnbalancedParenthesis
        } else {
            ParseErrorKind::UnexpectedToken(tok.to_string())
        };
        return Err(parser.err(kind));
    }
    debug_assert!(parser.open.is_empty());
    Ok(LtlFormula { propositions: props, root })
}

/// An ultimately periodic word `prefix · cycle^ω` over label bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LassoWord {
    pub prefix: Vec<LabelSet>,
    pub cycle: Vec<LabelSet>,
}

impl LassoWord {
    pub fn new(prefix: Vec<LabelSet>, cycle: Vec<LabelSet>) -> Self {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        Self { prefix, cycle }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn at(&self, i: usize) -> LabelSet {
        if i < self.prefix.len() {
            self.prefix[i]
        } else {
            self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    /// Successor position in the folded word: the last cycle position loops
    /// back to the cycle start.
    pub fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.prefix.len()
        }
    }
}

/// Decides `word ⊨ formula`.
///
/// Each subformula is evaluated on the folded positions of the word; `U` is
/// the least fixpoint of `b ∨ (a ∧ X(a U b))` over that position graph.
pub fn ltl_eval_lasso(formula: &LtlFormula, word: &LassoWord) -> bool {
    eval_positions(&formula.root, word)[0]
}

fn eval_positions(f: &Ltl, w: &LassoWord) -> Vec<bool> {
    let n = w.len();
    match f {
        Ltl::True => vec![true; n],
        Ltl::Atom(i) => (0..n).map(|k| w.at(k) & (1 << i) != 0).collect(),
        Ltl::Not(a) => eval_positions(a, w).into_iter().map(|x| !x).collect(),
        Ltl::Or(a, b) => {
            let (x, y) = (eval_positions(a, w), eval_positions(b, w));
            x.iter().zip(&y).map(|(p, q)| *p || *q).collect()
        }
        Ltl::Next(a) => {
            let x = eval_positions(a, w);
            (0..n).map(|k| x[w.succ(k)]).collect()
        }
        Ltl::Until(a, b) => {
            let (x, y) = (eval_positions(a, w), eval_positions(b, w));
            let mut v = y.clone();
            loop {
                let mut changed = false;
                for k in (0..n).rev() {
                    if !v[k] && x[k] && v[w.succ(k)] {
                        v[k] = true;
                        changed = true;
                    }
                }
                if !changed {
                    return v;
                }
            }
        }
    }
}
