use super::formula::Formula;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Atom(String),
    True,
    False,
    Not,
    And,
    Or,
    Next,
    Eventually,
    Always,
    Until,
    LParen,
    RParen,
    End,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (l, col) = (line, column);
        let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: l, column: col });
        match c {
            '\n' => {
                line += 1;
                column = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '!' => push(&mut out, Tok::Not),
            '&' => push(&mut out, Tok::And),
            '|' => push(&mut out, Tok::Or),
            '(' => push(&mut out, Tok::LParen),
            ')' => push(&mut out, Tok::RParen),
            'X' => push(&mut out, Tok::Next),
            'F' => push(&mut out, Tok::Eventually),
            'G' => push(&mut out, Tok::Always),
            'U' => push(&mut out, Tok::Until),
            c if c.is_ascii_lowercase() => {
                let start = i;
                while i + 1 < chars.len() && (chars[i + 1].is_ascii_alphanumeric() || chars[i + 1] == '_') {
                    i += 1;
                }
                let word: String = chars[start..=i].iter().collect();
                column += i - start;
                let tok = match word.as_str() {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Atom(word),
                };
                push(&mut out, tok);
            }
            c if c.is_ascii_uppercase() || "-<>=~^".contains(c) => {
                let start = i;
                while i + 1 < chars.len() && "-<>=".contains(chars[i + 1]) && !c.is_ascii_uppercase() {
                    i += 1;
                }
                return Err(Error::UnknownOperator {
                    op: chars[start..=i].iter().collect(),
                    line: l,
                    column: col,
                });
            }
            other => {
                return Err(Error::Syntax {
                    line: l,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
        i += 1;
        column += 1;
    }
    out.push(Token { tok: Tok::End, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = self.peek();
        Err(Error::Syntax { line: t.line, column: t.column, message: message.into() })
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.peek().tok == Tok::Or {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.until()?;
        while self.peek().tok == Tok::And {
            self.bump();
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.peek().tok == Tok::Until {
            self.bump();
            let rhs = self.until()?;
            return Ok(Formula::until(lhs, rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().tok.clone() {
            Tok::Not => {
                self.bump();
                match self.bump().tok {
                    Tok::Atom(p) => Ok(Formula::NegAtom(p)),
                    Tok::True => Ok(Formula::False),
                    Tok::False => Ok(Formula::True),
                    _ => {
                        self.pos -= 1;
                        self.error("negation is only allowed in front of an atom")
                    }
                }
            }
            Tok::Next => {
                self.bump();
                Ok(Formula::next(self.unary()?))
            }
            Tok::Eventually => {
                self.bump();
                Ok(Formula::eventually(self.unary()?))
            }
            Tok::Always => {
                self.bump();
                Ok(Formula::always(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula> {
        match self.peek().tok.clone() {
            Tok::Atom(p) => {
                self.bump();
                Ok(Formula::Atom(p))
            }
            Tok::True => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::False => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::LParen => {
                self.bump();
                let inner = self.or()?;
                if self.peek().tok != Tok::RParen {
                    return self.error("expected `)`");
                }
                self.bump();
                Ok(inner)
            }
            Tok::End => self.error("unexpected end of input"),
            other => self.error(format!("unexpected token {other:?}")),
        }
    }
}

/// Parse an LTL formula.
///
/// Precedence from tightest to loosest: unary (`!`, `X`, `F`, `G`), `U`
/// (right associative), `&`, `|`. `!` may only prefix an atom or constant.
pub fn parse(text: &str) -> Result<Formula> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let f = p.or()?;
    if p.peek().tok != Tok::End {
        return p.error("trailing input");
    }
    Ok(f)
}
