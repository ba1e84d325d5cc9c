//! Lexer for the concrete syntax.
//!
//! Line comments start with `--` and run to end of line.  Numerals come in
//! two flavours: bare digit runs are naturals, while fractions (`1/2`),
//! decimals (`0.25`), and anything signed are rationals.  The fraction slash
//! and decimal point must be adjacent to their digits.

use crate::rational::Rat;
use num::bigint::BigInt;
use num::One;

use super::parser::ParseError;

/// A lexical token tagged with its source position (1-based).
#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum TokenKind {
    /// Identifier or contextual name (type heads and operator names are
    /// resolved by the parser, not reserved here).
    Ident(String),
    /// Reserved word.
    Keyword(&'static str),
    /// Natural-number literal.
    Nat(u64),
    /// Rational literal (fraction, decimal, or signed form).
    Rational(Rat),
    /// `_` — the throwaway binder.
    Underscore,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Backslash,
    Bar,
    Plus,
    Star,
    Eq,
    Colon,
    /// `->`
    Arrow,
    /// `=>`
    FatArrow,
    /// `<-`
    BindArrow,
    Eof,
}

/// Reserved words.  Type heads (`Nat`, `list`, `U`, `F`, ...) and operator
/// names (`add`, `succ`, ...) stay contextual so they remain usable as
/// variable names.
pub const KEYWORDS: [&str; 20] = [
    "produce", "force", "thunk", "charge", "uniform", "rand", "choose", "fix", "let", "in",
    "if0", "then", "else", "case", "of", "nil", "cons", "unpair", "as", "cost",
];

impl TokenKind {
    /// Short description used in "expected ..." diagnostics.
    pub fn describe(&self) -> String {
        match self {
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Keyword(k) => format!("`{k}`"),
            TokenKind::Nat(n) => format!("number `{n}`"),
            TokenKind::Rational(_) => "rational literal".to_owned(),
            TokenKind::Underscore => "`_`".to_owned(),
            TokenKind::LParen => "`(`".to_owned(),
            TokenKind::RParen => "`)`".to_owned(),
            TokenKind::LBrace => "`{`".to_owned(),
            TokenKind::RBrace => "`}`".to_owned(),
            TokenKind::LBracket => "`[`".to_owned(),
            TokenKind::RBracket => "`]`".to_owned(),
            TokenKind::Comma => "`,`".to_owned(),
            TokenKind::Semi => "`;`".to_owned(),
            TokenKind::Dot => "`.`".to_owned(),
            TokenKind::Backslash => "`\\`".to_owned(),
            TokenKind::Bar => "`|`".to_owned(),
            TokenKind::Plus => "`+`".to_owned(),
            TokenKind::Star => "`*`".to_owned(),
            TokenKind::Eq => "`=`".to_owned(),
            TokenKind::Colon => "`:`".to_owned(),
            TokenKind::Arrow => "`->`".to_owned(),
            TokenKind::FatArrow => "`=>`".to_owned(),
            TokenKind::BindArrow => "`<-`".to_owned(),
            TokenKind::Eof => "end of input".to_owned(),
        }
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

/// Tokenize a source string.
pub fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.peek() else {
            out.push(Token { kind: TokenKind::Eof, line, col });
            return Ok(out);
        };
        let kind = lx.next_token(c)?;
        out.push(Token { kind, line, col });
    }
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.src.get(self.pos + 1).copied()
    }

    fn advance(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => {
                    self.advance();
                }
                Some(b'-') if self.peek2() == Some(b'-') => {
                    while let Some(c) = self.peek() {
                        if c == b'\n' {
                            break;
                        }
                        self.advance();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_token(&mut self, c: u8) -> Result<TokenKind, ParseError> {
        use TokenKind::*;
        if c.is_ascii_digit() {
            return self.number(false);
        }
        if c.is_ascii_alphabetic() {
            return Ok(self.word());
        }
        let (line, col) = (self.line, self.col);
        self.advance();
        match c {
            b'(' => Ok(LParen),
            b')' => Ok(RParen),
            b'{' => Ok(LBrace),
            b'}' => Ok(RBrace),
            b'[' => Ok(LBracket),
            b']' => Ok(RBracket),
            b',' => Ok(Comma),
            b';' => Ok(Semi),
            b'.' => Ok(Dot),
            b'\\' => Ok(Backslash),
            b'|' => Ok(Bar),
            b'+' => Ok(Plus),
            b'*' => Ok(Star),
            b':' => Ok(Colon),
            b'_' => Ok(Underscore),
            b'=' => {
                if self.peek() == Some(b'>') {
                    self.advance();
                    Ok(FatArrow)
                } else {
                    Ok(Eq)
                }
            }
            b'<' => {
                if self.peek() == Some(b'-') {
                    self.advance();
                    Ok(BindArrow)
                } else {
                    Err(ParseError::BadChar { line, col, ch: '<' })
                }
            }
            b'-' => {
                // `--` comments were consumed as trivia, so this is either an
                // arrow or a signed numeral.
                if self.peek() == Some(b'>') {
                    self.advance();
                    Ok(Arrow)
                } else if self.peek().is_some_and(|d| d.is_ascii_digit()) {
                    self.number(true)
                } else {
                    Err(ParseError::BadChar { line, col, ch: '-' })
                }
            }
            other => Err(ParseError::BadChar { line, col, ch: other as char }),
        }
    }

    fn word(&mut self) -> TokenKind {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_ascii_alphanumeric() || c == b'_')
        {
            self.advance();
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match KEYWORDS.iter().find(|k| **k == text) {
            Some(k) => TokenKind::Keyword(k),
            None => TokenKind::Ident(text.to_owned()),
        }
    }

    fn digits(&mut self) -> &'a [u8] {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.advance();
        }
        &self.src[start..self.pos]
    }

    fn number(&mut self, negative: bool) -> Result<TokenKind, ParseError> {
        let (line, col) = (self.line, self.col);
        let int = self.digits();
        let int_str = std::str::from_utf8(int).unwrap();
        match self.peek() {
            Some(b'/') if self.peek2().is_some_and(|c| c.is_ascii_digit()) => {
                self.advance();
                let den = std::str::from_utf8(self.digits()).unwrap();
                let num: BigInt = int_str.parse().unwrap();
                let den: BigInt = den.parse().unwrap();
                if den == BigInt::from(0) {
                    return Err(ParseError::BadNumber { line, col });
                }
                let q = Rat::new(if negative { -num } else { num }, den);
                Ok(TokenKind::Rational(q))
            }
            Some(b'.') if self.peek2().is_some_and(|c| c.is_ascii_digit()) => {
                self.advance();
                let frac = std::str::from_utf8(self.digits()).unwrap();
                let scale = BigInt::from(10u32).pow(frac.len() as u32);
                let whole: BigInt =
                    int_str.parse::<BigInt>().unwrap() * &scale + frac.parse::<BigInt>().unwrap();
                let q = Rat::new(if negative { -whole } else { whole }, scale);
                Ok(TokenKind::Rational(q))
            }
            _ => {
                if negative {
                    let num: BigInt = int_str.parse().unwrap();
                    return Ok(TokenKind::Rational(Rat::new(-num, BigInt::one())));
                }
                match int_str.parse::<u64>() {
                    Ok(n) => Ok(TokenKind::Nat(n)),
                    Err(_) => Err(ParseError::BadNumber { line, col }),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn kinds(src: &str) -> Vec<TokenKind> {
        lex(src).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn lexes_numerals() {
        use TokenKind::*;
        assert_eq!(
            kinds("3 1/2 0.25 -1/2"),
            vec![Nat(3), Rational(rat(1, 2)), Rational(rat(1, 4)), Rational(rat(-1, 2)), Eof]
        );
    }

    #[test]
    fn comments_and_arrows() {
        use TokenKind::*;
        assert_eq!(
            kinds("x <- -- note\n produce -> =>"),
            vec![
                Ident("x".into()),
                BindArrow,
                Keyword("produce"),
                Arrow,
                FatArrow,
                Eof
            ]
        );
    }

    #[test]
    fn dot_needs_digits_on_both_sides_in_numbers() {
        assert!(matches!(
            kinds("fix x. force x").as_slice(),
            [
                TokenKind::Keyword("fix"),
                TokenKind::Ident(_),
                TokenKind::Dot,
                TokenKind::Keyword("force"),
                TokenKind::Ident(_),
                TokenKind::Eof
            ]
        ));
    }

    #[test]
    fn tracks_positions() {
        let toks = lex("x\n  y").unwrap();
        assert_eq!((toks[0].line, toks[0].col), (1, 1));
        assert_eq!((toks[1].line, toks[1].col), (2, 3));
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(lex("x ? y").is_err());
        assert!(lex("1/0").is_err());
    }
}
