//! Tokenizer for the restricted C subset.
//!
//! Works one file at a time. Preprocessor lines are handled here: quoted
//! includes and integer object-like defines become dedicated items for the
//! include expander, `#pragma` lines become trivia tokens the parser can
//! attach to syntax, and every other directive line is dropped.

use crate::source::{Diagnostic, Location};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Punct {
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Percent,
    Assign,
    PlusAssign,
    MinusAssign,
    StarAssign,
    SlashAssign,
    PercentAssign,
    AmpAssign,
    PipeAssign,
    CaretAssign,
    ShlAssign,
    ShrAssign,
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
    Inc,
    Dec,
    AndAnd,
    OrOr,
    Not,
    Tilde,
    Amp,
    Pipe,
    Caret,
    Shl,
    Shr,
    Question,
    Colon,
}

impl Punct {
    pub fn text(self) -> &'static str {
        use Punct::*;
        match self {
            LParen => "(",
            RParen => ")",
            LBrace => "{",
            RBrace => "}",
            LBracket => "[",
            RBracket => "]",
            Semi => ";",
            Comma => ",",
            Plus => "+",
            Minus => "-",
            Star => "*",
            Slash => "/",
            Percent => "%",
            Assign => "=",
            PlusAssign => "+=",
            MinusAssign => "-=",
            StarAssign => "*=",
            SlashAssign => "/=",
            PercentAssign => "%=",
            AmpAssign => "&=",
            PipeAssign => "|=",
            CaretAssign => "^=",
            ShlAssign => "<<=",
            ShrAssign => ">>=",
            Eq => "==",
            Ne => "!=",
            Lt => "<",
            Gt => ">",
            Le => "<=",
            Ge => ">=",
            Inc => "++",
            Dec => "--",
            AndAnd => "&&",
            OrOr => "||",
            Not => "!",
            Tilde => "~",
            Amp => "&",
            Pipe => "|",
            Caret => "^",
            Shl => "<<",
            Shr => ">>",
            Question => "?",
            Colon => ":",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(String),
    Punct(Punct),
    /// Text of a `#pragma` line with the `#pragma` prefix stripped.
    Pragma(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: Tok,
    pub loc: Location,
}

/// One lexed element. Include and define directives come back as their own
/// items because they act at the unit level, not inside one file.
#[derive(Debug, Clone, PartialEq)]
pub enum LexItem {
    Tok(Token),
    Include { name: String, loc: Location },
    Define { name: String, value: Option<i64>, loc: Location },
}

pub struct Lexer<'a> {
    file: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    pub fn new(file: &'a str, content: &'a str) -> Self {
        Self {
            file,
            bytes: content.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
            at_line_start: true,
        }
    }

    fn loc(&self) -> Location {
        Location::new(self.file, self.line, self.col, self.pos)
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn peek2(&self) -> Option<u8> {
        self.bytes.get(self.pos + 1).copied()
    }

    fn peek3(&self) -> Option<u8> {
        self.bytes.get(self.pos + 2).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
            self.at_line_start = true;
        } else {
            self.col += 1;
            if !(b as char).is_whitespace() {
                self.at_line_start = false;
            }
        }
        Some(b)
    }

    fn error(&self, loc: Location, message: String) -> Diagnostic {
        Diagnostic::new(loc, "syntax", message)
    }

    fn unsupported(&self, loc: Location, message: String) -> Diagnostic {
        Diagnostic::new(loc, "unsupported", message)
    }

    /// Skip whitespace and comments. Returns an error only for an
    /// unterminated block comment.
    fn skip_trivia(&mut self) -> Result<(), Diagnostic> {
        loop {
            match self.peek() {
                Some(b) if (b as char).is_whitespace() => {
                    self.bump();
                }
                Some(b'/') if self.peek2() == Some(b'/') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                Some(b'/') if self.peek2() == Some(b'*') => {
                    let start = self.loc();
                    self.bump();
                    self.bump();
                    loop {
                        match self.peek() {
                            Some(b'*') if self.peek2() == Some(b'/') => {
                                self.bump();
                                self.bump();
                                break;
                            }
                            Some(_) => {
                                self.bump();
                            }
                            None => {
                                return Err(
                                    self.error(start, "unterminated block comment".into())
                                )
                            }
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    /// Consume the rest of the current physical line and return it.
    fn rest_of_line(&mut self) -> String {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b == b'\n' {
                break;
            }
            self.bump();
        }
        String::from_utf8_lossy(&self.bytes[start..self.pos]).into_owned()
    }

    fn lex_directive(&mut self, loc: Location) -> Result<Option<LexItem>, Diagnostic> {
        self.bump(); // '#'
        while matches!(self.peek(), Some(b' ') | Some(b'\t')) {
            self.bump();
        }
        let word_start = self.pos;
        while let Some(b) = self.peek() {
            if (b as char).is_ascii_alphanumeric() || b == b'_' {
                self.bump();
            } else {
                break;
            }
        }
        let word = String::from_utf8_lossy(&self.bytes[word_start..self.pos]).into_owned();
        let rest = self.rest_of_line();
        let rest = rest.trim();
        match word.as_str() {
            "pragma" => Ok(Some(LexItem::Tok(Token {
                kind: Tok::Pragma(rest.to_string()),
                loc,
            }))),
            "include" => {
                if let Some(name) = rest
                    .strip_prefix('"')
                    .and_then(|r| r.split('"').next())
                    .filter(|n| !n.is_empty())
                {
                    Ok(Some(LexItem::Include {
                        name: name.to_string(),
                        loc,
                    }))
                } else {
                    // System headers and malformed quotes are dropped.
                    Ok(None)
                }
            }
            "define" => {
                let mut parts = rest.splitn(2, char::is_whitespace);
                let name = parts.next().unwrap_or("").to_string();
                if name.is_empty()
                    || !name
                        .chars()
                        .all(|c| c.is_ascii_alphanumeric() || c == '_')
                {
                    return Ok(None);
                }
                let value = parts
                    .next()
                    .map(str::trim)
                    .and_then(parse_define_value);
                Ok(Some(LexItem::Define { name, value, loc }))
            }
            _ => Ok(None),
        }
    }

    fn lex_number(&mut self, loc: Location) -> Result<LexItem, Diagnostic> {
        let start = self.pos;
        let mut is_float = false;
        if self.peek() == Some(b'0') && matches!(self.peek2(), Some(b'x') | Some(b'X')) {
            self.bump();
            self.bump();
            let digits_start = self.pos;
            while let Some(b) = self.peek() {
                if (b as char).is_ascii_hexdigit() {
                    self.bump();
                } else {
                    break;
                }
            }
            if self.pos == digits_start {
                return Err(self.error(loc, "expected hex digits after 0x".into()));
            }
            let text = std::str::from_utf8(&self.bytes[digits_start..self.pos]).unwrap();
            let value = i64::from_str_radix(text, 16)
                .map_err(|_| self.error(loc.clone(), format!("integer literal out of range: 0x{text}")))?;
            self.skip_int_suffix();
            return Ok(LexItem::Tok(Token {
                kind: Tok::Int(value),
                loc,
            }));
        }
        while let Some(b) = self.peek() {
            if b.is_ascii_digit() {
                self.bump();
            } else {
                break;
            }
        }
        if self.peek() == Some(b'.') && self.peek2().is_some_and(|b| b.is_ascii_digit()) {
            is_float = true;
            self.bump();
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.bump();
            }
        } else if self.peek() == Some(b'.') {
            // Trailing-dot literals like `1.` are accepted too.
            is_float = true;
            self.bump();
        }
        if matches!(self.peek(), Some(b'e') | Some(b'E'))
            && (self.peek2().is_some_and(|b| b.is_ascii_digit())
                || (matches!(self.peek2(), Some(b'+') | Some(b'-'))
                    && self.peek3().is_some_and(|b| b.is_ascii_digit())))
        {
            is_float = true;
            self.bump();
            if matches!(self.peek(), Some(b'+') | Some(b'-')) {
                self.bump();
            }
            while self.peek().is_some_and(|b| b.is_ascii_digit()) {
                self.bump();
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string();
        if is_float {
            if matches!(self.peek(), Some(b'f') | Some(b'F') | Some(b'l') | Some(b'L')) {
                self.bump();
            }
            Ok(LexItem::Tok(Token {
                kind: Tok::Float(text),
                loc,
            }))
        } else {
            let value: i64 = text
                .parse()
                .map_err(|_| self.error(loc.clone(), format!("integer literal out of range: {text}")))?;
            self.skip_int_suffix();
            Ok(LexItem::Tok(Token {
                kind: Tok::Int(value),
                loc,
            }))
        }
    }

    fn skip_int_suffix(&mut self) {
        while matches!(self.peek(), Some(b'u') | Some(b'U') | Some(b'l') | Some(b'L')) {
            self.bump();
        }
    }

    fn lex_char_literal(&mut self, loc: Location) -> Result<LexItem, Diagnostic> {
        self.bump(); // opening quote
        let value = match self.peek() {
            Some(b'\\') => {
                self.bump();
                let esc = self
                    .bump()
                    .ok_or_else(|| self.error(loc.clone(), "unterminated character literal".into()))?;
                match esc {
                    b'n' => b'\n' as i64,
                    b't' => b'\t' as i64,
                    b'r' => b'\r' as i64,
                    b'0' => 0,
                    b'\\' => b'\\' as i64,
                    b'\'' => b'\'' as i64,
                    other => other as i64,
                }
            }
            Some(b) if b != b'\'' => {
                self.bump();
                b as i64
            }
            _ => return Err(self.error(loc, "empty character literal".into())),
        };
        if self.peek() != Some(b'\'') {
            return Err(self.error(loc, "unterminated character literal".into()));
        }
        self.bump();
        Ok(LexItem::Tok(Token {
            kind: Tok::Int(value),
            loc,
        }))
    }

    fn lex_punct(&mut self, loc: Location) -> Result<LexItem, Diagnostic> {
        use Punct::*;
        let a = self.peek().unwrap();
        let b = self.peek2();
        let c = self.peek3();
        let (p, len) = match (a, b, c) {
            (b'<', Some(b'<'), Some(b'=')) => (ShlAssign, 3),
            (b'>', Some(b'>'), Some(b'=')) => (ShrAssign, 3),
            (b'+', Some(b'+'), _) => (Inc, 2),
            (b'-', Some(b'-'), _) => (Dec, 2),
            (b'+', Some(b'='), _) => (PlusAssign, 2),
            (b'-', Some(b'='), _) => (MinusAssign, 2),
            (b'*', Some(b'='), _) => (StarAssign, 2),
            (b'/', Some(b'='), _) => (SlashAssign, 2),
            (b'%', Some(b'='), _) => (PercentAssign, 2),
            (b'&', Some(b'='), _) => (AmpAssign, 2),
            (b'|', Some(b'='), _) => (PipeAssign, 2),
            (b'^', Some(b'='), _) => (CaretAssign, 2),
            (b'=', Some(b'='), _) => (Eq, 2),
            (b'!', Some(b'='), _) => (Ne, 2),
            (b'<', Some(b'='), _) => (Le, 2),
            (b'>', Some(b'='), _) => (Ge, 2),
            (b'<', Some(b'<'), _) => (Shl, 2),
            (b'>', Some(b'>'), _) => (Shr, 2),
            (b'&', Some(b'&'), _) => (AndAnd, 2),
            (b'|', Some(b'|'), _) => (OrOr, 2),
            (b'(', ..) => (LParen, 1),
            (b')', ..) => (RParen, 1),
            (b'{', ..) => (LBrace, 1),
            (b'}', ..) => (RBrace, 1),
            (b'[', ..) => (LBracket, 1),
            (b']', ..) => (RBracket, 1),
            (b';', ..) => (Semi, 1),
            (b',', ..) => (Comma, 1),
            (b'+', ..) => (Plus, 1),
            (b'-', ..) => (Minus, 1),
            (b'*', ..) => (Star, 1),
            (b'/', ..) => (Slash, 1),
            (b'%', ..) => (Percent, 1),
            (b'=', ..) => (Assign, 1),
            (b'<', ..) => (Lt, 1),
            (b'>', ..) => (Gt, 1),
            (b'!', ..) => (Not, 1),
            (b'~', ..) => (Tilde, 1),
            (b'&', ..) => (Amp, 1),
            (b'|', ..) => (Pipe, 1),
            (b'^', ..) => (Caret, 1),
            (b'?', ..) => (Question, 1),
            (b':', ..) => (Colon, 1),
            (b'.', ..) => {
                return Err(self.unsupported(loc, "member access is not supported".into()))
            }
            _ => {
                return Err(self.error(
                    loc,
                    format!("unexpected character '{}'", a as char),
                ))
            }
        };
        for _ in 0..len {
            self.bump();
        }
        Ok(LexItem::Tok(Token {
            kind: Tok::Punct(p),
            loc,
        }))
    }

    pub fn lex(mut self) -> Result<Vec<LexItem>, Diagnostic> {
        let mut items = Vec::new();
        loop {
            self.skip_trivia()?;
            let Some(b) = self.peek() else { break };
            let loc = self.loc();
            if b == b'#' {
                if !self.at_line_start {
                    return Err(self.error(loc, "'#' is only valid at the start of a line".into()));
                }
                if let Some(item) = self.lex_directive(loc)? {
                    items.push(item);
                }
                continue;
            }
            let item = if (b as char).is_ascii_alphabetic() || b == b'_' {
                let start = self.pos;
                while let Some(b) = self.peek() {
                    if (b as char).is_ascii_alphanumeric() || b == b'_' {
                        self.bump();
                    } else {
                        break;
                    }
                }
                let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
                LexItem::Tok(Token {
                    kind: Tok::Ident(text.to_string()),
                    loc,
                })
            } else if b.is_ascii_digit() {
                self.lex_number(loc)?
            } else if b == b'\'' {
                self.lex_char_literal(loc)?
            } else if b == b'"' {
                return Err(self.unsupported(loc, "string literals are not supported".into()));
            } else {
                self.lex_punct(loc)?
            };
            items.push(item);
        }
        Ok(items)
    }
}

fn parse_define_value(text: &str) -> Option<i64> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .map(str::trim)
        .unwrap_or(text);
    let (sign, digits) = match inner.strip_prefix('-') {
        Some(rest) => (-1i64, rest.trim()),
        None => (1i64, inner),
    };
    let value = if let Some(hex) = digits.strip_prefix("0x").or_else(|| digits.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        digits.parse().ok()?
    };
    Some(sign * value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex(src: &str) -> Vec<LexItem> {
        Lexer::new("t.c", src).lex().expect("lex failure")
    }

    fn kinds(src: &str) -> Vec<Tok> {
        lex(src)
            .into_iter()
            .filter_map(|i| match i {
                LexItem::Tok(t) => Some(t.kind),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn tokenizes_basic_code() {
        let toks = kinds("int x = a[3] * 2;");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("int".into()),
                Tok::Ident("x".into()),
                Tok::Punct(Punct::Assign),
                Tok::Ident("a".into()),
                Tok::Punct(Punct::LBracket),
                Tok::Int(3),
                Tok::Punct(Punct::RBracket),
                Tok::Punct(Punct::Star),
                Tok::Int(2),
                Tok::Punct(Punct::Semi),
            ]
        );
    }

    #[test]
    fn tracks_line_col_offset() {
        let items = lex("int a;\n  x = 1;\n");
        let LexItem::Tok(x) = &items[3] else { panic!() };
        assert_eq!(x.kind, Tok::Ident("x".into()));
        assert_eq!((x.loc.line, x.loc.col), (2, 3));
        assert_eq!(x.loc.offset, 9);
    }

    #[test]
    fn maximal_munch_on_operators() {
        assert_eq!(
            kinds("a<<=b<<c<=d<e"),
            vec![
                Tok::Ident("a".into()),
                Tok::Punct(Punct::ShlAssign),
                Tok::Ident("b".into()),
                Tok::Punct(Punct::Shl),
                Tok::Ident("c".into()),
                Tok::Punct(Punct::Le),
                Tok::Ident("d".into()),
                Tok::Punct(Punct::Lt),
                Tok::Ident("e".into()),
            ]
        );
    }

    #[test]
    fn comments_are_skipped() {
        let toks = kinds("int /* block\ncomment */ x; // line\ny;");
        assert_eq!(
            toks,
            vec![
                Tok::Ident("int".into()),
                Tok::Ident("x".into()),
                Tok::Punct(Punct::Semi),
                Tok::Ident("y".into()),
                Tok::Punct(Punct::Semi),
            ]
        );
    }

    #[test]
    fn pragma_lines_become_trivia_tokens() {
        let items = lex("{\n#pragma HLS unroll factor=4\n}\n");
        let pragmas: Vec<_> = items
            .iter()
            .filter_map(|i| match i {
                LexItem::Tok(Token {
                    kind: Tok::Pragma(p),
                    ..
                }) => Some(p.clone()),
                _ => None,
            })
            .collect();
        assert_eq!(pragmas, vec!["HLS unroll factor=4".to_string()]);
    }

    #[test]
    fn include_and_define_directives() {
        let src = "#include \"support.h\"\n#include <stdio.h>\n#define N 32\n#define NEG (-4)\n#define BARE\n";
        let items = lex(src);
        assert_eq!(
            items,
            vec![
                LexItem::Include {
                    name: "support.h".into(),
                    loc: Location::new("t.c", 1, 1, 0),
                },
                LexItem::Define {
                    name: "N".into(),
                    value: Some(32),
                    loc: Location::new("t.c", 3, 1, src.find("#define N").unwrap()),
                },
                LexItem::Define {
                    name: "NEG".into(),
                    value: Some(-4),
                    loc: Location::new("t.c", 4, 1, src.find("#define NEG").unwrap()),
                },
                LexItem::Define {
                    name: "BARE".into(),
                    value: None,
                    loc: Location::new("t.c", 5, 1, src.find("#define BARE").unwrap()),
                },
            ]
        );
    }

    #[test]
    fn hex_and_char_literals() {
        assert_eq!(kinds("0x1F 'a' '\\n'"), vec![Tok::Int(31), Tok::Int(97), Tok::Int(10)]);
    }

    #[test]
    fn float_literals_keep_text() {
        assert_eq!(
            kinds("1.5 2.0f 3e4 1.5e-3"),
            vec![
                Tok::Float("1.5".into()),
                Tok::Float("2.0".into()),
                Tok::Float("3e4".into()),
                Tok::Float("1.5e-3".into()),
            ]
        );
    }

    #[test]
    fn string_literal_is_unsupported() {
        let err = Lexer::new("t.c", "char *s = \"hi\";").lex().unwrap_err();
        assert_eq!(err.code, "unsupported");
    }

    #[test]
    fn unterminated_comment_is_reported() {
        let err = Lexer::new("t.c", "/* oops").lex().unwrap_err();
        assert_eq!(err.code, "syntax");
        assert!(err.message.contains("unterminated"));
    }
}
