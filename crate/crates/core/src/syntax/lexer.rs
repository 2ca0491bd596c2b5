use std::sync::Arc;

use super::diag::{Diagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Semi,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Plus,
    Minus,
    Slash,
    DotDot,
    Assign,
    Arrow,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Eof => "end of file".to_string(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Semi => ";",
            Tok::Eq => "=",
            Tok::Ne => "!=",
            Tok::Lt => "<",
            Tok::Le => "<=",
            Tok::Gt => ">",
            Tok::Ge => ">=",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Slash => "/",
            Tok::DotDot => "..",
            Tok::Assign => ":=",
            Tok::Arrow => "->",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl Token {
    pub fn span(&self, file: &Arc<str>) -> SourceSpan {
        SourceSpan {
            file: file.clone(),
            line: self.line,
            column: self.column,
            length: self.length,
        }
    }
}

/// Splits source text into tokens. `#` starts a comment running to the end
/// of the line; whitespace (including newlines) only separates tokens.
pub fn tokenize(src: &str, file: &Arc<str>) -> Result<Vec<Token>, Diagnostic> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        let next = chars.get(i + 1).copied();
        let two = |t: Tok| (t, 2usize);
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '+' => (Tok::Plus, 1),
            '/' => (Tok::Slash, 1),
            '=' => (Tok::Eq, 1),
            ':' if next == Some('=') => two(Tok::Assign),
            ':' => (Tok::Colon, 1),
            '-' if next == Some('>') => two(Tok::Arrow),
            '-' => (Tok::Minus, 1),
            '!' if next == Some('=') => two(Tok::Ne),
            '<' if next == Some('=') => two(Tok::Le),
            '<' => (Tok::Lt, 1),
            '>' if next == Some('=') => two(Tok::Ge),
            '>' => (Tok::Gt, 1),
            '.' if next == Some('.') => two(Tok::DotDot),
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let value = text.parse::<u64>().map_err(|_| {
                    Diagnostic::error(
                        SourceSpan {
                            file: file.clone(),
                            line,
                            column: col,
                            length: j - i,
                        },
                        format!("integer literal {text} is too large"),
                    )
                })?;
                (Tok::Int(value), j - i)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => {
                return Err(Diagnostic::error(
                    SourceSpan {
                        file: file.clone(),
                        line,
                        column: col,
                        length: 1,
                    },
                    format!("unexpected character {other:?}"),
                ))
            }
        };
        out.push(Token {
            tok,
            line,
            column: start_col,
            length: len,
        });
        i += len;
        col += len;
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
        length: 0,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_and_positions() {
        let file: Arc<str> = Arc::from("t");
        let toks = tokenize("a := -3 # note\n  b<=c..d->e", &file).unwrap();
        let kinds: Vec<Tok> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Assign,
                Tok::Minus,
                Tok::Int(3),
                Tok::Ident("b".into()),
                Tok::Le,
                Tok::Ident("c".into()),
                Tok::DotDot,
                Tok::Ident("d".into()),
                Tok::Arrow,
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
        assert_eq!((toks[4].line, toks[4].column), (2, 3));
    }

    #[test]
    fn bad_character() {
        let file: Arc<str> = Arc::from("t");
        let err = tokenize("a $ b", &file).unwrap_err();
        assert_eq!(err.span.column, 3);
    }
}
