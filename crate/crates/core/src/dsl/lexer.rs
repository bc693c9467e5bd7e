use super::ast::Span;
use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    LParen,
    RParen,
    LBrack,
    RBrack,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Arrow,
    EqEq,
    Neq,
    Le,
    Ge,
    Lt,
    Gt,
    Plus,
    Minus,
    Assign,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.text()),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrack => "[",
            Tok::RBrack => "]",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Comma => ",",
            Tok::Colon => ":",
            Tok::Dot => ".",
            Tok::Arrow => "->",
            Tok::EqEq => "==",
            Tok::Neq => "!=",
            Tok::Le => "<=",
            Tok::Ge => ">=",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Plus => "+",
            Tok::Minus => "-",
            Tok::Assign => "=",
            Tok::Ident(_) | Tok::Int(_) | Tok::Eof => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

/// Tokenizes `src`, numbering lines from `first_line`. `//` starts a line comment.
pub fn lex(src: &str, first_line: u32) -> Result<Vec<Token>, DslError> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line_no = first_line + i as u32;
        let chars: Vec<char> = line.chars().collect();
        let mut pos = 0;
        while pos < chars.len() {
            let c = chars[pos];
            let span = Span::new(line_no, pos as u32 + 1);
            if c.is_whitespace() {
                pos += 1;
                continue;
            }
            if c == '/' && chars.get(pos + 1) == Some(&'/') {
                break;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = pos;
                while pos < chars.len() && (chars[pos].is_ascii_alphanumeric() || chars[pos] == '_') {
                    pos += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..pos].iter().collect()),
                    span,
                });
                continue;
            }
            if c.is_ascii_digit() {
                let start = pos;
                while pos < chars.len() && chars[pos].is_ascii_digit() {
                    pos += 1;
                }
                let text: String = chars[start..pos].iter().collect();
                let v = text.parse::<i64>().map_err(|_| DslError::Syntax {
                    span,
                    msg: format!("integer literal {text} out of range"),
                })?;
                out.push(Token {
                    tok: Tok::Int(v),
                    span,
                });
                continue;
            }
            let next = chars.get(pos + 1).copied();
            let (tok, width) = match (c, next) {
                ('=', Some('=')) => (Tok::EqEq, 2),
                ('!', Some('=')) => (Tok::Neq, 2),
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('-', Some('>')) => (Tok::Arrow, 2),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                ('=', _) => (Tok::Assign, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBrack, 1),
                (']', _) => (Tok::RBrack, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                (',', _) => (Tok::Comma, 1),
                (':', _) => (Tok::Colon, 1),
                ('.', _) => (Tok::Dot, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                _ => {
                    return Err(DslError::Syntax {
                        span,
                        msg: format!("unexpected character {c:?}"),
                    })
                }
            };
            out.push(Token { tok, span });
            pos += width;
        }
    }
    let last_line = first_line + src.lines().count().max(1) as u32 - 1;
    out.push(Token {
        tok: Tok::Eof,
        span: Span::new(last_line, 1),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_operators_and_comments() {
        let toks = lex("a<=b // trailing\n-> != x_1 42", 3).unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("a".into()),
                Tok::Le,
                Tok::Ident("b".into()),
                Tok::Arrow,
                Tok::Neq,
                Tok::Ident("x_1".into()),
                Tok::Int(42),
                Tok::Eof
            ]
        );
        assert_eq!(toks[3].span, Span::new(4, 1));
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(matches!(lex("a ? b", 1), Err(DslError::Syntax { .. })));
    }
}
