use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Token {
    Ident(String),
    Number(f64),
    /// `#@name(...)` directive comment; payload is the text after `#@`.
    Directive(String),
    Punct(char),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub token: Token,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn tokenize(source: &str) -> Result<Vec<Spanned>, DslError> {
    let chars: Vec<char> = source.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut column) = (0usize, 1usize, 1usize);

    while i < chars.len() {
        let c = chars[i];
        let (tok_line, tok_col) = (line, column);
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' {
            let start = i;
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            column += i - start;
            if let Some(rest) = text.strip_prefix("#@") {
                out.push(Spanned {
                    token: Token::Directive(rest.trim().to_string()),
                    line: tok_line,
                    column: tok_col,
                });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            column += i - start;
            out.push(Spanned {
                token: Token::Ident(chars[start..i].iter().collect()),
                line: tok_line,
                column: tok_col,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text: String = chars[start..i].iter().collect();
            column += i - start;
            let value = text.parse::<f64>().map_err(|_| DslError::Syntax {
                line: tok_line,
                column: tok_col,
                message: format!("malformed number '{text}'"),
            })?;
            out.push(Spanned { token: Token::Number(value), line: tok_line, column: tok_col });
            continue;
        }
        if "{}();:,+-*/^".contains(c) {
            i += 1;
            column += 1;
            out.push(Spanned { token: Token::Punct(c), line: tok_line, column: tok_col });
            continue;
        }
        return Err(DslError::Syntax {
            line: tok_line,
            column: tok_col,
            message: format!("unexpected character '{c}'"),
        });
    }
    out.push(Spanned { token: Token::Eof, line, column });
    Ok(out)
}
