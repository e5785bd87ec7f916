use std::collections::HashSet;

use super::lexer::{tokenize, Spanned, Token};
use super::{BinOp, DslError, Expr, Func, ImmersionDef, ProductKind, Provenance};

/// Parse a source text holding exactly one immersion.
pub fn parse_immersion(source: &str) -> Result<ImmersionDef, DslError> {
    let mut defs = parse_file(source)?;
    match defs.len() {
        1 => Ok(defs.remove(0)),
        0 => Err(DslError::Syntax { line: 1, column: 1, message: "no immersion found".into() }),
        k => Err(DslError::Syntax {
            line: 1,
            column: 1,
            message: format!("expected one immersion, found {k}"),
        }),
    }
}

/// Parse every immersion in a file, in order.
pub fn parse_file(source: &str) -> Result<Vec<ImmersionDef>, DslError> {
    let tokens = tokenize(source)?;
    let mut parser = Parser { tokens, pos: 0, declared: HashSet::new() };
    let mut defs = Vec::new();
    loop {
        let mut provenance = None;
        while let Token::Directive(text) = parser.peek().clone() {
            let (line, column) = parser.span();
            parser.pos += 1;
            if let Some(p) = parse_directive(&text, line, column)? {
                provenance = Some(p);
            }
        }
        if parser.peek() == &Token::Eof {
            if provenance.is_some() {
                return Err(parser.error("product directive is not followed by an immersion"));
            }
            break;
        }
        let (line, column) = parser.span();
        let def = parser.immersion()?;
        let def = match provenance {
            Some(p) => def.with_provenance(p).map_err(|e| DslError::Syntax {
                line,
                column,
                message: e.to_string(),
            })?,
            None => def,
        };
        defs.push(def);
    }
    Ok(defs)
}

fn parse_directive(text: &str, line: usize, column: usize) -> Result<Option<Provenance>, DslError> {
    let Some(body) = text.strip_prefix("product") else {
        return Ok(None);
    };
    let err = |message: String| DslError::Syntax { line, column, message };
    let body = body
        .trim()
        .strip_prefix('(')
        .and_then(|b| b.strip_suffix(')'))
        .ok_or_else(|| err("product directive must be of the form #@product(...)".into()))?;
    let (mut kind, mut n2, mut n3, mut axis, mut factors) = (None, None, None, None, None);
    for field in body.split(',').map(str::trim).filter(|f| !f.is_empty()) {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| err(format!("malformed product field '{field}'")))?;
        let value = value.trim();
        let count = |v: &str| v.parse::<usize>().map_err(|_| err(format!("bad count '{v}'")));
        match key.trim() {
            "kind" => {
                kind = Some(match value {
                    "point" => ProductKind::Point,
                    "pair" => ProductKind::Pair,
                    other => return Err(err(format!("unknown product kind '{other}'"))),
                })
            }
            "n2" => n2 = Some(count(value)?),
            "n3" => n3 = Some(count(value)?),
            "axis" => axis = Some(value.to_string()),
            "factors" => factors = Some(value.split(';').map(|s| s.trim().to_string()).collect()),
            other => return Err(err(format!("unknown product field '{other}'"))),
        }
    }
    let missing = |name: &str| err(format!("product directive is missing '{name}'"));
    Ok(Some(Provenance {
        kind: kind.ok_or_else(|| missing("kind"))?,
        n2: n2.ok_or_else(|| missing("n2"))?,
        n3: n3.unwrap_or(0),
        axis: axis.ok_or_else(|| missing("axis"))?,
        factors: factors.unwrap_or_default(),
    }))
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    declared: HashSet<String>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].token
    }

    fn span(&self) -> (usize, usize) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn error(&self, message: impl Into<String>) -> DslError {
        let (line, column) = self.span();
        DslError::Syntax { line, column, message: message.into() }
    }

    fn describe(&self) -> String {
        match self.peek() {
            Token::Ident(s) => format!("'{s}'"),
            Token::Number(x) => format!("number {x}"),
            Token::Directive(_) => "directive".into(),
            Token::Punct(c) => format!("'{c}'"),
            Token::Eof => "end of input".into(),
        }
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos].token.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn punct(&mut self, c: char) -> Result<(), DslError> {
        if self.peek() == &Token::Punct(c) {
            self.advance();
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}', found {}", self.describe())))
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Token::Ident(s) => {
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(format!("expected identifier, found {}", self.describe()))),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<(), DslError> {
        match self.peek() {
            Token::Ident(s) if s == word => {
                self.advance();
                Ok(())
            }
            _ => Err(self.error(format!("expected '{word}', found {}", self.describe()))),
        }
    }

    fn at_keyword(&self, word: &str) -> bool {
        matches!(self.peek(), Token::Ident(s) if s == word)
    }

    fn immersion(&mut self) -> Result<ImmersionDef, DslError> {
        let (line, column) = self.span();
        self.keyword("immersion")?;
        let name = self.ident()?;
        self.punct('{')?;

        self.keyword("vars")?;
        self.punct(':')?;
        let mut vars = vec![self.ident()?];
        while self.peek() == &Token::Punct(',') {
            self.advance();
            vars.push(self.ident()?);
        }
        self.punct(';')?;
        self.declared = vars.iter().cloned().collect();
        for v in &vars {
            if Func::from_name(v).is_some() {
                return Err(DslError::Syntax {
                    line,
                    column,
                    message: format!("'{v}' is a function name and cannot be a variable"),
                });
            }
        }

        let mut declared_dim = None;
        if self.at_keyword("dim") {
            self.advance();
            self.punct(':')?;
            match self.advance() {
                Token::Number(x) if x.fract() == 0.0 && x >= 1.0 => declared_dim = Some(x as usize),
                _ => return Err(self.error("expected a positive integer after 'dim:'")),
            }
            self.punct(';')?;
        }

        self.keyword("components")?;
        self.punct(':')?;
        self.punct('(')?;
        let mut components = vec![self.expr()?];
        while self.peek() == &Token::Punct(',') {
            self.advance();
            components.push(self.expr()?);
        }
        self.punct(')')?;
        self.punct(';')?;
        self.punct('}')?;

        if let Some(declared) = declared_dim {
            if declared != components.len() {
                return Err(DslError::DimensionMismatch { declared, found: components.len() });
            }
        }
        ImmersionDef::new(name, vars, components).map_err(|e| match e {
            DslError::Invalid(message) => DslError::Syntax { line, column, message },
            other => other,
        })
    }

    fn expr(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Punct('+') => BinOp::Add,
                Token::Punct('-') => BinOp::Sub,
                _ => break,
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Token::Punct('*') => BinOp::Mul,
                Token::Punct('/') => BinOp::Div,
                _ => break,
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, DslError> {
        let base = self.base()?;
        if self.peek() == &Token::Punct('^') {
            self.advance();
            match self.advance() {
                Token::Number(p) => return Ok(Expr::binary(BinOp::Pow, base, Expr::Const(p))),
                _ => {
                    self.pos -= 1;
                    return Err(self.error("exponent of '^' must be a numeric literal"));
                }
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, DslError> {
        let (line, column) = self.span();
        match self.peek().clone() {
            Token::Number(x) => {
                self.advance();
                Ok(Expr::Const(x))
            }
            Token::Punct('(') => {
                self.advance();
                let e = self.expr()?;
                self.punct(')')?;
                Ok(e)
            }
            Token::Punct('-') => {
                self.advance();
                Ok(Expr::neg(self.factor()?))
            }
            Token::Ident(name) => {
                self.advance();
                if let Some(f) = Func::from_name(&name) {
                    self.punct('(')?;
                    let arg = self.expr()?;
                    self.punct(')')?;
                    return Ok(Expr::call(f, arg));
                }
                if !self.declared.contains(&name) {
                    return Err(DslError::UndeclaredVariable { name, line, column });
                }
                Ok(Expr::Var(name))
            }
            _ => Err(self.error(format!("expected expression, found {}", self.describe()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_hyperbola() {
        let def = parse_immersion(
            "immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }",
        )
        .unwrap();
        assert_eq!(def.name(), "h2");
        assert_eq!(def.dim(), 1);
        assert_eq!(def.ambient_dim(), 2);
        let v = def.eval(&[0.0]);
        assert!((v[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
    }

    #[test]
    fn undeclared_variable_is_reported() {
        let err = parse_immersion("immersion bad { vars: s; components: (exp(t)); }").unwrap_err();
        assert!(err.to_string().starts_with("undeclared variable t"), "{err}");
        match err {
            DslError::UndeclaredVariable { line, column, .. } => assert_eq!((line, column), (1, 43)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dimension_declaration_must_match() {
        let err =
            parse_immersion("immersion a { vars: u; dim: 3; components: (u, u*u); }").unwrap_err();
        assert_eq!(err, DslError::DimensionMismatch { declared: 3, found: 2 });
        assert!(parse_immersion("immersion a { vars: u; dim: 2; components: (u, u*u); }").is_ok());
    }

    #[test]
    fn syntax_errors_carry_line_and_column() {
        let err = parse_immersion("immersion a {\n  vars: u;\n  components: (u +); }").unwrap_err();
        match err {
            DslError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 19)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence_and_unary_minus() {
        let def = parse_immersion("immersion a { vars: u, v; components: (-u^2 + 2*v/4 - 1); }").unwrap();
        assert_eq!(def.eval(&[3.0, 2.0]), vec![-9.0 + 1.0 - 1.0]);
        let expected = Expr::sub(
            Expr::add(
                Expr::neg(Expr::binary(BinOp::Pow, Expr::var("u"), Expr::Const(2.0))),
                Expr::div(Expr::mul(Expr::Const(2.0), Expr::var("v")), Expr::Const(4.0)),
            ),
            Expr::Const(1.0),
        );
        assert_eq!(def.components()[0], expected);
    }

    #[test]
    fn exponent_must_be_literal() {
        assert!(parse_immersion("immersion a { vars: u; components: (u^u); }").is_err());
    }

    #[test]
    fn product_directive_attaches_provenance() {
        let src = "#@product(kind=point, n2=1, axis=t, factors=h2)\n\
                   immersion p { vars: t, s; components: (exp(t)*s, exp(t)/s, exp(-2*t)); }";
        let def = parse_immersion(src).unwrap();
        let prov = def.provenance().unwrap();
        assert_eq!(prov.kind, ProductKind::Point);
        assert_eq!((prov.n2, prov.n3), (1, 0));
        assert_eq!(prov.factors, vec!["h2".to_string()]);
    }

    #[test]
    fn multiple_immersions_per_file() {
        let defs = parse_file(
            "immersion a { vars: u; components: (u); }\n# between\nimmersion b { vars: v; components: (v, v); }",
        )
        .unwrap();
        assert_eq!(defs.len(), 2);
        assert!(parse_immersion("immersion a { vars: u; components: (u); } immersion b { vars: v; components: (v); }").is_err());
    }
}
