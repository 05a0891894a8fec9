//! Recursive-descent parser for the `.tvk` model language.
//!
//! ```text
//! model      := (typedecl | objectdecl | threaddecl)*
//! typedecl   := "type" IDENT ["timed"] "{" member* "}"
//! member     := ["volatile"] ["ghost"] sort IDENT ["in" INT ".." INT] ";"
//!             | "invariant" expr ";" | "approves" "(" "owner" "," IDENT ")" ";"
//!             | "on_unwrap" expr ";" | "dynamics" IDENT "=" expr ";"
//! sort       := "int" | "bool" | "objref" ["<" IDENT ">"] | "objset"
//! objectdecl := "object" IDENT ":" IDENT "{" (IDENT "=" literal ";")* "}"
//! threaddecl := "thread" IDENT "{" stmt* "}"
//! ```

use super::ast::*;
use super::diag::{DiagCode, Diagnostic, Diagnostics};
use super::lexer::{lex, Tok, Token};

const RESERVED: &[&str] = &[
    "type", "object", "thread", "volatile", "ghost", "int", "bool", "objref", "objset",
    "in", "invariant", "approves", "on_unwrap", "dynamics", "T", "dT", "old", "unchanged", "inv2",
    "mine", "closed", "forall", "self", "true", "false", "elapsed", "atomic", "assume", "assert",
    "loop", "writes", "wrap", "unwrap", "own",
];

type PResult<T> = Result<T, Diagnostic>;

/// Parses source text into a syntax tree; resolution happens separately.
pub fn parse_ast(src: &str) -> Result<ModelAst, Diagnostics> {
    let (tokens, mut diags) = lex(src);
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        next_stmt_id: 0,
    };
    let mut items = Vec::new();
    while !p.at_eof() {
        match p.item() {
            Ok(item) => items.push(item),
            Err(d) => {
                diags.push(d);
                p.recover();
            }
        }
    }
    if diags.is_empty() {
        Ok(ModelAst { items })
    } else {
        Err(Diagnostics::normalized(diags))
    }
}

/// Parses a standalone expression (used by tooling and tests).
pub fn parse_expr(src: &str) -> Result<ExprAst, Diagnostics> {
    let (tokens, diags) = lex(src);
    if !diags.is_empty() {
        return Err(Diagnostics::normalized(diags));
    }
    let mut p = Parser {
        toks: tokens,
        pos: 0,
        next_stmt_id: 0,
    };
    let e = p.expr().map_err(|d| Diagnostics(vec![d]))?;
    if !p.at_eof() {
        let t = p.peek_token();
        return Err(Diagnostics(vec![Diagnostic::new(
            DiagCode::Syntax,
            t.span,
            format!("unexpected {} after expression", t.tok.describe()),
        )]));
    }
    Ok(e)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_stmt_id: u32,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn peek_token(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &str) -> Diagnostic {
        let t = self.peek_token();
        Diagnostic::new(
            DiagCode::Syntax,
            t.span,
            format!("expected {expected}, found {}", t.tok.describe()),
        )
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            let what = match &tok {
                Tok::Ident(s) => format!("`{s}`"),
                other => other.describe(),
            };
            Err(self.unexpected(&what))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.unexpected(&format!("`{kw}`")))
        }
    }

    /// A non-reserved identifier.
    fn ident(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let span = self.bump().span;
                Ok(Ident::new(s, span))
            }
            Tok::Ident(s) => Err(Diagnostic::new(
                DiagCode::Syntax,
                self.span(),
                format!("`{s}` is a keyword and cannot be used as a name"),
            )),
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Any word, keywords included (used for initializer keys).
    fn word(&mut self) -> PResult<Ident> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span;
                Ok(Ident::new(s, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn nat(&mut self, what: &str) -> PResult<u64> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n as u64)
            }
            Tok::Minus => Err(Diagnostic::new(
                DiagCode::Syntax,
                self.span(),
                format!("{what} must be a nonnegative integer"),
            )),
            _ => Err(self.unexpected(what)),
        }
    }

    fn signed_int(&mut self) -> PResult<i64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(if neg { -n } else { n })
            }
            _ => Err(self.unexpected("integer")),
        }
    }

    /// Skips to the next top-level declaration keyword after an error.
    fn recover(&mut self) {
        let mut depth: i64 = 0;
        // Always make progress.
        if !self.at_eof() {
            match self.bump().tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth -= 1,
                _ => {}
            }
        }
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Ident(s)
                    if depth <= 0 && matches!(s.as_str(), "type" | "object" | "thread") =>
                {
                    return
                }
                Tok::LBrace => depth += 1,
                Tok::RBrace => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    fn item(&mut self) -> PResult<Item> {
        if self.eat_kw("type") {
            self.type_decl().map(Item::Type)
        } else if self.eat_kw("object") {
            self.object_decl().map(Item::Object)
        } else if self.eat_kw("thread") {
            self.thread_decl().map(Item::Thread)
        } else {
            Err(self.unexpected("`type`, `object` or `thread`"))
        }
    }

    fn type_decl(&mut self) -> PResult<TypeAst> {
        let name = self.ident()?;
        let timed = self.eat_kw("timed");
        self.expect(Tok::LBrace)?;
        let mut members = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            members.push(self.member()?);
        }
        Ok(TypeAst {
            name,
            timed,
            members,
        })
    }

    fn member(&mut self) -> PResult<Member> {
        if self.eat_kw("invariant") {
            let e = self.expr()?;
            self.expect(Tok::Semi)?;
            return Ok(Member::Invariant(e));
        }
        if self.eat_kw("approves") {
            self.expect(Tok::LParen)?;
            let who = self.word()?;
            if who.name != "owner" {
                return Err(Diagnostic::new(
                    DiagCode::Syntax,
                    who.span,
                    "only `approves(owner, field)` is supported",
                ));
            }
            self.expect(Tok::Comma)?;
            let f = self.ident()?;
            self.expect(Tok::RParen)?;
            self.expect(Tok::Semi)?;
            return Ok(Member::Approves(f));
        }
        if self.eat_kw("on_unwrap") {
            let e = self.expr()?;
            self.expect(Tok::Semi)?;
            return Ok(Member::OnUnwrap(e));
        }
        if self.eat_kw("dynamics") {
            let f = self.ident()?;
            self.expect(Tok::Assign)?;
            let e = self.expr()?;
            self.expect(Tok::Semi)?;
            return Ok(Member::Dynamics(f, e));
        }
        let volatile = self.eat_kw("volatile");
        let ghost = self.eat_kw("ghost");
        let sort = if self.eat_kw("int") {
            SortAst::Int
        } else if self.eat_kw("bool") {
            SortAst::Bool
        } else if self.eat_kw("objset") {
            SortAst::ObjSet
        } else if self.eat_kw("objref") {
            if self.eat(&Tok::Lt) {
                let t = self.ident()?;
                self.expect(Tok::Gt)?;
                SortAst::ObjRef(Some(t))
            } else {
                SortAst::ObjRef(None)
            }
        } else {
            return Err(self.unexpected("a member declaration"));
        };
        let name = self.ident()?;
        let range = if self.eat_kw("in") {
            let lo = self.signed_int()?;
            self.expect(Tok::DotDot)?;
            let hi = self.signed_int()?;
            Some((lo, hi))
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(Member::Field(FieldAst {
            volatile,
            ghost,
            sort,
            name,
            range,
        }))
    }

    fn object_decl(&mut self) -> PResult<ObjectAst> {
        let name = self.ident()?;
        self.expect(Tok::Colon)?;
        let ty = self.ident()?;
        self.expect(Tok::LBrace)?;
        let mut inits = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            let key = self.word()?;
            self.expect(Tok::Assign)?;
            let lit = self.literal()?;
            self.expect(Tok::Semi)?;
            inits.push((key, lit));
        }
        Ok(ObjectAst { name, ty, inits })
    }

    fn literal(&mut self) -> PResult<LiteralAst> {
        match self.peek().clone() {
            Tok::Int(_) | Tok::Minus => self.signed_int().map(LiteralAst::Int),
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(LiteralAst::Bool(true))
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(LiteralAst::Bool(false))
            }
            Tok::Ident(_) => self.ident().map(LiteralAst::Ref),
            Tok::LBrace => {
                self.bump();
                let mut v = Vec::new();
                if !self.eat(&Tok::RBrace) {
                    loop {
                        v.push(self.ident()?);
                        if self.eat(&Tok::RBrace) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                Ok(LiteralAst::Set(v))
            }
            _ => Err(self.unexpected("literal")),
        }
    }

    fn thread_decl(&mut self) -> PResult<ThreadAst> {
        let name = self.ident()?;
        let body = self.block()?;
        Ok(ThreadAst { name, body })
    }

    fn block(&mut self) -> PResult<Vec<StmtAst>> {
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        while !self.eat(&Tok::RBrace) {
            if self.at_eof() {
                return Err(self.unexpected("`}`"));
            }
            body.push(self.stmt()?);
        }
        Ok(body)
    }

    fn fresh_id(&mut self) -> u32 {
        let id = self.next_stmt_id;
        self.next_stmt_id += 1;
        id
    }

    fn paren_obj(&mut self) -> PResult<Ident> {
        self.expect(Tok::LParen)?;
        let o = self.ident()?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        Ok(o)
    }

    fn paren_obj_delta(&mut self) -> PResult<(Ident, u64)> {
        self.expect(Tok::LParen)?;
        let o = self.ident()?;
        self.expect(Tok::Comma)?;
        let d = self.nat("delta")?;
        self.expect(Tok::RParen)?;
        self.expect(Tok::Semi)?;
        Ok((o, d))
    }

    fn stmt(&mut self) -> PResult<StmtAst> {
        let span = self.span();
        let id = self.fresh_id();
        let word = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("statement")),
        };
        let kind = match word.as_str() {
            "atomic" => {
                self.bump();
                StmtKind::Atomic(self.block()?)
            }
            "wrap" | "unwrap" => {
                self.bump();
                let o = self.ident()?;
                self.expect(Tok::Semi)?;
                if word == "wrap" {
                    StmtKind::Wrap(o)
                } else {
                    StmtKind::Unwrap(o)
                }
            }
            "own" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let child = self.ident()?;
                self.expect(Tok::Comma)?;
                let owner = self.ident()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                StmtKind::Own { child, owner }
            }
            "assume" | "assert" => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                if word == "assume" {
                    StmtKind::Assume(e)
                } else {
                    StmtKind::Assert(e)
                }
            }
            "loop" => {
                self.bump();
                let bound = self.nat("loop bound")?;
                if bound == 0 {
                    return Err(Diagnostic::new(
                        DiagCode::Syntax,
                        span,
                        "loop bound must be positive",
                    ));
                }
                self.expect_kw("invariant")?;
                let invariant = self.expr()?;
                let mut writes = Vec::new();
                if self.eat_kw("writes") {
                    loop {
                        writes.push(self.ident()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                let body = self.block()?;
                StmtKind::Loop {
                    bound,
                    invariant,
                    writes,
                    body,
                }
            }
            "deadline_new" | "timer_new" | "deadline_reset" | "timer_reset" => {
                self.bump();
                let kind = if word.starts_with("deadline") {
                    PrimKind::Deadline
                } else {
                    PrimKind::Timer
                };
                let (obj, delta) = self.paren_obj_delta()?;
                if word.ends_with("_new") {
                    StmtKind::New { kind, obj, delta }
                } else {
                    StmtKind::Reset { kind, obj, delta }
                }
            }
            "deadline_destroy" | "timer_destroy" => {
                self.bump();
                let kind = if word.starts_with("deadline") {
                    PrimKind::Deadline
                } else {
                    PrimKind::Timer
                };
                let obj = self.paren_obj()?;
                StmtKind::Destroy { kind, obj }
            }
            "timer_record" => {
                self.bump();
                StmtKind::Record(self.paren_obj()?)
            }
            "bump_volatile_version" | "domain" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let mut args = Vec::new();
                if !self.eat(&Tok::RParen) {
                    loop {
                        args.push(self.ident()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma)?;
                    }
                }
                self.expect(Tok::Semi)?;
                StmtKind::Annotation {
                    keyword: word,
                    args,
                }
            }
            _ => {
                let target = self.postfix()?;
                self.expect(Tok::Define)?;
                let value = self.expr()?;
                self.expect(Tok::Semi)?;
                StmtKind::Assign { target, value }
            }
        };
        Ok(StmtAst { id, span, kind })
    }

    // ---- expressions ----

    pub fn expr(&mut self) -> PResult<ExprAst> {
        if self.is_kw("forall") {
            let span = self.bump().span;
            let var = self.ident()?;
            self.expect(Tok::Colon)?;
            let body = self.expr()?;
            return Ok(ExprAst::new(span, ExprKind::Forall(var, Box::new(body))));
        }
        let cond = self.binary(1)?;
        if self.eat(&Tok::Question) {
            let a = self.expr()?;
            self.expect(Tok::Colon)?;
            let b = self.expr()?;
            let span = cond.span;
            return Ok(ExprAst::new(
                span,
                ExprKind::Cond(Box::new(cond), Box::new(a), Box::new(b)),
            ));
        }
        Ok(cond)
    }

    fn binop(&self) -> Option<BinOp> {
        Some(match self.peek() {
            Tok::Plus => BinOp::Add,
            Tok::Minus => BinOp::Sub,
            Tok::Star => BinOp::Mul,
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::Lt => BinOp::Lt,
            Tok::Le => BinOp::Le,
            Tok::Gt => BinOp::Gt,
            Tok::Ge => BinOp::Ge,
            Tok::AndAnd => BinOp::And,
            Tok::OrOr => BinOp::Or,
            Tok::Implies => BinOp::Implies,
            _ => return None,
        })
    }

    /// Precedence climbing over binary operators.
    fn binary(&mut self, min_prec: u8) -> PResult<ExprAst> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binop() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = if self.is_kw("forall") {
                self.expr()?
            } else if op.right_assoc() {
                self.binary(prec)?
            } else {
                self.binary(prec + 1)?
            };
            let span = lhs.span;
            lhs = ExprAst::new(span, ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<ExprAst> {
        let span = self.span();
        if self.eat(&Tok::Bang) {
            let e = self.unary()?;
            return Ok(ExprAst::new(span, ExprKind::Unary(UnOp::Not, Box::new(e))));
        }
        if self.eat(&Tok::Minus) {
            let e = self.unary()?;
            return Ok(ExprAst::new(span, ExprKind::Unary(UnOp::Neg, Box::new(e))));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<ExprAst> {
        let mut e = self.primary()?;
        loop {
            if self.eat(&Tok::Dot) {
                let f = self.ident()?;
                let span = e.span;
                e = ExprAst::new(span, ExprKind::Field(Box::new(e), f));
            } else if *self.peek() == Tok::LBracket {
                self.bump();
                let k = self.expr()?;
                self.expect(Tok::RBracket)?;
                let span = e.span;
                e = ExprAst::new(span, ExprKind::Index(Box::new(e), Box::new(k)));
            } else {
                return Ok(e);
            }
        }
    }

    fn call1(&mut self) -> PResult<Box<ExprAst>> {
        self.expect(Tok::LParen)?;
        let e = self.expr()?;
        self.expect(Tok::RParen)?;
        Ok(Box::new(e))
    }

    fn primary(&mut self) -> PResult<ExprAst> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(ExprAst::new(span, ExprKind::Int(n)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(w) => {
                let with_paren = *self.peek_at(1) == Tok::LParen;
                let kind = match w.as_str() {
                    "true" => {
                        self.bump();
                        ExprKind::Bool(true)
                    }
                    "false" => {
                        self.bump();
                        ExprKind::Bool(false)
                    }
                    "T" => {
                        self.bump();
                        ExprKind::Now
                    }
                    "dT" => {
                        self.bump();
                        ExprKind::Delta
                    }
                    "self" => {
                        self.bump();
                        ExprKind::SelfRef
                    }
                    "old" | "unchanged" | "inv2" | "mine" | "closed" if with_paren => {
                        self.bump();
                        let arg = self.call1()?;
                        match w.as_str() {
                            "old" => ExprKind::Old(arg),
                            "unchanged" => ExprKind::Unchanged(arg),
                            "inv2" => ExprKind::Inv2(arg),
                            "mine" => ExprKind::Mine(arg),
                            _ => ExprKind::Closed(arg),
                        }
                    }
                    "elapsed" if with_paren => {
                        self.bump();
                        self.expect(Tok::LParen)?;
                        let name = self.ident()?;
                        self.expect(Tok::RParen)?;
                        ExprKind::Elapsed(name)
                    }
                    _ => {
                        let id = self.ident()?;
                        ExprKind::Name(id.name)
                    }
                };
                Ok(ExprAst::new(span, kind))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_of_implication_and_arithmetic() {
        let e = parse_expr("b.on ==> b.level + d.t - T <= 70").unwrap();
        match e.kind {
            ExprKind::Binary(BinOp::Implies, _, rhs) => match rhs.kind {
                ExprKind::Binary(BinOp::Le, lhs, _) => {
                    assert!(matches!(lhs.kind, ExprKind::Binary(BinOp::Sub, _, _)))
                }
                other => panic!("unexpected {other:?}"),
            },
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn conditional_binds_loosest() {
        let e = parse_expr("old(on) ? dT : 0 - dT").unwrap();
        assert!(matches!(e.kind, ExprKind::Cond(..)));
    }

    #[test]
    fn forall_extends_right() {
        let e = parse_expr("forall o: old(timed[o]) ==> timed[o] || inv2(o)").unwrap();
        match e.kind {
            ExprKind::Forall(v, body) => {
                assert_eq!(v.name, "o");
                assert!(matches!(body.kind, ExprKind::Binary(BinOp::Implies, _, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_delta_is_rejected() {
        let err = parse_ast("thread t { deadline_new(d, -1); }").unwrap_err();
        assert_eq!(err.first().code, DiagCode::Syntax);
        assert!(err.first().message.contains("nonnegative"));
    }

    #[test]
    fn recovers_and_reports_several_errors() {
        let err = parse_ast("type A { int ; }\ntype B { bool ; }\nobject x : A { }").unwrap_err();
        assert_eq!(err.0.len(), 2);
        assert_eq!(err.0[0].line, 1);
        assert_eq!(err.0[1].line, 2);
    }

    #[test]
    fn statement_ids_are_preorder() {
        let m = parse_ast("thread t { wrap a; loop 3 invariant true { atomic { x.f := 1; } } }")
            .unwrap();
        let Item::Thread(t) = &m.items[0] else {
            panic!()
        };
        assert_eq!(t.body[0].id, 0);
        assert_eq!(t.body[1].id, 1);
        let StmtKind::Loop { body, .. } = &t.body[1].kind else {
            panic!()
        };
        assert_eq!(body[0].id, 2);
        let StmtKind::Atomic(inner) = &body[0].kind else {
            panic!()
        };
        assert_eq!(inner[0].id, 3);
    }
}
