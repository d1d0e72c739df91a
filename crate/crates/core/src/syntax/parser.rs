//! Recursive-descent parser for model files and temporal properties.

use super::ast::*;
use super::lexer::{tokenize, Token, TokenKind};
use super::{Diagnostic, DiagnosticKind};

type PResult<T> = Result<T, Diagnostic>;

/// Which expression forms are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExprMode {
    Model,
    Property,
}

pub(crate) struct Parser<'s> {
    source: &'s str,
    tokens: Vec<Token>,
    pos: usize,
    mode: ExprMode,
}

const IMPLICIT_MODULE: &str = "main";

impl<'s> Parser<'s> {
    pub(crate) fn new(source: &'s str, mode: ExprMode) -> PResult<Self> {
        let tokens = tokenize(source).map_err(|e| Diagnostic {
            kind: DiagnosticKind::SyntaxError,
            message: e.message,
            span: e.span,
        })?;
        Ok(Parser {
            source,
            tokens,
            pos: 0,
            mode,
        })
    }

    // ---- token helpers -------------------------------------------------

    fn peek(&self) -> &TokenKind {
        &self.tokens[self.pos].kind
    }

    fn peek_at(&self, ahead: usize) -> &TokenKind {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].kind
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.tokens[self.pos.saturating_sub(1)].span
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        tok
    }

    fn at(&self, kind: &TokenKind) -> bool {
        self.peek() == kind
    }

    fn eat(&mut self, kind: &TokenKind) -> bool {
        if self.at(kind) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        Err(Diagnostic {
            kind: DiagnosticKind::SyntaxError,
            message: format!("expected {expected}, found {}", self.peek()),
            span: self.span(),
        })
    }

    fn expect(&mut self, kind: &TokenKind) -> PResult<Span> {
        if self.at(kind) {
            Ok(self.advance().span)
        } else {
            self.error(&kind.to_string())
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            TokenKind::Ident(name) => {
                let span = self.advance().span;
                Ok((name, span))
            }
            _ => self.error("identifier"),
        }
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek(), TokenKind::Ident(_))
    }

    fn at_word(&self, word: &str) -> bool {
        matches!(self.peek(), TokenKind::Ident(w) if w == word)
    }

    pub(crate) fn trailing_error(&self) -> Diagnostic {
        match self.error::<()>("end of input") {
            Err(d) => d,
            Ok(()) => unreachable!(),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        self.at(&TokenKind::Eof)
    }

    // ---- model files ---------------------------------------------------

    pub(crate) fn parse_model(&mut self) -> PResult<SourceModel> {
        let mut model = SourceModel::default();
        while !self.at_eof() {
            match self.peek().clone() {
                TokenKind::Const => {
                    let start = self.advance().span;
                    let (name, _) = self.ident()?;
                    self.expect(&TokenKind::Eq)?;
                    let value = self.expr()?;
                    self.eat(&TokenKind::Semi);
                    model.constants.push(ConstDecl {
                        name,
                        value,
                        span: start,
                    });
                }
                TokenKind::Type => {
                    let start = self.advance().span;
                    let (name, _) = self.ident()?;
                    self.expect(&TokenKind::Eq)?;
                    let set = self.set_expr()?;
                    self.eat(&TokenKind::Semi);
                    model.types.push(TypeDecl {
                        name,
                        set,
                        span: start,
                    });
                }
                TokenKind::Predicate => model.predicates.push(self.predicate()?),
                TokenKind::Globals => {
                    self.advance();
                    model.globals.extend(self.var_decls()?);
                    self.eat(&TokenKind::End);
                }
                TokenKind::Timers => {
                    self.advance();
                    let timers = self.timer_decls()?;
                    self.eat(&TokenKind::End);
                    implicit_module(&mut model, self.prev_span())
                        .timers
                        .extend(timers);
                }
                TokenKind::Module => model.modules.push(self.module()?),
                TokenKind::Instances => {
                    self.advance();
                    while self.at_ident() {
                        model.instances.push(self.instance_decl()?);
                        self.eat(&TokenKind::Semi);
                    }
                    self.expect(&TokenKind::End)?;
                }
                TokenKind::System => {
                    let span = self.advance().span;
                    self.expect(&TokenKind::Eq)?;
                    if model.system.is_some() {
                        return Err(Diagnostic {
                            kind: DiagnosticKind::DuplicateName,
                            message: "`system` declared more than once".into(),
                            span,
                        });
                    }
                    model.system = Some(self.composition()?);
                    self.eat(&TokenKind::Semi);
                }
                TokenKind::Properties => {
                    self.advance();
                    while self.at_ident() {
                        model.properties.push(self.property_in_block()?);
                    }
                    self.expect(&TokenKind::End)?;
                }
                TokenKind::Ident(ref w) if w == "event" => {
                    self.advance();
                    let event = self.event_decl()?;
                    implicit_module(&mut model, event.span).events.push(event);
                }
                TokenKind::Ident(_) if self.peek_at(1) == &TokenKind::Rename => {
                    let (name, span) = self.ident()?;
                    self.advance();
                    let expr = self.composition()?;
                    self.eat(&TokenKind::Semi);
                    model.aliases.push(AliasDecl { name, expr, span });
                }
                _ => return self.error("a top-level declaration"),
            }
        }
        Ok(model)
    }

    fn predicate(&mut self) -> PResult<PredicateDecl> {
        let span = self.expect(&TokenKind::Predicate)?;
        let (name, _) = self.ident()?;
        self.expect(&TokenKind::LParen)?;
        let mut params = Vec::new();
        loop {
            let (p, _) = self.ident()?;
            self.expect(&TokenKind::Colon)?;
            params.push((p, self.set_expr()?));
            if !self.eat(&TokenKind::Comma) {
                break;
            }
        }
        self.expect(&TokenKind::RParen)?;
        self.expect(&TokenKind::Eq)?;
        let body = self.expr()?;
        self.eat(&TokenKind::Semi);
        Ok(PredicateDecl {
            name,
            params,
            body,
            span,
        })
    }

    fn at_decl_start(&self) -> bool {
        self.at_ident() && self.peek_at(1) == &TokenKind::Colon
    }

    fn var_decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut out = Vec::new();
        while self.at_decl_start() {
            let (name, span) = self.ident()?;
            self.expect(&TokenKind::Colon)?;
            let ty = self.type_expr()?;
            let init = if self.eat(&TokenKind::Assign) {
                Some(self.init()?)
            } else {
                None
            };
            self.eat(&TokenKind::Semi);
            out.push(VarDecl {
                name,
                ty,
                init,
                span,
            });
        }
        Ok(out)
    }

    fn init(&mut self) -> PResult<Init> {
        if self.eat(&TokenKind::LBracket) {
            let mut items = vec![self.expr()?];
            while self.eat(&TokenKind::Comma) {
                items.push(self.expr()?);
            }
            self.expect(&TokenKind::RBracket)?;
            Ok(Init::List(items))
        } else {
            Ok(Init::Value(self.expr()?))
        }
    }

    fn timer_decls(&mut self) -> PResult<Vec<TimerDecl>> {
        let mut out = Vec::new();
        while self.at_decl_start() {
            let (name, span) = self.ident()?;
            self.expect(&TokenKind::Colon)?;
            let lower = self.additive()?;
            self.expect(&TokenKind::DotDot)?;
            let bound = self.additive()?;
            let init = if self.eat(&TokenKind::Assign) {
                Some(self.expr()?)
            } else {
                None
            };
            self.eat(&TokenKind::Semi);
            out.push(TimerDecl {
                name,
                lower,
                bound,
                init,
                span,
            });
        }
        Ok(out)
    }

    fn module(&mut self) -> PResult<ModuleDecl> {
        let span = self.expect(&TokenKind::Module)?;
        let (name, _) = self.ident()?;
        let mut module = ModuleDecl {
            name,
            interface: vec![],
            locals: vec![],
            timers: vec![],
            depends: vec![],
            events: vec![],
            span,
        };
        loop {
            match self.peek() {
                TokenKind::Interface => {
                    self.advance();
                    while matches!(
                        self.peek(),
                        TokenKind::In | TokenKind::Out | TokenKind::Share
                    ) {
                        let mode = self.mode()?;
                        let (name, span) = self.ident()?;
                        self.expect(&TokenKind::Colon)?;
                        let ty = self.type_expr()?;
                        self.eat(&TokenKind::Semi);
                        module.interface.push(InterfaceDecl {
                            mode,
                            name,
                            ty,
                            span,
                        });
                    }
                }
                TokenKind::Locals => {
                    self.advance();
                    module.locals.extend(self.var_decls()?);
                }
                TokenKind::Timers => {
                    self.advance();
                    module.timers.extend(self.timer_decls()?);
                }
                TokenKind::Depends => {
                    self.advance();
                    while self.at_decl_start() {
                        let (slot, span) = self.ident()?;
                        self.expect(&TokenKind::Colon)?;
                        let (module_name, _) = self.ident()?;
                        self.eat(&TokenKind::Semi);
                        module.depends.push(DependsDecl {
                            slot,
                            module: module_name,
                            span,
                        });
                    }
                }
                TokenKind::Events => {
                    self.advance();
                    while self.at_ident() {
                        if self.at_word("event") && matches!(self.peek_at(1), TokenKind::Ident(_)) {
                            self.advance();
                        }
                        module.events.push(self.event_decl()?);
                    }
                }
                TokenKind::End => {
                    self.advance();
                    return Ok(module);
                }
                _ => return self.error("a module section or `end`"),
            }
        }
    }

    fn mode(&mut self) -> PResult<Mode> {
        let mode = match self.peek() {
            TokenKind::In => Mode::In,
            TokenKind::Out => Mode::Out,
            TokenKind::Share => Mode::Share,
            _ => return self.error("`in`, `out` or `share`"),
        };
        self.advance();
        Ok(mode)
    }

    /// `( x : fair Tx ; y : Ty )` groups.
    fn index_groups(&mut self) -> PResult<(Vec<IndexDecl>, Vec<IndexDecl>)> {
        let mut fair = Vec::new();
        let mut demonic = Vec::new();
        self.expect(&TokenKind::LParen)?;
        loop {
            let mut names = vec![self.ident()?.0];
            while self.eat(&TokenKind::Comma) {
                names.push(self.ident()?.0);
            }
            self.expect(&TokenKind::Colon)?;
            let is_fair = self.eat(&TokenKind::Fair);
            let set = self.set_expr()?;
            let target = if is_fair { &mut fair } else { &mut demonic };
            target.extend(names.into_iter().map(|name| IndexDecl {
                name,
                set: set.clone(),
            }));
            if !self.eat(&TokenKind::Semi) {
                break;
            }
        }
        self.expect(&TokenKind::RParen)?;
        Ok((fair, demonic))
    }

    fn event_decl(&mut self) -> PResult<EventDecl> {
        let (name, span) = self.ident()?;
        let (fair_indices, demonic_indices) = if self.at(&TokenKind::LParen) {
            self.index_groups()?
        } else {
            (vec![], vec![])
        };
        let (mut lower, mut upper) = (None, None);
        if self.eat(&TokenKind::LBracket) {
            lower = Some(self.expr()?);
            self.expect(&TokenKind::Comma)?;
            if !self.eat(&TokenKind::Star) {
                upper = Some(self.expr()?);
            }
            self.expect(&TokenKind::RBracket)?;
        }
        let fairness = match self.peek() {
            TokenKind::Just => Fairness::Just,
            TokenKind::Compassionate => Fairness::Compassionate,
            TokenKind::Spontaneous => Fairness::Spontaneous,
            _ => Fairness::Spontaneous,
        };
        if matches!(
            self.peek(),
            TokenKind::Just | TokenKind::Compassionate | TokenKind::Spontaneous
        ) {
            self.advance();
        }
        let mut event = EventDecl {
            name,
            fair_indices,
            demonic_indices,
            lower,
            upper,
            fairness,
            guard: Expr::Bool(true),
            start: vec![],
            stop: vec![],
            action: vec![],
            sync: None,
            span,
        };
        loop {
            match self.peek() {
                TokenKind::When => {
                    self.advance();
                    event.guard = self.expr()?;
                }
                TokenKind::Start => {
                    self.advance();
                    event.start.extend(self.name_list()?);
                }
                TokenKind::Stop => {
                    self.advance();
                    event.stop.extend(self.name_list()?);
                }
                TokenKind::Sync => {
                    let span = self.advance().span;
                    let mut members = Vec::new();
                    loop {
                        let (slot, sspan) = self.ident()?;
                        self.expect(&TokenKind::Dot)?;
                        let (ev, _) = self.ident()?;
                        members.push((slot, ev, sspan));
                        if !self.eat(&TokenKind::Comma) {
                            break;
                        }
                    }
                    self.expect(&TokenKind::As)?;
                    let (compound, _) = self.ident()?;
                    event.sync = Some(SyncClause {
                        members,
                        compound,
                        span,
                    });
                }
                TokenKind::Do => {
                    self.advance();
                    event.action = self.stmts()?;
                    self.expect(&TokenKind::End)?;
                    return Ok(event);
                }
                _ => return self.error("`when`, `start`, `stop`, `sync` or `do`"),
            }
        }
    }

    fn name_list(&mut self) -> PResult<Vec<String>> {
        let mut names = vec![self.ident()?.0];
        while self.eat(&TokenKind::Comma) {
            names.push(self.ident()?.0);
        }
        Ok(names)
    }

    fn stmts(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.stmt()?];
        while self.eat(&TokenKind::Comma) {
            out.push(self.stmt()?);
        }
        Ok(out.into_iter().filter(|s| *s != Stmt::Skip).collect())
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        match self.peek() {
            TokenKind::Skip => {
                self.advance();
                Ok(Stmt::Skip)
            }
            TokenKind::If => {
                let span = self.advance().span;
                let cond = self.expr()?;
                self.expect(&TokenKind::Then)?;
                let mut branches = vec![(cond, self.stmts()?)];
                let mut otherwise = Vec::new();
                loop {
                    if self.eat(&TokenKind::Elseif) {
                        let c = self.expr()?;
                        self.expect(&TokenKind::Then)?;
                        branches.push((c, self.stmts()?));
                    } else if self.eat(&TokenKind::Else) {
                        otherwise = self.stmts()?;
                        self.expect(&TokenKind::Fi)?;
                        break;
                    } else {
                        self.expect(&TokenKind::Fi)?;
                        break;
                    }
                }
                Ok(Stmt::If {
                    branches,
                    otherwise,
                    span,
                })
            }
            TokenKind::Ident(_) => {
                let (var, span) = self.ident()?;
                if self.eat(&TokenKind::Dot) {
                    let (method, mspan) = self.ident()?;
                    let target = LValue {
                        var,
                        index: None,
                        span,
                    };
                    self.expect(&TokenKind::LParen)?;
                    return match method.as_str() {
                        "Enqueue" => {
                            let value = self.expr()?;
                            self.expect(&TokenKind::RParen)?;
                            Ok(Stmt::Enqueue { target, value })
                        }
                        "Dequeue" => {
                            self.expect(&TokenKind::RParen)?;
                            Ok(Stmt::Dequeue { target })
                        }
                        other => Err(Diagnostic {
                            kind: DiagnosticKind::SyntaxError,
                            message: format!("unknown queue operation `{other}`"),
                            span: mspan,
                        }),
                    };
                }
                let index = if self.eat(&TokenKind::LBracket) {
                    let i = self.expr()?;
                    self.expect(&TokenKind::RBracket)?;
                    Some(i)
                } else {
                    None
                };
                let target = LValue { var, index, span };
                if self.eat(&TokenKind::Assign) {
                    Ok(Stmt::Assign {
                        target,
                        value: self.expr()?,
                    })
                } else if self.eat(&TokenKind::ColonColon) {
                    Ok(Stmt::Choose {
                        target,
                        set: self.set_expr()?,
                    })
                } else {
                    self.error("`:=` or `::`")
                }
            }
            _ => self.error("a statement"),
        }
    }

    fn instance_decl(&mut self) -> PResult<InstanceDecl> {
        let (name, span) = self.ident()?;
        self.expect(&TokenKind::Eq)?;
        let mut inst = self.instance_template()?;
        inst.name = name;
        inst.span = span;
        Ok(inst)
    }

    /// `Module(bindings) [with slot := inst, ... end]` without the name.
    fn instance_template(&mut self) -> PResult<InstanceDecl> {
        let (module, span) = self.ident()?;
        let mut bindings = Vec::new();
        if self.eat(&TokenKind::LParen) {
            if !self.at(&TokenKind::RParen) {
                loop {
                    let bspan = self.span();
                    let mode = self.mode()?;
                    let value = self.expr()?;
                    bindings.push(Binding {
                        mode,
                        value,
                        span: bspan,
                    });
                    if !self.eat(&TokenKind::Comma) {
                        break;
                    }
                }
            }
            self.expect(&TokenKind::RParen)?;
        }
        let mut with = Vec::new();
        if self.eat(&TokenKind::With) {
            while self.at_ident() {
                let (slot, _) = self.ident()?;
                self.expect(&TokenKind::Assign)?;
                let (target, _) = self.ident()?;
                with.push((slot, target));
                if !self.eat(&TokenKind::Comma) {
                    break;
                }
            }
            self.expect(&TokenKind::End)?;
        }
        Ok(InstanceDecl {
            name: String::new(),
            module,
            bindings,
            with,
            span,
        })
    }

    fn composition(&mut self) -> PResult<CompositionExpr> {
        let mut parts = vec![self.composition_term()?];
        while self.at(&TokenKind::OrOr) && !self.at_iterated() {
            self.advance();
            parts.push(self.composition_term()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            CompositionExpr::Parallel(parts)
        })
    }

    fn at_iterated(&self) -> bool {
        self.at(&TokenKind::OrOr)
            && matches!(self.peek_at(1), TokenKind::Ident(_))
            && self.peek_at(2) == &TokenKind::Colon
    }

    fn composition_term(&mut self) -> PResult<CompositionExpr> {
        if self.at_iterated() {
            self.advance();
            let (var, _) = self.ident()?;
            self.expect(&TokenKind::Colon)?;
            let set = self.set_expr()?;
            self.expect(&TokenKind::At)?;
            let template = self.instance_template()?;
            return Ok(CompositionExpr::Iterated {
                var,
                set,
                template: Box::new(template),
            });
        }
        if self.eat(&TokenKind::LParen) {
            let inner = self.composition()?;
            self.expect(&TokenKind::RParen)?;
            return Ok(inner);
        }
        let (name, span) = self.ident()?;
        Ok(CompositionExpr::Instance(name, span))
    }

    fn property_in_block(&mut self) -> PResult<PropertySource> {
        let (name, _) = self.ident()?;
        let params = if self.at(&TokenKind::LParen) {
            let (fair, demonic) = self.index_groups()?;
            fair.into_iter().chain(demonic).collect()
        } else {
            vec![]
        };
        self.expect(&TokenKind::Colon)?;
        let first = self.span();
        let mut depth = 0i32;
        while !(depth == 0 && self.at(&TokenKind::Semi)) {
            match self.peek() {
                TokenKind::Eof | TokenKind::End if depth == 0 => {
                    return self.error("`;` terminating the property")
                }
                TokenKind::Eof => return self.error("`)`"),
                TokenKind::LParen | TokenKind::LBracket => depth += 1,
                TokenKind::RParen | TokenKind::RBracket => depth -= 1,
                _ => {}
            }
            self.advance();
        }
        let end = self.span().start;
        self.advance();
        Ok(PropertySource {
            name,
            params,
            text: self.source[first.start..end].trim_end().to_string(),
            span: first,
        })
    }

    /// One `name [(params)] : formula` line of a sidecar property file.
    pub(crate) fn property_line(&mut self) -> PResult<PropertySource> {
        let (name, _) = self.ident()?;
        let params = if self.at(&TokenKind::LParen) {
            let (fair, demonic) = self.index_groups()?;
            fair.into_iter().chain(demonic).collect()
        } else {
            vec![]
        };
        self.expect(&TokenKind::Colon)?;
        let first = self.span();
        Ok(PropertySource {
            name,
            params,
            text: self.source[first.start..].trim().trim_end_matches(';').to_string(),
            span: first,
        })
    }

    // ---- types and sets ------------------------------------------------

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        match self.peek() {
            TokenKind::Array => {
                self.advance();
                self.expect(&TokenKind::LBracket)?;
                let index = self.set_expr()?;
                self.expect(&TokenKind::RBracket)?;
                self.expect(&TokenKind::Of)?;
                let elem = self.type_expr()?;
                Ok(TypeExpr::Array {
                    index,
                    elem: Box::new(elem),
                })
            }
            TokenKind::Queue => {
                self.advance();
                self.expect(&TokenKind::LBracket)?;
                let elem = self.type_expr()?;
                self.expect(&TokenKind::RBracket)?;
                self.expect(&TokenKind::LParen)?;
                let capacity = self.expr()?;
                self.expect(&TokenKind::RParen)?;
                Ok(TypeExpr::Queue {
                    elem: Box::new(elem),
                    capacity,
                })
            }
            _ => Ok(TypeExpr::Set(self.set_expr()?)),
        }
    }

    pub(crate) fn set_expr(&mut self) -> PResult<SetExpr> {
        if self.eat(&TokenKind::Bool) {
            return Ok(SetExpr::Bool);
        }
        if self.eat(&TokenKind::LBrace) {
            let mut items = Vec::new();
            if !self.at(&TokenKind::RBrace) {
                items.push(self.additive()?);
                while self.eat(&TokenKind::Comma) {
                    items.push(self.additive()?);
                }
            }
            self.expect(&TokenKind::RBrace)?;
            return Ok(SetExpr::Literal(items));
        }
        let start = self.span();
        let lo = self.additive()?;
        if self.eat(&TokenKind::DotDot) {
            let hi = self.additive()?;
            return Ok(SetExpr::Range(Box::new(lo), Box::new(hi)));
        }
        match lo {
            Expr::Name {
                name,
                primed: false,
                span,
            } => Ok(SetExpr::Named(name, span)),
            _ => Err(Diagnostic {
                kind: DiagnosticKind::SyntaxError,
                message: "expected a set: a type name, `lo .. hi`, `{...}` or `bool`".into(),
                span: start,
            }),
        }
    }

    // ---- expressions ---------------------------------------------------

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn additive(&mut self) -> PResult<Expr> {
        self.binary(6)
    }

    fn peek_binop(&self) -> Option<(u8, Option<BinOp>)> {
        let op = match self.peek() {
            TokenKind::FatArrow | TokenKind::Arrow => BinOp::Implies,
            TokenKind::OrOr => BinOp::Or,
            TokenKind::AndAnd => BinOp::And,
            TokenKind::Eq | TokenKind::EqEq => BinOp::Eq,
            TokenKind::NotEq => BinOp::Ne,
            TokenKind::Lt => BinOp::Lt,
            TokenKind::Le => BinOp::Le,
            TokenKind::Gt => BinOp::Gt,
            TokenKind::Ge => BinOp::Ge,
            TokenKind::Plus => BinOp::Add,
            TokenKind::Minus => BinOp::Sub,
            TokenKind::Star => BinOp::Mul,
            TokenKind::Slash => BinOp::Div,
            TokenKind::Percent => BinOp::Mod,
            TokenKind::Ident(w) if w == "U" && self.mode == ExprMode::Property => {
                return Some((4, None))
            }
            _ => return None,
        };
        Some((op.precedence(), Some(op)))
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some((prec, op)) = self.peek_binop() {
            if prec < min_prec {
                break;
            }
            self.advance();
            // `=>` and `U` associate to the right, the rest to the left.
            let right_assoc = matches!(op, Some(BinOp::Implies) | None);
            let rhs = self.binary(if right_assoc { prec } else { prec + 1 })?;
            lhs = match op {
                Some(op) => Expr::binary(op, lhs, rhs),
                None => Expr::Until {
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            };
            if matches!(op, Some(o) if o.precedence() == 5) && self.peek_binop().map(|p| p.0) == Some(5) {
                return self.error("parentheses around chained comparison");
            }
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek() {
            TokenKind::Bang => {
                self.advance();
                Ok(Expr::not(self.unary()?))
            }
            TokenKind::Minus => {
                self.advance();
                Ok(Expr::Unary {
                    op: UnOp::Neg,
                    arg: Box::new(self.unary()?),
                })
            }
            TokenKind::Box | TokenKind::Diamond if self.mode == ExprMode::Property => {
                let op = if self.advance().kind == TokenKind::Box {
                    TemporalOp::Always
                } else {
                    TemporalOp::Eventually
                };
                Ok(Expr::Temporal {
                    op,
                    arg: Box::new(self.unary()?),
                })
            }
            TokenKind::Forall | TokenKind::Exists if self.mode == ExprMode::Property => {
                let forall = self.advance().kind == TokenKind::Forall;
                let vars = self.name_list()?;
                self.expect(&TokenKind::Colon)?;
                let set = self.set_expr()?;
                self.expect(&TokenKind::At)?;
                let body = self.expr()?;
                Ok(Expr::Quant {
                    forall,
                    vars,
                    set,
                    body: Box::new(body),
                })
            }
            _ => self.postfix(),
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut expr = self.primary()?;
        loop {
            if self.at(&TokenKind::LBracket) {
                self.advance();
                let index = self.expr()?;
                self.expect(&TokenKind::RBracket)?;
                expr = Expr::Index {
                    base: Box::new(expr),
                    index: Box::new(index),
                };
            } else if self.at(&TokenKind::Dot) && self.at_method(1) {
                self.advance();
                let (m, _) = self.ident()?;
                self.expect(&TokenKind::LParen)?;
                self.expect(&TokenKind::RParen)?;
                let method = if m == "Count" {
                    QueueMethod::Count
                } else {
                    QueueMethod::First
                };
                expr = Expr::Method {
                    target: Box::new(expr),
                    method,
                };
            } else {
                return Ok(expr);
            }
        }
    }

    fn at_method(&self, ahead: usize) -> bool {
        matches!(self.peek_at(ahead), TokenKind::Ident(m) if m == "Count" || m == "First")
            && self.peek_at(ahead + 1) == &TokenKind::LParen
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek().clone() {
            TokenKind::Int(n) => {
                self.advance();
                Ok(Expr::Int(n))
            }
            TokenKind::True => {
                self.advance();
                Ok(Expr::Bool(true))
            }
            TokenKind::False => {
                self.advance();
                Ok(Expr::Bool(false))
            }
            TokenKind::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(&TokenKind::RParen)?;
                Ok(e)
            }
            TokenKind::AndAnd | TokenKind::OrOr => {
                let conjunction = self.advance().kind == TokenKind::AndAnd;
                let (var, _) = self.ident()?;
                self.expect(&TokenKind::Colon)?;
                let set = self.set_expr()?;
                self.expect(&TokenKind::At)?;
                let body = self.expr()?;
                Ok(Expr::Fold {
                    conjunction,
                    var,
                    set,
                    body: Box::new(body),
                })
            }
            TokenKind::Call => {
                self.advance();
                self.expect(&TokenKind::LParen)?;
                let (name, _) = self.ident()?;
                let mut args = Vec::new();
                while self.eat(&TokenKind::Comma) {
                    args.push(self.expr()?);
                }
                self.expect(&TokenKind::RParen)?;
                Ok(Expr::Apply {
                    name,
                    args,
                    explicit_call: true,
                    span,
                })
            }
            TokenKind::Mono if self.mode == ExprMode::Property => {
                self.advance();
                self.expect(&TokenKind::LParen)?;
                let timer = self.qualified_name()?;
                self.expect(&TokenKind::RParen)?;
                Ok(Expr::Mono { timer, span })
            }
            TokenKind::Ident(_) => {
                let name = self.qualified_name()?;
                let primed = self.eat(&TokenKind::Prime);
                if !primed && self.at(&TokenKind::LParen) {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.at(&TokenKind::RParen) {
                        args.push(self.expr()?);
                        while self.eat(&TokenKind::Comma) {
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(&TokenKind::RParen)?;
                    return Ok(Expr::Apply {
                        name,
                        args,
                        explicit_call: false,
                        span,
                    });
                }
                Ok(Expr::Name { name, primed, span })
            }
            _ => self.error("an expression"),
        }
    }

    /// `a.b.c`, stopping before a queue method.
    fn qualified_name(&mut self) -> PResult<String> {
        let (mut name, _) = self.ident()?;
        while self.at(&TokenKind::Dot)
            && matches!(self.peek_at(1), TokenKind::Ident(_))
            && !self.at_method(1)
        {
            self.advance();
            let (part, _) = self.ident()?;
            name.push('.');
            name.push_str(&part);
        }
        Ok(name)
    }
}

fn implicit_module(model: &mut SourceModel, span: Span) -> &mut ModuleDecl {
    if let Some(i) = model.modules.iter().position(|m| m.name == IMPLICIT_MODULE) {
        return &mut model.modules[i];
    }
    model.modules.push(ModuleDecl {
        name: IMPLICIT_MODULE.to_string(),
        interface: vec![],
        locals: vec![],
        timers: vec![],
        depends: vec![],
        events: vec![],
        span,
    });
    model.modules.last_mut().unwrap()
}

pub(crate) fn is_implicit_module(name: &str) -> bool {
    name == IMPLICIT_MODULE
}
