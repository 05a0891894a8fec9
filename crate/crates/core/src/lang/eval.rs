//! Evaluation of resolved expressions over a transition.

use super::ast::BinOp;
use super::model::{Expr, Model, TIME_CUR};
use crate::kernel::judge;
use crate::kernel::state::{State, Transition};
use crate::kernel::value::{ObjId, Value};

/// Nesting limit for `inv2` evaluation.
pub const MAX_INV2_DEPTH: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("integer overflow")]
    Overflow,
    #[error("`{0}` does not refer to an object with that field")]
    BadRef(String),
    #[error("timer stamp read before it was recorded")]
    UnknownStamp,
    #[error("invariant evaluation nested more than {MAX_INV2_DEPTH} levels deep")]
    Depth,
}

#[derive(Clone, Copy)]
pub struct EvalCtx<'a> {
    pub model: &'a Model,
    pub tr: Transition<'a>,
    /// Object bound to `self`; for thread code, the thread.
    pub this: ObjId,
    /// Thread-local timer stamps, indexed by stamp number.
    pub stamps: &'a [Option<i64>],
    pub depth: u32,
}

impl<'a> EvalCtx<'a> {
    pub fn new(model: &'a Model, tr: Transition<'a>, this: ObjId) -> Self {
        EvalCtx {
            model,
            tr,
            this,
            stamps: &[],
            depth: 0,
        }
    }

    pub fn with_stamps(mut self, stamps: &'a [Option<i64>]) -> Self {
        self.stamps = stamps;
        self
    }

    pub fn eval(&self, e: &Expr) -> Result<Value, EvalError> {
        let mut vars = Vec::new();
        self.ev(e, &mut vars, false)
    }

    pub fn eval_bool(&self, e: &Expr) -> Result<bool, EvalError> {
        Ok(self.eval(e)?.as_bool())
    }

    fn state(&self, old: bool) -> &'a State {
        if old {
            self.tr.pre
        } else {
            self.tr.post
        }
    }

    fn now(&self, old: bool) -> i64 {
        let m = self.model;
        self.state(old).slot(m.slot(m.time, TIME_CUR)).as_int()
    }

    fn obj(&self, e: &Expr, vars: &mut Vec<ObjId>, old: bool) -> Result<ObjId, EvalError> {
        Ok(self.ev(e, vars, old)?.as_ref())
    }

    fn int(&self, e: &Expr, vars: &mut Vec<ObjId>, old: bool) -> Result<i64, EvalError> {
        Ok(self.ev(e, vars, old)?.as_int())
    }

    fn boolean(&self, e: &Expr, vars: &mut Vec<ObjId>, old: bool) -> Result<bool, EvalError> {
        Ok(self.ev(e, vars, old)?.as_bool())
    }

    fn ev(&self, e: &Expr, vars: &mut Vec<ObjId>, old: bool) -> Result<Value, EvalError> {
        let m = self.model;
        Ok(match e {
            Expr::Int(n) => Value::Int(*n),
            Expr::Bool(b) => Value::Bool(*b),
            Expr::SelfRef => Value::Ref(self.this),
            Expr::Obj(o) => Value::Ref(*o),
            Expr::Var(k) => Value::Ref(vars[*k]),
            Expr::Actor => Value::Ref(self.tr.actor),
            Expr::Field(base, sel) => {
                let o = self.obj(base, vars, old)?;
                if !m.is_of_type(o, sel.ty) {
                    return Err(EvalError::BadRef(m.name_of(o).to_string()));
                }
                self.state(old).slot(m.slot(o, sel.field))
            }
            Expr::Index(map, key) => {
                let s = self.ev(map, vars, old)?.as_set();
                let k = self.obj(key, vars, old)?;
                Value::Bool(s.contains(k))
            }
            Expr::Old(a) => self.ev(a, vars, true)?,
            Expr::Now => Value::Int(self.now(old)),
            Expr::Delta => Value::Int(
                self.now(false)
                    .checked_sub(self.now(true))
                    .ok_or(EvalError::Overflow)?,
            ),
            Expr::Inv2(a) => {
                let o = self.obj(a, vars, old)?;
                if self.depth >= MAX_INV2_DEPTH {
                    return Err(EvalError::Depth);
                }
                Value::Bool(judge::object_inv2_at(m, self.tr, o, self.depth + 1)?)
            }
            Expr::Mine(a) => {
                let o = self.obj(a, vars, old)?;
                let s = self.state(old);
                Value::Bool(!o.is_env() && s.owner(o) == self.this && s.is_closed(o))
            }
            Expr::Closed(a) => {
                let o = self.obj(a, vars, old)?;
                Value::Bool(!o.is_env() && self.state(old).is_closed(o))
            }
            Expr::Owner(a) => {
                let o = self.obj(a, vars, old)?;
                Value::Ref(self.state(old).owner(o))
            }
            Expr::IsThread(a) => {
                let o = self.obj(a, vars, old)?;
                Value::Bool(m.is_thread(o))
            }
            Expr::Elapsed(k) => {
                let stamp = self
                    .stamps
                    .get(*k)
                    .copied()
                    .flatten()
                    .ok_or(EvalError::UnknownStamp)?;
                Value::Int(self.now(old).checked_sub(stamp).ok_or(EvalError::Overflow)?)
            }
            Expr::Not(a) => Value::Bool(!self.boolean(a, vars, old)?),
            Expr::Neg(a) => Value::Int(
                self.int(a, vars, old)?
                    .checked_neg()
                    .ok_or(EvalError::Overflow)?,
            ),
            Expr::Bin(op, a, b) => self.binary(*op, a, b, vars, old)?,
            Expr::Cond(c, a, b) => {
                if self.boolean(c, vars, old)? {
                    self.ev(a, vars, old)?
                } else {
                    self.ev(b, vars, old)?
                }
            }
            Expr::Forall(body) => {
                for o in m.object_ids() {
                    vars.push(o);
                    let r = self.boolean(body, vars, old);
                    vars.pop();
                    if !r? {
                        return Ok(Value::Bool(false));
                    }
                }
                Value::Bool(true)
            }
        })
    }

    fn binary(
        &self,
        op: BinOp,
        a: &Expr,
        b: &Expr,
        vars: &mut Vec<ObjId>,
        old: bool,
    ) -> Result<Value, EvalError> {
        let arith = |f: fn(i64, i64) -> Option<i64>, s: &Self, vars: &mut Vec<ObjId>| {
            let x = s.int(a, vars, old)?;
            let y = s.int(b, vars, old)?;
            f(x, y).map(Value::Int).ok_or(EvalError::Overflow)
        };
        let cmp = |f: fn(&i64, &i64) -> bool, s: &Self, vars: &mut Vec<ObjId>| {
            let x = s.int(a, vars, old)?;
            let y = s.int(b, vars, old)?;
            Ok(Value::Bool(f(&x, &y)))
        };
        match op {
            BinOp::Add => arith(i64::checked_add, self, vars),
            BinOp::Sub => arith(i64::checked_sub, self, vars),
            BinOp::Mul => arith(i64::checked_mul, self, vars),
            BinOp::Lt => cmp(i64::lt, self, vars),
            BinOp::Le => cmp(i64::le, self, vars),
            BinOp::Gt => cmp(i64::gt, self, vars),
            BinOp::Ge => cmp(i64::ge, self, vars),
            BinOp::Eq => Ok(Value::Bool(self.ev(a, vars, old)? == self.ev(b, vars, old)?)),
            BinOp::Ne => Ok(Value::Bool(self.ev(a, vars, old)? != self.ev(b, vars, old)?)),
            BinOp::And => Ok(Value::Bool(
                self.boolean(a, vars, old)? && self.boolean(b, vars, old)?,
            )),
            BinOp::Or => Ok(Value::Bool(
                self.boolean(a, vars, old)? || self.boolean(b, vars, old)?,
            )),
            BinOp::Implies => Ok(Value::Bool(
                !self.boolean(a, vars, old)? || self.boolean(b, vars, old)?,
            )),
        }
    }
}

/// Evaluates `e` over `tr` with `self` bound to `this`.
pub fn eval_expr(model: &Model, e: &Expr, tr: Transition<'_>, this: ObjId) -> Result<Value, EvalError> {
    EvalCtx::new(model, tr, this).eval(e)
}
