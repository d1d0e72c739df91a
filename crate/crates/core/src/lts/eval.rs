//! Expression evaluation over configurations.

use thiserror::Error;

use crate::elaborator::{FExpr, FlatModel, VarType};
use crate::syntax::BinOp;

/// A run-time failure while evaluating a guard or action.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("index {value} is outside the index set of `{var}`")]
    IndexOutOfRange { var: String, value: i32 },
    #[error("`{var}.First()` or `{var}.Dequeue()` on an empty queue")]
    EmptyQueue { var: String },
    #[error("`{var}.Enqueue` on a full queue")]
    QueueFull { var: String },
    #[error("value {value} is outside the type of `{var}`")]
    OutOfType { var: String, value: i32 },
    #[error("`{var}` element {value} is written twice in one step")]
    DoubleWrite { var: String, value: i32 },
}

pub fn binop(op: BinOp, a: i32, b: i32) -> Result<i32, EvalError> {
    use BinOp::*;
    Ok(match op {
        Implies => (a == 0 || b != 0) as i32,
        Or => (a != 0 || b != 0) as i32,
        And => (a != 0 && b != 0) as i32,
        Eq => (a == b) as i32,
        Ne => (a != b) as i32,
        Lt => (a < b) as i32,
        Le => (a <= b) as i32,
        Gt => (a > b) as i32,
        Ge => (a >= b) as i32,
        Add => a.checked_add(b).ok_or(EvalError::Overflow)?,
        Sub => a.checked_sub(b).ok_or(EvalError::Overflow)?,
        Mul => a.checked_mul(b).ok_or(EvalError::Overflow)?,
        Div if b == 0 => return Err(EvalError::DivisionByZero),
        Mod if b == 0 => return Err(EvalError::DivisionByZero),
        Div => a.checked_div_euclid(b).ok_or(EvalError::Overflow)?,
        Mod => a.checked_rem_euclid(b).ok_or(EvalError::Overflow)?,
    })
}

/// Where an expression reads from.
pub struct Env<'a> {
    pub model: &'a FlatModel,
    /// Unprimed variables.
    pub pre: &'a [i32],
    /// Primed variables; the post-state being built.
    pub post: &'a [i32],
    pub timers: &'a [i32],
    pub locals: &'a mut [i32],
}

impl Env<'_> {
    fn slot(&self, var: u32, primed: bool) -> (&[i32], usize) {
        let v = &self.model.vars[var as usize];
        (if primed { self.post } else { self.pre }, v.offset)
    }

    /// Slot offset of `index` within array `var`.
    pub fn elem_pos(model: &FlatModel, var: u32, index: i32) -> Result<usize, EvalError> {
        let v = &model.vars[var as usize];
        let VarType::Array { index: dom, .. } = &v.ty else {
            unreachable!("element access on a non-array")
        };
        dom.position(index).ok_or_else(|| EvalError::IndexOutOfRange {
            var: v.name.clone(),
            value: index,
        })
    }

    pub fn eval(&mut self, e: &FExpr) -> Result<i32, EvalError> {
        Ok(match e {
            FExpr::Const(v) => *v,
            FExpr::Var { var, primed } => {
                let (buf, off) = self.slot(*var, *primed);
                buf[off]
            }
            FExpr::Elem { var, index, primed } => {
                let i = self.eval(index)?;
                let pos = Self::elem_pos(self.model, *var, i)?;
                let (buf, off) = self.slot(*var, *primed);
                buf[off + pos]
            }
            FExpr::QueueLen { var, primed } => {
                let (buf, off) = self.slot(*var, *primed);
                buf[off]
            }
            FExpr::QueueFirst { var, primed } => {
                let (buf, off) = self.slot(*var, *primed);
                if buf[off] == 0 {
                    return Err(EvalError::EmptyQueue {
                        var: self.model.vars[*var as usize].name.clone(),
                    });
                }
                buf[off + 1]
            }
            FExpr::Timer(t) => self.timers[*t as usize],
            FExpr::Local(s) => self.locals[*s as usize],
            FExpr::Not(a) => (self.eval(a)? == 0) as i32,
            FExpr::Neg(a) => self.eval(a)?.checked_neg().ok_or(EvalError::Overflow)?,
            FExpr::Bin(op, a, b) => {
                let x = self.eval(a)?;
                match (op, x != 0) {
                    (BinOp::And, false) => 0,
                    (BinOp::Or, true) => 1,
                    (BinOp::Implies, false) => 1,
                    _ => {
                        let y = self.eval(b)?;
                        binop(*op, x, y)?
                    }
                }
            }
            FExpr::Fold {
                conj,
                slot,
                domain,
                body,
            } => {
                let saved = self.locals[*slot as usize];
                let mut acc = *conj;
                for &v in domain {
                    self.locals[*slot as usize] = v;
                    let b = self.eval(body)? != 0;
                    if b != *conj {
                        acc = b;
                        break;
                    }
                }
                self.locals[*slot as usize] = saved;
                acc as i32
            }
        })
    }
}
