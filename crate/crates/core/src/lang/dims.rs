//! Infers which integer fields hold absolute times and whether the model
//! is invariant under shifting all absolute times by a common constant.
//!
//! Absolute times start at `time.cur` and the `t` fields of the built-in
//! primitives, then spread through equalities, comparisons and
//! assignments. Differences of two times are plain scalars. A model stays
//! shift-invariant as long as no time is compared with, assigned from, or
//! multiplied by a scalar.

use std::collections::BTreeSet;

use super::ast::BinOp;
use super::model::*;

/// Degree of an expression in absolute time: 0 for scalars (including
/// differences of two times), 1 for absolute times. Other degrees only
/// arise inside sums and must cancel before the value is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dim {
    Lin(i64),
    /// Not an integer (booleans, references, sets).
    Other,
}

use Dim::{Lin, Other};

const SCALAR: Dim = Lin(0);
const TIME: Dim = Lin(1);

struct Infer<'a> {
    fields: BTreeSet<FieldSel>,
    invariant: bool,
    changed: bool,
    model: &'a Model,
}

pub fn infer_time_dims(model: &Model) -> TimeDims {
    let mut fields = BTreeSet::new();
    fields.insert(FieldSel {
        ty: model.time_type,
        field: TIME_CUR,
    });
    fields.insert(FieldSel {
        ty: model.deadline_type,
        field: PRIM_T,
    });
    fields.insert(FieldSel {
        ty: model.timer_type,
        field: PRIM_T,
    });
    let mut inf = Infer {
        fields,
        invariant: true,
        changed: true,
        model,
    };
    while inf.changed {
        inf.changed = false;
        inf.invariant = true;
        inf.visit_model();
    }
    TimeDims {
        time_fields: inf.fields,
        shift_invariant: inf.invariant,
    }
}

impl Infer<'_> {
    fn visit_model(&mut self) {
        let m = self.model;
        for (ty, t) in m.types.iter().enumerate() {
            for c in &t.clauses {
                self.dim(&c.expr);
            }
            for (f, e) in &t.dynamics {
                let target = FieldSel { ty, field: *f };
                self.assign(target, e);
            }
        }
        for p in &m.programs {
            for ins in &p.instrs {
                match &ins.kind {
                    InstrKind::Atomic(actions) => {
                        for a in actions {
                            self.action(a);
                        }
                    }
                    InstrKind::Seq(a) => self.action(a),
                    InstrKind::LoopHead { invariant, .. } => {
                        self.dim(invariant);
                    }
                    _ => {}
                }
            }
        }
    }

    fn action(&mut self, a: &Action) {
        match &a.kind {
            ActionKind::Assign { base, sel, value } => {
                self.dim(base);
                if self.model.field_decl(*sel).sort == Sort::Int {
                    self.assign(*sel, value);
                } else {
                    self.dim(value);
                }
            }
            ActionKind::Assume(e) | ActionKind::Assert(e) => {
                self.dim(e);
            }
            ActionKind::Reset { .. } | ActionKind::Record(_) => {}
        }
    }

    fn mark(&mut self, sel: FieldSel) {
        if self.fields.insert(sel) {
            self.changed = true;
        }
    }

    fn assign(&mut self, target: FieldSel, value: &Expr) {
        let vd = self.dim(value);
        let td = if self.fields.contains(&target) { TIME } else { SCALAR };
        match (td, vd) {
            (TIME, SCALAR) => match field_read(value) {
                Some(sel) => self.mark(sel),
                None => self.invariant = false,
            },
            (SCALAR, TIME) => self.mark(target),
            (Lin(_), Lin(k)) if k != 0 && k != 1 => self.invariant = false,
            _ => {}
        }
    }

    /// Unifies the two sides of a comparison, equality or conditional.
    fn unify(&mut self, a: &Expr, da: Dim, b: &Expr, db: Dim) {
        let (Lin(ka), Lin(kb)) = (da, db) else { return };
        if ka == kb {
            return;
        }
        let fix = match (ka, kb) {
            (1, 0) => field_read(b),
            (0, 1) => field_read(a),
            _ => None,
        };
        match fix {
            Some(sel) => self.mark(sel),
            None => self.invariant = false,
        }
    }

    fn dim(&mut self, e: &Expr) -> Dim {
        match e {
            Expr::Int(_) | Expr::Delta | Expr::Elapsed(_) => SCALAR,
            Expr::Now => TIME,
            Expr::Field(base, sel) => {
                self.dim(base);
                match self.model.field_decl(*sel).sort {
                    Sort::Int if self.fields.contains(sel) => TIME,
                    Sort::Int => SCALAR,
                    _ => Other,
                }
            }
            Expr::Old(a) => self.dim(a),
            Expr::Neg(a) => match self.dim(a) {
                Lin(k) => Lin(-k),
                Other => Other,
            },
            Expr::Cond(c, a, b) => {
                self.dim(c);
                let da = self.dim(a);
                let db = self.dim(b);
                self.unify(a, da, b, db);
                match (da, db) {
                    (Lin(ka), Lin(kb)) => Lin(ka.max(kb)),
                    _ => da,
                }
            }
            Expr::Bin(op, a, b) => {
                let da = self.dim(a);
                let db = self.dim(b);
                let (ka, kb) = match (da, db) {
                    (Lin(ka), Lin(kb)) => (ka, kb),
                    _ => (0, 0),
                };
                match op {
                    BinOp::Add => Lin(ka + kb),
                    BinOp::Sub => Lin(ka - kb),
                    BinOp::Mul => {
                        if ka != 0 || kb != 0 {
                            self.invariant = false;
                        }
                        SCALAR
                    }
                    BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        self.unify(a, da, b, db);
                        Other
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies => Other,
                }
            }
            Expr::Index(a, b) => {
                self.dim(a);
                self.dim(b);
                Other
            }
            Expr::Inv2(a)
            | Expr::Mine(a)
            | Expr::Closed(a)
            | Expr::Owner(a)
            | Expr::IsThread(a)
            | Expr::Not(a)
            | Expr::Forall(a) => {
                self.dim(a);
                Other
            }
            Expr::Bool(_) | Expr::SelfRef | Expr::Obj(_) | Expr::Var(_) | Expr::Actor => Other,
        }
    }
}

/// The field read by `e`, looking through `old`.
fn field_read(e: &Expr) -> Option<FieldSel> {
    match e {
        Expr::Field(_, sel) => Some(*sel),
        Expr::Old(a) => field_read(a),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use crate::lang::parse_model;

    #[test]
    fn shadow_field_becomes_time_valued() {
        let m = parse_model(
            "type C { volatile ghost int shadow; objref<Deadline> d; invariant shadow == d.t; }\n\
             object d : Deadline { }\nobject c : C { d = d; }",
        )
        .unwrap();
        let c_ty = m.type_by_name("C").unwrap();
        assert!(m.dims.time_fields.iter().any(|s| s.ty == c_ty && s.field == 0));
        assert!(m.dims.shift_invariant);
    }

    #[test]
    fn literal_comparison_breaks_shift_invariance() {
        let m = parse_model("object d : Deadline { }\nthread w { assume d.t < 20; }").unwrap();
        assert!(!m.dims.shift_invariant);
        let m = parse_model("object d : Deadline { }\nthread w { assume d.t - T < 20; }").unwrap();
        assert!(m.dims.shift_invariant);
        let m = parse_model("object d : Deadline { }\nthread w { assume 5 - d.t + T >= 0; }").unwrap();
        assert!(m.dims.shift_invariant);
        let m = parse_model("object d : Deadline { }\nthread w { assume d.t + T >= 0; }").unwrap();
        assert!(!m.dims.shift_invariant);
    }
}
