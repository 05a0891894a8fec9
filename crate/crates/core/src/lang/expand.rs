//! Expansion of the declaration macros into plain two-state clauses.
//!
//! `unchanged(e)` is rewritten to `old(e) == e` during resolution already;
//! this pass handles the clause-level forms.

use super::ast::BinOp;
use super::model::{Clause, ClauseKind, Expr, FieldSel, TypeDecl, TypeId, TIME_TIMED};
use crate::kernel::value::ObjId;

/// Builds the full clause list of a type:
///
/// * each invariant, guarded by `closed(self)` in the poststate;
/// * for timed types, `closed(self) ==> time.timed[self]`;
/// * each on-unwrap clause as `old(closed(self)) && !closed(self) ==> P`;
/// * each `approves(owner, f)` as
///   `unchanged(f) || (owner is a thread ? actor == owner : inv2(owner))`,
///   where `owner` is the prestate owner.
pub fn expand_macros(decl: &TypeDecl, ty: TypeId, time: ObjId, time_type: TypeId) -> TypeDecl {
    let mut out = decl.clone();
    let mut clauses = Vec::new();
    let closed_self = || Expr::Closed(Box::new(Expr::SelfRef));
    for (e, text) in &decl.invariants {
        clauses.push(Clause {
            kind: ClauseKind::Invariant,
            expr: e.clone(),
            text: text.clone(),
        });
    }
    if decl.timed {
        let timed_map = Expr::Field(
            Box::new(Expr::Obj(time)),
            FieldSel {
                ty: time_type,
                field: TIME_TIMED,
            },
        );
        clauses.push(Clause {
            kind: ClauseKind::Timed,
            expr: Expr::bin(
                BinOp::Implies,
                closed_self(),
                Expr::Index(Box::new(timed_map), Box::new(Expr::SelfRef)),
            ),
            text: "closed(self) ==> time.timed[self]".to_string(),
        });
    }
    for (p, text) in &decl.on_unwrap {
        let edge = Expr::bin(
            BinOp::And,
            Expr::Old(Box::new(closed_self())),
            Expr::Not(Box::new(closed_self())),
        );
        clauses.push(Clause {
            kind: ClauseKind::OnUnwrap,
            expr: Expr::bin(BinOp::Implies, edge, p.clone()),
            text: format!("on_unwrap {text}"),
        });
    }
    for &f in &decl.approvals {
        clauses.push(Clause {
            kind: ClauseKind::Approval(f),
            expr: approval_expr(FieldSel { ty, field: f }),
            text: format!("approves(owner, {})", decl.fields[f].name),
        });
    }
    out.clauses = clauses;
    out
}

fn approval_expr(sel: FieldSel) -> Expr {
    let field = Expr::Field(Box::new(Expr::SelfRef), sel);
    let owner = Expr::Old(Box::new(Expr::Owner(Box::new(Expr::SelfRef))));
    let unchanged = Expr::bin(BinOp::Eq, Expr::Old(Box::new(field.clone())), field);
    let sanctioned = Expr::Cond(
        Box::new(Expr::IsThread(Box::new(owner.clone()))),
        Box::new(Expr::bin(BinOp::Eq, Expr::Actor, owner.clone())),
        Box::new(Expr::Inv2(Box::new(owner))),
    );
    Expr::bin(BinOp::Or, unchanged, sanctioned)
}
