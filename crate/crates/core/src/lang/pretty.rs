//! Canonical source rendering of syntax trees. `parse(print(m))` yields a
//! model structurally identical to `m`.

use std::fmt::Write;

use super::ast::*;

const PREC_FORALL: u8 = 0;
const PREC_COND: u8 = 1;
const PREC_UNARY: u8 = 9;
const PREC_POSTFIX: u8 = 10;

fn expr_prec(e: &ExprAst) -> u8 {
    match &e.kind {
        ExprKind::Forall(..) => PREC_FORALL,
        ExprKind::Cond(..) => PREC_COND,
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => PREC_UNARY,
        _ => PREC_POSTFIX,
    }
}

pub fn expr_to_string(e: &ExprAst) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

fn write_expr(out: &mut String, e: &ExprAst, required: u8) {
    let paren = expr_prec(e) < required;
    if paren {
        out.push('(');
    }
    match &e.kind {
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Name(n) => out.push_str(n),
        ExprKind::SelfRef => out.push_str("self"),
        ExprKind::Now => out.push('T'),
        ExprKind::Delta => out.push_str("dT"),
        ExprKind::Field(base, f) => {
            write_expr(out, base, PREC_POSTFIX);
            out.push('.');
            out.push_str(&f.name);
        }
        ExprKind::Index(m, k) => {
            write_expr(out, m, PREC_POSTFIX);
            out.push('[');
            write_expr(out, k, 0);
            out.push(']');
        }
        ExprKind::Old(a) => call(out, "old", a),
        ExprKind::Unchanged(a) => call(out, "unchanged", a),
        ExprKind::Inv2(a) => call(out, "inv2", a),
        ExprKind::Mine(a) => call(out, "mine", a),
        ExprKind::Closed(a) => call(out, "closed", a),
        ExprKind::Elapsed(n) => {
            let _ = write!(out, "elapsed({})", n.name);
        }
        ExprKind::Unary(op, a) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            write_expr(out, a, PREC_UNARY);
        }
        ExprKind::Binary(op, a, b) => {
            let p = op.precedence();
            let (lp, rp) = if op.right_assoc() { (p + 1, p) } else { (p, p + 1) };
            write_expr(out, a, lp);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, rp);
        }
        ExprKind::Cond(c, a, b) => {
            write_expr(out, c, PREC_COND + 1);
            out.push_str(" ? ");
            write_expr(out, a, 0);
            out.push_str(" : ");
            write_expr(out, b, 0);
        }
        ExprKind::Forall(v, body) => {
            let _ = write!(out, "forall {}: ", v.name);
            write_expr(out, body, 0);
        }
    }
    if paren {
        out.push(')');
    }
}

fn call(out: &mut String, name: &str, arg: &ExprAst) {
    out.push_str(name);
    out.push('(');
    write_expr(out, arg, 0);
    out.push(')');
}

pub fn model_to_string(m: &ModelAst) -> String {
    let mut out = String::new();
    for (i, item) in m.items.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        match item {
            Item::Type(t) => write_type(&mut out, t),
            Item::Object(o) => write_object(&mut out, o),
            Item::Thread(t) => {
                let _ = writeln!(out, "thread {} {{", t.name.name);
                write_block(&mut out, &t.body, 1);
                out.push_str("}\n");
            }
        }
    }
    out
}

fn write_type(out: &mut String, t: &TypeAst) {
    let _ = writeln!(
        out,
        "type {}{} {{",
        t.name.name,
        if t.timed { " timed" } else { "" }
    );
    for m in &t.members {
        out.push_str("  ");
        match m {
            Member::Field(f) => {
                if f.volatile {
                    out.push_str("volatile ");
                }
                if f.ghost {
                    out.push_str("ghost ");
                }
                match &f.sort {
                    SortAst::Int => out.push_str("int"),
                    SortAst::Bool => out.push_str("bool"),
                    SortAst::ObjSet => out.push_str("objset"),
                    SortAst::ObjRef(None) => out.push_str("objref"),
                    SortAst::ObjRef(Some(t)) => {
                        let _ = write!(out, "objref<{}>", t.name);
                    }
                }
                let _ = write!(out, " {}", f.name.name);
                if let Some((lo, hi)) = f.range {
                    let _ = write!(out, " in {lo}..{hi}");
                }
                out.push(';');
            }
            Member::Invariant(e) => {
                let _ = write!(out, "invariant {};", expr_to_string(e));
            }
            Member::Approves(f) => {
                let _ = write!(out, "approves(owner, {});", f.name);
            }
            Member::OnUnwrap(e) => {
                let _ = write!(out, "on_unwrap {};", expr_to_string(e));
            }
            Member::Dynamics(f, e) => {
                let _ = write!(out, "dynamics {} = {};", f.name, expr_to_string(e));
            }
        }
        out.push('\n');
    }
    out.push_str("}\n");
}

fn write_object(out: &mut String, o: &ObjectAst) {
    let _ = write!(out, "object {} : {} {{", o.name.name, o.ty.name);
    for (k, v) in &o.inits {
        let _ = write!(out, " {} = ", k.name);
        match v {
            LiteralAst::Int(n) => {
                let _ = write!(out, "{n}");
            }
            LiteralAst::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            LiteralAst::Ref(r) => out.push_str(&r.name),
            LiteralAst::Set(items) => {
                let names: Vec<&str> = items.iter().map(|i| i.name.as_str()).collect();
                let _ = write!(out, "{{{}}}", names.join(", "));
            }
        }
        out.push(';');
    }
    out.push_str(" }\n");
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_block(out: &mut String, body: &[StmtAst], depth: usize) {
    for s in body {
        write_stmt(out, s, depth);
    }
}

pub fn stmt_to_string(s: &StmtAst) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, 0);
    out.trim_end().to_string()
}

fn write_stmt(out: &mut String, s: &StmtAst, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Atomic(body) => {
            out.push_str("atomic {\n");
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
            return;
        }
        StmtKind::Loop {
            bound,
            invariant,
            writes,
            body,
        } => {
            let _ = write!(out, "loop {bound} invariant {}", expr_to_string(invariant));
            if !writes.is_empty() {
                let names: Vec<&str> = writes.iter().map(|w| w.name.as_str()).collect();
                let _ = write!(out, " writes {}", names.join(", "));
            }
            out.push_str(" {\n");
            write_block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
            return;
        }
        StmtKind::Assign { target, value } => {
            let _ = write!(out, "{} := {};", expr_to_string(target), expr_to_string(value));
        }
        StmtKind::Wrap(o) => {
            let _ = write!(out, "wrap {};", o.name);
        }
        StmtKind::Unwrap(o) => {
            let _ = write!(out, "unwrap {};", o.name);
        }
        StmtKind::Own { child, owner } => {
            let _ = write!(out, "own({}, {});", child.name, owner.name);
        }
        StmtKind::Assume(e) => {
            let _ = write!(out, "assume {};", expr_to_string(e));
        }
        StmtKind::Assert(e) => {
            let _ = write!(out, "assert {};", expr_to_string(e));
        }
        StmtKind::New { kind, obj, delta } => {
            let _ = write!(out, "{}_new({}, {delta});", kind.keyword(), obj.name);
        }
        StmtKind::Reset { kind, obj, delta } => {
            let _ = write!(out, "{}_reset({}, {delta});", kind.keyword(), obj.name);
        }
        StmtKind::Destroy { kind, obj } => {
            let _ = write!(out, "{}_destroy({});", kind.keyword(), obj.name);
        }
        StmtKind::Record(n) => {
            let _ = write!(out, "timer_record({});", n.name);
        }
        StmtKind::Annotation { keyword, args } => {
            let names: Vec<&str> = args.iter().map(|a| a.name.as_str()).collect();
            let _ = write!(out, "{keyword}({});", names.join(", "));
        }
    }
    out.push('\n');
}
