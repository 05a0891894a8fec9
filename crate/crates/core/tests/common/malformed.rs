//! Malformed models with the position of the first expected diagnostic.

pub const CASES: &[(&str, u32, u32)] = &[
    ("type S { int x }", 1, 16),
    ("type S { int x; invariant x > ; }", 1, 31),
    ("object d : Nope { }", 1, 12),
    ("type S { int x; }\ntype S { int y; }", 2, 6),
    ("type S { int x; int x; }", 1, 21),
    ("object a : Deadline { }\nobject a : Deadline { }", 2, 8),
    ("type S { int x; invariant y > 0; }", 1, 27),
    ("type S { int x; invariant x; }", 1, 27),
    ("type S { int x @ ; }", 1, 16),
    ("thread w { x := 1; }", 1, 12),
    ("type S { int x in 5..; }", 1, 22),
    ("object d : Deadline { t = true; }", 1, 23),
    ("object d : Deadline { q = 1; }", 1, 23),
    ("thread w { deadline_new(d, 5); }", 1, 25),
    ("type S { int x; invariant (x > 0; }", 1, 33),
    ("typ T { }", 1, 1),
    ("type S { int x; approves(owner, y); }", 1, 33),
    ("object d : Deadline { owner = nobody; }", 1, 31),
    ("thread w { assume 1; }", 1, 19),
    ("thread w {\n  assert T >= ;\n}", 2, 15),
    ("type S { int x; }\nobject o : S { x = 99999999999999999999; }", 2, 20),
    ("thread w { wrap ; }", 1, 17),
    ("type S { int x; invariant forall : x > 0; }", 1, 34),
    ("// models start with declarations\n\n  loop 3 invariant true { }", 3, 3),
];
