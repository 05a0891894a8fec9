use chronoverify::lang::{parse_model, DiagCode};

#[path = "common/malformed.rs"]
mod malformed;

#[test]
fn every_malformed_input_is_rejected_at_the_expected_position() {
    assert!(malformed::CASES.len() >= 20);
    for (src, line, col) in malformed::CASES {
        let d = parse_model(src).expect_err(src);
        assert_eq!((d.0[0].line, d.0[0].col), (*line, *col), "{src}\n{d}");
        assert!(d.0.windows(2).all(|w| (w[0].line, w[0].col) <= (w[1].line, w[1].col)));
        assert!(d.to_string().starts_with(&format!("{line}:{col}: error[")));
    }
}

#[test]
fn diagnostic_codes_distinguish_failure_classes() {
    let code = |src: &str| parse_model(src).unwrap_err().0[0].code;
    assert_eq!(code("type S { int x @ ; }"), DiagCode::Lexical);
    assert_eq!(code("type S { int x }"), DiagCode::Syntax);
    assert_eq!(code("object d : Nope { }"), DiagCode::UnknownIdentifier);
    assert_eq!(code("object d : Deadline { q = 1; }"), DiagCode::UnknownField);
    assert_eq!(code("type S { int x; }\ntype S { int y; }"), DiagCode::DuplicateType);
    assert_eq!(code("type S { int x; invariant x; }"), DiagCode::SortMismatch);
}

#[test]
fn many_errors_are_all_reported_in_order() {
    let src = "type S { int x; invariant y > 0; invariant z > 0; }\nobject o : S { w = 1; }";
    let d = parse_model(src).unwrap_err();
    assert!(d.0.len() >= 2, "{d}");
    assert_eq!(d.0[0].line, 1);
}
