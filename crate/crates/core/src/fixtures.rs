//! The two-function null-dereference example used throughout the tests:
//! `bad` guards with `&` (both operands evaluated), `good` with `&&`.

pub const FIG1_FILE: &str = "fig1.c";

pub const FIG1_SOURCE: &str = "void bad()
{
    twoIntsStruct *twoInts = NULL;
    if ((twoInts != NULL) & (twoInts->intOne == 5)) //警报1
        println(\"intOne == 5\");
}
void good()
{
    twoIntsStruct *twoInts = NULL;
    if ((twoInts != NULL) && (twoInts->intOne == 5)) //警报2
        println(\"intOne == 5\");
}
";

/// Warning report rows for [`FIG1_SOURCE`], as JSON Lines.
pub const FIG1_WARNINGS: &str = r#"{"file": "fig1.c", "function": "bad", "line": 4, "variable": "twoInts", "label": 1, "id": "fig1-bad"}
{"file": "fig1.c", "function": "good", "line": 10, "variable": "twoInts", "label": 0, "id": "fig1-good"}
"#;
