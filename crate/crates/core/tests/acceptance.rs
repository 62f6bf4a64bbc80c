//! Runs the thirteen acceptance criteria and prints one verdict line each.

use hypolab::acceptance::run_all;

#[test]
fn acceptance_suite() {
    let outcomes = run_all();
    for o in &outcomes {
        println!("{}", o.line());
    }
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
