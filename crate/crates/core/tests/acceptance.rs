//! Acceptance suite: every criterion at full Monte Carlo size.
//!
//! Prints one `PASS`/`FAIL` line per criterion with its measured values and
//! exits nonzero if any criterion failed. Tolerances live in
//! `tsconformal::verify::criteria` and are not adjusted here.
//!
//! Runs in roughly a quarter of an hour on one core with the optimised test
//! profile of this workspace.

use tsconformal::verify::criteria::{self, Budget, CriterionResult};

const SEED: u64 = 20_260_101;

fn report(c: &CriterionResult) {
    let verdict = if c.passed { "PASS" } else { "FAIL" };
    println!("{verdict} criterion {:>2} {}: {}", c.id, c.name, c.detail);
}

fn main() {
    let budget = Budget::full();
    let mut results = Vec::new();
    let mut push = |c: CriterionResult| {
        report(&c);
        results.push(c);
    };

    push(criteria::criterion_1(SEED, &budget));
    match criteria::grid_rows(SEED, &budget) {
        Ok(rows) => {
            for r in &rows {
                println!(
                    "      t={} n={:>3} coverage={:.5} se={:.5} bounds=[{:.5}, {:.5}]",
                    r.t, r.n, r.coverage, r.stderr, r.lower_bound, r.upper_bound
                );
            }
            push(criteria::criterion_2(&rows));
            push(criteria::criterion_3(&rows));
        }
        Err(e) => panic!("MA grid failed to run: {e}"),
    }
    push(criteria::criterion_4(SEED, &budget));
    push(criteria::criterion_5(SEED, &budget));
    push(criteria::criterion_6(SEED, &budget));
    push(criteria::criterion_7(SEED));
    push(criteria::criterion_8(SEED, &budget));
    push(criteria::criterion_9());
    push(criteria::criterion_10(SEED, &budget));

    let failed: Vec<u8> = results.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    println!(
        "{} of {} criteria passed",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
