//! Self-verification: every module invariant, the proposition checks on
//! finite toys and the acceptance criteria, summarised as JSON.

pub mod checks;
pub mod criteria;
pub mod oracle;
pub mod toys;

use serde::{Deserialize, Serialize};

pub use criteria::{Budget, CriterionResult};

/// Outcome of one invariant check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: u64,
    pub detail: String,
}

/// Accumulates cases of one check and keeps the first few violations.
#[derive(Debug)]
pub struct Tally {
    name: String,
    cases: u64,
    violations: u64,
    examples: Vec<String>,
    error: Option<String>,
}

impl Tally {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_owned(),
            cases: 0,
            violations: 0,
            examples: Vec::new(),
            error: None,
        }
    }

    pub fn case(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.violations += 1;
            if self.examples.len() < 3 {
                self.examples.push(describe());
            }
        }
    }

    /// Records an unexpected error; the check then fails.
    pub fn error(&mut self, e: impl std::fmt::Display) {
        if self.error.is_none() {
            self.error = Some(e.to_string());
        }
    }

    pub fn finish(self) -> CheckResult {
        let passed = self.violations == 0 && self.error.is_none() && self.cases > 0;
        let mut detail = format!("{} cases, {} violations", self.cases, self.violations);
        if let Some(e) = &self.error {
            detail.push_str(&format!("; error: {e}"));
        }
        if !self.examples.is_empty() {
            detail.push_str(&format!("; e.g. {}", self.examples.join(" | ")));
        }
        CheckResult {
            name: self.name,
            passed,
            cases: self.cases,
            detail,
        }
    }
}

/// Turns a fallible check body into a result, failing the check on error.
pub fn run_check(name: &str, body: impl FnOnce(&mut Tally) -> crate::Result<()>) -> CheckResult {
    let mut tally = Tally::new(name);
    if let Err(e) = body(&mut tally) {
        tally.error(e);
    }
    tally.finish()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationSummary {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub criteria: Vec<CriterionResult>,
}

/// Runs every invariant check and, when `with_criteria`, every acceptance
/// criterion at `budget`. Failures are reported, never raised.
pub fn run_verification_suite(
    seed: u64,
    budget: &Budget,
    with_criteria: bool,
) -> VerificationSummary {
    let checks = checks::all_checks(seed, budget);
    let criteria = if with_criteria {
        criteria::all_criteria(seed, budget)
    } else {
        Vec::new()
    };
    let passed = checks.iter().all(|c| c.passed) && criteria.iter().all(|c| c.passed);
    VerificationSummary {
        seed,
        passed,
        checks,
        criteria,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tally_reports_violations() {
        let mut t = Tally::new("demo");
        t.case(true, || unreachable!());
        t.case(false, || "bad".into());
        let r = t.finish();
        assert!(!r.passed);
        assert_eq!(r.cases, 2);
        assert!(r.detail.contains("1 violations") && r.detail.contains("bad"));
        assert!(!Tally::new("empty").finish().passed);
    }
}
