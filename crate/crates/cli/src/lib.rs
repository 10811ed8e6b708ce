//! Problem files, commands and JSON reports behind the `poisred` binary.

pub mod problem;
pub mod run;

use poisred::Verdict;
use serde_json::{json, Map, Value};

pub use problem::{Command, Problem, ProblemError, TheoremChoice};
pub use run::{exit_code, run, Outcome, RunError, RunOptions, EXIT_INPUT_ERROR};

/// Bundled example problems, by name.
pub const FIXTURES: &[(&str, &str)] = &[
    ("empty", include_str!("../fixtures/empty.poisred")),
    ("exconst_a", include_str!("../fixtures/exconst_a.poisred")),
    ("exconst_b", include_str!("../fixtures/exconst_b.poisred")),
    ("contact", include_str!("../fixtures/contact.poisred")),
    (
        "coisotropic",
        include_str!("../fixtures/coisotropic.poisred"),
    ),
    (
        "counterex_x2",
        include_str!("../fixtures/counterex_x2.poisred"),
    ),
    (
        "counterex_x1",
        include_str!("../fixtures/counterex_x1.poisred"),
    ),
    ("cotangent", include_str!("../fixtures/cotangent.poisred")),
    (
        "drinfeld_mr",
        include_str!("../fixtures/drinfeld_mr.poisred"),
    ),
    (
        "drinfeld_stages",
        include_str!("../fixtures/drinfeld_stages.poisred"),
    ),
    ("two_stage", include_str!("../fixtures/two_stage.poisred")),
    (
        "hamiltonian_line",
        include_str!("../fixtures/hamiltonian_line.poisred"),
    ),
    (
        "hamiltonian_line_perturbed",
        include_str!("../fixtures/hamiltonian_line_perturbed.poisred"),
    ),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, src)| *src)
}

/// Outcome of running bundled examples against their `[expect]` sections.
#[derive(Clone, Debug)]
pub struct ExamplesOutcome {
    pub report: Value,
    pub summary: Vec<String>,
    /// Every selected fixture ran and met all of its expectations.
    pub matched: bool,
}

/// Runs each fixture's `[meta] command` list. A fixture matches when every
/// command finishes and every expectation was observed by some command and
/// agrees with it. Command-line options are deliberately not applied so the
/// expectations stay reproducible.
pub fn run_examples(names: &[String]) -> Result<ExamplesOutcome, String> {
    let selected: Vec<(&str, &str)> = if names.is_empty() {
        FIXTURES.to_vec()
    } else {
        names
            .iter()
            .map(|n| {
                fixture(n)
                    .map(|src| (n.as_str(), src))
                    .ok_or_else(|| format!("no bundled example named `{n}`"))
            })
            .collect::<Result<_, _>>()?
    };
    let mut all_matched = true;
    let mut fixtures = Vec::new();
    let mut summary = Vec::new();
    for (name, src) in selected {
        let problem = Problem::parse(src).map_err(|e| format!("{name}: {e}"))?;
        let mut matched = true;
        let mut runs = Vec::new();
        let mut seen = Vec::new();
        let mut notes = Vec::new();
        for &cmd in &problem.commands {
            match run(cmd, &problem, &RunOptions::default()) {
                Ok(out) => {
                    matched &= out.expectations.iter().all(|x| x.ok);
                    seen.extend(out.expectations.iter().map(|x| x.key.clone()));
                    notes.extend(out.expectations.iter().filter(|x| !x.ok).map(|x| {
                        format!(
                            "    {}: expected {}, observed {}",
                            x.key, x.expected, x.observed
                        )
                    }));
                    runs.push(out.report);
                }
                Err(e) => {
                    matched = false;
                    notes.push(format!("    {cmd}: {e}"));
                    runs.push(json!({"command": cmd.name(), "error": e.to_string()}));
                }
            }
        }
        let unobserved: Vec<&str> = problem
            .expectations
            .iter()
            .map(|x| x.key.as_str())
            .filter(|k| !seen.iter().any(|s| s == k))
            .collect();
        if !unobserved.is_empty() {
            matched = false;
            notes.push(format!("    never observed: {}", unobserved.join(", ")));
        }
        all_matched &= matched;
        summary.push(format!(
            "{:<28} {}",
            name,
            if matched { "ok" } else { "MISMATCH" }
        ));
        summary.append(&mut notes);
        let mut entry = Map::new();
        entry.insert("name".into(), json!(name));
        entry.insert("matched".into(), json!(matched));
        entry.insert("unobserved".into(), json!(unobserved));
        entry.insert("runs".into(), Value::Array(runs));
        fixtures.push(Value::Object(entry));
    }
    let status = Verdict::from_bool(all_matched);
    Ok(ExamplesOutcome {
        report: json!({
            "tool": "poisred",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "examples",
            "status": status.to_string(),
            "fixtures": fixtures,
        }),
        summary,
        matched: all_matched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_parses_and_names_commands() {
        for (name, src) in FIXTURES {
            let p = Problem::parse(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(!p.commands.is_empty(), "{name} has no command");
            assert!(!p.expectations.is_empty(), "{name} has no expectations");
        }
    }

    #[test]
    fn unknown_example_is_an_error() {
        assert!(run_examples(&["nope".into()]).is_err());
    }
}
