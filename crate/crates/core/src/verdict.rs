//! Tri-state verdicts shared by every audit.

use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Verdict {
    Pass,
    Fail,
    Unknown,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(self) -> bool {
        self == Verdict::Pass
    }

    /// Conjunction: any failure wins, then any unknown.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Unknown, _) | (_, Verdict::Unknown) => Verdict::Unknown,
            _ => Verdict::Pass,
        }
    }

    pub fn all(it: impl IntoIterator<Item = Verdict>) -> Verdict {
        it.into_iter().fold(Verdict::Pass, Verdict::and)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Unknown => "UNKNOWN",
        })
    }
}

/// One named condition with its outcome and, unless it passed, a witness.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerdictEntry {
    pub id: String,
    pub verdict: Verdict,
    pub witness: Option<String>,
}

impl VerdictEntry {
    pub fn pass(id: &str) -> Self {
        VerdictEntry {
            id: id.to_string(),
            verdict: Verdict::Pass,
            witness: None,
        }
    }

    pub fn new(id: &str, verdict: Verdict, witness: Option<String>) -> Self {
        VerdictEntry {
            id: id.to_string(),
            verdict,
            witness: if verdict.is_pass() { None } else { witness },
        }
    }

    pub fn fail(id: &str, witness: impl Into<String>) -> Self {
        Self::new(id, Verdict::Fail, Some(witness.into()))
    }

    pub fn unknown(id: &str, why: impl Into<String>) -> Self {
        Self::new(id, Verdict::Unknown, Some(why.into()))
    }
}

pub fn overall(entries: &[VerdictEntry]) -> Verdict {
    Verdict::all(entries.iter().map(|e| e.verdict))
}
