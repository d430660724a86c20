/// Outcome of a numerical verification of one inequality or identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst-case slack; negative when the check failed.
    pub margin: f64,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, margin: f64, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, margin, detail: detail.into() }
    }

    /// Passes iff `margin >= 0`.
    pub fn from_margin(name: impl Into<String>, margin: f64, detail: impl Into<String>) -> Self {
        Self::new(name, margin >= 0.0, margin, detail)
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {} (margin {:.3e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.margin,
            self.detail
        )
    }
}
