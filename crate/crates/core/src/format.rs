//! Scenario files.
//!
//! A scenario is a TOML document with global discounting parameters and one
//! `[[arm]]` table per arm. Unknown keys are rejected; every error carries the
//! line and column it refers to.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::error::{RmabError, Result};
use crate::model::{compile_restriction, ArmModel, RestrictionSpec, Scenario};

pub const DEFAULT_TAIL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub beta: f64,
    pub delta: f64,
    /// Truncation horizon in grid steps; chosen from `tail_tolerance` when
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
    #[serde(rename = "arm")]
    pub arms: Vec<Spanned<ArmSpec>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub rates: Vec<f64>,
    /// One-step transition matrix on the grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Vec<Vec<f64>>>,
    /// Continuous-time generator; the kernel becomes `exp(Q·delta)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub initial: usize,
    #[serde(default = "unrestricted")]
    pub restriction: RestrictionSpec,
}

fn unrestricted() -> RestrictionSpec {
    RestrictionSpec::Unrestricted
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn anchored(text: &str, offset: usize, message: impl Into<String>) -> RmabError {
    let (line, column) = line_col(text, offset);
    RmabError::Parse {
        line,
        column,
        message: message.into(),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            anchored(text, offset, e.message().to_string())
        })
    }

    /// Builds and compiles every arm. `text` is the source the file was
    /// parsed from and only serves to anchor diagnostics.
    pub fn build(&self, text: &str) -> Result<Scenario> {
        let mut arms = Vec::with_capacity(self.arms.len());
        for (k, spanned) in self.arms.iter().enumerate() {
            let spec = spanned.get_ref();
            let fail = |e: RmabError| {
                let what = if spec.name.is_empty() { format!("arm {k}") } else { format!("arm `{}`", spec.name) };
                anchored(text, spanned.span().start, format!("{what}: {e}"))
            };
            let base = match (&spec.kernel, &spec.generator) {
                (Some(kernel), None) => ArmModel::unrestricted(spec.rates.clone(), kernel.clone(), spec.initial),
                (None, Some(q)) => ArmModel::from_generator(spec.rates.clone(), q.clone(), spec.initial, self.delta),
                _ => Err(RmabError::InvalidModel("give exactly one of `kernel` or `generator`".into())),
            }
            .map_err(fail)?;
            let base = match &spec.labels {
                Some(labels) => base.with_labels(labels.clone()).map_err(fail)?,
                None => base,
            };
            let name = if spec.name.is_empty() { format!("arm{k}") } else { spec.name.clone() };
            let arm = compile_restriction(&spec.restriction, &base.with_name(name)).map_err(fail)?;
            arms.push(arm);
        }
        let scenario = Scenario::new(arms, self.beta, self.delta, self.horizon.unwrap_or(0));
        Ok(match self.horizon {
            Some(_) => scenario,
            None if scenario.beta > 0.0 && scenario.delta > 0.0 && !scenario.arms.is_empty() => {
                scenario.with_tail_tolerance(self.tail_tolerance())
            }
            None => scenario,
        })
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tolerance.unwrap_or(DEFAULT_TAIL_TOL)
    }
}

/// Parses and builds a scenario from TOML text.
pub fn parse_scenario(text: &str) -> Result<(ScenarioFile, Scenario)> {
    let file = ScenarioFile::parse(text)?;
    let scenario = file.build(text)?;
    Ok((file, scenario))
}

pub fn load_scenario(path: &Path) -> Result<(ScenarioFile, Scenario)> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
beta = 1.0
delta = 0.1

[[arm]]
name = "a"
rates = [1.0, 3.0]
kernel = [[0.5, 0.5], [0.5, 0.5]]

[[arm]]
name = "b"
rates = [2.0, 0.5]
generator = [[-1.0, 1.0], [0.5, -0.5]]
restriction = { kind = "integer-grid", period = 2 }
"#;

    #[test]
    fn parses_and_picks_horizon() {
        let (file, s) = parse_scenario(GOOD).unwrap();
        assert_eq!(file.arms.len(), 2);
        assert_eq!(s.arms[0].name(), "a");
        assert_eq!(s.arms[1].len(), 4);
        assert!(s.tail_bound() <= DEFAULT_TAIL_TOL);
    }

    #[test]
    fn unknown_key_is_line_anchored() {
        let text = GOOD.replace("name = \"b\"", "name = \"b\"\ncolour = 3");
        match parse_scenario(&text) {
            Err(RmabError::Parse { line, message, .. }) => {
                assert_eq!(line, 12, "{message}");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_line() {
        let text = "beta = 1.0\ndelta = = 0.1\n";
        assert!(matches!(parse_scenario(text), Err(RmabError::Parse { line: 2, .. })));
    }

    #[test]
    fn shape_error_points_at_arm() {
        let text = GOOD.replace("kernel = [[0.5, 0.5], [0.5, 0.5]]", "kernel = [[1.0]]");
        match parse_scenario(&text) {
            Err(RmabError::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("arm `a`"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let both = GOOD.replace("rates = [1.0, 3.0]", "rates = [1.0, 3.0]\ngenerator = [[0.0, 0.0], [0.0, 0.0]]");
        assert!(matches!(parse_scenario(&both), Err(RmabError::Parse { .. })));
    }

    #[test]
    fn line_col_basics() {
        assert_eq!(line_col("ab\ncd", 0), (1, 1));
        assert_eq!(line_col("ab\ncd", 4), (2, 2));
    }
}
