use std::collections::{BTreeMap, BTreeSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub input: String,
    pub output: String,
}

/// Objective, question, explanation and two to four worked exemplars.
/// `{{slot}}` placeholders may appear in any of the text parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    #[serde(default = "one")]
    pub version: u32,
    pub objective: String,
    pub question: String,
    pub explanation: String,
    pub exemplars: Vec<Exemplar>,
    /// Name of the response schema this template asks for.
    pub output_schema: String,
}

fn one() -> u32 {
    1
}

/// A prompt ready to send. `subject` identifies what the prompt is about
/// (a paragraph id, a graph key) and is only used by scripted backends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedPrompt {
    pub template: String,
    pub subject: String,
    pub text: String,
}

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{\s*([A-Za-z_][A-Za-z0-9_]*)\s*\}\}").unwrap());

impl PromptTemplate {
    pub fn from_toml(src: &str) -> Result<Self, GatewayError> {
        let t: PromptTemplate = toml::from_str(src).map_err(|e| GatewayError::InvalidTemplate(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::InvalidTemplate(format!("{}: {m}", self.name)));
        if self.name.trim().is_empty() {
            return bad("empty name".into());
        }
        for (part, text) in
            [("objective", &self.objective), ("question", &self.question), ("explanation", &self.explanation)]
        {
            if text.trim().is_empty() {
                return bad(format!("empty {part}"));
            }
        }
        if !(2..=4).contains(&self.exemplars.len()) {
            return bad(format!("needs 2-4 exemplars, has {}", self.exemplars.len()));
        }
        if self.exemplars.iter().any(|e| e.input.trim().is_empty() || e.output.trim().is_empty()) {
            return bad("exemplar with empty input or output".into());
        }
        Ok(())
    }

    /// Slot names referenced by the template, sorted.
    pub fn slots(&self) -> BTreeSet<String> {
        [&self.objective, &self.question, &self.explanation]
            .into_iter()
            .flat_map(|t| SLOT.captures_iter(t).map(|c| c[1].to_string()))
            .collect()
    }

    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<String, GatewayError> {
        let fill = |text: &str| -> Result<String, GatewayError> {
            let mut missing = None;
            let out = SLOT.replace_all(text, |c: &regex::Captures<'_>| match slots.get(&c[1]) {
                Some(v) => v.clone(),
                None => {
                    missing.get_or_insert_with(|| c[1].to_string());
                    String::new()
                }
            });
            match missing {
                Some(name) => Err(GatewayError::MissingSlot(name)),
                None => Ok(out.into_owned()),
            }
        };

        let mut out = String::new();
        out.push_str(&format!("[template: {} v{}]\n\n", self.name, self.version));
        out.push_str("## Objective\n");
        out.push_str(fill(&self.objective)?.trim());
        out.push_str("\n\n## Explanation\n");
        out.push_str(fill(&self.explanation)?.trim());
        out.push_str("\n\n## Examples\n");
        for (i, ex) in self.exemplars.iter().enumerate() {
            out.push_str(&format!(
                "### Example {}\nInput:\n{}\nOutput:\n```json\n{}\n```\n",
                i + 1,
                ex.input.trim(),
                ex.output.trim()
            ));
        }
        out.push_str("\n## Question\n");
        out.push_str(fill(&self.question)?.trim());
        out.push_str("\n\nRespond with exactly one fenced ```json block and nothing else.\n");
        Ok(out)
    }

    pub fn prompt(&self, subject: &str, slots: &BTreeMap<String, String>) -> Result<RenderedPrompt, GatewayError> {
        Ok(RenderedPrompt { template: self.name.clone(), subject: subject.to_string(), text: self.render(slots)? })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn template(question: &str) -> PromptTemplate {
        PromptTemplate {
            name: "t".into(),
            version: 1,
            objective: "Find things.".into(),
            question: question.into(),
            explanation: "Things are nouns.".into(),
            exemplars: vec![
                Exemplar { input: "a cat".into(), output: r#"{"things":["cat"]}"#.into() },
                Exemplar { input: "no".into(), output: r#"{"things":[]}"#.into() },
            ],
            output_schema: "things".into(),
        }
    }

    #[test]
    fn constant_without_slots() {
        let t = template("What things?");
        let a = t.render(&BTreeMap::new()).unwrap();
        assert_eq!(a, t.render(&BTreeMap::new()).unwrap());
        assert!(a.find("Example 1").unwrap() < a.find("Example 2").unwrap());
    }

    #[test]
    fn fills_slots_byte_identically() {
        let t = template("Paragraph: {{paragraph}}");
        let slots = BTreeMap::from([("paragraph".to_string(), "a dog".to_string())]);
        let a = t.render(&slots).unwrap();
        assert!(a.contains("Paragraph: a dog"));
        assert_eq!(a.as_bytes(), t.render(&slots).unwrap().as_bytes());
    }

    #[test]
    fn missing_slot() {
        let t = template("Paragraph: {{paragraph}}");
        assert_eq!(t.render(&BTreeMap::new()), Err(GatewayError::MissingSlot("paragraph".into())));
    }

    #[test]
    fn exemplar_count_enforced() {
        let mut t = template("q");
        t.exemplars.truncate(1);
        assert!(t.validate().is_err());
        let e = t.exemplars[0].clone();
        t.exemplars = vec![e; 5];
        assert!(t.validate().is_err());
    }
}
