use serde::{Deserialize, Serialize};

use super::{AnnotateError, Frontier, Result};

const CONTEXT_PLACEHOLDER: &str = "{context}";

/// Chain-of-thought annotation prompt. The user text must mention each
/// frontier token (`[LEFT]`, `[CENTER]`, `[RIGHT]`) exactly once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub system: String,
    /// May contain `{context}`, replaced by scene context at render time.
    pub user: String,
    pub output_schema: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub system: String,
    pub user: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            system: "You assist a small ground robot that must move through crowds politely. \
                     You look at its forward camera image and judge where people are heading."
                .into(),
            user: "The image shows three outlined regions on the ground ahead: [LEFT] in red, \
                   [CENTER] in green and [RIGHT] in blue. Context: {context}. \
                   Think step by step: find each person, estimate where they will walk in the \
                   next few seconds, then rate for each region independently how likely it is \
                   to become crowded."
                .into(),
            output_schema: "Finish with a JSON object of the form \
                            {\"left\": <0..1>, \"center\": <0..1>, \"right\": <0..1>, \"rationale\": \"<short>\"}."
                .into(),
        }
    }
}

fn count(haystack: &str, needle: &str) -> usize {
    haystack.matches(needle).count()
}

impl PromptTemplate {
    pub fn validate(&self) -> Result<()> {
        self.render("").map(|_| ())
    }

    pub fn render(&self, context: &str) -> Result<RenderedPrompt> {
        let user = format!(
            "{}\n\n{}",
            self.user.replace(CONTEXT_PLACEHOLDER, context),
            self.output_schema
        );
        let full = format!("{}\n{}", self.system, user);
        for f in Frontier::ALL {
            let n = count(&full, &format!("[{}]", f.tag()));
            if n != 1 {
                return Err(AnnotateError::Validation(format!(
                    "rendered prompt mentions [{}] {n} times, expected once",
                    f.tag()
                )));
            }
        }
        Ok(RenderedPrompt {
            system: self.system.clone(),
            user,
        })
    }

    /// Follow-up after an unparseable reply.
    pub fn stricter_reprompt(&self) -> String {
        format!(
            "Your previous reply could not be parsed. Reply with only the JSON object, no other text. {}",
            self.output_schema
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_template_has_three_frontiers() {
        let p = PromptTemplate::default().render("outdoor walkway").unwrap();
        for tag in ["[LEFT]", "[CENTER]", "[RIGHT]"] {
            assert_eq!(count(&format!("{}{}", p.system, p.user), tag), 1);
        }
        assert!(p.user.contains("outdoor walkway"));
    }

    #[test]
    fn context_repeating_a_frontier_is_rejected() {
        assert!(PromptTemplate::default().render("watch [LEFT]").is_err());
        let t = PromptTemplate {
            user: "[LEFT] [RIGHT]".into(),
            ..PromptTemplate::default()
        };
        assert!(t.validate().is_err());
    }
}
