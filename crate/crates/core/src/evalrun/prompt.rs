use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptStyle {
    #[default]
    Detailed,
    Succinct,
}

impl PromptStyle {
    pub fn name(self) -> &'static str {
        match self {
            Self::Detailed => "detailed",
            Self::Succinct => "succinct",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "detailed" => Some(Self::Detailed),
            "succinct" => Some(Self::Succinct),
            _ => None,
        }
    }
}

/// Letter for option `i`: A, B, C, ...
pub fn option_letter(i: usize) -> char {
    assert!(i < 26, "at most 26 options are supported");
    (b'A' + i as u8) as char
}

pub const SUCCINCT_CUE: &str = "Select from the following choices.";
pub const DETAILED_CUE: &str = "Best Option: (";

/// Prompt text for one instance. `video` switches the detailed instruction
/// between image and video wording.
pub fn build_prompt(question: &str, options: &[String], style: PromptStyle, video: bool) -> String {
    let mut out = String::new();
    match style {
        PromptStyle::Succinct => {
            out.push_str(question);
            out.push('\n');
            out.push_str(SUCCINCT_CUE);
            for (i, o) in options.iter().enumerate() {
                out.push_str(&format!("\n{}. {o}", option_letter(i)));
            }
        }
        PromptStyle::Detailed => {
            let medium = if video { "video" } else { "image" };
            out.push_str(&format!(
                "Based on the {medium}, answer the following multiple-choice question. \
                 Reply with the letter of the best option."
            ));
            out.push_str("\n\n");
            out.push_str(question);
            for (i, o) in options.iter().enumerate() {
                out.push_str(&format!("\n({}) {o}", option_letter(i)));
            }
            out.push('\n');
            out.push_str(DETAILED_CUE);
        }
    }
    out
}
