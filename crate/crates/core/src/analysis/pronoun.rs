/// Detects first-person singular "I" in a generation.
pub trait PronounDetector: Send + Sync {
    fn has_first_person_i(&self, text: &str) -> bool;
}

/// Splits on every non-alphanumeric character and looks for the token
/// `i`, case-insensitively. "I'm" and "i," both count; "it" and "i.e."
/// do not.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedDetector;

impl PronounDetector for RuleBasedDetector {
    fn has_first_person_i(&self, text: &str) -> bool {
        let lower = text.to_lowercase();
        let cleaned = lower.replace("i.e.", " ");
        cleaned.split(|c: char| !c.is_alphanumeric()).any(|t| t == "i")
    }
}

/// 1 if the text contains the pronoun "I" under the rule-based detector.
pub fn pronoun_indicator(text: &str) -> u8 {
    pronoun_indicator_with(&RuleBasedDetector, text)
}

pub fn pronoun_indicator_with(detector: &dyn PronounDetector, text: &str) -> u8 {
    u8::from(detector.has_first_person_i(text))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(
            pronoun_indicator("yes , i love american pancakes , they are like scotch pancakes"),
            1
        );
        assert_eq!(pronoun_indicator("It is blue."), 0);
        assert_eq!(pronoun_indicator("Pancakes originated in Greece."), 0);
    }

    #[test]
    fn punctuation_and_contractions() {
        assert_eq!(pronoun_indicator("i, for one"), 1);
        assert_eq!(pronoun_indicator("(I)"), 1);
        assert_eq!(pronoun_indicator("I'm here"), 1);
        assert_eq!(pronoun_indicator("well... I"), 1);
        assert_eq!(pronoun_indicator("e.g. fruit, i.e. apples"), 0);
        assert_eq!(pronoun_indicator("iPhone ink"), 0);
        assert_eq!(pronoun_indicator(""), 0);
    }
}
