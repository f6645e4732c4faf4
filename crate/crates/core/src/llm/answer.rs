/// Marker a generation uses to announce its final answer.
pub const ANSWER_CUE: &str = "So the answer is:";

const ESCAPED_CUE: &str = "So the answer is\\:";

/// Returns the text after the last answer cue, without surrounding
/// whitespace or trailing periods.
pub fn extract_answer(generation: &str) -> Option<String> {
    let start = generation.rfind(ANSWER_CUE)? + ANSWER_CUE.len();
    let answer = generation[start..]
        .trim()
        .trim_end_matches('.')
        .trim_end();
    Some(answer.to_string())
}

/// Neutralizes answer cues inside text that is quoted into a prompt, so an
/// echoed passage can never be read back as an answer.
pub fn escape_cue(text: &str) -> String {
    text.replace(ANSWER_CUE, ESCAPED_CUE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn extracts_after_cue() {
        assert_eq!(
            extract_answer("Google changed its logo in 2015. So the answer is: Google.").as_deref(),
            Some("Google")
        );
        assert_eq!(
            extract_answer("John Cabot's son is Sebastian Cabot. So the answer is: Sebastian Cabot.")
                .as_deref(),
            Some("Sebastian Cabot")
        );
    }

    #[test]
    fn no_cue_no_answer() {
        assert_eq!(extract_answer("no cue here"), None);
        assert_eq!(extract_answer(""), None);
        assert_eq!(extract_answer("so the answer is: lowercase"), None);
    }

    #[test]
    fn last_cue_wins() {
        assert_eq!(
            extract_answer("So the answer is: A. So the answer is: B.").as_deref(),
            Some("B")
        );
    }

    #[test]
    fn empty_suffix() {
        assert_eq!(extract_answer("So the answer is:  . ").as_deref(), Some(""));
    }

    #[test]
    fn escaped_cue_is_inert() {
        let doc = "Trivia: So the answer is: Paris.";
        assert_eq!(extract_answer(&escape_cue(doc)), None);
    }

    proptest! {
        #[test]
        fn single_cue_suffix_round_trips(prefix in "[^S]{0,30}", answer in "[A-Za-z0-9][A-Za-z0-9 ]{0,20}[A-Za-z0-9]") {
            let gen = format!("{prefix}{ANSWER_CUE} {answer}.");
            prop_assert_eq!(extract_answer(&gen), Some(answer));
        }

        #[test]
        fn escaping_removes_every_cue(s in ".{0,40}") {
            let text = format!("{s}{ANSWER_CUE}{s}");
            prop_assert!(!escape_cue(&text).contains(ANSWER_CUE));
        }
    }
}
