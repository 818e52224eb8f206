use super::PromptType;
use crate::votes::Vote;

fn normalize_line(line: &str) -> String {
    line.chars()
        .filter(|c| !matches!(c, '*' | '_' | '#' | '`'))
        .collect::<String>()
        .trim_start_matches(|c: char| c.is_whitespace() || c == '-' || c == '>')
        .to_string()
}

/// Yes/No verdict of a text fragment: abstain when neither or both appear.
fn verdict(fragment: &str) -> Option<Vote> {
    let mut found = None;
    for word in fragment.split(|c: char| !c.is_alphanumeric()) {
        let vote = if word.eq_ignore_ascii_case("yes") {
            Vote::Positive
        } else if word.eq_ignore_ascii_case("no") {
            Vote::Negative
        } else {
            continue;
        };
        match found {
            None => found = Some(vote),
            Some(v) if v != vote => return Some(Vote::Abstain),
            Some(_) => {}
        }
    }
    found
}

/// Text after the last `Answer:` marker.
///
/// Lines starting with the marker win; otherwise the last inline occurrence
/// is used. An empty marker line takes the next non-empty line.
fn answer_fragment(response: &str) -> Option<String> {
    let lines: Vec<&str> = response.lines().collect();
    for (i, line) in lines.iter().enumerate().rev() {
        let norm = normalize_line(line);
        let lower = norm.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("answer") {
            let rest = rest.trim_start();
            if let Some(after) = rest.strip_prefix(':') {
                if after.trim().is_empty() {
                    return lines[i + 1..].iter().find(|l| !l.trim().is_empty()).map(|l| normalize_line(l));
                }
                return Some(after.to_string());
            }
        }
    }
    let lower = response.to_ascii_lowercase();
    let at = lower.rfind("answer:")?;
    let tail = &response[at + "answer:".len()..];
    Some(tail.lines().next().unwrap_or("").to_string())
}

/// Extracts a vote from a raw response.
///
/// Reason-then-answer responses are read from their last `Answer:` line.
/// Other prompt types take the first line that mentions Yes or No. A
/// fragment naming both, or neither, is an abstain.
pub fn parse_answer(raw_response: &str, prompt_type: PromptType) -> Vote {
    match prompt_type {
        PromptType::ReasonThenAnswer => answer_fragment(raw_response)
            .and_then(|f| verdict(&f))
            .unwrap_or(Vote::Abstain),
        PromptType::AnswerOnly | PromptType::AnswerThenExplain => raw_response
            .lines()
            .find_map(verdict)
            .unwrap_or(Vote::Abstain),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const R: PromptType = PromptType::ReasonThenAnswer;

    #[test]
    fn plain_answer_line() {
        assert_eq!(parse_answer("Answer: Yes", R), Vote::Positive);
        assert_eq!(parse_answer("answer: no.", R), Vote::Negative);
    }

    #[test]
    fn inline_reasoning_transcript() {
        let raw = "Step-by-step reasoning: ... 7. Therefore, it cannot be definitively concluded \
                   whether the query is entailed by the related articles. Answer: No";
        assert_eq!(parse_answer(raw, R), Vote::Negative);
    }

    #[test]
    fn no_verdict_abstains() {
        assert_eq!(parse_answer("I am not able to determine this.", R), Vote::Abstain);
        assert_eq!(parse_answer("I am not able to determine this.", PromptType::AnswerOnly), Vote::Abstain);
    }

    #[test]
    fn last_answer_line_wins() {
        let raw = "Step-by-step reasoning: <your step-by-step reasoning>\nAnswer: <a clear \"Yes\" or \"No\" response>\n\
                   Step-by-step reasoning:\n1. Article 548 applies.\n2. The exception covers the holder.\nAnswer: No";
        assert_eq!(parse_answer(raw, R), Vote::Negative);
    }

    #[test]
    fn markdown_and_punctuation() {
        assert_eq!(parse_answer("Step-by-step reasoning:\n1. x\n\n**Answer:** *Yes*.", R), Vote::Positive);
        assert_eq!(parse_answer("### Answer\n: ignored\n- **Answer**: \"No\"", R), Vote::Negative);
        assert_eq!(parse_answer("Answer:\n\nYes", R), Vote::Positive);
    }

    #[test]
    fn ambiguous_answer_abstains() {
        assert_eq!(parse_answer("Answer: Yes or No", R), Vote::Abstain);
        assert_eq!(parse_answer("Yes/No", PromptType::AnswerOnly), Vote::Abstain);
    }

    #[test]
    fn answer_only_takes_first_mention() {
        assert_eq!(parse_answer("No.", PromptType::AnswerOnly), Vote::Negative);
        let explained = "Yes.\n\nExplanation: No provision prevents this, so the query follows.";
        assert_eq!(parse_answer(explained, PromptType::AnswerThenExplain), Vote::Positive);
        // "not", "cannot", "nobody" are not standalone "No"
        assert_eq!(parse_answer("It cannot be known; nobody can say.", PromptType::AnswerOnly), Vote::Abstain);
    }

    #[test]
    fn reason_type_without_marker_abstains() {
        assert_eq!(parse_answer("Yes, I think so.", R), Vote::Abstain);
    }
}
