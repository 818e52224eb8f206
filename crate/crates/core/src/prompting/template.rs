use super::PromptType;
use crate::votes::EntailmentExample;

pub const PREAMBLE: &str = "Given a query (which is delimited with triple backticks) and the related articles \
(which is also delimited with triple backticks). Is the query entailed by the related articles?";

pub const ANSWER_ONLY_INSTRUCTION: &str =
    "Please provide a simple answer of either \"Yes\" or \"No\", without any explanation.";

pub const ANSWER_THEN_EXPLAIN_INSTRUCTION: &str =
    "Please provide the answer of \"Yes\" or \"No\", then provide an explanation.";

pub const REASON_THEN_ANSWER_INSTRUCTION: &str = "To answer, please use the following format:\n  \
Step-by-step reasoning: <your step-by-step reasoning>\n  \
Answer: <a clear \"Yes\" or \"No\" response>";

/// The single user message sent for `example`.
///
/// Articles are joined by blank lines inside one triple-backtick block.
pub fn render_prompt(example: &EntailmentExample, prompt_type: PromptType) -> String {
    let instruction = match prompt_type {
        PromptType::AnswerOnly => ANSWER_ONLY_INSTRUCTION,
        PromptType::AnswerThenExplain => ANSWER_THEN_EXPLAIN_INSTRUCTION,
        PromptType::ReasonThenAnswer => REASON_THEN_ANSWER_INSTRUCTION,
    };
    format!(
        "{PREAMBLE} {instruction}\n\nQuery: ```{}```\n\nRelated articles: ```{}```",
        example.query,
        example.articles.join("\n\n")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example(query: &str, articles: &[&str]) -> EntailmentExample {
        EntailmentExample {
            id: "q".into(),
            query: query.into(),
            articles: articles.iter().map(|a| a.to_string()).collect(),
            gold: None,
        }
    }

    #[test]
    fn answer_only_literal() {
        let p = render_prompt(&example("Q", &["A"]), PromptType::AnswerOnly);
        assert!(p.contains("Please provide a simple answer of either \"Yes\" or \"No\", without any explanation."));
        assert!(p.starts_with("Given a query (which is delimited with triple backticks)"));
    }

    #[test]
    fn reason_then_answer_format_lines() {
        let p = render_prompt(&example("Q", &["A"]), PromptType::ReasonThenAnswer);
        assert!(p.contains("\n  Step-by-step reasoning: <your step-by-step reasoning>\n"));
        assert!(p.contains("\n  Answer: <a clear \"Yes\" or \"No\" response>\n"));
    }

    #[test]
    fn substitution_inside_backticks() {
        let p = render_prompt(&example("Q", &["A"]), PromptType::AnswerThenExplain);
        assert!(p.ends_with("Query: ```Q```\n\nRelated articles: ```A```"));
        let two = render_prompt(&example("Q", &["Article 1", "Article 2"]), PromptType::AnswerOnly);
        assert!(two.ends_with("Related articles: ```Article 1\n\nArticle 2```"));
    }

    #[test]
    fn distinct_per_prompt_type() {
        let ex = example("Q", &["A"]);
        let rendered: std::collections::HashSet<String> =
            PromptType::ALL.iter().map(|&p| render_prompt(&ex, p)).collect();
        assert_eq!(rendered.len(), 3);
    }
}
