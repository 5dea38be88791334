//! Prompt templates, compiled in from the repository's `prompts/` folder.
//!
//! Placeholders look like `{{name}}`. Rendering fails loudly if a
//! placeholder is left unfilled so a template edit cannot silently ship a
//! broken prompt.

pub const EXTRACTION: &str = include_str!("../../../prompts/extraction.txt");
pub const SQL_GENERATION: &str = include_str!("../../../prompts/sql_generation.txt");
pub const ANSWER_SUMMARY: &str = include_str!("../../../prompts/answer_summary.txt");

pub fn render(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in values {
        out = out.replace(&format!("{{{{{key}}}}}"), value);
    }
    assert!(
        !out.contains("{{"),
        "unfilled placeholder in template: {}",
        out.lines().find(|l| l.contains("{{")).unwrap_or_default()
    );
    out.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_render() {
        let s = render(EXTRACTION, &[("kinds", "- team")]);
        assert!(s.contains("- team"));
        let s = render(SQL_GENERATION, &[("schema", "TABLE x"), ("row_cap", "100")]);
        assert!(s.contains("at most 100 rows"));
        assert!(!render(ANSWER_SUMMARY, &[]).is_empty());
    }

    #[test]
    #[should_panic(expected = "unfilled placeholder")]
    fn missing_value_panics() {
        render(SQL_GENERATION, &[("schema", "x")]);
    }
}
