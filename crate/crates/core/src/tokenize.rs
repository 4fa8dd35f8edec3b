//! Identifier tokenization for resource ids, activity names and widget labels.

/// Splits an identifier on underscores (and any other non-alphanumeric
/// separator) and on camel-case boundaries. Token casing is preserved.
///
/// A boundary is placed before an upper-case letter that follows a
/// lower-case letter or digit, and before the last capital of an acronym
/// run that is followed by a lower-case letter (`HTTPServer` -> `HTTP`,
/// `Server`).
pub fn tokenize_identifier(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();

    for (i, &c) in chars.iter().enumerate() {
        if !c.is_alphanumeric() {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            continue;
        }
        if !current.is_empty() && c.is_uppercase() {
            let prev = chars[i - 1];
            let next_is_lower = chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            let camel = prev.is_lowercase() || prev.is_numeric();
            let acronym_end = prev.is_uppercase() && next_is_lower;
            if camel || acronym_end {
                tokens.push(std::mem::take(&mut current));
            }
        }
        current.push(c);
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Tokenizes and re-joins with single spaces: `AddAccount` -> `Add Account`.
pub fn humanize_identifier(raw: &str) -> String {
    tokenize_identifier(raw).join(" ")
}

/// Case-folded, trimmed, whitespace-collapsed form used for name comparison.
pub fn normalize_name(raw: &str) -> String {
    raw.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Character-scan reference splitter, written independently of the
    /// implementation above: mark every index where a new token begins, then
    /// cut.
    fn reference_split(raw: &str) -> Vec<String> {
        let cs: Vec<char> = raw.chars().collect();
        let mut starts = vec![false; cs.len()];
        for i in 0..cs.len() {
            if !cs[i].is_alphanumeric() {
                continue;
            }
            starts[i] = i == 0
                || !cs[i - 1].is_alphanumeric()
                || (cs[i].is_uppercase() && (cs[i - 1].is_lowercase() || cs[i - 1].is_numeric()))
                || (cs[i].is_uppercase()
                    && cs[i - 1].is_uppercase()
                    && i + 1 < cs.len()
                    && cs[i + 1].is_lowercase());
        }
        let mut out: Vec<String> = Vec::new();
        for i in 0..cs.len() {
            if !cs[i].is_alphanumeric() {
                continue;
            }
            if starts[i] {
                out.push(String::new());
            }
            out.last_mut().unwrap().push(cs[i]);
        }
        out
    }

    #[test]
    fn underscore_split() {
        assert_eq!(tokenize_identifier("add_account"), vec!["add", "account"]);
    }

    #[test]
    fn camel_case_activity_name() {
        assert_eq!(
            tokenize_identifier("AddPersonalInformation"),
            vec!["Add", "Personal", "Information"]
        );
    }

    #[test]
    fn mixed_underscore_and_camel() {
        let expected = reference_split("btn_incomeTotal");
        assert_eq!(expected, vec!["btn", "income", "Total"]);
        assert_eq!(tokenize_identifier("btn_incomeTotal"), expected);
    }

    #[test]
    fn acronyms_and_digits() {
        assert_eq!(tokenize_identifier("HTTPServer"), vec!["HTTP", "Server"]);
        assert_eq!(tokenize_identifier("step2Done"), vec!["step2", "Done"]);
        assert!(tokenize_identifier("__").is_empty());
    }

    #[test]
    fn humanize_joins_tokens() {
        assert_eq!(humanize_identifier("AddAccount"), "Add Account");
        assert_eq!(normalize_name("  ADD   Income "), "add income");
    }

    proptest! {
        #[test]
        fn matches_reference_and_keeps_letters(raw in "[A-Za-z0-9_ -]{1,24}") {
            let tokens = tokenize_identifier(&raw);
            prop_assert_eq!(&tokens, &reference_split(&raw));
            prop_assert!(tokens.iter().all(|t| !t.is_empty()));
            let letters: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
            prop_assert_eq!(tokens.concat(), letters);
        }
    }
}
