use super::vocab::TITLE;

/// Lowercases and splits on whitespace; every non-alphanumeric character is
/// a token of its own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            tokens.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(AsRef::as_ref)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Replaces every occurrence of the title's token sequence with the generic
/// title token, scanning greedily left to right.
pub fn mask_title(tokens: &[String], title: &str) -> Vec<String> {
    let pattern = tokenize(title);
    if pattern.is_empty() {
        return tokens.to_vec();
    }
    let mut out = Vec::with_capacity(tokens.len());
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i..].starts_with(&pattern) {
            out.push(TITLE.to_string());
            i += pattern.len();
        } else {
            out.push(tokens[i].clone());
            i += 1;
        }
    }
    out
}

/// Puts the original title back in place of the generic title token.
pub fn unmask_title(tokens: &[String], title: Option<&str>) -> Vec<String> {
    let Some(title) = title else {
        return tokens.to_vec();
    };
    let title_tokens = tokenize(title);
    let mut out = Vec::with_capacity(tokens.len());
    for t in tokens {
        if t == TITLE {
            out.extend(title_tokens.iter().cloned());
        } else {
            out.push(t.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &[&str]) -> Vec<String> {
        s.iter().map(|t| t.to_string()).collect()
    }

    #[test]
    fn splits_punctuation() {
        assert_eq!(tokenize("Great movie!"), toks(&["great", "movie", "!"]));
        assert_eq!(tokenize("don't  STOP"), toks(&["don", "'", "t", "stop"]));
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \n").is_empty());
    }

    #[test]
    fn masks_title() {
        let t = toks(&["coach", "carter", "is", "fun"]);
        assert_eq!(mask_title(&t, "Coach Carter"), toks(&[TITLE, "is", "fun"]));
    }

    #[test]
    fn mask_without_title_is_identity() {
        let t = toks(&["a", "fine", "film"]);
        assert_eq!(mask_title(&t, "Coach Carter"), t);
        assert_eq!(mask_title(&t, ""), t);
    }

    #[test]
    fn overlapping_title_is_greedy() {
        let t = toks(&["x", "x", "x"]);
        assert_eq!(mask_title(&t, "x x"), toks(&[TITLE, "x"]));
    }

    #[test]
    fn unmask_restores_title() {
        let t = toks(&[TITLE, "is", "fun"]);
        assert_eq!(
            unmask_title(&t, Some("Coach Carter")),
            toks(&["coach", "carter", "is", "fun"])
        );
    }

    proptest! {
        #[test]
        fn tokenize_detokenize_round_trip(
            words in proptest::collection::vec(
                prop_oneof!["[a-z0-9]{1,8}", "[!?.,;:'\"()-]"], 0..20)
        ) {
            prop_assert_eq!(tokenize(&detokenize(&words)), words);
        }
    }
}
