//! Turning prim names into query phrases.

/// Splits a prim name into lowercase words, dropping numbers and separators.
///
/// `CoffeeTable_3` gives `["coffee", "table"]`, `TVStand` gives
/// `["tv", "stand"]` and `Fridge|1` gives `["fridge"]`.
pub fn name_tokens(raw: &str) -> Vec<String> {
    let mut words = Vec::new();
    for chunk in raw.split(|c: char| !c.is_alphanumeric()) {
        let chars: Vec<char> = chunk.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let next_lower = chars.get(i + 1).is_some_and(|c| c.is_lowercase());
            let boundary = (prev.is_lowercase() && cur.is_uppercase())
                || (prev.is_alphabetic() != cur.is_alphabetic())
                || (prev.is_uppercase() && cur.is_uppercase() && next_lower);
            if boundary {
                words.push(chars[start..i].iter().collect::<String>());
                start = i;
            }
        }
        if start < chars.len() {
            words.push(chars[start..].iter().collect::<String>());
        }
    }
    words
        .into_iter()
        .filter(|w| !w.chars().all(|c| c.is_ascii_digit()))
        .map(|w| w.to_lowercase())
        .collect()
}

/// Crude English singular form, applied to both lexicon phrases and names.
pub fn singular(word: &str) -> String {
    let n = word.len();
    if n > 4 && word.ends_with("ies") {
        return format!("{}y", &word[..n - 3]);
    }
    if n > 4 && word.ends_with("ives") {
        return format!("{}ife", &word[..n - 4]);
    }
    if n > 4 && word.ends_with("lves") {
        return format!("{}f", &word[..n - 3]);
    }
    for suffix in ["sses", "xes", "ches", "shes"] {
        if n > suffix.len() + 1 && word.ends_with(suffix) {
            return word[..n - 2].to_string();
        }
    }
    if n > 3 && word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") {
        return word[..n - 1].to_string();
    }
    word.to_string()
}

/// Name tokens in singular form, the unit of lexicon matching.
pub fn normalized_tokens(raw: &str) -> Vec<String> {
    name_tokens(raw).iter().map(|w| singular(w)).collect()
}

/// The name inside an `a/an <name> in a room` sentence; other text is
/// returned unchanged.
pub fn strip_template(phrase: &str) -> &str {
    let inner = phrase
        .strip_prefix("an ")
        .or_else(|| phrase.strip_prefix("a "))
        .and_then(|p| p.strip_suffix(" in a room"));
    inner.unwrap_or(phrase)
}

/// Wraps the name in the sentence sent to text-to-triples tools:
/// `"CoffeeTable_3"` becomes `"a coffee table in a room"`. Names without
/// any words give an empty string.
pub fn preprocess_name(raw: &str) -> String {
    let words = name_tokens(raw);
    let Some(first) = words.first() else {
        return String::new();
    };
    let article = if first.starts_with(['a', 'e', 'i', 'o', 'u']) {
        "an"
    } else {
        "a"
    };
    format!("{article} {} in a room", words.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(preprocess_name("CoffeeTable_3"), "a coffee table in a room");
        assert_eq!(preprocess_name("milk_box"), "a milk box in a room");
        assert_eq!(preprocess_name("apple"), "an apple in a room");
        assert_eq!(preprocess_name("Fridge|1"), "a fridge in a room");
        assert_eq!(preprocess_name("TVStand"), "a tv stand in a room");
        assert_eq!(preprocess_name("shelf2b"), "a shelf b in a room");
        assert_eq!(preprocess_name("_42"), "");
        assert_eq!(strip_template("an apple in a room"), "apple");
        assert_eq!(strip_template("apple"), "apple");
    }

    #[test]
    fn singular_forms() {
        for (plural, one) in [
            ("boxes", "box"),
            ("cherries", "cherry"),
            ("knives", "knife"),
            ("shelves", "shelf"),
            ("glasses", "glass"),
            ("dishes", "dish"),
            ("cups", "cup"),
            ("glass", "glass"),
            ("bus", "bus"),
        ] {
            assert_eq!(singular(plural), one);
        }
    }

    proptest! {
        #[test]
        fn tokens_are_lowercase_words(raw in "[A-Za-z0-9_| -]{0,24}") {
            for t in name_tokens(&raw) {
                prop_assert!(!t.is_empty());
                prop_assert!(t.chars().all(|c| c.is_alphanumeric()));
                prop_assert_eq!(t.to_lowercase(), t.clone());
                prop_assert!(!t.chars().all(|c| c.is_ascii_digit()));
            }
        }

        #[test]
        fn numeric_suffixes_do_not_matter(word in "[A-Z][a-z]{1,8}", k in 0u32..1000) {
            prop_assert_eq!(preprocess_name(&format!("{word}_{k}")), preprocess_name(&word));
        }
    }
}
