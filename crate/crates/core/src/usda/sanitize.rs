//! Mapping arbitrary element names onto valid USD prim identifiers.

/// Replaces every character outside `[A-Za-z0-9_]` with `_` and prefixes `_`
/// when the result would start with a digit.
pub fn sanitize_name(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if out.is_empty() || out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

pub fn is_valid_identifier(name: &str) -> bool {
    !name.is_empty() && sanitize_name(name) == name
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(sanitize_name("cup-1"), "cup_1");
        assert_eq!(sanitize_name("9lives"), "_9lives");
        assert_eq!(sanitize_name("Tisch (groß)"), "Tisch__gro__");
        assert_eq!(sanitize_name(""), "_");
        assert!(is_valid_identifier("base_link"));
        assert!(!is_valid_identifier("base link"));
    }
}
