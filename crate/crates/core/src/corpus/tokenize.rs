/// Lowercased word tokens.
///
/// Tokens are maximal runs of alphanumeric characters. A hyphen, period or
/// apostrophe is kept when it sits between two alphanumerics, so `well-known`,
/// `205.203`, `c.f.r` and `don't` stay whole; everything else separates tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.extend(c.to_lowercase());
            continue;
        }
        let joins = is_joiner(c)
            && !current.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if joins {
            current.push(if c == '\u{2019}' { '\'' } else { c });
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '.' | '\'' | '\u{2019}')
}
