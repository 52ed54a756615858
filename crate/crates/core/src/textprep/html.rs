use super::collapse_whitespace;

const ENTITIES: [(&str, char); 5] = [
    ("&amp;", '&'),
    ("&lt;", '<'),
    ("&gt;", '>'),
    ("&quot;", '"'),
    ("&apos;", '\''),
];

/// Removes `<...>` tags (each replaced by a space), decodes the five
/// XML-predefined entities, then collapses whitespace.
///
/// A `<` only opens a tag when followed by a letter, `/`, `!` or `?`, and the
/// tag must close before the next `<`. Anything else, including an unclosed
/// `<`, is kept verbatim.
pub fn strip_html(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('<') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        match tag_len(after) {
            Some(len) => {
                out.push(' ');
                rest = &after[len..];
            }
            None => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    collapse_whitespace(&decode_entities(&out))
}

/// Byte length of the tag body including the closing `>`, if `s` (the text
/// right after a `<`) starts a tag.
fn tag_len(s: &str) -> Option<usize> {
    let first = s.chars().next()?;
    if !(first.is_ascii_alphabetic() || matches!(first, '/' | '!' | '?')) {
        return None;
    }
    for (i, c) in s.char_indices() {
        match c {
            '>' => return Some(i + 1),
            '<' => return None,
            _ => {}
        }
    }
    None
}

fn decode_entities(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    'outer: while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        for (name, ch) in ENTITIES {
            if let Some(after) = tail.strip_prefix(name) {
                out.push(ch);
                rest = after;
                continue 'outer;
            }
        }
        out.push('&');
        rest = &tail[1..];
    }
    out.push_str(rest);
    out
}
