//! Shows each cleaning step applied to the given texts (or a built-in
//! sample) and the final tokens.
//!
//! cargo run --example preprocess_text -- "<p>Caf&eacute; isn't open</p>"

use hierdoc::textprep::{expand_contractions, fold_accents, preprocess, remove_special_chars, strip_html, tokenize};

const SAMPLE: &str = "<div class=\"story\"><b>Beyonc\u{e9}</b> says: &quot;We can't've known!&quot; \u{2013} it's 3 o'clock &amp; x < y</div>";

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let texts = if args.is_empty() { vec![SAMPLE.to_owned()] } else { args };
    for text in texts {
        println!("input         {text:?}");
        let s = strip_html(&text);
        println!("strip_html    {s:?}");
        let s = s.to_lowercase();
        println!("lowercase     {s:?}");
        let s = fold_accents(&s);
        println!("fold_accents  {s:?}");
        let s = expand_contractions(&s);
        println!("contractions  {s:?}");
        let s = remove_special_chars(&s);
        println!("special chars {s:?}");
        let clean = preprocess(&text);
        assert_eq!(clean.as_str(), s);
        let tokens = tokenize(&clean);
        println!("{} tokens     {:?}\n", tokens.len(), tokens.tokens());
    }
}
