use super::{Comment, Sentence};

/// Words that end in a period without ending the sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "v", "e.g", "i.e", "cf", "no", "nos",
    "sec", "secs", "fig", "vol", "pp", "p", "art", "para", "paras", "inc", "corp", "co", "ltd",
    "dept", "gov", "govt", "fed", "reg", "regs", "cir", "approx", "est", "jan", "feb", "mar", "apr",
    "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s", "c.f.r", "u.s.c", "pub", "l",
    "stat", "ch", "subch", "pt",
];

/// Splits a comment into sentences.
///
/// Boundaries are runs of `.`, `!` or `?` (plus trailing quotes or brackets)
/// followed by whitespace, and blank lines. A period does not end a sentence
/// after a known abbreviation, a single-letter initial, a dotted token such as
/// `C.F.R.`, or when the next word starts in lowercase. Sentence texts are
/// trimmed slices of the comment, so every non-whitespace character lands in
/// exactly one sentence.
pub fn segment_sentences(comment: &Comment) -> Vec<Sentence> {
    split_spans(&comment.text)
        .into_iter()
        .enumerate()
        .map(|(i, (start, end))| Sentence::new(0, comment.comment_id.clone(), i, &comment.text[start..end]))
        .collect()
}

/// Segments every comment and assigns corpus-wide sentence ids in order,
/// starting at `first_id`.
pub fn segment_corpus(comments: &[Comment], first_id: u64) -> Vec<Sentence> {
    let mut next = first_id;
    let mut out = Vec::new();
    for comment in comments {
        for mut sentence in segment_sentences(comment) {
            sentence.sentence_id = next;
            next += 1;
            out.push(sentence);
        }
    }
    out
}

fn split_spans(text: &str) -> Vec<(usize, usize)> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c == '\n' {
            // blank line: newline, optional horizontal space, newline
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() && chars[j].1 != '\n' {
                j += 1;
            }
            if j < chars.len() && chars[j].1 == '\n' {
                cuts.push(chars[i].0);
                i = j + 1;
                continue;
            }
        }
        if matches!(c, '.' | '!' | '?') {
            let run_start = i;
            let mut j = i;
            let mut strong = false;
            while j < chars.len() && matches!(chars[j].1, '.' | '!' | '?') {
                strong |= chars[j].1 != '.';
                j += 1;
            }
            while j < chars.len() && matches!(chars[j].1, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}') {
                j += 1;
            }
            let at_end = j >= chars.len();
            if (at_end || chars[j].1.is_whitespace()) && (strong || period_ends_sentence(&chars, run_start, j)) {
                cuts.push(if at_end { text.len() } else { chars[j].0 });
            }
            i = j.max(i + 1);
            continue;
        }
        i += 1;
    }

    let mut spans = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        if cut < start {
            continue;
        }
        push_trimmed(text, start, cut, &mut spans);
        start = cut;
    }
    spans
}

fn push_trimmed(text: &str, start: usize, end: usize, spans: &mut Vec<(usize, usize)>) {
    let slice = &text[start..end];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        spans.push((start + lead, start + lead + trimmed.len()));
    }
}

/// `run_start` indexes the first period of the run; `after` is the first char
/// past any closing quotes.
fn period_ends_sentence(chars: &[(usize, char)], run_start: usize, after: usize) -> bool {
    // the whitespace-delimited word ending at the period
    let mut w = run_start;
    while w > 0 && !chars[w - 1].1.is_whitespace() {
        w -= 1;
    }
    let word: String = chars[w..run_start].iter().map(|&(_, c)| c).collect();
    let bare = word.trim_start_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
    if bare.is_empty() {
        return true;
    }
    if ABBREVIATIONS.contains(&bare.as_str()) {
        return false;
    }
    let letters: Vec<char> = bare.chars().collect();
    if letters.len() == 1 && letters[0].is_alphabetic() {
        return false;
    }
    if bare.contains('.') && bare.chars().any(|c| c.is_alphabetic()) {
        return false;
    }
    // lowercase continuation means the period was not terminal
    let next = chars[after..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
    !matches!(next, Some(c) if c.is_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comment(text: &str) -> Comment {
        Comment {
            comment_id: "c1".into(),
            docket_id: "d1".into(),
            agency: "EPA".into(),
            text: text.into(),
            received_at: None,
        }
    }

    fn texts(text: &str) -> Vec<String> {
        segment_sentences(&comment(text)).into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn two_simple_sentences() {
        assert_eq!(texts("Hello. Goodbye."), vec!["Hello.", "Goodbye."]);
    }

    #[test]
    fn citation_does_not_split() {
        assert_eq!(texts("See 40 C.F.R. 205.203 for details."), vec!["See 40 C.F.R. 205.203 for details."]);
    }

    #[test]
    fn abbreviations_and_initials() {
        assert_eq!(
            texts("Dr. Smith met Mr. J. Doe on Jan. 5. Then he left!"),
            vec!["Dr. Smith met Mr. J. Doe on Jan. 5.", "Then he left!"]
        );
        assert_eq!(texts("It costs approx. five dollars."), vec!["It costs approx. five dollars."]);
    }

    #[test]
    fn question_and_exclamation() {
        assert_eq!(texts("Why? Because!  \"Really?\" Yes"), vec!["Why?", "Because!", "\"Really?\"", "Yes"]);
    }

    #[test]
    fn blank_line_splits() {
        assert_eq!(texts("Dear EPA\n\nI oppose this"), vec!["Dear EPA", "I oppose this"]);
    }

    #[test]
    fn degenerate_text() {
        assert!(texts("").is_empty());
        assert!(texts("   \n  ").is_empty());
        assert_eq!(texts("no punctuation at all"), vec!["no punctuation at all"]);
        assert_eq!(texts("..."), vec!["..."]);
    }

    #[test]
    fn indices_and_ids() {
        let comments = vec![comment("Alpha beta. Gamma delta."), comment("Epsilon.")];
        let s = segment_corpus(&comments, 10);
        let ids: Vec<u64> = s.iter().map(|s| s.sentence_id).collect();
        let idx: Vec<usize> = s.iter().map(|s| s.index_in_comment).collect();
        assert_eq!(ids, vec![10, 11, 12]);
        assert_eq!(idx, vec![0, 1, 0]);
        assert_eq!(s[1].tokens, vec!["gamma", "delta"]);
    }
}
