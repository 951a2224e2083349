/// Splits text into surface pieces for the in-process backends.
///
/// A piece is any leading whitespace followed by either a run of
/// alphanumeric characters or a single other character; trailing whitespace
/// joins the last piece. Concatenating the pieces gives back `text` exactly.
/// Whitespace-only input yields no pieces.
pub fn pieces(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some(&(_, c)) = chars.peek() {
        if !c.is_whitespace() {
            break;
        }
        chars.next();
    }
    while let Some((i, c)) = chars.next() {
        let mut end = i + c.len_utf8();
        if c.is_alphanumeric() {
            while let Some(&(j, d)) = chars.peek() {
                if !d.is_alphanumeric() {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
        }
        let piece_end = end;
        // Skip the whitespace that belongs to the next piece.
        while let Some(&(_, d)) = chars.peek() {
            if !d.is_whitespace() {
                break;
            }
            chars.next();
        }
        out.push(&text[start..piece_end]);
        start = piece_end;
    }
    if let Some(last) = out.last_mut() {
        *last = &text[start - last.len()..];
    }
    out
}

/// Vocabulary key of a surface piece.
pub fn normalize_piece(piece: &str) -> String {
    piece.trim().to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pieces_carry_leading_whitespace() {
        assert_eq!(pieces("The cat, sat."), ["The", " cat", ",", " sat", "."]);
        assert_eq!(pieces("  a  b "), ["  a", "  b "]);
        assert!(pieces("").is_empty());
        assert!(pieces(" \n").is_empty());
        assert_eq!(pieces("3.5%"), ["3", ".", "5", "%"]);
    }

    #[test]
    fn normalization_lowercases_and_trims() {
        assert_eq!(normalize_piece("  The\n"), "the");
    }

    proptest! {
        #[test]
        fn pieces_reconstruct_text(text in "\\PC{0,40}") {
            let p = pieces(&text);
            if text.trim().is_empty() {
                prop_assert!(p.is_empty());
            } else {
                prop_assert_eq!(p.concat(), text.clone());
                prop_assert!(p.iter().all(|piece| !piece.trim().is_empty()));
            }
        }
    }
}
