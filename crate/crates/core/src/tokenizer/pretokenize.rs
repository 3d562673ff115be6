//! GPT-2 style pre-tokenization: runs of letters, numbers or other symbols,
//! each optionally preceded by one space; remaining whitespace stands alone.

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Letter,
    Number,
    Space,
    Other,
}

fn class(c: char) -> Class {
    if c.is_whitespace() {
        Class::Space
    } else if c.is_alphabetic() {
        Class::Letter
    } else if c.is_numeric() {
        Class::Number
    } else {
        Class::Other
    }
}

/// Splits `text` into pre-tokens whose concatenation is `text`.
pub fn pretokenize(text: &str) -> Vec<&str> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let n = chars.len();
    let offset = |i: usize| if i < n { chars[i].0 } else { text.len() };
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut start = i;
        if class(chars[i].1) == Class::Space {
            let mut j = i;
            while j < n && class(chars[j].1) == Class::Space {
                j += 1;
            }
            if j == n {
                out.push(&text[offset(i)..]);
                break;
            }
            // Leave the final whitespace char for the following token.
            if j - i > 1 {
                out.push(&text[offset(i)..offset(j - 1)]);
            }
            if chars[j - 1].1 != ' ' {
                out.push(&text[offset(j - 1)..offset(j)]);
                i = j;
                continue;
            }
            start = j - 1;
            i = j;
        }
        let cls = class(chars[i].1);
        let mut k = i + 1;
        while k < n && class(chars[k].1) == cls {
            k += 1;
        }
        out.push(&text[offset(start)..offset(k)]);
        i = k;
    }
    out
}
