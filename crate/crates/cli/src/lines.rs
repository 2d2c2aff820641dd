use serde::Serialize;

/// Line counts of a source file. Code lines are non-blank lines with text
/// outside comments; spec lines are lines touched by a `(*@ ... *)` block;
/// ghost lines are code lines carrying `[@ghost]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LineCounts {
    pub code: usize,
    pub spec: usize,
    pub ghost: usize,
}

impl std::ops::AddAssign for LineCounts {
    fn add_assign(&mut self, o: LineCounts) {
        self.code += o.code;
        self.spec += o.spec;
        self.ghost += o.ghost;
    }
}

pub fn count_lines(text: &str) -> LineCounts {
    // Nesting depth of comments, and whether the outermost one is a spec.
    let mut depth = 0usize;
    let mut in_spec = false;
    let mut out = LineCounts::default();
    for line in text.lines() {
        let (mut code, mut spec) = (false, in_spec && depth > 0);
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() {
            if b[i..].starts_with(b"(*") {
                if depth == 0 {
                    in_spec = b[i..].starts_with(b"(*@");
                }
                depth += 1;
                spec |= in_spec;
                i += 2;
            } else if depth > 0 && b[i..].starts_with(b"*)") {
                depth -= 1;
                i += 2;
            } else {
                if depth == 0 && !b[i].is_ascii_whitespace() {
                    code = true;
                }
                i += 1;
            }
        }
        if depth == 0 {
            in_spec = false;
        }
        out.code += code as usize;
        out.spec += spec as usize;
        out.ghost += (code && line.contains("[@ghost]")) as usize;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_code_spec_and_comments() {
        let src = "(* case: X *)\nlet x = 1\n\n(*@ ensures true\n    modifies p *)\nlet f ((b : int)[@ghost]) = (* note *) b\n";
        assert_eq!(count_lines(src), LineCounts { code: 2, spec: 2, ghost: 1 });
    }

    #[test]
    fn nested_comments_stay_comments() {
        let src = "(* a (* b *) still comment\n*)\nlet y = 2 (*@ ensures true *)\n";
        assert_eq!(count_lines(src), LineCounts { code: 1, spec: 1, ghost: 0 });
    }

    #[test]
    fn empty_text() {
        assert_eq!(count_lines(""), LineCounts::default());
    }
}
