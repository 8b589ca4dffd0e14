//! Porter stemming algorithm (the classic 1980 suffix-stripping rules).
//!
//! The implementation follows the reference description: a word is viewed as
//! `[C](VC)^m[V]` and suffixes are stripped in five steps, with the longest
//! matching suffix in each step deciding the rule. Words of length one or two
//! are left untouched, as in the reference implementation.

/// Stems a single lowercase token in place and returns the stemmed form.
///
/// Tokens containing anything other than ASCII lowercase letters are returned
/// unchanged; the tokenizer upstream only produces lowercase alphanumerics.
pub fn stem(token: &str) -> String {
    if token.len() < 3 || !token.bytes().all(|b| b.is_ascii_lowercase()) {
        return token.to_string();
    }
    let mut w = Word {
        b: token.as_bytes().to_vec(),
        len: token.len(),
    };
    w.step1ab();
    w.step1c();
    w.step2();
    w.step3();
    w.step4();
    w.step5();
    String::from_utf8(w.b[..w.len].to_vec()).expect("ascii stays ascii")
}

struct Word {
    b: Vec<u8>,
    len: usize,
}

impl Word {
    /// True if position `i` holds a consonant. `y` counts as a consonant at
    /// the start of the word or after a vowel.
    fn cons(&self, i: usize) -> bool {
        match self.b[i] {
            b'a' | b'e' | b'i' | b'o' | b'u' => false,
            b'y' => {
                if i == 0 {
                    true
                } else {
                    !self.cons(i - 1)
                }
            }
            _ => true,
        }
    }

    /// Number of VC sequences in `b[0..upto]`, the measure `m`.
    fn measure(&self, upto: usize) -> usize {
        let mut n = 0;
        let mut i = 0;
        while i < upto && self.cons(i) {
            i += 1;
        }
        loop {
            while i < upto && !self.cons(i) {
                i += 1;
            }
            if i == upto {
                return n;
            }
            n += 1;
            while i < upto && self.cons(i) {
                i += 1;
            }
            if i == upto {
                return n;
            }
        }
    }

    fn has_vowel(&self, upto: usize) -> bool {
        (0..upto).any(|i| !self.cons(i))
    }

    /// Last two characters are the same consonant.
    fn double_cons(&self) -> bool {
        self.len >= 2 && self.b[self.len - 1] == self.b[self.len - 2] && self.cons(self.len - 1)
    }

    /// consonant-vowel-consonant ending at `i`, where the final consonant is
    /// not `w`, `x` or `y`. Used by the "add back an e" rules.
    fn cvc_at(&self, i: usize) -> bool {
        if i < 2 || !self.cons(i) || self.cons(i - 1) || !self.cons(i - 2) {
            return false;
        }
        !matches!(self.b[i], b'w' | b'x' | b'y')
    }

    fn ends(&self, s: &[u8]) -> bool {
        s.len() <= self.len && &self.b[self.len - s.len()..self.len] == s
    }

    fn replace(&mut self, suffix_len: usize, with: &[u8]) {
        self.len -= suffix_len;
        self.b.truncate(self.len);
        self.b.extend_from_slice(with);
        self.len += with.len();
    }

    /// Try each (suffix, replacement) in order; the first suffix that matches
    /// decides the rule, which fires only if the stem measure is `> min_m`.
    fn rule_list(&mut self, rules: &[(&[u8], &[u8])], min_m: usize) {
        for &(suffix, with) in rules {
            if self.ends(suffix) {
                if self.measure(self.len - suffix.len()) > min_m {
                    self.replace(suffix.len(), with);
                }
                return;
            }
        }
    }

    fn step1ab(&mut self) {
        // plurals
        if self.b[self.len - 1] == b's' {
            if self.ends(b"sses") {
                self.len -= 2;
            } else if self.ends(b"ies") {
                self.replace(3, b"i");
            } else if self.len >= 2 && self.b[self.len - 2] != b's' {
                self.len -= 1;
            }
        }
        // past tense / gerund
        if self.ends(b"eed") {
            if self.measure(self.len - 3) > 0 {
                self.len -= 1;
            }
            return;
        }
        let stripped = if self.ends(b"ed") && self.has_vowel(self.len - 2) {
            self.len -= 2;
            true
        } else if self.ends(b"ing") && self.has_vowel(self.len - 3) {
            self.len -= 3;
            true
        } else {
            false
        };
        if stripped {
            if self.ends(b"at") || self.ends(b"bl") || self.ends(b"iz") {
                self.b.truncate(self.len);
                self.b.push(b'e');
                self.len += 1;
            } else if self.double_cons() {
                if !matches!(self.b[self.len - 1], b'l' | b's' | b'z') {
                    self.len -= 1;
                }
            } else if self.measure(self.len) == 1 && self.cvc_at(self.len - 1) {
                self.b.truncate(self.len);
                self.b.push(b'e');
                self.len += 1;
            }
        }
    }

    fn step1c(&mut self) {
        if self.ends(b"y") && self.has_vowel(self.len - 1) {
            self.b[self.len - 1] = b'i';
        }
    }

    fn step2(&mut self) {
        const RULES: &[(&[u8], &[u8])] = &[
            (b"ational", b"ate"),
            (b"tional", b"tion"),
            (b"enci", b"ence"),
            (b"anci", b"ance"),
            (b"izer", b"ize"),
            (b"abli", b"able"),
            (b"alli", b"al"),
            (b"entli", b"ent"),
            (b"eli", b"e"),
            (b"ousli", b"ous"),
            (b"ization", b"ize"),
            (b"ation", b"ate"),
            (b"ator", b"ate"),
            (b"alism", b"al"),
            (b"iveness", b"ive"),
            (b"fulness", b"ful"),
            (b"ousness", b"ous"),
            (b"aliti", b"al"),
            (b"iviti", b"ive"),
            (b"biliti", b"ble"),
        ];
        self.rule_list(RULES, 0);
    }

    fn step3(&mut self) {
        const RULES: &[(&[u8], &[u8])] = &[
            (b"icate", b"ic"),
            (b"ative", b""),
            (b"alize", b"al"),
            (b"iciti", b"ic"),
            (b"ical", b"ic"),
            (b"ful", b""),
            (b"ness", b""),
        ];
        self.rule_list(RULES, 0);
    }

    fn step4(&mut self) {
        const RULES: &[(&[u8], &[u8])] = &[
            (b"al", b""),
            (b"ance", b""),
            (b"ence", b""),
            (b"er", b""),
            (b"ic", b""),
            (b"able", b""),
            (b"ible", b""),
            (b"ant", b""),
            (b"ement", b""),
            (b"ment", b""),
            (b"ent", b""),
            // "ion" needs the stem to end in s or t; handled below.
            (b"ou", b""),
            (b"ism", b""),
            (b"ate", b""),
            (b"iti", b""),
            (b"ous", b""),
            (b"ive", b""),
            (b"ize", b""),
        ];
        if self.ends(b"ion") {
            let stem = self.len - 3;
            if stem >= 1 && matches!(self.b[stem - 1], b's' | b't') && self.measure(stem) > 1 {
                self.len = stem;
            }
            return;
        }
        self.rule_list(RULES, 1);
    }

    fn step5(&mut self) {
        if self.b[self.len - 1] == b'e' {
            let m = self.measure(self.len);
            if m > 1 || (m == 1 && !self.cvc_at(self.len - 2)) {
                self.len -= 1;
            }
        }
        if self.b[self.len - 1] == b'l' && self.double_cons() && self.measure(self.len) > 1 {
            self.len -= 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::stem;

    /// Word/stem pairs taken from the worked examples in the algorithm's
    /// published description.
    #[test]
    fn reference_pairs() {
        let pairs = [
            ("caresses", "caress"),
            ("ponies", "poni"),
            ("ties", "ti"),
            ("caress", "caress"),
            ("cats", "cat"),
            ("apples", "appl"),
            ("feed", "feed"),
            ("agreed", "agre"),
            ("plastered", "plaster"),
            ("bled", "bled"),
            ("motoring", "motor"),
            ("sing", "sing"),
            ("conflated", "conflat"),
            ("troubled", "troubl"),
            ("sized", "size"),
            ("hopping", "hop"),
            ("tanned", "tan"),
            ("falling", "fall"),
            ("hissing", "hiss"),
            ("failing", "fail"),
            ("filing", "file"),
            ("happy", "happi"),
            ("sky", "sky"),
            ("relational", "relat"),
            ("conditional", "condit"),
            ("rational", "ration"),
            ("valenci", "valenc"),
            ("hesitanci", "hesit"),
            ("digitizer", "digit"),
            ("radicalli", "radic"),
            ("differentli", "differ"),
            ("vileli", "vile"),
            ("analogousli", "analog"),
            ("vietnamization", "vietnam"),
            ("predication", "predic"),
            ("operator", "oper"),
            ("feudalism", "feudal"),
            ("decisiveness", "decis"),
            ("hopefulness", "hope"),
            ("callousness", "callous"),
            ("formaliti", "formal"),
            ("sensitiviti", "sensit"),
            ("sensibiliti", "sensibl"),
            ("triplicate", "triplic"),
            ("formative", "form"),
            ("formalize", "formal"),
            ("electriciti", "electr"),
            ("electrical", "electr"),
            ("hopeful", "hope"),
            ("goodness", "good"),
            ("revival", "reviv"),
            ("allowance", "allow"),
            ("inference", "infer"),
            ("airliner", "airlin"),
            ("gyroscopic", "gyroscop"),
            ("adjustable", "adjust"),
            ("defensible", "defens"),
            ("irritant", "irrit"),
            ("replacement", "replac"),
            ("adjustment", "adjust"),
            ("dependent", "depend"),
            ("adoption", "adopt"),
            ("communism", "commun"),
            ("activate", "activ"),
            ("angulariti", "angular"),
            ("homologous", "homolog"),
            ("effective", "effect"),
            ("bowdlerize", "bowdler"),
            ("probate", "probat"),
            ("rate", "rate"),
            ("cease", "ceas"),
            ("controll", "control"),
            ("roll", "roll"),
        ];
        for (word, expected) in pairs {
            assert_eq!(stem(word), expected, "stem({word:?})");
        }
    }

    #[test]
    fn short_and_non_alpha_tokens_pass_through() {
        assert_eq!(stem("as"), "as");
        assert_eq!(stem("a"), "a");
        assert_eq!(stem("42"), "42");
        assert_eq!(stem("x86"), "x86");
        assert_eq!(stem(""), "");
    }
}
