//! Porter stemmer (the 1980 algorithm), used by the stem-matching pass of
//! the METEOR variant. Operates on lowercase ASCII; anything else is
//! returned unchanged.

fn is_consonant(word: &[u8], i: usize) -> bool {
    match word[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => {
            if i == 0 {
                true
            } else {
                !is_consonant(word, i - 1)
            }
        }
        _ => true,
    }
}

/// The measure m of the stem word[..=j]: number of VC sequences.
fn measure(word: &[u8], j: usize) -> usize {
    let mut m = 0;
    let mut i = 0;
    // skip initial consonants
    while i <= j {
        if !is_consonant(word, i) {
            break;
        }
        i += 1;
    }
    loop {
        // skip vowels
        while i <= j {
            if is_consonant(word, i) {
                break;
            }
            i += 1;
        }
        if i > j {
            return m;
        }
        m += 1;
        // skip consonants
        while i <= j {
            if !is_consonant(word, i) {
                break;
            }
            i += 1;
        }
        if i > j {
            return m;
        }
    }
}

fn has_vowel(word: &[u8], j: usize) -> bool {
    (0..=j).any(|i| !is_consonant(word, i))
}

fn ends_double_consonant(word: &[u8]) -> bool {
    let n = word.len();
    n >= 2 && word[n - 1] == word[n - 2] && is_consonant(word, n - 1)
}

/// cvc at the end, where the final consonant is not w, x, or y.
fn ends_cvc(word: &[u8]) -> bool {
    let n = word.len();
    if n < 3 {
        return false;
    }
    is_consonant(word, n - 3)
        && !is_consonant(word, n - 2)
        && is_consonant(word, n - 1)
        && !matches!(word[n - 1], b'w' | b'x' | b'y')
}

struct Stemmer {
    word: Vec<u8>,
}

impl Stemmer {
    fn ends_with(&self, suffix: &str) -> bool {
        self.word.ends_with(suffix.as_bytes())
    }

    fn stem_end(&self, suffix: &str) -> Option<usize> {
        // index of the last byte of the stem once suffix is removed
        if self.ends_with(suffix) && self.word.len() > suffix.len() {
            Some(self.word.len() - suffix.len() - 1)
        } else {
            None
        }
    }

    fn replace(&mut self, suffix: &str, replacement: &str) {
        let keep = self.word.len() - suffix.len();
        self.word.truncate(keep);
        self.word.extend_from_slice(replacement.as_bytes());
    }

    /// Replace `suffix` by `replacement` when measure(stem) > threshold.
    fn replace_if_measure(&mut self, suffix: &str, replacement: &str, threshold: usize) -> bool {
        if let Some(j) = self.stem_end(suffix) {
            if measure(&self.word, j) > threshold {
                self.replace(suffix, replacement);
            }
            true // suffix matched, stop scanning alternatives
        } else {
            false
        }
    }

    fn step_1a(&mut self) {
        if self.ends_with("sses") {
            self.replace("sses", "ss");
        } else if self.ends_with("ies") {
            self.replace("ies", "i");
        } else if self.ends_with("ss") {
            // unchanged
        } else if self.ends_with("s") && self.word.len() > 1 {
            self.replace("s", "");
        }
    }

    fn step_1b(&mut self) {
        if let Some(j) = self.stem_end("eed") {
            if measure(&self.word, j) > 0 {
                self.replace("eed", "ee");
            }
            return;
        }
        let stripped = if let Some(j) = self.stem_end("ed") {
            if has_vowel(&self.word, j) {
                self.replace("ed", "");
                true
            } else {
                false
            }
        } else if let Some(j) = self.stem_end("ing") {
            if has_vowel(&self.word, j) {
                self.replace("ing", "");
                true
            } else {
                false
            }
        } else {
            false
        };
        if !stripped {
            return;
        }
        if self.ends_with("at") {
            self.replace("at", "ate");
        } else if self.ends_with("bl") {
            self.replace("bl", "ble");
        } else if self.ends_with("iz") {
            self.replace("iz", "ize");
        } else if ends_double_consonant(&self.word) {
            let last = *self.word.last().unwrap();
            if !matches!(last, b'l' | b's' | b'z') {
                self.word.pop();
            }
        } else if measure(&self.word, self.word.len() - 1) == 1 && ends_cvc(&self.word) {
            self.word.push(b'e');
        }
    }

    fn step_1c(&mut self) {
        if let Some(j) = self.stem_end("y") {
            if has_vowel(&self.word, j) {
                self.replace("y", "i");
            }
        }
    }

    fn step_2(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("ational", "ate"),
            ("tional", "tion"),
            ("enci", "ence"),
            ("anci", "ance"),
            ("izer", "ize"),
            ("abli", "able"),
            ("alli", "al"),
            ("entli", "ent"),
            ("eli", "e"),
            ("ousli", "ous"),
            ("ization", "ize"),
            ("ation", "ate"),
            ("ator", "ate"),
            ("alism", "al"),
            ("iveness", "ive"),
            ("fulness", "ful"),
            ("ousness", "ous"),
            ("aliti", "al"),
            ("iviti", "ive"),
            ("biliti", "ble"),
        ];
        for (suffix, replacement) in RULES {
            if self.replace_if_measure(suffix, replacement, 0) {
                return;
            }
        }
    }

    fn step_3(&mut self) {
        const RULES: &[(&str, &str)] = &[
            ("icate", "ic"),
            ("ative", ""),
            ("alize", "al"),
            ("iciti", "ic"),
            ("ical", "ic"),
            ("ful", ""),
            ("ness", ""),
        ];
        for (suffix, replacement) in RULES {
            if self.replace_if_measure(suffix, replacement, 0) {
                return;
            }
        }
    }

    fn step_4(&mut self) {
        const SUFFIXES: &[&str] = &[
            "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement", "ment", "ent",
            "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
        ];
        for suffix in SUFFIXES {
            if let Some(j) = self.stem_end(suffix) {
                if measure(&self.word, j) > 1 {
                    if *suffix == "ion" && !matches!(self.word[j], b's' | b't') {
                        return;
                    }
                    self.replace(suffix, "");
                }
                return;
            }
        }
    }

    fn step_5(&mut self) {
        // 5a
        if self.ends_with("e") && self.word.len() > 1 {
            let j = self.word.len() - 2;
            let m = measure(&self.word, j);
            let mut without_e = self.word.clone();
            without_e.pop();
            if m > 1 || (m == 1 && !ends_cvc(&without_e)) {
                self.word.pop();
            }
        }
        // 5b
        if ends_double_consonant(&self.word)
            && *self.word.last().unwrap() == b'l'
            && measure(&self.word, self.word.len() - 1) > 1
        {
            self.word.pop();
        }
    }
}

/// Stem a single lowercase word. Words shorter than three characters or
/// containing non-ASCII-alphabetic characters come back unchanged.
pub fn porter_stem(word: &str) -> String {
    if word.len() <= 2 || !word.bytes().all(|b| b.is_ascii_lowercase()) {
        return word.to_string();
    }
    let mut stemmer = Stemmer {
        word: word.as_bytes().to_vec(),
    };
    stemmer.step_1a();
    stemmer.step_1b();
    stemmer.step_1c();
    stemmer.step_2();
    stemmer.step_3();
    stemmer.step_4();
    stemmer.step_5();
    String::from_utf8(stemmer.word).expect("stemming preserves ASCII")
}
