//! Parser for the evaluation output contract.
//!
//! The evaluation prompt asks for a Python dictionary, but models answer in
//! anything from strict JSON to single-quoted dicts wrapped in prose. The
//! parser finds the outermost brace-delimited object in the response and
//! reads it with a small recursive-descent grammar accepting both quote
//! styles. Response content is data only; nothing is evaluated.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Dimension, DimensionEvaluation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("no dictionary object found in response")]
    NoObject,
    #[error("malformed dictionary: {0}")]
    Malformed(String),
    #[error("missing key {key:?}")]
    Incomplete { key: String },
    #[error("score for {key:?} must be an integer in range: got {value}")]
    Range { key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Dict(Vec<(String, Value)>),
    Str(String),
    Int(i64),
    Float(f64),
}

impl Value {
    fn get<'a>(&'a self, key: &str) -> Option<&'a Value> {
        match self {
            // last occurrence wins, matching Python dict literals
            Value::Dict(entries) => entries
                .iter()
                .rev()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v),
            _ => None,
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> Parser {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, expected: char) -> Result<(), ParseError> {
        match self.bump() {
            Some(c) if c == expected => Ok(()),
            Some(c) => Err(ParseError::Malformed(format!(
                "expected {expected:?}, found {c:?} at offset {}",
                self.pos
            ))),
            None => Err(ParseError::Malformed(format!(
                "expected {expected:?}, found end of input"
            ))),
        }
    }

    fn parse_value(&mut self) -> Result<Value, ParseError> {
        self.skip_whitespace();
        match self.peek() {
            Some('{') => self.parse_dict(),
            Some('\'') | Some('"') => self.parse_string().map(Value::Str),
            Some(c) if c == '-' || c == '+' || c.is_ascii_digit() => self.parse_number(),
            Some(c) => Err(ParseError::Malformed(format!(
                "unexpected character {c:?} at offset {}",
                self.pos
            ))),
            None => Err(ParseError::Malformed("unexpected end of input".into())),
        }
    }

    fn parse_dict(&mut self) -> Result<Value, ParseError> {
        self.expect('{')?;
        let mut entries = Vec::new();
        loop {
            self.skip_whitespace();
            if self.peek() == Some('}') {
                self.pos += 1;
                return Ok(Value::Dict(entries));
            }
            let key = self.parse_string()?;
            self.skip_whitespace();
            self.expect(':')?;
            let value = self.parse_value()?;
            entries.push((key, value));
            self.skip_whitespace();
            match self.peek() {
                Some(',') => {
                    self.pos += 1;
                }
                Some('}') => {}
                other => {
                    return Err(ParseError::Malformed(format!(
                        "expected ',' or '}}' after dict entry, found {other:?}"
                    )))
                }
            }
        }
    }

    fn parse_string(&mut self) -> Result<String, ParseError> {
        self.skip_whitespace();
        let quote = match self.bump() {
            Some(c @ ('\'' | '"')) => c,
            other => {
                return Err(ParseError::Malformed(format!(
                    "expected a quoted string, found {other:?}"
                )))
            }
        };
        let mut out = String::new();
        loop {
            match self.bump() {
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(c) => out.push(c),
                    None => return Err(ParseError::Malformed("unterminated escape".into())),
                },
                Some(c) if c == quote => return Ok(out),
                Some(c) => out.push(c),
                None => return Err(ParseError::Malformed("unterminated string".into())),
            }
        }
    }

    fn parse_number(&mut self) -> Result<Value, ParseError> {
        let start = self.pos;
        if matches!(self.peek(), Some('-') | Some('+')) {
            self.pos += 1;
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                self.pos += 1;
            } else if c == '.' || c == 'e' || c == 'E' {
                is_float = true;
                self.pos += 1;
                if matches!(self.peek(), Some('-') | Some('+')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let token: String = self.chars[start..self.pos].iter().collect();
        if is_float {
            token
                .parse::<f64>()
                .map(Value::Float)
                .map_err(|_| ParseError::Malformed(format!("bad number {token:?}")))
        } else {
            token
                .parse::<i64>()
                .map(Value::Int)
                .map_err(|_| ParseError::Malformed(format!("bad number {token:?}")))
        }
    }

    /// Byte range of the outermost brace-delimited object, ignoring braces
    /// inside string literals.
    fn outermost_object(text: &str) -> Option<(usize, usize)> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let start = chars.iter().position(|&(_, c)| c == '{')?;
        let mut depth = 0usize;
        let mut in_string: Option<char> = None;
        let mut escaped = false;
        for &(offset, c) in &chars[start..] {
            if let Some(quote) = in_string {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == quote {
                    in_string = None;
                }
                continue;
            }
            match c {
                '\'' | '"' => in_string = Some(c),
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let end = offset + c.len_utf8();
                        return Some((chars[start].0, end));
                    }
                }
                _ => {}
            }
        }
        None
    }
}

fn integer_score(value: &Value, key: &str) -> Result<i64, ParseError> {
    match value {
        Value::Int(n) => Ok(*n),
        // an integral float like 4.0 carries an integer value; a fractional
        // score is rejected rather than rounded
        Value::Float(f) if f.fract() == 0.0 && f.is_finite() => Ok(*f as i64),
        Value::Float(f) => Err(ParseError::Range {
            key: key.to_string(),
            value: f.to_string(),
        }),
        Value::Str(s) => Err(ParseError::Range {
            key: key.to_string(),
            value: format!("{s:?}"),
        }),
        Value::Dict(_) => Err(ParseError::Range {
            key: key.to_string(),
            value: "a nested object".into(),
        }),
    }
}

/// Parse the evaluation schema out of a model response.
///
/// Prose before or after the object is ignored. Every dimension in
/// `dimensions` must be present with an integer score in `[1, scale_max]`
/// and a non-empty rationale under the `explanation` map.
pub fn parse_evaluation_response(
    text: &str,
    scale_max: i64,
    dimensions: &[Dimension],
) -> Result<BTreeMap<Dimension, DimensionEvaluation>, ParseError> {
    let (start, end) = Parser::outermost_object(text).ok_or(ParseError::NoObject)?;
    let slice = &text[start..end];
    let mut parser = Parser::new(slice);
    let root = parser.parse_dict()?;

    let explanations = root.get("explanation");
    let mut out = BTreeMap::new();
    for &dimension in dimensions {
        let key = dimension.id();
        let raw = root
            .get(key)
            .ok_or_else(|| ParseError::Incomplete { key: key.into() })?;
        let score = integer_score(raw, key)?;
        if score < 1 || score > scale_max {
            return Err(ParseError::Range {
                key: key.into(),
                value: score.to_string(),
            });
        }
        let rationale = match explanations {
            Some(map) => match map.get(key) {
                Some(Value::Str(s)) if !s.is_empty() => s.clone(),
                Some(Value::Str(_)) | None => {
                    return Err(ParseError::Incomplete {
                        key: format!("explanation.{key}"),
                    })
                }
                Some(_) => {
                    return Err(ParseError::Malformed(format!(
                        "explanation for {key:?} is not a string"
                    )))
                }
            },
            None => {
                return Err(ParseError::Incomplete {
                    key: "explanation".into(),
                })
            }
        };
        out.insert(
            dimension,
            DimensionEvaluation {
                dimension,
                score,
                rationale,
            },
        );
    }
    Ok(out)
}

fn escape_single_quoted(text: &str) -> String {
    text.replace('\\', "\\\\").replace('\'', "\\'")
}

/// Serialize an evaluation map back into the schema the evaluation prompt
/// requests. `parse_evaluation_response` round-trips this exactly.
pub fn to_schema_string(evaluations: &BTreeMap<Dimension, DimensionEvaluation>) -> String {
    let mut out = String::from("{");
    for entry in evaluations.values() {
        out.push_str(&format!("'{}': {}, ", entry.dimension.id(), entry.score));
    }
    out.push_str("'explanation': {");
    for (i, entry) in evaluations.values().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format!(
            "'{}': '{}'",
            entry.dimension.id(),
            escape_single_quoted(&entry.rationale)
        ));
    }
    out.push_str("}}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts::LOOP_DIMENSIONS;

    const VALID: &str = "{'clarity': 4, 'accuracy': 5, 'coverage': 3, 'overall': 4, \
        'explanation': {'clarity': 'c', 'accuracy': 'a', 'coverage': 'v', 'overall': 'o'}}";

    #[test]
    fn parses_single_quoted_dict() {
        let parsed = parse_evaluation_response(VALID, 5, &LOOP_DIMENSIONS).unwrap();
        assert_eq!(parsed[&Dimension::Clarity].score, 4);
        assert_eq!(parsed[&Dimension::Accuracy].score, 5);
        assert_eq!(parsed[&Dimension::Coverage].score, 3);
        assert_eq!(parsed[&Dimension::Overall].score, 4);
        assert_eq!(parsed[&Dimension::Coverage].rationale, "v");
    }

    #[test]
    fn prose_wrapping_is_ignored() {
        let wrapped = format!("Sure! Here is my rating: {VALID} Hope that helps.");
        let bare = parse_evaluation_response(VALID, 5, &LOOP_DIMENSIONS).unwrap();
        let unwrapped = parse_evaluation_response(&wrapped, 5, &LOOP_DIMENSIONS).unwrap();
        assert_eq!(bare, unwrapped);
    }

    #[test]
    fn strict_json_is_accepted() {
        let json = "{\"clarity\": 4, \"accuracy\": 5, \"coverage\": 3, \"overall\": 4, \
            \"explanation\": {\"clarity\": \"c\", \"accuracy\": \"a\", \
            \"coverage\": \"v\", \"overall\": \"o\"}}";
        assert!(parse_evaluation_response(json, 5, &LOOP_DIMENSIONS).is_ok());
    }

    #[test]
    fn out_of_range_score_is_range_error() {
        let high = VALID.replace("'clarity': 4", "'clarity': 9");
        assert!(matches!(
            parse_evaluation_response(&high, 5, &LOOP_DIMENSIONS),
            Err(ParseError::Range { key, .. }) if key == "clarity"
        ));
    }

    #[test]
    fn fractional_score_is_rejected_not_rounded() {
        let fractional = VALID.replace("'accuracy': 5", "'accuracy': 4.5");
        assert!(matches!(
            parse_evaluation_response(&fractional, 5, &LOOP_DIMENSIONS),
            Err(ParseError::Range { key, .. }) if key == "accuracy"
        ));
    }

    #[test]
    fn missing_dimension_names_the_key() {
        let missing = "{'clarity': 4, 'accuracy': 5, 'coverage': 3, \
            'explanation': {'clarity': 'c', 'accuracy': 'a', 'coverage': 'v'}}";
        assert!(matches!(
            parse_evaluation_response(missing, 5, &LOOP_DIMENSIONS),
            Err(ParseError::Incomplete { key }) if key == "overall"
        ));
    }

    #[test]
    fn no_object_at_all() {
        assert_eq!(
            parse_evaluation_response("I would rate this 4 out of 5.", 5, &LOOP_DIMENSIONS),
            Err(ParseError::NoObject)
        );
    }

    #[test]
    fn apostrophes_inside_double_quoted_strings() {
        let tricky = "{\"clarity\": 4, \"accuracy\": 5, \"coverage\": 3, \"overall\": 4, \
            \"explanation\": {\"clarity\": \"it's fine\", \"accuracy\": \"a\", \
            \"coverage\": \"v\", \"overall\": \"o\"}}";
        let parsed = parse_evaluation_response(tricky, 5, &LOOP_DIMENSIONS).unwrap();
        assert_eq!(parsed[&Dimension::Clarity].rationale, "it's fine");
    }

    #[test]
    fn schema_string_round_trips() {
        let parsed = parse_evaluation_response(VALID, 5, &LOOP_DIMENSIONS).unwrap();
        let serialized = to_schema_string(&parsed);
        let reparsed = parse_evaluation_response(&serialized, 5, &LOOP_DIMENSIONS).unwrap();
        assert_eq!(parsed, reparsed);
    }

    #[test]
    fn round_trips_escaped_rationales() {
        let mut evals = BTreeMap::new();
        for &dimension in &LOOP_DIMENSIONS {
            evals.insert(
                dimension,
                DimensionEvaluation {
                    dimension,
                    score: 3,
                    rationale: "uses 'quotes' and \\ slashes".into(),
                },
            );
        }
        let reparsed =
            parse_evaluation_response(&to_schema_string(&evals), 5, &LOOP_DIMENSIONS).unwrap();
        assert_eq!(evals, reparsed);
    }

    proptest::proptest! {
        /// Model output is untrusted; whatever arrives must parse or fail,
        /// never panic.
        #[test]
        fn never_panics_on_arbitrary_responses(text in ".*") {
            let _ = parse_evaluation_response(&text, 5, &LOOP_DIMENSIONS);
        }

        /// Junk wrapped around a valid object must not change the result.
        #[test]
        fn wrapper_noise_is_ignored(prefix in "[^{}]*", suffix in "[^{}]*") {
            let wrapped = format!("{prefix}{VALID}{suffix}");
            let parsed = parse_evaluation_response(&wrapped, 5, &LOOP_DIMENSIONS).unwrap();
            prop_assert_eq!(parsed[&Dimension::Accuracy].score, 5);
        }

        /// Round trip through the schema for arbitrary non-empty
        /// rationales, including quotes, backslashes, and newlines.
        #[test]
        fn schema_round_trips_arbitrary_rationales(rationale in ".+") {
            let mut evals = BTreeMap::new();
            for &dimension in &LOOP_DIMENSIONS {
                evals.insert(
                    dimension,
                    DimensionEvaluation {
                        dimension,
                        score: 4,
                        rationale: rationale.clone(),
                    },
                );
            }
            let reparsed =
                parse_evaluation_response(&to_schema_string(&evals), 5, &LOOP_DIMENSIONS)
                    .unwrap();
            prop_assert_eq!(evals, reparsed);
        }
    }

    use proptest::prelude::prop_assert_eq;
}
