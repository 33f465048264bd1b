//! Locating a JSON object inside free-form model output.

use serde_json::{Map, Value};

/// Where the first JSON object was found, or why none could be decoded.
#[derive(Debug, Clone, PartialEq)]
pub enum ScanError {
    /// No `{` anywhere in the text.
    NoObject,
    /// Braces were present but nothing decoded; offset of the last attempt.
    Undecodable { offset: usize, message: String },
}

/// Returns the first decodable JSON object in `text`.
///
/// Fenced code blocks are tried first, in order; then every `{` in the raw
/// text from left to right.
pub fn first_json_object(text: &str) -> Result<Map<String, Value>, ScanError> {
    let mut last_err = None;
    for (start, block) in fenced_blocks(text) {
        match scan_from_braces(block) {
            Ok(obj) => return Ok(obj),
            Err(ScanError::Undecodable { offset, message }) => {
                last_err = Some(ScanError::Undecodable {
                    offset: start + offset,
                    message,
                })
            }
            Err(ScanError::NoObject) => {}
        }
    }
    match scan_from_braces(text) {
        Ok(obj) => Ok(obj),
        Err(ScanError::NoObject) => Err(last_err.unwrap_or(ScanError::NoObject)),
        Err(e) => Err(e),
    }
}

fn scan_from_braces(text: &str) -> Result<Map<String, Value>, ScanError> {
    let mut last_err = None;
    for (offset, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[offset..]).into_iter::<Value>();
        match stream.next() {
            Some(Ok(Value::Object(map))) => return Ok(map),
            Some(Ok(_)) => {}
            Some(Err(e)) => {
                last_err = Some(ScanError::Undecodable {
                    offset,
                    message: e.to_string(),
                })
            }
            None => {}
        }
    }
    Err(last_err.unwrap_or(ScanError::NoObject))
}

/// Contents of ``` fenced blocks with their byte offsets in `text`.
fn fenced_blocks(text: &str) -> Vec<(usize, &str)> {
    let mut blocks = Vec::new();
    let mut rest_start = 0;
    while let Some(open) = text[rest_start..].find("```") {
        let open = rest_start + open + 3;
        // skip the info string (e.g. `json`)
        let body_start = match text[open..].find('\n') {
            Some(nl) => open + nl + 1,
            None => break,
        };
        let Some(close) = text[body_start..].find("```") else {
            break;
        };
        blocks.push((body_start, &text[body_start..body_start + close]));
        rest_start = body_start + close + 3;
    }
    blocks
}
