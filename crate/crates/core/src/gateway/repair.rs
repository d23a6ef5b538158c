use std::ops::Range;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no complete structured document in text")]
pub struct NoPayload;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPayload {
    pub document: Value,
    /// Byte range of the document inside the source text.
    pub span: Range<usize>,
}

/// Finds the first complete JSON object embedded in model text.
///
/// A document that runs off the end of the text is treated as truncated
/// and nothing is returned, even if an inner object is complete.
pub fn repair_tool_payload(raw_text: &str) -> Result<ExtractedPayload, NoPayload> {
    for (start, _) in raw_text.match_indices('{') {
        let rest = &raw_text[start..];
        let mut stream = serde_json::Deserializer::from_str(rest).into_iter::<Value>();
        match stream.next() {
            Some(Ok(doc @ Value::Object(_))) => {
                let end = start + stream.byte_offset();
                return Ok(ExtractedPayload { document: doc, span: start..end });
            }
            Some(Err(e)) if e.is_eof() => return Err(NoPayload),
            _ => continue,
        }
    }
    Err(NoPayload)
}
