//! Client surface for a Spotlight-compatible annotation service.
//!
//! Request building and response parsing are always available; the HTTP call
//! itself needs the `spotlight` feature.

use serde::Deserialize;

use super::tokenize::{Token, TokenSeq};
use super::TextError;
use crate::kb::derive_label;

/// One annotated mention.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub surface: String,
    pub uri: String,
    pub similarity: f64,
}

#[derive(Deserialize)]
struct Response {
    #[serde(rename = "Resources", default)]
    resources: Vec<Resource>,
}

#[derive(Deserialize)]
struct Resource {
    #[serde(rename = "@URI")]
    uri: String,
    #[serde(rename = "@surfaceForm")]
    surface: String,
    #[serde(rename = "@similarityScore")]
    similarity: String,
}

/// `GET` URL for `/rest/annotate`.
pub fn request_url(base: &str, text: &str, confidence: f64) -> String {
    let mut url = base.trim_end_matches('/').to_string();
    url.push_str("/rest/annotate?text=");
    for b in text.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                url.push(b as char)
            }
            _ => url.push_str(&format!("%{b:02X}")),
        }
    }
    url.push_str(&format!("&confidence={confidence}"));
    url
}

/// Parses an `application/json` annotate response.
pub fn parse_response(body: &str) -> Result<Vec<Annotation>, TextError> {
    let resp: Response =
        serde_json::from_str(body).map_err(|e| TextError::Remote(e.to_string()))?;
    resp.resources
        .into_iter()
        .map(|r| {
            let similarity = r
                .similarity
                .parse::<f64>()
                .map_err(|e| TextError::Remote(format!("similarity score: {e}")))?;
            Ok(Annotation {
                surface: r.surface,
                uri: r.uri,
                similarity,
            })
        })
        .collect()
}

/// Replaces each annotated mention scoring at least `threshold` by the label
/// derived from its URI. Mentions are matched on token surfaces, leftmost
/// first.
pub fn apply_annotations(q: &TokenSeq, annotations: &[Annotation], threshold: f64) -> TokenSeq {
    let mut out = q.clone();
    for ann in annotations.iter().filter(|a| a.similarity >= threshold) {
        let mention: Vec<String> = TokenSeq::verbatim(&ann.surface)
            .tokens()
            .iter()
            .map(|t| t.norm.clone())
            .collect();
        if mention.is_empty() {
            continue;
        }
        let norms: Vec<String> = out.tokens().iter().map(|t| t.norm.clone()).collect();
        if let Some(start) = norms.windows(mention.len()).position(|w| w == mention.as_slice()) {
            let label: Vec<Token> = TokenSeq::verbatim(&derive_label(&ann.uri)).tokens().to_vec();
            out.splice(start, start + mention.len(), label);
        }
    }
    out
}

#[cfg(feature = "spotlight")]
pub fn annotate(base: &str, text: &str, confidence: f64) -> Result<Vec<Annotation>, TextError> {
    let url = request_url(base, text, confidence);
    let body = ureq::get(&url)
        .header("Accept", "application/json")
        .call()
        .map_err(|e| TextError::Remote(e.to_string()))?
        .body_mut()
        .read_to_string()
        .map_err(|e| TextError::Remote(e.to_string()))?;
    parse_response(&body)
}
