use percent_encoding::percent_decode_str;

/// Human-readable label from an IRI's local name.
///
/// Takes the text after the last `/` or `#` (or after the prefix of a
/// prefixed name), percent-decodes it, turns underscores into spaces and
/// drops a trailing parenthetical disambiguator.
pub fn derive_label(iri: &str) -> String {
    let iri = iri.trim_start_matches('<').trim_end_matches('>');
    let local = match iri.rfind(['/', '#']) {
        Some(i) => &iri[i + 1..],
        None => iri.split_once(':').map_or(iri, |(_, l)| l),
    };
    let decoded = percent_decode_str(local).decode_utf8_lossy();
    let spaced = decoded.replace('_', " ");
    let mut label = spaced.trim();
    if label.ends_with(')') {
        if let Some(open) = label.rfind('(') {
            let head = label[..open].trim_end();
            if !head.is_empty() {
                label = head;
            }
        }
    }
    label.split_whitespace().collect::<Vec<_>>().join(" ")
}
