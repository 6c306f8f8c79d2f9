//! URL normalization used as the primary key for crawled URLs.
//!
//! Scheme and host are lowercased, default ports and fragments are removed,
//! percent-escapes in the path are normalized (unreserved characters decoded,
//! remaining escapes uppercased) and the query string is kept verbatim.

use thiserror::Error;
use url::Url;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum UrlError {
    #[error("unparseable url {0:?}: {1}")]
    Parse(String, String),
    #[error("unsupported scheme {0:?}")]
    Scheme(String),
    #[error("url has no host: {0:?}")]
    NoHost(String),
}

/// A normalized absolute http(s) URL together with its hostname.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NormalizedUrl {
    pub url: String,
    pub host: String,
}

pub fn normalize(raw: &str) -> Result<NormalizedUrl, UrlError> {
    let raw = raw.trim();
    let mut parsed = Url::parse(raw).map_err(|e| UrlError::Parse(raw.to_string(), e.to_string()))?;
    match parsed.scheme() {
        "http" | "https" => {}
        other => return Err(UrlError::Scheme(other.to_string())),
    }
    parsed.set_fragment(None);
    let host = parsed
        .host_str()
        .ok_or_else(|| UrlError::NoHost(raw.to_string()))?
        .trim_end_matches('.')
        .to_ascii_lowercase();
    if host.is_empty() {
        return Err(UrlError::NoHost(raw.to_string()));
    }
    if parsed.host_str() != Some(host.as_str()) {
        parsed
            .set_host(Some(&host))
            .map_err(|e| UrlError::Parse(raw.to_string(), e.to_string()))?;
    }
    let path = normalize_percent(parsed.path());
    parsed.set_path(&path);
    Ok(NormalizedUrl {
        url: parsed.to_string(),
        host,
    })
}

fn is_unreserved(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~')
}

fn normalize_percent(path: &str) -> String {
    let bytes = path.as_bytes();
    let mut out = String::with_capacity(path.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' && i + 2 < bytes.len() {
            let hex = &path[i + 1..i + 3];
            if let Ok(v) = u8::from_str_radix(hex, 16) {
                if is_unreserved(v) {
                    out.push(v as char);
                } else {
                    out.push('%');
                    out.push_str(&hex.to_ascii_uppercase());
                }
                i += 3;
                continue;
            }
        }
        out.push(bytes[i] as char);
        i += 1;
    }
    out
}
