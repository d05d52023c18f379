//! Header lines shared by the tab-separated artifacts.
//!
//! A header is a single leading line `# pdc-<kind> version=<n> key=value ...`.
//! It is optional on read so hand-written files stay valid, but when present
//! its kind and version must match.

use std::collections::BTreeMap;

use crate::{Error, Result};

pub(crate) const FORMAT_VERSION: u32 = 1;

pub(crate) fn header_line(kind: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("# pdc-{kind} version={FORMAT_VERSION}");
    for (k, v) in fields {
        line.push(' ');
        line.push_str(k);
        line.push('=');
        line.push_str(v);
    }
    line
}

pub(crate) fn kv_tokens(s: &str) -> BTreeMap<String, String> {
    s.split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Returns `Ok(None)` when `line` is not a header.
pub(crate) fn parse_header(line: &str, kind: &str) -> Result<Option<BTreeMap<String, String>>> {
    let Some(rest) = line.strip_prefix('#') else {
        return Ok(None);
    };
    let rest = rest.trim();
    let (tag, fields) = rest.split_once(' ').unwrap_or((rest, ""));
    let expected = format!("pdc-{kind}");
    if tag != expected {
        return Err(Error::Incompatible {
            what: kind.to_string(),
            message: format!("expected header {expected:?}, found {tag:?}"),
        });
    }
    let fields = kv_tokens(fields);
    check_version(&fields, kind)?;
    Ok(Some(fields))
}

pub(crate) fn check_version(fields: &BTreeMap<String, String>, what: &str) -> Result<()> {
    match fields.get("version") {
        None => Ok(()),
        Some(v) if v.parse::<u32>().ok() == Some(FORMAT_VERSION) => Ok(()),
        Some(v) => Err(Error::Incompatible {
            what: what.to_string(),
            message: format!("schema version {v}, this build reads version {FORMAT_VERSION}"),
        }),
    }
}
