//! `kind`-tagged config enums that still report the path of a bad field.
//!
//! Serde buffers internally tagged enums before picking a variant, which loses
//! the position of any error inside them. [`tagged_enum!`] declares the public
//! enum (serialized with a `kind` tag) next to a private externally tagged
//! twin used for parsing, and nests the inner path into the error message,
//! which [`split_marked`] unpacks again.

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use serde_path_to_error::Segment;

const MARK: char = '\u{1f}';

fn render(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for segment in path {
        match segment {
            Segment::Seq { index } => out.push_str(&format!("[{index}]")),
            Segment::Map { key } => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push_str(key);
            }
            // variant names are not fields
            Segment::Enum { .. } => {}
            Segment::Unknown => {
                if !out.is_empty() {
                    out.push('.');
                }
                out.push('?');
            }
        }
    }
    out
}

/// Joins two rendered paths; either may be empty or the root marker `.`.
pub(crate) fn join(outer: &str, inner: &str) -> String {
    let outer = outer.trim_start_matches('.');
    match (outer.is_empty(), inner.is_empty()) {
        (_, true) => outer.to_string(),
        (true, false) => inner.to_string(),
        (false, false) if inner.starts_with('[') => format!("{outer}{inner}"),
        (false, false) => format!("{outer}.{inner}"),
    }
}

/// Splits a message produced by [`untag`] into (inner path, message).
pub(crate) fn split_marked(message: &str) -> (String, String) {
    if let Some(rest) = message.strip_prefix(MARK) {
        if let Some((path, msg)) = rest.split_once(MARK) {
            return (path.to_string(), msg.to_string());
        }
    }
    (String::new(), message.to_string())
}

/// Moves `kind` out of `map` and parses the rest as the externally tagged twin.
pub(crate) fn untag<T: DeserializeOwned, E: serde::de::Error>(mut map: Map<String, Value>) -> Result<T, E> {
    let kind = match map.remove("kind") {
        Some(Value::String(kind)) => kind,
        Some(other) => return Err(E::custom(format!("invalid type: {other}, expected a string tag `kind`"))),
        None => return Err(E::missing_field("kind")),
    };
    let wrapped = Value::Object(Map::from_iter([(kind, Value::Object(map))]));
    serde_path_to_error::deserialize(wrapped).map_err(|e| {
        let outer = render(e.path());
        let (inner, msg) = split_marked(&e.into_inner().to_string());
        E::custom(format!("{MARK}{}{MARK}{msg}", join(&outer, &inner)))
    })
}

macro_rules! tagged_enum {
    (
        $(#[$meta:meta])*
        pub enum $name:ident via $twin:ident {
            $(
                $(#[$vmeta:meta])*
                $variant:ident $({
                    $( $(#[$fmeta:meta])* $field:ident : $ty:ty ),* $(,)?
                })?
            ),* $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Serialize)]
        #[serde(tag = "kind", rename_all = "kebab-case")]
        pub enum $name {
            $( $(#[$vmeta])* $variant $({ $( $(#[$fmeta])* $field: $ty ),* })? ),*
        }

        // unit variants parse from an empty map like struct variants
        #[derive(Deserialize)]
        #[serde(rename_all = "kebab-case", deny_unknown_fields)]
        enum $twin {
            $( $variant { $($( $(#[$fmeta])* $field: $ty ),*)? } ),*
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let map = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
                let twin: $twin = $crate::harness::tagged::untag(map)?;
                Ok(match twin {
                    $( $twin::$variant { $($($field),*)? } => $name::$variant $({ $($field),* })? ),*
                })
            }
        }
    };
}

pub(crate) use tagged_enum;
