//! Identifier newtypes.
//!
//! Node, edge and suggestion ids are minted from per-workspace counters and
//! serialize as short prefixed strings (`n12`, `e3`, `s7`). Ordering is by the
//! numeric part, so `n2 < n10`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! counter_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "String")]
        pub struct $name(pub u64);

        impl $name {
            pub const PREFIX: &'static str = $prefix;
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = IdParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .filter(|digits| !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|digits| digits.parse().ok())
                    .map($name)
                    .ok_or_else(|| IdParseError {
                        kind: stringify!($name),
                        raw: s.to_string(),
                    })
            }
        }

        impl TryFrom<String> for $name {
            type Error = IdParseError;

            fn try_from(value: String) -> Result<Self, Self::Error> {
                value.parse()
            }
        }

        impl From<$name> for String {
            fn from(value: $name) -> Self {
                value.to_string()
            }
        }
    };
}

counter_id!(
    /// Identifier of an evidence or theme node.
    NodeId,
    "n"
);
counter_id!(
    /// Identifier of a membership or hierarchy edge.
    EdgeId,
    "e"
);
counter_id!(
    /// Identifier of a suggestion within its workspace.
    SuggestionId,
    "s"
);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{raw}` is not a valid {kind}")]
pub struct IdParseError {
    kind: &'static str,
    raw: String,
}

/// Content-derived document identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DocId(pub String);

impl fmt::Display for DocId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DocId {
    fn from(value: &str) -> Self {
        DocId(value.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WorkspaceId(pub String);

impl fmt::Display for WorkspaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for WorkspaceId {
    fn from(value: &str) -> Self {
        WorkspaceId(value.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_order() {
        let a: NodeId = "n2".parse().unwrap();
        let b: NodeId = "n10".parse().unwrap();
        assert!(a < b);
        assert_eq!(a.to_string(), "n2");
        assert!("e2".parse::<NodeId>().is_err());
        assert!("n".parse::<NodeId>().is_err());
        assert!("n+1".parse::<NodeId>().is_err());
    }

    #[test]
    fn serde_as_string() {
        let id = EdgeId(4);
        assert_eq!(serde_json::to_string(&id).unwrap(), "\"e4\"");
        let back: EdgeId = serde_json::from_str("\"e4\"").unwrap();
        assert_eq!(back, id);
    }
}
