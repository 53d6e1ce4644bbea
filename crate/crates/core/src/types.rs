use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Index of a content type within one [`TypeLabels`] configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeIndex(pub usize);

impl TypeIndex {
    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for TypeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The ordered set of content types. Indices are contiguous from zero and
/// names are unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TypeLabels {
    names: Vec<String>,
}

impl TypeLabels {
    pub fn new<I, S>(names: I) -> Result<Self, Error>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::TooFewTypes);
        }
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() || names[..i].contains(name) {
                return Err(Error::InvalidTypeName(name.clone()));
            }
        }
        Ok(Self { names })
    }

    /// The two-type taxonomy used by the news demo: liberal at index 0,
    /// conservative at index 1.
    pub fn liberal_conservative() -> Self {
        Self {
            names: alloc::vec!["liberal".to_string(), "conservative".to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, index: TypeIndex) -> Option<&str> {
        self.names.get(index.0).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<TypeIndex> {
        self.names.iter().position(|n| n == name).map(TypeIndex)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn indices(&self) -> impl Iterator<Item = TypeIndex> {
        (0..self.names.len()).map(TypeIndex)
    }
}

impl TryFrom<Vec<String>> for TypeLabels {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self, Self::Error> {
        Self::new(names)
    }
}

impl From<TypeLabels> for Vec<String> {
    fn from(labels: TypeLabels) -> Self {
        labels.names
    }
}
