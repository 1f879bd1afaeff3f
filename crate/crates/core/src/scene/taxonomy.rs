use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of object classes, background excluded.
pub const NUM_CLASSES: usize = 15;

/// Index into a [`ClassTaxonomy`]; `0` is reserved for background.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u16);

impl ClassId {
    pub const BACKGROUND: ClassId = ClassId(0);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_background(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub const BACKGROUND_NAME: &str = "background";

/// The default walk taxonomy, in id order starting at 1.
pub const DEFAULT_CLASSES: [&str; NUM_CLASSES] = [
    "bench/chair",
    "bicycle",
    "building",
    "bus",
    "car",
    "construction",
    "pavement",
    "person",
    "plant horizontal",
    "plant vertical",
    "pole",
    "scooter",
    "sculpture",
    "sign",
    "sky",
];

/// Ordered object classes. Class `i` in the list has id `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct ClassTaxonomy {
    names: Vec<String>,
}

impl ClassTaxonomy {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() != NUM_CLASSES {
            return Err(Error::Validation(format!(
                "taxonomy must list {NUM_CLASSES} classes, found {}",
                names.len()
            )));
        }
        let mut seen = HashSet::new();
        for n in &names {
            if n.is_empty() || n == BACKGROUND_NAME {
                return Err(Error::Validation(format!("invalid class name `{n}`")));
            }
            if !seen.insert(n.as_str()) {
                return Err(Error::Validation(format!("duplicate class name `{n}`")));
            }
        }
        Ok(ClassTaxonomy { names })
    }

    /// Number of non-background classes (K).
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Length of a per-class vector including the background slot (K + 1).
    pub fn slots(&self) -> usize {
        self.names.len() + 1
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        if name == BACKGROUND_NAME {
            return Some(ClassId::BACKGROUND);
        }
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| ClassId(i as u16 + 1))
    }

    pub fn name(&self, id: ClassId) -> &str {
        if id.is_background() {
            BACKGROUND_NAME
        } else {
            &self.names[id.index() - 1]
        }
    }

    /// Object class ids `1..=K`.
    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (1..=self.names.len()).map(|i| ClassId(i as u16))
    }

    /// All ids including background, `0..=K`.
    pub fn all_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..=self.names.len()).map(|i| ClassId(i as u16))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, id: ClassId) -> bool {
        id.index() <= self.names.len()
    }
}

impl Default for ClassTaxonomy {
    fn default() -> Self {
        ClassTaxonomy {
            names: DEFAULT_CLASSES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for ClassTaxonomy {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        ClassTaxonomy::new(names)
    }
}

impl From<ClassTaxonomy> for Vec<String> {
    fn from(t: ClassTaxonomy) -> Self {
        t.names
    }
}
