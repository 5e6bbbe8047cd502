//! Label catalogs: the ordered class list of a drawing set, split into
//! countable "thing" classes (doors, furniture, ...) and uncountable "stuff"
//! classes (walls, parking) that never form instances.

use thiserror::Error;

pub type ClassId = usize;

/// Name reserved for unlabeled entities; never a catalog class.
pub const BACKGROUND_NAME: &str = "background";

#[derive(Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
    #[error("class name {0:?} is reserved")]
    ReservedClass(String),
    #[error("stuff class {0:?} is not in the class list")]
    UnknownStuff(String),
}

/// Semantic label of one entity: a catalog class or the background sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Background,
    Class(ClassId),
}

impl Label {
    pub fn is_background(self) -> bool {
        matches!(self, Label::Background)
    }

    pub fn class_id(self) -> Option<ClassId> {
        match self {
            Label::Background => None,
            Label::Class(c) => Some(c),
        }
    }
}

/// Ordered class names plus the thing/stuff partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelCatalog {
    names: Vec<String>,
    stuff: Vec<bool>,
}

/// The 28 thing classes of the full floor-plan catalog, in report order.
const FULL_THINGS: &[&str] = &[
    "single_door",
    "double_door",
    "sliding_door",
    "opening_symbol",
    "window",
    "bay_window",
    "blind_window",
    "stairs",
    "gas_stove",
    "refrigerator",
    "washing_machine",
    "sofa",
    "bed",
    "chair",
    "table",
    "tv_cabinet",
    "wardrobe",
    "bedside_cupboard",
    "high_cabinet",
    "half_height_cabinet",
    "sink",
    "bath",
    "bath_tub",
    "squat_toilet",
    "urinal",
    "toilet",
    "elevator",
    "escalator",
];

/// Stuff class names recognized by default when a drawing file does not spell
/// out its partition.
const DEFAULT_STUFF: &[&str] = &["wall", "parking"];

impl LabelCatalog {
    pub fn new<S: Into<String>>(names: Vec<S>, stuff_names: &[&str]) -> Result<Self, CatalogError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        for (i, n) in names.iter().enumerate() {
            if n == BACKGROUND_NAME {
                return Err(CatalogError::ReservedClass(n.clone()));
            }
            if names[..i].contains(n) {
                return Err(CatalogError::DuplicateClass(n.clone()));
            }
        }
        let mut stuff = vec![false; names.len()];
        for s in stuff_names {
            match names.iter().position(|n| n == s) {
                Some(i) => stuff[i] = true,
                None => return Err(CatalogError::UnknownStuff((*s).to_string())),
            }
        }
        Ok(LabelCatalog { names, stuff })
    }

    /// Full floor-plan catalog: 28 things plus the wall and parking stuff
    /// classes.
    pub fn full() -> Self {
        let mut names: Vec<String> = FULL_THINGS.iter().map(|s| s.to_string()).collect();
        names.push("wall".into());
        names.push("parking".into());
        LabelCatalog::new(names, DEFAULT_STUFF).unwrap()
    }

    /// Compact five-class catalog used by the synthetic generator: wall and
    /// parking as stuff, door / window / table as things.
    pub fn small() -> Self {
        LabelCatalog::new(vec!["wall", "parking", "door", "window", "table"], DEFAULT_STUFF)
            .unwrap()
    }

    /// Interpret classes named wall/parking as stuff; used for files that
    /// carry no explicit partition.
    pub fn with_default_stuff<S: Into<String>>(names: Vec<S>) -> Result<Self, CatalogError> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let stuff: Vec<&str> = DEFAULT_STUFF
            .iter()
            .copied()
            .filter(|s| names.iter().any(|n| n == s))
            .collect();
        LabelCatalog::new(names, &stuff)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_stuff(&self, id: ClassId) -> bool {
        self.stuff[id]
    }

    pub fn is_thing(&self, id: ClassId) -> bool {
        !self.stuff[id]
    }

    pub fn stuff_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.len()).filter(|&i| self.stuff[i])
    }

    pub fn thing_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.len()).filter(|&i| !self.stuff[i])
    }

    pub fn stuff_names(&self) -> Vec<String> {
        self.stuff_ids().map(|i| self.names[i].clone()).collect()
    }

    /// Parse a wire label: a class name or the background sentinel.
    pub fn parse_label(&self, s: &str) -> Option<Label> {
        if s == BACKGROUND_NAME {
            return Some(Label::Background);
        }
        self.id_of(s).map(Label::Class)
    }

    pub fn label_name(&self, l: Label) -> &str {
        match l {
            Label::Background => BACKGROUND_NAME,
            Label::Class(c) => self.name(c),
        }
    }
}
