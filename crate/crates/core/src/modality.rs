//! Modality tags and duplicate-free modality subsets in canonical order.

use core::fmt;
use core::str::FromStr;

use alloc::string::ToString;

use crate::error::Error;

/// One input channel. The derived ordering is the canonical order used for
/// every reduction: text, audio, vision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Modality {
    #[cfg_attr(feature = "serde", serde(rename = "t"))]
    Text,
    #[cfg_attr(feature = "serde", serde(rename = "a"))]
    Audio,
    #[cfg_attr(feature = "serde", serde(rename = "v"))]
    Vision,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Audio, Modality::Vision];

    pub fn tag(self) -> char {
        match self {
            Modality::Text => 't',
            Modality::Audio => 'a',
            Modality::Vision => 'v',
        }
    }

    pub fn from_tag(tag: char) -> Option<Self> {
        match tag {
            't' => Some(Modality::Text),
            'a' => Some(Modality::Audio),
            'v' => Some(Modality::Vision),
            _ => None,
        }
    }

    /// Position in canonical order.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Modality::from_tag(c).ok_or_else(|| Error::UnknownModality(s.to_string())),
            _ => Err(Error::UnknownModality(s.to_string())),
        }
    }
}

/// A subset of {t, a, v}. Iteration is always in canonical order, whatever
/// order the members were inserted in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ModalitySet(u8);

impl ModalitySet {
    pub const fn empty() -> Self {
        ModalitySet(0)
    }

    pub fn all() -> Self {
        Modality::ALL.into_iter().collect()
    }

    pub fn insert(&mut self, m: Modality) -> bool {
        let had = self.contains(m);
        self.0 |= 1 << m.index();
        !had
    }

    pub fn contains(self, m: Modality) -> bool {
        self.0 & (1 << m.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> Iter {
        self.into_iter()
    }

    /// Parses a comma-separated list such as `t,a`. Duplicates are rejected.
    pub fn parse_list(s: &str) -> Result<Self, Error> {
        let mut set = ModalitySet::empty();
        for part in s.split(',') {
            let m: Modality = part.trim().parse()?;
            if !set.insert(m) {
                return Err(Error::InvalidConfig(alloc::format!("modality {m} listed twice")));
            }
        }
        if set.is_empty() {
            return Err(Error::NoModalities);
        }
        Ok(set)
    }

    /// Short experiment label in the `T+A` style.
    pub fn label(self) -> alloc::string::String {
        let parts: alloc::vec::Vec<alloc::string::String> =
            self.iter().map(|m| m.tag().to_ascii_uppercase().to_string()).collect();
        parts.join("+")
    }
}

impl IntoIterator for ModalitySet {
    type Item = Modality;
    type IntoIter = Iter;

    fn into_iter(self) -> Iter {
        Iter { set: self, next: 0 }
    }
}

/// Canonical-order iterator over a [`ModalitySet`].
#[derive(Debug, Clone)]
pub struct Iter {
    set: ModalitySet,
    next: usize,
}

impl Iterator for Iter {
    type Item = Modality;

    fn next(&mut self) -> Option<Modality> {
        while self.next < Modality::ALL.len() {
            let m = Modality::ALL[self.next];
            self.next += 1;
            if self.set.contains(m) {
                return Some(m);
            }
        }
        None
    }
}

impl FromIterator<Modality> for ModalitySet {
    fn from_iter<I: IntoIterator<Item = Modality>>(iter: I) -> Self {
        let mut set = ModalitySet::empty();
        for m in iter {
            set.insert(m);
        }
        set
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for m in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            write!(f, "{m}")?;
            first = false;
        }
        Ok(())
    }
}
