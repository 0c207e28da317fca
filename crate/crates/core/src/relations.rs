//! TimeML relation types, inversion, and folding of inverse pairs onto a
//! reduced label set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The fourteen TimeML `relType` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RelationType {
    Before,
    After,
    Ibefore,
    Iafter,
    Includes,
    IsIncluded,
    During,
    DuringInv,
    Begins,
    BegunBy,
    Ends,
    EndedBy,
    Simultaneous,
    Identity,
}

impl RelationType {
    pub const ALL: [RelationType; 14] = [
        RelationType::Before,
        RelationType::After,
        RelationType::Ibefore,
        RelationType::Iafter,
        RelationType::Includes,
        RelationType::IsIncluded,
        RelationType::During,
        RelationType::DuringInv,
        RelationType::Begins,
        RelationType::BegunBy,
        RelationType::Ends,
        RelationType::EndedBy,
        RelationType::Simultaneous,
        RelationType::Identity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Before => "BEFORE",
            RelationType::After => "AFTER",
            RelationType::Ibefore => "IBEFORE",
            RelationType::Iafter => "IAFTER",
            RelationType::Includes => "INCLUDES",
            RelationType::IsIncluded => "IS_INCLUDED",
            RelationType::During => "DURING",
            RelationType::DuringInv => "DURING_INV",
            RelationType::Begins => "BEGINS",
            RelationType::BegunBy => "BEGUN_BY",
            RelationType::Ends => "ENDS",
            RelationType::EndedBy => "ENDED_BY",
            RelationType::Simultaneous => "SIMULTANEOUS",
            RelationType::Identity => "IDENTITY",
        }
    }

    /// The relation `r'` such that `a r b` holds exactly when `b r' a` does.
    pub fn invert(self) -> RelationType {
        use RelationType::*;
        match self {
            Before => After,
            After => Before,
            Ibefore => Iafter,
            Iafter => Ibefore,
            Includes => IsIncluded,
            IsIncluded => Includes,
            During => DuringInv,
            DuringInv => During,
            Begins => BegunBy,
            BegunBy => Begins,
            Ends => EndedBy,
            EndedBy => Ends,
            Simultaneous => Simultaneous,
            Identity => Identity,
        }
    }

    /// True for relations that are their own inverse.
    pub fn is_symmetric(self) -> bool {
        self.invert() == self
    }

    /// Map onto the folded label set. When `swap_args` is set the link's
    /// arguments must be exchanged for the folded label to hold.
    pub fn fold(self) -> Folded {
        use RelationType::*;
        let (label, swap_args) = match self {
            Before => (FoldedClass::Before, false),
            After => (FoldedClass::Before, true),
            Ibefore => (FoldedClass::Ibefore, false),
            Iafter => (FoldedClass::Ibefore, true),
            Includes => (FoldedClass::Includes, false),
            IsIncluded => (FoldedClass::Includes, true),
            Begins => (FoldedClass::Begins, false),
            BegunBy => (FoldedClass::Begins, true),
            Ends => (FoldedClass::Ends, false),
            EndedBy => (FoldedClass::Ends, true),
            Simultaneous | Identity | During => (FoldedClass::Simultaneous, false),
            DuringInv => (FoldedClass::Simultaneous, true),
        };
        Folded { label, swap_args }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown relation type `{0}`")]
pub struct UnknownRelation(pub String);

impl FromStr for RelationType {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationType::ALL
            .iter()
            .copied()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| UnknownRelation(s.to_string()))
    }
}

/// Reduced label set used as the classifier's output space.
///
/// Variants are declared in lexicographic order of their names so that the
/// derived `Ord` matches the tie-break rule used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FoldedClass {
    Before,
    Begins,
    Ends,
    Ibefore,
    Includes,
    Simultaneous,
}

impl FoldedClass {
    pub const ALL: [FoldedClass; 6] = [
        FoldedClass::Before,
        FoldedClass::Begins,
        FoldedClass::Ends,
        FoldedClass::Ibefore,
        FoldedClass::Includes,
        FoldedClass::Simultaneous,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FoldedClass::Before => "BEFORE",
            FoldedClass::Begins => "BEGINS",
            FoldedClass::Ends => "ENDS",
            FoldedClass::Ibefore => "IBEFORE",
            FoldedClass::Includes => "INCLUDES",
            FoldedClass::Simultaneous => "SIMULTANEOUS",
        }
    }

    /// The relation type this class stands for when arguments are not swapped.
    pub fn relation(self) -> RelationType {
        match self {
            FoldedClass::Before => RelationType::Before,
            FoldedClass::Begins => RelationType::Begins,
            FoldedClass::Ends => RelationType::Ends,
            FoldedClass::Ibefore => RelationType::Ibefore,
            FoldedClass::Includes => RelationType::Includes,
            FoldedClass::Simultaneous => RelationType::Simultaneous,
        }
    }
}

impl fmt::Display for FoldedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FoldedClass {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FoldedClass::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Folded {
    pub label: FoldedClass,
    pub swap_args: bool,
}

pub fn invert(r: RelationType) -> RelationType {
    r.invert()
}

pub fn fold(r: RelationType) -> Folded {
    r.fold()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn invert_examples() {
        assert_eq!(invert(RelationType::Before), RelationType::After);
        assert_eq!(invert(RelationType::Simultaneous), RelationType::Simultaneous);
        assert_eq!(invert(RelationType::Begins), RelationType::BegunBy);
        assert_eq!(invert(RelationType::During), RelationType::DuringInv);
    }

    #[test]
    fn fold_examples() {
        let f = fold(RelationType::After);
        assert_eq!((f.label, f.swap_args), (FoldedClass::Before, true));
        let f = fold(RelationType::Before);
        assert_eq!((f.label, f.swap_args), (FoldedClass::Before, false));
        let f = fold(RelationType::IsIncluded);
        assert_eq!((f.label, f.swap_args), (FoldedClass::Includes, true));
    }

    #[test]
    fn swapped_set_is_exact() {
        let swapped: BTreeSet<_> = RelationType::ALL
            .iter()
            .filter(|r| r.fold().swap_args)
            .map(|r| r.as_str())
            .collect();
        let expected: BTreeSet<_> = ["AFTER", "IAFTER", "IS_INCLUDED", "BEGUN_BY", "ENDED_BY", "DURING_INV"]
            .into_iter()
            .collect();
        assert_eq!(swapped, expected);
    }

    #[test]
    fn folded_classes_are_fixed_points() {
        for c in FoldedClass::ALL {
            let f = c.relation().fold();
            assert_eq!(f.label, c);
            assert!(!f.swap_args);
        }
    }

    #[test]
    fn names_round_trip() {
        for r in RelationType::ALL {
            assert_eq!(r.as_str().parse::<RelationType>().unwrap(), r);
            assert_eq!(serde_json::to_string(&r).unwrap(), format!("\"{}\"", r.as_str()));
        }
        for c in FoldedClass::ALL {
            assert_eq!(c.as_str().parse::<FoldedClass>().unwrap(), c);
        }
        assert!("after".parse::<RelationType>().is_err());
    }

    #[test]
    fn folded_order_is_lexicographic() {
        let names: Vec<_> = FoldedClass::ALL.iter().map(|c| c.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
    }
}
