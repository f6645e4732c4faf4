use serde::{Deserialize, Serialize};

/// Query complexity, ordered by the cost of the strategy it selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComplexityLabel {
    /// Answerable by the generator alone.
    A,
    /// Needs one retrieval.
    B,
    /// Needs iterative retrieval.
    C,
}

impl ComplexityLabel {
    pub const ALL: [ComplexityLabel; 3] = [ComplexityLabel::A, ComplexityLabel::B, ComplexityLabel::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl std::fmt::Display for ComplexityLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComplexityLabel::A => "A",
            ComplexityLabel::B => "B",
            ComplexityLabel::C => "C",
        })
    }
}

impl std::str::FromStr for ComplexityLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(ComplexityLabel::A),
            "B" | "b" => Ok(ComplexityLabel::B),
            "C" | "c" => Ok(ComplexityLabel::C),
            other => Err(format!("unknown complexity label {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_and_indices() {
        assert!(ComplexityLabel::A < ComplexityLabel::B && ComplexityLabel::B < ComplexityLabel::C);
        for (i, l) in ComplexityLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(ComplexityLabel::from_index(i), Some(*l));
            assert_eq!(l.to_string().parse::<ComplexityLabel>().unwrap(), *l);
        }
        assert_eq!(ComplexityLabel::from_index(3), None);
        assert_eq!(serde_json::to_string(&ComplexityLabel::B).unwrap(), "\"B\"");
    }
}
