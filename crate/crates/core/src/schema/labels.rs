//! Closed label sets used by the parameter schema.
//!
//! Every label type serializes as its exact wire string and exposes `ALL`
//! so that validation and randomization can enumerate the legal domain.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $label:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const LABELS: &'static [&'static str] = &[$($label),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok($name::$variant),)+
                    other => Err(format!(
                        "`{}` is not one of {}",
                        other,
                        Self::LABELS.join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

label_enum!(
    /// Primary intent of the conversation.
    Purpose {
        Advisory => "advisory",
        Educational => "educational",
        Exploratory => "exploratory",
        Evaluative => "evaluative",
    }
);

label_enum!(
    /// Narrative structure of the conversation.
    Arc {
        ProblemSolution => "problem-solution",
        ExplorationConclusion => "exploration-conclusion",
        QuestionAnswer => "question-answer",
        BuildRefine => "build-refine",
    }
);

label_enum!(
    /// Conversation participant. Also used as the conversation initiator.
    Speaker {
        User => "user",
        Assistant => "assistant",
    }
);

label_enum!(
    DecisionMakingStyle {
        Analytical => "analytical",
        Intuitive => "intuitive",
        Consultative => "consultative",
        RiskAverse => "risk-averse",
        Impulsive => "impulsive",
    }
);

label_enum!(
    FeedbackReception {
        Receptive => "receptive",
        Balanced => "balanced",
        Skeptical => "skeptical",
        Resistant => "resistant",
    }
);

label_enum!(
    /// Educational methodology.
    Framework {
        Socratic => "socratic",
        Didactic => "didactic",
        Collaborative => "collaborative",
        Experiential => "experiential",
    }
);

label_enum!(
    DisagreementHandling {
        Diplomatic => "diplomatic",
        Direct => "direct",
        Avoidant => "avoidant",
        Collaborative => "collaborative",
    }
);

label_enum!(
    /// Conversation flow grade: A flows with logical transitions, F jumps
    /// between topics at random.
    SmoothnessGrade {
        A => "A",
        B => "B",
        C => "C",
        D => "D",
        E => "E",
        F => "F",
    }
);

#[allow(clippy::derivable_impls)]
impl Default for SmoothnessGrade {
    fn default() -> Self {
        SmoothnessGrade::A
    }
}

impl Speaker {
    pub fn other(self) -> Speaker {
        match self {
            Speaker::User => Speaker::Assistant,
            Speaker::Assistant => Speaker::User,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_round_trip_through_serde() {
        for grade in SmoothnessGrade::ALL {
            let json = serde_json::to_string(grade).unwrap();
            let back: SmoothnessGrade = serde_json::from_str(&json).unwrap();
            assert_eq!(*grade, back);
        }
        assert_eq!(
            serde_json::to_string(&DecisionMakingStyle::RiskAverse).unwrap(),
            "\"risk-averse\""
        );
    }

    #[test]
    fn unknown_label_is_rejected() {
        let err = "casual".parse::<Purpose>().unwrap_err();
        assert!(err.contains("advisory"));
        assert!(serde_json::from_str::<Arc>("\"random\"").is_err());
    }
}
