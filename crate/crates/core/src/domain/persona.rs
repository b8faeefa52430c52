use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DomainError;

/// Age ranges offered on the persona intake form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AgeGroup {
    From18To24,
    From25To34,
    From35To44,
    From45To54,
    From55To64,
    SixtyFivePlus,
}

impl AgeGroup {
    pub const ALL: [AgeGroup; 6] = [
        AgeGroup::From18To24,
        AgeGroup::From25To34,
        AgeGroup::From35To44,
        AgeGroup::From45To54,
        AgeGroup::From55To64,
        AgeGroup::SixtyFivePlus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AgeGroup::From18To24 => "18 to 24",
            AgeGroup::From25To34 => "25 to 34",
            AgeGroup::From35To44 => "35 to 44",
            AgeGroup::From45To54 => "45 to 54",
            AgeGroup::From55To64 => "55 to 64",
            AgeGroup::SixtyFivePlus => "65 or older",
        }
    }
}

/// Highest completed level of education.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Education {
    LessThanHighSchool,
    HighSchool,
    SomeCollege,
    Associate,
    Bachelors,
    Masters,
    Professional,
    Doctoral,
}

impl Education {
    pub const ALL: [Education; 8] = [
        Education::LessThanHighSchool,
        Education::HighSchool,
        Education::SomeCollege,
        Education::Associate,
        Education::Bachelors,
        Education::Masters,
        Education::Professional,
        Education::Doctoral,
    ];

    /// Form label, as shown to participants.
    pub fn label(self) -> &'static str {
        match self {
            Education::LessThanHighSchool => "Less than high school",
            Education::HighSchool => "High school graduate",
            Education::SomeCollege => "Some college",
            Education::Associate => "Associate",
            Education::Bachelors => "Bachelor's",
            Education::Masters => "Master's",
            Education::Professional => "Professional",
            Education::Doctoral => "Doctoral",
        }
    }

    /// Noun phrase used after "with a" in a rendered persona.
    fn phrase(self) -> &'static str {
        match self {
            Education::LessThanHighSchool => "less than high school education",
            Education::HighSchool => "high school diploma",
            Education::SomeCollege => "some college education",
            Education::Associate => "Associate degree",
            Education::Bachelors => "Bachelor's degree",
            Education::Masters => "Master's degree",
            Education::Professional => "Professional degree",
            Education::Doctoral => "Doctoral degree",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Gender {
    Female,
    Male,
    /// Free-text self description, used verbatim when rendering.
    SelfDescribed(String),
}

impl Gender {
    pub fn label(&self) -> &str {
        match self {
            Gender::Female => "female",
            Gender::Male => "male",
            Gender::SelfDescribed(s) => s,
        }
    }
}

/// Race options offered on the intake form.
pub const RACE_OPTIONS: [&str; 7] = [
    "American Indian or Alaska Native",
    "Asian or Pacific Islander",
    "Black or African American",
    "Hispanic or Latino",
    "White",
    "Multiracial",
    "Other",
];

/// A race label drawn from [`RACE_OPTIONS`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Race(String);

impl Race {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

/// Sociodemographic description of an inquirer.
///
/// `id` identifies the persona across runs; for collected dialogues it is the
/// participant id, so natural and simulated dialogues can be matched on it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub age_group: AgeGroup,
    pub gender: Gender,
    pub race: Race,
    pub education: Education,
    pub native_english: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_description: Option<String>,
}

/// Version tag of the rendering template in [`Persona::render`].
pub const PERSONA_TEMPLATE_VERSION: u32 = 1;

impl Persona {
    /// Renders the persona as an English noun phrase suitable for
    /// "You are <PERSONA>." The wording is fixed (see
    /// [`PERSONA_TEMPLATE_VERSION`]) so prompts are byte-stable across runs.
    pub fn render(&self) -> String {
        let speaker = if self.native_english { "native" } else { "non-native" };
        let mut out = format!(
            "a {}-year-old {} {} with a {} who is a {} English speaker",
            self.age_group.label(),
            self.race.as_str(),
            self.gender.label(),
            self.education.phrase(),
            speaker,
        );
        if let Some(extra) = self.extra_description.as_deref().map(str::trim) {
            if !extra.is_empty() {
                out.push_str(", ");
                out.push_str(extra);
            }
        }
        out
    }
}

pub fn render_persona(p: &Persona) -> String {
    p.render()
}

fn parse_label<T: Copy>(all: &[T], label: fn(T) -> &'static str, field: &'static str, s: &str) -> Result<T, DomainError> {
    let wanted = s.trim();
    all.iter()
        .copied()
        .find(|v| label(*v).eq_ignore_ascii_case(wanted))
        .ok_or_else(|| DomainError::InvalidOption { field, value: s.to_string() })
}

impl FromStr for AgeGroup {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // also accept the compact "18-24" / "65+" spellings
        let normalized = s.trim().replace('-', " to ");
        let normalized = if normalized == "65+" { "65 or older".to_string() } else { normalized };
        parse_label(&AgeGroup::ALL, AgeGroup::label, "age_group", &normalized)
            .map_err(|_| DomainError::InvalidOption { field: "age_group", value: s.to_string() })
    }
}

impl FromStr for Education {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_label(&Education::ALL, Education::label, "education", s)
    }
}

impl FromStr for Gender {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("female") {
            Ok(Gender::Female)
        } else if t.eq_ignore_ascii_case("male") {
            Ok(Gender::Male)
        } else if t.is_empty() || t.contains(['\n', '\r']) {
            Err(DomainError::InvalidOption { field: "gender", value: s.to_string() })
        } else {
            Ok(Gender::SelfDescribed(t.to_string()))
        }
    }
}

impl FromStr for Race {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RACE_OPTIONS
            .iter()
            .find(|o| o.eq_ignore_ascii_case(s.trim()))
            .map(|o| Race((*o).to_string()))
            .ok_or_else(|| DomainError::InvalidOption { field: "race", value: s.to_string() })
    }
}

macro_rules! string_conversions {
    ($($ty:ty),*) => {$(
        impl TryFrom<String> for $ty {
            type Error = DomainError;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$ty> for String {
            fn from(v: $ty) -> String {
                v.to_string()
            }
        }
    )*};
}

string_conversions!(AgeGroup, Education, Gender, Race);

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Education {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl fmt::Display for Race {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
