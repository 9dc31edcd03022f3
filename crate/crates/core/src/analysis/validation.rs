use serde::{Deserialize, Serialize};

/// Outcome of manually reviewing one predicted farm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationTag {
    Valid,
    Rooftop,
    Invalid,
}

impl ValidationTag {
    pub const ALL: [ValidationTag; 3] = [ValidationTag::Valid, ValidationTag::Rooftop, ValidationTag::Invalid];

    pub fn as_str(self) -> &'static str {
        match self {
            ValidationTag::Valid => "valid",
            ValidationTag::Rooftop => "rooftop",
            ValidationTag::Invalid => "invalid",
        }
    }
}

impl std::str::FromStr for ValidationTag {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "valid" => Ok(ValidationTag::Valid),
            "rooftop" => Ok(ValidationTag::Rooftop),
            "invalid" => Ok(ValidationTag::Invalid),
            other => Err(crate::Error::Parse(format!("unknown validation tag `{other}`"))),
        }
    }
}

/// Counts and percentages of review outcomes.
///
/// Percentages are always recomputed from the counts. Published tallies of
/// this kind can disagree with their own counts (e.g. a 377-record row
/// printed as 7.46% of 5185 when the ratio is 7.27%); recomputing is the
/// only consistent choice.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValidationTally {
    pub valid: u64,
    pub rooftop: u64,
    pub invalid: u64,
    pub total: u64,
    pub valid_pct: f64,
    pub rooftop_pct: f64,
    pub invalid_pct: f64,
    /// Valid plus rooftop: predictions that are real solar installations.
    pub correct_pct: f64,
}

impl ValidationTally {
    pub fn from_counts(valid: u64, rooftop: u64, invalid: u64) -> Self {
        let total = valid + rooftop + invalid;
        let pct = |c: u64| if total == 0 { 0.0 } else { 100.0 * c as f64 / total as f64 };
        ValidationTally {
            valid,
            rooftop,
            invalid,
            total,
            valid_pct: pct(valid),
            rooftop_pct: pct(rooftop),
            invalid_pct: pct(invalid),
            correct_pct: pct(valid + rooftop),
        }
    }

    pub fn count(&self, tag: ValidationTag) -> u64 {
        match tag {
            ValidationTag::Valid => self.valid,
            ValidationTag::Rooftop => self.rooftop,
            ValidationTag::Invalid => self.invalid,
        }
    }

    pub fn pct(&self, tag: ValidationTag) -> f64 {
        match tag {
            ValidationTag::Valid => self.valid_pct,
            ValidationTag::Rooftop => self.rooftop_pct,
            ValidationTag::Invalid => self.invalid_pct,
        }
    }
}

pub fn validation_tally<I: IntoIterator<Item = ValidationTag>>(tags: I) -> ValidationTally {
    let mut c = [0u64; 3];
    for t in tags {
        c[t as usize] += 1;
    }
    ValidationTally::from_counts(c[0], c[1], c[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn repeat(v: usize, r: usize, i: usize) -> Vec<ValidationTag> {
        let mut out = vec![ValidationTag::Valid; v];
        out.extend(std::iter::repeat_n(ValidationTag::Rooftop, r));
        out.extend(std::iter::repeat_n(ValidationTag::Invalid, i));
        out
    }

    #[test]
    fn published_counts() {
        let t = validation_tally(repeat(4421, 387, 377));
        assert_eq!(t.total, 5185);
        assert!((t.invalid_pct - 7.27).abs() < 0.005);
        assert!((t.rooftop_pct - 7.46).abs() < 0.005);
        assert!((t.correct_pct - 100.0 * 4808.0 / 5185.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_tallies() {
        let t = validation_tally(repeat(5, 0, 0));
        assert_eq!((t.valid_pct, t.correct_pct), (100.0, 100.0));
        let e = validation_tally(Vec::new());
        assert_eq!((e.total, e.valid, e.correct_pct), (0, 0, 0.0));
        let q = validation_tally(repeat(3, 0, 1));
        assert_eq!((q.valid_pct, q.invalid_pct), (75.0, 25.0));
    }

    #[test]
    fn tags_serialize_lowercase() {
        assert_eq!(serde_json::to_string(&ValidationTag::Rooftop).unwrap(), "\"rooftop\"");
        assert_eq!("invalid".parse::<ValidationTag>().unwrap(), ValidationTag::Invalid);
        assert!("Valid".parse::<ValidationTag>().is_err());
    }
}
