//! Bundled experiment configurations.

use crate::config::RunConfig;

pub const SCHOOL: &str = include_str!("../presets/school.toml");
pub const SCHOOL_ISOLATED: &str = include_str!("../presets/school-isolated.toml");
pub const ART_INDUSTRY: &str = include_str!("../presets/art-industry.toml");

/// Names accepted by [`by_name`] and the CLI's `preset:` prefix.
pub const NAMES: [&str; 3] = ["school", "school-isolated", "art-industry"];

pub fn by_name(name: &str) -> Option<RunConfig> {
    let text = match name {
        "school" => SCHOOL,
        "school-isolated" => SCHOOL_ISOLATED,
        "art-industry" => ART_INDUSTRY,
        _ => return None,
    };
    Some(RunConfig::from_toml(text).expect("bundled preset parses"))
}

/// Two artists, one mentor, 15 in-system iterations.
pub fn school() -> RunConfig {
    by_name("school").unwrap()
}

/// [`school`] with critiques kept away from artists and domain.
pub fn school_isolated() -> RunConfig {
    by_name("school-isolated").unwrap()
}

/// One artist and one critic, five iterations.
pub fn art_industry() -> RunConfig {
    by_name("art-industry").unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, Condition};

    #[test]
    fn all_presets_validate() {
        for name in NAMES {
            validate_config(by_name(name).unwrap()).unwrap();
        }
        assert!(by_name("nope").is_none());
    }

    #[test]
    fn isolated_twin_differs_only_in_condition() {
        let mut iso = school_isolated();
        assert_eq!(iso.condition, Condition::Isolated);
        iso.condition = Condition::InSystem;
        assert_eq!(iso, school());
    }

    #[test]
    fn persona_texts() {
        let c = school();
        assert!(c
            .domain
            .description
            .starts_with("This is the year of 2021. We're in an alternative school"));
        assert_eq!(
            c.artists[1].description,
            "Answer as a young person who doesn't have any talents in arts. Their dream is to become a creative and successful artist."
        );
        assert!(c.critics[0]
            .description
            .ends_with("so the children can improve while staying motivated."));
    }
}
