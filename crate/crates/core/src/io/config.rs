use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::Scenario;

/// Environment variable that overrides the scenario seed.
pub const SEED_ENV: &str = "STREAMNAV_SEED";

/// Parse a TOML scenario without validating it.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Read, parse and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let s = parse_scenario(&text)?;
    s.validate()?;
    Ok(s)
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(s).map_err(|e| Error::Parse(e.to_string()))
}

/// Seed precedence: explicit flag, then the environment, then the config.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, config: u64) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env.map(str::trim) {
        None | Some("") => Ok(config),
        Some(v) => v
            .parse()
            .map_err(|_| Error::Parse(format!("{SEED_ENV}={v:?} is not an unsigned 64-bit integer"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::default_six_agent_scenario;

    #[test]
    fn default_scenario_round_trips() {
        let s = default_six_agent_scenario();
        let text = scenario_to_toml(&s).unwrap();
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(scenario_to_toml(&back).unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "duration = 1.0\nagents = []\nspeed = 3\n";
        assert!(matches!(parse_scenario(text), Err(Error::Parse(m)) if m.contains("speed")));
        let nested = "duration = 1.0\nagents = []\n[navigator]\nvdes = 1.0\n";
        assert!(matches!(parse_scenario(nested), Err(Error::Parse(_))));
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let text = r#"
duration = 2.0
[[agents]]
id = 1
position = [0.0, 0.0]
"#;
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.navigator.k_passes, 2);
        assert_eq!(s.agents[0].altitude, 1.0);
        s.validate().unwrap();
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, Some(" "), 3).unwrap(), 3);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert!(resolve_seed(None, Some("x"), 3).is_err());
    }

    #[test]
    fn missing_file_is_an_io_error() {
        let e = load_scenario(Path::new("/nonexistent/streamnav.toml")).unwrap_err();
        assert!(matches!(e, Error::Io(_)));
    }
}
