//! Built-in fixtures: one configuration per worked example.

use super::config::JobConfig;

pub struct Fixture {
    pub name: &'static str,
    pub source: &'static str,
}

pub const FIXTURES: [Fixture; 6] = [
    Fixture { name: "scaling-group", source: include_str!("../../fixtures/scaling-group.toml") },
    Fixture { name: "oscillator-rotation", source: include_str!("../../fixtures/oscillator-rotation.toml") },
    Fixture { name: "smorodinsky-winternitz", source: include_str!("../../fixtures/smorodinsky-winternitz.toml") },
    Fixture { name: "driven-particle", source: include_str!("../../fixtures/driven-particle.toml") },
    Fixture { name: "identity-f2", source: include_str!("../../fixtures/identity-f2.toml") },
    Fixture { name: "infinitesimal-scaling", source: include_str!("../../fixtures/infinitesimal-scaling.toml") },
];

pub fn names() -> Vec<&'static str> {
    FIXTURES.iter().map(|f| f.name).collect()
}

pub fn find(name: &str) -> Option<&'static Fixture> {
    FIXTURES.iter().find(|f| f.name == name)
}

impl Fixture {
    pub fn config(&self) -> JobConfig {
        JobConfig::from_toml(self.source).expect("built-in fixtures parse")
    }

    /// Notes not routed to a particular check.
    pub fn notes(&self) -> Vec<String> {
        self.config()
            .notes
            .into_iter()
            .filter(|n| !super::config::CheckKind::ALL.iter().any(|c| n.starts_with(&format!("{c}: "))))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_fixtures_with_matching_names() {
        assert_eq!(FIXTURES.len(), 6);
        for f in &FIXTURES {
            let c = f.config();
            assert_eq!(c.fixture.as_deref(), Some(f.name));
            assert!(!f.notes().is_empty());
            c.compile().unwrap();
        }
    }

    #[test]
    fn fixtures_round_trip() {
        for f in &FIXTURES {
            let c = f.config();
            assert_eq!(JobConfig::from_toml(&c.to_toml()).unwrap(), c, "{}", f.name);
        }
    }

    #[test]
    fn smorodinsky_winternitz_excludes_the_pole() {
        let c = find("smorodinsky-winternitz").unwrap().config();
        let e = &c.sampling.exclude[0];
        assert_eq!((e.expr.as_str(), e.lo, e.hi), ("q1", -0.1, 0.1));
    }
}
