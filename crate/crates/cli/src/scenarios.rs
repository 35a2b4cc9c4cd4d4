//! Reference scenarios compiled into the binary.

const BUNDLED: [(&str, &str, &str); 9] = [
    ("prep-fig2a", "preparation of b, xi12 = 0.5", include_str!("../scenarios/prep-fig2a.toml")),
    ("merit-fig2b", "preparation merit vs separation", include_str!("../scenarios/merit-fig2b.toml")),
    ("rot-fig3a", "Raman rotation b -> c, xi12 = 0.15", include_str!("../scenarios/rot-fig3a.toml")),
    ("merit-fig3b", "rotation merit vs separation", include_str!("../scenarios/merit-fig3b.toml")),
    ("table1", "preparation tolerances", include_str!("../scenarios/table1.toml")),
    ("table2", "rotation tolerances", include_str!("../scenarios/table2.toml")),
    ("readout", "fluorescence readout contrast", include_str!("../scenarios/readout.toml")),
    ("cphase4", "four-emitter controlled phase", include_str!("../scenarios/cphase4.toml")),
    ("cluster-growth", "cluster chain growth law", include_str!("../scenarios/cluster-growth.toml")),
];

pub fn list() -> impl Iterator<Item = (&'static str, &'static str)> {
    BUNDLED.iter().map(|(name, about, _)| (*name, *about))
}

pub fn get(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _, _)| *n == name).map(|(_, _, text)| *text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn bundled_scenarios_parse_under_their_own_name() {
        for (name, _, text) in BUNDLED {
            let cfg = ScenarioConfig::parse(text).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            assert_eq!(cfg.name, name);
        }
    }
}
