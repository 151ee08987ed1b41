//! Molds, POS constraints and threshold profiles shipped with the crate.

use crate::lsg::{LabelConfig, PosConstraint, Profile, ProfileConfig};

pub const MOLDS_JSON: &str = include_str!("../data/molds.json");
pub const CONSTRAINTS_JSON: &str = include_str!("../data/constraints.json");
pub const TIGHT_JSON: &str = include_str!("../data/tight.json");
pub const LOOSE_JSON: &str = include_str!("../data/loose.json");

/// Label processing order for span generation.
pub const DEFAULT_LABEL_ORDER: [&str; 12] = [
    "NP", "VP", "ADJP", "ADVP", "PP", "QP", "SBAR", "S", "WHNP", "WHADVP", "PRN", "PRT",
];

pub fn default_label_order() -> Vec<String> {
    DEFAULT_LABEL_ORDER.iter().map(|s| s.to_string()).collect()
}

pub fn constraints() -> Vec<PosConstraint> {
    serde_json::from_str(CONSTRAINTS_JSON).expect("shipped constraints parse")
}

pub fn profile(profile: Profile) -> ProfileConfig {
    let text = match profile {
        Profile::Tight => TIGHT_JSON,
        Profile::Loose => LOOSE_JSON,
    };
    serde_json::from_str(text).expect("shipped profile parses")
}

pub fn label_configs(p: Profile) -> Vec<LabelConfig> {
    profile(p).labels
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_files_cover_every_label() {
        let cons = constraints();
        assert_eq!(cons.len(), 12);
        for p in [Profile::Tight, Profile::Loose] {
            let cfg = profile(p);
            assert_eq!(cfg.profile, p);
            let labels: Vec<&str> = cfg.labels.iter().map(|c| c.label.as_str()).collect();
            assert_eq!(labels, DEFAULT_LABEL_ORDER);
            for c in &cfg.labels {
                assert!(c.threshold > 0.0 && c.tolerance >= 0.0);
            }
        }
        let order: Vec<&str> = cons.iter().map(|c| c.label.as_str()).collect();
        assert_eq!(order, DEFAULT_LABEL_ORDER);
    }

    #[test]
    fn table_values() {
        let t = profile(Profile::Tight);
        let l = profile(Profile::Loose);
        let get = |cfg: &ProfileConfig, label: &str| {
            let c = cfg.labels.iter().find(|c| c.label == label).unwrap();
            (c.threshold, c.tolerance)
        };
        assert_eq!(get(&t, "NP"), (2.0, 0.15));
        assert_eq!(get(&l, "NP"), (1.4, 0.10));
        assert_eq!(get(&t, "SBAR"), (0.2, 0.01));
        assert_eq!(get(&l, "SBAR"), (2.2, 0.10));
        assert_eq!(get(&l, "VP"), (2.0, 0.05));
        let prt = constraints().into_iter().find(|c| c.label == "PRT").unwrap();
        assert_eq!(prt.max_len, Some(1));
    }
}
