//! Named experiment sets: each preset expands to one or more labelled
//! configurations that share data and partition seeds.

use crate::config::{ExperimentConfig, Mode};
use crate::tpgf::FusionRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    /// Train every variant and compare them.
    Train,
    /// Only compute and print the depth assignment.
    Allocation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub kind: PresetKind,
    /// `(label, config)` in display order.
    pub variants: Vec<(String, ExperimentConfig)>,
}

/// Availability levels swept by `availability-sweep`.
pub const AVAILABILITY_LEVELS: [f64; 6] = [1.0, 0.7, 0.5, 0.2, 0.1, 0.0];

fn table1_scaled() -> Preset {
    let mut variants = Vec::new();
    for clients in [10, 50] {
        for mode in [Mode::Ssfl, Mode::Sfl] {
            let cfg = ExperimentConfig { mode, num_clients: clients, ..ExperimentConfig::default() };
            variants.push((format!("{mode}-{clients}"), cfg));
        }
    }
    Preset {
        name: "table1-scaled",
        description: "fusion training vs plain split learning, 10 and 50 clients",
        kind: PresetKind::Train,
        variants,
    }
}

fn ablation_tpgf() -> Preset {
    let rules = [
        ("full", FusionRule::Full),
        ("no-loss-term", FusionRule::DepthOnly),
        ("no-depth-term", FusionRule::LossOnly),
        ("equal", FusionRule::Equal),
    ];
    let variants = rules
        .into_iter()
        .map(|(label, rule)| {
            let mut cfg = ExperimentConfig::default();
            cfg.tpgf.fusion = rule;
            (label.to_string(), cfg)
        })
        .collect();
    Preset {
        name: "ablation-tpgf",
        description: "gradient fusion rule with either factor or both switched off",
        kind: PresetKind::Train,
        variants,
    }
}

fn availability_sweep() -> Preset {
    let variants = AVAILABILITY_LEVELS
        .iter()
        .map(|&p| {
            let mut cfg = ExperimentConfig::default();
            cfg.connectivity.availability_p = p;
            (format!("p={p:.1}"), cfg)
        })
        .collect();
    Preset {
        name: "availability-sweep",
        description: "server reachability from always to never",
        kind: PresetKind::Train,
        variants,
    }
}

fn allocation_demo() -> Preset {
    let cfg = ExperimentConfig { num_clients: 20, ..ExperimentConfig::default() };
    Preset {
        name: "allocation-demo",
        description: "depth assigned to each client from its memory and latency",
        kind: PresetKind::Allocation,
        variants: vec![("allocation".into(), cfg)],
    }
}

pub fn preset_catalog() -> Vec<Preset> {
    vec![table1_scaled(), ablation_tpgf(), availability_sweep(), allocation_demo()]
}

pub fn find_preset(name: &str) -> Option<Preset> {
    preset_catalog().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for p in preset_catalog() {
            for (label, cfg) in &p.variants {
                cfg.validate().unwrap_or_else(|e| panic!("{}/{label}: {e}", p.name));
                let reparsed = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
                assert_eq!(&reparsed, cfg);
            }
        }
    }

    #[test]
    fn sweep_has_six_levels() {
        let p = find_preset("availability-sweep").unwrap();
        assert_eq!(p.variants.len(), 6);
        assert_eq!(p.variants.last().unwrap().1.connectivity.availability_p, 0.0);
    }

    #[test]
    fn comparisons_share_seeds() {
        for name in ["table1-scaled", "ablation-tpgf", "availability-sweep"] {
            let p = find_preset(name).unwrap();
            let seed = p.variants[0].1.seed;
            assert!(p.variants.iter().all(|(_, c)| c.seed == seed && c.partition == p.variants[0].1.partition));
        }
        let t = find_preset("table1-scaled").unwrap();
        let modes: Vec<Mode> = t.variants.iter().map(|(_, c)| c.mode).collect();
        assert_eq!(modes, [Mode::Ssfl, Mode::Sfl, Mode::Ssfl, Mode::Sfl]);
    }

    #[test]
    fn unknown_preset() {
        assert!(find_preset("nope").is_none());
    }
}
