//! MDPs as JSON documents with tensors written as nested arrays.

use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use tsmcts::TabularMdp;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    #[serde(rename = "schema-version")]
    pub schema_version: u32,
    pub discount: f64,
    /// `transition[s][a][s']`
    pub transition: Vec<Vec<Vec<f64>>>,
    /// `reward[s][a]`
    pub reward: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl MdpDocument {
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        MdpDocument {
            schema_version: SCHEMA_VERSION,
            discount: mdp.discount(),
            transition: (0..ns)
                .map(|s| (0..na).map(|a| mdp.transition(s, a).to_vec()).collect())
                .collect(),
            reward: (0..ns)
                .map(|s| (0..na).map(|a| mdp.reward(s, a)).collect())
                .collect(),
            initial: mdp.initial().to_vec(),
            terminal: mdp.terminal_mask().to_vec(),
        }
    }

    pub fn to_mdp(&self) -> anyhow::Result<TabularMdp> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("unsupported MDP schema-version {}", self.schema_version);
        }
        let ns = self.transition.len();
        let na = self.transition.first().map_or(0, Vec::len);
        let mut p = Vec::with_capacity(ns * na * ns);
        for (s, rows) in self.transition.iter().enumerate() {
            if rows.len() != na {
                bail!("transition[{s}] has {} actions, expected {na}", rows.len());
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != ns {
                    bail!(
                        "transition[{s}][{a}] has {} entries, expected {ns}",
                        row.len()
                    );
                }
                p.extend_from_slice(row);
            }
        }
        if self.reward.len() != ns || self.reward.iter().any(|r| r.len() != na) {
            bail!("reward must be a {ns} x {na} array");
        }
        let r = self.reward.concat();
        Ok(TabularMdp::new(
            ns,
            na,
            p,
            r,
            self.discount,
            self.initial.clone(),
            self.terminal.clone(),
        )?)
    }
}

pub fn load(path: &Path) -> anyhow::Result<TabularMdp> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let doc: MdpDocument =
        serde_json::from_str(&text).with_context(|| format!("in {}", path.display()))?;
    doc.to_mdp()
        .with_context(|| format!("in {}", path.display()))
}

pub fn to_json(mdp: &TabularMdp) -> String {
    serde_json::to_string_pretty(&MdpDocument::from_mdp(mdp)).expect("MDP documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use tsmcts::mdp::{gridworld, random_mdp};

    #[test]
    fn round_trip() {
        for mdp in [
            gridworld(3, 2, 0.2, 0.9).unwrap(),
            random_mdp(5, 3, 2, 0.95, 1).unwrap(),
        ] {
            let doc: MdpDocument = serde_json::from_str(&to_json(&mdp)).unwrap();
            assert_eq!(doc.to_mdp().unwrap(), mdp);
        }
    }

    #[test]
    fn ragged_tensor_rejected() {
        let mut doc = MdpDocument::from_mdp(&random_mdp(3, 2, 2, 0.9, 0).unwrap());
        doc.transition[1].pop();
        assert!(doc.to_mdp().is_err());
    }
}
