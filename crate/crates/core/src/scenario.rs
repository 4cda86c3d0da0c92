//! Scenario files: topology, arrival law, policy, horizon and seed.

use serde::{Deserialize, Serialize};

use crate::arrivals::ArrivalSpec;
use crate::error::ScenarioError;
use crate::policy::PolicySpec;
use crate::topology::{ComputeSite, Edge, NodeId, Topology};

/// A runnable, validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: Topology,
    pub arrival: ArrivalSpec,
    pub policy: PolicySpec,
    pub horizon: u64,
    pub seed: u64,
}

/// On-disk layout. Key names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub nodes: usize,
    pub edges: Vec<(NodeId, NodeId, u32)>,
    pub sources: (NodeId, NodeId),
    pub destination: NodeId,
    pub computation_nodes: Vec<(NodeId, u32)>,
    pub arrival: ArrivalSpec,
    pub policy: PolicySpec,
    pub horizon: u64,
    pub seed: u64,
}

impl Scenario {
    pub fn new(
        topology: Topology,
        arrival: ArrivalSpec,
        policy: PolicySpec,
        horizon: u64,
        seed: u64,
    ) -> Result<Self, ScenarioError> {
        arrival.validate().map_err(ScenarioError::Invariant)?;
        policy.validate(&topology)?;
        Ok(Scenario {
            topology,
            arrival,
            policy,
            horizon,
            seed,
        })
    }

    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let topology = topology_from_file(&file)?;
        Scenario::new(topology, file.arrival, file.policy, file.horizon, file.seed)
    }

    pub fn to_file(&self) -> ScenarioFile {
        let t = &self.topology;
        let [s1, s2] = t.sources();
        ScenarioFile {
            nodes: t.num_nodes(),
            edges: t.edges().iter().map(|e| (e.a, e.b, e.capacity)).collect(),
            sources: (s1, s2),
            destination: t.destination(),
            computation_nodes: t.sites().iter().map(|s| (s.node, s.capacity)).collect(),
            arrival: self.arrival,
            policy: self.policy,
            horizon: self.horizon,
            seed: self.seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn with_rate(&self, rate: f64) -> Self {
        Scenario {
            arrival: self.arrival.with_rate(rate),
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Scenario { seed, ..self.clone() }
    }

    pub fn with_horizon(&self, horizon: u64) -> Self {
        Scenario { horizon, ..self.clone() }
    }

    /// Replaces the policy, re-checking compatibility with the topology.
    pub fn with_policy(&self, policy: PolicySpec) -> Result<Self, ScenarioError> {
        policy.validate(&self.topology)?;
        Ok(Scenario { policy, ..self.clone() })
    }
}

pub fn topology_from_file(file: &ScenarioFile) -> Result<Topology, ScenarioError> {
    Topology::new(
        file.nodes,
        file.edges
            .iter()
            .map(|&(a, b, capacity)| Edge { a, b, capacity })
            .collect(),
        [file.sources.0, file.sources.1],
        file.destination,
        file.computation_nodes
            .iter()
            .map(|&(node, capacity)| ComputeSite { node, capacity })
            .collect(),
    )
}

/// Deserializes JSON text, naming the offending key on schema errors.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        ScenarioError::Schema {
            key: if path.is_empty() || path == "." {
                "<root>".to_string()
            } else {
                path
            },
            message: err.into_inner().to_string(),
        }
    })
}

/// Reads and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    Scenario::from_file(parse_json(text)?)
}
