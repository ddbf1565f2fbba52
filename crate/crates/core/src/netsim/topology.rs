use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;

use super::NetsimError;

macro_rules! string_id {
    ($($(#[$m:meta])* $name:ident;)*) => {$(
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    )*};
}

string_id! {
    RadioNodeId;
    /// Tracking area identity.
    TaiId;
    PlmnId;
    UpfId;
    EdgeNodeId;
}

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RadioNode {
    pub id: RadioNodeId,
    pub tai: TaiId,
    #[serde(default)]
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct TrackingArea {
    pub tai: TaiId,
    pub plmn: PlmnId,
    pub upf: UpfId,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EdgeNode {
    pub id: EdgeNodeId,
    pub upf: UpfId,
    #[serde(default)]
    pub position: Position,
}

/// Raw topology section of a scenario, before validation.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default)]
    pub radio_nodes: Vec<RadioNode>,
    #[serde(default)]
    pub tais: Vec<TrackingArea>,
    #[serde(default)]
    pub edge_nodes: Vec<EdgeNode>,
}

/// Validated, immutable network layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    radio_nodes: Vec<RadioNode>,
    tais: Vec<TrackingArea>,
    edge_nodes: Vec<EdgeNode>,
    radio_index: BTreeMap<RadioNodeId, usize>,
    tai_index: BTreeMap<TaiId, usize>,
    edge_by_upf: BTreeMap<UpfId, usize>,
}

impl Topology {
    /// Validates the configuration, reporting every violation at once.
    pub fn new(config: TopologyConfig) -> Result<Self, NetsimError> {
        let TopologyConfig {
            radio_nodes,
            tais,
            edge_nodes,
        } = config;
        let mut problems = Vec::new();

        if radio_nodes.is_empty() {
            problems.push("topology has no radio nodes".to_string());
        }
        if tais.is_empty() {
            problems.push("topology has no TAIs".to_string());
        }

        let mut tai_upfs: BTreeMap<&TaiId, Vec<&UpfId>> = BTreeMap::new();
        for t in &tais {
            tai_upfs.entry(&t.tai).or_default().push(&t.upf);
        }
        for (tai, upfs) in &tai_upfs {
            let distinct: BTreeSet<_> = upfs.iter().collect();
            if distinct.len() > 1 {
                let names: Vec<_> = distinct.iter().map(|u| u.as_str()).collect();
                problems.push(format!(
                    "TAI {tai} has {} UPFs ({})",
                    names.len(),
                    names.join(", ")
                ));
            } else if upfs.len() > 1 {
                problems.push(format!("TAI {tai} is listed {} times", upfs.len()));
            }
        }

        let mut seen_radio = BTreeSet::new();
        for r in &radio_nodes {
            if !seen_radio.insert(&r.id) {
                problems.push(format!("duplicate radio node {}", r.id));
            }
            if !tai_upfs.contains_key(&r.tai) {
                problems.push(format!(
                    "radio node {} references unknown TAI {}",
                    r.id, r.tai
                ));
            }
        }

        let used_upfs: BTreeSet<&UpfId> = tais.iter().map(|t| &t.upf).collect();
        let mut edges_per_upf: BTreeMap<&UpfId, Vec<&EdgeNodeId>> = BTreeMap::new();
        let mut seen_edge = BTreeSet::new();
        for e in &edge_nodes {
            if !seen_edge.insert(&e.id) {
                problems.push(format!("duplicate edge node {}", e.id));
            }
            if !used_upfs.contains(&e.upf) {
                problems.push(format!(
                    "edge node {} references unknown UPF {}",
                    e.id, e.upf
                ));
            }
            edges_per_upf.entry(&e.upf).or_default().push(&e.id);
        }
        for upf in &used_upfs {
            match edges_per_upf.get(upf).map(Vec::len).unwrap_or(0) {
                0 => problems.push(format!("UPF {upf} has no edge node")),
                1 => {}
                n => problems.push(format!("UPF {upf} has {n} edge nodes")),
            }
        }

        if !problems.is_empty() {
            return Err(NetsimError::Validation(problems));
        }

        let radio_index = radio_nodes
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.clone(), i))
            .collect();
        let tai_index = tais
            .iter()
            .enumerate()
            .map(|(i, t)| (t.tai.clone(), i))
            .collect();
        let edge_by_upf = edge_nodes
            .iter()
            .enumerate()
            .map(|(i, e)| (e.upf.clone(), i))
            .collect();
        Ok(Self {
            radio_nodes,
            tais,
            edge_nodes,
            radio_index,
            tai_index,
            edge_by_upf,
        })
    }

    /// Two radio nodes, each in its own TAI, each TAI broken out to its own
    /// edge node.
    pub fn two_node() -> Self {
        let config = TopologyConfig {
            radio_nodes: vec![
                RadioNode {
                    id: "gnb1".into(),
                    tai: "tai1".into(),
                    position: Position { x: 0.0, y: 0.0 },
                },
                RadioNode {
                    id: "gnb2".into(),
                    tai: "tai2".into(),
                    position: Position { x: 800.0, y: 0.0 },
                },
            ],
            tais: vec![
                TrackingArea {
                    tai: "tai1".into(),
                    plmn: "00101".into(),
                    upf: "upf1".into(),
                },
                TrackingArea {
                    tai: "tai2".into(),
                    plmn: "00101".into(),
                    upf: "upf2".into(),
                },
            ],
            edge_nodes: vec![
                EdgeNode {
                    id: "edge1".into(),
                    upf: "upf1".into(),
                    position: Position { x: 0.0, y: 50.0 },
                },
                EdgeNode {
                    id: "edge2".into(),
                    upf: "upf2".into(),
                    position: Position { x: 800.0, y: 50.0 },
                },
            ],
        };
        Self::new(config).expect("built-in layout is valid")
    }

    pub fn radio_nodes(&self) -> &[RadioNode] {
        &self.radio_nodes
    }

    pub fn tais(&self) -> &[TrackingArea] {
        &self.tais
    }

    pub fn edge_nodes(&self) -> &[EdgeNode] {
        &self.edge_nodes
    }

    pub fn radio_node(&self, id: &RadioNodeId) -> Option<&RadioNode> {
        self.radio_index.get(id).map(|&i| &self.radio_nodes[i])
    }

    pub fn tracking_area(&self, tai: &TaiId) -> Option<&TrackingArea> {
        self.tai_index.get(tai).map(|&i| &self.tais[i])
    }

    pub fn tai_of(&self, radio: &RadioNodeId) -> Result<&TaiId, NetsimError> {
        self.radio_node(radio)
            .map(|r| &r.tai)
            .ok_or_else(|| NetsimError::UnknownRadioNode(radio.clone()))
    }

    pub fn has_edge_node(&self, id: &EdgeNodeId) -> bool {
        self.edge_nodes.iter().any(|e| &e.id == id)
    }

    /// The UPF serving `tai`. Closeness is fixed when the scenario is
    /// written, so this is a table lookup.
    pub fn nearest_upf(&self, tai: &TaiId) -> Result<&UpfId, NetsimError> {
        self.tracking_area(tai)
            .map(|t| &t.upf)
            .ok_or_else(|| NetsimError::UnknownTai(tai.clone()))
    }

    pub fn edge_for_upf(&self, upf: &UpfId) -> Option<&EdgeNodeId> {
        self.edge_by_upf.get(upf).map(|&i| &self.edge_nodes[i].id)
    }

    pub fn edge_for_tai(&self, tai: &TaiId) -> Result<&EdgeNodeId, NetsimError> {
        let upf = self.nearest_upf(tai)?;
        Ok(self
            .edge_for_upf(upf)
            .expect("validated: every UPF has an edge node"))
    }
}

/// Convenience lookup used by `nearest_upf` callers that only hold a topology.
pub fn nearest_upf<'a>(topology: &'a Topology, tai: &TaiId) -> Result<&'a UpfId, NetsimError> {
    topology.nearest_upf(tai)
}

/// Builds a topology from the `[topology]` table of a TOML scenario.
pub fn build_topology(scenario_toml: &str) -> Result<Topology, NetsimError> {
    #[derive(Deserialize)]
    struct Wrapper {
        topology: TopologyConfig,
    }
    let w: Wrapper =
        toml::from_str(scenario_toml).map_err(|e| NetsimError::Config(e.to_string()))?;
    Topology::new(w.topology)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(n: usize) -> TopologyConfig {
        TopologyConfig {
            radio_nodes: (0..n)
                .map(|i| RadioNode {
                    id: RadioNodeId(format!("gnb{i}")),
                    tai: TaiId(format!("tai{i}")),
                    position: Position {
                        x: (i as f64 * std::f64::consts::TAU / n as f64).cos() * 1000.0,
                        y: (i as f64 * std::f64::consts::TAU / n as f64).sin() * 1000.0,
                    },
                })
                .collect(),
            tais: (0..n)
                .map(|i| TrackingArea {
                    tai: TaiId(format!("tai{i}")),
                    plmn: "00101".into(),
                    upf: UpfId(format!("upf{i}")),
                })
                .collect(),
            edge_nodes: (0..n)
                .map(|i| EdgeNode {
                    id: EdgeNodeId(format!("edge{i}")),
                    upf: UpfId(format!("upf{i}")),
                    position: Position::default(),
                })
                .collect(),
        }
    }

    #[test]
    fn default_layout() {
        let t = Topology::two_node();
        assert_eq!(t.radio_nodes().len(), 2);
        assert_eq!(t.tais().len(), 2);
        assert_eq!(t.edge_nodes().len(), 2);
        assert_eq!(nearest_upf(&t, &"tai1".into()).unwrap().as_str(), "upf1");
        assert_eq!(t.edge_for_tai(&"tai2".into()).unwrap().as_str(), "edge2");
    }

    #[test]
    fn unknown_tai_lookup_fails() {
        let t = Topology::two_node();
        assert!(matches!(
            t.nearest_upf(&"tai9".into()),
            Err(NetsimError::UnknownTai(_))
        ));
    }

    #[test]
    fn tai_with_two_upfs_rejected() {
        let mut c = ring(2);
        c.tais.push(TrackingArea {
            tai: "tai0".into(),
            plmn: "00101".into(),
            upf: "upf1".into(),
        });
        let err = Topology::new(c).unwrap_err();
        let NetsimError::Validation(problems) = err else {
            panic!()
        };
        assert!(
            problems.iter().any(|p| p.contains("TAI tai0 has 2 UPFs")),
            "{problems:?}"
        );
    }

    #[test]
    fn dangling_references_all_listed() {
        let mut c = ring(3);
        c.radio_nodes[0].tai = "nowhere".into();
        c.edge_nodes[1].upf = "ghost".into();
        let NetsimError::Validation(problems) = Topology::new(c).unwrap_err() else {
            panic!()
        };
        assert!(problems.iter().any(|p| p.contains("unknown TAI nowhere")));
        assert!(problems.iter().any(|p| p.contains("unknown UPF ghost")));
        assert!(problems
            .iter()
            .any(|p| p.contains("UPF upf1 has no edge node")));
        assert_eq!(problems.len(), 3);
    }

    #[test]
    fn five_node_ring_is_bijective() {
        let t = Topology::new(ring(5)).unwrap();
        assert_eq!(t.tais().len(), 5);
        let edges: BTreeSet<_> = t
            .tais()
            .iter()
            .map(|a| t.edge_for_tai(&a.tai).unwrap().clone())
            .collect();
        let upfs: BTreeSet<_> = t
            .tais()
            .iter()
            .map(|a| t.nearest_upf(&a.tai).unwrap().clone())
            .collect();
        assert_eq!(edges.len(), 5);
        assert_eq!(upfs.len(), 5);
        for a in t.tais() {
            assert_eq!(t.nearest_upf(&a.tai).unwrap(), &a.upf);
        }
    }

    #[test]
    fn shared_upf_is_allowed() {
        let mut c = ring(2);
        c.tais[1].upf = "upf0".into();
        c.edge_nodes.pop();
        let t = Topology::new(c).unwrap();
        assert_eq!(t.edge_for_tai(&"tai1".into()).unwrap().as_str(), "edge0");
    }

    #[test]
    fn parses_toml_section() {
        let text = r#"
            [[topology.radio_nodes]]
            id = "a"
            tai = "t1"
            position = { x = 1.0, y = 2.0 }
            [[topology.tais]]
            tai = "t1"
            plmn = "00101"
            upf = "u1"
            [[topology.edge_nodes]]
            id = "e1"
            upf = "u1"
        "#;
        let t = build_topology(text).unwrap();
        assert_eq!(
            t.radio_node(&"a".into()).unwrap().position,
            Position { x: 1.0, y: 2.0 }
        );
        assert!(matches!(
            build_topology("[topology]\nbogus = 1"),
            Err(NetsimError::Config(_))
        ));
    }
}
