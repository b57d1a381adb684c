//! Static conformance checking of declared architectures against four
//! rival sets of global-workspace conditions.
//!
//! Graphs are checked structurally; nothing here runs an agent. Conditions
//! whose real content (training provenance, successive querying) has no
//! static signature are checked from declared flags and marked as such.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::Kind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleNode {
    pub id: String,
    #[serde(default)]
    pub parallel: bool,
    #[serde(default)]
    pub kind_filter: Vec<Kind>,
    #[serde(default)]
    pub capacity: Option<u64>,
    #[serde(default)]
    pub dynamic_membership: bool,
    #[serde(default)]
    pub latent_space: bool,
    #[serde(default)]
    pub trained_translation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceNode {
    pub id: String,
    #[serde(default)]
    pub capacity: Option<u64>,
    #[serde(default)]
    pub maintains: bool,
    #[serde(default)]
    pub manipulates: bool,
    #[serde(default)]
    pub coherence_ops: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Forward,
    Bidirectional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub from: String,
    pub to: String,
    #[serde(default)]
    pub direction: Direction,
    #[serde(default)]
    pub bottleneck_capacity: Option<u64>,
    #[serde(default)]
    pub bottom_up_attention: bool,
    #[serde(default)]
    pub top_down_attention: bool,
    #[serde(default)]
    pub vector_copy: bool,
}

impl Edge {
    fn connects(&self, from: &str, to: &str) -> bool {
        (self.from == from && self.to == to)
            || (self.direction == Direction::Bidirectional && self.from == to && self.to == from)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureGraph {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub modules: Vec<ModuleNode>,
    #[serde(default)]
    pub workspace: Option<WorkspaceNode>,
    #[serde(default)]
    pub edges: Vec<Edge>,
}

impl ArchitectureGraph {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let g: ArchitectureGraph =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        g.validate()?;
        Ok(g)
    }

    /// Structural problems: duplicate ids and edges naming undeclared nodes.
    pub fn problems(&self) -> Vec<String> {
        let mut v = Vec::new();
        let mut ids = BTreeSet::new();
        let ws = self.workspace.iter().map(|w| w.id.as_str());
        for id in self.modules.iter().map(|m| m.id.as_str()).chain(ws) {
            if !ids.insert(id) {
                v.push(format!("duplicate node id {id:?}"));
            }
        }
        for (i, e) in self.edges.iter().enumerate() {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    v.push(format!("edges[{i}] references undeclared node {end:?}"));
                }
            }
            if e.bottleneck_capacity == Some(0) {
                v.push(format!("edges[{i}] has a zero bottleneck capacity"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.problems();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(v))
        }
    }

    fn ws_id(&self) -> Option<&str> {
        self.workspace.as_ref().map(|w| w.id.as_str())
    }

    /// Edges carrying content from some module into the workspace.
    pub fn inbound(&self) -> Vec<&Edge> {
        let Some(ws) = self.ws_id() else { return Vec::new() };
        self.edges
            .iter()
            .filter(|e| self.modules.iter().any(|m| e.connects(&m.id, ws)))
            .collect()
    }

    /// Modules reached by an edge out of the workspace, optionally requiring vector copy.
    pub fn broadcast_reach(&self, require_vector_copy: bool) -> BTreeSet<&str> {
        let Some(ws) = self.ws_id() else { return BTreeSet::new() };
        self.modules
            .iter()
            .filter(|m| {
                self.edges
                    .iter()
                    .any(|e| e.connects(ws, &m.id) && (!require_vector_copy || e.vector_copy))
            })
            .map(|m| m.id.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ruleset {
    Authors,
    Butlin,
    VanRullenKanai,
    Juliani,
}

impl Ruleset {
    pub const ALL: [Ruleset; 4] = [
        Ruleset::Authors,
        Ruleset::Butlin,
        Ruleset::VanRullenKanai,
        Ruleset::Juliani,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Ruleset::Authors => "authors",
            Ruleset::Butlin => "butlin",
            Ruleset::VanRullenKanai => "vanrullen-kanai",
            Ruleset::Juliani => "juliani",
        }
    }
}

impl fmt::Display for Ruleset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Ruleset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_lowercase();
        match norm.as_str() {
            "authors" => Ok(Ruleset::Authors),
            "butlin" => Ok(Ruleset::Butlin),
            "vanrullenkanai" | "vk" => Ok(Ruleset::VanRullenKanai),
            "juliani" => Ok(Ruleset::Juliani),
            _ => Err(format!(
                "unknown ruleset {s:?}; expected one of: {}",
                Ruleset::ALL.map(Ruleset::name).join(", ")
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    /// Decided from the graph's structure.
    Structural,
    /// Decided from a self-reported flag that cannot be checked statically.
    Declared,
    /// A structural stand-in for a condition with no exact static signature.
    Approximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition: String,
    pub passed: bool,
    pub reason: String,
    pub basis: Basis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub ruleset: Ruleset,
    pub verdicts: Vec<Verdict>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, condition: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.condition == condition)
    }

    pub fn outcomes(&self) -> BTreeMap<String, bool> {
        self.verdicts.iter().map(|v| (v.condition.clone(), v.passed)).collect()
    }
}

impl fmt::Display for ConformanceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ruleset: {}", self.ruleset)?;
        for v in &self.verdicts {
            let tag = match v.basis {
                Basis::Structural => "",
                Basis::Declared => " [declared, not verified]",
                Basis::Approximation => " [approximation]",
            };
            writeln!(
                f,
                "  {:<4} {}  {}{}",
                v.condition,
                if v.passed { "PASS" } else { "FAIL" },
                v.reason,
                tag
            )?;
        }
        write!(f, "overall: {}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Fraction of modules the workspace must broadcast to for the
    /// "sufficiently many" condition.
    pub broadcast_fraction: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            broadcast_fraction: 0.5,
        }
    }
}

fn verdict(condition: &str, passed: bool, reason: impl Into<String>, basis: Basis) -> Verdict {
    Verdict {
        condition: condition.to_owned(),
        passed,
        reason: reason.into(),
        basis,
    }
}

const NO_WORKSPACE: &str = "no workspace declared";

fn parallel_modules(g: &ArchitectureGraph, name: &str) -> Verdict {
    let n = g.modules.iter().filter(|m| m.parallel).count();
    verdict(
        name,
        n >= 2,
        format!("{n} parallel module(s); at least 2 required"),
        Basis::Structural,
    )
}

fn attended_bottleneck(g: &ArchitectureGraph, name: &str) -> Verdict {
    if g.workspace.is_none() {
        return verdict(name, false, NO_WORKSPACE, Basis::Structural);
    }
    let inbound = g.inbound();
    let ok = inbound
        .iter()
        .any(|e| e.bottleneck_capacity.is_some() && e.bottom_up_attention && e.top_down_attention);
    let reason = if inbound.is_empty() {
        "no inbound edge into the workspace".to_string()
    } else if ok {
        "an inbound edge has a bounded bottleneck with bottom-up and top-down attention".to_string()
    } else if !inbound.iter().any(|e| e.bottleneck_capacity.is_some()) {
        "no information bottleneck on any inbound edge".to_string()
    } else {
        "no bottlenecked inbound edge combines bottom-up and top-down attention".to_string()
    };
    verdict(name, ok, reason, Basis::Structural)
}

fn any_inbound_attention(g: &ArchitectureGraph, name: &str) -> Verdict {
    if g.workspace.is_none() {
        return verdict(name, false, NO_WORKSPACE, Basis::Structural);
    }
    let ok = g
        .inbound()
        .iter()
        .any(|e| e.bottom_up_attention || e.top_down_attention);
    let reason = if ok {
        "inputs to the workspace are selected by attention"
    } else {
        "no attention-gated inbound edge"
    };
    verdict(name, ok, reason, Basis::Structural)
}

fn workspace_flag(g: &ArchitectureGraph, name: &str, flag: fn(&WorkspaceNode) -> bool, what: &str) -> Verdict {
    match &g.workspace {
        None => verdict(name, false, NO_WORKSPACE, Basis::Structural),
        Some(w) => {
            let ok = flag(w);
            let reason = format!("workspace {} {what}", if ok { "does" } else { "does not" });
            verdict(name, ok, reason, Basis::Structural)
        }
    }
}

fn broadcast_all(g: &ArchitectureGraph, name: &str, vector_copy: bool) -> Verdict {
    if g.workspace.is_none() {
        return verdict(name, false, NO_WORKSPACE, Basis::Structural);
    }
    let reach = g.broadcast_reach(vector_copy);
    let missing: Vec<&str> = g
        .modules
        .iter()
        .map(|m| m.id.as_str())
        .filter(|id| !reach.contains(id))
        .collect();
    let ok = !g.modules.is_empty() && missing.is_empty();
    let what = if vector_copy {
        "vector-copy broadcast"
    } else {
        "broadcast"
    };
    let reason = if g.modules.is_empty() {
        "no modules to broadcast to".to_string()
    } else if ok {
        format!("{what} reaches all {} module(s)", g.modules.len())
    } else {
        format!("{what} misses: {}", missing.join(", "))
    };
    let basis = if vector_copy {
        Basis::Declared
    } else {
        Basis::Structural
    };
    verdict(name, ok, reason, basis)
}

pub fn check(graph: &ArchitectureGraph, ruleset: Ruleset) -> Result<ConformanceReport> {
    check_with(graph, ruleset, CheckOptions::default())
}

pub fn check_with(graph: &ArchitectureGraph, ruleset: Ruleset, opts: CheckOptions) -> Result<ConformanceReport> {
    graph.validate()?;
    let g = graph;
    let verdicts = match ruleset {
        Ruleset::Authors => {
            let needed = (opts.broadcast_fraction * g.modules.len() as f64).ceil() as usize;
            let reached = g.broadcast_reach(false).len();
            let ok4 = g.workspace.is_some() && !g.modules.is_empty() && reached >= needed;
            let reason4 = if g.workspace.is_none() {
                NO_WORKSPACE.to_string()
            } else {
                format!(
                    "broadcast reaches {reached} of {} module(s); {needed} required",
                    g.modules.len()
                )
            };
            vec![
                parallel_modules(g, "(1)"),
                attended_bottleneck(g, "(2)"),
                workspace_flag(
                    g,
                    "(3)",
                    |w| w.maintains && w.manipulates && w.coherence_ops,
                    "maintain, manipulate and enforce coherence on its contents",
                ),
                verdict("(4)", ok4, reason4, Basis::Structural),
            ]
        }
        Ruleset::Butlin => {
            let b2 = match &g.workspace {
                None => verdict("B2", false, NO_WORKSPACE, Basis::Structural),
                Some(w) => match w.capacity {
                    None => verdict("B2", false, "workspace capacity is unbounded", Basis::Structural),
                    Some(cap) => {
                        let gated = g.inbound().iter().any(|e| {
                            e.bottleneck_capacity.is_some() && (e.bottom_up_attention || e.top_down_attention)
                        });
                        let caps: Option<Vec<u64>> = g.modules.iter().map(|m| m.capacity).collect();
                        let total = caps.map(|c| c.iter().sum::<u64>());
                        if !gated {
                            verdict(
                                "B2",
                                false,
                                "no attention-gated bottleneck into the workspace",
                                Basis::Structural,
                            )
                        } else if let Some(total) = total.filter(|t| cap >= *t && !g.modules.is_empty()) {
                            verdict(
                                "B2",
                                false,
                                format!("workspace capacity {cap} is not smaller than the modules' combined {total}"),
                                Basis::Structural,
                            )
                        } else {
                            verdict(
                                "B2",
                                true,
                                format!("workspace capacity {cap} behind a bottleneck"),
                                Basis::Structural,
                            )
                        }
                    }
                },
            };
            let b4 = match g.workspace {
                None => verdict("B4", false, NO_WORKSPACE, Basis::Approximation),
                Some(_) => {
                    let ok = g.inbound().iter().any(|e| e.top_down_attention);
                    let reason = if ok {
                        "state-dependent (top-down) attention on an inbound edge"
                    } else {
                        "no top-down attention on any inbound edge"
                    };
                    verdict("B4", ok, reason, Basis::Approximation)
                }
            };
            vec![parallel_modules(g, "B1"), b2, broadcast_all(g, "B3", false), b4]
        }
        Ruleset::VanRullenKanai => {
            let n = g.modules.len();
            let latent = g.modules.iter().filter(|m| m.latent_space).count();
            let vk1 = verdict(
                "VK1",
                n >= 2 && latent == n,
                format!("{latent} of {n} module(s) declare a latent space; at least 2, all required"),
                Basis::Declared,
            );
            let trained = g
                .modules
                .iter()
                .filter(|m| m.latent_space && m.trained_translation)
                .count();
            let vk2 = verdict(
                "VK2",
                n > 0 && trained == n && g.workspace.is_some(),
                format!("{trained} of {n} module(s) declare a trained translation into a shared latent space"),
                Basis::Declared,
            );
            vec![vk1, vk2, any_inbound_attention(g, "VK3"), broadcast_all(g, "VK4", true)]
        }
        Ruleset::Juliani => {
            let dynamic = g.modules.iter().any(|m| m.dynamic_membership);
            vec![
                verdict(
                    "J1",
                    dynamic,
                    if dynamic {
                        "module set is declared dynamic"
                    } else {
                        "no module has dynamic membership"
                    },
                    Basis::Structural,
                ),
                any_inbound_attention(g, "J2"),
                workspace_flag(g, "J3", |w| w.maintains, "maintain its contents"),
                workspace_flag(g, "J4", |w| w.manipulates, "manipulate its contents"),
            ]
        }
    };
    Ok(ConformanceReport { ruleset, verdicts })
}
