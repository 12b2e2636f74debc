//! Decision trees rolled back in certain-equivalent space, plus the two
//! scenario generators: commit-observe-react plans and two-cost-curve
//! production plans.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::prospects::{Prospect, MASS_SUM_TOLERANCE};
use crate::valuation::{validate_ks, CurvePoint, FlexibilityCurve, RiskAversion};

/// Upper bound on [`enumerate_policies`] output.
pub const POLICY_LIMIT: u64 = 1_000_000;

pub type NodeId = String;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Decision { children: Vec<(String, NodeId)> },
    Chance { children: Vec<(f64, NodeId)> },
    Terminal { payoff: f64 },
}

/// A validated rooted tree of decision, chance and terminal nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: BTreeMap<NodeId, Node>,
    root: NodeId,
}

fn tree_err(node: &str, reason: impl Into<String>) -> Error {
    Error::InvalidTree {
        node: node.to_string(),
        reason: reason.into(),
    }
}

impl DecisionTree {
    /// Validates the tree shape and renormalises chance probabilities that
    /// sum to one within 1e-9.
    pub fn new(root: impl Into<NodeId>, mut nodes: BTreeMap<NodeId, Node>) -> Result<Self> {
        let root = root.into();
        if !nodes.contains_key(&root) {
            return Err(tree_err(&root, "root node is not defined"));
        }
        let mut parents: BTreeMap<&str, &str> = BTreeMap::new();
        for (id, node) in &nodes {
            let kids: Vec<&NodeId> = match node {
                Node::Terminal { payoff } => {
                    if !payoff.is_finite() {
                        return Err(tree_err(id, format!("payoff {payoff} is not finite")));
                    }
                    Vec::new()
                }
                Node::Decision { children } => {
                    if children.is_empty() {
                        return Err(tree_err(id, "decision node has no children"));
                    }
                    let mut labels = BTreeSet::new();
                    for (label, _) in children {
                        if !labels.insert(label.as_str()) {
                            return Err(tree_err(id, format!("duplicate label `{label}`")));
                        }
                    }
                    children.iter().map(|c| &c.1).collect()
                }
                Node::Chance { children } => {
                    if children.is_empty() {
                        return Err(tree_err(id, "chance node has no children"));
                    }
                    for (p, child) in children {
                        if !(p.is_finite() && *p > 0.0) {
                            return Err(tree_err(
                                id,
                                format!("probability {p} of `{child}` is not positive"),
                            ));
                        }
                    }
                    let total: f64 = children.iter().map(|c| c.0).sum();
                    if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
                        return Err(tree_err(id, format!("probabilities sum to {total}")));
                    }
                    children.iter().map(|c| &c.1).collect()
                }
            };
            for kid in kids {
                if !nodes.contains_key(kid) {
                    return Err(tree_err(id, format!("child `{kid}` is not defined")));
                }
                if kid == &root {
                    return Err(tree_err(id, "the root cannot be a child"));
                }
                if let Some(prev) = parents.insert(kid, id) {
                    return Err(tree_err(
                        kid,
                        format!("has two parents, `{prev}` and `{id}`"),
                    ));
                }
            }
        }
        // With single parents, a node unreachable from the root sits on a cycle.
        let mut seen = BTreeSet::new();
        let mut stack = vec![root.as_str()];
        while let Some(id) = stack.pop() {
            seen.insert(id);
            match &nodes[id] {
                Node::Terminal { .. } => {}
                Node::Decision { children } => stack.extend(children.iter().map(|c| c.1.as_str())),
                Node::Chance { children } => stack.extend(children.iter().map(|c| c.1.as_str())),
            }
        }
        if let Some(orphan) = nodes.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(tree_err(orphan, "not reachable from the root"));
        }
        for node in nodes.values_mut() {
            if let Node::Chance { children } = node {
                let total: f64 = children.iter().map(|c| c.0).sum();
                if total != 1.0 {
                    children.iter_mut().for_each(|c| c.0 /= total);
                }
            }
        }
        Ok(DecisionTree { nodes, root })
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, Node> {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Result<&Node> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }
}

/// Incremental construction of a [`DecisionTree`].
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    nodes: BTreeMap<NodeId, Node>,
    duplicate: Option<NodeId>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(&mut self, id: impl Into<NodeId>, node: Node) -> &mut Self {
        let id = id.into();
        if self.nodes.insert(id.clone(), node).is_some() && self.duplicate.is_none() {
            self.duplicate = Some(id);
        }
        self
    }

    pub fn decision<L: Into<String>, C: Into<NodeId>>(
        &mut self,
        id: impl Into<NodeId>,
        children: impl IntoIterator<Item = (L, C)>,
    ) -> &mut Self {
        let children = children
            .into_iter()
            .map(|(l, c)| (l.into(), c.into()))
            .collect();
        self.insert(id, Node::Decision { children })
    }

    pub fn chance<C: Into<NodeId>>(
        &mut self,
        id: impl Into<NodeId>,
        children: impl IntoIterator<Item = (f64, C)>,
    ) -> &mut Self {
        let children = children.into_iter().map(|(p, c)| (p, c.into())).collect();
        self.insert(id, Node::Chance { children })
    }

    pub fn terminal(&mut self, id: impl Into<NodeId>, payoff: f64) -> &mut Self {
        self.insert(id, Node::Terminal { payoff })
    }

    pub fn build(&self, root: impl Into<NodeId>) -> Result<DecisionTree> {
        if let Some(id) = &self.duplicate {
            return Err(tree_err(id, "node id defined twice"));
        }
        DecisionTree::new(root, self.nodes.clone())
    }
}

/// Selected child label at each decision node reachable under the policy.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct Policy {
    choices: BTreeMap<NodeId, String>,
}

impl Policy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn choose(&mut self, node: impl Into<NodeId>, label: impl Into<String>) -> &mut Self {
        self.choices.insert(node.into(), label.into());
        self
    }

    pub fn choice(&self, node: &str) -> Option<&str> {
        self.choices.get(node).map(String::as_str)
    }

    pub fn choices(&self) -> &BTreeMap<NodeId, String> {
        &self.choices
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

impl FromIterator<(NodeId, String)> for Policy {
    fn from_iter<I: IntoIterator<Item = (NodeId, String)>>(iter: I) -> Self {
        Policy {
            choices: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollback {
    pub ce: f64,
    pub policy: Policy,
}

fn chance_ce(node: &str, children: &[(f64, f64)], rho: f64) -> Result<f64> {
    if let [(_, ce)] = children {
        return Ok(*ce);
    }
    if rho == 0.0 {
        return Ok(children.iter().map(|(p, ce)| p * ce).sum());
    }
    // -(1/ρ) ln Σ p_i e^{-ρ ce_i}, shifted by the largest exponent.
    let mut exps = Vec::with_capacity(children.len());
    let mut max = f64::NEG_INFINITY;
    for &(p, ce) in children {
        let a = p.ln() - rho * ce;
        if !a.is_finite() {
            return Err(Error::Range {
                context: format!("chance node `{node}` at aversion {rho:e}"),
                magnitude: (rho * ce).abs(),
            });
        }
        max = max.max(a);
        exps.push(a);
    }
    let l = max + exps.iter().map(|a| (a - max).exp()).sum::<f64>().ln();
    Ok(-l / rho)
}

fn rollback_node(
    tree: &DecisionTree,
    id: &str,
    rho: f64,
    choices: &mut BTreeMap<NodeId, String>,
) -> Result<f64> {
    match tree.node(id)? {
        Node::Terminal { payoff } => Ok(*payoff),
        Node::Chance { children } => {
            let mut vals = Vec::with_capacity(children.len());
            for (p, child) in children {
                vals.push((*p, rollback_node(tree, child, rho, choices)?));
            }
            chance_ce(id, &vals, rho)
        }
        Node::Decision { children } => {
            let mut best: Option<(f64, &str)> = None;
            for (label, child) in children {
                let ce = rollback_node(tree, child, rho, choices)?;
                best = match best {
                    Some((b, l)) if b > ce || (b == ce && l <= label.as_str()) => Some((b, l)),
                    _ => Some((ce, label.as_str())),
                };
            }
            let (ce, label) = best.expect("decision nodes have children");
            choices.insert(id.to_string(), label.to_string());
            Ok(ce)
        }
    }
}

/// Keeps only the selections reachable from `from` under `choices`.
fn prune(tree: &DecisionTree, from: &str, choices: &BTreeMap<NodeId, String>) -> Policy {
    let mut policy = Policy::new();
    let mut stack = vec![from];
    while let Some(id) = stack.pop() {
        match &tree.nodes[id] {
            Node::Terminal { .. } => {}
            Node::Chance { children } => stack.extend(children.iter().map(|c| c.1.as_str())),
            Node::Decision { children } => {
                let label = &choices[id];
                policy.choose(id, label.clone());
                if let Some((_, child)) = children.iter().find(|c| &c.0 == label) {
                    stack.push(child);
                }
            }
        }
    }
    policy
}

/// Backward induction from `node`: max at decisions, certain-equivalent
/// aggregation at chance nodes. Decision ties go to the smallest label.
pub fn rollback_from(tree: &DecisionTree, node: &str, rho: RiskAversion) -> Result<Rollback> {
    tree.node(node)?;
    let mut choices = BTreeMap::new();
    let ce = rollback_node(tree, node, rho.value(), &mut choices)?;
    Ok(Rollback {
        ce,
        policy: prune(tree, node, &choices),
    })
}

pub fn rollback(tree: &DecisionTree, rho: RiskAversion) -> Result<Rollback> {
    rollback_from(tree, tree.root(), rho)
}

/// `k ↦` rollback CE of the subtree at `node` under aversion `k·r`. The
/// optimal policy may change with `k`.
pub fn node_curve(
    tree: &DecisionTree,
    node: &str,
    r: RiskAversion,
    ks: &[f64],
) -> Result<FlexibilityCurve> {
    tree.node(node)?;
    r.require_positive()?;
    validate_ks(ks)?;
    let mut samples = Vec::with_capacity(ks.len());
    let mut scratch = BTreeMap::new();
    for &k in ks {
        let rho = r.distorted(k)?.value();
        let ce = rollback_node(tree, node, rho, &mut scratch)?;
        samples.push(CurvePoint { k, ce });
    }
    Ok(FlexibilityCurve {
        prospect_id: node.to_string(),
        r,
        samples,
        tail_limit: worst_case_value(tree, node),
    })
}

/// Limit of the rollback CE as aversion grows: chance nodes take their worst
/// child, decisions their best.
fn worst_case_value(tree: &DecisionTree, id: &str) -> f64 {
    match &tree.nodes[id] {
        Node::Terminal { payoff } => *payoff,
        Node::Chance { children } => children
            .iter()
            .map(|c| worst_case_value(tree, &c.1))
            .fold(f64::INFINITY, f64::min),
        Node::Decision { children } => children
            .iter()
            .map(|c| worst_case_value(tree, &c.1))
            .fold(f64::NEG_INFINITY, f64::max),
    }
}

fn count_policies(tree: &DecisionTree, id: &str) -> u128 {
    match &tree.nodes[id] {
        Node::Terminal { .. } => 1,
        Node::Chance { children } => children
            .iter()
            .map(|c| count_policies(tree, &c.1))
            .fold(1u128, u128::saturating_mul),
        Node::Decision { children } => children
            .iter()
            .map(|c| count_policies(tree, &c.1))
            .fold(0u128, u128::saturating_add),
    }
}

fn policies_at(tree: &DecisionTree, id: &str) -> Vec<Vec<(NodeId, String)>> {
    match &tree.nodes[id] {
        Node::Terminal { .. } => vec![Vec::new()],
        Node::Chance { children } => {
            let mut acc: Vec<Vec<(NodeId, String)>> = vec![Vec::new()];
            for (_, child) in children {
                let sub = policies_at(tree, child);
                acc = acc
                    .iter()
                    .flat_map(|prefix| {
                        sub.iter().map(move |s| {
                            let mut v = prefix.clone();
                            v.extend(s.iter().cloned());
                            v
                        })
                    })
                    .collect();
            }
            acc
        }
        Node::Decision { children } => {
            let mut sorted: Vec<&(String, NodeId)> = children.iter().collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            sorted
                .into_iter()
                .flat_map(|(label, child)| {
                    policies_at(tree, child).into_iter().map(move |mut s| {
                        s.insert(0, (id.to_string(), label.clone()));
                        s
                    })
                })
                .collect()
        }
    }
}

/// All deterministic policies, choosing only at decision nodes the policy
/// itself reaches. Depth-first with children in label order.
pub fn enumerate_policies(tree: &DecisionTree) -> Result<Vec<Policy>> {
    let count = count_policies(tree, tree.root());
    if count > POLICY_LIMIT as u128 {
        return Err(Error::TooManyPolicies {
            count,
            limit: POLICY_LIMIT,
        });
    }
    Ok(policies_at(tree, tree.root())
        .into_iter()
        .map(|v| v.into_iter().collect())
        .collect())
}

/// Distribution of terminal payoffs when `policy` is followed.
pub fn policy_prospect(tree: &DecisionTree, policy: &Policy) -> Result<Prospect> {
    let mut outcomes = Vec::new();
    let mut stack = vec![(tree.root(), 1.0)];
    while let Some((id, prob)) = stack.pop() {
        match &tree.nodes[id] {
            Node::Terminal { payoff } => outcomes.push((*payoff, prob)),
            Node::Chance { children } => {
                stack.extend(children.iter().map(|(p, c)| (c.as_str(), prob * p)))
            }
            Node::Decision { children } => {
                let label = policy.choice(id).ok_or_else(|| Error::IncompletePolicy {
                    node: id.to_string(),
                    reason: "has no selection".into(),
                })?;
                let (_, child) = children.iter().find(|c| c.0 == label).ok_or_else(|| {
                    Error::IncompletePolicy {
                        node: id.to_string(),
                        reason: format!("has no child labelled `{label}`"),
                    }
                })?;
                stack.push((child, prob));
            }
        }
    }
    Prospect::discrete(outcomes)
}

/// One commitment of a commit-observe-react plan.
#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    pub label: String,
    pub cost: f64,
    pub allows_reaction: bool,
    /// The forced action when no reaction is allowed.
    pub locked_action: Option<String>,
}

/// Commit, observe, then (if the commitment allows it) react.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdaptiveSpec {
    pub commitments: Vec<Commitment>,
    /// Observation distribution used unless overridden per commitment.
    pub observations: Vec<(String, f64)>,
    pub observations_by_commitment: BTreeMap<String, Vec<(String, f64)>>,
    pub reactions: Vec<String>,
    /// `(commitment, observation, action) → payoff` before commitment cost.
    pub payoffs: BTreeMap<(String, String, String), f64>,
}

impl AdaptiveSpec {
    pub fn observations_for(&self, commitment: &str) -> &[(String, f64)] {
        self.observations_by_commitment
            .get(commitment)
            .map_or(&self.observations[..], |v| &v[..])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::invalid("adaptive scenario", reason);
        if self.commitments.is_empty() {
            return Err(bad("no commitments".into()));
        }
        let mut labels = BTreeSet::new();
        for c in &self.commitments {
            if !labels.insert(c.label.as_str()) {
                return Err(bad(format!("duplicate commitment `{}`", c.label)));
            }
            if !c.cost.is_finite() {
                return Err(bad(format!("commitment `{}` cost is not finite", c.label)));
            }
            match (c.allows_reaction, &c.locked_action) {
                (true, Some(_)) => {
                    return Err(bad(format!(
                        "commitment `{}` allows reaction but locks an action",
                        c.label
                    )))
                }
                (false, None) => {
                    return Err(bad(format!(
                        "commitment `{}` allows no reaction and locks no action",
                        c.label
                    )))
                }
                (true, None) if self.reactions.is_empty() => {
                    return Err(bad("reactions are empty".into()))
                }
                _ => {}
            }
            let obs = self.observations_for(&c.label);
            if obs.is_empty() {
                return Err(bad(format!("commitment `{}` has no observations", c.label)));
            }
            if obs.iter().any(|o| !(o.1.is_finite() && o.1 > 0.0)) {
                return Err(bad(format!(
                    "commitment `{}` has a nonpositive observation probability",
                    c.label
                )));
            }
            let total: f64 = obs.iter().map(|o| o.1).sum();
            if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
                return Err(bad(format!(
                    "observation probabilities for `{}` sum to {total}",
                    c.label
                )));
            }
        }
        if let Some(c) = self
            .observations_by_commitment
            .keys()
            .find(|c| !labels.contains(c.as_str()))
        {
            return Err(bad(format!(
                "observations given for unknown commitment `{c}`"
            )));
        }
        Ok(())
    }

    fn payoff(&self, c: &str, o: &str, a: &str) -> Result<f64> {
        self.payoffs
            .get(&(c.to_string(), o.to_string(), a.to_string()))
            .copied()
            .ok_or_else(|| {
                Error::invalid(
                    "adaptive scenario",
                    format!("no payoff for commitment `{c}`, observation `{o}`, action `{a}`"),
                )
            })
    }
}

/// Id of the chance node entered by `commitment` in [`adaptive_template`].
pub fn commitment_node_id(commitment: &str) -> NodeId {
    format!("root/{commitment}")
}

/// Compiles a commit-observe-react plan into a decision tree rooted at
/// `root`. Terminal payoffs are net of the commitment cost.
pub fn adaptive_template(spec: &AdaptiveSpec) -> Result<DecisionTree> {
    spec.validate()?;
    let mut b = TreeBuilder::new();
    let mut root_children = Vec::new();
    for c in &spec.commitments {
        let c_id = commitment_node_id(&c.label);
        root_children.push((c.label.clone(), c_id.clone()));
        let mut obs_children = Vec::new();
        for (o, p) in spec.observations_for(&c.label) {
            let o_id = format!("{c_id}/{o}");
            obs_children.push((*p, o_id.clone()));
            match &c.locked_action {
                Some(a) => {
                    b.terminal(o_id, spec.payoff(&c.label, o, a)? - c.cost);
                }
                None => {
                    let mut actions = Vec::new();
                    for a in &spec.reactions {
                        let a_id = format!("{o_id}/{a}");
                        b.terminal(a_id.clone(), spec.payoff(&c.label, o, a)? - c.cost);
                        actions.push((a.clone(), a_id));
                    }
                    b.decision(o_id, actions);
                }
            }
        }
        b.chance(c_id, obs_children);
    }
    b.decision("root", root_children);
    b.build("root")
}

/// Two production cost curves over an uncertain quantity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StiglerSpec {
    /// `(quantity, probability)`.
    pub quantities: Vec<(f64, f64)>,
    /// `(quantity, cost)` for each curve.
    pub c1: Vec<(f64, f64)>,
    pub c2: Vec<(f64, f64)>,
}

impl StiglerSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::invalid("stigler scenario", reason);
        if self.quantities.is_empty() {
            return Err(bad("quantity grid is empty".into()));
        }
        let total: f64 = self.quantities.iter().map(|q| q.1).sum();
        if (total - 1.0).abs() > MASS_SUM_TOLERANCE {
            return Err(bad(format!("quantity probabilities sum to {total}")));
        }
        for (name, curve) in [("c1", &self.c1), ("c2", &self.c2)] {
            for &(q, _) in &self.quantities {
                match curve.iter().find(|c| c.0 == q) {
                    None => return Err(bad(format!("{name} has no cost at quantity {q}"))),
                    Some(&(_, cost)) if !cost.is_finite() => {
                        return Err(bad(format!("{name} cost at quantity {q} is not finite")))
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Value prospects `-C1(Q)` and `-C2(Q)` under the quantity distribution.
pub fn stigler_scenario(spec: &StiglerSpec) -> Result<(Prospect, Prospect)> {
    spec.validate()?;
    let value = |curve: &[(f64, f64)]| {
        Prospect::discrete(spec.quantities.iter().map(|&(q, p)| {
            let cost = curve.iter().find(|c| c.0 == q).expect("validated").1;
            (-cost, p)
        }))
    };
    Ok((value(&spec.c1)?, value(&spec.c2)?))
}

/// Gaussian value prospect for a cost with the given mean and variance.
pub fn gaussian_cost_prospect(mean_cost: f64, cost_variance: f64) -> Result<Prospect> {
    Prospect::gaussian(-mean_cost, cost_variance)
}
