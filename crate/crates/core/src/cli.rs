//! Model documents and the `flexcurve` command line.
//!
//! A document is JSON with four optional top-level keys: `prospects`, `tree`,
//! `scenarios` and `defaults`. Prospect, tree-node and scenario-generated ids
//! share one namespace. Commands write to stdout or `--out`; failures print
//! one line `error[<class>]: <reason>` to stderr and exit with the class code.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write;
use std::marker::PhantomData;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, ErrorKind};
use crate::models::{
    adaptive_template, enumerate_policies, node_curve, policy_prospect, rollback, rollback_from,
    stigler_scenario, AdaptiveSpec, Commitment, DecisionTree, Node, StiglerSpec,
};
use crate::orders::{compare, upper_envelope, KRange, TailRelation};
use crate::prospects::Prospect;
use crate::valuation::{
    certain_equivalent, flexibility_curve, geometric_grid, FlexibilityCurve, RiskAversion,
};

/// Ids under which the two value prospects of a `stigler` scenario appear.
pub const STIGLER_IDS: [&str; 2] = ["stigler.C1", "stigler.C2"];

/// Map that rejects repeated keys instead of keeping the last one.
#[derive(Debug, Clone, PartialEq)]
pub struct UniqueMap<V>(pub BTreeMap<String, V>);

impl<V> Default for UniqueMap<V> {
    fn default() -> Self {
        UniqueMap(BTreeMap::new())
    }
}

impl<V: Serialize> Serialize for UniqueMap<V> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de, V: Deserialize<'de>> Deserialize<'de> for UniqueMap<V> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V_<V>(PhantomData<V>);
        impl<'de, V: Deserialize<'de>> Visitor<'de> for V_<V> {
            type Value = UniqueMap<V>;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an object with unique keys")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut out = BTreeMap::new();
                while let Some(key) = map.next_key::<String>()? {
                    if out.contains_key(&key) {
                        return Err(de::Error::custom(format!("duplicate key `{key}`")));
                    }
                    let value = map.next_value()?;
                    out.insert(key, value);
                }
                Ok(UniqueMap(out))
            }
        }
        d.deserialize_map(V_(PhantomData))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProspectDef {
    Discrete {
        points: Vec<(f64, f64)>,
    },
    Gaussian {
        mean: f64,
        variance: f64,
    },
    Affine {
        base: String,
        scale: f64,
        offset: f64,
    },
    Sum {
        terms: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NodeDef {
    Decision { children: Vec<(String, String)> },
    Chance { children: Vec<(f64, String)> },
    Terminal { payoff: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDef {
    pub root: String,
    pub nodes: UniqueMap<NodeDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommitmentDef {
    pub label: String,
    pub cost: f64,
    pub allows_reaction: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locked_action: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffDef {
    pub commitment: String,
    pub observation: String,
    pub action: String,
    pub payoff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveDef {
    pub commitments: Vec<CommitmentDef>,
    pub observations: Vec<(String, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observations_by_commitment: Option<UniqueMap<Vec<(String, f64)>>>,
    #[serde(default)]
    pub reactions: Vec<String>,
    pub payoffs: Vec<PayoffDef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiglerDef {
    pub quantities: Vec<(f64, f64)>,
    pub c1: Vec<(f64, f64)>,
    pub c2: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenariosDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stigler: Option<StiglerDef>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefaultsDef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<String>,
}

/// Serialized form of a document, in canonical key order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocumentDef {
    #[serde(default)]
    pub prospects: UniqueMap<ProspectDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<TreeDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenariosDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defaults: Option<DefaultsDef>,
}

/// `lo:hi:steps`, expanded to a geometric grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KGrid {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl KGrid {
    pub fn points(&self) -> crate::Result<Vec<f64>> {
        geometric_grid(self.lo, self.hi, self.steps)
    }
}

impl FromStr for KGrid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("k grid `{s}` is not lo:hi:steps"));
        };
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| format!("k grid `{s}`: `{t}`: {e}"))
        };
        let grid = KGrid {
            lo: num(lo)?,
            hi: num(hi)?,
            steps: steps
                .trim()
                .parse()
                .map_err(|e| format!("k grid `{s}`: steps `{steps}`: {e}"))?,
        };
        grid.points().map_err(|e| e.to_string())?;
        Ok(grid)
    }
}

impl fmt::Display for KGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.steps)
    }
}

/// A parsed, fully validated document.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDocument {
    def: DocumentDef,
    prospects: BTreeMap<String, Prospect>,
    tree: Option<DecisionTree>,
    default_r: Option<RiskAversion>,
    default_k: Option<KGrid>,
}

/// Document failure with the JSON path it refers to.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub path: String,
    pub position: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.path.is_empty() && self.path != "." {
            write!(f, "at `{}`", self.path)?;
            if self.position.is_some() {
                f.write_str(" ")?;
            }
        }
        if let Some((line, col)) = self.position {
            write!(f, "(line {line}, column {col})")?;
        }
        if !self.path.is_empty() && self.path != "." || self.position.is_some() {
            f.write_str(": ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ParseError {}

fn at(path: impl Into<String>, message: impl fmt::Display) -> ParseError {
    ParseError {
        path: path.into(),
        position: None,
        message: message.to_string(),
    }
}

fn resolve_prospect(
    id: &str,
    defs: &BTreeMap<String, ProspectDef>,
    done: &mut BTreeMap<String, Prospect>,
    visiting: &mut Vec<String>,
) -> Result<Prospect, ParseError> {
    if let Some(p) = done.get(id) {
        return Ok(p.clone());
    }
    let path = format!("prospects.{id}");
    if visiting.iter().any(|v| v == id) {
        visiting.push(id.to_string());
        return Err(at(
            path,
            format!("reference cycle {}", visiting.join(" -> ")),
        ));
    }
    let def = &defs[id];
    visiting.push(id.to_string());
    let mut lookup = |field: String, refid: &str| -> Result<Prospect, ParseError> {
        if !defs.contains_key(refid) {
            return Err(at(field, format!("unknown prospect id `{refid}`")));
        }
        resolve_prospect(refid, defs, done, visiting)
    };
    let built = match def {
        ProspectDef::Discrete { points } => Prospect::discrete(points.iter().copied()),
        ProspectDef::Gaussian { mean, variance } => Prospect::gaussian(*mean, *variance),
        ProspectDef::Affine {
            base,
            scale,
            offset,
        } => {
            let b = lookup(format!("{path}.base"), base)?;
            Prospect::affine(b, *scale, *offset)
        }
        ProspectDef::Sum { terms } => {
            let mut resolved = Vec::with_capacity(terms.len());
            for (i, t) in terms.iter().enumerate() {
                resolved.push(lookup(format!("{path}.terms[{i}]"), t)?);
            }
            Prospect::independent_sum(resolved)
        }
    }
    .map_err(|e| at(path.clone(), e))?;
    visiting.pop();
    done.insert(id.to_string(), built.clone());
    Ok(built)
}

fn build_tree(def: &TreeDef) -> Result<DecisionTree, ParseError> {
    let mut nodes = BTreeMap::new();
    for (id, n) in &def.nodes.0 {
        let node = match n {
            NodeDef::Decision { children } => Node::Decision {
                children: children.clone(),
            },
            NodeDef::Chance { children } => Node::Chance {
                children: children.clone(),
            },
            NodeDef::Terminal { payoff } => Node::Terminal { payoff: *payoff },
        };
        nodes.insert(id.clone(), node);
    }
    DecisionTree::new(def.root.clone(), nodes).map_err(|e| match &e {
        Error::InvalidTree { node, .. } if def.nodes.0.contains_key(node) => {
            at(format!("tree.nodes.{node}"), e)
        }
        _ => at("tree", e),
    })
}

fn adaptive_spec(def: &AdaptiveDef) -> Result<AdaptiveSpec, ParseError> {
    let mut payoffs = BTreeMap::new();
    for (i, p) in def.payoffs.iter().enumerate() {
        let key = (
            p.commitment.clone(),
            p.observation.clone(),
            p.action.clone(),
        );
        if payoffs.insert(key, p.payoff).is_some() {
            return Err(at(
                format!("scenarios.adaptive.payoffs[{i}]"),
                "duplicate (commitment, observation, action) entry",
            ));
        }
    }
    Ok(AdaptiveSpec {
        commitments: def
            .commitments
            .iter()
            .map(|c| Commitment {
                label: c.label.clone(),
                cost: c.cost,
                allows_reaction: c.allows_reaction,
                locked_action: c.locked_action.clone(),
            })
            .collect(),
        observations: def.observations.clone(),
        observations_by_commitment: def
            .observations_by_commitment
            .as_ref()
            .map(|m| m.0.clone())
            .unwrap_or_default(),
        reactions: def.reactions.clone(),
        payoffs,
    })
}

impl ModelDocument {
    /// Parses and validates a JSON document.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let def: DocumentDef = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let position = (inner.line() > 0).then(|| (inner.line(), inner.column()));
            let mut message = inner.to_string();
            // serde_json appends its own position; it is reported separately.
            if let Some(i) = message.rfind(" at line ") {
                message.truncate(i);
            }
            ParseError {
                path,
                position,
                message,
            }
        })?;
        Self::from_def(def)
    }

    /// Validates an already deserialized document.
    pub fn from_def(def: DocumentDef) -> Result<Self, ParseError> {
        let defs = &def.prospects.0;
        let mut prospects = BTreeMap::new();
        for id in defs.keys() {
            resolve_prospect(id, defs, &mut prospects, &mut Vec::new())?;
        }

        let scenarios = def.scenarios.clone().unwrap_or_default();
        let tree = match (&def.tree, &scenarios.adaptive) {
            (Some(_), Some(_)) => {
                return Err(at(
                    "scenarios.adaptive",
                    "a document may define `tree` or an adaptive scenario, not both",
                ))
            }
            (Some(t), None) => Some(build_tree(t)?),
            (None, Some(a)) => Some(
                adaptive_template(&adaptive_spec(a)?).map_err(|e| at("scenarios.adaptive", e))?,
            ),
            (None, None) => None,
        };

        if let Some(s) = &scenarios.stigler {
            let spec = StiglerSpec {
                quantities: s.quantities.clone(),
                c1: s.c1.clone(),
                c2: s.c2.clone(),
            };
            let (x1, x2) = stigler_scenario(&spec).map_err(|e| at("scenarios.stigler", e))?;
            for (id, p) in STIGLER_IDS.into_iter().zip([x1, x2]) {
                if prospects.insert(id.to_string(), p).is_some() {
                    return Err(at(
                        format!("prospects.{id}"),
                        "id is reserved for the stigler scenario",
                    ));
                }
            }
        }

        if let Some(t) = &tree {
            if let Some(id) = t.nodes().keys().find(|id| prospects.contains_key(*id)) {
                return Err(at(
                    format!("prospects.{id}"),
                    format!("id `{id}` is also a tree node"),
                ));
            }
        }

        let defaults = def.defaults.clone().unwrap_or_default();
        let default_r = defaults
            .r
            .map(RiskAversion::new)
            .transpose()
            .map_err(|e| at("defaults.r", e))?;
        let default_k = defaults
            .k
            .as_deref()
            .map(KGrid::from_str)
            .transpose()
            .map_err(|e| at("defaults.k", e))?;

        Ok(ModelDocument {
            def,
            prospects,
            tree,
            default_r,
            default_k,
        })
    }

    /// Canonical pretty-printed JSON; `parse(emit())` reproduces the document.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.def).expect("documents serialize");
        s.push('\n');
        s
    }

    pub fn def(&self) -> &DocumentDef {
        &self.def
    }

    pub fn prospect(&self, id: &str) -> Option<&Prospect> {
        self.prospects.get(id)
    }

    pub fn prospects(&self) -> &BTreeMap<String, Prospect> {
        &self.prospects
    }

    /// The explicit tree, or the one compiled from the adaptive scenario.
    pub fn tree(&self) -> Option<&DecisionTree> {
        self.tree.as_ref()
    }

    pub fn default_r(&self) -> Option<RiskAversion> {
        self.default_r
    }

    pub fn default_k(&self) -> Option<KGrid> {
        self.default_k
    }
}

pub fn parse_model(text: &str) -> Result<ModelDocument, ParseError> {
    ModelDocument::parse(text)
}

/// `%.12g`-style rendering. Negative zero prints as `0`.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if (-5..12).contains(&exp) {
        trim(&format!("{x:.*}", (11 - exp) as usize))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    }
}

/// Command failure classes, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    Io,
    Usage,
    Parse,
    Domain,
    Range,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::Io => 1,
            FailureClass::Usage => 2,
            FailureClass::Parse => 3,
            FailureClass::Domain => 4,
            FailureClass::Range => 5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FailureClass::Io => "io",
            FailureClass::Usage => "usage",
            FailureClass::Parse => "parse",
            FailureClass::Domain => "domain",
            FailureClass::Range => "range",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub class: FailureClass,
    pub message: String,
}

impl Failure {
    fn new(class: FailureClass, message: impl fmt::Display) -> Self {
        // Reasons stay on one line.
        let message = message.to_string().replace(['\n', '\r'], " ");
        Failure { class, message }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.class.as_str(), self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let class = match e.kind() {
            ErrorKind::Range => FailureClass::Range,
            ErrorKind::Domain | ErrorKind::Unsupported | ErrorKind::Invalid => FailureClass::Domain,
        };
        Failure::new(class, e)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "flexcurve",
    version,
    about = "Certain-equivalent flexibility curves and orders"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON model document.
    #[arg(long)]
    model: PathBuf,
    /// Risk aversion; falls back to `defaults.r`.
    #[arg(long)]
    r: Option<f64>,
    /// Geometric k grid `lo:hi:steps`; falls back to `defaults.k`.
    #[arg(long)]
    k: Option<KGrid>,
    /// Output file, or `stdout`.
    #[arg(long, default_value = "stdout")]
    out: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Certain equivalent of a prospect or tree node.
    Ce {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        id: String,
    },
    /// CSV of flexibility curves.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        ids: Vec<String>,
    },
    /// Flexibility classification of two prospects.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Which prospects are optimal on which k intervals.
    Envelope {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        ids: Vec<String>,
    },
    /// Root certain equivalent and optimal policy of the tree.
    Rollback {
        #[command(flatten)]
        common: Common,
    },
    /// Every policy of the tree with its prospect and certain equivalent.
    Policies {
        #[command(flatten)]
        common: Common,
    },
}

struct Session {
    doc: ModelDocument,
    r: Option<RiskAversion>,
    k: Option<KGrid>,
}

impl Session {
    fn open(common: &Common) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(&common.model).map_err(|e| {
            Failure::new(FailureClass::Io, format!("{}: {e}", common.model.display()))
        })?;
        let doc = ModelDocument::parse(&text).map_err(|e| Failure::new(FailureClass::Parse, e))?;
        let r = match common.r {
            Some(v) => {
                Some(RiskAversion::new(v).map_err(|e| Failure::new(FailureClass::Usage, e))?)
            }
            None => doc.default_r(),
        };
        let k = common.k.or(doc.default_k());
        Ok(Session { doc, r, k })
    }

    fn r(&self) -> Result<RiskAversion, Failure> {
        self.r.ok_or_else(|| {
            Failure::new(
                FailureClass::Usage,
                "no --r given and no defaults.r in the model",
            )
        })
    }

    fn ks(&self) -> Result<Vec<f64>, Failure> {
        let grid = self.k.ok_or_else(|| {
            Failure::new(
                FailureClass::Usage,
                "no --k given and no defaults.k in the model",
            )
        })?;
        grid.points()
            .map_err(|e| Failure::new(FailureClass::Usage, e))
    }

    fn tree(&self) -> Result<&DecisionTree, Failure> {
        self.doc
            .tree()
            .ok_or_else(|| Failure::new(FailureClass::Usage, "the model defines no tree"))
    }

    fn prospect(&self, id: &str) -> Result<&Prospect, Failure> {
        self.doc.prospect(id).ok_or_else(|| {
            let hint = if self.doc.tree().is_some_and(|t| t.contains(id)) {
                " (it is a tree node; this command takes prospects)"
            } else {
                ""
            };
            Failure::new(
                FailureClass::Usage,
                format!("unknown prospect id `{id}`{hint}"),
            )
        })
    }

    fn curve(&self, id: &str, r: RiskAversion, ks: &[f64]) -> Result<FlexibilityCurve, Failure> {
        if let Some(p) = self.doc.prospect(id) {
            return Ok(flexibility_curve(id, p, r, ks)?);
        }
        match self.doc.tree() {
            Some(t) if t.contains(id) => Ok(node_curve(t, id, r, ks)?),
            _ => Err(Failure::new(
                FailureClass::Usage,
                format!("unknown id `{id}`"),
            )),
        }
    }
}

fn ce_command(s: &Session, id: &str) -> Result<String, Failure> {
    let r = s.r()?;
    let ce = match s.doc.prospect(id) {
        Some(p) => certain_equivalent(p, r)?,
        None => match s.doc.tree() {
            Some(t) if t.contains(id) => rollback_from(t, id, r)?.ce,
            _ => {
                return Err(Failure::new(
                    FailureClass::Usage,
                    format!("unknown id `{id}`"),
                ))
            }
        },
    };
    Ok(format!("{}\n", format_number(ce)))
}

fn curve_command(s: &Session, ids: &[String]) -> Result<String, Failure> {
    let (r, ks) = (s.r()?, s.ks()?);
    let curves = ids
        .iter()
        .map(|id| s.curve(id, r, &ks))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = String::from("k");
    for id in ids {
        write!(out, ",{id}").unwrap();
    }
    out.push('\n');
    for (i, k) in ks.iter().enumerate() {
        out.push_str(&format_number(*k));
        for c in &curves {
            write!(out, ",{}", format_number(c.samples[i].ce)).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

fn compare_command(s: &Session, a: &str, b: &str) -> Result<String, Failure> {
    let r = s.r()?;
    let v = compare(s.prospect(a)?, s.prospect(b)?, r)?;
    let mut out = String::new();
    writeln!(out, "X {a}").unwrap();
    writeln!(out, "Y {b}").unwrap();
    writeln!(out, "classification {}", v.classification).unwrap();
    match v.threshold_k {
        Some(k) => writeln!(out, "threshold_k {}", format_number(k)).unwrap(),
        None => writeln!(out, "threshold_k none").unwrap(),
    }
    if v.crossings.is_empty() {
        writeln!(out, "crossings none").unwrap();
    } else {
        let cs: Vec<String> = v.crossings.iter().map(|k| format_number(*k)).collect();
        writeln!(out, "crossings {}", cs.join(",")).unwrap();
    }
    match v.tail {
        Some(t) => {
            let rel = match t.relation {
                TailRelation::XAbove => "X_above",
                TailRelation::YAbove => "Y_above",
                TailRelation::Equal => "equal",
            };
            writeln!(
                out,
                "tail {rel} certified_from {} rationale {}",
                format_number(t.certified_from),
                t.rationale
            )
            .unwrap();
        }
        None => writeln!(out, "tail none").unwrap(),
    }
    Ok(out)
}

fn envelope_command(s: &Session, ids: &[String]) -> Result<String, Failure> {
    let r = s.r()?;
    let grid = s.k.ok_or_else(|| {
        Failure::new(
            FailureClass::Usage,
            "no --k given and no defaults.k in the model",
        )
    })?;
    let mut seen = BTreeSet::new();
    let mut family = Vec::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Failure::new(
                FailureClass::Usage,
                format!("id `{id}` listed twice"),
            ));
        }
        family.push((id.clone(), s.prospect(id)?.clone()));
    }
    let range =
        KRange::unrestricted(grid.lo, grid.hi).map_err(|e| Failure::new(FailureClass::Usage, e))?;
    let segments = upper_envelope(&family, r, range)?;
    let mut out = String::from("k_lo,k_hi,optimal\n");
    for seg in &segments {
        writeln!(
            out,
            "{},{},{}",
            format_number(seg.k_lo),
            format_number(seg.k_hi),
            seg.ids.join("|")
        )
        .unwrap();
    }
    let on: BTreeSet<&str> = segments
        .iter()
        .flat_map(|s| s.ids.iter().map(String::as_str))
        .collect();
    let never: Vec<&str> = ids
        .iter()
        .map(String::as_str)
        .filter(|id| !on.contains(id))
        .collect();
    if !never.is_empty() {
        writeln!(out, "# never optimal: {}", never.join(",")).unwrap();
    }
    Ok(out)
}

fn policy_text(p: &crate::models::Policy) -> String {
    if p.is_empty() {
        return "-".into();
    }
    p.choices()
        .iter()
        .map(|(n, l)| format!("{n}={l}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn rollback_command(s: &Session) -> Result<String, Failure> {
    let (t, r) = (s.tree()?, s.r()?);
    let rb = rollback(t, r)?;
    let mut out = format!("ce {}\n", format_number(rb.ce));
    for (node, label) in rb.policy.choices() {
        writeln!(out, "choose {node} {label}").unwrap();
    }
    Ok(out)
}

fn policies_command(s: &Session) -> Result<String, Failure> {
    let (t, r) = (s.tree()?, s.r()?);
    let mut out = String::from("policy,ce,choices,prospect\n");
    for (i, p) in enumerate_policies(t)?.iter().enumerate() {
        let x = policy_prospect(t, p)?;
        let ce = certain_equivalent(&x, r)?;
        let support = match x.as_discrete() {
            Some(d) => d
                .points()
                .iter()
                .map(|(v, m)| format!("{}:{}", format_number(*v), format_number(*m)))
                .collect::<Vec<_>>()
                .join(" "),
            None => x.to_string(),
        };
        writeln!(
            out,
            "{},{},{},{}",
            i + 1,
            format_number(ce),
            policy_text(p),
            support
        )
        .unwrap();
    }
    Ok(out)
}

fn execute(cli: &Cli) -> Result<(String, String), Failure> {
    let (common, text) = match &cli.command {
        Command::Ce { common, id } => (common, ce_command(&Session::open(common)?, id)?),
        Command::Curve { common, ids } => (common, curve_command(&Session::open(common)?, ids)?),
        Command::Compare { common, a, b } => {
            (common, compare_command(&Session::open(common)?, a, b)?)
        }
        Command::Envelope { common, ids } => {
            (common, envelope_command(&Session::open(common)?, ids)?)
        }
        Command::Rollback { common } => (common, rollback_command(&Session::open(common)?)?),
        Command::Policies { common } => (common, policies_command(&Session::open(common)?)?),
    };
    Ok((common.out.clone(), text))
}

/// Runs one command line (program name first). Returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(
                e.kind(),
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = write!(stdout, "{}", e.render());
                return if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand {
                    FailureClass::Usage.exit_code()
                } else {
                    0
                };
            }
            let first = e.render().to_string();
            let line = first
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let f = Failure::new(FailureClass::Usage, line);
            let _ = writeln!(stderr, "{f}");
            return f.class.exit_code();
        }
    };
    let result = execute(&cli).and_then(|(dest, text)| {
        if dest == "stdout" || dest == "-" {
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::new(FailureClass::Io, format!("stdout: {e}")))
        } else {
            std::fs::write(&dest, text)
                .map_err(|e| Failure::new(FailureClass::Io, format!("{dest}: {e}")))
        }
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let _ = writeln!(stderr, "{f}");
            f.class.exit_code()
        }
    }
}
