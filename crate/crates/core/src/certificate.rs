//! Termination certificates: the JSON format and the independent verifier.
//!
//! A certificate lists one entry per iteration of the prover: the component
//! that was analysed, the level mapping, the rules it claims to orient
//! strictly (`S`) and to bound (`B`), and the anchors removed afterwards.
//! Verification recomputes every claim from the rule constraints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::io::render_mcs;
use crate::levelmap::{bounded, find_anchors, orient, LevelMapping, Orientation, PointSets, TaggedArg};
use crate::model::{Mcs, RuleId};
use crate::orders::{OrderPair, OrderType};

pub const CERT_VERSION: u32 = 1;

pub fn tool_version() -> String {
    format!("mcnp {}", env!("CARGO_PKG_VERSION"))
}

/// SHA-256 of the canonical rendering of `mcs`, hex encoded.
pub fn input_digest(mcs: &Mcs) -> String {
    hex::encode(Sha256::digest(render_mcs(mcs).as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub version: u32,
    pub input_digest: String,
    pub tool_version: String,
    pub iterations: Vec<Iteration>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Iteration {
    pub scc: Vec<RuleId>,
    pub pair: PairSpec,
    /// Points without an entry have empty low and high sets.
    pub mapping: BTreeMap<String, SetsSpec>,
    #[serde(rename = "S")]
    pub strict: Vec<RuleId>,
    #[serde(rename = "B")]
    pub bounded: Vec<RuleId>,
    pub anchors: Vec<RuleId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub low: OrderType,
    pub high: OrderType,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSpec {
    pub low: Vec<Entry>,
    pub high: Vec<Entry>,
}

/// A tagged position written `"pos:tag"` with a 1-based position; a bare
/// `"pos"` means tag 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Entry {
    pub pos: usize,
    pub tag: u32,
}

impl fmt::Display for Entry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.pos, self.tag)
    }
}

impl Serialize for Entry {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Entry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        let (pos, tag) = match text.split_once(':') {
            Some((p, t)) => (p, t),
            None => (text.as_str(), "0"),
        };
        let pos = pos.trim().parse().map_err(|_| de::Error::custom(format!("bad position in {text:?}")))?;
        let tag = tag.trim().parse().map_err(|_| de::Error::custom(format!("bad tag in {text:?}")))?;
        Ok(Entry { pos, tag })
    }
}

#[derive(Debug, Error)]
#[error("certificate parse error at {path}: {message}")]
pub struct CertParseError {
    pub path: String,
    pub message: String,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes") + "\n"
    }

    /// Parses a certificate, reporting the path of the offending field.
    pub fn from_json(text: &str) -> Result<Certificate, CertParseError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // serde reports a missing field at its parent; name the field.
            if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            CertParseError { path, message }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReasonCode {
    NotOriented,
    StrictClaimFails,
    BoundClaimFails,
    AnchorClaimFails,
    RulesRemain,
    DigestMismatch,
    /// Unknown points or rules, bad positions or tags, incompatible pairs.
    Malformed,
    /// The iteration's component is not a component of the remaining rules.
    SccMismatch,
    /// A point of the component has an empty low or high set.
    EmptySet,
}

impl ReasonCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasonCode::NotOriented => "not-oriented",
            ReasonCode::StrictClaimFails => "strict-claim-fails",
            ReasonCode::BoundClaimFails => "bound-claim-fails",
            ReasonCode::AnchorClaimFails => "anchor-claim-fails",
            ReasonCode::RulesRemain => "rules-remain",
            ReasonCode::DigestMismatch => "digest-mismatch",
            ReasonCode::Malformed => "malformed",
            ReasonCode::SccMismatch => "scc-mismatch",
            ReasonCode::EmptySet => "empty-set",
        }
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub struct VerifyError {
    pub code: ReasonCode,
    /// 0-based iteration index, when the failure belongs to one.
    pub iteration: Option<usize>,
    pub rule: Option<RuleId>,
    pub detail: String,
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code)?;
        if let Some(i) = self.iteration {
            write!(f, " in iteration {}", i + 1)?;
        }
        if let Some(r) = &self.rule {
            write!(f, " (rule {r})")?;
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

/// An iteration with names resolved against a system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedIteration {
    pub scc: BTreeSet<RuleId>,
    pub mapping: LevelMapping,
    pub strict: BTreeSet<RuleId>,
    pub bounded: BTreeSet<RuleId>,
    pub anchors: BTreeSet<RuleId>,
}

fn fail(code: ReasonCode, iteration: Option<usize>, rule: Option<&str>, detail: impl Into<String>) -> VerifyError {
    VerifyError { code, iteration, rule: rule.map(str::to_string), detail: detail.into() }
}

/// Resolves point names, positions and rule ids of one iteration.
pub fn resolve(mcs: &Mcs, k: usize, it: &Iteration) -> Result<ResolvedIteration, VerifyError> {
    let malformed = |rule: Option<&str>, d: String| fail(ReasonCode::Malformed, Some(k), rule, d);
    let pair = OrderPair::new(it.pair.low, it.pair.high).map_err(|e| malformed(None, e.to_string()))?;
    let modulus = mcs.tag_modulus();
    let mut mapping = LevelMapping::empty(pair, mcs.points().len());
    for (name, spec) in &it.mapping {
        let p = mcs.point_index(name).ok_or_else(|| malformed(None, format!("unknown point {name}")))?;
        let arity = mcs.points()[p].arity;
        let conv = |entries: &[Entry]| -> Result<Vec<TaggedArg>, VerifyError> {
            let mut seen = BTreeSet::new();
            entries
                .iter()
                .map(|e| {
                    if e.pos == 0 || e.pos > arity {
                        return Err(malformed(None, format!("position {} out of range for {name}/{arity}", e.pos)));
                    }
                    if e.tag as usize >= modulus.max(1) {
                        return Err(malformed(None, format!("tag {} not below {modulus}", e.tag)));
                    }
                    if !seen.insert(e.pos) {
                        return Err(malformed(None, format!("position {} listed twice at {name}", e.pos)));
                    }
                    Ok(TaggedArg::new(e.pos - 1, e.tag))
                })
                .collect()
        };
        mapping.sets[p] = PointSets { low: conv(&spec.low)?, high: conv(&spec.high)? };
    }
    let ids = |v: &[RuleId]| -> Result<BTreeSet<RuleId>, VerifyError> {
        v.iter()
            .map(|id| if mcs.rule(id).is_some() { Ok(id.clone()) } else { Err(malformed(Some(id), format!("unknown rule {id}"))) })
            .collect()
    };
    Ok(ResolvedIteration {
        scc: ids(&it.scc)?,
        mapping,
        strict: ids(&it.strict)?,
        bounded: ids(&it.bounded)?,
        anchors: ids(&it.anchors)?,
    })
}

/// Builds the certificate entry for one analysed component.
pub fn make_iteration(
    scc: &Mcs,
    mapping: &LevelMapping,
    strict: &BTreeSet<RuleId>,
    bounded: &BTreeSet<RuleId>,
    anchors: &BTreeSet<RuleId>,
) -> Iteration {
    let conv = |v: &[TaggedArg]| v.iter().map(|a| Entry { pos: a.index + 1, tag: a.tag }).collect();
    let map = mapping
        .sets
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(p, s)| (scc.points()[p].name.clone(), SetsSpec { low: conv(&s.low), high: conv(&s.high) }))
        .collect();
    Iteration {
        scc: scc.rules().iter().map(|r| r.id.clone()).collect(),
        pair: PairSpec { low: mapping.pair.low(), high: mapping.pair.high() },
        mapping: map,
        strict: strict.iter().cloned().collect(),
        bounded: bounded.iter().cloned().collect(),
        anchors: anchors.iter().cloned().collect(),
    }
}

/// Replays a certificate against `mcs`.
///
/// Rules with unsatisfiable constraints and rules on no cycle are discarded
/// up front. Each iteration must name a strongly connected component of the
/// remaining rules, orient all of its rules, and justify its strict,
/// bounded and anchor claims; the anchors are then removed. Succeeds when no
/// rule on a cycle remains.
pub fn verify(mcs: &Mcs, cert: &Certificate) -> Result<(), VerifyError> {
    if cert.version != CERT_VERSION {
        return Err(fail(ReasonCode::Malformed, None, None, format!("unsupported version {}", cert.version)));
    }
    let digest = input_digest(mcs);
    if cert.input_digest != digest {
        return Err(fail(ReasonCode::DigestMismatch, None, None, format!("expected {digest}")));
    }
    let (work, _) = mcs.drop_unsatisfiable();
    let mut remaining = work.cyclic_rules();
    for (k, it) in cert.iterations.iter().enumerate() {
        let r = resolve(mcs, k, it)?;
        let at = |code, rule: Option<&str>, d: String| fail(code, Some(k), rule, d);
        let scc = remaining
            .scc_decompose()
            .into_iter()
            .find(|c| c.rule_ids() == r.scc)
            .ok_or_else(|| at(ReasonCode::SccMismatch, None, "not a component of the remaining rules".into()))?;
        for p in scc.active_points() {
            if r.mapping.low(p).is_empty() || r.mapping.high(p).is_empty() {
                return Err(at(ReasonCode::EmptySet, None, format!("point {}", scc.points()[p].name)));
            }
        }
        let mut strict = BTreeSet::new();
        for g in scc.rules() {
            match orient(&r.mapping, g) {
                Orientation::NotOriented => return Err(at(ReasonCode::NotOriented, Some(&g.id), String::new())),
                Orientation::Strict => {
                    strict.insert(g.id.clone());
                }
                Orientation::Weak => {}
            }
        }
        if let Some(g) = r.strict.iter().find(|g| !strict.contains(*g)) {
            return Err(at(ReasonCode::StrictClaimFails, Some(g), String::new()));
        }
        if let Some(g) = r.bounded.iter().find(|g| scc.rule(g).is_none_or(|rule| !bounded(&r.mapping, rule))) {
            return Err(at(ReasonCode::BoundClaimFails, Some(g), String::new()));
        }
        if r.anchors.is_empty() {
            return Err(at(ReasonCode::AnchorClaimFails, None, "no anchors".into()));
        }
        let anchors = find_anchors(&scc, &r.strict, &r.bounded);
        if let Some(g) = r.anchors.iter().find(|g| !anchors.contains(*g)) {
            return Err(at(ReasonCode::AnchorClaimFails, Some(g), String::new()));
        }
        remaining = remaining.remove_rules(&r.anchors).expect("anchors are remaining rules").cyclic_rules();
    }
    if let Some(g) = remaining.rules().first() {
        let left: Vec<&str> = remaining.rules().iter().map(|r| r.id.as_str()).collect();
        return Err(fail(ReasonCode::RulesRemain, None, Some(&g.id), left.join(", ")));
    }
    Ok(())
}
