//! The convertible-code model: parameters, partitions of the message,
//! per-node encoding vectors, conversion plans and access accounting.
//!
//! Indexing is 0-based throughout. A node is addressed by [`NodeRef`] with
//! `node` equal to the code column it stores. Stripes that hold fewer message
//! symbols than the code dimension (shortened stripes, used by the
//! generalized regimes) occupy systematic columns `0..len` and have no nodes
//! at the shortened columns.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::codes::MdsCode;
use crate::error::{Error, Result};
use crate::galois::{Field, FieldElement};

pub fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Where the parameters sit relative to the split and merge regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Regime {
    /// `k_i == k_f`.
    Degenerate,
    /// `k_f = factor · k_i`, factor ≥ 2.
    Merge {
        factor: usize,
    },
    /// `k_i = factor · k_f`, factor ≥ 2.
    Split {
        factor: usize,
    },
    General,
}

/// Initial `[n_i, k_i]` and final `[n_f, k_f]` code parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConversionParams {
    pub n_i: usize,
    pub k_i: usize,
    pub n_f: usize,
    pub k_f: usize,
}

impl ConversionParams {
    pub fn new(n_i: usize, k_i: usize, n_f: usize, k_f: usize) -> Result<ConversionParams> {
        if !(n_i > k_i && k_i >= 1) {
            return Err(Error::Parameter(format!("initial code needs n > k >= 1, got [{n_i}, {k_i}]")));
        }
        if !(n_f > k_f && k_f >= 1) {
            return Err(Error::Parameter(format!("final code needs n > k >= 1, got [{n_f}, {k_f}]")));
        }
        Ok(ConversionParams { n_i, k_i, n_f, k_f })
    }

    pub fn r_i(&self) -> usize {
        self.n_i - self.k_i
    }

    pub fn r_f(&self) -> usize {
        self.n_f - self.k_f
    }

    /// `M = lcm(k_i, k_f)`.
    pub fn message_len(&self) -> usize {
        lcm(self.k_i, self.k_f)
    }

    pub fn initial_stripes(&self) -> usize {
        self.message_len() / self.k_i
    }

    pub fn final_stripes(&self) -> usize {
        self.message_len() / self.k_f
    }

    pub fn regime(&self) -> Regime {
        let (ki, kf) = (self.k_i, self.k_f);
        if ki == kf {
            Regime::Degenerate
        } else if kf % ki == 0 {
            Regime::Merge { factor: kf / ki }
        } else if ki % kf == 0 {
            Regime::Split { factor: ki / kf }
        } else {
            Regime::General
        }
    }
}

/// Message-symbol sets of the initial and final stripes. `initial_sets[i][p]`
/// is the message index stored at systematic column `p` of initial stripe `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPair {
    pub initial_sets: Vec<Vec<usize>>,
    pub final_sets: Vec<Vec<usize>>,
}

fn check_partition(sets: &[Vec<usize>], message_len: usize, max_size: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; message_len];
    for (i, set) in sets.iter().enumerate() {
        if set.is_empty() || set.len() > max_size {
            return Err(Error::PartitionMismatch(format!(
                "{what} set {i} has {} symbols, allowed 1..={max_size}",
                set.len()
            )));
        }
        for &x in set {
            if x >= message_len {
                return Err(Error::PartitionMismatch(format!("{what} set {i} holds index {x} >= M = {message_len}")));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::PartitionMismatch(format!("{what} sets repeat message index {x}")));
            }
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(Error::PartitionMismatch(format!("{what} sets miss message index {x}")));
    }
    Ok(())
}

impl PartitionPair {
    /// Consecutive blocks: `I_i = [i·k_i, (i+1)·k_i)` and likewise for `F_j`.
    pub fn contiguous(params: &ConversionParams) -> PartitionPair {
        let m = params.message_len();
        let blocks = |k: usize| (0..m / k).map(|i| (i * k..(i + 1) * k).collect()).collect();
        PartitionPair { initial_sets: blocks(params.k_i), final_sets: blocks(params.k_f) }
    }

    pub fn message_len(&self) -> usize {
        self.initial_sets.iter().map(Vec::len).sum()
    }

    pub fn validate(&self, message_len: usize, max_initial: usize, max_final: usize) -> Result<()> {
        check_partition(&self.initial_sets, message_len, max_initial, "initial")?;
        check_partition(&self.final_sets, message_len, max_final, "final")
    }

    /// `|I_i ∩ F_j|` for every pair.
    pub fn intersection_counts(&self) -> Vec<Vec<usize>> {
        let owner = final_owner(&self.final_sets, self.message_len());
        self.initial_sets
            .iter()
            .map(|set| {
                let mut row = vec![0; self.final_sets.len()];
                for &x in set {
                    row[owner[x].0] += 1;
                }
                row
            })
            .collect()
    }
}

/// `(stripe, column)` holding each message index.
pub(crate) fn final_owner(sets: &[Vec<usize>], message_len: usize) -> Vec<(usize, usize)> {
    let mut owner = vec![(usize::MAX, usize::MAX); message_len];
    for (j, set) in sets.iter().enumerate() {
        for (p, &x) in set.iter().enumerate() {
            owner[x] = (j, p);
        }
    }
    owner
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeRef {
    pub stripe: usize,
    pub node: usize,
}

impl NodeRef {
    pub fn new(stripe: usize, node: usize) -> NodeRef {
        NodeRef { stripe, node }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Initial,
    Final,
}

/// A node's encoding as a function of the whole message: `coeffs · m` is the
/// symbol stored at `node`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingVector {
    pub stripe: usize,
    pub node: usize,
    pub coeffs: Vec<FieldElement>,
}

impl EncodingVector {
    pub fn support(&self) -> Vec<usize> {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, _)| i).collect()
    }

    fn sparse_key(&self) -> Vec<(usize, u16)> {
        self.coeffs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(i, c)| (i, c.0)).collect()
    }
}

/// Codes plus partitions: everything about a convertible code except the
/// conversion procedure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertibleCodeSpec {
    pub params: ConversionParams,
    pub partitions: PartitionPair,
    pub initial_code: MdsCode,
    pub final_code: MdsCode,
}

impl ConvertibleCodeSpec {
    /// Checks code shapes against `params` and the partitions against the
    /// message. Stripes may hold fewer symbols than the code dimension.
    pub fn new(
        params: ConversionParams,
        partitions: PartitionPair,
        initial_code: MdsCode,
        final_code: MdsCode,
    ) -> Result<ConvertibleCodeSpec> {
        if (initial_code.n(), initial_code.k()) != (params.n_i, params.k_i) {
            return Err(Error::Parameter(format!(
                "initial code is [{}, {}], params say [{}, {}]",
                initial_code.n(),
                initial_code.k(),
                params.n_i,
                params.k_i
            )));
        }
        if (final_code.n(), final_code.k()) != (params.n_f, params.k_f) {
            return Err(Error::Parameter(format!(
                "final code is [{}, {}], params say [{}, {}]",
                final_code.n(),
                final_code.k(),
                params.n_f,
                params.k_f
            )));
        }
        if initial_code.field() != final_code.field() {
            return Err(Error::Parameter("initial and final codes use different fields".into()));
        }
        let m = partitions.message_len();
        partitions.validate(m, params.k_i, params.k_f)?;
        Ok(ConvertibleCodeSpec { params, partitions, initial_code, final_code })
    }

    pub fn field(&self) -> &Field {
        self.initial_code.field()
    }

    pub fn message_len(&self) -> usize {
        self.partitions.message_len()
    }

    pub fn code(&self, side: Side) -> &MdsCode {
        match side {
            Side::Initial => &self.initial_code,
            Side::Final => &self.final_code,
        }
    }

    pub fn sets(&self, side: Side) -> &[Vec<usize>] {
        match side {
            Side::Initial => &self.partitions.initial_sets,
            Side::Final => &self.partitions.final_sets,
        }
    }

    pub fn stripe_count(&self, side: Side) -> usize {
        self.sets(side).len()
    }

    /// Code columns that exist in a stripe: the systematic columns holding its
    /// symbols followed by every parity column.
    pub fn stripe_nodes(&self, side: Side, stripe: usize) -> Vec<usize> {
        let code = self.code(side);
        let len = self.sets(side)[stripe].len();
        (0..len).chain(code.k()..code.n()).collect()
    }

    /// Every node of one side, in stripe then column order.
    pub fn grid(&self, side: Side) -> Vec<NodeRef> {
        (0..self.stripe_count(side))
            .flat_map(|s| self.stripe_nodes(side, s).into_iter().map(move |n| NodeRef::new(s, n)))
            .collect()
    }

    pub fn has_node(&self, side: Side, at: NodeRef) -> bool {
        let code = self.code(side);
        self.sets(side)
            .get(at.stripe)
            .is_some_and(|set| at.node < set.len() || (at.node >= code.k() && at.node < code.n()))
    }

    pub fn encoding_vector(&self, side: Side, at: NodeRef) -> Option<EncodingVector> {
        if !self.has_node(side, at) {
            return None;
        }
        let code = self.code(side);
        let set = &self.sets(side)[at.stripe];
        let mut coeffs = vec![FieldElement::ZERO; self.message_len()];
        if at.node < code.k() {
            coeffs[set[at.node]] = FieldElement::ONE;
        } else {
            for (p, &x) in set.iter().enumerate() {
                coeffs[x] = code.parity_coeff(p, at.node - code.k());
            }
        }
        Some(EncodingVector { stripe: at.stripe, node: at.node, coeffs })
    }

    /// Encodes a message (one payload per message index) into the stripes
    /// of one side.
    pub fn encode(&self, side: Side, message: &[Vec<FieldElement>]) -> Result<StripePayloads> {
        if message.len() != self.message_len() {
            return Err(Error::Dimension(format!(
                "message has {} symbols, expected {}",
                message.len(),
                self.message_len()
            )));
        }
        let chunk_len = message.first().map_or(0, Vec::len);
        let code = self.code(side);
        let field = self.field();
        let mut stripes = Vec::new();
        for set in self.sets(side) {
            let mut nodes = BTreeMap::new();
            for (p, &x) in set.iter().enumerate() {
                nodes.insert(p, message[x].clone());
            }
            for t in 0..code.r() {
                let mut parity = vec![FieldElement::ZERO; chunk_len];
                for (p, &x) in set.iter().enumerate() {
                    field.mul_add_slice(&mut parity, &message[x], code.parity_coeff(p, t));
                }
                nodes.insert(code.k() + t, parity);
            }
            stripes.push(nodes);
        }
        Ok(StripePayloads { chunk_len, stripes })
    }
}

/// Node payloads for a set of stripes: `stripes[s][column]` is a vector of
/// `chunk_len` symbols. Plans act on each symbol position independently.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StripePayloads {
    pub chunk_len: usize,
    pub stripes: Vec<BTreeMap<usize, Vec<FieldElement>>>,
}

impl StripePayloads {
    pub fn get(&self, at: NodeRef) -> Option<&Vec<FieldElement>> {
        self.stripes.get(at.stripe).and_then(|s| s.get(&at.node))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnchangedNode {
    pub from: NodeRef,
    pub to: NodeRef,
}

/// A new node with its linear combination over the plan's `read_set`:
/// `coeffs[i]` multiplies the payload of `read_set[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewNode {
    pub stripe: usize,
    pub node: usize,
    pub coeffs: Vec<FieldElement>,
}

impl NewNode {
    pub fn at(&self) -> NodeRef {
        NodeRef::new(self.stripe, self.node)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionPlan {
    #[serde(rename = "unchanged_map")]
    pub unchanged: Vec<UnchangedNode>,
    pub retired: Vec<NodeRef>,
    pub new_nodes: Vec<NewNode>,
    /// Sorted, no duplicates.
    pub read_set: Vec<NodeRef>,
}

/// Node counts by kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeTaxonomy {
    pub unchanged: usize,
    pub retired: usize,
    pub new: usize,
    pub unchanged_per_final_stripe: Vec<usize>,
}

/// Checks the covering rules of a plan and counts node kinds.
pub fn classify(spec: &ConvertibleCodeSpec, plan: &ConversionPlan) -> Result<NodeTaxonomy> {
    let bad = |msg: String| Err(Error::PlanInconsistency(msg));
    let initial: BTreeSet<NodeRef> = spec.grid(Side::Initial).into_iter().collect();
    let final_grid: BTreeSet<NodeRef> = spec.grid(Side::Final).into_iter().collect();

    if plan.read_set.windows(2).any(|w| w[0] >= w[1]) {
        return bad("read set is not sorted and duplicate-free".into());
    }
    if let Some(r) = plan.read_set.iter().find(|r| !initial.contains(r)) {
        return bad(format!("read set references {r:?}, which is not an initial node"));
    }

    let mut kept = BTreeSet::new();
    let mut produced = BTreeSet::new();
    for u in &plan.unchanged {
        if !initial.contains(&u.from) {
            return bad(format!("unchanged source {:?} is not an initial node", u.from));
        }
        if !kept.insert(u.from) {
            return bad(format!("initial node {:?} kept twice", u.from));
        }
        if !final_grid.contains(&u.to) || !produced.insert(u.to) {
            return bad(format!("unchanged target {:?} is not a distinct final node", u.to));
        }
    }
    let retired: BTreeSet<NodeRef> = plan.retired.iter().copied().collect();
    if retired.len() != plan.retired.len() {
        return bad("retired list has duplicates".into());
    }
    let expected_retired: BTreeSet<NodeRef> = initial.difference(&kept).copied().collect();
    if retired != expected_retired {
        return bad("unchanged and retired nodes do not cover the initial grid exactly".into());
    }
    for n in &plan.new_nodes {
        if !final_grid.contains(&n.at()) || !produced.insert(n.at()) {
            return bad(format!("new node {:?} is not a distinct final node", n.at()));
        }
        if n.coeffs.len() != plan.read_set.len() {
            return bad(format!(
                "new node {:?} has {} coefficients for {} reads",
                n.at(),
                n.coeffs.len(),
                plan.read_set.len()
            ));
        }
    }
    if produced != final_grid {
        return bad("new and unchanged nodes do not cover the final grid exactly".into());
    }

    let mut per_stripe = vec![0; spec.stripe_count(Side::Final)];
    for u in &plan.unchanged {
        per_stripe[u.to.stripe] += 1;
    }
    Ok(NodeTaxonomy {
        unchanged: plan.unchanged.len(),
        retired: plan.retired.len(),
        new: plan.new_nodes.len(),
        unchanged_per_final_stripe: per_stripe,
    })
}

/// Reads, writes and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessCost {
    pub reads: usize,
    pub writes: usize,
    pub total: usize,
}

impl AccessCost {
    pub fn new(reads: usize, writes: usize) -> AccessCost {
        AccessCost { reads, writes, total: reads + writes }
    }
}

pub fn access_cost(plan: &ConversionPlan) -> AccessCost {
    AccessCost::new(plan.read_set.len(), plan.new_nodes.len())
}

/// Audited access cost of a plan next to its lower bound and the default
/// approach.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessReport {
    pub reads: usize,
    pub writes: usize,
    pub total: usize,
    /// `None` when no bound is known for the parameters.
    pub bound: Option<AccessCost>,
    pub default_total: usize,
    /// `1 - reads / default_reads`.
    pub savings: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DefaultMode {
    /// Systematic nodes whose encoding vector survives are kept; only
    /// parities are written.
    #[default]
    ReuseSystematic,
    /// Every final node is written from scratch.
    Rebuild,
}

/// Reads every systematic node, then re-encodes.
pub fn default_plan(spec: &ConvertibleCodeSpec, mode: DefaultMode) -> ConversionPlan {
    let m = spec.message_len();
    let mut holder = vec![NodeRef::new(0, 0); m];
    let mut read_set = Vec::with_capacity(m);
    for (i, set) in spec.partitions.initial_sets.iter().enumerate() {
        for (p, &x) in set.iter().enumerate() {
            holder[x] = NodeRef::new(i, p);
            read_set.push(NodeRef::new(i, p));
        }
    }
    read_set.sort();
    let index: HashMap<NodeRef, usize> = read_set.iter().enumerate().map(|(i, &r)| (r, i)).collect();

    let mut plan = ConversionPlan { read_set, ..Default::default() };
    let mut kept = BTreeSet::new();
    for at in spec.grid(Side::Final) {
        let set = &spec.partitions.final_sets[at.stripe];
        if mode == DefaultMode::ReuseSystematic && at.node < set.len() {
            let from = holder[set[at.node]];
            kept.insert(from);
            plan.unchanged.push(UnchangedNode { from, to: at });
            continue;
        }
        let g = spec.encoding_vector(Side::Final, at).expect("grid node exists");
        let mut coeffs = vec![FieldElement::ZERO; plan.read_set.len()];
        for (x, c) in g.coeffs.iter().enumerate() {
            if !c.is_zero() {
                coeffs[index[&holder[x]]] = *c;
            }
        }
        plan.new_nodes.push(NewNode { stripe: at.stripe, node: at.node, coeffs });
    }
    plan.retired = spec.grid(Side::Initial).into_iter().filter(|r| !kept.contains(r)).collect();
    plan
}

/// Checks, at the level of encoding vectors, that every unchanged node keeps
/// its vector and every new node's combination of read vectors equals the
/// final code's vector at that position.
pub fn check_encoding_vectors(spec: &ConvertibleCodeSpec, plan: &ConversionPlan) -> Result<()> {
    let field = spec.field();
    let reads: Vec<EncodingVector> = plan
        .read_set
        .iter()
        .map(|&r| {
            spec.encoding_vector(Side::Initial, r)
                .ok_or_else(|| Error::PlanInconsistency(format!("read node {r:?} does not exist")))
        })
        .collect::<Result<_>>()?;
    for u in &plan.unchanged {
        let a = spec.encoding_vector(Side::Initial, u.from);
        let b = spec.encoding_vector(Side::Final, u.to);
        match (a, b) {
            (Some(a), Some(b)) if a.coeffs == b.coeffs => {}
            _ => {
                return Err(Error::PlanInconsistency(format!(
                    "unchanged node {:?} -> {:?} changes its encoding vector",
                    u.from, u.to
                )))
            }
        }
    }
    for n in &plan.new_nodes {
        let target = spec
            .encoding_vector(Side::Final, n.at())
            .ok_or_else(|| Error::PlanInconsistency(format!("new node {:?} does not exist", n.at())))?;
        let mut got = vec![FieldElement::ZERO; spec.message_len()];
        for (c, r) in n.coeffs.iter().zip(&reads) {
            field.mul_add_slice(&mut got, &r.coeffs, *c);
        }
        if got != target.coeffs {
            return Err(Error::PlanInconsistency(format!(
                "new node {:?} is not the required combination of read nodes",
                n.at()
            )));
        }
    }
    Ok(())
}

/// Finds, for each final node, an initial node with an identical encoding
/// vector. Each initial node is matched at most once; ties go to the lowest
/// `NodeRef`.
pub(crate) fn match_unchanged(spec: &ConvertibleCodeSpec) -> Vec<UnchangedNode> {
    let mut by_vector: HashMap<Vec<(usize, u16)>, Vec<NodeRef>> = HashMap::new();
    for at in spec.grid(Side::Initial) {
        let g = spec.encoding_vector(Side::Initial, at).expect("grid node exists");
        by_vector.entry(g.sparse_key()).or_default().push(at);
    }
    for v in by_vector.values_mut() {
        v.reverse();
    }
    let mut out = Vec::new();
    for at in spec.grid(Side::Final) {
        let g = spec.encoding_vector(Side::Final, at).expect("grid node exists");
        if let Some(from) = by_vector.get_mut(&g.sparse_key()).and_then(Vec::pop) {
            out.push(UnchangedNode { from, to: at });
        }
    }
    out
}
