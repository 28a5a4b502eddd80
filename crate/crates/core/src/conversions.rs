//! Conversion planning and execution.
//!
//! Every regime goes through [`plan_conversion`], which works only from the
//! encoding vectors of a [`ConvertibleCodeSpec`]:
//!
//! 1. A final node whose encoding vector equals that of some initial node is
//!    kept unchanged (relabeled). Everything else in the final grid is new.
//! 2. An initial stripe `i` may *hide* one intersection `H = I_i ∩ F_j`: rather
//!    than reading the systematic nodes of `H`, it reads its first `s` parity
//!    nodes, where `s` is the number of new nodes in `F_j`. The parity
//!    combination `y` solves `P_I[H, ..s]·y = ĝ_F[H]`, and the contribution of
//!    the stripe's other symbols is removed using systematic nodes that are
//!    read anyway. This pays off when `|H| > s`.
//! 3. All other symbols needed by new nodes are read from systematic nodes.
//!
//! The code builders choose final codes and partitions for which step 2
//! succeeds exactly where the lower bounds allow it.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::optimal_partitions;
use crate::codes::{all_minors_nonsingular, make_systematic_mds, MdsCode, DEFAULT_MDS_BUDGET};
use crate::error::{Error, Result};
use crate::framework::{
    final_owner, match_unchanged, ConversionParams, ConversionPlan, ConvertibleCodeSpec, NewNode, NodeRef,
    PartitionPair, Regime, Side, StripePayloads, UnchangedNode,
};
use crate::galois::{Field, FieldElement, GfMatrix};

/// Scalings tried before the merge-family construction gives up.
pub const MERGE_SEARCH_ATTEMPTS: usize = 1_000;

/// Final code for merging stripes of an `[n, k]` code into slots of the given
/// sizes. Position `p` of slot `b` gets parity row `P_I[p, t]·c[b][t]`
/// (`t < r_f`), so final parity `t` is a combination of initial parities `t`.
/// The scalars are all ones on the first attempt and seeded afterwards; each
/// candidate must pass the exhaustive minor check.
pub fn scaled_merge_code(initial: &MdsCode, slot_sizes: &[usize], r_f: usize, seed: u64) -> Result<MdsCode> {
    let field = initial.field();
    if r_f == 0 || r_f > initial.r() {
        return Err(Error::Parameter(format!("merge family needs 1 <= r_f <= {}, got {r_f}", initial.r())));
    }
    if slot_sizes.is_empty() || slot_sizes.iter().any(|&s| s == 0 || s > initial.k()) {
        return Err(Error::Parameter(format!("slot sizes {slot_sizes:?} must lie in 1..={}", initial.k())));
    }
    let k_f: usize = slot_sizes.iter().sum();
    let q = field.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 0..MERGE_SEARCH_ATTEMPTS {
        let scalars: Vec<Vec<FieldElement>> = slot_sizes
            .iter()
            .map(|_| {
                (0..r_f)
                    .map(|_| if attempt == 0 { FieldElement::ONE } else { FieldElement(rng.gen_range(1..q) as u16) })
                    .collect()
            })
            .collect();
        let mut parity = GfMatrix::zeros(k_f, r_f);
        let mut row = 0;
        for (b, &size) in slot_sizes.iter().enumerate() {
            for p in 0..size {
                for (t, &c) in scalars[b].iter().enumerate().take(r_f) {
                    parity.set(row, t, field.mul(initial.parity_coeff(p, t), c));
                }
                row += 1;
            }
        }
        if all_minors_nonsingular(&parity, field, DEFAULT_MDS_BUDGET)? {
            return MdsCode::from_parity(parity, field.clone());
        }
    }
    Err(Error::SearchExhausted(format!(
        "no MDS scaling for slots {slot_sizes:?}, r = {r_f} in GF(2^{}) after {MERGE_SEARCH_ATTEMPTS} attempts",
        field.bits()
    )))
}

fn structured(p: &ConversionParams) -> bool {
    p.r_f() <= p.r_i() && (p.k_i == p.k_f || p.r_f() < p.k_i.min(p.k_f))
}

/// Final code and partitions for converting stripes of `initial` to
/// `[n_f, k_f]`. Never changes the field.
pub fn build_spec_for_initial(initial: &MdsCode, n_f: usize, k_f: usize, seed: u64) -> Result<ConvertibleCodeSpec> {
    let params = ConversionParams::new(initial.n(), initial.k(), n_f, k_f)?;
    let field = initial.field();
    let (r_f, k_i) = (params.r_f(), params.k_i);
    let final_code = if !structured(&params) {
        make_systematic_mds(n_f, k_f, field, seed.wrapping_add(1))?
    } else if k_i >= k_f {
        initial.project(k_f, r_f)?
    } else {
        let mut slots = vec![k_i; k_f / k_i];
        if !k_f.is_multiple_of(k_i) {
            slots.push(k_f % k_i);
        }
        scaled_merge_code(initial, &slots, r_f, seed.wrapping_add(2))?
    };
    let partitions = match params.regime() {
        Regime::Degenerate => PartitionPair::contiguous(&params),
        _ => optimal_partitions(&params)?.0,
    };
    ConvertibleCodeSpec::new(params, partitions, initial.clone(), final_code)
}

/// Builds both codes. If the final-code search fails in a smaller field, the
/// whole construction is repeated in GF(2^16).
pub fn build_spec(params: &ConversionParams, field: &Field, seed: u64) -> Result<ConvertibleCodeSpec> {
    let attempt = |f: &Field| {
        let initial = make_systematic_mds(params.n_i, params.k_i, f, seed)?;
        build_spec_for_initial(&initial, params.n_f, params.k_f, seed)
    };
    match attempt(field) {
        Err(Error::SearchExhausted(_)) if field.bits() < 16 => attempt(&Field::gf65536()),
        other => other,
    }
}

/// A planned conversion together with the codes and partitions it acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion {
    pub spec: ConvertibleCodeSpec,
    pub plan: ConversionPlan,
}

/// Planner output before flattening: the plan plus, for each initial stripe,
/// the final stripe it hides (if any).
struct Planned {
    plan: ConversionPlan,
    hidden: Vec<Option<usize>>,
}

/// Plans a conversion for any spec. See the module docs for the method.
pub fn plan_conversion(spec: &ConvertibleCodeSpec) -> Result<ConversionPlan> {
    Ok(plan_inner(spec)?.plan)
}

fn plan_inner(spec: &ConvertibleCodeSpec) -> Result<Planned> {
    let field = spec.field();
    let code_i = &spec.initial_code;
    let m = spec.message_len();
    let initial_sets = &spec.partitions.initial_sets;
    let final_sets = &spec.partitions.final_sets;
    let owner_i = final_owner(initial_sets, m);
    let owner_f = final_owner(final_sets, m);

    let unchanged = match_unchanged(spec);
    let produced: BTreeSet<NodeRef> = unchanged.iter().map(|u| u.to).collect();
    let mut new_in: Vec<Vec<usize>> = vec![Vec::new(); final_sets.len()];
    for at in spec.grid(Side::Final) {
        if !produced.contains(&at) {
            new_in[at.stripe].push(at.node);
        }
    }
    let target = |j: usize, node: usize| {
        spec.encoding_vector(Side::Final, NodeRef::new(j, node)).expect("final grid node").coeffs
    };

    // Symbols of I_i grouped by final stripe, in initial-column order.
    let pieces: Vec<BTreeMap<usize, Vec<usize>>> = initial_sets
        .iter()
        .map(|set| {
            let mut by_final: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &x in set {
                by_final.entry(owner_f[x].0).or_default().push(x);
            }
            by_final
        })
        .collect();

    let mut hidden: Vec<Option<usize>> = vec![None; initial_sets.len()];
    let mut hide_solution: Vec<Option<GfMatrix>> = vec![None; initial_sets.len()];
    for (i, by_final) in pieces.iter().enumerate() {
        let mut candidates: Vec<(usize, usize)> = by_final
            .iter()
            .map(|(&j, h)| (j, h.len()))
            .filter(|&(j, h)| {
                let s = new_in[j].len();
                s > 0 && s <= code_i.r() && h > s
            })
            .collect();
        candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        for (j, _) in candidates {
            let h = &by_final[&j];
            let s = new_in[j].len();
            let mut a = GfMatrix::zeros(h.len(), s);
            let mut b = GfMatrix::zeros(h.len(), s);
            let targets: Vec<Vec<FieldElement>> = new_in[j].iter().map(|&node| target(j, node)).collect();
            for (row, &x) in h.iter().enumerate() {
                let p = owner_i[x].1;
                for (t, target) in targets.iter().enumerate().take(s) {
                    a.set(row, t, code_i.parity_coeff(p, t));
                    b.set(row, t, target[x]);
                }
            }
            if let Some(y) = a.solve_consistent(&b, field)? {
                hidden[i] = Some(j);
                hide_solution[i] = Some(y);
                break;
            }
        }
    }

    let mut combos: Vec<(NodeRef, BTreeMap<NodeRef, FieldElement>)> = Vec::new();
    for (j, nodes) in new_in.iter().enumerate() {
        for (c, &node) in nodes.iter().enumerate() {
            let g = target(j, node);
            let mut coeffs: BTreeMap<NodeRef, FieldElement> = BTreeMap::new();
            let mut add = |at: NodeRef, v: FieldElement| {
                let e = coeffs.entry(at).or_insert(FieldElement::ZERO);
                *e += v;
            };
            let contributors: BTreeSet<usize> = final_sets[j].iter().map(|&x| owner_i[x].0).collect();
            for i in contributors {
                let k_i = code_i.k();
                if let (Some(hj), Some(y)) = (hidden[i], &hide_solution[i]) {
                    if hj == j {
                        for t in 0..y.rows() {
                            add(NodeRef::new(i, k_i + t), y.get(t, c));
                        }
                        for (p, &x) in initial_sets[i].iter().enumerate() {
                            if owner_f[x].0 == j {
                                continue;
                            }
                            let mut v = FieldElement::ZERO;
                            for t in 0..y.rows() {
                                v += field.mul(y.get(t, c), code_i.parity_coeff(p, t));
                            }
                            add(NodeRef::new(i, p), v);
                        }
                        continue;
                    }
                }
                for &x in &pieces[i][&j] {
                    add(NodeRef::new(i, owner_i[x].1), g[x]);
                }
            }
            coeffs.retain(|_, v| !v.is_zero());
            combos.push((NodeRef::new(j, node), coeffs));
        }
    }

    let read_set: Vec<NodeRef> =
        combos.iter().flat_map(|(_, c)| c.keys().copied()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: BTreeMap<NodeRef, usize> = read_set.iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let new_nodes = combos
        .into_iter()
        .map(|(at, c)| {
            let mut row = vec![FieldElement::ZERO; read_set.len()];
            for (r, v) in c {
                row[index[&r]] = v;
            }
            NewNode { stripe: at.stripe, node: at.node, coeffs: row }
        })
        .collect();
    let kept: BTreeSet<NodeRef> = unchanged.iter().map(|u| u.from).collect();
    let retired = spec.grid(Side::Initial).into_iter().filter(|r| !kept.contains(r)).collect();
    Ok(Planned { plan: ConversionPlan { unchanged, retired, new_nodes, read_set }, hidden })
}

fn plan_for_regime(
    initial: &MdsCode,
    n_f: usize,
    k_f: usize,
    seed: u64,
    want: fn(Regime) -> bool,
) -> Result<Conversion> {
    let params = ConversionParams::new(initial.n(), initial.k(), n_f, k_f)?;
    if !want(params.regime()) {
        return Err(Error::Regime(format!("{:?} for k_i = {}, k_f = {k_f}", params.regime(), initial.k())));
    }
    let spec = build_spec_for_initial(initial, n_f, k_f, seed)?;
    let plan = plan_conversion(&spec)?;
    Ok(Conversion { spec, plan })
}

/// Split regime, `k_i = ς·k_f`. The final code is the projection of the
/// initial one onto its first `k_f` rows and `r_f` parities.
pub fn plan_split(initial: &MdsCode, n_f: usize, k_f: usize, seed: u64) -> Result<Conversion> {
    plan_for_regime(initial, n_f, k_f, seed, |r| matches!(r, Regime::Split { .. }))
}

/// Merge regime, `k_f = ς·k_i`. Final parities are scaled sums of initial
/// parities.
pub fn plan_merge(initial: &MdsCode, n_f: usize, k_f: usize, seed: u64) -> Result<Conversion> {
    plan_for_regime(initial, n_f, k_f, seed, |r| matches!(r, Regime::Merge { .. }))
}

/// Splits one stripe of `initial` into final stripes of the given sizes. The
/// final code has dimension `k* = max(sizes)` and length `n_f`; smaller final
/// stripes are shortenings of it. The largest stripe takes the first `k*`
/// message symbols.
pub fn plan_generalized_split(initial: &MdsCode, final_sizes: &[usize], n_f: usize) -> Result<Conversion> {
    let k_i = initial.k();
    crate::bounds::gen_split_bound(k_i, final_sizes, 0)?;
    let k_star = final_sizes.iter().copied().max().unwrap_or(0);
    let params = ConversionParams::new(initial.n(), k_i, n_f, k_star)?;
    let largest = final_sizes.iter().position(|&s| s == k_star).unwrap_or(0);
    let mut next = k_star;
    let final_sets = final_sizes
        .iter()
        .enumerate()
        .map(|(j, &size)| {
            if j == largest {
                (0..k_star).collect()
            } else {
                next += size;
                (next - size..next).collect()
            }
        })
        .collect();
    let partitions = PartitionPair { initial_sets: vec![(0..k_i).collect()], final_sets };
    let final_code = if params.r_f() <= params.r_i() {
        initial.project(k_star, params.r_f())?
    } else {
        make_systematic_mds(n_f, k_star, initial.field(), 1)?
    };
    let spec = ConvertibleCodeSpec::new(params, partitions, initial.clone(), final_code)?;
    let plan = plan_conversion(&spec)?;
    Ok(Conversion { spec, plan })
}

/// Merges stripes of the given sizes into one final stripe. Every stripe is a
/// shortening of one `[n_i, k*]` parent code (`k* = max(sizes)`) that keeps its
/// first `size` systematic positions.
pub fn plan_generalized_merge(
    initial_sizes: &[usize],
    n_i: usize,
    n_f: usize,
    field: &Field,
    seed: u64,
) -> Result<Conversion> {
    if initial_sizes.is_empty() || initial_sizes.contains(&0) {
        return Err(Error::Parameter(format!("initial sizes {initial_sizes:?} must be positive")));
    }
    let k_star = initial_sizes.iter().copied().max().unwrap_or(0);
    let k_f: usize = initial_sizes.iter().sum();
    let params = ConversionParams::new(n_i, k_star, n_f, k_f)?;
    let build = |f: &Field| -> Result<(MdsCode, MdsCode)> {
        let initial = make_systematic_mds(n_i, k_star, f, seed)?;
        let final_code = if params.r_f() <= params.r_i() {
            scaled_merge_code(&initial, initial_sizes, params.r_f(), seed.wrapping_add(2))?
        } else {
            make_systematic_mds(n_f, k_f, f, seed.wrapping_add(1))?
        };
        Ok((initial, final_code))
    };
    let (initial, final_code) = match build(field) {
        Err(Error::SearchExhausted(_)) if field.bits() < 16 => build(&Field::gf65536())?,
        other => other?,
    };
    let mut start = 0;
    let initial_sets = initial_sizes
        .iter()
        .map(|&s| {
            start += s;
            (start - s..start).collect()
        })
        .collect();
    let partitions = PartitionPair { initial_sets, final_sets: vec![(0..k_f).collect()] };
    let spec = ConvertibleCodeSpec::new(params, partitions, initial, final_code)?;
    let plan = plan_conversion(&spec)?;
    Ok(Conversion { spec, plan })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneralCase {
    /// `k_i = k_f` and `r_i >= r_f`: nodes are kept.
    Degenerate,
    /// `k_i < k_f`: whole stripes merge, remainder stripes are split first.
    MergeSide,
    /// `k_i > k_f`: stripes split, tails are assembled into extra stripes.
    SplitSide,
    /// No savings are possible; read everything and re-encode.
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Split,
    Merge,
}

/// Part of an initial stripe that lands in one final stripe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Piece {
    pub initial_stripe: usize,
    /// Systematic columns of the initial stripe.
    pub columns: Vec<usize>,
    /// Supplied through parity nodes instead of its own systematic nodes.
    pub hidden: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanGroup {
    pub final_stripe: usize,
    pub whole_stripes: Vec<usize>,
    pub pieces: Vec<Piece>,
}

/// Structure of a general conversion: which initial stripes and pieces feed
/// each final stripe, and the sizes of the intermediate stripes cut from one
/// remainder stripe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneralPlanTree {
    pub case: GeneralCase,
    pub phases: Vec<Phase>,
    pub intermediate_sizes: Vec<usize>,
    pub groups: Vec<PlanGroup>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PartitionPolicy {
    /// Reject specs whose partitions differ from [`optimal_partitions`].
    #[default]
    Optimal,
    /// Plan for whatever partitions the spec carries.
    Arbitrary,
}

fn intermediate_sizes(piece: usize, whole: usize) -> Vec<usize> {
    let mut sizes = vec![piece; whole / piece];
    if !whole.is_multiple_of(piece) {
        sizes.push(whole % piece);
    }
    sizes
}

/// Plans a conversion in any regime and describes its structure.
pub fn plan_general(spec: &ConvertibleCodeSpec, policy: PartitionPolicy) -> Result<(GeneralPlanTree, ConversionPlan)> {
    let p = &spec.params;
    if policy == PartitionPolicy::Optimal {
        let expected = match p.regime() {
            Regime::Degenerate => PartitionPair::contiguous(p),
            _ => optimal_partitions(p)?.0,
        };
        if expected != spec.partitions {
            return Err(Error::PartitionMismatch("spec partitions differ from the optimal layout".into()));
        }
    }
    let planned = plan_inner(spec)?;
    let savings_possible = planned.hidden.iter().any(Option::is_some) || planned.plan.read_set.is_empty();
    let (ki, kf) = (p.k_i, p.k_f);
    let (case, phases, intermediate) = if !savings_possible {
        (GeneralCase::Default, vec![], vec![])
    } else if ki == kf {
        (GeneralCase::Degenerate, vec![], vec![])
    } else if ki < kf {
        let e = kf % ki;
        if e == 0 || p.initial_stripes().is_multiple_of(p.final_stripes()) {
            (GeneralCase::MergeSide, vec![Phase::Merge], vec![])
        } else {
            (GeneralCase::MergeSide, vec![Phase::Split, Phase::Merge], intermediate_sizes(e, ki))
        }
    } else if ki % kf == 0 {
        (GeneralCase::SplitSide, vec![Phase::Split], vec![])
    } else {
        (GeneralCase::SplitSide, vec![Phase::Split, Phase::Merge], intermediate_sizes(kf, ki))
    };

    let m = spec.message_len();
    let owner_i = final_owner(&spec.partitions.initial_sets, m);
    let groups = spec
        .partitions
        .final_sets
        .iter()
        .enumerate()
        .map(|(j, set)| {
            let mut by_initial: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for &x in set {
                by_initial.entry(owner_i[x].0).or_default().push(owner_i[x].1);
            }
            let mut group = PlanGroup { final_stripe: j, whole_stripes: vec![], pieces: vec![] };
            for (i, columns) in by_initial {
                if columns.len() == spec.partitions.initial_sets[i].len() {
                    group.whole_stripes.push(i);
                } else {
                    group.pieces.push(Piece { initial_stripe: i, columns, hidden: planned.hidden[i] == Some(j) });
                }
            }
            group
        })
        .collect();
    Ok((GeneralPlanTree { case, phases, intermediate_sizes: intermediate, groups }, planned.plan))
}

/// Record of node accesses made by [`execute`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouchLog {
    pub reads: Vec<NodeRef>,
    pub writes: Vec<NodeRef>,
    pub relabeled: Vec<UnchangedNode>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Executed {
    pub payloads: StripePayloads,
    pub log: TouchLog,
}

/// Computes every new node of `plan` from the read-set payloads in `reads`
/// (other entries are ignored). When a stripe's read nodes include all its
/// systematic nodes and some parity, that parity is recomputed and a mismatch
/// is reported as corruption.
pub fn compute_new_nodes(
    spec: &ConvertibleCodeSpec,
    plan: &ConversionPlan,
    reads: &StripePayloads,
) -> Result<Vec<(NodeRef, Vec<FieldElement>)>> {
    let field = spec.field();
    let code = &spec.initial_code;
    let mut loaded: BTreeMap<NodeRef, &Vec<FieldElement>> = BTreeMap::new();
    for &r in &plan.read_set {
        let payload =
            reads.get(r).ok_or_else(|| Error::Dimension(format!("payload for read node {r:?} is missing")))?;
        if payload.len() != reads.chunk_len {
            return Err(Error::Corruption { stripe: r.stripe, node: r.node });
        }
        loaded.insert(r, payload);
    }

    for (i, set) in spec.partitions.initial_sets.iter().enumerate() {
        if !(0..set.len()).all(|p| loaded.contains_key(&NodeRef::new(i, p))) {
            continue;
        }
        for t in 0..code.r() {
            let at = NodeRef::new(i, code.k() + t);
            let Some(stored) = loaded.get(&at) else { continue };
            let mut expect = vec![FieldElement::ZERO; reads.chunk_len];
            for p in 0..set.len() {
                field.mul_add_slice(&mut expect, loaded[&NodeRef::new(i, p)], code.parity_coeff(p, t));
            }
            if &expect != *stored {
                return Err(Error::Corruption { stripe: at.stripe, node: at.node });
            }
        }
    }

    Ok(plan
        .new_nodes
        .iter()
        .map(|n| {
            let mut out = vec![FieldElement::ZERO; reads.chunk_len];
            for (r, &c) in plan.read_set.iter().zip(&n.coeffs) {
                if !c.is_zero() {
                    field.mul_add_slice(&mut out, loaded[r], c);
                }
            }
            (n.at(), out)
        })
        .collect())
}

/// Applies a plan to initial stripe payloads. Only nodes in the read set are
/// loaded; unchanged payloads are moved, not read. See [`compute_new_nodes`]
/// for corruption detection.
pub fn execute(spec: &ConvertibleCodeSpec, plan: &ConversionPlan, input: &StripePayloads) -> Result<Executed> {
    let mut log = TouchLog { reads: plan.read_set.clone(), ..Default::default() };
    let new = compute_new_nodes(spec, plan, input)?;
    let mut stripes: Vec<BTreeMap<usize, Vec<FieldElement>>> = vec![BTreeMap::new(); spec.stripe_count(Side::Final)];
    for u in &plan.unchanged {
        let payload = input
            .get(u.from)
            .ok_or_else(|| Error::Dimension(format!("payload for unchanged node {:?} is missing", u.from)))?;
        stripes[u.to.stripe].insert(u.to.node, payload.clone());
        log.relabeled.push(u.clone());
    }
    for (at, payload) in new {
        stripes[at.stripe].insert(at.node, payload);
        log.writes.push(at);
    }
    Ok(Executed { payloads: StripePayloads { chunk_len: input.chunk_len, stripes }, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{general_bound, merge_bound, split_bound};
    use crate::framework::{access_cost, check_encoding_vectors, classify, AccessCost};

    fn message(m: usize, len: usize, seed: u64) -> Vec<Vec<FieldElement>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| (0..len).map(|_| FieldElement(rng.gen_range(0..256))).collect()).collect()
    }

    fn run(spec: &ConvertibleCodeSpec, plan: &ConversionPlan, seed: u64) {
        let msg = message(spec.message_len(), 3, seed);
        let input = spec.encode(Side::Initial, &msg).unwrap();
        let out = execute(spec, plan, &input).unwrap();
        assert_eq!(out.payloads, spec.encode(Side::Final, &msg).unwrap());
        assert_eq!(out.log.reads.len(), plan.read_set.len());
    }

    fn spec(n_i: usize, k_i: usize, n_f: usize, k_f: usize) -> ConvertibleCodeSpec {
        build_spec(&ConversionParams::new(n_i, k_i, n_f, k_f).unwrap(), &Field::gf256(), 7).unwrap()
    }

    #[test]
    fn six_five_to_thirteen_twelve() {
        let s = spec(6, 5, 13, 12);
        let (tree, plan) = plan_general(&s, PartitionPolicy::Optimal).unwrap();
        assert_eq!(access_cost(&plan), AccessCost::new(18, 5));
        assert_eq!(tree.case, GeneralCase::MergeSide);
        assert_eq!(tree.phases, vec![Phase::Split, Phase::Merge]);
        assert_eq!(tree.intermediate_sizes, vec![2, 2, 1]);
        check_encoding_vectors(&s, &plan).unwrap();
        run(&s, &plan, 1);
    }

    #[test]
    fn thirteen_twelve_to_six_five() {
        let s = spec(13, 12, 6, 5);
        let (tree, plan) = plan_general(&s, PartitionPolicy::Optimal).unwrap();
        assert_eq!(access_cost(&plan), AccessCost::new(40, 12));
        assert_eq!(tree.case, GeneralCase::SplitSide);
        assert_eq!(tree.intermediate_sizes, vec![5, 5, 2]);
        check_encoding_vectors(&s, &plan).unwrap();
        run(&s, &plan, 2);
    }

    #[test]
    fn split_examples() {
        let f = Field::gf256();
        let c = plan_split(&make_systematic_mds(13, 10, &f, 3).unwrap(), 6, 5, 3).unwrap();
        let cost = access_cost(&c.plan);
        assert_eq!(cost, AccessCost::new(6, 2));
        assert_eq!(cost, split_bound(&c.spec.params).unwrap());
        let t = classify(&c.spec, &c.plan).unwrap();
        assert_eq!(t.unchanged_per_final_stripe, vec![5, 5]);
        run(&c.spec, &c.plan, 3);

        let c = plan_split(&make_systematic_mds(11, 10, &f, 3).unwrap(), 7, 5, 3).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 10);
        run(&c.spec, &c.plan, 4);

        assert!(matches!(plan_split(&make_systematic_mds(6, 5, &f, 3).unwrap(), 13, 12, 3), Err(Error::Regime(_))));
    }

    #[test]
    fn merge_examples() {
        let f = Field::gf256();
        let c = plan_merge(&make_systematic_mds(7, 5, &f, 3).unwrap(), 12, 10, 3).unwrap();
        assert_eq!(access_cost(&c.plan), merge_bound(&c.spec.params).unwrap());
        assert_eq!(access_cost(&c.plan), AccessCost::new(4, 2));
        assert_eq!(classify(&c.spec, &c.plan).unwrap().unchanged, 10);
        assert!(crate::oracle::verify_mds_exhaustive(&c.spec.final_code).unwrap());
        run(&c.spec, &c.plan, 5);

        let c = plan_merge(&make_systematic_mds(6, 5, &f, 3).unwrap(), 12, 10, 3).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 10);
        run(&c.spec, &c.plan, 6);
    }

    #[test]
    fn zero_message_stays_zero() {
        let s = spec(13, 10, 6, 5);
        let plan = plan_conversion(&s).unwrap();
        let msg = vec![vec![FieldElement::ZERO; 4]; s.message_len()];
        let out = execute(&s, &plan, &s.encode(Side::Initial, &msg).unwrap()).unwrap();
        assert!(out.payloads.stripes.iter().flat_map(|st| st.values()).all(|v| v.iter().all(|e| e.is_zero())));
    }

    #[test]
    fn generalized_split_examples() {
        let f = Field::gf256();
        let initial = make_systematic_mds(7, 5, &f, 9).unwrap();
        let c = plan_generalized_split(&initial, &[2, 2, 1], 3).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 4);
        assert_eq!(classify(&c.spec, &c.plan).unwrap().unchanged, 5);
        run(&c.spec, &c.plan, 7);

        let c = plan_generalized_split(&initial, &[5], 7).unwrap();
        assert_eq!(access_cost(&c.plan), AccessCost::new(0, 0));

        // r_i = 2 < r_f = 3
        let c = plan_generalized_split(&initial, &[3, 2], 6).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 5);
        run(&c.spec, &c.plan, 8);

        assert!(plan_generalized_split(&initial, &[2, 2], 3).is_err());
    }

    #[test]
    fn generalized_merge_examples() {
        let f = Field::gf256();
        let c = plan_generalized_merge(&[5, 2], 6, 8, &f, 1).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 2);
        run(&c.spec, &c.plan, 9);

        let g = plan_generalized_merge(&[5, 5], 7, 12, &f, 3).unwrap();
        let m = plan_merge(&make_systematic_mds(7, 5, &f, 3).unwrap(), 12, 10, 3).unwrap();
        assert_eq!(g, m);

        let c = plan_generalized_merge(&[4], 7, 7, &f, 3).unwrap();
        assert_eq!(access_cost(&c.plan), AccessCost::new(0, 0));

        let c = plan_generalized_merge(&[5, 2], 6, 9, &f, 1).unwrap();
        assert_eq!(access_cost(&c.plan).reads, 7);
        run(&c.spec, &c.plan, 10);
    }

    #[test]
    fn degenerate_keeps_nodes() {
        let s = spec(8, 5, 8, 5);
        let (tree, plan) = plan_general(&s, PartitionPolicy::Optimal).unwrap();
        assert_eq!(tree.case, GeneralCase::Degenerate);
        assert_eq!(access_cost(&plan), AccessCost::new(0, 0));

        let s = spec(8, 5, 7, 5);
        let plan = plan_conversion(&s).unwrap();
        assert_eq!(access_cost(&plan), AccessCost::new(0, 0));
        run(&s, &plan, 11);
    }

    #[test]
    fn trivial_regime_reads_everything() {
        let s = spec(6, 5, 14, 12);
        let (tree, plan) = plan_general(&s, PartitionPolicy::Optimal).unwrap();
        assert_eq!(tree.case, GeneralCase::Default);
        assert_eq!(access_cost(&plan), general_bound(&s.params).unwrap());
        run(&s, &plan, 12);
    }

    #[test]
    fn arbitrary_partitions_need_opt_in() {
        let s = spec(6, 5, 13, 12);
        let mut other = s.clone();
        other.partitions = PartitionPair::contiguous(&s.params);
        assert!(matches!(plan_general(&other, PartitionPolicy::Optimal), Err(Error::PartitionMismatch(_))));
        let (_, plan) = plan_general(&other, PartitionPolicy::Arbitrary).unwrap();
        assert!(access_cost(&plan).total >= general_bound(&s.params).unwrap().total);
        check_encoding_vectors(&other, &plan).unwrap();
        run(&other, &plan, 13);
    }

    #[test]
    fn corrupted_parity_is_detected() {
        // Optimal plans never read a full stripe plus a parity, so widen a
        // default plan's read set by one parity node.
        let s = spec(13, 12, 6, 5);
        let mut plan = crate::framework::default_plan(&s, crate::framework::DefaultMode::Rebuild);
        let extra = NodeRef::new(2, 12);
        let at = plan.read_set.partition_point(|r| *r < extra);
        plan.read_set.insert(at, extra);
        for n in &mut plan.new_nodes {
            n.coeffs.insert(at, FieldElement::ZERO);
        }
        let msg = message(s.message_len(), 2, 14);
        let mut input = s.encode(Side::Initial, &msg).unwrap();
        assert!(execute(&s, &plan, &input).is_ok());
        input.stripes[2].get_mut(&12).unwrap()[0].0 ^= 1;
        assert_eq!(execute(&s, &plan, &input).unwrap_err(), Error::Corruption { stripe: 2, node: 12 });
    }

    #[test]
    fn field_widens_when_small_field_fails() {
        // 16 pairwise independent rows of length 2 do not exist over GF(16).
        let f = Field::new(crate::galois::FieldSpec::with_bits(4).unwrap()).unwrap();
        let p = ConversionParams::new(6, 4, 18, 16).unwrap();
        let s = build_spec(&p, &f, 1).unwrap();
        assert_eq!(s.field().bits(), 16);
        let plan = plan_conversion(&s).unwrap();
        assert_eq!(access_cost(&plan), general_bound(&p).unwrap());
    }
}
