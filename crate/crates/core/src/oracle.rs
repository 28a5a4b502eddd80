//! Brute-force checks that do not trust the planners: direct re-encoding,
//! erasure decoding from every coordinate subset, access audits against the
//! bounds, and exhaustive search over intersection matrices.

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::{gen_merge_bound, gen_split_bound, optimal_partitions, regime_bound, IntersectionMatrix};
use crate::codes::MdsCode;
use crate::conversions::execute;
use crate::error::{Error, Result};
use crate::framework::{
    access_cost, default_plan, AccessCost, AccessReport, ConversionParams, ConversionPlan, ConvertibleCodeSpec,
    DefaultMode, Side,
};
use crate::galois::FieldElement;

/// Upper limit on `C(n, k)` for [`verify_mds_exhaustive`].
pub const DECODE_SUBSET_BUDGET: u64 = 1_000_000;

/// Largest message length [`brute_force_partition_objective`] accepts.
pub const BRUTE_FORCE_MAX_M: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub trial: usize,
    pub stripe: usize,
    pub node: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreservationReport {
    pub passed: bool,
    pub trials: usize,
    pub mismatch: Option<Mismatch>,
    pub error: Option<String>,
    pub warning: Option<String>,
}

/// Runs `trials` random messages through [`execute`] and compares each output
/// node with the direct final encoding.
pub fn verify_preservation(
    spec: &ConvertibleCodeSpec,
    plan: &ConversionPlan,
    trials: usize,
    seed: u64,
) -> PreservationReport {
    let mut report = PreservationReport { passed: true, trials, mismatch: None, error: None, warning: None };
    if trials == 0 {
        report.warning = Some("no trials run; pass is vacuous".into());
        return report;
    }
    let q = spec.field().order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let message: Vec<Vec<FieldElement>> =
            (0..spec.message_len()).map(|_| vec![FieldElement(rng.gen_range(0..q) as u16)]).collect();
        let outcome = spec
            .encode(Side::Initial, &message)
            .and_then(|input| execute(spec, plan, &input))
            .and_then(|out| Ok((out, spec.encode(Side::Final, &message)?)));
        let (out, expect) = match outcome {
            Ok(v) => v,
            Err(e) => {
                report.passed = false;
                report.error = Some(e.to_string());
                return report;
            }
        };
        for (stripe, nodes) in expect.stripes.iter().enumerate() {
            for (&node, payload) in nodes {
                if out.payloads.stripes.get(stripe).and_then(|s| s.get(&node)) != Some(payload) {
                    report.passed = false;
                    report.mismatch = Some(Mismatch { trial, stripe, node });
                    return report;
                }
            }
        }
    }
    report
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

/// Encodes a random message and decodes it from every `k`-subset of
/// coordinates. Passes iff every decode succeeds and returns the message.
pub fn verify_mds_exhaustive(code: &MdsCode) -> Result<bool> {
    let (n, k) = (code.n(), code.k());
    let subsets = binomial(n, k);
    if subsets > DECODE_SUBSET_BUDGET {
        return Err(Error::Budget(format!("C({n}, {k}) = {subsets} subsets exceeds {DECODE_SUBSET_BUDGET}")));
    }
    let q = code.field().order();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64 * 1_000 + k as u64);
    let message: Vec<FieldElement> = (0..k).map(|_| FieldElement(rng.gen_range(0..q) as u16)).collect();
    let word = code.encode(&message)?;
    for subset in (0..n).combinations(k) {
        let available: Vec<(usize, FieldElement)> = subset.iter().map(|&c| (c, word[c])).collect();
        match code.decode(&available) {
            Ok(m) if m == message => {}
            _ => return Ok(false),
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    AccessOptimal,
    AboveBound,
    /// Cost below a proven lower bound: the plan or the bound is wrong.
    BelowBound,
    /// No lower bound is known for these parameters.
    UnboundedRegime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    #[serde(flatten)]
    pub access: AccessReport,
    pub verdict: Verdict,
}

/// The bound that applies to `spec`, recognising generalized specs from
/// stripes that hold fewer symbols than the code dimension.
pub fn spec_bound(spec: &ConvertibleCodeSpec) -> Option<AccessCost> {
    let p = &spec.params;
    let initial = &spec.partitions.initial_sets;
    let finals = &spec.partitions.final_sets;
    let standard = initial.iter().all(|s| s.len() == p.k_i) && finals.iter().all(|s| s.len() == p.k_f);
    if standard {
        return regime_bound(p);
    }
    let single_unchanged = initial.len() == 1 && finals.len() == 1 && p.r_i() >= p.r_f();
    if single_unchanged {
        return Some(AccessCost::new(0, 0));
    }
    if initial.len() == 1 {
        let sizes: Vec<usize> = finals.iter().map(Vec::len).collect();
        let reads = gen_split_bound(initial[0].len(), &sizes, p.r_f()).ok()?;
        return Some(AccessCost::new(reads, finals.len() * p.r_f()));
    }
    if finals.len() == 1 {
        let sizes: Vec<usize> = initial.iter().map(Vec::len).collect();
        let reads = gen_merge_bound(&sizes, p.r_i(), p.r_f()).iter().sum();
        return Some(AccessCost::new(reads, p.r_f()));
    }
    None
}

/// Audited cost of `plan` against the matching bound and the default
/// approach.
pub fn audit_access(spec: &ConvertibleCodeSpec, plan: &ConversionPlan) -> AuditReport {
    let cost = access_cost(plan);
    let bound = spec_bound(spec);
    let default = access_cost(&default_plan(spec, DefaultMode::ReuseSystematic));
    let savings = if default.reads == 0 { 0.0 } else { 1.0 - cost.reads as f64 / default.reads as f64 };
    let verdict = match bound {
        None => Verdict::UnboundedRegime,
        Some(b) if cost.total == b.total && cost.reads >= b.reads => Verdict::AccessOptimal,
        Some(b) if cost.total < b.total || cost.reads < b.reads => Verdict::BelowBound,
        Some(_) => Verdict::AboveBound,
    };
    AuditReport {
        access: AccessReport {
            reads: cost.reads,
            writes: cost.writes,
            total: cost.total,
            bound,
            default_total: default.total,
            savings,
        },
        verdict,
    }
}

/// Maximum of `Σ_i max{M*_i − r_f, 0}` over every intersection matrix with row
/// sums `k_i` and column sums `k_f`, with a witness.
pub fn brute_force_partition_objective(p: &ConversionParams) -> Result<(usize, IntersectionMatrix)> {
    if p.k_i == p.k_f {
        return Err(Error::Regime("k_i = k_f has no partition choice".into()));
    }
    let m = p.message_len();
    if m > BRUTE_FORCE_MAX_M {
        return Err(Error::Budget(format!("M = {m} exceeds {BRUTE_FORCE_MAX_M}")));
    }
    let rows = p.initial_stripes();
    let cols = p.final_stripes();
    let mut search = Search {
        rows,
        cols,
        k_f: p.k_f,
        r_f: p.r_f(),
        matrix: vec![vec![0; cols]; rows],
        remaining: vec![p.k_i; rows],
        best: None,
    };
    search.column(0);
    let (s, entries) = search.best.expect("a transport matrix always exists");
    Ok((s, IntersectionMatrix { entries }))
}

struct Search {
    rows: usize,
    cols: usize,
    k_f: usize,
    r_f: usize,
    matrix: Vec<Vec<usize>>,
    remaining: Vec<usize>,
    best: Option<(usize, Vec<Vec<usize>>)>,
}

impl Search {
    fn column(&mut self, j: usize) {
        if j == self.cols {
            if self.remaining.iter().all(|&r| r == 0) {
                let s = IntersectionMatrix { entries: self.matrix.clone() }.objective(self.r_f);
                if self.best.as_ref().is_none_or(|(b, _)| s > *b) {
                    self.best = Some((s, self.matrix.clone()));
                }
            }
            return;
        }
        let capacity_after: usize = (self.cols - j - 1) * self.k_f;
        self.fill(j, 0, self.k_f, capacity_after);
    }

    fn fill(&mut self, j: usize, i: usize, left: usize, capacity_after: usize) {
        if i == self.rows {
            if left == 0 {
                self.column(j + 1);
            }
            return;
        }
        let rest_capacity: usize = self.remaining[i + 1..].iter().sum();
        let lo = left.saturating_sub(rest_capacity);
        let hi = left.min(self.remaining[i]);
        for v in lo..=hi {
            // Later columns must be able to absorb what this row still needs.
            if self.remaining[i] - v > capacity_after {
                continue;
            }
            self.matrix[i][j] = v;
            self.remaining[i] -= v;
            self.fill(j, i + 1, left - v, capacity_after);
            self.remaining[i] += v;
        }
        self.matrix[i][j] = 0;
    }
}

/// Objective value of the partitions returned by [`optimal_partitions`].
pub fn optimizer_objective(p: &ConversionParams) -> Result<usize> {
    Ok(optimal_partitions(p)?.1.objective(p.r_f()))
}
