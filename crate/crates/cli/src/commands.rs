use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use convertible_codes::framework::lcm;
use convertible_codes::oracle::audit_access;
use convertible_codes::{
    build_spec, build_spec_for_initial, compute_new_nodes, default_plan, make_systematic_mds, optimal_partitions,
    plan_general, AccessCost, ConversionParams, ConversionPlan, ConvertibleCodeSpec, DefaultMode, Error as CodeError,
    Field, FieldElement, FieldSpec, GeneralPlanTree, PartitionPair, PartitionPolicy, Regime, StripePayloads, Verdict,
};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::store::{node_path, symbol_bytes, symbols_from_bytes, write_node, Manifest, NodeStore, FORMAT_VERSION};

/// Upper bound on the default chunk length, in symbols.
pub const DEFAULT_MAX_CHUNK: usize = 4096;

fn field_for_bits(bits: u32) -> Result<Field> {
    match bits {
        8 => Ok(Field::gf256()),
        16 => Ok(Field::gf65536()),
        _ => Err(CliError::Parameter(format!("field bits must be 8 or 16, got {bits}")).into()),
    }
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    if dir.exists() && fs::read_dir(dir)?.next().is_some() {
        return Err(CliError::Parameter(format!("output directory {} is not empty", dir.display())).into());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    pub n: usize,
    pub k: usize,
    pub field_bits: u32,
    pub seed: u64,
    /// Symbols per node; defaults to an even split capped at
    /// [`DEFAULT_MAX_CHUNK`].
    pub chunk_size: Option<usize>,
}

pub fn encode(input: &Path, out: &Path, opts: &EncodeOptions) -> Result<Manifest> {
    let field = field_for_bits(opts.field_bits)?;
    let code = make_systematic_mds(opts.n, opts.k, &field, opts.seed)?;
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let width = symbol_bytes(&field.spec());
    let symbols = symbols_from_bytes(&bytes, width);
    let chunk_len = match opts.chunk_size {
        Some(0) => return Err(CliError::Parameter("chunk size must be positive".into()).into()),
        Some(c) => c,
        None => symbols.len().div_ceil(opts.k).clamp(1, DEFAULT_MAX_CHUNK),
    };
    let chunks = symbols.len().div_ceil(chunk_len);
    let stripes = chunks.div_ceil(opts.k);
    prepare_out_dir(out)?;

    for s in 0..stripes {
        let message: Vec<Vec<FieldElement>> = (0..opts.k)
            .map(|p| {
                let start = ((s * opts.k + p) * chunk_len).min(symbols.len());
                let end = (start + chunk_len).min(symbols.len());
                let mut chunk = symbols[start..end].to_vec();
                chunk.resize(chunk_len, FieldElement::ZERO);
                chunk
            })
            .collect();
        for (node, payload) in code.encode_payloads(&message)?.iter().enumerate() {
            write_node(out, s, node, payload, width)?;
        }
    }
    let manifest = Manifest {
        version: FORMAT_VERSION,
        field: field.spec(),
        n: opts.n,
        k: opts.k,
        stripes,
        payload_len: bytes.len() as u64,
        seed: opts.seed,
        chunk_len,
        parity: code.parity().to_rows(),
        order: vec![],
        padding_stripes: 0,
    };
    manifest.save(out)?;
    Ok(manifest)
}

#[derive(Debug, Clone)]
pub struct ConvertOptions {
    pub n_f: usize,
    pub k_f: usize,
    /// Seed for the final-code search; defaults to the manifest seed.
    pub seed: Option<u64>,
    /// Fall back to the default approach if no final code is found.
    pub allow_default: bool,
}

/// Plan and code description written by `--plan-out`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanDocument {
    pub params: ConversionParams,
    pub field: FieldSpec,
    pub partitions: PartitionPair,
    pub final_parity: Vec<Vec<u16>>,
    pub tree: Option<GeneralPlanTree>,
    pub plan: ConversionPlan,
}

/// Access report of a file conversion. `reads`/`writes`/`total` are per batch
/// of `lcm(k_i, k_f)` message chunks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvertReport {
    pub reads: usize,
    pub writes: usize,
    pub total: usize,
    pub bound: Option<AccessCost>,
    pub default_total: usize,
    pub savings: f64,
    pub verdict: Verdict,
    pub fallback: bool,
    pub batches: usize,
    pub padding_stripes: usize,
    /// `reads × batches`: node reads the plan calls for.
    pub total_reads: usize,
    pub total_writes: usize,
    pub symbols_per_node: usize,
    /// Node files loaded from disk, counted by the I/O layer.
    pub disk_reads: usize,
    pub disk_symbols_read: usize,
    /// Reads of zero padding stripes, served without disk access.
    pub virtual_reads: usize,
    pub unchanged_linked: usize,
}

fn fallback_spec(
    initial: &convertible_codes::MdsCode,
    n_f: usize,
    k_f: usize,
    seed: u64,
) -> Result<ConvertibleCodeSpec> {
    let params = ConversionParams::new(initial.n(), initial.k(), n_f, k_f)?;
    let final_code = make_systematic_mds(n_f, k_f, initial.field(), seed.wrapping_add(1))?;
    let partitions = match params.regime() {
        Regime::Degenerate => PartitionPair::contiguous(&params),
        _ => optimal_partitions(&params)?.0,
    };
    Ok(ConvertibleCodeSpec::new(params, partitions, initial.clone(), final_code)?)
}

/// Plans a conversion of `initial` to `[n_f, k_f]`. Returns the spec, plan,
/// tree and whether the default approach was forced.
fn plan_for(
    initial: &convertible_codes::MdsCode,
    n_f: usize,
    k_f: usize,
    seed: u64,
    allow_default: bool,
) -> Result<(ConvertibleCodeSpec, ConversionPlan, Option<GeneralPlanTree>, bool)> {
    match build_spec_for_initial(initial, n_f, k_f, seed) {
        Ok(spec) => {
            let (tree, plan) = plan_general(&spec, PartitionPolicy::Optimal)?;
            Ok((spec, plan, Some(tree), false))
        }
        Err(e @ (CodeError::SearchExhausted(_) | CodeError::Budget(_))) => {
            if !allow_default {
                return Err(CliError::Construction(format!(
                    "{e}; rerun with --allow-default to convert by re-encoding"
                ))
                .into());
            }
            let spec = fallback_spec(initial, n_f, k_f, seed)?;
            let plan = default_plan(&spec, DefaultMode::ReuseSystematic);
            Ok((spec, plan, None, true))
        }
        Err(e) => Err(e.into()),
    }
}

pub struct ConvertOutcome {
    pub manifest: Manifest,
    pub report: ConvertReport,
    pub plan: PlanDocument,
}

fn link_or_copy(from: &Path, to: &Path) -> Result<()> {
    if fs::hard_link(from, to).is_err() {
        fs::copy(from, to).with_context(|| format!("copying {} to {}", from.display(), to.display()))?;
    }
    Ok(())
}

pub fn convert(src: &Path, out: &Path, opts: &ConvertOptions) -> Result<ConvertOutcome> {
    let store = NodeStore::open(src)?;
    let m = store.manifest().clone();
    let initial = m.code()?;
    let seed = opts.seed.unwrap_or(m.seed);
    let (spec, plan, tree, fallback) = plan_for(&initial, opts.n_f, opts.k_f, seed, opts.allow_default)?;
    let params = spec.params;
    let (si, sf) = (params.initial_stripes(), params.final_stripes());
    let batches = m.stripes.div_ceil(si);
    let padding = batches * si - m.stripes;
    let store = store.with_padding(padding);
    prepare_out_dir(out)?;

    let width = m.symbol_bytes();
    let mut linked = 0;
    for b in 0..batches {
        let mut stripes: Vec<BTreeMap<usize, Vec<FieldElement>>> = vec![BTreeMap::new(); si];
        for r in &plan.read_set {
            stripes[r.stripe].insert(r.node, store.read(b * si + r.stripe, r.node)?);
        }
        let reads = StripePayloads { chunk_len: m.chunk_len, stripes };
        let new = compute_new_nodes(&spec, &plan, &reads).map_err(|e| match e {
            CodeError::Corruption { stripe, node } => anyhow::Error::new(CliError::Corrupt {
                stripe: b * si + stripe,
                node,
                reason: "parity does not match systematic nodes".into(),
            }),
            other => other.into(),
        })?;
        for (at, payload) in new {
            write_node(out, b * sf + at.stripe, at.node, &payload, width)?;
        }
        for u in &plan.unchanged {
            let from_stripe = b * si + u.from.stripe;
            let (to_stripe, node) = (b * sf + u.to.stripe, u.to.node);
            if store.is_virtual(from_stripe) {
                write_node(out, to_stripe, node, &vec![FieldElement::ZERO; m.chunk_len], width)?;
            } else {
                link_or_copy(&node_path(src, from_stripe, u.from.node), &node_path(out, to_stripe, node))?;
                linked += 1;
            }
        }
    }

    // Final slot j·k_f + c of a batch holds batch message index F_j[c], which
    // sat in initial slot F_j[c] of the same batch.
    let msg = params.message_len();
    let period = lcm(msg, m.order.len().max(1));
    let order = if m.order.is_empty() && spec.partitions.final_sets.iter().flatten().copied().eq(0..msg) {
        vec![]
    } else {
        (0..period)
            .map(|t| {
                let (block, within) = (t / msg, t % msg);
                let x = spec.partitions.final_sets[within / params.k_f][within % params.k_f];
                m.logical(block * msg + x)
            })
            .collect()
    };

    let manifest = Manifest {
        version: FORMAT_VERSION,
        field: m.field,
        n: params.n_f,
        k: params.k_f,
        stripes: batches * sf,
        payload_len: m.payload_len,
        seed,
        chunk_len: m.chunk_len,
        parity: spec.final_code.parity().to_rows(),
        order,
        padding_stripes: padding,
    };
    manifest.save(out)?;

    let audit = audit_access(&spec, &plan);
    let stats = store.stats();
    let a = audit.access;
    let report = ConvertReport {
        reads: a.reads,
        writes: a.writes,
        total: a.total,
        bound: a.bound,
        default_total: a.default_total,
        savings: a.savings,
        verdict: audit.verdict,
        fallback,
        batches,
        padding_stripes: padding,
        total_reads: a.reads * batches,
        total_writes: a.writes * batches,
        symbols_per_node: m.chunk_len,
        disk_reads: stats.disk_nodes,
        disk_symbols_read: stats.disk_symbols,
        virtual_reads: stats.virtual_nodes,
        unchanged_linked: linked,
    };
    let plan = PlanDocument {
        params,
        field: m.field,
        partitions: spec.partitions.clone(),
        final_parity: spec.final_code.parity().to_rows(),
        tree,
        plan,
    };
    Ok(ConvertOutcome { manifest, report, plan })
}

/// Reassembles the original bytes, decoding around missing node files.
pub fn decode(dir: &Path, out: &Path) -> Result<u64> {
    let store = NodeStore::open(dir)?;
    let m = store.manifest().clone();
    let code = m.code()?;
    let data_chunks = m.data_chunks();
    let mut symbols = vec![FieldElement::ZERO; data_chunks * m.chunk_len];
    for s in 0..m.stripes {
        let mut available = Vec::new();
        for node in 0..m.n {
            if available.len() == m.k {
                break;
            }
            if let Some(p) = store.try_read(s, node)? {
                available.push((node, p));
            }
        }
        if available.len() < m.k {
            return Err(CliError::Verification(format!("stripe {s} has fewer than {} readable nodes", m.k)).into());
        }
        let data = if available.iter().enumerate().all(|(i, (node, _))| i == *node) {
            available.into_iter().map(|(_, p)| p).collect()
        } else {
            code.decode_payloads(&available)?
        };
        for (c, chunk) in data.into_iter().enumerate() {
            let logical = m.logical(s * m.k + c);
            if logical < data_chunks {
                symbols[logical * m.chunk_len..(logical + 1) * m.chunk_len].copy_from_slice(&chunk);
            }
        }
    }
    let mut bytes = crate::store::bytes_from_symbols(&symbols, m.symbol_bytes());
    bytes.truncate(m.payload_len as usize);
    fs::write(out, &bytes).with_context(|| format!("writing {}", out.display()))?;
    Ok(bytes.len() as u64)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub stripes: usize,
    pub nodes: usize,
}

/// Finds the one node whose removal makes the rest of the stripe a codeword.
fn locate(code: &convertible_codes::MdsCode, nodes: &[Vec<FieldElement>]) -> Result<Option<usize>> {
    let n = nodes.len();
    let mut suspects = Vec::new();
    for bad in 0..n {
        let rest: Vec<(usize, Vec<FieldElement>)> =
            (0..n).filter(|&c| c != bad).take(code.k()).map(|c| (c, nodes[c].clone())).collect();
        let Ok(data) = code.decode_payloads(&rest) else { continue };
        let word = code.encode_payloads(&data)?;
        if (0..n).filter(|&c| c != bad).all(|c| word[c] == nodes[c]) {
            suspects.push(bad);
        }
    }
    Ok(if suspects.len() == 1 { Some(suspects[0]) } else { None })
}

/// Recomputes every parity from the systematic nodes and checks the stored
/// code is MDS.
pub fn verify(dir: &Path) -> Result<VerifyReport> {
    let store = NodeStore::open(dir)?;
    let m = store.manifest().clone();
    let code = m.code()?;
    if !code.is_mds()? {
        return Err(CliError::Verification("manifest parity block is not MDS".into()).into());
    }
    for s in 0..m.stripes {
        let nodes: Vec<Vec<FieldElement>> = (0..m.n).map(|node| store.read(s, node)).collect::<Result<_>>()?;
        let word = code.encode_payloads(&nodes[..m.k])?;
        if word == nodes {
            continue;
        }
        return Err(match locate(&code, &nodes)? {
            Some(node) => CliError::Corrupt { stripe: s, node, reason: "inconsistent with the other nodes".into() },
            None => {
                let node = (m.k..m.n).find(|&c| word[c] != nodes[c]).unwrap_or(m.k);
                CliError::Corrupt { stripe: s, node, reason: "parity mismatch; faulty node not identifiable".into() }
            }
        }
        .into());
    }
    Ok(VerifyReport { stripes: m.stripes, nodes: m.stripes * m.n })
}

/// Plans a conversion between fresh codes without touching files.
pub fn plan_only(
    params: &ConversionParams,
    field_bits: u32,
    seed: u64,
) -> Result<(PlanDocument, convertible_codes::AuditReport)> {
    let field = field_for_bits(field_bits)?;
    let spec = build_spec(params, &field, seed)?;
    let (tree, plan) = plan_general(&spec, PartitionPolicy::Optimal)?;
    let audit = audit_access(&spec, &plan);
    let doc = PlanDocument {
        params: *params,
        field: spec.field().spec(),
        partitions: spec.partitions.clone(),
        final_parity: spec.final_code.parity().to_rows(),
        tree: Some(tree),
        plan,
    };
    Ok((doc, audit))
}
