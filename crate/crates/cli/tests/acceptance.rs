//! Acceptance checks. Prints one line per criterion and exits non-zero if any
//! of them fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use convertible_cli::{ConvertReport, Manifest};
use convertible_codes::bounds::{general_bound, merge_bound, split_bound};
use convertible_codes::framework::lcm;
use convertible_codes::oracle::{brute_force_partition_objective, optimizer_objective};
use convertible_codes::{
    access_cost, audit_access, build_spec, classify, default_plan, make_systematic_mds, plan_general, plan_merge,
    plan_split, verify_mds_exhaustive, verify_preservation, ConversionParams, DefaultMode, Field, PartitionPolicy,
    Verdict,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 11;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn grid() -> Vec<ConversionParams> {
    let mut out = Vec::new();
    for k_i in 1..=8 {
        for k_f in (1..=8).filter(|&k| k != k_i && lcm(k_i, k) <= 48) {
            for r_i in 1..=4 {
                for r_f in 1..=4 {
                    out.push(ConversionParams::new(k_i + r_i, k_i, k_f + r_f, k_f).unwrap());
                }
            }
        }
    }
    out
}

fn reference_conversion(n_i: usize, k_i: usize, n_f: usize, k_f: usize, reads: usize, savings: f64) -> Outcome {
    let start = Instant::now();
    let p = ConversionParams::new(n_i, k_i, n_f, k_f).map_err(|e| e.to_string())?;
    let spec = build_spec(&p, &Field::gf256(), SEED).map_err(|e| e.to_string())?;
    let (_, plan) = plan_general(&spec, PartitionPolicy::Optimal).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let cost = access_cost(&plan);
    let default = access_cost(&default_plan(&spec, DefaultMode::ReuseSystematic));
    let got = 1.0 - cost.reads as f64 / default.reads as f64;
    check!(p.message_len() == 60, "M = {}", p.message_len());
    check!(cost.reads == reads, "reads {} != {reads}", cost.reads);
    check!(default.reads == 60, "default reads {} != 60", default.reads);
    check!((got - savings).abs() < 1e-3, "savings {got:.4} != {savings}");
    check!(verify_preservation(&spec, &plan, 20, SEED).passed, "conversion output differs from direct encoding");
    check!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("reads {} vs default {}, savings {:.1}%, {elapsed:.2?}", cost.reads, default.reads, got * 100.0))
}

fn bound_sweep() -> Outcome {
    let start = Instant::now();
    let (mut bounded, mut unbounded) = (0, 0);
    for p in grid() {
        let spec = build_spec(&p, &Field::gf256(), SEED).map_err(|e| format!("{p:?}: {e}"))?;
        let (_, plan) = plan_general(&spec, PartitionPolicy::Optimal).map_err(|e| format!("{p:?}: {e}"))?;
        let cost = access_cost(&plan);
        if p.r_i() >= p.r_f() {
            let bound = general_bound(&p).map_err(|e| e.to_string())?;
            check!(cost == bound, "{p:?}: cost {cost:?} != bound {bound:?}");
            check!(audit_access(&spec, &plan).verdict == Verdict::AccessOptimal, "{p:?}: audit disagrees");
            bounded += 1;
        } else {
            check!(cost.reads == p.message_len(), "{p:?}: reads {} != M", cost.reads);
            unbounded += 1;
        }
    }
    Ok(format!("{bounded} tuples at the bound, {unbounded} reading M, {:.1?}", start.elapsed()))
}

fn correctness_sweep() -> Outcome {
    let tuples = grid();
    for (i, p) in tuples.iter().enumerate() {
        let spec = build_spec(p, &Field::gf256(), SEED).map_err(|e| e.to_string())?;
        let (_, plan) = plan_general(&spec, PartitionPolicy::Optimal).map_err(|e| e.to_string())?;
        let report = verify_preservation(&spec, &plan, 100, SEED + i as u64);
        check!(report.passed && report.trials == 100, "{p:?}: {report:?}");
    }
    Ok(format!("{} tuples x 100 messages bit-identical", tuples.len()))
}

fn mds_sweep() -> Outcome {
    let mut checked = 0;
    for p in grid() {
        let spec = build_spec(&p, &Field::gf256(), SEED).map_err(|e| e.to_string())?;
        for code in [&spec.initial_code, &spec.final_code] {
            if code.n() <= 12 {
                check!(
                    verify_mds_exhaustive(code).map_err(|e| e.to_string())?,
                    "{p:?}: [{}, {}] not MDS",
                    code.n(),
                    code.k()
                );
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} codes pass every k-subset decode"))
}

fn optimizer_oracle() -> Outcome {
    let mut checked = 0;
    for p in grid().into_iter().filter(|p| p.message_len() <= 12) {
        let (best, _) = brute_force_partition_objective(&p).map_err(|e| e.to_string())?;
        let got = optimizer_objective(&p).map_err(|e| e.to_string())?;
        check!(got == best, "{p:?}: optimizer {got} vs exhaustive {best}");
        checked += 1;
    }
    Ok(format!("{checked} tuples agree with exhaustive search"))
}

fn stability() -> Outcome {
    let field = Field::gf256();
    let (mut splits, mut merges) = (0, 0);
    for p in grid().into_iter().filter(|p| p.r_i() >= p.r_f()) {
        let initial = make_systematic_mds(p.n_i, p.k_i, &field, SEED).map_err(|e| e.to_string())?;
        if p.k_i % p.k_f == 0 {
            let c = plan_split(&initial, p.n_f, p.k_f, SEED).map_err(|e| e.to_string())?;
            let t = classify(&c.spec, &c.plan).map_err(|e| e.to_string())?;
            check!(
                t.unchanged_per_final_stripe.iter().all(|&u| u == p.k_f),
                "{p:?}: unchanged per final stripe {:?}",
                t.unchanged_per_final_stripe
            );
            splits += 1;
        }
        if p.k_f % p.k_i == 0 {
            let c = plan_merge(&initial, p.n_f, p.k_f, SEED).map_err(|e| e.to_string())?;
            let t = classify(&c.spec, &c.plan).map_err(|e| e.to_string())?;
            let systematic = p.initial_stripes() * p.k_i;
            check!(t.unchanged == systematic, "{p:?}: {} unchanged of {systematic}", t.unchanged);
            merges += 1;
        }
    }
    Ok(format!("{splits} split and {merges} merge tuples fully stable"))
}

fn specialization() -> Outcome {
    let field = Field::gf256();
    let mut checked = 0;
    for p in grid().into_iter().filter(|p| p.k_i % p.k_f == 0 || p.k_f % p.k_i == 0) {
        let initial = make_systematic_mds(p.n_i, p.k_i, &field, SEED).map_err(|e| e.to_string())?;
        let spec = build_spec(&p, &field, SEED).map_err(|e| e.to_string())?;
        let (_, general) = plan_general(&spec, PartitionPolicy::Optimal).map_err(|e| e.to_string())?;
        let c = if p.k_i % p.k_f == 0 {
            plan_split(&initial, p.n_f, p.k_f, SEED)
        } else {
            plan_merge(&initial, p.n_f, p.k_f, SEED)
        }
        .map_err(|e| e.to_string())?;
        check!(access_cost(&c.plan) == access_cost(&general), "{p:?}: specialized and general costs differ");
        if p.r_i() >= p.r_f() {
            let regime = if p.k_i % p.k_f == 0 { split_bound(&p) } else { merge_bound(&p) };
            check!(Ok(access_cost(&general)) == regime.map_err(|e| e.to_string()), "{p:?}: regime bound differs");
        }
        checked += 1;
    }
    Ok(format!("{checked} split/merge tuples match"))
}

fn ccodes(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ccodes")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn cli_round_trips() -> Outcome {
    const SHAPES: &[(usize, usize, usize, usize, u32)] = &[
        (6, 5, 13, 12, 8),
        (13, 12, 6, 5, 8),
        (7, 4, 10, 8, 8),
        (10, 8, 7, 4, 8),
        (9, 6, 6, 4, 8),
        (7, 5, 9, 7, 8),
        (8, 3, 10, 8, 8),
        (5, 3, 12, 8, 8),
        (12, 10, 9, 6, 8),
        (6, 5, 13, 12, 16),
        (8, 6, 7, 4, 16),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (mut disk, mut bytes_total) = (0, 0);
    for i in 0..20 {
        let &(n_i, k_i, n_f, k_f, w) = &SHAPES[i % SHAPES.len()];
        let len = if i == 0 { 1 << 20 } else { rng.gen_range(0..=1usize << 20) };
        let data: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
        let root = dir.path().join(format!("f{i}"));
        fs::create_dir(&root).map_err(|e| e.to_string())?;
        let (input, enc, conv, back, report) =
            (root.join("in"), root.join("enc"), root.join("conv"), root.join("back"), root.join("report.json"));
        fs::write(&input, &data).map_err(|e| e.to_string())?;
        let (n, k, w) = (n_i.to_string(), k_i.to_string(), w.to_string());
        let mut args = vec!["encode", p(&input), "--n", &n, "--k", &k, "--field-bits", &w, "--out", p(&enc)];
        let chunk = rng.gen_range(1..=3000).to_string();
        if i % 3 == 1 {
            args.extend(["--chunk-size", &chunk]);
        }
        ccodes(&args)?;
        let (nf, kf) = (n_f.to_string(), k_f.to_string());
        ccodes(&["convert", p(&enc), "--nf", &nf, "--kf", &kf, "--out", p(&conv), "--report-out", p(&report)])?;
        ccodes(&["decode", p(&conv), "--out", p(&back)])?;
        let decoded = fs::read(&back).map_err(|e| e.to_string())?;
        check!(decoded == data, "file {i} ({len} bytes, [{n_i},{k_i}]->[{n_f},{k_f}] w={w}) decoded differently");

        let r: ConvertReport = serde_json::from_str(&fs::read_to_string(&report).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let m = Manifest::load(&conv).map_err(|e| e.to_string())?;
        check!(
            r.total_reads == r.reads * r.batches,
            "file {i}: total_reads {} != {} x {}",
            r.total_reads,
            r.reads,
            r.batches
        );
        check!(
            r.disk_reads + r.virtual_reads == r.total_reads,
            "file {i}: disk {} + virtual {} != planned {}",
            r.disk_reads,
            r.virtual_reads,
            r.total_reads
        );
        check!(
            r.disk_symbols_read == r.disk_reads * r.symbols_per_node,
            "file {i}: {} symbols for {} nodes",
            r.disk_symbols_read,
            r.disk_reads
        );
        check!((m.n, m.k) == (n_f, k_f), "file {i}: manifest holds [{}, {}]", m.n, m.k);
        disk += r.disk_reads;
        bytes_total += len;
    }
    Ok(format!("20 files, {bytes_total} bytes byte-exact, {disk} disk node reads match the plans"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("[6,5] -> [13,12]", || reference_conversion(6, 5, 13, 12, 18, 0.7)),
        ("[13,12] -> [6,5]", || reference_conversion(13, 12, 6, 5, 40, 1.0 / 3.0)),
        ("bound sweep", bound_sweep),
        ("correctness sweep", correctness_sweep),
        ("MDS preservation", mds_sweep),
        ("partition optimizer", optimizer_oracle),
        ("stability", stability),
        ("regime specialization", specialization),
        ("CLI round trip", cli_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {}: PASS  {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
