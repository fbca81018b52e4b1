//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::HashSet;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use spm_dse::calibrate::{reproduce, AnchorSet};
use spm_dse::costmodel::{load_cost_table, CostTable};
use spm_dse::dse::{dominates, explore, pareto_front, ExplorationConstraints, PgMode};
use spm_dse::evaluator::{evaluate, EvalSummary};
use spm_dse::memconfig::{
    count_all, enumerate_all, enumerate_hybrid_sizes, sigma, size_pool, size_sep, size_smp, Family, Mem,
    MemoryOrganization, MemorySpec, OrgKind,
};
use spm_dse::report::build_bundle;
use spm_dse::units::{KIB, MIB};
use spm_dse::workload::{derive_offchip, load_workload, OperationProfile, PerStream, WorkloadTrace};

// tolerances
const CELL_TOL: f64 = 0.001;
const COUNT_TOL: f64 = 0.05;
const SIZING_BUDGET_S: f64 = 1.0;
const MINIMALITY_BUDGET_S: f64 = 10.0;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn data(name: &str) -> std::path::PathBuf {
    spm_dse::data_dir().join(name)
}

fn capsnet() -> WorkloadTrace {
    load_workload(data("capsnet.workload.json")).expect("capsnet workload")
}

fn deepcaps() -> WorkloadTrace {
    load_workload(data("deepcaps.workload.json")).expect("deepcaps workload")
}

fn table() -> CostTable {
    load_cost_table(data("cost32nm.json")).expect("shipped cost table")
}

fn random_trace(rng: &mut StdRng, max_usage: u64, routing: bool) -> WorkloadTrace {
    let n = rng.gen_range(2..=20);
    let ops = (0..n)
        .map(|i| {
            let mut u = || rng.gen_range(0..=max_usage);
            let usage = PerStream::new(u(), u(), u());
            let mut a = || rng.gen_range(0..=1_000_000u64);
            OperationProfile {
                name: format!("op{i}"),
                usage,
                reads: PerStream::new(a(), a(), a()),
                writes: PerStream::new(a(), a(), a()),
                cycles: rng.gen_range(1..=100_000),
                routing_phase: routing && rng.gen_bool(0.4),
            }
        })
        .collect();
    WorkloadTrace::new("random", 250e6, ops).unwrap()
}

// Pool rebuilt from its definition, independent of the library.
fn oracle_pool() -> Vec<u64> {
    let mut v: Vec<u64> = (0..=30).map(|k| KIB << k).collect();
    v.extend([25, 108, 450, 460].map(|k| k * KIB));
    v.sort_unstable();
    v
}

fn smallest_feasible(fits: impl Fn(u64) -> bool) -> Option<u64> {
    oracle_pool().into_iter().find(|&v| fits(v))
}

fn c1_sizing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let start = Instant::now();
    let mut bad = 0;
    for _ in 0..200 {
        let t = random_trace(&mut rng, 16 * MIB, false);
        let ops = &t.operations;
        let smp = smallest_feasible(|v| ops.iter().all(|o| o.usage.data + o.usage.weight + o.usage.acc <= v));
        let d = smallest_feasible(|v| ops.iter().all(|o| o.usage.data <= v));
        let w = smallest_feasible(|v| ops.iter().all(|o| o.usage.weight <= v));
        let a = smallest_feasible(|v| ops.iter().all(|o| o.usage.acc <= v));
        if Some(size_smp(&t).unwrap()) != smp || Some(size_sep(&t).unwrap()) != d.zip(w).zip(a).map(|((d, w), a)| (d, w, a)) {
            bad += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(bad == 0 && secs < SIZING_BUDGET_S, format!("200 traces, {bad} mismatches, {secs:.3}s (budget {SIZING_BUDGET_S}s)"))
}

fn shared_fits(t: &WorkloadTrace, s: u64, d: u64, w: u64, a: u64) -> bool {
    t.operations.iter().all(|o| {
        o.usage.data.saturating_sub(d) + o.usage.weight.saturating_sub(w) + o.usage.acc.saturating_sub(a) <= s
    })
}

fn c2_minimality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let start = Instant::now();
    let (mut tuples, mut bad) = (0u64, 0u64);
    let pool = oracle_pool();
    for _ in 0..50 {
        let t = random_trace(&mut rng, 16 * MIB, false);
        for [s, d, w, a] in enumerate_hybrid_sizes(&t).unwrap() {
            tuples += 1;
            let fits = shared_fits(&t, s, d, w, a);
            let smaller = if s == 0 {
                None
            } else {
                // zero shared memory, then every smaller pool value
                std::iter::once(0).chain(pool.iter().copied().take_while(|&v| v < s)).find(|&v| shared_fits(&t, v, d, w, a))
            };
            if !fits || smaller.is_some() {
                bad += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < MINIMALITY_BUDGET_S,
        format!("50 traces, {tuples} tuples, {bad} violations, {secs:.3}s (budget {MINIMALITY_BUDGET_S}s)"),
    )
}

fn c3_sigma_pool() -> Outcome {
    let mut bad = Vec::new();
    for s in 256..=16 * MIB {
        let got = sigma(s).unwrap();
        // closed form: 2^k for k >= 1 with 2^k * 128 <= s
        let k_max = 63 - (s / 128).leading_zeros();
        let ok = got.len() == k_max as usize && got.iter().enumerate().all(|(i, &v)| v == 2u32 << i);
        if !ok {
            bad.push(format!("sigma({s})"));
            break;
        }
    }
    let pool = oracle_pool();
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..2000 {
        let mut lo = rng.gen_range(0..=16 * MIB);
        let mut hi = rng.gen_range(0..=16 * MIB);
        if rng.gen_bool(0.3) {
            lo = pool[rng.gen_range(0..pool.len())];
        }
        if lo > hi {
            std::mem::swap(&mut lo, &mut hi);
        }
        let cap = *pool.iter().find(|&&v| v >= hi).unwrap();
        let want: Vec<u64> = pool.iter().copied().filter(|&v| v >= lo && v <= cap).collect();
        if size_pool(lo, hi).unwrap() != want {
            bad.push(format!("size_pool({lo},{hi})"));
            break;
        }
    }
    if pool != spm_dse::memconfig::pool() {
        bad.push("pool".into());
    }
    // sector counts of the published configurations
    let set = AnchorSet::load(data("calibration_anchors.json")).unwrap();
    let mut checked = 0;
    for a in set.anchors.iter().filter(|a| a.power_gated) {
        for m in a.memories.values() {
            checked += 1;
            if ![2, 4, 8, 16].contains(&m.sectors) || !sigma(m.size_b).unwrap().contains(&m.sectors) {
                bad.push(format!("{} {}B/{}", a.label, m.size_b, m.sectors));
            }
        }
    }
    outcome(bad.is_empty(), format!("sigma over [256 B, 16 MiB], 2000 size_pool ranges, {checked} published sector counts; failures {bad:?}"))
}

fn c4_recovery() -> Outcome {
    let c = capsnet();
    let d = deepcaps();
    let got = (size_smp(&c).unwrap(), size_sep(&c).unwrap(), size_smp(&d).unwrap(), size_sep(&d).unwrap());
    let want = (108 * KIB, (25 * KIB, 64 * KIB, 32 * KIB), 8 * MIB, (256 * KIB, 128 * KIB, 8 * MIB));
    outcome(got == want, format!("CapsNet SMP {} SEP {:?}; DeepCaps SMP {} SEP {:?}", got.0, got.1, got.2, got.3))
}

fn c5_counts() -> Outcome {
    let free = ExplorationConstraints::default();
    let constrained = ExplorationConstraints {
        max_shared_size: Some(4 * MIB),
        shared_ports: Some(3),
        families: vec![OrgKind::Hy],
        power_gating: PgMode::OnlyPg,
        ..Default::default()
    };
    let rows = [
        ("CapsNet", count_all(&capsnet(), &free).unwrap(), 15_233u64),
        ("DeepCaps", count_all(&deepcaps(), &free).unwrap(), 215_693),
        ("DeepCaps HY-PG <=4MiB", count_all(&deepcaps(), &constrained).unwrap(), 113_337),
    ];
    let mut pass = true;
    let parts: Vec<String> = rows
        .iter()
        .map(|&(name, got, want)| {
            let rel = (got as f64 - want as f64) / want as f64;
            pass &= rel.abs() <= COUNT_TOL;
            format!("{name} {got} vs {want} ({:+.2}%)", rel * 100.0)
        })
        .collect();
    outcome(pass, format!("{} (tolerance ±{}%)", parts.join("; "), COUNT_TOL * 100.0))
}

fn sep_of(hy: &MemoryOrganization) -> MemoryOrganization {
    MemoryOrganization { kind: OrgKind::Sep, mems: hy.mems, power_gated: hy.power_gated, port_limit: None }
}

fn ungated(org: &MemoryOrganization) -> MemoryOrganization {
    let mut o = *org;
    o.power_gated = false;
    for m in o.mems.iter_mut().filter(|m| m.is_present()) {
        m.sectors = 1;
    }
    o
}

fn c6_equivalences(table: &CostTable) -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let traces = [capsnet(), deepcaps()];
    let (mut hy0, mut pairs, mut bad) = (0, 0, Vec::new());

    // every zero-shared hybrid tuple against its SEP twin
    for t in &traces {
        for [s, d, w, a] in enumerate_hybrid_sizes(t).unwrap().into_iter().filter(|x| x[0] == 0) {
            for pg in [false, true] {
                let secs = |sz: u64| if pg { *sigma(sz).unwrap().last().unwrap() } else { 1 };
                let hy = MemoryOrganization {
                    kind: OrgKind::Hy,
                    mems: [
                        MemorySpec::ABSENT,
                        MemorySpec::new(d, secs(d), 1),
                        MemorySpec::new(w, secs(w), 1),
                        MemorySpec::new(a, secs(a), 1),
                    ],
                    power_gated: pg,
                    port_limit: None,
                };
                assert_eq!(s, 0);
                hy0 += 1;
                let x = evaluate(t, &hy, table, 0).unwrap();
                let y = evaluate(t, &sep_of(&hy), table, 0).unwrap();
                let same = x.total_area_mm2.to_bits() == y.total_area_mm2.to_bits()
                    && x.dynamic_j.to_bits() == y.dynamic_j.to_bits()
                    && x.static_j.to_bits() == y.static_j.to_bits()
                    && x.wakeup_j.to_bits() == y.wakeup_j.to_bits()
                    && x.memories == y.memories
                    && x.operations == y.operations;
                if !same {
                    bad.push(format!("{} HY(0,{d},{w},{a}) pg={pg}", t.network));
                }
            }
        }
    }

    // 1000 random configurations: PG/non-PG dynamic equality and cycle invariance
    let spaces: Vec<(usize, Vec<MemoryOrganization>)> = traces
        .iter()
        .enumerate()
        .map(|(i, t)| (i, enumerate_all(t, &ExplorationConstraints::default()).unwrap().collect()))
        .collect();
    for _ in 0..1000 {
        let (ti, space) = &spaces[rng.gen_range(0..spaces.len())];
        let t = &traces[*ti];
        let org = space[rng.gen_range(0..space.len())];
        let r = evaluate(t, &org, table, 0).unwrap();
        if r.operations.iter().zip(&t.operations).any(|(b, o)| b.cycles != o.cycles) {
            bad.push(format!("cycles changed under {org}"));
        }
        let other = if org.power_gated { ungated(&org) } else { regated(&org, &mut rng) };
        let q = evaluate(t, &other, table, 0).unwrap();
        pairs += 1;
        if r.dynamic_j.to_bits() != q.dynamic_j.to_bits() {
            bad.push(format!("dynamic {org}: {} vs {}", r.dynamic_j, q.dynamic_j));
        }
    }
    bad.truncate(5);
    outcome(bad.is_empty(), format!("{hy0} zero-shared tuples vs SEP, {pairs} PG/non-PG pairs; failures {bad:?}"))
}

fn regated(org: &MemoryOrganization, rng: &mut StdRng) -> MemoryOrganization {
    let mut o = *org;
    o.power_gated = true;
    for m in o.mems.iter_mut().filter(|m| m.is_present()) {
        let s = sigma(m.size).unwrap();
        m.sectors = s[rng.gen_range(0..s.len())];
    }
    o
}

fn brute_front(points: &[EvalSummary]) -> Vec<u64> {
    let mut ids: Vec<u64> = points
        .iter()
        .filter(|p| !points.iter().any(|q| dominates(q, p)))
        .map(|p| p.config_id)
        .collect();
    ids.sort_unstable();
    ids
}

fn c7_pareto(table: &CostTable, deep: &[EvalSummary]) -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let template = deep[0];
    let mut bad = Vec::new();
    let mut spaces = 0;
    for round in 0..40 {
        let n = if round == 0 { 10_000 } else { rng.gen_range(1..=2000) };
        // coarse values so exact ties in area or energy are common
        let grid = rng.gen_range(2..=200);
        let pts: Vec<EvalSummary> = (0..n)
            .map(|i| EvalSummary {
                config_id: i as u64,
                area_mm2: f64::from(rng.gen_range(0..grid)) * 0.25,
                energy_j: f64::from(rng.gen_range(0..grid)) * 1e-3,
                ..template
            })
            .collect();
        spaces += 1;
        let mut got: Vec<u64> = pareto_front(&pts).unwrap().iter().map(|p| p.config_id).collect();
        got.sort_unstable();
        if got != brute_front(&pts) {
            bad.push(format!("random space {round} ({n} points)"));
        }
    }
    // the real CapsNet space in chunks of at most 10^4
    let caps = explore(&capsnet(), table, &ExplorationConstraints::default(), 0).unwrap().results;
    for chunk in caps.chunks(10_000) {
        spaces += 1;
        let mut got: Vec<u64> = pareto_front(chunk).unwrap().iter().map(|p| p.config_id).collect();
        got.sort_unstable();
        if got != brute_front(chunk) {
            bad.push("CapsNet chunk".into());
        }
    }
    // full DeepCaps space: sampled pairs against the front
    let front = pareto_front(deep).unwrap();
    let mut violations = 0;
    for _ in 0..1000 {
        let f = &front[rng.gen_range(0..front.len())];
        let p = &deep[rng.gen_range(0..deep.len())];
        if dominates(p, f) {
            violations += 1;
        }
    }
    let on_front: HashSet<u64> = front.iter().map(|r| r.config_id).collect();
    for _ in 0..1000 {
        // an off-front point must be dominated by some front member
        let p = &deep[rng.gen_range(0..deep.len())];
        if !on_front.contains(&p.config_id) && !front.iter().any(|f| dominates(f, p)) {
            violations += 1;
        }
    }
    if violations > 0 {
        bad.push(format!("{violations} DeepCaps sample violations"));
    }
    outcome(
        bad.is_empty(),
        format!("{spaces} spaces vs brute force; DeepCaps front {} of {} with 2000 sampled checks; failures {bad:?}", front.len(), deep.len()),
    )
}

fn c8_frontier(table: &CostTable) -> Outcome {
    let ex = explore(&capsnet(), table, &ExplorationConstraints::default(), 0).unwrap();
    let front = pareto_front(&ex.results).unwrap();
    let fam = |kind, pg| Family { kind, power_gated: pg, port_limit: None };
    let on = |f: Family| front.iter().filter(|r| r.organization.family() == f).count();
    let want_on = [fam(OrgKind::Sep, false), fam(OrgKind::Sep, true), fam(OrgKind::Hy, true)];
    let want_off = [fam(OrgKind::Smp, false), fam(OrgKind::Smp, true)];
    let pass = want_on.iter().all(|&f| on(f) > 0) && want_off.iter().all(|&f| on(f) == 0);
    let mut counts: Vec<String> = Vec::new();
    for kind in OrgKind::ALL {
        for pg in [false, true] {
            counts.push(format!("{}={}", fam(kind, pg), on(fam(kind, pg))));
        }
    }
    outcome(pass, format!("front members per family: {}", counts.join(" ")))
}

fn c9_table(table: &CostTable) -> Outcome {
    let set = AnchorSet::load(data("calibration_anchors.json")).unwrap();
    let workloads = set.load_workloads(&spm_dse::data_dir()).unwrap();
    let cells = reproduce(&set, &workloads, table).unwrap();
    let worst = cells.iter().max_by(|a, b| a.error().total_cmp(&b.error())).unwrap();
    let failures = cells.iter().filter(|c| c.error() > CELL_TOL).count();
    let pick = |w: &str, l: &str, m: Mem, metric: &str| {
        cells
            .iter()
            .find(|c| c.workload.starts_with(w) && c.label == l && c.memory == m && c.metric == metric)
            .map(|c| format!("{w} {l} {} {metric} {:.3}", m.name(), c.reproduced))
            .unwrap_or_default()
    };
    let samples = [
        pick("capsnet", "SEP", Mem::Weight, "area_mm2"),
        pick("capsnet", "SEP", Mem::Weight, "dynamic_mj"),
        pick("capsnet", "SEP", Mem::Weight, "static_mj"),
        pick("deepcaps", "HY-PG", Mem::Acc, "static_mj"),
    ];
    outcome(
        failures == 0,
        format!(
            "{} cells, {failures} beyond {CELL_TOL}; worst {} {} {} {} |{:.5}|; {}",
            cells.len(),
            worst.workload,
            worst.label,
            worst.memory.name(),
            worst.metric,
            worst.error(),
            samples.join(", ")
        ),
    )
}

fn c10_offchip() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut bad = 0;
    let mut interior = 0;
    for _ in 0..500 {
        let t = random_trace(&mut rng, 4 * MIB, true);
        let ops = &t.operations;
        let n = ops.len();
        let got = derive_offchip(&t);
        for i in 0..n {
            let r = ops[i].routing_phase;
            let prev_r = i > 0 && ops[i - 1].routing_phase;
            let next_r = i + 1 < n && ops[i + 1].routing_phase;
            let want_rd = if r && prev_r { 0 } else { ops[i].writes.data + ops[i].writes.weight };
            let want_wr = if r && next_r {
                0
            } else if i + 1 < n {
                ops[i + 1].reads.data
            } else {
                ops[i].usage.acc
            };
            if r && prev_r && next_r {
                interior += 1;
                if got.per_op[i].reads_off != 0 || got.per_op[i].writes_off != 0 {
                    bad += 1;
                }
            }
            if (got.per_op[i].reads_off, got.per_op[i].writes_off) != (want_rd, want_wr) {
                bad += 1;
            }
        }
    }
    let caps = capsnet();
    let prof = derive_offchip(&caps);
    let ops = &caps.operations;
    for i in 1..ops.len().saturating_sub(1) {
        if ops[i - 1].routing_phase && ops[i].routing_phase && ops[i + 1].routing_phase {
            interior += 1;
            if prof.per_op[i].reads_off + prof.per_op[i].writes_off != 0 {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("500 random traces plus CapsNet, {interior} routing-interior ops, {bad} mismatches"))
}

fn c11_determinism(table: &CostTable) -> Outcome {
    let mut ok = true;
    let mut sizes = Vec::new();
    for t in [capsnet(), deepcaps()] {
        let c = ExplorationConstraints::default();
        let a = explore(&t, table, &c, 1).unwrap();
        let b = explore(&t, table, &c, 4).unwrap();
        let ba = build_bundle(&t, table, &a).unwrap();
        let bb = build_bundle(&t, table, &b).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let ma = ba.write(dir_a.path(), &t.network, a.summary.configurations).unwrap();
        let mb = bb.write(dir_b.path(), &t.network, b.summary.configurations).unwrap();
        for e in &ma.files {
            let x = std::fs::read(dir_a.path().join(&e.name)).unwrap();
            let y = std::fs::read(dir_b.path().join(&e.name)).unwrap();
            ok &= x == y;
        }
        ok &= ba == bb && ma == mb;
        sizes.push(format!("{} {} files", t.network, ma.files.len()));
    }
    outcome(ok, format!("jobs=1 vs jobs=4, byte comparison of {}", sizes.join(", ")))
}

fn main() {
    let table = table();
    let deep = explore(&deepcaps(), &table, &ExplorationConstraints::default(), 0).unwrap().results;
    let criteria: Vec<Criterion> = vec![
        ("1 sizing vs oracle", Box::new(c1_sizing)),
        ("2 hybrid minimality", Box::new(c2_minimality)),
        ("3 sigma and pool", Box::new(c3_sigma_pool)),
        ("4 configuration recovery", Box::new(c4_recovery)),
        ("5 configuration counts", Box::new(c5_counts)),
        ("6 boundary equivalences", Box::new(|| c6_equivalences(&table))),
        ("7 pareto correctness", Box::new(|| c7_pareto(&table, &deep))),
        ("8 frontier membership", Box::new(|| c8_frontier(&table))),
        ("9 table plumbing", Box::new(|| c9_table(&table))),
        ("10 off-chip identities", Box::new(c10_offchip)),
        ("11 determinism", Box::new(|| c11_determinism(&table))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let o = run();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
