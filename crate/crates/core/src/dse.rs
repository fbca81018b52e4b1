//! Exhaustive exploration, Pareto extraction and per-family selection.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::costmodel::CostTable;
use crate::evaluator::{evaluate, EvalSummary};
use crate::memconfig::{enumerate_all, Family, MemoryOrganization};
use crate::workload::WorkloadTrace;
use crate::{Error, Result};

pub use crate::memconfig::{ExplorationConstraints, PgMode};

#[derive(Debug, Clone)]
pub struct Exploration {
    /// One summary per configuration, ordered by config id.
    pub results: Vec<EvalSummary>,
    pub summary: ExploreSummary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploreSummary {
    pub network: String,
    pub configurations: u64,
    pub per_family: BTreeMap<String, u64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Evaluate every configuration admitted by `constraints`.
///
/// `jobs == 1` runs on the calling thread; any other value uses a pool of
/// that many workers (0 means one per core). Results are ordered by config
/// id either way, so the output does not depend on `jobs`.
pub fn explore(
    trace: &WorkloadTrace,
    table: &CostTable,
    constraints: &ExplorationConstraints,
    jobs: usize,
) -> Result<Exploration> {
    let start = Instant::now();
    let orgs: Vec<MemoryOrganization> = enumerate_all(trace, constraints)?.collect();
    log::info!("{}: evaluating {} configurations", trace.network, orgs.len());
    let eval = |(i, org): (usize, &MemoryOrganization)| evaluate(trace, org, table, i as u64).map(|r| r.summary());
    let results: Vec<EvalSummary> = if jobs == 1 {
        orgs.iter().enumerate().map(eval).collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
        pool.install(|| orgs.par_iter().enumerate().map(eval).collect::<Result<_>>())?
    };
    let mut per_family = BTreeMap::new();
    for r in &results {
        *per_family.entry(r.organization.family().to_string()).or_insert(0) += 1;
    }
    let summary = ExploreSummary {
        network: trace.network.clone(),
        configurations: results.len() as u64,
        per_family,
        wall_time: start.elapsed(),
    };
    log::info!("{}: {} configurations in {:.2?}", trace.network, summary.configurations, summary.wall_time);
    Ok(Exploration { results, summary })
}

/// `a` dominates `b` in (area, energy).
pub fn dominates(a: &EvalSummary, b: &EvalSummary) -> bool {
    a.area_mm2 <= b.area_mm2 && a.energy_j <= b.energy_j && (a.area_mm2 < b.area_mm2 || a.energy_j < b.energy_j)
}

fn by_area_energy_id(a: &EvalSummary, b: &EvalSummary) -> std::cmp::Ordering {
    a.area_mm2
        .total_cmp(&b.area_mm2)
        .then(a.energy_j.total_cmp(&b.energy_j))
        .then(a.config_id.cmp(&b.config_id))
}

/// Non-dominated subset, ascending by area, then energy, then id.
pub fn pareto_front(results: &[EvalSummary]) -> Result<Vec<EvalSummary>> {
    if results.is_empty() {
        return Err(Error::validation("pareto_front of an empty result set"));
    }
    let mut sorted = results.to_vec();
    sorted.sort_by(by_area_energy_id);
    let mut front = Vec::new();
    // lowest energy seen so far and the smallest area that reaches it
    let mut best: Option<(f64, f64)> = None;
    for r in sorted {
        let keep = match best {
            None => true,
            Some((e, a)) => r.energy_j < e || (r.energy_j == e && r.area_mm2 == a),
        };
        if keep {
            if best.is_none_or(|(e, _)| r.energy_j < e) {
                best = Some((r.energy_j, r.area_mm2));
            }
            front.push(r);
        }
    }
    Ok(front)
}

fn better(a: &EvalSummary, b: &EvalSummary) -> bool {
    a.energy_j
        .total_cmp(&b.energy_j)
        .then(a.area_mm2.total_cmp(&b.area_mm2))
        .then(a.config_id.cmp(&b.config_id))
        .is_lt()
}

/// Lowest-energy configuration of every family present in `results`
/// (ties: smaller area, then lower id).
pub fn select_named(results: &[EvalSummary]) -> BTreeMap<Family, EvalSummary> {
    let mut out: BTreeMap<Family, EvalSummary> = BTreeMap::new();
    for r in results {
        let f = r.organization.family();
        match out.get(&f) {
            Some(cur) if !better(r, cur) => {}
            _ => {
                out.insert(f, *r);
            }
        }
    }
    out
}

/// Like [`select_named`] but fails when a wanted family has no result.
pub fn select_families(results: &[EvalSummary], wanted: &[Family]) -> Result<BTreeMap<Family, EvalSummary>> {
    let all = select_named(results);
    wanted
        .iter()
        .map(|f| {
            all.get(f)
                .map(|r| (*f, *r))
                .ok_or_else(|| Error::validation(format!("no configuration of family {f}")))
        })
        .collect()
}
