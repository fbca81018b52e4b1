//! Report bundle: CSV and JSON files describing an exploration.
//!
//! All files are rendered in memory first, so a bundle can be compared byte
//! for byte before (or instead of) touching the disk. Floats use Rust's
//! shortest round-trip formatting and JSON objects have sorted keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::costmodel::CostTable;
use crate::dse::{pareto_front, select_named, Exploration};
use crate::evaluator::{evaluate, EvalSummary, EvaluationResult};
use crate::memconfig::{Family, Mem};
use crate::units::format_size;
use crate::workload::WorkloadTrace;
use crate::{Error, Result};

pub const SCATTER_HEADER: &str = "config_id,family,kind,power_gated,shared_b,shared_sectors,shared_ports,data_b,data_sectors,weight_b,weight_sectors,acc_b,acc_sectors,area_mm2,energy_j,dynamic_j,static_j,wakeup_j,required_shared_ports,pareto";
pub const SELECTIONS_HEADER: &str = "family,config_id,kind,power_gated,memory,size_b,ports,sectors,area_mm2,dynamic_j,static_j,wakeup_j,wake_per_transition_j";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportBundle {
    /// File name to contents, in name order.
    pub files: BTreeMap<String, Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub complete: bool,
    pub network: String,
    pub configurations: u64,
    pub files: Vec<ManifestEntry>,
}

fn sorted_json<T: Serialize>(v: &T) -> Vec<u8> {
    // a Value object is a BTreeMap, so keys come out sorted
    let value = serde_json::to_value(v).expect("report values serialise");
    let mut s = serde_json::to_string_pretty(&value).expect("report values serialise");
    s.push('\n');
    s.into_bytes()
}

fn scatter_row(out: &mut String, r: &EvalSummary, on_front: bool) {
    let o = &r.organization;
    let m = |k: Mem| o.spec(k);
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.config_id,
        o.family(),
        o.kind.label(),
        o.power_gated,
        m(Mem::Shared).size,
        m(Mem::Shared).sectors,
        m(Mem::Shared).ports,
        m(Mem::Data).size,
        m(Mem::Data).sectors,
        m(Mem::Weight).size,
        m(Mem::Weight).sectors,
        m(Mem::Acc).size,
        m(Mem::Acc).sectors,
        r.area_mm2,
        r.energy_j,
        r.dynamic_j,
        r.static_j,
        r.wakeup_j,
        r.required_shared_ports,
        on_front
    );
}

#[derive(Serialize)]
struct ScheduleOp<'a> {
    name: &'a str,
    cycles: u64,
    placed_b: BTreeMap<&'static str, u64>,
    active_sectors: BTreeMap<&'static str, u32>,
    wakeups: BTreeMap<&'static str, u32>,
}

#[derive(Serialize)]
struct Schedule<'a> {
    config_id: u64,
    family: String,
    sectors: BTreeMap<&'static str, u32>,
    operations: Vec<ScheduleOp<'a>>,
}

fn schedule_doc(r: &EvaluationResult) -> Schedule<'_> {
    let present: Vec<Mem> = r.memories.iter().map(|m| m.memory).collect();
    let pick = |v: &[u32; 4]| present.iter().map(|m| (m.name(), v[m.index()])).collect::<BTreeMap<_, _>>();
    Schedule {
        config_id: r.config_id,
        family: r.family.clone(),
        sectors: r.memories.iter().map(|m| (m.memory.name(), m.sectors)).collect(),
        operations: r
            .operations
            .iter()
            .map(|o| ScheduleOp {
                name: &o.name,
                cycles: o.cycles,
                placed_b: present.iter().map(|m| (m.name(), o.placed_b[m.index()])).collect(),
                active_sectors: pick(&o.active_sectors),
                wakeups: pick(&o.wakeups),
            })
            .collect(),
    }
}

/// Table of per-memory area and energies. The last column is the energy of
/// one sector wakeup; the total row leaves it blank.
pub fn render_table(selected: &[EvaluationResult]) -> String {
    let mut s = String::new();
    let row = |s: &mut String, cells: [&str; 5], nums: [f64; 4], wake: &str| {
        let line = format!(
            "{:<12} {:<7} {:>8} {:>5} {:>2} {:>10.3} {:>12.3} {:>12.3} {:>12.6} {:>12}",
            cells[0], cells[1], cells[2], cells[3], cells[4], nums[0], nums[1], nums[2], nums[3], wake
        );
        s.push_str(line.trim_end());
        s.push('\n');
    };
    let _ = writeln!(
        s,
        "{:<12} {:<7} {:>8} {:>5} {:>2} {:>10} {:>12} {:>12} {:>12} {:>12}",
        "family", "memory", "size", "sc", "p", "area[mm2]", "dynamic[mJ]", "static[mJ]", "wakeup[mJ]", "wake/tr[nJ]"
    );
    for r in selected {
        for m in &r.memories {
            let wake = if r.organization.power_gated {
                format!("{:.3}", m.wake_per_transition_j * 1e9)
            } else {
                "---".to_string()
            };
            row(
                &mut s,
                [&r.family, m.memory.name(), &format_size(m.size_b), &m.sectors.to_string(), &m.ports.to_string()],
                [m.area_mm2, m.dynamic_j * 1e3, m.static_j * 1e3, m.wakeup_j * 1e3],
                &wake,
            );
        }
        row(
            &mut s,
            [&r.family, "total", "", "", ""],
            [r.total_area_mm2, r.dynamic_j * 1e3, r.static_j * 1e3, r.wakeup_j * 1e3],
            "",
        );
    }
    s
}

/// Renders every report file for an exploration. Selected configurations
/// are re-evaluated in full to get their breakdowns.
pub fn build_bundle(trace: &WorkloadTrace, table: &CostTable, ex: &Exploration) -> Result<ReportBundle> {
    if ex.results.is_empty() {
        return Err(Error::validation("nothing to report: no configurations"));
    }
    let front = pareto_front(&ex.results)?;
    let on_front: std::collections::HashSet<u64> = front.iter().map(|r| r.config_id).collect();
    let selections = select_named(&ex.results);

    let mut files = BTreeMap::new();
    let mut scatter = String::with_capacity(ex.results.len() * 120);
    scatter.push_str(SCATTER_HEADER);
    scatter.push('\n');
    for r in &ex.results {
        scatter_row(&mut scatter, r, on_front.contains(&r.config_id));
    }
    files.insert("scatter.csv".to_string(), scatter.into_bytes());

    let mut pareto = String::new();
    pareto.push_str(SCATTER_HEADER);
    pareto.push('\n');
    for r in &front {
        scatter_row(&mut pareto, r, true);
    }
    files.insert("pareto.csv".to_string(), pareto.into_bytes());

    let mut sel = String::new();
    sel.push_str(SELECTIONS_HEADER);
    sel.push('\n');
    let mut full = Vec::new();
    for (fam, s) in &selections {
        let r = evaluate(trace, &s.organization, table, s.config_id)?;
        for m in &r.memories {
            let _ = writeln!(
                sel,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                fam,
                r.config_id,
                r.organization.kind.label(),
                r.organization.power_gated,
                m.memory.name(),
                m.size_b,
                m.ports,
                m.sectors,
                m.area_mm2,
                m.dynamic_j,
                m.static_j,
                m.wakeup_j,
                m.wake_per_transition_j
            );
        }
        files.insert(format!("breakdown_{fam}.json"), sorted_json(&r));
        files.insert(format!("schedule_{fam}.json"), sorted_json(&schedule_doc(&r)));
        full.push(r);
    }
    files.insert("selections.csv".to_string(), sel.into_bytes());
    files.insert("summary.txt".to_string(), render_table(&full).into_bytes());
    files.insert("explore.json".to_string(), sorted_json(&ex.summary));
    Ok(ReportBundle { files })
}

impl ReportBundle {
    pub fn manifest(&self, network: &str, configurations: u64, complete: bool) -> Manifest {
        Manifest {
            complete,
            network: network.to_string(),
            configurations,
            files: self
                .files
                .iter()
                .map(|(name, bytes)| ManifestEntry {
                    name: name.clone(),
                    bytes: bytes.len() as u64,
                    sha256: format!("{:x}", Sha256::digest(bytes)),
                })
                .collect(),
        }
    }

    /// Writes the bundle to `dir`. The manifest is written first marked
    /// incomplete and rewritten once every file is in place.
    pub fn write(&self, dir: &Path, network: &str, configurations: u64) -> Result<Manifest> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, bytes: &[u8]| {
            let p = dir.join(name);
            std::fs::write(&p, bytes).map_err(|e| Error::io(p, e))
        };
        let pending = Manifest { complete: false, network: network.to_string(), configurations, files: vec![] };
        put("manifest.json", &sorted_json(&pending))?;
        for (name, bytes) in &self.files {
            put(name, bytes)?;
        }
        let m = self.manifest(network, configurations, true);
        put("manifest.json", &sorted_json(&m))?;
        Ok(m)
    }
}

/// Build and write in one step.
pub fn emit(trace: &WorkloadTrace, table: &CostTable, ex: &Exploration, out_dir: &Path) -> Result<Manifest> {
    let b = build_bundle(trace, table, ex)?;
    b.write(out_dir, &trace.network, ex.summary.configurations)
}

/// Parses a scatter or pareto CSV back into (id, family, area, energy).
pub fn read_scatter(text: &str) -> Result<Vec<(u64, String, f64, f64)>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SCATTER_HEADER => {}
        _ => return Err(Error::validation("scatter file has an unexpected header")),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::validation(format!("bad scatter row: {l}"));
            if f.len() != 20 {
                return Err(bad());
            }
            Ok((
                f[0].parse().map_err(|_| bad())?,
                f[1].to_string(),
                f[13].parse().map_err(|_| bad())?,
                f[14].parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Family labels in the order the bundle lists them.
pub fn families_of(ex: &Exploration) -> Vec<Family> {
    select_named(&ex.results).into_keys().collect()
}

/// Reads a `breakdown_<family>.json` file back.
pub fn breakdown_from_json(v: &serde_json::Value) -> Option<EvaluationResult> {
    serde_json::from_value(v.clone()).ok()
}
