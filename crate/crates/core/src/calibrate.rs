//! Back-solving per-access energies and leakage powers from run-level
//! energies of named configurations.
//!
//! Each anchor is a fully pinned organization plus the area and the
//! run-aggregated dynamic, static and wakeup energy of each of its memories,
//! rounded to three decimals. Running the shipped workload through the
//! organization gives the access count and the gated on-time of every
//! memory, so every printed energy bounds a coefficient to an interval.
//! Geometries shared by several anchors must agree: the intervals are
//! intersected and the midpoint is kept.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::costmodel::{CostTable, DramEnergy, SramCostEntry, DEFAULT_WAKE_S, PG_AREA_OVERHEAD};
use crate::evaluator::{evaluate, memory_activity, MemoryActivity};
use crate::memconfig::{Mem, MemoryOrganization, MemorySpec, OrgKind};
use crate::workload::{load_workload, WorkloadTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorMemory {
    pub size_b: u64,
    pub sectors: u32,
    pub ports: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorCell {
    pub area_mm2: f64,
    pub dynamic_mj: f64,
    pub static_mj: f64,
    pub wakeup_nj: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anchor {
    pub workload: String,
    pub label: String,
    pub kind: OrgKind,
    pub power_gated: bool,
    pub port_limit: Option<u8>,
    pub memories: BTreeMap<Mem, AnchorMemory>,
    pub cells: BTreeMap<Mem, AnchorCell>,
}

impl Anchor {
    pub fn organization(&self, banks: u32) -> MemoryOrganization {
        let mut mems = [MemorySpec::ABSENT; 4];
        for (m, a) in &self.memories {
            mems[m.index()] = MemorySpec { size: a.size_b, sectors: a.sectors, banks, ports: a.ports };
        }
        MemoryOrganization { kind: self.kind, mems, power_gated: self.power_gated, port_limit: self.port_limit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorSet {
    pub technology: String,
    pub banks: u32,
    pub dram: DramEnergy,
    /// Half a unit in the last printed digit, in mJ.
    pub tolerance_mj: f64,
    #[serde(default)]
    pub note: String,
    pub anchors: Vec<Anchor>,
}

impl AnchorSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.to_path_buf(), msg: e.to_string() })
    }

    /// Loads every workload the anchors reference, resolved against `dir`.
    pub fn load_workloads(&self, dir: &Path) -> Result<BTreeMap<String, WorkloadTrace>> {
        let mut out = BTreeMap::new();
        for a in &self.anchors {
            if !out.contains_key(&a.workload) {
                let p: PathBuf = dir.join(&a.workload);
                out.insert(a.workload.clone(), load_workload(p)?);
            }
        }
        Ok(out)
    }
}

/// Where one printed cell landed after calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCheck {
    pub workload: String,
    pub label: String,
    pub memory: Mem,
    pub metric: &'static str,
    pub printed: f64,
    /// Value the reproduction is held to. Differs from `printed` only for
    /// gated dynamic energies whose non-gated twin has the same traffic.
    pub reference: f64,
    pub reproduced: f64,
}

impl CellCheck {
    pub fn error(&self) -> f64 {
        (self.reproduced - self.reference).abs()
    }
}

#[derive(Debug, Clone)]
struct Interval {
    lo: f64,
    hi: f64,
    sources: Vec<String>,
}

impl Interval {
    fn add(&mut self, lo: f64, hi: f64, src: String) {
        self.lo = self.lo.max(lo);
        self.hi = self.hi.min(hi);
        self.sources.push(src);
    }
}

fn bound(map: &mut BTreeMap<(u64, u8, u32), Interval>, key: (u64, u8, u32), value_j: f64, tol_j: f64, per: f64, src: String) {
    if per <= 0.0 {
        return;
    }
    let (lo, hi) = ((value_j - tol_j).max(0.0) / per, (value_j + tol_j) / per);
    map.entry(key)
        .or_insert(Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY, sources: vec![] })
        .add(lo, hi, src);
}

fn midpoint(key: (u64, u8, u32), what: &str, iv: &Interval) -> Result<f64> {
    if iv.lo > iv.hi {
        return Err(Error::validation(format!(
            "{what} of {}B/{}p/{}s: printed values disagree ({} > {}) across {}",
            key.0,
            key.1,
            key.2,
            iv.lo,
            iv.hi,
            iv.sources.join(", ")
        )));
    }
    Ok(0.5 * (iv.lo + iv.hi))
}

struct Measured<'a> {
    anchor: &'a Anchor,
    activity: [MemoryActivity; 4],
}

fn measure<'a>(set: &'a AnchorSet, workloads: &BTreeMap<String, WorkloadTrace>) -> Result<Vec<Measured<'a>>> {
    set.anchors
        .iter()
        .map(|a| {
            let t = workloads
                .get(&a.workload)
                .ok_or_else(|| Error::validation(format!("anchor {}: workload {} not loaded", a.label, a.workload)))?;
            let org = a.organization(set.banks);
            org.validate()?;
            Ok(Measured { anchor: a, activity: memory_activity(t, &org)? })
        })
        .collect()
}

/// Gated anchor memories whose dynamic energy is taken from a non-gated
/// anchor with identical placement rather than from their own cell.
fn sibling_of<'a>(all: &'a [Measured<'a>], me: &Measured<'_>, m: Mem) -> Option<&'a Measured<'a>> {
    if !me.anchor.power_gated {
        return None;
    }
    let mine = me.anchor.memories.get(&m)?;
    let q = me.activity[m.index()].reads + me.activity[m.index()].writes;
    all.iter().find(|o| {
        !o.anchor.power_gated
            && o.anchor.workload == me.anchor.workload
            && o.anchor.memories.get(&m).is_some_and(|x| x.size_b == mine.size_b && x.ports == mine.ports)
            && o.anchor.cells.contains_key(&m)
            && {
                let oq = o.activity[m.index()].reads + o.activity[m.index()].writes;
                (oq - q).abs() <= 1e-12 * q.abs().max(1.0)
            }
    })
}

pub struct Calibration {
    pub table: CostTable,
    /// Gated dynamic cells replaced by their non-gated twin.
    pub sibling_cells: Vec<String>,
}

pub fn calibrate(set: &AnchorSet, workloads: &BTreeMap<String, WorkloadTrace>) -> Result<Calibration> {
    let tol_j = set.tolerance_mj * 1e-3;
    let measured = measure(set, workloads)?;
    let mut energy: BTreeMap<(u64, u8, u32), Interval> = BTreeMap::new();
    let mut leak: BTreeMap<(u64, u8, u32), Interval> = BTreeMap::new();
    let mut area: BTreeMap<(u64, u8, u32), f64> = BTreeMap::new();
    let mut wake: BTreeMap<(u64, u8, u32), f64> = BTreeMap::new();
    let mut sibling_cells = Vec::new();

    for me in &measured {
        let a = me.anchor;
        for (&m, cell) in &a.cells {
            let mem = a
                .memories
                .get(&m)
                .ok_or_else(|| Error::validation(format!("anchor {}: cell for absent memory {}", a.label, m.name())))?;
            let act = &me.activity[m.index()];
            let src = format!("{}:{}:{}", a.workload, a.label, m.name());
            let geo = (mem.size_b, mem.ports, mem.sectors);
            if let Some(prev) = area.insert(geo, cell.area_mm2) {
                if prev != cell.area_mm2 {
                    return Err(Error::validation(format!("{src}: area {} conflicts with {prev}", cell.area_mm2)));
                }
            }
            if let Some(w) = cell.wakeup_nj {
                wake.insert(geo, w * 1e-9);
            }
            if sibling_of(&measured, me, m).is_some() {
                sibling_cells.push(src.clone());
            } else {
                bound(&mut energy, (mem.size_b, mem.ports, 0), cell.dynamic_mj * 1e-3, tol_j, act.reads + act.writes, src.clone());
            }
            bound(&mut leak, geo, cell.static_mj * 1e-3, tol_j, act.on_seconds, src);
        }
    }

    let mut entries = Vec::new();
    for (&geo, &area_mm2) in &area {
        let (size_b, ports, sectors) = geo;
        let e_iv = energy.get(&(size_b, ports, 0)).ok_or_else(|| {
            Error::validation(format!("no dynamic-energy constraint for {size_b}B/{ports}p"))
        })?;
        let e = midpoint((size_b, ports, 0), "access energy", e_iv)?;
        let l_iv = leak.get(&geo).ok_or_else(|| Error::validation(format!("no static constraint for {geo:?}")))?;
        let l = midpoint(geo, "leakage", l_iv)?;
        let gated = sectors > 1;
        entries.push(SramCostEntry {
            size_b,
            ports,
            sectors,
            banks: set.banks,
            area_mm2,
            read_j: e,
            write_j: e,
            leak_w: l,
            wake_j: if gated { wake.get(&geo).copied().unwrap_or(crate::costmodel::DEFAULT_WAKE_J) } else { 0.0 },
            wake_s: if gated { DEFAULT_WAKE_S } else { 0.0 },
            origin: Some("anchored".into()),
        });
    }

    // Gated geometries without a single-sector twin get one, so that other
    // sector counts of the same memory derive from it.
    let have: HashMap<(u64, u8), ()> =
        entries.iter().filter(|e| e.sectors == 1).map(|e| ((e.size_b, e.ports), ())).collect();
    let mut synth: BTreeMap<(u64, u8), SramCostEntry> = BTreeMap::new();
    for e in entries.iter().filter(|e| e.sectors > 1) {
        if have.contains_key(&(e.size_b, e.ports)) {
            continue;
        }
        synth.entry((e.size_b, e.ports)).or_insert_with(|| SramCostEntry {
            sectors: 1,
            area_mm2: e.area_mm2 / PG_AREA_OVERHEAD,
            wake_j: 0.0,
            wake_s: 0.0,
            origin: Some("synthesized".into()),
            ..e.clone()
        });
    }
    entries.extend(synth.into_values());

    let mut meta = BTreeMap::new();
    meta.insert(
        "derivation".to_string(),
        serde_json::Value::String(
            "Per-access energies and leakage powers back-solved from run-level energies of named \
             configurations under the shipped workloads; intervals of +-half a printed digit are \
             intersected per geometry and the midpoint kept. Read and write energies are equal. \
             Single-sector entries marked 'synthesized' are the gated geometry without the 2.75% \
             gating area. Static energy assumes the per-operation cycle counts of the shipped \
             workloads; other run lengths shift the leakage values."
                .into(),
        ),
    );
    meta.insert(
        "workloads".to_string(),
        serde_json::Value::Array(workloads.keys().map(|k| serde_json::Value::String(k.clone())).collect()),
    );
    meta.insert(
        "gated_dynamic_from_twin".to_string(),
        serde_json::Value::Array(sibling_cells.iter().map(|s| serde_json::Value::String(s.clone())).collect()),
    );
    let table = CostTable::with_metadata(set.technology.clone(), set.dram, entries, meta)?;
    Ok(Calibration { table, sibling_cells })
}

/// Runs every anchor through the full evaluator with `table` and lines the
/// results up against the printed cells.
pub fn reproduce(
    set: &AnchorSet,
    workloads: &BTreeMap<String, WorkloadTrace>,
    table: &CostTable,
) -> Result<Vec<CellCheck>> {
    let measured = measure(set, workloads)?;
    let mut out = Vec::new();
    for me in &measured {
        let a = me.anchor;
        let org = a.organization(set.banks);
        let r = evaluate(&workloads[&a.workload], &org, table, 0)?;
        for (&m, cell) in &a.cells {
            let b = r
                .memory(m)
                .ok_or_else(|| Error::validation(format!("{}: memory {} missing", a.label, m.name())))?;
            let dyn_ref = match sibling_of(&measured, me, m) {
                Some(s) => s.anchor.cells[&m].dynamic_mj,
                None => cell.dynamic_mj,
            };
            let mut push = |metric, printed, reference, reproduced| {
                out.push(CellCheck {
                    workload: a.workload.clone(),
                    label: a.label.clone(),
                    memory: m,
                    metric,
                    printed,
                    reference,
                    reproduced,
                })
            };
            push("area_mm2", cell.area_mm2, cell.area_mm2, b.area_mm2);
            push("dynamic_mj", cell.dynamic_mj, dyn_ref, b.dynamic_j * 1e3);
            push("static_mj", cell.static_mj, cell.static_mj, b.static_j * 1e3);
            if let Some(w) = cell.wakeup_nj {
                push("wakeup_nj", w, w, b.wake_per_transition_j * 1e9);
            }
        }
    }
    Ok(out)
}

/// Calibrate from the anchor file and the workloads next to it.
pub fn calibrate_from_files(anchors: &Path) -> Result<Calibration> {
    let set = AnchorSet::load(anchors)?;
    let dir = anchors.parent().unwrap_or(Path::new("."));
    let workloads = set.load_workloads(dir)?;
    calibrate(&set, &workloads)
}
