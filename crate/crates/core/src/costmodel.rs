//! SRAM area and energy coefficients.
//!
//! A [`CostTable`] holds measured (or calibrated) entries for specific
//! geometries. Anything else is answered by a small analytical model fitted
//! to the table when it is loaded:
//!
//! ```text
//! area  = a0 + a1 * size * pf_area(P)
//! e_acc = e0 + e1 * sqrt(size) * pf_energy(P)
//! leak  = l1 * size * pf_leak(P)
//! wake  = w1 * size / sectors
//! ```
//!
//! Power-gated variants of a geometry pay 2.75 % extra area and keep the
//! base energies and leakage.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::memconfig::MemorySpec;
use crate::{Error, Result};

pub const PG_AREA_OVERHEAD: f64 = 1.0275;
pub const DEFAULT_WAKE_S: f64 = 0.072e-9;
pub const DEFAULT_WAKE_J: f64 = 1.6e-9;
/// Queries further than this factor outside the fitted size range are refused.
pub const MAX_EXTRAPOLATION: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SramCostEntry {
    pub size_b: u64,
    pub ports: u8,
    pub sectors: u32,
    pub banks: u32,
    pub area_mm2: f64,
    pub read_j: f64,
    pub write_j: f64,
    pub leak_w: f64,
    #[serde(default)]
    pub wake_j: f64,
    #[serde(default)]
    pub wake_s: f64,
    /// Where the numbers came from, e.g. `anchored` or `synthesized`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

type Key = (u64, u8, u32, u32);

impl SramCostEntry {
    fn key(&self) -> Key {
        (self.size_b, self.ports, self.sectors, self.banks)
    }

    fn validate(&self) -> Result<()> {
        let id = format!("entry {}B/{}p/{}s/{}b", self.size_b, self.ports, self.sectors, self.banks);
        if self.size_b == 0 || self.sectors == 0 || self.banks == 0 || !(1..=3).contains(&self.ports) {
            return Err(Error::validation(format!("{id}: bad geometry")));
        }
        for (name, v) in [
            ("area_mm2", self.area_mm2),
            ("read_j", self.read_j),
            ("write_j", self.write_j),
            ("leak_w", self.leak_w),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{id}: {name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("wake_j", self.wake_j), ("wake_s", self.wake_s)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{id}: {name} must be non-negative, got {v}")));
            }
            if self.sectors == 1 && v != 0.0 {
                return Err(Error::validation(format!("{id}: {name} must be 0 for a single sector")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramEnergy {
    pub read_j: f64,
    pub write_j: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    technology: String,
    dram: DramEnergy,
    entries: Vec<SramCostEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, serde_json::Value>,
}

/// Coefficients of the analytical fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FallbackModel {
    pub a0: f64,
    pub a1: f64,
    pub e0: f64,
    pub e1: f64,
    pub l1: f64,
    pub w1: f64,
    /// Three-port factors for area, energy and leakage.
    pub pf3: [f64; 3],
    pub min_size: u64,
    pub max_size: u64,
}

impl FallbackModel {
    fn port_factor(&self, metric: usize, ports: u8) -> f64 {
        match ports {
            1 => 1.0,
            2 => (1.0 + self.pf3[metric]) / 2.0,
            _ => self.pf3[metric],
        }
    }

    /// [area, read, write, leak] of a single-sector memory.
    fn base(&self, size: u64, ports: u8) -> [f64; 4] {
        let s = size as f64;
        let area = self.a0 + self.a1 * s * self.port_factor(0, ports);
        let e = self.e0 + self.e1 * s.sqrt() * self.port_factor(1, ports);
        let leak = self.l1 * s * self.port_factor(2, ports);
        [area, e, e, leak]
    }

    fn wake(&self, size: u64, sectors: u32) -> f64 {
        self.w1 * size as f64 / f64::from(sectors)
    }
}

#[derive(Debug, Clone)]
pub struct CostTable {
    pub technology: String,
    pub dram: DramEnergy,
    entries: Vec<SramCostEntry>,
    index: HashMap<Key, usize>,
    pub metadata: BTreeMap<String, serde_json::Value>,
    model: FallbackModel,
}

impl PartialEq for CostTable {
    fn eq(&self, other: &Self) -> bool {
        self.technology == other.technology && self.dram == other.dram && self.entries == other.entries
    }
}

/// Least squares of `y ~ c0 + c1*x` weighted by `1/y`, i.e. on relative error.
fn fit_affine_rel(points: &[(f64, f64)]) -> (f64, f64) {
    if points.len() == 1 {
        let (x, y) = points[0];
        return (0.0, y / x);
    }
    let (mut s00, mut s01, mut s11, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let w = 1.0 / (y * y);
        s00 += w;
        s01 += w * x;
        s11 += w * x * x;
        t0 += w * y;
        t1 += w * x * y;
    }
    let det = s00 * s11 - s01 * s01;
    if det.abs() < 1e-300 {
        return (0.0, t1 / s11);
    }
    let c1 = (s00 * t1 - s01 * t0) / det;
    let c0 = (t0 - c1 * s01) / s00;
    // a negative intercept would make small memories free; fall back to a
    // proportional fit in that case
    if c0 < 0.0 {
        (0.0, fit_prop_rel(points))
    } else {
        (c0, c1)
    }
}

/// Least squares of `y ~ c*x` on relative error.
fn fit_prop_rel(points: &[(f64, f64)]) -> f64 {
    let num: f64 = points.iter().map(|&(x, y)| x / y).sum();
    let den: f64 = points.iter().map(|&(x, y)| (x / y) * (x / y)).sum();
    num / den
}

fn geo_mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| (v.iter().map(|x| x.ln()).sum::<f64>() / v.len() as f64).exp())
}

fn fit_model(entries: &[SramCostEntry]) -> FallbackModel {
    let base: Vec<&SramCostEntry> = entries.iter().filter(|e| e.sectors == 1).collect();
    let base = if base.is_empty() { entries.iter().collect() } else { base };
    let single: Vec<&&SramCostEntry> = base.iter().filter(|e| e.ports == 1).collect();
    let fit_set: Vec<&SramCostEntry> = if single.is_empty() { base.clone() } else { single.into_iter().copied().collect() };

    let pts = |f: &dyn Fn(&SramCostEntry) -> (f64, f64)| fit_set.iter().map(|e| f(e)).collect::<Vec<_>>();
    let (a0, a1) = fit_affine_rel(&pts(&|e| (e.size_b as f64, e.area_mm2)));
    let (e0, e1) = fit_affine_rel(&pts(&|e| ((e.size_b as f64).sqrt(), 0.5 * (e.read_j + e.write_j))));
    let l1 = fit_prop_rel(&pts(&|e| (e.size_b as f64, e.leak_w)));

    let multi: Vec<&&SramCostEntry> = base.iter().filter(|e| e.ports == 3).collect();
    let factor = |f: &dyn Fn(&SramCostEntry) -> f64| -> f64 {
        let v: Vec<f64> = multi.iter().map(|e| f(e)).filter(|x| x.is_finite() && *x > 0.0).collect();
        geo_mean(&v).unwrap_or(1.0).max(1.0)
    };
    let pf3 = [
        factor(&|e| (e.area_mm2 - a0) / (a1 * e.size_b as f64)),
        factor(&|e| (0.5 * (e.read_j + e.write_j) - e0) / (e1 * (e.size_b as f64).sqrt())),
        factor(&|e| e.leak_w / (l1 * e.size_b as f64)),
    ];

    let wake_pts: Vec<(f64, f64)> = entries
        .iter()
        .filter(|e| e.sectors > 1 && e.wake_j > 0.0)
        .map(|e| (e.size_b as f64 / f64::from(e.sectors), e.wake_j))
        .collect();
    let w1 = if wake_pts.is_empty() {
        // no gated entries: aim at the default transition energy for a
        // sector group the size of the median entry
        let mut sizes: Vec<u64> = entries.iter().map(|e| e.size_b).collect();
        sizes.sort_unstable();
        DEFAULT_WAKE_J / (sizes[sizes.len() / 2] as f64 / 2.0)
    } else {
        fit_prop_rel(&wake_pts)
    };

    FallbackModel {
        a0,
        a1,
        e0,
        e1,
        l1,
        w1,
        pf3,
        min_size: entries.iter().map(|e| e.size_b).min().unwrap_or(0),
        max_size: entries.iter().map(|e| e.size_b).max().unwrap_or(0),
    }
}

impl CostTable {
    pub fn new(technology: impl Into<String>, dram: DramEnergy, entries: Vec<SramCostEntry>) -> Result<Self> {
        Self::with_metadata(technology, dram, entries, BTreeMap::new())
    }

    pub fn with_metadata(
        technology: impl Into<String>,
        dram: DramEnergy,
        mut entries: Vec<SramCostEntry>,
        metadata: BTreeMap<String, serde_json::Value>,
    ) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation("cost table has no entries"));
        }
        for (n, v) in [("dram.read_j", dram.read_j), ("dram.write_j", dram.write_j)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{n} must be non-negative")));
            }
        }
        entries.sort_by_key(SramCostEntry::key);
        let mut index = HashMap::with_capacity(entries.len());
        for (i, e) in entries.iter().enumerate() {
            e.validate()?;
            if index.insert(e.key(), i).is_some() {
                return Err(Error::validation(format!(
                    "duplicate geometry {}B/{}p/{}s/{}b",
                    e.size_b, e.ports, e.sectors, e.banks
                )));
            }
        }
        let model = fit_model(&entries);
        Ok(CostTable { technology: technology.into(), dram, entries, index, metadata, model })
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let f: TableFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        Self::with_metadata(f.technology, f.dram, f.entries, f.metadata)
    }

    pub fn to_json(&self) -> String {
        let f = TableFile {
            technology: self.technology.clone(),
            dram: self.dram,
            entries: self.entries.clone(),
            metadata: self.metadata.clone(),
        };
        let mut s = serde_json::to_string_pretty(&f).expect("table serialises");
        s.push('\n');
        s
    }

    pub fn entries(&self) -> &[SramCostEntry] {
        &self.entries
    }

    pub fn model(&self) -> &FallbackModel {
        &self.model
    }

    fn exact(&self, size: u64, ports: u8, sectors: u32, banks: u32) -> Option<&SramCostEntry> {
        self.index.get(&(size, ports, sectors, banks)).map(|&i| &self.entries[i])
    }

    /// Single-sector [area, read, write, leak] for ports 1..=3, made
    /// non-decreasing in the port count. Table entries are kept as they are;
    /// modelled values are bent to sit between them.
    fn base_by_ports(&self, size: u64, banks: u32) -> [[f64; 4]; 3] {
        let get = |p: u8| -> ([f64; 4], bool) {
            match self.exact(size, p, 1, banks) {
                Some(e) => ([e.area_mm2, e.read_j, e.write_j, e.leak_w], true),
                None => (self.model.base(size, p), false),
            }
        };
        let (mut v1, x1) = get(1);
        let (mut v2, x2) = get(2);
        let (mut v3, x3) = get(3);
        for f in 0..4 {
            if !x1 {
                if x2 {
                    v1[f] = v1[f].min(v2[f]);
                }
                if x3 {
                    v1[f] = v1[f].min(v3[f]);
                }
            }
            if !x3 {
                v3[f] = v3[f].max(v1[f]);
                if x2 {
                    v3[f] = v3[f].max(v2[f]);
                }
            }
            if !x2 {
                v2[f] = 0.5 * (v1[f] + v3[f]);
            }
        }
        [v1, v2, v3]
    }

    /// Cost entry for `spec`: the table entry if present, otherwise derived
    /// from the single-sector geometry or from the fitted model.
    pub fn query(&self, spec: &MemorySpec) -> Result<SramCostEntry> {
        if !spec.is_present() {
            return Err(Error::Cost("query on an absent memory".into()));
        }
        if !(1..=3).contains(&spec.ports) || spec.sectors == 0 {
            return Err(Error::Cost(format!("bad geometry {spec:?}")));
        }
        if let Some(e) = self.exact(spec.size, spec.ports, spec.sectors, spec.banks) {
            return Ok(e.clone());
        }
        let have_base = self.exact(spec.size, spec.ports, 1, spec.banks).is_some();
        if !have_base {
            let m = &self.model;
            let s = spec.size as f64;
            if s < m.min_size as f64 / MAX_EXTRAPOLATION || s > m.max_size as f64 * MAX_EXTRAPOLATION {
                return Err(Error::Cost(format!(
                    "size {} B is more than {}x outside the table range [{}, {}]",
                    spec.size, MAX_EXTRAPOLATION, m.min_size, m.max_size
                )));
            }
        }
        let [area, read, write, leak] = self.base_by_ports(spec.size, spec.banks)[usize::from(spec.ports) - 1];
        let gated = spec.sectors > 1;
        let v = SramCostEntry {
            size_b: spec.size,
            ports: spec.ports,
            sectors: spec.sectors,
            banks: spec.banks,
            area_mm2: if gated { area * PG_AREA_OVERHEAD } else { area },
            read_j: read,
            write_j: write,
            leak_w: leak,
            wake_j: if gated { self.model.wake(spec.size, spec.sectors) } else { 0.0 },
            wake_s: if gated { DEFAULT_WAKE_S } else { 0.0 },
            origin: Some(if have_base { "derived" } else { "model" }.into()),
        };
        if [v.area_mm2, v.read_j, v.write_j, v.leak_w].iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Cost(format!("model produced a non-positive coefficient for {spec:?}")));
        }
        Ok(v)
    }
}

pub fn load_cost_table(path: impl AsRef<Path>) -> Result<CostTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CostTable::from_json_str(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::KIB;

    fn entry(size: u64, ports: u8, sectors: u32, area: f64, e: f64, leak: f64) -> SramCostEntry {
        SramCostEntry {
            size_b: size,
            ports,
            sectors,
            banks: 16,
            area_mm2: area,
            read_j: e,
            write_j: e,
            leak_w: leak,
            wake_j: if sectors > 1 { 1e-11 } else { 0.0 },
            wake_s: if sectors > 1 { DEFAULT_WAKE_S } else { 0.0 },
            origin: None,
        }
    }

    fn dram() -> DramEnergy {
        DramEnergy { read_j: 1e-10, write_j: 1e-10 }
    }

    fn small_table() -> CostTable {
        CostTable::new(
            "32nm",
            dram(),
            vec![
                entry(16 * KIB, 1, 1, 0.08, 4e-12, 2e-4),
                entry(64 * KIB, 1, 1, 0.31, 8e-12, 8e-4),
                entry(256 * KIB, 1, 1, 1.2, 1.6e-11, 3.2e-3),
                entry(64 * KIB, 3, 1, 0.9, 2e-11, 2e-3),
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_hit_is_identity() {
        let t = small_table();
        let e = t.query(&MemorySpec::new(64 * KIB, 1, 1)).unwrap();
        assert_eq!(e, t.entries().iter().find(|e| e.size_b == 64 * KIB && e.ports == 1).unwrap().clone());
    }

    #[test]
    fn fallback_between_neighbours() {
        let t = small_table();
        let lo = t.query(&MemorySpec::new(16 * KIB, 1, 1)).unwrap();
        let mid = t.query(&MemorySpec::new(32 * KIB, 1, 1)).unwrap();
        let hi = t.query(&MemorySpec::new(64 * KIB, 1, 1)).unwrap();
        for (a, b, c) in [
            (lo.area_mm2, mid.area_mm2, hi.area_mm2),
            (lo.read_j, mid.read_j, hi.read_j),
            (lo.leak_w, mid.leak_w, hi.leak_w),
        ] {
            assert!(a <= b && b <= c, "{a} {b} {c}");
        }
    }

    #[test]
    fn gated_variant_costs_more_area() {
        let t = small_table();
        let base = t.query(&MemorySpec::new(64 * KIB, 1, 1)).unwrap();
        let pg = t.query(&MemorySpec::new(64 * KIB, 8, 1)).unwrap();
        assert!((pg.area_mm2 / base.area_mm2 - PG_AREA_OVERHEAD).abs() < 1e-12);
        assert_eq!(pg.leak_w, base.leak_w);
        assert_eq!(pg.read_j, base.read_j);
        assert!(pg.wake_j > 0.0);
    }

    #[test]
    fn ports_monotone() {
        let t = small_table();
        for size in [16 * KIB, 64 * KIB, 128 * KIB, 1024 * KIB] {
            let q: Vec<_> = (1..=3).map(|p| t.query(&MemorySpec::new(size, 1, p)).unwrap()).collect();
            for w in q.windows(2) {
                assert!(w[0].area_mm2 <= w[1].area_mm2);
                assert!(w[0].read_j <= w[1].read_j);
                assert!(w[0].leak_w <= w[1].leak_w);
            }
        }
    }

    #[test]
    fn refuses_far_extrapolation() {
        let t = small_table();
        assert!(t.query(&MemorySpec::new(1 << 30, 1, 1)).is_err());
        assert!(t.query(&MemorySpec::new(16 * KIB * 64, 1, 1)).is_ok());
    }

    #[test]
    fn validation_errors() {
        assert!(CostTable::new("x", dram(), vec![]).is_err());
        assert!(CostTable::new("x", dram(), vec![entry(KIB, 1, 1, 0.0, 1e-12, 1e-6)]).is_err());
        assert!(CostTable::new("x", dram(), vec![entry(KIB, 1, 1, 1.0, 1e-12, 1e-6); 2]).is_err());
        assert!(CostTable::new("x", dram(), vec![entry(KIB, 1, 1, 1.0, 1e-12, 1e-6)]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let t = small_table();
        let back = CostTable::from_json_str(&t.to_json(), Path::new("x")).unwrap();
        assert_eq!(t, back);
        for size in [16 * KIB, 48 * KIB, 512 * KIB] {
            let s = MemorySpec::new(size, 4, 2);
            assert_eq!(t.query(&s).unwrap(), back.query(&s).unwrap());
        }
    }
}
