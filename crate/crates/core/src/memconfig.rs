//! Memory organizations and their enumeration.
//!
//! Sizes come from a fixed pool: every power of two from 1 kiB to 2^30 kiB
//! plus four odd sizes (25, 108, 450 and 460 kiB). A requested size is always
//! rounded up to the smallest pool value that can hold it.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::units::KIB;
use crate::workload::{peak_usage, Stream, WorkloadTrace};
use crate::{Error, Result};

pub const DEFAULT_BANKS: u32 = 16;
const EXTRA_POOL_KIB: [u64; 4] = [25, 108, 450, 460];

/// Every pool value in bytes, ascending.
pub fn pool() -> &'static [u64] {
    static POOL: OnceLock<Vec<u64>> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut v: Vec<u64> = (0..=30).map(|k| (1u64 << k) * KIB).collect();
        v.extend(EXTRA_POOL_KIB.iter().map(|k| k * KIB));
        v.sort_unstable();
        v
    })
}

/// Smallest pool value `>= bytes`, or `None` above the pool.
pub fn round_up_pool(bytes: u64) -> Option<u64> {
    let p = pool();
    p.get(p.partition_point(|&v| v < bytes)).copied()
}

fn round_up_or_err(bytes: u64) -> Result<u64> {
    round_up_pool(bytes)
        .ok_or_else(|| Error::validation(format!("{bytes} bytes exceed the largest pool size")))
}

/// Pool values `v >= lo`, truncated at the first value that covers `hi`.
pub fn size_pool(lo: u64, hi: u64) -> Result<Vec<u64>> {
    if lo > hi {
        return Err(Error::validation(format!("size_pool: lo {lo} > hi {hi}")));
    }
    let cap = round_up_pool(hi).unwrap_or(u64::MAX);
    Ok(pool().iter().copied().filter(|&v| v >= lo && v <= cap).collect())
}

/// Admissible sector counts: powers of two in `[2, size/128]`.
pub fn sigma(size: u64) -> Result<Vec<u32>> {
    if size == 0 {
        return Err(Error::validation("sigma of a zero-sized memory"));
    }
    let limit = size / 128;
    Ok((1..32).map(|k| 1u32 << k).take_while(|&s| u64::from(s) <= limit).collect())
}

/// Shared-memory size of the SMP organization.
pub fn size_smp(trace: &WorkloadTrace) -> Result<u64> {
    round_up_or_err(peak_usage(trace).max_sum)
}

/// (data, weight, acc) sizes of the SEP organization.
pub fn size_sep(trace: &WorkloadTrace) -> Result<(u64, u64, u64)> {
    let p = peak_usage(trace);
    Ok((round_up_or_err(p.max_data)?, round_up_or_err(p.max_weight)?, round_up_or_err(p.max_acc)?))
}

/// Raw bytes that must spill to shared memory for the worst operation.
pub fn shared_demand(trace: &WorkloadTrace, dedicated: [u64; 3]) -> u64 {
    trace
        .operations
        .iter()
        .map(|op| {
            Stream::ALL
                .iter()
                .map(|&s| op.usage.get(s).saturating_sub(dedicated[s.index()]))
                .sum::<u64>()
        })
        .max()
        .unwrap_or(0)
}

/// Number of streams that overflow into shared memory at the same time,
/// maximised over operations. A shared memory needs this many ports.
pub fn required_shared_ports(trace: &WorkloadTrace, dedicated: [u64; 3]) -> u8 {
    trace
        .operations
        .iter()
        .map(|op| Stream::ALL.iter().filter(|&&s| op.usage.get(s) > dedicated[s.index()]).count() as u8)
        .max()
        .unwrap_or(0)
}

/// Hybrid size tuples `[shared, data, weight, acc]`.
///
/// Dedicated sizes run over the pool values spanning each stream's
/// `[min, max]` usage; the shared memory is the smallest pool value that
/// absorbs the worst-case overflow. A zero shared size marks the tuple that
/// degenerates to SEP.
pub fn enumerate_hybrid_sizes(trace: &WorkloadTrace) -> Result<Vec<[u64; 4]>> {
    let ops = &trace.operations;
    let range = |s: Stream| -> Result<Vec<u64>> {
        let lo = ops.iter().map(|o| o.usage.get(s)).min().unwrap_or(0);
        let hi = ops.iter().map(|o| o.usage.get(s)).max().unwrap_or(0);
        size_pool(lo, hi)
    };
    let (ds, ws, as_) = (range(Stream::Data)?, range(Stream::Weight)?, range(Stream::Acc)?);
    let mut out = Vec::with_capacity(ds.len() * ws.len() * as_.len());
    for &d in &ds {
        for &w in &ws {
            for &a in &as_ {
                let raw = shared_demand(trace, [d, w, a]);
                let s = if raw == 0 { 0 } else { round_up_or_err(raw)? };
                out.push([s, d, w, a]);
            }
        }
    }
    Ok(out)
}

/// Sector tuples `[shared, data, weight, acc]` for one size tuple.
/// Absent memories (size 0) get 0; without power gating every present
/// memory has a single sector.
pub fn enumerate_sector_counts(sizes: [u64; 4], power_gated: bool) -> Result<Vec<[u32; 4]>> {
    let mut axes: Vec<Vec<u32>> = Vec::with_capacity(4);
    for &sz in &sizes {
        axes.push(if sz == 0 {
            vec![0]
        } else if power_gated {
            sigma(sz)?
        } else {
            vec![1]
        });
    }
    let mut out = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                for &d in &axes[3] {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrgKind {
    #[serde(rename = "SMP")]
    Smp,
    #[serde(rename = "SEP")]
    Sep,
    #[serde(rename = "HY")]
    Hy,
}

impl OrgKind {
    pub const ALL: [OrgKind; 3] = [OrgKind::Smp, OrgKind::Sep, OrgKind::Hy];

    pub fn label(self) -> &'static str {
        match self {
            OrgKind::Smp => "SMP",
            OrgKind::Sep => "SEP",
            OrgKind::Hy => "HY",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "smp" => Ok(OrgKind::Smp),
            "sep" => Ok(OrgKind::Sep),
            "hy" => Ok(OrgKind::Hy),
            other => Err(Error::Usage(format!("unknown family '{other}' (smp, sep, hy)"))),
        }
    }
}

/// The four memory slots of an organization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mem {
    Shared,
    Data,
    Weight,
    Acc,
}

impl Mem {
    pub const ALL: [Mem; 4] = [Mem::Shared, Mem::Data, Mem::Weight, Mem::Acc];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Mem::Shared => "shared",
            Mem::Data => "data",
            Mem::Weight => "weight",
            Mem::Acc => "acc",
        }
    }

    pub fn dedicated(s: Stream) -> Mem {
        match s {
            Stream::Data => Mem::Data,
            Stream::Weight => Mem::Weight,
            Stream::Acc => Mem::Acc,
        }
    }

    pub fn parse(text: &str) -> Option<Mem> {
        Mem::ALL.into_iter().find(|m| m.name() == text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MemorySpec {
    pub size: u64,
    pub sectors: u32,
    pub banks: u32,
    pub ports: u8,
}

impl MemorySpec {
    pub const ABSENT: MemorySpec = MemorySpec { size: 0, sectors: 0, banks: 0, ports: 0 };

    pub fn new(size: u64, sectors: u32, ports: u8) -> Self {
        MemorySpec { size, sectors, banks: DEFAULT_BANKS, ports }
    }

    pub fn is_present(&self) -> bool {
        self.size > 0
    }

    /// Bytes behind one sleep signal.
    pub fn sector_capacity(&self) -> u64 {
        if self.sectors == 0 {
            0
        } else {
            self.size / u64::from(self.sectors)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MemoryOrganization {
    pub kind: OrgKind,
    pub mems: [MemorySpec; 4],
    pub power_gated: bool,
    /// Set when the organization was produced under a shared-port limit.
    pub port_limit: Option<u8>,
}

impl MemoryOrganization {
    pub fn spec(&self, m: Mem) -> &MemorySpec {
        &self.mems[m.index()]
    }

    pub fn present(&self) -> impl Iterator<Item = (Mem, &MemorySpec)> + '_ {
        Mem::ALL.into_iter().map(|m| (m, self.spec(m))).filter(|(_, s)| s.is_present())
    }

    pub fn family(&self) -> Family {
        Family { kind: self.kind, power_gated: self.power_gated, port_limit: self.port_limit }
    }

    /// Checks the structural invariants of the organization kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::validation(format!("{}: {msg}", self.family())));
        let shared = self.spec(Mem::Shared);
        let dedicated = [Mem::Data, Mem::Weight, Mem::Acc].map(|m| *self.spec(m));
        match self.kind {
            OrgKind::Smp => {
                if !shared.is_present() || dedicated.iter().any(MemorySpec::is_present) {
                    return bad("SMP has exactly one shared memory");
                }
            }
            OrgKind::Sep => {
                if shared.is_present() || !dedicated.iter().all(MemorySpec::is_present) {
                    return bad("SEP has three dedicated memories and no shared one");
                }
            }
            OrgKind::Hy => {
                if !shared.is_present() || !dedicated.iter().any(MemorySpec::is_present) {
                    return bad("HY needs a shared memory and at least one dedicated memory");
                }
            }
        }
        for d in dedicated.iter().filter(|d| d.is_present()) {
            if d.ports != 1 {
                return bad("dedicated memories are single-port");
            }
        }
        for (_, s) in self.present() {
            if !(1..=3).contains(&s.ports) {
                return bad("ports must be 1, 2 or 3");
            }
            if self.power_gated {
                if !sigma(s.size)?.contains(&s.sectors) {
                    return bad("sector count outside sigma(size)");
                }
            } else if s.sectors != 1 {
                return bad("non-gated memories have one sector");
            }
        }
        Ok(())
    }
}

/// Family label such as `SEP`, `HY-PG` or `HY-PG-PS1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Family {
    pub kind: OrgKind,
    pub power_gated: bool,
    pub port_limit: Option<u8>,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.label())?;
        if self.power_gated {
            f.write_str("-PG")?;
        }
        if let Some(p) = self.port_limit {
            write!(f, "-PS{p}")?;
        }
        Ok(())
    }
}

impl fmt::Display for MemoryOrganization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.family())?;
        let mut first = true;
        for (m, s) in self.present() {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{} {}", m.name(), crate::units::format_size(s.size))?;
            if self.power_gated {
                write!(f, "/{}", s.sectors)?;
            }
            if s.ports > 1 {
                write!(f, " {}p", s.ports)?;
            }
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PgMode {
    Both,
    OnlyPg,
    OnlyNonPg,
}

impl PgMode {
    fn variants(self) -> &'static [bool] {
        match self {
            PgMode::Both => &[false, true],
            PgMode::OnlyPg => &[true],
            PgMode::OnlyNonPg => &[false],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationConstraints {
    pub max_shared_size: Option<u64>,
    pub shared_ports: Option<u8>,
    pub families: Vec<OrgKind>,
    pub power_gating: PgMode,
    pub banks: u32,
}

impl Default for ExplorationConstraints {
    fn default() -> Self {
        ExplorationConstraints {
            max_shared_size: None,
            shared_ports: None,
            families: OrgKind::ALL.to_vec(),
            power_gating: PgMode::Both,
            banks: DEFAULT_BANKS,
        }
    }
}

impl ExplorationConstraints {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.shared_ports {
            if !(1..=3).contains(&p) {
                return Err(Error::validation(format!("shared ports must be 1, 2 or 3, got {p}")));
            }
        }
        if self.banks == 0 {
            return Err(Error::validation("banks must be positive"));
        }
        Ok(())
    }

    fn wants(&self, k: OrgKind) -> bool {
        self.families.contains(&k)
    }
}

/// One size choice before sector expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeCandidate {
    pub kind: OrgKind,
    pub sizes: [u64; 4],
    pub shared_ports: u8,
}

/// Size tuples admitted under `c`, in emission order (SMP, SEP, HY; sizes
/// ascending). With a port limit, a shared memory gets exactly the number of
/// ports its overflow pattern needs and is dropped if that exceeds the limit.
pub fn size_candidates(trace: &WorkloadTrace, c: &ExplorationConstraints) -> Result<Vec<SizeCandidate>> {
    c.validate()?;
    let mut out = Vec::new();
    let shared_ok = |size: u64, dedicated: [u64; 3]| -> Option<u8> {
        if c.max_shared_size.is_some_and(|m| size > m) {
            return None;
        }
        match c.shared_ports {
            None => Some(3),
            Some(limit) => {
                let need = required_shared_ports(trace, dedicated).max(1);
                (need <= limit).then_some(need)
            }
        }
    };
    if c.wants(OrgKind::Smp) {
        let s = size_smp(trace)?;
        if let Some(p) = shared_ok(s, [0; 3]) {
            out.push(SizeCandidate { kind: OrgKind::Smp, sizes: [s, 0, 0, 0], shared_ports: p });
        }
    }
    if c.wants(OrgKind::Sep) {
        let (d, w, a) = size_sep(trace)?;
        out.push(SizeCandidate { kind: OrgKind::Sep, sizes: [0, d, w, a], shared_ports: 0 });
    }
    if c.wants(OrgKind::Hy) {
        for t in enumerate_hybrid_sizes(trace)? {
            // the all-maxima tuple needs no shared memory: it is the SEP point
            if t[0] == 0 {
                continue;
            }
            if let Some(p) = shared_ok(t[0], [t[1], t[2], t[3]]) {
                out.push(SizeCandidate { kind: OrgKind::Hy, sizes: t, shared_ports: p });
            }
        }
    }
    Ok(out)
}

fn build_org(cand: &SizeCandidate, sectors: [u32; 4], pg: bool, c: &ExplorationConstraints) -> MemoryOrganization {
    let mut mems = [MemorySpec::ABSENT; 4];
    for m in Mem::ALL {
        let i = m.index();
        if cand.sizes[i] > 0 {
            let ports = if m == Mem::Shared { cand.shared_ports } else { 1 };
            mems[i] = MemorySpec { size: cand.sizes[i], sectors: sectors[i], banks: c.banks, ports };
        }
    }
    let port_limit = if cand.kind == OrgKind::Sep { None } else { c.shared_ports };
    MemoryOrganization { kind: cand.kind, mems, power_gated: pg, port_limit }
}

/// Every organization admitted by `c`, in deterministic order. The position
/// in this stream is the configuration id.
pub fn enumerate_all(
    trace: &WorkloadTrace,
    c: &ExplorationConstraints,
) -> Result<impl Iterator<Item = MemoryOrganization>> {
    let cands = size_candidates(trace, c)?;
    let c = c.clone();
    let mut expanded = Vec::with_capacity(cands.len());
    for cand in cands {
        for &pg in c.power_gating.variants() {
            expanded.push((cand, pg, enumerate_sector_counts(cand.sizes, pg)?));
        }
    }
    Ok(expanded
        .into_iter()
        .flat_map(move |(cand, pg, tuples)| {
            let c = c.clone();
            tuples.into_iter().map(move |sc| build_org(&cand, sc, pg, &c))
        }))
}

/// Size of the stream `enumerate_all` would produce, without building it.
pub fn count_all(trace: &WorkloadTrace, c: &ExplorationConstraints) -> Result<u64> {
    let mut n = 0u64;
    for cand in size_candidates(trace, c)? {
        for &pg in c.power_gating.variants() {
            let mut prod = 1u64;
            if pg {
                for &sz in cand.sizes.iter().filter(|&&s| s > 0) {
                    prod *= sigma(sz)?.len() as u64;
                }
            }
            n += prod;
        }
    }
    Ok(n)
}
