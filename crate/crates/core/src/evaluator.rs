//! Pricing one memory organization against one workload.

use serde::{Deserialize, Serialize};

use crate::costmodel::{CostTable, SramCostEntry};
use crate::memconfig::{Mem, MemoryOrganization};
use crate::workload::{derive_offchip, PerStream, Stream, WorkloadTrace};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpAllocation {
    /// Bytes of each stream held by its dedicated memory.
    pub dedicated: PerStream<u64>,
    /// Bytes of each stream spilled to the shared memory.
    pub overflow: PerStream<u64>,
}

impl OpAllocation {
    pub fn shared_bytes(&self) -> u64 {
        self.overflow.data + self.overflow.weight + self.overflow.acc
    }

    /// Bytes resident in memory `m` during this operation.
    pub fn placed(&self, m: Mem) -> u64 {
        match m {
            Mem::Shared => self.shared_bytes(),
            Mem::Data => self.dedicated.data,
            Mem::Weight => self.dedicated.weight,
            Mem::Acc => self.dedicated.acc,
        }
    }

    pub fn streams_in_shared(&self) -> u8 {
        Stream::ALL.iter().filter(|&&s| self.overflow.get(s) > 0).count() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub per_op: Vec<OpAllocation>,
}

impl AllocationPlan {
    pub fn required_shared_ports(&self) -> u8 {
        self.per_op.iter().map(OpAllocation::streams_in_shared).max().unwrap_or(0)
    }
}

/// Dedicated-first placement: each stream fills its own memory, the rest
/// goes to the shared one.
pub fn allocate(trace: &WorkloadTrace, org: &MemoryOrganization) -> Result<AllocationPlan> {
    let shared_cap = org.spec(Mem::Shared).size;
    let mut per_op = Vec::with_capacity(trace.operations.len());
    for op in &trace.operations {
        let mut a = OpAllocation { dedicated: PerStream::default(), overflow: PerStream::default() };
        for s in Stream::ALL {
            let u = op.usage.get(s);
            let placed = u.min(org.spec(Mem::dedicated(s)).size);
            a.dedicated.set(s, placed);
            a.overflow.set(s, u - placed);
        }
        if a.shared_bytes() > shared_cap {
            return Err(Error::validation(format!(
                "{org}: operation '{}' needs {} B of shared memory, {} B available",
                op.name,
                a.shared_bytes(),
                shared_cap
            )));
        }
        per_op.push(a);
    }
    Ok(AllocationPlan { per_op })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SectorSchedule {
    /// Sector groups switched on, per operation and memory slot.
    pub active: Vec<[u32; 4]>,
    /// OFF to ON transitions on entry to each operation. Everything starts
    /// OFF, so the first operation pays for its initial power-on.
    pub wakeups: Vec<[u32; 4]>,
}

impl SectorSchedule {
    pub fn total_wakeups(&self, m: Mem) -> u64 {
        self.wakeups.iter().map(|w| u64::from(w[m.index()])).sum()
    }
}

pub fn schedule_sectors(plan: &AllocationPlan, org: &MemoryOrganization) -> Result<SectorSchedule> {
    let mut active = Vec::with_capacity(plan.per_op.len());
    let mut wakeups = Vec::with_capacity(plan.per_op.len());
    let mut prev = [0u32; 4];
    for (i, a) in plan.per_op.iter().enumerate() {
        let mut now = [0u32; 4];
        for (m, spec) in org.present() {
            now[m.index()] = if org.power_gated {
                let cap = spec.sector_capacity();
                let placed = a.placed(m);
                let n = placed.div_ceil(cap.max(1));
                if n > u64::from(spec.sectors) {
                    return Err(Error::validation(format!(
                        "{org}: operation {i} places {placed} B in {} with {} sectors of {cap} B",
                        m.name(),
                        spec.sectors
                    )));
                }
                n as u32
            } else {
                1
            };
        }
        let w = std::array::from_fn(|k| if org.power_gated { now[k].saturating_sub(prev[k]) } else { 0 });
        active.push(now);
        wakeups.push(w);
        prev = now;
    }
    Ok(SectorSchedule { active, wakeups })
}

/// Reads and writes each memory serves for one operation. Accesses of a
/// stream are split between its dedicated and the shared memory in
/// proportion to the bytes placed in each.
fn op_traffic(trace: &WorkloadTrace, i: usize, a: &OpAllocation, org: &MemoryOrganization) -> [(f64, f64); 4] {
    let op = &trace.operations[i];
    let mut t = [(0.0, 0.0); 4];
    for s in Stream::ALL {
        let u = op.usage.get(s);
        let (rd, wr) = (op.reads.get(s) as f64, op.writes.get(s) as f64);
        let ded = Mem::dedicated(s);
        let (f_ded, f_sh) = if u == 0 {
            if org.spec(ded).is_present() {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            }
        } else {
            (a.dedicated.get(s) as f64 / u as f64, a.overflow.get(s) as f64 / u as f64)
        };
        if f_ded > 0.0 {
            t[ded.index()].0 += rd * f_ded;
            t[ded.index()].1 += wr * f_ded;
        }
        if f_sh > 0.0 {
            t[Mem::Shared.index()].0 += rd * f_sh;
            t[Mem::Shared.index()].1 += wr * f_sh;
        }
    }
    t
}

/// Cost-independent activity of each memory over the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MemoryActivity {
    pub reads: f64,
    pub writes: f64,
    /// Seconds weighted by the fraction of sector groups switched on.
    pub on_seconds: f64,
    pub wakeups: u64,
}

/// Per-slot activity, without touching the cost table.
pub fn memory_activity(trace: &WorkloadTrace, org: &MemoryOrganization) -> Result<[MemoryActivity; 4]> {
    let plan = allocate(trace, org)?;
    let sched = schedule_sectors(&plan, org)?;
    let mut out = [MemoryActivity::default(); 4];
    for (i, a) in plan.per_op.iter().enumerate() {
        let t = op_traffic(trace, i, a, org);
        let secs = trace.operations[i].cycles as f64 / trace.clock_hz;
        for (m, spec) in org.present() {
            let k = m.index();
            out[k].reads += t[k].0;
            out[k].writes += t[k].1;
            out[k].on_seconds += f64::from(sched.active[i][k]) / f64::from(spec.sectors) * secs;
            out[k].wakeups += u64::from(sched.wakeups[i][k]);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBreakdown {
    pub memory: Mem,
    pub size_b: u64,
    pub sectors: u32,
    pub ports: u8,
    pub area_mm2: f64,
    pub dynamic_j: f64,
    pub static_j: f64,
    pub wakeup_j: f64,
    pub wake_per_transition_j: f64,
    pub reads: f64,
    pub writes: f64,
    pub wakeups: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpBreakdown {
    pub name: String,
    pub cycles: u64,
    pub dynamic_j: f64,
    pub static_j: f64,
    pub wakeup_j: f64,
    pub offchip_j: f64,
    /// Bytes resident per slot (shared, data, weight, acc).
    pub placed_b: [u64; 4],
    /// Share of each slot's accesses: reads then writes.
    pub reads: [f64; 4],
    pub writes: [f64; 4],
    pub active_sectors: [u32; 4],
    pub wakeups: [u32; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub config_id: u64,
    pub organization: MemoryOrganization,
    pub family: String,
    pub total_area_mm2: f64,
    pub dynamic_j: f64,
    pub static_j: f64,
    pub wakeup_j: f64,
    pub offchip_j: f64,
    pub required_shared_ports: u8,
    pub memories: Vec<MemoryBreakdown>,
    pub operations: Vec<OpBreakdown>,
    pub allocation: AllocationPlan,
}

impl EvaluationResult {
    /// Scratchpad energy: dynamic + static + wakeup. Off-chip energy is the
    /// same for every organization and is kept apart.
    pub fn total_energy_j(&self) -> f64 {
        self.dynamic_j + self.static_j + self.wakeup_j
    }

    pub fn memory(&self, m: Mem) -> Option<&MemoryBreakdown> {
        self.memories.iter().find(|b| b.memory == m)
    }

    pub fn summary(&self) -> EvalSummary {
        EvalSummary {
            config_id: self.config_id,
            organization: self.organization,
            area_mm2: self.total_area_mm2,
            energy_j: self.total_energy_j(),
            dynamic_j: self.dynamic_j,
            static_j: self.static_j,
            wakeup_j: self.wakeup_j,
            required_shared_ports: self.required_shared_ports,
        }
    }
}

/// The numbers exploration keeps for every configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub config_id: u64,
    pub organization: MemoryOrganization,
    pub area_mm2: f64,
    pub energy_j: f64,
    pub dynamic_j: f64,
    pub static_j: f64,
    pub wakeup_j: f64,
    pub required_shared_ports: u8,
}

pub fn evaluate(
    trace: &WorkloadTrace,
    org: &MemoryOrganization,
    table: &CostTable,
    config_id: u64,
) -> Result<EvaluationResult> {
    let tag = |e: Error| Error::Evaluation { config_id, msg: e.to_string() };
    let plan = allocate(trace, org).map_err(tag)?;
    let sched = schedule_sectors(&plan, org).map_err(tag)?;
    let mut costs: [Option<SramCostEntry>; 4] = Default::default();
    for (m, spec) in org.present() {
        costs[m.index()] = Some(table.query(spec).map_err(tag)?);
    }
    let offchip = derive_offchip(trace);

    let mut mems: Vec<MemoryBreakdown> = org
        .present()
        .map(|(m, spec)| MemoryBreakdown {
            memory: m,
            size_b: spec.size,
            sectors: spec.sectors,
            ports: spec.ports,
            area_mm2: costs[m.index()].as_ref().map_or(0.0, |c| c.area_mm2),
            dynamic_j: 0.0,
            static_j: 0.0,
            wakeup_j: 0.0,
            wake_per_transition_j: costs[m.index()].as_ref().map_or(0.0, |c| c.wake_j),
            reads: 0.0,
            writes: 0.0,
            wakeups: 0,
        })
        .collect();

    let mut ops = Vec::with_capacity(trace.operations.len());
    for (i, op) in trace.operations.iter().enumerate() {
        let a = &plan.per_op[i];
        let t = op_traffic(trace, i, a, org);
        let secs = op.cycles as f64 / trace.clock_hz;
        let mut ob = OpBreakdown {
            name: op.name.clone(),
            cycles: op.cycles,
            dynamic_j: 0.0,
            static_j: 0.0,
            wakeup_j: 0.0,
            offchip_j: offchip.per_op[i].reads_off as f64 * table.dram.read_j
                + offchip.per_op[i].writes_off as f64 * table.dram.write_j,
            placed_b: std::array::from_fn(|k| a.placed(Mem::ALL[k])),
            reads: std::array::from_fn(|k| t[k].0),
            writes: std::array::from_fn(|k| t[k].1),
            active_sectors: sched.active[i],
            wakeups: sched.wakeups[i],
        };
        for mb in mems.iter_mut() {
            let k = mb.memory.index();
            let c = costs[k].as_ref().expect("present memory has a cost");
            let dynamic = t[k].0 * c.read_j + t[k].1 * c.write_j;
            let stat = c.leak_w * (f64::from(sched.active[i][k]) / f64::from(mb.sectors)) * secs;
            let wake = f64::from(sched.wakeups[i][k]) * c.wake_j;
            mb.dynamic_j += dynamic;
            mb.static_j += stat;
            mb.wakeup_j += wake;
            mb.reads += t[k].0;
            mb.writes += t[k].1;
            mb.wakeups += u64::from(sched.wakeups[i][k]);
            ob.dynamic_j += dynamic;
            ob.static_j += stat;
            ob.wakeup_j += wake;
        }
        ops.push(ob);
    }

    let sum = |f: fn(&MemoryBreakdown) -> f64| mems.iter().map(f).sum::<f64>();
    Ok(EvaluationResult {
        config_id,
        organization: *org,
        family: org.family().to_string(),
        total_area_mm2: sum(|m| m.area_mm2),
        dynamic_j: sum(|m| m.dynamic_j),
        static_j: sum(|m| m.static_j),
        wakeup_j: sum(|m| m.wakeup_j),
        offchip_j: ops.iter().map(|o| o.offchip_j).sum(),
        required_shared_ports: plan.required_shared_ports(),
        memories: mems,
        operations: ops,
        allocation: plan,
    })
}
