//! Per-operation workload traces: loading, validation, peak usage and
//! off-chip traffic.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Plumbing bound on any single usage value.
pub const MAX_USAGE_BYTES: u64 = 1 << 40;

pub const DEFAULT_CLOCK_HZ: f64 = 250e6;

/// The three on-chip value streams of the accelerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stream {
    Data,
    Weight,
    Acc,
}

impl Stream {
    pub const ALL: [Stream; 3] = [Stream::Data, Stream::Weight, Stream::Acc];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stream::Data => "data",
            Stream::Weight => "weight",
            Stream::Acc => "acc",
        }
    }
}

/// One value per stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerStream<T> {
    pub data: T,
    pub weight: T,
    pub acc: T,
}

impl<T: Copy> PerStream<T> {
    pub fn new(data: T, weight: T, acc: T) -> Self {
        PerStream { data, weight, acc }
    }

    pub fn get(&self, s: Stream) -> T {
        match s {
            Stream::Data => self.data,
            Stream::Weight => self.weight,
            Stream::Acc => self.acc,
        }
    }

    pub fn set(&mut self, s: Stream, v: T) {
        match s {
            Stream::Data => self.data = v,
            Stream::Weight => self.weight = v,
            Stream::Acc => self.acc = v,
        }
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.data, self.weight, self.acc]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperationProfile {
    pub name: String,
    /// Live bytes per stream (D_i, W_i, A_i).
    pub usage: PerStream<u64>,
    pub reads: PerStream<u64>,
    pub writes: PerStream<u64>,
    pub cycles: u64,
    #[serde(default)]
    pub routing_phase: bool,
}

impl OperationProfile {
    pub fn total_usage(&self) -> u64 {
        self.usage.data + self.usage.weight + self.usage.acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadTrace {
    pub network: String,
    pub clock_hz: f64,
    pub operations: Vec<OperationProfile>,
    /// Free-form provenance notes, e.g. estimator assumptions.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

// On-disk form. Counts are read as signed so that a negative value is
// reported as a validation error instead of a type error.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrace {
    network: String,
    #[serde(default)]
    clock_hz: Option<f64>,
    operations: Vec<RawOp>,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOp {
    name: String,
    usage: PerStream<i64>,
    #[serde(default)]
    reads: PerStream<i64>,
    #[serde(default)]
    writes: PerStream<i64>,
    cycles: i64,
    #[serde(default)]
    routing_phase: bool,
}

fn non_negative(op: &str, field: &str, v: i64) -> Result<u64> {
    u64::try_from(v).map_err(|_| Error::validation(format!("operation '{op}': {field} is negative ({v})")))
}

fn per_stream(op: &str, field: &str, v: PerStream<i64>) -> Result<PerStream<u64>> {
    Ok(PerStream {
        data: non_negative(op, &format!("{field}.data"), v.data)?,
        weight: non_negative(op, &format!("{field}.weight"), v.weight)?,
        acc: non_negative(op, &format!("{field}.acc"), v.acc)?,
    })
}

impl WorkloadTrace {
    pub fn new(network: impl Into<String>, clock_hz: f64, operations: Vec<OperationProfile>) -> Result<Self> {
        let t = WorkloadTrace {
            network: network.into(),
            clock_hz,
            operations,
            metadata: BTreeMap::new(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.operations.is_empty() {
            return Err(Error::validation("trace has no operations"));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::validation(format!("clock_hz must be positive, got {}", self.clock_hz)));
        }
        let mut seen = HashSet::new();
        for op in &self.operations {
            if !seen.insert(op.name.as_str()) {
                return Err(Error::validation(format!("duplicate operation name '{}'", op.name)));
            }
            for s in Stream::ALL {
                if op.usage.get(s) > MAX_USAGE_BYTES {
                    return Err(Error::validation(format!(
                        "operation '{}': {} usage exceeds 2^40 bytes",
                        op.name,
                        s.name()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str, origin: &Path) -> Result<Self> {
        let raw: RawTrace = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            msg: e.to_string(),
        })?;
        let mut ops = Vec::with_capacity(raw.operations.len());
        for o in raw.operations {
            ops.push(OperationProfile {
                usage: per_stream(&o.name, "usage", o.usage)?,
                reads: per_stream(&o.name, "reads", o.reads)?,
                writes: per_stream(&o.name, "writes", o.writes)?,
                cycles: non_negative(&o.name, "cycles", o.cycles)?,
                routing_phase: o.routing_phase,
                name: o.name,
            });
        }
        let t = WorkloadTrace {
            network: raw.network,
            clock_hz: raw.clock_hz.unwrap_or(DEFAULT_CLOCK_HZ),
            operations: ops,
            metadata: raw.metadata,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialises")
    }

    /// Total run time in seconds.
    pub fn duration_s(&self) -> f64 {
        self.operations.iter().map(|o| o.cycles as f64).sum::<f64>() / self.clock_hz
    }
}

pub fn load_workload(path: impl AsRef<Path>) -> Result<WorkloadTrace> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WorkloadTrace::from_json_str(&text, path)
}

/// Element-wise usage maxima.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PeakUsage {
    pub max_data: u64,
    pub max_weight: u64,
    pub max_acc: u64,
    pub max_sum: u64,
}

pub fn peak_usage(trace: &WorkloadTrace) -> PeakUsage {
    let ops = &trace.operations;
    PeakUsage {
        max_data: ops.iter().map(|o| o.usage.data).max().unwrap_or(0),
        max_weight: ops.iter().map(|o| o.usage.weight).max().unwrap_or(0),
        max_acc: ops.iter().map(|o| o.usage.acc).max().unwrap_or(0),
        max_sum: ops.iter().map(|o| o.total_usage()).max().unwrap_or(0),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OffChipAccesses {
    pub reads_off: u64,
    pub writes_off: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffChipProfile {
    pub per_op: Vec<OffChipAccesses>,
}

impl OffChipProfile {
    pub fn total_reads(&self) -> u64 {
        self.per_op.iter().map(|a| a.reads_off).sum()
    }
    pub fn total_writes(&self) -> u64 {
        self.per_op.iter().map(|a| a.writes_off).sum()
    }
}

/// Off-chip traffic implied by the on-chip trace.
///
/// Everything written into the data and weight memories was fetched from
/// DRAM, and every result is written back once and read again as the next
/// operation's input. Inside a routing block all values stay on chip: only
/// the first op of the block reads and only the last one writes. The very
/// last operation of the trace writes back its accumulator contents.
pub fn derive_offchip(trace: &WorkloadTrace) -> OffChipProfile {
    let ops = &trace.operations;
    let n = ops.len();
    let per_op = (0..n)
        .map(|i| {
            let op = &ops[i];
            let routing = op.routing_phase;
            let first_in_block = !routing || i == 0 || !ops[i - 1].routing_phase;
            let last_in_block = !routing || i + 1 == n || !ops[i + 1].routing_phase;
            let reads_off = if first_in_block { op.writes.data + op.writes.weight } else { 0 };
            let writes_off = if !last_in_block {
                0
            } else if i + 1 < n {
                ops[i + 1].reads.data
            } else {
                op.usage.acc
            };
            OffChipAccesses { reads_off, writes_off }
        })
        .collect();
    OffChipProfile { per_op }
}
