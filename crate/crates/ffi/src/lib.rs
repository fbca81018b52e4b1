//! C ABI over the exploration engine.
//!
//! Objects cross the boundary as opaque pointers created by `*_load` /
//! `spm_explore` and released with the matching `*_free`. Every call returns
//! an [`SpmStatus`]; on failure the message is kept per thread and can be
//! copied out with [`spm_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use spm_dse::costmodel::{load_cost_table, CostTable};
use spm_dse::dse::{explore, pareto_front, ExplorationConstraints, PgMode};
use spm_dse::evaluator::EvalSummary;
use spm_dse::memconfig::{count_all, size_sep, size_smp, Mem, OrgKind};
use spm_dse::workload::{load_workload, peak_usage, WorkloadTrace};
use spm_dse::Error;

/// Result of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmStatus {
    Ok = 0,
    NullArgument = 1,
    Parse = 2,
    Validation = 3,
    Evaluation = 4,
    Io = 5,
    Usage = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// Which power-gating variants to enumerate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpmPgMode {
    Both = 0,
    OnlyGated = 1,
    OnlyUngated = 2,
}

pub const SPM_FAMILY_SMP: u32 = 1;
pub const SPM_FAMILY_SEP: u32 = 2;
pub const SPM_FAMILY_HY: u32 = 4;

/// Exploration limits. Zero means "no limit" / "default" in every field.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpmConstraints {
    pub max_shared_size: u64,
    pub shared_ports: u8,
    /// Bit set of `SPM_FAMILY_*`.
    pub families: u32,
    pub power_gating: SpmPgMode,
    pub banks: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmPeakUsage {
    pub max_data: u64,
    pub max_weight: u64,
    pub max_acc: u64,
    pub max_sum: u64,
}

/// One evaluated configuration. Arrays are indexed shared, data, weight, acc;
/// absent memories have size 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SpmResult {
    pub config_id: u64,
    /// 0 SMP, 1 SEP, 2 HY.
    pub kind: u32,
    pub power_gated: bool,
    pub size_b: [u64; 4],
    pub sectors: [u32; 4],
    pub ports: [u8; 4],
    pub area_mm2: f64,
    pub energy_j: f64,
    pub dynamic_j: f64,
    pub static_j: f64,
    pub wakeup_j: f64,
    pub required_shared_ports: u8,
}

/// Loaded workload trace.
pub struct SpmWorkload(WorkloadTrace);
/// Loaded cost table.
pub struct SpmCostTable(CostTable);
/// Results of one exploration.
pub struct SpmExploration(spm_dse::dse::Exploration);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SpmStatus {
    match e {
        Error::Parse { .. } => SpmStatus::Parse,
        Error::Validation(_) => SpmStatus::Validation,
        Error::Evaluation { .. } | Error::Cost(_) => SpmStatus::Evaluation,
        Error::Io { .. } => SpmStatus::Io,
        Error::Usage(_) => SpmStatus::Usage,
    }
}

fn guard(f: impl FnOnce() -> Result<(), SpmStatus>) -> SpmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SpmStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            SpmStatus::Panic
        }
    }
}

fn fail(e: Error) -> SpmStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> SpmStatus {
    set_error(format!("{what} is null"));
    SpmStatus::NullArgument
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, SpmStatus> {
    if p.is_null() {
        return Err(null("path"));
    }
    match CStr::from_ptr(p).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not UTF-8".into());
            Err(SpmStatus::Usage)
        }
    }
}

unsafe fn obj<'a, T>(p: *const T, what: &str) -> Result<&'a T, SpmStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

fn constraints(c: Option<&SpmConstraints>) -> Result<ExplorationConstraints, SpmStatus> {
    let mut out = ExplorationConstraints::default();
    let Some(c) = c else { return Ok(out) };
    out.max_shared_size = (c.max_shared_size > 0).then_some(c.max_shared_size);
    out.shared_ports = (c.shared_ports > 0).then_some(c.shared_ports);
    if c.families != 0 {
        out.families = [(SPM_FAMILY_SMP, OrgKind::Smp), (SPM_FAMILY_SEP, OrgKind::Sep), (SPM_FAMILY_HY, OrgKind::Hy)]
            .into_iter()
            .filter(|(bit, _)| c.families & bit != 0)
            .map(|(_, k)| k)
            .collect();
    }
    out.power_gating = match c.power_gating {
        SpmPgMode::Both => PgMode::Both,
        SpmPgMode::OnlyGated => PgMode::OnlyPg,
        SpmPgMode::OnlyUngated => PgMode::OnlyNonPg,
    };
    if c.banks > 0 {
        out.banks = c.banks;
    }
    out.validate().map_err(fail)?;
    Ok(out)
}

fn to_c(r: &EvalSummary) -> SpmResult {
    let o = &r.organization;
    SpmResult {
        config_id: r.config_id,
        kind: o.kind as u32,
        power_gated: o.power_gated,
        size_b: Mem::ALL.map(|m| o.spec(m).size),
        sectors: Mem::ALL.map(|m| o.spec(m).sectors),
        ports: Mem::ALL.map(|m| o.spec(m).ports),
        area_mm2: r.area_mm2,
        energy_j: r.energy_j,
        dynamic_j: r.dynamic_j,
        static_j: r.static_j,
        wakeup_j: r.wakeup_j,
        required_shared_ports: r.required_shared_ports,
    }
}

/// Loads a workload JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spm_workload_load(path: *const c_char, out: *mut *mut SpmWorkload) -> SpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = load_workload(path_arg(path)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpmWorkload(t)));
        Ok(())
    })
}

/// # Safety
/// `w` must come from [`spm_workload_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn spm_workload_free(w: *mut SpmWorkload) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_workload_operation_count(w: *const SpmWorkload, out: *mut usize) -> SpmStatus {
    guard(|| {
        let w = obj(w, "workload")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = w.0.operations.len();
        Ok(())
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_workload_peak(w: *const SpmWorkload, out: *mut SpmPeakUsage) -> SpmStatus {
    guard(|| {
        let w = obj(w, "workload")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = peak_usage(&w.0);
        *out = SpmPeakUsage { max_data: p.max_data, max_weight: p.max_weight, max_acc: p.max_acc, max_sum: p.max_sum };
        Ok(())
    })
}

/// SMP shared size and SEP (data, weight, acc) sizes in bytes.
///
/// # Safety
/// `w` must be valid; `smp` and `sep` must point to 1 and 3 `uint64_t`.
#[no_mangle]
pub unsafe extern "C" fn spm_workload_sizing(w: *const SpmWorkload, smp: *mut u64, sep: *mut u64) -> SpmStatus {
    guard(|| {
        let w = obj(w, "workload")?;
        if smp.is_null() || sep.is_null() {
            return Err(null("out"));
        }
        *smp = size_smp(&w.0).map_err(fail)?;
        let (d, wt, a) = size_sep(&w.0).map_err(fail)?;
        *sep = d;
        *sep.add(1) = wt;
        *sep.add(2) = a;
        Ok(())
    })
}

/// Number of configurations an exploration would evaluate. `c` may be null.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_count_configurations(
    w: *const SpmWorkload,
    c: *const SpmConstraints,
    out: *mut u64,
) -> SpmStatus {
    guard(|| {
        let w = obj(w, "workload")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = constraints(c.as_ref())?;
        *out = count_all(&w.0, &c).map_err(fail)?;
        Ok(())
    })
}

/// Loads a cost-table JSON file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn spm_cost_table_load(path: *const c_char, out: *mut *mut SpmCostTable) -> SpmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let t = load_cost_table(path_arg(path)?).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpmCostTable(t)));
        Ok(())
    })
}

/// # Safety
/// `t` must come from [`spm_cost_table_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn spm_cost_table_free(t: *mut SpmCostTable) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Evaluates every configuration. `c` may be null; `jobs` 0 uses all cores.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_explore(
    w: *const SpmWorkload,
    t: *const SpmCostTable,
    c: *const SpmConstraints,
    jobs: usize,
    out: *mut *mut SpmExploration,
) -> SpmStatus {
    guard(|| {
        let w = obj(w, "workload")?;
        let t = obj(t, "cost table")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = constraints(c.as_ref())?;
        let ex = explore(&w.0, &t.0, &c, jobs).map_err(fail)?;
        *out = Box::into_raw(Box::new(SpmExploration(ex)));
        Ok(())
    })
}

/// # Safety
/// `e` must come from [`spm_explore`] or be null.
#[no_mangle]
pub unsafe extern "C" fn spm_exploration_free(e: *mut SpmExploration) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_exploration_len(e: *const SpmExploration, out: *mut usize) -> SpmStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = e.0.results.len();
        Ok(())
    })
}

/// Copies result `index` (which equals its config id).
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn spm_exploration_get(e: *const SpmExploration, index: usize, out: *mut SpmResult) -> SpmStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = e.0.results.get(index).ok_or_else(|| {
            set_error(format!("index {index} out of range ({} results)", e.0.results.len()));
            SpmStatus::OutOfRange
        })?;
        *out = to_c(r);
        Ok(())
    })
}

/// Writes up to `cap` Pareto-optimal config ids to `ids` and the full front
/// size to `len`. Call with `cap` 0 to size the buffer.
///
/// # Safety
/// `ids` must hold `cap` elements (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn spm_exploration_pareto(
    e: *const SpmExploration,
    ids: *mut u64,
    cap: usize,
    len: *mut usize,
) -> SpmStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        if len.is_null() || (cap > 0 && ids.is_null()) {
            return Err(null("out"));
        }
        let front = pareto_front(&e.0.results).map_err(fail)?;
        *len = front.len();
        for (i, r) in front.iter().take(cap).enumerate() {
            *ids.add(i) = r.config_id;
        }
        Ok(())
    })
}

/// Writes the report bundle of an exploration to `dir`.
///
/// # Safety
/// Pointers must be valid and `dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn spm_exploration_write_report(
    e: *const SpmExploration,
    w: *const SpmWorkload,
    t: *const SpmCostTable,
    dir: *const c_char,
) -> SpmStatus {
    guard(|| {
        let e = obj(e, "exploration")?;
        let w = obj(w, "workload")?;
        let t = obj(t, "cost table")?;
        let dir = path_arg(dir)?;
        spm_dse::report::emit(&w.0, &t.0, &e.0, &dir).map_err(fail)?;
        Ok(())
    })
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `cap > 0`) and returns its full length in bytes.
///
/// # Safety
/// `buf` must hold `cap` bytes (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn spm_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if cap > 0 && !buf.is_null() {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn spm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
