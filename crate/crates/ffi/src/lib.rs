//! C ABI for the snowsim toolkit.
//!
//! Every function returns a [`SnowsimStatus`]; results come back through
//! out-pointers. On failure a message is kept per thread and can be read
//! with [`snowsim_last_error`]. Stateful objects are opaque handles that
//! the caller releases with the matching `_free` function. Panics never
//! cross the boundary; they surface as [`SnowsimStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use snowsim::dag::{AvalancheParams, DagState, Hash32};
use snowsim::markov::{
    absorption_probability, build_snowflake_chain, expected_absorption_time, feasibility_search,
    Fixed,
};
use snowsim::prob::{hyper_tail, TailQuery};
use snowsim::sim::{run_slush, run_snow, NetworkConfig, Strategy};
use snowsim::{Color, Error, ProtocolParams, SampleCounts, SnowState, Variant};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnowsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Protocol = 4,
    Lookup = 5,
    Dependency = 6,
    Validation = 7,
    Domain = 8,
    /// No parameter choice meets the requested bound.
    Infeasible = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnowsimColor {
    Red = 0,
    Blue = 1,
    Unset = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnowsimVariant {
    Slush = 0,
    Snowflake = 1,
    Snowball = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnowsimStrategy {
    None = 0,
    Refuse = 1,
    BalanceKeeper = 2,
    MinorityPush = 3,
}

/// Parameters found by [`snowsim_design`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnowsimDesign {
    pub n: u64,
    pub b: u64,
    pub c: u64,
    pub k: u64,
    pub a: u64,
    pub beta: u64,
    pub delta: u64,
    pub s_ps: u64,
    pub phi: u64,
    pub eps: f64,
    pub c1_prob: f64,
    pub c2_prob: f64,
    pub failure_bound: f64,
}

/// Summary of one [`snowsim_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SnowsimRunSummary {
    pub rounds_used: u64,
    pub per_node_iterations: f64,
    pub decided: u64,
    pub final_reds: u64,
    pub messages_sent: u64,
    pub safety_violation: bool,
}

/// Opaque single-node Snow state.
pub struct SnowsimSnow {
    state: SnowState,
    params: ProtocolParams,
}

/// Opaque Avalanche DAG of one node.
pub struct SnowsimDag {
    dag: DagState,
}

struct Failure(SnowsimStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Argument(_) => SnowsimStatus::InvalidArgument,
            Error::Config(_) => SnowsimStatus::Config,
            Error::Protocol(_) => SnowsimStatus::Protocol,
            Error::Lookup(_) => SnowsimStatus::Lookup,
            Error::Dependency(_) => SnowsimStatus::Dependency,
            Error::Validation(_) => SnowsimStatus::Validation,
            Error::Domain(_) => SnowsimStatus::Domain,
        };
        Failure(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SnowsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnowsimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            SnowsimStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(SnowsimStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn read_id(p: *const u8) -> Result<Hash32, Failure> {
    if p.is_null() {
        return Err(null("vertex id"));
    }
    let mut id = [0u8; 32];
    ptr::copy_nonoverlapping(p, id.as_mut_ptr(), 32);
    Ok(Hash32(id))
}

fn to_color(c: Color) -> SnowsimColor {
    match c {
        Color::Red => SnowsimColor::Red,
        Color::Blue => SnowsimColor::Blue,
        Color::Unset => SnowsimColor::Unset,
    }
}

fn from_color(c: SnowsimColor) -> Color {
    match c {
        SnowsimColor::Red => Color::Red,
        SnowsimColor::Blue => Color::Blue,
        SnowsimColor::Unset => Color::Unset,
    }
}

fn from_variant(v: SnowsimVariant) -> Variant {
    match v {
        SnowsimVariant::Slush => Variant::Slush,
        SnowsimVariant::Snowflake => Variant::Snowflake,
        SnowsimVariant::Snowball => Variant::Snowball,
    }
}

fn from_strategy(s: SnowsimStrategy) -> Strategy {
    match s {
        SnowsimStrategy::None => Strategy::None,
        SnowsimStrategy::Refuse => Strategy::Refuse,
        SnowsimStrategy::BalanceKeeper => Strategy::BalanceKeeper,
        SnowsimStrategy::MinorityPush => Strategy::MinorityPush,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snowsim_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains NUL"),
    };
    VERSION.as_ptr()
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn snowsim_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// `P[X >= a]` for `X ~ Hypergeometric(n, x, k)`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn snowsim_hyper_tail(n: u64, x: u64, k: u64, a: u64, out: *mut f64) -> SnowsimStatus {
    guard(|| {
        let out = out_ptr(out)?;
        *out = hyper_tail(&TailQuery::new(n, x, k, a)?);
        Ok(())
    })
}

unsafe fn out_ptr<'a, T>(p: *mut T) -> Result<&'a mut T, Failure> {
    out(p, "output pointer")
}

/// Absorption probability at all-blue and expected absorption steps for
/// the chain of `c` correct and `b` Byzantine nodes started at `start`
/// red nodes.
///
/// # Safety
/// Output pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_absorption(
    c: u64,
    b: u64,
    k: u64,
    a: u64,
    start: u64,
    out_blue: *mut f64,
    out_steps: *mut f64,
) -> SnowsimStatus {
    guard(|| {
        let blue = out_ptr(out_blue)?;
        let steps = out_ptr(out_steps)?;
        let chain = build_snowflake_chain(c, b, k, a, None)?;
        *blue = absorption_probability(&chain, start as usize)?;
        *steps = expected_absorption_time(&chain, start as usize)?;
        Ok(())
    })
}

/// Safety design for `n` nodes with `b` Byzantine at failure budget `eps`
/// over `phi` rounds, holding `k` fixed. Returns
/// [`SnowsimStatus::Infeasible`] when no design exists.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_design(
    n: u64,
    b: u64,
    k: u64,
    eps: f64,
    phi: u64,
    out: *mut SnowsimDesign,
) -> SnowsimStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let d = feasibility_search(n, b, eps, phi, Fixed::K(k))?.ok_or_else(|| {
            Failure(
                SnowsimStatus::Infeasible,
                format!("no design for n = {n}, b = {b}, k = {k}, eps = {eps}"),
            )
        })?;
        *out = SnowsimDesign {
            n: d.n,
            b: d.b,
            c: d.c,
            k: d.k,
            a: d.a,
            beta: d.beta,
            delta: d.delta,
            s_ps: d.s_ps,
            phi: d.phi,
            eps: d.eps,
            c1_prob: d.c1_prob,
            c2_prob: d.c2_prob,
            failure_bound: d.failure_bound,
        };
        Ok(())
    })
}

/// One global-scheduler run. Slush requires `b = 0`, stops at unanimity,
/// and reads `beta` as its per-node round budget; the other variants run
/// until every correct node decided or `phi` rounds passed.
///
/// # Safety
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_run(
    c: u64,
    b: u64,
    k: u32,
    a: u32,
    beta: u32,
    phi: u64,
    strategy: SnowsimStrategy,
    variant: SnowsimVariant,
    initial_reds: u64,
    seed: u64,
    out: *mut SnowsimRunSummary,
) -> SnowsimStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let params = ProtocolParams::new(k, a, beta, beta)?;
        let cfg = NetworkConfig::new(c as usize, b as usize, params, phi, from_strategy(strategy), seed)?;
        let o = match from_variant(variant) {
            Variant::Slush => run_slush(&cfg, initial_reds as usize)?,
            v => run_snow(&cfg, v, initial_reds as usize)?,
        };
        *out = SnowsimRunSummary {
            rounds_used: o.rounds_used,
            per_node_iterations: o.per_node_iterations,
            decided: o.decisions.iter().flatten().count() as u64,
            final_reds: o.final_reds as u64,
            messages_sent: o.messages_sent,
            safety_violation: o.safety_violation,
        };
        Ok(())
    })
}

/// Creates a node state with initial color `color`.
///
/// # Safety
/// `out` must be null or writable; the handle is released with
/// [`snowsim_snow_free`].
#[no_mangle]
pub unsafe extern "C" fn snowsim_snow_new(
    variant: SnowsimVariant,
    color: SnowsimColor,
    k: u32,
    a: u32,
    beta: u32,
    out: *mut *mut SnowsimSnow,
) -> SnowsimStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let params = ProtocolParams::new(k, a, beta, beta.max(1))?;
        let state = SnowState::new(from_variant(variant), from_color(color));
        *out = Box::into_raw(Box::new(SnowsimSnow { state, params }));
        Ok(())
    })
}

/// Feeds one sample result of `red` and `blue` answers.
///
/// # Safety
/// `h` must be a live handle from [`snowsim_snow_new`].
#[no_mangle]
pub unsafe extern "C" fn snowsim_snow_on_sample(h: *mut SnowsimSnow, red: u32, blue: u32) -> SnowsimStatus {
    guard(|| {
        let h = out(h, "handle")?;
        h.state.on_sample(&h.params, SampleCounts::new(red, blue))?;
        Ok(())
    })
}

/// Current color and decision (`Unset` while undecided).
///
/// # Safety
/// `h` must be a live handle; output pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_snow_state(
    h: *const SnowsimSnow,
    out_color: *mut SnowsimColor,
    out_decided: *mut SnowsimColor,
) -> SnowsimStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        *out_ptr(out_color)? = to_color(h.state.col);
        *out_ptr(out_decided)? = to_color(h.state.decided.unwrap_or(Color::Unset));
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snowsim_snow_free(h: *mut SnowsimSnow) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Creates a DAG whose genesis vertex has `genesis_outputs` outputs.
///
/// # Safety
/// `out` must be null or writable; release with [`snowsim_dag_free`].
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_new(
    k: u32,
    a: u32,
    beta1: u32,
    beta2: u32,
    genesis_outputs: u32,
    out: *mut *mut SnowsimDag,
) -> SnowsimStatus {
    guard(|| {
        let out = out_ptr(out)?;
        let dag = DagState::new(AvalancheParams::new(k, a, beta1, beta2)?, genesis_outputs)?;
        *out = Box::into_raw(Box::new(SnowsimDag { dag }));
        Ok(())
    })
}

/// Issues a transaction with payload `data` spending genesis output
/// `output`, and writes the 32-byte id of its vertex to `out_id`.
///
/// # Safety
/// `h` must be a live handle, `data` must point to `len` readable bytes
/// (or be null with `len = 0`), and `out_id` to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_spend_genesis(
    h: *mut SnowsimDag,
    data: *const u8,
    len: usize,
    output: u32,
    out_id: *mut u8,
) -> SnowsimStatus {
    guard(|| {
        let h = out(h, "handle")?;
        if out_id.is_null() {
            return Err(null("output id"));
        }
        let payload = match (data.is_null(), len) {
            (_, 0) => Vec::new(),
            (true, _) => return Err(null("data")),
            (false, _) => std::slice::from_raw_parts(data, len).to_vec(),
        };
        let op = *h.dag.genesis_outputs().get(output as usize).ok_or_else(|| {
            Failure(SnowsimStatus::InvalidArgument, format!("genesis has no output {output}"))
        })?;
        let v = h.dag.on_generate_tx(payload, vec![op], 1)?;
        ptr::copy_nonoverlapping(v[0].id.0.as_ptr(), out_id, 32);
        Ok(())
    })
}

/// Records the query result for a vertex; writes how many vertices became
/// accepted.
///
/// # Safety
/// `h` must be a live handle, `id` must point to 32 readable bytes.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_record_query(
    h: *mut SnowsimDag,
    id: *const u8,
    yes_votes: u32,
    out_accepted: *mut usize,
) -> SnowsimStatus {
    guard(|| {
        let h = out(h, "handle")?;
        let id = read_id(id)?;
        let accepted = h.dag.record_query_result(&id, yes_votes)?;
        if let Some(o) = out_accepted.as_mut() {
            *o = accepted.len();
        }
        Ok(())
    })
}

/// Confidence and acceptance of a vertex.
///
/// # Safety
/// `h` must be a live handle, `id` must point to 32 readable bytes, and
/// output pointers must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_vertex(
    h: *const SnowsimDag,
    id: *const u8,
    out_confidence: *mut u64,
    out_accepted: *mut bool,
) -> SnowsimStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let id = read_id(id)?;
        *out_ptr(out_confidence)? = h.dag.confidence(&id)?;
        *out_ptr(out_accepted)? = h.dag.is_accepted(&id)?;
        Ok(())
    })
}

/// Number of vertices, genesis included; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_len(h: *const SnowsimDag) -> usize {
    h.as_ref().map_or(0, |h| h.dag.len())
}

/// The DAG as JSON lines. Free the string with [`snowsim_string_free`].
///
/// # Safety
/// `h` must be a live handle and `out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_export(h: *const SnowsimDag, out: *mut *mut c_char) -> SnowsimStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("handle"))?;
        let out = out_ptr(out)?;
        let text = CString::new(h.dag.export_jsonl())
            .map_err(|e| Failure(SnowsimStatus::Domain, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snowsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snowsim_dag_free(h: *mut SnowsimDag) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
